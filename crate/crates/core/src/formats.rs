//! File formats: binary PGM, the subband archive, frequency-response CSV,
//! and filter listings.
//!
//! Subband archive layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   b"BLSUBAND"
//! header_len u32
//! header     header_len bytes of UTF-8 JSON (ArchiveHeader)
//! payload    4 grids of band_rows * band_cols f64 LE, row-major,
//!            in ll, lh, hl, hh order
//! ```

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dwt2d::{Image, Provenance, Subbands};
use crate::error::{Error, Result};
use crate::lifting::FilterPair;
use crate::spectral::FrequencyResponse;

pub const ARCHIVE_MAGIC: &[u8; 8] = b"BLSUBAND";
pub const ARCHIVE_VERSION: u32 = 1;
pub const FILTERS_VERSION: u32 = 1;
pub const FREQZ_HEADER: &str = "omega,magnitude,phase";

/// 8-bit binary graymap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    /// Row-major, `width * height` samples.
    pub pixels: Vec<u8>,
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Pgm(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pgm(format!("bad {what}")))
    }
}

impl Pgm {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 2 || &bytes[..2] != b"P5" {
            return Err(Error::Pgm("not a binary (P5) graymap".into()));
        }
        let mut rd = HeaderReader { bytes, pos: 2 };
        let width = rd.number("width")?;
        let height = rd.number("height")?;
        let maxval = rd.number("maxval")?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::Pgm(format!(
                "unsupported maxval {maxval} (need 1..=255)"
            )));
        }
        match bytes.get(rd.pos) {
            Some(b) if b.is_ascii_whitespace() => rd.pos += 1,
            _ => return Err(Error::Pgm("missing whitespace after maxval".into())),
        }
        let n = width * height;
        let raster = &bytes[rd.pos..];
        if raster.len() < n {
            return Err(Error::Pgm(format!(
                "raster has {} bytes, expected {n}",
                raster.len()
            )));
        }
        let pixels = raster[..n].to_vec();
        if let Some(&p) = pixels.iter().find(|&&p| p as usize > maxval) {
            return Err(Error::Pgm(format!("sample {p} exceeds maxval {maxval}")));
        }
        Ok(Self {
            width,
            height,
            maxval: maxval as u8,
            pixels,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Intensities mapped to `[0, 1]`.
    pub fn to_image(&self) -> Result<Image> {
        if !self.width.is_multiple_of(2)
            || !self.height.is_multiple_of(2)
            || self.width == 0
            || self.height == 0
        {
            return Err(Error::OddDimensions {
                rows: self.height,
                cols: self.width,
            });
        }
        let scale = f64::from(self.maxval);
        let values: Vec<f64> = self.pixels.iter().map(|&p| f64::from(p) / scale).collect();
        Image::from_row_slice(self.height, self.width, &values)
    }

    /// Quantizes `[0, 1]` intensities (rounding half away from zero, clamped).
    pub fn from_matrix(m: &DMatrix<f64>, maxval: u8) -> Self {
        let scale = f64::from(maxval);
        let mut pixels = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                pixels.push((m[(r, c)] * scale).round().clamp(0.0, scale) as u8);
            }
        }
        Self {
            width: m.ncols(),
            height: m.nrows(),
            maxval,
            pixels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveHeader {
    pub version: u32,
    /// Dimensions of the decomposed image.
    pub rows: usize,
    pub cols: usize,
    pub band_rows: usize,
    pub band_cols: usize,
    pub steps: usize,
    pub params: Vec<f64>,
    pub alignment: usize,
    /// Gray scale of the source image, used when writing it back.
    pub maxval: u8,
}

pub fn write_archive(s: &Subbands, maxval: u8) -> Vec<u8> {
    let (br, bc) = s.band_shape();
    let header = ArchiveHeader {
        version: ARCHIVE_VERSION,
        rows: 2 * br,
        cols: 2 * bc,
        band_rows: br,
        band_cols: bc,
        steps: s.provenance.steps,
        params: s.provenance.params.clone(),
        alignment: s.provenance.alignment,
        maxval,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + 32 * br * bc);
    out.extend_from_slice(ARCHIVE_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for band in s.bands() {
        for r in 0..br {
            for c in 0..bc {
                out.extend_from_slice(&band[(r, c)].to_le_bytes());
            }
        }
    }
    out
}

pub fn read_archive(bytes: &[u8]) -> Result<(ArchiveHeader, Subbands)> {
    if bytes.len() < 12 || &bytes[..8] != ARCHIVE_MAGIC {
        return Err(Error::Archive("bad magic".into()));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let header_end = 12usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Archive("truncated header".into()))?;
    let header: ArchiveHeader = serde_json::from_slice(&bytes[12..header_end])
        .map_err(|e| Error::Archive(format!("bad header: {e}")))?;
    if header.version != ARCHIVE_VERSION {
        return Err(Error::Archive(format!(
            "unsupported version {}",
            header.version
        )));
    }
    if header.rows != 2 * header.band_rows || header.cols != 2 * header.band_cols {
        return Err(Error::Archive(
            "band dimensions inconsistent with image dimensions".into(),
        ));
    }
    if header.params.len() != header.steps || header.alignment != 2 * header.steps {
        return Err(Error::Archive("lifting provenance inconsistent".into()));
    }
    let (br, bc) = (header.band_rows, header.band_cols);
    let payload = &bytes[header_end..];
    let expected = 4 * br * bc * 8;
    if payload.len() != expected {
        return Err(Error::Archive(format!(
            "payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut grid = || DMatrix::from_row_iterator(br, bc, values.by_ref().take(br * bc));
    let (ll, lh, hl, hh) = (grid(), grid(), grid(), grid());
    let provenance = Provenance {
        steps: header.steps,
        params: header.params.clone(),
        alignment: header.alignment,
    };
    Ok((
        header,
        Subbands {
            ll,
            lh,
            hl,
            hh,
            provenance,
        },
    ))
}

/// Machine-readable filter listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltersDoc {
    pub version: u32,
    pub steps: usize,
    pub params: Vec<f64>,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    pub base_delay: usize,
}

impl From<&FilterPair> for FiltersDoc {
    fn from(fp: &FilterPair) -> Self {
        Self {
            version: FILTERS_VERSION,
            steps: fp.steps(),
            params: fp.params().as_slice().to_vec(),
            h0: fp.h0().to_vec(),
            h1: fp.h1().to_vec(),
            base_delay: fp.base_delay(),
        }
    }
}

fn four_decimals(v: f64) -> String {
    let s = format!("{v:.4}");
    // no "-0.0000"
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn format_taps(taps: &[f64]) -> String {
    taps.iter()
        .map(|&t| four_decimals(t))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Human-readable listing with four decimals.
pub fn filters_text(fp: &FilterPair) -> String {
    format!(
        "steps: {}\nparams: {}\nh0: {}\nh1: {}\n",
        fp.steps(),
        fp.params()
            .as_slice()
            .iter()
            .map(|a| format!("{a}"))
            .collect::<Vec<_>>()
            .join(", "),
        format_taps(fp.h0()),
        format_taps(fp.h1()),
    )
}

pub fn write_freqz_csv(resp: &FrequencyResponse, mut w: impl Write) -> Result<()> {
    writeln!(w, "{FREQZ_HEADER}")?;
    for ((o, m), p) in resp.omega.iter().zip(&resp.magnitude).zip(&resp.phase) {
        writeln!(w, "{o},{m},{p}")?;
    }
    Ok(())
}
