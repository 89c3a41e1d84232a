//! Single-level separable 2D decomposition.
//!
//! Rows of the image run along the vertical axis. With `L_r, H_r` acting on
//! rows and `L_c, H_c` on columns:
//!
//! ```text
//! ll = L_r X L_c^T    lh = H_r X L_c^T
//! hl = L_r X H_c^T    hh = H_r X H_c^T
//! ```
//!
//! so `lh` is high-pass vertically (horizontal edges) and `hl` is high-pass
//! horizontally (vertical edges).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{build_matrices, build_matrices_wrapped, synthesize_1d, AnalysisMatrices};
use crate::lifting::FilterPair;

/// A single-channel grid with even dimensions and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: DMatrix<f64>,
}

impl Image {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = data.shape();
        if rows == 0 || cols == 0 || rows % 2 != 0 || cols % 2 != 0 {
            return Err(Error::OddDimensions { rows, cols });
        }
        for c in 0..cols {
            for r in 0..rows {
                if !data[(r, c)].is_finite() {
                    return Err(Error::NonFiniteValue { row: r, col: c });
                }
            }
        }
        Ok(Self { data })
    }

    pub fn from_row_slice(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(rows, cols, f))
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Row-major copy of the pixels.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            out.extend(self.data.row(r).iter());
        }
        out
    }
}

/// Which filters produced a set of subbands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub steps: usize,
    pub params: Vec<f64>,
    pub alignment: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    pub ll: DMatrix<f64>,
    pub lh: DMatrix<f64>,
    pub hl: DMatrix<f64>,
    pub hh: DMatrix<f64>,
    pub provenance: Provenance,
}

impl Subbands {
    /// `(rows, cols)` of each band.
    pub fn band_shape(&self) -> (usize, usize) {
        self.ll.shape()
    }

    pub fn bands(&self) -> [&DMatrix<f64>; 4] {
        [&self.ll, &self.lh, &self.hl, &self.hh]
    }

    fn check(&self) -> Result<()> {
        let shape = self.ll.shape();
        for (name, b) in ["lh", "hl", "hh"]
            .iter()
            .zip([&self.lh, &self.hl, &self.hh])
        {
            if b.shape() != shape {
                return Err(Error::Shape(format!(
                    "{name} is {:?}, ll is {:?}",
                    b.shape(),
                    shape
                )));
            }
        }
        Ok(())
    }
}

/// Row and column analysis operators for one image size.
#[derive(Debug, Clone)]
pub struct Dwt2Plan {
    rows: AnalysisMatrices,
    cols: AnalysisMatrices,
    provenance: Provenance,
}

impl Dwt2Plan {
    pub fn new(fp: &FilterPair, rows: usize, cols: usize) -> Result<Self> {
        if !rows.is_multiple_of(2) || !cols.is_multiple_of(2) || rows == 0 || cols == 0 {
            return Err(Error::OddDimensions { rows, cols });
        }
        let support = fp.h1().len();
        if rows < support || cols < support {
            return Err(Error::ImageTooSmall {
                rows,
                cols,
                support,
            });
        }
        Ok(Self {
            rows: build_matrices(fp, rows)?,
            cols: build_matrices(fp, cols)?,
            provenance: Self::provenance_of(fp),
        })
    }

    /// Plan for feature maps that may be smaller than the filter support;
    /// the taps wrap around periodically.
    pub fn wrapped(fp: &FilterPair, rows: usize, cols: usize) -> Result<Self> {
        if !rows.is_multiple_of(2) || !cols.is_multiple_of(2) || rows == 0 || cols == 0 {
            return Err(Error::OddDimensions { rows, cols });
        }
        Ok(Self {
            rows: build_matrices_wrapped(fp, rows)?,
            cols: build_matrices_wrapped(fp, cols)?,
            provenance: Self::provenance_of(fp),
        })
    }

    fn provenance_of(fp: &FilterPair) -> Provenance {
        Provenance {
            steps: fp.steps(),
            params: fp.params().as_slice().to_vec(),
            alignment: fp.base_delay(),
        }
    }

    pub fn row_ops(&self) -> &AnalysisMatrices {
        &self.rows
    }

    pub fn col_ops(&self) -> &AnalysisMatrices {
        &self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn forward_matrix(&self, x: &DMatrix<f64>) -> Result<Subbands> {
        if x.shape() != self.shape() {
            return Err(Error::Shape(format!(
                "image is {:?}, plan expects {:?}",
                x.shape(),
                self.shape()
            )));
        }
        let xl = x * self.cols.low().transpose();
        let xh = x * self.cols.high().transpose();
        Ok(Subbands {
            ll: self.rows.low() * &xl,
            lh: self.rows.high() * &xl,
            hl: self.rows.low() * &xh,
            hh: self.rows.high() * &xh,
            provenance: self.provenance.clone(),
        })
    }

    pub fn forward(&self, x: &Image) -> Result<Subbands> {
        self.forward_matrix(x.matrix())
    }

    /// Vertical synthesis on every column, then horizontal on every row.
    pub fn inverse(&self, s: &Subbands) -> Result<Image> {
        s.check()?;
        let (rows, cols) = self.shape();
        if s.band_shape() != (rows / 2, cols / 2) {
            return Err(Error::Shape(format!(
                "bands are {:?}, plan expects {:?}",
                s.band_shape(),
                (rows / 2, cols / 2)
            )));
        }
        if s.provenance != self.provenance {
            return Err(Error::Shape(format!(
                "subband provenance {:?} does not match filters {:?}",
                s.provenance, self.provenance
            )));
        }
        let half_c = cols / 2;
        // Columns of X L_c^T and X H_c^T.
        let mut xl = DMatrix::zeros(rows, half_c);
        let mut xh = DMatrix::zeros(rows, half_c);
        for j in 0..half_c {
            let col = synthesize_1d(
                s.ll.column(j).as_slice(),
                s.lh.column(j).as_slice(),
                &self.rows,
            )?;
            xl.set_column(j, &nalgebra::DVector::from_vec(col));
            let col = synthesize_1d(
                s.hl.column(j).as_slice(),
                s.hh.column(j).as_slice(),
                &self.rows,
            )?;
            xh.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        let mut x = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            let lo: Vec<f64> = xl.row(i).iter().copied().collect();
            let hi: Vec<f64> = xh.row(i).iter().copied().collect();
            let row = synthesize_1d(&lo, &hi, &self.cols)?;
            for (j, v) in row.into_iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        Image::new(x)
    }
}

pub fn dwt2(x: &Image, fp: &FilterPair) -> Result<Subbands> {
    Dwt2Plan::new(fp, x.rows(), x.cols())?.forward(x)
}

pub fn idwt2(s: &Subbands, fp: &FilterPair) -> Result<Image> {
    let (r, c) = s.band_shape();
    Dwt2Plan::new(fp, 2 * r, 2 * c)?.inverse(s)
}
