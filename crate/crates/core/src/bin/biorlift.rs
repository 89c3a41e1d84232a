use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use biorlift::formats::{self, FiltersDoc, Pgm};
use biorlift::lifting::{self, InitMode, LiftingParams, DEFAULT_A3_INIT};
use biorlift::training::{self, DatasetSpec, RunStatus, TrainConfig};
use biorlift::{spectral, Dwt2Plan, Error, Result};

#[derive(Parser)]
#[command(
    name = "biorlift",
    version,
    about = "Lifting-based tunable biorthogonal wavelets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FilterArgs {
    /// Number of lifting steps (defaults to what --init needs, else 0)
    #[arg(long)]
    steps: Option<usize>,
    /// Comma-separated lifting coefficients a_1,..,a_N
    #[arg(long, allow_hyphen_values = true, conflicts_with = "init")]
    params: Option<String>,
    /// haar | bior1.3 | bior1.5 | near-zero-a3
    #[arg(long)]
    init: Option<String>,
    /// a_3 used by --init near-zero-a3
    #[arg(long, default_value_t = DEFAULT_A3_INIT, allow_hyphen_values = true)]
    a3: f64,
}

impl FilterArgs {
    fn resolve(&self) -> Result<LiftingParams> {
        if let Some(text) = &self.params {
            let a = text
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad lifting coefficient {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(steps) = self.steps {
                if steps != a.len() {
                    return Err(Error::ParamCount {
                        expected: steps,
                        actual: a.len(),
                    });
                }
            }
            return LiftingParams::new(a);
        }
        let mode = match &self.init {
            Some(name) => InitMode::parse(name)
                .ok_or_else(|| Error::Config(format!("unknown init {name:?}")))?,
            None => InitMode::Haar,
        };
        let steps = self.steps.or(mode.required_steps()).unwrap_or(0);
        mode.params(steps, self.a3)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    H0,
    H1,
}

#[derive(Subcommand)]
enum Command {
    /// Print the analysis filter pair
    Filters {
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write the frequency response as CSV
    Freqz {
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long, value_enum, default_value_t = Which::H1)]
        which: Which,
        #[arg(long, default_value_t = 512)]
        samples: usize,
        /// Output file (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decompose a P5 PGM into a subband archive
    Dwt {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a PGM from a subband archive
    Idwt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the wavelet unit on the toy texture task
    Train {
        /// JSON config (built-in default if omitted)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default training config
    DefaultConfig,
    /// Write the toy dataset as PGM files plus labels.csv
    Dataset {
        /// JSON dataset spec (defaults if omitted)
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Filters { filter, format } => {
            let fp = lifting::build_filters(&filter.resolve()?);
            let out = match format {
                Format::Text => formats::filters_text(&fp),
                Format::Json => serde_json::to_string_pretty(&FiltersDoc::from(&fp))? + "\n",
            };
            write_output(None, out.as_bytes())?;
        }
        Command::Freqz {
            filter,
            which,
            samples,
            out,
        } => {
            let fp = lifting::build_filters(&filter.resolve()?);
            let (taps, branch) = match which {
                Which::H0 => (fp.h0(), spectral::Branch::H0),
                Which::H1 => (fp.h1(), spectral::Branch::H1),
            };
            let resp = spectral::freqz(taps, samples)?.with_id(spectral::FilterId {
                steps: fp.steps(),
                params: fp.params().as_slice().to_vec(),
                branch,
            });
            let mut buf = Vec::new();
            formats::write_freqz_csv(&resp, &mut buf)?;
            write_output(out.as_deref(), &buf)?;
        }
        Command::Dwt { input, filter, out } => {
            let pgm = Pgm::parse(&fs::read(&input)?)?;
            let image = pgm.to_image()?;
            let fp = lifting::build_filters(&filter.resolve()?);
            let subbands = Dwt2Plan::new(&fp, image.rows(), image.cols())?.forward(&image)?;
            fs::write(out, formats::write_archive(&subbands, pgm.maxval))?;
        }
        Command::Idwt { input, out } => {
            let (header, subbands) = formats::read_archive(&fs::read(&input)?)?;
            let fp = lifting::build_filters(&LiftingParams::new(header.params.clone())?);
            let image = Dwt2Plan::new(&fp, header.rows, header.cols)?.inverse(&subbands)?;
            fs::write(
                out,
                Pgm::from_matrix(image.matrix(), header.maxval).to_bytes(),
            )?;
        }
        Command::Train { config, out } => {
            let cfg = match config {
                Some(p) => TrainConfig::from_json(&fs::read_to_string(p)?)?,
                None => TrainConfig::default(),
            };
            let report = training::train(&cfg)?;
            write_output(out.as_deref(), (report.to_json() + "\n").as_bytes())?;
            if report.status == RunStatus::Diverged {
                eprintln!(
                    "error: training diverged at epoch {}",
                    report.diverged_at_epoch.unwrap_or(0)
                );
                return Ok(ExitCode::from(3));
            }
            eprintln!(
                "train accuracy {:.3}, test accuracy {:.3}, a = {:?}",
                report.final_train_accuracy(),
                report.final_test_accuracy(),
                report.final_params
            );
        }
        Command::DefaultConfig => {
            write_output(None, (TrainConfig::default().to_json() + "\n").as_bytes())?;
        }
        Command::Dataset { spec, seed, out } => {
            let spec = match spec {
                Some(p) => serde_json::from_str::<DatasetSpec>(&fs::read_to_string(p)?)
                    .map_err(|e| Error::Config(e.to_string()))?,
                None => DatasetSpec::default(),
            };
            let data = training::make_toy_dataset(&spec, seed)?;
            let mut labels = String::from("split,file,label\n");
            for (split, samples) in [("train", &data.train), ("test", &data.test)] {
                fs::create_dir_all(out.join(split))?;
                for (i, s) in samples.iter().enumerate() {
                    let name = format!("{split}/{i:04}_c{}.pgm", s.label);
                    fs::write(
                        out.join(&name),
                        Pgm::from_matrix(s.image.matrix(), 255).to_bytes(),
                    )?;
                    labels.push_str(&format!("{split},{name},{}\n", s.label));
                }
            }
            fs::write(out.join("labels.csv"), labels)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
