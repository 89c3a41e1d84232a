//! Toy texture classification with a trainable wavelet pooling unit.
//!
//! Model: wavelet unit (one channel) -> flatten -> linear classifier ->
//! softmax cross-entropy, optimized with plain mini-batch SGD. All
//! randomness comes from ChaCha8 streams derived from the config seed, so a
//! config fully determines the run (apart from the wall-clock field).

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dwt2d::Image;
use crate::error::{Error, Result};
use crate::lifting::{build_filters, InitMode, LiftingParams, DEFAULT_A3_INIT};
use crate::unit::{unit_backward, unit_forward, WaveletUnitParams};

pub const CONFIG_VERSION: u32 = 1;
pub const REPORT_VERSION: u32 = 1;

const DATA_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub classes: usize,
    pub image_size: usize,
    pub samples_per_class: usize,
    /// Standard deviation of the additive Gaussian pixel noise.
    pub noise: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            image_size: 16,
            samples_per_class: 50,
            noise: 0.08,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.classes < 2 {
            errs.push(format!(
                "dataset.classes: need at least 2, got {}",
                self.classes
            ));
        }
        if self.image_size < 2 || !self.image_size.is_multiple_of(2) {
            errs.push(format!(
                "dataset.image_size: must be even and >= 2, got {}",
                self.image_size
            ));
        }
        if self.samples_per_class < 5 {
            errs.push(format!(
                "dataset.samples_per_class: need at least 5 for an 80/20 split, got {}",
                self.samples_per_class
            ));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            errs.push(format!(
                "dataset.noise: must be finite and >= 0, got {}",
                self.noise
            ));
        }
        schema_result(errs)
    }

    /// Training samples per class under the fixed 80/20 split.
    pub fn train_per_class(&self) -> usize {
        self.samples_per_class * 4 / 5
    }

    /// `(orientation, cycles per pixel)` of a class. Even classes are
    /// horizontal stripes (intensity varies down the rows), odd classes
    /// vertical; each further pair halves the frequency band.
    pub fn class_pattern(&self, class: usize) -> (Orientation, f64) {
        let orientation = if class.is_multiple_of(2) {
            Orientation::Horizontal
        } else {
            Orientation::Vertical
        };
        (orientation, 0.4 / (1 + class / 2) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Generates balanced stripe textures with random phase and Gaussian noise,
/// clamped to `[0, 1]`. The first 80% of each class goes to the training set.
pub fn make_toy_dataset(spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DATA_STREAM);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let n = spec.image_size;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..spec.classes {
        let (orientation, freq) = spec.class_pattern(class);
        for i in 0..spec.samples_per_class {
            let phase = rng.random_range(0.0..2.0 * PI);
            let mut pixels = Vec::with_capacity(n * n);
            for r in 0..n {
                for c in 0..n {
                    let u = match orientation {
                        Orientation::Horizontal => r,
                        Orientation::Vertical => c,
                    } as f64;
                    let v =
                        0.5 + 0.35 * (2.0 * PI * freq * u + phase).sin() + noise.sample(&mut rng);
                    pixels.push(v.clamp(0.0, 1.0));
                }
            }
            let sample = Sample {
                image: Image::from_row_slice(n, n, &pixels)?,
                label: class,
            };
            if i < spec.train_per_class() {
                train.push(sample);
            } else {
                test.push(sample);
            }
        }
    }
    Ok(Dataset { train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningRates {
    pub lifting: f64,
    pub combiner: f64,
    pub classifier: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            lifting: 0.01,
            combiner: 0.1,
            classifier: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub version: u32,
    pub seed: u64,
    /// Number of lifting steps.
    pub steps: usize,
    pub init: InitMode,
    /// Third coefficient for the `near-zero-a3` init.
    pub a3_init: f64,
    pub lr: LearningRates,
    pub epochs: usize,
    pub batch_size: usize,
    /// Train the combiner bias; when false it stays at 0.
    pub use_bias: bool,
    pub dataset: DatasetSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 7,
            steps: 2,
            init: InitMode::Bior15,
            a3_init: DEFAULT_A3_INIT,
            lr: LearningRates::default(),
            epochs: 50,
            batch_size: 8,
            use_bias: true,
            dataset: DatasetSpec::default(),
        }
    }
}

fn schema_result(errs: Vec<String>) -> Result<()> {
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(errs.join("\n")))
    }
}

enum Kind {
    UInt,
    Number,
    Bool,
    Str,
    Object(&'static [(&'static str, Kind)]),
}

const LR_FIELDS: &[(&str, Kind)] = &[
    ("lifting", Kind::Number),
    ("combiner", Kind::Number),
    ("classifier", Kind::Number),
];

const DATASET_FIELDS: &[(&str, Kind)] = &[
    ("classes", Kind::UInt),
    ("image_size", Kind::UInt),
    ("samples_per_class", Kind::UInt),
    ("noise", Kind::Number),
];

const CONFIG_FIELDS: &[(&str, Kind)] = &[
    ("version", Kind::UInt),
    ("seed", Kind::UInt),
    ("steps", Kind::UInt),
    ("init", Kind::Str),
    ("a3_init", Kind::Number),
    ("lr", Kind::Object(LR_FIELDS)),
    ("epochs", Kind::UInt),
    ("batch_size", Kind::UInt),
    ("use_bias", Kind::Bool),
    ("dataset", Kind::Object(DATASET_FIELDS)),
];

/// Checks every field's presence and JSON type, collecting all violations.
fn check_object(v: &Value, path: &str, fields: &[(&str, Kind)], errs: &mut Vec<String>) {
    let Some(obj) = v.as_object() else {
        errs.push(format!(
            "{}: expected an object",
            if path.is_empty() { "<root>" } else { path }
        ));
        return;
    };
    let join = |k: &str| {
        if path.is_empty() {
            k.to_string()
        } else {
            format!("{path}.{k}")
        }
    };
    for key in obj.keys() {
        if !fields.iter().any(|(name, _)| name == key) {
            errs.push(format!("{}: unknown field", join(key)));
        }
    }
    for (name, kind) in fields {
        let field = join(name);
        let Some(value) = obj.get(*name) else {
            errs.push(format!("{field}: missing"));
            continue;
        };
        let ok = match kind {
            Kind::UInt => value.is_u64(),
            Kind::Number => value.is_number(),
            Kind::Bool => value.is_boolean(),
            Kind::Str => value.is_string(),
            Kind::Object(sub) => {
                check_object(value, &field, sub, errs);
                true
            }
        };
        if !ok {
            let expected = match kind {
                Kind::UInt => "a non-negative integer",
                Kind::Number => "a number",
                Kind::Bool => "a boolean",
                Kind::Str => "a string",
                Kind::Object(_) => unreachable!(),
            };
            errs.push(format!("{field}: expected {expected}, got {value}"));
        }
    }
}

impl TrainConfig {
    /// Parses and validates a JSON config, reporting every violation.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("<root>: malformed JSON: {e}")))?;
        let mut errs = Vec::new();
        check_object(&value, "", CONFIG_FIELDS, &mut errs);
        if let Some(init) = value.get("init").and_then(Value::as_str) {
            if InitMode::parse(init).is_none() {
                errs.push(format!(
                    "init: unknown mode {init:?} (expected haar, bior1.3, bior1.5 or near-zero-a3)"
                ));
            }
        }
        schema_result(errs)?;
        let cfg: TrainConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("<root>: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.version != CONFIG_VERSION {
            errs.push(format!(
                "version: unsupported {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        for (name, lr) in [
            ("lr.lifting", self.lr.lifting),
            ("lr.combiner", self.lr.combiner),
            ("lr.classifier", self.lr.classifier),
        ] {
            if !(lr.is_finite() && lr >= 0.0) {
                errs.push(format!("{name}: must be finite and >= 0, got {lr}"));
            }
        }
        if self.epochs == 0 {
            errs.push("epochs: must be positive".into());
        }
        if self.batch_size == 0 {
            errs.push("batch_size: must be positive".into());
        }
        if !self.a3_init.is_finite() {
            errs.push("a3_init: must be finite".into());
        }
        if let Some(required) = self.init.required_steps() {
            if required != self.steps {
                errs.push(format!(
                    "steps: init {} needs {} lifting steps, got {}",
                    self.init.name(),
                    required,
                    self.steps
                ));
            }
        }
        if let Err(Error::Config(msg)) = self.dataset.validate() {
            errs.extend(msg.lines().map(str::to_string));
        }
        schema_result(errs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub version: u32,
    pub status: RunStatus,
    /// 1-based epoch at which the loss became non-finite.
    pub diverged_at_epoch: Option<usize>,
    /// Mean training loss evaluated after each epoch.
    pub loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub initial_params: Vec<f64>,
    pub final_params: Vec<f64>,
    pub final_h0: Vec<f64>,
    pub final_h1: Vec<f64>,
    pub combiner_weights: [f64; 4],
    pub combiner_bias: f64,
    pub wall_clock_seconds: f64,
}

impl TrainReport {
    pub fn final_train_accuracy(&self) -> f64 {
        self.train_accuracy.last().copied().unwrap_or(0.0)
    }

    pub fn final_test_accuracy(&self) -> f64 {
        self.test_accuracy.last().copied().unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Unit + linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub unit: WaveletUnitParams,
    /// `classes x features`.
    pub classifier: DMatrix<f64>,
    pub classifier_bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub d_weights: [f64; 4],
    pub d_bias: f64,
    pub d_lifting: Vec<f64>,
    pub d_classifier: DMatrix<f64>,
    pub d_classifier_bias: DVector<f64>,
}

fn flatten(y: &DMatrix<f64>) -> DVector<f64> {
    // row-major
    DVector::from_iterator(y.len(), y.transpose().iter().copied())
}

fn log_softmax(logits: &DVector<f64>) -> DVector<f64> {
    let max = logits.max();
    let lse = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    logits.map(|v| v - lse)
}

impl Model {
    pub fn init(cfg: &TrainConfig, features: usize) -> Result<Self> {
        let lifting = cfg.init.params(cfg.steps, cfg.a3_init)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(INIT_STREAM);
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        let classes = cfg.dataset.classes;
        Ok(Self {
            unit: WaveletUnitParams::new(lifting, 1),
            classifier: DMatrix::from_fn(classes, features, |_, _| normal.sample(&mut rng)),
            classifier_bias: DVector::zeros(classes),
        })
    }

    pub fn logits(&self, image: &Image) -> Result<DVector<f64>> {
        let (y, _) = unit_forward(std::slice::from_ref(image), &self.unit)?;
        Ok(&self.classifier * flatten(&y[0]) + &self.classifier_bias)
    }

    pub fn predict(&self, image: &Image) -> Result<usize> {
        Ok(self.logits(image)?.argmax().0)
    }

    /// Cross-entropy loss of one sample and its gradients.
    pub fn loss_and_gradients(&self, sample: &Sample) -> Result<(f64, ModelGradients)> {
        let (y, cache) = unit_forward(std::slice::from_ref(&sample.image), &self.unit)?;
        let features = flatten(&y[0]);
        let logits = &self.classifier * &features + &self.classifier_bias;
        let logp = log_softmax(&logits);
        let loss = -logp[sample.label];
        let mut dlogits = logp.map(f64::exp);
        dlogits[sample.label] -= 1.0;
        let d_classifier = &dlogits * features.transpose();
        let dfeat = self.classifier.tr_mul(&dlogits);
        let (rows, cols) = y[0].shape();
        let dy = DMatrix::from_row_slice(rows, cols, dfeat.as_slice());
        let g = unit_backward(&[dy], &cache, &self.unit)?;
        Ok((
            loss,
            ModelGradients {
                d_weights: g.d_weights[0],
                d_bias: g.d_bias[0],
                d_lifting: g.d_lifting,
                d_classifier,
                d_classifier_bias: dlogits,
            },
        ))
    }

    /// Mean loss and accuracy over a sample set.
    pub fn evaluate(&self, samples: &[Sample]) -> Result<(f64, f64)> {
        let mut loss = 0.0;
        let mut correct = 0usize;
        for s in samples {
            let logits = self.logits(&s.image)?;
            loss -= log_softmax(&logits)[s.label];
            if logits.argmax().0 == s.label {
                correct += 1;
            }
        }
        let n = samples.len().max(1) as f64;
        Ok((loss / n, correct as f64 / n))
    }

    fn sgd_step(
        &mut self,
        grads: &ModelGradients,
        scale: f64,
        lr: &LearningRates,
        use_bias: bool,
    ) -> Result<()> {
        for (w, g) in self.unit.weights[0].iter_mut().zip(grads.d_weights) {
            *w -= lr.combiner * scale * g;
        }
        if use_bias {
            self.unit.bias[0] -= lr.combiner * scale * grads.d_bias;
        }
        let a: Vec<f64> = self
            .unit
            .lifting
            .as_slice()
            .iter()
            .zip(&grads.d_lifting)
            .map(|(a, g)| a - lr.lifting * scale * g)
            .collect();
        self.unit.lifting = LiftingParams::new(a)?;
        self.classifier -= &grads.d_classifier * (lr.classifier * scale);
        self.classifier_bias -= &grads.d_classifier_bias * (lr.classifier * scale);
        Ok(())
    }
}

fn accumulate(total: &mut Option<ModelGradients>, g: ModelGradients) {
    match total {
        None => *total = Some(g),
        Some(t) => {
            for (a, b) in t.d_weights.iter_mut().zip(g.d_weights) {
                *a += b;
            }
            t.d_bias += g.d_bias;
            for (a, b) in t.d_lifting.iter_mut().zip(&g.d_lifting) {
                *a += b;
            }
            t.d_classifier += g.d_classifier;
            t.d_classifier_bias += g.d_classifier_bias;
        }
    }
}

/// Result of a training run, including the trained model.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub model: Model,
}

pub fn train(cfg: &TrainConfig) -> Result<TrainReport> {
    train_model(cfg).map(|o| o.report)
}

pub fn train_model(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let data = make_toy_dataset(&cfg.dataset, cfg.seed)?;
    let half = cfg.dataset.image_size / 2;
    let mut model = Model::init(cfg, half * half)?;
    let initial_params = model.unit.lifting.as_slice().to_vec();

    let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    let mut loss = Vec::with_capacity(cfg.epochs);
    let mut train_accuracy = Vec::with_capacity(cfg.epochs);
    let mut test_accuracy = Vec::with_capacity(cfg.epochs);
    let mut diverged_at_epoch = None;

    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        for batch in order.chunks(cfg.batch_size) {
            let mut total = None;
            for &i in batch {
                let (l, g) = model.loss_and_gradients(&data.train[i])?;
                if !l.is_finite() {
                    diverged_at_epoch = Some(epoch);
                    break 'epochs;
                }
                accumulate(&mut total, g);
            }
            if let Some(g) = total {
                let scale = 1.0 / batch.len() as f64;
                if model.sgd_step(&g, scale, &cfg.lr, cfg.use_bias).is_err() {
                    diverged_at_epoch = Some(epoch);
                    break 'epochs;
                }
            }
        }
        let (l, acc) = model.evaluate(&data.train)?;
        if !l.is_finite() {
            diverged_at_epoch = Some(epoch);
            break;
        }
        let (_, test_acc) = model.evaluate(&data.test)?;
        loss.push(l);
        train_accuracy.push(acc);
        test_accuracy.push(test_acc);
    }

    let fp = build_filters(&model.unit.lifting);
    let report = TrainReport {
        version: REPORT_VERSION,
        status: if diverged_at_epoch.is_some() {
            RunStatus::Diverged
        } else {
            RunStatus::Completed
        },
        diverged_at_epoch,
        loss,
        train_accuracy,
        test_accuracy,
        initial_params,
        final_params: model.unit.lifting.as_slice().to_vec(),
        final_h0: fp.h0().to_vec(),
        final_h1: fp.h1().to_vec(),
        combiner_weights: model.unit.weights[0],
        combiner_bias: model.unit.bias[0],
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome { report, model })
}
