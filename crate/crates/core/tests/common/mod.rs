//! Shared finite-difference harness for the unit gradients.

use biorlift::{unit_backward, unit_forward, Image, LiftingParams, WaveletUnitParams};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

pub struct Case {
    x: Vec<Image>,
    p: WaveletUnitParams,
    probe: Vec<DMatrix<f64>>,
}

impl Case {
    pub fn new(seed: u64, steps: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = (0..2)
            .map(|_| Image::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0)).unwrap())
            .collect();
        let p = WaveletUnitParams {
            lifting: LiftingParams::new((0..steps).map(|_| rng.random_range(-0.3..0.3)).collect())
                .unwrap(),
            weights: (0..2)
                .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
                .collect(),
            bias: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        };
        let probe = (0..2)
            .map(|_| DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        Self { x, p, probe }
    }

    /// Linear probe loss `sum probe . y`, so `dL/dy = probe`.
    fn loss(&self, x: &[Image], p: &WaveletUnitParams) -> f64 {
        let (y, _) = unit_forward(x, p).unwrap();
        y.iter().zip(&self.probe).map(|(a, b)| a.dot(b)).sum()
    }

    fn central(&self, f: impl Fn(f64) -> f64) -> f64 {
        (f(STEP) - f(-STEP)) / (2.0 * STEP)
    }

    pub fn worst_error(&self) -> [f64; 4] {
        let (_, cache) = unit_forward(&self.x, &self.p).unwrap();
        let g = unit_backward(&self.probe, &cache, &self.p).unwrap();
        let mut worst = [0.0f64; 4];

        for c in 0..2 {
            for b in 0..4 {
                let fd = self.central(|h| {
                    let mut p = self.p.clone();
                    p.weights[c][b] += h;
                    self.loss(&self.x, &p)
                });
                worst[0] = worst[0].max(rel_err(g.d_weights[c][b], fd));
            }
            let fd = self.central(|h| {
                let mut p = self.p.clone();
                p.bias[c] += h;
                self.loss(&self.x, &p)
            });
            worst[1] = worst[1].max(rel_err(g.d_bias[c], fd));
        }
        for k in 0..self.p.lifting.steps() {
            let fd = self.central(|h| {
                let mut p = self.p.clone();
                let mut a = p.lifting.as_slice().to_vec();
                a[k] += h;
                p.lifting = LiftingParams::new(a).unwrap();
                self.loss(&self.x, &p)
            });
            worst[2] = worst[2].max(rel_err(g.d_lifting[k], fd));
        }
        for c in 0..2 {
            for r in 0..8 {
                for col in 0..8 {
                    let fd = self.central(|h| {
                        let mut x = self.x.clone();
                        let mut m = x[c].matrix().clone();
                        m[(r, col)] += h;
                        x[c] = Image::new(m).unwrap();
                        self.loss(&x, &self.p)
                    });
                    worst[3] = worst[3].max(rel_err(g.d_input[c][(r, col)], fd));
                }
            }
        }
        worst
    }
}
