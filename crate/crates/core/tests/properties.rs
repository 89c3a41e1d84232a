use std::f64::consts::SQRT_2;

use approx::assert_abs_diff_eq;
use biorlift::formats::{FiltersDoc, Pgm};
use biorlift::spectral::response_at;
use biorlift::training::TrainConfig;
use biorlift::{
    analyze_1d, build_filters, build_matrices, closed_form_filters, dwt2, filter_jacobian, idwt2,
    synthesize_1d, Image, LiftingParams,
};
use proptest::prelude::*;

fn coefficients(max_steps: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 0..=max_steps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn high_pass_kills_dc_and_passes_nyquist(a in coefficients(6)) {
        let fp = build_filters(&LiftingParams::new(a).unwrap());
        assert_abs_diff_eq!(fp.h1().iter().sum::<f64>(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(response_at(fp.h1(), std::f64::consts::PI).norm(), SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(response_at(fp.h0(), 0.0).norm(), SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(fp.h1().iter().map(|t| t * t).sum::<f64>(),
            1.0 + 2.0 * fp.params().as_slice().iter().map(|a| a * a).sum::<f64>(),
            epsilon = 1e-11);
    }

    #[test]
    fn filters_are_linear_in_the_coefficients(a in coefficients(5)) {
        let p = LiftingParams::new(a.clone()).unwrap();
        let base = closed_form_filters(&LiftingParams::zeros(a.len()));
        let j = filter_jacobian(&p);
        let fp = build_filters(&p);
        for (r, tap) in fp.h1().iter().enumerate() {
            let lin: f64 = base.h1()[r] + (0..a.len()).map(|k| j[(r, k)] * a[k]).sum::<f64>();
            assert_abs_diff_eq!(*tap, lin, epsilon = 1e-14);
        }
    }

    #[test]
    fn one_dimensional_round_trip(
        a in coefficients(3),
        signal in prop::collection::vec(-10.0f64..10.0, 32),
    ) {
        let fp = build_filters(&LiftingParams::new(a).unwrap());
        let am = build_matrices(&fp, signal.len()).unwrap();
        let (lo, hi) = analyze_1d(&signal, &am).unwrap();
        let back = synthesize_1d(&lo, &hi, &am).unwrap();
        for (u, v) in signal.iter().zip(&back) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-10);
        }
    }

    #[test]
    fn two_dimensional_round_trip(
        a in coefficients(2),
        half_rows in 5usize..=12,
        half_cols in 5usize..=12,
        seed in any::<u64>(),
    ) {
        let fp = build_filters(&LiftingParams::new(a).unwrap());
        let mut s = seed;
        let img = Image::from_fn(2 * half_rows, 2 * half_cols, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .unwrap();
        let back = idwt2(&dwt2(&img, &fp).unwrap(), &fp).unwrap();
        prop_assert!((img.matrix() - back.matrix()).amax() < 1e-10);
    }

    #[test]
    fn filters_json_round_trips_exactly(a in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..=4)) {
        let fp = build_filters(&LiftingParams::new(a).unwrap());
        prop_assume!(fp.h1().iter().all(|t| t.is_finite()));
        let doc = FiltersDoc::from(&fp);
        let back: FiltersDoc = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        prop_assert_eq!(back, doc);
    }

    #[test]
    fn train_config_json_round_trips_exactly(
        seed in any::<u64>(),
        lifting in 0.0f64..1.0,
        noise in 0.0f64..0.5,
        a3 in -1.0f64..1.0,
    ) {
        let mut cfg = TrainConfig { seed, a3_init: a3, ..TrainConfig::default() };
        cfg.lr.lifting = lifting;
        cfg.dataset.noise = noise;
        prop_assert_eq!(TrainConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn pgm_round_trips(half_w in 1usize..=8, half_h in 1usize..=8, maxval in 1u8..=255, seed in any::<u64>()) {
        let (w, h) = (2 * half_w, 2 * half_h);
        let mut s = seed;
        let pixels = (0..w * h)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                ((s >> 33) % (maxval as u64 + 1)) as u8
            })
            .collect();
        let pgm = Pgm { width: w, height: h, maxval, pixels };
        let parsed = Pgm::parse(&pgm.to_bytes()).unwrap();
        prop_assert_eq!(&parsed, &pgm);
        prop_assert_eq!(Pgm::from_matrix(parsed.to_image().unwrap().matrix(), maxval), pgm);
    }
}
