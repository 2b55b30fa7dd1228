use kufarev::chain::flow_forward;
use kufarev::herglotz::poisson_integral;
use kufarev::io::RunConfig;
use kufarev::measure::band_limited_density;
use kufarev::transform::schwarzian;
use kufarev::{AnalyticGerm, Driver, DrivingMeasure, FlowSettings, HerglotzEvaluator, C64};
use proptest::prelude::*;

fn in_disk(r: f64) -> impl Strategy<Value = C64> {
    (0.0..r, 0.0..std::f64::consts::TAU).prop_map(|(m, a)| C64::from_polar(m, a))
}

fn density() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-0.25f64..0.25, 3), prop::collection::vec(-0.25f64..0.25, 3)).prop_map(|(a, b)| band_limited_density(64, &a, &b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn moebius_schwarzian_is_exactly_zero(a in in_disk(0.8), rot in -3.0f64..3.0, z in in_disk(0.95)) {
        let g = AnalyticGerm::disk_moebius(a, rot).unwrap();
        prop_assert_eq!(schwarzian(&g, z).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn herglotz_real_part_is_poisson_integral(d in density(), z in in_disk(0.6)) {
        let h = HerglotzEvaluator::from_density(&d).unwrap();
        let direct = 2.0 * std::f64::consts::PI * poisson_integral(&d, z).unwrap();
        prop_assert!((h.eval(z).re - direct).abs() < 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn uniform_flow_is_dilation(z in in_disk(0.35), t in 0.0f64..1.0) {
        let driver = Driver::from_measure(&DrivingMeasure::uniform(0.0, 2.0), 32).unwrap();
        let r = flow_forward(&driver, z, t, &FlowSettings::default()).unwrap();
        prop_assert!(!r.exited);
        prop_assert!((r.value - z * t.exp()).norm() < 1e-10);
    }

    #[test]
    fn example_flow_inverts_closed_form_chain(u in in_disk(0.9), t in 0.05f64..1.0) {
        let b = (-t).exp();
        let z = (1.0 - b) / (2.0 - b) + u / (2.0 - b);
        let driver = Driver::from_measure(&DrivingMeasure::example(0.0, 1.0), 64).unwrap();
        let r = flow_forward(&driver, z, t, &FlowSettings::default()).unwrap();
        let f = r.value * b / (1.0 - r.value * (1.0 - b));
        prop_assert!((f - z).norm() < 1e-8);
    }

    #[test]
    fn run_config_echo_round_trips(n in 4u32..10, m in 3usize..500, dt in 1e-5f64..1e-1, seed in any::<u64>()) {
        let cfg = RunConfig { n: 1 << n, m, dt, seed, times: vec![0.0, dt], ..Default::default() };
        prop_assert_eq!(RunConfig::from_json(&cfg.echo_line()).unwrap(), cfg);
    }
}
