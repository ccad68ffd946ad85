mod common;

use bsgrowth::ldp::{coding_crosscheck, deviation_rate, lyapunov_sample, DEFAULT_DEPTHS};
use bsgrowth::thermo::{Thermo, ThermoConfig};
use bsgrowth::Error;
use common::{bs_map, fixture, OCTAGON, SCHOTTKY};

#[test]
fn runs_are_reproducible_and_schedule_independent() {
    let bs = bs_map(SCHOTTKY);
    let run = |threads: usize, seed: u64| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| deviation_rate(&bs, (1.0, 1.2), (0.75, 2.0), &[5, 10], 40_000, seed, None).unwrap())
    };
    let a = run(1, 7);
    let b = run(3, 7);
    let c = run(1, 8);
    let hits = |e: &bsgrowth::ldp::DeviationExperiment| e.rows.iter().map(|r| r.hits).collect::<Vec<_>>();
    assert_eq!(hits(&a), hits(&b));
    assert_eq!(a.fitted_rate.to_bits(), b.fitted_rate.to_bits());
    assert_ne!(hits(&a), hits(&c));
}

#[test]
fn intervals_outside_the_spectrum_are_rejected() {
    let bs = bs_map(SCHOTTKY);
    let r = deviation_rate(&bs, (3.0, 3.5), (0.75, 2.0), &DEFAULT_DEPTHS, 100, 1, None);
    assert!(matches!(r, Err(Error::Experiment(_))));
    let r = deviation_rate(&bs, (0.1, 0.5), (0.75, 2.0), &DEFAULT_DEPTHS, 100, 1, None);
    assert!(matches!(r, Err(Error::Experiment(_))));
    let r = deviation_rate(&bs, (1.2, 1.0), (0.75, 2.0), &DEFAULT_DEPTHS, 100, 1, None);
    assert!(matches!(r, Err(Error::Experiment(_))));
    let r = deviation_rate(&bs, (1.0, 1.2), (0.75, 2.0), &[], 100, 1, None);
    assert!(matches!(r, Err(Error::Experiment(_))));
}

#[test]
fn escape_rate_is_the_pressure_at_one() {
    let (bs, p) = fixture(SCHOTTKY);
    let th = Thermo::new(&bs, &p, ThermoConfig::default()).unwrap();
    let p1 = th.pressure_direct(1.0).mid();
    let count = 400_000;
    let s10 = lyapunov_sample(&bs, 10, count, 3, 10);
    let s20 = lyapunov_sample(&bs, 20, count, 3, 10);
    assert!(s20.survivors > 500);
    let escape = ((s20.survivors as f64).ln() - (s10.survivors as f64).ln()) / 10.0;
    assert!((escape - p1).abs() < 0.02, "escape {escape}, P(1) {p1}");
}

#[test]
fn lebesgue_typical_exponent_is_minus_pressure_slope() {
    let (bs, p) = fixture(OCTAGON);
    let th = Thermo::new(&bs, &p, ThermoConfig::default()).unwrap();
    let h = 0.02;
    let slope = (th.pressure_direct(1.0 - h).mid() - th.pressure_direct(1.0 + h).mid()) / (2.0 * h);
    let s = lyapunov_sample(&bs, 30, 20_000, 5, 40);
    assert_eq!(s.survivors, s.count);
    assert!((s.mean - slope).abs() < 0.05, "mean {} vs {slope}", s.mean);
    assert_eq!(s.histogram.iter().sum::<u64>(), s.survivors as u64);
    assert_eq!(s.histogram_edges.len(), s.histogram.len() + 1);
    assert!(s.std_dev > 0.0 && s.std_dev < 1.0);
}

#[test]
fn deviation_fractions_decay() {
    let bs = bs_map(OCTAGON);
    let e = deviation_rate(&bs, (2.0, 2.5), (1.0, 3.0), &[4, 8, 12], 100_000, 2, None).unwrap();
    assert!(e.rows.windows(2).all(|w| w[1].fraction <= w[0].fraction));
    assert!(e.rows.iter().all(|r| !r.flagged));
    assert!(e.fitted_rate < 0.0);
    assert!(e.predicted_rate.is_none() && e.relative_error().is_none());
    for r in &e.rows {
        assert_eq!(r.flagged, r.hits < 10);
        assert!((r.lograte - r.fraction.ln() / r.n as f64).abs() < 1e-12);
    }
}

#[test]
fn coding_crosscheck_has_bounded_offsets() {
    let (bs, p) = fixture(OCTAGON);
    let c = coding_crosscheck(&bs, &p, 40, 40, 9);
    assert_eq!(c.skipped, 0);
    assert_eq!(c.mean_difference.len(), 40);
    assert!(c.slope.abs() < 0.05, "slope {}", c.slope);
    assert!(c.max_relative < 0.25, "{}", c.max_relative);
}
