mod common;

use bsgrowth::tracing::{growth_vs_lyapunov, parallel_report, Frame, SymbolicGeodesic, Tracer};
use common::{fixture, OCTAGON, SCHOTTKY, TORUS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn growth_matches_word_products() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let (bs, p) = fixture(name);
        let tracer = Tracer::new(&bs, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let geo = SymbolicGeodesic::random(&bs, &p, 30, &mut rng);
            let rec = tracer.trace(&geo, 30).unwrap();
            assert!((rec.t[0] - bs.group.generators[rec.letters[0]].dist_origin()).abs() < 1e-9);
            for k in 0..30 {
                let g = bs.group.evaluate(&rec.letters[..=k]);
                assert!((rec.t[k] - g.dist_origin()).abs() < 1e-7 * (1.0 + rec.t[k]), "{name} {k}");
            }
            assert_eq!(rec.expansion, geo.letters[..30]);
        }
    }
}

#[test]
fn parallel_check_passes_on_random_geodesics() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let (bs, p) = fixture(name);
        let tracer = Tracer::new(&bs, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let geo = SymbolicGeodesic::random(&bs, &p, 30, &mut rng);
            let r = tracer.parallel_check(&geo, 30).unwrap();
            assert!(r.passed, "{name}: first failure at {:?}", r.first_failure);
            assert_eq!(r.frames.len(), 30);
        }
    }
}

#[test]
fn schottky_cutting_sequence_is_the_expansion() {
    let (bs, p) = fixture(SCHOTTKY);
    let tracer = Tracer::new(&bs, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let geo = SymbolicGeodesic::random(&bs, &p, 20, &mut rng);
        let rec = tracer.trace(&geo, 20).unwrap();
        assert_eq!(rec.letters, rec.expansion);
        assert!(rec.frames.iter().all(|&f| f == Frame::Same));
    }
}

#[test]
fn growth_and_lyapunov_rates_agree() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let (bs, p) = fixture(name);
        let tracer = Tracer::new(&bs, 60);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let geo = SymbolicGeodesic::random(&bs, &p, 60, &mut rng);
            let rec = tracer.trace(&geo, 60).unwrap();
            let (t, l) = growth_vs_lyapunov(&rec);
            worst = worst.max((t[59] - l[59]).abs());
        }
        // Bounded offsets divided by n = 60.
        assert!(worst < 0.25, "{name} {worst}");
    }
}

#[test]
fn report_counts_vertex_frames() {
    let (bs, p) = fixture(OCTAGON);
    let tracer = Tracer::new(&bs, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut vertex_frames = 0;
    for _ in 0..50 {
        let geo = SymbolicGeodesic::random(&bs, &p, 30, &mut rng);
        let rec = tracer.trace(&geo, 30).unwrap();
        let r = parallel_report(&rec);
        assert_eq!(r.vertex_frames, rec.frames.iter().filter(|&&f| f == Frame::Vertex).count());
        vertex_frames += r.vertex_frames;
    }
    assert!(vertex_frames > 0);
}

#[test]
fn geodesics_from_endpoints() {
    let (bs, _) = fixture(OCTAGON);
    let geo = SymbolicGeodesic::from_endpoints(&bs, 3.5, 0.4, 10).unwrap();
    assert!((geo.pos() - 0.4).abs() < 1e-9);
    assert_eq!(geo.letters, bs.f_expand(0.4, 50).word);
    let tracer = Tracer::new(&bs, 10);
    assert!(tracer.trace(&geo, 10).is_ok());
    assert!(tracer.trace(&geo, 51).is_err());
}

#[test]
fn escaping_endpoint_is_rejected() {
    let (bs, _) = fixture(SCHOTTKY);
    let gap = (0..1000).map(|k| k as f64 * 0.00628).find(|&x| bs.locate(x).is_none()).unwrap();
    assert!(SymbolicGeodesic::from_endpoints(&bs, 3.0, gap, 5).is_err());
}

#[test]
fn exit_side_of_a_diameter() {
    let (bs, _) = fixture(OCTAGON);
    let tracer = Tracer::new(&bs, 4);
    let x = bs.group.sides[2].outside_arc().midpoint();
    let back = x + std::f64::consts::PI;
    assert_eq!(tracer.exit_side(back, x).unwrap(), 2);
}
