mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sphere_fv::geometry::{frame, partial, SphereChart};

#[test]
fn chain_rules_and_commutator_on_random_data() {
    let r = identity_residuals(11, 50);
    eprintln!("{r:?}");
    assert!(r.max() <= 1e-6, "{r:?}");
}

#[test]
fn a_wrong_flux_derivative_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cfg = Config::random(&mut rng);
    assert!(residuals(&cfg).max() <= 1e-6);
    cfg.fu_error = 0.1;
    let r = residuals(&cfg);
    assert!(r.chain_divergence > 1e-4 && r.chain_lie > 1e-4, "{r:?}");
}

#[test]
fn frame_and_pullback_identities() {
    let (fr, pb) = frame_residuals(5, 100);
    assert!(fr <= 1e-12, "{fr}");
    assert!(pb <= 1e-12, "{pb}");
}

#[test]
fn frame_derivatives_match_finite_differences() {
    let g = SphereChart::default();
    for (phi, theta) in [(0.3, 0.7), (2.0, 1.6), (5.0, 2.8)] {
        let x = p(phi, theta);
        let f = frame(phi, theta).unwrap();
        let n = |y: &sphere_fv::geometry::Point<2>| frame(y[0], y[1]).unwrap().n;
        let n_phi = |y: &sphere_fv::geometry::Point<2>| frame(y[0], y[1]).unwrap().n_phi;
        assert!((partial(&g, n, &x, 0) - f.n_phi).amax() < 1e-8);
        assert!((partial(&g, n, &x, 1) - f.n_theta).amax() < 1e-8);
        assert!((partial(&g, n_phi, &x, 0) - f.n_phiphi).amax() < 1e-8);
        assert!((partial(&g, n_phi, &x, 1) - f.n_phitheta).amax() < 1e-8);
    }
}
