use std::sync::Arc;

use quasisys_core::barriers::build_component;
use quasisys_core::{
    build_barrier_set, build_mesh, build_singular_barrier, build_torsion, build_y, build_z, verify_lemma2, BarrierOptions,
    Mesh, PlapConfig,
};

fn line(n: usize) -> Arc<Mesh> {
    build_mesh(1, &[(0.0, 1.0)], &[n + 1]).unwrap()
}

fn cfg(p: f64) -> PlapConfig {
    PlapConfig::new(p).with_tol(1e-11)
}

#[test]
fn z_below_y_across_parameters() {
    let m = line(128);
    for p in [1.5, 2.0, 3.0] {
        for s in [-0.5, -0.2, 0.0, 0.4, 0.8].into_iter().filter(|&s| s < p - 1.0) {
            let y = build_y(&m, &cfg(p), s).unwrap();
            let (z, _) = build_z(&m, &cfg(p), s, 0.1).unwrap();
            for i in m.interior_nodes() {
                assert!(z.values()[i] <= y.values()[i] * (1.0 + 1e-12), "p {p} s {s} node {i}");
                assert!(z.values()[i] > 0.0);
            }
        }
    }
}

#[test]
fn z_positive_in_2d_after_halving() {
    let m = build_mesh(2, &[(0.0, 1.0), (0.0, 1.0)], &[33, 33]).unwrap();
    let (z, delta) = build_z(&m, &cfg(2.0), 0.3, 0.05).unwrap();
    assert!(delta <= 0.05);
    assert!(m.interior_nodes().all(|i| z.values()[i] > 0.0));
}

#[test]
fn layer_width_out_of_range() {
    let m = line(64);
    assert!(build_z(&m, &cfg(2.0), 0.0, 0.0).is_err());
    assert!(build_z(&m, &cfg(2.0), 0.0, 0.3).is_err());
}

#[test]
fn torsion_lipschitz_bound() {
    for p in [1.5, 2.0, 3.0] {
        let m = line(128);
        let c = build_component(&m, p, 0.0, &BarrierOptions::default()).unwrap();
        let d = m.dist();
        for i in m.interior_nodes() {
            assert!(c.w_hat.values()[i] <= c.l * d[i] * (1.0 + 1e-12));
        }
        assert!(c.l >= c.l_hat);
    }
    let m = line(64);
    let (_, l_hat) = build_torsion(&m, &cfg(2.0)).unwrap();
    assert!((l_hat - 0.5).abs() < 1e-6);
}

#[test]
fn singular_barrier_squeeze_is_refinement_stable() {
    let coarse = build_singular_barrier(&line(256), &cfg(2.0), 0.5).unwrap();
    let fine = build_singular_barrier(&line(512), &cfg(2.0), 0.5).unwrap();
    for (a, b) in [(coarse.c2, fine.c2), (coarse.c3, fine.c3)] {
        assert!(a > 0.0);
        assert!((a - b).abs() / a.max(b) < 0.2, "{a} vs {b}");
    }
    let m = coarse.w.mesh().clone();
    for i in m.interior_nodes() {
        let (w, d) = (coarse.w.values()[i], m.dist()[i]);
        assert!(coarse.c2 * d <= w * (1.0 + 1e-12) && w <= coarse.c3 * d * (1.0 + 1e-12));
    }
}

#[test]
fn singular_iteration_eventually_contracts() {
    let b = build_singular_barrier(&line(256), &cfg(2.0), 0.7).unwrap();
    let h = &b.history;
    assert!(h.len() >= 2);
    let tail = &h[h.len() / 2..];
    assert!(tail.windows(2).all(|w| w[1] <= w[0]), "{h:?}");
}

#[test]
fn barrier_constants_drift_small_under_refinement() {
    let opts = BarrierOptions { delta: Some(0.1), ..BarrierOptions::default() };
    for s in [-0.5, 0.0, 0.5] {
        let a = build_barrier_set(&line(128), [2.0, 3.0], [s, s], &opts).unwrap();
        let b = build_barrier_set(&line(256), [2.0, 3.0], [s, s], &opts).unwrap();
        let rep = verify_lemma2(&a, Some(&b));
        assert!(rep.pass && !rep.suspect, "s {s}: {rep:?}");
    }
}

#[test]
fn shifted_lower_barrier_is_caught() {
    let m = line(128);
    let mut bs = build_barrier_set(&m, [2.0, 2.0], [0.0, 0.0], &BarrierOptions::default()).unwrap();
    let d = m.dist().to_vec();
    for (v, d) in bs.comp[0].z.values_mut().iter_mut().zip(&d) {
        *v -= 0.1 * d;
    }
    assert!(!verify_lemma2(&bs, None).pass);
}
