use std::f64::consts::TAU;

use twinloop_core::collide::oracle::{dense_bisection, OracleConfig};
use twinloop_core::collide::{coarse_scan, find_collisions, refine_newton, SolverConfig};
use twinloop_core::families::{family_t, family_tbar, DEFAULT_EPS, MAX_FAMILY_INDEX};

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[test]
fn newton_pipeline_matches_bisection_oracle() {
    let cfg = SolverConfig::default();
    for i in 1..=2 {
        let f = family_tbar(i, DEFAULT_EPS).unwrap();
        let pipeline = find_collisions(&f, &cfg).unwrap();
        let oracle = dense_bisection(&f, &OracleConfig::default());
        assert_eq!(pipeline.len(), oracle.len(), "T̄({i}) class count");
        for (p, o) in pipeline.iter().zip(&oracle) {
            assert!((p.t - o.t).abs() <= 1e-6, "t {} vs {}", p.t, o.t);
            assert!(angle_gap(p.z1, o.z1) <= 1e-6 && angle_gap(p.z2, o.z2) <= 1e-6);
            assert_eq!(p.sign, o.sign);
        }
    }
}

#[test]
fn oracle_seeds_converge_fast() {
    let cfg = SolverConfig { max_newton: 5, ..SolverConfig::default() };
    let f = family_tbar(1, DEFAULT_EPS).unwrap();
    for o in dense_bisection(&f, &OracleConfig::default()) {
        let p = refine_newton(&f, (o.t, o.z1, o.z2), &cfg).unwrap().expect("converges");
        assert!(p.residual <= 1e-12);
    }
}

#[test]
fn refining_the_grid_keeps_every_collision() {
    let f = family_tbar(2, DEFAULT_EPS).unwrap();
    let coarse = find_collisions(&f, &SolverConfig::with_grid(32)).unwrap();
    let fine = find_collisions(&f, &SolverConfig::with_grid(64)).unwrap();
    assert!(!coarse_scan(&f, &SolverConfig::default()).is_empty());
    for c in &coarse {
        assert!(fine.iter().any(|p| (p.t - c.t).abs() < 1e-6 && angle_gap(p.z1, c.z1) < 1e-6));
    }
}

#[test]
fn class_count_is_seed_independent_for_all_indices() {
    for i in 1..=MAX_FAMILY_INDEX {
        for (name, f) in [("T", family_t(i, DEFAULT_EPS).unwrap()), ("T̄", family_tbar(i, DEFAULT_EPS).unwrap())] {
            let expected = if name == "T" { 2 } else { 2 * i as usize };
            for seed in [0, 1, 7] {
                let cfg = SolverConfig { seed, ..SolverConfig::default() };
                let cs = find_collisions(&f, &cfg).unwrap();
                assert_eq!(cs.len(), expected, "{name}({i}) seed {seed}");
            }
        }
    }
}
