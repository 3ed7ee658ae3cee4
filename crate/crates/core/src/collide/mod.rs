//! Collisions of a loop family: triples `(t, z₁, z₂)` with `z₁ ≠ z₂` and
//! `v(t, z₁) = v(t, z₂)`, located on a grid, polished by Newton's method and
//! certified transverse, then quotiented by the swap `z₁ ↔ z₂`.

pub mod oracle;

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{Jet, LoopFamily, SEPARATION_CUTOFF};
use crate::geom::{det3, norm4, stereo_chart, sub4, Angle, SpherePoint, Vec4};

#[derive(Clone, Debug, Serialize)]
pub struct SolverConfig {
    /// `(Nt, Nz, Nz)`
    pub grid: (usize, usize, usize),
    pub newton_tol: f64,
    pub max_newton: usize,
    pub dedupe_radius: f64,
    pub transversality_floor: f64,
    /// The generic slice `{z'} × S³` used for degree counting.
    pub slice_angle: f64,
    /// Offsets the scan grid; any seed gives the same classes.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid: (64, 64, 64),
            newton_tol: 1e-12,
            max_newton: 30,
            dedupe_radius: 1e-3,
            transversality_floor: 1e-6,
            slice_angle: 0.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_grid(n: usize) -> Self {
        SolverConfig { grid: (n, n, n), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.grid;
        let positive =
            [self.newton_tol, self.dedupe_radius, self.transversality_floor].iter().all(|x| *x > 0.0 && x.is_finite());
        if a < 2 || b < 4 || b != c || self.max_newton == 0 || !positive {
            return Err(Error::InvalidParameter(format!("bad solver configuration {self:?}")));
        }
        Ok(())
    }

    /// Fractional grid offsets in `t` and `z` derived from the seed.
    fn offsets(&self) -> (f64, f64) {
        if self.seed == 0 {
            return (0.5, 0.5);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))
    }
}

/// A certified transverse collision.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollisionPoint {
    pub t: f64,
    pub z1: f64,
    pub z2: f64,
    /// Common S³ value.
    pub location: Vec4,
    pub sign: i8,
    pub det_mag: f64,
    pub residual: f64,
}

impl CollisionPoint {
    /// The same collision with `z₁` and `z₂` exchanged. The sign is unchanged:
    /// `F` negates (factor `(-1)³`) and two Jacobian columns swap.
    pub fn swapped(&self) -> CollisionPoint {
        CollisionPoint { z1: self.z2, z2: self.z1, ..self.clone() }
    }

    pub fn separation(&self) -> f64 {
        Angle::new(self.z1).dist(Angle::new(self.z2))
    }
}

/// A candidate seed `(t, z₁, z₂)`.
pub type Candidate = (f64, f64, f64);

/// Why a candidate did not produce a collision.
#[derive(Clone, Debug, PartialEq)]
pub enum Rejected {
    NoConvergence { residual: f64 },
    SeparationCollapse,
    OutOfDomain,
}

fn pair_gap(a: &Jet, b: &Jet) -> f64 {
    norm4(&sub4(&a.point.v, &b.point.v))
}

/// Safety multiplier on the per-cell variation bound.
const SCAN_SAFETY: f64 = 1.5;

/// Grid cells whose center gap is below `SCAN_SAFETY` times a second-order
/// bound on the variation of `v(t,z₁) - v(t,z₂)` over the cell. Curvatures
/// are estimated from neighbouring jets. Only `j₁ < j₂` with every point of
/// the cell at least the separation cutoff apart. Lexicographic order.
pub fn coarse_scan(f: &LoopFamily, cfg: &SolverConfig) -> Vec<Candidate> {
    let (nt, nz, _) = cfg.grid;
    let (ot, oz) = cfg.offsets();
    let (dt, dz) = (1.0 / nt as f64, TAU / nz as f64);
    let (ht, hz) = (0.5 * dt, 0.5 * dz);
    let zs: Vec<f64> = (0..nz).map(|j| (j as f64 + oz) * dz).collect();
    let ts: Vec<f64> = (0..nt).map(|i| (i as f64 + ot) * dt).collect();
    let jets: Vec<Vec<Jet>> = ts.par_iter().map(|&t| zs.iter().map(|&z| f.jet(t, z)).collect()).collect();
    let rate = |a: &Vec4, b: &Vec4, h: f64| norm4(&sub4(a, b)) / h;
    let (up, dn) = (|i: usize| (i + 1) % nt, |i: usize| (i + nt - 1) % nt);
    let (rt, lf) = (|j: usize| (j + 1) % nz, |j: usize| (j + nz - 1) % nz);
    // per-node bound on |g| variation from the z-end: first + second order
    let node: Vec<Vec<(f64, f64)>> = (0..nt)
        .into_par_iter()
        .map(|i| {
            (0..nz)
                .map(|j| {
                    let c = &jets[i][j];
                    let ctt = rate(&jets[up(i)][j].v_t, &c.v_t, dt).max(rate(&jets[dn(i)][j].v_t, &c.v_t, dt));
                    let ctz = rate(&jets[i][rt(j)].v_t, &c.v_t, dz).max(rate(&jets[i][lf(j)].v_t, &c.v_t, dz));
                    let czz = rate(&jets[i][rt(j)].v_z, &c.v_z, dz).max(rate(&jets[i][lf(j)].v_z, &c.v_z, dz));
                    let quad = 0.5 * (ctt * ht * ht + 2.0 * ctz * ht * hz + czz * hz * hz);
                    (norm4(&c.v_z) * hz, quad)
                })
                .collect()
        })
        .collect();
    (0..nt)
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = &jets[i];
            let mut out = Vec::new();
            for j1 in 0..nz {
                for j2 in j1 + 1..nz {
                    if Angle::new(zs[j1]).dist(Angle::new(zs[j2])) - dz < SEPARATION_CUTOFF {
                        continue;
                    }
                    let (a, b) = (&row[j1], &row[j2]);
                    let drift = norm4(&sub4(&a.v_t, &b.v_t)) * ht;
                    let (n1, n2) = (node[i][j1], node[i][j2]);
                    let bound = SCAN_SAFETY * (drift + n1.0 + n2.0 + n1.1 + n2.1);
                    if pair_gap(a, b) < bound {
                        out.push((ts[i], zs[j1], zs[j2]));
                    }
                }
            }
            out
        })
        .collect()
}

/// `F = chart(v₁) - chart(v₂)` in the chart centered at the normalized
/// midpoint, with Jacobian columns `[∂t, ∂z₁, ∂z₂]`.
/// Residual, Jacobian, S³ midpoint and separation of the two strands.
type System = ([f64; 3], [[f64; 3]; 3], Vec4, f64);

fn residual_system(f: &LoopFamily, x: Candidate) -> Option<System> {
    let a = f.jet(x.0, x.1);
    let b = f.jet(x.0, x.2);
    let mid: Vec4 = std::array::from_fn(|k| a.point.v[k] + b.point.v[k]);
    if norm4(&mid) < 1e-3 {
        return None;
    }
    let chart = stereo_chart(SpherePoint::new(mid));
    let (pa, da_t) = chart.forward_with_derivative(&a.point.v, &a.v_t).ok()?;
    let (pb, db_t) = chart.forward_with_derivative(&b.point.v, &b.v_t).ok()?;
    let (_, da_z) = chart.forward_with_derivative(&a.point.v, &a.v_z).ok()?;
    let (_, db_z) = chart.forward_with_derivative(&b.point.v, &b.v_z).ok()?;
    let fval = std::array::from_fn(|k| pa[k] - pb[k]);
    // rows are components, columns are the three unknowns
    let jac = std::array::from_fn(|r| [da_t[r] - db_t[r], da_z[r], -db_z[r]]);
    let loc = *chart.center().coords();
    Some((fval, jac, loc, pair_gap(&a, &b)))
}

fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Option<[f64; 3]> {
    let d = det3(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let col = |k: usize| {
        let mut mk = *m;
        for r in 0..3 {
            mk[r][k] = rhs[r];
        }
        det3(&mk) / d
    };
    Some([col(0), col(1), col(2)])
}

const MAX_STEP_T: f64 = 0.05;
const MAX_STEP_Z: f64 = 0.3;

/// Damped Newton iteration from `cand`. Rejections are expected for spurious
/// candidates; a converged but non-transverse point is an error.
pub fn refine_newton(
    f: &LoopFamily,
    cand: Candidate,
    cfg: &SolverConfig,
) -> Result<std::result::Result<CollisionPoint, Rejected>> {
    let floor = SEPARATION_CUTOFF;
    let mut x = cand;
    let mut last = f64::INFINITY;
    for _ in 0..=cfg.max_newton {
        if !(0.0..=1.0).contains(&x.0) {
            return Ok(Err(Rejected::OutOfDomain));
        }
        if Angle::new(x.1).dist(Angle::new(x.2)) < floor {
            return Ok(Err(Rejected::SeparationCollapse));
        }
        let Some((fv, jac, loc, gap)) = residual_system(f, x) else {
            return Ok(Err(Rejected::OutOfDomain));
        };
        last = gap;
        if gap <= cfg.newton_tol {
            let det = det3(&jac);
            let (z1, z2) = (Angle::new(x.1).value(), Angle::new(x.2).value());
            if det.abs() < cfg.transversality_floor {
                return Err(Error::NonTransverse { t: x.0, z1, z2, det: det.abs() });
            }
            return Ok(Ok(CollisionPoint {
                t: x.0,
                z1,
                z2,
                location: loc,
                sign: if det > 0.0 { 1 } else { -1 },
                det_mag: det.abs(),
                residual: gap,
            }));
        }
        let Some(step) = solve3(&jac, &fv) else {
            return Ok(Err(Rejected::NoConvergence { residual: gap }));
        };
        let scale = [step[0].abs() / MAX_STEP_T, step[1].abs() / MAX_STEP_Z, step[2].abs() / MAX_STEP_Z]
            .into_iter()
            .fold(1.0f64, f64::max);
        x = (x.0 - step[0] / scale, x.1 - step[1] / scale, x.2 - step[2] / scale);
    }
    Ok(Err(Rejected::NoConvergence { residual: last }))
}

fn product_dist(a: &CollisionPoint, b: &CollisionPoint) -> f64 {
    let dt = a.t - b.t;
    let d1 = Angle::new(a.z1).dist(Angle::new(b.z1));
    let d2 = Angle::new(a.z2).dist(Angle::new(b.z2));
    (dt * dt + d1 * d1 + d2 * d2).sqrt()
}

/// Canonical representative `z₁ < z₂`, one point per cluster of radius
/// `dedupe_radius`, sorted by `t` then `z₁`.
pub fn dedupe_and_quotient(points: Vec<CollisionPoint>, cfg: &SolverConfig) -> Result<Vec<CollisionPoint>> {
    let mut pts: Vec<CollisionPoint> = points.into_iter().map(|p| if p.z1 > p.z2 { p.swapped() } else { p }).collect();
    pts.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.z1.total_cmp(&b.z1)).then(a.z2.total_cmp(&b.z2)));
    let mut classes: Vec<CollisionPoint> = Vec::new();
    for p in pts {
        match classes.iter_mut().find(|c| product_dist(c, &p) <= cfg.dedupe_radius) {
            Some(c) if c.sign != p.sign => return Err(Error::AmbiguousCluster { t: p.t }),
            Some(c) => {
                if p.residual < c.residual {
                    *c = p;
                }
            }
            None => classes.push(p),
        }
    }
    classes.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.z1.total_cmp(&b.z1)));
    Ok(classes)
}

/// Scan, refine and quotient.
pub fn find_collisions(f: &LoopFamily, cfg: &SolverConfig) -> Result<Vec<CollisionPoint>> {
    cfg.validate()?;
    let cands = coarse_scan(f, cfg);
    let refined: Vec<_> = cands.par_iter().map(|&c| refine_newton(f, c, cfg)).collect::<Result<_>>()?;
    let found: Vec<CollisionPoint> = refined.into_iter().filter_map(|r| r.ok()).collect();
    dedupe_and_quotient(found, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{family_t, family_tbar, spin_loop, DEFAULT_EPS};
    use std::f64::consts::PI;

    #[test]
    fn spin_loop_has_no_candidates() {
        let f = spin_loop(0, DEFAULT_EPS).unwrap();
        assert!(coarse_scan(&f, &SolverConfig::default()).is_empty());
        let f = spin_loop(2, DEFAULT_EPS).unwrap();
        assert!(find_collisions(&f, &SolverConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn tbar_collisions_are_certified() {
        let cfg = SolverConfig::default();
        for i in 1..=3 {
            let f = family_tbar(i, DEFAULT_EPS).unwrap();
            let cs = find_collisions(&f, &cfg).unwrap();
            assert_eq!(cs.len(), 2 * i as usize, "T̄({i})");
            for c in &cs {
                assert!(c.residual <= 1e-9 && c.det_mag >= 1e-6);
                assert!(c.separation() >= SEPARATION_CUTOFF && c.z1 < c.z2);
                assert!(c.t > 0.0 && c.t < 1.0);
            }
        }
    }

    #[test]
    fn swap_seed_gives_swapped_point_with_same_sign() {
        let cfg = SolverConfig::default();
        let f = family_t(2, DEFAULT_EPS).unwrap();
        for c in find_collisions(&f, &cfg).unwrap() {
            let s = refine_newton(&f, (c.t, c.z2, c.z1), &cfg).unwrap().unwrap();
            assert_eq!(s.sign, c.sign);
            assert!((s.z1 - c.z2).abs() < 1e-9 && (s.z2 - c.z1).abs() < 1e-9);
        }
    }

    #[test]
    fn dedupe_merges_swaps_and_copies() {
        let cfg = SolverConfig::default();
        assert!(dedupe_and_quotient(vec![], &cfg).unwrap().is_empty());
        let p = CollisionPoint {
            t: 0.4,
            z1: 1.0,
            z2: 2.0,
            location: [1.0, 0.0, 0.0, 0.0],
            sign: 1,
            det_mag: 0.1,
            residual: 1e-14,
        };
        let mut q = p.clone();
        q.t += 1e-5;
        let out = dedupe_and_quotient(vec![p.swapped(), q, p.clone()], &cfg).unwrap();
        assert_eq!(out.len(), 1);
        let mut bad = p.clone();
        bad.sign = -1;
        assert!(matches!(dedupe_and_quotient(vec![p, bad], &cfg), Err(Error::AmbiguousCluster { .. })));
    }

    #[test]
    fn far_candidate_is_rejected() {
        let f = family_tbar(1, DEFAULT_EPS).unwrap();
        let r = refine_newton(&f, (0.05, 0.0, PI), &SolverConfig::default()).unwrap();
        assert!(r.is_err());
    }

    #[test]
    fn scan_is_deterministic() {
        let f = family_tbar(2, DEFAULT_EPS).unwrap();
        let cfg = SolverConfig::default();
        assert_eq!(coarse_scan(&f, &cfg), coarse_scan(&f, &cfg));
        assert_eq!(find_collisions(&f, &cfg).unwrap(), find_collisions(&f, &cfg).unwrap());
    }
}
