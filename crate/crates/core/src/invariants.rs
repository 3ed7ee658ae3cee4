//! `W₁` (winding of a marked point around the S¹ factor) and `W₂` (signed
//! count of collision classes weighted by `x^k`, reduced in `Λ⁰`).
//!
//! The degree `k` of a class `(t, z₁, z₂)` is computed twice: from the lifted
//! displacement of `θ` along the arc `[z₁, z₂]` closed up by the return path
//! `B` (which moves backwards in the S¹ factor), and from signed crossings of
//! that closed path with the slice `{z'} × S³`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::collide::oracle::{dense_bisection, OracleConfig};
use crate::collide::{find_collisions, CollisionPoint, SolverConfig};
use crate::error::{Error, Result};
use crate::families::LoopFamily;
use crate::geom::{lift_angle_path, refine_angle_samples, signed_crossings, wrap_pi, Angle, ANGLE_TOL};
use crate::ring::Lambda0;

/// Integrality guard for lifted angles divided by 2π.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Minimum distance between the slice and any arc endpoint angle.
pub const SLICE_CLEARANCE: f64 = 1e-3;
const SLICE_SHIFT: f64 = 1e-2;
const SLICE_RETRIES: usize = 16;

fn integral(x: f64) -> Result<i64> {
    let k = x.round();
    if (x - k).abs() > INTEGRALITY_TOL {
        return Err(Error::NonIntegralDegree { value: x });
    }
    Ok(k as i64)
}

/// Winding of `t ↦ θ(t, 0)` around the S¹ factor.
pub fn w1(f: &LoopFamily) -> Result<i64> {
    let samples = refine_angle_samples(|t| f.eval(t, 0.0).theta, 0.0, 1.0, 64)?;
    let angles: Vec<Angle> = samples.into_iter().map(|s| s.1).collect();
    integral(lift_angle_path(&angles)? / TAU)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeTrace {
    /// Lifted change of `θ` along the positive arc from `z₁` to `z₂`.
    pub delta_arc: f64,
    /// Change of `θ` along the return path, in `(-2π, 0]`.
    pub delta_b: f64,
    pub k: i64,
    pub k_slice: i64,
    /// Slice crossings of the return path alone, 0 or -1.
    pub b_slice: i64,
}

/// Positive arc length from `z1` to `z2`, in `(0, 2π)`.
fn arc_length(z1: f64, z2: f64) -> f64 {
    (z2 - z1).rem_euclid(TAU)
}

/// The arc endpoint angles `θ(t,z₁)`, `θ(t,z₂)` of a class.
fn endpoint_angles(f: &LoopFamily, c: &CollisionPoint) -> [Angle; 2] {
    [Angle::new(f.eval(c.t, c.z1).theta), Angle::new(f.eval(c.t, c.z2).theta)]
}

fn slice_candidates(base: f64) -> impl Iterator<Item = Angle> {
    (0..=SLICE_RETRIES).map(move |shift| Angle::new(base + SLICE_SHIFT * shift as f64))
}

/// The first of `base`, `base + 1e-2`, … that clears every endpoint angle
/// by `1e-3`.
pub fn choose_slice(f: &LoopFamily, classes: &[CollisionPoint], base: f64) -> Result<Angle> {
    let ends: Vec<Angle> = classes.iter().flat_map(|c| endpoint_angles(f, c)).collect();
    slice_candidates(base)
        .find(|s| ends.iter().all(|e| e.dist(*s) >= SLICE_CLEARANCE))
        .ok_or(Error::SliceHitsEndpoint { slice: base })
}

/// Degrees of all classes against the first admissible slice on which every
/// crossing count is generic.
pub fn assign_degrees(f: &LoopFamily, classes: &[CollisionPoint], base: f64) -> Result<(Angle, Vec<DegreeTrace>)> {
    let ends: Vec<Angle> = classes.iter().flat_map(|c| endpoint_angles(f, c)).collect();
    let mut last = Error::SliceHitsEndpoint { slice: base };
    for slice in slice_candidates(base) {
        if ends.iter().any(|e| e.dist(slice) < SLICE_CLEARANCE) {
            continue;
        }
        match classes.par_iter().map(|c| degree_kp(f, c, slice)).collect::<Result<Vec<_>>>() {
            Ok(d) => return Ok((slice, d)),
            Err(e @ (Error::NonGenericSlice { .. } | Error::SliceHitsEndpoint { .. })) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// Degree of the S¹ projection of the closed path (arc from `z₁` to `z₂`,
/// then back along `B`), by both formulas.
pub fn degree_kp(f: &LoopFamily, c: &CollisionPoint, slice: Angle) -> Result<DegreeTrace> {
    let len = arc_length(c.z1, c.z2);
    let arc = refine_angle_samples(|s| f.eval(c.t, c.z1 + s).theta, 0.0, len, 64)?;
    let arc: Vec<Angle> = arc.into_iter().map(|s| s.1).collect();
    let delta_arc = lift_angle_path(&arc)?;
    let [th1, th2] = endpoint_angles(f, c);
    // equal endpoint angles mean B is constant, not a full backwards turn
    let delta_b = if th1.dist(th2) < ANGLE_TOL { 0.0 } else { -(th2.value() - th1.value()).rem_euclid(TAU) };
    let k = integral((delta_arc + delta_b) / TAU)?;

    let arc_slice = signed_crossings(&arc, slice)?;
    // B runs from θ₂ backwards to θ₁; sample it finer than π/4
    let steps = ((-delta_b) / (PI / 8.0)).ceil().max(1.0) as usize;
    let b_path: Vec<Angle> = (0..=steps).map(|i| Angle::new(th2.value() + delta_b * i as f64 / steps as f64)).collect();
    let b_slice = signed_crossings(&b_path, slice)?;
    let k_slice = arc_slice + b_slice;
    if k != k_slice {
        return Err(Error::DegreeMismatch { lift: k, slice: k_slice });
    }
    Ok(DegreeTrace { delta_arc, delta_b, k, k_slice, b_slice })
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassRecord {
    pub collision: CollisionPoint,
    pub degree: DegreeTrace,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certification {
    pub min_det_mag: Option<f64>,
    pub max_residual: Option<f64>,
    pub grid: (usize, usize, usize),
    pub slice_angle: f64,
    /// Global orientation constant σ of the intersection sign.
    pub sign_convention: i8,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub family: String,
    pub w1: i64,
    pub w2: Lambda0,
    pub classes: Vec<ClassRecord>,
    pub config: SolverConfig,
    pub certification: Certification,
}

/// `Σ sign · x^k` over the classes, reduced in `Λ⁰`.
pub fn signed_monomial_sum(terms: impl IntoIterator<Item = (i8, i64)>) -> Lambda0 {
    terms.into_iter().map(|(s, k)| Lambda0::monomial(k, s as i64)).sum()
}

pub fn w2(f: &LoopFamily, cfg: &SolverConfig) -> Result<InvariantReport> {
    let classes = find_collisions(f, cfg)?;
    let (slice, degrees) = assign_degrees(f, &classes, cfg.slice_angle)?;
    let w2 = signed_monomial_sum(classes.iter().zip(&degrees).map(|(c, d)| (c.sign, d.k)));
    let certification = Certification {
        min_det_mag: classes.iter().map(|c| c.det_mag).reduce(f64::min),
        max_residual: classes.iter().map(|c| c.residual).reduce(f64::max),
        grid: cfg.grid,
        slice_angle: slice.value(),
        sign_convention: 1,
    };
    Ok(InvariantReport {
        family: f.name().to_string(),
        w1: w1(f)?,
        w2,
        classes: classes
            .into_iter()
            .zip(degrees)
            .map(|(collision, degree)| ClassRecord { collision, degree })
            .collect(),
        config: cfg.clone(),
        certification,
    })
}

/// Slice crossings of `θ(t, ·)` on `[z₁, z₁ + len]` by uniform sampling,
/// plus the crossing of the backwards return path. Independent of
/// [`degree_kp`].
fn slice_count_degree(f: &LoopFamily, t: f64, z1: f64, z2: f64, slice: f64) -> Result<i64> {
    const N: usize = 1 << 15;
    let len = arc_length(z1, z2);
    let rel = |z: f64| (f.eval(t, z).theta - slice).rem_euclid(TAU);
    let mut count = 0i64;
    let mut prev = rel(z1);
    for i in 1..=N {
        let cur = rel(z1 + len * i as f64 / N as f64);
        let jump = cur - prev;
        if jump.abs() > PI / 2.0 {
            // a wrap through the slice: downward jump means an upward crossing
            if jump.abs() < 1.5 * PI {
                return Err(Error::StepTooLarge { gap: jump.abs() });
            }
            count += if jump < 0.0 { 1 } else { -1 };
        }
        prev = cur;
    }
    let th1 = f.eval(t, z1).theta;
    let th2 = f.eval(t, z2).theta;
    let back = (th2 - th1).rem_euclid(TAU);
    if (th2 - slice).rem_euclid(TAU) < back {
        count -= 1;
    }
    Ok(count)
}

/// `W₂` from the bisection oracle's collisions and plain slice counting.
pub fn w2_bruteforce(f: &LoopFamily, cfg: &SolverConfig) -> Result<Lambda0> {
    let classes = dense_bisection(f, &OracleConfig::default());
    let ends: Vec<f64> = classes.iter().flat_map(|c| [f.eval(c.t, c.z1).theta, f.eval(c.t, c.z2).theta]).collect();
    // an independent generic slice: the midpoint of the widest gap between endpoint angles
    let slice = widest_gap_midpoint(&ends).unwrap_or(cfg.slice_angle);
    let terms = classes
        .par_iter()
        .map(|c| Ok((c.sign, slice_count_degree(f, c.t, c.z1, c.z2, slice)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(signed_monomial_sum(terms))
}

fn widest_gap_midpoint(angles: &[f64]) -> Option<f64> {
    let mut a: Vec<f64> = angles.iter().map(|x| x.rem_euclid(TAU)).collect();
    a.sort_by(f64::total_cmp);
    let n = a.len();
    (0..n)
        .map(|i| {
            let gap = if i + 1 < n { a[i + 1] - a[i] } else { a[0] + TAU - a[i] };
            (gap, a[i] + gap / 2.0)
        })
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, m)| m)
}

/// One transverse intersection of the circle `α_t` with `{slice} × S³`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SliceCrossing {
    pub z: f64,
    pub sign: i8,
}

/// All crossings of `z ↦ θ(t, z)` with the slice, sorted by `z ∈ [0, 2π)`.
pub fn slice_profile(f: &LoopFamily, t: f64, slice: f64) -> Result<Vec<SliceCrossing>> {
    let slice_a = Angle::new(slice);
    let theta = |z: f64| f.eval(t, z).theta;
    // start the sweep where θ is well away from the slice
    let start = (0..64)
        .map(|k| -0.3 - 0.1 * k as f64)
        .find(|&a| Angle::new(theta(a)).dist(slice_a) > 0.1)
        .ok_or(Error::NonGenericSlice { slice })?;
    let samples = refine_angle_samples(theta, start, start + TAU, 256)?;
    let mut out = Vec::new();
    for w in samples.windows(2) {
        let (za, a) = w[0];
        let (zb, b) = w[1];
        let pa = wrap_pi(a.value() - slice);
        let step = wrap_pi(b.value() - a.value());
        let pb = pa + step;
        if pa.signum() == pb.signum() || pa == 0.0 {
            continue;
        }
        let sign = if step > 0.0 { 1 } else { -1 };
        // bisect on the relative angle, which is continuous across the slice
        let (mut lo, mut hi) = (za, zb);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let pm = wrap_pi(theta(mid) - slice);
            if pm.signum() == pa.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(SliceCrossing { z: Angle::new(0.5 * (lo + hi)).value(), sign });
    }
    out.sort_by(|a, b| a.z.total_cmp(&b.z));
    Ok(out)
}
