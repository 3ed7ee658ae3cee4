//! Basepointed loops of circle embeddings `α: [0,1] × S¹ → S¹ × S³`.
//!
//! Points of `S¹ × S³` are written `(θ, v)` with `v` a unit vector in R⁴.
//! Every builder starts and ends at the bent base circle
//! `ι_ε(z) = (z, n(p + ε(cos z · e₁ + sin z · e₂)))` with `p = e₀`, whose
//! S³ projection is injective; the round circle `S¹ × {p}` would make every
//! pair of points a collision.

mod finger;
mod sampled;
mod spline;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::{dot4, norm4, sub4, wrap_pi, Vec4};

pub use finger::{FingerLoop, FingerParams};
pub use sampled::{export_sampled, import_sampled, parse_sampled, write_sampled, SampledFamily};

pub const DEFAULT_EPS: f64 = 0.05;
/// Pairs closer than this on the domain circle are ignored by the
/// embeddedness certificate.
pub const SEPARATION_CUTOFF: f64 = PI / 64.0;
/// Minimum sampled self-distance accepted as embedded.
pub const EMBEDDING_THRESHOLD: f64 = 1e-4;
/// Largest `i` the T(i) and T̄(i) builders accept.
pub const MAX_FAMILY_INDEX: i64 = 8;

/// A point of S¹ × S³. `theta` is any real representative of the angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub theta: f64,
    pub v: Vec4,
}

/// Value and first partial derivatives at `(t, z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub point: Point,
    pub theta_t: f64,
    pub theta_z: f64,
    pub v_t: Vec4,
    pub v_z: Vec4,
}

/// The map `(t, z) ↦ α_t(z)` behind a [`LoopFamily`].
pub trait LoopMap: Send + Sync + fmt::Debug {
    fn eval(&self, t: f64, z: f64) -> Point {
        self.jet(t, z).point
    }
    fn jet(&self, t: f64, z: f64) -> Jet;
}

/// A loop of embeddings based at `ι_ε`.
#[derive(Clone, Debug)]
pub struct LoopFamily {
    map: Arc<dyn LoopMap>,
    eps: f64,
    name: String,
    index: Option<i64>,
}

impl LoopFamily {
    pub fn new(map: Arc<dyn LoopMap>, eps: f64, name: impl Into<String>, index: Option<i64>) -> Self {
        LoopFamily { map, eps, name: name.into(), index }
    }

    pub fn eval(&self, t: f64, z: f64) -> Point {
        self.map.eval(t, z)
    }

    pub fn jet(&self, t: f64, z: f64) -> Jet {
        self.map.jet(t, z)
    }

    /// Bending amplitude of the base circle.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn index(&self) -> Option<i64> {
        self.index
    }

    pub fn map(&self) -> &Arc<dyn LoopMap> {
        &self.map
    }
}

/// Distance in S¹ × S³ with the product metric (chordal on S³).
pub fn point_dist(a: &Point, b: &Point) -> f64 {
    let dt = wrap_pi(a.theta - b.theta);
    let dv = norm4(&sub4(&a.v, &b.v));
    (dt * dt + dv * dv).sqrt()
}

/// Local S³ coordinates: `y ↦ n(e₀ + y)` for `y ∈ span(e₁, e₂, e₃)`.
/// Returns the unit vector and pushes the two derivative vectors forward.
pub(crate) fn lift_to_sphere(y: [f64; 3], dy_t: [f64; 3], dy_z: [f64; 3]) -> (Vec4, Vec4, Vec4) {
    let q = [1.0, y[0], y[1], y[2]];
    let n = norm4(&q);
    let v = q.map(|x| x / n);
    let push = |d: [f64; 3]| {
        let dq = [0.0, d[0], d[1], d[2]];
        let r = dot4(&v, &dq);
        std::array::from_fn(|k| (dq[k] - v[k] * r) / n)
    };
    (v, push(dy_t), push(dy_z))
}

pub(crate) fn base_offset(eps: f64, z: f64) -> ([f64; 3], [f64; 3]) {
    let (s, c) = z.sin_cos();
    ([eps * c, eps * s, 0.0], [-eps * s, eps * c, 0.0])
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 0.1 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps must lie in (0, 0.1], got {eps}")))
    }
}

fn check_index(i: i64) -> Result<()> {
    if (1..=MAX_FAMILY_INDEX).contains(&i) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("family index must lie in 1..={MAX_FAMILY_INDEX}, got {i}")))
    }
}

/// The generic base embedding `ι_ε`.
#[derive(Clone, Copy, Debug)]
pub struct BaseEmbedding {
    eps: f64,
}

pub fn generic_base(eps: f64) -> Result<BaseEmbedding> {
    check_eps(eps)?;
    Ok(BaseEmbedding { eps })
}

impl BaseEmbedding {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eval(&self, z: f64) -> Point {
        let (y, _) = base_offset(self.eps, z);
        let (v, _, _) = lift_to_sphere(y, [0.0; 3], [0.0; 3]);
        Point { theta: z, v }
    }
}

#[derive(Debug)]
struct SpinMap {
    eps: f64,
    k: i64,
}

impl LoopMap for SpinMap {
    fn jet(&self, t: f64, z: f64) -> Jet {
        let rate = TAU * self.k as f64;
        let w = z + rate * t.rem_euclid(1.0);
        let (y, dy) = base_offset(self.eps, w);
        let (v, v_t, v_z) = lift_to_sphere(y, dy.map(|x| x * rate), dy);
        Jet { point: Point { theta: w, v }, theta_t: rate, theta_z: 1.0, v_t, v_z }
    }
}

/// `α_t(z) = ι_ε(z + 2πkt)`: the circle spun `k` times in place.
pub fn spin_loop(k: i64, eps: f64) -> Result<LoopFamily> {
    check_eps(eps)?;
    Ok(LoopFamily::new(Arc::new(SpinMap { eps, k }), eps, "spin", Some(k)))
}

/// T(i): a finger wrapping `i` extra times around the S¹ direction passes
/// once through the opposite strand. W₁ = 0, W₂ = ±x^(i+1).
pub fn family_t(i: i64, eps: f64) -> Result<LoopFamily> {
    check_index(i)?;
    check_eps(eps)?;
    let params = FingerParams::wrapped(eps, i);
    Ok(LoopFamily::new(Arc::new(FingerLoop::new(params)), eps, "t", Some(i)))
}

/// T̄(i): the finger wraps once around S¹ and its tip circles the opposite
/// strand `i` times. W₁ = 0, W₂ = ±i·x².
pub fn family_tbar(i: i64, eps: f64) -> Result<LoopFamily> {
    check_index(i)?;
    check_eps(eps)?;
    let params = FingerParams::linked(eps, i);
    Ok(LoopFamily::new(Arc::new(FingerLoop::new(params)), eps, "tbar", Some(i)))
}

/// `3u² - 2u³`, used to time-rescale concatenations.
fn cubic_ease(u: f64) -> (f64, f64) {
    (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u))
}

#[derive(Debug)]
struct ConcatMap {
    first: Arc<dyn LoopMap>,
    second: Arc<dyn LoopMap>,
}

impl LoopMap for ConcatMap {
    fn jet(&self, t: f64, z: f64) -> Jet {
        let t = t.rem_euclid(1.0);
        let (map, u) = if t <= 0.5 { (&self.first, 2.0 * t) } else { (&self.second, 2.0 * t - 1.0) };
        let (s, ds) = cubic_ease(u);
        let mut j = map.jet(s, z);
        let scale = 2.0 * ds;
        j.theta_t *= scale;
        j.v_t = j.v_t.map(|x| x * scale);
        j
    }
}

/// `a` then `b`, each run at double speed with a cubic ease at the junctions.
pub fn concatenate(a: &LoopFamily, b: &LoopFamily) -> Result<LoopFamily> {
    if a.eps != b.eps {
        return Err(Error::BasepointMismatch(format!("eps {} vs {}", a.eps, b.eps)));
    }
    let map = ConcatMap { first: a.map.clone(), second: b.map.clone() };
    Ok(LoopFamily::new(Arc::new(map), a.eps, format!("({})*({})", a.name, b.name), None))
}

#[derive(Debug)]
struct ReverseMap {
    inner: Arc<dyn LoopMap>,
}

impl LoopMap for ReverseMap {
    fn jet(&self, t: f64, z: f64) -> Jet {
        let mut j = self.inner.jet(1.0 - t.rem_euclid(1.0), z);
        j.theta_t = -j.theta_t;
        j.v_t = j.v_t.map(|x| -x);
        j
    }
}

/// `t ↦ a(1 - t)`
pub fn reverse(a: &LoopFamily) -> LoopFamily {
    LoopFamily::new(Arc::new(ReverseMap { inner: a.map.clone() }), a.eps, format!("rev({})", a.name), a.index)
}

#[derive(Debug)]
struct ReparamMap {
    inner: Arc<dyn LoopMap>,
    strength: f64,
}

impl LoopMap for ReparamMap {
    fn jet(&self, t: f64, z: f64) -> Jet {
        let t = t.rem_euclid(1.0);
        let c = self.strength / TAU;
        let s = t - c * (TAU * t).sin();
        let ds = 1.0 - self.strength * (TAU * t).cos();
        let mut j = self.inner.jet(s, z);
        j.theta_t *= ds;
        j.v_t = j.v_t.map(|x| x * ds);
        j
    }
}

/// Precompose with `t ↦ t - (s/2π) sin 2πt`, orientation-preserving for `|s| < 1`.
pub fn reparametrize(a: &LoopFamily, strength: f64) -> Result<LoopFamily> {
    if strength.abs() >= 1.0 {
        return Err(Error::InvalidParameter("reparametrization strength must be below 1".into()));
    }
    Ok(LoopFamily::new(
        Arc::new(ReparamMap { inner: a.map.clone(), strength }),
        a.eps,
        format!("reparam({})", a.name),
        a.index,
    ))
}

/// Minimum distance between sampled points of `α_t` whose domain angles are at
/// least [`SEPARATION_CUTOFF`] apart.
pub fn circle_self_distance(f: &LoopFamily, t: f64, samples: usize) -> f64 {
    let pts: Vec<(f64, Point)> = (0..samples)
        .map(|j| {
            let z = TAU * j as f64 / samples as f64;
            (z, f.eval(t, z))
        })
        .collect();
    let mut best = f64::INFINITY;
    for (a, (za, pa)) in pts.iter().enumerate() {
        for (zb, pb) in &pts[a + 1..] {
            if wrap_pi(za - zb).abs() >= SEPARATION_CUTOFF {
                best = best.min(point_dist(pa, pb));
            }
        }
    }
    best
}

/// Embeddedness certificate for each circle at `t_samples` evenly spaced times.
pub fn certify_circles(f: &LoopFamily, t_samples: usize, z_samples: usize) -> Result<f64> {
    use rayon::prelude::*;
    let results: Vec<(f64, f64)> = (0..t_samples)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / t_samples as f64;
            (t, circle_self_distance(f, t, z_samples))
        })
        .collect();
    let mut worst = f64::INFINITY;
    for (t, d) in results {
        if d <= EMBEDDING_THRESHOLD {
            return Err(Error::EmbeddingCheckFailed { t, min_dist: d });
        }
        worst = worst.min(d);
    }
    Ok(worst)
}

/// Minimum distance between samples of the swept torus `(t, z) ↦ α_t(z)` on an
/// `n × n` grid, over pairs separated by at least the cutoff in `2πt` or `z`.
pub fn torus_self_distance(f: &LoopFamily, n: usize) -> f64 {
    use std::collections::HashMap;
    let wraps: i64 = 315;
    let cell = TAU / wraps as f64;
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let t = i as f64 / n as f64;
            let z = TAU * j as f64 / n as f64;
            pts.push((TAU * t, z, f.eval(t, z)));
        }
    }
    let key = |p: &Point| -> [i64; 5] {
        let mut k = [0i64; 5];
        k[0] = ((p.theta.rem_euclid(TAU) / cell).floor() as i64).rem_euclid(wraps);
        for c in 0..4 {
            k[c + 1] = (p.v[c] / cell).floor() as i64;
        }
        k
    };
    let mut grid: HashMap<[i64; 5], Vec<usize>> = HashMap::new();
    for (idx, p) in pts.iter().enumerate() {
        grid.entry(key(&p.2)).or_default().push(idx);
    }
    let mut best = f64::INFINITY;
    for (idx, (ta, za, pa)) in pts.iter().enumerate() {
        let k = key(pa);
        for d in 0..243usize {
            let mut nk = k;
            let mut r = d;
            for slot in nk.iter_mut() {
                *slot += (r % 3) as i64 - 1;
                r /= 3;
            }
            nk[0] = nk[0].rem_euclid(wraps);
            let Some(list) = grid.get(&nk) else { continue };
            for &other in list {
                if other <= idx {
                    continue;
                }
                let (tb, zb, pb) = &pts[other];
                let sep = wrap_pi(ta - tb).abs().max(wrap_pi(za - zb).abs());
                if sep >= SEPARATION_CUTOFF {
                    best = best.min(point_dist(pa, pb));
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_builders() -> Vec<LoopFamily> {
        let mut v = vec![
            spin_loop(0, DEFAULT_EPS).unwrap(),
            spin_loop(1, DEFAULT_EPS).unwrap(),
            spin_loop(-2, DEFAULT_EPS).unwrap(),
        ];
        for i in [1, 2, 3, 8] {
            v.push(family_t(i, DEFAULT_EPS).unwrap());
            v.push(family_tbar(i, DEFAULT_EPS).unwrap());
        }
        v
    }

    fn same_point(a: &Point, b: &Point) -> bool {
        wrap_pi(a.theta - b.theta) == 0.0 && a.v == b.v
    }

    #[test]
    fn base_is_injective_and_theta_is_identity() {
        let base = generic_base(0.05).unwrap();
        for j in 0..64 {
            let z = TAU * j as f64 / 64.0;
            assert_eq!(base.eval(z).theta, z);
        }
        let f = spin_loop(0, 0.05).unwrap();
        let d = circle_self_distance(&f, 0.0, 256);
        assert!(d > EMBEDDING_THRESHOLD);
        // S³ projection alone is injective too
        let mut min_v = f64::INFINITY;
        for a in 0..128 {
            for b in a + 8..128 {
                let (za, zb) = (TAU * a as f64 / 128.0, TAU * b as f64 / 128.0);
                min_v = min_v
                    .min(base.eval(za).v.iter().zip(base.eval(zb).v).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt());
            }
        }
        assert!(min_v > 0.0);
    }

    #[test]
    fn eps_range_is_enforced() {
        assert!(generic_base(0.0).is_err());
        assert!(generic_base(0.11).is_err());
        assert!(family_t(0, 0.05).is_err());
        assert!(family_tbar(9, 0.05).is_err());
    }

    #[test]
    fn builders_are_loops_at_the_base_circle() {
        let base = generic_base(DEFAULT_EPS).unwrap();
        for f in all_builders() {
            for j in 0..97 {
                let z = TAU * j as f64 / 97.0;
                let b = base.eval(z);
                assert!(same_point(&f.eval(0.0, z), &b), "{} at t=0", f.name());
                assert!(same_point(&f.eval(1.0, z), &b), "{} at t=1", f.name());
            }
        }
    }

    #[test]
    fn builders_are_embedded_at_sampled_times() {
        for f in all_builders() {
            certify_circles(&f, 64, 256).unwrap_or_else(|e| panic!("{}: {e}", f.name()));
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut fams = all_builders();
        fams.push(concatenate(&family_t(1, DEFAULT_EPS).unwrap(), &spin_loop(1, DEFAULT_EPS).unwrap()).unwrap());
        fams.push(reverse(&family_tbar(2, DEFAULT_EPS).unwrap()));
        fams.push(reparametrize(&family_tbar(1, DEFAULT_EPS).unwrap(), 0.3).unwrap());
        for f in fams {
            let mut worst = 0.0f64;
            for _ in 0..1000 {
                let t = rng.gen_range(0.001..0.999);
                let z = rng.gen_range(0.0..TAU);
                let j = f.jet(t, z);
                let h = 1e-6;
                let (tp, tm) = (f.eval(t + h, z), f.eval(t - h, z));
                let (zp, zm) = (f.eval(t, z + h), f.eval(t, z - h));
                let fd_th_t = wrap_pi(tp.theta - tm.theta) / (2.0 * h);
                let fd_th_z = wrap_pi(zp.theta - zm.theta) / (2.0 * h);
                let fd_v_t: Vec4 = std::array::from_fn(|k| (tp.v[k] - tm.v[k]) / (2.0 * h));
                let fd_v_z: Vec4 = std::array::from_fn(|k| (zp.v[k] - zm.v[k]) / (2.0 * h));
                let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + a.abs().max(b.abs()));
                worst = worst.max(rel(fd_th_t, j.theta_t)).max(rel(fd_th_z, j.theta_z));
                worst = worst.max(rel(norm4(&sub4(&fd_v_t, &j.v_t)), 0.0) / (1.0 + norm4(&j.v_t)).max(1.0));
                worst = worst.max(rel(norm4(&sub4(&fd_v_z, &j.v_z)), 0.0) / (1.0 + norm4(&j.v_z)).max(1.0));
            }
            assert!(worst < 1e-6, "{}: jet error {worst}", f.name());
        }
    }

    #[test]
    fn reverse_twice_is_pointwise_identity() {
        let f = family_tbar(2, DEFAULT_EPS).unwrap();
        let rr = reverse(&reverse(&f));
        for (t, z) in [(0.1, 0.3), (0.37, 1.9), (0.8, 5.0)] {
            let a = f.eval(t, z);
            let b = rr.eval(t, z);
            assert!(point_dist(&a, &b) < 1e-14);
        }
    }

    #[test]
    fn concatenate_rejects_mismatched_basepoints() {
        let a = spin_loop(1, 0.05).unwrap();
        let b = spin_loop(1, 0.04).unwrap();
        assert!(matches!(concatenate(&a, &b), Err(Error::BasepointMismatch(_))));
    }

    #[test]
    fn swept_torus_of_t_is_embedded() {
        for i in [1, 2] {
            let f = family_t(i, DEFAULT_EPS).unwrap();
            let d = torus_self_distance(&f, 256);
            assert!(d > EMBEDDING_THRESHOLD, "T({i}) torus self-distance {d}");
        }
    }
}
