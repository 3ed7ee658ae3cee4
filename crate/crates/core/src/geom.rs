//! Angles on S¹, points of S³ ⊂ R⁴, stereographic charts, angle lifting and
//! signed slice crossings.
//!
//! S³ carries the orientation in which a tangent frame `(a, b, c)` at `p` is
//! positive iff `det[p, a, b, c] > 0`. S¹ × S³ has the product orientation.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Absolute tolerance for angle comparisons.
pub const ANGLE_TOL: f64 = 1e-9;
/// Maximum number of samples adaptive refinement may use.
pub const MAX_REFINED_SAMPLES: usize = 1 << 16;
/// A refined sampling is accepted once every wrapped step is below this.
const ACCEPT_STEP: f64 = PI / 4.0;

/// An angle with canonical representative in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub fn new(x: f64) -> Self {
        let r = x.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        Angle(if r >= TAU { 0.0 } else { r })
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Unsigned distance on the circle, in `[0, π]`.
    pub fn dist(self, other: Angle) -> f64 {
        wrap_pi(self.0 - other.0).abs()
    }
}

impl From<f64> for Angle {
    fn from(x: f64) -> Self {
        Angle::new(x)
    }
}

/// Representative of `x` modulo 2π in `(-π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

pub type Vec4 = [f64; 4];

pub fn dot4(a: &Vec4, b: &Vec4) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm4(a: &Vec4) -> f64 {
    dot4(a, a).sqrt()
}

pub fn sub4(a: &Vec4, b: &Vec4) -> Vec4 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Determinant of the 4×4 matrix with the given columns.
pub fn det4(cols: [&Vec4; 4]) -> f64 {
    let m = |r: usize, c: usize| cols[c][r];
    let mut det = 0.0;
    for c in 0..4 {
        let mut minor = [[0.0; 3]; 3];
        for r in 1..4 {
            let mut k = 0;
            for cc in 0..4 {
                if cc != c {
                    minor[r - 1][k] = m(r, cc);
                    k += 1;
                }
            }
        }
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m(0, c) * det3(&minor);
    }
    det
}

/// A point of the unit 3-sphere in R⁴.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePoint(Vec4);

impl SpherePoint {
    /// Renormalizes `v`. Panics on the zero vector.
    pub fn new(v: Vec4) -> Self {
        let n = norm4(&v);
        assert!(n > 0.0, "cannot normalize the zero vector");
        SpherePoint(v.map(|x| x / n))
    }

    pub fn coords(&self) -> &Vec4 {
        &self.0
    }

    pub fn dist(&self, other: &SpherePoint) -> f64 {
        norm4(&sub4(&self.0, &other.0))
    }
}

/// Stereographic chart of S³ centered at `center`, projecting from `-center`.
///
/// `forward(v) = 2 (⟨v,a₁⟩, ⟨v,a₂⟩, ⟨v,a₃⟩) / (1 + ⟨v, center⟩)` where
/// `(a₁, a₂, a₃)` is an orthonormal basis of the tangent space at `center`
/// with `det[center, a₁, a₂, a₃] = +1`. The derivative at the center is the
/// identity in that basis, so the chart is orientation-preserving.
#[derive(Clone, Debug)]
pub struct Chart3 {
    center: SpherePoint,
    basis: [Vec4; 3],
}

/// Charts refuse points with `⟨v, center⟩` at or below `-1 + ANTIPODE_MARGIN`.
pub const ANTIPODE_MARGIN: f64 = 1e-6;

pub fn stereo_chart(center: SpherePoint) -> Chart3 {
    let c = *center.coords();
    // Gram-Schmidt on the standard basis, keeping the three best-conditioned.
    let mut basis: Vec<Vec4> = Vec::with_capacity(4);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| c[i].abs().partial_cmp(&c[j].abs()).unwrap().then(i.cmp(&j)));
    for &i in &order {
        if basis.len() == 3 {
            break;
        }
        let mut e = [0.0; 4];
        e[i] = 1.0;
        let mut w = sub4(&e, &c.map(|x| x * c[i]));
        for b in &basis {
            let d = dot4(&w, b);
            w = sub4(&w, &b.map(|x| x * d));
        }
        let n = norm4(&w);
        if n > 1e-6 {
            basis.push(w.map(|x| x / n));
        }
    }
    let mut basis: [Vec4; 3] = [basis[0], basis[1], basis[2]];
    if det4([&c, &basis[0], &basis[1], &basis[2]]) < 0.0 {
        basis[2] = basis[2].map(|x| -x);
    }
    Chart3 { center, basis }
}

impl Chart3 {
    pub fn center(&self) -> &SpherePoint {
        &self.center
    }

    fn check(&self, v: &Vec4) -> Result<f64> {
        let d = dot4(v, self.center.coords());
        if d <= -1.0 + ANTIPODE_MARGIN {
            return Err(Error::NearAntipode { dist: 1.0 + d });
        }
        Ok(d)
    }

    pub fn forward(&self, v: &Vec4) -> Result<[f64; 3]> {
        let d = self.check(v)?;
        let s = 2.0 / (1.0 + d);
        Ok(self.basis.map(|a| s * dot4(v, &a)))
    }

    /// Value of the chart at `v` and its derivative along the ambient vector `dv`.
    pub fn forward_with_derivative(&self, v: &Vec4, dv: &Vec4) -> Result<([f64; 3], [f64; 3])> {
        let d = self.check(v)?;
        let dd = dot4(dv, self.center.coords());
        let den = 1.0 + d;
        let x = self.basis.map(|a| 2.0 * dot4(v, &a) / den);
        let dx = self.basis.map(|a| 2.0 * (dot4(dv, &a) * den - dot4(v, &a) * dd) / (den * den));
        Ok((x, dx))
    }

    pub fn inverse(&self, x: &[f64; 3]) -> SpherePoint {
        let r2 = x.iter().map(|v| v * v).sum::<f64>();
        let d = (4.0 - r2) / (4.0 + r2);
        let s = (1.0 + d) / 2.0;
        let c = self.center.coords();
        let mut v = c.map(|t| t * d);
        for (a, xi) in self.basis.iter().zip(x) {
            for k in 0..4 {
                v[k] += s * xi * a[k];
            }
        }
        SpherePoint::new(v)
    }

    /// Orthonormal oriented tangent basis at the center.
    pub fn tangent_basis(&self) -> &[Vec4; 3] {
        &self.basis
    }
}

/// Total continuous angular displacement of a sampled path.
///
/// Consecutive samples must be less than π apart on the circle.
pub fn lift_angle_path(samples: &[Angle]) -> Result<f64> {
    let mut total = 0.0;
    for w in samples.windows(2) {
        let gap = wrap_pi(w[1].value() - w[0].value());
        if gap.abs() >= PI - ANGLE_TOL {
            return Err(Error::StepTooLarge { gap: gap.abs() });
        }
        total += gap;
    }
    Ok(total)
}

/// Signed number of times the lifted path crosses `slice + 2πZ`;
/// increasing crossings count +1.
pub fn signed_crossings(samples: &[Angle], slice: Angle) -> Result<i64> {
    let Some((first, last)) = samples.first().zip(samples.last()) else {
        return Ok(0);
    };
    if first.dist(slice) < ANGLE_TOL || last.dist(slice) < ANGLE_TOL {
        return Err(Error::SliceHitsEndpoint { slice: slice.value() });
    }
    if samples[1..samples.len() - 1].iter().any(|a| a.dist(slice) < ANGLE_TOL) {
        return Err(Error::NonGenericSlice { slice: slice.value() });
    }
    let mut pos = first.value() - slice.value();
    let mut count = 0i64;
    for w in samples.windows(2) {
        let gap = wrap_pi(w[1].value() - w[0].value());
        if gap.abs() >= PI - ANGLE_TOL {
            return Err(Error::StepTooLarge { gap: gap.abs() });
        }
        let next = pos + gap;
        count += (next / TAU).floor() as i64 - (pos / TAU).floor() as i64;
        pos = next;
    }
    Ok(count)
}

/// Samples `f` on `[a, b]` with uniformly doubled density until every
/// wrapped step is below π/4 and the lift agrees with that of the next
/// doubling (which rules out aliasing). Returns `(parameter, angle)` pairs.
pub fn refine_angle_samples(f: impl Fn(f64) -> f64, a: f64, b: f64, min_intervals: usize) -> Result<Vec<(f64, Angle)>> {
    let sample = |n: usize| -> (Vec<(f64, Angle)>, f64, f64) {
        let samples: Vec<(f64, Angle)> = (0..=n)
            .map(|i| {
                let s = if i == n { b } else { a + (b - a) * i as f64 / n as f64 };
                (s, Angle::new(f(s)))
            })
            .collect();
        let gaps = samples.windows(2).map(|w| wrap_pi(w[1].1.value() - w[0].1.value()));
        let (worst, lift) = gaps.fold((0.0f64, 0.0), |(m, l), g| (m.max(g.abs()), l + g));
        (samples, worst, lift)
    };
    let mut n = min_intervals.max(1);
    let (_, mut worst, mut lift) = sample(n);
    loop {
        if 2 * n + 1 > MAX_REFINED_SAMPLES {
            return Err(Error::StepTooLarge { gap: worst });
        }
        let (next, next_worst, next_lift) = sample(2 * n);
        if worst < ACCEPT_STEP && next_worst < ACCEPT_STEP && (lift - next_lift).abs() < PI {
            return Ok(next);
        }
        (n, worst, lift) = (2 * n, next_worst, next_lift);
    }
}
