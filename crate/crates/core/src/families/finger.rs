//! Finger loops: a short arc of the base circle wraps around the S¹ factor,
//! is pushed across to the opposite strand, and its tip circles that strand
//! before everything is undone.
//!
//! All motion happens in local S³ coordinates `y ∈ R³` around `p`:
//!
//! ```text
//! θ(t, z) = z + 2π s(t) ψ(u)
//! y(t, z) = ε (cos z, sin z, 0) + b(u) D(t) + m(t),     u = (z - z_A) / w
//! ```
//!
//! `b` is a bump supported on `|u| < 1`, `ψ` is the wrap profile, `D(t)` the
//! finger displacement and `m(t)` a small drift loop applied to the whole
//! circle so the swept torus has no stationary points. Strands can only meet
//! in `y` when `D` is parallel to `e₂`, which happens exactly when the tip
//! crosses the plane of the base circle; each pass of the tip beyond the
//! opposite strand produces two collisions, one on each side of the finger.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use super::{base_offset, lift_to_sphere, Jet, LoopMap, Point};

// Phase boundaries in t.
const WRAP_END: f64 = 0.1;
const EXTEND_END: f64 = 0.25;
const CIRCLE_END: f64 = 0.75;
const RETRACT_END: f64 = 0.9;

/// Shape parameters of a finger loop. Only `wrap_out`, `wrap_ret` and
/// `turns` change the invariants; the rest can be varied to jitter a family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FingerParams {
    pub eps: f64,
    /// Domain angle at the center of the finger.
    pub center: f64,
    /// Half-width of the finger in the domain.
    pub width: f64,
    /// Radius of the tip's orbit around the opposite strand.
    pub reach: f64,
    /// Radius of the drift loop `m(t)`.
    pub drift: f64,
    /// Wrap (in turns) on the outgoing side of the finger.
    pub wrap_out: f64,
    /// Wrap (in turns) on the returning side.
    pub wrap_ret: f64,
    /// Number of times the tip circles the opposite strand.
    pub turns: i64,
}

impl FingerParams {
    /// One pass with `i` extra turns of wrapping between the two sides.
    pub fn wrapped(eps: f64, i: i64) -> Self {
        FingerParams {
            eps,
            center: FRAC_PI_2,
            width: 0.6,
            reach: eps,
            drift: 0.2 * eps,
            wrap_out: 1.4,
            wrap_ret: i as f64 + 0.6,
            turns: 1,
        }
    }

    /// One turn of wrapping between the sides, `i` passes of the tip.
    pub fn linked(eps: f64, i: i64) -> Self {
        FingerParams { wrap_ret: 1.6, turns: i, ..Self::wrapped(eps, 1) }
    }
}

/// `6u⁵ - 15u⁴ + 10u³` clamped to `[0, 1]`, with derivative.
fn smoother(u: f64) -> (f64, f64) {
    if u <= 0.0 {
        (0.0, 0.0)
    } else if u >= 1.0 {
        (1.0, 0.0)
    } else {
        let u2 = u * u;
        (u2 * u * (10.0 + u * (6.0 * u - 15.0)), 30.0 * u2 * (1.0 - u) * (1.0 - u))
    }
}

fn scaled(x: [f64; 3], k: f64) -> [f64; 3] {
    x.map(|c| c * k)
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[derive(Debug, Clone)]
pub struct FingerLoop {
    params: FingerParams,
}

/// Time-dependent data: wrap factor, displacement, drift, and their rates.
struct Schedule {
    s: f64,
    ds: f64,
    d: [f64; 3],
    dd: [f64; 3],
    m: [f64; 3],
    dm: [f64; 3],
}

impl FingerLoop {
    pub fn new(params: FingerParams) -> Self {
        FingerLoop { params }
    }

    pub fn params(&self) -> &FingerParams {
        &self.params
    }

    /// Tip displacement above the opposite strand.
    fn top(&self) -> [f64; 3] {
        [0.0, -2.0 * self.params.eps, self.params.reach]
    }

    fn schedule(&self, t: f64) -> Schedule {
        let p = &self.params;
        let t = t.rem_euclid(1.0);
        let zero = [0.0; 3];
        let (mut s, mut ds, mut d, mut dd) = (1.0, 0.0, zero, zero);
        if t < WRAP_END {
            let (e, de) = smoother(t / WRAP_END);
            (s, ds, d) = (e, de / WRAP_END, zero);
        } else if t < EXTEND_END {
            let len = EXTEND_END - WRAP_END;
            let (e, de) = smoother((t - WRAP_END) / len);
            d = scaled(self.top(), e);
            dd = scaled(self.top(), de / len);
        } else if t < CIRCLE_END {
            let len = CIRCLE_END - EXTEND_END;
            let (e, de) = smoother((t - EXTEND_END) / len);
            let phi = FRAC_PI_2 - TAU * p.turns as f64 * e;
            let dphi = -TAU * p.turns as f64 * de / len;
            let (sp, cp) = phi.sin_cos();
            d = [0.0, -2.0 * p.eps - p.reach * cp, p.reach * sp];
            dd = [0.0, p.reach * sp * dphi, p.reach * cp * dphi];
        } else if t < RETRACT_END {
            let len = RETRACT_END - CIRCLE_END;
            let (e, de) = smoother((t - CIRCLE_END) / len);
            d = scaled(self.top(), 1.0 - e);
            dd = scaled(self.top(), -de / len);
        } else {
            let len = 1.0 - RETRACT_END;
            let (e, de) = smoother((t - RETRACT_END) / len);
            (s, ds) = (1.0 - e, -de / len);
        }
        let (sm, cm) = (TAU * t).sin_cos();
        let m = [p.drift * (cm - 1.0), 0.0, p.drift * sm];
        let dm = [-TAU * p.drift * sm, 0.0, TAU * p.drift * cm];
        Schedule { s, ds, d, dd, m, dm }
    }

    /// Bump `b(u)` and wrap profile `ψ(u)` with their u-derivatives.
    fn profile(&self, u: f64) -> (f64, f64, f64, f64) {
        if u.abs() >= 1.0 {
            return (0.0, 0.0, 0.0, 0.0);
        }
        let p = &self.params;
        let q = 1.0 - u * u;
        let b = q * q * q;
        let db = -6.0 * u * q * q;
        let ramp = 0.4;
        let (r1, dr1) = smoother((u + 0.95) / ramp);
        let (r2, dr2) = smoother((u + 0.2) / ramp);
        let (r3, dr3) = smoother((u - 0.55) / ramp);
        let jump = p.wrap_ret - p.wrap_out;
        let psi = p.wrap_out * r1 + jump * r2 - p.wrap_ret * r3;
        let dpsi = (p.wrap_out * dr1 + jump * dr2 - p.wrap_ret * dr3) / ramp;
        (b, db, psi, dpsi)
    }
}

impl LoopMap for FingerLoop {
    fn jet(&self, t: f64, z: f64) -> Jet {
        let p = &self.params;
        let sch = self.schedule(t);
        let u = (z - p.center + PI).rem_euclid(TAU) - PI;
        let (b, db, psi, dpsi) = self.profile(u / p.width);
        let (base, dbase) = base_offset(p.eps, z);

        let theta = z + TAU * sch.s * psi;
        let theta_z = 1.0 + TAU * sch.s * dpsi / p.width;
        let theta_t = TAU * sch.ds * psi;

        let y = add3(add3(base, scaled(sch.d, b)), sch.m);
        let y_z = add3(dbase, scaled(sch.d, db / p.width));
        let y_t = add3(scaled(sch.dd, b), sch.dm);
        let (v, v_t, v_z) = lift_to_sphere(y, y_t, y_z);
        Jet { point: Point { theta, v }, theta_t, theta_z, v_t, v_z }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_vanishes_outside_and_hits_side_levels() {
        let f = FingerLoop::new(FingerParams::linked(0.05, 1));
        for u in [-1.0, -1.5, 1.0, 2.0] {
            assert_eq!(f.profile(u), (0.0, 0.0, 0.0, 0.0));
        }
        // collision sides sit near |u| = 0.37
        assert!((f.profile(-0.37).2 - 1.4).abs() < 1e-12);
        assert!((f.profile(0.37).2 - 1.6).abs() < 1e-12);
    }

    #[test]
    fn schedule_is_identity_at_the_ends() {
        let f = FingerLoop::new(FingerParams::wrapped(0.05, 3));
        for t in [0.0, 1.0] {
            let s = f.schedule(t);
            assert_eq!((s.s, s.d, s.m), (0.0, [0.0; 3], [0.0; 3]));
        }
    }

    #[test]
    fn tip_is_in_the_strand_plane_only_at_half_turns() {
        let f = FingerLoop::new(FingerParams::linked(0.05, 3));
        let n = 20000;
        let mut sign_changes = 0;
        let mut prev = f.schedule(EXTEND_END).d[2];
        for k in 1..=n {
            let t = EXTEND_END + (CIRCLE_END - EXTEND_END) * k as f64 / n as f64;
            let d = f.schedule(t).d[2];
            if d.signum() != prev.signum() && d != 0.0 {
                sign_changes += 1;
            }
            prev = d;
        }
        // three passes beyond the strand, three between the strands
        assert_eq!(sign_changes, 6);
    }
}
