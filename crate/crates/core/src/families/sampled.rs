//! Loop families given by samples on a `Nt × Nz` grid, interpolated by
//! tensor-product cubic splines (periodic in z, clamped in t).
//!
//! File format, line oriented:
//!
//! ```text
//! LOOPFAMILY v1 <Nt> <Nz> <eps>
//! <t> <z> <theta> <v0> <v1> <v2> <v3>      (Nt·Nz lines, t-major)
//! ```
//!
//! with `t = i/(Nt-1)`, `z = 2πj/Nz`, and rows `i = 0` and `i = Nt-1` equal.
//! `theta` may be given modulo 2π; it is unwrapped along each row by the
//! nearest branch, so consecutive samples must differ by less than π.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use super::spline::{clamped_second_derivs, eval_segment, periodic_second_derivs};
use super::{certify_circles, Jet, LoopFamily, LoopMap, Point};
use crate::error::{Error, Result};
use crate::geom::{dot4, norm4, wrap_pi, Angle, Vec4};

pub const MIN_GRID: usize = 16;
const UNIT_TOL: f64 = 1e-9;
const LOOP_TOL: f64 = 1e-12;
const GRID_TOL: f64 = 1e-9;
/// Largest `θ` step between neighbouring z samples that `write_sampled`
/// accepts, leaving margin below the π unwrapping limit.
pub const MAX_THETA_STEP: f64 = 0.75 * std::f64::consts::PI;
const STEP_SUBSAMPLES: usize = 16;

/// True change of `θ` from `z` to `z + dz`, resolved by subsampling.
fn theta_step(f: &LoopFamily, t: f64, z: f64, dz: f64) -> f64 {
    let h = dz / STEP_SUBSAMPLES as f64;
    (0..STEP_SUBSAMPLES)
        .map(|k| wrap_pi(f.eval(t, z + h * (k + 1) as f64).theta - f.eval(t, z + h * k as f64).theta))
        .sum()
}

/// Renders `f` on an `nt × nz` grid in the text format.
pub fn write_sampled(f: &LoopFamily, nt: usize, nz: usize) -> Result<String> {
    if nt < MIN_GRID || nz < MIN_GRID {
        return Err(Error::InvalidParameter(format!("grid must be at least {MIN_GRID} x {MIN_GRID}")));
    }
    let dz = TAU / nz as f64;
    for i in 0..nt - 1 {
        let t = i as f64 / (nt - 1) as f64;
        for j in 0..nz {
            let step = theta_step(f, t, dz * j as f64, dz).abs();
            if step >= MAX_THETA_STEP {
                return Err(Error::InvalidParameter(format!(
                    "Nz = {nz} undersamples theta: step {step:.3} at t = {t}, z = {:.4}",
                    dz * j as f64
                )));
            }
        }
    }
    let mut out = String::new();
    writeln!(out, "LOOPFAMILY v1 {nt} {nz} {}", f.eps()).unwrap();
    let first_row: Vec<Point> = (0..nz).map(|j| f.eval(0.0, TAU * j as f64 / nz as f64)).collect();
    for i in 0..nt {
        let t = i as f64 / (nt - 1) as f64;
        for (j, first) in first_row.iter().enumerate() {
            let z = TAU * j as f64 / nz as f64;
            // the last row repeats the first so the loop condition is exact
            let p = if i == 0 || i == nt - 1 { *first } else { f.eval(t, z) };
            let th = Angle::new(p.theta).value();
            writeln!(out, "{t} {z} {th} {} {} {} {}", p.v[0], p.v[1], p.v[2], p.v[3]).unwrap();
        }
    }
    Ok(out)
}

pub fn export_sampled(f: &LoopFamily, nt: usize, nz: usize, path: &Path) -> Result<()> {
    let text = write_sampled(f, nt, nz)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

/// Reads, validates and interpolates a sampled family, including the
/// embeddedness certificate.
pub fn import_sampled(path: &Path) -> Result<LoopFamily> {
    let text = std::fs::read_to_string(path)?;
    let sampled = parse_sampled(&text)?;
    let eps = sampled.eps;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let fam = LoopFamily::new(Arc::new(sampled), eps, format!("import:{name}"), None);
    certify_circles(&fam, 64, 256)?;
    Ok(fam)
}

/// One interpolated scalar field with its spline data.
#[derive(Debug, Clone)]
struct Channel {
    f: Vec<f64>,
    /// z-second derivatives at the knots
    mz: Vec<f64>,
    /// t-second derivatives of `f` and of `mz`
    mt: Vec<f64>,
    mzt: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SampledFamily {
    nt: usize,
    nz: usize,
    eps: f64,
    /// Degree of each circle's S¹ coordinate; `θ = P + winding·z` with `P` periodic.
    winding: i64,
    channels: Vec<Channel>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn parse_sampled(text: &str) -> Result<SampledFamily> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| format_err("empty file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != "LOOPFAMILY" || h[1] != "v1" {
        return Err(format_err(format!("bad header {header:?}")));
    }
    let nt: usize = h[2].parse().map_err(|_| format_err("bad Nt"))?;
    let nz: usize = h[3].parse().map_err(|_| format_err("bad Nz"))?;
    let eps: f64 = h[4].parse().map_err(|_| format_err("bad eps"))?;
    if nt < MIN_GRID || nz < MIN_GRID {
        return Err(format_err(format!("grid {nt} x {nz} below the {MIN_GRID} minimum")));
    }
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(format_err(format!("eps {eps} outside (0, 0.1]")));
    }

    let mut theta = vec![0.0; nt * nz];
    let mut v = vec![[0.0; 4]; nt * nz];
    let mut count = 0;
    for line in lines {
        if count == nt * nz {
            return Err(format_err("too many data lines"));
        }
        let (i, j) = (count / nz, count % nz);
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format_err(format!("unparsable line {}", count + 2)))?;
        if vals.len() != 7 || vals.iter().any(|x| !x.is_finite()) {
            return Err(format_err(format!("line {} needs 7 finite numbers", count + 2)));
        }
        let t_exp = i as f64 / (nt - 1) as f64;
        let z_exp = TAU * j as f64 / nz as f64;
        if (vals[0] - t_exp).abs() > GRID_TOL || (vals[1] - z_exp).abs() > GRID_TOL {
            return Err(format_err(format!("line {} is off the grid", count + 2)));
        }
        theta[count] = vals[2];
        let sample: Vec4 = [vals[3], vals[4], vals[5], vals[6]];
        let n = norm4(&sample);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::UnitSphereViolation { row: i, col: j, norm: n });
        }
        v[count] = sample;
        count += 1;
    }
    if count != nt * nz {
        return Err(format_err(format!("expected {} data lines, found {count}", nt * nz)));
    }

    let last = (nt - 1) * nz;
    let mut max_diff = 0.0f64;
    for j in 0..nz {
        max_diff = max_diff.max(wrap_pi(theta[j] - theta[last + j]).abs());
        for (a, b) in v[j].iter().zip(&v[last + j]) {
            max_diff = max_diff.max((a - b).abs());
        }
    }
    if max_diff > LOOP_TOL {
        return Err(Error::LoopConditionViolation { max_diff });
    }

    // Unwrap θ: down the z = 0 column, then along each row.
    let mut lifted = vec![0.0; nt * nz];
    lifted[0] = theta[0];
    for i in 1..nt {
        lifted[i * nz] = lifted[(i - 1) * nz] + wrap_pi(theta[i * nz] - theta[(i - 1) * nz]);
    }
    let mut winding = None;
    for i in 0..nt {
        for j in 1..nz {
            let idx = i * nz + j;
            lifted[idx] = lifted[idx - 1] + wrap_pi(theta[idx] - theta[idx - 1]);
        }
        let end = lifted[i * nz + nz - 1] + wrap_pi(theta[i * nz] - theta[i * nz + nz - 1]);
        let w = ((end - lifted[i * nz]) / TAU).round() as i64;
        match winding {
            None => winding = Some(w),
            Some(w0) if w0 != w => return Err(format_err(format!("row {i} has S1 degree {w}, row 0 has {w0}"))),
            _ => {}
        }
    }
    let winding = winding.unwrap();
    let spin_offset = lifted[last] - lifted[0];

    let dt = 1.0 / (nt - 1) as f64;
    let dz = TAU / nz as f64;
    let mut fields: Vec<(Vec<f64>, f64)> = Vec::with_capacity(5);
    fields.push((
        (0..nt * nz).map(|idx| lifted[idx] - winding as f64 * TAU * (idx % nz) as f64 / nz as f64).collect(),
        spin_offset,
    ));
    for k in 0..4 {
        fields.push((v.iter().map(|s| s[k]).collect(), 0.0));
    }

    let channels = fields.into_iter().map(|(f, offset)| build_channel(f, offset, nt, nz, dt, dz)).collect();
    Ok(SampledFamily { nt, nz, eps, winding, channels })
}

/// Column-wise clamped t-splines; the end slopes are the central difference
/// across the seam `t = 1 ~ 0` (the field jumps by `offset` there).
fn t_second_derivs(field: &[f64], offset: f64, nt: usize, nz: usize, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; nt * nz];
    let mut col = vec![0.0; nt];
    for j in 0..nz {
        for i in 0..nt {
            col[i] = field[i * nz + j];
        }
        let slope = (col[1] + offset - col[nt - 2]) / (2.0 * dt);
        let m = clamped_second_derivs(&col, dt, slope, slope);
        for i in 0..nt {
            out[i * nz + j] = m[i];
        }
    }
    out
}

fn build_channel(f: Vec<f64>, offset: f64, nt: usize, nz: usize, dt: f64, dz: f64) -> Channel {
    let mut mz = vec![0.0; nt * nz];
    for i in 0..nt {
        let m = periodic_second_derivs(&f[i * nz..(i + 1) * nz], dz);
        mz[i * nz..(i + 1) * nz].copy_from_slice(&m);
    }
    let mt = t_second_derivs(&f, offset, nt, nz, dt);
    let mzt = t_second_derivs(&mz, 0.0, nt, nz, dt);
    Channel { f, mz, mt, mzt }
}

impl SampledFamily {
    pub fn grid(&self) -> (usize, usize) {
        (self.nt, self.nz)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Value, ∂t and ∂z of one channel.
    fn channel_jet(&self, c: &Channel, i: usize, a: f64, j0: usize, j1: usize, b: f64) -> (f64, f64, f64) {
        let dt = 1.0 / (self.nt - 1) as f64;
        let dz = TAU / self.nz as f64;
        let nz = self.nz;
        let along_t = |vals: &[f64], m: &[f64], j: usize| {
            eval_segment(vals[i * nz + j], vals[(i + 1) * nz + j], m[i * nz + j], m[(i + 1) * nz + j], dt, a)
        };
        let (g0, g0t) = along_t(&c.f, &c.mt, j0);
        let (g1, g1t) = along_t(&c.f, &c.mt, j1);
        let (h0, h0t) = along_t(&c.mz, &c.mzt, j0);
        let (h1, h1t) = along_t(&c.mz, &c.mzt, j1);
        let (val, dzv) = eval_segment(g0, g1, h0, h1, dz, b);
        let (dtv, _) = eval_segment(g0t, g1t, h0t, h1t, dz, b);
        (val, dtv, dzv)
    }
}

impl LoopMap for SampledFamily {
    fn jet(&self, t: f64, z: f64) -> Jet {
        let t = if (0.0..=1.0).contains(&t) { t } else { t.rem_euclid(1.0) };
        let dt = 1.0 / (self.nt - 1) as f64;
        let dz = TAU / self.nz as f64;
        let ti = t / dt;
        let i = (ti.floor() as usize).min(self.nt - 2);
        let a = ti - i as f64;
        let zi = z.rem_euclid(TAU) / dz;
        let j0 = (zi.floor() as usize).min(self.nz - 1);
        let b = zi - j0 as f64;
        let j1 = (j0 + 1) % self.nz;

        let (p, p_t, p_z) = self.channel_jet(&self.channels[0], i, a, j0, j1, b);
        let mut raw = [0.0; 4];
        let mut raw_t = [0.0; 4];
        let mut raw_z = [0.0; 4];
        for k in 0..4 {
            (raw[k], raw_t[k], raw_z[k]) = self.channel_jet(&self.channels[k + 1], i, a, j0, j1, b);
        }
        let n = norm4(&raw);
        let v = raw.map(|x| x / n);
        let project = |d: Vec4| {
            let r = dot4(&v, &d);
            std::array::from_fn(|k| (d[k] - v[k] * r) / n)
        };
        let w = self.winding as f64;
        Jet {
            point: Point { theta: p + w * z, v },
            theta_t: p_t,
            theta_z: p_z + w,
            v_t: project(raw_t),
            v_z: project(raw_z),
        }
    }
}
