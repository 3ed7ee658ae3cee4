//! Reference collision finder by exhaustive box bisection.
//!
//! Shares nothing with the Newton pipeline: it only calls `eval`, takes
//! derivatives by central differences, and discards a box in `(t, z₁, z₂)`
//! when a Taylor bound shows `v(t,z₁) - v(t,z₂)` cannot vanish in it. The
//! second-derivative constants are sampled, so this is a careful heuristic
//! rather than a proof.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::families::{LoopFamily, SEPARATION_CUTOFF};
use crate::geom::{det4, norm4, sub4, Vec4};

#[derive(Clone, Debug)]
pub struct OracleConfig {
    /// Initial cells per axis.
    pub cells: usize,
    /// Boxes are split until every half-width is below this.
    pub min_half_width: f64,
    /// Surviving leaves closer than this are one collision.
    pub cluster_radius: f64,
    /// Multiplier on the sampled second-derivative maxima.
    pub safety: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { cells: 64, min_half_width: 1e-9, cluster_radius: 1e-6, safety: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleCollision {
    pub t: f64,
    pub z1: f64,
    pub z2: f64,
    pub sign: i8,
    pub gap: f64,
}

const FD: f64 = 1e-6;

struct Curvature {
    tt: f64,
    tz: f64,
    zz: f64,
}

fn v_at(f: &LoopFamily, t: f64, z: f64) -> Vec4 {
    f.eval(t, z).v
}

fn second_diff(a: &Vec4, b: &Vec4, c: &Vec4, h2: f64) -> f64 {
    norm4(&std::array::from_fn(|k| (a[k] - 2.0 * b[k] + c[k]) / h2))
}

/// Sampled maxima of `‖v_tt‖`, `‖v_tz‖`, `‖v_zz‖`.
fn sample_curvature(f: &LoopFamily, nt: usize, nz: usize) -> Curvature {
    let h = 1e-4;
    let rows: Vec<(f64, f64, f64)> = (0..=nt)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / nt as f64;
            let mut m = (0.0f64, 0.0f64, 0.0f64);
            for j in 0..nz {
                let z = TAU * j as f64 / nz as f64;
                let c = v_at(f, t, z);
                let tt = second_diff(&v_at(f, t + h, z), &c, &v_at(f, t - h, z), h * h);
                let zz = second_diff(&v_at(f, t, z + h), &c, &v_at(f, t, z - h), h * h);
                let pp = v_at(f, t + h, z + h);
                let pm = v_at(f, t + h, z - h);
                let mp = v_at(f, t - h, z + h);
                let mm = v_at(f, t - h, z - h);
                let tz = norm4(&std::array::from_fn(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * h)));
                m = (m.0.max(tt), m.1.max(tz), m.2.max(zz));
            }
            m
        })
        .collect();
    let (tt, tz, zz) =
        rows.into_iter().fold((0.0f64, 0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2)));
    Curvature { tt, tz, zz }
}

#[derive(Clone, Copy)]
struct Cell {
    c: [f64; 3],
    h: [f64; 3],
}

/// Inverse of a symmetric 3×3 matrix, or `None` when near singular.
fn inverse_sym3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c = |r: usize, k: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (k1, k2) = ((k + 1) % 3, (k + 2) % 3);
        m[r1][k1] * m[r2][k2] - m[r1][k2] * m[r2][k1]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    if det.is_nan() || det.abs() <= 1e-14 * scale.powi(3) {
        return None;
    }
    Some(std::array::from_fn(|r| std::array::from_fn(|k| c(k, r) / det)))
}

/// Can the box contain a zero of `g(t,z₁,z₂) = v(t,z₁) - v(t,z₂)`?
///
/// Two tests with the Taylor remainder `R`: the gap against the first-order
/// variation plus `R`, and the least-squares offset `s* = -Dg⁺ g(c)` against
/// the box inflated by `|Dg⁺|·R` row by row.
fn may_contain_root(f: &LoopFamily, b: &Cell, k: &Curvature) -> (bool, f64) {
    let [t, z1, z2] = b.c;
    let [ht, h1, h2] = b.h;
    let v1 = v_at(f, t, z1);
    let v2 = v_at(f, t, z2);
    let g: Vec4 = sub4(&v1, &v2);
    let gap = norm4(&g);
    let diff = |a: Vec4, b: Vec4| -> Vec4 { std::array::from_fn(|i| (a[i] - b[i]) / (2.0 * FD)) };
    let g_t = diff(sub4(&v_at(f, t + FD, z1), &v_at(f, t + FD, z2)), sub4(&v_at(f, t - FD, z1), &v_at(f, t - FD, z2)));
    let g_1 = diff(v_at(f, t, z1 + FD), v_at(f, t, z1 - FD));
    let g_2 = diff(v_at(f, t, z2 - FD), v_at(f, t, z2 + FD));
    let cols = [g_t, g_1, g_2];
    let linear = norm4(&g_t) * ht + norm4(&g_1) * h1 + norm4(&g_2) * h2;
    let quad = |hz: f64| k.tt * ht * ht + 2.0 * k.tz * ht * hz + k.zz * hz * hz;
    // remainder, plus slack for the finite-difference Jacobian
    let rem = 0.5 * (quad(h1) + quad(h2)) + 1e-8 * (ht + h1 + h2) + 1e-12;
    if gap > linear + rem {
        return (false, gap);
    }
    let gram: [[f64; 3]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| crate::geom::dot4(&cols[r], &cols[c])));
    if let Some(inv) = inverse_sym3(&gram) {
        // rows of Dg⁺ = (DgᵀDg)⁻¹ Dgᵀ
        let pinv: [Vec4; 3] =
            std::array::from_fn(|r| std::array::from_fn(|i| (0..3).map(|c| inv[r][c] * cols[c][i]).sum()));
        for (r, h) in b.h.iter().enumerate() {
            let s_star = -crate::geom::dot4(&pinv[r], &g);
            if s_star.abs() > h + norm4(&pinv[r]) * rem {
                return (false, gap);
            }
        }
    }
    (true, gap)
}

fn split(b: &Cell) -> impl Iterator<Item = Cell> + '_ {
    (0..8).map(move |mask| {
        let mut c = b.c;
        let h = b.h.map(|x| x / 2.0);
        for k in 0..3 {
            c[k] += if mask & (1 << k) == 0 { -h[k] } else { h[k] };
        }
        Cell { c, h }
    })
}

fn angle_sep(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Orientation sign of the collision: `sgn det[p, ∂t g, ∂z₁ v₁, -∂z₂ v₂]`.
fn oracle_sign(f: &LoopFamily, t: f64, z1: f64, z2: f64) -> i8 {
    let d = |a: Vec4, b: Vec4| -> Vec4 { std::array::from_fn(|i| (a[i] - b[i]) / (2.0 * FD)) };
    let p = v_at(f, t, z1);
    let g_t: Vec4 = {
        let a = d(v_at(f, t + FD, z1), v_at(f, t - FD, z1));
        let b = d(v_at(f, t + FD, z2), v_at(f, t - FD, z2));
        sub4(&a, &b)
    };
    let v1_z = d(v_at(f, t, z1 + FD), v_at(f, t, z1 - FD));
    let v2_z = d(v_at(f, t, z2 + FD), v_at(f, t, z2 - FD)).map(|x| -x);
    if det4([&p, &g_t, &v1_z, &v2_z]) > 0.0 {
        1
    } else {
        -1
    }
}

/// All collisions with `z₁ < z₂` and separation at least the cutoff,
/// sorted by `t` then `z₁`.
pub fn dense_bisection(f: &LoopFamily, cfg: &OracleConfig) -> Vec<OracleCollision> {
    let n = cfg.cells;
    let curv = {
        let c = sample_curvature(f, 512, 1024);
        Curvature { tt: c.tt * cfg.safety, tz: c.tz * cfg.safety, zz: c.zz * cfg.safety }
    };
    let ht = 0.5 / n as f64;
    let hz = 0.5 * TAU / n as f64;
    let mut roots_cells = Vec::new();
    for i in 0..n {
        for j1 in 0..n {
            for j2 in j1 + 1..n {
                let z1 = (j1 as f64 + 0.5) * 2.0 * hz;
                let z2 = (j2 as f64 + 0.5) * 2.0 * hz;
                if angle_sep(z1, z2) + 2.0 * hz >= SEPARATION_CUTOFF {
                    roots_cells.push(Cell { c: [(i as f64 + 0.5) * 2.0 * ht, z1, z2], h: [ht, hz, hz] });
                }
            }
        }
    }
    let leaves: Vec<(Cell, f64)> = roots_cells
        .par_iter()
        .flat_map_iter(|root| {
            let mut out = Vec::new();
            let mut stack = vec![*root];
            while let Some(b) = stack.pop() {
                // wholly inside the excluded band around the diagonal
                if angle_sep(b.c[1], b.c[2]) + b.h[1] + b.h[2] < SEPARATION_CUTOFF {
                    continue;
                }
                let (keep, gap) = may_contain_root(f, &b, &curv);
                if !keep {
                    continue;
                }
                if b.h.iter().all(|&h| h < cfg.min_half_width) {
                    out.push((b, gap));
                } else {
                    stack.extend(split(&b));
                }
            }
            out
        })
        .collect();

    // single-linkage clustering of the surviving leaves
    let mut clusters: Vec<Vec<(Cell, f64)>> = Vec::new();
    for leaf in leaves {
        let near = |c: &Vec<(Cell, f64)>| {
            c.iter().any(|(o, _)| {
                let d = (0..3).map(|k| (o.c[k] - leaf.0.c[k]).powi(2)).sum::<f64>().sqrt();
                d <= cfg.cluster_radius
            })
        };
        let hits: Vec<usize> = (0..clusters.len()).filter(|&i| near(&clusters[i])).collect();
        let mut merged = vec![leaf];
        for &i in hits.iter().rev() {
            merged.extend(clusters.swap_remove(i));
        }
        clusters.push(merged);
    }
    let mut out: Vec<OracleCollision> = clusters
        .into_iter()
        .map(|c| {
            let (best, gap) = c.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            let [t, z1, z2] = best.c;
            OracleCollision { t, z1, z2, sign: oracle_sign(f, t, z1, z2), gap }
        })
        .filter(|c| angle_sep(c.z1, c.z2) >= SEPARATION_CUTOFF)
        .collect();
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.z1.total_cmp(&b.z1)));
    out
}
