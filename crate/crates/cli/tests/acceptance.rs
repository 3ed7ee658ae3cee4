//! End-to-end acceptance run. Prints one `criterion N: PASS|FAIL` line per
//! criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use twinloop_core::collide::oracle::{dense_bisection, OracleConfig};
use twinloop_core::collide::{find_collisions, CollisionPoint, SolverConfig};
use twinloop_core::families::{concatenate, family_t, family_tbar, reverse, spin_loop, LoopFamily, DEFAULT_EPS};
use twinloop_core::invariants::{assign_degrees, signed_monomial_sum, slice_profile, w1, w2};
use twinloop_core::presentation::{determinant, mat_mul, smith_normal_form, verify_snf, Matrix};
use twinloop_core::ring::{lambda0_reduce, LaurentPoly};
use twinloop_core::Lambda0;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Run {
    stdout: Vec<u8>,
    elapsed: Duration,
}

fn twinloop(args: &[&str]) -> Result<Run, String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_twinloop")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(Run { stdout: out.stdout, elapsed: start.elapsed() })
}

fn parse(run: &Run) -> Result<Value, String> {
    serde_json::from_slice(&run.stdout).map_err(|e| e.to_string())
}

/// The single `(exp, coef)` term of a JSON `w2`, if it has exactly one.
fn single_term(v: &Value) -> Option<(i64, i64)> {
    match v["w2"]["terms"].as_array()?.as_slice() {
        [t] => Some((t["exp"].as_i64()?, t["coef"].as_i64()?)),
        _ => None,
    }
}

const T1_ARGS: [&str; 8] = ["invariants", "compute", "--family", "t", "--i", "1", "--grid", "64"];

fn tbar_args(i: &str) -> [&str; 10] {
    ["invariants", "compute", "--family", "tbar", "--i", i, "--grid", "64", "--seed", "0"]
}

const THEOREM_ARGS: [&str; 5] = ["theorem", "--N", "2", "--seed", "0"];

/// Outputs of the CLI runs behind criteria 1, 2 and 8, kept for 6 and 10.
#[derive(Default)]
struct Cache {
    t1: Option<Run>,
    tbar: Vec<Run>,
    theorem: Option<Run>,
}

fn criterion_1(cache: &mut Cache) -> Outcome {
    let run = twinloop(&T1_ARGS)?;
    let v = parse(&run)?;
    let term = single_term(&v);
    ensure(matches!(term, Some((2, 1)) | Some((2, -1))), || format!("W2(T(1)) = {}", v["w2_display"]))?;
    ensure(run.elapsed <= Duration::from_secs(300), || format!("took {:?}", run.elapsed))?;
    let msg = format!("W2(T(1)) = {} in {:.2?}", v["w2_display"].as_str().unwrap_or("?"), run.elapsed);
    cache.t1 = Some(run);
    Ok(msg)
}

fn criterion_2(cache: &mut Cache) -> Outcome {
    let mut found = Vec::new();
    for i in 1..=3i64 {
        let run = twinloop(&tbar_args(&i.to_string()))?;
        let v = parse(&run)?;
        let term = single_term(&v);
        ensure(matches!(term, Some((2, c)) if c.abs() == i), || format!("W2(T̄({i})) = {}", v["w2_display"]))?;
        ensure(run.elapsed <= Duration::from_secs(600), || format!("T̄({i}) took {:?}", run.elapsed))?;
        found.push(v["w2_display"].as_str().unwrap_or("?").to_string());
        cache.tbar.push(run);
    }
    Ok(format!("W2(T̄(1..3)) = {}", found.join(", ")))
}

fn w2_of(f: &LoopFamily) -> Result<Lambda0, String> {
    w2(f, &SolverConfig::default()).map(|r| r.w2).map_err(|e| format!("{}: {e}", f.name()))
}

fn family_pool() -> Result<Vec<LoopFamily>, String> {
    let e = |r: twinloop_core::Result<LoopFamily>| r.map_err(|e| e.to_string());
    Ok(vec![
        e(family_t(1, DEFAULT_EPS))?,
        e(family_tbar(1, DEFAULT_EPS))?,
        e(family_tbar(2, DEFAULT_EPS))?,
        e(spin_loop(1, DEFAULT_EPS))?,
        e(spin_loop(-1, DEFAULT_EPS))?,
    ])
}

fn criterion_3() -> Outcome {
    let pool = family_pool()?;
    let mut values = Vec::new();
    for f in &pool {
        values.push((w1(f).map_err(|e| e.to_string())?, w2_of(f)?));
    }
    let mut pairs = 0;
    for (a, va) in pool.iter().zip(&values) {
        for (b, vb) in pool.iter().zip(&values) {
            let ab = concatenate(a, b).map_err(|e| e.to_string())?;
            let w1_ab = w1(&ab).map_err(|e| e.to_string())?;
            ensure(w1_ab == va.0 + vb.0, || format!("W1 of {} * {} is {w1_ab}", a.name(), b.name()))?;
            let w2_ab = w2_of(&ab)?;
            let sum = &va.1 + &vb.1;
            ensure(w2_ab == sum, || format!("W2 of {} * {}: {w2_ab} vs {sum}", a.name(), b.name()))?;
            pairs += 1;
        }
    }
    Ok(format!("{pairs} ordered pairs additive"))
}

fn criterion_4() -> Outcome {
    let pool = family_pool()?;
    for f in &pool {
        let r = reverse(f);
        let (a, b) = (w1(f).map_err(|e| e.to_string())?, w1(&r).map_err(|e| e.to_string())?);
        ensure(b == -a, || format!("W1 of reversed {}: {b} vs {a}", f.name()))?;
        let (a, b) = (w2_of(f)?, w2_of(&r)?);
        ensure(b == -&a, || format!("W2 of reversed {}: {b} vs {a}", f.name()))?;
    }
    Ok(format!("{} families negate", pool.len()))
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn criterion_5() -> Outcome {
    let cfg = SolverConfig::default();
    let mut total = 0;
    for i in 1..=2 {
        let f = family_tbar(i, DEFAULT_EPS).map_err(|e| e.to_string())?;
        let pipeline = find_collisions(&f, &cfg).map_err(|e| e.to_string())?;
        let oracle: Vec<CollisionPoint> = dense_bisection(&f, &OracleConfig::default())
            .into_iter()
            .map(|o| CollisionPoint {
                t: o.t,
                z1: o.z1,
                z2: o.z2,
                location: f.eval(o.t, o.z1).v,
                sign: o.sign,
                det_mag: 0.0,
                residual: o.gap,
            })
            .collect();
        ensure(pipeline.len() == oracle.len(), || format!("T̄({i}): {} vs {} classes", pipeline.len(), oracle.len()))?;
        let (_, dp) = assign_degrees(&f, &pipeline, cfg.slice_angle).map_err(|e| e.to_string())?;
        let (_, dor) = assign_degrees(&f, &oracle, cfg.slice_angle).map_err(|e| e.to_string())?;
        let mut used = vec![false; oracle.len()];
        for (p, kp) in pipeline.iter().zip(&dp) {
            let j = (0..oracle.len())
                .find(|&j| {
                    let o = &oracle[j];
                    !used[j]
                        && (p.t - o.t).abs() <= 1e-6
                        && angle_gap(p.z1, o.z1) <= 1e-6
                        && angle_gap(p.z2, o.z2) <= 1e-6
                })
                .ok_or_else(|| format!("T̄({i}): no oracle class near ({}, {}, {})", p.t, p.z1, p.z2))?;
            used[j] = true;
            ensure(p.sign == oracle[j].sign && kp.k == dor[j].k, || {
                format!("T̄({i}): sign or degree differs at t = {}", p.t)
            })?;
        }
        let wp = signed_monomial_sum(pipeline.iter().zip(&dp).map(|(c, d)| (c.sign, d.k)));
        let wo = signed_monomial_sum(oracle.iter().zip(&dor).map(|(c, d)| (c.sign, d.k)));
        ensure(wp == wo, || format!("T̄({i}): W2 {wp} vs oracle {wo}"))?;
        total += pipeline.len();
    }
    Ok(format!("{total} classes matched within 1e-6"))
}

fn criterion_6(cache: &Cache) -> Outcome {
    let runs = cache.t1.iter().chain(&cache.tbar);
    let mut checked = 0;
    for run in runs {
        for c in parse(run)?["classes"].as_array().ok_or("classes missing")? {
            let (k, ks) = (c["k"].as_i64(), c["k_slice"].as_i64());
            ensure(k.is_some() && k == ks, || format!("lift {k:?} vs slice {ks:?}"))?;
            checked += 1;
        }
    }
    ensure(checked > 0, || "criteria 1-2 produced no classes".into())?;

    let mut fams = vec![family_t(1, DEFAULT_EPS).map_err(|e| e.to_string())?];
    for i in 1..=3 {
        fams.push(family_tbar(i, DEFAULT_EPS).map_err(|e| e.to_string())?);
    }
    for f in &fams {
        let report = w2(f, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let swapped: Vec<CollisionPoint> = report.classes.iter().map(|c| c.collision.swapped()).collect();
        let (_, degrees) = assign_degrees(f, &swapped, 0.0).map_err(|e| e.to_string())?;
        for ((rec, s), d) in report.classes.iter().zip(&swapped).zip(&degrees) {
            ensure(rec.degree.k == rec.degree.k_slice && d.k == d.k_slice, || {
                format!("{}: lift and slice disagree", f.name())
            })?;
            ensure(s.sign == rec.collision.sign && d.k == -rec.degree.k, || {
                format!("{}: swapped rep is not (σ, -k)", f.name())
            })?;
            ensure(
                Lambda0::monomial(d.k, s.sign as i64) == Lambda0::monomial(rec.degree.k, rec.collision.sign as i64),
                || format!("{}: swapped monomial differs", f.name()),
            )?;
        }
    }
    Ok(format!("{checked} classes, lift = slice, swaps reduce identically"))
}

fn criterion_7() -> Outcome {
    let f = family_tbar(3, DEFAULT_EPS).map_err(|e| e.to_string())?;
    let mut triples = 0;
    for j in 0..64 {
        let t = (j as f64 + 0.37) / 64.0;
        let signs: Vec<i8> = slice_profile(&f, t, 0.0).map_err(|e| e.to_string())?.iter().map(|c| c.sign).collect();
        let ok = signs == [1] || signs == [1, 1, -1];
        ensure(ok, || format!("t = {t}: pattern {signs:?}"))?;
        let n = signs.len();
        for start in 0..n {
            let mut acc = 0i64;
            for len in 0..n {
                acc += signs[(start + len) % n] as i64;
                ensure([0, 1, -1, 2].contains(&acc), || format!("t = {t}: run sum {acc}"))?;
            }
        }
        triples += (n == 3) as usize;
    }
    Ok(format!("64 samples, {triples} with three crossings"))
}

fn criterion_8(cache: &mut Cache) -> Outcome {
    let run = twinloop(&THEOREM_ARGS)?;
    let v = parse(&run)?;
    let n: Vec<i64> = v["n"].as_array().ok_or("n missing")?.iter().filter_map(Value::as_i64).collect();
    ensure(n == [1, 2], || format!("extracted n = {n:?}"))?;
    let verdict = &v["verdict"];
    ensure(verdict["verdict"] == "quotient of ℤ/2", || format!("verdict {verdict}"))?;
    ensure(verdict["free_rank"] == 0, || format!("free rank {}", verdict["free_rank"]))?;
    let factors = verdict["invariant_factors"].as_array().ok_or("factors missing")?;
    ensure(factors.iter().all(|d| d == "1" || d == "2"), || format!("factors {factors:?}"))?;
    let rel = &v["presentation"]["relations"][0];
    ensure(rel[0] == "2" && rel.as_array().is_some_and(|r| r[1..].iter().all(|x| x == "0")), || {
        format!("first relation {rel}")
    })?;
    ensure(run.elapsed <= Duration::from_secs(1200), || format!("took {:?}", run.elapsed))?;
    let msg = format!("n = {n:?}, signs = {}, group {} in {:.2?}", v["signs"], verdict["group"], run.elapsed);
    cache.theorem = Some(run);
    Ok(msg)
}

const FUZZ_CASES: usize = 10_000;

fn random_laurent(rng: &mut ChaCha8Rng) -> Vec<(i64, BigInt)> {
    let len = rng.gen_range(0..8);
    (0..len)
        .map(|_| {
            let mut c = BigInt::from(rng.gen_range(-20i64..=20));
            if rng.gen_bool(0.1) {
                c *= BigInt::one() << 80u32;
            }
            (rng.gen_range(-9i64..=9), c)
        })
        .collect()
}

/// Independent reduction: fold exponents to `|k|`, drop `|k| < 2`.
fn reduce_oracle(terms: &[(i64, BigInt)]) -> BTreeMap<u64, BigInt> {
    let mut m = BTreeMap::new();
    for (e, c) in terms {
        if e.unsigned_abs() >= 2 {
            *m.entry(e.unsigned_abs()).or_insert_with(BigInt::zero) += c;
        }
    }
    m.retain(|_, c| !c.is_zero());
    m
}

fn as_map(a: &Lambda0) -> BTreeMap<u64, BigInt> {
    a.terms().map(|(e, c)| (e, c.clone())).collect()
}

fn ring_fuzz(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for case in 0..FUZZ_CASES {
        let (ta, tb) = (random_laurent(rng), random_laurent(rng));
        let a = LaurentPoly::from_terms(ta.clone());
        let b = LaurentPoly::from_terms(tb.clone());
        let ra = lambda0_reduce(&a);
        ensure(as_map(&ra) == reduce_oracle(&ta), || format!("ring case {case}: reduction of {ta:?}"))?;
        let sum: Vec<(i64, BigInt)> = ta.iter().chain(&tb).cloned().collect();
        let rsum = lambda0_reduce(&LaurentPoly::from_terms(sum));
        ensure(rsum == &ra + &lambda0_reduce(&b), || format!("ring case {case}: not additive"))?;
        let neg: Vec<(i64, BigInt)> = ta.iter().map(|(e, c)| (*e, -c)).collect();
        ensure(lambda0_reduce(&LaurentPoly::from_terms(neg)) == -&ra, || format!("ring case {case}: negation"))?;
        ensure(lambda0_reduce(&ra.to_laurent()) == ra, || format!("ring case {case}: not idempotent"))?;
        // the defining relations vanish
        let k = rng.gen_range(-9i64..=9);
        let rel = LaurentPoly::from_terms([(k, BigInt::one()), (-k, -BigInt::one())]);
        ensure(lambda0_reduce(&rel).is_zero(), || format!("x^{k} - x^{} survives", -k))?;
    }
    Ok(())
}

fn hom_count(m: &[Vec<i64>], gens: usize, q: i64) -> u64 {
    let total = (q as u64).pow(gens as u32);
    let mut count = 0;
    let mut x = vec![0i64; gens];
    for mut code in 0..total {
        for xi in x.iter_mut() {
            *xi = (code % q as u64) as i64;
            code /= q as u64;
        }
        if m.iter().all(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum::<i64>().rem_euclid(q) == 0) {
            count += 1;
        }
    }
    count
}

fn snf_fuzz(rng: &mut ChaCha8Rng) -> Result<(usize, usize), String> {
    let mut order_checked = 0;
    let mut finite = 0;
    for case in 0..FUZZ_CASES {
        let gens = rng.gen_range(1..=4usize);
        let rows = rng.gen_range(0..=4usize);
        let m: Vec<Vec<i64>> = (0..rows).map(|_| (0..gens).map(|_| rng.gen_range(-8i64..=8)).collect()).collect();
        let r: Matrix = m.iter().map(|row| row.iter().map(|&x| BigInt::from(x)).collect()).collect();
        let s = smith_normal_form(&r, gens);
        let ctx = || format!("snf case {case}: {m:?}");

        verify_snf(&r, gens, &s).map_err(|e| format!("{}: {e}", ctx()))?;
        ensure(mat_mul(&mat_mul(&s.u, &r, rows, gens), &s.v, gens, gens) == s.d, ctx)?;
        if rows > 0 {
            ensure(determinant(&s.u).abs().is_one(), ctx)?;
        }
        ensure(determinant(&s.v).abs().is_one(), ctx)?;
        let f = &s.invariant_factors;
        ensure(f.iter().all(|d| d.is_positive()), ctx)?;
        ensure(f.windows(2).all(|w| w[1].is_multiple_of(&w[0])), ctx)?;
        ensure(f.len() + s.free_rank == gens, ctx)?;

        let small: Vec<i64> = f.iter().map(|d| i64::try_from(d).unwrap_or(i64::MAX)).collect();
        for q in 2..=6i64 {
            let predicted =
                small.iter().map(|d| d.gcd(&q) as u64).product::<u64>() * (q as u64).pow(s.free_rank as u32);
            ensure(hom_count(&m, gens, q) == predicted, || format!("{}: q = {q}", ctx()))?;
        }
        if s.free_rank == 0 {
            finite += 1;
            // Hom(G, ℤ/e) ≅ G when e is the exponent of G
            let e = *small.last().unwrap_or(&1);
            if (e as f64).powi(gens as i32) <= 2e5 {
                let order = s.order().ok_or_else(ctx)?;
                ensure(BigInt::from(hom_count(&m, gens, e.max(1))) == order, || format!("{}: order {order}", ctx()))?;
                order_checked += 1;
            }
        }
    }
    Ok((finite, order_checked))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    ring_fuzz(&mut rng)?;
    let (finite, order_checked) = snf_fuzz(&mut rng)?;
    Ok(format!("{FUZZ_CASES} ring cases, {FUZZ_CASES} SNF cases ({finite} finite, {order_checked} orders enumerated)"))
}

fn criterion_10(cache: &Cache) -> Outcome {
    let mut compared = 0;
    let mut check = |args: &[&str], first: Option<&Run>| -> Result<(), String> {
        let first = first.ok_or_else(|| format!("{args:?} has no first run"))?;
        let again = twinloop(args)?;
        ensure(again.stdout == first.stdout, || format!("{args:?} output changed between runs"))?;
        compared += 1;
        Ok(())
    };
    check(&T1_ARGS, cache.t1.as_ref())?;
    for i in 1..=3 {
        check(&tbar_args(&i.to_string()), cache.tbar.get(i - 1))?;
    }
    check(&THEOREM_ARGS, cache.theorem.as_ref())?;
    let seeded = ["invariants", "compute", "--family", "tbar", "--i", "2", "--seed", "11"];
    let first = twinloop(&seeded)?;
    check(&seeded, Some(&first))?;
    Ok(format!("{compared} reruns byte-identical"))
}

fn main() {
    let mut cache = Cache::default();
    let results: Vec<(u32, Outcome)> = vec![
        (1, criterion_1(&mut cache)),
        (2, criterion_2(&mut cache)),
        (3, criterion_3()),
        (4, criterion_4()),
        (5, criterion_5()),
        (6, criterion_6(&cache)),
        (7, criterion_7()),
        (8, criterion_8(&mut cache)),
        (9, criterion_9()),
        (10, criterion_10(&cache)),
    ];

    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(msg) => println!("criterion {n}: PASS ({msg})"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n}: FAIL ({msg})");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
