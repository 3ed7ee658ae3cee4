use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::Serialize;
use serde_json::json;
use twinloop_core::families::{
    export_sampled, family_t, family_tbar, import_sampled, spin_loop, LoopFamily, MAX_FAMILY_INDEX,
};
use twinloop_core::invariants::{slice_profile as profile_at, w2, Certification, InvariantReport};
use twinloop_core::presentation::{build_m0_presentation, conclude_theorem, AbelianPresentation};
use twinloop_core::{Error, Lambda0, Result};

use crate::{ComputeArgs, DumpArgs, ExportArgs, FamilyArgs, FamilyKind, M0Args, SliceProfileArgs, TheoremArgs};

/// What a successful command hands back for the manifest.
pub struct Run {
    pub config: serde_json::Value,
    pub outputs: Vec<PathBuf>,
}

fn load_family(a: &FamilyArgs) -> Result<LoopFamily> {
    match a.family {
        FamilyKind::T => family_t(a.index, a.eps),
        FamilyKind::Tbar => family_tbar(a.index, a.eps),
        FamilyKind::Spin => spin_loop(a.index, a.eps),
        FamilyKind::Import => {
            let path =
                a.input.as_ref().ok_or_else(|| Error::InvalidParameter("--family import needs --input".into()))?;
            import_sampled(path)
        }
    }
}

/// Writes to `path`, or to stdout when there is none.
fn emit(text: &str, path: Option<&Path>) -> Result<Vec<PathBuf>> {
    match path {
        Some(p) => {
            std::fs::write(p, text)?;
            Ok(vec![p.to_path_buf()])
        }
        None => {
            print!("{text}");
            Ok(vec![])
        }
    }
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("output serializes") + "\n"
}

#[derive(Serialize)]
struct ClassRow {
    t: f64,
    z1: f64,
    z2: f64,
    sign: i8,
    k: i64,
    k_slice: i64,
    delta_arc: f64,
    delta_b: f64,
    residual: f64,
    det_mag: f64,
}

#[derive(Serialize)]
struct CsvClassRow {
    t: f64,
    z1: f64,
    z2: f64,
    sign: i8,
    k: i64,
    residual: f64,
    det_mag: f64,
}

fn class_rows(r: &InvariantReport) -> Vec<ClassRow> {
    r.classes
        .iter()
        .map(|c| ClassRow {
            t: c.collision.t,
            z1: c.collision.z1,
            z2: c.collision.z2,
            sign: c.collision.sign,
            k: c.degree.k,
            k_slice: c.degree.k_slice,
            delta_arc: c.degree.delta_arc,
            delta_b: c.degree.delta_b,
            residual: c.collision.residual,
            det_mag: c.collision.det_mag,
        })
        .collect()
}

#[derive(Serialize)]
struct InvariantsOutput<'a> {
    family: &'a str,
    w1: i64,
    w2: &'a Lambda0,
    w2_display: String,
    classes: Vec<ClassRow>,
    certification: &'a Certification,
    config: serde_json::Value,
}

fn invariants_output<'a>(r: &'a InvariantReport, fam: &FamilyArgs) -> InvariantsOutput<'a> {
    InvariantsOutput {
        family: &r.family,
        w1: r.w1,
        w2: &r.w2,
        w2_display: r.w2.to_string(),
        classes: class_rows(r),
        certification: &r.certification,
        config: json!({ "family": fam, "solver": r.config }),
    }
}

pub fn invariants(a: &ComputeArgs) -> Result<Run> {
    let cfg = a.solver.config()?;
    let f = load_family(&a.family)?;
    let report = w2(&f, &cfg)?;
    let out = invariants_output(&report, &a.family);
    let outputs = emit(&to_json(&out), a.json.as_deref())?;
    Ok(Run { config: out.config, outputs })
}

pub fn export(a: &ExportArgs) -> Result<Run> {
    let f = load_family(&a.family)?;
    export_sampled(&f, a.nt, a.nz, &a.out)?;
    Ok(Run { config: json!({ "family": a.family, "nt": a.nt, "nz": a.nz }), outputs: vec![a.out.clone()] })
}

fn csv_text<R: Serialize>(rows: impl IntoIterator<Item = R>, header: &[&str]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn collisions(a: &DumpArgs) -> Result<Run> {
    let cfg = a.solver.config()?;
    let f = load_family(&a.family)?;
    let report = w2(&f, &cfg)?;
    let rows = report.classes.iter().map(|c| CsvClassRow {
        t: c.collision.t,
        z1: c.collision.z1,
        z2: c.collision.z2,
        sign: c.collision.sign,
        k: c.degree.k,
        residual: c.collision.residual,
        det_mag: c.collision.det_mag,
    });
    let text = csv_text(rows, &["t", "z1", "z2", "sign", "k", "residual", "det_mag"])?;
    let outputs = emit(&text, a.csv.as_deref())?;
    Ok(Run { config: json!({ "family": a.family, "solver": cfg }), outputs })
}

pub fn slice_profile(a: &SliceProfileArgs) -> Result<Run> {
    if a.t_samples == 0 {
        return Err(Error::InvalidParameter("--t-samples must be positive".into()));
    }
    let f = load_family(&a.family)?;
    let mut rows = Vec::new();
    for j in 0..a.t_samples {
        let t = (j as f64 + 0.5) / a.t_samples as f64;
        for c in profile_at(&f, t, a.slice_angle)? {
            rows.push((t, c.z, c.sign));
        }
    }
    let text = csv_text(rows, &["t", "crossing_angle", "sign"])?;
    let outputs = emit(&text, a.csv.as_deref())?;
    Ok(Run { config: json!({ "family": a.family, "t_samples": a.t_samples, "slice_angle": a.slice_angle }), outputs })
}

fn presentation_json(p: &AbelianPresentation) -> serde_json::Value {
    let snf = p.snf();
    let relations: Vec<Vec<String>> = p.relations().iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
    json!({
        "display": p.to_string(),
        "generators": p.generators(),
        "relations": relations,
        "invariant_factors": snf.invariant_factors.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
        "free_rank": snf.free_rank,
        "group": snf.group_name(),
    })
}

pub fn presentation(a: &M0Args) -> Result<Run> {
    let p = build_m0_presentation(&a.n, &a.signs)?;
    let verdict = conclude_theorem(&p)?;
    let out = json!({ "presentation": presentation_json(&p), "verdict": verdict });
    let outputs = emit(&to_json(&out), a.json.as_deref())?;
    Ok(Run { config: json!({ "n": a.n, "signs": a.signs }), outputs })
}

#[derive(Serialize)]
struct TheoremEntry<'a> {
    i: i64,
    family: &'a str,
    w2: &'a Lambda0,
    w2_display: String,
    coefficient: String,
    n: i64,
    sign: i8,
    certification: &'a Certification,
}

/// The `x²` coefficient of a report, or `NotPureX2`.
fn x2_coefficient(r: &InvariantReport) -> Result<BigInt> {
    r.w2.as_x2_multiple().filter(|c| !c.is_zero()).ok_or_else(|| Error::NotPureX2(format!("{} = {}", r.family, r.w2)))
}

pub fn theorem(a: &TheoremArgs) -> Result<Run> {
    if !(1..=MAX_FAMILY_INDEX).contains(&a.count) {
        return Err(Error::InvalidParameter(format!("--N must lie in 1..={MAX_FAMILY_INDEX}, got {}", a.count)));
    }
    if a.imports.len() > a.count as usize {
        return Err(Error::InvalidParameter(format!("{} imports given for --N {}", a.imports.len(), a.count)));
    }
    let cfg = a.solver.config()?;
    let reference = w2(&family_t(1, a.eps)?, &cfg)?;
    let c_ref = x2_coefficient(&reference)?;

    let mut reports = Vec::new();
    for i in 1..=a.count {
        let f = match a.imports.get(i as usize - 1) {
            Some(p) => import_sampled(p)?,
            None => family_tbar(i, a.eps)?,
        };
        reports.push(w2(&f, &cfg)?);
    }

    let mut n = Vec::new();
    let mut signs = Vec::new();
    let mut entries = Vec::new();
    for (i, r) in (1..).zip(&reports) {
        let c = x2_coefficient(r)?;
        if !(&c % &c_ref).is_zero() {
            return Err(Error::NotPureX2(format!("{} is not an integer multiple of {}", r.w2, reference.w2)));
        }
        let ni = i64::try_from((&c / &c_ref).abs())
            .map_err(|_| Error::InvalidParameter(format!("multiplier {c} out of range")))?;
        let si: i8 = if (&c * &c_ref).is_positive() { 1 } else { -1 };
        n.push(ni);
        signs.push(si);
        entries.push(TheoremEntry {
            i,
            family: &r.family,
            w2: &r.w2,
            w2_display: r.w2.to_string(),
            coefficient: c.to_string(),
            n: ni,
            sign: si,
            certification: &r.certification,
        });
    }

    let p = build_m0_presentation(&n, &signs)?;
    let verdict = conclude_theorem(&p)?;
    let out = json!({
        "reference": {
            "family": reference.family,
            "w2": reference.w2,
            "w2_display": reference.w2.to_string(),
            "certification": reference.certification,
        },
        "families": entries,
        "n": n,
        "signs": signs,
        "presentation": presentation_json(&p),
        "verdict": verdict,
    });
    let outputs = emit(&to_json(&out), a.json.as_deref())?;
    Ok(Run { config: theorem_config(a, &cfg), outputs })
}

fn theorem_config(a: &TheoremArgs, cfg: &twinloop_core::collide::SolverConfig) -> serde_json::Value {
    json!({ "N": a.count, "imports": a.imports, "eps": a.eps, "solver": cfg })
}
