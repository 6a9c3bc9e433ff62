//! Implementations of the six subcommands. Each returns a JSON report
//! value on success or a `Failure` carrying the process exit code.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use kms_hodge_core::charnum::{self, CharReport};
use kms_hodge_core::cmat::{C64, CMat};
use kms_hodge_core::corrfun::{
    alpha_of, kms_table_transport, phi_inverse_kms, phi_local, unipotent_log, validate_monodromy,
};
use kms_hodge_core::exact::{crat_one, crat_zero, rat_zero, CRat, Rat};
use kms_hodge_core::modelflow::{
    heat_flow, inequality_scan, rank2_model, trace_free_bump, uniform_bound_scan, FlowError,
    FlowState,
};
use kms_hodge_core::pardata::{validate_flat, validate_ls};
use kms_hodge_core::perturb::{perturb_ii_strict, refine, PerturbError, RefinedSpectrum};
use kms_hodge_core::ratmat::RatMat;
use kms_hodge_core::synth::random_ls;

use crate::formats::{
    rat_to_string, read_json, BundleJson, CRatJson, FlowConfigJson, LocalSystemFile,
    LocalSystemJson,
};

/// Process exit codes: 1 validation, 2 assertion/identity, 3 numerical
/// abort.
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn validation(msg: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: msg.into(),
        }
    }
    pub fn identity(msg: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: msg.into(),
        }
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: msg.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::validation(format!("{e:#}"))
    }
}

fn char_report_json(r: &CharReport) -> Value {
    let coeffs: BTreeMap<String, String> = r
        .c1_coeffs
        .iter()
        .map(|(k, v)| (k.clone(), rat_to_string(v)))
        .collect();
    json!({
        "c1_coeffs": coeffs,
        "par_deg": rat_to_string(&r.par_deg),
        "par_ch2": rat_to_string(&r.par_ch2),
        "c1_squared": rat_to_string(&r.c1_squared),
        "bg_gap": rat_to_string(&r.bg_gap),
        "im_residual": rat_to_string(&r.im_residual),
    })
}

fn report_errors(path: &PathBuf, report: &[String]) -> Failure {
    Failure::validation(format!(
        "{}: {}",
        path.display(),
        report.join("; ")
    ))
}

/// Parse an input file as either bundle tables or local-system tables,
/// distinguished by the presence of the `lambda` field.
enum CharInput {
    Bundle(BundleJson),
    LocalSystem(LocalSystemJson),
}

fn read_char_input(path: &PathBuf) -> Result<CharInput, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("reading {}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::validation(format!("parsing {}: {e}", path.display())))?;
    if raw.get("lambda").is_some() {
        let b: BundleJson = serde_json::from_value(raw)
            .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
        Ok(CharInput::Bundle(b))
    } else {
        let l: LocalSystemJson = serde_json::from_value(raw)
            .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
        Ok(CharInput::LocalSystem(l))
    }
}

pub fn charnum(inputs: &[PathBuf]) -> Result<Value, Failure> {
    if inputs.is_empty() {
        return Err(Failure::validation("charnum: at least one --input required"));
    }
    let mut reports = Vec::new();
    for path in inputs {
        match read_char_input(path)? {
            CharInput::Bundle(b) => {
                let data = b.to_core().map_err(Failure::from)?;
                let errs = validate_flat(&data);
                if !errs.is_empty() {
                    return Err(report_errors(path, &errs));
                }
                let mut rep = char_report_json(&charnum::char_report_flat(&data));
                rep["input"] = json!(path.display().to_string());
                rep["kind"] = json!("bundle");
                reports.push(rep);
            }
            CharInput::LocalSystem(l) => {
                let data = l.to_core().map_err(Failure::from)?;
                let errs = validate_ls(&data);
                if !errs.is_empty() {
                    return Err(report_errors(path, &errs));
                }
                let mut rep = char_report_json(&charnum::char_report_ls(&data));
                rep["input"] = json!(path.display().to_string());
                rep["kind"] = json!("localsys");
                reports.push(rep);
            }
        }
    }
    Ok(json!({ "command": "charnum", "reports": reports }))
}

pub fn perturb(inputs: &[PathBuf], m: i128) -> Result<Value, Failure> {
    if inputs.len() != 1 {
        return Err(Failure::validation("perturb: exactly one --input required"));
    }
    if m < 1 {
        return Err(Failure::validation("--m must be positive"));
    }
    let b: BundleJson = read_json(&inputs[0]).map_err(Failure::from)?;
    let data = b.to_core().map_err(Failure::from)?;
    let errs = validate_flat(&data);
    if !errs.is_empty() {
        return Err(report_errors(&inputs[0], &errs));
    }

    let mut divisors = Vec::new();
    for (name, spectrum) in &data.divisor_spectra {
        let c = data
            .truncation
            .get(name)
            .copied()
            .unwrap_or_else(rat_zero);
        // no nilpotent data travels in the tables: trivial blocks
        let blocks: Vec<RatMat> = spectrum
            .iter()
            .map(|p| RatMat::zeros(p.r as usize, p.r as usize))
            .collect();
        let refined: RefinedSpectrum = refine(spectrum, &blocks, c)
            .map_err(|e| Failure::validation(format!("{name}: {e}")))?;
        let plan = match perturb_ii_strict(&refined, m) {
            Ok(p) => p,
            Err(e @ PerturbError::GapTooSmall { .. }) => {
                return Err(Failure::validation(format!("{name}: {e}")))
            }
            Err(e) => return Err(Failure::validation(format!("{name}: {e}"))),
        };
        let weights: Vec<Value> = plan
            .new_weights
            .iter()
            .map(|(e, w)| {
                json!({
                    "a": rat_to_string(&e.a),
                    "k": e.k,
                    "r": e.r,
                    "alpha": CRatJson::from_crat(&e.alpha),
                    "weight": rat_to_string(w),
                })
            })
            .collect();
        divisors.push(json!({
            "divisor": name,
            "m": plan.m.to_string(),
            "gamma": rat_to_string(&plan.gamma),
            "l": rat_to_string(&plan.l),
            "gap": rat_to_string(&plan.gap),
            "gap_ok": plan.gap_ok,
            "monotone": plan.monotone,
            "new_weights": weights,
        }));
    }
    Ok(json!({ "command": "perturb", "m": m.to_string(), "divisors": divisors }))
}

pub fn corr(inputs: &[PathBuf], tol: f64) -> Result<Value, Failure> {
    if inputs.is_empty() || inputs.len() > 2 {
        return Err(Failure::validation(
            "corr: one --input (localsys.json), optionally a second (bundle.json template for lambda/truncation)",
        ));
    }
    let file: LocalSystemFile = read_json(&inputs[0]).map_err(Failure::from)?;
    // optional template fixing lambda and the truncation levels
    let (lambda, truncation) = if inputs.len() == 2 {
        let t: BundleJson = read_json(&inputs[1]).map_err(Failure::from)?;
        let data = t.to_core().map_err(Failure::from)?;
        (data.lambda, data.truncation)
    } else {
        (crat_one(), BTreeMap::new())
    };

    match file {
        LocalSystemFile::Tables(l) => {
            let ls = l.to_core().map_err(Failure::from)?;
            // record the effective truncation level of every divisor
            let mut truncation = truncation;
            for comp in &ls.geometry.components {
                truncation.entry(comp.clone()).or_insert_with(rat_zero);
            }
            let flat = kms_table_transport(&ls, lambda, &truncation)
                .map_err(|errs| report_errors(&inputs[0], &errs))?;
            let ls_char = charnum::char_report_ls(&ls);
            let flat_char = charnum::char_report_flat(&flat);
            if ls_char.c1_coeffs != flat_char.c1_coeffs
                || ls_char.par_deg != flat_char.par_deg
                || ls_char.par_ch2 != flat_char.par_ch2
            {
                return Err(Failure::identity(
                    "characteristic numbers changed under the table transport",
                ));
            }
            Ok(json!({
                "command": "corr",
                "kind": "tables",
                "bundle": serde_json::to_value(BundleJson::from_core(&flat)).unwrap(),
                "ls_char": char_report_json(&ls_char),
                "flat_char": char_report_json(&flat_char),
                "char_match": true,
            }))
        }
        LocalSystemFile::Monodromy(list) => {
            let mut reports = Vec::new();
            for (idx, mj) in list.iter().enumerate() {
                let datum = mj
                    .to_core()
                    .map_err(|e| Failure::validation(format!("[{idx}].{e:#}")))?;
                let errs = validate_monodromy(&datum);
                if !errs.is_empty() {
                    return Err(Failure::validation(format!(
                        "[{idx}]: {}",
                        errs.join("; ")
                    )));
                }
                let ul = unipotent_log(&datum.m)
                    .map_err(|e| Failure::validation(format!("[{idx}]: {e}")))?;
                // truncation level for the flat-side weights
                let c = 1.0;
                let local = phi_local(&datum, c)
                    .map_err(|errs| Failure::validation(format!("[{idx}]: {}", errs.join("; "))))?;
                let eigen: Vec<Value> = ul
                    .eigen
                    .iter()
                    .map(|(omega, basis)| {
                        let alpha = alpha_of(*omega).unwrap_or(C64::new(f64::NAN, f64::NAN));
                        json!({
                            "omega": { "re": omega.re, "im": omega.im },
                            "alpha": { "re": alpha.re, "im": alpha.im },
                            "multiplicity": basis.len(),
                        })
                    })
                    .collect();
                let pieces: Vec<Value> = local
                    .pieces
                    .iter()
                    .map(|p| {
                        json!({
                            "residue_eigenvalue": {
                                "re": p.residue_eigenvalue.re,
                                "im": p.residue_eigenvalue.im,
                            },
                            "indices": p.indices,
                            "weights": p.weights,
                            "nilpotent_rank": nilrank(&p.nilpotent, tol),
                        })
                    })
                    .collect();
                reports.push(json!({
                    "index": idx,
                    "c": local.c,
                    "weights": local.weights,
                    "eigen": eigen,
                    "pieces": pieces,
                }));
            }
            Ok(json!({
                "command": "corr",
                "kind": "monodromy",
                "reports": reports,
            }))
        }
    }
}

fn nilrank(n: &CMat, tol: f64) -> usize {
    // number of nonzero powers before the nilpotent dies
    let mut p = *n;
    let mut k = 0;
    while p.max_abs() > tol.max(1e-12) && k < n.n {
        p = p.mul(n);
        k += 1;
    }
    k
}

pub struct FlowOutput {
    pub report: Value,
    pub trace_csv: String,
}

pub fn flow(
    inputs: &[PathBuf],
    dt_override: Option<f64>,
    steps_override: Option<usize>,
) -> Result<FlowOutput, Failure> {
    if inputs.len() != 1 {
        return Err(Failure::validation("flow: exactly one --input required"));
    }
    let mut cfg: FlowConfigJson = read_json(&inputs[0]).map_err(Failure::from)?;
    if let Some(dt) = dt_override {
        cfg.dt = dt;
    }
    if let Some(steps) = steps_override {
        cfg.steps = steps;
    }
    cfg.validate().map_err(Failure::from)?;
    let grid = cfg.grid.to_core().map_err(Failure::from)?;
    let lambda = cfg.lambda.value();
    let (conn, hf) = rank2_model(lambda, cfg.eps, grid).map_err(Failure::validation)?;
    let initial = if cfg.perturbation != 0.0 {
        trace_free_bump(&hf, cfg.perturbation, 1.0)
    } else {
        hf
    };
    let eps = cfg.eps;
    let w = move |z: C64| kms_hodge_core::modelflow::model_weight(z, eps);
    let state: FlowState = heat_flow(&conn, w, cfg.dt, cfg.steps, &initial).map_err(|e| match e {
        FlowError::GuardViolated => Failure::validation(format!("flow: {e}")),
        FlowError::BadInitial => Failure::validation(format!("flow: {e}")),
    })?;

    let mut csv = String::from("t,det_residual,donaldson,lambda_g_perp_l2\n");
    for s in &state.trace {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            s.t, s.det_residual, s.donaldson, s.lambda_g_perp_l2
        ));
    }
    let first = state.trace.first();
    let last = state.trace.last();
    let report = json!({
        "command": "flow",
        "steps_run": state.trace.len(),
        "t_final": state.t,
        "aborted": state.aborted,
        "initial_lambda_g_perp_l2": first.map(|s| s.lambda_g_perp_l2),
        "final_lambda_g_perp_l2": last.map(|s| s.lambda_g_perp_l2),
        "max_det_residual": state
            .trace
            .iter()
            .map(|s| s.det_residual)
            .fold(0.0f64, f64::max),
        "final_donaldson": last.map(|s| s.donaldson),
    });
    if state.aborted {
        return Err(Failure::numerical(
            "flow: metric lost positivity; partial trace discarded",
        ));
    }
    Ok(FlowOutput {
        report,
        trace_csv: csv,
    })
}

pub fn scan(
    samples: usize,
    seed: u64,
    eps_list: &[f64],
    grid_dims: (usize, usize),
) -> Result<Value, Failure> {
    if samples == 0 {
        return Err(Failure::validation("scan: --samples must be positive"));
    }
    let ineq = inequality_scan(samples, seed);
    let violations: Vec<Value> = ineq
        .violations
        .iter()
        .map(|v| {
            json!({
                "log_abs_z": v.log_abs_z,
                "eps": v.eps,
                "which": v.which,
            })
        })
        .collect();

    let bounds: Vec<Value> = if eps_list.is_empty() {
        Vec::new()
    } else {
        let grid = crate::formats::GridJson {
            r_min: 0.05,
            r_max: 0.95,
            n_rad: grid_dims.0,
            n_ang: grid_dims.1,
        }
        .to_core()
        .map_err(Failure::from)?;
        let table = uniform_bound_scan(eps_list, C64::new(1.0, 0.0), grid)
            .map_err(Failure::validation)?;
        table
            .iter()
            .map(|(eps, sup)| json!({ "eps": eps, "sup": sup }))
            .collect()
    };

    let report = json!({
        "command": "scan",
        "samples": samples,
        "seed": seed,
        "violations": violations,
        "uniform_bounds": bounds,
    });
    if !ineq.violations.is_empty() {
        return Err(Failure::identity(format!(
            "scan: {} scalar inequality violations",
            ineq.violations.len()
        )));
    }
    Ok(report)
}

/// Randomized property suites. Every failure is an identity failure
/// (exit 2); the suites have no tunable tolerance beyond --tol for the
/// floating-point comparisons.
pub fn verify(seed: u64, tol: f64) -> Result<Value, Failure> {
    let tol = if tol > 0.0 { tol } else { 1e-10 };
    let mut suites = Vec::new();
    let mut failures: Vec<String> = Vec::new();

    // 1. table transport preserves characteristic numbers, exactly
    {
        let n = 200usize;
        let results: Vec<Option<String>> = rayon_map(0..n as u64, |k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0001 + k));
            let rank = 1 + (k % 3) as u32;
            let ls = random_ls(&mut rng, rank, 1 + (k % 2) as usize + 1);
            let lambda = CRat::new(
                Rat::new(1 + (k % 3) as i128, 1),
                Rat::new((k % 5) as i128 - 2, 3),
            );
            let lambda = if lambda == crat_zero() { crat_one() } else { lambda };
            let flat = match kms_table_transport(&ls, lambda, &BTreeMap::new()) {
                Ok(f) => f,
                Err(e) => return Some(format!("table {k}: transport rejected: {}", e.join("; "))),
            };
            let a = charnum::char_report_ls(&ls);
            let b = charnum::char_report_flat(&flat);
            if a.c1_coeffs != b.c1_coeffs || a.par_deg != b.par_deg || a.par_ch2 != b.par_ch2 {
                return Some(format!("table {k}: characteristic numbers changed"));
            }
            None
        });
        let bad: Vec<String> = results.into_iter().flatten().collect();
        suites.push(json!({
            "suite": "transport-charnum",
            "cases": n,
            "failures": bad.len(),
        }));
        failures.extend(bad);
    }

    // 2. phi_inverse_kms shift invariance and phi_local round-trip
    {
        let n = 500usize;
        let results: Vec<Option<String>> = rayon_map(0..n as u64, |k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0002 + k));
            use rand::Rng;
            let b_num: i64 = rng.gen_range(-24..24);
            let b_den: i64 = rng.gen_range(1..12);
            let b = b_num as f64 / b_den as f64;
            let re: f64 = rng.gen_range(0.0..1.0);
            let im: f64 = rng.gen_range(-0.5..0.5);
            // omega = exp(-2 pi i (re + i im)): modulus e^{2 pi im}, phase -2 pi re
            let rho = (2.0 * std::f64::consts::PI * im).exp();
            let phi = -2.0 * std::f64::consts::PI * re;
            let omega = C64::new(rho * phi.cos(), rho * phi.sin());
            let alpha = match alpha_of(omega) {
                Ok(a) => a,
                Err(e) => return Some(format!("case {k}: alpha_of failed: {e}")),
            };
            // shift invariance: (a, alpha) -> (a + n, alpha - n) fixes b and omega
            let shift: i64 = rng.gen_range(-5..6);
            let (b1, w1) = phi_inverse_kms(b - alpha.re, alpha);
            let (b2, w2) = phi_inverse_kms(
                b - alpha.re + shift as f64,
                alpha - C64::new(shift as f64, 0.0),
            );
            if (b1 - b2).abs() > tol || (w1 - w2).norm() > tol {
                return Some(format!("case {k}: shift invariance broken"));
            }
            if (w1 - omega).norm() > 1e-9 {
                return Some(format!("case {k}: omega round-trip error {}", (w1 - omega).norm()));
            }
            None
        });
        let bad: Vec<String> = results.into_iter().flatten().collect();
        suites.push(json!({
            "suite": "kms-roundtrip",
            "cases": n,
            "failures": bad.len(),
        }));
        failures.extend(bad);
    }

    // 3. multiplicative Jordan pieces: M = M^s·M^u, N nilpotent,
    //    exp(−2πiN) = M^u
    {
        let n = 200usize;
        let results: Vec<Option<String>> = rayon_map(0..n as u64, |k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0003 + k));
            use rand::Rng;
            let dim = rng.gen_range(1..5usize);
            // upper triangular with unit-modulus diagonal; conjugated by
            // a random integer shear so the structure is not visible
            let mut m = CMat::zeros(dim);
            for i in 0..dim {
                let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                m[(i, i)] = C64::new(phi.cos(), phi.sin());
                for j in (i + 1)..dim {
                    if rng.gen_bool(0.6) {
                        m[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    }
                }
            }
            let mut s = CMat::identity(dim);
            if dim > 1 {
                s[(dim - 1, 0)] = C64::new(rng.gen_range(-2..3) as f64, 0.0);
            }
            let sinv = s.inverse().unwrap();
            let m = s.mul(&m).mul(&sinv);
            let ul = match unipotent_log(&m) {
                Ok(u) => u,
                Err(e) => return Some(format!("case {k}: unipotent_log failed: {e}")),
            };
            let recomposed = ul.semisimple.mul(&ul.unipotent);
            if recomposed.sub(&m).max_abs() > 1e-7 * (1.0 + m.max_abs()) {
                return Some(format!("case {k}: M^s·M^u does not recompose M"));
            }
            let mut npow = ul.n;
            for _ in 1..dim {
                npow = npow.mul(&ul.n);
            }
            if npow.max_abs() > 1e-9 {
                return Some(format!("case {k}: N is not nilpotent"));
            }
            // exp(−2πi·N) via the finite series
            let a = ul.n.scale(C64::new(0.0, -std::f64::consts::TAU));
            let mut acc = CMat::identity(dim);
            let mut term = CMat::identity(dim);
            for p in 1..dim {
                term = term.mul(&a).scale(C64::new(1.0 / p as f64, 0.0));
                acc = acc.add(&term);
            }
            if acc.sub(&ul.unipotent).max_abs() > 1e-8 {
                return Some(format!("case {k}: exp(-2 pi i N) does not match M^u"));
            }
            None
        });
        let bad: Vec<String> = results.into_iter().flatten().collect();
        suites.push(json!({
            "suite": "unipotent-log",
            "cases": n,
            "failures": bad.len(),
        }));
        failures.extend(bad);
    }

    // 4. perturbation scheme (II): weights in the lattice, par-c1 sums
    //    preserved exactly
    {
        let n = 100usize;
        let results: Vec<Option<String>> = rayon_map(0..n as u64, |k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0004 + k));
            use rand::Rng;
            let parts = rng.gen_range(1..4usize);
            let mut entries = Vec::new();
            let mut used = std::collections::BTreeSet::new();
            for _ in 0..parts {
                let num: i128 = rng.gen_range(1..12);
                let den: i128 = rng.gen_range(num + 1..16);
                let a = Rat::new(num, den);
                if !used.insert(a) {
                    continue;
                }
                entries.push(kms_hodge_core::pardata::KmsPoint {
                    a,
                    alpha: crat_zero(),
                    r: rng.gen_range(1..3),
                });
            }
            entries.sort_by_key(|e| e.a);
            let blocks: Vec<RatMat> = entries
                .iter()
                .map(|p| RatMat::zeros(p.r as usize, p.r as usize))
                .collect();
            let refined = match refine(&entries, &blocks, Rat::new(1, 1)) {
                Ok(r) => r,
                Err(e) => return Some(format!("case {k}: refine failed: {e}")),
            };
            let plan = match kms_hodge_core::perturb::perturb_ii(&refined, 1000) {
                Ok(p) => p,
                Err(e) => return Some(format!("case {k}: perturb failed: {e}")),
            };
            let before: Rat = refined
                .entries
                .iter()
                .map(|e| e.a * Rat::new(e.r as i128, 1))
                .sum();
            let after: Rat = plan
                .new_weights
                .iter()
                .map(|(e, w)| *w * Rat::new(e.r as i128, 1))
                .sum();
            if before != after {
                return Some(format!("case {k}: weighted sum changed"));
            }
            for (_, w) in &plan.new_weights {
                let lattice = (*w - refined.c - plan.gamma) * Rat::new(plan.m, 1);
                if !lattice.is_integer() {
                    return Some(format!("case {k}: weight off the lattice"));
                }
            }
            None
        });
        let bad: Vec<String> = results.into_iter().flatten().collect();
        suites.push(json!({
            "suite": "perturb-lattice",
            "cases": n,
            "failures": bad.len(),
        }));
        failures.extend(bad);
    }

    let report = json!({
        "command": "verify",
        "seed": seed,
        "suites": suites,
        "failures": failures,
    });
    if !failures.is_empty() {
        return Err(Failure::identity(format!(
            "verify: {} property failures; first: {}",
            failures.len(),
            failures[0]
        )));
    }
    Ok(report)
}

/// Map over a seed range on the global rayon pool (sized from
/// KMS_HODGE_THREADS at startup), preserving order.
fn rayon_map<T: Send>(
    range: std::ops::Range<u64>,
    f: impl Fn(u64) -> T + Sync + Send,
) -> Vec<T> {
    use rayon::prelude::*;
    range.into_par_iter().map(f).collect()
}
