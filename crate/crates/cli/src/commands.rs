//! The four experiment drivers. Each writes its tables and `summary.json`
//! and returns whether every hard check passed.

use anyhow::{bail, Context, Result};
use cauchylab::czd::{self, CZ_TOL};
use cauchylab::ensemble::norm_for_index;
use cauchylab::scattering::{
    boundary_ladder, build_example_e1, det_probe, hypothesis_check, wave_probe, HYPOTHESIS_TOL, SINGULAR_TOL,
};
use cauchylab::schatten::{schatten_norm, DET_ZERO_TOL};
use cauchylab::transforms::{sweep as run_sweep, MaximalOperator};
use cauchylab::{Complex64, ComplexMatrix, Error, Interval, SchattenIndex, ScatteringModel, SimpleOpMeasure, Which};
use serde_json::{json, Value};

use crate::config::{ExampleConfig, ExperimentConfig};
use crate::output::{num, Out};

fn total_variation(mu: &SimpleOpMeasure, p: SchattenIndex) -> Result<f64> {
    Ok(mu.total_variation(&Interval::real_line(), p)?)
}

pub fn cz(cfg: &ExperimentConfig, out: &Out) -> Result<bool> {
    let c = &cfg.cz;
    if c.levels.is_empty() && c.relative_levels.is_empty() {
        bail!("cz: no levels configured");
    }
    let measures = cfg.measures()?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut all = true;
    for (i, mu) in measures.iter().enumerate() {
        let tv = total_variation(mu, cfg.p)?;
        let levels: Vec<f64> = c.levels.iter().copied().chain(c.relative_levels.iter().map(|r| r * tv)).collect();
        for (k, &s) in levels.iter().enumerate() {
            let (_, report) = czd::audit(mu, s, cfg.p, c.off_support_samples)?;
            let pass = report.all_pass();
            all &= pass;
            out.json(&format!("cz_{i}_{k}.json"), &report)?;
            rows.push(vec![
                i.to_string(),
                num(s),
                report.intervals.len().to_string(),
                num(report.checks.total_length_value),
                num(report.off_support.worst_ratio),
                num(report.integral.integral),
                num(report.integral.bound),
                pass.to_string(),
            ]);
            results.push(json!({
                "measure": i,
                "s": s,
                "file": format!("cz_{i}_{k}.json"),
                "intervals": report.intervals.len(),
                "pass": pass,
            }));
        }
    }
    out.csv(
        "cz.csv",
        &["measure", "s", "intervals", "total_length", "off_support_worst_ratio", "bad_part_integral", "integral_bound", "pass"],
        rows,
    )?;
    out.summary(
        "cz",
        cfg,
        json!({ "cz_tol": CZ_TOL, "off_support_samples": c.off_support_samples }),
        Value::Array(results),
        all,
    )?;
    Ok(all)
}

struct Audit {
    quasinorm: f64,
    total_variation: f64,
    bound: f64,
    minimal_cx: Option<f64>,
    atoms: usize,
}

impl Audit {
    fn pass(&self) -> bool {
        self.quasinorm <= self.bound * self.total_variation
    }

    fn json(&self, measure: usize, op: MaximalOperator, p: SchattenIndex, cx: f64) -> Value {
        json!({
            "measure": measure,
            "operator": op.name(),
            "p": p,
            "quasinorm": self.quasinorm,
            "total_variation": self.total_variation,
            "ratio": self.quasinorm / self.total_variation,
            "bound": self.bound * self.total_variation,
            "C_X": cx,
            "minimal_feasible_C_X": self.minimal_cx,
            "atoms_on_grid": self.atoms,
            "pass": self.pass(),
        })
    }
}

fn audit_one(
    op: MaximalOperator,
    mu: &SimpleOpMeasure,
    p: SchattenIndex,
    grid: &cauchylab::transforms::SweepGrid,
    cone: &cauchylab::transforms::ConeSampling,
    cx: f64,
) -> Result<(Audit, cauchylab::transforms::Sweep)> {
    let s = run_sweep(op, mu, p, grid, cone)?;
    let quasinorm = s.quasinorm()?;
    let tv = total_variation(mu, p)?;
    let ratio = if tv > 0.0 { quasinorm / tv } else { 0.0 };
    let audit = Audit {
        quasinorm,
        total_variation: tv,
        bound: op.bound(cx),
        minimal_cx: op.minimal_feasible_cx(ratio),
        atoms: s.atoms,
    };
    Ok((audit, s))
}

pub fn weaknorm(cfg: &ExperimentConfig, out: &Out) -> Result<bool> {
    let w = &cfg.weaknorm;
    let ops = w.operators()?;
    let grid = w.grid.grid()?;
    let measures = cfg.measures()?;
    let mut results = Vec::new();
    let mut all = true;
    for (i, mu) in measures.iter().enumerate() {
        for &op in &ops {
            let (audit, s) = audit_one(op, mu, cfg.p, &grid, &w.cone, w.cx)?;
            all &= audit.pass();
            let name = if measures.len() == 1 {
                format!("weaknorm_{}.csv", op.name())
            } else {
                format!("weaknorm_{i}_{}.csv", op.name())
            };
            out.csv(
                &name,
                &["lambda", "value"],
                s.points.iter().zip(&s.samples).map(|(x, v)| vec![num(*x), num(*v)]),
            )?;
            let mut entry = audit.json(i, op, cfg.p, w.cx);
            entry["file"] = json!(name);
            if s.atoms > 0 {
                entry["note"] = json!("atoms inside the grid were added as breakpoints with value inf; each cell takes the smaller endpoint value");
            }
            results.push(entry);
        }
    }
    out.summary("weaknorm", cfg, json!({ "cone": w.cone }), Value::Array(results), all)?;
    Ok(all)
}

pub fn sweep(cfg: &ExperimentConfig, out: &Out) -> Result<bool> {
    let w = &cfg.sweep;
    let grid = w.grid.grid()?;
    let measures = cfg.measures()?;
    let mut rows = Vec::new();
    let mut worst = [0.0f64; 4];
    let mut min_cx = [0.0f64; 4];
    let mut failures = [0usize; 4];
    for (i, mu) in measures.iter().enumerate() {
        let p = if w.mixed_norms { norm_for_index(i) } else { cfg.p };
        for (k, &op) in MaximalOperator::ALL.iter().enumerate() {
            let (audit, _) = audit_one(op, mu, p, &grid, &w.cone, w.cx)?;
            let ratio = audit.quasinorm / audit.total_variation;
            worst[k] = worst[k].max(ratio);
            min_cx[k] = min_cx[k].max(audit.minimal_cx.unwrap_or(0.0));
            failures[k] += usize::from(!audit.pass());
            let (r, c) = mu.shape();
            rows.push(vec![
                i.to_string(),
                mu.len().to_string(),
                r.to_string(),
                c.to_string(),
                p.to_string(),
                op.name().to_string(),
                num(audit.total_variation),
                num(audit.quasinorm),
                num(ratio),
                num(audit.bound),
                audit.pass().to_string(),
            ]);
        }
    }
    out.csv(
        "sweep.csv",
        &["measure", "atoms", "rows", "cols", "p", "operator", "total_variation", "quasinorm", "ratio", "bound", "pass"],
        rows,
    )?;
    let results: Vec<Value> = MaximalOperator::ALL
        .iter()
        .enumerate()
        .map(|(k, op)| {
            json!({
                "operator": op.name(),
                "max_ratio": worst[k],
                "bound": op.bound(w.cx),
                "C_X": w.cx,
                "minimal_feasible_C_X": op.minimal_feasible_cx(worst[k]).map(|_| min_cx[k]),
                "failures": failures[k],
            })
        })
        .collect();
    let pass = failures.iter().all(|&f| f == 0);
    out.summary(
        "sweep",
        cfg,
        json!({ "cone": w.cone, "measures": measures.len() }),
        Value::Array(results),
        pass,
    )?;
    Ok(pass)
}

fn example_model(e: &ExampleConfig) -> Result<ScatteringModel> {
    let k = e.j.len();
    let h = 1.0 / e.grid as f64;
    let samples: Vec<ComplexMatrix> = (0..e.grid)
        .map(|m| {
            let x = (m as f64 + 0.5) * h;
            ComplexMatrix::from_fn(k, e.channels, |i, c| {
                let w = 0.5f64.powi((i as i32 - c as i32).abs());
                Complex64::new(w * (1.0 + 0.5 * (std::f64::consts::PI * (i + 1) as f64 * x).sin()), 0.0)
            })
        })
        .collect();
    Ok(build_example_e1(e.grid, e.channels, &samples, &ComplexMatrix::from_real_diagonal(&e.j))?)
}

fn default_state(model: &ScatteringModel, example: Option<&ExampleConfig>) -> Vec<f64> {
    let n = model.dim();
    match example {
        Some(e) => (0..n)
            .map(|i| {
                if i % e.channels != 0 {
                    return 0.0;
                }
                let t = (((i / e.channels) as f64 + 0.5) / e.grid as f64 - 0.5) / 0.25;
                if t.abs() < 1.0 {
                    (-1.0 / (1.0 - t * t)).exp()
                } else {
                    0.0
                }
            })
            .collect(),
        None => vec![1.0; n],
    }
}

pub fn scatter(cfg: &ExperimentConfig, out: &Out) -> Result<bool> {
    let sc = &cfg.scatter;
    let model = match (&sc.model, &sc.example) {
        (Some(path), None) => {
            ScatteringModel::load_json(path).with_context(|| format!("loading model {}", path.display()))?
        }
        (None, Some(e)) => example_model(e)?,
        _ => bail!("scatter: exactly one of `model` and `example` must be given"),
    };
    let p = cfg.p;
    let q = cfg.q();
    let mut results = serde_json::Map::new();
    results.insert("dim".into(), json!(model.dim()));
    results.insert("channels".into(), json!(model.channels()));
    let mut pass = true;

    // Resolvent identities: the hard invariant.
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for &[re, im] in &sc.points {
        let z = Complex64::new(re, im);
        match model.resolvent_identity_residuals(z) {
            Ok(r) => {
                let ok = r.within(sc.residual_tol);
                pass &= ok;
                rows.push(vec![num(re), num(im), "ok".into(), num(r.r1), num(r.r2), num(r.scale), num(r.sigma_min)]);
                entries.push(json!({ "z": [re, im], "status": "ok", "residuals": r, "within": ok }));
            }
            Err(Error::SingularPerturbation { sigma_min, .. }) => {
                rows.push(vec![num(re), num(im), "singular".into(), String::new(), String::new(), String::new(), num(sigma_min)]);
                entries.push(json!({ "z": [re, im], "status": "singular", "sigma_min": sigma_min }));
            }
            Err(e) => return Err(e).with_context(|| format!("resolvent identities at z = {z}")),
        }
    }
    out.csv("residuals.csv", &["re", "im", "status", "r1", "r2", "scale", "sigma_min"], rows)?;
    results.insert("identities".into(), Value::Array(entries));

    if let Some(l) = &sc.ladder {
        let mut rows = Vec::new();
        let mut entries = Vec::new();
        for which in [Which::H0, Which::H1] {
            for &lambda in &l.lambdas {
                match boundary_ladder(&model, which, lambda, &l.epsilons, p) {
                    Ok(ladder) => {
                        let ims = ladder.imaginary_parts();
                        for (k, eps) in ladder.epsilons.iter().enumerate() {
                            rows.push(vec![
                                format!("{which:?}"),
                                num(lambda),
                                num(*eps),
                                num(schatten_norm(&ladder.values[k], p)?),
                                num(schatten_norm(&ims[k], p)?),
                                k.checked_sub(1).map(|j| num(ladder.differences[j])).unwrap_or_default(),
                            ]);
                        }
                        entries.push(json!({
                            "which": which,
                            "lambda": lambda,
                            "status": "ok",
                            "floor": ladder.floor,
                            "max_difference": ladder.max_difference(),
                            "growth_exponent": ladder.growth_exponent,
                        }));
                    }
                    Err(Error::BelowFloor { eps, floor }) => {
                        entries.push(json!({ "which": which, "lambda": lambda, "status": "below-floor", "eps": eps, "floor": floor }));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        out.csv("ladders.csv", &["which", "lambda", "epsilon", "norm_B", "norm_im_B", "difference"], rows)?;
        results.insert("ladders".into(), Value::Array(entries));
    }

    if let Some(w) = &sc.wave {
        let raw = match &w.psi {
            Some(v) => v.clone(),
            None => default_state(&model, sc.example.as_ref()),
        };
        if raw.len() != model.dim() {
            bail!("wave: ψ has length {}, model dimension is {}", raw.len(), model.dim());
        }
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            bail!("wave: ψ must be nonzero");
        }
        let psi: Vec<Complex64> = raw.iter().map(|x| Complex64::new(x / norm, 0.0)).collect();
        let times: Vec<f64> = (0..=w.doublings).map(|m| w.t0 * 2f64.powi(m as i32)).collect();
        let delta = w.interval.map(|[a, b]| Interval::new(a, b)).transpose()?;
        let probe = wave_probe(&model, &psi, &times, delta.as_ref())?;
        out.csv(
            "wave.csv",
            &["t", "increment", "isometry_defect", "intertwining_residual"],
            probe.times.iter().enumerate().map(|(m, t)| {
                vec![
                    num(*t),
                    m.checked_sub(1).map(|j| num(probe.increments[j])).unwrap_or_default(),
                    num(probe.isometry_defects[m]),
                    num(probe.intertwining_residuals[m]),
                ]
            }),
        )?;
        results.insert(
            "wave".into(),
            json!({
                "window": probe.window(),
                "increments": probe.increments,
                "max_isometry_defect": probe.max_isometry_defect(),
                "reference_norm": probe.reference_norm,
            }),
        );
    }

    if let Some(d) = &sc.det {
        let mut rows = Vec::new();
        let mut min_rel = f64::INFINITY;
        let mut min_sigma = f64::INFINITY;
        let mut disagreements = 0;
        for &lambda in &d.lambdas {
            for &eps in &d.epsilons {
                let probe = det_probe(&model, lambda, eps, q)?;
                min_rel = min_rel.min(probe.det.relative_modulus());
                min_sigma = min_sigma.min(probe.sigma_min);
                disagreements += usize::from(probe.det_zero() != probe.sigma_zero());
                rows.push(vec![
                    num(lambda),
                    num(eps),
                    num(probe.det.value.re),
                    num(probe.det.value.im),
                    num(probe.det.relative_modulus()),
                    num(probe.sigma_min),
                    probe.det_zero().to_string(),
                    probe.sigma_zero().to_string(),
                ]);
            }
        }
        out.csv("det.csv", &["lambda", "epsilon", "det_re", "det_im", "relative_modulus", "sigma_min", "det_zero", "sigma_zero"], rows)?;
        results.insert(
            "det".into(),
            json!({ "q": q, "min_relative_modulus": min_rel, "min_sigma": min_sigma, "disagreements": disagreements }),
        );
    }

    if let Some(h) = &sc.hypothesis {
        let delta = Interval::new(h.interval[0], h.interval[1])?;
        let nu0 = model.spectral_measure(Which::H0)?.variation_measure(p)?;
        let report = hypothesis_check(&model, p, &delta, &nu0, h.depth)?;
        results.insert("hypothesis".into(), serde_json::to_value(&report)?);
    }

    out.summary(
        "scatter",
        cfg,
        json!({
            "residual_tol": sc.residual_tol,
            "singular_tol": SINGULAR_TOL,
            "det_zero_tol": DET_ZERO_TOL,
            "hypothesis_tol": HYPOTHESIS_TOL,
            "q": q,
        }),
        Value::Object(results),
        pass,
    )?;
    Ok(pass)
}
