//! Subcommand bodies. Each returns its output files in memory; the caller
//! writes them and the manifest.

use std::io::Write;

use anyhow::Result;
use fracup::embedding::{
    copt_kappa_ratio, hausdorff_young_check, hls_check, sobolev_ratio, write_corpus_csv,
};
use fracup::extremal::{minimize, write_history_csv, MinimizeConfig, MinimizeResult};
use fracup::norms::lp_norm;
use fracup::schrodinger::{
    decay_report, evolve_potential, flow_uncertainty_check, splitting_order, write_decay_csv,
    write_flow_csv,
};
use fracup::stability::{stability_sweep, write_stability_csv};
use fracup::grid::{dilate, sample, write_field_csv, DilationParams, Grid};
use fracup::uncertainty::{
    gaussian_constants, kappa_upper_bound_over, scaling_report, uncertainty_functional_with,
    write_sweep_csv, FunctionalOptions,
};
use serde_json::{json, Value};

use crate::config::{EmbedRun, EvolveRun, StabilityRun, SweepRun, UncertaintyRun};

pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
    pub grid: Grid,
    pub seeds: Vec<u64>,
}

fn csv<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

pub fn uncertainty(cfg: &UncertaintyRun) -> Result<Outputs> {
    let report = scaling_report(&cfg.spec, &cfg.params, &cfg.lambdas, &cfg.grid)?;
    let sweep = csv(|w| write_sweep_csv(&report, w))?;
    let mut files = vec![("sweep.csv".into(), sweep)];
    if cfg.center {
        let opts = FunctionalOptions { recenter: true, ..Default::default() };
        let mut out = b"lambda,J,J_centered\n".to_vec();
        for row in &report.rows {
            let lambda = row.lambda;
            let spec = dilate(&cfg.spec, DilationParams::new(lambda, cfg.params.p, cfg.params.n)?);
            let f = sample(&spec, &cfg.grid)?;
            let jc = uncertainty_functional_with(&f, &cfg.params, &opts)?.j;
            writeln!(out, "{lambda:.16e},{:.16e},{jc:.16e}", row.breakdown.j)?;
        }
        files.push(("centered.csv".into(), out));
    }
    let summary = json!({
        "E": report.e,
        "measured_E": report.measured_e,
        "theta": report.theta,
        "theta_alt": report.theta_alt,
        "measured_theta": report.measured_theta,
        "gaussian_constants": gaussian_constants(&cfg.params),
    });
    Ok(Outputs {
        files,
        summary,
        grid: cfg.grid,
        seeds: vec![],
    })
}

fn minimizer_files(r: &MinimizeResult) -> Result<Vec<(String, Vec<u8>)>> {
    Ok(vec![
        ("field.csv".into(), csv(|w| write_field_csv(&r.field, w))?),
        ("history.csv".into(), csv(|w| write_history_csv(&r.history, w))?),
    ])
}

pub fn minimize_run(cfg: &MinimizeConfig) -> Result<Outputs> {
    let r = minimize(cfg)?;
    Ok(Outputs {
        files: minimizer_files(&r)?,
        summary: serde_json::to_value(r.summary())?,
        grid: cfg.grid,
        seeds: vec![cfg.seed],
    })
}

pub fn stability(cfg: &StabilityRun) -> Result<Outputs> {
    let r = minimize(&cfg.minimize)?;
    let mut files = minimizer_files(&r)?;
    let mut sweeps = Vec::new();
    for (k, spec) in cfg.perturbations.iter().enumerate() {
        let rep = stability_sweep(&r, spec, &cfg.epsilon_list, &cfg.minimize.params)?;
        files.push((format!("stability_{k}.csv"), csv(|w| write_stability_csv(&rep, w))?));
        sweeps.push(rep.summary());
    }
    Ok(Outputs {
        files,
        summary: json!({ "minimize": r.summary(), "sweeps": sweeps }),
        grid: cfg.minimize.grid,
        seeds: vec![cfg.minimize.seed],
    })
}

pub fn evolve(cfg: &EvolveRun) -> Result<Outputs> {
    let ev = &cfg.evolution;
    let mut files = Vec::new();
    let mut summary = serde_json::Map::new();
    if ev.potential.is_none() {
        let r = decay_report(&cfg.initial, ev)?;
        files.push(("decay.csv".into(), csv(|w| write_decay_csv(&r, w))?));
        summary.insert(
            "decay".into(),
            json!({
                "fitted_slope": r.fitted_slope,
                "expected_slope": r.expected_slope,
                "plateau_spread": r.plateau_spread,
                "l1_initial": r.l1_initial,
                "retained": r.retained_count(),
                "times": r.times.len(),
            }),
        );
        if let Some(flow) = &cfg.flow {
            let pts = flow_uncertainty_check(&cfg.initial, ev, &flow.params, flow.floor)?;
            files.push(("flow.csv".into(), csv(|w| write_flow_csv(&pts, w))?));
            let min_j = pts.iter().map(|p| p.breakdown.j).fold(f64::INFINITY, f64::min);
            summary.insert("flow".into(), json!({ "points": pts.len(), "min_J": min_j }));
        }
    } else {
        let u0 = sample(&cfg.initial, &ev.grid)?;
        let states = evolve_potential(&u0, ev)?;
        let mut norms = b"t,l2_norm,sup_norm\n".to_vec();
        for (t, u) in ev.t_list.iter().zip(&states) {
            writeln!(norms, "{t:.16e},{:.16e},{:.16e}", lp_norm(u, 2.0)?, u.max_abs())?;
        }
        files.push(("norms.csv".into(), norms));
        let last = states.last().expect("t_list is nonempty");
        files.push(("field_final.csv".into(), csv(|w| write_field_csv(last, w))?));
        summary.insert("splitting".into(), serde_json::to_value(splitting_order(&u0, ev)?)?);
    }
    Ok(Outputs {
        files,
        summary: Value::Object(summary),
        grid: ev.grid,
        seeds: vec![],
    })
}

pub fn embed(cfg: &EmbedRun) -> Result<Outputs> {
    let corpus = cfg.corpus.as_deref().unwrap_or_default();
    let report = copt_kappa_ratio(&cfg.embedding, &cfg.uncertainty, corpus, &cfg.grid)?;
    let mut files = vec![("corpus.csv".into(), csv(|w| write_corpus_csv(&report, w))?)];

    let mut hy = b"spec_id,p,margin\n".to_vec();
    let mut min_margin = f64::INFINITY;
    let mut hls = b"spec_id,ratio\n".to_vec();
    let mut max_hls = 0.0f64;
    for (id, spec) in corpus.iter().enumerate() {
        let f = sample(spec, &cfg.grid)?;
        for &p in &cfg.hausdorff_young {
            let m = hausdorff_young_check(&f, p)?;
            min_margin = min_margin.min(m);
            writeln!(hy, "{id},{p:.16e},{m:.16e}")?;
        }
        if let Some(h) = &cfg.hls {
            let r = hls_check(&f, h)?;
            max_hls = max_hls.max(r);
            writeln!(hls, "{id},{r:.16e}")?;
        }
    }
    files.push(("hausdorff_young.csv".into(), hy));
    if cfg.hls.is_some() {
        files.push(("hls.csv".into(), hls));
    }
    // Check the ratio of the argmax field directly, so the summary is self-contained.
    let best = &corpus[report.argmax];
    let best_ratio = sobolev_ratio(&sample(best, &cfg.grid)?, &cfg.embedding)?;
    let summary = json!({
        "c_opt_proxy": report.c_opt_proxy,
        "argmax": report.argmax,
        "argmax_spec": best,
        "argmax_ratio": best_ratio,
        "kappa_proxy": report.kappa_proxy,
        "ratio": report.ratio,
        "q": cfg.embedding.q(),
        "min_hausdorff_young_margin": min_margin,
        "max_hls_ratio": cfg.hls.map(|_| max_hls),
    });
    Ok(Outputs {
        files,
        summary,
        grid: cfg.grid,
        seeds: vec![],
    })
}

pub fn sweep(cfg: &SweepRun) -> Result<Outputs> {
    let mut out = b"alpha,beta,p,n,scaling_admissible,kappa_upper,c2,c2_printed,theta_printed,theta_alt\n".to_vec();
    let mut best: Option<f64> = None;
    for params in &cfg.cases {
        let c = gaussian_constants(params);
        let kappa = if params.scaling_admissible() {
            let k = kappa_upper_bound_over(params, &cfg.grid, &cfg.lambdas)?;
            best = Some(best.map_or(k, |b: f64| b.min(k)));
            format!("{k:.16e}")
        } else {
            String::new()
        };
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{},{kappa},{:.16e},{:.16e},{:.16e},{:.16e}",
            params.alpha,
            params.beta,
            params.p,
            params.n,
            params.scaling_admissible(),
            c.c2,
            c.c2_printed,
            c.theta_printed,
            c.theta_alt
        )?;
    }
    Ok(Outputs {
        files: vec![("kappa.csv".into(), out)],
        summary: json!({ "cases": cfg.cases.len(), "smallest_kappa_upper": best }),
        grid: cfg.grid,
        seeds: vec![],
    })
}
