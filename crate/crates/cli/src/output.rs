//! Files written by the verbs. Floats use the shortest round-trip form, and
//! nothing depends on the clock or the environment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mildhjb::gaussian::GammaSeries;
use mildhjb::hjb::SolveReport;

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::pipeline::{DiagnoseOutcome, OuRow, RunOutcome};

pub const SOLUTION_CSV: &str = "solution.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const OU_CSV: &str = "ou_diagnostics.csv";
pub const GAMMA_CSV: &str = "gamma_series.csv";
pub const SUMMARY_TXT: &str = "diagnose_summary.txt";

fn create_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::output(format!("cannot create {}: {e}", out.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes)
        .map_err(|e| CliError::output(format!("cannot write {}: {e}", path.display())))
}

pub fn write_run(outcome: &RunOutcome, out: &Path) -> Result<(), CliError> {
    create_dir(out)?;
    if let Some(v) = &outcome.iterate {
        let mut buf = Vec::new();
        v.write_csv(&mut buf).map_err(CliError::output)?;
        write_file(&out.join(SOLUTION_CSV), &buf)?;
    }
    write_file(&out.join(OU_CSV), &ou_csv(&outcome.ou_rows)?)?;
    write_file(&out.join(REPORT_TXT), run_report(outcome).as_bytes())
}

pub fn write_failed_report(
    cfg: &ScenarioConfig,
    report: &SolveReport,
    err: &CliError,
    out: &Path,
) -> Result<(), CliError> {
    create_dir(out)?;
    let mut s = String::new();
    kv(&mut s, "status", err.tag.as_str());
    solve_section(&mut s, report);
    config_section(&mut s, cfg);
    write_file(&out.join(REPORT_TXT), s.as_bytes())
}

pub fn write_diagnose(outcome: &DiagnoseOutcome, out: &Path) -> Result<(), CliError> {
    create_dir(out)?;
    write_file(&out.join(OU_CSV), &ou_csv(&outcome.ou_rows)?)?;
    write_file(&out.join(GAMMA_CSV), &gamma_csv(&outcome.gamma)?)?;
    write_file(&out.join(SUMMARY_TXT), diagnose_summary(outcome).as_bytes())
}

fn kv(s: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(s, "{key}={value}");
}

fn solve_section(s: &mut String, r: &SolveReport) {
    kv(s, "converged", r.converged);
    kv(s, "iterations", r.iterations);
    kv(s, "alpha", r.alpha);
    kv(s, "beta", r.beta);
    if let Some(sch) = &r.schedule {
        kv(s, "schedule_constant", sch.constant);
        kv(s, "epsilon1", sch.epsilon1);
        kv(s, "epsilon2", sch.epsilon2);
        kv(s, "epsilon", sch.epsilon);
        kv(s, "beta1", sch.beta1);
        kv(s, "beta2", sch.beta2);
    }
    kv(s, "tol", r.tol);
    kv(s, "lipschitz_declared", r.lipschitz_declared);
    kv(s, "lipschitz_observed", r.lipschitz_observed);
    kv(s, "clamped_queries", r.clamped_queries);
    let max_ratio = r.contraction_ratios.iter().copied().fold(0.0, f64::max);
    kv(s, "max_contraction_ratio", max_ratio);
    s.push_str("\n[iterations]\niteration,weighted_residual,log_weighted_residual,unweighted_residual,contraction_ratio\n");
    for k in 0..r.iterations.min(r.residuals.len()) {
        let ratio = if k == 0 {
            String::new()
        } else {
            format!("{}", r.contraction_ratios[k - 1])
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            k + 1,
            r.residuals[k],
            r.log_residuals[k],
            r.unweighted_residuals[k],
            ratio
        );
    }
}

fn config_section(s: &mut String, cfg: &ScenarioConfig) {
    s.push_str("\n[resolved_config]\n");
    s.push_str(&cfg.to_toml());
}

pub fn run_report(o: &RunOutcome) -> String {
    let mut s = String::new();
    kv(
        &mut s,
        "status",
        if o.report.converged {
            "converged"
        } else {
            "not_converged"
        },
    );
    match &o.alpha_fit {
        Some(fit) => {
            kv(&mut s, "alpha_hat", fit.alpha_hat);
            kv(&mut s, "alpha_fit_residual", fit.fit.residual);
            kv(&mut s, "alpha_fit_decades", fit.fit.decades);
        }
        None => kv(&mut s, "alpha_hat", "skipped"),
    }
    kv(&mut s, "sigma_constant", o.sigma_constant);
    kv(&mut s, "contraction_constant", o.contraction_constant);
    kv(&mut s, "x_max", o.x_max);
    let emb = o
        .ou_rows
        .iter()
        .map(|r| r.embedding_norm)
        .fold(0.0, f64::max);
    kv(&mut s, "embedding_norm_max", emb);
    solve_section(&mut s, &o.report);
    config_section(&mut s, &o.config);
    s
}

pub fn diagnose_summary(o: &DiagnoseOutcome) -> String {
    let mut s = String::new();
    kv(&mut s, "status", if o.all_pass() { "pass" } else { "fail" });
    kv(&mut s, "alpha_hat", o.alpha_fit.alpha_hat);
    kv(&mut s, "alpha_fit_residual", o.alpha_fit.fit.residual);
    s.push_str("\n[probes]\nprobe,value,bound,status\n");
    for p in &o.probes {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            p.name,
            p.value,
            p.bound,
            p.status.as_str()
        );
    }
    s.push_str("\n[alpha_fit]\nwindow,sigma_norm\n");
    for (w, n) in o.alpha_fit.windows.iter().zip(&o.alpha_fit.norms) {
        let _ = writeln!(s, "{w},{n}");
    }
    config_section(&mut s, &o.config);
    s
}

pub fn ou_csv(rows: &[OuRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "s",
        "t",
        "r",
        "embedding_norm",
        "sigma_norm",
        "gramian_rank",
    ])
    .map_err(CliError::output)?;
    for r in rows {
        w.write_record([
            r.s.to_string(),
            r.t.to_string(),
            r.r.to_string(),
            r.embedding_norm.to_string(),
            r.sigma_norm.to_string(),
            r.gramian_rank.to_string(),
        ])
        .map_err(CliError::output)?;
    }
    w.into_inner().map_err(CliError::output)
}

pub fn gamma_csv(series: &[GammaSeries]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "sigma",
        "n_max",
        "k",
        "partial_sum",
        "doubling_tail",
        "converged",
    ])
    .map_err(CliError::output)?;
    for g in series {
        for &(k, sum) in &g.partial_sums {
            w.write_record([
                g.sigma.to_string(),
                g.n_max.to_string(),
                k.to_string(),
                sum.to_string(),
                g.doubling_tail.to_string(),
                g.converged.to_string(),
            ])
            .map_err(CliError::output)?;
        }
    }
    w.into_inner().map_err(CliError::output)
}

/// Parses an `ou_diagnostics.csv` back into rows.
pub fn read_ou_csv(path: &Path) -> Result<Vec<OuRow>, CliError> {
    #[derive(serde::Deserialize)]
    struct Row {
        s: f64,
        t: f64,
        r: f64,
        embedding_norm: f64,
        sigma_norm: f64,
        gramian_rank: usize,
    }
    let mut rd = csv::Reader::from_path(path).map_err(CliError::output)?;
    rd.deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(CliError::output)?;
            Ok(OuRow {
                s: row.s,
                t: row.t,
                r: row.r,
                embedding_norm: row.embedding_norm,
                sigma_norm: row.sigma_norm,
                gramian_rank: row.gramian_rank,
            })
        })
        .collect()
}

/// Parses a `gamma_series.csv` back into one table per `sigma`.
pub fn read_gamma_csv(path: &Path) -> Result<Vec<GammaSeries>, CliError> {
    #[derive(serde::Deserialize)]
    struct Row {
        sigma: f64,
        n_max: usize,
        k: usize,
        partial_sum: f64,
        doubling_tail: f64,
        converged: bool,
    }
    let mut rd = csv::Reader::from_path(path).map_err(CliError::output)?;
    let mut out: Vec<GammaSeries> = Vec::new();
    for row in rd.deserialize::<Row>() {
        let row = row.map_err(CliError::output)?;
        match out.last_mut() {
            Some(g) if g.sigma == row.sigma => g.partial_sums.push((row.k, row.partial_sum)),
            _ => out.push(GammaSeries {
                sigma: row.sigma,
                n_max: row.n_max,
                partial_sums: vec![(row.k, row.partial_sum)],
                doubling_tail: row.doubling_tail,
                converged: row.converged,
            }),
        }
    }
    Ok(out)
}
