//! Batch commands behind the `hcp` binary. Each command renders its outputs
//! in memory so that reruns can be compared byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::{Manifest, RunConfig};
use crate::error::{HcpError, Result};
use crate::hcp::{replicate, resolve_window, EpochSchedule, Thresholds};
use crate::limits::{first_point_limit_transform, g_infinity, LimitLaw, LimitLawParams, Moment};
use crate::measure::{
    appendix_b_law, c0_estimate, exp_geometric_law, exp_geometric_on_grid, iterate_hcp_measures, law_to_measure,
    log_grid, required_j_max, survival_probability_exact, un_sequence, AtomicMeasure, C0Estimate, C0Options,
    IterateOptions, ParetoTransform,
};
use crate::ocp::RateProfile;
use crate::spp::{IntervalLaw, RenewalSpec};

/// Named file contents produced by a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct CommandResult {
    pub files: Vec<Output>,
    pub manifest: Manifest,
    pub warnings: Vec<String>,
}

fn header(command: &str, cfg: &RunConfig) -> String {
    format!(
        "# hcp {}\n# command: {command}\n# seed: {}\n# replicas: {} from {}\n# reproduce with: hcp {command} --config manifest.json\n",
        env!("CARGO_PKG_VERSION"),
        cfg.seed,
        cfg.replicas,
        cfg.first_replica
    )
}

fn csv_file(name: &str, command: &str, cfg: &RunConfig, body: Vec<u8>) -> Output {
    let mut bytes = header(command, cfg).into_bytes();
    bytes.extend(body);
    Output { name: name.into(), bytes }
}

fn finish(command: &str, cfg: RunConfig, files: Vec<Output>, warnings: Vec<String>) -> CommandResult {
    let names = files.iter().map(|f| f.name.clone()).collect();
    CommandResult { files, manifest: Manifest::new(command, cfg, names), warnings }
}

/// Monte Carlo run: per-epoch Z samples, per-replica rows and a summary.
pub fn simulate(cfg: &RunConfig) -> Result<CommandResult> {
    cfg.validate()?;
    let schedule = cfg.schedule.resolve()?;
    let mut resolved = cfg.clone();
    resolved.window.intervals =
        resolve_window(&cfg.initial, &schedule, cfg.epochs, &cfg.window, cfg.replicas, cfg.seed)?;
    resolved.window.target_survivors = None;
    let summaries = replicate(
        &cfg.initial,
        &schedule,
        cfg.epochs,
        &resolved.window,
        cfg.replicas,
        cfg.seed,
        cfg.first_replica,
    )?;
    let mut files = Vec::new();
    let mut summary = String::from(
        "epoch,threshold,samples,mean_z,first_point_survival,origin_survival\n",
    );
    for s in &summaries {
        let mean = if s.z.is_empty() { f64::NAN } else { s.z.iter().sum::<f64>() / s.z.len() as f64 };
        writeln!(
            summary,
            "{},{},{},{},{},{}",
            s.epoch,
            s.threshold,
            s.z.len(),
            mean,
            s.first_point_survival_frequency(),
            s.origin_survival_frequency()
        )
        .ok();
        if s.epoch >= cfg.window.record_from {
            let mut z = Vec::new();
            s.write_csv(&mut z)?;
            files.push(csv_file(&format!("epoch_{:02}_z.csv", s.epoch), "simulate", &resolved, z));
        }
        let mut r = Vec::new();
        s.write_replica_csv(&mut r)?;
        files.push(csv_file(&format!("epoch_{:02}_replicas.csv", s.epoch), "simulate", &resolved, r));
    }
    files.push(csv_file("summary.csv", "simulate", &resolved, summary.into_bytes()));
    Ok(finish("simulate", resolved, files, Vec::new()))
}

fn interval_law(spec: &RenewalSpec) -> Result<&IntervalLaw> {
    match spec {
        RenewalSpec::LeftBounded { law, .. }
        | RenewalSpec::ContainsOrigin { law }
        | RenewalSpec::Stationary { law }
        | RenewalSpec::LatticeStationary { law } => Ok(law),
        RenewalSpec::ExchangeableMixture { .. } => Err(HcpError::Config(
            "analytic: exchangeable mixtures have no single interval law".into(),
        )),
    }
}

/// `lambda_left / lambda_right` if the schedule fixes it.
pub fn schedule_gamma(schedule: &EpochSchedule) -> Option<f64> {
    schedule.gamma.or(match schedule.rates {
        RateProfile::Constant { left, right } | RateProfile::Linear { left, right } if right > 0.0 => {
            Some(left / right)
        }
        _ => None,
    })
}

/// c0 from the untruncated law when its transform is available.
pub fn c0_for_law(law: &IntervalLaw, mu1: &AtomicMeasure, s_min: f64, per_decade: usize) -> Result<C0Estimate> {
    let grid = log_grid(1.0, s_min, per_decade);
    let opts = C0Options::default();
    match law {
        IntervalLaw::ExpGeometric { q } => c0_estimate(&exp_geometric_law(*q, 120)?, &grid, opts),
        IntervalLaw::Pareto { x_min, alpha } if *alpha < 1.0 => {
            let scaled: Vec<f64> = grid.iter().map(|s| s * x_min).collect();
            c0_estimate(&ParetoTransform { alpha: *alpha }, &scaled, opts)
        }
        _ => c0_estimate(mu1, &grid, opts),
    }
}

/// Exact recursions: measures, active masses, survival, `U^(n)` probes, c0.
pub fn analytic(cfg: &RunConfig) -> Result<CommandResult> {
    cfg.validate()?;
    let schedule = cfg.schedule.resolve()?;
    let a = &cfg.analytic;
    let law = interval_law(&cfg.initial)?;
    let mu1 = law_to_measure(law, a.grid_step, a.l_max)?;
    let n = cfg.epochs;
    let res = iterate_hcp_measures(
        &mu1,
        &schedule,
        n,
        IterateOptions { deficit_tolerance: a.deficit_tolerance, strict: a.strict },
    )?;
    let mut warnings = res.warnings.clone();
    let mut files = Vec::new();
    for (i, m) in res.measures.iter().enumerate() {
        let mut body = Vec::new();
        m.write_csv(&mut body)?;
        files.push(csv_file(&format!("mu_{:02}.csv", i + 1), "analytic", cfg, body));
    }
    let mut active = String::from("epoch,d_min,d_max,active_mass\n");
    for (i, h) in res.active_mass.iter().enumerate() {
        writeln!(active, "{},{},{},{}", i + 1, schedule.threshold(i + 1)?, schedule.threshold(i + 2)?, h).ok();
    }
    files.push(csv_file("active_mass.csv", "analytic", cfg, active.into_bytes()));

    match schedule_gamma(&schedule) {
        Some(gamma) => {
            let mut surv = String::from("n,survival\n");
            for k in 1..=n {
                writeln!(surv, "{},{}", k, survival_probability_exact(&res.active_mass, k, gamma)?).ok();
            }
            files.push(csv_file("survival.csv", "analytic", cfg, surv.into_bytes()));
        }
        None => warnings.push("survival table skipped: rates do not fix gamma".into()),
    }

    let d1 = schedule.threshold(1)?;
    let p = mu1.scale_positions(1.0 / d1);
    let mut probes = String::from("epoch,threshold,x,u,u_over_x\n");
    for &x in &a.probe_x {
        let mut ds = Vec::new();
        for k in 1..=n {
            let d = schedule.threshold(k)? / d1;
            let limit = a.j_max.unwrap_or(p.l_max()).min(p.l_max());
            if required_j_max(&[d], x) <= limit {
                ds.push((k, d));
            } else {
                warnings.push(format!(
                    "U probe at x = {x} skipped from epoch {k}: needs j_max = {}",
                    required_j_max(&[d], x)
                ));
                break;
            }
        }
        if ds.is_empty() {
            continue;
        }
        let dvals: Vec<f64> = ds.iter().map(|t| t.1).collect();
        let u = un_sequence(&p, &dvals, x)?;
        for ((k, _), v) in ds.iter().zip(u) {
            writeln!(probes, "{},{},{},{},{}", k, schedule.threshold(*k)?, x, v, v / x).ok();
        }
    }
    files.push(csv_file("un_probes.csv", "analytic", cfg, probes.into_bytes()));

    let c0 = c0_for_law(law, &mu1, a.c0_s_min, a.c0_per_decade)?;
    let mut rep = String::from("estimate,converged,oscillation\n");
    writeln!(rep, "{},{},{}", c0.estimate, c0.converged, c0.oscillation).ok();
    files.push(csv_file("c0.csv", "analytic", cfg, rep.into_bytes()));
    let mut trace = String::from("s,ratio\n");
    for (s, r) in &c0.trace {
        writeln!(trace, "{s},{r}").ok();
    }
    files.push(csv_file("c0_trace.csv", "analytic", cfg, trace.into_bytes()));
    Ok(finish("analytic", cfg.clone(), files, warnings))
}

/// Limit density, CDF, transforms and moments for `limits.c0`.
pub fn limits(cfg: &RunConfig) -> Result<CommandResult> {
    let l = &cfg.limits;
    let gamma = schedule_gamma(&cfg.schedule.resolve()?).unwrap_or(0.0);
    let law = LimitLaw::new(LimitLawParams { gamma, ..LimitLawParams::new(l.c0) })?;
    let mut table = String::from("x,density,cdf\n");
    for (x, d, c) in law.tabulate_cdf(l.x_max, l.x_step) {
        writeln!(table, "{x},{d},{c}").ok();
    }
    let mut tr = String::from("s,interval_transform,first_point_transform\n");
    for &s in &l.s_grid {
        writeln!(tr, "{},{},{}", s, g_infinity(l.c0, s)?, first_point_limit_transform(l.c0, gamma, s)?).ok();
    }
    let mut mo = String::from("k,value,tail_error\n");
    for k in 1..=l.moments {
        match law.limit_moment(k)? {
            Moment::Finite { value, tail_error } => writeln!(mo, "{k},{value},{tail_error}").ok(),
            Moment::Infinite => writeln!(mo, "{k},inf,0").ok(),
        };
    }
    let files = vec![
        csv_file("limit_density.csv", "limits", cfg, table.into_bytes()),
        csv_file("limit_transforms.csv", "limits", cfg, tr.into_bytes()),
        csv_file("limit_moments.csv", "limits", cfg, mo.into_bytes()),
    ];
    Ok(finish("limits", cfg.clone(), files, Vec::new()))
}

/// `U^(n)(x)/x` for the exponential-geometric laws with `d^(n) = 2^(n-1)`.
pub fn figb_curves(qs: &[f64], horizon: usize, x: f64, step: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    if horizon == 0 {
        return Err(HcpError::InvalidArgument("horizon must be at least 1".into()));
    }
    let d: Vec<f64> = (1..=horizon).map(|n| 2f64.powi(n as i32 - 1)).collect();
    let j_max = required_j_max(&d, x);
    qs.iter()
        .map(|&q| {
            let p = exp_geometric_on_grid(q, step, j_max)?;
            let u = un_sequence(&p, &d, x)?;
            Ok((q, u.into_iter().map(|v| v / x).collect()))
        })
        .collect()
}

pub fn reproduce_figb(cfg: &RunConfig) -> Result<CommandResult> {
    let f = &cfg.figb;
    let curves = figb_curves(&f.q, f.horizon, f.x, f.step)?;
    let mut body = String::from("q,n,threshold,u_over_x\n");
    for (q, vals) in &curves {
        for (i, v) in vals.iter().enumerate() {
            writeln!(body, "{},{},{},{}", q, i + 1, 2f64.powi(i as i32), v).ok();
        }
    }
    let files = vec![csv_file("figb.csv", "reproduce-figb", cfg, body.into_bytes())];
    Ok(finish("reproduce-figb", cfg.clone(), files, Vec::new()))
}

/// `U^(n)(x)/x` for the arithmetic schedule `d^(n) = n`.
pub fn arithmetic_curve(q: f64, ns: &[usize], x: f64, step: f64) -> Result<Vec<f64>> {
    let d: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let p = exp_geometric_on_grid(q, step, required_j_max(&d, x))?;
    Ok(un_sequence(&p, &d, x)?.into_iter().map(|v| v / x).collect())
}

/// The counterexample law of the c0 classification.
pub fn counterexample_c0(lambda: f64) -> Result<C0Estimate> {
    let law = appendix_b_law(1.0 - (-lambda).exp(), 120)?;
    c0_estimate(&law, &log_grid(1.0, 1e-6, 20), C0Options::default())
}

/// Refuses to touch a non-empty directory unless `overwrite` is set.
pub fn prepare_output_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        let nonempty = fs::read_dir(dir)?.next().is_some();
        if nonempty && !overwrite {
            return Err(HcpError::Config(format!(
                "output directory {} is not empty; pass --overwrite to replace its files",
                dir.display()
            )));
        }
    } else {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn write_result(dir: &Path, result: &CommandResult) -> Result<()> {
    for f in &result.files {
        fs::write(dir.join(&f.name), &f.bytes)?;
    }
    fs::write(dir.join("manifest.json"), result.manifest.to_json()?)?;
    if !result.warnings.is_empty() {
        fs::write(dir.join("warnings.txt"), result.warnings.join("\n") + "\n")?;
    }
    Ok(())
}

/// Thresholds of `schedule` as a vector, for reporting.
pub fn thresholds(schedule: &EpochSchedule, n: usize) -> Result<Vec<f64>> {
    (1..=n).map(|k| schedule.threshold(k)).collect()
}

/// Explicit-threshold schedule sharing rates with `base`.
pub fn with_thresholds(base: &EpochSchedule, values: Vec<f64>) -> EpochSchedule {
    EpochSchedule { thresholds: Thresholds::Explicit { values }, ..base.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DELTA_EAST: &str = r#"
epochs = 2
seed = 3
[initial]
kind = "left_bounded"
law = { type = "dirac", value = 1.0 }
[schedule]
preset = "east"
[window]
intervals = 40
buffer_factor = 1.0
"#;

    fn text(r: &CommandResult, name: &str) -> String {
        String::from_utf8(r.files.iter().find(|f| f.name == name).unwrap().bytes.clone()).unwrap()
    }

    #[test]
    fn analytic_survival_rows() {
        let cfg = RunConfig::from_toml(DELTA_EAST).unwrap();
        let r = analytic(&cfg).unwrap();
        let t = text(&r, "survival.csv");
        let rows: Vec<f64> = t
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('n'))
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!((rows[0] - (-1.0f64).exp()).abs() < 1e-12);
        assert!((rows[1] - (-11.0f64 / 6.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn every_csv_has_provenance() {
        let cfg = RunConfig::from_toml(DELTA_EAST).unwrap();
        for r in [simulate(&cfg).unwrap(), analytic(&cfg).unwrap(), limits(&cfg).unwrap()] {
            for f in &r.files {
                assert!(f.bytes.starts_with(b"# hcp "), "{}", f.name);
            }
        }
    }

    #[test]
    fn geometric_c0_report() {
        let cfg = RunConfig::from_toml(&DELTA_EAST.replace(
            "{ type = \"dirac\", value = 1.0 }",
            "{ type = \"geometric\", q = 0.1 }",
        ))
        .unwrap();
        let r = analytic(&cfg).unwrap();
        assert!(text(&r, "c0.csv").contains(",true,"));
        let cfg = RunConfig::from_toml(&DELTA_EAST.replace(
            "{ type = \"dirac\", value = 1.0 }",
            "{ type = \"exp_geometric\", q = 0.60653065971 }",
        ))
        .unwrap();
        let r = analytic(&cfg).unwrap();
        assert!(text(&r, "c0.csv").contains(",false,"), "{}", text(&r, "c0.csv"));
    }

    #[test]
    fn output_dir_guard() {
        let dir = tempfile::tempdir().unwrap();
        prepare_output_dir(dir.path(), false).unwrap();
        fs::write(dir.path().join("x"), "1").unwrap();
        assert!(prepare_output_dir(dir.path(), false).is_err());
        assert!(prepare_output_dir(dir.path(), true).is_ok());
    }
}
