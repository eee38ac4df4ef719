//! The train / eval / oracle / sweep / plot commands.

use std::fs;
use std::path::{Path, PathBuf};

use toml::Value;

use super::config::RunConfig;
use super::output::{self, num, opt_num, RunDir, Summary, PROFILE_COLUMNS, TRACE_COLUMNS};
use super::svg::{LinePlot, Series};
use super::CliError;
use crate::loss::linspace;
use crate::models::{ac_speed_bounds, ac_speed_tau0, ks_exact_speed, speed_sign, ModelSpec, Sign, System};
use crate::network::checkpoint::{config_digest, Checkpoint, CheckpointError};
use crate::oracle::{ac_shooting_speed, fdm_speed, ShootingConfig, SpeedEstimate};
use crate::trainer::{evaluate, monotonicity_report, profile_networks, train_with, TrainError, TrainOutcome, TrainStatus};

/// Grid used for the profile table and the monotonicity count of a run.
pub const SUMMARY_GRID: (f64, f64, usize) = (-10.0, 10.0, 201);

pub struct RunReport {
    pub outcome: TrainOutcome,
    pub summary: Summary,
    pub dir: RunDir,
}

impl RunReport {
    pub fn aborted(&self) -> bool {
        self.outcome.status != TrainStatus::Completed
    }
}

fn train_error(e: TrainError) -> CliError {
    match e {
        TrainError::Invalid { .. } | TrainError::Model(_) | TrainError::Network(_) => CliError::Config(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

/// Trains one configuration and writes its run directory.
pub fn execute_run(cfg: &RunConfig, progress: bool) -> Result<RunReport, CliError> {
    let dir = RunDir::create(&cfg.out_dir)?;
    let text = cfg.canonical_text();
    fs::write(dir.config(), &text)?;

    let label = cfg.label.clone();
    let outcome = train_with(&cfg.model, &cfg.network, &cfg.training, |r| {
        if progress {
            eprintln!("[{label}] epoch {:>7}  s = {:+.6}  loss = {:.3e}", r.epoch, r.s_est, r.losses.total);
        }
    })
    .map_err(train_error)?;

    output::write_csv(&dir.trace(), &TRACE_COLUMNS, &output::trace_rows(&outcome.trace))?;
    Checkpoint { digest: config_digest(&text), params: outcome.params.as_slice().to_vec() }.write(&dir.checkpoint()).map_err(checkpoint_error)?;

    let (lo, hi, n) = SUMMARY_GRID;
    let profiles = evaluate(&outcome.nets, outcome.params.as_slice(), &linspace(lo, hi, n)).map_err(|e| CliError::Numerical(e.to_string()))?;
    output::write_csv(&dir.profiles(), &PROFILE_COLUMNS, &output::profile_rows(&profiles))?;

    let last = outcome.final_record();
    let s_est = outcome.speed();
    let exact = cfg.model.exact_speed();
    let (status, abort_epoch, abort_reason) = match &outcome.status {
        TrainStatus::Completed => ("completed", None, None),
        TrainStatus::Aborted { epoch, reason } => ("aborted", Some(*epoch), Some(reason.clone())),
    };
    let summary = Summary {
        label: cfg.label.clone(),
        system: cfg.model.system.name().to_string(),
        status: status.to_string(),
        abort_epoch,
        abort_reason,
        epochs: cfg.training.epochs,
        s_est,
        exact_speed: exact,
        abs_error: exact.map(|e| (s_est - e).abs()),
        loss_ge1: last.losses.ge1,
        loss_ge2: last.losses.ge2,
        loss_limit: last.losses.limit,
        loss_bc: last.losses.bc,
        loss_trans: last.losses.trans,
        loss_total: last.losses.total,
        monotonicity_violations: monotonicity_report(&profiles, &cfg.model),
        warnings: outcome.warnings.clone(),
    };
    summary.write(&dir.summary())?;
    Ok(RunReport { outcome, summary, dir })
}

fn checkpoint_error(e: CheckpointError) -> CliError {
    match e {
        CheckpointError::DigestMismatch => CliError::Config(e.to_string()),
        _ => CliError::Io(e.to_string()),
    }
}

fn print_summary(s: &Summary, dir: &RunDir) {
    println!("run {} ({}) {}", s.label, s.system, s.status);
    if let (Some(epoch), Some(reason)) = (s.abort_epoch, &s.abort_reason) {
        println!("  aborted at epoch {epoch}: {reason}");
    }
    println!("  s_est            {:.6}", s.s_est);
    if let (Some(e), Some(d)) = (s.exact_speed, s.abs_error) {
        println!("  exact speed      {e:.6}  (|error| {d:.2e})");
    }
    println!("  loss total       {:.3e}  (ge {:.2e} / {:.2e}, limit {:.2e}, bc {:.2e}, trans {:.2e})", s.loss_total, s.loss_ge1, s.loss_ge2, s.loss_limit, s.loss_bc, s.loss_trans);
    println!("  monotonicity     {} violations on [-10, 10]", s.monotonicity_violations);
    for w in &s.warnings {
        println!("  warning: {w}");
    }
    println!("  output           {}", dir.0.display());
}

pub fn cmd_train(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let report = execute_run(cfg, !quiet)?;
    if !quiet {
        print_summary(&report.summary, &report.dir);
    }
    if let TrainStatus::Aborted { epoch, reason } = &report.outcome.status {
        return Err(CliError::Numerical(format!("training aborted at epoch {epoch}: {reason}")));
    }
    Ok(())
}

fn value_text(v: &Value) -> String {
    match v {
        Value::Float(f) => num(*f),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn cmd_sweep(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let points = cfg.sweep_points()?;
    let root = cfg.out_dir.clone();
    fs::create_dir_all(&root)?;
    let keys: Vec<String> = cfg.sweep.iter().map(|(k, _)| k.clone()).collect();
    let mut header: Vec<&str> = vec!["point"];
    header.extend(keys.iter().map(String::as_str));
    header.extend([
        "label",
        "status",
        "s_est",
        "exact_speed",
        "abs_error",
        "loss_ge1",
        "loss_ge2",
        "loss_limit",
        "loss_bc",
        "loss_trans",
        "loss_total",
        "monotonicity_violations",
        "dir",
    ]);
    let mut rows = Vec::new();
    let mut aborted = 0;
    for (i, point) in points.iter().enumerate() {
        let mut run = cfg.clone();
        for (k, v) in point {
            run = run.with_override(k, v.clone())?;
        }
        let label = format!("{}-{i:03}", cfg.label);
        let dir = root.join(format!("point-{i:03}"));
        run = run.with_override("label", Value::String(label))?.with_out_dir(&dir)?;
        if !quiet {
            let desc: Vec<String> = point.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            eprintln!("sweep point {}/{}: {}", i + 1, points.len(), desc.join(", "));
        }
        let report = execute_run(&run, !quiet)?;
        aborted += report.aborted() as usize;
        let s = &report.summary;
        let mut row = vec![i.to_string()];
        row.extend(point.iter().map(|(_, v)| value_text(v)));
        row.extend([
            s.label.clone(),
            s.status.clone(),
            num(s.s_est),
            opt_num(s.exact_speed),
            opt_num(s.abs_error),
            num(s.loss_ge1),
            num(s.loss_ge2),
            num(s.loss_limit),
            num(s.loss_bc),
            num(s.loss_trans),
            num(s.loss_total),
            s.monotonicity_violations.to_string(),
            report.dir.0.display().to_string(),
        ]);
        rows.push(row);
    }
    let path = root.join("sweep.csv");
    output::write_csv(&path, &header, &rows)?;
    if !quiet {
        println!("sweep {}: {} points -> {}", cfg.label, rows.len(), path.display());
    }
    if aborted > 0 {
        return Err(CliError::Numerical(format!("{aborted} sweep point(s) aborted")));
    }
    Ok(())
}

pub const ORACLE_COLUMNS: [&str; 11] = [
    "system",
    "tau",
    "alpha",
    "lower_bound",
    "upper_bound",
    "exact_speed",
    "sign",
    "oracle_method",
    "oracle_speed",
    "oracle_diagnostic",
    "nn_speed",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OracleRow {
    pub system: String,
    pub tau: Option<f64>,
    pub alpha: Option<f64>,
    pub bounds: Option<(f64, f64)>,
    pub exact: Option<f64>,
    pub sign: Option<Sign>,
    pub estimate: Option<SpeedEstimate>,
    pub nn: Option<f64>,
}

impl OracleRow {
    fn cells(&self) -> Vec<String> {
        let sign = match self.sign {
            Some(Sign::Positive) => "positive",
            Some(Sign::Negative) => "negative",
            Some(Sign::Zero) => "zero",
            Some(Sign::Unknown) => "unknown",
            None => "",
        };
        vec![
            self.system.clone(),
            opt_num(self.tau),
            opt_num(self.alpha),
            opt_num(self.bounds.map(|b| b.0)),
            opt_num(self.bounds.map(|b| b.1)),
            opt_num(self.exact),
            sign.to_string(),
            self.estimate.map(|e| e.method.name().to_string()).unwrap_or_default(),
            opt_num(self.estimate.map(|e| e.value)),
            opt_num(self.estimate.map(|e| e.diagnostic)),
            opt_num(self.nn),
        ]
    }
}

/// `(τ, α)` cells of the oracle table, exclusions removed.
pub fn oracle_cells(cfg: &RunConfig) -> Vec<(f64, f64)> {
    let System::Ac(p) = cfg.model.system else {
        return Vec::new();
    };
    let o = &cfg.oracle;
    if o.taus.is_empty() && o.alphas.is_empty() {
        return vec![(p.tau, p.alpha)];
    }
    let taus = if o.taus.is_empty() { vec![p.tau] } else { o.taus.clone() };
    let alphas = if o.alphas.is_empty() { vec![p.alpha] } else { o.alphas.clone() };
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let mut out = Vec::new();
    for &a in &alphas {
        for &t in &taus {
            if !o.exclude.iter().any(|&(et, ea)| same(et, t) && same(ea, a)) {
                out.push((t, a));
            }
        }
    }
    out
}

/// Runs the classical oracles (and optionally training) for every row.
/// Returns the rows and the number of rows where something failed.
pub fn oracle_rows(cfg: &RunConfig, quiet: bool) -> Result<(Vec<OracleRow>, usize), CliError> {
    let mut failures = 0;
    let mut rows = Vec::new();
    let nn_speed = |run: RunConfig, tag: String, failures: &mut usize| -> Result<Option<f64>, CliError> {
        if !cfg.oracle.train {
            return Ok(None);
        }
        let dir = cfg.out_dir.join("runs").join(&tag);
        let run = run.with_override("label", Value::String(format!("{}-{tag}", cfg.label)))?.with_out_dir(&dir)?;
        let report = execute_run(&run, !quiet)?;
        if report.aborted() {
            *failures += 1;
            return Ok(None);
        }
        Ok(Some(report.summary.s_est))
    };
    let system = cfg.model.system.name().to_string();
    match cfg.model.system {
        System::Ac(_) => {
            for (tau, alpha) in oracle_cells(cfg) {
                ModelSpec::ac(tau, alpha).validate().map_err(|e| CliError::Config(format!("oracle cell (tau {tau}, alpha {alpha}): {e}")))?;
                let estimate = match ac_shooting_speed(tau, alpha, &ShootingConfig::for_params(tau, alpha)) {
                    Ok(e) => Some(e),
                    Err(e) => {
                        eprintln!("shooting failed at tau {tau}, alpha {alpha}: {e}");
                        failures += 1;
                        None
                    }
                };
                let run = cfg.with_override("model.tau", Value::Float(tau))?.with_override("model.alpha", Value::Float(alpha))?;
                let nn = nn_speed(run, format!("tau{tau}-alpha{alpha}"), &mut failures)?;
                rows.push(OracleRow {
                    system: system.clone(),
                    tau: Some(tau),
                    alpha: Some(alpha),
                    bounds: Some(ac_speed_bounds(tau, alpha)),
                    exact: (tau == 0.0).then(|| ac_speed_tau0(alpha)),
                    sign: speed_sign(&ModelSpec::ac(tau, alpha)).ok(),
                    estimate,
                    nn,
                });
            }
        }
        System::Ks(p) => {
            let estimate = if p.epsilon > 0.0 {
                match fdm_speed(&cfg.model, &cfg.oracle.front.build()) {
                    Ok(e) => Some(e),
                    Err(e) => {
                        eprintln!("front tracking failed: {e}");
                        failures += 1;
                        None
                    }
                }
            } else {
                None
            };
            let nn = nn_speed(cfg.clone(), "nn".into(), &mut failures)?;
            rows.push(OracleRow { system, exact: ks_exact_speed(&cfg.model).ok(), estimate, nn, ..Default::default() });
        }
        System::Lv(_) => {
            let estimate = match fdm_speed(&cfg.model, &cfg.oracle.front.build()) {
                Ok(e) => Some(e),
                Err(e) => {
                    eprintln!("front tracking failed: {e}");
                    failures += 1;
                    None
                }
            };
            let nn = nn_speed(cfg.clone(), "nn".into(), &mut failures)?;
            rows.push(OracleRow {
                system,
                exact: cfg.model.exact_speed(),
                sign: speed_sign(&cfg.model).ok(),
                estimate,
                nn,
                ..Default::default()
            });
        }
    }
    Ok((rows, failures))
}

pub fn cmd_oracle(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out_dir)?;
    let (rows, failures) = oracle_rows(cfg, quiet)?;
    let path = cfg.out_dir.join("oracle.csv");
    let cells: Vec<Vec<String>> = rows.iter().map(OracleRow::cells).collect();
    output::write_csv(&path, &ORACLE_COLUMNS, &cells)?;
    if !quiet {
        println!("{:>5} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", "tau", "alpha", "lower", "upper", "exact", "oracle", "nn");
        let f = |x: Option<f64>| x.map(|v| format!("{v:9.5}")).unwrap_or_else(|| format!("{:>9}", "-"));
        for r in &rows {
            println!(
                "{:>5} {:>5} {} {} {} {} {}",
                r.tau.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
                r.alpha.map(|a| a.to_string()).unwrap_or_else(|| "-".into()),
                f(r.bounds.map(|b| b.0)),
                f(r.bounds.map(|b| b.1)),
                f(r.exact),
                f(r.estimate.map(|e| e.value)),
                f(r.nn)
            );
        }
        println!("{} rows -> {}", rows.len(), path.display());
    }
    if failures > 0 {
        return Err(CliError::Numerical(format!("{failures} oracle row(s) failed")));
    }
    Ok(())
}

/// `lo:hi:n`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("grid `{spec}` must look like lo:hi:n"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || (n > 1 && !(lo < hi)) {
        return Err(CliError::Config(format!("grid `{spec}` needs n >= 1 and lo < hi")));
    }
    Ok(linspace(lo, hi, n))
}

/// Tabulates a checkpoint's profiles. The configuration defaults to the
/// `config.toml` next to the checkpoint.
pub fn cmd_eval(checkpoint: &Path, config: Option<&Path>, grid: &str, svg: bool, out: Option<&Path>, quiet: bool) -> Result<PathBuf, CliError> {
    let zs = parse_grid(grid)?;
    let base = checkpoint.parent().unwrap_or(Path::new("."));
    let config_path = config.map(Path::to_path_buf).unwrap_or_else(|| base.join(output::CONFIG_FILE));
    let text = fs::read_to_string(&config_path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", config_path.display())))?;
    let ck = Checkpoint::read(checkpoint).map_err(checkpoint_error)?;
    ck.verify(&text).map_err(checkpoint_error)?;
    let cfg = RunConfig::from_str(&text, &config_path.display().to_string())?;
    let nets = profile_networks(&cfg.model, &cfg.network).map_err(|e| CliError::Config(e.to_string()))?;
    nets.check_shape(&ck.params).map_err(|e| CliError::Config(e.to_string()))?;
    let profiles = evaluate(&nets, &ck.params, &zs).map_err(|e| CliError::Numerical(e.to_string()))?;

    let out_dir = out.unwrap_or(base);
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(output::PROFILES_FILE);
    output::write_csv(&path, &PROFILE_COLUMNS, &output::profile_rows(&profiles))?;
    if svg {
        let plot = LinePlot {
            title: format!("{} profiles", cfg.label),
            x_label: "z".into(),
            y_label: "value".into(),
            log_y: false,
            series: vec![
                Series { name: "U".into(), x: profiles.z.clone(), y: profiles.u.clone() },
                Series { name: "V".into(), x: profiles.z.clone(), y: profiles.v.clone() },
            ],
        };
        fs::write(out_dir.join("profiles.svg"), plot.render())?;
        let trace = base.join(output::TRACE_FILE);
        if trace.exists() {
            plot_trace(&output::read_csv(&trace)?, out_dir, "trace", &cfg.label)?;
        }
    }
    if !quiet {
        let violations = monotonicity_report(&profiles, &cfg.model);
        println!("{} points -> {} ({violations} monotonicity violations)", zs.len(), path.display());
    }
    Ok(path)
}

fn plot_trace(t: &output::Table, dir: &Path, stem: &str, title: &str) -> Result<(), CliError> {
    let epoch = t.column("epoch").ok_or_else(|| CliError::Config("trace has no epoch column".into()))?.to_vec();
    let speed = LinePlot {
        title: format!("{title}: estimated speed"),
        x_label: "epoch".into(),
        y_label: "s".into(),
        log_y: false,
        series: vec![Series { name: "s_est".into(), x: epoch.clone(), y: t.column("s_est").unwrap_or(&[]).to_vec() }],
    };
    fs::write(dir.join(format!("{stem}_speed.svg")), speed.render())?;
    let series = TRACE_COLUMNS[2..]
        .iter()
        .filter_map(|c| t.column(c).map(|y| Series { name: c.trim_start_matches("loss_").into(), x: epoch.clone(), y: y.to_vec() }))
        .collect();
    let loss = LinePlot { title: format!("{title}: losses"), x_label: "epoch".into(), y_label: "loss".into(), log_y: true, series };
    fs::write(dir.join(format!("{stem}_loss.svg")), loss.render())?;
    Ok(())
}

/// Plots CSV columns. Trace files get a speed plot and a log-scale loss
/// plot unless columns are chosen explicitly.
pub fn cmd_plot(input: &Path, out: Option<&Path>, x: Option<&str>, y: Option<&str>, log_y: bool, quiet: bool) -> Result<Vec<PathBuf>, CliError> {
    let table = output::read_csv(input)?;
    if table.header.is_empty() {
        return Err(CliError::Config(format!("{} has no header", input.display())));
    }
    let dir = out.unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")));
    fs::create_dir_all(dir)?;
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "plot".into());
    let is_trace = table.header.iter().map(String::as_str).eq(TRACE_COLUMNS.iter().copied());
    let written = if is_trace && x.is_none() && y.is_none() {
        plot_trace(&table, dir, &stem, &stem)?;
        vec![dir.join(format!("{stem}_speed.svg")), dir.join(format!("{stem}_loss.svg"))]
    } else {
        let x_name = x.unwrap_or(&table.header[0]);
        let xs = table.column(x_name).ok_or_else(|| CliError::Config(format!("no column `{x_name}`")))?.to_vec();
        let names: Vec<String> = match y {
            Some(list) => list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            None => table.header.iter().filter(|h| h.as_str() != x_name).cloned().collect(),
        };
        let mut series = Vec::new();
        for n in &names {
            let ys = table.column(n).ok_or_else(|| CliError::Config(format!("no column `{n}`")))?;
            series.push(Series { name: n.clone(), x: xs.clone(), y: ys.to_vec() });
        }
        let plot = LinePlot { title: stem.clone(), x_label: x_name.to_string(), y_label: String::new(), log_y, series };
        let path = dir.join(format!("{stem}.svg"));
        fs::write(&path, plot.render())?;
        vec![path]
    };
    if !quiet {
        for p in &written {
            println!("wrote {}", p.display());
        }
    }
    Ok(written)
}
