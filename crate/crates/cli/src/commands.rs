use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use wasslab_core::bounds::{predicted_rate, predicted_rate_iid};
use wasslab_core::distributions::LawSpec;
use wasslab_core::dynamics::{simulate_series, write_trajectory_csv, ProcessKind, ProcessSpec};
use wasslab_core::montecarlo::{
    covariance_kernel, fmt12, ks_distance, regress_rate, resolve_reference, run_experiment, simulate_limit_law,
    summarize, uniform_cells, write_results_csv, ExperimentPlan, Reference,
};
use wasslab_core::transfer_operator::{
    alpha1_profile, alpha2_profile, build_ulam, decay_slope, default_gap_grid, smooth_profile, MeshKind,
};
use wasslab_core::transport::{ebralidze_majorant, wr_vs_law};
use wasslab_core::{EmpiricalMeasure, Observable, TransportCost};

use crate::config::{observable, RatesConfig, Target};
use crate::error::CliError;
use crate::{AlphaArgs, CltArgs, DistanceArgs, Global, RatesArgs, SimulateArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rounds every float in a JSON tree to 12 significant digits.
fn round12(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x: f64 = fmt12(n.as_f64().unwrap()).parse().unwrap();
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round12).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round12(v))).collect()),
        other => other,
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("output serializes");
    serde_json::to_string_pretty(&round12(v)).expect("output serializes")
}

fn out_file(global: &Global, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&global.out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", global.out.display())))?;
    Ok(global.out.join(name))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(global: &Global, name: &str, value: &T) -> Result<String, CliError> {
    let text = to_json(value);
    let path = out_file(global, name)?;
    let mut w = create(&path)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(text)
}

/// Reads a one-column CSV of reals; blank lines and `#` comments are skipped.
pub fn read_sample(path: &Path) -> Result<Vec<f64>, CliError> {
    let file = File::open(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 1 {
            return Err(CliError::input(format!(
                "{}: line {line}: expected one column, found {}",
                path.display(),
                record.len()
            )));
        }
        let field = &record[0];
        let x: f64 = field
            .parse()
            .map_err(|_| CliError::input(format!("{}: line {line}: `{field}` is not a number", path.display())))?;
        if !x.is_finite() {
            return Err(CliError::input(format!("{}: line {line}: non-finite value", path.display())));
        }
        values.push(x);
    }
    if values.is_empty() {
        return Err(CliError::input(format!("{}: sample file is empty", path.display())));
    }
    Ok(values)
}

#[derive(Serialize)]
struct DistanceOutput {
    w: f64,
    r: f64,
    n: usize,
}

pub fn distance(_global: &Global, args: &DistanceArgs) -> Result<(), CliError> {
    let values = read_sample(&args.sample)?;
    let law = args.law.parse::<LawSpec>()?.build()?;
    let sample = EmpiricalMeasure::new(values)?;
    let cost = if args.majorant {
        ebralidze_majorant(&sample, law.as_ref(), args.r)?
    } else {
        wr_vs_law(&sample, law.as_ref(), args.r)?
    };
    let cost = TransportCost::new(cost, args.r)?;
    println!(
        "{}",
        to_json(&DistanceOutput {
            w: cost.distance(),
            r: cost.order,
            n: sample.n(),
        })
    );
    Ok(())
}

fn process_with(spec: &str, obs: &str, seed: Option<u64>) -> Result<ProcessSpec, CliError> {
    let g: Observable = obs.parse()?;
    let spec = spec.parse::<ProcessSpec>()?.with_observable(g).with_seed(seed.unwrap_or(0));
    spec.validate()?;
    Ok(spec)
}

pub fn simulate(global: &Global, args: &SimulateArgs) -> Result<(), CliError> {
    let mut spec = process_with(&args.process, &args.observable, global.seed)?;
    if let Some(b) = args.burn_in {
        spec = spec.with_burn_in(b);
    }
    if args.n == 0 {
        return Err(CliError::input("n must be positive"));
    }
    let values = simulate_series(&spec, args.n)?;
    let path = out_file(global, &args.file)?;
    let mut w = create(&path)?;
    write_trajectory_csv(&spec, &values, &mut w)?;
    w.flush()?;
    eprintln!("wrote {} values to {}", values.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct RatesVerdict {
    plan_hash: String,
    version: &'static str,
    process: String,
    statistic: String,
    regime: String,
    predicted_exponent: f64,
    predicted_log_power: f64,
    fitted_slope: f64,
    stderr: f64,
    r2: f64,
    fitted_log_power: Option<f64>,
    tol: f64,
    pass: bool,
}

pub fn rates(global: &Global, args: &RatesArgs) -> Result<(), CliError> {
    let cfg = RatesConfig::load(&args.config)?;
    let valid = cfg.validate()?;
    let seed = global.seed.unwrap_or(cfg.seed);
    let order = valid.statistic.order();
    let (prediction, process, reference) = match valid.target {
        Target::Iid(spec) => (predicted_rate_iid(valid.statistic), spec, None),
        Target::Map { gamma, b, side } => {
            let prediction = predicted_rate(gamma, b, side, valid.statistic)?;
            let spec = ProcessSpec::lsv(gamma).with_observable(observable(b, side)?);
            let reference = cfg.reference_bins.map(|bins| Reference::Pushforward { bins });
            (prediction, spec, reference)
        }
    };
    let mut plan = ExperimentPlan::new(process.with_seed(seed), cfg.n_grid.clone(), cfg.replicas).with_seed(seed);
    plan.reference = reference;
    plan.orders = vec![order];
    plan.validate()?;

    let result = run_experiment(&plan)?;
    let fit = regress_rate(&result, order, valid.correction)?;
    let mut w = create(&out_file(global, "results.csv")?)?;
    write_results_csv(&plan, &result, &mut w)?;
    w.flush()?;
    write_json(global, "summary.json", &summarize(&plan, &result))?;

    let verdict = RatesVerdict {
        plan_hash: result.plan_hash.clone(),
        version: VERSION,
        process: plan.process.label(),
        statistic: valid.statistic.to_string(),
        regime: prediction.regime.clone(),
        predicted_exponent: prediction.exponent,
        predicted_log_power: prediction.log_power,
        fitted_slope: fit.slope,
        stderr: fit.stderr,
        r2: fit.r2,
        fitted_log_power: fit.log_power,
        tol: cfg.tol,
        pass: (fit.slope - prediction.exponent).abs() <= cfg.tol,
    };
    println!("{}", write_json(global, "verdict.json", &verdict)?);
    Ok(())
}

#[derive(Serialize)]
struct AlphaOutput {
    version: &'static str,
    map: String,
    observable: String,
    m: usize,
    mesh: &'static str,
    invariance_defect: f64,
    decay_slope: Option<f64>,
}

pub fn alpha(global: &Global, args: &AlphaArgs) -> Result<(), CliError> {
    let spec: ProcessSpec = args.map.parse()?;
    let map = spec
        .gpm_map()
        .ok_or_else(|| CliError::input(format!("`{}` is not a map", args.map)))?;
    let g: Observable = args.observable.parse()?;
    let mesh = match args.mesh.as_deref() {
        None if map.gamma().is_some() => MeshKind::Graded,
        None | Some("uniform") => MeshKind::Uniform,
        Some("graded") => MeshKind::Graded,
        Some(other) => return Err(CliError::input(format!("mesh must be uniform or graded, got `{other}`"))),
    };
    if args.lags.is_empty() {
        return Err(CliError::input("lag grid is empty"));
    }
    let op = build_ulam(&map, args.m, mesh)?;
    let a1 = alpha1_profile(&op, &g, &args.lags, args.x_grid)?;
    let a2 = if args.no_alpha2 {
        None
    } else {
        Some(alpha2_profile(&op, &g, &args.lags, args.pair_grid, &default_gap_grid())?)
    };

    let mut w = csv::Writer::from_writer(create(&out_file(global, "alpha.csv")?)?);
    w.write_record(["lag", "alpha1", "alpha2"]).map_err(wasslab_core::Error::from)?;
    for (k, e) in a1.iter().enumerate() {
        // The pair term runs on a coarser threshold grid; α2 dominates α1 by definition.
        let a2 = a2.as_ref().map_or(String::new(), |p| fmt12(p[k].value.max(e.value)));
        w.write_record([e.lag.to_string(), fmt12(e.value), a2])
            .map_err(wasslab_core::Error::from)?;
    }
    w.flush()?;

    let out = AlphaOutput {
        version: VERSION,
        map: args.map.clone(),
        observable: g.label(),
        m: op.m(),
        mesh: match mesh {
            MeshKind::Uniform => "uniform",
            MeshKind::Graded => "graded",
        },
        invariance_defect: op.invariance_defect(),
        decay_slope: decay_slope(&smooth_profile(&a1)),
    };
    println!("{}", write_json(global, "alpha.json", &out)?);
    Ok(())
}

#[derive(Serialize)]
struct CltOutput {
    plan_hash: String,
    version: &'static str,
    process: String,
    n: usize,
    replicas: usize,
    grid: usize,
    lag_cutoff: usize,
    kernel_length: usize,
    mean_scaled_w1: f64,
    mean_limit: f64,
    clip_fraction: f64,
    ks: f64,
    threshold: f64,
    pass: bool,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn clt(global: &Global, args: &CltArgs) -> Result<(), CliError> {
    let process = process_with(&args.process, &args.observable, global.seed)?;
    let seed = global.seed.unwrap_or(0);
    if args.grid == 0 || args.replicas == 0 || args.limit_samples == 0 || args.n == 0 {
        return Err(CliError::input("n, replicas, grid and limit samples must be positive"));
    }
    let lag_cutoff = args.lag_cutoff.unwrap_or(match process.kind {
        ProcessKind::Iid { .. } => 0,
        _ => 100,
    });
    let mut plan = ExperimentPlan::new(process.clone(), vec![args.n], args.replicas).with_seed(seed);
    plan.orders = vec![1.0];
    plan.validate()?;

    let law = resolve_reference(&plan)?.law;
    let (mut lo, mut hi) = law.support();
    if !lo.is_finite() {
        lo = law.inv_cdf(1e-3);
    }
    if !hi.is_finite() {
        hi = law.inv_cdf(1.0 - 1e-3);
    }
    let (grid, widths) = uniform_cells(lo, hi, args.grid);
    let kernel = covariance_kernel(&process, &grid, lag_cutoff, args.kernel_length)?;
    let limit = simulate_limit_law(&kernel, &widths, args.limit_samples, seed)?;

    let result = run_experiment(&plan)?;
    let root_n = (args.n as f64).sqrt();
    let scaled: Vec<f64> = result.points[0].values.iter().map(|v| v * root_n).collect();
    let ks = ks_distance(&scaled, &limit.samples)?;
    let out = CltOutput {
        plan_hash: result.plan_hash.clone(),
        version: VERSION,
        process: process.label(),
        n: args.n,
        replicas: args.replicas,
        grid: args.grid,
        lag_cutoff,
        kernel_length: args.kernel_length,
        mean_scaled_w1: mean(&scaled),
        mean_limit: mean(&limit.samples),
        clip_fraction: limit.clip_fraction,
        ks,
        threshold: args.threshold,
        pass: ks < args.threshold,
    };
    println!("{}", write_json(global, "clt.json", &out)?);
    Ok(())
}
