//! Subcommand implementations. Each resolves its settings (flag, then
//! config file, then default), runs the library and returns a [`Report`]
//! that embeds the resolved settings.

use serde::Serialize;
use serde_json::{json, Value};

use htm_core::inference::{
    fit_minimal_contrast, mcculloch_estimate, parametric_bootstrap, BootstrapConfig, CodifferencePower, FitOptions,
    FitResult, MIN_SAMPLE, QUANTILE_LEVELS,
};
use htm_core::maxstable::{
    extremal_coefficient, indicator_cov_bounds, joint_cdf_bounds, lrd_verdict_maxstable, ExtremalModel,
};
use htm_core::memory::{
    classify_memory, excursion_cov_integrated, mc_excursion_cov, ExcursionConfig, McConfig, MemoryVerdict,
};
use htm_core::stable::{LinearConfig, LinearSimulator};
use htm_core::{rng, StableParams};

use crate::data::{ingest_csv, synthetic_dataset, Dataset, Transform};
use crate::literal::{parse_kernel, parse_measure, parse_model};
use crate::report::{Report, Table};
use crate::{
    BootstrapArgs, ClassifyArgs, CliError, Command, DataArgs, ExcursionArgs, FileConfig, FitArgs, GlobalArgs,
    MaxstableArgs, PowerArg, ReproduceArgs, SimulateArgs,
};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_ALPHA: f64 = 1.56;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_REPS: usize = 1000;
pub const DEFAULT_MAX_LAG: usize = 25;

pub fn execute(cmd: &Command, g: &GlobalArgs, f: &FileConfig) -> Result<Report, CliError> {
    let seed = g.seed.or(f.seed).unwrap_or(DEFAULT_SEED);
    let tol = g.tol.or(f.tol).unwrap_or(DEFAULT_TOL);
    match cmd {
        Command::Simulate(a) => simulate(a, f, seed),
        Command::Classify(a) => classify(a, f, seed),
        Command::Excursion(a) => excursion(a, f, seed, tol),
        Command::Maxstable(a) => maxstable(a, f, seed),
        Command::Fit(a) => fit(a, f, seed),
        Command::Bootstrap(a) => bootstrap(a, f, seed),
        Command::Reproduce(a) => reproduce(a, f, seed),
    }
}

fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| file.clone()).unwrap_or(default)
}

fn parse_lag_list(s: &str) -> Result<Vec<f64>, CliError> {
    let lags: Vec<f64> = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("lag '{}' is not a number", x.trim())))
        })
        .collect::<Result<_, _>>()?;
    if lags.is_empty() || lags.iter().any(|t| !t.is_finite()) {
        return Err(CliError::Config(format!("invalid lag list '{s}'")));
    }
    Ok(lags)
}

fn positive_lag_count(n: usize) -> Result<usize, CliError> {
    if n == 0 {
        return Err(CliError::Config("lags must be at least 1".into()));
    }
    Ok(n)
}

fn num(x: f64) -> Value {
    // JSON has no NaN or infinity
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(x.to_string())
    }
}

fn opt(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

fn verdict_into(report: &mut Report, v: &MemoryVerdict) {
    report.set("verdict", v.verdict.to_string());
    report.set("rule", v.rule.map(|r| r.describe()));
    report.set(
        "supporting_rules",
        v.supporting.iter().map(|r| r.describe()).collect::<Vec<_>>(),
    );
    report.set("conjectured", v.conjectured);
    if !v.note.is_empty() {
        report.set("note", &v.note);
    }
    let mut t = Table::new("diagnostics", &["name", "value"]);
    for d in &v.diagnostics {
        t.push(vec![json!(d.name), num(d.value)]);
    }
    report.tables.push(t);
}

#[derive(Serialize)]
struct SimulateConfig {
    kernel: String,
    alpha: f64,
    sigma: f64,
    n: usize,
}

fn simulate(a: &SimulateArgs, f: &FileConfig, seed: u64) -> Result<Report, CliError> {
    let cfg = SimulateConfig {
        kernel: pick(&a.kernel, &f.kernel, "series:c=0.0019,delta=1.0474".into()),
        alpha: pick(&a.alpha, &f.alpha, DEFAULT_ALPHA),
        sigma: pick(&a.sigma, &f.sigma, 1.0),
        n: pick(&a.n, &f.n, 1000),
    };
    let kernel = parse_kernel(&cfg.kernel)?;
    let params = StableParams::new(cfg.alpha, cfg.sigma)?;
    let sim = LinearSimulator::new(&kernel, params, cfg.n, &LinearConfig::default())?;
    let x = sim.simulate(&mut rng::stream(seed, 0));

    let mut r = Report::new("simulate", seed, &cfg);
    r.set("truncation", sim.report());
    if x.len() >= MIN_SAMPLE {
        if let Ok(m) = mcculloch_estimate(&x) {
            r.set("mcculloch_alpha", m.alpha);
            r.set("mcculloch_sigma", m.sigma);
        }
    }
    let mut t = Table::new("path", &["t", "x"]);
    for (i, v) in x.iter().enumerate() {
        t.push(vec![json!(i), num(*v)]);
    }
    r.tables.push(t);
    Ok(r)
}

#[derive(Serialize)]
struct ClassifyConfig {
    kernel: String,
    alpha: f64,
    conjecture: bool,
}

fn classify(a: &ClassifyArgs, f: &FileConfig, seed: u64) -> Result<Report, CliError> {
    let cfg = ClassifyConfig {
        kernel: pick(&a.kernel, &f.kernel, "power:C=1,delta=1.0474,a=1".into()),
        alpha: pick(&a.alpha, &f.alpha, DEFAULT_ALPHA),
        conjecture: a.conjecture || f.conjecture.unwrap_or(false),
    };
    let kernel = parse_kernel(&cfg.kernel)?;
    StableParams::new(cfg.alpha, 1.0)?;
    let v = classify_memory(&kernel, cfg.alpha, cfg.conjecture);
    let mut r = Report::new("classify", seed, &cfg);
    verdict_into(&mut r, &v);
    Ok(r)
}

#[derive(Serialize)]
struct ExcursionSettings {
    kernel: String,
    alpha: f64,
    measure: String,
    lags: String,
    mc_paths: usize,
    tol: f64,
}

fn excursion(a: &ExcursionArgs, f: &FileConfig, seed: u64, tol: f64) -> Result<Report, CliError> {
    let cfg = ExcursionSettings {
        kernel: pick(&a.kernel, &f.kernel, "exp:c=1,rate=1".into()),
        alpha: pick(&a.alpha, &f.alpha, DEFAULT_ALPHA),
        measure: pick(&a.measure, &f.measure, "dirac:0".into()),
        lags: pick(&a.lags, &f.lags, "0.5,1,2,5".into()),
        mc_paths: pick(&a.mc_paths, &f.mc_paths, 100_000),
        tol,
    };
    let kernel = parse_kernel(&cfg.kernel)?;
    let mu = parse_measure(&cfg.measure)?;
    let lags = parse_lag_list(&cfg.lags)?;
    let ecfg = ExcursionConfig {
        abs_tol: tol,
        ..ExcursionConfig::default()
    };
    let mcfg = McConfig::default();

    let mut t = Table::new(
        "excursion",
        &["lag", "spectral_covariance", "covariance", "error", "mc_estimate", "mc_std_err", "agree"],
    );
    for (i, &lag) in lags.iter().enumerate() {
        let inv = excursion_cov_integrated(lag, &kernel, cfg.alpha, &mu, &ecfg)?;
        let mc = if cfg.mc_paths > 0 {
            // the covariance is bilinear in the measure: sum over atom pairs
            let (mut est, mut se) = (0.0, 0.0);
            for &(u, wu) in mu.atoms() {
                for &(v, wv) in mu.atoms() {
                    let m = mc_excursion_cov(lag, &kernel, cfg.alpha, u, v, cfg.mc_paths, seed.wrapping_add(i as u64), &mcfg)?;
                    est += wu * wv * m.estimate;
                    se += (wu * wv).abs() * m.std_err;
                }
            }
            Some((est, se))
        } else {
            None
        };
        let agree = mc.map(|(e, s)| (e - inv.value).abs() <= 4.0 * s + inv.error + 1e-3);
        t.push(vec![
            num(lag),
            num(inv.spectral_covariance),
            num(inv.value),
            num(inv.error),
            opt(mc.map(|m| m.0)),
            opt(mc.map(|m| m.1)),
            agree.map(Value::Bool).unwrap_or(Value::Null),
        ]);
    }
    let mut r = Report::new("excursion", seed, &cfg);
    r.set("kernel_alpha_norm", kernel.alpha_norm(cfg.alpha).value);
    r.tables.push(t);
    Ok(r)
}

#[derive(Serialize)]
struct MaxstableConfig {
    model: String,
    alpha: f64,
    lags: String,
    horizon: f64,
    level: f64,
}

fn maxstable(a: &MaxstableArgs, f: &FileConfig, seed: u64) -> Result<Report, CliError> {
    let cfg = MaxstableConfig {
        model: pick(&a.model, &f.model, "br:gamma=12*log1p(|t|)".into()),
        alpha: pick(&a.alpha, &f.alpha, 1.0),
        lags: pick(&a.lags, &f.lags, "1,2,5,10,100,1000".into()),
        horizon: pick(&a.horizon, &f.horizon, 1e4),
        level: pick(&a.level, &f.level, 1.0),
    };
    let model = ExtremalModel::new(parse_model(&cfg.model)?, cfg.alpha)?;
    let lags = parse_lag_list(&cfg.lags)?;
    let v = lrd_verdict_maxstable(&model, cfg.horizon);

    let mut t = Table::new(
        "extremal",
        &["lag", "theta", "two_minus_theta", "cdf_lower", "cdf_upper", "cov_lower", "cov_upper"],
    );
    let u = cfg.level;
    for &lag in &lags {
        let theta = extremal_coefficient(&model, lag)?;
        let (cl, cu) = joint_cdf_bounds(theta, cfg.alpha, u, u)?;
        let (vl, vu) = indicator_cov_bounds(theta, cfg.alpha, u, u)?;
        t.push(vec![num(lag), num(theta), num(2.0 - theta), num(cl), num(cu), num(vl), num(vu)]);
    }
    let mut r = Report::new("maxstable", seed, &cfg);
    verdict_into(&mut r, &v);
    r.tables.push(t);
    Ok(r)
}

#[derive(Serialize)]
struct DataSettings {
    data: Option<String>,
    column: String,
    transform: Transform,
}

fn resolve_data(a: &DataArgs, f: &FileConfig) -> DataSettings {
    let data = a.data.clone().or_else(|| f.data.clone());
    let bundled = data.is_none();
    DataSettings {
        data: data.map(|p| p.display().to_string()),
        column: pick(&a.column, &f.column, "open".into()),
        // the bundled file holds prices
        transform: pick(
            &a.transform,
            &f.transform,
            if bundled { Transform::LogReturn } else { Transform::None },
        ),
    }
}

fn load(d: &DataSettings) -> Result<Dataset, CliError> {
    match &d.data {
        Some(p) => ingest_csv(std::path::Path::new(p), &d.column, d.transform),
        None if d.column == "open" && d.transform == Transform::LogReturn => synthetic_dataset(),
        None => crate::data::ingest_str(crate::data::SYNTHETIC_CSV, crate::data::SYNTHETIC_ID, &d.column, d.transform),
    }
}

fn fit_options(max_lag: usize, power: PowerArg) -> FitOptions {
    FitOptions {
        max_lag,
        power: CodifferencePower::from(power),
        ..FitOptions::default()
    }
}

/// Failures of the estimators on the data are data errors; anything else
/// keeps its class.
fn data_stage(e: htm_core::Error) -> CliError {
    match e {
        htm_core::Error::InvalidParameter(m) | htm_core::Error::InsufficientData(m) => CliError::Data(m),
        other => other.into(),
    }
}

fn fit_into(r: &mut Report, ds: &Dataset, res: &FitResult) {
    r.set("dataset", &ds.id);
    r.set("observations", ds.values.len());
    r.set("alpha_hat", res.alpha);
    r.set("sigma_hat", res.sigma_hat);
    r.set("delta_hat", res.delta_hat);
    r.set("c_hat", res.c_hat);
    r.set("objective", res.objective);
    r.set("delta_at_lower_bound", res.delta_at_lower_bound);
    r.set("c_at_bound", res.c_at_bound);
    r.set("power", res.power);
}

#[derive(Serialize)]
struct FitConfig {
    #[serde(flatten)]
    data: DataSettings,
    lags: usize,
    power: CodifferencePower,
    alpha: Option<f64>,
}

fn fit(a: &FitArgs, f: &FileConfig, seed: u64) -> Result<Report, CliError> {
    let lags = positive_lag_count(pick(&a.lags, &f.lags.as_deref().map(parse_usize).transpose()?, DEFAULT_MAX_LAG))?;
    let power = pick(&a.power, &f.power, PowerArg::Unit);
    let cfg = FitConfig {
        data: resolve_data(&a.data, f),
        lags,
        power: power.into(),
        alpha: a.alpha.or(f.alpha),
    };
    let ds = load(&cfg.data)?;
    let res = fit_minimal_contrast(&ds.values, cfg.alpha, &fit_options(lags, power)).map_err(data_stage)?;
    let model = htm_core::inference::theoretical_codifference(res.c_hat, res.delta_hat, res.alpha, lags)?;

    let mut r = Report::new("fit", seed, &cfg);
    fit_into(&mut r, &ds, &res);
    let mut t = Table::new("codifference", &["lag", "tau_hat", "tau_fit"]);
    for (k, lag) in res.tau_hat.lags.iter().enumerate() {
        t.push(vec![json!(lag), opt(res.tau_hat.values[k]), opt(model.values[k])]);
    }
    r.tables.push(t);
    Ok(r)
}

fn parse_usize(s: &str) -> Result<usize, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("lags '{s}' must be a positive integer")))
}

#[derive(Serialize)]
struct BootstrapSettings {
    alpha: f64,
    delta: f64,
    c: f64,
    n: usize,
    reps: usize,
    lags: usize,
    power: CodifferencePower,
}

fn quantile_tables(r: &mut Report, rep: &htm_core::inference::BootstrapReport) {
    let mut cols = vec!["lag".to_string()];
    cols.extend(QUANTILE_LEVELS.iter().map(|q| format!("q{:02}", (q * 100.0).round() as u32)));
    cols.extend(["theoretical".into(), "missing".into()]);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut wide = Table::new("boxplot", &cols);
    let mut long = Table::new("quantiles", &["lag", "level", "value"]);
    for l in &rep.lags {
        let mut row = vec![json!(l.lag)];
        row.extend(l.quantiles.iter().map(|q| num(*q)));
        row.push(num(l.theoretical));
        row.push(json!(l.missing));
        wide.push(row);
        for (lev, q) in QUANTILE_LEVELS.iter().zip(&l.quantiles) {
            long.push(vec![json!(l.lag), num(*lev), num(*q)]);
        }
    }
    let mut reps = Table::new("replicates", &["replicate", "alpha_hat", "delta_hat", "c_hat", "error"]);
    for (i, x) in rep.replicates.iter().enumerate() {
        reps.push(vec![
            json!(i),
            opt(x.alpha_hat),
            opt(x.delta_hat),
            opt(x.c_hat),
            x.error.clone().map(Value::String).unwrap_or(Value::Null),
        ]);
    }
    r.set("std_delta", rep.std_delta);
    r.set("std_c", rep.std_c);
    r.set("mean_delta", rep.mean_delta);
    r.set("mean_c", rep.mean_c);
    r.set("failures", rep.failures);
    r.tables.extend([wide, long, reps]);
}

fn bootstrap(a: &BootstrapArgs, f: &FileConfig, seed: u64) -> Result<Report, CliError> {
    let lags = positive_lag_count(pick(&a.lags, &f.lags.as_deref().map(parse_usize).transpose()?, DEFAULT_MAX_LAG))?;
    let power = pick(&a.power, &f.power, PowerArg::Unit);
    let cfg = BootstrapSettings {
        alpha: pick(&a.alpha, &f.alpha, DEFAULT_ALPHA),
        delta: pick(&a.delta, &f.delta, 1.0474),
        c: pick(&a.c, &f.c, 0.0019),
        n: pick(&a.n, &f.n, 1130),
        reps: pick(&a.reps, &f.reps, DEFAULT_REPS),
        lags,
        power: power.into(),
    };
    let mut bc = BootstrapConfig::new(cfg.n, cfg.reps, seed);
    bc.fit = fit_options(lags, power);
    let rep = parametric_bootstrap(cfg.alpha, cfg.delta, cfg.c, &bc)?;
    let mut r = Report::new("bootstrap", seed, &cfg);
    quantile_tables(&mut r, &rep);
    Ok(r)
}

#[derive(Serialize)]
struct ReproduceConfig {
    #[serde(flatten)]
    data: DataSettings,
    lags: usize,
    reps: usize,
    power: CodifferencePower,
}

fn reproduce(a: &ReproduceArgs, f: &FileConfig, seed: u64) -> Result<Report, CliError> {
    let lags = positive_lag_count(pick(&a.lags, &f.lags.as_deref().map(parse_usize).transpose()?, DEFAULT_MAX_LAG))?;
    let power = pick(&a.power, &f.power, PowerArg::Unit);
    let cfg = ReproduceConfig {
        data: resolve_data(&a.data, f),
        lags,
        reps: pick(&a.reps, &f.reps, DEFAULT_REPS),
        power: power.into(),
    };
    let ds = load(&cfg.data)?;
    let opts = fit_options(lags, power);
    let mut res = fit_minimal_contrast(&ds.values, None, &opts).map_err(data_stage)?;

    let mut bc = BootstrapConfig::new(ds.values.len(), cfg.reps, seed);
    bc.fit = opts;
    let rep = parametric_bootstrap(res.alpha, res.delta_hat, res.c_hat, &bc)?;
    res.bootstrap_std = Some((rep.std_delta, rep.std_c));

    let mut r = Report::new("reproduce", seed, &cfg);
    fit_into(&mut r, &ds, &res);
    quantile_tables(&mut r, &rep);
    // the observed codifference next to its bootstrap band
    let mut obs = Table::new("observed", &["lag", "tau_hat", "theoretical", "inside_iqr"]);
    for (k, l) in rep.lags.iter().enumerate() {
        let tau = res.tau_hat.values.get(k).copied().flatten();
        let inside = tau.map(|v| l.quantiles[1] <= v && v <= l.quantiles[3]);
        obs.push(vec![
            json!(l.lag),
            opt(tau),
            num(l.theoretical),
            inside.map(Value::Bool).unwrap_or(Value::Null),
        ]);
    }
    r.tables.push(obs);
    Ok(r)
}
