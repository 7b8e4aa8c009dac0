//! The `sse-lab` command line.
//!
//! Exit codes: 0 success, 1 a comparison or check failed, 2 usage or
//! config error, 3 numeric failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sse_decay::ensemble::{compare_estimates, compare_tables, compare_to_oracle, Engine, EnsembleTable, Observable};
use sse_decay::recipe::corrected_decay_rate;
use sse_decay::system::WWParams;
use sse_decay::ww::{fit_line_shape, survival_expectation, transition_expectation, DecayChannel, TransitionMode};
use sse_decay::zeno_rabi::{
    decay_bound_m_sigma, energy_variance, itano_bound, rabi_evolve, rabi_probabilities, rabi_system, reduction_rate,
    zeno_survival_expansion, BlochState, OSCILLATION_BOUNDS,
};
use sse_decay::{Error, NoiseParams, Warning};

use crate::config::{config_hash, parse_config, Config, ConfigError};
use crate::formats::{table_from_csv, table_to_csv, ComparisonJson, Provenance, Report};
use crate::parallel::run_ensemble_parallel;
use crate::validate::{run_suite, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable that overrides every master seed.
pub const SEED_ENV: &str = "SSE_LAB_SEED";
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(
    name = "sse-lab",
    version,
    about = "Stochastic Schrodinger equation decay experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a decay ensemble and compare it with the analytic curves.
    Decay(DecayArgs),
    /// Small-time survival expansion and reduction rate.
    Zeno(ZenoArgs),
    /// Damped Rabi oscillation, optionally with a Monte Carlo check.
    Rabi(RabiArgs),
    /// Lower bounds on M_sigma.
    Bounds(BoundsArgs),
    /// Run a named invariant suite.
    Validate(ValidateArgs),
    /// Compare two ensemble CSV files.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct DecayArgs {
    #[arg(long)]
    config: PathBuf,
    /// Engine name, or `all`.
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct ZenoArgs {
    /// Take the energy variance from this config's system.
    #[arg(long, conflicts_with = "variance")]
    config: Option<PathBuf>,
    #[arg(long)]
    variance: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    t_max: f64,
    #[arg(long, default_value_t = 10)]
    points: usize,
}

#[derive(Debug, Args)]
struct RabiArgs {
    /// Precession vector `x,y,z`; its length is the Rabi frequency.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    omega: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    t: f64,
    /// Initial Bloch vector `x,y,z`.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0, -1.0], allow_negative_numbers = true)]
    r0: Vec<f64>,
    /// Monte Carlo trajectories (0 skips the simulation).
    #[arg(long, default_value_t = 0)]
    trajectories: u64,
    #[arg(long, default_value_t = 0.01)]
    max_dt: f64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Decay energies in MeV.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    decay_mev: Vec<f64>,
    /// Rabi angular frequency in units of 10^6 s^-1.
    #[arg(long, allow_negative_numbers = true)]
    rabi_mhz: Option<f64>,
    /// Probability accuracy of the Rabi experiment.
    #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
    accuracy: f64,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    /// Restrict to one column.
    #[arg(long)]
    observable: Option<String>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: format!("config error: {e}"),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_NUMERIC,
        message: format!("{}: {e}", path.display()),
    }
}

fn seed_override() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Decay(a) => decay(a, out, err),
        Command::Zeno(a) => zeno(a, out),
        Command::Rabi(a) => rabi(a, out),
        Command::Bounds(a) => bounds(a, out),
        Command::Validate(a) => validate(a, out),
        Command::Compare(a) => compare(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn warning_text(w: &Warning) -> String {
    match w {
        Warning::NarrowBand { gamma, half_width } => {
            format!("bath half-width {half_width} is less than five widths (gamma = {gamma})")
        }
        Warning::NonPositiveRate { gamma, sigma } => {
            format!("corrected decay rate is not positive for gamma = {gamma}, sigma = {sigma}")
        }
        Warning::LinearizationScale { value } => format!("linearization scale sigma*|V|^2*t = {value}"),
        Warning::ExpansionValidity { neglected } => format!("small-time expansion drops terms of size {neglected}"),
    }
}

/// Analytic curves on the table grid, keyed by column. The linearized and
/// pathwise engines are leading order in `V`, so they are held to the
/// leading-order forms.
fn oracles(cfg: &Config, ww: &WWParams, table: &EnsembleTable) -> Result<Vec<(String, Vec<f64>)>, Failure> {
    let sys = &cfg.plan.system;
    let sigma = cfg.plan.noise.sigma();
    let mode = match table.engine {
        Engine::NonlinearSse | Engine::ImaginaryNoise => TransitionMode::Exact,
        Engine::Linearized | Engine::PathwiseClosedForm => TransitionMode::LeadingOrder,
    };
    let survival_sigma = if mode == TransitionMode::Exact { sigma } else { 0.0 };
    let survival: Vec<f64> = table
        .times
        .iter()
        .map(|&t| survival_expectation(ww, survival_sigma, t).map(|f| f.value))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for obs in &cfg.plan.observables {
        match obs {
            Observable::Survival => out.push(("survival".to_string(), survival.clone())),
            Observable::DecayProbability => out.push(("decay".to_string(), survival.iter().map(|s| 1.0 - s).collect())),
            Observable::Occupations => {
                for n in 0..sys.dim() {
                    let curve = if n == sys.initial() {
                        survival.clone()
                    } else {
                        let ch = DecayChannel::new(sys.energies()[n], sys.v()[(n, sys.initial())])?;
                        table
                            .times
                            .iter()
                            .map(|&t| transition_expectation(ww, &ch, sigma, t, mode))
                            .collect::<Result<_, _>>()?
                    };
                    out.push((format!("p{n}"), curve));
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

fn line_shape(cfg: &Config, ww: &WWParams, table: &EnsembleTable) -> Result<Option<Value>, Failure> {
    let sys = &cfg.plan.system;
    if !cfg.plan.observables.contains(&Observable::Occupations) {
        return Ok(None);
    }
    let last = table.rows.len() - 1;
    let t = table.times[last];
    let mut channels = Vec::new();
    let mut occ = Vec::new();
    for m in sys.off_manifold() {
        channels.push(DecayChannel::new(sys.energies()[m], sys.v()[(m, sys.initial())])?);
        let j = table.column_index(&format!("p{m}")).expect("occupation column");
        occ.push(table.rows[last][j].mean);
    }
    if channels.len() < 3 || t == 0.0 {
        return Ok(None);
    }
    let gamma = ww.gamma_scalar()?;
    let guess = (ww.m_scalar()?, if gamma > 0.0 { gamma } else { 1.0 / t });
    let fit = fit_line_shape(sys.e_s(), &channels, &occ, cfg.plan.noise.sigma(), t, guess)?;
    Ok(Some(json!({
        "t": t,
        "center": sys.e_s() + fit.mass,
        "mass": fit.mass,
        "fwhm": fit.gamma,
        "expected_center": sys.e_s() + ww.m_scalar()?,
        "expected_fwhm": gamma,
    })))
}

fn decay(a: DecayArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let text = fs::read_to_string(&a.config).map_err(|e| usage(format!("{}: {e}", a.config.display())))?;
    let mut cfg = parse_config(&text)?;
    let mut overrides = String::new();
    if let Some(s) = a.sigma {
        cfg.plan.noise = NoiseParams::new(s).map_err(|e| usage(format!("--sigma: {e}")))?;
        overrides.push_str(&format!(" sigma={s}"));
    }
    if let Some(seed) = seed_override()? {
        cfg.plan.master_seed = seed;
        overrides.push_str(&format!(" seed={seed}"));
    }
    let hash = if overrides.is_empty() {
        cfg.hash.clone()
    } else {
        config_hash(&format!("{text}\n#{overrides}"))
    };
    let engines: Vec<Engine> = match a.engine.as_deref() {
        Some("all") => Engine::ALL.to_vec(),
        Some(name) => vec![Engine::from_name(name).ok_or_else(|| usage(format!("unknown engine `{name}`")))?],
        None => vec![cfg.engine.unwrap_or(Engine::NonlinearSse)],
    };
    for w in &cfg.warnings {
        let _ = writeln!(err, "warning: {}", warning_text(w));
    }
    fs::create_dir_all(&a.out).map_err(|e| io_failure(&a.out, e))?;
    let prov = Provenance::new(cfg.plan.master_seed, hash);
    let ww = cfg
        .ww
        .clone()
        .filter(|w| w.dim() == 1 && cfg.plan.initial_state.is_none());

    let mut comparisons = Vec::new();
    let mut details = serde_json::Map::new();
    let mut tables = Vec::new();
    for &engine in &engines {
        let table = run_ensemble_parallel(cfg.plan.clone(), engine, a.workers)?;
        let name = if engines.len() == 1 {
            "occupations.csv".to_string()
        } else {
            format!("occupations-{}.csv", engine.name())
        };
        write_file(&a.out.join(&name), &table_to_csv(&table, &prov))?;
        if let Some(ww) = &ww {
            for (column, curve) in oracles(&cfg, ww, &table)? {
                let series = table.series(&column).expect("oracle column exists");
                let r = compare_to_oracle(&series, &curve)?;
                comparisons.push(ComparisonJson::new(
                    format!("{} {column} vs analytic", engine.name()),
                    &r,
                ));
            }
            if let Some(v) = line_shape(&cfg, ww, &table)? {
                details.insert(format!("line_shape_{}", engine.name()), v);
            }
        }
        tables.push(table);
    }
    for other in tables.iter().skip(1) {
        let r = compare_tables(&tables[0], other)?;
        comparisons.push(ComparisonJson::new(
            format!("{} vs {}", tables[0].engine.name(), other.engine.name()),
            &r,
        ));
    }
    if let Some(ww) = &ww {
        let rate = corrected_decay_rate(ww.gamma_scalar()?, cfg.plan.noise.sigma())?;
        details.insert("mass".into(), json!(ww.m_scalar()?));
        details.insert("gamma".into(), json!(ww.gamma_scalar()?));
        details.insert("corrected_rate".into(), json!(rate.value));
    }
    details.insert(
        "engines".into(),
        json!(engines.iter().map(|e| e.name()).collect::<Vec<_>>()),
    );
    details.insert("n_traj".into(), json!(cfg.plan.n_traj));
    details.insert("sigma".into(), json!(cfg.plan.noise.sigma()));
    let mut report = Report::new(prov, comparisons);
    report.details = details;
    write_file(&a.out.join("report.json"), &report.to_json())?;
    let _ = writeln!(
        out,
        "{}: max|z| = {:.2} over {} comparisons",
        if report.pass { "pass" } else { "FAIL" },
        report.max_z,
        report.comparisons.len()
    );
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILED })
}

fn zeno(a: ZenoArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let (variance, sigma, hash, seed) = match (&a.config, a.variance) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let cfg = parse_config(&text)?;
            let sigma = a.sigma.unwrap_or(cfg.plan.noise.sigma());
            (energy_variance(&cfg.plan.system), sigma, cfg.hash, cfg.plan.master_seed)
        }
        (None, Some(v)) => {
            let sigma = a.sigma.ok_or_else(|| usage("--sigma is required with --variance"))?;
            (v, sigma, config_hash(&format!("zeno variance={v} sigma={sigma}")), 0)
        }
        _ => return Err(usage("give --config or --variance")),
    };
    if !(a.t_max > 0.0) || a.points == 0 {
        return Err(usage("--t-max must be positive and --points at least 1"));
    }
    let mut rows = Vec::new();
    for k in 1..=a.points {
        let t = a.t_max * k as f64 / a.points as f64;
        let e = zeno_survival_expansion(variance, sigma, t)?;
        rows.push(json!({
            "t": t,
            "survival": e.value,
            "linear_term": 0.25 * sigma * sigma * variance * t,
            "quadratic_term": variance * t * t,
            "warnings": e.warnings.iter().map(warning_text).collect::<Vec<_>>(),
        }));
    }
    let prov = Provenance::new(seed, hash);
    let doc = json!({
        "version": prov.version,
        "master_seed": prov.master_seed,
        "config_hash": prov.config_hash,
        "energy_variance": variance,
        "sigma": sigma,
        "reduction_rate": reduction_rate(variance, sigma),
        "expansion": rows,
    });
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).unwrap());
    Ok(EXIT_OK)
}

fn rabi(a: RabiArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let omega: [f64; 3] = a
        .omega
        .clone()
        .try_into()
        .map_err(|_| usage("--omega needs three components"))?;
    let r0: [f64; 3] =
        a.r0.clone()
            .try_into()
            .map_err(|_| usage("--r0 needs three components"))?;
    if !(a.t >= 0.0) || !(a.max_dt > 0.0) {
        return Err(usage("--t must be >= 0 and --max-dt positive"));
    }
    let start = BlochState::new(r0, 0.0)?;
    let r = rabi_evolve(&start, omega, a.sigma, a.t)?;
    let (p_plus, p_minus) = rabi_probabilities(r.r[2].clamp(-1.0, 1.0))?;
    let seed = seed_override()?.unwrap_or(DEFAULT_SEED);
    let hash = config_hash(&format!("rabi omega={omega:?} sigma={} t={} r0={r0:?}", a.sigma, a.t));
    let mut doc = json!({
        "version": crate::formats::VERSION,
        "master_seed": seed,
        "config_hash": hash,
        "omega": omega,
        "sigma": a.sigma,
        "t": a.t,
        "bloch": r.r,
        "p_plus": p_plus,
        "p_minus": p_minus,
        "damping": (-(omega.iter().map(|x| x * x).sum::<f64>()) * a.sigma * a.sigma * a.t / 8.0).exp(),
    });
    let mut code = EXIT_OK;
    if a.trajectories > 0 && a.t > 0.0 {
        let steps = (a.t / a.max_dt).ceil() as usize;
        let mut plan = sse_decay::ensemble::ExperimentPlan::new(
            rabi_system(omega)?,
            NoiseParams::new(a.sigma)?,
            a.t / steps as f64,
            a.t,
            a.trajectories,
            seed,
        );
        plan.observables = vec![Observable::Bloch];
        plan.record_every = steps;
        plan.initial_state = Some(start.to_state()?.amplitudes);
        let table = run_ensemble_parallel(plan, Engine::NonlinearSse, a.workers)?;
        let last = table.rows.last().expect("final row").clone();
        let exact: Vec<_> =
            r.r.iter()
                .map(|&m| sse_decay::EnsembleEstimate {
                    mean: m,
                    std_error: Some(0.0),
                    n: 1,
                })
                .collect();
        // pass/fail rests on R3, which fixes P±; the transverse components
        // have near-zero spread and expose the O(dt) phase error of the step
        let all = compare_estimates(&last, &exact)?;
        let report = compare_estimates(&last[2..], &exact[2..])?;
        doc["monte_carlo"] = json!({
            "trajectories": a.trajectories,
            "dt": a.t / steps as f64,
            "bloch_mean": last.iter().map(|e| e.mean).collect::<Vec<_>>(),
            "bloch_std_error": last.iter().map(|e| e.se_or_zero()).collect::<Vec<_>>(),
            "z": all.z,
            "r3_z": report.max_abs_z,
            "pass": report.pass,
        });
        if !report.pass {
            code = EXIT_FAILED;
        }
    }
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).unwrap());
    Ok(code)
}

fn bounds(a: BoundsArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    if a.decay_mev.is_empty() && a.rabi_mhz.is_none() {
        let mut cmd = <Cli as clap::CommandFactory>::command();
        let help = cmd
            .find_subcommand_mut("bounds")
            .expect("bounds subcommand")
            .render_usage()
            .to_string();
        return Err(usage(format!("nothing to compute\n{help}")));
    }
    let mut decay = Vec::new();
    for &e in &a.decay_mev {
        if !(e > 0.0) {
            return Err(usage(format!("decay energy must be positive, got {e}")));
        }
        decay.push(json!({ "e_d_mev": e, "m_sigma_mev": decay_bound_m_sigma(e)? }));
    }
    let itano = match a.rabi_mhz {
        Some(w) => {
            if !(w > 0.0) {
                return Err(usage(format!("Rabi frequency must be positive, got {w}")));
            }
            json!({ "omega_mhz": w, "accuracy": a.accuracy, "m_sigma_gev": itano_bound(w, a.accuracy)? })
        }
        None => Value::Null,
    };
    let hash = config_hash(&format!(
        "bounds decay={:?} rabi={:?} accuracy={}",
        a.decay_mev, a.rabi_mhz, a.accuracy
    ));
    let doc = json!({
        "version": crate::formats::VERSION,
        "master_seed": 0,
        "config_hash": hash,
        "decay_bounds": decay,
        "itano": itano,
        "oscillation_bounds": OSCILLATION_BOUNDS
            .iter()
            .map(|(name, m)| json!({ "system": name, "m_sigma_gev": m }))
            .collect::<Vec<_>>(),
    });
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).unwrap());
    Ok(EXIT_OK)
}

fn validate(a: ValidateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let seed = seed_override()?.unwrap_or(DEFAULT_SEED);
    let checks = run_suite(a.suite, seed, a.workers)?;
    for c in &checks {
        let _ = writeln!(out, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if checks.iter().all(|c| c.pass) {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn compare(a: CompareArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let read = |p: &PathBuf| -> Result<_, Failure> {
        let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        table_from_csv(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
    };
    let (ta, tb) = (read(&a.a)?, read(&a.b)?);
    if ta.times != tb.times {
        return Err(usage("the two tables are on different time grids"));
    }
    let names: Vec<String> = match &a.observable {
        Some(n) => vec![n.clone()],
        None => ta.columns.iter().filter(|c| tb.columns.contains(c)).cloned().collect(),
    };
    if names.is_empty() {
        return Err(usage("the tables share no columns"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in &names {
        let (Some(x), Some(y)) = (ta.series(n), tb.series(n)) else {
            return Err(usage(format!("column `{n}` is missing from one of the tables")));
        };
        xs.extend(x);
        ys.extend(y);
    }
    let r = compare_estimates(&xs, &ys)?;
    let prov = ta.provenance.clone().unwrap_or_else(|| Provenance::new(0, ""));
    let report = Report::new(
        prov,
        vec![ComparisonJson::new(
            format!("{} vs {}", a.a.display(), a.b.display()),
            &r,
        )],
    );
    let _ = writeln!(out, "{}", report.to_json());
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILED })
}
