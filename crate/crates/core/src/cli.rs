//! Command-line front end. [`run`] does all the work and returns the exit
//! status and the text to print, so the binary is a thin wrapper and tests can
//! drive the CLI without spawning processes.
//!
//! Exit status: 0 success, 1 verdict disagreement in `compare`, 2 input error,
//! 3 inconclusive verdict under `--strict`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytic::{CanonicalParams, SzSupport};
use crate::classify::{full_report_with, MartingaleReport, ReportPolicy, Tri};
use crate::config::{load_model_file, McSection, ProbeSection};
use crate::error::{Error, Result};
use crate::mc::{estimate_exit, estimate_ez, estimate_phi, simulate_paths, write_path_dump, McConfig, McEstimate};
use crate::model::{builtin, check_conditions, tilde, ConditionReport, DiffusionSpec, GridPolicy, Measure};
use crate::quad::Finiteness;
use crate::report::{emit_conditions, emit_estimates, emit_martingale};
use crate::scale::{ProfilePolicy, PROFILE_FIELDS};
use crate::tables::{classification_tables, emit_tables, render_summary, render_table, summary_rows};

#[derive(Debug, Parser)]
#[command(name = "svmart", version, about = "Martingale, UI and positivity classification for stochastic volatility models")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Exit with status 3 when any verdict is inconclusive.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the standing regularity conditions.
    Check(ModelArgs),
    /// Classify the price process: martingale, UI martingale, positivity.
    Report {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        probe: ProbeArgs,
    },
    /// Regenerate the analytic classification and summary tables.
    Table(TableArgs),
    /// Monte Carlo estimates.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Numeric, analytic and Monte Carlo answers side by side.
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        probe: ProbeArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Skip the simulation.
        #[arg(long)]
        no_mc: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelId {
    Heston,
    ThreeHalves,
    SchobelZhu,
    HullWhite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Support {
    RealLine,
    HalfLine,
}

/// Model source: a builtin family with parameters, or a TOML file.
#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, value_enum, conflicts_with = "config", required_unless_present = "config")]
    model: Option<ModelId>,
    /// TOML model file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    /// Schöbel–Zhu state space.
    #[arg(long, value_enum)]
    support: Option<Support>,
    /// Starting point of the variance process (default 1).
    #[arg(long)]
    x0: Option<f64>,
}

#[derive(Debug, Args, Default)]
struct ProbeArgs {
    /// Probes per boundary.
    #[arg(long)]
    probe_count: Option<usize>,
    /// Geometric ratio between probes.
    #[arg(long)]
    probe_ratio: Option<f64>,
    /// Integration steps between probes.
    #[arg(long)]
    substeps: Option<usize>,
    /// Quadrature tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimateKind {
    /// E[Z_T].
    Ez,
    /// Exit-side frequencies between --barriers.
    Exit,
    /// Distribution of the integral of b² up to the stopping time.
    Phi,
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long, value_enum, default_value_t = EstimateKind::Ez)]
    estimate: EstimateKind,
    /// Measure to simulate under.
    #[arg(long, default_value = "original")]
    measure: String,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    antithetic: bool,
    /// Turn off the Brownian-bridge crossing test.
    #[arg(long)]
    no_bridge: bool,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Absorbing barriers `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
    barriers: Option<Vec<f64>>,
    #[arg(long)]
    y_cap: Option<f64>,
    #[arg(long)]
    phi_cap: Option<f64>,
    /// Write per-path terminal states to this file.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TableArgs {
    /// heston, three_halves, schobel_zhu, hull_white, summary or all.
    #[arg(long, default_value = "all")]
    family: String,
    /// original, tilde or both.
    #[arg(long, default_value = "both")]
    measure: String,
}

/// What [`run`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Loaded {
    spec: DiffusionSpec,
    canonical: Option<CanonicalParams>,
    probe: ProbeSection,
    mc: McSection,
}

fn load(args: &ModelArgs) -> Result<Loaded> {
    if let Some(path) = &args.config {
        let given = [args.kappa, args.theta, args.xi, args.omega, args.gamma, args.mu, args.sigma, args.rho, args.x0];
        if given.iter().any(Option::is_some) || args.support.is_some() {
            return Err(Error::Validation("parameter flags cannot be combined with --config".into()));
        }
        let f = load_model_file(path)?;
        return Ok(Loaded { spec: f.spec, canonical: f.canonical, probe: f.probe, mc: f.mc });
    }
    let id = args.model.expect("clap requires --model or --config");
    let need = |name: &str, v: Option<f64>| v.ok_or_else(|| Error::Validation(format!("--{name} is required for this model")));
    let unused = |names: &[(&str, Option<f64>)]| -> Result<()> {
        match names.iter().find(|(_, v)| v.is_some()) {
            Some((n, _)) => Err(Error::Validation(format!("--{n} does not apply to this model"))),
            None => Ok(()),
        }
    };
    let rho = args.rho.unwrap_or(0.0);
    if args.support.is_some() && id != ModelId::SchobelZhu {
        return Err(Error::Validation("--support applies to schobel-zhu only".into()));
    }
    let params = match id {
        ModelId::Heston => {
            unused(&[("omega", args.omega), ("gamma", args.gamma), ("mu", args.mu), ("sigma", args.sigma)])?;
            CanonicalParams::Heston { kappa: need("kappa", args.kappa)?, theta: need("theta", args.theta)?, xi: need("xi", args.xi)?, rho }
        }
        ModelId::ThreeHalves => {
            unused(&[("kappa", args.kappa), ("gamma", args.gamma), ("mu", args.mu), ("sigma", args.sigma)])?;
            CanonicalParams::ThreeHalves { omega: need("omega", args.omega)?, theta: need("theta", args.theta)?, xi: need("xi", args.xi)?, rho }
        }
        ModelId::SchobelZhu => {
            unused(&[("xi", args.xi), ("omega", args.omega), ("mu", args.mu), ("sigma", args.sigma)])?;
            CanonicalParams::SchobelZhu {
                kappa: need("kappa", args.kappa)?,
                theta: need("theta", args.theta)?,
                gamma: need("gamma", args.gamma)?,
                rho,
                support: match args.support {
                    Some(Support::HalfLine) => SzSupport::HalfLine,
                    _ => SzSupport::RealLine,
                },
            }
        }
        ModelId::HullWhite => {
            unused(&[("kappa", args.kappa), ("theta", args.theta), ("xi", args.xi), ("omega", args.omega), ("gamma", args.gamma)])?;
            CanonicalParams::HullWhite { mu: need("mu", args.mu)?, sigma: need("sigma", args.sigma)?, rho }
        }
    };
    let mut spec = builtin(&params)?;
    if let Some(x0) = args.x0 {
        spec = spec.with_start(x0)?;
    }
    Ok(Loaded { spec, canonical: Some(params), probe: ProbeSection::default(), mc: McSection::default() })
}

fn report_policy(loaded: &Loaded, args: &ProbeArgs) -> Result<ReportPolicy> {
    let mut profile = ProfilePolicy::default();
    loaded.probe.apply(&mut profile);
    ProbeSection { probe_count: args.probe_count, ratio: args.probe_ratio, substeps: args.substeps, tol: args.tol }
        .apply(&mut profile);
    profile.probe.validate()?;
    if profile.substeps < 2 {
        return Err(Error::Validation("substeps must be at least 2".into()));
    }
    Ok(ReportPolicy { grid: GridPolicy::default(), profile })
}

fn mc_config(loaded: &Loaded, args: &McArgs, default_paths: u64) -> Result<McConfig> {
    let mut c = McConfig { path_count: default_paths, ..McConfig::default() };
    loaded.mc.apply(&mut c)?;
    let flags = McSection {
        paths: args.paths,
        dt: args.dt,
        horizon: args.horizon,
        seed: args.seed,
        epsilon: args.epsilon,
        barriers: args.barriers.as_ref().map(|b| [b[0], b[1]]),
        y_cap: args.y_cap,
        phi_cap: args.phi_cap,
        scheme: args.scheme.clone(),
        workers: args.workers,
        antithetic: args.antithetic.then_some(true),
        bridge: args.no_bridge.then_some(false),
        low_confidence_fraction: None,
    };
    flags.apply(&mut c)?;
    c.validate()?;
    Ok(c)
}

fn finiteness_text(f: &Finiteness) -> String {
    match f {
        Finiteness::Finite { estimate: Some(e), error: Some(err) } => format!("finite ({e:.6e} ± {err:.1e})"),
        Finiteness::Finite { estimate: Some(e), .. } => format!("finite ({e:.6e})"),
        Finiteness::Infinite { rate: Some(r) } => format!("infinite (growth exponent {r:.3})"),
        other => other.label().to_string(),
    }
}

fn derived_line(r: &MartingaleReport) -> String {
    r.derived.iter().map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(" ")
}

fn report_text(r: &MartingaleReport) -> String {
    let mut out = String::new();
    if !r.derived.is_empty() {
        out += &format!("derived: {}\n", derived_line(r));
    }
    let oracle = r.analytic.as_deref();
    let lines = [
        ("conditions", r.conditions_ok, oracle.map(|a| a.conditions_ok)),
        ("martingale", r.true_martingale, oracle.map(|a| a.true_martingale)),
        ("UI martingale", r.ui_martingale, oracle.map(|a| a.ui_martingale)),
        ("positive for finite T", r.positive_finite_t, oracle.map(|a| a.positive_finite_t)),
        ("positive at infinity", r.positive_at_infinity, oracle.map(|a| a.positive_at_infinity)),
        ("absorbed at zero", r.absorbed_at_zero, oracle.map(|a| a.absorbed_at_zero)),
    ];
    for (name, v, a) in lines {
        match a {
            Some(a) => out += &format!("{name}: {v}  (analytic: {a})\n"),
            None => out += &format!("{name}: {v}\n"),
        }
    }
    for (label, e) in [("original", &r.exit_original), ("tilde", &r.exit_tilde)] {
        out += &format!("exit behaviour ({label}): case {}", e.case.label());
        if let Some(p) = e.exit_prob_right {
            out += &format!(", P(exit right) = {p:.6}");
        }
        out.push('\n');
    }
    for p in [&r.profile_original, &r.profile_tilde] {
        out += &format!("profile ({}):\n", p.measure.label());
        for (name, f) in PROFILE_FIELDS.iter().zip(p.fields().iter()) {
            out += &format!("  {name:<9} {}\n", finiteness_text(f));
        }
    }
    for b in &r.blocking {
        out += &format!("blocking: {b}\n");
    }
    for d in &r.diagnostics {
        out += &format!("note: {d}\n");
    }
    for d in &r.disagreements {
        out += &format!("DISAGREEMENT: {d}\n");
    }
    out
}

fn conditions_text(r: &ConditionReport) -> String {
    let mut out = format!(
        "local integrability of 1/sigma^2 and mu/sigma^2: {}\nlocal integrability of b^2/sigma^2: {}\nb not identically zero: {}\nconditions hold: {}\n",
        r.es_condition,
        r.b_local_integrability,
        r.b_nontrivial,
        r.all_hold()
    );
    for w in &r.witnesses {
        let est = w.estimate.map_or("diverges".to_string(), |v| format!("{v:.6e}"));
        out += &format!("  integral of {} over [{}, {}]: {est}\n", w.integrand, w.interval.0, w.interval.1);
    }
    for n in &r.notes {
        out += &format!("note: {n}\n");
    }
    out
}

fn estimate_text(e: &McEstimate) -> String {
    let t = &e.tallies;
    let mut out = format!(
        "{}: {:.6} ± {:.6} (SE), {} paths: absorbed left {}, absorbed right {}, capped {}, survived {}{}\n",
        e.label,
        e.mean,
        e.standard_error,
        e.path_count,
        t.absorbed_left,
        t.absorbed_right,
        t.capped,
        t.survived,
        if e.low_confidence { " [low confidence]" } else { "" }
    );
    for (q, v) in &e.quantiles {
        out += &format!("  quantile {q}: {v:.6e}\n");
    }
    for n in &e.notes {
        out += &format!("  note: {n}\n");
    }
    out
}

fn run_mc(loaded: &Loaded, args: &McArgs, cfg: &McConfig) -> Result<Vec<McEstimate>> {
    let measure: Measure = args.measure.parse()?;
    let spec = match measure {
        Measure::Original => loaded.spec.clone(),
        Measure::Tilde => tilde(&loaded.spec),
    };
    if let Some(path) = &args.dump {
        write_path_dump(path, &simulate_paths(&spec, cfg)?)?;
    }
    Ok(match args.estimate {
        EstimateKind::Ez => vec![estimate_ez(&spec, cfg)?],
        EstimateKind::Phi => vec![estimate_phi(&spec, cfg)?],
        EstimateKind::Exit => {
            let b = cfg.barriers.ok_or_else(|| Error::Validation("--estimate exit needs --barriers lo,hi".into()))?;
            estimate_exit(&spec, b, cfg)?.to_vec()
        }
    })
}

/// Monte Carlo reading of the martingale verdict. The sample mean of a
/// nonnegative local martingale can only contradict a "yes" (mean well below
/// one) or the supermartingale bound (mean well above one).
fn mc_martingale_check(verdict: Tri, e: &McEstimate) -> (Tri, Option<String>) {
    const BAND: f64 = 5.0;
    let z = e.z_score(1.0);
    if z > BAND {
        return (Tri::Inconclusive, Some(format!("Monte Carlo mean exceeds 1 by {z:.1} SE")));
    }
    if z < -BAND {
        let msg = (verdict == Tri::Yes).then(|| format!("martingale: numeric yes, Monte Carlo mean {:.4} is {:.1} SE below 1", e.mean, -z));
        return (Tri::No, msg);
    }
    (if verdict == Tri::No { Tri::Inconclusive } else { Tri::Yes }, None)
}

fn execute(cli: &Cli) -> Result<RunOutput> {
    let structured = cli.format == Format::Structured;
    let ok = |stdout: String, inconclusive: bool| RunOutput {
        status: if cli.strict && inconclusive { 3 } else { 0 },
        stdout,
        stderr: String::new(),
    };
    match &cli.command {
        Command::Check(m) => {
            let loaded = load(m)?;
            let r = check_conditions(&loaded.spec, &GridPolicy::default())?;
            let text = if structured { emit_conditions(&r) } else { conditions_text(&r) };
            Ok(ok(text, r.all_hold() == Tri::Inconclusive || r.b_nontrivial == Tri::Inconclusive))
        }
        Command::Report { model, probe } => {
            let loaded = load(model)?;
            let r = full_report_with(&loaded.spec, &report_policy(&loaded, probe)?);
            let text = if structured { emit_martingale(&r) } else { report_text(&r) };
            Ok(ok(text, r.any_inconclusive()))
        }
        Command::Table(t) => {
            let families = ["heston", "three_halves", "schobel_zhu", "hull_white"];
            let want_summary = t.family == "summary" || t.family == "all";
            if !(want_summary || families.contains(&t.family.as_str())) {
                return Err(Error::Validation(format!("unknown family '{}'", t.family)));
            }
            let measure = match t.measure.as_str() {
                "both" => None,
                m => Some(m.parse::<Measure>()?),
            };
            let tables: Vec<_> = classification_tables()
                .into_iter()
                .filter(|tb| t.family == "all" || tb.family == t.family)
                .filter(|tb| measure.is_none_or(|m| tb.measure == m))
                .collect();
            let summary = if want_summary { summary_rows() } else { Vec::new() };
            if structured {
                return Ok(ok(emit_tables(&tables, &summary), false));
            }
            let mut out: Vec<String> = tables.iter().map(render_table).collect();
            if want_summary {
                out.push(render_summary(&summary));
            }
            Ok(ok(out.join("\n"), false))
        }
        Command::Mc { model, mc } => {
            let loaded = load(model)?;
            let cfg = mc_config(&loaded, mc, McConfig::default().path_count)?;
            let es = run_mc(&loaded, mc, &cfg)?;
            let text = if structured { emit_estimates(&es) } else { es.iter().map(estimate_text).collect() };
            Ok(ok(text, false))
        }
        Command::Compare { model, probe, mc, no_mc } => {
            let loaded = load(model)?;
            let r = full_report_with(&loaded.spec, &report_policy(&loaded, probe)?);
            let mut disagreements = r.disagreements.clone();
            let mut text = String::new();
            let mut structured_text = emit_martingale(&r);
            text += "verdict                 numeric       analytic      agree\n";
            let oracle = r.analytic.as_deref();
            for (i, name) in crate::classify::VERDICT_FIELDS.iter().enumerate() {
                let v = r.verdicts()[i];
                let (a, agree) = match oracle {
                    Some(o) => {
                        let a = o.verdicts()[i];
                        (a.label(), if v.is_definite() { if v == a { "yes" } else { "NO" } } else { "-" })
                    }
                    None => ("-", "-"),
                };
                text += &format!("{name:<23} {:<13} {a:<13} {agree}\n", v.label());
            }
            if loaded.canonical.is_some() && oracle.is_none() {
                text += "analytic oracle: not available for this measure\n";
            }
            if !no_mc {
                let mc_args = McArgs { estimate: EstimateKind::Ez, ..clone_mc(mc) };
                let cfg = mc_config(&loaded, &mc_args, 20_000)?;
                let e = estimate_ez(&loaded.spec, &cfg)?;
                let (reading, msg) = mc_martingale_check(r.true_martingale, &e);
                text += &format!("monte carlo E[Z_T], T={}: {:.6} ± {:.6} -> martingale reading {reading}\n", cfg.horizon, e.mean, e.standard_error);
                structured_text.push_str(&format!("mc.mean={:?}\nmc.standard_error={:?}\nmc.reading={reading}\n", e.mean, e.standard_error));
                disagreements.extend(msg);
            }
            for d in &disagreements {
                text += &format!("DISAGREEMENT: {d}\n");
                structured_text.push_str(&format!("compare.disagreement={d}\n"));
            }
            let mut out = ok(if structured { structured_text } else { text }, r.any_inconclusive());
            if !disagreements.is_empty() {
                out.status = 1;
            }
            Ok(out)
        }
    }
}

fn clone_mc(m: &McArgs) -> McArgs {
    McArgs {
        estimate: m.estimate,
        measure: m.measure.clone(),
        paths: m.paths,
        dt: m.dt,
        horizon: m.horizon,
        seed: m.seed,
        workers: m.workers,
        scheme: m.scheme.clone(),
        antithetic: m.antithetic,
        no_bridge: m.no_bridge,
        epsilon: m.epsilon,
        barriers: m.barriers.clone(),
        y_cap: m.y_cap,
        phi_cap: m.phi_cap,
        dump: None,
    }
}

/// Runs the CLI on `argv` (including the program name).
pub fn run<I, T>(argv: I) -> RunOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let status = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if status == 0 {
                RunOutput { status, stdout: text, stderr: String::new() }
            } else {
                RunOutput { status, stdout: String::new(), stderr: text }
            };
        }
    };
    match execute(&cli) {
        Ok(out) => out,
        Err(e) => RunOutput { status: 2, stdout: String::new(), stderr: format!("error: {e}\n") },
    }
}
