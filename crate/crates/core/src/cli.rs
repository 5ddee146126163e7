//! Command-line front end.
//!
//! Settings resolve as flag > `LENGLART_SEED` (seed only) > `--config` file >
//! defaults. The defaults reproduce the headline experiments. Exit codes: 0
//! pass, 1 statistical failure, 2 usage error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bdg::{bdg_ratio, BdgError, BdgReport, BmKind, MartingaleSpec};
use crate::constructions::{
    discretize_pair, exp_pair_for, ConstructionError, ExtremalParams, PathSimConfig, Proposal,
    TailMode,
};
use crate::montecarlo::{
    discrete_ratio_experiment, monotone_ratio_experiment, ratio_experiment, EstimatorMethod,
    ExperimentError, RatioEstimate,
};
use crate::oracles::{
    check_moment_identities, constant, full_extremal_sup_moment, gtilde_sup_moment, ConstantKind,
    IdentityReport, MomentLaw,
};
use crate::paths::{PathPair, TimeGrid};
use crate::rng::sample_stream;
use crate::verifier::{check_inequality, PairGenerator, VerifierReport};

pub const DEFAULT_P: f64 = 0.5;
pub const DEFAULT_N: u32 = 40;
pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_BDG_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_DUMP_LEVEL: u32 = 6;
pub const DEFAULT_BDG_STEP: f64 = 1e-3;
pub const MAX_DUMP_ROWS: usize = 10_000;
/// Tolerance for the identities subcommand.
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) | CliError::Io { .. } => 2,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ConstructionError> for CliError {
    fn from(e: ConstructionError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BmArg {
    Fixed,
    Hitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DumpKind {
    /// `(X~, G~)` on `[0, n]`.
    ExpPair,
    /// Discretized pair on `[0, n+1]`.
    Discrete,
    /// Discretized pair followed by a simulated Brownian phase.
    Extremal,
}

fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= 1e15 => Ok(v as usize),
        _ => Err(format!("'{s}' is not a sample count")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "lenglart", version, about = "Monte Carlo checks of Lenglart-type domination inequalities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Moment exponent, in (0,1).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// Horizon of the extremal family.
    #[arg(long, global = true)]
    pub n: Option<u32>,
    /// Dyadic discretization level (step 2^-level).
    #[arg(long, global = true)]
    pub level: Option<u32>,
    /// Monte Carlo sample count; accepts 1e6.
    #[arg(long, global = true, value_parser = parse_count)]
    pub samples: Option<usize>,
    #[arg(long, global = true, env = "LENGLART_SEED")]
    pub seed: Option<u64>,
    /// plain | mom | mom:<blocks>
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// natural | horizon-uniform
    #[arg(long, global = true)]
    pub proposal: Option<String>,
    /// Write the document here and the summary line to stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file with default settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// E[(sup X)^p] / E[(sup G)^p] for the extremal family vs p^-p/(1-p).
    Sharpness,
    /// The same ratio for the pair without Brownian tail vs p^-p.
    MonotoneSharpness,
    /// Runs the checks listed in a suite file (JSON array or JSON lines).
    Verify {
        /// Suite file.
        suite: PathBuf,
    },
    /// Both integral representations of E[Z^p] against the direct moment.
    Identities {
        /// uniform | exp | point:<c> | pareto:<alpha>
        #[arg(long)]
        law: Option<String>,
    },
    /// E[<M>^{q/2}] / E[sup|M|^q] for Brownian motion.
    Bdg {
        #[arg(long, value_enum)]
        kind: Option<BmArg>,
        /// Moment of sup|M|, in (0,2).
        #[arg(long)]
        q: Option<f64>,
        /// Fixed time horizon.
        #[arg(long)]
        t: Option<f64>,
        /// Lower barrier of the exit time, negative.
        #[arg(long, allow_negative_numbers = true)]
        a: Option<f64>,
        /// Upper barrier of the exit time, positive.
        #[arg(long)]
        b: Option<f64>,
        /// Fine simulation step.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Writes one sampled path pair as CSV (t,x,g).
    DumpPaths {
        #[arg(long, value_enum)]
        generator: Option<DumpKind>,
        /// Sample index within the seed's stream family.
        #[arg(long)]
        index: Option<u64>,
    },
}

/// Settings read from `--config`; every field is optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub p: Option<f64>,
    pub n: Option<u32>,
    pub level: Option<u32>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub proposal: Option<String>,
    pub format: Option<Format>,
    pub law: Option<String>,
    pub q: Option<f64>,
    pub t: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub step: Option<f64>,
}

/// Fully resolved settings, embedded in every JSON output. Thread count and
/// output path are not part of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    pub samples: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<EstimatorMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposal: Option<Proposal>,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub law: Option<MomentLaw>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bdg: Option<MartingaleSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<DumpKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a ExperimentConfig,
    result: &'a T,
    pass: bool,
    summary: &'a str,
    timestamp: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SharpnessResult {
    pub ratio: RatioEstimate,
    pub constant_kind: ConstantKind,
    pub constant: f64,
    /// `constant * n / (n+1)`
    pub lower_bound: f64,
    pub numerator_oracle: Option<f64>,
    pub denominator_oracle: Option<f64>,
    pub pass: bool,
}

/// One entry of a verify suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub generator: PairGenerator,
    pub p: f64,
    pub constant: ConstantKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<EstimatorMethod>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub check: CheckSpec,
    pub samples: usize,
    pub seed: u64,
    pub method: EstimatorMethod,
    pub ratio: f64,
    pub report: VerifierReport,
}

/// Parses a suite: a JSON array of checks, or one check object per line.
pub fn parse_suite(text: &str) -> Result<Vec<CheckSpec>, CliError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| CliError::Usage(format!("suite: {e}")));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Usage(format!("suite line {}: {e}", i + 1)))
        })
        .collect()
}

fn usage<E: ToString>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_p(p: f64) -> Result<f64, CliError> {
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(CliError::Usage(format!("p must lie in (0,1), got {p}")))
    }
}

struct Resolved {
    cli: Cli,
    file: FileConfig,
}

impl Resolved {
    fn p(&self) -> Result<f64, CliError> {
        check_p(self.cli.p.or(self.file.p).unwrap_or(DEFAULT_P))
    }

    fn n(&self) -> Result<u32, CliError> {
        let n = self.cli.n.or(self.file.n).unwrap_or(DEFAULT_N);
        if n == 0 {
            return Err(CliError::Usage("n must be >= 1".into()));
        }
        Ok(n)
    }

    fn level(&self) -> Option<u32> {
        self.cli.level.or(self.file.level)
    }

    fn samples(&self, default: usize) -> Result<usize, CliError> {
        let s = self.cli.samples.or(self.file.samples).unwrap_or(default);
        if s == 0 {
            return Err(CliError::Usage("samples must be >= 1".into()));
        }
        Ok(s)
    }

    fn seed(&self) -> u64 {
        self.cli.seed.or(self.file.seed).unwrap_or(DEFAULT_SEED)
    }

    fn method(&self, default: EstimatorMethod) -> Result<EstimatorMethod, CliError> {
        match self.cli.method.as_ref().or(self.file.method.as_ref()) {
            Some(s) => EstimatorMethod::from_str(s).map_err(usage),
            None => Ok(default),
        }
    }

    fn proposal(&self) -> Result<Proposal, CliError> {
        match self.cli.proposal.as_ref().or(self.file.proposal.as_ref()) {
            Some(s) => Proposal::from_str(s).map_err(CliError::Usage),
            None => Ok(Proposal::default()),
        }
    }

    fn format(&self) -> Format {
        self.cli.format.or(self.file.format).unwrap_or(Format::Json)
    }

    fn base(&self, subcommand: &'static str, samples: usize, method: Option<EstimatorMethod>) -> ExperimentConfig {
        ExperimentConfig {
            subcommand,
            p: None,
            n: None,
            level: None,
            samples,
            seed: self.seed(),
            method,
            proposal: None,
            format: self.format(),
            law: None,
            bdg: None,
            generator: None,
            index: None,
        }
    }
}

/// What a subcommand produced.
pub struct Output {
    pub pass: bool,
    pub summary: String,
    pub json: serde_json::Value,
    pub csv: Option<String>,
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

fn envelope<T: Serialize>(config: &ExperimentConfig, result: &T, pass: bool, summary: &str) -> serde_json::Value {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    serde_json::to_value(Envelope {
        config,
        result,
        pass,
        summary,
        timestamp,
    })
    .expect("serializable")
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn ratio_csv(cfg: &ExperimentConfig, r: &SharpnessResult) -> String {
    let f = |v: f64| format!("{v}");
    csv_text(
        &[
            "p", "n", "level", "samples", "seed", "method", "numerator", "numerator_hw", "denominator",
            "denominator_hw", "ratio", "ci_low", "ci_high", "constant", "lower_bound", "pass",
        ],
        &[vec![
            f(cfg.p.unwrap_or(f64::NAN)),
            cfg.n.map(|n| n.to_string()).unwrap_or_default(),
            cfg.level.map(|l| l.to_string()).unwrap_or_default(),
            cfg.samples.to_string(),
            cfg.seed.to_string(),
            cfg.method.map(|m| m.to_string()).unwrap_or_default(),
            f(r.ratio.numerator.value),
            f(r.ratio.numerator.halfwidth),
            f(r.ratio.denominator.value),
            f(r.ratio.denominator.halfwidth),
            f(r.ratio.ratio),
            f(r.ratio.ci_low),
            f(r.ratio.ci_high),
            f(r.constant),
            f(r.lower_bound),
            r.pass.to_string(),
        ]],
    )
}

fn run_sharpness(res: &Resolved, monotone: bool) -> Result<Output, CliError> {
    let p = res.p()?;
    let n = res.n()?;
    let samples = res.samples(DEFAULT_SAMPLES)?;
    let method = res.method(EstimatorMethod::default_for(p))?;
    let proposal = res.proposal()?;
    let seed = res.seed();
    let level = if monotone { None } else { res.level() };
    let name = if monotone { "monotone-sharpness" } else { "sharpness" };
    let mut cfg = res.base(name, samples, Some(method));
    cfg.p = Some(p);
    cfg.n = Some(n);
    cfg.level = level;
    cfg.proposal = Some(proposal);

    let params = ExtremalParams::new(p, n, seed)?;
    let kind = if monotone {
        ConstantKind::Monotone
    } else {
        ConstantKind::Lenglart
    };
    let c = constant(kind, p).map_err(usage)?;
    let ratio = match (monotone, level) {
        (true, _) => monotone_ratio_experiment(p, n, samples, method, seed, proposal)?,
        (false, None) => ratio_experiment(&params, samples, method, proposal)?,
        (false, Some(l)) => discrete_ratio_experiment(&params, l, samples, method, proposal)?,
    };
    let lower_bound = c * n as f64 / (n as f64 + 1.0);
    // The finite-n lower bound is proved for the continuous family only.
    let pass = ratio.ci_low <= c && (level.is_some() || ratio.ci_high >= lower_bound);
    let (numerator_oracle, denominator_oracle) = if monotone {
        (Some(n as f64), gtilde_sup_moment(p, n as f64).ok())
    } else if level.is_none() {
        (full_extremal_sup_moment(p, n).ok(), gtilde_sup_moment(p, n as f64).ok())
    } else {
        (full_extremal_sup_moment(p, n).ok(), None)
    };
    let result = SharpnessResult {
        ratio,
        constant_kind: kind,
        constant: c,
        lower_bound,
        numerator_oracle,
        denominator_oracle,
        pass,
    };
    let cname = if monotone { "p^-p" } else { "c_p" };
    let level_note = level.map(|l| format!(" level={l}")).unwrap_or_default();
    let summary = format!(
        "{name} p={p} n={n}{level_note}: ratio {:.6} CI [{:.6}, {:.6}]; {cname} = {c:.7}, {cname}*n/(n+1) = {lower_bound:.7}: {}",
        ratio.ratio,
        ratio.ci_low,
        ratio.ci_high,
        verdict(pass)
    );
    let csv = ratio_csv(&cfg, &result);
    Ok(Output {
        pass,
        json: envelope(&cfg, &result, pass, &summary),
        summary,
        csv: Some(csv),
    })
}

fn run_verify(res: &Resolved, suite: &Path) -> Result<Output, CliError> {
    let checks = parse_suite(&read_file(suite)?)?;
    if checks.is_empty() {
        return Err(CliError::Usage(format!("suite {} holds no checks", suite.display())));
    }
    let samples = res.samples(DEFAULT_SAMPLES)?;
    // each check resolves its own method unless one is forced
    let forced = match res.cli.method.as_ref().or(res.file.method.as_ref()) {
        Some(_) => Some(res.method(EstimatorMethod::Plain)?),
        None => None,
    };
    let cfg = res.base("verify", samples, forced);
    let mut outcomes = Vec::with_capacity(checks.len());
    for check in checks {
        check_p(check.p)?;
        let samples = check.samples.unwrap_or(samples);
        let seed = check.seed.unwrap_or(cfg.seed);
        let method = match check.method {
            Some(m) => m,
            None => forced.unwrap_or(EstimatorMethod::default_for(check.p)),
        };
        let report = check_inequality(&check.generator, check.p, check.constant, samples, method, seed)
            .map_err(usage)?;
        outcomes.push(CheckOutcome {
            ratio: report.ratio(),
            check,
            samples,
            seed,
            method,
            report,
        });
    }
    let passed = outcomes.iter().filter(|o| o.report.pass).count();
    let pass = passed == outcomes.len();
    let summary = format!("verify: {passed}/{} checks pass: {}", outcomes.len(), verdict(pass));
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            vec![
                i.to_string(),
                o.check.name.clone().unwrap_or_default(),
                o.check.generator.name().to_string(),
                o.check.p.to_string(),
                serde_json::to_value(o.check.constant)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                o.report.lhs.value.to_string(),
                o.report.lhs.halfwidth.to_string(),
                o.report.rhs.value.to_string(),
                o.report.rhs.halfwidth.to_string(),
                o.report.rhs_constant.to_string(),
                o.report.margin.to_string(),
                o.report.pass.to_string(),
            ]
        })
        .collect();
    let csv = csv_text(
        &[
            "index", "name", "generator", "p", "constant_kind", "lhs", "lhs_hw", "rhs", "rhs_hw",
            "rhs_constant", "margin", "pass",
        ],
        &rows,
    );
    Ok(Output {
        pass,
        json: envelope(&cfg, &outcomes, pass, &summary),
        summary,
        csv: Some(csv),
    })
}

fn run_identities(res: &Resolved, law: Option<&String>) -> Result<Output, CliError> {
    let p = res.p()?;
    let law_text = law.or(res.file.law.as_ref()).map(String::as_str).unwrap_or("exp");
    let law = MomentLaw::from_str(law_text).map_err(CliError::Usage)?;
    let report: IdentityReport = check_moment_identities(law, p).map_err(usage)?;
    let mut cfg = res.base("identities", 1, None);
    cfg.p = Some(p);
    cfg.law = Some(law);
    let pass = report.max_discrepancy <= IDENTITY_TOL;
    let summary = format!(
        "identities {law_text} p={p}: direct {:.10}, tail {:.10}, truncated-mean {:.10}; max discrepancy {:.2e}: {}",
        report.direct,
        report.tail_integral,
        report.truncated_mean_integral,
        report.max_discrepancy,
        verdict(pass)
    );
    let csv = csv_text(
        &["law", "p", "direct", "tail_integral", "truncated_mean_integral", "max_discrepancy"],
        &[vec![
            law_text.to_string(),
            p.to_string(),
            report.direct.to_string(),
            report.tail_integral.to_string(),
            report.truncated_mean_integral.to_string(),
            report.max_discrepancy.to_string(),
        ]],
    );
    Ok(Output {
        pass,
        json: envelope(&cfg, &report, pass, &summary),
        summary,
        csv: Some(csv),
    })
}

struct BdgArgs {
    kind: Option<BmArg>,
    q: Option<f64>,
    t: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    step: Option<f64>,
}

fn run_bdg(res: &Resolved, args: BdgArgs) -> Result<Output, CliError> {
    let f = &res.file;
    let q = args.q.or(f.q).unwrap_or(1.0);
    let step = args.step.or(f.step).unwrap_or(DEFAULT_BDG_STEP);
    let kind = match args.kind {
        Some(BmArg::Hitting) => BmKind::Hitting {
            a: args.a.or(f.a).unwrap_or(-1.0),
            b: args.b.or(f.b).unwrap_or(1.0),
        },
        Some(BmArg::Fixed) | None => BmKind::FixedTime {
            t: args.t.or(f.t).unwrap_or(1.0),
        },
    };
    let spec = MartingaleSpec { kind, step, q };
    spec.validate().map_err(usage)?;
    let samples = res.samples(DEFAULT_BDG_SAMPLES)?;
    let method = res.method(EstimatorMethod::Plain)?;
    let mut cfg = res.base("bdg", samples, Some(method));
    cfg.bdg = Some(spec);
    let report: BdgReport = match bdg_ratio(&spec, samples, method, cfg.seed) {
        Ok(r) => r,
        Err(e @ BdgError::StepTooCoarse { .. }) => return Err(CliError::Failure(e.to_string())),
        Err(e) => return Err(usage(e)),
    };
    let pass = report.monotone_bound_holds;
    let gaps: Vec<String> = report
        .gaps
        .iter()
        .map(|g| format!("{} {:.4} (gap {:+.4})", g.name, g.constant, g.gap))
        .collect();
    let summary = format!(
        "bdg q={q}: ratio {:.6} +- {:.6}; {}; step bias {:.2e}: {}",
        report.ratio.ratio,
        report.ratio.sigma(),
        gaps.join(", "),
        report.step_bias,
        verdict(pass)
    );
    let rows: Vec<Vec<String>> = report
        .gaps
        .iter()
        .map(|g| {
            vec![
                g.name.clone(),
                g.constant.to_string(),
                report.ratio.ratio.to_string(),
                g.gap.to_string(),
            ]
        })
        .collect();
    let csv = csv_text(&["name", "constant", "ratio", "gap"], &rows);
    Ok(Output {
        pass,
        json: envelope(&cfg, &report, pass, &summary),
        summary,
        csv: Some(csv),
    })
}

/// Builds the pair written by `dump-paths`.
pub fn dump_pair(kind: DumpKind, p: f64, n: u32, level: u32, seed: u64, index: u64) -> Result<PathPair, CliError> {
    let params = ExtremalParams::new(p, n, seed)?;
    let h = (-(level as f64)).exp2();
    let mut rng = sample_stream(seed, index);
    let rows_needed = |horizon: f64| (horizon / h).round() as usize + 1;
    let too_many = |rows: usize| {
        CliError::Usage(format!(
            "{rows} rows exceed the dump limit of {MAX_DUMP_ROWS}; lower --level or --n"
        ))
    };
    match kind {
        DumpKind::ExpPair => {
            let rows = rows_needed(n as f64);
            if rows > MAX_DUMP_ROWS {
                return Err(too_many(rows));
            }
            let grid = TimeGrid::dyadic(level, n as f64).map_err(usage)?;
            let z = crate::rng::exp1(&mut rng);
            Ok(exp_pair_for(p, z, &grid)?)
        }
        DumpKind::Discrete | DumpKind::Extremal => {
            let rows = rows_needed(n as f64 + 1.0);
            if rows > MAX_DUMP_ROWS {
                return Err(too_many(rows));
            }
            let tail = if kind == DumpKind::Extremal {
                TailMode::PathSim(PathSimConfig {
                    step: h,
                    max_time: (MAX_DUMP_ROWS - rows) as f64 * h,
                })
            } else {
                TailMode::ExactLaw
            };
            let dp = discretize_pair(&params, level, tail, Proposal::Natural, &mut rng)?;
            Ok(dp.to_path_pair()?)
        }
    }
}

fn run_dump(res: &Resolved, generator: Option<DumpKind>, index: Option<u64>) -> Result<Output, CliError> {
    let p = res.p()?;
    let n = res.n()?;
    let level = res.level().unwrap_or(DEFAULT_DUMP_LEVEL);
    let kind = generator.unwrap_or(DumpKind::ExpPair);
    let index = index.unwrap_or(0);
    let mut cfg = res.base("dump-paths", 1, None);
    cfg.p = Some(p);
    cfg.n = Some(n);
    cfg.level = Some(level);
    cfg.generator = Some(kind);
    cfg.index = Some(index);
    cfg.format = Format::Csv;
    let pair = dump_pair(kind, p, n, level, cfg.seed, index)?;
    let mut buf = Vec::new();
    pair.write_csv(&mut buf).map_err(usage)?;
    let summary = format!(
        "dump-paths {kind:?} p={p} n={n} level={level}: {} rows, sup x {:.6e}, sup g {:.6e}",
        pair.len(),
        pair.sup().sup_x,
        pair.sup().sup_g
    );
    Ok(Output {
        pass: true,
        json: envelope(&cfg, &pair.sup(), true, &summary),
        summary,
        csv: Some(String::from_utf8(buf).expect("utf8")),
    })
}

fn execute(res: &Resolved) -> Result<Output, CliError> {
    match &res.cli.command {
        Command::Sharpness => run_sharpness(res, false),
        Command::MonotoneSharpness => run_sharpness(res, true),
        Command::Verify { suite } => run_verify(res, suite),
        Command::Identities { law } => run_identities(res, law.as_ref()),
        Command::Bdg { kind, q, t, a, b, step } => run_bdg(
            res,
            BdgArgs {
                kind: *kind,
                q: *q,
                t: *t,
                a: *a,
                b: *b,
                step: *step,
            },
        ),
        Command::DumpPaths { generator, index } => run_dump(res, *generator, *index),
    }
}

/// Runs a parsed command line and writes its document; returns whether the
/// run passed.
pub fn run_cli(cli: Cli) -> Result<bool, CliError> {
    let file = match &cli.config {
        Some(path) => serde_json::from_str::<FileConfig>(&read_file(path)?)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?,
        None => FileConfig::default(),
    };
    let res = Resolved { cli, file };
    let out = match res.cli.threads {
        Some(0) => return Err(CliError::Usage("threads must be >= 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(usage)?
            .install(|| execute(&res))?,
        None => execute(&res)?,
    };
    let dump = matches!(res.cli.command, Command::DumpPaths { .. });
    let document = if dump || res.format() == Format::Csv {
        out.csv.clone().unwrap_or_default()
    } else {
        let mut s = serde_json::to_string_pretty(&out.json).expect("serializable");
        s.push('\n');
        s
    };
    match &res.cli.output {
        Some(path) => {
            fs::write(path, document).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            println!("{}", out.summary);
        }
        None => {
            eprintln!("{}", out.summary);
            io::stdout()
                .write_all(document.as_bytes())
                .map_err(|source| CliError::Io {
                    path: "stdout".into(),
                    source,
                })?;
        }
    }
    Ok(out.pass)
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_cli(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("lenglart").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn sample_counts_accept_scientific_notation() {
        assert_eq!(parse_count("1000000"), Ok(1_000_000));
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn bad_p_is_usage_error() {
        let err = run_cli(parse(&["sharpness", "--p", "1.5", "--samples", "100"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("p must lie in (0,1)"));
    }

    #[test]
    fn suite_formats() {
        let line = r#"{"generator":{"kind":"compensated_bernoulli","jump":{"law":"constant","value":1},"steps":4},"p":0.5,"constant":"lenglart","samples":10}"#;
        let lines = format!("{line}\n\n# comment\n{line}\n");
        assert_eq!(parse_suite(&lines).unwrap().len(), 2);
        let array = format!("[{line},{line},{line}]");
        assert_eq!(parse_suite(&array).unwrap().len(), 3);
        assert!(parse_suite("{\"p\":0.5}").is_err());
    }

    #[test]
    fn dump_limit() {
        let err = dump_pair(DumpKind::ExpPair, 0.5, 40, 10, 1, 0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let pair = dump_pair(DumpKind::ExpPair, 0.5, 5, 4, 1, 0).unwrap();
        assert_eq!(pair.len(), 81);
        let pair = dump_pair(DumpKind::Extremal, 0.5, 5, 4, 1, 3).unwrap();
        assert!(pair.len() <= MAX_DUMP_ROWS);
    }

    #[test]
    fn config_precedence() {
        let res = Resolved {
            cli: parse(&["sharpness", "--n", "12"]),
            file: FileConfig {
                n: Some(3),
                p: Some(0.3),
                ..FileConfig::default()
            },
        };
        assert_eq!(res.n().unwrap(), 12);
        assert_eq!(res.p().unwrap(), 0.3);
        assert_eq!(res.samples(DEFAULT_SAMPLES).unwrap(), DEFAULT_SAMPLES);
    }
}
