//! Command-line surface: `sweep`, `gamma-range`, `train`, `advantage` and
//! `eval-metrics`.
//!
//! [`cli_dispatch`] takes its streams as arguments so the whole surface can
//! be driven in-process.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::advantage::{
    grpo_advantages, net_right_advantage, ucpo_advantages, AdvantageResult, Method,
};
use crate::config::ExperimentConfig;
use crate::dura::{self, DuraParams};
use crate::error::{Error, Result};
use crate::metrics::{self, EvalCounts};
use crate::rollout::{RewardScheme, RolloutGroup};
use crate::sim::{self, TaskBank, TrajectoryRecord};
use crate::sweep;

#[derive(Debug, Parser)]
#[command(name = "ucpo", version, about = "Uncertainty-aware advantage shaping toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Advantage landscape over every composition of a group.
    Sweep(SweepArgs),
    /// Raw gain of every filtered-in composition of a group.
    GammaRange(GammaRangeArgs),
    /// Run the policy-gradient simulator.
    Train(TrainArgs),
    /// Score groups read as JSON lines from stdin.
    Advantage,
    /// PAQ and F1 from counts, or trailing means of a JSONL trajectory.
    EvalMetrics(EvalArgs),
}

#[derive(Debug, Args)]
struct DuraArgs {
    /// Suppression weight.
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
}

impl DuraArgs {
    fn apply(&self, mut p: DuraParams) -> DuraParams {
        if let Some(w) = self.w {
            p.w = w;
        }
        if let Some(eps) = self.eps {
            p.eps = eps;
        }
        p
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(short = 'g', long, default_value_t = 8)]
    group_size: usize,
    #[arg(long, value_delimiter = ',', default_value = "grpo-uc,ucpo")]
    methods: Vec<Method>,
    /// `right,wrong,uncertain`, `binary` or `canonical`.
    #[arg(long, default_value = "1,0,0.8")]
    scheme: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Evaluate on the real-valued ratio grid `i / density` instead.
    #[arg(long)]
    grid_density: Option<usize>,
    #[command(flatten)]
    dura: DuraArgs,
}

#[derive(Debug, Args)]
struct GammaRangeArgs {
    #[arg(short = 'g', long, default_value_t = 8)]
    group_size: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    dura: DuraArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrajectoryFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(short = 'g', long)]
    group_size: Option<usize>,
    #[arg(long)]
    scheme: Option<String>,
    /// Replace the task bank with a single bucket of this solve probability.
    #[arg(long)]
    solve_prob: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    kl_beta: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    fusion: Option<bool>,
    #[arg(long)]
    tanh: Option<bool>,
    #[arg(long)]
    capability_growth: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TrajectoryFormat::Csv)]
    format: TrajectoryFormat,
    /// Print the resolved config and exit.
    #[arg(long)]
    emit_config: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, requires_all = ["hal", "unc"], conflicts_with = "trajectory")]
    acc: Option<f64>,
    #[arg(long)]
    hal: Option<f64>,
    #[arg(long)]
    unc: Option<f64>,
    /// JSONL trajectory written by `train --format jsonl`.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    window: usize,
}

/// Scheme given as `[right, wrong, uncertain]`, a `right,wrong,uncertain`
/// string, a shorthand, or a `{right, wrong, uncertain}` object.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SchemeSpec {
    Triple([f64; 3]),
    Text(String),
    Object(RewardScheme),
}

impl SchemeSpec {
    fn resolve(self) -> Result<RewardScheme> {
        let scheme = match self {
            SchemeSpec::Triple([right, wrong, uncertain]) => RewardScheme {
                right,
                wrong,
                uncertain,
            },
            SchemeSpec::Text(s) => s.parse()?,
            SchemeSpec::Object(s) => s,
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

/// One line of `advantage` input.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdvantageRequest {
    outcomes: String,
    #[serde(default)]
    scheme: Option<SchemeSpec>,
    #[serde(default)]
    method: Option<Method>,
    /// Gain override for UCPO; computed from the composition otherwise.
    #[serde(default)]
    gamma: Option<f64>,
    /// Batch mean for fusion, when fusion is enabled.
    #[serde(default)]
    batch_mean: Option<f64>,
    #[serde(default)]
    dura: Option<DuraParams>,
}

#[derive(Debug, Serialize)]
struct AdvantageResponse {
    #[serde(flatten)]
    result: AdvantageResult,
    net_right_advantage: f64,
}

fn score_request(req: AdvantageRequest) -> Result<AdvantageResponse> {
    let method = req.method.unwrap_or(Method::Grpo);
    let scheme = match req.scheme {
        Some(s) => s.resolve()?,
        None if method == Method::Grpo => RewardScheme::standard_binary(),
        None => RewardScheme::canonical_ternary(),
    };
    let scheme = match method {
        Method::Grpo => scheme.to_binary(),
        Method::GrpoUc if !scheme.is_ternary() => {
            return Err(Error::Config("grpo-uc needs a ternary scheme".into()))
        }
        _ => scheme,
    };
    let group = RolloutGroup::parse(&req.outcomes, scheme)?;
    let params = req.dura.unwrap_or_default();
    params.validate()?;
    let result = match method {
        Method::Grpo | Method::GrpoUc => grpo_advantages(&group)?,
        Method::Ucpo => {
            let gain = match req.gamma {
                Some(g) => g,
                None => {
                    dura::gamma_pipeline(&group.composition(), req.batch_mean.unwrap_or(0.0), &params)
                        .gamma_final
                }
            };
            ucpo_advantages(&group, gain, params.eps)?
        }
    };
    Ok(AdvantageResponse {
        net_right_advantage: net_right_advantage(&result, &group),
        result,
    })
}

/// Scores every JSON line of `input`. Bad lines are reported on `err` with
/// their 1-based line number; the remaining lines are still processed.
pub fn run_advantage_stream<R: BufRead, W: Write, E: Write>(
    input: R,
    mut out: W,
    mut err: E,
) -> Result<usize> {
    let mut failures = 0;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let outcome = serde_json::from_str::<AdvantageRequest>(&line)
            .map_err(Error::from)
            .and_then(score_request);
        match outcome {
            Ok(resp) => {
                serde_json::to_writer(&mut out, &resp)?;
                out.write_all(b"\n")?;
            }
            Err(e) => {
                failures += 1;
                let diag = Error::Record {
                    line: lineno,
                    message: e.to_string(),
                };
                writeln!(err, "advantage: {diag}")?;
            }
        }
    }
    out.flush()?;
    Ok(failures)
}

fn open_output<'a, W: Write + 'a>(path: Option<&Path>, stdout: W) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
            Box::new(std::io::BufWriter::new(f))
        }
        None => Box::new(stdout),
    })
}

fn run_sweep<W: Write>(args: &SweepArgs, stdout: W) -> Result<()> {
    let scheme: RewardScheme = args.scheme.parse()?;
    let params = args.dura.apply(DuraParams::default());
    params.validate()?;
    let out = open_output(args.output.as_deref(), stdout)?;
    match args.grid_density {
        Some(d) => {
            let pts = sweep::sweep_continuous(args.group_size, &scheme, &args.methods, &params, d)?;
            sweep::write_continuous_csv(&pts, out)
        }
        None => {
            let pts = sweep::sweep(args.group_size, &scheme, &args.methods, &params)?;
            sweep::write_sweep_csv(&pts, out)
        }
    }
}

fn run_gamma_range<W: Write>(args: &GammaRangeArgs, stdout: W) -> Result<()> {
    let params = args.dura.apply(DuraParams::default());
    params.validate()?;
    let records = dura::enumerate_gamma_distribution(args.group_size, &params);
    dura::write_gamma_csv(&records, open_output(args.output.as_deref(), stdout)?)
}

fn resolve_train_config(args: &TrainArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let sim = &mut cfg.sim;
    if let Some(m) = args.method {
        sim.method = m;
    }
    if let Some(s) = args.seed {
        sim.seed = s;
    }
    if let Some(s) = args.steps {
        sim.steps = s;
    }
    if let Some(lr) = args.lr {
        sim.lr = lr;
    }
    if let Some(g) = args.group_size {
        sim.group_size = g;
    }
    if let Some(s) = &args.scheme {
        sim.scheme = s.parse()?;
    }
    if let Some(b) = args.kl_beta {
        sim.kl_beta = b;
    }
    if let Some(e) = args.epochs {
        sim.epochs = e;
    }
    if let Some(f) = args.fusion {
        sim.dura.enable_fusion = f;
    }
    if let Some(t) = args.tanh {
        sim.dura.enable_tanh = t;
    }
    if let Some(r) = args.capability_growth {
        sim.capability_growth = Some(r);
    }
    if let Some(p) = args.solve_prob {
        let batch = cfg.task_bank.batch_size;
        cfg.task_bank = TaskBank {
            batch_size: batch,
            ..TaskBank::single(p)
        };
    }
    if let Some(b) = args.batch_size {
        cfg.task_bank.batch_size = b;
    }
    if let Some(o) = &args.output {
        cfg.output.trajectory = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_train<W: Write>(args: &TrainArgs, mut stdout: W) -> Result<()> {
    let cfg = resolve_train_config(args)?;
    if args.emit_config {
        stdout.write_all(cfg.to_toml()?.as_bytes())?;
        return Ok(());
    }
    let records = sim::run(&cfg.sim, &cfg.task_bank)?;
    let out = open_output(cfg.output.trajectory.as_deref(), stdout)?;
    match args.format {
        TrajectoryFormat::Csv => sim::write_trajectory_csv(&records, out),
        TrajectoryFormat::Jsonl => sim::write_trajectory_jsonl(&records, out),
    }
}

#[derive(Debug, Serialize)]
struct MetricsReport {
    acc: f64,
    hal: f64,
    unc: f64,
    paq: Option<f64>,
    f1: f64,
}

fn read_trajectory_jsonl(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Record {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn run_eval<W: Write>(args: &EvalArgs, mut stdout: W) -> Result<()> {
    if let Some(path) = &args.trajectory {
        let records = read_trajectory_jsonl(path)?;
        let summary = metrics::aggregate(&records, args.window)?;
        serde_json::to_writer(&mut stdout, &summary)?;
    } else {
        let (Some(acc), Some(hal), Some(unc)) = (args.acc, args.hal, args.unc) else {
            return Err(Error::InvalidInput(
                "pass --acc, --hal and --unc, or --trajectory".into(),
            ));
        };
        let counts = EvalCounts::new(acc, hal, unc)?;
        let report = MetricsReport {
            acc,
            hal,
            unc,
            paq: metrics::paq(&counts),
            f1: metrics::f1(&counts),
        };
        serde_json::to_writer(&mut stdout, &report)?;
    }
    stdout.write_all(b"\n")?;
    stdout.flush()?;
    Ok(())
}

/// Parses `argv` (including the program name) and runs the subcommand.
/// Returns the process exit status.
pub fn cli_dispatch<I, T, R, W, E>(argv: I, stdin: R, mut stdout: W, mut stderr: E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    R: BufRead,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let (stage, outcome) = match &cli.command {
        Command::Sweep(a) => ("sweep", run_sweep(a, &mut stdout)),
        Command::GammaRange(a) => ("gamma-range", run_gamma_range(a, &mut stdout)),
        Command::Train(a) => ("train", run_train(a, &mut stdout)),
        Command::EvalMetrics(a) => ("eval-metrics", run_eval(a, &mut stdout)),
        Command::Advantage => {
            match run_advantage_stream(stdin, &mut stdout, &mut stderr) {
                Ok(0) => ("advantage", Ok(())),
                Ok(n) => ("advantage", Err(Error::InvalidInput(format!("{n} malformed record(s)")))),
                Err(e) => ("advantage", Err(e)),
            }
        }
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{stage}: {e}");
            1
        }
    }
}
