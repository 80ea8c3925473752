//! `oqp`: rate functions, delay exponents, rate/duration optimization and
//! queue simulation from the command line.

mod csv;
mod sweep;

use std::fmt;
use std::fs;
use std::io::{self, Read as _, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oqp_core::queue_sim::{
    exact_discrete_oracle, lemma3_check, simulate, simulate_discrete, DiscretePmf, Lemma3Report,
    OracleReport, SimConfig, SimReport,
};
use oqp_core::{
    classify_and_bound, exponent_exact, optimize_case1_with, optimize_coop, ArrivalModel64,
    ChannelModel64, Classification, Classification64, ExponentMode, ExponentQuery,
    OptimizationResult64, PiecewiseDmt, ScalingRegime64,
};
use rayon::prelude::*;
use serde::Serialize;

use sweep::{SweepParam, SweepRecord, SweepSpec};

#[derive(Parser, Debug)]
#[command(
    name = "oqp",
    version,
    about = "Delay-limited bursty traffic over outage-limited channels"
)]
struct Cli {
    /// Worker threads for sweeps and replications.
    #[arg(long, env = "OQP_JOBS", global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate Λ, Λ*, δ_r or the burstiness of a CPE source.
    Rate(RateArgs),
    /// Exact and relaxed delay exponents at one (r, T, D).
    Exponent(ExponentArgs),
    /// Balance the delay and channel exponents (linear scaling regime).
    Optimize(OptimizeArgs),
    /// Route a scaling regime to the optimizer or to its upper bound.
    Classify(ClassifyArgs),
    /// Monte Carlo queue simulation, or the exact oracle for integer arrivals.
    Simulate(SimulateArgs),
    /// Reparse JSON produced by this tool and check it survives a round trip.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// CPE source as `lambda,mu`.
    #[arg(long, value_parser = parse_pair_f64)]
    cpe: (f64, f64),
}

impl ModelArgs {
    fn model(&self) -> Result<ArrivalModel64, CliError> {
        Ok(ArrivalModel64::cpe(self.cpe.0, self.cpe.1)?)
    }
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct ChannelArgs {
    /// SISO fast fading, d = T(1 − r).
    #[arg(long)]
    siso: bool,
    /// Quasi-static MIMO as `n_t,n_r`.
    #[arg(long, value_parser = parse_pair_u32)]
    mimo: Option<(u32, u32)>,
    /// Orthogonal amplify-and-forward with this many relays (the largest tried by `optimize`).
    #[arg(long)]
    coop: Option<u32>,
    /// Piecewise-linear tradeoff from a JSON file.
    #[arg(long = "dmt-file")]
    dmt_file: Option<PathBuf>,
}

impl ChannelArgs {
    fn channel(&self) -> Result<ChannelModel64, CliError> {
        if self.siso {
            Ok(ChannelModel64::SisoFastFading)
        } else if let Some((n_t, n_r)) = self.mimo {
            Ok(ChannelModel64::mimo(n_t, n_r)?)
        } else if let Some(v) = self.coop {
            Ok(ChannelModel64::coop(v)?)
        } else if let Some(path) = &self.dmt_file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok(ChannelModel64::PiecewiseLinear(PiecewiseDmt::from_json(
                &text,
            )?))
        } else {
            Err(CliError::Usage("a channel flag is required".into()))
        }
    }
}

#[derive(Args, Debug)]
struct ModeArgs {
    /// Use the integer-constrained exponent (default).
    #[arg(long, conflicts_with = "relaxed")]
    exact: bool,
    /// Use the relaxed exponent δ_r r (D + 1 − 2T).
    #[arg(long)]
    relaxed: bool,
}

impl ModeArgs {
    fn mode(&self) -> ExponentMode {
        if self.relaxed {
            ExponentMode::Relaxed
        } else {
            ExponentMode::Exact
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false, id = "rate_query")]
struct RateQuery {
    /// Log-MGF Λ(θ).
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    /// Rate function Λ*(x).
    #[arg(long)]
    x: Option<f64>,
    /// δ_r = sup{θ : Λ(θ) < θ r}.
    #[arg(long = "delta-r")]
    delta_r: Option<f64>,
    /// Burstiness √(2/(λ μ g)) at this g(N).
    #[arg(long)]
    burstiness: Option<f64>,
}

#[derive(Args, Debug)]
struct RateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    query: RateQuery,
}

#[derive(Args, Debug)]
struct ExponentArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    r: f64,
    #[arg(long = "T")]
    t: u32,
    #[arg(long = "D")]
    d: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long = "D")]
    d: u32,
    #[command(flatten)]
    mode: ModeArgs,
    /// Restrict the search to one coding duration.
    #[arg(long = "fixed-T")]
    fixed_t: Option<u32>,
    /// Emit the per-duration table instead of the summary row.
    #[arg(long = "per-t")]
    per_t: bool,
    /// `param=v1,v2,...` or `param=start:stop:count`; param ∈ {lambda, mu, D, T, v}.
    #[arg(long)]
    sweep: Option<SweepSpec>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    /// `linear:<gamma>`, `sublinear` or `superlinear`.
    #[arg(long)]
    regime: ScalingRegime64,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "D")]
    d: u32,
    #[command(flatten)]
    mode: ModeArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// CPE source as `lambda,mu` (Monte Carlo on the scaled source).
    #[arg(long, value_parser = parse_pair_f64, required_unless_present = "pmf")]
    cpe: Option<(f64, f64)>,
    /// Integer arrival pmf as `value:prob,...`.
    #[arg(long, conflicts_with = "cpe")]
    pmf: Option<String>,
    /// Iterate the exact queue law instead of sampling (needs --pmf).
    #[arg(long, requires = "pmf")]
    oracle: bool,
    /// Check the single-phase overflow reduction instead of reporting p̂ (needs --cpe).
    #[arg(long, requires = "cpe")]
    lemma3: bool,
    /// Scale N = log SNR.
    #[arg(long = "N")]
    n: Option<f64>,
    /// g(N): `linear` for g(N) = N, or a positive number.
    #[arg(long, default_value = "linear")]
    g: String,
    /// Multiplexing gain; service is rN per slot.
    #[arg(long)]
    r: Option<f64>,
    /// Integer service per slot for --pmf runs.
    #[arg(long = "R")]
    service: Option<u64>,
    #[arg(long = "T")]
    t: u32,
    #[arg(long = "D")]
    d: u32,
    /// Measured slots, split across replications and rounded up to whole periods.
    #[arg(long, default_value = "1e6", value_parser = parse_count)]
    slots: u64,
    /// Warm-up slots per replication; defaults to 100·T·⌈1/(r − λ)⌉.
    #[arg(long, value_parser = parse_count)]
    warmup: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    replications: u32,
    /// Largest queue state for --oracle.
    #[arg(long = "q-cap", default_value_t = 10_000)]
    q_cap: usize,
    /// `param=values`; param ∈ {lambda, mu, D, r, T}. CPE Monte Carlo only.
    #[arg(long)]
    sweep: Option<SweepSpec>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Optimize,
    OptimizeSweep,
    Classify,
    Simulate,
    SimulateSweep,
    Oracle,
    Lemma3,
    Exponent,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// JSON file; stdin when absent.
    file: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Core(oqp_core::Error),
    Usage(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => e.exit_code() as u8,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<oqp_core::Error> for CliError {
    fn from(e: oqp_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String>
where
    T::Err: fmt::Display,
{
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated values, got `{s}`"))?;
    let a = a.trim().parse::<T>().map_err(|e| format!("`{a}`: {e}"))?;
    let b = b.trim().parse::<T>().map_err(|e| format!("`{b}`: {e}"))?;
    Ok((a, b))
}

fn parse_pair_f64(s: &str) -> Result<(f64, f64), String> {
    parse_pair(s)
}

fn parse_pair_u32(s: &str) -> Result<(u32, u32), String> {
    parse_pair(s)
}

/// Accepts `1000000` as well as `1e6`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|e| format!("`{s}`: {e}"))?;
    if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 {
        Ok(v as u64)
    } else {
        Err(format!("`{s}` is not a non-negative integer"))
    }
}

fn emit(output: &OutputArgs, text: &str) -> Result<(), CliError> {
    match &output.output {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn run_rate(args: &RateArgs) -> Result<(), CliError> {
    let model = args.model.model()?;
    let q = &args.query;
    let value = if let Some(theta) = q.theta {
        model.log_mgf(theta)
    } else if let Some(x) = q.x {
        model.conjugate(x)?
    } else if let Some(r) = q.delta_r {
        model.delta_r(r)?
    } else if let Some(g) = q.burstiness {
        model.burstiness(g)?
    } else {
        return Err(CliError::Usage(
            "one of --theta, --x, --delta-r, --burstiness is required".into(),
        ));
    };
    println!("{}", csv::num(value));
    Ok(())
}

#[derive(Serialize, serde::Deserialize, PartialEq, Debug)]
struct ExponentRecord {
    r: f64,
    t: u32,
    d: u32,
    k: u32,
    i_exact: f64,
    t_argmin: u64,
    i_relaxed: f64,
}

fn run_exponent(args: &ExponentArgs) -> Result<(), CliError> {
    let model = args.model.model()?;
    let res = exponent_exact(&model, &ExponentQuery::new(args.r, args.t, args.d))?;
    let rec = ExponentRecord {
        r: args.r,
        t: args.t,
        d: args.d,
        k: res.k,
        i_exact: res.i_exact,
        t_argmin: res.t_argmin,
        i_relaxed: res.i_relaxed,
    };
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Json => json(&rec),
        Format::Csv => csv::table(
            "r,T,D,k,i_exact,t_argmin,i_relaxed",
            &[vec![
                csv::num(rec.r),
                rec.t.to_string(),
                rec.d.to_string(),
                rec.k.to_string(),
                csv::num(rec.i_exact),
                rec.t_argmin.to_string(),
                csv::num(rec.i_relaxed),
            ]],
        ),
    };
    emit(&args.output, &text)
}

const SUMMARY_HEADER: &str = "d_star,r_star,t_star,v_star,d_ir,r_ir,t_ir,v_ir";
const PER_T_HEADER: &str = "T,v,r_star,exponent,gamma_I,d_ch,bracket_lo,bracket_hi";

fn summary_cells(res: &OptimizationResult64) -> Vec<String> {
    vec![
        csv::num(res.d_star),
        csv::num(res.r_star),
        res.t_star.to_string(),
        csv::opt_int(res.v_star),
        csv::num(res.relaxed.d_ir),
        csv::num(res.relaxed.r_ir),
        csv::num(res.relaxed.t_ir),
        csv::opt(res.relaxed.v_ir),
    ]
}

fn per_t_rows(res: &OptimizationResult64) -> Vec<Vec<String>> {
    res.per_t_table
        .iter()
        .map(|row| {
            vec![
                row.t.to_string(),
                csv::opt_int(row.v),
                csv::num(row.r_star),
                csv::num(row.exponent),
                csv::num(row.gamma_i),
                csv::num(row.d_ch),
                csv::num(row.crossing.lo),
                csv::num(row.crossing.hi),
            ]
        })
        .collect()
}

struct OptimizePoint {
    lambda: f64,
    mu: f64,
    d: u32,
    fixed_t: Option<u32>,
    coop_v: Option<u32>,
}

fn optimize_point(
    args: &OptimizeArgs,
    p: &OptimizePoint,
) -> Result<OptimizationResult64, CliError> {
    let model = ArrivalModel64::cpe(p.lambda, p.mu)?;
    let mode = args.mode.mode();
    if let Some(max_v) = p.coop_v {
        if p.fixed_t.is_some() {
            return Err(CliError::Usage(
                "--fixed-T does not apply to --coop; T = 2(v + 1)".into(),
            ));
        }
        return Ok(optimize_coop(&model, max_v, args.gamma, p.d, mode)?);
    }
    let channel = args.channel.channel()?;
    Ok(optimize_case1_with(
        &model, &channel, args.gamma, p.d, mode, p.fixed_t,
    )?)
}

fn run_optimize(args: &OptimizeArgs, pool: &rayon::ThreadPool) -> Result<(), CliError> {
    let base = OptimizePoint {
        lambda: args.model.cpe.0,
        mu: args.model.cpe.1,
        d: args.d,
        fixed_t: args.fixed_t,
        coop_v: args.channel.coop,
    };
    let format = args.output.format.unwrap_or(Format::Csv);
    let Some(spec) = &args.sweep else {
        let res = optimize_point(args, &base)?;
        let text = match format {
            Format::Json => json(&res),
            Format::Csv if args.per_t => csv::table(PER_T_HEADER, &per_t_rows(&res)),
            Format::Csv => csv::table(SUMMARY_HEADER, &[summary_cells(&res)]),
        };
        return emit(&args.output, &text);
    };
    if args.per_t {
        return Err(CliError::Usage(
            "--per-t cannot be combined with --sweep".into(),
        ));
    }
    let points = spec
        .values
        .iter()
        .map(|&value| {
            let mut p = OptimizePoint { ..base };
            match spec.param {
                SweepParam::Lambda => p.lambda = value,
                SweepParam::Mu => p.mu = value,
                SweepParam::D => p.d = sweep::as_u32(value)?,
                SweepParam::T => p.fixed_t = Some(sweep::as_u32(value)?),
                SweepParam::V if base.coop_v.is_some() => p.coop_v = Some(sweep::as_u32(value)?),
                other => return Err(CliError::Usage(format!("optimize cannot sweep {other}"))),
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let results: Vec<OptimizationResult64> = pool.install(|| {
        points
            .par_iter()
            .map(|p| optimize_point(args, p))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let text = match format {
        Format::Json => json(&sweep::records(spec, results)),
        Format::Csv => {
            let rows: Vec<Vec<String>> = spec
                .values
                .iter()
                .zip(&results)
                .map(|(&v, res)| {
                    std::iter::once(csv::num(v))
                        .chain(summary_cells(res))
                        .collect()
                })
                .collect();
            csv::table(&format!("{},{SUMMARY_HEADER}", spec.param), &rows)
        }
    };
    emit(&args.output, &text)
}

fn run_classify(args: &ClassifyArgs) -> Result<(), CliError> {
    let model = args.model.model()?;
    let channel = args.channel.channel()?;
    let class = classify_and_bound(&model, &channel, args.regime, args.d, args.mode.mode())?;
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Json => json(&class),
        Format::Csv => match &class {
            Classification::Balanced(res) => csv::table(
                &format!("case,{SUMMARY_HEADER}"),
                &[std::iter::once("balanced".to_string())
                    .chain(summary_cells(res))
                    .collect()],
            ),
            Classification::DelayDominated(b) | Classification::ChannelDominated(b) => {
                let case = if matches!(class, Classification::DelayDominated(_)) {
                    "delay_dominated"
                } else {
                    "channel_dominated"
                };
                csv::table(
                    "case,bound,t_at_bound",
                    &[vec![
                        case.to_string(),
                        csv::num(b.bound),
                        b.t_at_bound.to_string(),
                    ]],
                )
            }
        },
    };
    emit(&args.output, &text)
}

fn sim_row(n: f64, r: f64, t: u32, d: u32, rep: &SimReport) -> Vec<String> {
    vec![
        csv::num(n),
        csv::num(r),
        t.to_string(),
        d.to_string(),
        csv::num(rep.p_delay_hat),
        csv::num(rep.ci95_half_width),
        csv::opt(rep.empirical_exponent),
        csv::opt(rep.predicted_exponent),
        rep.slots_observed.to_string(),
    ]
}

fn round_to_period(slots: u64, t: u32) -> u64 {
    slots.div_ceil(u64::from(t.max(1))) * u64::from(t.max(1))
}

fn g_value(spec: &str, n: f64) -> Result<f64, CliError> {
    if spec == "linear" {
        Ok(n)
    } else {
        spec.parse::<f64>().map_err(|_| {
            CliError::Usage(format!(
                "--g must be `linear` or a positive number, got `{spec}`"
            ))
        })
    }
}

fn run_simulate(args: &SimulateArgs, pool: &rayon::ThreadPool) -> Result<(), CliError> {
    let format = args.output.format.unwrap_or(Format::Json);
    if let Some(pmf) = &args.pmf {
        let pmf = DiscretePmf::parse(pmf)?;
        let service = args
            .service
            .ok_or_else(|| CliError::Usage("--pmf needs --R".into()))?;
        if args.sweep.is_some() {
            return Err(CliError::Usage(
                "--sweep applies to CPE simulations only".into(),
            ));
        }
        if args.oracle {
            let rep: OracleReport =
                exact_discrete_oracle(&pmf, service, args.t, args.d, args.q_cap)?;
            let text = match format {
                Format::Json => json(&rep),
                Format::Csv => csv::table(
                    "R,T,D,p_exact,periods",
                    &[vec![
                        service.to_string(),
                        args.t.to_string(),
                        args.d.to_string(),
                        csv::num(rep.p_delay),
                        rep.periods_iterated.to_string(),
                    ]],
                ),
            };
            return emit(&args.output, &text);
        }
        let warmup = args.warmup.unwrap_or(1_000 * u64::from(args.t));
        let rep = pool.install(|| {
            simulate_discrete(
                &pmf,
                service,
                args.t,
                args.d,
                warmup,
                round_to_period(args.slots, args.t),
                args.seed,
                args.replications,
            )
        })?;
        let text = match format {
            Format::Json => json(&rep),
            Format::Csv => csv::table(
                SimReport::CSV_HEADER,
                &[sim_row(f64::NAN, service as f64, args.t, args.d, &rep)],
            ),
        };
        return emit(&args.output, &text);
    }
    let (lambda, mu) = args
        .cpe
        .ok_or_else(|| CliError::Usage("--cpe or --pmf is required".into()))?;
    let n = args
        .n
        .ok_or_else(|| CliError::Usage("--N is required for CPE simulation".into()))?;
    let r = args
        .r
        .ok_or_else(|| CliError::Usage("--r is required for CPE simulation".into()))?;
    let config_for =
        |lambda: f64, mu: f64, r: f64, t: u32, d: u32| -> Result<SimConfig, CliError> {
            Ok(SimConfig {
                model: ArrivalModel64::cpe(lambda, mu)?,
                n,
                g_of_n: g_value(&args.g, n)?,
                r,
                t,
                d,
                warmup_slots: args.warmup,
                measure_slots: round_to_period(args.slots, t),
                seed: args.seed,
                replications: args.replications,
            })
        };
    if args.lemma3 {
        let rep: Lemma3Report = pool.install(|| {
            lemma3_check(&config_for(lambda, mu, r, args.t, args.d)?).map_err(CliError::from)
        })?;
        let text = match format {
            Format::Json => json(&rep),
            Format::Csv => csv::table(
                "target_phase,phase_sum,overflow_probability,ratio,target_dominates",
                &[vec![
                    rep.target_phase.to_string(),
                    csv::num(rep.phase_sum),
                    csv::num(rep.overflow_probability),
                    csv::opt(rep.ratio),
                    rep.target_dominates.to_string(),
                ]],
            ),
        };
        return emit(&args.output, &text);
    }
    let Some(spec) = &args.sweep else {
        let config = config_for(lambda, mu, r, args.t, args.d)?;
        let rep = pool.install(|| simulate(&config))?;
        let text = match format {
            Format::Json => json(&rep),
            Format::Csv => csv::table(
                SimReport::CSV_HEADER,
                &[sim_row(n, r, args.t, args.d, &rep)],
            ),
        };
        return emit(&args.output, &text);
    };
    let configs = spec
        .values
        .iter()
        .map(|&value| {
            let (mut lambda, mut mu, mut r, mut t, mut d) = (lambda, mu, r, args.t, args.d);
            match spec.param {
                SweepParam::Lambda => lambda = value,
                SweepParam::Mu => mu = value,
                SweepParam::R => r = value,
                SweepParam::T => t = sweep::as_u32(value)?,
                SweepParam::D => d = sweep::as_u32(value)?,
                SweepParam::V => return Err(CliError::Usage("simulate cannot sweep v".into())),
            }
            config_for(lambda, mu, r, t, d)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    // replications already run in parallel inside each point; keep points ordered
    let reports = pool.install(|| configs.iter().map(simulate).collect::<Result<Vec<_>, _>>())?;
    let text = match format {
        Format::Json => json(&sweep::records(spec, reports)),
        Format::Csv => {
            let rows: Vec<Vec<String>> = configs
                .iter()
                .zip(&reports)
                .map(|(c, rep)| sim_row(c.n, c.r, c.t, c.d, rep))
                .collect();
            csv::table(SimReport::CSV_HEADER, &rows)
        }
    };
    emit(&args.output, &text)
}

fn check_round_trip<T>(text: &str) -> Result<(), CliError>
where
    T: Serialize + serde::de::DeserializeOwned,
{
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("not JSON: {e}")))?;
    let typed: T = serde_json::from_value(raw.clone())
        .map_err(|e| CliError::Usage(format!("schema mismatch: {e}")))?;
    let again = serde_json::to_value(&typed).expect("serializable");
    if again == raw {
        Ok(())
    } else {
        Err(CliError::Usage("document changes when reparsed".into()))
    }
}

fn run_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let text = match &args.file {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::Io(e.to_string()))?;
            s
        }
    };
    match args.kind {
        Kind::Optimize => check_round_trip::<OptimizationResult64>(&text)?,
        Kind::OptimizeSweep => check_round_trip::<Vec<SweepRecord<OptimizationResult64>>>(&text)?,
        Kind::Classify => check_round_trip::<Classification64>(&text)?,
        Kind::Simulate => check_round_trip::<SimReport>(&text)?,
        Kind::SimulateSweep => check_round_trip::<Vec<SweepRecord<SimReport>>>(&text)?,
        Kind::Oracle => check_round_trip::<OracleReport>(&text)?,
        Kind::Lemma3 => check_round_trip::<Lemma3Report>(&text)?,
        Kind::Exponent => check_round_trip::<ExponentRecord>(&text)?,
    }
    println!("ok");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    match &cli.command {
        Command::Rate(a) => run_rate(a),
        Command::Exponent(a) => run_exponent(a),
        Command::Optimize(a) => run_optimize(a, &pool),
        Command::Classify(a) => pool.install(|| run_classify(a)),
        Command::Simulate(a) => run_simulate(a, &pool),
        Command::Validate(a) => run_validate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("oqp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
