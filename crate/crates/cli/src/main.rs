//! `perp`: price perpetual futures and everlasting options, emit figure
//! data, run Monte Carlo checks and replication backtests, and analyse
//! funding histories.
//!
//! Exit codes: 0 success, 1 usage, 2 precondition or domain failure,
//! 3 I/O or parse failure.

mod config;
mod output;

use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use perpetual::continuous::{self, ct_price, ct_quanto_price, CtPriceInputs};
use perpetual::discrete::{self, dt_price, dt_random_maturity_price, DtPriceInputs, FuturesKind};
use perpetual::everlasting::{
    everlasting_call, everlasting_call_delta, everlasting_put, perpetual_reference_price,
    BsEverlastingInputs, EVERLASTING_INTEGRABILITY,
};
use perpetual::figures::{figure, FigureId};
use perpetual::history::{basis_report, funding_schedule, ingest_funding_history, HistoryError};
use perpetual::mc::{everlasting_conditional_mc, mc_price, McConfig, McEstimate};
use perpetual::model::EIGHT_HOURS;
use perpetual::replication::{ct_replication_backtest, replication_convergence};
use perpetual::{
    ContractKind, ContractSpec, FundingConvention, FundingSpec, GbmModel, Payoff, PricingError,
    RateEnvironment, TimeMode,
};

use config::Config;
use output::{print_table, sig7};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<PricingError> for CliError {
    fn from(e: PricingError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<HistoryError> for CliError {
    fn from(e: HistoryError) -> Self {
        if e.is_input_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Domain(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "perp", version, about = "Perpetual futures and everlasting option pricing")]
struct Cli {
    /// Flat `key = value` file with defaults for any flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Machine-readable output with full precision
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form price with the conditions it relies on
    Price {
        #[command(flatten)]
        market: MarketArgs,
    },
    /// CSV data of a figure: fig2, fig-inverse or fig3
    Curve {
        #[arg(long)]
        figure: Option<String>,
        /// Grid size
        #[arg(long)]
        points: Option<usize>,
        /// Write to a file instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Random-maturity Monte Carlo estimate next to the closed form
    Mc {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        antithetic: bool,
    },
    /// Replication backtest of an equalized linear contract
    Replicate {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Step sizes for a convergence study, comma separated
        #[arg(long, value_delimiter = ',')]
        dts: Option<Vec<f64>>,
        /// Paths per step size in a convergence study
        #[arg(long)]
        paths: Option<u64>,
    },
    /// Realized against theoretical basis of a funding-history CSV
    Basis {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Per-period funding cash flows of a funding-history CSV
    Funding {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct MarketArgs {
    /// linear, inverse, quanto, everlasting-call or everlasting-put
    #[arg(long)]
    kind: Option<Kind>,
    /// dt (per-period rates) or ct (continuous rates)
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    iota: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    ra: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rb: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rc: Option<f64>,
    #[arg(long)]
    spot: Option<f64>,
    /// Volatility vector of the spot, comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    sigma: Option<Vec<f64>>,
    /// Volatility vector of the quanto rate, comma separated
    #[arg(long = "sigma-z", value_delimiter = ',', allow_negative_numbers = true)]
    sigma_z: Option<Vec<f64>>,
    /// Spot of the quanto rate
    #[arg(long)]
    z0: Option<f64>,
    #[arg(long)]
    strike: Option<f64>,
    /// Funding period in years
    #[arg(long)]
    delta: Option<f64>,
    /// predictable or mark-value
    #[arg(long)]
    convention: Option<Convention>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Linear,
    Inverse,
    Quanto,
    EverlastingCall,
    EverlastingPut,
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(Kind::Linear),
            "inverse" => Ok(Kind::Inverse),
            "quanto" => Ok(Kind::Quanto),
            "everlasting-call" => Ok(Kind::EverlastingCall),
            "everlasting-put" => Ok(Kind::EverlastingPut),
            other => Err(format!(
                "unknown kind `{other}` (linear, inverse, quanto, everlasting-call, everlasting-put)"
            )),
        }
    }
}

impl Kind {
    fn tag(self) -> &'static str {
        match self {
            Kind::Linear => "linear",
            Kind::Inverse => "inverse",
            Kind::Quanto => "quanto",
            Kind::EverlastingCall => "everlasting-call",
            Kind::EverlastingPut => "everlasting-put",
        }
    }

    fn futures(self) -> CliResult<FuturesKind> {
        match self {
            Kind::Linear => Ok(FuturesKind::Linear),
            Kind::Inverse => Ok(FuturesKind::Inverse),
            other => Err(CliError::Usage(format!(
                "kind `{}` is not supported here; use linear or inverse",
                other.tag()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Dt,
    Ct,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dt" => Ok(Mode::Dt),
            "ct" => Ok(Mode::Ct),
            other => Err(format!("unknown mode `{other}` (dt or ct)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Convention(FundingConvention);

impl FromStr for Convention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "predictable" => Ok(Convention(FundingConvention::Predictable)),
            "mark-value" => Ok(Convention(FundingConvention::MarkValue)),
            other => Err(format!("unknown convention `{other}` (predictable or mark-value)")),
        }
    }
}

/// Market inputs after merging flags, config file and defaults.
struct Market {
    kind: Option<Kind>,
    mode: Mode,
    kappa: Option<f64>,
    iota: f64,
    ra: f64,
    rb: f64,
    rc: Option<f64>,
    spot: f64,
    sigma: Vec<f64>,
    sigma_z: Option<Vec<f64>>,
    z0: Option<f64>,
    strike: Option<f64>,
    delta: f64,
    convention: FundingConvention,
}

fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

impl Market {
    fn resolve(args: MarketArgs, cfg: &Config) -> CliResult<Self> {
        Ok(Market {
            kind: cfg.pick(args.kind, "kind")?,
            mode: cfg.pick(args.mode, "mode")?.unwrap_or(Mode::Ct),
            kappa: cfg.pick(args.kappa, "kappa")?,
            iota: cfg.pick(args.iota, "iota")?.unwrap_or(0.0),
            ra: cfg.pick(args.ra, "ra")?.unwrap_or(0.0),
            rb: cfg.pick(args.rb, "rb")?.unwrap_or(0.0),
            rc: cfg.pick(args.rc, "rc")?,
            spot: cfg.pick(args.spot, "spot")?.unwrap_or(1.0),
            sigma: cfg.pick_list(args.sigma, "sigma")?.unwrap_or_else(|| vec![0.0]),
            sigma_z: cfg.pick_list(args.sigma_z, "sigma-z")?,
            z0: cfg.pick(args.z0, "z0")?,
            strike: cfg.pick(args.strike, "strike")?,
            delta: cfg.pick(args.delta, "delta")?.unwrap_or(EIGHT_HOURS),
            convention: cfg
                .pick(args.convention, "convention")?
                .map_or(FundingConvention::Predictable, |c| c.0),
        })
    }

    fn kind(&self) -> CliResult<Kind> {
        required(self.kind, "kind")
    }

    fn env(&self) -> CliResult<RateEnvironment> {
        let mode = match self.mode {
            Mode::Dt => TimeMode::DiscreteTime,
            Mode::Ct => TimeMode::ContinuousTime,
        };
        let env = RateEnvironment::new(self.ra, self.rb, mode)?;
        Ok(match self.rc {
            Some(rc) => env.with_r_c(rc)?,
            None => env,
        })
    }

    fn funding(&self) -> CliResult<FundingSpec> {
        Ok(FundingSpec::new(required(self.kappa, "kappa")?, self.iota)?
            .with_delta(self.delta)?
            .with_convention(self.convention))
    }

    fn model(&self) -> CliResult<GbmModel> {
        let model = GbmModel::new(self.spot, self.sigma.clone())?;
        match (&self.sigma_z, self.z0) {
            (Some(sz), z0) => Ok(model.with_quanto(z0.unwrap_or(1.0), sz.clone())?),
            (None, Some(z0)) => Ok(model.with_quanto(z0, vec![0.0; self.sigma.len()])?),
            (None, None) => Ok(model),
        }
    }

    fn sigma_norm(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    fn everlasting(&self) -> CliResult<BsEverlastingInputs> {
        if self.mode != Mode::Ct {
            return Err(CliError::Domain(
                "everlasting options are priced with continuous rates (--mode ct)".into(),
            ));
        }
        if self.iota != 0.0 {
            return Err(CliError::Domain("everlasting options carry no interest factor; use --iota 0".into()));
        }
        Ok(BsEverlastingInputs::new(
            self.env()?,
            required(self.kappa, "kappa")?,
            required(self.strike, "strike")?,
            self.sigma_norm(),
            self.spot,
        )?)
    }

    fn contract(&self, kind: Kind) -> CliResult<ContractSpec> {
        let funding = self.funding()?;
        Ok(match kind {
            Kind::Linear => ContractSpec::linear(funding),
            Kind::Inverse => ContractSpec::inverse(funding),
            Kind::Quanto => ContractSpec::quanto(funding),
            Kind::EverlastingCall => ContractSpec::everlasting(
                funding,
                Payoff::Call { strike: required(self.strike, "strike")? },
            )?,
            Kind::EverlastingPut => ContractSpec::everlasting(
                funding,
                Payoff::Put { strike: required(self.strike, "strike")? },
            )?,
        })
    }
}

struct Priced {
    price: f64,
    /// Price over the underlying spot, minus one; absent for options.
    basis: Option<f64>,
    delta: Option<f64>,
    conditions: Vec<&'static str>,
}

fn closed_form(m: &Market, kind: Kind) -> CliResult<Priced> {
    let premium = "iota < kappa";
    match (kind, m.mode) {
        (Kind::Linear | Kind::Inverse, Mode::Dt) => {
            let fk = kind.futures()?;
            let q = dt_price(fk, &DtPriceInputs::new(m.env()?, m.funding()?, m.spot)?)?;
            let cond = match fk {
                FuturesKind::Linear => discrete::LINEAR_INTEGRABILITY,
                FuturesKind::Inverse => discrete::INVERSE_INTEGRABILITY,
            };
            Ok(Priced {
                price: q.value,
                basis: Some(q.basis(m.spot)),
                delta: None,
                conditions: vec![cond, premium],
            })
        }
        (Kind::Linear | Kind::Inverse, Mode::Ct) => {
            let fk = kind.futures()?;
            let q = ct_price(fk, &CtPriceInputs::new(m.env()?, m.funding()?, m.model()?)?)?;
            let cond = match fk {
                FuturesKind::Linear => continuous::LINEAR_INTEGRABILITY,
                FuturesKind::Inverse => continuous::INVERSE_INTEGRABILITY,
            };
            Ok(Priced {
                price: q.value,
                basis: Some(q.basis(m.spot)),
                delta: None,
                conditions: vec![cond, premium],
            })
        }
        (Kind::Quanto, Mode::Ct) => {
            let model = m.model()?;
            let (z0, _) = model.require_quanto()?;
            let q = ct_quanto_price(&CtPriceInputs::new(m.env()?, m.funding()?, model)?)?;
            Ok(Priced {
                price: q.value,
                basis: Some(q.basis(z0)),
                delta: None,
                conditions: vec![continuous::QUANTO_INTEGRABILITY, premium],
            })
        }
        (Kind::Quanto, Mode::Dt) => Err(CliError::Domain(
            "quanto contracts are priced with continuous rates (--mode ct)".into(),
        )),
        (Kind::EverlastingCall | Kind::EverlastingPut, _) => {
            let inputs = m.everlasting()?;
            let call_delta = everlasting_call_delta(&inputs)?;
            let (price, delta) = if kind == Kind::EverlastingCall {
                (everlasting_call(&inputs)?, call_delta)
            } else {
                let slope = perpetual_reference_price(&inputs.env, inputs.kappa, 1.0)?;
                (everlasting_put(&inputs)?, call_delta - slope)
            };
            Ok(Priced {
                price,
                basis: None,
                delta: Some(delta),
                conditions: vec![EVERLASTING_INTEGRABILITY, "sigma > 0"],
            })
        }
    }
}

fn cmd_price(m: &Market, json: bool) -> CliResult<()> {
    let kind = m.kind()?;
    let p = closed_form(m, kind)?;
    if json {
        println!(
            "{}",
            json!({
                "kind": kind.tag(),
                "mode": if m.mode == Mode::Dt { "dt" } else { "ct" },
                "price": p.price,
                "basis": p.basis,
                "delta": p.delta,
                "conditions": p.conditions,
            })
        );
    } else {
        let mut rows = vec![("price", sig7(p.price))];
        if let Some(b) = p.basis {
            rows.push(("basis", sig7(b)));
        }
        if let Some(d) = p.delta {
            rows.push(("delta", sig7(d)));
        }
        rows.push(("conditions", p.conditions.join("; ")));
        print_table(&rows);
    }
    Ok(())
}

fn cmd_curve(cfg: &Config, fig: Option<String>, points: Option<usize>, out: Option<PathBuf>, json: bool) -> CliResult<()> {
    let id: FigureId = required(cfg.pick(fig, "figure")?, "figure")?
        .parse()
        .map_err(CliError::Usage)?;
    let points = cfg.pick(points, "points")?.unwrap_or(81);
    let data = figure(id, points)?;
    let out = cfg.pick::<PathBuf>(out, "output")?;
    let mut sink: Box<dyn Write> = match &out {
        Some(path) => Box::new(
            File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    if json {
        writeln!(sink, "{}", json!({ "columns": data.columns, "rows": data.rows }))?;
    } else {
        data.write_csv(&mut sink)
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn cmd_mc(m: &Market, cfg: &Config, samples: Option<u64>, seed: Option<u64>, antithetic: bool, json: bool) -> CliResult<()> {
    let kind = m.kind()?;
    let mc = McConfig::new(
        cfg.pick(samples, "samples")?.unwrap_or(100_000),
        cfg.pick(seed, "seed")?.unwrap_or(42),
    )
    .with_antithetic(cfg.flag(antithetic, "antithetic")?);
    let closed = closed_form(m, kind)?.price;
    let est: McEstimate = match (m.mode, kind) {
        (Mode::Dt, Kind::Linear) => {
            let q = dt_random_maturity_price(&m.env()?, &m.funding()?, &m.model()?, &mc)?;
            McEstimate {
                mean: q.value,
                std_error: q.std_error().unwrap_or(f64::NAN),
                n: mc.n_samples,
            }
        }
        (Mode::Dt, _) => {
            return Err(CliError::Domain(
                "discrete-time sampling covers linear contracts; use --mode ct".into(),
            ))
        }
        (Mode::Ct, Kind::EverlastingCall | Kind::EverlastingPut) => {
            everlasting_conditional_mc(&m.contract(kind)?, &m.model()?, &m.env()?, &mc)?
        }
        (Mode::Ct, _) => mc_price(&m.contract(kind)?, &m.model()?, &m.env()?, &mc)?,
    };
    let z = est.z_score(closed);
    if json {
        println!(
            "{}",
            json!({
                "kind": kind.tag(),
                "estimate": est.mean,
                "std_error": est.std_error,
                "n": est.n,
                "closed_form": closed,
                "z": z,
            })
        );
    } else {
        print_table(&[
            ("estimate", sig7(est.mean)),
            ("std_error", sig7(est.std_error)),
            ("n", est.n.to_string()),
            ("closed_form", sig7(closed)),
            ("z", sig7(z)),
        ]);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_replicate(
    m: &Market,
    cfg: &Config,
    horizon: Option<f64>,
    dt: Option<f64>,
    seed: Option<u64>,
    dts: Option<Vec<f64>>,
    paths: Option<u64>,
    json: bool,
) -> CliResult<()> {
    if m.mode != Mode::Ct {
        return Err(CliError::Domain("the replication backtest uses continuous rates (--mode ct)".into()));
    }
    let env = m.env()?;
    let model = m.model()?;
    let kappa = required(m.kappa, "kappa")?;
    let horizon = cfg.pick(horizon, "horizon")?.unwrap_or(1.0);
    let seed = cfg.pick(seed, "seed")?.unwrap_or(42);
    if let Some(dts) = cfg.pick_list(dts, "dts")? {
        let paths = cfg.pick(paths, "paths")?.unwrap_or(1000);
        let study = replication_convergence(&env, &model, kappa, horizon, &dts, paths, seed)?;
        if json {
            println!("{}", serde_json::to_string(&study).map_err(|e| CliError::Io(e.to_string()))?);
        } else {
            println!("dt,mean_max_abs_value");
            for (dt, e) in study.dts.iter().zip(&study.mean_max_abs) {
                println!("{},{}", sig7(*dt), sig7(*e));
            }
            let orders: Vec<String> = study.orders.iter().map(|o| sig7(*o)).collect();
            print_table(&[("orders", orders.join(", ")), ("constant", sig7(study.constant))]);
        }
        return Ok(());
    }
    let dt = cfg.pick(dt, "dt")?.unwrap_or(0.01);
    let bt = ct_replication_backtest(&env, &model, kappa, horizon, dt, seed)?;
    if json {
        println!("{}", serde_json::to_string(&bt).map_err(|e| CliError::Io(e.to_string()))?);
    } else {
        print_table(&[
            ("terminal_value", sig7(bt.terminal_value)),
            ("max_abs_value", sig7(bt.max_abs_value)),
            ("dt", sig7(bt.dt)),
            ("n_steps", bt.n_steps.to_string()),
        ]);
    }
    Ok(())
}

fn history_contract(m: &Market) -> CliResult<ContractSpec> {
    let kind = m.kind()?;
    m.contract(kind)
}

fn cmd_basis(m: &Market, cfg: &Config, input: Option<PathBuf>, json: bool) -> CliResult<()> {
    let path: PathBuf = required(cfg.pick(input, "input")?, "input")?;
    let rows = ingest_funding_history(&path)?;
    let contract = history_contract(m)?;
    let rep = basis_report(&rows, &m.env()?, &contract)?;
    if json {
        println!("{}", serde_json::to_string(&rep).map_err(|e| CliError::Io(e.to_string()))?);
    } else {
        print_table(&[
            ("rows", rows.len().to_string()),
            ("mean_deviation", sig7(rep.mean_deviation)),
            ("max_abs_deviation", sig7(rep.max_abs_deviation)),
            ("theoretical_basis", sig7(rep.theoretical[0])),
        ]);
    }
    Ok(())
}

fn cmd_funding(m: &Market, cfg: &Config, input: Option<PathBuf>, json: bool) -> CliResult<()> {
    let path: PathBuf = required(cfg.pick(input, "input")?, "input")?;
    let rows = ingest_funding_history(&path)?;
    let contract = history_contract(m)?;
    if !matches!(contract.kind(), ContractKind::Linear | ContractKind::Inverse) {
        return Err(CliError::Usage("funding schedules cover linear and inverse contracts".into()));
    }
    let flows = funding_schedule(&rows, &contract)?;
    if json {
        let items: Vec<_> = rows
            .iter()
            .zip(&flows)
            .map(|(r, c)| json!({ "timestamp": r.timestamp.to_rfc3339(), "cashflow": c }))
            .collect();
        println!("{}", serde_json::Value::Array(items));
    } else {
        println!("timestamp,futures_price,spot,funding_cashflow");
        for (r, c) in rows.iter().zip(&flows) {
            println!(
                "{},{},{},{}",
                r.timestamp.to_rfc3339(),
                r.futures_price,
                r.spot,
                sig7(*c)
            );
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let json = cli.json;
    match cli.command {
        Command::Price { market } => cmd_price(&Market::resolve(market, &cfg)?, json),
        Command::Curve { figure, points, output } => cmd_curve(&cfg, figure, points, output, json),
        Command::Mc { market, samples, seed, antithetic } => {
            cmd_mc(&Market::resolve(market, &cfg)?, &cfg, samples, seed, antithetic, json)
        }
        Command::Replicate { market, horizon, dt, seed, dts, paths } => cmd_replicate(
            &Market::resolve(market, &cfg)?,
            &cfg,
            horizon,
            dt,
            seed,
            dts,
            paths,
            json,
        ),
        Command::Basis { market, input } => cmd_basis(&Market::resolve(market, &cfg)?, &cfg, input, json),
        Command::Funding { market, input } => {
            cmd_funding(&Market::resolve(market, &cfg)?, &cfg, input, json)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
