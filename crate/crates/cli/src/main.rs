use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use arbhedge::black_scholes::{bs_delta, bs_implied_vol, bs_price, bs_vega, QuoteContext, VanillaCall};
use arbhedge::config::ExperimentConfig;
use arbhedge::csls::{level_crossing, run_csls_check};
use arbhedge::hedging::{require_sharpe_gap, simulate_hedged_portfolio, HedgeStrategy};
use arbhedge::market::simulate_paths;
use arbhedge::pde::{solve_classical_bs, solve_contrast_problem, Grid1D, SolutionSurface};
use arbhedge::smile::{smile_surface, ReactionMode};
use arbhedge::transform::derive_constants;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "arbhedge", version, about = "Two-asset arbitrage hedging experiments")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Multiply grid intervals by N and divide the time step by N.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    refine: u32,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derived constants of the transformation.
    Constants,
    /// Solve the transformed problem and write the surface.
    Solve {
        /// Override the reaction term from the config.
        #[arg(long, value_enum)]
        reaction: Option<Reaction>,
    },
    /// Check the step-structure conditions and the stationary limit.
    CslsCheck,
    /// Monte Carlo replay of the hedge.
    HedgeSim,
    /// Price and implied-volatility curves per maturity.
    Smile,
    /// One-shot Black-Scholes price or implied volatility.
    Bs {
        #[arg(long)]
        spot: f64,
        #[arg(long)]
        strike: f64,
        /// Time to expiry in years.
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 0.0)]
        rate: f64,
        #[arg(long, conflicts_with = "price", required_unless_present = "price")]
        sigma: Option<f64>,
        /// Observed price to invert.
        #[arg(long)]
        price: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Reaction {
    Cubic,
    None,
}

enum Failure {
    Config(Vec<String>),
    Numerical(arbhedge::Error),
    Io(String),
}

impl From<arbhedge::Error> for Failure {
    fn from(e: arbhedge::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e)
        } else {
            Failure::Config(vec![e.to_string()])
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

struct Run {
    cfg: ExperimentConfig,
    hash: String,
    out: PathBuf,
}

impl Run {
    fn load(cli: &Cli) -> Outcome<Self> {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| Failure::Config(vec!["--config is required for this subcommand".into()]))?;
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Failure::Config(vec![format!("{}: {e}", path.display())]))?;
        let cfg = cfg.refined(cli.refine as usize);
        let errs = cfg.validate();
        if !errs.is_empty() {
            return Err(Failure::Config(errs));
        }
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
        fs::create_dir_all(&out)
            .map_err(|e| Failure::Config(vec![format!("output directory {}: {e}", out.display())]))?;
        Ok(Self { hash: config_hash(&cfg), cfg, out })
    }

    fn write_json(&self, name: &str, command: &str, body: impl Serialize) -> Outcome<Value> {
        let doc = json!({
            "command": command,
            "config_hash": self.hash,
            "result": serde_json::to_value(body).map_err(|e| Failure::Io(e.to_string()))?,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Io(e.to_string()))?;
        fs::write(self.out.join(name), format!("{text}\n"))?;
        Ok(doc)
    }

    fn write_csv(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
    ) -> Outcome<PathBuf> {
        let path = self.out.join(name);
        let mut w = BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "# config_hash={}", self.hash)?;
        body(&mut w)?;
        w.flush()?;
        Ok(path)
    }
}

/// SHA-256 of the effective config as JSON, with the output directory left out.
fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir.clear();
    let text = serde_json::to_string(&c).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn cmd_constants(run: &Run) -> Outcome<Value> {
    let contract = run.cfg.contract_spec()?;
    let dc = derive_constants(&run.cfg.market, &contract)?;
    run.write_json("constants.json", "constants", dc)
}

fn solve_surface(run: &Run, reaction: ReactionMode) -> Outcome<(Grid1D, SolutionSurface)> {
    let contract = run.cfg.contract_spec()?;
    let grid = Grid1D::corridor(&contract, run.cfg.grid.intervals)?;
    let solver = run.cfg.solver_config();
    let surface = match reaction {
        ReactionMode::Cubic => solve_contrast_problem(&run.cfg.market, &contract, &grid, &solver)?,
        ReactionMode::None => solve_classical_bs(&run.cfg.market, &contract, &grid, &solver)?,
    };
    Ok((grid, surface))
}

fn cmd_solve(run: &Run, reaction: Option<Reaction>) -> Outcome<Value> {
    let reaction = match reaction {
        Some(Reaction::Cubic) => ReactionMode::Cubic,
        Some(Reaction::None) => ReactionMode::None,
        None => run.cfg.solver.reaction,
    };
    let contract = run.cfg.contract_spec()?;
    let dc = derive_constants(&run.cfg.market, &contract)?;
    let (grid, surface) = solve_surface(run, reaction)?;
    run.write_csv("surface.csv", |w| surface.write_csv(w))?;
    let profile = surface.final_profile();
    let summary = json!({
        "reaction": reaction,
        "n_intervals": grid.n_intervals(),
        "h": grid.h,
        "dt": run.cfg.solver.dt,
        "levels_stored": surface.taus.len(),
        "final_tau": surface.final_tau(),
        "x0": dc.x0,
        "crossing_of_A": level_crossing(&grid, profile, dc.half_step),
        "u_min": profile.iter().copied().fold(f64::INFINITY, f64::min),
        "u_max": profile.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "surface_csv": "surface.csv",
    });
    run.write_json("solve_summary.json", "solve", summary)
}

fn cmd_csls(run: &Run) -> Outcome<Value> {
    let contract = run.cfg.contract_spec()?;
    let report = run_csls_check(&run.cfg.market, &contract, &run.cfg.csls_check_config())?;
    run.write_json("csls_report.json", "csls-check", report)
}

fn cmd_hedge(run: &Run) -> Outcome<Value> {
    let mc = run.cfg.mc.as_ref().ok_or_else(|| Failure::Config(vec!["missing [mc] section".into()]))?;
    let params = run.cfg.market;
    if mc.strategy == HedgeStrategy::Arbitrage {
        require_sharpe_gap(&params)?;
    }
    let contract = run.cfg.contract_spec()?;
    let dc = derive_constants(&params, &contract)?;
    let reaction = match mc.strategy {
        HedgeStrategy::Arbitrage => ReactionMode::Cubic,
        HedgeStrategy::Classical => ReactionMode::None,
    };
    let (_, surface) = solve_surface(run, reaction)?;
    let ensemble =
        simulate_paths(&params, mc.s1_0, mc.s2_0, contract.maturity, mc.n_steps, mc.n_paths, mc.seed)?;
    let cfg = run.cfg.hedge_sim_config(mc);
    let result = simulate_hedged_portfolio(&ensemble, &surface, &params, &dc, &contract, &cfg)?;
    if cfg.record_ledger {
        run.write_csv("hedge_ledger.csv", |w| result.write_ledger_csv(w))?;
    }
    run.write_json("hedge_sim.json", "hedge-sim", &result)
}

fn cmd_smile(run: &Run) -> Outcome<Value> {
    let sm = run.cfg.smile.as_ref().ok_or_else(|| Failure::Config(vec!["missing [smile] section".into()]))?;
    let contract = run.cfg.contract_spec()?;
    let settings = run.cfg.smile_settings(sm);
    let curves = smile_surface(&sm.strikes, &sm.maturities, &run.cfg.market, &contract, &settings)?;
    let mut files = Vec::new();
    for c in &curves {
        let name = format!("smile_T{:.6}.csv", c.maturity);
        run.write_csv(&name, |w| c.write_csv(w))?;
        files.push(json!({
            "maturity": c.maturity,
            "file": name,
            "skew": c.skew,
            "n_ok": c.n_ok(),
            "flags": c.points.iter().map(|p| p.vol_status.as_str()).collect::<Vec<_>>(),
        }));
    }
    run.write_json("smile_summary.json", "smile", json!({ "spot": sm.spot, "curves": files }))
}

fn cmd_bs(spot: f64, strike: f64, tau: f64, rate: f64, sigma: Option<f64>, price: Option<f64>) -> Outcome<Value> {
    let ctx = QuoteContext::new(spot, rate, tau)?;
    let call = VanillaCall::new(strike, tau)?;
    Ok(match (sigma, price) {
        (Some(s), _) => json!({
            "price": bs_price(&ctx, &call, s)?,
            "delta": bs_delta(&ctx, &call, s)?,
            "vega": bs_vega(&ctx, &call, s)?,
        }),
        (None, Some(p)) => json!({ "implied_vol": bs_implied_vol(&ctx, &call, p)? }),
        (None, None) => return Err(Failure::Config(vec!["give --sigma or --price".into()])),
    })
}

fn dispatch(cli: &Cli) -> Outcome<Value> {
    if let Command::Bs { spot, strike, tau, rate, sigma, price } = cli.command {
        return cmd_bs(spot, strike, tau, rate, sigma, price);
    }
    let run = Run::load(cli)?;
    match &cli.command {
        Command::Constants => cmd_constants(&run),
        Command::Solve { reaction } => cmd_solve(&run, *reaction),
        Command::CslsCheck => cmd_csls(&run),
        Command::HedgeSim => cmd_hedge(&run),
        Command::Smile => cmd_smile(&run),
        Command::Bs { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(doc) => {
            println!("{}", serde_json::to_string_pretty(&doc).expect("json output"));
            ExitCode::SUCCESS
        }
        Err(Failure::Config(errs)) => {
            eprintln!("configuration error ({} problem{}):", errs.len(), if errs.len() == 1 { "" } else { "s" });
            for e in errs {
                eprintln!("  - {e}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(1)
        }
    }
}
