use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use sealedbid_core::auction::{run_auction, AuctionRun, Scenario};
use sealedbid_core::bench::{run_bench, BenchConfig, BenchReport};
use sealedbid_core::chain::{replay_any, ParsedDump, ResultStatus};
use sealedbid_core::groups::{AnySuite, BackendId, PairingSuite};

mod config;

use config::{RunConfig, DEFAULT_MOCK_ORDER};

#[derive(Debug, Parser)]
#[command(name = "sealedbid", version, about = "Anonymous sealed-bid auctions on a simulated ledger")]
struct Cli {
    /// Log filter, e.g. `info` or `sealedbid_core=debug`.
    #[arg(long, global = true, env = "SEALEDBID_LOG_LEVEL", default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one auction and write outcome.json, txlog.jsonl and trace.jsonl.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        backend: Option<BackendId>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Number of bidders.
        #[arg(long)]
        bidders: Option<u32>,
        #[arg(long)]
        scenario: Option<Scenario>,
    },
    /// Recompute a ledger dump's state hash and compare it with the last line.
    Replay { txlog: PathBuf },
    /// Time each algorithm and the auctioneer's work across bidder counts.
    Bench {
        #[arg(long, default_value_t = 500)]
        trials: u32,
        /// Comma-separated bidder counts for the sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [10, 50, 100])]
        bidders: Vec<u32>,
        #[arg(long, default_value_t = 3)]
        sweep_trials: u32,
        #[arg(long, default_value = "production")]
        backend: BackendId,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Time the mock backend anyway.
        #[arg(long)]
        allow_mock: bool,
    },
    /// List the scripted scenarios.
    ScenarioList,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log_level).init();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run { config, backend, seed, out_dir, bidders, scenario } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(b) = backend {
                cfg.backend = b;
            }
            if let Some(s) = seed {
                cfg.rng_seed = s;
            }
            if let Some(n) = bidders {
                cfg.bidder_count = n;
            }
            if let Some(sc) = scenario {
                cfg.scenario = sc;
            }
            let out_dir = out_dir.or(cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
            cmd_run(&cfg, &out_dir)
        }
        Command::Replay { txlog } => cmd_replay(&txlog),
        Command::Bench { trials, bidders, sweep_trials, backend, seed, out_dir, allow_mock } => {
            let cfg = BenchConfig { trials, bidder_counts: bidders, sweep_trials, seed, allow_mock, ..Default::default() };
            cmd_bench(&cfg, backend, out_dir.as_deref())
        }
        Command::ScenarioList => {
            for sc in Scenario::ALL {
                println!("{:<18}{}", sc.name(), sc.description());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_run(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<ExitCode> {
    let auction = cfg.auction();
    auction.validate()?;
    let suite = AnySuite::init(cfg.backend, cfg.mock_order())?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let status = match suite {
        AnySuite::Production(s) => write_run(&run_auction(&s, &auction)?, out_dir)?,
        AnySuite::Mock(s) => write_run(&run_auction(&s, &auction)?, out_dir)?,
    };
    Ok(match status {
        ResultStatus::Completed | ResultStatus::Void => ExitCode::SUCCESS,
        ResultStatus::Aborted => ExitCode::from(2),
    })
}

fn write_run<S: PairingSuite>(run: &AuctionRun<S>, out_dir: &Path) -> anyhow::Result<ResultStatus> {
    let write = |name: &str, body: String| {
        let path = out_dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    };
    let outcome = serde_json::to_string_pretty(&run.outcome)?;
    write("outcome.json", format!("{outcome}\n"))?;
    write("txlog.jsonl", run.ledger.dump_jsonl())?;
    write("trace.jsonl", run.trace_jsonl())?;
    println!("{outcome}");
    Ok(run.outcome.status)
}

fn cmd_replay(path: &Path) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let dump = ParsedDump::parse(&text)?;
    let recomputed = hex::encode(replay_any(&dump.genesis, &dump.txs)?);
    println!("recomputed {recomputed}");
    match dump.embedded_hash {
        Some(embedded) => {
            println!("embedded   {embedded}");
            if embedded == recomputed {
                println!("match");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("MISMATCH");
                Ok(ExitCode::from(2))
            }
        }
        None => bail!("log has no trailing state hash to compare against"),
    }
}

fn cmd_bench(cfg: &BenchConfig, backend: BackendId, out_dir: Option<&Path>) -> anyhow::Result<ExitCode> {
    let mock_order = (backend == BackendId::Mock).then_some(DEFAULT_MOCK_ORDER);
    let report: BenchReport = match AnySuite::init(backend, mock_order)? {
        AnySuite::Production(s) => run_bench(&s, cfg)?,
        AnySuite::Mock(s) => run_bench(&s, cfg)?,
    };
    let csv = report.to_csv();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        std::fs::write(dir.join("bench.csv"), &csv)?;
        std::fs::write(dir.join("bench.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    print!("{csv}");
    if !report.sweep_monotone {
        log::warn!("auctioneer time is not monotone in bidder count");
    }
    Ok(ExitCode::SUCCESS)
}
