mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig};

/// Estimate ensemble generalization error from a few trained members.
#[derive(Parser, Debug)]
#[command(name = "bitewise", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// INI configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding [run] seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, overriding [run] out.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic train.csv and eval.csv.
    GenData(Common),
    /// Train the estimation pool for every bite size and write score files.
    TrainPool(Common),
    /// Build (or refresh) the lookup tables the configuration needs.
    BuildTables(Common),
    /// Print the header of a table file.
    TableInfo {
        path: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Table-based estimates of G, S2, B and V.
    Estimate(Common),
    /// Pool-based ground truth, OneSamp and EmpSamp curves.
    Baseline(Common),
    /// Choose K, m and the mixing scheme from the estimated curves.
    Advise(Common),
}

fn run(cmd: Command) -> bitewise::Result<()> {
    let common = match &cmd {
        Command::TableInfo { path, common } => {
            configure_threads(common.threads.unwrap_or(0));
            print!("{}", commands::table_info(path)?);
            return Ok(());
        }
        Command::GenData(c)
        | Command::TrainPool(c)
        | Command::BuildTables(c)
        | Command::Estimate(c)
        | Command::Baseline(c)
        | Command::Advise(c) => c.clone(),
    };
    let over = Overrides { seed: common.seed, threads: common.threads, out: common.out };
    let cfg = RunConfig::load(common.config.as_deref(), &over)?;
    configure_threads(cfg.threads);
    match cmd {
        Command::GenData(_) => commands::gen_data(&cfg),
        Command::TrainPool(_) => commands::train_pools(&cfg),
        Command::BuildTables(_) => commands::build_tables(&cfg),
        Command::Estimate(_) => commands::estimate(&cfg),
        Command::Baseline(_) => commands::baseline(&cfg),
        Command::Advise(_) => commands::advise(&cfg),
        Command::TableInfo { .. } => unreachable!(),
    }
}

fn configure_threads(threads: usize) {
    if threads > 0 {
        // results do not depend on the thread count, only wall time does
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
