use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aei_backtest::config::RunConfig;
use aei_backtest::data::Schema;
use aei_backtest::date::YearMonth;
use aei_backtest::pipeline;
use aei_backtest::synth::{self, SynthSpec};
use aei_backtest::{Error, Result};

#[derive(Parser)]
#[command(name = "aei-backtest", version, about = "Index-driven equity allocation backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the out-of-sample allocation backtest and write its artifacts.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_name = "YYYYMM")]
        oos_start: Option<String>,
        #[arg(long, value_name = "YYYYMM")]
        oos_end: Option<String>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        cost_bps: Option<f64>,
        /// Bootstrap replications.
        #[arg(long, value_name = "N")]
        bootstrap: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Check a raw data file for schema and coverage problems.
    Validate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Generate a synthetic panel in the derived-panel CSV layout.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write `yyyymm,usrec` labels (Down months as 1).
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

fn month(arg: Option<String>) -> Result<Option<YearMonth>> {
    arg.map(|s| s.parse().map_err(|e: Error| Error::Config(e.to_string()))).transpose()
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Backtest {
            config,
            data,
            oos_start,
            oos_end,
            gamma,
            cost_bps,
            bootstrap,
            seed,
            out,
        } => {
            let mut cfg = RunConfig::from_toml_file(&config)?;
            if let Some(d) = data {
                cfg.data.path = Some(d);
            }
            if let Some(m) = month(oos_start)? {
                cfg.sample.oos_start = m;
            }
            if let Some(m) = month(oos_end)? {
                cfg.sample.oos_end = m;
            }
            if let Some(g) = gamma {
                cfg.allocation.gamma = g;
            }
            if let Some(c) = cost_bps {
                cfg.allocation.cost_bps = c;
            }
            if let Some(b) = bootstrap {
                cfg.bootstrap.replications = b;
            }
            if let Some(s) = seed {
                cfg.bootstrap.seed = s;
            }
            if let Some(o) = out {
                cfg.output.dir = o;
            }
            let (run, written) = pipeline::cmd_backtest(&cfg)?;
            println!("{:<20} {:>9} {:>9} {:>7} {:>9} {:>6}", "strategy", "CER", "dCER", "SR", "dCER net", "stars");
            for r in &run.reports {
                println!(
                    "{:<20} {:>9.3} {:>9.3} {:>7.3} {:>9.3} {:>6}",
                    r.strategy,
                    r.cer_ann,
                    r.dcer_ann,
                    r.sharpe_m,
                    r.dcer_net,
                    r.stars()
                );
            }
            println!("wrote {} files to {}", written.len(), cfg.output.dir.display());
            Ok(0)
        }
        Command::Validate { data, schema } => {
            let schema = match schema {
                Some(p) => Schema::from_toml_file(&p)?,
                None => Schema::default(),
            };
            let issues = pipeline::cmd_validate(&data, &schema)?;
            for i in &issues {
                println!("{i}");
            }
            Ok(if issues.is_empty() { 0 } else { 3 })
        }
        Command::Synth { spec, out, labels } => {
            let spec = SynthSpec::from_toml_file(&spec)?;
            let s = synth::generate(&spec)?;
            s.panel.write_csv(&out)?;
            if let Some(p) = labels {
                let f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
                synth::write_state_labels(&s.states, f)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
