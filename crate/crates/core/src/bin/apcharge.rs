use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use apcharge::config::SimConfig;
use apcharge::harness::{self, summary_table};
use apcharge::Error;

#[derive(Parser, Debug)]
#[command(name = "apcharge", version, about = "Solar-powered access point charging IoT devices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every configured agent on every configured seed.
    Run(RunArgs),
    /// Repeat the experiment for each value of the configured sweep axis.
    Sweep(RunArgs),
    /// Parse and validate a configuration file, then print it with defaults filled in.
    ValidateConfig {
        /// TOML configuration file.
        #[arg(short, long)]
        config: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Run this single seed instead of the configured list.
    #[arg(short, long)]
    seed: Option<u64>,
    /// Directory for CSV and table output.
    #[arg(short, long, default_value = "results")]
    output: PathBuf,
    /// Worker threads (0: all cores). Overrides the configuration.
    #[arg(short, long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<SimConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p)?,
            None => SimConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.experiment.seeds = vec![s];
        }
        if let Some(w) = self.workers {
            cfg.experiment.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let cfg = args.load()?;
    let started = Instant::now();
    let result = harness::run_experiment(&cfg, cfg.experiment.workers)?;
    let files = harness::write_run_outputs(&args.output, &result)?;
    print!("{}", summary_table(&result.summary));
    for f in files {
        println!("wrote {}", f.display());
    }
    log::info!("finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn sweep(args: &RunArgs) -> Result<(), Error> {
    let cfg = args.load()?;
    let Some(sw) = cfg.sweep.clone() else {
        return Err(Error::Config {
            key: "sweep".into(),
            reason: "the configuration has no [sweep] table".into(),
        });
    };
    let started = Instant::now();
    let result = harness::sweep(&cfg, sw.axis, &sw.values, cfg.experiment.workers)?;
    let exp = &cfg.experiment;
    let files = harness::write_sweep_outputs(&args.output, &result, exp.episode_length, exp.collection_slot)?;
    for p in &result.points {
        println!("{} = {}", result.axis, p.value);
        print!("{}", summary_table(&p.result.summary));
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    log::info!("finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::ValidateConfig { config } => SimConfig::load(config).map(|c| {
            print!("{}", c.to_toml_string());
            eprintln!("{}: ok", config.display());
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config { .. } | Error::Parse(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
