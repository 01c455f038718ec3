use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coexplore::report::{self, read_run};
use coexplore::{Error, Policy, ScenarioConfig};

#[derive(Parser)]
#[command(name = "coexplore", version, about = "Multi-robot collaborative exploration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        policy: Option<Policy>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute and print the metrics of a finished run.
    Metrics {
        #[arg(long)]
        run: PathBuf,
    },
    /// Seed-paired comparison of several runs.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config and print it fully resolved.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path, seed: Option<u64>, policy: Option<Policy>) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(p) = policy {
        cfg.policy = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run {
            config,
            seed,
            policy,
            out,
        } => {
            let cfg = load(&config, seed, policy)?;
            let run = coexplore::run_scenario(&cfg)?;
            let s = report::write_run(&out, &run)?;
            println!(
                "{} seed {}: coverage {:.2}%, reloc {}, mean overlap {:.2} m², wrote {}",
                s.policy,
                s.seed,
                s.final_coverage,
                s.reloc.iter().sum::<usize>(),
                s.mean_iou_area,
                out.display()
            );
        }
        Command::Metrics { run } => {
            let rec = read_run(&run)?;
            let q = report::quality_from_run(&run)?;
            print!("{}", rec.summary.to_csv());
            println!("recomputed_mse,{:.6}", q.mse);
            println!("recomputed_ssim,{:.6}", q.ssim);
            println!("recomputed_ncc,{:.6}", q.ncc);
            println!("recomputed_cs,{:.6}", q.cs);
        }
        Command::Compare { runs, out } => {
            let records = runs.iter().map(|d| read_run(d)).collect::<Result<Vec<_>, _>>()?;
            let cmp = report::compare_runs(&records)?;
            report::write_comparison(&out, &cmp)?;
            print!("{}", report::comparison_csv(&cmp));
        }
        Command::Validate { config } => {
            let cfg = load(&config, None, None)?;
            println!("config ok: {}", config.display());
            print!("{}", cfg.resolved_report());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
