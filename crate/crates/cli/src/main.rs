use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eos_core::harness::{
    beta_sweep, resolve_workers, run_replications, verify_all, verify_beta_sweep, AggregateReport, ExperimentConfig,
    ScenarioSummary, SweepTable, Verdict,
};
use eos_core::io::{
    emit_results, load_config, parse_config, read_manifest, read_rows_csv, to_json_string, write_atomic,
    write_manifest, RunManifest,
};
use eos_core::{analyze, builtin_scenarios, EosError};

const AFTER_HELP: &str = "\
Environment:
  EOS_WORKERS  number of worker threads (default: available parallelism)

Exit codes:
  0  success; for verify and sweep-beta, every check passed or lacked precision
  1  a check failed, or any other error
  2  the scenario's J matrix is singular (constants)";

/// Replication studies of Bayesian generalization and training losses.
#[derive(Parser)]
#[command(name = "eos", version, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print S, lambda, nu, mu and TIC for a scenario as one JSON object.
    Constants {
        /// Scenario id, e.g. gauss-wide.
        #[arg(long)]
        scenario: String,
    },
    /// Run a replication study and write manifest.json, rows.csv and aggregate.json.
    Replicate {
        /// Config file (key = value lines).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a finished study against its asymptotic predictions; writes verdicts.json.
    Verify {
        /// Directory written by `replicate`.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Tabulate E[B_g] against 1/beta; writes beta_sweep.csv.
    SweepBeta {
        /// Config file; beta_grid must contain inf and three finite values.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: current directory).
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the config's master_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Constants { scenario } => constants(&scenario),
        Command::Replicate { config, out, seed } => replicate(&config, &out, seed),
        Command::Verify { input } => verify(&input),
        Command::SweepBeta { config, out, seed } => sweep(&config, &out, seed),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.tag());
            if matches!(e, EosError::SingularJ) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn constants(id: &str) -> Result<ExitCode, EosError> {
    let catalog = builtin_scenarios();
    let geometry = analyze(catalog.get(id)?)?;
    print!("{}", to_json_string(&geometry.constants)?);
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, EosError> {
    let mut config = load_config(path)?;
    if let Some(s) = seed {
        config.master_seed = s;
    }
    Ok(config)
}

fn replicate(config: &Path, out: &Path, seed: Option<u64>) -> Result<ExitCode, EosError> {
    let config = load(config, seed)?;
    let catalog = builtin_scenarios();
    let summary = ScenarioSummary::from_scenario(catalog.get(&config.scenario_id)?)?;
    write_manifest(out, &RunManifest::new(&config, summary))?;
    let workers = resolve_workers();
    let run = run_replications(&config, workers)?;
    let aggregate = AggregateReport::from_rows(&run.rows, &run.summary);
    emit_results(out, run.summary.d, &run.rows, &aggregate, None)?;
    eprintln!("{} rows written to {}", run.rows.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn report(verdicts: &[Verdict]) -> ExitCode {
    let mut failed = 0;
    for v in verdicts {
        let status = to_json_string(&v.status).unwrap_or_default();
        eprintln!("{:<24} {}", status.trim().trim_matches('"'), v.name);
        failed += v.is_hard_failure() as usize;
    }
    eprintln!("{} checks, {failed} failed", verdicts.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn verify(input: &Path) -> Result<ExitCode, EosError> {
    let manifest = read_manifest(input)?;
    let config = parse_config(&manifest.config)?;
    let rows = read_rows_csv(&std::fs::read_to_string(input.join(eos_core::io::output::ROWS_FILE))?)?;
    let verdicts = verify_all(&rows, &manifest.scenario, config.tolerance_se_multiplier)?;
    write_atomic(&input.join(eos_core::io::output::VERDICTS_FILE), to_json_string(&verdicts)?.as_bytes())?;
    Ok(report(&verdicts))
}

fn sweep_csv(table: &SweepTable) -> String {
    let mut s = String::from("scenario_id,n,beta,inv_beta,mean_b_g,se_b_g,count,predicted\n");
    for p in &table.points {
        s.push_str(&format!(
            "{},{},{},{:.16e},{:.16e},{:.16e},{},{:.16e}\n",
            table.scenario_id, p.n, p.beta, p.inv_beta, p.mean_b_g, p.se_b_g, p.count, p.predicted
        ));
    }
    s
}

fn sweep(config: &Path, out: &Path, seed: Option<u64>) -> Result<ExitCode, EosError> {
    let config = load(config, seed)?;
    let (table, summary) = beta_sweep(&config, resolve_workers())?;
    std::fs::create_dir_all(out)?;
    write_atomic(&out.join("beta_sweep.csv"), sweep_csv(&table).as_bytes())?;
    Ok(report(&verify_beta_sweep(&table, &summary, config.tolerance_se_multiplier)))
}
