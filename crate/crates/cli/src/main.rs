use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ndecs_cli::experiments::{
    run_ndecs_grid, run_scaling_compare, run_smc_convergence, run_spd_scaling, ExperimentOutput,
};
use ndecs_cli::manifest::Manifest;
use ndecs_cli::verify;

#[derive(Parser)]
#[command(
    name = "ndecs",
    about = "Noisy-device-enhanced classical simulation experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment manifest (TOML).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for CSV tables and plots.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides the manifest's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: NDECS_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also emit SVG plots.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full invariant/oracle verification suite.
    Verify {
        /// Optional directory for the verify.csv report.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// NDE-CS error grid over (M_C, M_P).
    NdecsGrid(RunArgs),
    /// SPMC convergence fit against sample count.
    SmcConvergence(RunArgs),
    /// NDE-CS device calls vs. theoretical SMC sample counts.
    ScalingCompare(RunArgs),
    /// SPD path-budget scaling on the structured family.
    SpdScaling(RunArgs),
}

fn setup_threads(requested: Option<usize>) {
    let n = requested.or_else(|| {
        std::env::var("NDECS_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run_experiment(
    args: &RunArgs,
    runner: fn(&Manifest) -> ndecs_cli::Result<ExperimentOutput>,
) -> ndecs_cli::Result<()> {
    setup_threads(args.threads);
    let mut manifest = Manifest::load(&args.manifest)?;
    if let Some(seed) = args.seed {
        manifest.seed = seed;
    }
    manifest.validate()?;
    println!(
        "manifest {} (hash {:016x}), seed {}, repeats {}",
        args.manifest.display(),
        manifest.hash(),
        manifest.seed,
        manifest.repeats
    );
    let output = runner(&manifest)?;
    std::fs::create_dir_all(&args.out)?;
    // Keep the resolved manifest next to the results.
    std::fs::write(args.out.join("manifest.toml"), manifest.to_toml())?;
    for note in &output.notes {
        println!("  {note}");
    }
    for table in &output.tables {
        let path = table.write_csv(&args.out)?;
        println!("  wrote {} ({} rows)", path.display(), table.rows().len());
    }
    if args.plot {
        for (name, svg) in &output.plots {
            let path = args.out.join(format!("{name}.svg"));
            std::fs::write(&path, svg)?;
            println!("  wrote {}", path.display());
        }
    }
    Ok(())
}

fn run_verify(out: Option<PathBuf>, threads: Option<usize>) -> ndecs_cli::Result<bool> {
    setup_threads(threads);
    let results = verify::run_all();
    let mut all_pass = true;
    for r in &results {
        println!(
            "{} {} ({:.2}s) {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
        all_pass &= r.pass;
    }
    println!(
        "{}/{} checks passed",
        results.iter().filter(|r| r.pass).count(),
        results.len()
    );
    if let Some(dir) = out {
        let path = verify::results_table(&results).write_csv(&dir)?;
        println!("wrote {}", path.display());
    }
    Ok(all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify { out, threads } => match run_verify(out, threads) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("verification failed");
                return ExitCode::FAILURE;
            }
            Err(e) => Err(e),
        },
        Command::NdecsGrid(args) => run_experiment(&args, run_ndecs_grid),
        Command::SmcConvergence(args) => run_experiment(&args, run_smc_convergence),
        Command::ScalingCompare(args) => run_experiment(&args, run_scaling_compare),
        Command::SpdScaling(args) => run_experiment(&args, run_spd_scaling),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
