use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geomem_core::harness::{
    analyze_score_file, run_dimension_sweep, run_generate, run_spectra_vs_time, write_analysis,
    write_tc_comparison, ExperimentConfig, TcMode,
};
use geomem_core::Error;

#[derive(Parser)]
#[command(name = "geomem", version, about = "Score-Jacobian spectra and memorization experiments on linear manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TcModeArg {
    Alpha,
    Positions,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Sample datasets for every N and repetition.
    Generate(Common),
    /// Singular spectra over the t grid for every estimator, N and repetition.
    Spectra(Common),
    /// Exact vs closed-form condensation times.
    Tc {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "both")]
        mode: TcModeArg,
    },
    /// Detected manifold dimension over N and t.
    Dims(Common),
    /// Spectrum and dimension of a stored score-sample file.
    Analyze {
        /// Score-sample file.
        path: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        c: f64,
        #[arg(long, default_value_t = 1)]
        discard: usize,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn init_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("--threads", e.to_string()))?;
    }
    Ok(())
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    init_threads(common.threads)?;
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn report(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).unwrap_or_default());
}

fn outputs_summary(out: &Path, files: &[String]) -> serde_json::Value {
    serde_json::json!({
        "out": out.display().to_string(),
        "files": files,
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = load(&c)?;
            let m = run_generate(&cfg, &c.out)?;
            report(outputs_summary(&c.out, &m.outputs));
        }
        Command::Spectra(c) => {
            let cfg = load(&c)?;
            let m = run_spectra_vs_time(&cfg, &c.out)?;
            report(outputs_summary(&c.out, &m.outputs));
        }
        Command::Dims(c) => {
            let cfg = load(&c)?;
            let m = run_dimension_sweep(&cfg, &c.out)?;
            report(outputs_summary(&c.out, &m.outputs));
        }
        Command::Tc { common, mode } => {
            let cfg = load(&common)?;
            let modes = match mode {
                TcModeArg::Alpha => vec![TcMode::AlphaSweep],
                TcModeArg::Positions => vec![TcMode::Positions],
                TcModeArg::Both => vec![TcMode::AlphaSweep, TcMode::Positions],
            };
            let (res, m) = write_tc_comparison(&cfg, &modes, &common.out)?;
            let failures = res.alpha_rows.iter().filter(|r| r.error.is_some()).count()
                + res.position_rows.iter().filter(|r| r.error.is_some()).count();
            let mut summary = outputs_summary(&common.out, &m.outputs);
            summary["root_failures"] = failures.into();
            summary["position_spearman"] = res.position_spearman().into();
            report(summary);
        }
        Command::Analyze {
            path,
            out,
            c,
            discard,
            threads,
        } => {
            init_threads(threads)?;
            let a = analyze_score_file(&path, c, discard)?;
            let x_id = path.file_stem().map_or("file".into(), |s| s.to_string_lossy().into_owned());
            write_analysis(&a, &x_id, &out)?;
            report(serde_json::json!({
                "k": a.dimension.k,
                "no_gap": a.dimension.no_gap,
                "rank_deficient": a.spectrum.rank_deficient,
                "values": a.spectrum.values(),
            }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
