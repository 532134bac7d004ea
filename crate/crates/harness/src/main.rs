use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use elaa_doa::{angle_grid, array_factor, music_spectrum, Aperture, MusicAperture};
use elaa_harness::error::{HarnessError, Result};
use elaa_harness::runner::{make_snapshot, music_options, run_monte_carlo};
use elaa_harness::scenario::{self, parse_snr_range, Algorithm, ScenarioSpec, FULL_TRIALS};
use elaa_harness::{report, seed};

/// Single-snapshot DOA estimation experiments for a sparse two-ULA array.
#[derive(Parser)]
#[command(name = "elaa-doa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo run; writes one CSV row per (algorithm, SNR).
    Run(RunArgs),
    /// Fused MUSIC pseudospectrum of one seeded snapshot.
    Spectrum(SpectrumArgs),
    /// Array factor of the ELAA and of one sub-ULA.
    ArrayFactor(ArrayFactorArgs),
    /// Raw snapshot as little-endian f64 (re, im) pairs.
    Snapshot(SpectrumArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in name or TOML file.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    trials: Option<usize>,
    /// `a:b:step`, a single value, or `inf`.
    #[arg(long)]
    snr: Option<String>,
    /// Comma-separated algorithm names.
    #[arg(long)]
    algos: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Results CSV; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// Per-trial CSV.
    #[arg(long)]
    debug_out: Option<String>,
    /// Use the full trial count (5000).
    #[arg(long)]
    full: bool,
    /// Count failed trials in RMSE with a 90° (or truth-range) error.
    #[arg(long)]
    rmse_include_failures: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value = "30")]
    snr: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ArrayFactorArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    out: Option<String>,
    /// Grid step in degrees.
    #[arg(long, default_value_t = 0.01)]
    step: f64,
}

fn output(path: Option<&str>) -> Result<Box<dyn Write>> {
    match path {
        None | Some("-") => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => {
            let f = File::create(p).map_err(|e| HarnessError::Io { path: p.to_string(), source: e })?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

fn single_snr(text: &str) -> Result<f64> {
    match parse_snr_range(text)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(HarnessError::Usage(format!("--snr `{text}` must be a single value"))),
    }
}

fn apply_overrides(spec: &mut ScenarioSpec, args: &RunArgs) -> Result<()> {
    if args.full {
        spec.n_trials = FULL_TRIALS;
    }
    if let Some(n) = args.trials {
        if n == 0 {
            return Err(HarnessError::Usage("--trials must be at least 1".into()));
        }
        spec.n_trials = n;
    }
    if let Some(s) = &args.snr {
        spec.snr_grid_db = parse_snr_range(s)?;
    }
    if let Some(list) = &args.algos {
        spec.algorithms = list
            .split(',')
            .map(|name| {
                Algorithm::parse(name).ok_or_else(|| {
                    let known: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                    HarnessError::Usage(format!("unknown algorithm `{name}` (known: {})", known.join(", ")))
                })
            })
            .collect::<Result<_>>()?;
    }
    if let Some(s) = args.seed {
        spec.base_seed = s;
    }
    if args.rmse_include_failures {
        spec.rmse_include_failures = true;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let mut spec = scenario::load(&args.scenario)?;
    apply_overrides(&mut spec, &args)?;
    let report = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Usage(format!("--threads: {e}")))?
            .install(|| run_monte_carlo(&spec))?,
        None => run_monte_carlo(&spec)?,
    };
    report::write_results(&report.rows, output(args.out.as_deref())?)?;
    if let Some(path) = &args.debug_out {
        report::write_trials(&report.trials, output(Some(path))?)?;
    }
    for row in &report.rows {
        if let Some(rate) = row.association_rate {
            eprintln!("{} snr {}: association correct in {:.1}% of trials", row.algorithm, row.snr_db, 100.0 * rate);
        }
    }
    if report.worst_failure_rate() > 0.5 {
        eprintln!("more than half of the trials failed at some SNR point");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn spectrum(args: SpectrumArgs) -> Result<ExitCode> {
    let spec = scenario::load(&args.scenario)?;
    let snr = single_snr(&args.snr)?;
    let snap = make_snapshot(&spec, snr, seed::trial_seed(args.seed, "spectrum", 0, 0))?;
    let s = music_spectrum(&snap.y, &spec.array, spec.order(), &music_options(&spec, MusicAperture::Elaa))?;
    let mut out = output(args.out.as_deref())?;
    out.write_all(s.to_csv().as_bytes()).and_then(|_| out.flush()).map_err(|e| HarnessError::Io {
        path: args.out.unwrap_or_else(|| "stdout".into()),
        source: e,
    })?;
    Ok(ExitCode::SUCCESS)
}

fn snapshot(args: SpectrumArgs) -> Result<ExitCode> {
    let spec = scenario::load(&args.scenario)?;
    let snr = single_snr(&args.snr)?;
    let snap = make_snapshot(&spec, snr, seed::trial_seed(args.seed, "spectrum", 0, 0))?;
    let mut out = output(args.out.as_deref())?;
    out.write_all(&snap.to_le_bytes()).and_then(|_| out.flush()).map_err(|e| HarnessError::Io {
        path: args.out.unwrap_or_else(|| "stdout".into()),
        source: e,
    })?;
    Ok(ExitCode::SUCCESS)
}

fn array_factor_cmd(args: ArrayFactorArgs) -> Result<ExitCode> {
    let spec = scenario::load(&args.scenario)?;
    let grid: Vec<f64> = angle_grid(-90.0, 90.0, args.step)?;
    let elaa = array_factor(&spec.array, &grid, Aperture::Elaa);
    let sub = array_factor(&spec.array, &grid, Aperture::SubUla);
    let deg: Vec<f64> = grid.iter().map(|t| t.to_degrees()).collect();
    report::write_columns(&["angle_deg", "elaa_db", "sub_ula_db"], &[&deg, &elaa, &sub], output(args.out.as_deref())?)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Spectrum(a) => spectrum(a),
        Command::ArrayFactor(a) => array_factor_cmd(a),
        Command::Snapshot(a) => snapshot(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
