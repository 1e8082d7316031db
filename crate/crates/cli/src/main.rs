//! `jcas`: run single designs, Monte-Carlo sweeps and the invariant self-check.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jcas_core::config::default_jcas_grid;
use jcas_core::covariance::solve_covariance_set;
use jcas_core::evaluation::precoder_beampattern;
use jcas_core::linalg::CMat;
use jcas_core::pipeline::{comm_precoders, run_algorithm1_on_grid, RunManifest};
use jcas_core::selfcheck::{self, Hooks};
use jcas_core::table::{self, format_sig6};
use jcas_core::{
    generate_rayleigh, realization_seed, sweep, BeamGrid, ChannelSet, ExperimentConfig, JcasError,
    SweepSettings, SystemConfig,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "jcas", version, about = "JCAS beamformer design for multi-carrier MIMO")]
struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// More logging on stderr (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the design once on one channel realization.
    Design(DesignArgs),
    /// Average rate and beampattern MSE over a grid of (SNR, rho, J).
    Sweep(SweepArgs),
    /// Run the fast invariant suite.
    Selfcheck(SelfcheckArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration. Without one, the 8x4, 64-subcarrier reference setup is used.
    config: Option<PathBuf>,

    #[arg(long, env = "JCAS_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,

    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    common: Common,

    #[arg(long, allow_negative_numbers = true)]
    snr: Option<f64>,

    #[arg(long)]
    rho: Option<f64>,

    #[arg(long)]
    jcas: Option<usize>,

    /// Read the channel matrices from a columnar matrix file instead of drawing them.
    #[arg(long)]
    channels: Option<PathBuf>,

    /// Write one RCG trace per JCAS subcarrier under `traces/`.
    #[arg(long)]
    dump_traces: bool,

    /// Write the covariance solver residuals per JCAS subcarrier under `residuals/`.
    #[arg(long)]
    dump_residuals: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,

    /// Comma-separated SNR list in dB.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,

    #[arg(long, value_delimiter = ',', num_args = 0..)]
    rho: Option<Vec<f64>>,

    #[arg(long, value_delimiter = ',', num_args = 0..)]
    jcas: Option<Vec<usize>>,

    #[arg(long)]
    realizations: Option<usize>,

    /// Reduced fidelity: 10 dB only and at most 10 realizations, unless
    /// `--snr` or `--realizations` say otherwise.
    #[arg(long)]
    fast: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    Gradient,
}

#[derive(Args)]
struct SelfcheckArgs {
    #[arg(long, hide = true)]
    inject_fault: Option<Fault>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Design(args) => cmd_design(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Selfcheck(args) => return cmd_selfcheck(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &JcasError) -> u8 {
    if e.is_config() || matches!(e, JcasError::Format { .. }) {
        2
    } else if matches!(e, JcasError::Io(_)) {
        1
    } else {
        3
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn load(path: Option<&Path>) -> jcas_core::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_path(p),
        None => {
            let system = SystemConfig::default();
            let sweep = SweepSettings {
                jcas: default_jcas_grid(system.n_subcarriers),
                ..SweepSettings::default()
            };
            Ok(ExperimentConfig { system, sweep })
        }
    }
}

fn create(path: &Path) -> jcas_core::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> jcas_core::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_design(args: DesignArgs) -> jcas_core::Result<()> {
    let exp = load(args.common.config.as_deref())?;
    let mut cfg = exp.system;
    if let Some(snr) = args.snr {
        cfg = cfg.with_snr_db(snr);
    }
    if let Some(rho) = args.rho {
        cfg.rho = rho;
    }
    if let Some(j) = args.jcas {
        cfg.n_jcas = j;
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;

    let grid = BeamGrid::new(&cfg)?;
    let channels = match &args.channels {
        Some(p) => {
            let ch = ChannelSet::import(p)?;
            ch.check_shape(&cfg)
                .map_err(|e| JcasError::config("channels", e.to_string()))?;
            ch
        }
        None => generate_rayleigh(&cfg, realization_seed(cfg.seed, 0)),
    };

    // Residual traces are only recorded when asked for, so the covariances
    // are then solved up front and handed over as a bank.
    let bank = if args.dump_residuals {
        let rates: Vec<f64> = comm_precoders(&channels, &cfg)?.iter().map(|e| e.rate).collect();
        let jcas = jcas_core::select_jcas_subcarriers(&rates, cfg.n_jcas)?;
        Some(solve_covariance_set(&grid, &cfg, &jcas, true)?)
    } else {
        None
    };
    let out = run_algorithm1_on_grid(&channels, &cfg, &grid, bank.as_ref())?;

    let dir = &args.common.out_dir;
    fs::create_dir_all(dir)?;
    write_json(&dir.join("manifest.json"), &RunManifest::new(&cfg, &grid, cfg.seed, &out))?;

    let bf = &out.beamformers;
    let mut w = csv::Writer::from_writer(create(&dir.join("rates.csv"))?);
    w.write_record(["subcarrier", "jcas", "step1_rate", "final_rate"])
        .map_err(JcasError::from)?;
    for k in 0..cfg.n_subcarriers {
        w.write_record([
            k.to_string(),
            u8::from(bf.jcas_set.contains(&k)).to_string(),
            format_sig6(out.step1_rates[k]),
            format_sig6(out.final_rates[k]),
        ])
        .map_err(JcasError::from)?;
    }
    w.flush()?;

    if !bf.jcas_set.is_empty() {
        let mut mean = vec![0.0; grid.n_angles()];
        for &k in &bf.jcas_set {
            for (m, g) in mean.iter_mut().zip(precoder_beampattern(&bf.precoders[k], &grid, k)) {
                *m += g / bf.jcas_set.len() as f64;
            }
        }
        let rows: Vec<_> = grid
            .angles
            .iter()
            .zip(&mean)
            .map(|(&t, &g)| table::BeampatternRow::new(t, g, cfg.rho, cfg.n_jcas))
            .collect();
        table::write_beampattern(create(&dir.join("beampattern.csv"))?, &rows)?;
    }

    jcas_core::columnar::write_matrices_to_path(
        dir.join("precoders.txt"),
        None,
        bf.precoders.iter().enumerate().map(|(k, f): (usize, &CMat)| (k, f)),
    )?;
    out.covariances.export(dir.join("covariances.txt"))?;

    if args.dump_traces {
        for (k, trace) in &out.rcg_traces {
            let mut w = create(&dir.join("traces").join(format!("rcg_k{k:03}.csv")))?;
            trace.write_delimited(&mut w)?;
            w.flush()?;
        }
    }
    if args.dump_residuals {
        for (k, sol) in &out.covariances.entries {
            let mut w = create(&dir.join("residuals").join(format!("covariance_k{k:03}.csv")))?;
            writeln!(w, "iteration,primal_residual,dual_residual,penalty,objective")?;
            for it in &sol.trace {
                writeln!(
                    w,
                    "{},{:e},{:e},{:e},{:e}",
                    it.iteration, it.primal_residual, it.dual_residual, it.penalty, it.objective
                )?;
            }
            w.flush()?;
        }
    }

    println!(
        "average rate {:.4} bits/s/Hz (step 1: {:.4}), beampattern MSE {}",
        out.average_rate(),
        out.average_step1_rate(),
        jcas_core::beampattern_mse(&bf.precoders, &bf.jcas_set, &grid, cfg.design_power())
            .map(|m| format!("{m:.4}"))
            .unwrap_or_else(|| "n/a".into())
    );
    println!("wrote {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    config: &'a SystemConfig,
    sweep: &'a SweepSettings,
    seed: u64,
    n_subcarriers: usize,
}

fn cmd_sweep(args: SweepArgs) -> jcas_core::Result<()> {
    let exp = load(args.common.config.as_deref())?;
    let cfg = exp.system;
    let mut settings = exp.sweep;
    if args.fast {
        settings.snr_db = vec![10.0];
        settings.realizations = settings.realizations.min(10);
    }
    if let Some(snr) = args.snr {
        settings.snr_db = snr;
    }
    if let Some(rho) = args.rho {
        settings.rho = rho;
    }
    if let Some(jcas) = args.jcas {
        settings.jcas = jcas;
    }
    if let Some(n) = args.realizations {
        settings.realizations = n;
    }
    let seed = args.common.seed.unwrap_or(cfg.seed);

    let out = sweep(&cfg, &settings, seed)?;

    let dir = &args.common.out_dir;
    fs::create_dir_all(dir)?;
    table::write_tradeoff(create(&dir.join("tradeoff.csv"))?, &table::tradeoff_rows(&out))?;
    for (s, snr) in settings.snr_db.iter().enumerate() {
        let tag = snr.to_string();
        table::write_beampattern(
            create(&dir.join(format!("beampattern_snr{tag}.csv")))?,
            &table::beampattern_rows(&out, s, false),
        )?;
        table::write_beampattern(
            create(&dir.join(format!("beampattern_median_k_snr{tag}.csv")))?,
            &table::beampattern_rows(&out, s, true),
        )?;
    }
    let ideal: Vec<_> = out
        .angles
        .iter()
        .zip(&out.ideal)
        .map(|(&t, &g)| table::BeampatternRow::new(t, g, f64::NAN, 0))
        .collect();
    let mut w = csv::Writer::from_writer(create(&dir.join("ideal.csv"))?);
    w.write_record(["theta_deg", "gain"]).map_err(JcasError::from)?;
    for r in &ideal {
        w.write_record([format_sig6(r.theta), format_sig6(r.gain)])
            .map_err(JcasError::from)?;
    }
    w.flush()?;
    write_json(
        &dir.join("sweep.json"),
        &SweepManifest {
            config: &cfg,
            sweep: &settings,
            seed,
            n_subcarriers: out.n_subcarriers,
        },
    )?;

    for row in table::tradeoff_rows(&out) {
        println!(
            "snr={} rho={} J={} rate={} mse={}",
            format_sig6(row.snr),
            format_sig6(row.rho),
            row.n_jcas,
            format_sig6(row.avg_rate),
            row.avg_mse.map(format_sig6).unwrap_or_else(|| "n/a".into())
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

/// Gradient with the factor 4 dropped, used to prove the self-check catches it.
fn faulty_gradient(f: &CMat, r: &CMat, f_hat: &CMat, rho: f64) -> CMat {
    let good = jcas_core::manifold::euclidean_gradient(f, r, f_hat, rho);
    let cov = f * f.adjoint() - r;
    good - (cov * f) * jcas_core::C64::new(3.0 * rho, 0.0)
}

fn cmd_selfcheck(args: SelfcheckArgs) -> ExitCode {
    let hooks = match args.inject_fault {
        Some(Fault::Gradient) => Hooks {
            gradient: faulty_gradient,
        },
        None => Hooks::default(),
    };
    let results = selfcheck::run(&hooks);
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        println!("all {} properties passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::from(1)
    }
}
