use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use spinforge::harness::experiments::{driven_check, DEFAULT_DRIVE};
use spinforge::harness::validate::oracle_suite;
use spinforge::harness::{resolve_threads, run_with_threads, Experiment, Format, Grid, Grids, ResultTable, SweepConfig};
use spinforge::models::{HamiltonianKind, HamiltonianSpec};
use spinforge::{CollectiveOps, Error};

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\nprofile: ",
    env!("SPINFORGE_PROFILE"),
    "\ntarget: ",
    env!("SPINFORGE_TARGET"),
);

#[derive(Parser, Debug)]
#[command(name = "spinforge", version, long_version = LONG_VERSION, about = "Floquet two-axis twisting sweeps")]
struct Cli {
    /// Write `<out>/<experiment>/<hash>.<ext>` instead of printing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (SPINFORGE_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Reserved; every computation is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EchoKind {
    Tatnt,
    Oat,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a sweep described by a JSON config.
    Run { config: PathBuf },
    /// F_Q^max/N² over (δ/(Nχ), χt) for ideal TATNT.
    QfiScan(QfiScanArgs),
    /// Optimal-readout precision against the QCRB along χt.
    Readout(ReadoutArgs),
    /// Gain against detection noise for optimal readout, cat-state parity and the QCRB.
    NoiseScan(NoiseArgs),
    /// Driven versus ideal TATNT across drive amplitudes.
    FloquetCheck(FloquetArgs),
    /// Mean-field trajectory along the upper separatrix.
    Semiclassical(SemiclassicalArgs),
    /// Compare against the 2^N tensor-product oracle.
    Validate,
}

#[derive(Args, Debug)]
struct QfiScanArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = -0.8, allow_negative_numbers = true)]
    delta_min: f64,
    #[arg(long, default_value_t = 0.8)]
    delta_max: f64,
    #[arg(long, default_value_t = 0.02)]
    delta_step: f64,
    #[arg(long, default_value_t = 0.25)]
    t_max: f64,
    #[arg(long, default_value_t = 0.002)]
    t_step: f64,
    /// Re-check the grid optimum with the driven Hamiltonian (report on stderr).
    #[arg(long)]
    validate_driven: bool,
}

#[derive(Args, Debug)]
struct ReadoutArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, value_enum, default_value_t = EchoKind::Tatnt)]
    protocol: EchoKind,
    #[arg(long, default_value_t = 0.3135)]
    delta: f64,
    #[arg(long, default_value_t = 0.15)]
    t_max: f64,
    #[arg(long, default_value_t = 0.005)]
    t_step: f64,
    #[arg(long, default_value_t = 1e-3)]
    phi: f64,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    sigma: Vec<f64>,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.3135)]
    delta: f64,
    #[arg(long, default_value_t = 0.12)]
    t: f64,
    #[arg(long, default_value_t = 1e-3)]
    phi: f64,
    #[arg(long, default_value_t = 3.0)]
    sigma_max: f64,
    #[arg(long, default_value_t = 0.25)]
    sigma_step: f64,
}

#[derive(Args, Debug)]
struct FloquetArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.3135)]
    delta: f64,
    #[arg(long, default_value_t = 0.132)]
    t: f64,
    /// Drive amplitudes Ω₀/(2πNχ).
    #[arg(long, value_delimiter = ',', default_value = "10,20,50,100")]
    omega0: Vec<f64>,
}

#[derive(Args, Debug)]
struct SemiclassicalArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.3135)]
    delta: f64,
    #[arg(long, default_value_t = 0.3)]
    t_max: f64,
    #[arg(long, default_value_t = 0.001)]
    t_step: f64,
}

fn list(v: f64) -> Option<Grid> {
    Some(Grid::List(vec![v]))
}

fn config_for(command: &Command) -> Result<Option<SweepConfig>, Error> {
    let cfg = match command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(config).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            SweepConfig::from_json(&text)?
        }
        Command::QfiScan(a) => SweepConfig::new(
            Experiment::QfiScan,
            Grids {
                n: list(a.n as f64),
                delta: Some(Grid::range(a.delta_min, a.delta_max, a.delta_step)),
                time: Some(Grid::range(0.0, a.t_max, a.t_step)),
                ..Default::default()
            },
        ),
        Command::Readout(a) => {
            let mut cfg = SweepConfig::new(
                Experiment::ReadoutScan,
                Grids {
                    n: list(a.n as f64),
                    delta: list(a.delta),
                    time: Some(Grid::range(0.0, a.t_max, a.t_step)),
                    phi: list(a.phi),
                    sigma: Some(Grid::List(a.sigma.clone())),
                    ..Default::default()
                },
            );
            if let EchoKind::Oat = a.protocol {
                cfg.model = HamiltonianSpec::oat(1.0);
            }
            cfg
        }
        Command::NoiseScan(a) => SweepConfig::new(
            Experiment::NoiseScan,
            Grids {
                n: list(a.n as f64),
                delta: list(a.delta),
                time: list(a.t),
                phi: list(a.phi),
                sigma: Some(Grid::range(0.0, a.sigma_max, a.sigma_step)),
                ..Default::default()
            },
        ),
        Command::FloquetCheck(a) => SweepConfig::new(
            Experiment::FloquetConvergence,
            Grids {
                n: list(a.n as f64),
                delta: list(a.delta),
                time: list(a.t),
                omega0: Some(Grid::List(a.omega0.clone())),
                ..Default::default()
            },
        ),
        Command::Semiclassical(a) => SweepConfig::new(
            Experiment::Semiclassical,
            Grids {
                n: list(a.n as f64),
                delta: list(a.delta),
                time: Some(Grid::range(0.0, a.t_max, a.t_step)),
                ..Default::default()
            },
        ),
        Command::Validate => return Ok(None),
    };
    cfg.validate()?;
    Ok(Some(cfg))
}

fn emit(table: &ResultTable, out: Option<&Path>, format: Format) -> Result<(), Error> {
    let text = match out {
        Some(dir) => format!("{}\n", table.write(dir, format)?.display()),
        None => table.render(format),
    };
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn report_driven(table: &ResultTable, cfg: &SweepConfig) -> Result<(), Error> {
    let (d, t, f) = (table.values("delta_over_Nchi")?, table.values("chi_t")?, table.values("fq_over_N2")?);
    let best = (0..f.len()).max_by(|&i, &j| f[i].total_cmp(&f[j])).ok_or(Error::NoSignal)?;
    let ops = CollectiveOps::new(cfg.grids.n_values()?[0])?;
    let check = driven_check(&ops, cfg.model.chi, cfg.model.alpha, d[best], t[best], DEFAULT_DRIVE, cfg.settings)?;
    eprintln!(
        "{}",
        json!({
            "delta_over_Nchi": d[best],
            "chi_t": t[best],
            "fq_ideal_over_N2": check.fq_ideal_over_n2,
            "fq_driven_over_N2": check.fq_driven_over_n2,
            "rel_gap": check.rel_gap,
        })
    );
    Ok(())
}

/// `Some(message)` when output was produced but part of it failed.
fn run(cli: &Cli) -> Result<Option<String>, Error> {
    let format = match cli.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    let threads = resolve_threads(cli.threads)?;
    let Some(cfg) = config_for(&cli.command)? else {
        let checks = oracle_suite();
        for c in &checks {
            println!("{} {} (max rel err {:.2e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.error);
        }
        let failed = checks.iter().filter(|c| !c.passed).count();
        println!("{} checks, {failed} failed", checks.len());
        return Ok((failed > 0).then(|| format!("{failed} oracle check(s) failed")));
    };
    if matches!(cli.command, Command::QfiScan(_)) && cfg.model.kind != HamiltonianKind::Tatnt {
        return Err(Error::Config("qfi-scan needs a TATNT model".into()));
    }
    let table = run_with_threads(&cfg, threads)?;
    let out = cli.out.as_deref().or(cfg.output_path.as_deref());
    emit(&table, out, format)?;
    if let Command::QfiScan(a) = &cli.command {
        if a.validate_driven {
            report_driven(&table, &cfg)?;
        }
    }
    // The table is already written; failed points still make the run non-clean.
    let failed = table.failures().count();
    if failed > 0 {
        return Ok(Some(format!("{failed} grid point(s) failed")));
    }
    Ok(None)
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("config", e.to_string().trim(), 1),
    };
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(message)) => fail("numerical", &message, 2),
        Err(e) if e.is_config() => fail("config", &e.to_string(), 1),
        Err(e) => fail("numerical", &e.to_string(), 2),
    }
}
