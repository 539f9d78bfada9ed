use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use magpsido::decay::{decay_fit, uniform_bound_sweep, FitMode, FitWindow, WeightFamily};
use magpsido::harness::{build_operator, collect_reports, SuiteOutcome};
use magpsido::persist::write_atomic;
use magpsido::relativistic::{kato_estimate, kato_limit_scan, semigroup_checks};
use magpsido::spectral::{discrete_spectrum_select, eig_hermitian, SpectralWindow};
use magpsido::{
    load_operator, run_scenario, save_operator, verify_suite, Grid, GridFunction, PotentialSpec, ScenarioConfig,
};

/// Magnetic pseudodifferential operators on truncated grids: build, inspect
/// and verify.
#[derive(Parser)]
#[command(name = "magpsido", version, about)]
struct Cli {
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true, env = "MAGPSIDO_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the scenario operator and save it as an MPDO1 file.
    Build {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `operator.mpdo` in the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalues of a saved operator as CSV (index, eigenvalue, gap, residual).
    Spectrum {
        #[arg(long)]
        op: PathBuf,
        /// Essential-spectrum threshold for counting discrete eigenvalues.
        #[arg(long)]
        threshold: f64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Decay fits of the lowest discrete eigenvector.
    Decay {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `essential_threshold` from the config.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Uniform relative-bound sweep of the weight-conjugated operator.
    Conjugate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        eps_list: Option<Vec<f64>>,
        /// `exp` or `poly:P`; defaults to the configured weight.
        #[arg(long)]
        weight: Option<String>,
    },
    /// Semigroup identities of the free relativistic kernel.
    Semigroup {
        #[arg(long)]
        t: f64,
        /// Second time in `p_t * p_s = p_{t+s}`; defaults to `t`.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long = "half-length", default_value_t = 40.0)]
        half_length: f64,
        #[arg(long, default_value_t = 2048)]
        points: usize,
    },
    /// Kato-class estimate of `|V|`, optionally as a scan over halving times.
    Kato {
        #[arg(long)]
        potential: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        t_scan: bool,
        #[arg(long, default_value_t = 5)]
        levels: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long = "half-length", default_value_t = 30.0)]
        half_length: f64,
        #[arg(long, default_value_t = 256)]
        points: usize,
    },
    /// Run one suite against a scenario.
    Verify {
        suite: String,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run whole scenarios, in parallel across configs.
    Run {
        #[arg(long, required = true, num_args = 1..)]
        config: Vec<PathBuf>,
    },
    /// Index every report.json under a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the JSON schema of scenario configs.
    Schema,
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ScenarioConfig::from_json(&text).with_context(|| format!("config {}", path.display()))
}

fn print_suite(outcome: &SuiteOutcome) {
    println!("{} {}", outcome.suite, if outcome.passed { "PASS" } else { "FAIL" });
    for c in &outcome.checks {
        println!(
            "  {:<4} {:<28} {:>12.4e}  {:?} {:e}  margin {:.3e}{}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.value,
            c.comparison,
            c.threshold,
            c.margin,
            c.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default()
        );
    }
    if let Some(e) = &outcome.error {
        println!("  error: {e}");
    }
}

fn build(config: &Path, out: Option<PathBuf>) -> Result<bool> {
    let cfg = load_config(config)?;
    let op = build_operator(&cfg)?;
    let out = out.unwrap_or_else(|| cfg.output.dir.clone().unwrap_or_default().join("operator.mpdo"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let hash = save_operator(&op, &out)?;
    println!(
        "{}: {} x {}, hermiticity defect {:.3e}, sha256 {hash}",
        out.display(),
        op.dim(),
        op.dim(),
        op.hermiticity_defect()
    );
    Ok(true)
}

fn spectrum(op: &Path, threshold: f64, csv: Option<PathBuf>) -> Result<bool> {
    let h = load_operator(op)?;
    let dec = eig_hermitian(&h)?;
    let discrete = discrete_spectrum_select(&dec, &SpectralWindow::new(threshold, 1e-6)?);
    let table = dec.to_csv()?;
    match csv {
        Some(path) => write_atomic(&path, table.as_bytes())?,
        None => print!("{table}"),
    }
    eprintln!("{} eigenvalues below {threshold}", discrete.len());
    Ok(true)
}

fn decay(config: &Path, threshold: Option<f64>) -> Result<bool> {
    let cfg = load_config(config)?;
    let threshold = threshold
        .or(cfg.essential_threshold)
        .context("no threshold: pass --threshold or set essential_threshold")?;
    let grid = cfg.grid()?;
    let dec = eig_hermitian(&build_operator(&cfg)?)?;
    let discrete = discrete_spectrum_select(&dec, &SpectralWindow::new(threshold, 1e-6)?);
    let Some(first) = discrete.first() else {
        bail!("no eigenvalue below {threshold}");
    };
    let u = GridFunction::new(grid, first.eigenvector.clone())?;
    let window = cfg
        .window()
        .unwrap_or_else(|| FitWindow::default_for(grid.half_length()));
    println!(
        "eigenvalue {} (index {}, gap {:.4e})",
        first.eigenvalue, first.index, first.gap
    );
    for mode in [FitMode::Exponential, FitMode::Polynomial] {
        let fit = decay_fit(&u, mode, Some(window))?;
        println!("{}", serde_json::to_string(&fit)?);
    }
    Ok(true)
}

fn conjugate(config: &Path, eps_list: Option<Vec<f64>>, weight: Option<String>) -> Result<bool> {
    let cfg = load_config(config)?;
    let weight = match weight {
        Some(w) => WeightFamily::parse(&w)?,
        None => cfg.weight()?,
    };
    let eps_list = eps_list.unwrap_or_else(|| cfg.eps_list.clone());
    let sweep = uniform_bound_sweep(&build_operator(&cfg)?, &weight, &eps_list)?;
    print!("{}", sweep.to_csv()?);
    eprintln!("{weight}: variation {:.3}", sweep.variation());
    Ok(true)
}

fn kato(potential: &str, t: f64, scan: bool, levels: usize, grid: Grid) -> Result<bool> {
    let v = PotentialSpec::parse(potential)?;
    let (plus, minus) = v.node_values(&grid)?;
    let w: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| p + m).collect();
    if scan {
        let rep = kato_limit_scan(&w, t, levels, &grid)?;
        print!("{}", rep.to_csv()?);
        eprintln!("log slope {:.4}, monotone {}", rep.log_slope, rep.monotone);
    } else {
        println!("{:.12e}", kato_estimate(&w, t, &grid)?);
    }
    Ok(true)
}

fn run(configs: &[PathBuf]) -> Result<bool> {
    let loaded = configs.iter().map(|p| load_config(p)).collect::<Result<Vec<_>>>()?;
    let reports: Vec<_> = loaded.par_iter().map(run_scenario).collect();
    let mut all = true;
    for (path, rep) in configs.iter().zip(reports) {
        let rep = rep.with_context(|| format!("scenario {}", path.display()))?;
        println!("== {} ({})", path.display(), &rep.config_hash[..12]);
        for s in &rep.suites {
            print_suite(s);
        }
        all &= rep.passed && rep.complete;
    }
    Ok(all)
}

fn report(input: &Path, out: &Path) -> Result<bool> {
    let index = collect_reports(input)?;
    write_atomic(out, serde_json::to_string_pretty(&index)?.as_bytes())?;
    for e in &index.reports {
        println!(
            "{} {} {}",
            if e.passed { "PASS" } else { "FAIL" },
            e.path.display(),
            if e.complete { "" } else { "(incomplete)" }
        );
    }
    if index.reports.is_empty() {
        warn!("no report.json under {}", input.display());
    }
    Ok(index.passed && index.complete)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Build { config, out } => build(&config, out),
        Command::Spectrum { op, threshold, csv } => spectrum(&op, threshold, csv),
        Command::Decay { config, threshold } => decay(&config, threshold),
        Command::Conjugate {
            config,
            eps_list,
            weight,
        } => conjugate(&config, eps_list, weight),
        Command::Semigroup {
            t,
            s,
            half_length,
            points,
        } => {
            let rep = semigroup_checks(t, s.unwrap_or(t), &Grid::new(1, half_length, points)?)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(true)
        }
        Command::Kato {
            potential,
            t,
            t_scan,
            levels,
            dim,
            half_length,
            points,
        } => kato(&potential, t, t_scan, levels, Grid::new(dim, half_length, points)?),
        Command::Verify { suite, config } => {
            let outcome = verify_suite(&suite, &load_config(&config)?)?;
            print_suite(&outcome);
            Ok(outcome.passed)
        }
        Command::Run { config } => run(&config),
        Command::Report { input, out } => report(&input, &out),
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&ScenarioConfig::json_schema())?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("could not size the thread pool: {e}");
        }
        info!("using {n} worker threads");
    }
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
