mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{Mode, Overrides, Scenario};
use run::{RunRecord, Status};

const EXIT_SCHEMA: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "cmbec", version, about = "Trapped 1D Bose gas under continuous center-of-mass measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ground states by imaginary-time propagation.
    Gpe(Common),
    /// Closed second-moment equations and the relative spreading table.
    Meanfield(Common),
    /// Stochastic positive-P ensembles with and without measurement.
    Positivep(Common),
    /// Mean-field and positive-P side by side.
    Compare(Common),
    /// Positive-P against the exact master equation on a tiny lattice.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Archived oracle values to compare the recomputed ones against.
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Write the recomputed oracle values to this file.
        #[arg(long)]
        write_fixture: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML scenario file; defaults reproduce the reference setup.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    trajectories: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Comma-separated interaction strengths g1D N.
    #[arg(long, value_delimiter = ',')]
    g1d_n: Option<Vec<f64>>,
    /// Comma-separated measurement strengths.
    #[arg(long, value_delimiter = ',')]
    kappa_tilde: Option<Vec<f64>>,
    /// Directory for resumable ensemble checkpoints.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            trajectories: self.trajectories,
            dt: self.dt,
            t_final: self.t_final,
            g1d_n: self.g1d_n.clone(),
            kappa_tilde: self.kappa_tilde.clone(),
            checkpoint_dir: self.checkpoint_dir.clone(),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    mode: &'static str,
    config_file: Option<&'a PathBuf>,
    scenario_hash: String,
    seed: u64,
    threads: usize,
    started_unix: u64,
    wall_seconds: f64,
    status: Status,
    scenario: &'a Scenario,
    runs: &'a [RunRecord],
    outputs: &'a [String],
    warnings: &'a [String],
}

/// SHA-256 of the resolved scenario with output locations blanked, first 16 hex digits.
fn scenario_hash(sc: &Scenario) -> String {
    use sha2::{Digest, Sha256};
    let mut physics = sc.clone();
    physics.out_dir = PathBuf::new();
    physics.checkpoint_dir = None;
    let text = toml::to_string(&physics).expect("scenario serializes");
    Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common, fixture, write_fixture) = match cli.command {
        Command::Gpe(c) => (Mode::Gpe, c, None, None),
        Command::Meanfield(c) => (Mode::Meanfield, c, None, None),
        Command::Positivep(c) => (Mode::Positivep, c, None, None),
        Command::Compare(c) => (Mode::Compare, c, None, None),
        Command::OracleCheck { common, fixture, write_fixture } => (Mode::OracleCheck, common, fixture, write_fixture),
    };

    let mut scenario = match Scenario::load(common.config.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SCHEMA);
        }
    };
    scenario.apply(&common.overrides());
    if fixture.is_some() {
        scenario.oracle.fixture = fixture;
    }
    if let Err(e) = scenario.validate(mode) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_SCHEMA);
    }
    if let Some(n) = common.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_SCHEMA);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }

    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let report = match run::execute(mode, &scenario, write_fixture.as_deref()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let status = report.status();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        core_version: cmbec::VERSION,
        mode: mode.as_str(),
        config_file: common.config.as_ref(),
        scenario_hash: scenario_hash(&scenario),
        seed: scenario.sim.seed,
        threads: rayon::current_num_threads(),
        started_unix,
        wall_seconds: clock.elapsed().as_secs_f64(),
        status,
        scenario: &scenario,
        runs: &report.runs,
        outputs: &report.outputs,
        warnings: &report.warnings,
    };
    let path = scenario.out_dir.join("manifest.json");
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(std::io::Error::other)
        .and_then(|text| std::fs::write(&path, text + "\n"));
    if let Err(e) = written {
        eprintln!("error: cannot write {}: {e}", path.display());
        return ExitCode::from(1);
    }

    for r in report.runs.iter().filter(|r| r.status != Status::Ok) {
        eprintln!(
            "{} g1D N = {}, kappa~ = {}: {:?} {}",
            r.tier,
            r.g1d_n,
            r.kappa_tilde,
            r.status,
            r.error.as_deref().unwrap_or("")
        );
    }
    for w in report.warnings.iter().filter(|w| w.starts_with("fixture")) {
        eprintln!("error: {w}");
    }
    eprintln!("{}: {:?}, manifest at {}", mode.as_str(), status, path.display());
    ExitCode::from(status.exit_code() as u8)
}
