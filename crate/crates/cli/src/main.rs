//! `spinmem`: run spin-resonator and memory models from scenario files.

mod commands;
mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use commands::{Failure, Output, Table};
use scenario::{Diagnostic, Scenario};

const ENV_OUT: &str = "SPINMEM_OUT";

const BUNDLED: [(&str, &str); 5] = [
    ("free-electron", include_str!("../scenarios/free-electron.toml")),
    ("P:Si-like", include_str!("../scenarios/p-si-like.toml")),
    ("Bi:Si-like", include_str!("../scenarios/bi-si-like.toml")),
    ("3D-cavity-Xband", include_str!("../scenarios/3d-cavity-xband.toml")),
    (
        "planar-LC-probst-like",
        include_str!("../scenarios/planar-lc-probst-like.toml"),
    ),
];

#[derive(Parser)]
#[command(
    name = "spinmem",
    version,
    about = "Spin-ensemble memory and pulsed-ESR design calculations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scenario: Option<PathBuf>,
    /// Bundled scenario name instead of a file (see `spinmem presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory [default: $SPINMEM_OUT or ./spinmem-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Energy levels over a field range and transitions at the operating field.
    Spectrum(Common),
    /// Field-insensitive ESR transitions in the field range.
    ClockFind(Common),
    /// Single-spin coupling to a wire resonator's vacuum field.
    Coupling(Common),
    /// Cavity-enhanced relaxation, on and off resonance.
    Purcell(Common),
    /// Coupling-regime classification and the minimum Q for strong coupling.
    Regime(Common),
    /// Store/retrieve simulation of the multi-mode memory.
    MemorySim(Common),
    /// Echo SNR, minimum detectable spins and sensitivity per √Hz.
    Sensitivity(Common),
    /// Parameter sweeps declared in the scenario, run in parallel.
    Sweep(Common),
    /// Check a scenario without running anything.
    Validate {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
    },
    /// List the bundled scenarios.
    Presets,
}

impl Command {
    fn parts(&self) -> Option<(&'static str, &Common)> {
        Some(match self {
            Command::Spectrum(c) => ("spectrum", c),
            Command::ClockFind(c) => ("clock-find", c),
            Command::Coupling(c) => ("coupling", c),
            Command::Purcell(c) => ("purcell", c),
            Command::Regime(c) => ("regime", c),
            Command::MemorySim(c) => ("memory-sim", c),
            Command::Sensitivity(c) => ("sensitivity", c),
            Command::Sweep(c) => ("sweep", c),
            Command::Validate { .. } | Command::Presets => return None,
        })
    }
}

/// Source text and a label for diagnostics.
fn load(scenario: Option<&Path>, preset: Option<&str>) -> Result<(String, String), ExitCode> {
    if let Some(name) = preset {
        return match BUNDLED.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)) {
            Some((n, src)) => Ok((format!("preset:{n}"), src.to_string())),
            None => {
                let names: Vec<_> = BUNDLED.iter().map(|(n, _)| *n).collect();
                eprintln!("error: unknown preset '{name}' (known: {})", names.join(", "));
                Err(ExitCode::from(2))
            }
        };
    }
    let path = scenario.expect("clap requires a scenario or preset");
    match fs::read_to_string(path) {
        Ok(src) => Ok((path.display().to_string(), src)),
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            Err(ExitCode::from(1))
        }
    }
}

fn report_diagnostics(label: &str, diags: &[Diagnostic]) {
    for d in diags {
        match d.line {
            Some(l) => eprintln!("{label}:{l}: {}: {}", d.path, d.message),
            None => eprintln!("{label}: {}: {}", d.path, d.message),
        }
    }
}

fn parse_and_validate(label: &str, src: &str) -> Result<Scenario, ExitCode> {
    let sc = scenario::parse(src).map_err(|d| {
        report_diagnostics(label, &[d]);
        ExitCode::from(2)
    })?;
    let diags = sc.validate(src);
    if !diags.is_empty() {
        report_diagnostics(label, &diags);
        return Err(ExitCode::from(2));
    }
    Ok(sc)
}

fn slug(s: &str) -> String {
    let mut out: String = s
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    while out.contains("--") {
        out = out.replace("--", "-");
    }
    out.trim_matches('-').to_string()
}

fn write_csv(path: &Path, t: &Table) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| e.to_string())?;
    w.write_record(&t.headers).map_err(|e| e.to_string())?;
    for row in &t.rows {
        w.write_record(row.iter().map(|x| format!("{x:e}")))
            .map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

fn write_outputs(
    dir: &Path,
    stem: &str,
    command: &str,
    scenario: &Scenario,
    output: &Output,
    format: Format,
) -> Result<Vec<PathBuf>, String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let mut written = Vec::new();
    if format != Format::Csv {
        let report = json!({
            "command": command,
            "scenario": scenario.name,
            "timestamp": chrono::Utc::now().to_rfc3339(),
            "seed": scenario.seed,
            "units": "frequencies and rates in Hz unless suffixed otherwise; fields in T; lengths in m; times in s",
            "assumptions": scenario.assumptions(),
            "inputs": scenario,
            "results": output.results,
        });
        let path = dir.join(format!("{stem}-{command}.json"));
        let text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
        fs::write(&path, text + "\n").map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        written.push(path);
    }
    if format != Format::Json {
        for t in &output.tables {
            let path = dir.join(format!("{stem}-{command}-{}.csv", t.name));
            write_csv(&path, t).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Presets => {
            for (name, _) in BUNDLED {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { scenario, preset } => {
            let (label, src) = match load(scenario.as_deref(), preset.as_deref()) {
                Ok(x) => x,
                Err(code) => return code,
            };
            match parse_and_validate(&label, &src) {
                Ok(_) => {
                    println!("{label}: valid");
                    ExitCode::SUCCESS
                }
                Err(code) => code,
            }
        }
        cmd => {
            let (name, common) = cmd.parts().expect("runnable command");
            let (label, src) = match load(common.scenario.as_deref(), common.preset.as_deref()) {
                Ok(x) => x,
                Err(code) => return code,
            };
            let mut sc = match parse_and_validate(&label, &src) {
                Ok(s) => s,
                Err(code) => return code,
            };
            if let Some(seed) = common.seed {
                sc.seed = Some(seed);
            }
            if let Some(n) = common.threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: thread pool: {e}");
                }
            }
            let output = match commands::run(name, &sc) {
                Ok(o) => o,
                Err(f) => {
                    eprintln!("{label}: {f}");
                    return ExitCode::from(match f {
                        Failure::Invalid(_) => 2,
                        Failure::Numerical(_) => 3,
                    });
                }
            };
            let dir = common
                .out
                .clone()
                .or_else(|| std::env::var_os(ENV_OUT).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("spinmem-out"));
            let stem = sc
                .name
                .as_deref()
                .map(slug)
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| {
                    common
                        .scenario
                        .as_deref()
                        .and_then(|p| p.file_stem())
                        .map(|s| slug(&s.to_string_lossy()))
                        .unwrap_or_else(|| "scenario".into())
                });
            match write_outputs(&dir, &stem, name, &sc, &output, common.format) {
                Ok(paths) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
