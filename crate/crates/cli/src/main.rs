use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use wrinkle::analysis::{overhead, time_scenario, write_recovery_csv, write_timing_csv, RecoveryPoint, TimingRow};
use wrinkle::inelastic::ModelSelector;
use wrinkle::material::{preset, PresetFamily};
use wrinkle::scenario::library::{canonical, Params, NAMES};
use wrinkle::scenario::output::{run_to_dir, OutputOptions};
use wrinkle::scenario::{run, Jitter, MaterialSpec, Runner, Scenario};
use wrinkle::Error;

/// Cloth simulator with time-dependent internal friction and plasticity.
#[derive(Parser, Debug)]
#[command(name = "wrinkle", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write OBJ snapshots, measurements and a manifest.
    Simulate(SimulateArgs),
    /// Run a scenario over several hold times and write one recovery curve per material.
    Sweep(SweepArgs),
    /// Time steps of the twist scene with the inelastic model on and off.
    Bench(BenchArgs),
    /// Check a scenario and material without running it.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Clone)]
struct ScenarioArgs {
    /// Canonical scenario name or path to a scenario JSON file.
    #[arg(long)]
    scenario: String,
    /// Model selector: paper, dahl, hardening_only or elastic.
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelSelector>,
    /// Time step (s). Canonical scenarios only.
    #[arg(long)]
    h: Option<f64>,
    /// Grid vertices per side, or vertices around the cylinder. Canonical scenarios only.
    #[arg(long)]
    resolution: Option<usize>,
    /// Simulated seconds between release and the final measurement. Canonical scenarios only.
    #[arg(long)]
    settle: Option<f64>,
    /// Fold or twist angle (rad). Canonical scenarios only.
    #[arg(long)]
    angle: Option<f64>,
    /// Seed for random vertex jitter. Jitter is off unless a seed is given.
    #[arg(long)]
    seed: Option<u64>,
    /// Jitter amplitude (m), used with --seed.
    #[arg(long, default_value_t = 1e-4)]
    jitter: f64,
    /// Worker threads inside a run.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Material preset.
    #[arg(long)]
    material: Option<String>,
    /// Dwell of the hold phase (s). Canonical scenarios only.
    #[arg(long)]
    hold: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write per-step solver statistics.
    #[arg(long)]
    solver_stats: bool,
    /// Also write per-hinge friction and plastic state at the end of the run.
    #[arg(long)]
    diagnostics: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Hold times (s), comma separated. At least two.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    holds: Vec<f64>,
    /// Material presets, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "cotton,denim,polyester")]
    materials: Vec<String>,
    /// Output directory; each material gets `<material>/recovery_curve.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Target vertex counts, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "2000")]
    sizes: Vec<usize>,
    /// Material preset.
    #[arg(long, default_value = "cotton")]
    material: String,
    /// Measured steps per run (at least 50).
    #[arg(long, default_value_t = 50)]
    steps: usize,
    /// Unmeasured steps before timing starts.
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    /// Worker threads inside a run.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output directory for timing.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long)]
    material: Option<String>,
    #[arg(long)]
    hold: Option<f64>,
}

fn parse_model(s: &str) -> Result<ModelSelector, String> {
    ModelSelector::parse(s).ok_or_else(|| {
        let names: Vec<_> = ModelSelector::ALL.iter().map(|m| m.name()).collect();
        format!("unknown model `{s}`; valid models: {}", names.join(", "))
    })
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_solver_failure() { 1 } else { 2 };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::config(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn check_material(name: &str) -> CliResult<()> {
    preset(name, PresetFamily::Specimen)?;
    Ok(())
}

/// Builds the scenario from a canonical name or a JSON file, applying overrides.
fn build_scenario(a: &ScenarioArgs, material: Option<&str>, hold: Option<f64>) -> CliResult<(Scenario, Option<PathBuf>)> {
    if let Some(m) = material {
        check_material(m)?;
    }
    let (mut s, base) = if NAMES.contains(&a.scenario.as_str()) {
        let d = Params::default();
        let p = Params {
            material: material.map_or(d.material.clone(), str::to_string),
            hold: hold.unwrap_or(d.hold),
            h: a.h.unwrap_or(d.h),
            model: a.model.unwrap_or(d.model),
            resolution: a.resolution,
            angle: a.angle,
            settle: a.settle.unwrap_or(d.settle),
            ..d
        };
        (canonical(&a.scenario, &p)?, None)
    } else {
        let path = Path::new(&a.scenario);
        if !path.is_file() {
            return Err(Failure::config(format!(
                "`{}` is neither a canonical scenario ({}) nor a readable file",
                a.scenario,
                NAMES.join(", ")
            )));
        }
        if hold.is_some() || a.h.is_some() || a.resolution.is_some() || a.settle.is_some() || a.angle.is_some() {
            return Err(Failure::config(
                "--hold, --h, --resolution, --settle and --angle apply to canonical scenarios only",
            ));
        }
        let mut s = Scenario::from_json(&fs::read_to_string(path)?)?;
        if let Some(m) = material {
            s.material = MaterialSpec::Name(m.to_string());
        }
        if let Some(m) = a.model {
            s.model = m;
        }
        if s.name.is_empty() {
            s.name = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        }
        (s, path.parent().map(Path::to_path_buf))
    };
    if let Some(seed) = a.seed {
        if !(a.jitter >= 0.0 && a.jitter.is_finite()) {
            return Err(Failure::config("--jitter must be finite and >= 0"));
        }
        s.mesh.jitter = Some(Jitter { seed, amplitude: a.jitter });
    }
    s.validate()?;
    Ok((s, base))
}

fn pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    if threads == 0 {
        return Err(Failure::config("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Failure::config(e.to_string()))
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let (s, base) = build_scenario(&a.common, a.material.as_deref(), a.hold)?;
    let opts = OutputOptions { solver_stats: a.solver_stats, diagnostics: a.diagnostics, threads: a.common.threads };
    let pool = pool(a.common.threads)?;
    info!("running `{}` into {}", s.name, a.out.display());
    let (_, manifest) = pool.install(|| run_to_dir(&s, base.as_deref(), &a.out, opts, a.common.seed))?;
    for w in &manifest.warnings {
        warn!("{w}");
        eprintln!("warning: {w}");
    }
    println!("{} steps, {} snapshots written to {}", manifest.steps, manifest.snapshots, a.out.display());
    Ok(())
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    if a.holds.len() < 2 {
        return Err(Failure::config(format!("a sweep needs at least 2 hold times, got {}", a.holds.len())));
    }
    if a.materials.is_empty() {
        return Err(Failure::config("no materials given"));
    }
    for m in &a.materials {
        check_material(m)?;
    }
    let mut holds = a.holds.clone();
    holds.sort_by(f64::total_cmp);
    // Check every cell's configuration before spending time on runs.
    for m in &a.materials {
        for &h in &holds {
            build_scenario(&a.common, Some(m), Some(h))?;
        }
    }
    let pool = pool(a.common.threads)?;
    let mut failed = 0usize;
    for m in &a.materials {
        let mut points = Vec::new();
        for &h in &holds {
            let (s, _) = build_scenario(&a.common, Some(m), Some(h))?;
            match pool.install(|| run(&s)) {
                Ok((_, r)) => match r.measurements.iter().rev().find_map(|x| x.recovery_pct) {
                    Some(pct) => {
                        info!("{m} hold {h} s: recovery {pct:.3}%");
                        points.push(RecoveryPoint::new(h, pct));
                    }
                    None => {
                        error!("{m} hold {h} s: no recovery measurement");
                        failed += 1;
                    }
                },
                Err(e) => {
                    error!("{m} hold {h} s: {e}");
                    eprintln!("error: {m} hold {h} s: {e}");
                    failed += 1;
                }
            }
        }
        let dir = a.out.join(m);
        fs::create_dir_all(&dir)?;
        write_recovery_csv(fs::File::create(dir.join("recovery_curve.csv"))?, &points)?;
        println!("{}", dir.join("recovery_curve.csv").display());
    }
    if failed > 0 {
        return Err(Failure { code: 1, message: format!("{failed} sweep cell(s) failed") });
    }
    Ok(())
}

/// Cylinder resolution whose vertex count is closest to `target`.
fn twist_resolution(target: usize) -> usize {
    (3..4096usize).min_by_key(|&n| (n * (n / 2).max(2)).abs_diff(target)).unwrap()
}

fn bench(a: BenchArgs) -> CliResult<()> {
    if a.sizes.is_empty() {
        return Err(Failure::config("no mesh sizes given"));
    }
    if let Some(&bad) = a.sizes.iter().find(|&&n| n < 6) {
        return Err(Failure::config(format!("mesh size must be at least 6 vertices, got {bad}")));
    }
    if a.steps < 50 {
        return Err(Failure::config(format!("--steps must be at least 50, got {}", a.steps)));
    }
    check_material(&a.material)?;
    let pool = pool(a.threads)?;
    let mut rows = Vec::new();
    for &size in &a.sizes {
        let resolution = twist_resolution(size);
        for model_on in [true, false] {
            let model = if model_on { ModelSelector::Paper } else { ModelSelector::Elastic };
            let p = Params { material: a.material.clone(), model, resolution: Some(resolution), snapshot_interval: 0, ..Params::default() };
            let s = canonical("cylinder_twist", &p)?;
            let vertices = Runner::new(&s, None)?.sim.mesh.vertex_count();
            let sec_per_step = pool.install(|| time_scenario(&s, a.warmup, a.steps))?;
            info!("{vertices} vertices, model {}: {sec_per_step:.4} s/step", model.name());
            rows.push(TimingRow { vertices, model_on, sec_per_step });
        }
        let v = rows.last().unwrap().vertices;
        if let Some(o) = overhead(&rows, v) {
            println!("{v} vertices: overhead {:.1}%", 100.0 * o);
        }
    }
    fs::create_dir_all(&a.out)?;
    write_timing_csv(fs::File::create(a.out.join("timing.csv"))?, &rows)?;
    Ok(())
}

fn validate(a: ValidateArgs) -> CliResult<()> {
    let (s, base) = build_scenario(&a.common, a.material.as_deref(), a.hold)?;
    let runner = Runner::new(&s, base.as_deref())?;
    println!(
        "ok: `{}` material {} model {}, {} vertices, {} steps of {} s",
        s.name,
        s.material.name(),
        s.model.name(),
        runner.sim.mesh.vertex_count(),
        runner.total_steps(),
        s.solver.h
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Bench(a) => bench(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
