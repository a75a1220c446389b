use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wavetopo::config::{dump_config, load_config, Overrides};
use wavetopo::export::{
    export_fields, export_history, write_atomic, ExportBundle, FieldFormat, FieldSet,
};
use wavetopo::levelset::{InitPreset, Scheme};
use wavetopo::optimizer::StepOutcome;
use wavetopo::preset::{dump_preset, preset, PresetId};
use wavetopo::{Error, Optimizer, RunConfig};

#[derive(Parser)]
#[command(
    name = "wavetopo",
    version,
    about = "Level set topology optimization on benchmark problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one configuration.
    Run(RunArgs),
    /// Optimize a configuration for several values of one parameter, in parallel.
    Sweep(SweepArgs),
    /// Print a preset as TOML.
    DumpPreset { id: PresetId },
}

#[derive(Args, Clone)]
struct Base {
    /// Start from a named preset.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<PresetId>,
    /// Start from a TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "c-f")]
    c_f: Option<f64>,
    /// Iteration limit.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    init: Option<InitPreset>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write field snapshots every N iterations; the final state is always written.
    #[arg(long, default_value_t = 0)]
    snapshot_every: usize,
}

impl Base {
    fn overrides(&self) -> Overrides {
        Overrides {
            scheme: self.scheme,
            ell: self.ell,
            m: self.m,
            k: self.k,
            beta: self.beta,
            c_f: self.c_f,
            max_iterations: self.iters,
            init: self.init.clone(),
            seed: self.seed,
            nx: self.nx,
            ny: self.ny,
        }
    }

    fn resolve(&self) -> wavetopo::Result<RunConfig> {
        let base = match (&self.preset, &self.config) {
            (_, Some(path)) => load_config(path)?,
            (Some(id), None) => preset(*id),
            (None, None) => unreachable!("clap requires one of --preset and --config"),
        };
        let config = self.overrides().apply(&base)?;
        for w in config.evolution.warnings() {
            log::warn!("{w}");
        }
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    base: Base,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Param {
    Ell,
    M,
    K,
    Beta,
    CF,
    Seed,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: Base,
    #[arg(long, value_enum)]
    param: Param,
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Concurrent runs; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

struct Summary {
    outcome: StepOutcome,
    iterations: usize,
    objective_ratio: f64,
    volume_fraction: f64,
    max_von_mises: f64,
}

fn write_snapshot(opt: &Optimizer, dir: &Path, bundle: &mut ExportBundle) -> wavetopo::Result<()> {
    let Some(s) = opt.snapshot() else {
        return Ok(());
    };
    let it = opt.history().len() - 1;
    let fields = FieldSet {
        phi: &s.phi,
        theta: &s.theta,
        von_mises: &s.von_mises,
        displacement: &s.u,
    };
    let vtk = ExportBundle::field_path(dir, it);
    export_fields(opt.mesh(), &fields, &vtk, FieldFormat::NodalText)?;
    bundle.fields.push((it, vtk));
    let png = ExportBundle::raster_path(dir, it);
    export_fields(opt.mesh(), &fields, &png, FieldFormat::Raster)?;
    bundle.rasters.push((it, png));
    Ok(())
}

fn execute(config: &RunConfig, dir: &Path, snapshot_every: usize) -> wavetopo::Result<Summary> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_atomic(&dir.join("config.toml"), dump_config(config)?.as_bytes())?;
    let mut bundle = ExportBundle::new(dir);
    let mut opt = Optimizer::new(config)?;
    let result = opt.run_with(|o| {
        export_history(o.history(), &bundle.history)?;
        let r = o.history().last().expect("a row per iteration");
        log::info!(
            "[{}] it {:4}  J/J0 {:.5}  G {:+.4}  vf {:.4}  lambda {:.3e}",
            dir.display(),
            r.iteration,
            r.objective_ratio,
            r.constraint,
            r.volume_fraction,
            r.lambda
        );
        if snapshot_every > 0 && r.iteration % snapshot_every == 0 && !o.is_finished() {
            write_snapshot(o, dir, &mut bundle)?;
        }
        Ok(())
    });
    write_snapshot(&opt, dir, &mut bundle)?;
    bundle.write_manifest(dir)?;
    let outcome = result?;
    let last = opt.history().last().expect("at least one iteration");
    Ok(Summary {
        outcome,
        iterations: opt.history().len(),
        objective_ratio: last.objective_ratio,
        volume_fraction: last.volume_fraction,
        max_von_mises: last.max_von_mises,
    })
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn outcome_name(o: StepOutcome) -> &'static str {
    match o {
        StepOutcome::Continue => "running",
        StepOutcome::Converged => "converged",
        StepOutcome::MaxIterations => "max-iterations",
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if e.is_solver() {
        3
    } else {
        1
    }
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let config = args.base.resolve()?;
    let s = execute(&config, &args.base.out, args.base.snapshot_every)?;
    println!(
        "{}: {} after {} iterations, J/J0 = {:.6}, volume fraction = {:.4}, max von Mises = {:.4e}",
        config.preset,
        outcome_name(s.outcome),
        s.iterations,
        s.objective_ratio,
        s.volume_fraction,
        s.max_von_mises
    );
    Ok(())
}

fn with_param(base: &Base, param: Param, value: f64) -> Base {
    let mut b = base.clone();
    match param {
        Param::Ell => b.ell = Some(value),
        Param::M => b.m = Some(value),
        Param::K => b.k = Some(value),
        Param::Beta => b.beta = Some(value),
        Param::CF => b.c_f = Some(value),
        Param::Seed => b.seed = Some(value as u64),
    }
    b
}

fn sweep(args: &SweepArgs) -> Result<(), Error> {
    let name = args
        .param
        .to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string();
    if args.param == Param::Seed && args.values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
        return Err(Error::Config {
            key: "values".into(),
            message: "seeds must be non-negative integers".into(),
        });
    }
    // Resolve everything up front so a bad value fails before any run starts.
    let configs = args
        .values
        .iter()
        .map(|&v| with_param(&args.base, args.param, v).resolve())
        .collect::<Result<Vec<_>, _>>()?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, configs.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<wavetopo::Result<Summary>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = configs.get(i) else { break };
                let dir = args.base.out.join(format!("{name}_{}", args.values[i]));
                let r = execute(config, &dir, args.base.snapshot_every);
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("workers joined");

    let mut table = format!("{name},outcome,iterations,J_over_J0,vol_frac,max_vm\n");
    let mut worst: Option<Error> = None;
    for (value, r) in args.values.iter().zip(results) {
        match r.expect("every index is claimed") {
            Ok(s) => {
                table.push_str(&format!(
                    "{value},{},{},{:.16e},{:.16e},{:.16e}\n",
                    outcome_name(s.outcome),
                    s.iterations,
                    s.objective_ratio,
                    s.volume_fraction,
                    s.max_von_mises
                ));
                println!(
                    "{name} = {value}: {} after {} iterations, J/J0 = {:.6}",
                    outcome_name(s.outcome),
                    s.iterations,
                    s.objective_ratio
                );
            }
            Err(e) => {
                table.push_str(&format!("{value},failed,,,,\n"));
                eprintln!("{name} = {value}: {e}");
                if worst.as_ref().is_none_or(|w| exit_code(&e) > exit_code(w)) {
                    worst = Some(e);
                }
            }
        }
    }
    fs::create_dir_all(&args.base.out).map_err(|e| io_error(&args.base.out, e))?;
    write_atomic(&args.base.out.join("sweep.csv"), table.as_bytes())?;
    worst.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::DumpPreset { id } => dump_preset(*id).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
