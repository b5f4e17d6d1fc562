//! `swarmlang` command-line tool.
//!
//! Exit codes: 0 success, 1 compile diagnostics, 2 usage or invalid grid,
//! 3 I/O, 4 runtime fault or simulation failure.

mod format;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swarmlang::lang::{assemble, compile_unit, disassemble, link, IMAGE_MAGIC};
use swarmlang::{BytecodeImage, LangError, SourceScript, Value, Vm, VmConfig, VmError};
use swarmlang_sim::{
    summarize, sweep, write_dataset, write_gnuplot, write_summary, Experiment, Predicate, Schedule, SimError,
    SimulationConfig, SweepSpec,
};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "swarmlang", version, about = "Compile, inspect, run and simulate swarm scripts")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile one or more source files (linked in order) into an image.
    Compile {
        #[arg(required = true)]
        sources: Vec<PathBuf>,
        /// Output image; defaults to the first source with a `.bo` extension.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print the textual listing of an image.
    Disasm { image: PathBuf },
    /// Turn a listing back into an image.
    Asm {
        listing: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run one robot's VM for a number of steps with an empty inbox.
    Run {
        /// Image or source file.
        program: PathBuf,
        #[arg(long, default_value_t = 0)]
        robot_id: i64,
        #[arg(long, default_value_t = 1)]
        steps: u64,
        /// `NAME` binds a logging actuator, `NAME=VALUE` sets a global.
        #[arg(long = "bind", value_name = "BINDING")]
        binds: Vec<String>,
    },
    /// One simulation run; writes the per-step series as CSV.
    Sim {
        #[command(flatten)]
        world: World,
        #[arg(long, default_value_t = 10)]
        robots: usize,
        #[arg(long, default_value_t = 0.0)]
        drop_prob: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A grid of runs over N x P with repetitions.
    Sweep {
        #[command(flatten)]
        world: World,
        #[arg(long, value_delimiter = ',', default_value = "10,100")]
        robots: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,0.95")]
        drop_prob: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        /// Master seed; every run seed is derived from it.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Dataset CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
}

#[derive(Args)]
struct World {
    /// A bundled behavior name, or a source/image file.
    #[arg(long)]
    script: String,
    /// Convergence predicate for file scripts: consensus, gradient, barrier or none.
    #[arg(long)]
    predicate: Option<Predicate>,
    #[arg(long, default_value_t = swarmlang_sim::config::DEFAULT_DENSITY)]
    density: f64,
    /// Communication range, meters.
    #[arg(long, default_value_t = swarmlang_sim::config::DEFAULT_COMM_RANGE)]
    range: f64,
    #[arg(long, default_value_t = swarmlang_sim::config::DEFAULT_RADIUS)]
    radius: f64,
    #[arg(long, default_value_t = 200)]
    max_steps: u64,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Compile(String),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Fault(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Compile(_) => 1,
            Self::Usage(_) => 2,
            Self::Io { .. } => 3,
            Self::Fault(_) => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(io_err(path))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// `file:line:col: message` for front-end errors.
fn diagnostic(file: &Path, e: &LangError) -> CliError {
    CliError::Compile(match e.pos() {
        Some(_) => format!("{}:{e}", file.display()),
        None => format!("{}: {e}", file.display()),
    })
}

fn compile_files(sources: &[PathBuf]) -> Result<BytecodeImage, CliError> {
    let mut units = Vec::new();
    for path in sources {
        let text = String::from_utf8(read(path)?)
            .map_err(|_| CliError::Compile(format!("{}: not valid UTF-8", path.display())))?;
        let script = SourceScript::new(path.display().to_string(), text);
        units.push(compile_unit(&script).map_err(|e| diagnostic(path, &e))?);
    }
    link(&units).map_err(|e| CliError::Compile(e.to_string()))
}

/// Images are recognized by their magic; anything else is compiled.
fn load(path: &Path) -> Result<BytecodeImage, CliError> {
    let bytes = read(path)?;
    if bytes.starts_with(IMAGE_MAGIC) {
        BytecodeImage::from_bytes(&bytes).map_err(|e| diagnostic(path, &e))
    } else {
        compile_files(&[path.to_path_buf()])
    }
}

fn vm_err(e: VmError) -> CliError {
    match e {
        VmError::Image(e) => CliError::Compile(e.to_string()),
        VmError::DuplicateName(_) | VmError::AlreadyBooted(_) | VmError::InvalidRobotId(_) => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Fault(other.to_string()),
    }
}

fn sim_err(e: SimError) -> CliError {
    match e {
        SimError::InvalidConfig(_) | SimError::UnknownScript(_) | SimError::UnknownPredicate(_) => {
            CliError::Usage(e.to_string())
        }
        SimError::Vm(e) => vm_err(e),
        SimError::Io(source) => CliError::Io {
            path: "output".into(),
            source,
        },
        other => CliError::Fault(other.to_string()),
    }
}

fn parse_literal(text: &str) -> format::Literal {
    if let Ok(v) = text.parse::<i64>() {
        format::Literal::Int(v)
    } else if let Ok(v) = text.parse::<f64>() {
        format::Literal::Float(v)
    } else {
        format::Literal::Str(text.to_string())
    }
}

fn run_one(program: &Path, robot_id: i64, steps: u64, binds: &[String]) -> Result<(), CliError> {
    let img = load(program)?;
    let mut vm = Vm::new(&img, robot_id, VmConfig::default()).map_err(vm_err)?;
    for b in binds {
        match b.split_once('=') {
            Some((name, value)) => {
                let v = match parse_literal(value) {
                    format::Literal::Int(i) => Value::Int(i),
                    format::Literal::Float(f) => Value::Float(f),
                    format::Literal::Str(s) => {
                        let id = vm.intern(&s);
                        Value::Str(id)
                    }
                };
                vm.set_global(name, v);
            }
            None => vm.register_actuator(b).map_err(vm_err)?,
        }
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let emit = |vm: &mut Vm, out: &mut dyn Write| -> Result<(), CliError> {
        for line in vm.take_output() {
            writeln!(out, "{line}").map_err(io_err(Path::new("stdout")))?;
        }
        Ok(())
    };
    if steps == 0 {
        let booted = vm.boot();
        emit(&mut vm, &mut out)?;
        booted.map_err(vm_err)?;
    }
    for _ in 0..steps {
        let stepped = vm.step(&[]);
        emit(&mut vm, &mut out)?;
        let step = stepped.map_err(vm_err)?;
        for (name, args) in &step.actuation {
            let args: Vec<String> = args.iter().map(format::datum).collect();
            writeln!(out, "> {name}({})", args.join(", ")).map_err(io_err(Path::new("stdout")))?;
        }
    }
    writeln!(out, "# globals").map_err(io_err(Path::new("stdout")))?;
    for (name, value) in vm.globals() {
        if value.is_callable() || matches!(value, Value::Swarm(_) | Value::VStig(_) | Value::Neighbors(_)) {
            continue;
        }
        // library tables hold builtins and have no data form
        let Ok(d) = vm.to_datum(value) else { continue };
        writeln!(out, "{name} = {}", format::datum(&d)).map_err(io_err(Path::new("stdout")))?;
    }
    Ok(())
}

fn experiment(world: &World) -> Result<Experiment, CliError> {
    let path = Path::new(&world.script);
    if swarmlang::behaviors::find(&world.script).is_some() && !path.exists() {
        let mut exp = Experiment::builtin(&world.script).map_err(sim_err)?;
        if let Some(p) = world.predicate {
            exp.predicate = p;
        }
        return Ok(exp);
    }
    if !path.exists() {
        return Err(sim_err(SimError::UnknownScript(world.script.clone())));
    }
    let img = load(path)?;
    let predicate = world.predicate.unwrap_or(Predicate::Never);
    Experiment::from_image(world.script.clone(), &img, predicate).map_err(sim_err)
}

fn base_config(world: &World) -> SimulationConfig {
    SimulationConfig {
        density: world.density,
        comm_range: world.range,
        radius: world.radius,
        max_steps: world.max_steps,
        ..SimulationConfig::new(0, 0.0, 0)
    }
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p).map_err(io_err(p))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Compile { sources, out } => {
            let img = compile_files(&sources)?;
            let out = out.unwrap_or_else(|| sources[0].with_extension("bo"));
            write(&out, &img.to_bytes())
        }
        Cmd::Disasm { image } => {
            let img = load(&image)?;
            print!("{}", disassemble(&img));
            Ok(())
        }
        Cmd::Asm { listing, out } => {
            let text = String::from_utf8_lossy(&read(&listing)?).into_owned();
            let img = assemble(&text).map_err(|e| diagnostic(&listing, &e))?;
            write(&out, &img.to_bytes())
        }
        Cmd::Run {
            program,
            robot_id,
            steps,
            binds,
        } => run_one(&program, robot_id, steps, &binds),
        Cmd::Sim {
            world,
            robots,
            drop_prob,
            seed,
            out,
        } => {
            let exp = experiment(&world)?;
            let cfg = SimulationConfig {
                n: robots,
                drop_prob,
                seed,
                ..base_config(&world)
            };
            cfg.validate().map_err(sim_err)?;
            let result = swarmlang_sim::run(&cfg, &exp, Schedule::from_env()).map_err(sim_err)?;
            for f in &result.faults {
                eprintln!("robot {} faulted at step {}: {}", f.robot, f.step, f.error);
            }
            let mut w = open_out(&out)?;
            format::series(&mut w, &result).map_err(sim_err)?;
            if !result.faults.is_empty() {
                return Err(CliError::Fault(format!("{} robot(s) faulted", result.faults.len())));
            }
            Ok(())
        }
        Cmd::Sweep {
            world,
            robots,
            drop_prob,
            reps,
            seed,
            out,
            summary,
            gnuplot,
        } => {
            let exp = experiment(&world)?;
            let spec = SweepSpec {
                base: base_config(&world),
                ..SweepSpec::new(robots, drop_prob, reps, seed)
            };
            spec.validate().map_err(sim_err)?;
            let records = sweep(&spec, &exp, Schedule::from_env()).map_err(sim_err)?;
            write_dataset(open_out(&out)?, &records).map_err(sim_err)?;
            let rows = summarize(&records);
            if let Some(p) = &summary {
                write_summary(open_out(&Some(p.clone()))?, &rows).map_err(sim_err)?;
            }
            if let Some(p) = &gnuplot {
                write_gnuplot(open_out(&Some(p.clone()))?, &rows).map_err(sim_err)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
