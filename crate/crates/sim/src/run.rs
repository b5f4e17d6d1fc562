use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarmlang::behaviors;
use swarmlang::vm::Program;
use swarmlang::{BytecodeImage, Datum, Received, Vm, VmError};

use crate::config::SimulationConfig;
use crate::delivery::deliver;
use crate::placement::{place_for_run, RobotPose, Topology};
use crate::schedule::Schedule;
use crate::seed::mix;
use crate::SimError;

/// Initial estimate in the gradient script.
pub const GRADIENT_INF: f64 = 50000.0;

/// Run-level convergence test, evaluated on one global per robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predicate {
    /// Every `vs_value` equals the highest robot id.
    Consensus,
    /// Every `mydist` equals the shortest path sum from robot 0, bit for bit.
    Gradient,
    /// Every robot has set `passed`.
    Barrier,
    /// Runs until `max_steps`.
    Never,
}

impl Predicate {
    pub fn name(self) -> &'static str {
        match self {
            Self::Consensus => "consensus",
            Self::Gradient => "gradient",
            Self::Barrier => "barrier",
            Self::Never => "none",
        }
    }

    /// Global read from every robot after each step.
    pub fn readout(self) -> Option<&'static str> {
        match self {
            Self::Consensus => Some("vs_value"),
            Self::Gradient => Some("mydist"),
            Self::Barrier => Some("passed"),
            Self::Never => None,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Predicate {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        Ok(match s {
            "consensus" => Self::Consensus,
            "gradient" => Self::Gradient,
            "barrier" => Self::Barrier,
            "none" => Self::Never,
            other => return Err(SimError::UnknownPredicate(other.to_string())),
        })
    }
}

/// A compiled script plus how to judge it.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub program: Arc<Program>,
    pub predicate: Predicate,
}

impl Experiment {
    pub fn from_image(name: impl Into<String>, img: &BytecodeImage, predicate: Predicate) -> Result<Self, SimError> {
        let program = Program::from_image(img).map_err(|e| SimError::Vm(VmError::Image(e)))?;
        Ok(Self {
            name: name.into(),
            program: Arc::new(program),
            predicate,
        })
    }

    /// One of the bundled behaviors. Consensus, gradient and barrier come
    /// with their predicate; the rest run to `max_steps`.
    pub fn builtin(name: &str) -> Result<Self, SimError> {
        let script = behaviors::find(name).ok_or_else(|| SimError::UnknownScript(name.to_string()))?;
        let predicate = match name {
            "consensus" => Predicate::Consensus,
            "gradient" => Predicate::Gradient,
            "barrier" => Predicate::Barrier,
            _ => Predicate::Never,
        };
        let img = script.compile().map_err(|e| SimError::Vm(VmError::Image(e)))?;
        Self::from_image(name, &img, predicate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    /// The predicate's global on every robot, as a number when it is one.
    pub readout: Vec<Option<f64>>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fault {
    pub robot: u32,
    pub step: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub metrics: Vec<StepMetrics>,
    /// First step after which the predicate held.
    pub converged_step: Option<u64>,
    pub steps_run: u64,
    pub faults: Vec<Fault>,
    pub poses: Vec<RobotPose>,
    pub mean_degree: f64,
}

/// Extra per-robot preparation before the first step, e.g. sensor tables.
pub type Setup<'a> = &'a (dyn Fn(&mut Vm, &RobotPose) + Sync);

pub fn no_setup(_: &mut Vm, _: &RobotPose) {}

enum Target {
    Everyone(f64),
    PerRobot(Vec<f64>),
    Nothing,
}

struct Robot {
    vm: Vm,
    inbox: Vec<Received>,
    result: Option<Result<Vec<Vec<u8>>, VmError>>,
}

/// A world in progress. `run` drives it to the end; tests can also call
/// `step` and look at the VMs in between.
pub struct Simulation {
    cfg: SimulationConfig,
    predicate: Predicate,
    robots: Vec<Robot>,
    poses: Vec<RobotPose>,
    topology: Topology,
    rng: ChaCha8Rng,
    target: Target,
    step: u64,
    converged_step: Option<u64>,
    faults: Vec<Fault>,
}

impl Simulation {
    pub fn new(cfg: &SimulationConfig, exp: &Experiment, setup: Setup<'_>) -> Result<Self, SimError> {
        let (poses, topology) = place_for_run(cfg)?;
        Self::build(cfg, exp, poses, topology, setup)
    }

    /// A world with hand-placed robots; `cfg.n` is ignored.
    pub fn with_poses(
        cfg: &SimulationConfig,
        exp: &Experiment,
        poses: Vec<RobotPose>,
        setup: Setup<'_>,
    ) -> Result<Self, SimError> {
        let cfg = SimulationConfig {
            n: poses.len(),
            ..cfg.clone()
        };
        cfg.validate()?;
        let topology = Topology::new(&poses, cfg.comm_range);
        Self::build(&cfg, exp, poses, topology, setup)
    }

    fn build(
        cfg: &SimulationConfig,
        exp: &Experiment,
        poses: Vec<RobotPose>,
        topology: Topology,
        setup: Setup<'_>,
    ) -> Result<Self, SimError> {
        let mut robots = Vec::with_capacity(cfg.n);
        for (i, pose) in poses.iter().enumerate() {
            let mut vm = Vm::with_program(Arc::clone(&exp.program), i as i64, cfg.vm.clone())?;
            vm.register_actuator("goto")?;
            vm.set_global("SWARM_SIZE", swarmlang::Value::Int(cfg.n as i64));
            vm.set_table("camera", &[]);
            setup(&mut vm, pose);
            robots.push(Robot {
                vm,
                inbox: Vec::new(),
                result: None,
            });
        }
        let target = match exp.predicate {
            Predicate::Consensus => Target::Everyone(cfg.n.saturating_sub(1) as f64),
            Predicate::Gradient => Target::PerRobot(topology.path_sums(0, GRADIENT_INF)),
            Predicate::Barrier => Target::Everyone(1.0),
            Predicate::Never => Target::Nothing,
        };
        Ok(Self {
            cfg: cfg.clone(),
            predicate: exp.predicate,
            robots,
            poses,
            topology,
            rng: ChaCha8Rng::seed_from_u64(mix(cfg.seed ^ 0x6472_6f70)),
            target,
            step: 0,
            converged_step: None,
            faults: Vec::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn poses(&self) -> &[RobotPose] {
        &self.poses
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn vm(&self, robot: usize) -> &Vm {
        &self.robots[robot].vm
    }

    pub fn vm_mut(&mut self, robot: usize) -> &mut Vm {
        &mut self.robots[robot].vm
    }

    pub fn faults(&self) -> &[Fault] {
        &self.faults
    }

    pub fn converged_step(&self) -> Option<u64> {
        self.converged_step
    }

    /// One lockstep round: every VM steps on its inbox, then the outboxes
    /// are routed (serially) into the next inboxes.
    pub fn step(&mut self, schedule: Schedule) -> StepMetrics {
        self.step += 1;
        schedule.for_each_mut(&mut self.robots, |_, r| {
            let inbox = std::mem::take(&mut r.inbox);
            r.result = Some(r.vm.step(&inbox).map(|out| out.outbox));
            // print output has nowhere to go in a batch run
            r.vm.take_output();
        });
        let mut outboxes = Vec::with_capacity(self.robots.len());
        for (i, r) in self.robots.iter_mut().enumerate() {
            match r.result.take() {
                Some(Ok(out)) => outboxes.push(out),
                Some(Err(VmError::Faulted(_))) | None => outboxes.push(Vec::new()),
                Some(Err(e)) => {
                    self.faults.push(Fault {
                        robot: i as u32,
                        step: self.step,
                        error: e.to_string(),
                    });
                    outboxes.push(Vec::new());
                }
            }
        }
        let readout: Vec<Option<f64>> = match self.predicate.readout() {
            Some(name) => self
                .robots
                .iter()
                .map(|r| r.vm.global_datum(name).as_ref().and_then(Datum::as_f64))
                .collect(),
            None => vec![None; self.robots.len()],
        };
        let now = match &self.target {
            Target::Nothing => false,
            Target::Everyone(v) => readout.iter().all(|r| *r == Some(*v)),
            Target::PerRobot(vs) => readout.iter().zip(vs).all(|(r, v)| *r == Some(*v)),
        };
        if now && self.converged_step.is_none() {
            self.converged_step = Some(self.step);
        }
        let inboxes = deliver(&self.topology, &outboxes, self.cfg.drop_prob, &mut self.rng);
        for (r, inbox) in self.robots.iter_mut().zip(inboxes) {
            r.inbox = inbox;
        }
        StepMetrics {
            step: self.step,
            readout,
            converged: self.converged_step.is_some(),
        }
    }

    /// Steps until the predicate holds or `max_steps` is reached.
    pub fn run(mut self, schedule: Schedule) -> RunResult {
        let mut metrics = Vec::new();
        while self.step < self.cfg.max_steps && self.converged_step.is_none() {
            metrics.push(self.step(schedule));
        }
        RunResult {
            seed: self.cfg.seed,
            metrics,
            converged_step: self.converged_step,
            steps_run: self.step,
            faults: self.faults,
            mean_degree: self.topology.mean_degree(),
            poses: self.poses,
        }
    }
}

/// Builds and runs a simulation on its own pool.
pub fn run(cfg: &SimulationConfig, exp: &Experiment, schedule: Schedule) -> Result<RunResult, SimError> {
    run_with(cfg, exp, schedule, &no_setup)
}

pub fn run_with(
    cfg: &SimulationConfig,
    exp: &Experiment,
    schedule: Schedule,
    setup: Setup<'_>,
) -> Result<RunResult, SimError> {
    schedule.install(|| Ok(Simulation::new(cfg, exp, setup)?.run(schedule)))
}

/// A colored light that robots within `visibility` meters can see.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetLight {
    pub x: f64,
    pub y: f64,
    pub color: i64,
}

/// Fills `camera.targetdata = {dist, color}` (dist in cm) on robots that see
/// a light, using the closest one.
pub fn camera_setup(lights: Vec<TargetLight>, visibility: f64) -> impl Fn(&mut Vm, &RobotPose) + Sync {
    move |vm, pose| {
        let seen = lights
            .iter()
            .map(|l| (pose.distance(&RobotPose { x: l.x, y: l.y }), l.color))
            .filter(|(d, _)| *d <= visibility)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((d, color)) = seen {
            let data = Datum::Table(vec![
                (Datum::Str("dist".into()), Datum::Float(d * 100.0)),
                (Datum::Str("color".into()), Datum::Int(color)),
            ]);
            vm.set_table("camera", &[(Datum::Str("targetdata".into()), data)]);
        }
    }
}
