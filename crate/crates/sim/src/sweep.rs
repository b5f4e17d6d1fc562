//! Grid experiments: one run per (N, P, repetition), each with its own
//! derived seed, reported as CSV.

use std::io::Write;

use crate::config::SimulationConfig;
use crate::run::{no_setup, Experiment, Simulation};
use crate::schedule::Schedule;
use crate::seed::run_seed;
use crate::SimError;

pub const DATASET_HEADER: [&str; 7] = ["experiment", "N", "P", "rep", "seed", "converged", "steps"];
pub const SUMMARY_HEADER: [&str; 6] = ["experiment", "N", "P", "median", "min", "max"];

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub robots: Vec<usize>,
    pub drop_probs: Vec<f64>,
    pub reps: usize,
    pub master_seed: u64,
    /// Template for every run; `n`, `drop_prob` and `seed` are overwritten.
    pub base: SimulationConfig,
}

impl SweepSpec {
    pub fn new(robots: Vec<usize>, drop_probs: Vec<f64>, reps: usize, master_seed: u64) -> Self {
        Self {
            robots,
            drop_probs,
            reps,
            master_seed,
            base: SimulationConfig::new(0, 0.0, 0),
        }
    }

    /// Every run of the grid, ordered by (N, P, rep).
    pub fn configs(&self) -> Vec<(usize, ConfigRun)> {
        let mut out = Vec::new();
        for &n in &self.robots {
            for &p in &self.drop_probs {
                for rep in 0..self.reps {
                    let cfg = SimulationConfig {
                        n,
                        drop_prob: p,
                        seed: run_seed(self.master_seed, n, p, rep),
                        ..self.base.clone()
                    };
                    out.push((out.len(), ConfigRun { rep, cfg }));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.robots.is_empty() || self.drop_probs.is_empty() {
            return Err(SimError::InvalidConfig("the grid needs at least one N and one P".into()));
        }
        for &n in &self.robots {
            for &p in &self.drop_probs {
                SimulationConfig {
                    n,
                    drop_prob: p,
                    ..self.base.clone()
                }
                .validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ConfigRun {
    pub rep: usize,
    pub cfg: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub experiment: String,
    pub n: usize,
    pub p: f64,
    pub rep: usize,
    pub seed: u64,
    pub converged: bool,
    /// Convergence step, or `max_steps` when the run did not converge.
    pub steps: u64,
}

/// Runs the whole grid. Runs are spread over the schedule's workers and
/// each run steps its robots sequentially; records come back in grid order.
pub fn sweep(spec: &SweepSpec, exp: &Experiment, schedule: Schedule) -> Result<Vec<RunRecord>, SimError> {
    spec.validate()?;
    let jobs = spec.configs();
    schedule.install(|| {
        schedule
            .map(&jobs, |(_, job)| {
                let sim = Simulation::new(&job.cfg, exp, &no_setup)?;
                let result = sim.run(Schedule::Sequential);
                Ok(RunRecord {
                    experiment: exp.name.clone(),
                    n: job.cfg.n,
                    p: job.cfg.drop_prob,
                    rep: job.rep,
                    seed: job.cfg.seed,
                    converged: result.converged_step.is_some(),
                    steps: result.converged_step.unwrap_or(job.cfg.max_steps),
                })
            })
            .into_iter()
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub experiment: String,
    pub n: usize,
    pub p: f64,
    pub median: f64,
    pub min: u64,
    pub max: u64,
}

pub fn median(sorted: &[u64]) -> f64 {
    let k = sorted.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        sorted[k / 2] as f64
    } else {
        (sorted[k / 2 - 1] + sorted[k / 2]) as f64 / 2.0
    }
}

/// Median, min and max of `steps` per (experiment, N, P), in first-seen order.
pub fn summarize(records: &[RunRecord]) -> Vec<Summary> {
    let mut cells: Vec<(String, usize, f64, Vec<u64>)> = Vec::new();
    for r in records {
        match cells
            .iter_mut()
            .find(|c| c.0 == r.experiment && c.1 == r.n && c.2.to_bits() == r.p.to_bits())
        {
            Some(c) => c.3.push(r.steps),
            None => cells.push((r.experiment.clone(), r.n, r.p, vec![r.steps])),
        }
    }
    cells
        .into_iter()
        .map(|(experiment, n, p, mut steps)| {
            steps.sort_unstable();
            Summary {
                experiment,
                n,
                p,
                median: median(&steps),
                min: steps[0],
                max: steps[steps.len() - 1],
            }
        })
        .collect()
}

pub fn write_dataset<W: Write>(out: W, records: &[RunRecord]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_HEADER)?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.n.to_string(),
            r.p.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            u8::from(r.converged).to_string(),
            r.steps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, rows: &[Summary]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in rows {
        w.write_record([
            s.experiment.clone(),
            s.n.to_string(),
            s.p.to_string(),
            s.median.to_string(),
            s.min.to_string(),
            s.max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated summary with one block per N, for gnuplot's
/// `index` selector. Columns: P median min max.
pub fn write_gnuplot<W: Write>(mut out: W, rows: &[Summary]) -> Result<(), SimError> {
    let mut ns: Vec<usize> = rows.iter().map(|s| s.n).collect();
    ns.dedup();
    for (block, n) in ns.iter().enumerate() {
        if block > 0 {
            writeln!(out, "\n")?;
        }
        writeln!(out, "# N={n}\n# P median min max")?;
        for s in rows.iter().filter(|s| s.n == *n) {
            writeln!(out, "{} {} {} {}", s.p, s.median, s.min, s.max)?;
        }
    }
    Ok(())
}
