//! Oracles recomputed from raw poses, independent of the simulator's own
//! topology code, plus the two-writer race harness.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmlang::vstig::VKey;
use swarmlang::{compile_source, Datum, Value};
use swarmlang_sim::{Experiment, Predicate, RobotPose, Schedule, Simulation, SimulationConfig};

pub fn adjacency(poses: &[RobotPose], range: f64) -> Vec<Vec<usize>> {
    (0..poses.len())
        .map(|i| {
            (0..poses.len())
                .filter(|&j| {
                    let (dx, dy) = (poses[i].x - poses[j].x, poses[i].y - poses[j].y);
                    j != i && (dx * dx + dy * dy).sqrt() <= range
                })
                .collect()
        })
        .collect()
}

/// Breadth-first hop counts from `source`.
pub fn bfs(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut hops = vec![None; adj.len()];
    hops[source] = Some(0);
    let mut q = VecDeque::from([source]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if hops[v].is_none() {
                hops[v] = Some(hops[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    hops
}

pub fn eccentricity(adj: &[Vec<usize>], source: usize) -> usize {
    bfs(adj, source).into_iter().map(|h| h.expect("connected")).max().unwrap_or(0)
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Dijkstra over centimeter distances, adding `edge + dist[u]` exactly as a
/// relay would.
pub fn dijkstra(poses: &[RobotPose], range: f64, source: usize) -> Vec<f64> {
    let adj = adjacency(poses, range);
    let mut dist = vec![f64::INFINITY; poses.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, source)]);
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &v in &adj[u] {
            let edge = (poses[u].x - poses[v].x).hypot(poses[u].y - poses[v].y) * 100.0;
            let cand = edge + d;
            if cand < dist[v] {
                dist[v] = cand;
                heap.push(Item(cand, v));
            }
        }
    }
    dist
}

pub const RACE_SCRIPT: &str = "
function init() {
  vs = stigmergy.create(1)
  if(CUSTOM) {
    vs.onconflict(function(k,l,r) {
      if(r.data < l.data or
        (r.data == l.data and
         r.robot < l.robot)) {
        return l
      }
      else return r
    })
  }
  if(WRITE != nil) vs.put(\"k\", WRITE)
}
function step() { seen = vs.get(\"k\") }
";

pub struct RaceOutcome {
    pub n: usize,
    pub writers: [(usize, i64); 2],
    pub expected: (i64, u32),
    /// Every robot's final (data, robot) for the key.
    pub finals: Vec<Option<(i64, u32)>>,
}

impl RaceOutcome {
    pub fn agreed(&self) -> bool {
        self.finals.iter().all(|f| *f == Some(self.expected))
    }
}

/// Two robots write the same key at the same logical time; after the run
/// every robot should hold the entry the resolver ranks highest: the higher
/// robot id for the default resolver, the larger (data, robot) pair for the
/// custom one.
pub fn race(seed: u64, custom: bool) -> RaceOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=16);
    let a = rng.random_range(0..n);
    let b = (a + rng.random_range(1..n)) % n;
    // few distinct values so that data ties happen
    let va = rng.random_range(0..4i64);
    let vb = rng.random_range(0..4i64);
    let p = [0.0, 0.25, 0.5][rng.random_range(0..3)];
    let img = compile_source(RACE_SCRIPT).unwrap();
    let exp = Experiment::from_image("race", &img, Predicate::Never).unwrap();
    let cfg = SimulationConfig {
        max_steps: 150,
        ..SimulationConfig::new(n, p, rng.random())
    };
    let setup = move |vm: &mut swarmlang::Vm, _: &RobotPose| {
        let me = vm.robot_id() as usize;
        if custom {
            vm.set_global("CUSTOM", Value::Int(1));
        }
        if me == a {
            vm.set_global("WRITE", Value::Int(va));
        } else if me == b {
            vm.set_global("WRITE", Value::Int(vb));
        }
    };
    let mut sim = Simulation::new(&cfg, &exp, &setup).unwrap();
    for _ in 0..cfg.max_steps {
        sim.step(Schedule::Sequential);
    }
    let (wa, wb) = ((va, a as u32), (vb, b as u32));
    let expected = if custom {
        std::cmp::max(wa, wb)
    } else if a > b {
        wa
    } else {
        wb
    };
    let finals = (0..n)
        .map(|i| {
            sim.vm(i)
                .stigmergy(1)
                .and_then(|s| s.entry(&VKey::Str("k".into())))
                .and_then(|e| match e.value {
                    Datum::Int(v) => Some((v, e.robot)),
                    _ => None,
                })
        })
        .collect();
    RaceOutcome {
        n,
        writers: [(a, va), (b, vb)],
        expected,
        finals,
    }
}
