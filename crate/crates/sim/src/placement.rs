//! Robot placement and the static communication graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SimulationConfig;
use crate::seed::mix;
use crate::SimError;

/// Attempts per robot before declaring the density infeasible.
pub const MAX_ATTEMPTS_PER_ROBOT: usize = 10_000;
/// Whole-arena resamples when a connected graph is required.
pub const MAX_CONNECT_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
}

impl RobotPose {
    pub fn distance(&self, other: &RobotPose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Uniform rejection placement in `[-L/2, L/2]^2`: a coordinate that
/// overlaps an already placed robot is redrawn.
pub fn place_robots(cfg: &SimulationConfig) -> Result<Vec<RobotPose>, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed ^ 0x706c_6163));
    place_with(cfg, &mut rng)
}

fn place_with(cfg: &SimulationConfig, rng: &mut ChaCha8Rng) -> Result<Vec<RobotPose>, SimError> {
    let half = cfg.arena_side() / 2.0;
    let min_gap = 2.0 * cfg.radius;
    let mut poses: Vec<RobotPose> = Vec::with_capacity(cfg.n);
    while poses.len() < cfg.n {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS_PER_ROBOT {
            let p = RobotPose {
                x: rng.random_range(-half..=half),
                y: rng.random_range(-half..=half),
            };
            if poses.iter().all(|q| q.distance(&p) > min_gap) {
                poses.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SimError::Placement {
                placed: poses.len(),
                n: cfg.n,
            });
        }
    }
    Ok(poses)
}

/// Placement whose communication graph is connected, when the config asks
/// for it. Returns the poses and the number of resamples needed.
pub fn place_for_run(cfg: &SimulationConfig) -> Result<(Vec<RobotPose>, Topology), SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed ^ 0x706c_6163));
    for _ in 0..MAX_CONNECT_ATTEMPTS {
        let poses = place_with(cfg, &mut rng)?;
        let topo = Topology::new(&poses, cfg.comm_range);
        if !cfg.require_connected || topo.is_connected() {
            return Ok((poses, topo));
        }
    }
    Err(SimError::Disconnected {
        attempts: MAX_CONNECT_ATTEMPTS,
    })
}

/// What a receiver senses about one in-range sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub receiver: u32,
    /// Centimeters.
    pub distance: f64,
    /// Bearing of the sender from the receiver, radians, arena frame.
    pub azimuth: f64,
}

/// Static in-range links, indexed by sender, receivers in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub links: Vec<Vec<Link>>,
}

impl Topology {
    pub fn new(poses: &[RobotPose], comm_range: f64) -> Self {
        let links = poses
            .iter()
            .enumerate()
            .map(|(i, s)| {
                poses
                    .iter()
                    .enumerate()
                    .filter(|&(j, r)| j != i && s.distance(r) <= comm_range)
                    .map(|(j, r)| Link {
                        receiver: j as u32,
                        distance: s.distance(r) * 100.0,
                        azimuth: (s.y - r.y).atan2(s.x - r.x),
                    })
                    .collect()
            })
            .collect();
        Self { links }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.links.is_empty() {
            return 0.0;
        }
        self.links.iter().map(Vec::len).sum::<usize>() as f64 / self.links.len() as f64
    }

    /// Hop counts from `source`; `None` for unreachable robots.
    pub fn hops_from(&self, source: usize) -> Vec<Option<u32>> {
        let mut hops = vec![None; self.links.len()];
        if source >= hops.len() {
            return hops;
        }
        hops[source] = Some(0);
        let mut frontier = std::collections::VecDeque::from([source]);
        while let Some(u) = frontier.pop_front() {
            let h = hops[u].unwrap();
            for l in &self.links[u] {
                let v = l.receiver as usize;
                if hops[v].is_none() {
                    hops[v] = Some(h + 1);
                    frontier.push_back(v);
                }
            }
        }
        hops
    }

    pub fn is_connected(&self) -> bool {
        self.hops_from(0).iter().all(Option::is_some)
    }

    /// Least fixpoint of `d[j] = min(d[j], sensed(i -> j) + d[i])` from
    /// `source`, starting every other robot at `init`. The additions match
    /// the gradient script's relay exactly.
    pub fn path_sums(&self, source: usize, init: f64) -> Vec<f64> {
        let mut d = vec![init; self.links.len()];
        if source >= d.len() {
            return d;
        }
        d[source] = 0.0;
        let mut changed = true;
        while changed {
            changed = false;
            for (i, out) in self.links.iter().enumerate() {
                for l in out {
                    let j = l.receiver as usize;
                    let cand = l.distance + d[i];
                    if j != source && cand < d[j] {
                        d[j] = cand;
                        changed = true;
                    }
                }
            }
        }
        d
    }
}
