//! Bundled behavior scripts and host-side mirrors of their math.
//!
//! The scripts live as plain source files under `behaviors/` in this crate
//! and are embedded at build time. `manifest.txt` next to them lists the host
//! bindings each one expects.

use thiserror::Error;

use crate::lang::{compile_unit, link, BytecodeImage, LangError, SourceScript};
use crate::neighbors::NeighborRecord;

/// A script made of one or more source files linked in order.
#[derive(Debug, Clone, Copy)]
pub struct BehaviorScript {
    pub name: &'static str,
    pub parts: &'static [(&'static str, &'static str)],
    /// Globals or functions the host must provide (`-` in the manifest means none).
    pub bindings: &'static [&'static str],
    /// What the tests compare the script against.
    pub oracle: &'static str,
}

impl BehaviorScript {
    pub fn compile(&self) -> Result<BytecodeImage, LangError> {
        let units = self
            .parts
            .iter()
            .map(|(file, text)| compile_unit(&SourceScript::new(*file, *text)))
            .collect::<Result<Vec<_>, _>>()?;
        link(&units)
    }

    /// All parts joined, for display or for writing out as one file.
    pub fn source(&self) -> String {
        self.parts.iter().map(|(_, t)| *t).collect::<Vec<_>>().join("\n")
    }
}

macro_rules! part {
    ($file:literal) => {
        ($file, include_str!(concat!("../behaviors/", $file)))
    };
}

pub const MANIFEST: &str = include_str!("../behaviors/manifest.txt");

pub const FORMATION: BehaviorScript = BehaviorScript {
    name: "formation",
    parts: &[part!("formation.swl")],
    bindings: &["goto"],
    oracle: "behaviors::direction",
};

pub const BARRIER: BehaviorScript = BehaviorScript {
    name: "barrier",
    parts: &[part!("barrier.swl"), part!("barrier_demo.swl")],
    bindings: &["SWARM_SIZE", "THRESHOLD", "NEVER_READY"],
    oracle: "flood bound on pass steps",
};

pub const CONSENSUS: BehaviorScript = BehaviorScript {
    name: "consensus",
    parts: &[part!("consensus.swl")],
    bindings: &[],
    oracle: "max id, flooding eccentricity",
};

pub const GRADIENT: BehaviorScript = BehaviorScript {
    name: "gradient",
    parts: &[part!("gradient.swl")],
    bindings: &[],
    oracle: "shortest-path sums from robot 0",
};

pub const SEGREGATION: BehaviorScript = BehaviorScript {
    name: "segregation",
    parts: &[part!("segregation_forces.swl"), part!("segregation.swl")],
    bindings: &["goto"],
    oracle: "behaviors::segregation_direction",
};

pub const TARGET_SELECTION: BehaviorScript = BehaviorScript {
    name: "target_selection",
    parts: &[
        part!("barrier.swl"),
        part!("segregation_forces.swl"),
        part!("target_selection.swl"),
    ],
    bindings: &["goto", "camera"],
    oracle: "closest target over relay paths",
};

pub const ALL: &[BehaviorScript] = &[
    FORMATION,
    BARRIER,
    CONSENSUS,
    GRADIENT,
    SEGREGATION,
    TARGET_SELECTION,
];

pub fn find(name: &str) -> Option<&'static BehaviorScript> {
    ALL.iter().find(|b| b.name == name)
}

/// Formation constants.
pub const DELTA: f64 = 50.0;
pub const EPSILON: f64 = 2700.0;
pub const DELTA_KIN: f64 = 50.0;
pub const EPSILON_KIN: f64 = 2700.0;
pub const DELTA_NONKIN: f64 = 150.0;
pub const EPSILON_NONKIN: f64 = 8000.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ForceError {
    #[error("neighbor distance must be positive, got {0}")]
    NonPositiveDistance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

/// Signed virtual force magnitude at distance `d` for target spacing
/// `delta` and gain `epsilon`. Zero at `d == delta`, negative closer in.
pub fn force_magnitude(d: f64, delta: f64, epsilon: f64) -> Result<f64, ForceError> {
    // `!(d > 0)` also rejects NaN
    if !(d > 0.0) {
        return Err(ForceError::NonPositiveDistance(d));
    }
    let r = delta / d;
    Ok(-(epsilon / d) * (r.powi(4) - r.powi(2)))
}

/// Adds each neighbor's force vector to `acc`, in the given order. Mirrors a
/// `neighbors.reduce` over the accumulator functions.
pub fn force_fold(
    view: &[NeighborRecord],
    delta: f64,
    epsilon: f64,
    mut acc: Vec2,
) -> Result<Vec2, ForceError> {
    for n in view {
        let fm = force_magnitude(n.distance, delta, epsilon)?;
        acc.x += fm * n.azimuth.cos();
        acc.y += fm * n.azimuth.sin();
    }
    Ok(acc)
}

/// Mean force over the view; zero for an empty view.
pub fn direction(view: &[NeighborRecord], delta: f64, epsilon: f64) -> Result<Vec2, ForceError> {
    if view.is_empty() {
        return Ok(Vec2::default());
    }
    let sum = force_fold(view, delta, epsilon, Vec2::default())?;
    let n = view.len() as f64;
    Ok(Vec2 {
        x: sum.x / n,
        y: sum.y / n,
    })
}

/// Kin fold followed by a non-kin fold on the same accumulator, divided by
/// the total neighbor count.
pub fn segregation_direction(
    kin: &[NeighborRecord],
    nonkin: &[NeighborRecord],
) -> Result<Vec2, ForceError> {
    let total = kin.len() + nonkin.len();
    if total == 0 {
        return Ok(Vec2::default());
    }
    let acc = force_fold(kin, DELTA_KIN, EPSILON_KIN, Vec2::default())?;
    let acc = force_fold(nonkin, DELTA_NONKIN, EPSILON_NONKIN, acc)?;
    let n = total as f64;
    Ok(Vec2 {
        x: acc.x / n,
        y: acc.y / n,
    })
}
