use swarmlang::VmConfig;

use crate::SimError;

pub const DEFAULT_DENSITY: f64 = 0.1;
/// marXbot body radius, meters.
pub const DEFAULT_RADIUS: f64 = 0.085;
pub const DEFAULT_COMM_RANGE: f64 = 1.0;
pub const DEFAULT_MAX_STEPS: u64 = 100;
pub const DEFAULT_STEP_DURATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Robot count.
    pub n: usize,
    /// Probability that a message is lost, drawn per (message, receiver).
    pub drop_prob: f64,
    /// Fraction of the arena covered by robot bodies.
    pub density: f64,
    /// Robot radius, meters.
    pub radius: f64,
    /// Arena side in meters. Derived from `n`, `radius` and `density` when unset.
    pub side: Option<f64>,
    /// Communication range, meters.
    pub comm_range: f64,
    pub seed: u64,
    pub max_steps: u64,
    /// Seconds per step; only used for reporting.
    pub step_duration: f64,
    /// Resample placements until the communication graph is connected.
    pub require_connected: bool,
    pub vm: VmConfig,
}

impl SimulationConfig {
    pub fn new(n: usize, drop_prob: f64, seed: u64) -> Self {
        Self {
            n,
            drop_prob,
            density: DEFAULT_DENSITY,
            radius: DEFAULT_RADIUS,
            side: None,
            comm_range: DEFAULT_COMM_RANGE,
            seed,
            max_steps: DEFAULT_MAX_STEPS,
            step_duration: DEFAULT_STEP_DURATION,
            require_connected: true,
            vm: VmConfig::default(),
        }
    }

    /// Arena side: `sqrt(N * pi * R^2 / D)` unless overridden.
    pub fn arena_side(&self) -> f64 {
        self.side.unwrap_or_else(|| {
            (self.n as f64 * std::f64::consts::PI * self.radius * self.radius / self.density).sqrt()
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return bad(format!("drop probability {} is outside [0, 1]", self.drop_prob));
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return bad(format!("density {} must be in (0, 1)", self.density));
        }
        if !(self.radius > 0.0) {
            return bad(format!("robot radius {} must be positive", self.radius));
        }
        if !(self.comm_range >= 0.0) {
            return bad(format!("communication range {} must be non-negative", self.comm_range));
        }
        if let Some(side) = self.side {
            if !(side > 0.0) {
                return bad(format!("arena side {side} must be positive"));
            }
        }
        if self.n > u32::MAX as usize {
            return bad(format!("{} robots is too many", self.n));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn side_from_density() {
        let cfg = SimulationConfig::new(100, 0.0, 0);
        let expected = (100.0 * std::f64::consts::PI * 0.085f64.powi(2) / 0.1).sqrt();
        assert_eq!(cfg.arena_side(), expected);
        assert!((cfg.arena_side() - 4.764).abs() < 1e-3);
        let fixed = SimulationConfig {
            side: Some(3.0),
            ..cfg
        };
        assert_eq!(fixed.arena_side(), 3.0);
    }

    #[test]
    fn validation() {
        assert!(SimulationConfig::new(10, 0.5, 0).validate().is_ok());
        assert!(SimulationConfig::new(10, 1.5, 0).validate().is_err());
        assert!(SimulationConfig::new(10, -0.1, 0).validate().is_err());
        let dense = SimulationConfig {
            density: 1.2,
            ..SimulationConfig::new(10, 0.0, 0)
        };
        assert!(dense.validate().is_err());
    }
}
