mod common;

use common::{adjacency, eccentricity};
use swarmlang::Value;
use swarmlang_sim::run::no_setup;
use swarmlang_sim::{Experiment, RobotPose, Schedule, Simulation, SimulationConfig};

fn barrier() -> Experiment {
    Experiment::builtin("barrier").unwrap()
}

/// Step at which each robot first shows `passed == 1`.
fn pass_steps(sim: &mut Simulation, steps: u64) -> Vec<Option<u64>> {
    let n = sim.poses().len();
    let mut passed = vec![None; n];
    for _ in 0..steps {
        let m = sim.step(Schedule::Sequential);
        for (i, v) in m.readout.iter().enumerate() {
            if *v == Some(1.0) && passed[i].is_none() {
                passed[i] = Some(m.step);
            }
        }
    }
    passed
}

#[test]
fn everyone_passes_once_all_readies_have_flooded_in() {
    for seed in 0..8 {
        let cfg = SimulationConfig::new(5, 0.0, seed);
        let mut sim = Simulation::new(&cfg, &barrier(), &no_setup).unwrap();
        let adj = adjacency(sim.poses(), cfg.comm_range);
        let got = pass_steps(&mut sim, 20);
        for (i, s) in got.iter().enumerate() {
            assert_eq!(*s, Some(1 + eccentricity(&adj, i) as u64), "seed {seed} robot {i}");
        }
    }
}

#[test]
fn threshold_one_passes_immediately() {
    let cfg = SimulationConfig::new(6, 0.0, 4);
    let setup = |vm: &mut swarmlang::Vm, _: &RobotPose| vm.set_global("THRESHOLD", Value::Int(1));
    let mut sim = Simulation::new(&cfg, &barrier(), &setup).unwrap();
    assert!(pass_steps(&mut sim, 1).iter().all(|s| *s == Some(1)));
}

#[test]
fn a_holdout_blocks_everyone() {
    let cfg = SimulationConfig::new(6, 0.0, 9);
    let setup = |vm: &mut swarmlang::Vm, _: &RobotPose| {
        if vm.robot_id() == 2 {
            vm.set_global("NEVER_READY", Value::Int(1));
        }
    };
    let mut sim = Simulation::new(&cfg, &barrier(), &setup).unwrap();
    assert!(pass_steps(&mut sim, 40).iter().all(Option::is_none));
    for i in 0..6 {
        let size = sim.vm(i).stigmergy(1).map(|s| s.size()).unwrap_or(0);
        assert_eq!(size, 5, "robot {i}");
    }
    assert!(sim.faults().is_empty());
}

#[test]
fn nobody_passes_before_the_readies_exist() {
    // readies are put once and not re-sent, so under loss some robots may
    // wait forever; whoever passes must have seen all of them
    let cfg = SimulationConfig::new(12, 0.5, 13);
    let mut sim = Simulation::new(&cfg, &barrier(), &no_setup).unwrap();
    let mut passed = 0;
    for _ in 0..200 {
        let m = sim.step(Schedule::Sequential);
        for (i, v) in m.readout.iter().enumerate() {
            if *v == Some(1.0) {
                assert_eq!(sim.vm(i).stigmergy(1).unwrap().size(), 12);
            }
        }
        passed = m.readout.iter().filter(|v| **v == Some(1.0)).count();
    }
    assert!(passed > 0);
}
