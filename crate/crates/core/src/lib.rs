//! Swarm scripting language: compiler, bytecode VM and the runtime
//! protocols for swarm membership, neighbor queries and virtual stigmergy.

pub mod behaviors;
pub mod lang;
pub mod neighbors;
pub mod queue;
pub mod swarm;
pub mod vm;
pub mod vstig;
pub mod wire;

pub use lang::{compile_source, BytecodeImage, LangError, SourceScript};
pub use vm::{Received, RuntimeError, StepOutput, Value, Vm, VmConfig, VmError};
pub use wire::Datum;
