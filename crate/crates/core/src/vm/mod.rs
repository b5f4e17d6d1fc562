//! Stack-based virtual machine. One [`Vm`] runs one robot.
//!
//! A call to [`Vm::step`] performs one control cycle: it ingests the messages
//! received since the previous step, runs a slice of the script, and returns
//! the messages to broadcast together with the actuator values recorded
//! during the step. Sensor tables are written beforehand with
//! [`Vm::set_table`].

mod builtins;
mod error;
mod interp;
mod program;
mod value;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

pub use builtins::Builtin;
pub use error::{RuntimeError, VmError};
pub use program::{FunctionInfo, Instr, Program};
pub use value::{Closure, Env, Heap, Obj, ObjRef, StrId, Table, TableKey, Value, View};

use crate::lang::BytecodeImage;
use crate::neighbors::NeighborRecord;
use crate::queue::OutQueue;
use crate::swarm::{SwarmRegistry, DEFAULT_FORGET_THRESHOLD, DEFAULT_LIST_PERIOD};
use crate::vstig::VStigStore;
use crate::wire::{Datum, Envelope, Message};

/// Host callback. It receives the VM and the call arguments; returning
/// `Value::Nil` means "no return value".
pub type HostFunction = Box<dyn FnMut(&mut Vm, &[Value]) -> Result<Value, RuntimeError> + Send>;

#[derive(Debug, Clone, PartialEq)]
pub struct VmConfig {
    /// Bytes of outbound payload per step, envelope headers included.
    pub payload_budget: usize,
    /// Instructions executed per step before the script is suspended at the
    /// next loop back-edge.
    pub step_budget: u64,
    /// Hard instruction cap for a single callback run from the runtime
    /// (listeners, resolvers, neighbor operations, host calls).
    pub callback_limit: u64,
    pub max_call_depth: usize,
    pub forget_threshold: u32,
    pub list_period: u64,
    /// Apply protocol compaction rules to the outbound queue.
    pub optimize_queues: bool,
}

impl Default for VmConfig {
    fn default() -> Self {
        Self {
            payload_budget: 200,
            step_budget: 10_000,
            callback_limit: 10_000_000,
            max_call_depth: 512,
            forget_threshold: DEFAULT_FORGET_THRESHOLD,
            list_period: DEFAULT_LIST_PERIOD,
            optimize_queues: true,
        }
    }
}

/// A message as heard by the receiver, with the sender's relative position.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub payload: Arc<[u8]>,
    /// Centimeters.
    pub distance: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub outbox: Vec<Vec<u8>>,
    /// Arguments of the last call to each actuator during the step.
    pub actuation: BTreeMap<String, Vec<Datum>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Task {
    Chunk,
    Init,
    Step,
}

#[derive(Debug, Clone)]
struct Frame {
    func: u32,
    pc: u32,
    env: ObjRef,
    self_val: Value,
    /// Operand stack height when the frame was entered.
    base: usize,
    /// Set for functions entered through `exec`.
    pops_swarm: bool,
}

#[derive(Debug, Default)]
struct StigSlot {
    store: Option<VStigStore>,
    onconflict: Option<Value>,
    onconflictlost: Option<Value>,
}

pub struct Vm {
    program: Arc<Program>,
    config: VmConfig,
    robot: u32,
    heap: Heap,
    strings: Vec<String>,
    string_ids: HashMap<String, StrId>,
    globals: Vec<Value>,
    stack: Vec<Value>,
    frames: Vec<Frame>,
    swarm_stack: Vec<u16>,
    hosts: Vec<Option<HostFunction>>,
    host_names: Vec<String>,
    actuators: Vec<String>,
    actuation: BTreeMap<String, Vec<Datum>>,
    swarms: SwarmRegistry,
    stigs: BTreeMap<u16, StigSlot>,
    listeners: BTreeMap<String, Value>,
    records: BTreeMap<u32, NeighborRecord>,
    live_view: ObjRef,
    queue: OutQueue,
    agenda: VecDeque<Task>,
    booted: bool,
    step: u64,
    fault: Option<RuntimeError>,
    output: Vec<String>,
    nesting: u32,
    budget_left: u64,
    callback_used: u64,
    dropped_inbound: u64,
}

impl std::fmt::Debug for Vm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Vm")
            .field("robot", &self.robot)
            .field("step", &self.step)
            .field("fault", &self.fault)
            .finish_non_exhaustive()
    }
}

impl Vm {
    /// Creates a VM for `robot_id`. Top-level code does not run until
    /// [`Vm::boot`] or the first [`Vm::step`].
    pub fn new(img: &BytecodeImage, robot_id: i64, config: VmConfig) -> Result<Self, VmError> {
        let program = Arc::new(Program::from_image(img)?);
        Self::with_program(program, robot_id, config)
    }

    /// Creates a VM sharing an already decoded program.
    pub fn with_program(program: Arc<Program>, robot_id: i64, config: VmConfig) -> Result<Self, VmError> {
        let robot = u32::try_from(robot_id).map_err(|_| VmError::InvalidRobotId(robot_id))?;
        let mut heap = Heap::default();
        let live_view = heap.alloc(Obj::View(View::default()));
        let mut vm = Self {
            config: config.clone(),
            robot,
            heap,
            strings: Vec::new(),
            string_ids: HashMap::new(),
            globals: Vec::new(),
            stack: Vec::new(),
            frames: Vec::new(),
            swarm_stack: Vec::new(),
            hosts: Vec::new(),
            host_names: Vec::new(),
            actuators: Vec::new(),
            actuation: BTreeMap::new(),
            swarms: SwarmRegistry::new(config.forget_threshold, config.list_period),
            stigs: BTreeMap::new(),
            listeners: BTreeMap::new(),
            records: BTreeMap::new(),
            live_view,
            queue: OutQueue::new(),
            agenda: VecDeque::new(),
            booted: false,
            step: 0,
            fault: None,
            output: Vec::new(),
            nesting: 0,
            budget_left: 0,
            callback_used: 0,
            dropped_inbound: 0,
            program,
        };
        for s in vm.program.strings.clone() {
            vm.intern(&s);
        }
        vm.install_builtins();
        Ok(vm)
    }

    pub fn robot_id(&self) -> u32 {
        self.robot
    }

    pub fn config(&self) -> &VmConfig {
        &self.config
    }

    pub fn program(&self) -> &Arc<Program> {
        &self.program
    }

    /// Number of completed steps.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn fault(&self) -> Option<&RuntimeError> {
        self.fault.as_ref()
    }

    pub fn is_booted(&self) -> bool {
        self.booted
    }

    /// True while a task is suspended mid-execution.
    pub fn is_suspended(&self) -> bool {
        !self.frames.is_empty()
    }

    pub fn swarm_stack(&self) -> &[u16] {
        &self.swarm_stack
    }

    pub fn swarms(&self) -> &SwarmRegistry {
        &self.swarms
    }

    pub fn stigmergy(&self, id: u16) -> Option<&VStigStore> {
        self.stigs.get(&id).and_then(|s| s.store.as_ref())
    }

    pub fn neighbors(&self) -> &BTreeMap<u32, NeighborRecord> {
        &self.records
    }

    pub fn queue(&self) -> &OutQueue {
        &self.queue
    }

    /// Inbound messages that failed to decode.
    pub fn dropped_inbound(&self) -> u64 {
        self.dropped_inbound
    }

    /// Lines produced by `print` since the last call.
    pub fn take_output(&mut self) -> Vec<String> {
        std::mem::take(&mut self.output)
    }

    pub fn intern(&mut self, s: &str) -> StrId {
        if let Some(&id) = self.string_ids.get(s) {
            return id;
        }
        let id = self.strings.len() as StrId;
        self.strings.push(s.to_string());
        self.string_ids.insert(s.to_string(), id);
        self.globals.push(Value::Nil);
        id
    }

    pub fn string(&self, id: StrId) -> &str {
        &self.strings[id as usize]
    }

    pub fn heap(&self) -> &Heap {
        &self.heap
    }

    pub fn global(&self, name: &str) -> Value {
        self.string_ids
            .get(name)
            .map_or(Value::Nil, |&id| self.globals[id as usize])
    }

    pub fn global_datum(&self, name: &str) -> Option<Datum> {
        self.to_datum(self.global(name)).ok()
    }

    pub fn set_global(&mut self, name: &str, value: Value) {
        let id = self.intern(name);
        self.globals[id as usize] = value;
    }

    /// Non-nil globals sorted by name.
    pub fn globals(&self) -> Vec<(&str, Value)> {
        let mut out: Vec<_> = self
            .globals
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != Value::Nil)
            .map(|(i, v)| (self.strings[i].as_str(), *v))
            .collect();
        out.sort_by(|a, b| a.0.cmp(b.0));
        out
    }

    /// Binds a host function to the global `name`.
    pub fn register_function(&mut self, name: &str, f: HostFunction) -> Result<(), VmError> {
        self.check_new_binding(name)?;
        let index = self.hosts.len() as u32;
        self.hosts.push(Some(f));
        self.host_names.push(name.to_string());
        self.set_global(name, Value::Host(index));
        Ok(())
    }

    /// Binds an actuator: calls record their arguments in the step output.
    pub fn register_actuator(&mut self, name: &str) -> Result<(), VmError> {
        self.check_new_binding(name)?;
        let index = self.actuators.len() as u16;
        self.actuators.push(name.to_string());
        self.set_global(name, Value::Builtin(Builtin::Actuator(index)));
        Ok(())
    }

    fn check_new_binding(&self, name: &str) -> Result<(), VmError> {
        if self.booted {
            return Err(VmError::AlreadyBooted(name.to_string()));
        }
        if self.global(name) != Value::Nil {
            return Err(VmError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    /// Replaces the global `name` with a table holding `entries`.
    pub fn set_table(&mut self, name: &str, entries: &[(Datum, Datum)]) {
        let t = self.from_datum(&Datum::Table(entries.to_vec()));
        self.set_global(name, t);
    }

    /// Calls the script function bound to global `name`. Missing arguments
    /// are nil. Returned heap references stay valid until the next step.
    pub fn call_function(&mut self, name: &str, args: &[Value]) -> Result<Value, VmError> {
        if let Some(f) = &self.fault {
            return Err(VmError::Faulted(f.clone()));
        }
        let callee = self.global(name);
        if !callee.is_callable() {
            return Err(VmError::NotAFunction(name.to_string()));
        }
        self.callback_used = 0;
        match self.call_value(callee, Value::Nil, args) {
            Ok(v) => Ok(v),
            Err(e) => Err(VmError::Runtime(self.set_fault(e))),
        }
    }

    fn set_fault(&mut self, e: RuntimeError) -> RuntimeError {
        self.fault = Some(e.clone());
        e
    }

    /// Runs the top-level chunk and `init`, without a step. A script that
    /// is still busy when the instruction budget runs out is resumed by the
    /// next step.
    pub fn boot(&mut self) -> Result<(), VmError> {
        if let Some(f) = &self.fault {
            return Err(VmError::Faulted(f.clone()));
        }
        if !self.booted {
            self.booted = true;
            self.agenda.push_back(Task::Chunk);
            self.agenda.push_back(Task::Init);
        }
        self.run_tasks().map_err(|e| VmError::Runtime(self.set_fault(e)))
    }

    /// One control cycle; see the module documentation.
    pub fn step(&mut self, inbox: &[Received]) -> Result<StepOutput, VmError> {
        if let Some(f) = &self.fault {
            return Err(VmError::Faulted(f.clone()));
        }
        match self.step_inner(inbox) {
            Ok(out) => Ok(out),
            Err(e) => Err(VmError::Runtime(self.set_fault(e))),
        }
    }

    fn step_inner(&mut self, inbox: &[Received]) -> Result<StepOutput, RuntimeError> {
        self.step += 1;
        self.actuation.clear();
        self.ingest(inbox)?;

        if !self.booted {
            self.booted = true;
            self.agenda.push_back(Task::Chunk);
            self.agenda.push_back(Task::Init);
        }
        if self.frames.is_empty() && !self.agenda.contains(&Task::Step) {
            self.agenda.push_back(Task::Step);
        }
        self.run_tasks()?;

        let mut budget = self.config.payload_budget;
        let mut outbox = Vec::new();
        let announce = Envelope::new(self.robot, Message::Announce).encode()?;
        if announce.len() <= budget {
            budget -= announce.len();
            outbox.push(announce);
            outbox.extend(self.queue.drain_budget(self.robot, &mut budget)?);
        }

        if self.heap.should_collect() {
            self.collect_garbage();
        }
        Ok(StepOutput {
            outbox,
            actuation: std::mem::take(&mut self.actuation),
        })
    }

    /// Phase 2: neighbor table, swarm view, stigmergy and broadcasts.
    fn ingest(&mut self, inbox: &[Received]) -> Result<(), RuntimeError> {
        self.swarms.on_step(self.step, &mut self.queue);
        let mut decoded = Vec::with_capacity(inbox.len());
        for r in inbox {
            match Envelope::decode(&r.payload) {
                Ok(env) if env.sender != self.robot => decoded.push((env, r)),
                Ok(_) => {}
                Err(_) => self.dropped_inbound += 1,
            }
        }
        self.records = crate::neighbors::rebuild(decoded.iter().map(|(env, r)| NeighborRecord {
            robot: env.sender,
            distance: r.distance,
            azimuth: r.azimuth,
            elevation: r.elevation,
        }));
        let (kd, ka, ke) = (self.intern("distance"), self.intern("azimuth"), self.intern("elevation"));
        let records: Vec<NeighborRecord> = self.records.values().copied().collect();
        let mut entries = Vec::with_capacity(records.len());
        for r in records {
            let mut t = Table::new();
            t.insert(TableKey::Str(kd), Value::Float(r.distance));
            t.insert(TableKey::Str(ka), Value::Float(r.azimuth));
            t.insert(TableKey::Str(ke), Value::Float(r.elevation));
            entries.push((r.robot, Value::Table(self.heap.alloc(Obj::Table(t)))));
        }
        self.heap.view_mut(self.live_view).entries = entries;

        for (env, _) in decoded {
            self.callback_used = 0;
            let sender = env.sender;
            match env.message {
                Message::Announce => {}
                Message::SwarmJoin { .. } | Message::SwarmLeave { .. } | Message::SwarmList { .. } => {
                    let msg = crate::swarm::SwarmMessage::from_message(&env.message).expect("swarm message");
                    self.swarms.apply(sender, &msg);
                }
                Message::VStigPut(w) => self.stig_received(w, false)?,
                Message::VStigGet(w) => self.stig_received(w, true)?,
                Message::Broadcast { key, value } => {
                    if let Some(&listener) = self.listeners.get(&key) {
                        let k = Value::Str(self.intern(&key));
                        let v = self.from_datum(&value);
                        self.call_value(listener, Value::Nil, &[k, v, Value::Int(sender as i64)])?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Phase 3: runs or resumes tasks until the agenda is empty or the
    /// instruction budget is spent.
    fn run_tasks(&mut self) -> Result<(), RuntimeError> {
        self.budget_left = self.config.step_budget;
        self.callback_used = 0;
        loop {
            if self.frames.is_empty() {
                let Some(task) = self.agenda.pop_front() else {
                    return Ok(());
                };
                let callee = match task {
                    Task::Chunk if !self.program.functions.is_empty() => {
                        Value::Closure(self.heap.alloc(Obj::Closure(Closure { func: 0, env: None })))
                    }
                    Task::Chunk => continue,
                    Task::Init => self.global("init"),
                    Task::Step => self.global("step"),
                };
                if !callee.is_callable() {
                    continue;
                }
                let argc_base = self.stack.len();
                self.stack.push(callee);
                self.begin_call(argc_base + 1, argc_base, Value::Nil, 0)?;
                if self.frames.is_empty() {
                    // Native entry point: the result is already on the stack.
                    self.stack.truncate(argc_base);
                    continue;
                }
            }
            match self.exec_loop(0)? {
                interp::Exit::Returned => {
                    self.stack.clear();
                }
                interp::Exit::Yielded => return Ok(()),
            }
        }
    }

    fn collect_garbage(&mut self) {
        let mut roots: Vec<Value> = Vec::with_capacity(self.globals.len() + self.stack.len() + 16);
        roots.extend(self.globals.iter().copied());
        roots.extend(self.stack.iter().copied());
        roots.extend(self.frames.iter().map(|f| f.self_val));
        roots.extend(self.listeners.values().copied());
        for slot in self.stigs.values() {
            roots.extend(slot.onconflict);
            roots.extend(slot.onconflictlost);
        }
        let envs: Vec<ObjRef> = self
            .frames
            .iter()
            .map(|f| f.env)
            .chain(std::iter::once(self.live_view))
            .collect();
        self.heap.collect(roots, envs);
    }

    /// Converts a value to its serializable form. Closures and handles are
    /// rejected.
    pub fn to_datum(&self, v: Value) -> Result<Datum, RuntimeError> {
        self.to_datum_depth(v, 0)
    }

    fn to_datum_depth(&self, v: Value, depth: usize) -> Result<Datum, RuntimeError> {
        if depth > 32 {
            return Err(RuntimeError::new("table nesting too deep to serialize"));
        }
        Ok(match v {
            Value::Nil => Datum::Nil,
            Value::Int(i) => Datum::Int(i),
            Value::Float(f) => Datum::Float(f),
            Value::Str(s) => Datum::Str(self.strings[s as usize].clone()),
            Value::Table(r) => {
                let mut pairs = Vec::new();
                for (k, v) in self.heap.table(r) {
                    pairs.push((self.to_datum_depth(k.to_value(), depth + 1)?, self.to_datum_depth(*v, depth + 1)?));
                }
                Datum::Table(pairs)
            }
            other => {
                return Err(RuntimeError::new(format!(
                    "a {} value cannot be serialized",
                    other.type_name()
                )))
            }
        })
    }

    /// Builds a runtime value from a datum. Table pairs whose key cannot be
    /// a table key are skipped.
    pub fn from_datum(&mut self, d: &Datum) -> Value {
        match d {
            Datum::Nil => Value::Nil,
            Datum::Int(i) => Value::Int(*i),
            Datum::Float(f) => Value::Float(*f),
            Datum::Str(s) => Value::Str(self.intern(s)),
            Datum::Table(pairs) => {
                let mut t = Table::with_capacity(pairs.len());
                for (k, v) in pairs {
                    let k = self.from_datum(k);
                    let v = self.from_datum(v);
                    if let (Ok(key), false) = (TableKey::from_value(k), v == Value::Nil) {
                        t.insert(key, v);
                    }
                }
                Value::Table(self.heap.alloc(Obj::Table(t)))
            }
        }
    }

    /// Creates an empty table.
    pub fn new_table(&mut self) -> Value {
        Value::Table(self.heap.alloc(Obj::Table(Table::new())))
    }

    /// Reads `t[key]`; nil for anything but a table holding the key.
    pub fn table_get(&self, t: Value, key: Value) -> Value {
        match (t, TableKey::from_value(key)) {
            (Value::Table(r), Ok(k)) => self.heap.table(r).get(&k).copied().unwrap_or(Value::Nil),
            _ => Value::Nil,
        }
    }

    /// Reads a string-keyed field.
    pub fn field(&self, t: Value, name: &str) -> Value {
        match self.string_ids.get(name) {
            Some(&id) => self.table_get(t, Value::Str(id)),
            None => Value::Nil,
        }
    }

    /// Human-readable rendering used by `print`.
    pub fn display(&self, v: Value) -> String {
        match v {
            Value::Nil => "nil".into(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format_float(f),
            Value::Str(s) => self.strings[s as usize].clone(),
            Value::Table(_) => "[table]".into(),
            Value::Closure(_) | Value::Host(_) | Value::Builtin(_) => "[closure]".into(),
            Value::Swarm(id) => format!("[swarm {id}]"),
            Value::VStig(id) => format!("[stigmergy {id}]"),
            Value::Neighbors(_) => "[neighbors]".into(),
        }
    }
}

pub fn format_float(f: f64) -> String {
    if f.is_finite() && f.fract() == 0.0 && f.abs() < 1e16 {
        format!("{f:.1}")
    } else {
        format!("{f}")
    }
}
