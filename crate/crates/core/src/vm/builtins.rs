//! Functions provided by the runtime: `print`, `math`, and the swarm,
//! stigmergy and neighbor objects.

use super::value::{Obj, Table, TableKey, Value, View};
use super::{RuntimeError, StigSlot, Vm};
use crate::neighbors::enqueue_broadcast;
use crate::swarm::{self, SwarmMessage};
use crate::vstig::{self, Resolution, VKey, VStigEntry, VStigOp, VStigStore};
use crate::wire::VStigWire;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Print,
    MathAbs,
    MathSqrt,
    MathSin,
    MathCos,
    MathMin,
    MathMax,
    SwarmCreate,
    SwarmId,
    SwarmIntersection,
    SwarmUnion,
    SwarmDifference,
    SwarmJoin,
    SwarmLeave,
    SwarmSelect,
    SwarmUnselect,
    SwarmIn,
    SwarmExec,
    SwarmOthers,
    StigCreate,
    StigPut,
    StigGet,
    StigSize,
    StigOnConflict,
    StigOnConflictLost,
    NbrForeach,
    NbrMap,
    NbrReduce,
    NbrFilter,
    NbrKin,
    NbrNonkin,
    NbrCount,
    NbrGet,
    NbrBroadcast,
    NbrListen,
    NbrIgnore,
    /// Host actuator, by registration index.
    Actuator(u16),
}

impl Builtin {
    pub fn swarm_method(name: &str) -> Option<Builtin> {
        use Builtin::*;
        Some(match name {
            "join" => SwarmJoin,
            "leave" => SwarmLeave,
            "select" => SwarmSelect,
            "unselect" => SwarmUnselect,
            "in" => SwarmIn,
            "exec" => SwarmExec,
            "others" => SwarmOthers,
            _ => return None,
        })
    }

    pub fn stigmergy_method(name: &str) -> Option<Builtin> {
        use Builtin::*;
        Some(match name {
            "put" => StigPut,
            "get" => StigGet,
            "size" => StigSize,
            "onconflict" => StigOnConflict,
            "onconflictlost" => StigOnConflictLost,
            _ => return None,
        })
    }

    pub fn neighbors_method(name: &str) -> Option<Builtin> {
        use Builtin::*;
        Some(match name {
            "foreach" => NbrForeach,
            "map" => NbrMap,
            "reduce" => NbrReduce,
            "filter" => NbrFilter,
            "kin" => NbrKin,
            "nonkin" => NbrNonkin,
            "count" => NbrCount,
            "get" => NbrGet,
            "broadcast" => NbrBroadcast,
            "listen" => NbrListen,
            "ignore" => NbrIgnore,
            _ => return None,
        })
    }
}

fn arg(args: &[Value], i: usize) -> Value {
    args.get(i).copied().unwrap_or(Value::Nil)
}

fn number(args: &[Value], i: usize, what: &str) -> Result<f64, RuntimeError> {
    arg(args, i)
        .as_f64()
        .ok_or_else(|| RuntimeError::new(format!("{what} expects a number, got {}", arg(args, i).type_name())))
}

fn small_id(v: Value, what: &str) -> Result<u16, RuntimeError> {
    match v {
        Value::Int(i) => u16::try_from(i)
            .map_err(|_| RuntimeError::new(format!("{what}: id {i} is outside 0..=65535"))),
        Value::Float(f) if f.fract() == 0.0 && (0.0..=65535.0).contains(&f) => Ok(f as u16),
        other => Err(RuntimeError::new(format!(
            "{what} expects an integer id, got {}",
            other.type_name()
        ))),
    }
}

fn swarm_handle(v: Value, what: &str) -> Result<u16, RuntimeError> {
    match v {
        Value::Swarm(id) => Ok(id),
        other => Err(RuntimeError::new(format!(
            "{what} expects a swarm, got {}",
            other.type_name()
        ))),
    }
}

impl Vm {
    pub(super) fn install_builtins(&mut self) {
        use Builtin::*;
        self.set_global("print", Value::Builtin(Print));
        let id = Value::Int(self.robot as i64);
        self.set_global("id", id);
        let math = self.builtin_table(&[
            ("abs", MathAbs),
            ("sqrt", MathSqrt),
            ("sin", MathSin),
            ("cos", MathCos),
            ("min", MathMin),
            ("max", MathMax),
        ]);
        let pi = self.intern("pi");
        if let Value::Table(r) = math {
            self.heap.table_mut(r).insert(TableKey::Str(pi), Value::Float(std::f64::consts::PI));
        }
        self.set_global("math", math);
        let swarm = self.builtin_table(&[
            ("create", SwarmCreate),
            ("id", SwarmId),
            ("intersection", SwarmIntersection),
            ("union", SwarmUnion),
            ("difference", SwarmDifference),
        ]);
        self.set_global("swarm", swarm);
        let stig = self.builtin_table(&[("create", StigCreate)]);
        self.set_global("stigmergy", stig);
        self.set_global("neighbors", Value::Neighbors(self.live_view));
    }

    fn builtin_table(&mut self, entries: &[(&str, Builtin)]) -> Value {
        let mut t = Table::new();
        for (name, b) in entries {
            t.insert(TableKey::Str(self.intern(name)), Value::Builtin(*b));
        }
        Value::Table(self.heap.alloc(Obj::Table(t)))
    }

    fn queue_swarm(&mut self, msg: Option<SwarmMessage>) {
        if let Some(m) = msg {
            if self.config.optimize_queues {
                swarm::enqueue(&mut self.queue, m);
            } else {
                self.queue.push_raw(m.to_message());
            }
        }
    }

    fn queue_stig(&mut self, op: VStigOp, w: VStigWire) {
        if self.config.optimize_queues {
            vstig::enqueue(&mut self.queue, op, w);
        } else {
            self.queue.push_raw(match op {
                VStigOp::Put => crate::wire::Message::VStigPut(w),
                VStigOp::Get => crate::wire::Message::VStigGet(w),
            });
        }
    }

    fn view_entries(&self, v: Value) -> Result<Vec<(u32, Value)>, RuntimeError> {
        match v {
            Value::Neighbors(r) => Ok(self.heap.view(r).entries.clone()),
            other => Err(RuntimeError::new(format!(
                "expected a neighbor view, got {}",
                other.type_name()
            ))),
        }
    }

    fn new_view(&mut self, entries: Vec<(u32, Value)>) -> Value {
        Value::Neighbors(self.heap.alloc(Obj::View(View { entries })))
    }

    fn stig_key(&self, v: Value) -> Result<VKey, RuntimeError> {
        let d = self.to_datum(v)?;
        VKey::from_datum(&d).map_err(|e| RuntimeError::new(e.to_string()))
    }

    fn stig_store(&mut self, self_val: Value) -> Result<(u16, &mut VStigStore), RuntimeError> {
        let Value::VStig(id) = self_val else {
            return Err(RuntimeError::new(format!(
                "expected a stigmergy, got {}",
                self_val.type_name()
            )));
        };
        let store = self
            .stigs
            .entry(id)
            .or_default()
            .store
            .get_or_insert_with(|| VStigStore::new(id));
        Ok((id, store))
    }

    pub(super) fn call_builtin(&mut self, b: Builtin, self_val: Value, args: &[Value]) -> Result<Value, RuntimeError> {
        use Builtin::*;
        match b {
            Print => {
                let line: String = args.iter().map(|v| self.display(*v)).collect();
                self.output.push(line);
                Ok(Value::Nil)
            }
            MathAbs => match arg(args, 0) {
                Value::Int(i) => Ok(Value::Int(i.wrapping_abs())),
                _ => Ok(Value::Float(number(args, 0, "math.abs")?.abs())),
            },
            MathSqrt => Ok(Value::Float(number(args, 0, "math.sqrt")?.sqrt())),
            MathSin => Ok(Value::Float(number(args, 0, "math.sin")?.sin())),
            MathCos => Ok(Value::Float(number(args, 0, "math.cos")?.cos())),
            MathMin | MathMax => {
                let (a, bv) = (arg(args, 0), arg(args, 1));
                let x = number(args, 0, "math.min/max")?;
                let y = number(args, 1, "math.min/max")?;
                let pick_first = if b == MathMin { x <= y } else { x >= y };
                Ok(if pick_first { a } else { bv })
            }
            SwarmCreate => {
                let id = small_id(arg(args, 0), "swarm.create")?;
                self.swarms.create(id);
                Ok(Value::Swarm(id))
            }
            SwarmId => {
                let n = match arg(args, 0) {
                    Value::Nil => 0,
                    Value::Int(n) if n >= 0 => n as usize,
                    other => {
                        return Err(RuntimeError::new(format!(
                            "swarm.id expects a non-negative integer, got {}",
                            self.display(other)
                        )))
                    }
                };
                let depth = self.swarm_stack.len();
                Ok(if n < depth {
                    Value::Int(self.swarm_stack[depth - 1 - n] as i64)
                } else {
                    Value::Nil
                })
            }
            SwarmIntersection | SwarmUnion | SwarmDifference => {
                let id = small_id(arg(args, 0), "swarm set operation")?;
                let a = self.swarms.is_member(swarm_handle(arg(args, 1), "swarm set operation")?);
                let c = self.swarms.is_member(swarm_handle(arg(args, 2), "swarm set operation")?);
                let member = match b {
                    SwarmIntersection => a && c,
                    SwarmUnion => a || c,
                    _ => a && !c,
                };
                self.swarms.create(id);
                let msg = self.swarms.set_member(id, member);
                self.queue_swarm(msg);
                Ok(Value::Swarm(id))
            }
            SwarmOthers => {
                let own = swarm_handle(self_val, "others")?;
                let id = small_id(arg(args, 0), "others")?;
                let member = !self.swarms.is_member(own);
                self.swarms.create(id);
                let msg = self.swarms.set_member(id, member);
                self.queue_swarm(msg);
                Ok(Value::Swarm(id))
            }
            SwarmJoin | SwarmLeave | SwarmSelect | SwarmUnselect => {
                let id = swarm_handle(self_val, "swarm method")?;
                let (apply, member) = match b {
                    SwarmJoin => (true, true),
                    SwarmLeave => (true, false),
                    SwarmSelect => (arg(args, 0).truthy(), true),
                    _ => (arg(args, 0).truthy(), false),
                };
                if apply {
                    let msg = self.swarms.set_member(id, member);
                    self.queue_swarm(msg);
                }
                Ok(Value::Nil)
            }
            SwarmIn => {
                let id = swarm_handle(self_val, "in")?;
                Ok(Value::Int(self.swarms.is_member(id) as i64))
            }
            SwarmExec => {
                // Reached only for native callees invoked from the host.
                let id = swarm_handle(self_val, "exec")?;
                if self.swarms.is_member(id) {
                    self.swarm_stack.push(id);
                    let r = self.call_value(arg(args, 0), Value::Nil, &[]);
                    self.swarm_stack.pop();
                    r?;
                }
                Ok(Value::Nil)
            }
            StigCreate => {
                let id = small_id(arg(args, 0), "stigmergy.create")?;
                self.stigs
                    .entry(id)
                    .or_default()
                    .store
                    .get_or_insert_with(|| VStigStore::new(id));
                Ok(Value::VStig(id))
            }
            StigPut => {
                let key = self.stig_key(arg(args, 0))?;
                let value = self.to_datum(arg(args, 1)).map_err(|_| {
                    RuntimeError::new(format!(
                        "stigmergy values must be numbers, strings or tables, not {}",
                        arg(args, 1).type_name()
                    ))
                })?;
                let robot = self.robot;
                let (_, store) = self.stig_store(self_val)?;
                let w = store.put(key, value, robot);
                self.queue_stig(VStigOp::Put, w);
                Ok(Value::Nil)
            }
            StigGet => {
                let key = self.stig_key(arg(args, 0))?;
                let robot = self.robot;
                let (_, store) = self.stig_store(self_val)?;
                let (value, w) = store.get(&key, robot);
                self.queue_stig(VStigOp::Get, w);
                Ok(self.from_datum(&value))
            }
            StigSize => {
                let (_, store) = self.stig_store(self_val)?;
                Ok(Value::Int(store.size() as i64))
            }
            StigOnConflict | StigOnConflictLost => {
                let (id, _) = self.stig_store(self_val)?;
                let f = arg(args, 0);
                if f != Value::Nil && !f.is_callable() {
                    return Err(RuntimeError::new("conflict handler must be a closure"));
                }
                let slot = self.stigs.entry(id).or_default();
                let f = (f != Value::Nil).then_some(f);
                if b == StigOnConflict {
                    slot.onconflict = f;
                } else {
                    slot.onconflictlost = f;
                }
                Ok(Value::Nil)
            }
            NbrForeach => {
                let f = arg(args, 0);
                for (rid, data) in self.view_entries(self_val)? {
                    self.call_value(f, Value::Nil, &[Value::Int(rid as i64), data])?;
                }
                Ok(Value::Nil)
            }
            NbrMap => {
                let f = arg(args, 0);
                let mut out = Vec::new();
                for (rid, data) in self.view_entries(self_val)? {
                    let v = self.call_value(f, Value::Nil, &[Value::Int(rid as i64), data])?;
                    out.push((rid, v));
                }
                Ok(self.new_view(out))
            }
            NbrReduce => {
                let f = arg(args, 0);
                let mut acc = arg(args, 1);
                for (rid, data) in self.view_entries(self_val)? {
                    acc = self.call_value(f, Value::Nil, &[Value::Int(rid as i64), data, acc])?;
                }
                Ok(acc)
            }
            NbrFilter => {
                let f = arg(args, 0);
                let mut out = Vec::new();
                for (rid, data) in self.view_entries(self_val)? {
                    if self.call_value(f, Value::Nil, &[Value::Int(rid as i64), data])?.truthy() {
                        out.push((rid, data));
                    }
                }
                Ok(self.new_view(out))
            }
            NbrKin | NbrNonkin => {
                let Some(&top) = self.swarm_stack.last() else {
                    return Err(RuntimeError::new(
                        "kin/nonkin can only be used inside a swarm exec",
                    ));
                };
                let want = b == NbrKin;
                let entries: Vec<_> = self
                    .view_entries(self_val)?
                    .into_iter()
                    .filter(|(rid, _)| self.swarms.neighbor_member(*rid, top) == Some(want))
                    .collect();
                Ok(self.new_view(entries))
            }
            NbrCount => Ok(Value::Int(self.view_entries(self_val)?.len() as i64)),
            NbrGet => {
                let Value::Neighbors(r) = self_val else {
                    return Err(RuntimeError::new("get expects a neighbor view"));
                };
                Ok(match arg(args, 0) {
                    Value::Int(rid) => u32::try_from(rid)
                        .ok()
                        .and_then(|rid| self.heap.view(r).get(rid))
                        .unwrap_or(Value::Nil),
                    _ => Value::Nil,
                })
            }
            NbrBroadcast => {
                let Value::Str(k) = arg(args, 0) else {
                    return Err(RuntimeError::new("broadcast key must be a string"));
                };
                let value = self.to_datum(arg(args, 1))?;
                let key = self.string(k).to_string();
                if self.config.optimize_queues {
                    enqueue_broadcast(&mut self.queue, key, value);
                } else {
                    self.queue.push_raw(crate::wire::Message::Broadcast { key, value });
                }
                Ok(Value::Nil)
            }
            NbrListen => {
                let Value::Str(k) = arg(args, 0) else {
                    return Err(RuntimeError::new("listen key must be a string"));
                };
                let f = arg(args, 1);
                if !f.is_callable() {
                    return Err(RuntimeError::new("listener must be a closure"));
                }
                let key = self.string(k).to_string();
                self.listeners.insert(key, f);
                Ok(Value::Nil)
            }
            NbrIgnore => {
                if let Value::Str(k) = arg(args, 0) {
                    let key = self.string(k).to_string();
                    self.listeners.remove(&key);
                }
                Ok(Value::Nil)
            }
            Actuator(i) => {
                let values = args
                    .iter()
                    .map(|v| self.to_datum(*v))
                    .collect::<Result<Vec<_>, _>>()?;
                let name = self.actuators[i as usize].clone();
                self.actuation.insert(name, values);
                Ok(Value::Nil)
            }
        }
    }

    /// Table handed to conflict handlers: `{data, robot, timestamp}`.
    fn entry_table(&mut self, e: &VStigEntry) -> Value {
        let data = self.from_datum(&e.value);
        let t = self.new_table();
        let Value::Table(r) = t else { unreachable!() };
        let (kd, kr, kt) = (self.intern("data"), self.intern("robot"), self.intern("timestamp"));
        let table = self.heap.table_mut(r);
        if data != Value::Nil {
            table.insert(TableKey::Str(kd), data);
        }
        table.insert(TableKey::Str(kr), Value::Int(e.robot as i64));
        table.insert(TableKey::Str(kt), Value::Int(e.timestamp as i64));
        t
    }

    fn run_resolver(
        &mut self,
        f: Value,
        key: &VKey,
        local: &VStigEntry,
        remote: &VStigEntry,
    ) -> Result<Resolution, RuntimeError> {
        let k = self.from_datum(&key.to_datum());
        let l = self.entry_table(local);
        let r = self.entry_table(remote);
        let out = self.call_value(f, Value::Nil, &[k, l, r])?;
        if !matches!(out, Value::Table(_)) {
            return Err(RuntimeError::new(format!(
                "conflict resolver must return an entry, got {}",
                out.type_name()
            )));
        }
        let data = self.to_datum(self.field(out, "data"))?;
        let robot = match self.field(out, "robot") {
            Value::Int(i) => u32::try_from(i)
                .map_err(|_| RuntimeError::new("resolver entry has an invalid robot id"))?,
            _ => return Err(RuntimeError::new("resolver entry lacks an integer `robot` field")),
        };
        let fresh = VStigEntry {
            value: data,
            timestamp: local.timestamp.max(remote.timestamp),
            robot,
        };
        Ok(if fresh == *local {
            Resolution::Local
        } else if fresh == *remote {
            Resolution::Remote
        } else {
            Resolution::Fresh(fresh)
        })
    }

    /// Handles an incoming PUT or GET for a known store. Messages for
    /// stores this robot has not created are ignored.
    pub(super) fn stig_received(&mut self, w: VStigWire, is_get: bool) -> Result<(), RuntimeError> {
        let Some(StigSlot {
            store: Some(store),
            onconflict,
            ..
        }) = self.stigs.get(&w.vstig)
        else {
            return Ok(());
        };
        let resolver = *onconflict;
        // Work out a script resolution up front: the resolver may itself
        // touch the store.
        let mut scripted = None;
        if let (Some(f), Some((key, local, remote))) = (resolver, pending_conflict(store, &w)) {
            scripted = Some(self.run_resolver(f, &key, &local, &remote)?);
        }
        let slot = self.stigs.get_mut(&w.vstig).expect("slot exists");
        let store = slot.store.as_mut().expect("store exists");
        let resolve = |_: &VKey, l: &VStigEntry, r: &VStigEntry| -> Result<Resolution, RuntimeError> {
            Ok(scripted.take().unwrap_or_else(|| vstig::default_resolve(l, r)))
        };
        let reaction = if is_get {
            store.on_get(&w, resolve)?
        } else {
            store.on_put(&w, resolve)?
        };
        let lost_handler = slot.onconflictlost;
        if let Some(send) = reaction.send {
            self.queue_stig(VStigOp::Put, send);
        }
        if let (Some(lost), Some(f)) = (reaction.lost, lost_handler) {
            let key = VKey::from_datum(&w.key).map_err(|e| RuntimeError::new(e.to_string()))?;
            let k = self.from_datum(&key.to_datum());
            let l = self.entry_table(&lost);
            self.call_value(f, Value::Nil, &[k, l])?;
        }
        Ok(())
    }
}

/// The entries that a message would put in conflict, if any.
fn pending_conflict(store: &VStigStore, w: &VStigWire) -> Option<(VKey, VStigEntry, VStigEntry)> {
    let key = VKey::from_datum(&w.key).ok()?;
    let local = store.entry(&key)?;
    (local.timestamp == w.timestamp && local.robot != w.robot).then(|| {
        (
            key,
            local.clone(),
            VStigEntry {
                value: w.value.clone(),
                timestamp: w.timestamp,
                robot: w.robot,
            },
        )
    })
}
