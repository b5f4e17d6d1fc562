//! Instruction dispatch and the call protocol.

use std::cmp::Ordering;
use std::sync::Arc;

use super::builtins::Builtin;
use super::program::{Instr, Program};
use super::value::{Closure, Env, Obj, ObjRef, Table, TableKey, Value};
use super::{Frame, RuntimeError, Vm};
use crate::lang::{Constant, Opcode};

pub(super) enum Exit {
    /// The frame at the stop depth returned; its result is on the stack.
    Returned,
    /// The instruction budget ran out at a loop back-edge.
    Yielded,
}

enum Flow {
    Next,
    Exit(Exit),
}

impl Vm {
    /// Calls `callee` to completion and returns its result.
    pub(super) fn call_value(&mut self, callee: Value, self_val: Value, args: &[Value]) -> Result<Value, RuntimeError> {
        let base = self.stack.len();
        self.stack.push(callee);
        self.stack.extend_from_slice(args);
        let depth = self.frames.len();
        self.nesting += 1;
        let result = self.begin_call(base + 1, base, self_val, args.len()).and_then(|()| {
            if self.frames.len() > depth {
                self.exec_loop(depth).map(|_| ())
            } else {
                Ok(())
            }
        });
        self.nesting -= 1;
        result?;
        let v = self.stack.pop().unwrap_or(Value::Nil);
        self.stack.truncate(base);
        Ok(v)
    }

    /// Starts a call. The arguments are the `argc` values from `args_at` to
    /// the top of the stack and the callee sits just below them. Script
    /// functions get a new frame; native ones run immediately and leave
    /// their result on the stack. The stack is cut back to `base` before
    /// the result is pushed.
    pub(super) fn begin_call(
        &mut self,
        args_at: usize,
        base: usize,
        self_val: Value,
        argc: usize,
    ) -> Result<(), RuntimeError> {
        debug_assert_eq!(args_at + argc, self.stack.len());
        let callee = self.stack[args_at - 1];
        match callee {
            Value::Closure(r) => {
                let closure = self.heap.closure(r).clone();
                self.enter(closure, args_at, base, self_val, false)
            }
            Value::Builtin(Builtin::SwarmExec) => {
                let Value::Swarm(id) = self_val else {
                    return Err(RuntimeError::new("exec must be called on a swarm"));
                };
                let f = if argc > 0 { self.stack[args_at] } else { Value::Nil };
                if !f.is_callable() {
                    return Err(RuntimeError::new(format!(
                        "exec expects a closure, got {}",
                        f.type_name()
                    )));
                }
                if !self.swarms.is_member(id) {
                    self.stack.truncate(base);
                    self.stack.push(Value::Nil);
                    return Ok(());
                }
                match f {
                    Value::Closure(r) => {
                        let closure = self.heap.closure(r).clone();
                        self.swarm_stack.push(id);
                        // The callee takes no arguments.
                        let at = self.stack.len();
                        self.enter(closure, at, base, Value::Nil, true)
                    }
                    native => {
                        self.swarm_stack.push(id);
                        let r = self.call_value(native, Value::Nil, &[]);
                        self.swarm_stack.pop();
                        r?;
                        self.stack.truncate(base);
                        self.stack.push(Value::Nil);
                        Ok(())
                    }
                }
            }
            Value::Builtin(b) => {
                let args: Vec<Value> = self.stack[args_at..].to_vec();
                let v = self.call_builtin(b, self_val, &args)?;
                self.stack.truncate(base);
                self.stack.push(v);
                Ok(())
            }
            Value::Host(i) => {
                let args: Vec<Value> = self.stack[args_at..].to_vec();
                let mut f = self.hosts[i as usize].take().ok_or_else(|| {
                    RuntimeError::new(format!(
                        "host function `{}` called re-entrantly",
                        self.host_names[i as usize]
                    ))
                })?;
                let r = f(self, &args);
                self.hosts[i as usize] = Some(f);
                let v = r?;
                self.stack.truncate(base);
                self.stack.push(v);
                Ok(())
            }
            Value::Nil => Err(RuntimeError::new("attempt to call a nil value")),
            other => Err(RuntimeError::new(format!(
                "attempt to call a {} value",
                other.type_name()
            ))),
        }
    }

    fn enter(
        &mut self,
        closure: Closure,
        args_at: usize,
        base: usize,
        self_val: Value,
        pops_swarm: bool,
    ) -> Result<(), RuntimeError> {
        if self.frames.len() >= self.config.max_call_depth {
            if pops_swarm {
                self.swarm_stack.pop();
            }
            return Err(RuntimeError::new("stack overflow"));
        }
        let info = &self.program.functions[closure.func as usize];
        let (params, locals, entry) = (info.params as usize, info.locals as usize, info.entry);
        let mut slots = vec![Value::Nil; locals.max(params)];
        for (slot, v) in slots.iter_mut().zip(&self.stack[args_at..]).take(params) {
            *slot = *v;
        }
        self.stack.truncate(base);
        let env = self.heap.alloc(Obj::Env(Env {
            slots,
            parent: closure.env,
        }));
        self.frames.push(Frame {
            func: closure.func,
            pc: entry,
            env,
            self_val,
            base,
            pops_swarm,
        });
        Ok(())
    }

    /// Runs until the frame at depth `stop` returns, or yields.
    pub(super) fn exec_loop(&mut self, stop: usize) -> Result<Exit, RuntimeError> {
        let prog = Arc::clone(&self.program);
        loop {
            let fi = self.frames.len() - 1;
            let pc = self.frames[fi].pc;
            let Some(&ins) = prog.code.get(pc as usize) else {
                return Err(RuntimeError::new("execution ran past the end of the code"));
            };
            self.frames[fi].pc = pc + 1;
            if self.nesting == 0 {
                self.budget_left = self.budget_left.saturating_sub(1);
            } else {
                self.callback_used += 1;
                if self.callback_used > self.config.callback_limit {
                    return Err(self.annotate(
                        &prog,
                        pc,
                        fi,
                        RuntimeError::new("callback exceeded the instruction limit"),
                    ));
                }
            }
            match self.exec_one(&prog, ins, pc, stop) {
                Ok(Flow::Next) => {}
                Ok(Flow::Exit(e)) => return Ok(e),
                Err(e) => return Err(self.annotate(&prog, pc, fi, e)),
            }
        }
    }

    fn annotate(&self, prog: &Program, pc: u32, fi: usize, mut e: RuntimeError) -> RuntimeError {
        if e.pos.is_none() && e.function.is_none() {
            e.pos = prog.positions.get(pc as usize).copied().flatten();
            e.function = self
                .frames
                .get(fi)
                .map(|f| prog.functions[f.func as usize].name.clone());
        }
        e
    }

    fn pop(&mut self) -> Value {
        self.stack.pop().expect("operand stack underflow")
    }

    fn env_at(&self, mut env: ObjRef, depth: u32) -> Result<ObjRef, RuntimeError> {
        for _ in 0..depth {
            env = self
                .heap
                .env(env)
                .parent
                .ok_or_else(|| RuntimeError::new("local variable reference out of scope"))?;
        }
        Ok(env)
    }

    fn exec_one(&mut self, prog: &Program, ins: Instr, pc: u32, stop: usize) -> Result<Flow, RuntimeError> {
        match ins.op {
            Opcode::PushNil => self.stack.push(Value::Nil),
            Opcode::PushInt => self.stack.push(Value::Int(ins.a as i32 as i64)),
            Opcode::PushConst => self.stack.push(match prog.constants[ins.a as usize] {
                Constant::Int(v) => Value::Int(v),
                Constant::Float(v) => Value::Float(v),
            }),
            Opcode::PushStr => self.stack.push(Value::Str(ins.a)),
            Opcode::Pop => {
                self.pop();
            }
            Opcode::Dup => {
                let v = *self.stack.last().expect("operand stack underflow");
                self.stack.push(v);
            }
            Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::Div | Opcode::Mod | Opcode::Pow => {
                let b = self.pop();
                let a = self.pop();
                self.stack.push(arith(ins.op, a, b)?);
            }
            Opcode::Neg => {
                let v = match self.pop() {
                    Value::Int(i) => Value::Int(i.wrapping_neg()),
                    Value::Float(f) => Value::Float(-f),
                    other => {
                        return Err(RuntimeError::new(format!(
                            "attempt to negate a {} value",
                            other.type_name()
                        )))
                    }
                };
                self.stack.push(v);
            }
            Opcode::Eq | Opcode::Neq => {
                let b = self.pop();
                let a = self.pop();
                let eq = values_equal(a, b);
                self.stack.push(Value::Int((eq == (ins.op == Opcode::Eq)) as i64));
            }
            Opcode::Lt | Opcode::Lte | Opcode::Gt | Opcode::Gte => {
                let b = self.pop();
                let a = self.pop();
                let ord = self.compare(a, b)?;
                let r = match ins.op {
                    Opcode::Lt => ord == Some(Ordering::Less),
                    Opcode::Lte => matches!(ord, Some(Ordering::Less | Ordering::Equal)),
                    Opcode::Gt => ord == Some(Ordering::Greater),
                    _ => matches!(ord, Some(Ordering::Greater | Ordering::Equal)),
                };
                self.stack.push(Value::Int(r as i64));
            }
            Opcode::Not => {
                let v = self.pop();
                self.stack.push(Value::Int(!v.truthy() as i64));
            }
            Opcode::Jump | Opcode::JumpZ | Opcode::JumpNz => {
                let taken = match ins.op {
                    Opcode::Jump => true,
                    Opcode::JumpZ => !self.pop().truthy(),
                    _ => self.pop().truthy(),
                };
                if taken {
                    let fi = self.frames.len() - 1;
                    self.frames[fi].pc = ins.a;
                    if ins.a <= pc && self.nesting == 0 && self.budget_left == 0 {
                        return Ok(Flow::Exit(Exit::Yielded));
                    }
                }
            }
            Opcode::GLoad => {
                let v = self.globals[ins.a as usize];
                self.stack.push(v);
            }
            Opcode::GStore => {
                let v = self.pop();
                self.globals[ins.a as usize] = v;
            }
            Opcode::LLoad => {
                let env = self.env_at(self.frames.last().expect("frame").env, ins.a)?;
                let v = self
                    .heap
                    .env(env)
                    .slots
                    .get(ins.b as usize)
                    .copied()
                    .ok_or_else(|| RuntimeError::new("local slot out of range"))?;
                self.stack.push(v);
            }
            Opcode::LStore => {
                let v = self.pop();
                let env = self.env_at(self.frames.last().expect("frame").env, ins.a)?;
                let slot = self
                    .heap
                    .env_mut(env)
                    .slots
                    .get_mut(ins.b as usize)
                    .ok_or_else(|| RuntimeError::new("local slot out of range"))?;
                *slot = v;
            }
            Opcode::PushTable => {
                let t = self.heap.alloc(Obj::Table(Table::new()));
                self.stack.push(Value::Table(t));
            }
            Opcode::TGet => {
                let k = self.pop();
                let t = self.pop();
                let v = self.index(t, k)?;
                self.stack.push(v);
            }
            Opcode::TPut => {
                let v = self.pop();
                let k = self.pop();
                let t = self.pop();
                let Value::Table(r) = t else {
                    return Err(RuntimeError::new(format!(
                        "attempt to index a {} value",
                        t.type_name()
                    )));
                };
                let key = TableKey::from_value(k)?;
                let table = self.heap.table_mut(r);
                if v == Value::Nil {
                    table.shift_remove(&key);
                } else {
                    table.insert(key, v);
                }
            }
            Opcode::PushFn => {
                let env = self.frames.last().expect("frame").env;
                let c = self.heap.alloc(Obj::Closure(Closure {
                    func: ins.a,
                    env: Some(env),
                }));
                self.stack.push(Value::Closure(c));
            }
            Opcode::PushSelf => {
                let v = self.frames.last().expect("frame").self_val;
                self.stack.push(v);
            }
            Opcode::Call => {
                let argc = ins.a as usize;
                let args_at = self.stack.len() - argc;
                self.begin_call(args_at, args_at - 1, Value::Nil, argc)?;
            }
            Opcode::MCall => {
                let argc = ins.a as usize;
                let args_at = self.stack.len() - argc;
                let receiver = self.stack[args_at - 2];
                self.begin_call(args_at, args_at - 2, receiver, argc)?;
            }
            Opcode::Ret => {
                let v = self.pop();
                let frame = self.frames.pop().expect("frame");
                self.stack.truncate(frame.base);
                if frame.pops_swarm {
                    self.swarm_stack.pop();
                }
                self.stack.push(v);
                if self.frames.len() == stop {
                    return Ok(Flow::Exit(Exit::Returned));
                }
            }
        }
        Ok(Flow::Next)
    }

    fn index(&mut self, t: Value, k: Value) -> Result<Value, RuntimeError> {
        match t {
            Value::Table(r) => Ok(match TableKey::from_value(k) {
                Ok(key) => self.heap.table(r).get(&key).copied().unwrap_or(Value::Nil),
                Err(_) => Value::Nil,
            }),
            Value::Swarm(id) => Ok(match k {
                Value::Str(s) if self.string(s) == "id" => Value::Int(id as i64),
                Value::Str(s) => Builtin::swarm_method(self.string(s)).map_or(Value::Nil, Value::Builtin),
                _ => Value::Nil,
            }),
            Value::VStig(_) => Ok(match k {
                Value::Str(s) => Builtin::stigmergy_method(self.string(s)).map_or(Value::Nil, Value::Builtin),
                _ => Value::Nil,
            }),
            Value::Neighbors(_) => Ok(match k {
                Value::Str(s) => Builtin::neighbors_method(self.string(s)).map_or(Value::Nil, Value::Builtin),
                _ => Value::Nil,
            }),
            other => Err(RuntimeError::new(format!(
                "attempt to index a {} value",
                other.type_name()
            ))),
        }
    }

    fn compare(&self, a: Value, b: Value) -> Result<Option<Ordering>, RuntimeError> {
        match (a, b) {
            (Value::Int(x), Value::Int(y)) => Ok(Some(x.cmp(&y))),
            (Value::Str(x), Value::Str(y)) => Ok(Some(self.string(x).cmp(self.string(y)))),
            _ => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => Ok(x.partial_cmp(&y)),
                _ => Err(RuntimeError::new(format!(
                    "attempt to compare a {} with a {}",
                    a.type_name(),
                    b.type_name()
                ))),
            },
        }
    }
}

pub(super) fn values_equal(a: Value, b: Value) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Float(y)) | (Value::Float(y), Value::Int(x)) => x as f64 == y,
        _ => a == b,
    }
}

fn arith(op: Opcode, a: Value, b: Value) -> Result<Value, RuntimeError> {
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        return Ok(match op {
            Opcode::Add => Value::Int(x.wrapping_add(y)),
            Opcode::Sub => Value::Int(x.wrapping_sub(y)),
            Opcode::Mul => Value::Int(x.wrapping_mul(y)),
            Opcode::Div | Opcode::Mod if y == 0 => {
                return Err(RuntimeError::new("integer division by zero"))
            }
            Opcode::Div => Value::Int(x.wrapping_div(y)),
            Opcode::Mod => Value::Int(x.wrapping_rem(y)),
            _ => match u32::try_from(y).ok().and_then(|e| x.checked_pow(e)) {
                Some(v) => Value::Int(v),
                None => Value::Float((x as f64).powf(y as f64)),
            },
        });
    }
    let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
        return Err(RuntimeError::new(format!(
            "attempt to perform arithmetic on a {} and a {}",
            a.type_name(),
            b.type_name()
        )));
    };
    Ok(Value::Float(match op {
        Opcode::Add => x + y,
        Opcode::Sub => x - y,
        Opcode::Mul => x * y,
        Opcode::Div => x / y,
        Opcode::Mod => x % y,
        _ => x.powf(y),
    }))
}
