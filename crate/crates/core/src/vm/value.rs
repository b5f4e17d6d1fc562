//! Runtime values and the garbage-collected heap.

use indexmap::IndexMap;

use super::builtins::Builtin;
use super::error::RuntimeError;

pub type StrId = u32;
pub type ObjRef = u32;

/// A runtime value. Heap objects are referenced by handle, so values are
/// `Copy` and only meaningful together with the VM that produced them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Nil,
    Int(i64),
    Float(f64),
    Str(StrId),
    Table(ObjRef),
    Closure(ObjRef),
    /// Function registered by the host, by registration index.
    Host(u32),
    /// Function provided by the runtime itself.
    Builtin(Builtin),
    Swarm(u16),
    VStig(u16),
    Neighbors(ObjRef),
}

impl Value {
    /// `nil` and integer `0` are false, everything else is true.
    pub fn truthy(self) -> bool {
        !matches!(self, Value::Nil | Value::Int(0))
    }

    pub fn type_name(self) -> &'static str {
        match self {
            Value::Nil => "nil",
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
            Value::Table(_) => "table",
            Value::Closure(_) | Value::Host(_) | Value::Builtin(_) => "closure",
            Value::Swarm(_) => "swarm",
            Value::VStig(_) => "stigmergy",
            Value::Neighbors(_) => "neighbors",
        }
    }

    pub fn as_f64(self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(v as f64),
            Value::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_callable(self) -> bool {
        matches!(self, Value::Closure(_) | Value::Host(_) | Value::Builtin(_))
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

/// Table key. Floats with an integral value are stored as integers so that
/// `t[1]` and `t[1.0]` address the same slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableKey {
    Int(i64),
    Float(u64),
    Str(StrId),
}

impl TableKey {
    pub fn from_value(v: Value) -> Result<Self, RuntimeError> {
        match v {
            Value::Int(i) => Ok(TableKey::Int(i)),
            Value::Float(f) => {
                if f.is_nan() {
                    Err(RuntimeError::new("table key is NaN"))
                } else if f.fract() == 0.0 && f.abs() < 9.2e18 {
                    Ok(TableKey::Int(f as i64))
                } else {
                    Ok(TableKey::Float(f.to_bits()))
                }
            }
            Value::Str(s) => Ok(TableKey::Str(s)),
            Value::Nil => Err(RuntimeError::new("table key is nil")),
            other => Err(RuntimeError::new(format!(
                "a {} cannot be used as a table key",
                other.type_name()
            ))),
        }
    }

    pub fn to_value(self) -> Value {
        match self {
            TableKey::Int(i) => Value::Int(i),
            TableKey::Float(b) => Value::Float(f64::from_bits(b)),
            TableKey::Str(s) => Value::Str(s),
        }
    }
}

pub type Table = IndexMap<TableKey, Value>;

#[derive(Debug, Clone)]
pub struct Closure {
    pub func: u32,
    pub env: Option<ObjRef>,
}

/// Activation environment: the local slots of one call, linked to the
/// environment the callee closed over.
#[derive(Debug, Clone)]
pub struct Env {
    pub slots: Vec<Value>,
    pub parent: Option<ObjRef>,
}

/// A neighbor view: payloads keyed by robot id, ascending.
#[derive(Debug, Clone, Default)]
pub struct View {
    pub entries: Vec<(u32, Value)>,
}

impl View {
    pub fn get(&self, rid: u32) -> Option<Value> {
        self.entries
            .binary_search_by_key(&rid, |(r, _)| *r)
            .ok()
            .map(|i| self.entries[i].1)
    }
}

#[derive(Debug, Clone)]
pub enum Obj {
    Table(Table),
    Closure(Closure),
    Env(Env),
    View(View),
}

/// Arena of heap objects with mark-and-sweep collection.
#[derive(Debug, Default)]
pub struct Heap {
    objects: Vec<Option<Obj>>,
    marks: Vec<bool>,
    free: Vec<ObjRef>,
    live: usize,
    next_gc: usize,
}

const GC_FLOOR: usize = 4096;

impl Heap {
    pub fn alloc(&mut self, obj: Obj) -> ObjRef {
        self.live += 1;
        match self.free.pop() {
            Some(r) => {
                self.objects[r as usize] = Some(obj);
                r
            }
            None => {
                self.objects.push(Some(obj));
                self.marks.push(false);
                (self.objects.len() - 1) as ObjRef
            }
        }
    }

    pub fn get(&self, r: ObjRef) -> &Obj {
        self.objects[r as usize].as_ref().expect("dangling object reference")
    }

    pub fn get_mut(&mut self, r: ObjRef) -> &mut Obj {
        self.objects[r as usize].as_mut().expect("dangling object reference")
    }

    pub fn table(&self, r: ObjRef) -> &Table {
        match self.get(r) {
            Obj::Table(t) => t,
            _ => panic!("object {r} is not a table"),
        }
    }

    pub fn table_mut(&mut self, r: ObjRef) -> &mut Table {
        match self.get_mut(r) {
            Obj::Table(t) => t,
            _ => panic!("object {r} is not a table"),
        }
    }

    pub fn env(&self, r: ObjRef) -> &Env {
        match self.get(r) {
            Obj::Env(e) => e,
            _ => panic!("object {r} is not an environment"),
        }
    }

    pub fn env_mut(&mut self, r: ObjRef) -> &mut Env {
        match self.get_mut(r) {
            Obj::Env(e) => e,
            _ => panic!("object {r} is not an environment"),
        }
    }

    pub fn closure(&self, r: ObjRef) -> &Closure {
        match self.get(r) {
            Obj::Closure(c) => c,
            _ => panic!("object {r} is not a closure"),
        }
    }

    pub fn view(&self, r: ObjRef) -> &View {
        match self.get(r) {
            Obj::View(v) => v,
            _ => panic!("object {r} is not a neighbor view"),
        }
    }

    pub fn view_mut(&mut self, r: ObjRef) -> &mut View {
        match self.get_mut(r) {
            Obj::View(v) => v,
            _ => panic!("object {r} is not a neighbor view"),
        }
    }

    pub fn live(&self) -> usize {
        self.live
    }

    pub fn should_collect(&self) -> bool {
        self.live >= self.next_gc.max(GC_FLOOR)
    }

    /// Frees every object not reachable from `roots`.
    pub fn collect(&mut self, roots: impl IntoIterator<Item = Value>, extra: impl IntoIterator<Item = ObjRef>) {
        let mut work: Vec<ObjRef> = Vec::new();
        for v in roots {
            push_value(&mut work, v);
        }
        work.extend(extra);
        while let Some(r) = work.pop() {
            let i = r as usize;
            if self.marks[i] {
                continue;
            }
            self.marks[i] = true;
            match self.objects[i].as_ref().expect("marked object is live") {
                Obj::Table(t) => {
                    for v in t.values() {
                        push_value(&mut work, *v);
                    }
                }
                Obj::Closure(c) => work.extend(c.env),
                Obj::Env(e) => {
                    work.extend(e.parent);
                    for v in &e.slots {
                        push_value(&mut work, *v);
                    }
                }
                Obj::View(v) => {
                    for (_, p) in &v.entries {
                        push_value(&mut work, *p);
                    }
                }
            }
        }
        for i in 0..self.objects.len() {
            if self.marks[i] {
                self.marks[i] = false;
            } else if self.objects[i].take().is_some() {
                self.free.push(i as ObjRef);
                self.live -= 1;
            }
        }
        self.next_gc = self.live * 2;
    }
}

fn push_value(work: &mut Vec<ObjRef>, v: Value) {
    match v {
        Value::Table(r) | Value::Closure(r) | Value::Neighbors(r) => work.push(r),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truthiness() {
        assert!(!Value::Nil.truthy());
        assert!(!Value::Int(0).truthy());
        assert!(Value::Int(-1).truthy());
        assert!(Value::Float(0.0).truthy());
        assert!(Value::Str(0).truthy());
    }

    #[test]
    fn integral_float_keys_normalize() {
        assert_eq!(TableKey::from_value(Value::Float(2.0)).unwrap(), TableKey::Int(2));
        assert_eq!(TableKey::from_value(Value::Float(-0.0)).unwrap(), TableKey::Int(0));
        assert!(matches!(TableKey::from_value(Value::Float(0.5)).unwrap(), TableKey::Float(_)));
        assert!(TableKey::from_value(Value::Nil).is_err());
        assert!(TableKey::from_value(Value::Float(f64::NAN)).is_err());
    }

    #[test]
    fn collect_frees_unreachable_and_keeps_cycles_alive() {
        let mut heap = Heap::default();
        let a = heap.alloc(Obj::Table(Table::new()));
        let b = heap.alloc(Obj::Table(Table::new()));
        heap.table_mut(a).insert(TableKey::Int(1), Value::Table(b));
        heap.table_mut(b).insert(TableKey::Int(1), Value::Table(a));
        let orphan = heap.alloc(Obj::Table(Table::new()));
        heap.collect([Value::Table(a)], []);
        assert_eq!(heap.live(), 2);
        let reused = heap.alloc(Obj::Table(Table::new()));
        assert_eq!(reused, orphan);
        heap.collect([], []);
        assert_eq!(heap.live(), 0);
    }
}
