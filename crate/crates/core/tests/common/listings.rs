//! Golden cases for the language reference listings. Each case runs a
//! listing (sometimes a prefix of one, to observe an intermediate value),
//! then optional probe lines, and checks globals afterwards.

use swarmlang::wire::{Envelope, Message};
use swarmlang::{compile_source, Datum, Received, Vm, VmConfig};

pub struct Case {
    pub name: &'static str,
    pub robot: i64,
    pub listing: &'static str,
    /// Extra lines run after the listing to expose values as globals.
    pub probe: &'static str,
    /// (sender, distance cm, azimuth rad, message) heard before the listing runs.
    pub inbox: &'static [(u32, f64, f64, Heard)],
    /// Heard in a second step, when non-empty.
    pub after: &'static [(u32, f64, f64, Heard)],
    pub expect: &'static [(&'static str, Datum)],
    pub output: &'static [&'static str],
}

#[derive(Clone, Copy)]
pub enum Heard {
    Announce,
    Join(u16),
    Number(&'static str, i64),
}

impl Heard {
    fn message(self) -> Message {
        match self {
            Heard::Announce => Message::Announce,
            Heard::Join(s) => Message::SwarmJoin { swarm: s },
            Heard::Number(k, v) => Message::Broadcast {
                key: k.into(),
                value: Datum::Int(v),
            },
        }
    }
}

const NO_INBOX: &[(u32, f64, f64, Heard)] = &[];

const ROBOTWISE: &str = "\
# Assignment and arithmetic operation
a = 3 + 7
# Loop
i = 0; while(i < a) i = i + 1
# Branching
if(a == 10) i = 0
";

const TABLES: &str = "\
t = {}
t[6] = 5
t.b = 9
t[\"b\"] = 10
";

const CLOSURES: &str = "\
function f(a) { return a }
n = f
x = f(9)
x = n(5)
l = function(a,b) { return a+b }
x = l(2,3) # x is set to 5
";

const METHODS: &str = "\
t = {}
t.a = 4
t.m = function(p) { return self.a + p }
x = t.m(6) # x is set to 10
";

const SWARM_MEMBERSHIP: &str = "\
s = swarm.create(1)
s.select(id % 2 == 0)
after_select = s.in()
s.join()
after_join = s.in()
s.unselect(id > 5)
after_unselect = s.in()
s.leave()
if(s.in()) { still_in = 1 }
";

const SWARM_SETS: &str = "\
a = swarm.create(1)
b = swarm.create(2)
a.join()
if(id > 2) b.join()
i = swarm.intersection(100, a, b)
u = swarm.union(101, a, b)
d = swarm.difference(102, a, b)
n = b.others(103)
";

const FOREACH: &str = "\
neighbors.foreach(
  function(rid, data) {
    print(\"robot \", rid, \": \",
          \"distance  = \", data.distance, \", \"
          \"azimuth   = \", data.azimuth, \", \"
          \"elevation = \", data.elevation) })
";

const MAP_REDUCE: &str = "\
cart = neighbors.map(
  function(rid, data) {
    var c = {}
    c.x = data.distance * math.cos(data.elevation) *
          math.cos(data.azimuth)
    c.y = data.distance * math.cos(data.elevation) *
          math.sin(data.azimuth)
    c.z = data.distance * math.sin(data.elevation)
    return c })
result = cart.reduce(function(rid, data, accum) {
    accum.x = accum.x + data.x
    accum.y = accum.y + data.y
    accum.z = accum.z + data.z
    return accum
  }, {x=0, y=0, z=0})
";

const FILTER: &str = "\
onemeter = neighbors.filter(function(rid, data) {
    # We assume the distance is expressed in centimeters
    return data.distance < 100 })
";

const VSTIG: &str = "\
v = stigmergy.create(1)
v.put(\"a\", 6)
x = v.get(\"a\")
";

const TWO_NEIGHBORS: &[(u32, f64, f64, Heard)] = &[
    (3, 100.0, 0.0, Heard::Announce),
    (8, 50.0, std::f64::consts::FRAC_PI_2, Heard::Announce),
];

const fn int(name: &'static str, v: i64) -> (&'static str, Datum) {
    (name, Datum::Int(v))
}

pub const CASES: &[Case] = &[
    Case {
        name: "robotwise_loop_counts_to_a",
        robot: 0,
        listing: "a = 3 + 7\ni = 0; while(i < a) i = i + 1",
        probe: "",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("a", 10), int("i", 10)],
        output: &[],
    },
    Case {
        name: "robotwise_branch_resets_i",
        robot: 0,
        listing: ROBOTWISE,
        probe: "",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("a", 10), int("i", 0)],
        output: &[],
    },
    Case {
        name: "table_array_and_dict_syntax",
        robot: 0,
        listing: "t = {}\nt[6] = 5\nt.b = 9",
        probe: "six = t[6]\nb = t.b",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("six", 5), int("b", 9)],
        output: &[],
    },
    Case {
        name: "table_index_overwrites_dot_field",
        robot: 0,
        listing: TABLES,
        probe: "b = t.b\nsize = 0\nif(t[6] == 5) size = 1",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("b", 10), int("size", 1)],
        output: &[],
    },
    Case {
        name: "closure_call_through_definition",
        robot: 0,
        listing: "function f(a) { return a }\nn = f\nx = f(9)",
        probe: "",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("x", 9)],
        output: &[],
    },
    Case {
        name: "closure_call_through_alias",
        robot: 0,
        listing: "function f(a) { return a }\nn = f\nx = f(9)\nx = n(5)",
        probe: "",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("x", 5)],
        output: &[],
    },
    Case {
        name: "lambda_call",
        robot: 0,
        listing: CLOSURES,
        probe: "",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("x", 5)],
        output: &[],
    },
    Case {
        name: "method_call_binds_self",
        robot: 0,
        listing: METHODS,
        probe: "a = t.a",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("x", 10), int("a", 4)],
        output: &[],
    },
    Case {
        name: "swarm_starts_empty",
        robot: 1,
        listing: "s = swarm.create(1)",
        probe: "m = s.in()\nsid = s.id",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("m", 0), int("sid", 1)],
        output: &[],
    },
    Case {
        name: "swarm_membership_even_low_id",
        robot: 4,
        listing: SWARM_MEMBERSHIP,
        probe: "",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[
            int("after_select", 1),
            int("after_join", 1),
            int("after_unselect", 1),
            ("still_in", Datum::Nil),
        ],
        output: &[],
    },
    Case {
        name: "swarm_membership_odd_high_id",
        robot: 7,
        listing: SWARM_MEMBERSHIP,
        probe: "",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[
            int("after_select", 0),
            int("after_join", 1),
            int("after_unselect", 0),
            ("still_in", Datum::Nil),
        ],
        output: &[],
    },
    Case {
        name: "swarm_exec_pushes_swarm_id",
        robot: 0,
        listing: "s = swarm.create(1)\ns.join()\ns.exec(function() { inner = swarm.id() })",
        probe: "outer = swarm.id()",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("inner", 1), ("outer", Datum::Nil)],
        output: &[],
    },
    Case {
        name: "swarm_exec_nested_stack_indexing",
        robot: 0,
        listing: "a = swarm.create(5)\nb = swarm.create(6)\na.join()\nb.join()\n\
                  a.exec(function() { b.exec(function() { top = swarm.id()\n second = swarm.id(1) }) })",
        probe: "",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("top", 6), int("second", 5)],
        output: &[],
    },
    Case {
        name: "swarm_set_operations_in_a_only",
        robot: 1,
        listing: SWARM_SETS,
        probe: "ri = i.in()\nru = u.in()\nrd = d.in()\nrn = n.in()",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("ri", 0), int("ru", 1), int("rd", 1), int("rn", 1)],
        output: &[],
    },
    Case {
        name: "swarm_set_operations_in_both",
        robot: 3,
        listing: SWARM_SETS,
        probe: "ri = i.in()\nru = u.in()\nrd = d.in()\nrn = n.in()",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("ri", 1), int("ru", 1), int("rd", 0), int("rn", 0)],
        output: &[],
    },
    Case {
        name: "neighbors_foreach_prints_each",
        robot: 0,
        listing: FOREACH,
        probe: "",
        inbox: TWO_NEIGHBORS,
        after: NO_INBOX,
        expect: &[],
        output: &[
            "robot 3: distance  = 100.0, azimuth   = 0.0, elevation = 0.0",
            "robot 8: distance  = 50.0, azimuth   = 1.5707963267948966, elevation = 0.0",
        ],
    },
    Case {
        name: "neighbors_map_then_reduce",
        robot: 0,
        listing: MAP_REDUCE,
        probe: "cx = cart.get(3).x\nrx = math.abs(result.x - 100) < 0.000001\nry = math.abs(result.y - 50) < 0.000001\nrz = result.z",
        inbox: TWO_NEIGHBORS,
        after: NO_INBOX,
        expect: &[
            ("cx", Datum::Float(100.0)),
            int("rx", 1),
            int("ry", 1),
            ("rz", Datum::Float(0.0)),
        ],
        output: &[],
    },
    Case {
        name: "neighbors_filter_by_distance",
        robot: 0,
        listing: FILTER,
        probe: "n = onemeter.count()\nkept = onemeter.get(8).distance",
        inbox: TWO_NEIGHBORS,
        after: NO_INBOX,
        expect: &[int("n", 1), ("kept", Datum::Float(50.0))],
        output: &[],
    },
    Case {
        name: "neighbors_kin_nonkin_split",
        robot: 0,
        listing: "s = swarm.create(1)\ns.join()\ns.exec(function() { k = neighbors.kin().count()\n o = neighbors.nonkin().count() })",
        probe: "",
        inbox: &[
            (3, 100.0, 0.0, Heard::Join(1)),
            (8, 50.0, 0.0, Heard::Join(2)),
        ],
        after: NO_INBOX,
        expect: &[int("k", 1), int("o", 1)],
        output: &[],
    },
    Case {
        name: "neighbors_listen_receives_broadcast",
        robot: 0,
        listing: "neighbors.listen(\"key\", function(k, value, rid) { got = value\n from = rid })\nneighbors.broadcast(\"key\", 1)",
        probe: "",
        inbox: NO_INBOX,
        after: &[(3, 100.0, 0.0, Heard::Number("key", 77))],
        expect: &[int("got", 77), int("from", 3)],
        output: &[],
    },
    Case {
        name: "vstig_put_then_get",
        robot: 0,
        listing: VSTIG,
        probe: "n = v.size()",
        inbox: NO_INBOX,
        after: NO_INBOX,
        expect: &[int("x", 6), int("n", 1)],
        output: &[],
    },
];

fn received(inbox: &[(u32, f64, f64, Heard)]) -> Vec<Received> {
    inbox
        .iter()
        .map(|&(sender, distance, azimuth, h)| Received {
            payload: Envelope::new(sender, h.message()).encode().unwrap().into(),
            distance,
            azimuth,
            elevation: 0.0,
        })
        .collect()
}

/// Runs a case and returns a description of every mismatch.
pub fn run_case(case: &Case) -> Result<(), String> {
    let src = format!("{}\n{}\n", case.listing, case.probe);
    let img = compile_source(&src).map_err(|e| format!("compile: {e}"))?;
    let mut vm = Vm::new(&img, case.robot, VmConfig::default()).map_err(|e| e.to_string())?;
    // The chunk runs in the first step, after the inbox is ingested.
    vm.step(&received(case.inbox)).map_err(|e| format!("run: {e}"))?;
    if !case.after.is_empty() {
        vm.step(&received(case.after)).map_err(|e| format!("run: {e}"))?;
    }
    let mut errors = Vec::new();
    for (name, want) in case.expect {
        let got = vm.global_datum(name);
        if got.as_ref() != Some(want) && !(got.is_none() && *want == Datum::Nil) {
            errors.push(format!("{name}: expected {want:?}, got {got:?}"));
        }
    }
    let out = vm.take_output();
    if !case.output.is_empty() && out != case.output {
        errors.push(format!("output: expected {:?}, got {out:?}", case.output));
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("; "))
    }
}
