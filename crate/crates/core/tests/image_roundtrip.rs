use proptest::prelude::*;
use swarmlang::lang::{assemble, disassemble, BytecodeImage};
use swarmlang::{compile_source, Vm, VmConfig};

const VARS: &[&str] = &["a", "b", "c", "t"];

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (-50i64..50).prop_map(|i| i.to_string()),
        (-50.0f64..50.0).prop_map(|f| format!("{f:.3}")),
        proptest::sample::select(VARS).prop_map(str::to_string),
        "[a-z]{0,4}".prop_map(|s| format!("\"{s}\"")),
        Just("nil".to_string()),
        Just("t.k".to_string()),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), proptest::sample::select(&["+", "-", "*", "<", "==", "!=", "and", "or"][..]), inner.clone())
                .prop_map(|(l, op, r)| format!("({l} {op} {r})")),
            inner.clone().prop_map(|e| format!("(not {e})")),
            inner.clone().prop_map(|e| format!("{{k = {e}, j = 2}}")),
            inner.prop_map(|e| format!("f({e})")),
        ]
    })
}

fn stmt() -> impl Strategy<Value = String> {
    prop_oneof![
        (proptest::sample::select(VARS), expr()).prop_map(|(v, e)| format!("{v} = {e}")),
        (expr(), proptest::sample::select(VARS), expr()).prop_map(|(c, v, e)| format!("if({c}) {v} = {e} else {v} = nil")),
        expr().prop_map(|e| format!("var n = 0\nwhile(n < 3) {{ a = {e}\n n = n + 1 }}")),
        expr().prop_map(|e| format!("t = {{}}\nt.k = {e}")),
    ]
}

fn program() -> impl Strategy<Value = String> {
    proptest::collection::vec(stmt(), 1..8).prop_map(|body| {
        format!("function f(x) {{ return {{v = x}} }}\n{}\n", body.join("\n"))
    })
}

fn run(img: &BytecodeImage) -> Result<Vec<String>, String> {
    let mut vm = Vm::new(img, 1, VmConfig::default()).map_err(|e| e.to_string())?;
    vm.boot().map_err(|e| e.to_string())?;
    Ok(VARS.iter().map(|v| vm.display(vm.global(v))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn images_survive_bytes_and_listing(src in program()) {
        let img = compile_source(&src).unwrap();
        let bytes = img.to_bytes();
        let decoded = BytecodeImage::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&decoded, &img);

        let listing = disassemble(&img);
        let reassembled = assemble(&listing).unwrap();
        prop_assert_eq!(reassembled.to_bytes(), bytes);
        prop_assert_eq!(disassemble(&reassembled), listing);

        prop_assert_eq!(run(&img), run(&reassembled));
    }

    #[test]
    fn truncated_images_are_rejected(src in program(), cut in 0.0f64..1.0) {
        let bytes = compile_source(&src).unwrap().to_bytes();
        let n = ((bytes.len() as f64) * cut) as usize;
        prop_assert!(BytecodeImage::from_bytes(&bytes[..n]).is_err());
    }
}
