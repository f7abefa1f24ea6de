mod common;

use common::{arb_plain_value, arb_scalar};
use proptest::prelude::*;
use zoea_core::text::{parse, print, ZoeaCase, ZoeaProgram};
use zoea_core::value::Value;

fn arb_name() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z_][a-z0-9_]{0,10}", "[a-zA-Z0-9 :#'\"-]{1,10}"]
}

fn arb_program() -> impl Strategy<Value = ZoeaProgram> {
    let case = (
        arb_plain_value(),
        prop::collection::vec(arb_plain_value(), 0..3),
        arb_plain_value(),
    );
    (
        arb_name(),
        prop::collection::vec(arb_name(), 0..3),
        prop::option::of(arb_plain_value()),
        prop::collection::vec(case, 1..5),
        prop::collection::vec(arb_scalar(), 5),
    )
        .prop_map(|(name, uses, data, cases, ids)| ZoeaProgram {
            name,
            uses,
            data,
            cases: cases
                .into_iter()
                .enumerate()
                .map(|(i, (input, derives, output))| ZoeaCase {
                    id: if i % 2 == 0 { Value::int(i as i64 + 1) } else { ids[i].clone() },
                    input,
                    derives,
                    output,
                })
                .collect(),
            comments: vec![],
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, .. ProptestConfig::default() })]

    #[test]
    fn print_then_parse_is_identity(p in arb_program()) {
        let text = print(&p);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, p);
    }

    #[test]
    fn layout_is_not_significant(p in arb_program(), sep in prop::sample::select(vec![" ", "  ", "\n\n", "\t", " \r\n "])) {
        let text = print(&p).replace('\n', sep);
        prop_assert_eq!(parse(&text).unwrap(), p);
    }

    #[test]
    fn parse_never_panics(s in "\\PC{0,200}") {
        let _ = parse(&s);
    }

    #[test]
    fn parse_never_panics_on_tag_soup(parts in prop::collection::vec(prop::sample::select(vec![
        "program:", "case:", "input:", "output:", "derive:", "use:", "data:", "[", "]", "{", "}",
        "'", "\"", "#", "\n", " x ", "1", ":", ",", "\\",
    ]), 0..40)) {
        let _ = parse(&parts.concat());
    }
}

#[test]
fn large_input_does_not_panic() {
    let big = format!("program: p case: 1 input: {} output: 1", "[".repeat(1 << 20));
    assert!(parse(&big).is_err());
    let many = "program: p ".to_string() + &"case: 1 input: 1 output: 1 ".repeat(40_000);
    assert_eq!(parse(&many).unwrap().cases.len(), 40_000);
}
