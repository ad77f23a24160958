mod common;

use proptest::prelude::*;
use tmarl_core::gcl::parse_program;
use tmarl_core::pctl::{format_property, parse_property};

use common::suite::{malformed_rejected, pctl_round_trip, random_formula, table1_queries_parse, MALFORMED};

#[test]
fn table1_queries() {
    eprintln!("{}", table1_queries_parse().unwrap());
}

#[test]
fn ascii_and_shorthand_agree() {
    let pairs = [
        ("P(F won_1)", "P=? [ F \"won_1\" ]"),
        ("P(poisons_1=2 U poisons_1<2)", "P=? [ poisons_1=2 U poisons_1<2 ]"),
        ("P(((cell_10=0 U cell_10=2) U cell_12=2) U cell_11=2)", "P=? [ ((cell_10=0 U cell_10=2) U cell_12=2) U cell_11=2 ]"),
    ];
    for (short, long) in pairs {
        assert_eq!(parse_property(short).unwrap(), parse_property(long).unwrap());
    }
}

#[test]
fn thousand_seeded_formulas_round_trip() {
    eprintln!("{}", pctl_round_trip(1000).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn formulas_round_trip(seed in any::<u64>()) {
        let f = random_formula(seed);
        let text = format_property(&f);
        prop_assert_eq!(parse_property(&text).unwrap(), f);
    }

    #[test]
    fn formatting_is_a_fixed_point(seed in any::<u64>()) {
        let text = format_property(&random_formula(seed));
        prop_assert_eq!(format_property(&parse_property(&text).unwrap()), text);
    }

    #[test]
    fn pctl_parser_never_panics(text in "[ -~]{0,60}") {
        let _ = parse_property(&text);
    }

    #[test]
    fn model_parser_never_panics(text in "[ -~\n]{0,120}") {
        let _ = parse_program(&text);
    }
}

#[test]
fn twenty_malformed_models() {
    assert_eq!(MALFORMED.len(), 20);
    eprintln!("{}", malformed_rejected().unwrap());
}
