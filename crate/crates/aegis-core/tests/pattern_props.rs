#[path = "support/mod.rs"]
mod support;

use aegis_core::pattern::{parse_pattern, pattern_id, render_pattern, validate_pattern};
use proptest::prelude::*;
use support::pattern_gen::{any_pattern, unicode_spelling, valid_pattern};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// The canonical rendering parses back to a structurally identical AST,
    /// including bracketed multi-relation where spans.
    #[test]
    fn render_then_parse_is_identity(ast in any_pattern()) {
        let text = render_pattern(&ast);
        let parsed = parse_pattern(&text)
            .unwrap_or_else(|e| panic!("rendering did not parse: {e}\n{text}"));
        prop_assert_eq!(parsed, ast);
    }

    /// Unicode and ASCII spellings of the same pattern get the same id.
    #[test]
    fn unicode_spelling_shares_the_id(ast in any_pattern()) {
        let ascii = render_pattern(&ast);
        let unicode = unicode_spelling(&ascii);
        prop_assert_ne!(&unicode, &ascii, "every pattern contains a relation arrow");
        let a = parse_pattern(&ascii).expect("ascii spelling parses");
        let b = parse_pattern(&unicode)
            .unwrap_or_else(|e| panic!("unicode spelling did not parse: {e}\n{unicode}"));
        prop_assert_eq!(pattern_id(&a), pattern_id(&b));
    }

    /// Rendering is a fixed point: re-rendering the reparsed AST reproduces
    /// the exact canonical text, so ids are stable across round trips.
    #[test]
    fn canonical_text_is_a_fixed_point(ast in any_pattern()) {
        let text = render_pattern(&ast);
        let reparsed = parse_pattern(&text).expect("canonical text parses");
        prop_assert_eq!(render_pattern(&reparsed), text);
    }

    /// The restricted generator only produces patterns that pass static
    /// validation (it backs the engine/reference differential tests).
    #[test]
    fn restricted_generator_yields_valid_patterns(ast in valid_pattern()) {
        let report = validate_pattern(&ast);
        prop_assert!(report.is_clean(), "findings: {:?}", report.findings);
    }
}
