//! The theory of natural numbers with equality.
//!
//! Guards and tree queries in this crate only ever compare data values for
//! equality, so a run's behavior depends solely on the equality pattern of
//! the values involved. This module provides the canonical value choices
//! that exploit this: the fresh value for a context and the list of values
//! that cover all equality classes a next parameter can fall into.

use crate::words::Word;
use thiserror::Error;

/// A data value. Only equality between values is meaningful.
pub type DataValue = u64;

/// Relations available to guards. The artifact is fixed to equality; the
/// learner and the automaton interpreter never form guards outside of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Equality,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TheoryError {
    #[error("unsupported relation {0:?}; this theory only supports equality")]
    UnsupportedRelation(String),
}

/// The fixed theory ⟨N, {=}⟩.
#[derive(Debug, Clone, Copy, Default)]
pub struct Theory;

impl Theory {
    pub fn relation(name: &str) -> Result<Relation, TheoryError> {
        match name {
            "==" | "=" | "eq" => Ok(Relation::Equality),
            other => Err(TheoryError::UnsupportedRelation(other.to_string())),
        }
    }
}

/// True iff both words have the same action sequence and their data values
/// agree on every pairwise equality, i.e. the words are indistinguishable by
/// any guard of the equality theory.
pub fn indistinguishable(a: &Word, b: &Word) -> bool {
    if a.len() != b.len() {
        return false;
    }
    for (sa, sb) in a.symbols().iter().zip(b.symbols()) {
        if sa.action != sb.action || sa.value.is_some() != sb.value.is_some() {
            return false;
        }
    }
    let va = a.data_values();
    let vb = b.data_values();
    for i in 0..va.len() {
        for j in i + 1..va.len() {
            if (va[i] == va[j]) != (vb[i] == vb[j]) {
                return false;
            }
        }
    }
    true
}

/// Smallest natural number not occurring in `values`.
pub fn fresh_value_in(values: &[DataValue]) -> DataValue {
    let mut v = 0;
    while values.contains(&v) {
        v += 1;
    }
    v
}

/// Smallest natural number not occurring as a data value of `context`.
pub fn fresh_value(context: &Word) -> DataValue {
    fresh_value_in(&context.data_values())
}

/// The distinct values of `values` in order of first occurrence, followed by
/// the fresh value. These are exactly the instantiations a tree query must
/// try for the next parameter: one per existing equality class plus one for
/// the fresh class.
pub fn potential_values_in(values: &[DataValue]) -> Vec<DataValue> {
    let mut out = Vec::new();
    for &v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out.push(fresh_value_in(values));
    out
}

/// `potential_values_in` over the data values of a word.
pub fn potential_values(context: &Word) -> Vec<DataValue> {
    potential_values_in(&context.data_values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::{Alphabet, Word};
    use proptest::prelude::*;

    fn stack_alphabet() -> Alphabet {
        Alphabet::parse(&[("push", 1), ("pop", 1)]).unwrap()
    }

    fn word(alphabet: &Alphabet, symbols: &[(&str, u64)]) -> Word {
        Word::parse(alphabet, symbols)
    }

    #[test]
    fn indistinguishable_examples() {
        let ab = stack_alphabet();
        let a = word(&ab, &[("push", 0), ("pop", 0)]);
        let b = word(&ab, &[("push", 5), ("pop", 5)]);
        assert!(indistinguishable(&a, &b));

        let c = word(&ab, &[("push", 0), ("pop", 1)]);
        assert!(!indistinguishable(&a, &c));

        let d = word(&ab, &[("push", 0), ("push", 1)]);
        let e = word(&ab, &[("pop", 0), ("pop", 1)]);
        assert!(!indistinguishable(&d, &e));
    }

    #[test]
    fn fresh_value_examples() {
        let ab = stack_alphabet();
        assert_eq!(fresh_value(&Word::empty()), 0);
        assert_eq!(fresh_value(&word(&ab, &[("push", 0), ("push", 1)])), 2);
        assert_eq!(fresh_value(&word(&ab, &[("push", 0), ("push", 2)])), 1);
    }

    #[test]
    fn potential_values_examples() {
        let ab = stack_alphabet();
        assert_eq!(
            potential_values(&word(&ab, &[("push", 0), ("push", 1)])),
            vec![0, 1, 2]
        );
        assert_eq!(
            potential_values(&word(&ab, &[("push", 0), ("push", 0)])),
            vec![0, 1]
        );
        assert_eq!(potential_values(&Word::empty()), vec![0]);
    }

    #[test]
    fn unsupported_relation_is_an_error() {
        assert!(Theory::relation("==").is_ok());
        assert!(matches!(
            Theory::relation("<"),
            Err(TheoryError::UnsupportedRelation(_))
        ));
    }

    fn arb_word() -> impl Strategy<Value = Word> {
        proptest::collection::vec((0usize..2, 0u64..4), 0..6).prop_map(|syms| {
            let ab = stack_alphabet();
            let named: Vec<(&str, u64)> = syms
                .iter()
                .map(|&(a, v)| (if a == 0 { "push" } else { "pop" }, v))
                .collect();
            Word::parse(&ab, &named)
        })
    }

    proptest! {
        #[test]
        fn indistinguishability_is_an_equivalence(a in arb_word(), b in arb_word(), c in arb_word()) {
            prop_assert!(indistinguishable(&a, &a));
            prop_assert_eq!(indistinguishable(&a, &b), indistinguishable(&b, &a));
            if indistinguishable(&a, &b) && indistinguishable(&b, &c) {
                prop_assert!(indistinguishable(&a, &c));
            }
        }

        #[test]
        fn renaming_preserves_indistinguishability(a in arb_word(), offset in 1u64..100) {
            // A bijective renaming of data values: v -> v + offset.
            let renamed = a.map_values(|v| v + offset);
            prop_assert!(indistinguishable(&a, &renamed));
        }

        #[test]
        fn fresh_value_is_unused(a in arb_word()) {
            prop_assert!(!a.data_values().contains(&fresh_value(&a)));
        }

        #[test]
        fn potential_values_shape(a in arb_word()) {
            let vals = a.data_values();
            let mut distinct = vals.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let pot = potential_values(&a);
            prop_assert_eq!(pot.len(), distinct.len() + 1);
            let mut dedup = pot.clone();
            dedup.sort_unstable();
            dedup.dedup();
            prop_assert_eq!(dedup.len(), pot.len());
        }
    }
}
