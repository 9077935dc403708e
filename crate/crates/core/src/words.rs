//! Data words, parameterized symbols, and symbolic suffixes with
//! per-parameter restrictions.

use crate::theory::{fresh_value_in, potential_values_in, DataValue};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt::Write as _;
use thiserror::Error;

/// Index of an action within its alphabet.
pub type ActionId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDecl {
    pub name: String,
    pub arity: u8,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("duplicate action name {0:?}")]
    DuplicateName(String),
    #[error("action {0:?} has arity {1}; only 0 and 1 are supported")]
    BadArity(String, u8),
}

/// An ordered set of actions. Action identity is positional; the declaration
/// order is also the canonical enumeration order used everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Alphabet {
    actions: Vec<ActionDecl>,
}

impl Alphabet {
    pub fn new(actions: Vec<ActionDecl>) -> Result<Self, AlphabetError> {
        for (i, a) in actions.iter().enumerate() {
            if a.arity > 1 {
                return Err(AlphabetError::BadArity(a.name.clone(), a.arity));
            }
            if actions[..i].iter().any(|b| b.name == a.name) {
                return Err(AlphabetError::DuplicateName(a.name.clone()));
            }
        }
        Ok(Alphabet { actions })
    }

    pub fn parse(actions: &[(&str, u8)]) -> Result<Self, AlphabetError> {
        Self::new(
            actions
                .iter()
                .map(|&(name, arity)| ActionDecl {
                    name: name.to_string(),
                    arity,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, id: ActionId) -> &ActionDecl {
        &self.actions[id]
    }

    pub fn arity(&self, id: ActionId) -> u8 {
        self.actions[id].arity
    }

    pub fn name(&self, id: ActionId) -> &str {
        &self.actions[id].name
    }

    pub fn id_of(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a.name == name)
    }

    pub fn ids(&self) -> impl Iterator<Item = ActionId> {
        0..self.actions.len()
    }

    pub fn decls(&self) -> &[ActionDecl] {
        &self.actions
    }
}

/// One action occurrence with its data value (present iff the action has
/// arity 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataSymbol {
    pub action: ActionId,
    pub value: Option<DataValue>,
}

/// A data word. Positions are 1-indexed in all APIs: register `x_i` refers
/// to the data value at position `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word {
    symbols: Vec<DataSymbol>,
}

impl Word {
    pub fn empty() -> Self {
        Word::default()
    }

    pub fn new(symbols: Vec<DataSymbol>) -> Self {
        Word { symbols }
    }

    pub fn parse(alphabet: &Alphabet, symbols: &[(&str, DataValue)]) -> Self {
        Word::new(
            symbols
                .iter()
                .map(|&(name, value)| {
                    let action = alphabet
                        .id_of(name)
                        .unwrap_or_else(|| panic!("unknown action {name:?}"));
                    DataSymbol {
                        action,
                        value: (alphabet.arity(action) == 1).then_some(value),
                    }
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[DataSymbol] {
        &self.symbols
    }

    pub fn symbol(&self, pos1: usize) -> DataSymbol {
        self.symbols[pos1 - 1]
    }

    /// Data value at 1-indexed position `pos1`, if the action there carries one.
    pub fn value_at(&self, pos1: usize) -> Option<DataValue> {
        self.symbols[pos1 - 1].value
    }

    pub fn data_values(&self) -> Vec<DataValue> {
        self.symbols.iter().filter_map(|s| s.value).collect()
    }

    pub fn extended(&self, symbol: DataSymbol) -> Word {
        let mut symbols = self.symbols.clone();
        symbols.push(symbol);
        Word::new(symbols)
    }

    pub fn push(&mut self, symbol: DataSymbol) {
        self.symbols.push(symbol);
    }

    pub fn pop(&mut self) -> Option<DataSymbol> {
        self.symbols.pop()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut symbols = self.symbols.clone();
        symbols.extend_from_slice(&other.symbols);
        Word::new(symbols)
    }

    /// The prefix consisting of the first `n` symbols.
    pub fn prefix(&self, n: usize) -> Word {
        Word::new(self.symbols[..n].to_vec())
    }

    /// The suffix starting after the first `n` symbols.
    pub fn suffix_from(&self, n: usize) -> Word {
        Word::new(self.symbols[n..].to_vec())
    }

    pub fn map_values(&self, f: impl Fn(DataValue) -> DataValue) -> Word {
        Word::new(
            self.symbols
                .iter()
                .map(|s| DataSymbol {
                    action: s.action,
                    value: s.value.map(&f),
                })
                .collect(),
        )
    }

    pub fn render(&self, alphabet: &Alphabet) -> String {
        if self.is_empty() {
            return "ε".to_string();
        }
        let mut out = String::new();
        for (i, s) in self.symbols.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match s.value {
                Some(v) => {
                    let _ = write!(out, "{}({})", alphabet.name(s.action), v);
                }
                None => {
                    let _ = write!(out, "{}", alphabet.name(s.action));
                }
            }
        }
        out
    }
}

// Canonical word order: shorter first, then lexicographic by symbols.
impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.symbols
            .len()
            .cmp(&other.symbols.len())
            .then_with(|| self.symbols.cmp(&other.symbols))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Restriction on one suffix parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamRestriction {
    Unrestricted,
    /// Different from all preceding data values in the prefix and suffix.
    Fresh,
    /// Equal to the (1-indexed) earlier suffix parameter, which must be Fresh.
    EqualsParam(usize),
}

/// A sequence of actions with formal parameters `p1..pm` for the arity-1
/// positions, each carrying a restriction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicSuffix {
    actions: Vec<ActionId>,
    restrictions: Vec<ParamRestriction>,
}

impl SymbolicSuffix {
    pub fn new(
        alphabet: &Alphabet,
        actions: Vec<ActionId>,
        restrictions: Vec<ParamRestriction>,
    ) -> Self {
        let params = actions.iter().filter(|&&a| alphabet.arity(a) == 1).count();
        assert_eq!(params, restrictions.len(), "one restriction per parameter");
        for (i, r) in restrictions.iter().enumerate() {
            if let ParamRestriction::EqualsParam(j) = r {
                assert!(*j >= 1 && *j <= i, "EqualsParam target must be earlier");
                assert_eq!(
                    restrictions[j - 1],
                    ParamRestriction::Fresh,
                    "EqualsParam target must be fresh"
                );
            }
        }
        SymbolicSuffix {
            actions,
            restrictions,
        }
    }

    pub fn unrestricted(alphabet: &Alphabet, actions: Vec<ActionId>) -> Self {
        let params = actions.iter().filter(|&&a| alphabet.arity(a) == 1).count();
        SymbolicSuffix {
            actions,
            restrictions: vec![ParamRestriction::Unrestricted; params],
        }
    }

    pub fn empty() -> Self {
        SymbolicSuffix {
            actions: Vec::new(),
            restrictions: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn param_count(&self) -> usize {
        self.restrictions.len()
    }

    pub fn restrictions(&self) -> &[ParamRestriction] {
        &self.restrictions
    }

    /// Restriction of the (1-indexed) parameter.
    pub fn restriction(&self, param1: usize) -> ParamRestriction {
        self.restrictions[param1 - 1]
    }

    pub fn with_restrictions(&self, restrictions: Vec<ParamRestriction>) -> Self {
        assert_eq!(restrictions.len(), self.restrictions.len());
        SymbolicSuffix {
            actions: self.actions.clone(),
            restrictions,
        }
    }

    /// Drops all restrictions.
    pub fn forget_restrictions(&self) -> Self {
        SymbolicSuffix {
            actions: self.actions.clone(),
            restrictions: vec![ParamRestriction::Unrestricted; self.restrictions.len()],
        }
    }

    pub fn is_unrestricted(&self) -> bool {
        self.restrictions
            .iter()
            .all(|r| *r == ParamRestriction::Unrestricted)
    }

    /// First action, if any.
    pub fn first_action(&self) -> Option<ActionId> {
        self.actions.first().copied()
    }

    pub fn render(&self, alphabet: &Alphabet) -> String {
        if self.actions.is_empty() {
            return "ε".to_string();
        }
        let mut out = String::new();
        let mut param = 0;
        for (i, &a) in self.actions.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            if alphabet.arity(a) == 1 {
                param += 1;
                match self.restrictions[param - 1] {
                    ParamRestriction::Unrestricted => {
                        let _ = write!(out, "{}(p{})", alphabet.name(a), param);
                    }
                    ParamRestriction::Fresh => {
                        let _ = write!(out, "{}(p{}|fresh)", alphabet.name(a), param);
                    }
                    ParamRestriction::EqualsParam(j) => {
                        let _ = write!(out, "{}(p{}|=p{})", alphabet.name(a), param, j);
                    }
                }
            } else {
                let _ = write!(out, "{}", alphabet.name(a));
            }
        }
        out
    }
}

/// The unrestricted symbolic suffix with the same action sequence as `w`.
pub fn actions_of(alphabet: &Alphabet, w: &Word) -> SymbolicSuffix {
    SymbolicSuffix::unrestricted(alphabet, w.symbols().iter().map(|s| s.action).collect())
}

/// Prepends `action` to a symbolic suffix, shifting its parameters by one.
/// The result is fully unrestricted; restriction computation is a separate
/// concern (see the `restrict` module).
pub fn prepend(alphabet: &Alphabet, action: ActionId, suffix: &SymbolicSuffix) -> SymbolicSuffix {
    let mut actions = Vec::with_capacity(suffix.len() + 1);
    actions.push(action);
    actions.extend_from_slice(suffix.actions());
    SymbolicSuffix::unrestricted(alphabet, actions)
}

/// Candidate values for the parameter at `position` (0-based symbol index
/// within the suffix), given the concrete word built so far.
fn candidates(
    suffix: &SymbolicSuffix,
    param1: usize,
    word_so_far: &[DataValue],
    chosen: &[DataValue],
) -> Vec<DataValue> {
    match suffix.restriction(param1) {
        ParamRestriction::Unrestricted => potential_values_in(word_so_far),
        ParamRestriction::Fresh => vec![fresh_value_in(word_so_far)],
        ParamRestriction::EqualsParam(j) => vec![chosen[j - 1]],
    }
}

/// Enumerates all canonical instantiations of the suffix after `prefix`,
/// honoring the declared restrictions. Each parameter, in order, takes every
/// value of `potential_values(prefix · suffix-so-far)` unless restricted.
/// Returns the full suffix words.
pub fn instantiations(alphabet: &Alphabet, suffix: &SymbolicSuffix, prefix: &Word) -> Vec<Word> {
    let mut out = Vec::new();
    let mut values: Vec<DataValue> = prefix.data_values();
    let mut chosen: Vec<DataValue> = Vec::new();
    let mut symbols: Vec<DataSymbol> = Vec::new();
    enumerate(
        alphabet,
        suffix,
        0,
        &mut values,
        &mut chosen,
        &mut symbols,
        &mut out,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    alphabet: &Alphabet,
    suffix: &SymbolicSuffix,
    idx: usize,
    values: &mut Vec<DataValue>,
    chosen: &mut Vec<DataValue>,
    symbols: &mut Vec<DataSymbol>,
    out: &mut Vec<Word>,
) {
    if idx == suffix.len() {
        out.push(Word::new(symbols.clone()));
        return;
    }
    let action = suffix.actions()[idx];
    if alphabet.arity(action) == 0 {
        symbols.push(DataSymbol {
            action,
            value: None,
        });
        enumerate(alphabet, suffix, idx + 1, values, chosen, symbols, out);
        symbols.pop();
        return;
    }
    let param1 = chosen.len() + 1;
    for v in candidates(suffix, param1, values, chosen) {
        symbols.push(DataSymbol {
            action,
            value: Some(v),
        });
        values.push(v);
        chosen.push(v);
        enumerate(alphabet, suffix, idx + 1, values, chosen, symbols, out);
        chosen.pop();
        values.pop();
        symbols.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::indistinguishable;
    use proptest::prelude::*;

    fn stack() -> Alphabet {
        Alphabet::parse(&[("push", 1), ("pop", 1)]).unwrap()
    }

    #[test]
    fn alphabet_rejects_duplicates_and_bad_arity() {
        assert!(matches!(
            Alphabet::parse(&[("a", 1), ("a", 0)]),
            Err(AlphabetError::DuplicateName(_))
        ));
        assert!(matches!(
            Alphabet::parse(&[("a", 2)]),
            Err(AlphabetError::BadArity(_, 2))
        ));
    }

    #[test]
    fn actions_of_examples() {
        let ab = stack();
        let w = Word::parse(&ab, &[("push", 0), ("pop", 0)]);
        let s = actions_of(&ab, &w);
        assert_eq!(s.render(&ab), "push(p1) pop(p2)");
        assert!(actions_of(&ab, &Word::empty()).is_empty());
        let w = Word::parse(&ab, &[("pop", 3)]);
        assert_eq!(actions_of(&ab, &w).render(&ab), "pop(p1)");
    }

    #[test]
    fn prepend_examples() {
        let ab = stack();
        let push = ab.id_of("push").unwrap();
        let pop = ab.id_of("pop").unwrap();
        let s = prepend(&ab, push, &SymbolicSuffix::empty());
        assert_eq!(s.render(&ab), "push(p1)");
        let s2 = prepend(&ab, push, &s);
        assert_eq!(s2.render(&ab), "push(p1) push(p2)");
        assert_eq!(
            prepend(&ab, pop, &SymbolicSuffix::empty()).render(&ab),
            "pop(p1)"
        );
    }

    #[test]
    fn instantiation_counts_match_worked_examples() {
        let ab = stack();
        let push = ab.id_of("push").unwrap();
        let pop = ab.id_of("pop").unwrap();
        let prefix = Word::parse(&ab, &[("push", 0)]);

        // push(p1) pop(p2), unrestricted: five membership queries.
        let s = SymbolicSuffix::unrestricted(&ab, vec![push, pop]);
        assert_eq!(instantiations(&ab, &s, &prefix).len(), 5);

        // push(p1) push(p2) with both parameters fresh: a single query.
        let s = SymbolicSuffix::new(
            &ab,
            vec![push, push],
            vec![ParamRestriction::Fresh, ParamRestriction::Fresh],
        );
        let insts = instantiations(&ab, &s, &prefix);
        assert_eq!(insts.len(), 1);
        assert_eq!(insts[0].render(&ab), "push(1) push(2)");

        // push(p1) pop(p2) pop(p3) with ⟨fresh, =p1, unrestricted⟩: three.
        let s = SymbolicSuffix::new(
            &ab,
            vec![push, pop, pop],
            vec![
                ParamRestriction::Fresh,
                ParamRestriction::EqualsParam(1),
                ParamRestriction::Unrestricted,
            ],
        );
        assert_eq!(instantiations(&ab, &s, &prefix).len(), 3);
    }

    #[test]
    fn word_order_is_length_then_lex() {
        let ab = stack();
        let a = Word::parse(&ab, &[("pop", 0)]);
        let b = Word::parse(&ab, &[("push", 0), ("push", 1)]);
        let c = Word::parse(&ab, &[("push", 0), ("pop", 1)]);
        assert!(a < b);
        assert!(b < c); // same length; push precedes pop in declaration order
        assert!(Word::empty() < a);
    }

    fn arb_suffix() -> impl Strategy<Value = (Alphabet, SymbolicSuffix)> {
        proptest::collection::vec((0usize..2, 0usize..3), 0..4).prop_map(|spec| {
            let ab = stack();
            let actions: Vec<ActionId> = spec.iter().map(|&(a, _)| a).collect();
            let mut restrictions = Vec::new();
            let mut fresh_so_far: Vec<usize> = Vec::new();
            for (i, &(_, r)) in spec.iter().enumerate() {
                let restriction = match r {
                    0 => ParamRestriction::Unrestricted,
                    1 => {
                        fresh_so_far.push(i + 1);
                        ParamRestriction::Fresh
                    }
                    _ => match fresh_so_far.first() {
                        Some(&j) => ParamRestriction::EqualsParam(j),
                        None => ParamRestriction::Unrestricted,
                    },
                };
                restrictions.push(restriction);
            }
            let suffix = SymbolicSuffix::new(&ab, actions, restrictions);
            (ab, suffix)
        })
    }

    proptest! {
        #[test]
        fn restricted_never_enumerates_more((ab, suffix) in arb_suffix(), pv in 0u64..3) {
            let prefix = Word::parse(&ab, &[("push", pv)]);
            let restricted = instantiations(&ab, &suffix, &prefix);
            let unrestricted = instantiations(&ab, &suffix.forget_restrictions(), &prefix);
            prop_assert!(restricted.len() <= unrestricted.len());
        }

        #[test]
        fn instantiations_honor_restrictions((ab, suffix) in arb_suffix(), pv in 0u64..3) {
            let prefix = Word::parse(&ab, &[("push", pv)]);
            for inst in instantiations(&ab, &suffix, &prefix) {
                let mut seen: Vec<DataValue> = prefix.data_values();
                let mut chosen: Vec<DataValue> = Vec::new();
                for s in inst.symbols() {
                    if let Some(v) = s.value {
                        let param1 = chosen.len() + 1;
                        match suffix.restriction(param1) {
                            ParamRestriction::Fresh => prop_assert!(!seen.contains(&v)),
                            ParamRestriction::EqualsParam(j) => prop_assert_eq!(v, chosen[j - 1]),
                            ParamRestriction::Unrestricted => {}
                        }
                        chosen.push(v);
                        seen.push(v);
                    }
                }
            }
        }

        #[test]
        fn distinct_instantiations_are_distinguishable((ab, suffix) in arb_suffix(), pv in 0u64..3) {
            let prefix = Word::parse(&ab, &[("push", pv)]);
            let insts = instantiations(&ab, &suffix, &prefix);
            for i in 0..insts.len() {
                for j in i + 1..insts.len() {
                    let a = prefix.concat(&insts[i]);
                    let b = prefix.concat(&insts[j]);
                    prop_assert!(!indistinguishable(&a, &b));
                }
            }
        }
    }
}
