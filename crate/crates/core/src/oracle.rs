//! Membership and equivalence oracles.
//!
//! The membership oracle wraps a simulated SUL and memoizes answers: the
//! distinct-word count is the "resets" figure reported everywhere, the raw
//! count is also kept so both conventions can be compared. Equivalence
//! queries come in three flavors: an exact bounded-bisimulation search over
//! canonical data values, seeded random walks, and a scripted oracle used to
//! replay known counterexample sequences deterministically.

use crate::automaton::{RAState, RegisterAutomaton};
use crate::theory::{fresh_value, DataValue};
use crate::words::{DataSymbol, Word};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Learn,
    Test,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PhaseCount {
    pub raw: usize,
    pub distinct: usize,
}

/// Query counters. `learn + test = total` in both conventions; the histogram
/// maps the number of membership queries a tree query issued to how many
/// tree queries did so.
#[derive(Debug, Clone, Default, Serialize)]
pub struct QueryStats {
    pub membership: PhaseCount,
    pub learn: PhaseCount,
    pub test: PhaseCount,
    pub counterexamples: usize,
    pub analyze_calls: usize,
    pub hypotheses: usize,
    pub tree_queries: usize,
    pub tree_query_histogram: BTreeMap<usize, usize>,
    pub longest_counterexample: usize,
    pub locations: usize,
    pub transitions: usize,
    pub max_registers: usize,
}

impl QueryStats {
    pub fn note_tree_query(&mut self, queries: usize) {
        self.tree_queries += 1;
        *self.tree_query_histogram.entry(queries).or_default() += 1;
    }
}

/// Anything that can answer membership queries.
pub trait MembershipOracle {
    fn membership(&mut self, w: &Word) -> bool;
}

/// Membership oracle over a simulated SUL, with memoization and counting.
pub struct SimOracle {
    sul: RegisterAutomaton,
    memo: HashMap<Word, bool>,
    pub stats: QueryStats,
    phase: Phase,
}

impl SimOracle {
    pub fn new(sul: RegisterAutomaton) -> Self {
        SimOracle {
            sul,
            memo: HashMap::new(),
            stats: QueryStats::default(),
            phase: Phase::Learn,
        }
    }

    pub fn sul(&self) -> &RegisterAutomaton {
        &self.sul
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    /// SUL acceptance without going through the counted oracle; used by
    /// white-box equivalence checks.
    pub fn sul_accepts(&self, w: &Word) -> bool {
        self.sul.accepts(w)
    }
}

impl MembershipOracle for SimOracle {
    fn membership(&mut self, w: &Word) -> bool {
        self.stats.membership.raw += 1;
        let phase = match self.phase {
            Phase::Learn => &mut self.stats.learn,
            Phase::Test => &mut self.stats.test,
        };
        phase.raw += 1;
        if let Some(&answer) = self.memo.get(w) {
            return answer;
        }
        self.stats.membership.distinct += 1;
        match self.phase {
            Phase::Learn => self.stats.learn.distinct += 1,
            Phase::Test => self.stats.test.distinct += 1,
        }
        let answer = self.sul.accepts(w);
        self.memo.insert(w.clone(), answer);
        answer
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("equivalence oracle precondition violated: {0}")]
    Precondition(String),
    #[error("equivalence search exceeded its budget")]
    Budget,
}

pub trait EquivalenceOracle {
    fn find_counterexample(
        &mut self,
        hyp: &RegisterAutomaton,
        sim: &mut SimOracle,
    ) -> Result<Option<Word>, OracleError>;
}

// ---------------------------------------------------------------------------
// Exact equivalence: bounded bisimulation over canonical data values
// ---------------------------------------------------------------------------

/// Exact equivalence oracle: breadth-first synchronized exploration of the
/// product of both automata. From each joint configuration, every action is
/// tried with one data value per equality class of the joint valuations plus
/// one fresh value, which is sound and complete for the equality theory.
/// Configurations are deduplicated after renaming values to first-occurrence
/// order, so the search space is finite and a shortest disagreeing word (if
/// any) is returned.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    pub max_configs: usize,
}

impl Default for ExactOracle {
    fn default() -> Self {
        ExactOracle {
            max_configs: 200_000,
        }
    }
}

fn set_accepts(ra: &RegisterAutomaton, states: &[RAState]) -> bool {
    states.iter().any(|s| ra.locations[s.location].accepting)
}

fn step_set(ra: &RegisterAutomaton, states: &[RAState], symbol: DataSymbol) -> Vec<RAState> {
    let mut out: Vec<RAState> = Vec::new();
    for s in states {
        for n in ra.step(s, symbol).expect("alphabet mismatch") {
            if !out.contains(&n) {
                out.push(n);
            }
        }
    }
    out.sort();
    out
}

/// Key for a joint configuration, canonical up to renaming of data values by
/// first occurrence. States are sorted before renaming; ties between states
/// that differ only in concrete values can yield distinct keys for
/// semantically equal configurations, which costs extra exploration but
/// never unsoundness, and keys keep values bounded so the space is finite.
fn canonical_key(sets: &[&[RAState]]) -> Vec<u64> {
    let mut rename: BTreeMap<DataValue, u64> = BTreeMap::new();
    let mut key = Vec::new();
    for states in sets {
        key.push(u64::MAX); // set separator
        for s in *states {
            key.push(s.location as u64);
            for (&reg, &val) in &s.valuation {
                let next = rename.len() as u64;
                let renamed = *rename.entry(val).or_insert(next);
                key.push(reg as u64);
                key.push(renamed);
            }
            key.push(u64::MAX - 1); // state separator
        }
    }
    key
}

/// Candidate data values from a joint configuration: one representative per
/// equality class of the current valuations, plus one value fresh w.r.t. the
/// word built so far.
fn candidate_values(sets: &[&[RAState]], word: &Word) -> Vec<DataValue> {
    let mut vals: Vec<DataValue> = sets
        .iter()
        .flat_map(|states| {
            states
                .iter()
                .flat_map(|s| s.valuation.values().copied().collect::<Vec<_>>())
        })
        .collect();
    vals.sort_unstable();
    vals.dedup();
    vals.push(fresh_value(word));
    vals.dedup();
    vals
}

/// Shortest data word on which the two automata disagree, or `None` if they
/// are language-equivalent. Requires matching alphabets and register-free
/// initial locations.
pub fn find_counterexample_exact(
    a: &RegisterAutomaton,
    b: &RegisterAutomaton,
    max_configs: usize,
) -> Result<Option<Word>, OracleError> {
    if a.alphabet != b.alphabet {
        return Err(OracleError::Precondition("alphabets differ".into()));
    }
    for ra in [a, b] {
        if !ra.locations[ra.initial].registers.is_empty() {
            return Err(OracleError::Precondition(
                "initial location has registers".into(),
            ));
        }
    }
    let mut queue: VecDeque<(Word, Vec<RAState>, Vec<RAState>)> = VecDeque::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let start = (
        Word::empty(),
        vec![a.initial_state()],
        vec![b.initial_state()],
    );
    seen.insert(canonical_key(&[&start.1, &start.2]));
    queue.push_back(start);
    while let Some((word, sa, sb)) = queue.pop_front() {
        let acc_a = set_accepts(a, &sa);
        let acc_b = set_accepts(b, &sb);
        if acc_a != acc_b {
            debug_assert_ne!(a.accepts(&word), b.accepts(&word));
            return Ok(Some(word));
        }
        if sa.is_empty() && sb.is_empty() {
            continue; // both in the sink: all futures agree
        }
        for action in a.alphabet.ids() {
            let values: Vec<Option<DataValue>> = if a.alphabet.arity(action) == 1 {
                candidate_values(&[&sa, &sb], &word)
                    .into_iter()
                    .map(Some)
                    .collect()
            } else {
                vec![None]
            };
            for value in values {
                let symbol = DataSymbol { action, value };
                let na = step_set(a, &sa, symbol);
                let nb = step_set(b, &sb, symbol);
                let key = canonical_key(&[&na, &nb]);
                if seen.insert(key) {
                    if seen.len() > max_configs {
                        return Err(OracleError::Budget);
                    }
                    queue.push_back((word.extended(symbol), na, nb));
                }
            }
        }
    }
    Ok(None)
}

impl EquivalenceOracle for ExactOracle {
    fn find_counterexample(
        &mut self,
        hyp: &RegisterAutomaton,
        sim: &mut SimOracle,
    ) -> Result<Option<Word>, OracleError> {
        find_counterexample_exact(hyp, sim.sul(), self.max_configs)
    }
}

/// Determinacy check by canonical exploration: no reachable configuration may
/// mix accepting and rejecting runs (a run that dies counts as rejecting).
/// Returns a witness word on violation.
pub fn check_determinate(
    ra: &RegisterAutomaton,
    max_configs: usize,
) -> Result<Option<Word>, OracleError> {
    let mut queue: VecDeque<(Word, Vec<RAState>, bool)> = VecDeque::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let start = vec![ra.initial_state()];
    seen.insert(canonical_key(&[&start]));
    queue.push_back((Word::empty(), start, false));
    while let Some((word, states, died)) = queue.pop_front() {
        let any_accept = set_accepts(ra, &states);
        let any_reject = died
            || states
                .iter()
                .any(|s| !ra.locations[s.location].accepting);
        if any_accept && any_reject {
            return Ok(Some(word));
        }
        if states.is_empty() {
            continue;
        }
        for action in ra.alphabet.ids() {
            let values: Vec<Option<DataValue>> = if ra.alphabet.arity(action) == 1 {
                candidate_values(&[&states], &word).into_iter().map(Some).collect()
            } else {
                vec![None]
            };
            for value in values {
                let symbol = DataSymbol { action, value };
                let next = step_set(ra, &states, symbol);
                let next_died = states
                    .iter()
                    .any(|s| ra.step(s, symbol).expect("alphabet mismatch").is_empty());
                let mut key = canonical_key(&[&next]);
                key.push(next_died as u64);
                if seen.insert(key) {
                    if seen.len() > max_configs {
                        return Err(OracleError::Budget);
                    }
                    queue.push_back((word.extended(symbol), next, next_died));
                }
            }
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Random-walk equivalence testing
// ---------------------------------------------------------------------------

/// Black-box equivalence testing by seeded random walks. Each walk draws a
/// length up to `max_depth`, actions uniformly, and data values from the
/// values seen so far with probability `reuse_probability` (fresh otherwise).
#[derive(Debug, Clone)]
pub struct RandomWalkOracle {
    pub max_depth: usize,
    pub walks: usize,
    pub reuse_probability: f64,
    rng: ChaCha8Rng,
}

impl RandomWalkOracle {
    pub fn new(max_depth: usize, walks: usize, seed: u64) -> Self {
        RandomWalkOracle {
            max_depth,
            walks,
            reuse_probability: 0.5,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl EquivalenceOracle for RandomWalkOracle {
    fn find_counterexample(
        &mut self,
        hyp: &RegisterAutomaton,
        sim: &mut SimOracle,
    ) -> Result<Option<Word>, OracleError> {
        for _ in 0..self.walks {
            let len = self.rng.gen_range(1..=self.max_depth.max(1));
            let mut word = Word::empty();
            for _ in 0..len {
                let action = self.rng.gen_range(0..hyp.alphabet.len());
                let value = if hyp.alphabet.arity(action) == 1 {
                    let mut existing = word.data_values();
                    existing.sort_unstable();
                    existing.dedup();
                    if !existing.is_empty() && self.rng.gen_bool(self.reuse_probability) {
                        Some(existing[self.rng.gen_range(0..existing.len())])
                    } else {
                        Some(fresh_value(&word))
                    }
                } else {
                    None
                };
                word = word.extended(DataSymbol { action, value });
            }
            if sim.membership(&word) != hyp.accepts(&word) {
                return Ok(Some(word));
            }
        }
        Ok(None)
    }
}

// ---------------------------------------------------------------------------
// Scripted equivalence oracle
// ---------------------------------------------------------------------------

/// Replays a fixed sequence of candidate counterexamples (skipping any that
/// no longer distinguish hypothesis and SUL), then falls back to the exact
/// oracle. Used to reproduce known runs deterministically.
pub struct ScriptedOracle {
    script: VecDeque<Word>,
    fallback: ExactOracle,
}

impl ScriptedOracle {
    pub fn new(script: Vec<Word>) -> Self {
        ScriptedOracle {
            script: script.into(),
            fallback: ExactOracle::default(),
        }
    }
}

impl EquivalenceOracle for ScriptedOracle {
    fn find_counterexample(
        &mut self,
        hyp: &RegisterAutomaton,
        sim: &mut SimOracle,
    ) -> Result<Option<Word>, OracleError> {
        while let Some(w) = self.script.pop_front() {
            if hyp.accepts(&w) != sim.sul_accepts(&w) {
                return Ok(Some(w));
            }
        }
        self.fallback.find_counterexample(hyp, sim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{Guard, Location, Transition};
    use crate::models;
    use crate::words::{Alphabet, Word};
    use std::collections::BTreeSet;

    #[test]
    fn membership_examples_and_memoization() {
        let mut sim = SimOracle::new(models::stack(2));
        let ab = sim.sul().alphabet.clone();
        let push0 = Word::parse(&ab, &[("push", 0)]);
        let pop0 = Word::parse(&ab, &[("pop", 0)]);
        assert!(sim.membership(&push0));
        assert!(!sim.membership(&pop0));
        assert!(sim.membership(&Word::empty()));
        assert_eq!(sim.stats.membership.distinct, 3);
        sim.membership(&push0);
        assert_eq!(sim.stats.membership.raw, 4);
        assert_eq!(sim.stats.membership.distinct, 3);
    }

    /// Plain word-enumeration oracle: compares acceptance on every canonical
    /// word up to the given length.
    fn brute_force_disagreement(
        a: &RegisterAutomaton,
        b: &RegisterAutomaton,
        max_len: usize,
    ) -> Option<Word> {
        fn rec(
            a: &RegisterAutomaton,
            b: &RegisterAutomaton,
            word: &Word,
            left: usize,
            out: &mut Option<Word>,
        ) {
            if out.is_some() {
                return;
            }
            if a.accepts(word) != b.accepts(word) {
                *out = Some(word.clone());
                return;
            }
            if left == 0 {
                return;
            }
            for action in a.alphabet.ids() {
                let values: Vec<Option<u64>> = if a.alphabet.arity(action) == 1 {
                    crate::theory::potential_values(word)
                        .into_iter()
                        .map(Some)
                        .collect()
                } else {
                    vec![None]
                };
                for value in values {
                    let next = word.extended(DataSymbol { action, value });
                    rec(a, b, &next, left - 1, out);
                }
            }
        }
        // Breadth-first so the witness is shortest.
        for len in 0..=max_len {
            let mut out = None;
            rec(a, b, &Word::empty(), len, &mut out);
            if out.is_some() {
                return out;
            }
        }
        None
    }

    /// An automaton accepting every word over the stack alphabet.
    fn accept_all(alphabet: Alphabet) -> RegisterAutomaton {
        let mut transitions = Vec::new();
        for action in alphabet.ids() {
            transitions.push(Transition {
                from: 0,
                action,
                guard: Guard::always(),
                assign: Default::default(),
                to: 0,
            });
        }
        RegisterAutomaton {
            alphabet,
            locations: vec![Location {
                name: "l0".into(),
                registers: BTreeSet::new(),
                accepting: true,
            }],
            initial: 0,
            transitions,
        }
    }

    #[test]
    fn exact_oracle_finds_shortest_disagreement() {
        let stack = models::stack(2);
        let all = accept_all(stack.alphabet.clone());
        let ce = find_counterexample_exact(&all, &stack, 100_000)
            .unwrap()
            .expect("disagreement exists");
        // Verified against the brute-force enumeration oracle.
        let brute = brute_force_disagreement(&all, &stack, 2).expect("brute force");
        assert_eq!(ce.len(), brute.len());
        assert_eq!(ce.render(&stack.alphabet), "pop(0)");
        assert!(all.accepts(&ce) != stack.accepts(&ce));
    }

    #[test]
    fn exact_oracle_agrees_with_brute_force_on_equivalence() {
        let stack = models::stack(2);
        assert!(find_counterexample_exact(&stack, &stack, 100_000)
            .unwrap()
            .is_none());
        assert!(brute_force_disagreement(&stack, &stack, 5).is_none());
    }

    #[test]
    fn exact_oracle_rejects_mismatched_alphabets() {
        let stack = models::stack(2);
        let fifo = models::fifo(3);
        assert!(matches!(
            find_counterexample_exact(&stack, &fifo, 1000),
            Err(OracleError::Precondition(_))
        ));
    }

    #[test]
    fn random_walks_find_stack_counterexample_deterministically() {
        let stack = models::stack(2);
        let all = accept_all(stack.alphabet.clone());
        let mut first: Option<Word> = None;
        for _ in 0..2 {
            let mut sim = SimOracle::new(stack.clone());
            let mut oracle = RandomWalkOracle::new(6, 1000, 42);
            let ce = oracle
                .find_counterexample(&all, &mut sim)
                .unwrap()
                .expect("counterexample");
            assert!(all.accepts(&ce) != stack.accepts(&ce));
            match &first {
                None => first = Some(ce),
                Some(w) => assert_eq!(*w, ce),
            }
        }
    }

    #[test]
    fn random_walks_pass_correct_model() {
        let stack = models::stack(2);
        let mut sim = SimOracle::new(stack.clone());
        let mut oracle = RandomWalkOracle::new(6, 500, 7);
        assert!(oracle
            .find_counterexample(&stack, &mut sim)
            .unwrap()
            .is_none());
    }

    #[test]
    fn benchmark_models_are_determinate() {
        for (name, ra) in models::all() {
            let witness = check_determinate(&ra, 100_000).unwrap();
            assert!(witness.is_none(), "{name} is not determinate");
        }
    }
}
