//! The SL^λ learner: closedness and consistency checks over the
//! classification tree, hypothesis construction, counterexample analysis,
//! and the main loop. A baseline mode (SL^CT) adds restricted suffixes taken
//! from counterexamples to the tree directly instead of expanding prefixes
//! and deriving short suffixes from inconsistencies.

use crate::automaton::{
    AssignSrc, Guard, GuardLit, Location, RAState, RegisterAutomaton, Transition,
};
use crate::ct::{LearnerState, NodeId, ROOT};
use crate::oracle::{EquivalenceOracle, MembershipOracle, OracleError, Phase, SimOracle};
use crate::restrict;
use crate::sdt::{Bijection, Sdt, SdtRef};
use crate::theory::DataValue;
use crate::words::{actions_of, prepend, ActionId, SymbolicSuffix, Word};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    SlLambda,
    SlCt,
}

#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub restrictions: bool,
    pub max_rounds: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            algorithm: Algorithm::SlLambda,
            restrictions: true,
            max_rounds: 10_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("equivalence oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("iteration cap exceeded; this signals a bug, not a semantic outcome")]
    RoundLimit,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Hypothesis {
        number: usize,
        locations: usize,
        transitions: usize,
        registers: usize,
        resets: usize,
    },
    Counterexample {
        word: String,
        length: usize,
    },
    Fix {
        kind: String,
        detail: String,
    },
}

/// A constructed hypothesis together with the classification-tree leaf and
/// anchor short prefix behind each location.
pub struct Hypothesis {
    pub automaton: RegisterAutomaton,
    pub loc_leaf: Vec<NodeId>,
    pub loc_anchor: Vec<Word>,
}

pub struct Learned {
    pub automaton: RegisterAutomaton,
    pub stats: crate::oracle::QueryStats,
    pub events: Vec<Event>,
}

struct Learner<'o> {
    st: LearnerState<'o>,
    cfg: LearnerConfig,
    events: Vec<Event>,
}

fn map_guard(guard: &Guard, gamma: &Bijection) -> Option<Guard> {
    let mut literals = Vec::new();
    for l in guard.literals() {
        literals.push(GuardLit {
            op: l.op,
            register: *gamma.get(&l.register)?,
        });
    }
    Some(Guard::new(literals))
}

fn is_identity(gamma: &Bijection) -> bool {
    gamma.iter().all(|(k, v)| k == v)
}

/// γ' extends γ when they agree on every register both map.
fn compatible(gamma: &Bijection, extension: &Bijection) -> bool {
    gamma
        .iter()
        .all(|(k, v)| extension.get(k).map(|w| w == v).unwrap_or(true))
}

/// Deterministic trace on a hypothesis: first enabled transition in
/// construction order. `None` when the run falls into the implicit sink.
fn trace(hyp: &Hypothesis, w: &Word) -> Option<RAState> {
    let mut state = hyp.automaton.initial_state();
    for &symbol in w.symbols() {
        state = hyp
            .automaton
            .step(&state, symbol)
            .expect("alphabet mismatch")
            .into_iter()
            .next()?;
    }
    Some(state)
}

impl<'o> Learner<'o> {
    fn fix(&mut self, kind: &str, detail: String) {
        self.events.push(Event::Fix {
            kind: kind.to_string(),
            detail,
        });
    }

    fn render(&self, w: &Word) -> String {
        w.render(&self.st.alphabet)
    }

    // -- checks ------------------------------------------------------------

    /// Applies the first violated check, restarting the sequence after every
    /// fix, until the tree is closed and consistent.
    fn fixpoint(&mut self) -> Result<(), LearnError> {
        let mut rounds = 0usize;
        loop {
            rounds += 1;
            if rounds > 100_000 {
                return Err(LearnError::RoundLimit);
            }
            if self.check_location_closedness()?
                || self.check_transition_closedness()?
                || self.check_register_closedness()?
                || self.check_location_consistency()?
                || self.check_transition_consistency_a()?
                || self.check_transition_consistency_b()?
                || self.check_register_consistency()?
            {
                continue;
            }
            return Ok(());
        }
    }

    fn check_location_closedness(&mut self) -> Result<bool, LearnError> {
        for leaf in self.st.tree.leaves() {
            if self.st.short_prefixes_of(leaf).is_empty() {
                let u = self
                    .st
                    .tree
                    .members(leaf)
                    .iter()
                    .min()
                    .cloned()
                    .ok_or_else(|| LearnError::Internal("empty leaf".into()))?;
                self.fix("location_closedness", format!("expand {}", self.render(&u)));
                self.st.expand(&u);
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn check_transition_closedness(&mut self) -> Result<bool, LearnError> {
        let shorts: Vec<Word> = self.st.sp.iter().cloned().collect();
        for u in shorts {
            for action in self.st.alphabet.ids() {
                for guard in self.st.initial_guards_of(&u, action) {
                    let w = self.st.extension_word(&u, action, &guard);
                    if !self.st.prefixes.contains(&w) {
                        self.fix("transition_closedness", format!("sift {}", self.render(&w)));
                        self.st.sift(&w, ROOT);
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }

    fn check_register_closedness(&mut self) -> Result<bool, LearnError> {
        let words: Vec<Word> = self.st.prefixes.iter().cloned().collect();
        for w in words {
            if w.is_empty() {
                continue;
            }
            let u = w.prefix(w.len() - 1);
            if !self.st.prefixes.contains(&u) {
                continue;
            }
            let anc_w = self.st.tree.ancestor_suffixes(self.st.leaf_of[&w]);
            let anc_u = self.st.tree.ancestor_suffixes(self.st.leaf_of[&u]);
            let mem_w = self.st.memorable(&w, &anc_w);
            let mut allowed = self.st.memorable(&u, &anc_u);
            allowed.insert(u.len() + 1);
            let missing: BTreeSet<usize> = mem_w.difference(&allowed).copied().collect();
            if missing.is_empty() {
                continue;
            }
            // Shortest ancestor suffix revealing a missing register.
            let mut witnesses = anc_w.clone();
            witnesses.sort_by_key(|v| v.len());
            let v = witnesses
                .into_iter()
                .find(|v| {
                    let mem = self.st.sdt(&w, v).memorable();
                    mem.intersection(&missing).next().is_some()
                })
                .ok_or_else(|| {
                    LearnError::Internal("no suffix reveals the missing register".into())
                })?;
            let last = *w.symbols().last().expect("nonempty");
            let suffix = if self.st.restrictions_enabled {
                let t = self.st.sdt(&w, &v);
                restrict::prepend_restricted(
                    &self.st.alphabet,
                    &u,
                    last.action,
                    last.value,
                    &v,
                    &t,
                    &missing,
                    false,
                )
            } else {
                prepend(&self.st.alphabet, last.action, &v)
            };
            self.fix(
                "register_closedness",
                format!(
                    "refine leaf of {} with {} to reveal {:?}",
                    self.render(&u),
                    suffix.render(&self.st.alphabet),
                    missing
                ),
            );
            let missing_check = missing.clone();
            let u_check = u.clone();
            self.refine_with_fallback(&u, suffix, move |lr| {
                let anc = lr.st.tree.ancestor_suffixes(lr.st.leaf_of[&u_check]);
                let mem = lr.st.memorable(&u_check, &anc);
                missing_check.iter().all(|r| mem.contains(r))
            })?;
            return Ok(true);
        }
        Ok(false)
    }

    fn check_location_consistency(&mut self) -> Result<bool, LearnError> {
        for leaf in self.st.tree.leaves() {
            let shorts = self.st.short_prefixes_of(leaf);
            for i in 0..shorts.len() {
                for j in i + 1..shorts.len() {
                    let (u, u2) = (shorts[i].clone(), shorts[j].clone());
                    let anc = self.st.tree.ancestor_suffixes(leaf);
                    let gamma = self.st.bijection(&u, &u2, &anc).ok_or_else(|| {
                        LearnError::Internal("leaf members must be equivalent".into())
                    })?;
                    for action in self.st.alphabet.ids() {
                        for guard in self.st.initial_guards_of(&u, action) {
                            let Some(guard2) = map_guard(&guard, &gamma) else {
                                continue;
                            };
                            let w1 = self.st.extension_word(&u, action, &guard);
                            let w2 = self.st.extension_word(&u2, action, &guard2);
                            let (Some(&l1), Some(&l2)) =
                                (self.st.leaf_of.get(&w1), self.st.leaf_of.get(&w2))
                            else {
                                continue;
                            };
                            if l1 == l2 {
                                continue;
                            }
                            let lca = self.st.tree.lca(l1, l2);
                            let v = self.st.tree.suffix(lca).clone();
                            let suffix =
                                self.separating_suffix(&u, &w1, &u2, &w2, &gamma, action, &v);
                            self.fix(
                                "location_consistency",
                                format!(
                                    "split {} from {} with {}",
                                    self.render(&u),
                                    self.render(&u2),
                                    suffix.render(&self.st.alphabet)
                                ),
                            );
                            let (uc, u2c) = (u.clone(), u2.clone());
                            self.refine_with_fallback(&u, suffix, move |lr| {
                                lr.st.leaf_of[&uc] != lr.st.leaf_of[&u2c]
                            })?;
                            return Ok(true);
                        }
                    }
                }
            }
        }
        Ok(false)
    }

    /// Restricted suffix for a separating refinement; falls back to the
    /// unrestricted prepend when restrictions are disabled or no separating
    /// path pair is found.
    #[allow(clippy::too_many_arguments)]
    fn separating_suffix(
        &mut self,
        u: &Word,
        w1: &Word,
        u2: &Word,
        w2: &Word,
        gamma: &Bijection,
        action: ActionId,
        v: &SymbolicSuffix,
    ) -> SymbolicSuffix {
        let plain = prepend(&self.st.alphabet, action, v);
        if !self.st.restrictions_enabled || self.st.alphabet.arity(action) == 0 {
            return plain;
        }
        let (Some(d1), Some(d2)) = (
            w1.value_at(w1.len()),
            w2.value_at(w2.len()),
        ) else {
            return plain;
        };
        let t1 = self.st.sdt(w1, v);
        let t2 = self.st.sdt(w2, v);
        restrict::separating(
            &self.st.alphabet,
            action,
            u,
            d1,
            u2,
            d2,
            gamma,
            v,
            &t1,
            &t2,
        )
        .unwrap_or(plain)
    }

    /// Extensions `u·α(d)` of `u` currently in U.
    fn extensions_of(&self, u: &Word, action: ActionId) -> Vec<Word> {
        self.st
            .prefixes
            .iter()
            .filter(|w| {
                w.len() == u.len() + 1
                    && w.symbols().last().map(|s| s.action) == Some(action)
                    && w.prefix(u.len()) == *u
            })
            .cloned()
            .collect()
    }

    fn check_transition_consistency_a(&mut self) -> Result<bool, LearnError> {
        let shorts: Vec<Word> = self.st.sp.iter().cloned().collect();
        for u in shorts {
            let valuation = LearnerState::valuation_of(&u);
            for action in self.st.alphabet.ids() {
                if self.st.alphabet.arity(action) == 0 {
                    continue;
                }
                for guard in self.st.initial_guards_of(&u, action) {
                    let w_repr = self.st.extension_word(&u, action, &guard);
                    let Some(&l_repr) = self.st.leaf_of.get(&w_repr) else {
                        continue;
                    };
                    for w in self.extensions_of(&u, action) {
                        let d = w.value_at(w.len()).expect("arity-1 extension");
                        if w == w_repr || !guard.eval(&valuation, d) {
                            continue;
                        }
                        let l_w = self.st.leaf_of[&w];
                        if l_w == l_repr {
                            continue;
                        }
                        let lca = self.st.tree.lca(l_repr, l_w);
                        let v = self.st.tree.suffix(lca).clone();
                        let anc_u = self.st.tree.ancestor_suffixes(self.st.leaf_of[&u]);
                        let id: Bijection = self
                            .st
                            .memorable(&u, &anc_u)
                            .into_iter()
                            .map(|r| (r, r))
                            .collect();
                        let suffix =
                            self.separating_suffix(&u, &w_repr, &u, &w, &id, action, &v);
                        self.fix(
                            "transition_consistency_a",
                            format!(
                                "split guard {} at {} ({} vs {})",
                                guard.render(),
                                self.render(&u),
                                self.render(&w_repr),
                                self.render(&w)
                            ),
                        );
                        let (uc, wc, wrc) = (u.clone(), w.clone(), w_repr.clone());
                        let actionc = action;
                        self.refine_with_fallback(&u, suffix, move |lr| {
                            lr.matched_guard(&uc, actionc, &wc)
                                != lr.matched_guard(&uc, actionc, &wrc)
                        })?;
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }

    /// The initial guard of `u` matched by the extension's data value.
    fn matched_guard(&mut self, u: &Word, action: ActionId, w: &Word) -> Option<Guard> {
        let d = w.value_at(w.len())?;
        let valuation = LearnerState::valuation_of(u);
        self.st
            .initial_guards_of(u, action)
            .into_iter()
            .find(|g| g.eval(&valuation, d))
    }

    fn check_transition_consistency_b(&mut self) -> Result<bool, LearnError> {
        let shorts: Vec<Word> = self.st.sp.iter().cloned().collect();
        for u in shorts {
            let valuation = LearnerState::valuation_of(&u);
            for action in self.st.alphabet.ids() {
                if self.st.alphabet.arity(action) == 0 {
                    continue;
                }
                for guard in self.st.initial_guards_of(&u, action) {
                    let w_repr = self.st.extension_word(&u, action, &guard);
                    let Some(&l_repr) = self.st.leaf_of.get(&w_repr) else {
                        continue;
                    };
                    for w in self.extensions_of(&u, action) {
                        let d = w.value_at(w.len()).expect("arity-1 extension");
                        if w == w_repr || !guard.eval(&valuation, d) {
                            continue;
                        }
                        if self.st.leaf_of[&w] != l_repr {
                            continue; // transition consistency (a) territory
                        }
                        let anc = self.st.tree.ancestor_suffixes(l_repr);
                        let equal_under_id = anc.iter().all(|v| {
                            self.st.sdt(&w_repr, v) == self.st.sdt(&w, v)
                        });
                        if equal_under_id {
                            continue;
                        }
                        // Shortest suffix witnessing the ≄_id difference.
                        let mut witnesses = anc.clone();
                        witnesses.sort_by_key(|v| v.len());
                        let v = witnesses
                            .into_iter()
                            .find(|v| self.st.sdt(&w_repr, v) != self.st.sdt(&w, v))
                            .expect("a differing suffix exists");
                        let mut targets = self.st.sdt(&w_repr, &v).memorable();
                        targets.extend(self.st.sdt(&w, &v).memorable());
                        let suffix = if self.st.restrictions_enabled {
                            let t = self.st.sdt(&w_repr, &v);
                            restrict::prepend_restricted(
                                &self.st.alphabet,
                                &u,
                                action,
                                w_repr.value_at(w_repr.len()),
                                &v,
                                &t,
                                &targets,
                                true,
                            )
                        } else {
                            prepend(&self.st.alphabet, action, &v)
                        };
                        self.fix(
                            "transition_consistency_b",
                            format!(
                                "split guard {} at {} ({} vs {} differ under id)",
                                guard.render(),
                                self.render(&u),
                                self.render(&w_repr),
                                self.render(&w)
                            ),
                        );
                        let (uc, wc, wrc) = (u.clone(), w.clone(), w_repr.clone());
                        let actionc = action;
                        self.refine_with_fallback(&u, suffix, move |lr| {
                            lr.matched_guard(&uc, actionc, &wc)
                                != lr.matched_guard(&uc, actionc, &wrc)
                        })?;
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }

    fn check_register_consistency(&mut self) -> Result<bool, LearnError> {
        let shorts: Vec<Word> = self.st.sp.iter().cloned().collect();
        for u in shorts {
            let anc_u = self.st.tree.ancestor_suffixes(self.st.leaf_of[&u]);
            let self_bijections = self.st.self_bijections(&u, &anc_u);
            if self_bijections.len() <= 1 {
                continue;
            }
            for gamma in self_bijections.iter().filter(|g| !is_identity(g)) {
                for action in self.st.alphabet.ids() {
                    for w in self.extensions_of(&u, action) {
                        let anc_w = self.st.tree.ancestor_suffixes(self.st.leaf_of[&w]);
                        let extensions = self.st.self_bijections(&w, &anc_w);
                        if extensions.iter().any(|g2| compatible(gamma, g2)) {
                            continue;
                        }
                        // Shortest single suffix under which no compatible
                        // self-bijection of the extension exists.
                        let mut witnesses = anc_w.clone();
                        witnesses.sort_by_key(|v| v.len());
                        let witness = witnesses.into_iter().find(|v| {
                            let bijs = self.st.self_bijections(&w, std::slice::from_ref(v));
                            bijs.iter().all(|g2| !compatible(gamma, g2))
                        });
                        let Some(v) = witness else {
                            // The asymmetry is only visible through a
                            // combination of suffixes; leave it to later
                            // counterexamples.
                            continue;
                        };
                        let last = *w.symbols().last().expect("nonempty");
                        let targets = self.st.sdt(&w, &v).memorable();
                        let suffix = if self.st.restrictions_enabled {
                            let t = self.st.sdt(&w, &v);
                            restrict::prepend_restricted(
                                &self.st.alphabet,
                                &u,
                                last.action,
                                last.value,
                                &v,
                                &t,
                                &targets,
                                false,
                            )
                        } else {
                            prepend(&self.st.alphabet, last.action, &v)
                        };
                        self.fix(
                            "register_consistency",
                            format!(
                                "break symmetry {:?} of {} via {} with {}",
                                gamma,
                                self.render(&u),
                                self.render(&w),
                                suffix.render(&self.st.alphabet)
                            ),
                        );
                        let uc = u.clone();
                        let gammac = gamma.clone();
                        self.refine_with_fallback(&u, suffix, move |lr| {
                            let anc = lr.st.tree.ancestor_suffixes(lr.st.leaf_of[&uc]);
                            !lr.st.self_bijections(&uc, &anc).contains(&gammac)
                        })?;
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }

    /// Refines the leaf of `word` with `suffix`; when the suffix was
    /// restricted and the goal predicate does not hold afterwards, redoes
    /// the refinement with the unrestricted suffix (restrictions have less
    /// separating power, so this keeps their edge cases harmless).
    fn refine_with_fallback(
        &mut self,
        word: &Word,
        suffix: SymbolicSuffix,
        satisfied: impl Fn(&mut Self) -> bool,
    ) -> Result<(), LearnError> {
        let leaf = *self
            .st
            .leaf_of
            .get(word)
            .ok_or_else(|| LearnError::Internal("refine target not sifted".into()))?;
        let unrestricted = suffix.forget_restrictions();
        let was_restricted = suffix != unrestricted;
        self.st.refine(leaf, suffix);
        if was_restricted && !satisfied(self) {
            self.fix(
                "restriction_fallback",
                format!(
                    "retry with unrestricted {}",
                    unrestricted.render(&self.st.alphabet)
                ),
            );
            let leaf = self.st.leaf_of[word];
            self.st.refine(leaf, unrestricted);
        }
        Ok(())
    }

    // -- hypothesis construction -------------------------------------------

    fn build_hypothesis(&mut self) -> Result<Hypothesis, LearnError> {
        let leaves = self.st.tree.leaves();
        let loc_of_leaf: BTreeMap<NodeId, usize> = leaves
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, i))
            .collect();
        let mut locations = Vec::new();
        let mut anchors = Vec::new();
        for (idx, &leaf) in leaves.iter().enumerate() {
            let anchor = self
                .st
                .anchor_of(leaf)
                .ok_or_else(|| LearnError::Internal("leaf without short prefix".into()))?;
            let anc = self.st.tree.ancestor_suffixes(leaf);
            let registers = self.st.memorable(&anchor, &anc);
            let accepting = match *self.st.sdt(&anchor, &SymbolicSuffix::empty()) {
                Sdt::Leaf(b) => b,
                _ => unreachable!("empty-suffix SDT is a leaf"),
            };
            locations.push(Location {
                name: format!("l{idx}"),
                registers,
                accepting,
            });
            anchors.push(anchor);
        }
        let initial = loc_of_leaf[&self.st.leaf_of[&Word::empty()]];
        let mut transitions = Vec::new();
        for (idx, &_leaf) in leaves.iter().enumerate() {
            let u = anchors[idx].clone();
            for action in self.st.alphabet.ids() {
                for guard in self.st.initial_guards_of(&u, action) {
                    let w = self.st.extension_word(&u, action, &guard);
                    let target_leaf = *self.st.leaf_of.get(&w).ok_or_else(|| {
                        LearnError::Internal(format!(
                            "extension {} not in U",
                            self.render(&w)
                        ))
                    })?;
                    let target = loc_of_leaf[&target_leaf];
                    let target_anchor = anchors[target].clone();
                    let anc_t = self.st.tree.ancestor_suffixes(target_leaf);
                    let gamma = self
                        .st
                        .bijection(&w, &target_anchor, &anc_t)
                        .ok_or_else(|| {
                            LearnError::Internal(
                                "extension inequivalent to its target anchor".into(),
                            )
                        })?;
                    let mut assign = BTreeMap::new();
                    for (&src_pos, &tgt_reg) in &gamma {
                        let src = if src_pos == u.len() + 1 {
                            AssignSrc::Param
                        } else {
                            AssignSrc::Register(src_pos)
                        };
                        assign.insert(tgt_reg, src);
                    }
                    transitions.push(Transition {
                        from: idx,
                        action,
                        guard,
                        assign,
                        to: target,
                    });
                }
            }
        }
        let automaton = RegisterAutomaton {
            alphabet: self.st.alphabet.clone(),
            locations,
            initial,
            transitions,
        };
        Ok(Hypothesis {
            automaton,
            loc_leaf: leaves,
            loc_anchor: anchors,
        })
    }

    // -- counterexample analysis -------------------------------------------

    /// Right-to-left scan of the counterexample (Analyze): at each split the
    /// location case expands a transition prefix inequivalent to all short
    /// prefixes of its location, and the transition case adds the
    /// representative of a newly revealed initial guard. In SL^CT mode both
    /// cases instead add the restricted counterexample tail to the tree.
    fn analyze(&mut self, hyp: &Hypothesis, w: &Word) -> Result<(), LearnError> {
        self.st.oracle.stats.analyze_calls += 1;
        for i in (1..=w.len()).rev() {
            let loc_prefix = w.prefix(i - 1);
            let symbol = w.symbols()[i - 1];
            let action = symbol.action;
            let Some(src) = trace(hyp, &loc_prefix) else {
                continue;
            };
            let src_leaf = hyp.loc_leaf[src.location];
            let as_prev = self.st.short_prefixes_of(src_leaf);
            let dst_shorts: Vec<Word> = match trace(hyp, &w.prefix(i)) {
                Some(dst) => self.st.short_prefixes_of(hyp.loc_leaf[dst.location]),
                None => Vec::new(),
            };
            let tail = w.suffix_from(i);
            let v_tail = if self.cfg.restrictions {
                restrict::from_counterexample(&self.st.alphabet, &w.prefix(i), &tail)
            } else {
                actions_of(&self.st.alphabet, &tail)
            };
            let anchor = hyp.loc_anchor[src.location].clone();
            let anc_src = self.st.tree.ancestor_suffixes(src_leaf);
            for u in as_prev {
                let Some(gamma_u) = self.st.bijection(&u, &anchor, &anc_src) else {
                    continue;
                };
                let guard = if self.st.alphabet.arity(action) == 0 {
                    Guard::always()
                } else {
                    let d = symbol.value.expect("arity-1 symbol");
                    let val_u: BTreeMap<usize, DataValue> = gamma_u
                        .iter()
                        .filter_map(|(&x, &ax)| src.valuation.get(&ax).map(|&v| (x, v)))
                        .collect();
                    match self
                        .st
                        .initial_guards_of(&u, action)
                        .into_iter()
                        .find(|g| g.eval(&val_u, d))
                    {
                        Some(g) => g,
                        None => continue,
                    }
                };
                let w_trans = self.st.extension_word(&u, action, &guard);
                if !self.st.prefixes.contains(&w_trans) {
                    self.fix("ce_new_prefix", format!("sift {}", self.render(&w_trans)));
                    self.st.sift(&w_trans, ROOT);
                    return Ok(());
                }
                // Case 1: the transition prefix is inequivalent, under the
                // counterexample tail, to every short prefix of the location
                // it reaches.
                if !self.st.sp.contains(&w_trans) {
                    let v_slice = std::slice::from_ref(&v_tail);
                    let separated = dst_shorts
                        .iter()
                        .all(|u2| self.st.bijection(&w_trans, u2, v_slice).is_none());
                    if separated {
                        match self.cfg.algorithm {
                            Algorithm::SlLambda => {
                                self.fix("ce_expand", format!("expand {}", self.render(&w_trans)));
                                self.st.expand(&w_trans);
                            }
                            Algorithm::SlCt => {
                                let leaf = self.st.leaf_of[&w_trans];
                                if v_tail.is_empty() || self.st.tree.members(leaf).len() < 2 {
                                    self.fix(
                                        "ce_expand",
                                        format!("expand {}", self.render(&w_trans)),
                                    );
                                    self.st.expand(&w_trans);
                                } else {
                                    self.fix(
                                        "ce_refine",
                                        format!(
                                            "refine leaf of {} with {}",
                                            self.render(&w_trans),
                                            v_tail.render(&self.st.alphabet)
                                        ),
                                    );
                                    self.st.refine(leaf, v_tail.clone());
                                }
                            }
                        }
                        return Ok(());
                    }
                }
                // Case 2: the tree query for the full tail shows an initial
                // guard whose representative extension is new.
                if self.st.alphabet.arity(action) == 1 {
                    let from = w.suffix_from(i - 1);
                    let av = if self.cfg.restrictions {
                        restrict::from_counterexample(&self.st.alphabet, &loc_prefix, &from)
                    } else {
                        actions_of(&self.st.alphabet, &from)
                    };
                    let t = self.st.sdt(&u, &av);
                    for root_guard in t.root_guards() {
                        let g2 = match &root_guard {
                            crate::sdt::SdtGuard::Equal(SdtRef::Register(r)) => Guard::equal(*r),
                            crate::sdt::SdtGuard::Equal(SdtRef::Param(_)) => continue,
                            crate::sdt::SdtGuard::NotEqualAll(rs) => Guard::not_equal_all(
                                rs.iter().filter_map(|r| match r {
                                    SdtRef::Register(i) => Some(*i),
                                    SdtRef::Param(_) => None,
                                }),
                            ),
                            crate::sdt::SdtGuard::True => Guard::always(),
                        };
                        let w_new = self.st.extension_word(&u, action, &g2);
                        if !self.st.prefixes.contains(&w_new) {
                            match self.cfg.algorithm {
                                Algorithm::SlLambda => {
                                    self.fix(
                                        "ce_new_guard",
                                        format!("sift {}", self.render(&w_new)),
                                    );
                                    self.st.sift(&w_new, ROOT);
                                }
                                Algorithm::SlCt => {
                                    self.fix(
                                        "ce_refine",
                                        format!(
                                            "refine leaf of {} with {}",
                                            self.render(&u),
                                            av.render(&self.st.alphabet)
                                        ),
                                    );
                                    let leaf = self.st.leaf_of[&u];
                                    self.st.refine(leaf, av.clone());
                                }
                            }
                            return Ok(());
                        }
                    }
                }
            }
        }
        Err(LearnError::Internal(
            "counterexample analysis: neither case applies at any index".into(),
        ))
    }

    fn progress_measure(&self) -> usize {
        let base = self.st.sp.len() + self.st.prefixes.len();
        match self.cfg.algorithm {
            Algorithm::SlLambda => base,
            Algorithm::SlCt => base + self.st.tree.inner_count(),
        }
    }
}

/// Runs the learner against the oracle until the equivalence oracle accepts
/// a hypothesis. Counterexamples are reanalyzed until the hypothesis
/// classifies them correctly, so each equivalence query sees a genuinely new
/// hypothesis.
pub fn learn(
    sim: &mut SimOracle,
    eq: &mut dyn EquivalenceOracle,
    cfg: &LearnerConfig,
) -> Result<Learned, LearnError> {
    let restrictions = cfg.restrictions;
    let mut learner = Learner {
        st: LearnerState::new(sim, restrictions),
        cfg: cfg.clone(),
        events: Vec::new(),
    };
    learner.st.sift(&Word::empty(), ROOT);
    let mut rounds = 0usize;
    loop {
        rounds += 1;
        if rounds > learner.cfg.max_rounds {
            return Err(LearnError::RoundLimit);
        }
        learner.fixpoint()?;
        let mut hyp = learner.build_hypothesis()?;
        learner.st.oracle.stats.hypotheses += 1;
        learner.events.push(Event::Hypothesis {
            number: learner.st.oracle.stats.hypotheses,
            locations: hyp.automaton.location_count(),
            transitions: hyp.automaton.transition_count(),
            registers: hyp.automaton.max_registers(),
            resets: learner.st.oracle.stats.learn.distinct,
        });
        learner.st.oracle.set_phase(Phase::Test);
        let ce = eq.find_counterexample(&hyp.automaton, learner.st.oracle)?;
        learner.st.oracle.set_phase(Phase::Learn);
        let Some(w) = ce else {
            let mut stats = learner.st.oracle.stats.clone();
            stats.locations = hyp.automaton.location_count();
            stats.transitions = hyp.automaton.transition_count();
            stats.max_registers = hyp.automaton.max_registers();
            return Ok(Learned {
                automaton: hyp.automaton,
                stats,
                events: learner.events,
            });
        };
        learner.st.oracle.stats.counterexamples += 1;
        let len = w.len();
        let longest = &mut learner.st.oracle.stats.longest_counterexample;
        *longest = (*longest).max(len);
        learner.events.push(Event::Counterexample {
            word: w.render(&learner.st.alphabet),
            length: len,
        });
        let mut inner_rounds = 0usize;
        loop {
            inner_rounds += 1;
            if inner_rounds > learner.cfg.max_rounds {
                return Err(LearnError::RoundLimit);
            }
            let before = learner.progress_measure();
            learner.analyze(&hyp, &w)?;
            if learner.progress_measure() <= before {
                return Err(LearnError::Internal(
                    "counterexample analysis made no progress".into(),
                ));
            }
            learner.fixpoint()?;
            hyp = learner.build_hypothesis()?;
            if hyp.automaton.accepts(&w) == learner.st.oracle.membership(&w) {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::oracle::{find_counterexample_exact, ExactOracle, ScriptedOracle, SimOracle};
    use crate::words::Alphabet;

    fn hypothesis_sizes(events: &[Event]) -> Vec<usize> {
        events
            .iter()
            .filter_map(|e| match e {
                Event::Hypothesis { locations, .. } => Some(*locations),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn golden_stack2_narrative_trace() {
        // The §-by-§ stack story: counterexample push(0)push(1)push(2) for
        // the first hypothesis, push(0)pop(0) for the second, exact oracle
        // afterwards. Hypothesis location counts must be 2, 4, 4, final.
        let sul = models::stack(2);
        let ab: Alphabet = sul.alphabet.clone();
        let mut sim = SimOracle::new(sul.clone());
        let script = vec![
            Word::parse(&ab, &[("push", 0), ("push", 1), ("push", 2)]),
            Word::parse(&ab, &[("push", 0), ("pop", 0)]),
        ];
        let mut eq = ScriptedOracle::new(script);
        let learned = learn(&mut sim, &mut eq, &LearnerConfig::default()).unwrap();
        let sizes = hypothesis_sizes(&learned.events);
        assert_eq!(sizes, vec![2, 4, 4, 4]);
        assert!(
            find_counterexample_exact(&learned.automaton, &sul, 100_000)
                .unwrap()
                .is_none(),
            "final model must be language-equivalent to the stack"
        );
    }

    #[test]
    fn exact_oracle_learns_stack2() {
        let sul = models::stack(2);
        let mut sim = SimOracle::new(sul.clone());
        let mut eq = ExactOracle::default();
        let learned = learn(&mut sim, &mut eq, &LearnerConfig::default()).unwrap();
        assert!(find_counterexample_exact(&learned.automaton, &sul, 100_000)
            .unwrap()
            .is_none());
        learned.automaton.validate().unwrap();
        // Determinism: a second run produces identical stats.
        let mut sim2 = SimOracle::new(sul.clone());
        let mut eq2 = ExactOracle::default();
        let learned2 = learn(&mut sim2, &mut eq2, &LearnerConfig::default()).unwrap();
        assert_eq!(
            serde_json::to_string(&learned.stats).unwrap(),
            serde_json::to_string(&learned2.stats).unwrap()
        );
    }

    #[test]
    fn slct_mode_learns_stack2() {
        let sul = models::stack(2);
        let mut sim = SimOracle::new(sul.clone());
        let mut eq = ExactOracle::default();
        let cfg = LearnerConfig {
            algorithm: Algorithm::SlCt,
            ..LearnerConfig::default()
        };
        let learned = learn(&mut sim, &mut eq, &cfg).unwrap();
        assert!(find_counterexample_exact(&learned.automaton, &sul, 100_000)
            .unwrap()
            .is_none());
    }

    #[test]
    fn restrictions_off_learns_stack2() {
        let sul = models::stack(2);
        let mut sim = SimOracle::new(sul.clone());
        let mut eq = ExactOracle::default();
        let cfg = LearnerConfig {
            restrictions: false,
            ..LearnerConfig::default()
        };
        let learned = learn(&mut sim, &mut eq, &cfg).unwrap();
        assert!(find_counterexample_exact(&learned.automaton, &sul, 100_000)
            .unwrap()
            .is_none());
    }

    #[test]
    fn learner_handles_fifo3() {
        let sul = models::fifo(3);
        let mut sim = SimOracle::new(sul.clone());
        let mut eq = ExactOracle::default();
        let learned = learn(&mut sim, &mut eq, &LearnerConfig::default()).unwrap();
        assert!(find_counterexample_exact(&learned.automaton, &sul, 200_000)
            .unwrap()
            .is_none());
    }

    #[test]
    fn symmetry_model_triggers_register_consistency() {
        let sul = models::symmetry();
        let mut sim = SimOracle::new(sul.clone());
        let mut eq = ExactOracle::default();
        let learned = learn(&mut sim, &mut eq, &LearnerConfig::default()).unwrap();
        assert!(find_counterexample_exact(&learned.automaton, &sul, 200_000)
            .unwrap()
            .is_none());
        assert!(
            learned.events.iter().any(|e| matches!(
                e,
                Event::Fix { kind, .. } if kind == "register_consistency"
            )),
            "register consistency must fire while learning the symmetry model"
        );
    }
}
