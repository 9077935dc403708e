//! Symbolic decision trees and tree queries.
//!
//! A tree query for prefix `u` and symbolic suffix `v̂` performs one
//! membership query per canonical instantiation of `v̂` and summarizes the
//! results as a guard-labeled tree over the prefix registers `x1..xk` and
//! the suffix parameters `p1..pm`. Trees are canonical: an equality branch
//! is kept only if its subtree behaves differently from the fresh-value
//! subtree, children are sorted by reference, and the else branch is last.

use crate::automaton::Guard;
use crate::oracle::MembershipOracle;
use crate::theory::{potential_values_in, DataValue};
use crate::words::{Alphabet, DataSymbol, ParamRestriction, SymbolicSuffix, Word};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

/// A guard reference: a prefix register `x_i` or an earlier suffix
/// parameter `p_j`, both 1-indexed. Registers order before parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SdtRef {
    Register(usize),
    Param(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SdtGuard {
    Equal(SdtRef),
    /// The else branch: different from all listed references.
    NotEqualAll(Vec<SdtRef>),
    True,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Sdt {
    Leaf(bool),
    Node(Vec<(SdtGuard, Sdt)>),
}

/// A bijection between memorable register sets, mapping left registers to
/// right registers.
pub type Bijection = BTreeMap<usize, usize>;

impl Sdt {
    pub fn leaf(accept: bool) -> Self {
        Sdt::Leaf(accept)
    }

    /// Depth = number of parameters the tree still decides on.
    pub fn depth(&self) -> usize {
        match self {
            Sdt::Leaf(_) => 0,
            Sdt::Node(children) => 1 + children.iter().map(|(_, s)| s.depth()).max().unwrap_or(0),
        }
    }

    /// Registers occurring in any guard on any path.
    pub fn memorable(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_registers(&mut out);
        out
    }

    fn collect_registers(&self, out: &mut BTreeSet<usize>) {
        if let Sdt::Node(children) = self {
            for (guard, sub) in children {
                for r in guard.refs() {
                    if let SdtRef::Register(i) = r {
                        out.insert(*i);
                    }
                }
                sub.collect_registers(out);
            }
        }
    }

    /// Root-level guards (the constraints on the first parameter).
    pub fn root_guards(&self) -> Vec<SdtGuard> {
        match self {
            Sdt::Leaf(_) => Vec::new(),
            Sdt::Node(children) => children.iter().map(|(g, _)| g.clone()).collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 1, 0);
        out
    }

    fn render_into(&self, out: &mut String, param: usize, indent: usize) {
        match self {
            Sdt::Leaf(accept) => {
                let _ = writeln!(out, "{}{}", "  ".repeat(indent), if *accept { "+" } else { "-" });
            }
            Sdt::Node(children) => {
                for (guard, sub) in children {
                    let _ = writeln!(out, "{}[{}]", "  ".repeat(indent), guard.render(param));
                    sub.render_into(out, param + 1, indent + 1);
                }
            }
        }
    }
}

impl SdtGuard {
    pub fn refs(&self) -> &[SdtRef] {
        match self {
            SdtGuard::Equal(r) => std::slice::from_ref(r),
            SdtGuard::NotEqualAll(rs) => rs,
            SdtGuard::True => &[],
        }
    }

    fn render(&self, param: usize) -> String {
        let show = |r: &SdtRef| match r {
            SdtRef::Register(i) => format!("x{i}"),
            SdtRef::Param(j) => format!("p{j}"),
        };
        match self {
            SdtGuard::Equal(r) => format!("p{param}={}", show(r)),
            SdtGuard::NotEqualAll(rs) if rs.is_empty() => "true".to_string(),
            SdtGuard::NotEqualAll(rs) => rs
                .iter()
                .map(|r| format!("p{param}!={}", show(r)))
                .collect::<Vec<_>>()
                .join(" & "),
            SdtGuard::True => "true".to_string(),
        }
    }
}

fn ref_value(r: &SdtRef, prefix_values: &[DataValue], suffix_values: &[DataValue]) -> DataValue {
    match r {
        SdtRef::Register(i) => prefix_values[i - 1],
        SdtRef::Param(j) => suffix_values[j - 1],
    }
}

/// Evaluates the tree as a function on concrete parameter values.
/// `suffix_values` are the values of parameters decided above this subtree.
pub fn classify(
    sdt: &Sdt,
    prefix_values: &[DataValue],
    suffix_values: &[DataValue],
    rest: &[DataValue],
) -> bool {
    match sdt {
        Sdt::Leaf(accept) => *accept,
        Sdt::Node(children) => {
            let v = rest[0];
            for (guard, sub) in children {
                let matched = match guard {
                    SdtGuard::True => true,
                    SdtGuard::Equal(r) => v == ref_value(r, prefix_values, suffix_values),
                    SdtGuard::NotEqualAll(rs) => rs
                        .iter()
                        .all(|r| v != ref_value(r, prefix_values, suffix_values)),
                };
                if matched {
                    let mut svals = suffix_values.to_vec();
                    svals.push(v);
                    return classify(sub, prefix_values, &svals, &rest[1..]);
                }
            }
            unreachable!("canonical SDT nodes are exhaustive");
        }
    }
}

// ---------------------------------------------------------------------------
// Tree queries
// ---------------------------------------------------------------------------

struct TreeQuery<'a, O: MembershipOracle> {
    oracle: &'a mut O,
    alphabet: &'a Alphabet,
    suffix: &'a SymbolicSuffix,
    prefix_values: Vec<DataValue>,
    queries: usize,
}

/// Performs the tree query for `prefix` and `suffix`, returning the canonical
/// SDT and the number of membership queries issued.
pub fn tree_query<O: MembershipOracle>(
    oracle: &mut O,
    alphabet: &Alphabet,
    prefix: &Word,
    suffix: &SymbolicSuffix,
) -> (Sdt, usize) {
    let mut tq = TreeQuery {
        oracle,
        alphabet,
        suffix,
        prefix_values: prefix.data_values(),
        queries: 0,
    };
    let mut word = prefix.clone();
    let mut chosen = Vec::new();
    let sdt = tq.build(0, &mut word, &mut chosen);
    (sdt, tq.queries)
}

impl<O: MembershipOracle> TreeQuery<'_, O> {
    fn build(&mut self, idx: usize, word: &mut Word, chosen: &mut Vec<DataValue>) -> Sdt {
        if idx == self.suffix.len() {
            self.queries += 1;
            return Sdt::Leaf(self.oracle.membership(word));
        }
        let action = self.suffix.actions()[idx];
        if self.alphabet.arity(action) == 0 {
            word.push(DataSymbol {
                action,
                value: None,
            });
            let sub = self.build(idx + 1, word, chosen);
            word.pop();
            return sub;
        }
        let param1 = chosen.len() + 1;
        match self.suffix.restriction(param1) {
            ParamRestriction::Fresh => {
                let v = crate::theory::fresh_value_in(&word.data_values());
                let sub = self.child(idx, action, v, word, chosen);
                Sdt::Node(vec![(SdtGuard::True, sub)])
            }
            ParamRestriction::EqualsParam(j) => {
                let v = chosen[j - 1];
                let sub = self.child(idx, action, v, word, chosen);
                Sdt::Node(vec![(SdtGuard::True, sub)])
            }
            ParamRestriction::Unrestricted => {
                let candidates = potential_values_in(&word.data_values());
                let mut subs: Vec<(DataValue, Sdt)> = Vec::new();
                for &v in &candidates {
                    let sub = self.child(idx, action, v, word, chosen);
                    subs.push((v, sub));
                }
                let (_, fresh_sub) = subs.pop().expect("fresh candidate always present");
                let mut kept: Vec<(SdtRef, Sdt)> = Vec::new();
                for (v, sub) in subs {
                    if self.merge_ok(&sub, &fresh_sub, idx, v, word, chosen) {
                        continue;
                    }
                    kept.push((self.canonical_ref(v, chosen), sub));
                }
                kept.sort_by(|a, b| a.0.cmp(&b.0));
                let else_guard = if kept.is_empty() {
                    SdtGuard::True
                } else {
                    SdtGuard::NotEqualAll(kept.iter().map(|(r, _)| *r).collect())
                };
                let mut children: Vec<(SdtGuard, Sdt)> = kept
                    .into_iter()
                    .map(|(r, sub)| (SdtGuard::Equal(r), sub))
                    .collect();
                children.push((else_guard, fresh_sub));
                Sdt::Node(children)
            }
        }
    }

    fn child(
        &mut self,
        idx: usize,
        action: crate::words::ActionId,
        v: DataValue,
        word: &mut Word,
        chosen: &mut Vec<DataValue>,
    ) -> Sdt {
        word.push(DataSymbol {
            action,
            value: Some(v),
        });
        chosen.push(v);
        let sub = self.build(idx + 1, word, chosen);
        chosen.pop();
        word.pop();
        sub
    }

    /// An equality branch merges into the else branch iff the fresh subtree,
    /// read as a function, reproduces every recorded outcome of the branch.
    fn merge_ok(
        &self,
        sub: &Sdt,
        fresh_sub: &Sdt,
        idx: usize,
        v: DataValue,
        word: &Word,
        chosen: &[DataValue],
    ) -> bool {
        let action = self.suffix.actions()[idx];
        let mut ctx_word = word.extended(DataSymbol {
            action,
            value: Some(v),
        });
        let mut ctx_chosen = chosen.to_vec();
        ctx_chosen.push(v);
        let mut insts = Vec::new();
        self.enumerate_rest(idx + 1, &mut ctx_word, &mut ctx_chosen, &mut Vec::new(), &mut insts);
        let svals = ctx_chosen;
        insts.iter().all(|inst| {
            classify(sub, &self.prefix_values, &svals, inst)
                == classify(fresh_sub, &self.prefix_values, &svals, inst)
        })
    }

    /// Enumerates the parameter values of the remaining suffix positions,
    /// honoring restrictions, under the given context.
    fn enumerate_rest(
        &self,
        idx: usize,
        word: &mut Word,
        chosen: &mut Vec<DataValue>,
        acc: &mut Vec<DataValue>,
        out: &mut Vec<Vec<DataValue>>,
    ) {
        if idx == self.suffix.len() {
            out.push(acc.clone());
            return;
        }
        let action = self.suffix.actions()[idx];
        if self.alphabet.arity(action) == 0 {
            word.push(DataSymbol {
                action,
                value: None,
            });
            self.enumerate_rest(idx + 1, word, chosen, acc, out);
            word.pop();
            return;
        }
        let param1 = chosen.len() + 1;
        let candidates = match self.suffix.restriction(param1) {
            ParamRestriction::Unrestricted => potential_values_in(&word.data_values()),
            ParamRestriction::Fresh => vec![crate::theory::fresh_value_in(&word.data_values())],
            ParamRestriction::EqualsParam(j) => vec![chosen[j - 1]],
        };
        for v in candidates {
            word.push(DataSymbol {
                action,
                value: Some(v),
            });
            chosen.push(v);
            acc.push(v);
            self.enumerate_rest(idx + 1, word, chosen, acc, out);
            acc.pop();
            chosen.pop();
            word.pop();
        }
    }

    /// Canonical reference for a candidate value: the earliest suffix
    /// parameter holding it, else the smallest prefix register.
    fn canonical_ref(&self, v: DataValue, chosen: &[DataValue]) -> SdtRef {
        if let Some(j) = chosen.iter().position(|&c| c == v) {
            return SdtRef::Param(j + 1);
        }
        let i = self
            .prefix_values
            .iter()
            .position(|&pv| pv == v)
            .expect("candidate value must occur in the context");
        SdtRef::Register(i + 1)
    }
}

/// Structural SDT equivalence (`T ≡ T'`). Canonical construction makes this
/// coincide with path-set equality.
pub fn equivalent(a: &Sdt, b: &Sdt) -> bool {
    a == b
}

// ---------------------------------------------------------------------------
// Initial guards
// ---------------------------------------------------------------------------

/// Collects the root-level guards of the given SDTs (all for suffixes whose
/// first action is the same arity-1 action), forms the satisfiable
/// conjunctions over the prefix's potential values, and simplifies each to
/// an equality literal or a conjunction of disequalities. The result
/// partitions the parameter space after the prefix; this is asserted.
pub fn initial_guards(prefix_values: &[DataValue], sdts: &[&Sdt]) -> Vec<Guard> {
    let candidates = potential_values_in(prefix_values);
    let mut guards: Vec<Guard> = Vec::new();
    for &d in &candidates {
        let mut eq_regs: BTreeSet<usize> = BTreeSet::new();
        let mut neq_regs: BTreeSet<usize> = BTreeSet::new();
        for sdt in sdts {
            if let Sdt::Node(children) = sdt {
                let mut matched = false;
                for (guard, _) in children {
                    let hit = match guard {
                        SdtGuard::True => true,
                        SdtGuard::Equal(SdtRef::Register(i)) => d == prefix_values[i - 1],
                        SdtGuard::NotEqualAll(rs) => rs.iter().all(|r| match r {
                            SdtRef::Register(i) => d != prefix_values[i - 1],
                            SdtRef::Param(_) => true,
                        }),
                        SdtGuard::Equal(SdtRef::Param(_)) => {
                            unreachable!("root guards cannot reference parameters")
                        }
                    };
                    if hit {
                        match guard {
                            SdtGuard::Equal(SdtRef::Register(i)) => {
                                eq_regs.insert(*i);
                            }
                            SdtGuard::NotEqualAll(rs) => {
                                for r in rs {
                                    if let SdtRef::Register(i) = r {
                                        neq_regs.insert(*i);
                                    }
                                }
                            }
                            _ => {}
                        }
                        matched = true;
                        break;
                    }
                }
                assert!(matched, "SDT root guards must be exhaustive");
            }
        }
        let guard = if let Some(&i) = eq_regs.iter().next() {
            Guard::equal(i)
        } else {
            Guard::not_equal_all(neq_regs)
        };
        if !guards.contains(&guard) {
            guards.push(guard);
        }
    }
    // The guards must partition the parameter space at the prefix.
    for &d in &candidates {
        let valuation: BTreeMap<usize, DataValue> = prefix_values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i + 1, v))
            .collect();
        let hits = guards.iter().filter(|g| g.eval(&valuation, d)).count();
        assert_eq!(hits, 1, "initial guards do not partition at value {d}");
    }
    guards
}

// ---------------------------------------------------------------------------
// Register bijections
// ---------------------------------------------------------------------------

/// Applies a register renaming to all guards. Every register occurring in
/// the tree must be in the bijection's domain.
pub fn apply_bijection(gamma: &Bijection, sdt: &Sdt) -> Sdt {
    match sdt {
        Sdt::Leaf(a) => Sdt::Leaf(*a),
        Sdt::Node(children) => {
            let map_ref = |r: &SdtRef| match r {
                SdtRef::Register(i) => SdtRef::Register(
                    *gamma
                        .get(i)
                        .unwrap_or_else(|| panic!("register x{i} outside the bijection domain")),
                ),
                SdtRef::Param(j) => SdtRef::Param(*j),
            };
            let mut eq: Vec<(SdtRef, Sdt)> = Vec::new();
            let mut rest: Vec<(SdtGuard, Sdt)> = Vec::new();
            for (guard, sub) in children {
                let sub = apply_bijection(gamma, sub);
                match guard {
                    SdtGuard::Equal(r) => eq.push((map_ref(r), sub)),
                    SdtGuard::NotEqualAll(rs) => {
                        let mut rs: Vec<SdtRef> = rs.iter().map(map_ref).collect();
                        rs.sort();
                        rest.push((SdtGuard::NotEqualAll(rs), sub));
                    }
                    SdtGuard::True => rest.push((SdtGuard::True, sub)),
                }
            }
            eq.sort_by(|a, b| a.0.cmp(&b.0));
            let mut children: Vec<(SdtGuard, Sdt)> = eq
                .into_iter()
                .map(|(r, sub)| (SdtGuard::Equal(r), sub))
                .collect();
            children.extend(rest);
            Sdt::Node(children)
        }
    }
}

/// Searches for a bijection from the left memorable set to the right one
/// under which every left SDT becomes equivalent to its right counterpart.
/// Returns the lexicographically smallest mapping, or `None`.
pub fn find_bijection(left: &[&Sdt], right: &[&Sdt]) -> Option<Bijection> {
    assert_eq!(left.len(), right.len());
    let mut found = None;
    search_bijections(left, right, &mut |gamma| {
        found = Some(gamma.clone());
        true
    });
    found
}

/// All self-bijections of a word's SDT list (always contains the identity
/// when the list is self-consistent).
pub fn all_bijections(left: &[&Sdt], right: &[&Sdt]) -> Vec<Bijection> {
    let mut out = Vec::new();
    search_bijections(left, right, &mut |gamma| {
        out.push(gamma.clone());
        false
    });
    out
}

fn search_bijections(left: &[&Sdt], right: &[&Sdt], emit: &mut dyn FnMut(&Bijection) -> bool) {
    let mut dom: BTreeSet<usize> = BTreeSet::new();
    let mut range: BTreeSet<usize> = BTreeSet::new();
    for sdt in left {
        dom.extend(sdt.memorable());
    }
    for sdt in right {
        range.extend(sdt.memorable());
    }
    if dom.len() != range.len() {
        return;
    }
    let dom: Vec<usize> = dom.into_iter().collect();
    let range: Vec<usize> = range.into_iter().collect();
    let mut gamma = Bijection::new();
    let mut used = vec![false; range.len()];
    fn rec(
        dom: &[usize],
        range: &[usize],
        used: &mut Vec<bool>,
        gamma: &mut Bijection,
        left: &[&Sdt],
        right: &[&Sdt],
        emit: &mut dyn FnMut(&Bijection) -> bool,
    ) -> bool {
        if gamma.len() == dom.len() {
            let ok = left
                .iter()
                .zip(right)
                .all(|(l, r)| apply_bijection(gamma, l) == **r);
            return ok && emit(gamma);
        }
        let next = dom[gamma.len()];
        for (i, &candidate) in range.iter().enumerate() {
            if used[i] {
                continue;
            }
            used[i] = true;
            gamma.insert(next, candidate);
            if rec(dom, range, used, gamma, left, right, emit) {
                return true;
            }
            gamma.remove(&next);
            used[i] = false;
        }
        false
    }
    rec(&dom, &range, &mut used, &mut gamma, left, right, emit);
}
