//! Computation of parameter restrictions for symbolic suffixes.
//!
//! Three contexts produce restricted suffixes: suffixes taken from a
//! counterexample, suffixes prepended with a concrete symbol when a register
//! must be revealed (register closedness/consistency, transition
//! consistency (b)), and suffixes prepended when two words must stay
//! separated (location consistency, transition consistency (a)). Restricted
//! suffixes shrink the tree-query instantiation space; the learner verifies
//! after each refinement that the restriction kept its separating power and
//! falls back to the unrestricted suffix otherwise.

use crate::sdt::{Bijection, Sdt, SdtGuard, SdtRef};
use crate::theory::DataValue;
use crate::words::{
    actions_of, prepend, ActionId, Alphabet, ParamRestriction, SymbolicSuffix, Word,
};
use std::collections::BTreeSet;

/// Restrictions for the symbolic suffix of a counterexample tail: a
/// parameter is fresh if its value differs from every preceding value of
/// `prefix · tail`, and equal to an earlier fresh parameter whose value it
/// repeats.
pub fn from_counterexample(alphabet: &Alphabet, prefix: &Word, tail: &Word) -> SymbolicSuffix {
    let mut seen: Vec<DataValue> = prefix.data_values();
    let mut params: Vec<DataValue> = Vec::new();
    let mut restrictions = Vec::new();
    for s in tail.symbols() {
        if let Some(v) = s.value {
            let restriction = if !seen.contains(&v) {
                ParamRestriction::Fresh
            } else {
                match params.iter().position(|&p| p == v).filter(|&j| {
                    restrictions.get(j) == Some(&ParamRestriction::Fresh)
                }) {
                    Some(j) => ParamRestriction::EqualsParam(j + 1),
                    None => ParamRestriction::Unrestricted,
                }
            };
            restrictions.push(restriction);
            params.push(v);
            seen.push(v);
        }
    }
    actions_of(alphabet, tail).with_restrictions(restrictions)
}

/// True iff the subtree mentions one of the sought registers in any guard.
fn reveals(sdt: &Sdt, targets: &BTreeSet<usize>) -> bool {
    sdt.memorable().intersection(targets).next().is_some()
}

fn else_child(children: &[(SdtGuard, Sdt)]) -> &Sdt {
    children
        .iter()
        .find_map(|(g, sub)| match g {
            SdtGuard::NotEqualAll(_) | SdtGuard::True => Some(sub),
            SdtGuard::Equal(_) => None,
        })
        .expect("canonical nodes have an else branch")
}

/// Restrictions for `α(p1)·v̂`, prepending the concrete extension symbol
/// `α(d)` of `u·α(d)` to a suffix `v̂` whose tree query `t` (for `u·α(d)`)
/// reveals the sought `targets`.
///
/// The first parameter is fresh iff `d` does not occur in `u`. Each later
/// parameter keeps a fresh/equality restriction of `v̂`, becomes fresh when
/// the fresh branch at its level reveals a target, and becomes equal to an
/// earlier parameter when the equality branch for that parameter's value
/// reveals a target. The walk follows the else branch at unrestricted or
/// fresh levels and the chosen equality branch otherwise.
pub fn prepend_restricted(
    alphabet: &Alphabet,
    u: &Word,
    action: ActionId,
    d: Option<DataValue>,
    v: &SymbolicSuffix,
    t: &Sdt,
    targets: &BTreeSet<usize>,
    force_first_unrestricted: bool,
) -> SymbolicSuffix {
    let combined = prepend(alphabet, action, v);
    let mut restrictions = Vec::with_capacity(combined.param_count());
    let prepended_param = alphabet.arity(action) == 1;
    if prepended_param {
        let fresh = d.map(|d| !u.data_values().contains(&d)).unwrap_or(false);
        restrictions.push(if fresh && !force_first_unrestricted {
            ParamRestriction::Fresh
        } else {
            ParamRestriction::Unrestricted
        });
    }
    let shift = usize::from(prepended_param);
    let d_register = u.len() + 1; // position of d in u·α(d)
    let mut node = Some(t);
    for i in 1..=v.param_count() {
        let children = match node {
            Some(Sdt::Node(children)) => children,
            _ => {
                // The tree ended early; nothing to learn from it.
                restrictions.push(ParamRestriction::Unrestricted);
                continue;
            }
        };
        let (restriction, next) = match v.restriction(i) {
            ParamRestriction::Fresh => (ParamRestriction::Fresh, else_child(children)),
            ParamRestriction::EqualsParam(j) => {
                (ParamRestriction::EqualsParam(j + shift), else_child(children))
            }
            ParamRestriction::Unrestricted => {
                let else_sub = else_child(children);
                if reveals(else_sub, targets) {
                    (ParamRestriction::Fresh, else_sub)
                } else {
                    let mut chosen = None;
                    for (guard, sub) in children {
                        let target_param = match guard {
                            SdtGuard::Equal(SdtRef::Register(r))
                                if *r == d_register && prepended_param =>
                            {
                                Some(1)
                            }
                            SdtGuard::Equal(SdtRef::Param(j)) => Some(j + shift),
                            _ => None,
                        };
                        if let Some(j) = target_param {
                            if reveals(sub, targets)
                                && restrictions.get(j - 1) == Some(&ParamRestriction::Fresh)
                            {
                                chosen = Some((ParamRestriction::EqualsParam(j), sub));
                                break;
                            }
                        }
                    }
                    chosen.unwrap_or((ParamRestriction::Unrestricted, else_sub))
                }
            }
        };
        restrictions.push(restriction);
        node = Some(next);
    }
    combined.with_restrictions(restrictions)
}

// ---------------------------------------------------------------------------
// Separating restrictions (location consistency / transition consistency (a))
// ---------------------------------------------------------------------------

/// A guard reference normalized into the parameter space of the combined
/// suffix `α(p1)·v̂`, shared between the two words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Term {
    /// Parameter of the combined suffix (1-indexed).
    Q(usize),
    /// A register of the left word, identified by its data value.
    LeftConst(DataValue),
    /// A register of the right word with no left counterpart.
    RightConst(DataValue),
}

struct Side<'a> {
    /// Prefix proper (without the extension symbol).
    prefix: &'a Word,
    /// Value of the extension symbol.
    d: DataValue,
    /// Maps this side's proper registers to left-side registers, where the
    /// location equivalence identifies them.
    to_left: Option<&'a Bijection>,
    left_prefix: &'a Word,
}

impl Side<'_> {
    /// Normalizes one of this side's SDT references into the shared space.
    fn term(&self, r: &SdtRef) -> Term {
        match r {
            SdtRef::Param(j) => Term::Q(j + 1),
            SdtRef::Register(i) => {
                if *i == self.prefix.len() + 1 {
                    return Term::Q(1);
                }
                match self.to_left {
                    None => Term::LeftConst(self.prefix.value_at(*i).expect("arity-1 register")),
                    Some(gamma) => {
                        let left = gamma.iter().find(|(_, &right)| right == *i).map(|(&l, _)| l);
                        match left {
                            Some(l) => Term::LeftConst(
                                self.left_prefix.value_at(l).expect("arity-1 register"),
                            ),
                            None => {
                                Term::RightConst(self.prefix.value_at(*i).expect("arity-1 register"))
                            }
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum NormGuard {
    True,
    Eq(Term),
    Neq(Vec<Term>),
}

fn normalize(guard: &SdtGuard, side: &Side) -> NormGuard {
    match guard {
        SdtGuard::True => NormGuard::True,
        SdtGuard::Equal(r) => NormGuard::Eq(side.term(r)),
        SdtGuard::NotEqualAll(rs) => NormGuard::Neq(rs.iter().map(|r| side.term(r)).collect()),
    }
}

/// All guard paths of an SDT with their leaf labels, in canonical order.
fn paths(sdt: &Sdt) -> Vec<(Vec<SdtGuard>, bool)> {
    fn rec(sdt: &Sdt, acc: &mut Vec<SdtGuard>, out: &mut Vec<(Vec<SdtGuard>, bool)>) {
        match sdt {
            Sdt::Leaf(b) => out.push((acc.clone(), *b)),
            Sdt::Node(children) => {
                for (g, sub) in children {
                    acc.push(g.clone());
                    rec(sub, acc, out);
                    acc.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    rec(sdt, &mut Vec::new(), &mut out);
    out
}

/// Satisfiability of the conjunction of two normalized guard paths via
/// union-find over terms: equality literals merge classes, then a class may
/// not contain two distinct same-side constants, and no disequality may
/// connect a class to itself. Values are free otherwise.
fn jointly_satisfiable(left: &[NormGuard], right: &[NormGuard]) -> bool {
    let mut terms: Vec<Term> = Vec::new();
    let mut parent: Vec<usize> = Vec::new();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let mut id_of = |terms: &mut Vec<Term>, parent: &mut Vec<usize>, t: Term| -> usize {
        match terms.iter().position(|&x| x == t) {
            Some(i) => i,
            None => {
                terms.push(t);
                parent.push(terms.len() - 1);
                terms.len() - 1
            }
        }
    };
    let mut diseq: Vec<(usize, usize)> = Vec::new();
    for (level, guards) in left.iter().zip(right).enumerate() {
        let q = id_of(&mut terms, &mut parent, Term::Q(level + 2));
        for g in [guards.0, guards.1] {
            match g {
                NormGuard::True => {}
                NormGuard::Eq(t) => {
                    let t = id_of(&mut terms, &mut parent, *t);
                    let (a, b) = (find(&mut parent, q), find(&mut parent, t));
                    if a != b {
                        parent[a] = b;
                    }
                }
                NormGuard::Neq(ts) => {
                    for t in ts {
                        let t = id_of(&mut terms, &mut parent, *t);
                        diseq.push((q, t));
                    }
                }
            }
        }
    }
    // Two distinct constants of the same side cannot be equal.
    for i in 0..terms.len() {
        for j in i + 1..terms.len() {
            let conflict = matches!(
                (terms[i], terms[j]),
                (Term::LeftConst(a), Term::LeftConst(b)) if a != b
            ) || matches!(
                (terms[i], terms[j]),
                (Term::RightConst(a), Term::RightConst(b)) if a != b
            );
            if conflict && find(&mut parent, i) == find(&mut parent, j) {
                return false;
            }
        }
    }
    for (a, b) in diseq {
        if find(&mut parent, a) == find(&mut parent, b) {
            return false;
        }
    }
    true
}

#[allow(clippy::too_many_arguments)]
/// Restrictions for `α(p1)·v̂` that keep two words separated: for every
/// jointly satisfiable, differently labeled pair of paths through the two
/// tree queries, candidate restrictions are computed per the three rules
/// (shared freshness of the extension values, freshness under true or
/// disequality guards, and equality with an earlier fresh parameter); the
/// candidate with the fewest unrestricted parameters wins, ties broken by
/// the earliest path pair in canonical order. `None` if no separating pair
/// exists.
pub fn separating(
    alphabet: &Alphabet,
    action: ActionId,
    left_prefix: &Word,
    left_d: DataValue,
    right_prefix: &Word,
    right_d: DataValue,
    gamma_left_to_right: &Bijection,
    v: &SymbolicSuffix,
    t_left: &Sdt,
    t_right: &Sdt,
) -> Option<SymbolicSuffix> {
    let combined = prepend(alphabet, action, v);
    let left_side = Side {
        prefix: left_prefix,
        d: left_d,
        to_left: None,
        left_prefix,
    };
    let right_side = Side {
        prefix: right_prefix,
        d: right_d,
        to_left: Some(gamma_left_to_right),
        left_prefix,
    };
    let q1_fresh = !left_prefix.data_values().contains(&left_side.d)
        && !right_prefix.data_values().contains(&right_side.d);
    let left_paths = paths(t_left);
    let right_paths = paths(t_right);
    let mut best: Option<(usize, Vec<ParamRestriction>)> = None;
    for (lp, llabel) in &left_paths {
        for (rp, rlabel) in &right_paths {
            if llabel == rlabel {
                continue;
            }
            let ln: Vec<NormGuard> = lp.iter().map(|g| normalize(g, &left_side)).collect();
            let rn: Vec<NormGuard> = rp.iter().map(|g| normalize(g, &right_side)).collect();
            if !jointly_satisfiable(&ln, &rn) {
                continue;
            }
            let mut restrictions = Vec::with_capacity(combined.param_count());
            restrictions.push(if q1_fresh {
                ParamRestriction::Fresh
            } else {
                ParamRestriction::Unrestricted
            });
            for i in 1..=v.param_count() {
                let restriction = match v.restriction(i) {
                    ParamRestriction::Fresh => ParamRestriction::Fresh,
                    ParamRestriction::EqualsParam(j) => ParamRestriction::EqualsParam(j + 1),
                    ParamRestriction::Unrestricted => {
                        let l = &ln[i - 1];
                        let r = &rn[i - 1];
                        let loose =
                            |g: &NormGuard| matches!(g, NormGuard::True | NormGuard::Neq(_));
                        if loose(l) && loose(r) {
                            ParamRestriction::Fresh
                        } else if let NormGuard::Eq(Term::Q(j)) = l {
                            let compatible = matches!(r, NormGuard::Eq(Term::Q(k)) if k == j)
                                || loose(r);
                            if compatible
                                && restrictions.get(j - 1) == Some(&ParamRestriction::Fresh)
                            {
                                ParamRestriction::EqualsParam(*j)
                            } else {
                                ParamRestriction::Unrestricted
                            }
                        } else {
                            ParamRestriction::Unrestricted
                        }
                    }
                };
                restrictions.push(restriction);
            }
            let unrestricted = restrictions
                .iter()
                .filter(|r| **r == ParamRestriction::Unrestricted)
                .count();
            if best.as_ref().map(|(b, _)| unrestricted < *b).unwrap_or(true) {
                best = Some((unrestricted, restrictions));
            }
        }
    }
    best.map(|(_, restrictions)| combined.with_restrictions(restrictions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::oracle::SimOracle;
    use crate::sdt::tree_query;
    use crate::words::instantiations;

    fn stack_ab() -> Alphabet {
        Alphabet::parse(&[("push", 1), ("pop", 1)]).unwrap()
    }

    #[test]
    fn counterexample_restriction_worked_example() {
        let ab = stack_ab();
        let prefix = Word::parse(&ab, &[("push", 0)]);
        let tail = Word::parse(&ab, &[("push", 1), ("pop", 1), ("pop", 0)]);
        let restricted = from_counterexample(&ab, &prefix, &tail);
        assert_eq!(
            restricted.restrictions(),
            &[
                ParamRestriction::Fresh,
                ParamRestriction::EqualsParam(1),
                ParamRestriction::Unrestricted,
            ]
        );
        // Three membership queries instead of fifteen.
        assert_eq!(instantiations(&ab, &restricted, &prefix).len(), 3);
        assert_eq!(
            instantiations(&ab, &restricted.forget_restrictions(), &prefix).len(),
            15
        );
    }

    #[test]
    fn counterexample_restriction_all_fresh_and_collision() {
        let ab = stack_ab();
        let restricted = from_counterexample(
            &ab,
            &Word::empty(),
            &Word::parse(&ab, &[("push", 1), ("push", 2)]),
        );
        assert_eq!(
            restricted.restrictions(),
            &[ParamRestriction::Fresh, ParamRestriction::Fresh]
        );

        let restricted = from_counterexample(
            &ab,
            &Word::parse(&ab, &[("push", 0)]),
            &Word::parse(&ab, &[("pop", 0)]),
        );
        assert_eq!(restricted.restrictions(), &[ParamRestriction::Unrestricted]);
    }

    /// Appendix-B worked example: prefix α(0)α(1), suffix α(p)α(p), the tree
    /// query reveals x1 through guard p3=x1 under branch p2=x2.
    #[test]
    fn prepend_restriction_worked_example() {
        let ab = Alphabet::parse(&[("a", 1)]).unwrap();
        let a = ab.id_of("a").unwrap();
        let u = Word::parse(&ab, &[("a", 0)]);
        let v = SymbolicSuffix::unrestricted(&ab, vec![a, a]);
        // Tree query for α(0)α(1): [p1=x2 -> [p2=x1 -> +, else -> -],
        //                            else  -> [p2=x2 -> +, else -> -]]
        let t = Sdt::Node(vec![
            (
                SdtGuard::Equal(SdtRef::Register(2)),
                Sdt::Node(vec![
                    (SdtGuard::Equal(SdtRef::Register(1)), Sdt::Leaf(true)),
                    (
                        SdtGuard::NotEqualAll(vec![SdtRef::Register(1)]),
                        Sdt::Leaf(false),
                    ),
                ]),
            ),
            (
                SdtGuard::NotEqualAll(vec![SdtRef::Register(2)]),
                Sdt::Node(vec![
                    (SdtGuard::Equal(SdtRef::Register(2)), Sdt::Leaf(true)),
                    (
                        SdtGuard::NotEqualAll(vec![SdtRef::Register(2)]),
                        Sdt::Leaf(false),
                    ),
                ]),
            ),
        ]);
        let restricted = prepend_restricted(
            &ab,
            &u,
            a,
            Some(1),
            &v,
            &t,
            &BTreeSet::from([1]),
            false,
        );
        assert_eq!(
            restricted.restrictions(),
            &[
                ParamRestriction::Fresh,
                ParamRestriction::EqualsParam(1),
                ParamRestriction::Unrestricted,
            ]
        );
    }

    #[test]
    fn prepend_restriction_trivial_cases() {
        let ab = stack_ab();
        let pop = ab.id_of("pop").unwrap();
        let u = Word::parse(&ab, &[("push", 0), ("push", 1)]);
        let mut sim = SimOracle::new(models::stack(2));
        let v = SymbolicSuffix::unrestricted(&ab, vec![pop]);
        let extension = Word::parse(&ab, &[("push", 0), ("push", 1), ("pop", 1)]);
        let (t, _) = tree_query(&mut sim, &ab, &extension, &v);

        // No targets to reveal: everything stays as in v̂, the first
        // parameter per the freshness of d.
        let restricted =
            prepend_restricted(&ab, &u, pop, Some(1), &v, &t, &BTreeSet::new(), false);
        assert_eq!(
            restricted.restrictions(),
            &[ParamRestriction::Unrestricted, ParamRestriction::Unrestricted]
        );

        // Fresh d makes the first parameter fresh.
        let restricted =
            prepend_restricted(&ab, &u, pop, Some(5), &v, &t, &BTreeSet::new(), false);
        assert_eq!(restricted.restrictions()[0], ParamRestriction::Fresh);
    }

    /// Appendix-B location-consistency example (the two tree queries for
    /// prefixes α(0)α(1) and α(0) over suffix α(p2)α(p3)): the winning
    /// restriction is ⟨fresh(p1), fresh(p2), p3=p1⟩.
    #[test]
    fn separating_restriction_worked_example() {
        let ab = Alphabet::parse(&[("a", 1)]).unwrap();
        let a = ab.id_of("a").unwrap();
        let v = SymbolicSuffix::unrestricted(&ab, vec![a, a]);
        // Left word α(0)α(1) = u·α(d) with u = α(0), d = 1.
        let u_left = Word::parse(&ab, &[("a", 0)]);
        let t_left = Sdt::Node(vec![
            (
                SdtGuard::Equal(SdtRef::Register(2)),
                Sdt::Node(vec![
                    (SdtGuard::Equal(SdtRef::Register(1)), Sdt::Leaf(true)),
                    (
                        SdtGuard::NotEqualAll(vec![SdtRef::Register(1)]),
                        Sdt::Leaf(false),
                    ),
                ]),
            ),
            (
                SdtGuard::NotEqualAll(vec![SdtRef::Register(2)]),
                Sdt::Node(vec![
                    (SdtGuard::Equal(SdtRef::Register(2)), Sdt::Leaf(true)),
                    (
                        SdtGuard::NotEqualAll(vec![SdtRef::Register(2)]),
                        Sdt::Leaf(false),
                    ),
                ]),
            ),
        ]);
        // Right word α(0) = u'·α(d') with u' = ε, d' = 0; its only register
        // x1 is the prepended value. Both branches reject everywhere.
        let u_right = Word::empty();
        let t_right = Sdt::Node(vec![
            (
                SdtGuard::Equal(SdtRef::Register(1)),
                Sdt::Node(vec![(SdtGuard::True, Sdt::Leaf(false))]),
            ),
            (
                SdtGuard::NotEqualAll(vec![SdtRef::Register(1)]),
                Sdt::Node(vec![(SdtGuard::True, Sdt::Leaf(false))]),
            ),
        ]);
        let restricted = separating(
            &ab,
            a,
            &u_left,
            1,
            &u_right,
            0,
            &Bijection::new(),
            &v,
            &t_left,
            &t_right,
        )
        .expect("separating pair exists");
        assert_eq!(
            restricted.restrictions(),
            &[
                ParamRestriction::Fresh,
                ParamRestriction::Fresh,
                ParamRestriction::EqualsParam(1),
            ]
        );
    }

    #[test]
    fn separating_requires_a_differing_pair() {
        let ab = stack_ab();
        let push = ab.id_of("push").unwrap();
        let v = SymbolicSuffix::empty();
        let t = Sdt::Leaf(true);
        assert!(separating(
            &ab,
            push,
            &Word::empty(),
            0,
            &Word::empty(),
            0,
            &Bijection::new(),
            &v,
            &t,
            &t,
        )
        .is_none());
    }
}
