//! The classification tree and the learner's central state.
//!
//! Inner nodes carry symbolic suffixes, leaves carry sets of prefixes, and
//! every node has a representative prefix (the first word sifted down its
//! path). Children of an inner node represent equivalence classes of ≃ over
//! the node's ancestor suffixes: sifting matches a word against each child's
//! representative via a register bijection, in creation order, first match
//! wins.

use crate::automaton::Guard;
use crate::oracle::SimOracle;
use crate::sdt::{self, Bijection, Sdt};
use crate::theory::{fresh_value, DataValue};
use crate::words::{Alphabet, DataSymbol, SymbolicSuffix, Word};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::rc::Rc;

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub enum CtKind {
    Inner {
        suffix: SymbolicSuffix,
        children: Vec<NodeId>,
    },
    Leaf {
        members: Vec<Word>,
    },
}

#[derive(Debug, Clone)]
pub struct CtNode {
    pub parent: Option<NodeId>,
    /// First prefix sifted down this path.
    pub rep: Word,
    pub kind: CtKind,
}

#[derive(Debug, Clone)]
pub struct ClassTree {
    pub nodes: Vec<CtNode>,
}

pub const ROOT: NodeId = 0;

impl ClassTree {
    /// A tree with a single inner root labeled by the empty suffix.
    pub fn new() -> Self {
        ClassTree {
            nodes: vec![CtNode {
                parent: None,
                rep: Word::empty(),
                kind: CtKind::Inner {
                    suffix: SymbolicSuffix::empty(),
                    children: Vec::new(),
                },
            }],
        }
    }

    pub fn node(&self, id: NodeId) -> &CtNode {
        &self.nodes[id]
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes[id].kind, CtKind::Leaf { .. })
    }

    pub fn members(&self, id: NodeId) -> &[Word] {
        match &self.nodes[id].kind {
            CtKind::Leaf { members } => members,
            CtKind::Inner { .. } => panic!("members of an inner node"),
        }
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&i| self.is_leaf(i)).collect()
    }

    pub fn inner_count(&self) -> usize {
        self.nodes.len() - self.leaves().len()
    }

    /// Suffixes of the node (when inner) and of all its ancestors, root last.
    pub fn ancestor_suffixes(&self, id: NodeId) -> Vec<SymbolicSuffix> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(i) = cur {
            if let CtKind::Inner { suffix, .. } = &self.nodes[i].kind {
                out.push(suffix.clone());
            }
            cur = self.nodes[i].parent;
        }
        out
    }

    /// Lowest common ancestor of two distinct nodes.
    pub fn lca(&self, a: NodeId, b: NodeId) -> NodeId {
        assert_ne!(a, b, "lca of a node with itself");
        let mut seen = BTreeSet::new();
        let mut cur = Some(a);
        while let Some(i) = cur {
            seen.insert(i);
            cur = self.nodes[i].parent;
        }
        let mut cur = Some(b);
        while let Some(i) = cur {
            if seen.contains(&i) {
                return i;
            }
            cur = self.nodes[i].parent;
        }
        unreachable!("nodes of one tree always share the root")
    }

    pub fn suffix(&self, id: NodeId) -> &SymbolicSuffix {
        match &self.nodes[id].kind {
            CtKind::Inner { suffix, .. } => suffix,
            CtKind::Leaf { .. } => panic!("suffix of a leaf"),
        }
    }

    fn add_leaf(&mut self, parent: NodeId, rep: Word) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(CtNode {
            parent: Some(parent),
            rep,
            kind: CtKind::Leaf {
                members: Vec::new(),
            },
        });
        match &mut self.nodes[parent].kind {
            CtKind::Inner { children, .. } => children.push(id),
            CtKind::Leaf { .. } => panic!("leaf cannot have children"),
        }
        id
    }

    /// Indented dump: inner nodes show their suffix, leaves their members;
    /// short prefixes are marked with `*` (underlined in the figures).
    pub fn render_text(&self, alphabet: &Alphabet, sp: &BTreeSet<Word>) -> String {
        let mut out = String::new();
        self.render_node(ROOT, alphabet, sp, 0, &mut out);
        out
    }

    fn render_node(
        &self,
        id: NodeId,
        alphabet: &Alphabet,
        sp: &BTreeSet<Word>,
        indent: usize,
        out: &mut String,
    ) {
        let pad = "  ".repeat(indent);
        match &self.nodes[id].kind {
            CtKind::Inner { suffix, children } => {
                let _ = writeln!(out, "{pad}[{}]", suffix.render(alphabet));
                for &c in children {
                    self.render_node(c, alphabet, sp, indent + 1, out);
                }
            }
            CtKind::Leaf { members } => {
                let names: Vec<String> = members
                    .iter()
                    .map(|m| {
                        let mark = if sp.contains(m) { "*" } else { "" };
                        format!("{mark}{}", m.render(alphabet))
                    })
                    .collect();
                let _ = writeln!(out, "{pad}{{{}}}", names.join(", "));
            }
        }
    }

    pub fn render_dot(&self, alphabet: &Alphabet, sp: &BTreeSet<Word>) -> String {
        let mut out = String::from("digraph ct {\n  node [shape=box];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            match &n.kind {
                CtKind::Inner { suffix, .. } => {
                    let _ = writeln!(out, "  n{i} [label=\"{}\"];", suffix.render(alphabet));
                }
                CtKind::Leaf { members } => {
                    let names: Vec<String> = members
                        .iter()
                        .map(|m| {
                            let mark = if sp.contains(m) { "*" } else { "" };
                            format!("{mark}{}", m.render(alphabet))
                        })
                        .collect();
                    let _ = writeln!(
                        out,
                        "  n{i} [style=rounded, label=\"{}\"];",
                        names.join("\\n")
                    );
                }
            }
            if let Some(p) = n.parent {
                let _ = writeln!(out, "  n{p} -> n{i};");
            }
        }
        out.push_str("}\n");
        out
    }
}

impl Default for ClassTree {
    fn default() -> Self {
        Self::new()
    }
}

/// The learner's mutable state: classification tree, short prefixes, the
/// prefix set U with its leaf map, and the SDT cache. Strictly
/// single-threaded; the learner owns the oracle for the duration of a run.
pub struct LearnerState<'o> {
    pub alphabet: Alphabet,
    pub tree: ClassTree,
    pub sp: BTreeSet<Word>,
    pub prefixes: BTreeSet<Word>,
    pub leaf_of: HashMap<Word, NodeId>,
    cache: HashMap<(Word, SymbolicSuffix), Rc<Sdt>>,
    pub oracle: &'o mut SimOracle,
    pub restrictions_enabled: bool,
}

impl<'o> LearnerState<'o> {
    pub fn new(oracle: &'o mut SimOracle, restrictions_enabled: bool) -> Self {
        let alphabet = oracle.sul().alphabet.clone();
        LearnerState {
            alphabet,
            tree: ClassTree::new(),
            sp: BTreeSet::new(),
            prefixes: BTreeSet::new(),
            leaf_of: HashMap::new(),
            cache: HashMap::new(),
            oracle,
            restrictions_enabled,
        }
    }

    /// Cached tree query.
    pub fn sdt(&mut self, u: &Word, v: &SymbolicSuffix) -> Rc<Sdt> {
        let key = (u.clone(), v.clone());
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let (sdt, queries) = sdt::tree_query(self.oracle, &self.alphabet, u, v);
        self.oracle.stats.note_tree_query(queries);
        let rc = Rc::new(sdt);
        self.cache.insert(key, rc.clone());
        rc
    }

    pub fn sdts(&mut self, u: &Word, suffixes: &[SymbolicSuffix]) -> Vec<Rc<Sdt>> {
        suffixes.iter().map(|v| self.sdt(u, v)).collect()
    }

    /// Memorable registers of `u` over a set of suffixes.
    pub fn memorable(&mut self, u: &Word, suffixes: &[SymbolicSuffix]) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for v in suffixes {
            out.extend(self.sdt(u, v).memorable());
        }
        out
    }

    /// Bijection making `left`'s SDTs equivalent to `right`'s over the given
    /// suffixes, if one exists.
    pub fn bijection(
        &mut self,
        left: &Word,
        right: &Word,
        suffixes: &[SymbolicSuffix],
    ) -> Option<Bijection> {
        let ls = self.sdts(left, suffixes);
        let rs = self.sdts(right, suffixes);
        let lr: Vec<&Sdt> = ls.iter().map(|s| s.as_ref()).collect();
        let rr: Vec<&Sdt> = rs.iter().map(|s| s.as_ref()).collect();
        sdt::find_bijection(&lr, &rr)
    }

    /// All self-bijections of `u` over the given suffixes.
    pub fn self_bijections(&mut self, u: &Word, suffixes: &[SymbolicSuffix]) -> Vec<Bijection> {
        let ss = self.sdts(u, suffixes);
        let refs: Vec<&Sdt> = ss.iter().map(|s| s.as_ref()).collect();
        sdt::all_bijections(&refs, &refs)
    }

    /// Inserts a prefix into the tree starting at `from`, creating a new leaf
    /// when no child class matches. Returns the leaf.
    pub fn sift(&mut self, u: &Word, from: NodeId) -> NodeId {
        let mut node = from;
        loop {
            match &self.tree.nodes[node].kind {
                CtKind::Leaf { .. } => {
                    if let CtKind::Leaf { members } = &mut self.tree.nodes[node].kind {
                        if !members.contains(u) {
                            members.push(u.clone());
                        }
                    }
                    self.leaf_of.insert(u.clone(), node);
                    self.prefixes.insert(u.clone());
                    return node;
                }
                CtKind::Inner { children, .. } => {
                    let children = children.clone();
                    let ancestors = self.tree.ancestor_suffixes(node);
                    let mut target = None;
                    for child in children {
                        let rep = self.tree.nodes[child].rep.clone();
                        if self.bijection(u, &rep, &ancestors).is_some() {
                            target = Some(child);
                            break;
                        }
                    }
                    node = match target {
                        Some(child) => child,
                        None => self.tree.add_leaf(node, u.clone()),
                    };
                }
            }
        }
    }

    /// Promotes `u` to a short prefix and sifts one extension per action and
    /// initial guard, with representative data values.
    pub fn expand(&mut self, u: &Word) {
        self.sp.insert(u.clone());
        for action in self.alphabet.ids() {
            for guard in self.initial_guards_of(u, action) {
                let w = self.extension_word(u, action, &guard);
                self.sift(&w, ROOT);
            }
        }
    }

    /// Replaces a leaf by an inner node labeled `suffix` (representative
    /// preserved) and re-sifts its members in insertion order.
    pub fn refine(&mut self, leaf: NodeId, suffix: SymbolicSuffix) {
        let members = match &mut self.tree.nodes[leaf].kind {
            CtKind::Leaf { members } => std::mem::take(members),
            CtKind::Inner { .. } => panic!("refine of an inner node"),
        };
        self.tree.nodes[leaf].kind = CtKind::Inner {
            suffix,
            children: Vec::new(),
        };
        for m in members {
            self.sift(&m, leaf);
        }
    }

    /// Initial guards of `u` for `action`: the satisfiable conjunctions of
    /// root guards of the ancestor-suffix SDTs whose first action matches.
    /// Arity-0 actions are unguarded.
    pub fn initial_guards_of(&mut self, u: &Word, action: usize) -> Vec<Guard> {
        if self.alphabet.arity(action) == 0 {
            return vec![Guard::always()];
        }
        let leaf = *self.leaf_of.get(u).expect("prefix not sifted");
        let suffixes: Vec<SymbolicSuffix> = self
            .tree
            .ancestor_suffixes(leaf)
            .into_iter()
            .filter(|v| v.first_action() == Some(action))
            .collect();
        if suffixes.is_empty() {
            return vec![Guard::always()];
        }
        let sdts = self.sdts(u, &suffixes);
        let refs: Vec<&Sdt> = sdts.iter().map(|s| s.as_ref()).collect();
        sdt::initial_guards(&u.data_values(), &refs)
    }

    /// A representative data value satisfying the guard after `u`: the
    /// register's value for an entailed equality, the fresh value otherwise.
    pub fn representative_value(&self, u: &Word, guard: &Guard) -> DataValue {
        assert!(guard.satisfiable(), "unsatisfiable guard");
        match guard.entailed_equality() {
            Some(register) => u
                .value_at(register)
                .expect("guard register within the prefix"),
            None => fresh_value(u),
        }
    }

    /// The one-symbol extension `u·α(repr(u, g))` (or `u·α` for arity 0).
    pub fn extension_word(&self, u: &Word, action: usize, guard: &Guard) -> Word {
        let value = (self.alphabet.arity(action) == 1)
            .then(|| self.representative_value(u, guard));
        u.extended(DataSymbol { action, value })
    }

    /// Short prefixes of a leaf in canonical order.
    pub fn short_prefixes_of(&self, leaf: NodeId) -> Vec<Word> {
        let mut out: Vec<Word> = self
            .tree
            .members(leaf)
            .iter()
            .filter(|m| self.sp.contains(*m))
            .cloned()
            .collect();
        out.sort();
        out
    }

    /// The canonical short prefix anchoring a leaf (used for hypothesis
    /// construction).
    pub fn anchor_of(&self, leaf: NodeId) -> Option<Word> {
        self.short_prefixes_of(leaf).into_iter().next()
    }

    /// Valuation of a word's registers (position -> value).
    pub fn valuation_of(u: &Word) -> BTreeMap<usize, DataValue> {
        u.symbols()
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.value.map(|v| (i + 1, v)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::words::actions_of;

    fn state(sim: &mut SimOracle) -> LearnerState<'_> {
        LearnerState::new(sim, true)
    }

    #[test]
    fn sift_separates_accepting_from_rejecting() {
        let mut sim = SimOracle::new(models::stack(2));
        let mut st = state(&mut sim);
        let ab = st.alphabet.clone();
        let eps = Word::empty();
        let leaf_eps = st.sift(&eps, ROOT);
        let pop0 = Word::parse(&ab, &[("pop", 0)]);
        let leaf_pop = st.sift(&pop0, ROOT);
        assert_ne!(leaf_eps, leaf_pop, "pop(0) must reach a new (sink) leaf");
        let push0 = Word::parse(&ab, &[("push", 0)]);
        assert_eq!(st.sift(&push0, ROOT), leaf_eps);
        // Sifting twice is idempotent.
        let again = st.sift(&push0, ROOT);
        assert_eq!(again, leaf_eps);
        assert_eq!(st.tree.members(leaf_eps).len(), 2);
    }

    #[test]
    fn expand_sifts_one_extension_per_guard() {
        let mut sim = SimOracle::new(models::stack(2));
        let mut st = state(&mut sim);
        let ab = st.alphabet.clone();
        st.sift(&Word::empty(), ROOT);
        st.expand(&Word::empty());
        assert!(st.prefixes.contains(&Word::parse(&ab, &[("push", 0)])));
        assert!(st.prefixes.contains(&Word::parse(&ab, &[("pop", 0)])));
        assert_eq!(st.prefixes.len(), 3);
    }

    #[test]
    fn refine_splits_on_separating_suffix() {
        let mut sim = SimOracle::new(models::stack(2));
        let mut st = state(&mut sim);
        let ab = st.alphabet.clone();
        let eps = Word::empty();
        let push0 = Word::parse(&ab, &[("push", 0)]);
        let leaf = st.sift(&eps, ROOT);
        st.sift(&push0, ROOT);
        assert_eq!(st.leaf_of[&push0], leaf);
        // push(p1) push(p2) separates ε from push(0).
        let suffix = actions_of(&ab, &Word::parse(&ab, &[("push", 0), ("push", 1)]));
        st.refine(leaf, suffix);
        assert_ne!(st.leaf_of[&eps], st.leaf_of[&push0]);
        // The refined node keeps its representative.
        assert_eq!(st.tree.node(leaf).rep, eps);
    }

    #[test]
    fn representative_value_examples() {
        let mut sim = SimOracle::new(models::stack(2));
        let st = state(&mut sim);
        let ab = st.alphabet.clone();
        let push0 = Word::parse(&ab, &[("push", 0)]);
        assert_eq!(st.representative_value(&push0, &Guard::equal(1)), 0);
        assert_eq!(st.representative_value(&push0, &Guard::not_equal_all([1])), 1);
        assert_eq!(st.representative_value(&Word::empty(), &Guard::always()), 0);
    }

    #[test]
    fn lca_examples() {
        let mut sim = SimOracle::new(models::stack(2));
        let mut st = state(&mut sim);
        let ab = st.alphabet.clone();
        let eps = Word::empty();
        let push0 = Word::parse(&ab, &[("push", 0)]);
        let pop0 = Word::parse(&ab, &[("pop", 0)]);
        let leaf = st.sift(&eps, ROOT);
        st.sift(&push0, ROOT);
        let sink = st.sift(&pop0, ROOT);
        assert_eq!(st.tree.lca(leaf, sink), ROOT);
        let suffix = actions_of(&ab, &Word::parse(&ab, &[("push", 0), ("push", 1)]));
        st.refine(leaf, suffix);
        let a = st.leaf_of[&eps];
        let b = st.leaf_of[&push0];
        assert_eq!(st.tree.lca(a, b), leaf);
        assert_eq!(st.tree.lca(a, sink), ROOT);
    }

    #[test]
    fn render_marks_short_prefixes()  {
        let mut sim = SimOracle::new(models::stack(2));
        let mut st = state(&mut sim);
        st.sift(&Word::empty(), ROOT);
        st.expand(&Word::empty());
        let text = st.tree.render_text(&st.alphabet.clone(), &st.sp);
        assert!(text.contains("*ε"));
        assert!(text.contains("push(0)"));
    }
}
