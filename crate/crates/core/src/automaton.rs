//! Register automata: representation, Def.-1 step semantics, the JSON model
//! format, and DOT export.
//!
//! The interpreter treats automata as acceptors with an implicit rejecting
//! sink: when no transition fires, the run dies and the word is rejected.
//! Automata are required to be determinate (no word has both an accepting
//! and a rejecting run) but may be nondeterministic, so `step` returns a set
//! of successor states.

use crate::theory::DataValue;
use crate::words::{ActionDecl, ActionId, Alphabet, DataSymbol, Word};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

pub type LocId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GuardOp {
    Eq,
    Neq,
}

/// One literal `p <op> x_register` of a transition guard. The transition
/// parameter is always one side; register-register literals do not occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GuardLit {
    pub op: GuardOp,
    pub register: usize,
}

/// A conjunction of guard literals; empty means `true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Guard {
    literals: Vec<GuardLit>,
}

impl Guard {
    pub fn always() -> Self {
        Guard::default()
    }

    pub fn equal(register: usize) -> Self {
        Guard {
            literals: vec![GuardLit {
                op: GuardOp::Eq,
                register,
            }],
        }
    }

    pub fn not_equal_all(registers: impl IntoIterator<Item = usize>) -> Self {
        let mut literals: Vec<GuardLit> = registers
            .into_iter()
            .map(|register| GuardLit {
                op: GuardOp::Neq,
                register,
            })
            .collect();
        literals.sort();
        literals.dedup();
        Guard { literals }
    }

    pub fn new(mut literals: Vec<GuardLit>) -> Self {
        literals.sort();
        literals.dedup();
        Guard { literals }
    }

    pub fn literals(&self) -> &[GuardLit] {
        &self.literals
    }

    pub fn is_always(&self) -> bool {
        self.literals.is_empty()
    }

    /// The register forced equal to the parameter, if the guard entails one.
    pub fn entailed_equality(&self) -> Option<usize> {
        self.literals
            .iter()
            .find(|l| l.op == GuardOp::Eq)
            .map(|l| l.register)
    }

    /// Satisfiability under the equality theory. Registers are free, so a
    /// conjunction is unsatisfiable only if some register is constrained both
    /// equal and unequal to the parameter.
    pub fn satisfiable(&self) -> bool {
        for l in &self.literals {
            if l.op == GuardOp::Eq
                && self
                    .literals
                    .iter()
                    .any(|m| m.op == GuardOp::Neq && m.register == l.register)
            {
                return false;
            }
        }
        true
    }

    pub fn eval(&self, valuation: &BTreeMap<usize, DataValue>, param: DataValue) -> bool {
        self.literals.iter().all(|l| {
            let reg = valuation.get(&l.register).copied();
            match (l.op, reg) {
                (GuardOp::Eq, Some(v)) => v == param,
                (GuardOp::Neq, Some(v)) => v != param,
                // A guard over a register the location does not hold cannot fire.
                _ => false,
            }
        })
    }

    pub fn registers(&self) -> impl Iterator<Item = usize> + '_ {
        self.literals.iter().map(|l| l.register)
    }

    pub fn render(&self) -> String {
        if self.literals.is_empty() {
            return "true".to_string();
        }
        self.literals
            .iter()
            .map(|l| match l.op {
                GuardOp::Eq => format!("p==x{}", l.register),
                GuardOp::Neq => format!("p!=x{}", l.register),
            })
            .collect::<Vec<_>>()
            .join(" & ")
    }
}

/// Source of an assignment: a register of the source location or the
/// transition parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AssignSrc {
    Register(usize),
    Param,
}

/// Parallel register update: all sources are read in the pre-state.
pub type Assignment = BTreeMap<usize, AssignSrc>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub from: LocId,
    pub action: ActionId,
    pub guard: Guard,
    pub assign: Assignment,
    pub to: LocId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub name: String,
    pub registers: BTreeSet<usize>,
    pub accepting: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterAutomaton {
    pub alphabet: Alphabet,
    pub locations: Vec<Location>,
    pub initial: LocId,
    pub transitions: Vec<Transition>,
}

/// A state of a register automaton: location plus a valuation that is total
/// on the location's registers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RAState {
    pub location: LocId,
    pub valuation: BTreeMap<usize, DataValue>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("unknown location {0:?}")]
    UnknownLocation(String),
    #[error("unknown action {0:?}")]
    UnknownAction(String),
    #[error("{0}")]
    Alphabet(#[from] crate::words::AlphabetError),
    #[error("bad register name {0:?} (expected x1, x2, ...)")]
    BadRegister(String),
    #[error("transition {0}: {1}")]
    BadTransition(usize, String),
    #[error("initial location must have no registers, but {0:?} has {1}")]
    InitialHasRegisters(String, usize),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("action id {0} not in the alphabet")]
    UnknownAction(ActionId),
}

impl RegisterAutomaton {
    pub fn initial_state(&self) -> RAState {
        RAState {
            location: self.initial,
            valuation: BTreeMap::new(),
        }
    }

    /// All successor states reachable by one step on `symbol`. An empty set
    /// means the run falls into the implicit rejecting sink.
    pub fn step(&self, state: &RAState, symbol: DataSymbol) -> Result<Vec<RAState>, StepError> {
        if symbol.action >= self.alphabet.len() {
            return Err(StepError::UnknownAction(symbol.action));
        }
        let mut out = Vec::new();
        for t in &self.transitions {
            if t.from != state.location || t.action != symbol.action {
                continue;
            }
            let fires = match symbol.value {
                Some(d) => t.guard.eval(&state.valuation, d),
                None => t.guard.is_always(),
            };
            if !fires {
                continue;
            }
            let mut valuation = BTreeMap::new();
            for (&target, &src) in &t.assign {
                let v = match src {
                    AssignSrc::Param => symbol.value,
                    AssignSrc::Register(r) => state.valuation.get(&r).copied(),
                };
                match v {
                    Some(v) => {
                        valuation.insert(target, v);
                    }
                    // Source unavailable (missing register value or arity-0
                    // parameter): the transition cannot produce a state.
                    None => {
                        valuation.clear();
                        break;
                    }
                }
            }
            if valuation.len() != t.assign.len() {
                continue;
            }
            let next = RAState {
                location: t.to,
                valuation,
            };
            if !out.contains(&next) {
                out.push(next);
            }
        }
        Ok(out)
    }

    /// The set of states reachable over `w` from the initial state.
    pub fn run(&self, w: &Word) -> Vec<RAState> {
        let mut states = vec![self.initial_state()];
        for &symbol in w.symbols() {
            let mut next = Vec::new();
            for s in &states {
                for n in self.step(s, symbol).expect("word outside the alphabet") {
                    if !next.contains(&n) {
                        next.push(n);
                    }
                }
            }
            states = next;
            if states.is_empty() {
                break;
            }
        }
        states
    }

    /// Acceptance: some run over `w` ends in an accepting location. Requires
    /// the automaton to be determinate.
    pub fn accepts(&self, w: &Word) -> bool {
        self.run(w)
            .iter()
            .any(|s| self.locations[s.location].accepting)
    }

    pub fn location_count(&self) -> usize {
        self.locations.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn max_registers(&self) -> usize {
        self.locations
            .iter()
            .map(|l| l.registers.len())
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.locations[self.initial].registers.is_empty() {
            return Err(ModelError::InitialHasRegisters(
                self.locations[self.initial].name.clone(),
                self.locations[self.initial].registers.len(),
            ));
        }
        for (i, t) in self.transitions.iter().enumerate() {
            let from = &self.locations[t.from];
            let to = &self.locations[t.to];
            let arity = self.alphabet.arity(t.action);
            if arity == 0 && !t.guard.is_always() {
                return Err(ModelError::BadTransition(
                    i,
                    "guard mentions the parameter of an arity-0 action".into(),
                ));
            }
            for r in t.guard.registers() {
                if !from.registers.contains(&r) {
                    return Err(ModelError::BadTransition(
                        i,
                        format!("guard register x{r} not held by {}", from.name),
                    ));
                }
            }
            if !t.guard.satisfiable() {
                return Err(ModelError::BadTransition(i, "unsatisfiable guard".into()));
            }
            for r in &to.registers {
                match t.assign.get(r) {
                    None => {
                        return Err(ModelError::BadTransition(
                            i,
                            format!("assignment not total: x{r} of {} unassigned", to.name),
                        ))
                    }
                    Some(AssignSrc::Param) if arity == 0 => {
                        return Err(ModelError::BadTransition(
                            i,
                            "assignment reads the parameter of an arity-0 action".into(),
                        ))
                    }
                    Some(AssignSrc::Register(s)) if !from.registers.contains(s) => {
                        return Err(ModelError::BadTransition(
                            i,
                            format!("assignment source x{s} not held by {}", from.name),
                        ));
                    }
                    _ => {}
                }
            }
            for target in t.assign.keys() {
                if !to.registers.contains(target) {
                    return Err(ModelError::BadTransition(
                        i,
                        format!("assignment target x{target} not a register of {}", to.name),
                    ));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON model format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RawModel {
    alphabet: Vec<ActionDecl>,
    locations: Vec<RawLocation>,
    initial: String,
    transitions: Vec<RawTransition>,
}

#[derive(Serialize, Deserialize)]
struct RawLocation {
    name: String,
    #[serde(default)]
    registers: Vec<String>,
    accepting: bool,
}

#[derive(Serialize, Deserialize)]
struct RawTransition {
    from: String,
    action: String,
    #[serde(default)]
    guard: Vec<RawLiteral>,
    #[serde(default)]
    assign: BTreeMap<String, String>,
    to: String,
}

#[derive(Serialize, Deserialize)]
struct RawLiteral {
    lhs: String,
    op: String,
    rhs: String,
}

fn parse_register(name: &str) -> Result<usize, ModelError> {
    name.strip_prefix('x')
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .ok_or_else(|| ModelError::BadRegister(name.to_string()))
}

fn parse_operand(name: &str) -> Result<Option<usize>, ModelError> {
    if name == "p" {
        Ok(None)
    } else {
        parse_register(name).map(Some)
    }
}

/// Parses and validates the JSON model format.
pub fn load(text: &str) -> Result<RegisterAutomaton, ModelError> {
    let raw: RawModel = serde_json::from_str(text)
        .map_err(|e| ModelError::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let alphabet = Alphabet::new(raw.alphabet)?;
    let mut locations = Vec::new();
    for l in &raw.locations {
        let mut registers = BTreeSet::new();
        for r in &l.registers {
            registers.insert(parse_register(r)?);
        }
        locations.push(Location {
            name: l.name.clone(),
            registers,
            accepting: l.accepting,
        });
    }
    let loc_id = |name: &str| -> Result<LocId, ModelError> {
        locations
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| ModelError::UnknownLocation(name.to_string()))
    };
    let initial = loc_id(&raw.initial)?;
    let mut transitions = Vec::new();
    for (i, t) in raw.transitions.iter().enumerate() {
        let action = alphabet
            .id_of(&t.action)
            .ok_or_else(|| ModelError::UnknownAction(t.action.clone()))?;
        let mut literals = Vec::new();
        for lit in &t.guard {
            let op = match lit.op.as_str() {
                "==" => GuardOp::Eq,
                "!=" => GuardOp::Neq,
                other => {
                    return Err(ModelError::BadTransition(
                        i,
                        format!("unknown guard operator {other:?}"),
                    ))
                }
            };
            let register = match (parse_operand(&lit.lhs)?, parse_operand(&lit.rhs)?) {
                (None, Some(r)) | (Some(r), None) => r,
                (None, None) => {
                    return Err(ModelError::BadTransition(
                        i,
                        "guard literal compares p with p".into(),
                    ))
                }
                (Some(_), Some(_)) => {
                    return Err(ModelError::BadTransition(
                        i,
                        "guard literal must mention the parameter p".into(),
                    ))
                }
            };
            literals.push(GuardLit { op, register });
        }
        let mut assign = Assignment::new();
        for (target, src) in &t.assign {
            let target = parse_register(target)?;
            let src = match parse_operand(src)? {
                None => AssignSrc::Param,
                Some(r) => AssignSrc::Register(r),
            };
            assign.insert(target, src);
        }
        transitions.push(Transition {
            from: loc_id(&t.from)?,
            action,
            guard: Guard::new(literals),
            assign,
            to: loc_id(&t.to)?,
        });
    }
    let ra = RegisterAutomaton {
        alphabet,
        locations,
        initial,
        transitions,
    };
    ra.validate()?;
    Ok(ra)
}

/// Serializes to the canonical JSON model text; `load(save(ra))` round-trips.
pub fn save(ra: &RegisterAutomaton) -> String {
    let raw = RawModel {
        alphabet: ra.alphabet.decls().to_vec(),
        locations: ra
            .locations
            .iter()
            .map(|l| RawLocation {
                name: l.name.clone(),
                registers: l.registers.iter().map(|r| format!("x{r}")).collect(),
                accepting: l.accepting,
            })
            .collect(),
        initial: ra.locations[ra.initial].name.clone(),
        transitions: ra
            .transitions
            .iter()
            .map(|t| RawTransition {
                from: ra.locations[t.from].name.clone(),
                action: ra.alphabet.name(t.action).to_string(),
                guard: t
                    .guard
                    .literals()
                    .iter()
                    .map(|l| RawLiteral {
                        lhs: "p".to_string(),
                        op: match l.op {
                            GuardOp::Eq => "==".to_string(),
                            GuardOp::Neq => "!=".to_string(),
                        },
                        rhs: format!("x{}", l.register),
                    })
                    .collect(),
                assign: t
                    .assign
                    .iter()
                    .map(|(target, src)| {
                        let src = match src {
                            AssignSrc::Param => "p".to_string(),
                            AssignSrc::Register(r) => format!("x{r}"),
                        };
                        (format!("x{target}"), src)
                    })
                    .collect(),
                to: ra.locations[t.to].name.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("model serialization");
    text.push('\n');
    text
}

/// DOT rendering with locations as nodes and `action(p) | guard | assignment`
/// transition labels; accepting locations are double-circled.
pub fn export_dot(ra: &RegisterAutomaton, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {name} {{");
    let _ = writeln!(out, "  rankdir=LR;");
    let _ = writeln!(out, "  __start [shape=point];");
    for (i, l) in ra.locations.iter().enumerate() {
        let shape = if l.accepting {
            "doublecircle"
        } else {
            "circle"
        };
        let regs = if l.registers.is_empty() {
            String::new()
        } else {
            format!(
                "\\n{{{}}}",
                l.registers
                    .iter()
                    .map(|r| format!("x{r}"))
                    .collect::<Vec<_>>()
                    .join(",")
            )
        };
        let _ = writeln!(
            out,
            "  n{i} [shape={shape}, label=\"{}{}\"];",
            l.name, regs
        );
    }
    let _ = writeln!(out, "  __start -> n{};", ra.initial);
    for t in &ra.transitions {
        let assign = if t.assign.is_empty() {
            "-".to_string()
        } else {
            t.assign
                .iter()
                .map(|(target, src)| {
                    let src = match src {
                        AssignSrc::Param => "p".to_string(),
                        AssignSrc::Register(r) => format!("x{r}"),
                    };
                    format!("x{target}:={src}")
                })
                .collect::<Vec<_>>()
                .join("; ")
        };
        let param = if ra.alphabet.arity(t.action) == 1 {
            "(p)"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{}{} | {} | {}\"];",
            t.from,
            t.to,
            ra.alphabet.name(t.action),
            param,
            t.guard.render(),
            assign
        );
    }
    out.push_str("}\n");
    out
}
