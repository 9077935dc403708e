//! Seeded random register-automaton generator for scaling studies: a random
//! deterministic automaton skeleton over arity-1 actions, with a fraction of
//! its transitions replaced by store-then-compare gadgets (one transition
//! stores the parameter into a register, a later transition splits into
//! `p==x1` / `p!=x1` branches).

use crate::automaton::{AssignSrc, Guard, Location, RegisterAutomaton, Transition};
use crate::oracle::check_determinate;
use crate::words::{ActionDecl, Alphabet};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub locations: usize,
    pub actions: usize,
    pub data_fraction: f64,
    pub seed: u64,
    pub max_retries: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            locations: 4,
            actions: 2,
            data_fraction: 0.5,
            seed: 0,
            max_retries: 16,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("generation produced a non-determinate automaton after {0} retries")]
    NotDeterminate(usize),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

pub fn generate(cfg: &GeneratorConfig) -> Result<RegisterAutomaton, GenerateError> {
    if cfg.locations == 0 || cfg.actions == 0 {
        return Err(GenerateError::BadConfig(
            "need at least one location and one action".into(),
        ));
    }
    for attempt in 0..cfg.max_retries.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(attempt as u64));
        let ra = build(cfg, &mut rng);
        ra.validate().expect("generated automata are well-formed");
        if check_determinate(&ra, 500_000)
            .map(|w| w.is_none())
            .unwrap_or(false)
        {
            return Ok(ra);
        }
    }
    Err(GenerateError::NotDeterminate(cfg.max_retries))
}

fn build(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> RegisterAutomaton {
    let n = cfg.locations;
    let k = cfg.actions;
    let alphabet = Alphabet::new(
        (0..k)
            .map(|i| ActionDecl {
                name: format!("a{i}"),
                arity: 1,
            })
            .collect(),
    )
    .expect("generated alphabet");

    // Deterministic skeleton with every location reachable: a spanning edge
    // into each new location, remaining slots uniform.
    let mut table = vec![vec![None::<usize>; k]; n];
    for target in 1..n {
        let free: Vec<(usize, usize)> = (0..target)
            .flat_map(|l| (0..k).map(move |a| (l, a)))
            .filter(|&(l, a)| table[l][a].is_none())
            .collect();
        let &(l, a) = free.choose(rng).expect("a free slot always exists");
        table[l][a] = Some(target);
    }
    for l in 0..n {
        for a in 0..k {
            if table[l][a].is_none() {
                table[l][a] = Some(rng.gen_range(0..n));
            }
        }
    }
    let mut accepting: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    if !accepting.contains(&true) {
        let i = rng.gen_range(0..n);
        accepting[i] = true;
    }

    // Pick distinct store edges for the gadgets.
    let total_edges = n * k;
    let mut gadget_count = ((cfg.data_fraction * total_edges as f64) / 2.0).round() as usize;
    if cfg.data_fraction > 0.0 {
        gadget_count = gadget_count.max(1);
    }
    gadget_count = gadget_count.min(total_edges);
    let mut all_edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|l| (0..k).map(move |a| (l, a)))
        .collect();
    all_edges.shuffle(rng);
    let store_edges: BTreeSet<(usize, usize)> =
        all_edges.into_iter().take(gadget_count).collect();

    let mut locations: Vec<Location> = (0..n)
        .map(|i| Location {
            name: format!("s{i}"),
            registers: BTreeSet::new(),
            accepting: accepting[i],
        })
        .collect();
    let mut transitions = Vec::new();
    let mut gadget_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(l, a) in &store_edges {
        let orig_target = table[l][a].expect("filled table");
        let gadget = locations.len();
        locations.push(Location {
            name: format!("g{}_{}", l, a),
            registers: BTreeSet::from([1]),
            accepting: accepting[orig_target],
        });
        gadget_of.insert((l, a), gadget);
    }
    for l in 0..n {
        for a in 0..k {
            let target = table[l][a].expect("filled table");
            match gadget_of.get(&(l, a)) {
                Some(&gadget) => transitions.push(Transition {
                    from: l,
                    action: a,
                    guard: Guard::always(),
                    assign: BTreeMap::from([(1, AssignSrc::Param)]),
                    to: gadget,
                }),
                None => transitions.push(Transition {
                    from: l,
                    action: a,
                    guard: Guard::always(),
                    assign: BTreeMap::new(),
                    to: target,
                }),
            }
        }
    }
    // Gadget locations mimic the skipped skeleton location, with one action
    // split on the stored value.
    for (&(l, a), &gadget) in &gadget_of {
        let shadow = table[l][a].expect("filled table");
        let split_action = rng.gen_range(0..k);
        for action in 0..k {
            let target = table[shadow][action].expect("filled table");
            if action == split_action {
                let alt = if n > 1 {
                    (target + 1 + rng.gen_range(0..n - 1)) % n
                } else {
                    target
                };
                transitions.push(Transition {
                    from: gadget,
                    action,
                    guard: Guard::equal(1),
                    assign: BTreeMap::new(),
                    to: target,
                });
                transitions.push(Transition {
                    from: gadget,
                    action,
                    guard: Guard::not_equal_all([1]),
                    assign: BTreeMap::new(),
                    to: alt,
                });
            } else {
                transitions.push(Transition {
                    from: gadget,
                    action,
                    guard: Guard::always(),
                    assign: BTreeMap::new(),
                    to: target,
                });
            }
        }
    }
    RegisterAutomaton {
        alphabet,
        locations,
        initial: 0,
        transitions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::save;

    #[test]
    fn same_seed_same_model() {
        let cfg = GeneratorConfig {
            locations: 4,
            actions: 2,
            data_fraction: 0.5,
            seed: 11,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(save(&a), save(&b));
    }

    #[test]
    fn zero_fraction_gives_plain_dfa() {
        let cfg = GeneratorConfig {
            locations: 4,
            actions: 2,
            data_fraction: 0.0,
            seed: 3,
            ..Default::default()
        };
        let ra = generate(&cfg).unwrap();
        assert!(ra.locations.iter().all(|l| l.registers.is_empty()));
        assert_eq!(ra.locations.len(), 4);
    }

    #[test]
    fn half_fraction_has_registers() {
        let cfg = GeneratorConfig {
            locations: 4,
            actions: 2,
            data_fraction: 0.5,
            seed: 5,
            ..Default::default()
        };
        let ra = generate(&cfg).unwrap();
        assert!(ra.locations.iter().any(|l| !l.registers.is_empty()));
    }
}
