//! Benchmark system-under-learning models shipped with the crate.
//!
//! stack-2 is the capacity-two stack acceptor; stack-3 and the fifo family
//! scale it. The login model stores a session id in a register. The symmetry
//! model is a four-location automaton whose prefix SDTs admit a spurious
//! register permutation, exercising the register-consistency check. The
//! fifo/login models are reconstructions inspired by the usual benchmark
//! suites, not byte-for-byte copies.

use crate::automaton::{load, RegisterAutomaton};

const STACK2: &str = include_str!("../../../models/stack2.json");
const STACK3: &str = include_str!("../../../models/stack3.json");
const FIFO3: &str = include_str!("../../../models/fifo3.json");
const FIFO5: &str = include_str!("../../../models/fifo5.json");
const FIFO7: &str = include_str!("../../../models/fifo7.json");
const LOGIN: &str = include_str!("../../../models/login.json");
const SYMMETRY: &str = include_str!("../../../models/symmetry.json");

pub fn stack(capacity: usize) -> RegisterAutomaton {
    match capacity {
        2 => load(STACK2).expect("embedded stack2 model"),
        3 => load(STACK3).expect("embedded stack3 model"),
        other => panic!("no embedded stack model of capacity {other}"),
    }
}

pub fn fifo(capacity: usize) -> RegisterAutomaton {
    match capacity {
        3 => load(FIFO3).expect("embedded fifo3 model"),
        5 => load(FIFO5).expect("embedded fifo5 model"),
        7 => load(FIFO7).expect("embedded fifo7 model"),
        other => panic!("no embedded fifo model of capacity {other}"),
    }
}

pub fn login() -> RegisterAutomaton {
    load(LOGIN).expect("embedded login model")
}

pub fn symmetry() -> RegisterAutomaton {
    load(SYMMETRY).expect("embedded symmetry model")
}

pub fn by_name(name: &str) -> Option<RegisterAutomaton> {
    match name {
        "stack2" => Some(stack(2)),
        "stack3" => Some(stack(3)),
        "fifo3" => Some(fifo(3)),
        "fifo5" => Some(fifo(5)),
        "fifo7" => Some(fifo(7)),
        "login" => Some(login()),
        "symmetry" => Some(symmetry()),
        _ => None,
    }
}

pub const NAMES: &[&str] = &[
    "stack2", "stack3", "fifo3", "fifo5", "fifo7", "login", "symmetry",
];

/// All embedded models with their names.
pub fn all() -> Vec<(&'static str, RegisterAutomaton)> {
    NAMES
        .iter()
        .map(|&n| (n, by_name(n).expect("embedded model")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::Word;

    #[test]
    fn all_models_load_and_validate() {
        for (name, ra) in all() {
            assert!(ra.validate().is_ok(), "{name} fails validation");
        }
    }

    #[test]
    fn fifo_is_first_in_first_out() {
        let ra = fifo(3);
        let ab = &ra.alphabet;
        assert!(ra.accepts(&Word::parse(
            ab,
            &[("offer", 0), ("offer", 1), ("poll", 0), ("poll", 1)]
        )));
        assert!(!ra.accepts(&Word::parse(
            ab,
            &[("offer", 0), ("offer", 1), ("poll", 1)]
        )));
        assert!(!ra.accepts(&Word::parse(
            ab,
            &[("offer", 0), ("offer", 1), ("offer", 2), ("offer", 3)]
        )));
    }

    #[test]
    fn symmetry_model_matches_narrative() {
        let ra = symmetry();
        let ab = &ra.alphabet;
        // a(1) b(1) reaches the accepting location.
        assert!(ra.accepts(&Word::parse(ab, &[("a", 1), ("b", 1)])));
        assert!(ra.accepts(&Word::parse(ab, &[("a", 1), ("a", 2), ("a", 1)])));
        assert!(ra.accepts(&Word::parse(ab, &[("a", 1), ("a", 2), ("a", 2)])));
        assert!(!ra.accepts(&Word::empty()));
        assert!(!ra.accepts(&Word::parse(ab, &[("a", 1), ("a", 2), ("a", 3)])));
        // After a(1) a(2) b(3), only the b-transition's stored value matters:
        // b stores x2 (the value 2), so b(2) accepts afterwards.
        assert!(ra.accepts(&Word::parse(ab, &[("a", 1), ("a", 2), ("b", 3), ("b", 2)])));
        assert!(!ra.accepts(&Word::parse(ab, &[("a", 1), ("a", 2), ("b", 3), ("b", 1)])));
    }

    #[test]
    fn login_requires_matching_session_id() {
        let ra = login();
        let ab = &ra.alphabet;
        assert!(ra.accepts(&Word::parse(ab, &[("register", 4), ("login", 4), ("logout", 4)])));
        assert!(!ra.accepts(&Word::parse(ab, &[("register", 4), ("login", 5)])));
        assert!(!ra.accepts(&Word::parse(ab, &[("login", 4)])));
    }
}
