//! Shared fixtures for the integration tests: the three-counter pipeline
//! system and seeded random instances.

#![allow(dead_code)]

use cvas_regular::automata::Nfa;
use cvas_regular::cvas::{member, Configuration, Cvas, Transition};
use cvas_regular::decider::{bounded_witness_search, intersect_witness};
use cvas_regular::linear::StepBudget;
use cvas_regular::rational::Rational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `a = (1,0,0)`, `b = (-1,1,0)`, `c = (0,-1,1)` from `(0,0,0)` to `(0,1/4,1/4)`.
pub fn pipeline() -> (Cvas, Configuration, Configuration) {
    let sys = Cvas::from_pairs(3, &[("a", &[1, 0, 0]), ("b", &[-1, 1, 0]), ("c", &[0, -1, 1])]).unwrap();
    (sys, Configuration::zero(3), Configuration::from_fracs(&[(0, 1), (1, 4), (1, 4)]))
}

/// A system with `1..=max_d` counters, `1..=max_k` letters named `a, b, …`
/// and effects in `[-2, 2]`.
pub fn random_cvas(rng: &mut ChaCha8Rng, max_d: usize, max_k: usize) -> Cvas {
    let d = rng.gen_range(1..=max_d);
    let k = rng.gen_range(1..=max_k);
    let transitions = (0..k)
        .map(|i| Transition {
            label: ((b'a' + i as u8) as char).to_string(),
            effect: (0..d).map(|_| rng.gen_range(-2..=2)).collect(),
        })
        .collect();
    Cvas::new(d, transitions).unwrap()
}

/// A configuration with entries `p/q`, `q ≤ 4`, zero with probability 0.4.
pub fn random_config(rng: &mut ChaCha8Rng, d: usize) -> Configuration {
    Configuration::new(
        (0..d)
            .map(|_| {
                if rng.gen_bool(0.4) {
                    Rational::zero()
                } else {
                    Rational::new(rng.gen_range(0..=4), rng.gen_range(1..=4))
                }
            })
            .collect(),
    )
    .unwrap()
}

/// An NFA with `1..=max_states` states, edge probability 0.3, state 0
/// initial and at least one accepting state.
pub fn random_nfa(rng: &mut ChaCha8Rng, k: usize, max_states: usize) -> Nfa {
    let n = rng.gen_range(1..=max_states);
    let mut nfa = Nfa::empty(k);
    for _ in 0..n {
        nfa.add_state();
    }
    nfa.set_initial(0);
    for s in 0..n {
        for a in 0..k {
            for t in 0..n {
                if rng.gen_bool(0.3) {
                    nfa.add_edge(s, a, t);
                }
            }
        }
        if rng.gen_bool(0.5) {
            nfa.set_accepting(s);
        }
    }
    if nfa.accepting().is_empty() {
        nfa.set_accepting(n - 1);
    }
    nfa
}

/// Outcome of comparing the decider with bounded search on one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Differential {
    Agree { nonempty: bool },
    Disagree(String),
}

/// Decider vs. exhaustive search up to length `bound`: a decider witness
/// must be accepted and a member, a decider "empty" must leave bounded
/// search empty, and a bounded witness must make the decider non-empty.
pub fn differential(nfa: &Nfa, x: &Configuration, y: &Configuration, sys: &Cvas, bound: usize) -> Differential {
    let fast = match intersect_witness(nfa, x, y, sys, &StepBudget::unlimited()) {
        Ok(f) => f,
        Err(e) => return Differential::Disagree(format!("decider error: {e}")),
    };
    let slow = bounded_witness_search(nfa, x, y, sys, bound).unwrap();
    match (&fast, &slow) {
        (Some(w), _) if !(nfa.accepts(w) && member(w, x, y, sys).unwrap()) => {
            Differential::Disagree(format!("invalid decider witness {}", sys.format_word(w)))
        }
        (None, Some(w)) => Differential::Disagree(format!("decider empty, bounded witness {}", sys.format_word(w))),
        _ => Differential::Agree { nonempty: fast.is_some() },
    }
}
