//! Decides whether regular languages meet the language of a system, and
//! prints the certified witness word when they do.

use std::collections::BTreeSet;

use cvas_regular::automata::Nfa;
use cvas_regular::cvas::{member, Configuration, Cvas};
use cvas_regular::decider::intersect_witness_stats;
use cvas_regular::linear::StepBudget;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = Cvas::from_pairs(3, &[("a", &[1, 0, 0]), ("b", &[-1, 1, 0]), ("c", &[0, -1, 1])])?;
    let x = Configuration::zero(3);
    let y = Configuration::from_fracs(&[(0, 1), (1, 4), (1, 4)]);
    let bc: BTreeSet<usize> = [1, 2].into();
    let a_then_bc = Nfa::concat(&Nfa::from_word(3, &[0]), &Nfa::star_of_subalphabet(3, &bc)?)?;
    let only_bc = Nfa::star_of_subalphabet(3, &bc)?;
    for (name, nfa) in [("a(b|c)*", a_then_bc), ("(b|c)*", only_bc)] {
        let (w, stats) = intersect_witness_stats(&nfa, &x, &y, &sys, &StepBudget::unlimited())?;
        match w {
            Some(w) => {
                assert!(member(&w, &x, &y, &sys)?);
                println!("{name}: non-empty, witness {} ({stats:?})", sys.format_word(&w));
            }
            None => println!("{name}: empty ({stats:?})"),
        }
    }
    Ok(())
}
