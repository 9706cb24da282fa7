//! Builds an NFA for the language of the three-counter pipeline system and
//! checks it against the membership oracle on all short words.

use std::time::Instant;

use cvas_regular::automata::words_up_to;
use cvas_regular::cvas::{member, Configuration, Cvas};
use cvas_regular::engine::{build_nfa, EngineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = Cvas::from_pairs(3, &[("a", &[1, 0, 0]), ("b", &[-1, 1, 0]), ("c", &[0, -1, 1])])?;
    let x = Configuration::zero(3);
    let y = Configuration::from_fracs(&[(0, 1), (1, 4), (1, 4)]);
    let start = Instant::now();
    let result = build_nfa(&sys, &x, &y, &EngineConfig::default())?;
    println!("built in {:.2?}: {:?}", start.elapsed(), result.metrics);
    let mut disagreements = 0;
    for w in words_up_to(sys.len(), 6) {
        if result.nfa.accepts(&w) != member(&w, &x, &y, &sys)? {
            disagreements += 1;
            println!("disagreement on {}", sys.format_word(&w));
        }
    }
    println!("{disagreements} disagreements on words of length at most 6");
    Ok(())
}
