//! Decides membership of words in the language of the three-counter
//! pipeline system and prints an explicit run for each member.

use cvas_regular::cvas::{witness_run, Configuration, Cvas};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = Cvas::from_pairs(3, &[("a", &[1, 0, 0]), ("b", &[-1, 1, 0]), ("c", &[0, -1, 1])])?;
    let x = Configuration::zero(3);
    let y = Configuration::from_fracs(&[(0, 1), (1, 4), (1, 4)]);
    for text in ["abbc", "abcabc", "abcbacabc", "bbc", "cabcabc", "abcabca"] {
        let w = sys.parse_word(text)?;
        match witness_run(&w, &x, &y, &sys)? {
            Some(run) => {
                let steps: Vec<String> = run
                    .steps()
                    .iter()
                    .map(|(f, a)| format!("{f}·{}", sys.label(*a)))
                    .collect();
                println!("{text:>10}: member via {}", steps.join(" "));
            }
            None => println!("{text:>10}: not a member"),
        }
    }
    Ok(())
}
