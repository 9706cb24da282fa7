//! Finds a canonical witness for a gathering and redistributes it onto a
//! longer word of the same upward closure.

use cvas_regular::cvas::{Configuration, Cvas};
use cvas_regular::lifting::{audit_canonical, canonical_gathering_witness, redistribute, LiftConfig};
use cvas_regular::linear::StepBudget;
use cvas_regular::scheme::Gathering;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = Cvas::from_pairs(3, &[("a", &[1, 0, 0]), ("b", &[-1, 1, 0]), ("c", &[0, -1, 1])])?;
    let x = Configuration::zero(3);
    let y = Configuration::from_fracs(&[(0, 1), (1, 4), (1, 4)]);
    let abc = sys.parse_word("abc")?;
    let g = Gathering::new(abc.clone(), abc)?;
    let wit = canonical_gathering_witness(&g, &x, &y, &sys, &StepBudget::unlimited(), &LiftConfig::default())?;
    audit_canonical(&wit, &sys)?;
    println!("canonical witness {} with center {}", sys.format_word(&wit.word()), sys.format_word(&wit.center));
    println!("  x' = {:?}, y' = {:?}", wit.x_mid(), wit.y_mid());
    let mut target = wit.gathering.first().to_vec();
    for &a in &wit.center {
        target.extend([a, a]);
    }
    target.extend(wit.gathering.last());
    let run = redistribute(&wit, &target, &sys)?;
    let steps: Vec<String> = run.steps().iter().map(|(f, a)| format!("{f}·{}", sys.label(*a))).collect();
    println!("redistributed onto {}: {}", sys.format_word(&target), steps.join(" "));
    assert_eq!(run.end(), &y);
    Ok(())
}
