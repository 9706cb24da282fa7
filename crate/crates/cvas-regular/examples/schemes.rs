//! Path-schemes: notation, weights, automata, the star decomposition and
//! the upward-closure/complement split of a gathering.

use std::collections::BTreeSet;

use cvas_regular::cvas::Cvas;
use cvas_regular::scheme::{complement_schemes, star_decompose, upward_closure_scheme, Gathering, PathScheme};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = Cvas::from_pairs(1, &[("a", &[0]), ("b", &[0]), ("c", &[0])])?;
    let rho = PathScheme::parse("a[A:bc][G:ab/ba]c", &sys)?;
    println!("{} has weight {}", rho.notation(&sys), rho.weight(sys.len()));
    for w in ["abcabbac", "acab", "abbac"] {
        println!("  accepts {w}: {}", rho.accepts(&sys.parse_word(w)?));
    }
    for n in 1..=3 {
        let a: BTreeSet<usize> = (0..n).collect();
        println!("A^* over {n} letters decomposes into {} pre-perfect schemes", star_decompose(&a).len());
    }
    let abc = sys.parse_word("abc")?;
    let g = Gathering::new(abc.clone(), abc)?;
    let w = sys.parse_word("abcbacabc")?;
    println!("split of [G:abc/abc] around {}:", sys.format_word(&w));
    println!("  upward closure {}", upward_closure_scheme(&g, &w)?.notation(&sys));
    for s in complement_schemes(&g, &w)? {
        println!("  complement     {}  weight {}", s.notation(&sys), s.weight(sys.len()));
    }
    Ok(())
}
