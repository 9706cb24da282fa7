//! The lower-bound family: instance sizes, the maxed-out and exponential
//! runs, uniqueness of short runs and the pumping check.

use cvas_regular::lowerbound::{
    brute_force_short_runs, exponential_run, generate, maxed_exponents, maxed_out_run, pumping_check,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (h, n) in [(1, 2), (1, 3), (2, 2)] {
        let inst = generate(h)?;
        let maxed = maxed_out_run(h, n)?;
        let exp = exponential_run(h, n)?;
        println!(
            "h={h} n={n}: {} counters, {} letters, maxed run length {} (exponents {:?}), exponential run length {}",
            inst.sys.dim(),
            inst.sys.len(),
            maxed.len(),
            maxed_exponents(h, n)?,
            exp.len()
        );
        println!("  short runs: {:?}", brute_force_short_runs(&inst, n)?);
    }
    for (r, still) in pumping_check(2)? {
        println!("removing {r} copies of w_1 at n=2: still a member = {still}");
    }
    Ok(())
}
