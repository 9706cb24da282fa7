//! Exact rational linear programming: feasibility with strict constraints
//! and optimisation over non-strict ones.

use cvas_regular::linear::{maximize, solve_feasibility, LinearSystem, Optimum, Relation};
use cvas_regular::rational::q;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // x + y ≤ 1, x > y, y > 1/3.
    let mut strict = LinearSystem::new(2);
    strict.push(vec![q(1, 1), q(1, 1)], Relation::Le, q(1, 1));
    strict.push(vec![q(1, 1), q(-1, 1)], Relation::Gt, q(0, 1));
    strict.push(vec![q(0, 1), q(1, 1)], Relation::Gt, q(1, 3));
    let point = solve_feasibility(&strict)?.expect("feasible");
    println!("feasible point: x = {}, y = {}", point[0], point[1]);
    strict.push(vec![q(0, 1), q(1, 1)], Relation::Ge, q(1, 2));
    println!("adding y ≥ 1/2: feasible = {}", solve_feasibility(&strict)?.is_some());

    // max x + 2y subject to x + y ≤ 1, x ≥ y, y ≥ 0.
    let mut closed = LinearSystem::new(2);
    closed.push(vec![q(1, 1), q(1, 1)], Relation::Le, q(1, 1));
    closed.push(vec![q(1, 1), q(-1, 1)], Relation::Ge, q(0, 1));
    closed.push(vec![q(0, 1), q(1, 1)], Relation::Ge, q(0, 1));
    match maximize(&closed, &[q(1, 1), q(2, 1)])? {
        Optimum::Optimum { value, point } => println!("max x + 2y = {value} at ({}, {})", point[0], point[1]),
        other => println!("{other:?}"),
    }
    Ok(())
}
