//! The simplex verdict agrees with an independent Fourier–Motzkin
//! elimination on small random systems, and every returned point satisfies
//! its system exactly.

use cvas_regular::linear::{maximize, solve_feasibility, LinearSystem, Optimum, Relation};
use cvas_regular::rational::Rational;
use proptest::prelude::*;

/// `coeffs · v ≤ rhs` (or `<` when `strict`).
#[derive(Clone, Debug)]
struct Ineq {
    coeffs: Vec<Rational>,
    strict: bool,
    rhs: Rational,
}

fn to_ineqs(system: &LinearSystem) -> Vec<Ineq> {
    let mut out = Vec::new();
    for c in system.constraints() {
        let neg: Vec<Rational> = c.coeffs.iter().map(|a| -a).collect();
        let mk = |coeffs: Vec<Rational>, strict, rhs| Ineq { coeffs, strict, rhs };
        match c.rel {
            Relation::Le => out.push(mk(c.coeffs.clone(), false, c.rhs.clone())),
            Relation::Lt => out.push(mk(c.coeffs.clone(), true, c.rhs.clone())),
            Relation::Ge => out.push(mk(neg, false, -&c.rhs)),
            Relation::Gt => out.push(mk(neg, true, -&c.rhs)),
            Relation::Eq => {
                out.push(mk(c.coeffs.clone(), false, c.rhs.clone()));
                out.push(mk(neg, false, -&c.rhs));
            }
        }
    }
    out
}

/// Fourier–Motzkin feasibility with strictness tracking.
fn fm_feasible(system: &LinearSystem) -> bool {
    let mut ineqs = to_ineqs(system);
    for k in 0..system.num_vars() {
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for i in ineqs {
            if i.coeffs[k].is_positive() {
                pos.push(i);
            } else if i.coeffs[k].is_negative() {
                neg.push(i);
            } else {
                rest.push(i);
            }
        }
        for p in &pos {
            for n in &neg {
                let sp = p.coeffs[k].recip();
                let sn = (-&n.coeffs[k]).recip();
                let coeffs = p
                    .coeffs
                    .iter()
                    .zip(&n.coeffs)
                    .map(|(a, b)| a * &sp + b * &sn)
                    .collect();
                rest.push(Ineq {
                    coeffs,
                    strict: p.strict || n.strict,
                    rhs: &p.rhs * &sp + &n.rhs * &sn,
                });
            }
        }
        ineqs = rest;
    }
    ineqs.iter().all(|i| {
        if i.strict {
            i.rhs.is_positive()
        } else {
            !i.rhs.is_negative()
        }
    })
}

fn relation() -> impl Strategy<Value = Relation> {
    prop_oneof![
        Just(Relation::Eq),
        Just(Relation::Le),
        Just(Relation::Lt),
        Just(Relation::Ge),
        Just(Relation::Gt),
    ]
}

fn system() -> impl Strategy<Value = LinearSystem> {
    (1usize..=3).prop_flat_map(|n| {
        prop::collection::vec(
            (prop::collection::vec(-3i64..=3, n), relation(), -3i64..=3),
            0..6,
        )
        .prop_map(move |rows| {
            let mut s = LinearSystem::new(n);
            for (coeffs, rel, rhs) in rows {
                s.push(
                    coeffs.into_iter().map(Rational::from_int).collect(),
                    rel,
                    Rational::from_int(rhs),
                );
            }
            s
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn verdict_matches_fourier_motzkin(s in system()) {
        let simplex = solve_feasibility(&s).unwrap();
        prop_assert_eq!(simplex.is_some(), fm_feasible(&s));
        if let Some(p) = simplex {
            prop_assert!(s.satisfied_by(&p));
        }
    }

    #[test]
    fn optimum_is_feasible_and_dominates(s in system(), obj in prop::collection::vec(-3i64..=3, 3)) {
        let mut ns = LinearSystem::new(s.num_vars());
        for c in s.constraints() {
            let rel = match c.rel {
                Relation::Lt => Relation::Le,
                Relation::Gt => Relation::Ge,
                r => r,
            };
            ns.push(c.coeffs.clone(), rel, c.rhs.clone());
        }
        let objective: Vec<Rational> =
            obj[..ns.num_vars()].iter().map(|&v| Rational::from_int(v)).collect();
        match maximize(&ns, &objective).unwrap() {
            Optimum::Optimum { value, point } => {
                prop_assert!(ns.satisfied_by(&point));
                // Nothing strictly better is feasible.
                let mut better = ns.clone();
                better.push(objective.clone(), Relation::Gt, value);
                prop_assert!(!fm_feasible(&better));
            }
            Optimum::Unbounded => {
                prop_assert!(fm_feasible(&ns));
                let mut far = ns.clone();
                far.push(objective.clone(), Relation::Ge, Rational::from_int(1000));
                prop_assert!(fm_feasible(&far));
            }
            Optimum::Infeasible => prop_assert!(!fm_feasible(&ns)),
        }
    }

    #[test]
    fn deterministic(s in system()) {
        prop_assert_eq!(solve_feasibility(&s).unwrap(), solve_feasibility(&s).unwrap());
    }
}
