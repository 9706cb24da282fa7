//! Canonical gathering witnesses, run redistribution into upward closures,
//! and lifting a run witness of a perfect scheme to a factor whose upward
//! closure stays inside `L_Σ^{x,y}`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::cvas::{simulate, witness_fractions_budgeted, Configuration, Cvas, CvasError, Letter, Run, Word};
use crate::decider::{intersect_witness, DeciderError};
use crate::linear::{solve_feasibility, BudgetExhausted, LinearSystem, Relation, StepBudget};
use crate::rational::Rational;
use crate::scheme::{
    center, factorize_limited, is_subword, matches_gathering, scheme_to_nfa, Bubble, Gathering, PathScheme,
    RhoFactor, SchemeError,
};

/// Errors of witness search, lifting and redistribution.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiftError {
    #[error("no canonical witness exists for the gathering between these configurations")]
    NoWitness,
    #[error("canonical witness search exhausted its cap after {explored} centers")]
    CapExceeded { explored: usize },
    #[error("scheme is not perfect")]
    NotPerfect,
    #[error("word is not in the upward closure of the witness")]
    NotInClosure,
    #[error("construction invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Decider(#[from] DeciderError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Cvas(#[from] CvasError),
    #[error(transparent)]
    Budget(#[from] BudgetExhausted),
}

/// Limits of the canonical witness search.
#[derive(Debug, Clone, Copy)]
pub struct LiftConfig {
    /// Longest center tried.
    pub max_center_len: usize,
    /// Most centers (feasibility systems) tried per gathering.
    pub max_candidates: usize,
}

impl Default for LiftConfig {
    fn default() -> Self {
        LiftConfig {
            max_center_len: 12,
            max_candidates: 50_000,
        }
    }
}

/// A witness `u · center · v` for a gathering with `u`, `v` its appearance
/// records, split into three runs with the monotone zero patterns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalWitness {
    pub gathering: Gathering,
    pub center: Word,
    /// Run over the first-appearance record, from `x` to `x'`.
    pub r1: Run,
    /// Run over the center, from `x'` to `y'`.
    pub r2: Run,
    /// Run over the last-appearance record, from `y'` to `y`.
    pub r3: Run,
}

impl CanonicalWitness {
    pub fn word(&self) -> Word {
        let mut w = self.gathering.first().to_vec();
        w.extend(&self.center);
        w.extend(self.gathering.last());
        w
    }

    pub fn x_mid(&self) -> &Configuration {
        self.r1.end()
    }

    pub fn y_mid(&self) -> &Configuration {
        self.r2.end()
    }

    /// The full run over [`CanonicalWitness::word`].
    pub fn run(&self, sys: &Cvas) -> Run {
        let steps: Vec<_> = [&self.r1, &self.r2, &self.r3]
            .iter()
            .flat_map(|r| r.steps().iter().cloned())
            .collect();
        simulate(self.r1.start(), &steps, sys).expect("witness runs chain")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Pattern {
    Free,
    Zero,
    Positive,
}

fn merge(a: Pattern, b: Pattern) -> Option<Pattern> {
    use Pattern::*;
    match (a, b) {
        (Free, p) | (p, Free) => Some(p),
        (Zero, Zero) => Some(Zero),
        (Positive, Positive) => Some(Positive),
        _ => None,
    }
}

/// Forced zero/positive patterns for the configurations of `u · c · v`.
/// Returns `None` when the patterns contradict each other.
fn patterns(u: &[Letter], c: &[Letter], v: &[Letter], x: &Configuration, y: &Configuration, sys: &Cvas) -> Option<Vec<Vec<Pattern>>> {
    let (n, m) = (u.len(), c.len());
    let total = n + m + n;
    let d = sys.dim();
    let mut pat = vec![vec![Pattern::Free; d]; total + 1];
    for ctr in 0..d {
        // Once positive in r1, positive for the rest of r1.
        let mut active_r1 = x.get(ctr).is_positive();
        let first_touch = u.iter().position(|&a| sys.effect(a)[ctr] != 0);
        if !active_r1 {
            if let Some(k0) = first_touch {
                if sys.effect(u[k0])[ctr] < 0 {
                    return None;
                }
            }
        }
        for k in 0..=n {
            let p = if x.get(ctr).is_positive() || first_touch.is_some_and(|k0| k > k0) {
                Pattern::Positive
            } else {
                Pattern::Zero
            };
            pat[k][ctr] = merge(pat[k][ctr], p)?;
        }
        active_r1 |= first_touch.is_some();
        // Once zero in r3, zero for the rest of r3.
        let last_touch = v.iter().rposition(|&a| sys.effect(a)[ctr] != 0);
        let active_r3 = y.get(ctr).is_positive() || last_touch.is_some();
        for i in 0..=n {
            let p = if y.get(ctr).is_positive() || last_touch.is_some_and(|j| j >= i) {
                Pattern::Positive
            } else {
                Pattern::Zero
            };
            let k = n + m + i;
            pat[k][ctr] = merge(pat[k][ctr], p)?;
        }
        // Positive somewhere in r1 or r3: positive throughout r2.
        if active_r1 || active_r3 {
            for row in pat.iter_mut().take(n + m + 1).skip(n) {
                row[ctr] = merge(row[ctr], Pattern::Positive)?;
            }
        }
    }
    Some(pat)
}

/// Words over `letters` of length `len` using every letter, in
/// lexicographic order.
fn centers_of_length(letters: &[Letter], len: usize) -> Vec<Word> {
    let k = letters.len();
    let mut out = Vec::new();
    if len < k {
        return out;
    }
    let mut idx = vec![0usize; len];
    loop {
        let w: Word = idx.iter().map(|&i| letters[i]).collect();
        let used: BTreeSet<usize> = idx.iter().copied().collect();
        if used.len() == k {
            out.push(w);
        }
        let mut p = len;
        loop {
            if p == 0 {
                return out;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < k {
                break;
            }
            idx[p] = 0;
        }
    }
}

/// Support-level firability of a word in both directions.
fn structurally_firable(w: &[Letter], x: &Configuration, y: &Configuration, sys: &Cvas) -> bool {
    let d = sys.dim();
    let mut supp = x.support();
    for &a in w {
        let e = sys.effect(a);
        if (0..d).any(|c| e[c] < 0 && !supp[c]) {
            return false;
        }
        for c in 0..d {
            supp[c] |= e[c] > 0;
        }
    }
    let mut supp = y.support();
    for &a in w.iter().rev() {
        let e = sys.effect(a);
        if (0..d).any(|c| e[c] > 0 && !supp[c]) {
            return false;
        }
        for c in 0..d {
            supp[c] |= e[c] < 0;
        }
    }
    true
}

/// Fractions for `u · c · v` with the forced patterns, if any exist.
fn pattern_fractions(
    w: &[Letter],
    pat: &[Vec<Pattern>],
    x: &Configuration,
    y: &Configuration,
    sys: &Cvas,
) -> Option<Vec<Rational>> {
    let len = w.len();
    let d = sys.dim();
    let mut s = LinearSystem::new(len);
    for i in 0..len {
        s.push_sparse(&[(i, Rational::one())], Relation::Gt, Rational::zero());
        s.push_sparse(&[(i, Rational::one())], Relation::Le, Rational::one());
    }
    for (k, row) in pat.iter().enumerate() {
        for c in 0..d {
            let terms: Vec<(usize, Rational)> = w[..k]
                .iter()
                .enumerate()
                .filter(|(_, &a)| sys.effect(a)[c] != 0)
                .map(|(j, &a)| (j, Rational::from_int(sys.effect(a)[c])))
                .collect();
            let rhs = -x.get(c);
            let after_dec = k > 0 && sys.effect(w[k - 1])[c] < 0;
            match row[c] {
                Pattern::Positive => {
                    if terms.is_empty() {
                        if !x.get(c).is_positive() {
                            return None;
                        }
                    } else {
                        s.push_sparse(&terms, Relation::Gt, rhs);
                    }
                }
                Pattern::Zero => {
                    if terms.is_empty() {
                        if !x.get(c).is_zero() {
                            return None;
                        }
                    } else {
                        s.push_sparse(&terms, Relation::Eq, rhs);
                    }
                }
                Pattern::Free if after_dec => s.push_sparse(&terms, Relation::Ge, rhs),
                Pattern::Free => {}
            }
        }
    }
    for c in 0..d {
        let terms: Vec<(usize, Rational)> = w
            .iter()
            .enumerate()
            .filter(|(_, &a)| sys.effect(a)[c] != 0)
            .map(|(j, &a)| (j, Rational::from_int(sys.effect(a)[c])))
            .collect();
        s.push_sparse(&terms, Relation::Eq, y.get(c) - x.get(c));
    }
    solve_feasibility(&s).expect("well-formed pattern system")
}

/// Searches centers by length, then lexicographically, for a canonical
/// witness of `g` from `x` to `y`.
pub fn canonical_gathering_witness(
    g: &Gathering,
    x: &Configuration,
    y: &Configuration,
    sys: &Cvas,
    budget: &StepBudget,
    cfg: &LiftConfig,
) -> Result<CanonicalWitness, LiftError> {
    let u = g.first();
    let v = g.last();
    let letters: Vec<Letter> = g.letters().into_iter().collect();
    let mut explored = 0;
    for len in letters.len()..=cfg.max_center_len {
        for c in centers_of_length(&letters, len) {
            if explored >= cfg.max_candidates {
                return Err(LiftError::CapExceeded { explored });
            }
            explored += 1;
            let mut w = u.to_vec();
            w.extend(&c);
            w.extend(v);
            if !structurally_firable(&w, x, y, sys) {
                continue;
            }
            let Some(pat) = patterns(u, &c, v, x, y, sys) else { continue };
            budget.charge()?;
            if let Some(fr) = pattern_fractions(&w, &pat, x, y, sys) {
                let steps: Vec<(Rational, Letter)> = fr.into_iter().zip(w.iter().copied()).collect();
                let n = u.len();
                let m = c.len();
                let r1 = simulate(x, &steps[..n], sys)?;
                let r2 = simulate(r1.end(), &steps[n..n + m], sys)?;
                let r3 = simulate(r2.end(), &steps[n + m..], sys)?;
                let wit = CanonicalWitness {
                    gathering: g.clone(),
                    center: c,
                    r1,
                    r2,
                    r3,
                };
                audit_canonical(&wit, sys).map_err(LiftError::Invariant)?;
                return Ok(wit);
            }
        }
    }
    Err(LiftError::CapExceeded { explored })
}

/// Stepwise check of the three monotone zero patterns, the shape of the
/// witness word and its endpoints.
pub fn audit_canonical(w: &CanonicalWitness, sys: &Cvas) -> Result<(), String> {
    let d = sys.dim();
    if w.r1.word() != w.gathering.first() || w.r3.word() != w.gathering.last() || w.r2.word() != w.center {
        return Err("runs do not spell u · center · v".into());
    }
    if w.r1.end() != w.r2.start() || w.r2.end() != w.r3.start() {
        return Err("runs do not chain".into());
    }
    let alph: BTreeSet<Letter> = w.center.iter().copied().collect();
    if alph != w.gathering.letters() {
        return Err("center alphabet differs from the gathering's".into());
    }
    for run in [&w.r1, &w.r2, &w.r3] {
        simulate(run.start(), run.steps(), sys).map_err(|e| e.to_string())?;
    }
    let pos = |cfg: &Configuration, c: usize| cfg.get(c).is_positive();
    for c in 0..d {
        let r1 = w.r1.configs();
        if let Some(k) = r1.iter().position(|z| pos(z, c)) {
            if r1[k..].iter().any(|z| !pos(z, c)) {
                return Err(format!("counter {c} returns to zero in the first run"));
            }
        }
        let r3 = w.r3.configs();
        if let Some(k) = r3.iter().position(|z| !pos(z, c)) {
            if r3[k..].iter().any(|z| pos(z, c)) {
                return Err(format!("counter {c} leaves zero in the last run"));
            }
        }
        let active = r1.iter().chain(r3).any(|z| pos(z, c));
        if active && w.r2.configs().iter().any(|z| !pos(z, c)) {
            return Err(format!("counter {c} hits zero in the center run"));
        }
    }
    Ok(())
}

/// Redistributes a run with monotone support over `base` (the first
/// occurrences) to the longer word `target`, in which every letter's first
/// occurrence is at the position of its `base` counterpart's order and the
/// remaining occurrences are extras fired with a small `ε`. Effects are
/// multiplied by `sign` (−1 replays a reversed run).
fn redistribute_prefix(
    start: &Configuration,
    base: &[(Rational, Letter)],
    target: &[Letter],
    sys: &Cvas,
    sign: i64,
) -> Result<Vec<Rational>, LiftError> {
    let eff = |a: Letter, c: usize| sign * sys.effect(a)[c];
    let n = base.len();
    // Each letter of the base occurs once; extras counted per base index.
    let idx_of = |a: Letter| base.iter().position(|(_, b)| *b == a);
    let mut extra = vec![0i64; n];
    let mut seen = vec![false; n];
    let mut firsts = Vec::new();
    for &a in target {
        let i = idx_of(a).ok_or(LiftError::NotInClosure)?;
        if seen[i] {
            extra[i] += 1;
        } else {
            seen[i] = true;
            firsts.push(i);
        }
    }
    if firsts != (0..n).collect::<Vec<_>>() {
        return Err(LiftError::NotInClosure);
    }
    let total_extra: i64 = extra.iter().sum();
    if total_extra == 0 {
        return Ok(base.iter().map(|(f, _)| f.clone()).collect());
    }
    // Bounds: extra_i·ε < α_i and E·ε·|a_j(c)| < x_i(c) for positive x_i(c).
    let mut bounds: Vec<Rational> = Vec::new();
    for i in 0..n {
        if extra[i] > 0 {
            bounds.push(&base[i].0 / &Rational::from_int(extra[i]));
        }
    }
    let mut cfg = start.values().to_vec();
    for (alpha, a) in base {
        for (c, v) in cfg.iter_mut().enumerate() {
            *v += alpha * &Rational::from_int(eff(*a, c));
        }
        for (c, v) in cfg.iter().enumerate() {
            if v.is_positive() {
                for (_, b) in base {
                    let m = eff(*b, c).abs();
                    if m != 0 {
                        bounds.push(v / &Rational::from_int(total_extra * m));
                    }
                }
            }
        }
    }
    let eps = bounds.into_iter().min().unwrap() / &Rational::from_int(2);
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(target.len());
    for &a in target {
        let i = idx_of(a).unwrap();
        if seen[i] {
            out.push(eps.clone());
        } else {
            seen[i] = true;
            out.push(&base[i].0 - &(&eps * &Rational::from_int(extra[i])));
        }
    }
    Ok(out)
}

/// Inserts the letters of `target ∖ center` into the center run one at a
/// time, each borrowing `ε` from the nearest occurrence of the same letter.
fn redistribute_center(
    start: &Configuration,
    base: &[(Rational, Letter)],
    target: &[Letter],
    sys: &Cvas,
) -> Result<Vec<Rational>, LiftError> {
    let word: Vec<Letter> = base.iter().map(|(_, a)| *a).collect();
    if !is_subword(&word, target) {
        return Err(LiftError::NotInClosure);
    }
    // Greedy leftmost embedding of the base into the target.
    let mut embedded = vec![false; target.len()];
    let mut k = 0;
    for (p, &a) in target.iter().enumerate() {
        if k < word.len() && word[k] == a {
            embedded[p] = true;
            k += 1;
        }
    }
    // Current run: (target position, fraction, letter).
    let mut cur: Vec<(usize, Rational, Letter)> = Vec::new();
    let mut k = 0;
    for (p, &e) in embedded.iter().enumerate() {
        if e {
            cur.push((p, base[k].0.clone(), base[k].1));
            k += 1;
        }
    }
    let letters: BTreeSet<Letter> = word.iter().copied().collect();
    for (p, &a) in target.iter().enumerate() {
        if embedded[p] {
            continue;
        }
        let ins = cur.iter().position(|(q, _, _)| *q > p).unwrap_or(cur.len());
        let j = cur[..ins]
            .iter()
            .rposition(|(_, _, b)| *b == a)
            .or_else(|| cur[ins..].iter().position(|(_, _, b)| *b == a).map(|o| ins + o))
            .ok_or(LiftError::NotInClosure)?;
        // Bounds: ε below every fraction, every positive counter value, and
        // every positive value divided by any letter's effect magnitude.
        let mut bounds: Vec<Rational> = cur.iter().map(|(_, f, _)| f.clone()).collect();
        let mut cfg = start.values().to_vec();
        let check = |cfg: &[Rational], bounds: &mut Vec<Rational>| {
            for (c, v) in cfg.iter().enumerate() {
                if v.is_positive() {
                    bounds.push(v.clone());
                    for &b in &letters {
                        let m = sys.effect(b)[c].abs();
                        if m != 0 {
                            bounds.push(v / &Rational::from_int(m));
                        }
                    }
                }
            }
        };
        for (_, f, b) in &cur {
            for (c, v) in cfg.iter_mut().enumerate() {
                *v += f * &Rational::from_int(sys.effect(*b)[c]);
            }
            check(&cfg, &mut bounds);
        }
        let eps = bounds.into_iter().min().unwrap() / &Rational::from_int(2);
        cur[j].1 = &cur[j].1 - &eps;
        cur.insert(ins, (p, eps, a));
    }
    Ok(cur.into_iter().map(|(_, f, _)| f).collect())
}

/// A run over `w'` from the witness's source to its target, for any `w'`
/// in the upward closure of the witness word.
pub fn redistribute(wit: &CanonicalWitness, target: &[Letter], sys: &Cvas) -> Result<Run, LiftError> {
    let g = &wit.gathering;
    if !matches_gathering(target, g) {
        return Err(LiftError::NotInClosure);
    }
    let c_new = center(target, g)?;
    if !is_subword(&wit.center, &c_new) {
        return Err(LiftError::NotInClosure);
    }
    let n_last = *g.first().last().unwrap();
    let b_first = g.last()[0];
    let p = target.iter().position(|&a| a == n_last).unwrap();
    let q = target.iter().rposition(|&a| a == b_first).unwrap();
    let prefix = &target[..=p];
    let suffix = &target[q..];

    let f1 = redistribute_prefix(wit.r1.start(), wit.r1.steps(), prefix, sys, 1)?;
    let f2 = redistribute_center(wit.r2.start(), wit.r2.steps(), &c_new, sys)?;
    let rev_steps: Vec<(Rational, Letter)> = wit.r3.steps().iter().rev().cloned().collect();
    let rev_target: Vec<Letter> = suffix.iter().rev().copied().collect();
    let mut f3 = redistribute_prefix(wit.r3.end(), &rev_steps, &rev_target, sys, -1)?;
    f3.reverse();

    let steps: Vec<(Rational, Letter)> = f1.into_iter().chain(f2).chain(f3).zip(target.iter().copied()).collect();
    let run = simulate(wit.r1.start(), &steps, sys).map_err(|e| LiftError::Invariant(format!("redistributed run blocked: {e}")))?;
    if run.end() != wit.r3.end() {
        return Err(LiftError::Invariant("redistributed run misses the target".into()));
    }
    Ok(run)
}

/// Output of [`lift_run_witness`].
#[derive(Debug, Clone)]
pub struct LiftedWitness {
    pub word: Word,
    pub factor: RhoFactor,
    /// `x_0, y_0, x_1, y_1, …, x_n, y_n`: word `u_i` runs from `x_i` to
    /// `y_i`, bubble `i+1` from `y_i` to `x_{i+1}`.
    pub boundaries: Vec<Configuration>,
    pub witnesses: Vec<CanonicalWitness>,
    pub run: Run,
}

/// Lifts a run witness of a perfect scheme: boundary configurations are
/// read off one certified run, and each gathering part is replaced by a
/// canonical witness between its boundaries.
pub fn lift_run_witness(
    rho: &PathScheme,
    x: &Configuration,
    y: &Configuration,
    sys: &Cvas,
    budget: &StepBudget,
    cfg: &LiftConfig,
) -> Result<LiftedWitness, LiftError> {
    if !rho.is_pre_perfect() {
        return Err(LiftError::NotPerfect);
    }
    let nfa = scheme_to_nfa(rho, sys.len());
    let w = intersect_witness(&nfa, x, y, sys, budget)?.ok_or(LiftError::NotPerfect)?;
    lift_from_word(rho, &w, x, y, sys, budget, cfg)
}

/// [`lift_run_witness`] starting from a known member word of `L(ρ)`.
pub fn lift_from_word(
    rho: &PathScheme,
    w: &[Letter],
    x: &Configuration,
    y: &Configuration,
    sys: &Cvas,
    budget: &StepBudget,
    cfg: &LiftConfig,
) -> Result<LiftedWitness, LiftError> {
    let fr = witness_fractions_budgeted(w, x, y, sys, budget)?.ok_or(LiftError::NotPerfect)?;
    let steps: Vec<(Rational, Letter)> = fr.into_iter().zip(w.iter().copied()).collect();
    let run = simulate(x, &steps, sys)?;
    let factor = factorize_limited(w, rho, 1).pop().ok_or(LiftError::NotPerfect)?;
    let mut boundaries = vec![x.clone()];
    let mut pos = rho.words()[0].len();
    boundaries.push(run.configs()[pos].clone());
    let mut out_word: Word = rho.words()[0].clone();
    let mut out_steps: Vec<(Rational, Letter)> = steps[..pos].to_vec();
    let mut witnesses = Vec::new();
    let mut out_factor = Vec::new();
    for (i, b) in rho.bubbles().iter().enumerate() {
        let Bubble::Gathering(g) = b else { unreachable!("pre-perfect") };
        let from = run.configs()[pos].clone();
        pos += factor[i].len();
        let to = run.configs()[pos].clone();
        let wit = canonical_gathering_witness(g, &from, &to, sys, budget, cfg)?;
        let ww = wit.word();
        out_word.extend(&ww);
        out_steps.extend(wit.run(sys).steps().iter().cloned());
        out_factor.push(ww);
        witnesses.push(wit);
        boundaries.push(to);
        let u = &rho.words()[i + 1];
        out_steps.extend(steps[pos..pos + u.len()].iter().cloned());
        out_word.extend(u);
        pos += u.len();
        boundaries.push(run.configs()[pos].clone());
    }
    let lifted = simulate(x, &out_steps, sys)?;
    if lifted.end() != y {
        return Err(LiftError::Invariant("lifted run misses the target".into()));
    }
    Ok(LiftedWitness {
        word: out_word,
        factor: out_factor,
        boundaries,
        witnesses,
        run: lifted,
    })
}
