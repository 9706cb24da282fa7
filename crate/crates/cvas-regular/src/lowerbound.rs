//! The lower-bound family `Σ_h`: systems whose languages between `x_n` and
//! `y_n` force runs of tower length, with generators for the maxed-out and
//! exponential runs and brute-force checks at tiny scale.
//!
//! Counters are laid out as `x_1..x_h, y_1..y_h, x̄_1..x̄_h, ȳ_1..ȳ_h,
//! step_1..step_h`. Transitions are `t_i_1..t_i_6` for each `i`, then
//! `r_1..r_h`, then `f_1 g_1 … f_h g_h`.

use std::io;

use num_bigint::{BigInt, BigUint};
use thiserror::Error;

use crate::cvas::{member, simulate, Configuration, Cvas, CvasError, Letter, Run, Transition, Word};
use crate::instance::Instance;
use crate::rational::Rational;

/// Errors of the lower-bound generators.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LowerBoundError {
    #[error("the family is defined for h ≥ 1")]
    ZeroHeight,
    #[error("the configurations are defined for n ≥ 1")]
    ZeroScale,
    #[error("scale cap exceeded: {0}")]
    Cap(String),
    #[error("generated run is invalid: {0}")]
    Run(String),
    #[error(transparent)]
    Cvas(#[from] CvasError),
}

/// A member of the family together with its named words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowerBoundInstance {
    pub h: usize,
    pub sys: Cvas,
    /// `w_i = t_{i,1} ⋯ t_{i,6}`.
    pub w: Vec<Word>,
    /// `r_i`.
    pub r: Vec<Letter>,
    /// `u = f_1 g_1 ⋯ f_h g_h`.
    pub u: Word,
}

/// Index of `x_i` (1-based `i`).
pub fn cx(_h: usize, i: usize) -> usize {
    i - 1
}
/// Index of `y_i`.
pub fn cy(h: usize, i: usize) -> usize {
    h + i - 1
}
/// Index of `x̄_i`.
pub fn cxbar(h: usize, i: usize) -> usize {
    2 * h + i - 1
}
/// Index of `ȳ_i`.
pub fn cybar(h: usize, i: usize) -> usize {
    3 * h + i - 1
}
/// Index of `step_i`.
pub fn cstep(h: usize, i: usize) -> usize {
    4 * h + i - 1
}

/// Counter names in layout order.
pub fn counter_names(h: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(5 * h);
    for prefix in ["x", "y", "xbar", "ybar", "step"] {
        for i in 1..=h {
            out.push(format!("{prefix}_{i}"));
        }
    }
    out
}

/// Builds `Σ_h`.
pub fn generate(h: usize) -> Result<LowerBoundInstance, LowerBoundError> {
    if h == 0 {
        return Err(LowerBoundError::ZeroHeight);
    }
    let d = 5 * h;
    // x̂_i = x_i − x̄_i and ŷ_i = y_i − ȳ_i, scaled.
    let xhat = |v: &mut Vec<i64>, i: usize, s: i64| {
        v[cx(h, i)] += s;
        v[cxbar(h, i)] -= s;
    };
    let yhat = |v: &mut Vec<i64>, i: usize, s: i64| {
        v[cy(h, i)] += s;
        v[cybar(h, i)] -= s;
    };
    let mut transitions = Vec::new();
    let mut push = |label: String, effect: Vec<i64>| {
        transitions.push(Transition { label, effect });
        transitions.len() - 1
    };
    let mut w = Vec::new();
    for i in 1..=h {
        let mut t1 = vec![0; d];
        xhat(&mut t1, i, -2);
        yhat(&mut t1, i, -1);
        for j in i + 1..=h {
            xhat(&mut t1, j, -2);
            yhat(&mut t1, j, -2);
        }
        let mut t2 = vec![0; d];
        xhat(&mut t2, i, 1);
        t2[cstep(h, i)] = 1;
        let mut t3 = vec![0; d];
        xhat(&mut t3, i, -1);
        t3[cstep(h, i)] = 1;
        let mut t4 = vec![0; d];
        for j in i..=h {
            xhat(&mut t4, j, 1);
            yhat(&mut t4, j, 1);
        }
        let mut t5 = vec![0; d];
        yhat(&mut t5, i, -1);
        t5[cstep(h, i)] = 1;
        let mut t6 = vec![0; d];
        yhat(&mut t6, i, 1);
        t6[cstep(h, i)] = 1;
        let word = [t1, t2, t3, t4, t5, t6]
            .into_iter()
            .enumerate()
            .map(|(k, e)| push(format!("t_{i}_{}", k + 1), e))
            .collect();
        w.push(word);
    }
    let mut r = Vec::new();
    for i in 1..=h {
        let mut e = vec![0; d];
        e[cxbar(h, i)] = -1;
        for j in i + 1..=h {
            e[cxbar(h, j)] = -1;
            e[cybar(h, j)] = -1;
        }
        r.push(push(format!("r_{i}"), e));
    }
    let mut u = Vec::new();
    for j in 1..=h {
        let mut f = vec![0; d];
        f[cx(h, j)] = -1;
        u.push(push(format!("f_{j}"), f));
        let mut g = vec![0; d];
        g[cy(h, j)] = -1;
        u.push(push(format!("g_{j}"), g));
    }
    let sys = Cvas::new(d, transitions)?;
    Ok(LowerBoundInstance { h, sys, w, r, u })
}

/// `x_n` (every `x_i`, `y_i` at `1/n`) and `y_n` (every `step_i` at 4).
pub fn configs(h: usize, n: u64) -> Result<(Configuration, Configuration), LowerBoundError> {
    if h == 0 {
        return Err(LowerBoundError::ZeroHeight);
    }
    if n == 0 {
        return Err(LowerBoundError::ZeroScale);
    }
    let d = 5 * h;
    let mut x = vec![Rational::zero(); d];
    let mut y = vec![Rational::zero(); d];
    let inv = Rational::from_bigints(BigInt::from(1), BigInt::from(n));
    for i in 1..=h {
        x[cx(h, i)] = inv.clone();
        x[cy(h, i)] = inv.clone();
        y[cstep(h, i)] = Rational::from_int(4);
    }
    Ok((Configuration::new(x)?, Configuration::new(y)?))
}

impl LowerBoundInstance {
    /// `w_1^{ℓ_1} r_1 ⋯ w_h^{ℓ_h} r_h u`.
    pub fn word(&self, exponents: &[u64]) -> Word {
        let mut out = Vec::new();
        for (i, &l) in exponents.iter().enumerate() {
            for _ in 0..l {
                out.extend(&self.w[i]);
            }
            out.push(self.r[i]);
        }
        out.extend(&self.u);
        out
    }

    /// The instance file for endpoints `x_n`, `y_n`.
    pub fn instance(&self, n: u64) -> Result<Instance, LowerBoundError> {
        let (source, target) = configs(self.h, n)?;
        Ok(Instance {
            sys: self.sys.clone(),
            source,
            target,
        })
    }

    /// No `w_i` or `r_i` touches a counter indexed `j < i`.
    pub fn has_no_effect_property(&self) -> bool {
        let h = self.h;
        (1..=h).all(|i| {
            let letters = self.w[i - 1].iter().chain(std::iter::once(&self.r[i - 1]));
            letters.into_iter().all(|&a| {
                let e = self.sys.effect(a);
                (1..i).all(|j| [cx(h, j), cy(h, j), cxbar(h, j), cybar(h, j), cstep(h, j)].iter().all(|&c| e[c] == 0))
            })
        })
    }
}

/// `exp_0(n) = n`, `exp_{h+1}(n) = 2^{exp_h(n)}`; `None` once the value
/// no longer fits a practical exponent.
pub fn exp_h(h: usize, n: u64) -> Option<BigUint> {
    let mut v = BigUint::from(n);
    for _ in 0..h {
        let e: u32 = u32::try_from(&v).ok().filter(|&e| e <= 1 << 20)?;
        v = BigUint::from(1u8) << e;
    }
    Some(v)
}

/// Largest total word length the run generators accept.
pub const MAX_RUN_LEN: u64 = 1_000_000;

/// `M_1 = n`, `M_{i+1} = M_i · 2^{M_i}`.
pub fn maxed_exponents(h: usize, n: u64) -> Result<Vec<u64>, LowerBoundError> {
    let mut m = vec![n];
    for _ in 1..h {
        let last = *m.last().unwrap();
        let next = u32::try_from(last)
            .ok()
            .and_then(|e| 1u64.checked_shl(e).filter(|_| e < 64))
            .and_then(|p| p.checked_mul(last))
            .filter(|&v| v <= MAX_RUN_LEN)
            .ok_or_else(|| LowerBoundError::Cap(format!("exponent after {last} is too large")))?;
        m.push(next);
    }
    Ok(m)
}

fn frac(num: u64, den: BigInt) -> Rational {
    Rational::from_bigints(BigInt::from(num), den)
}

fn pow2(j: u64) -> BigInt {
    BigInt::from(1) << j
}

/// Appends `u` with each `f_j`, `g_j` fired at the current counter value.
fn reset_steps(inst: &LowerBoundInstance, start: &Configuration, steps: &mut Vec<(Rational, Letter)>) -> Result<(), LowerBoundError> {
    let h = inst.h;
    let run = simulate(start, steps, &inst.sys).map_err(|e| LowerBoundError::Run(e.to_string()))?;
    let end = run.end();
    for j in 1..=h {
        steps.push((end.get(cx(h, j)).clone(), inst.u[2 * (j - 1)]));
        steps.push((end.get(cy(h, j)).clone(), inst.u[2 * (j - 1) + 1]));
    }
    Ok(())
}

fn finish(inst: &LowerBoundInstance, n: u64, steps: Vec<(Rational, Letter)>) -> Result<Run, LowerBoundError> {
    let (x, y) = configs(inst.h, n)?;
    let run = simulate(&x, &steps, &inst.sys).map_err(|e| LowerBoundError::Run(e.to_string()))?;
    if run.end() != &y {
        return Err(LowerBoundError::Run("run does not end at y_n".into()));
    }
    Ok(run)
}

/// The maxed-out run over `w_1^{M_1} r_1 ⋯ w_h^{M_h} r_h u` from `x_n` to
/// `y_n`: the `j`-th copy of `w_i` (from 0) fires `t_{i,1}` and `t_{i,4}`
/// with `1/(2^{j+1} k)` and the step transitions with `1/k`, where
/// `k = M_i`; `r_i` fires with `1/k − 1/(2^k k)`.
pub fn maxed_out_run(h: usize, n: u64) -> Result<Run, LowerBoundError> {
    let inst = generate(h)?;
    let (x, _) = configs(h, n)?;
    let m = maxed_exponents(h, n)?;
    if m.iter().map(|&v| 6 * v + 1).sum::<u64>() > MAX_RUN_LEN {
        return Err(LowerBoundError::Cap("run too long".into()));
    }
    let mut steps = Vec::new();
    for (i, &k) in m.iter().enumerate() {
        let kk = BigInt::from(k);
        let full = frac(1, kk.clone());
        for j in 0..k {
            let small = frac(1, pow2(j + 1) * &kk);
            let w = &inst.w[i];
            steps.push((small.clone(), w[0]));
            steps.push((full.clone(), w[1]));
            steps.push((full.clone(), w[2]));
            steps.push((small, w[3]));
            steps.push((full.clone(), w[4]));
            steps.push((full.clone(), w[5]));
        }
        steps.push((&full - &frac(1, pow2(k) * &kk), inst.r[i]));
    }
    reset_steps(&inst, &x, &mut steps)?;
    finish(&inst, n, steps)
}

/// `γ` as displayed for the exponential schedule: the solution of
/// `γ(1/(2k) + 4) = 4`.
pub fn displayed_gamma(k: u64) -> Rational {
    let four = Rational::from_int(4);
    let den = &frac(1, BigInt::from(2 * k)) + &four;
    &four / &den
}

/// `γ` that makes `2k` copies of `w_i` add exactly 4 to `step_i`:
/// `2k · 2γ(1/(2k²) + 1/k) = 4`, i.e. `γ = 2k/(2k+1)`.
pub fn exact_gamma(k: u64) -> Rational {
    Rational::from_bigints(BigInt::from(2 * k), BigInt::from(2 * k + 1))
}

/// The exponential run over `w_1^{2n} r_1 w_2^{4n} r_2 ⋯ w_h^{2^h n} r_h u`
/// from `x_n` to `y_n`. Stage `i` uses `k = 2^{i-1} n`: `t_{i,1}` and
/// `t_{i,4}` fire with `1/(4k²)`, `t_{i,2}`, `t_{i,3}` with `γ/(2k²)`,
/// `t_{i,5}`, `t_{i,6}` with `γ/k`, and `r_i` with `1/(2k)`.
pub fn exponential_run(h: usize, n: u64) -> Result<Run, LowerBoundError> {
    let inst = generate(h)?;
    let (x, _) = configs(h, n)?;
    let total: u64 = (1..=h as u32).map(|i| 6 * (n << i) + 1).sum();
    if h > 20 || total > MAX_RUN_LEN {
        return Err(LowerBoundError::Cap("run too long".into()));
    }
    let mut steps = Vec::new();
    for i in 0..h {
        let k = n << i;
        let kk = BigInt::from(k);
        let gamma = exact_gamma(k);
        let quarter = frac(1, BigInt::from(4) * &kk * &kk);
        let small = &gamma * &frac(1, BigInt::from(2) * &kk * &kk);
        let big = &gamma * &frac(1, kk.clone());
        let w = &inst.w[i];
        for _ in 0..2 * k {
            steps.push((quarter.clone(), w[0]));
            steps.push((small.clone(), w[1]));
            steps.push((small.clone(), w[2]));
            steps.push((quarter.clone(), w[3]));
            steps.push((big.clone(), w[4]));
            steps.push((big.clone(), w[5]));
        }
        steps.push((frac(1, BigInt::from(2) * &kk), inst.r[i]));
    }
    reset_steps(&inst, &x, &mut steps)?;
    finish(&inst, n, steps)
}

/// All short exponent tuples (`ℓ_1 ≤ n`, `ℓ_{i+1} ≤ ℓ_i 2^{ℓ_i}`) whose
/// word has a run from `x_n` to `y_n`. Restricted to `h ≤ 2`, `n ≤ 3`.
pub fn brute_force_short_runs(inst: &LowerBoundInstance, n: u64) -> Result<Vec<Vec<u64>>, LowerBoundError> {
    if inst.h > 2 || n > 3 {
        return Err(LowerBoundError::Cap(format!("brute force limited to h ≤ 2, n ≤ 3 (got h={}, n={n})", inst.h)));
    }
    let (x, y) = configs(inst.h, n)?;
    let mut tuples: Vec<Vec<u64>> = (0..=n).map(|l| vec![l]).collect();
    for _ in 1..inst.h {
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                let last = *t.last().unwrap();
                (0..=last << last).map(move |l| {
                    let mut t = t.clone();
                    t.push(l);
                    t
                })
            })
            .collect();
    }
    let mut out = Vec::new();
    for t in tuples {
        if member(&inst.word(&t), &x, &y, &inst.sys)? {
            out.push(t);
        }
    }
    Ok(out)
}

/// Removes every non-empty block `w_1^r` (`1 ≤ r ≤ ℓ_1`) from the maxed-out
/// word of `Σ_1` and reports `(r, still a member)` for each.
pub fn pumping_check(n: u64) -> Result<Vec<(u64, bool)>, LowerBoundError> {
    let inst = generate(1)?;
    let (x, y) = configs(1, n)?;
    let mut out = Vec::new();
    for r in 1..=n {
        let w = inst.word(&[n - r]);
        out.push((r, member(&w, &x, &y, &inst.sys)?));
    }
    Ok(out)
}

/// One row of the benchmark report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub h: usize,
    pub n: u64,
    pub run_length: usize,
    pub nfa_states: Option<usize>,
    pub dfa_states: Option<usize>,
}

/// Writes rows as CSV with header `h,n,run_length,nfa_states,dfa_states`;
/// missing sizes are empty fields.
pub fn write_report<W: io::Write>(rows: &[ReportRow], out: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["h", "n", "run_length", "nfa_states", "dfa_states"])?;
    let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.h.to_string(),
            r.n.to_string(),
            r.run_length.to_string(),
            opt(r.nfa_states),
            opt(r.dfa_states),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn sizes() {
        let s1 = generate(1).unwrap();
        assert_eq!((s1.sys.dim(), s1.sys.len()), (5, 9));
        // 6h letters for the w_i, h resets and 2h letters in u.
        let s2 = generate(2).unwrap();
        assert_eq!((s2.sys.dim(), s2.sys.len()), (10, 2 * 6 + 2 + 2 * 2));
        assert!(generate(3).unwrap().has_no_effect_property());
        assert_eq!(generate(0), Err(LowerBoundError::ZeroHeight));
    }

    #[test]
    fn golden_vectors_h2() {
        let s = generate(2).unwrap();
        let e = |l: &str| s.sys.effect(s.sys.letter(l).unwrap()).to_vec();
        // layout: x1 x2 y1 y2 x̄1 x̄2 ȳ1 ȳ2 step1 step2
        assert_eq!(e("t_1_1"), vec![-2, -2, -1, -2, 2, 2, 1, 2, 0, 0]);
        assert_eq!(e("t_1_2"), vec![1, 0, 0, 0, -1, 0, 0, 0, 1, 0]);
        assert_eq!(e("t_1_4"), vec![1, 1, 1, 1, -1, -1, -1, -1, 0, 0]);
        assert_eq!(e("t_2_4"), vec![0, 1, 0, 1, 0, -1, 0, -1, 0, 0]);
        assert_eq!(e("t_2_5"), vec![0, 0, 0, -1, 0, 0, 0, 1, 0, 1]);
        assert_eq!(e("r_1"), vec![0, 0, 0, 0, -1, -1, 0, -1, 0, 0]);
        assert_eq!(e("r_2"), vec![0, 0, 0, 0, 0, -1, 0, 0, 0, 0]);
        assert_eq!(e("g_2"), vec![0, 0, 0, -1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(s.sys.format_word(&s.u), "f_1.g_1.f_2.g_2");
    }

    #[test]
    fn configurations() {
        let (x, y) = configs(1, 2).unwrap();
        assert_eq!(x, Configuration::from_fracs(&[(1, 2), (1, 2), (0, 1), (0, 1), (0, 1)]));
        assert_eq!(y, Configuration::from_fracs(&[(0, 1), (0, 1), (0, 1), (0, 1), (4, 1)]));
        let (x, y) = configs(2, 3).unwrap();
        assert_eq!(x.values().iter().filter(|v| **v == q(1, 3)).count(), 4);
        assert_eq!(y.values().iter().filter(|v| **v == q(4, 1)).count(), 2);
        assert_eq!(configs(1, 0), Err(LowerBoundError::ZeroScale));
    }

    #[test]
    fn maxed_runs() {
        let r = maxed_out_run(1, 2).unwrap();
        assert_eq!(r.len(), 6 * 2 + 1 + 2);
        let r = maxed_out_run(1, 3).unwrap();
        // x_1 after the w-phase, just before r_1.
        assert_eq!(r.configs()[18].get(0), &q(1, 24));
        let r = maxed_out_run(2, 2).unwrap();
        assert_eq!(r.len(), 66);
    }

    #[test]
    fn exponential_runs_and_gamma() {
        assert_eq!(displayed_gamma(2), q(16, 17));
        assert_eq!(exact_gamma(2), q(4, 5));
        let inst = generate(1).unwrap();
        let r = exponential_run(1, 2).unwrap();
        assert_eq!(r.word(), inst.word(&[4]));
        // After w_1^{2k} the precision counters are halved: 1/(2k) = 1/4.
        assert_eq!(r.configs()[24].get(0), &q(1, 4));
        assert_eq!(r.configs()[24].get(1), &q(1, 2));
        exponential_run(2, 2).unwrap();
    }

    #[test]
    fn brute_force_uniqueness() {
        let s1 = generate(1).unwrap();
        assert_eq!(brute_force_short_runs(&s1, 2).unwrap(), vec![vec![2]]);
        assert!(matches!(brute_force_short_runs(&s1, 4), Err(LowerBoundError::Cap(_))));
    }

    #[test]
    fn pumping_breaks_membership() {
        assert!(pumping_check(2).unwrap().iter().all(|&(_, m)| !m));
    }

    #[test]
    fn exp_helper() {
        assert_eq!(exp_h(0, 3), Some(BigUint::from(3u8)));
        assert_eq!(exp_h(2, 2), Some(BigUint::from(16u8)));
        assert_eq!(exp_h(5, 3), None);
    }

    #[test]
    fn csv_report() {
        let rows = vec![ReportRow {
            h: 1,
            n: 2,
            run_length: 15,
            nfa_states: None,
            dfa_states: Some(4),
        }];
        let mut buf = Vec::new();
        write_report(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "h,n,run_length,nfa_states,dfa_states\n1,2,15,,4\n");
    }
}
