//! Continuous vector addition systems: syntax and fractional-firing semantics.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::linear::{solve_feasibility, BudgetExhausted, LinearSystem, Relation, StepBudget};
use crate::rational::Rational;

/// A letter is the index of a transition in its [`Cvas`]; the declaration
/// order is the alphabet order used for every tie-break.
pub type Letter = usize;

/// A word over the transition alphabet.
pub type Word = Vec<Letter>;

/// A labelled integer effect vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    pub label: String,
    pub effect: Vec<i64>,
}

/// Errors raised by CVAS construction and semantics.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CvasError {
    #[error("duplicate transition label `{0}`")]
    DuplicateLabel(String),
    #[error("transition `{label}` has {found} components, expected {expected}")]
    EffectLength {
        label: String,
        expected: usize,
        found: usize,
    },
    #[error("configuration has {found} components, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("configuration component {counter} is negative")]
    NegativeComponent { counter: usize },
    #[error("firing fraction {0} is not in (0, 1]")]
    BadFraction(Rational),
    #[error("step blocked: counter {counter} would become negative")]
    StepBlocked { counter: usize },
    #[error("step {index} blocked: counter {counter} would become negative")]
    RunBlocked { index: usize, counter: usize },
    #[error("unknown transition label `{0}`")]
    UnknownLabel(String),
    #[error("unknown letter index {0}")]
    UnknownLetter(usize),
    #[error(transparent)]
    Budget(#[from] BudgetExhausted),
}

/// A finite set of labelled transitions acting on `dim` counters. The
/// alphabet may be empty and `dim` may be zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cvas {
    dim: usize,
    transitions: Vec<Transition>,
    index: HashMap<String, Letter>,
}

impl Cvas {
    pub fn new(dim: usize, transitions: Vec<Transition>) -> Result<Self, CvasError> {
        let mut index = HashMap::new();
        for (i, t) in transitions.iter().enumerate() {
            if t.effect.len() != dim {
                return Err(CvasError::EffectLength {
                    label: t.label.clone(),
                    expected: dim,
                    found: t.effect.len(),
                });
            }
            if index.insert(t.label.clone(), i).is_some() {
                return Err(CvasError::DuplicateLabel(t.label.clone()));
            }
        }
        Ok(Cvas {
            dim,
            transitions,
            index,
        })
    }

    /// Convenience constructor from `(label, effect)` pairs.
    pub fn from_pairs(dim: usize, pairs: &[(&str, &[i64])]) -> Result<Self, CvasError> {
        Self::new(
            dim,
            pairs
                .iter()
                .map(|(l, e)| Transition {
                    label: l.to_string(),
                    effect: e.to_vec(),
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Alphabet size.
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn effect(&self, a: Letter) -> &[i64] {
        &self.transitions[a].effect
    }

    pub fn label(&self, a: Letter) -> &str {
        &self.transitions[a].label
    }

    pub fn labels(&self) -> Vec<String> {
        self.transitions.iter().map(|t| t.label.clone()).collect()
    }

    pub fn letter(&self, label: &str) -> Result<Letter, CvasError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| CvasError::UnknownLabel(label.to_string()))
    }

    /// Whether every label is a single character, in which case words print
    /// as plain strings.
    pub fn single_char_labels(&self) -> bool {
        self.transitions.iter().all(|t| t.label.chars().count() == 1)
    }

    /// Parses a word. Tokens may be separated by whitespace, `.` or `,`; with
    /// single-character labels a token is split into characters. `ε` and the
    /// empty string denote the empty word.
    pub fn parse_word(&self, s: &str) -> Result<Word, CvasError> {
        let mut out = Vec::new();
        for tok in s.split(|c: char| c.is_whitespace() || c == '.' || c == ',') {
            if tok.is_empty() || tok == "ε" {
                continue;
            }
            if let Some(&a) = self.index.get(tok) {
                out.push(a);
            } else if self.single_char_labels() {
                for ch in tok.chars() {
                    out.push(self.letter(&ch.to_string())?);
                }
            } else {
                return Err(CvasError::UnknownLabel(tok.to_string()));
            }
        }
        Ok(out)
    }

    /// Renders a word; `ε` for the empty word.
    pub fn format_word(&self, w: &[Letter]) -> String {
        if w.is_empty() {
            return "ε".to_string();
        }
        let sep = if self.single_char_labels() { "" } else { "." };
        w.iter()
            .map(|&a| self.label(a))
            .collect::<Vec<_>>()
            .join(sep)
    }

    fn check_word(&self, w: &[Letter]) -> Result<(), CvasError> {
        match w.iter().find(|&&a| a >= self.len()) {
            Some(&a) => Err(CvasError::UnknownLetter(a)),
            None => Ok(()),
        }
    }

    fn check_config(&self, x: &Configuration) -> Result<(), CvasError> {
        if x.dim() != self.dim {
            return Err(CvasError::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        Ok(())
    }
}

/// A vector of non-negative rationals.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(Vec<Rational>);

impl Configuration {
    pub fn new(values: Vec<Rational>) -> Result<Self, CvasError> {
        if let Some(counter) = values.iter().position(Rational::is_negative) {
            return Err(CvasError::NegativeComponent { counter });
        }
        Ok(Configuration(values))
    }

    pub fn zero(dim: usize) -> Self {
        Configuration(vec![Rational::zero(); dim])
    }

    /// From `(numerator, denominator)` pairs; panics on negative values.
    pub fn from_fracs(values: &[(i64, i64)]) -> Self {
        Self::new(values.iter().map(|&(n, d)| Rational::new(n, d)).collect())
            .expect("non-negative configuration")
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[Rational] {
        &self.0
    }

    pub fn get(&self, c: usize) -> &Rational {
        &self.0[c]
    }

    /// Indices of the strictly positive counters.
    pub fn support(&self) -> Vec<bool> {
        self.0.iter().map(Rational::is_positive).collect()
    }

    pub fn scale(&self, c: &Rational) -> Result<Self, CvasError> {
        Self::new(self.0.iter().map(|v| v * c).collect())
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A validated run: a start configuration, fractional steps, and every
/// intermediate configuration (`configs[0]` is the start).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    steps: Vec<(Rational, Letter)>,
    configs: Vec<Configuration>,
}

impl Run {
    pub fn start(&self) -> &Configuration {
        &self.configs[0]
    }

    pub fn end(&self) -> &Configuration {
        self.configs.last().expect("a run has a start")
    }

    pub fn steps(&self) -> &[(Rational, Letter)] {
        &self.steps
    }

    /// `configs()[i]` is the configuration after `i` steps.
    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn word(&self) -> Word {
        self.steps.iter().map(|(_, a)| *a).collect()
    }

    pub fn fractions(&self) -> Vec<Rational> {
        self.steps.iter().map(|(f, _)| f.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// One step `x --alpha t--> x + alpha·t`.
pub fn step(x: &Configuration, alpha: &Rational, effect: &[i64]) -> Result<Configuration, CvasError> {
    if !alpha.is_positive() || *alpha > Rational::one() {
        return Err(CvasError::BadFraction(alpha.clone()));
    }
    let values: Vec<Rational> = x
        .0
        .iter()
        .zip(effect)
        .map(|(v, &e)| {
            if e == 0 {
                v.clone()
            } else {
                v + &(alpha * &Rational::from_int(e))
            }
        })
        .collect();
    match values.iter().position(Rational::is_negative) {
        Some(counter) => Err(CvasError::StepBlocked { counter }),
        None => Ok(Configuration(values)),
    }
}

/// Replays a firing sequence from `x`, failing at the first blocked step.
pub fn simulate(
    x: &Configuration,
    firing: &[(Rational, Letter)],
    sys: &Cvas,
) -> Result<Run, CvasError> {
    sys.check_config(x)?;
    let mut configs = Vec::with_capacity(firing.len() + 1);
    configs.push(x.clone());
    for (index, (alpha, a)) in firing.iter().enumerate() {
        if *a >= sys.len() {
            return Err(CvasError::UnknownLetter(*a));
        }
        let next = step(configs.last().unwrap(), alpha, sys.effect(*a)).map_err(|e| match e {
            CvasError::StepBlocked { counter } => CvasError::RunBlocked { index, counter },
            other => other,
        })?;
        configs.push(next);
    }
    Ok(Run {
        steps: firing.to_vec(),
        configs,
    })
}

/// [`simulate`] over labels instead of letter indices.
pub fn simulate_labels(
    x: &Configuration,
    firing: &[(Rational, &str)],
    sys: &Cvas,
) -> Result<Run, CvasError> {
    let steps = firing
        .iter()
        .map(|(f, l)| Ok((f.clone(), sys.letter(l)?)))
        .collect::<Result<Vec<_>, CvasError>>()?;
    simulate(x, &steps, sys)
}

/// The exact system deciding `x --w--> y`: variables are the fractions,
/// `0 < α_i ≤ 1`, every prefix configuration is non-negative, and the final
/// configuration equals `y`.
pub fn membership_system(w: &[Letter], x: &Configuration, y: &Configuration, sys: &Cvas) -> LinearSystem {
    let n = w.len();
    let d = sys.dim();
    let mut s = LinearSystem::new(n);
    for i in 0..n {
        s.push_sparse(&[(i, Rational::one())], Relation::Gt, Rational::zero());
        s.push_sparse(&[(i, Rational::one())], Relation::Le, Rational::one());
    }
    // A counter's minimum along the word is attained right after a
    // decrement, so prefix constraints are only needed there.
    for (k, &a) in w.iter().enumerate() {
        for c in 0..d {
            if sys.effect(a)[c] < 0 {
                let terms: Vec<(usize, Rational)> = w[..=k]
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| sys.effect(b)[c] != 0)
                    .map(|(j, &b)| (j, Rational::from_int(sys.effect(b)[c])))
                    .collect();
                s.push_sparse(&terms, Relation::Ge, -x.get(c));
            }
        }
    }
    for c in 0..d {
        let terms: Vec<(usize, Rational)> = w
            .iter()
            .enumerate()
            .filter(|(_, &b)| sys.effect(b)[c] != 0)
            .map(|(j, &b)| (j, Rational::from_int(sys.effect(b)[c])))
            .collect();
        s.push_sparse(&terms, Relation::Eq, y.get(c) - x.get(c));
    }
    s
}

/// Fractions witnessing `x --w--> y`, charging one solver step.
pub fn witness_fractions_budgeted(
    w: &[Letter],
    x: &Configuration,
    y: &Configuration,
    sys: &Cvas,
    budget: &StepBudget,
) -> Result<Option<Vec<Rational>>, CvasError> {
    sys.check_word(w)?;
    sys.check_config(x)?;
    sys.check_config(y)?;
    budget.charge()?;
    let s = membership_system(w, x, y, sys);
    Ok(solve_feasibility(&s).expect("well-formed membership system"))
}

/// Whether some fractions make `w` firable from `x` ending exactly at `y`.
pub fn member(w: &[Letter], x: &Configuration, y: &Configuration, sys: &Cvas) -> Result<bool, CvasError> {
    Ok(witness_fractions(w, x, y, sys)?.is_some())
}

/// Concrete fractions for a member word, or `None`.
pub fn witness_fractions(
    w: &[Letter],
    x: &Configuration,
    y: &Configuration,
    sys: &Cvas,
) -> Result<Option<Vec<Rational>>, CvasError> {
    witness_fractions_budgeted(w, x, y, sys, &StepBudget::unlimited())
}

/// A full witness run for a member word, or `None`.
pub fn witness_run(w: &[Letter], x: &Configuration, y: &Configuration, sys: &Cvas) -> Result<Option<Run>, CvasError> {
    Ok(match witness_fractions(w, x, y, sys)? {
        Some(fr) => {
            let steps: Vec<_> = fr.into_iter().zip(w.iter().copied()).collect();
            Some(simulate(x, &steps, sys)?)
        }
        None => None,
    })
}

/// Duplicates every step, halving its fraction: a run over `t1 … tn`
/// becomes a run over `t1 t1 … tn tn` with the same endpoints.
pub fn lift_duplication(r: &Run, sys: &Cvas) -> Run {
    let half = Rational::new(1, 2);
    let steps: Vec<(Rational, Letter)> = r
        .steps
        .iter()
        .flat_map(|(f, a)| {
            let h = f * &half;
            [(h.clone(), *a), (h, *a)]
        })
        .collect();
    simulate(r.start(), &steps, sys).expect("halved steps stay non-negative")
}
