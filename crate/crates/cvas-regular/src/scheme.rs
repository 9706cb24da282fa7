//! Path-schemes: words interleaved with star and gathering bubbles, their
//! weights, decompositions, flattening, substitution, upward closures and
//! complements.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::automata::{check_gathering, Nfa, StateId};
use crate::cvas::{Cvas, Letter, Word};

/// Errors of the path-scheme calculus.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemeError {
    #[error("invalid gathering: {0}")]
    InvalidGathering(String),
    #[error("word does not match the gathering")]
    NoMatch,
    #[error("bubble index {index} out of range 1..={count}")]
    BubbleIndex { index: usize, count: usize },
    #[error("scheme needs {expected} words for {bubbles} bubbles, got {found}")]
    Shape {
        expected: usize,
        bubbles: usize,
        found: usize,
    },
    #[error("factor is not valid for the scheme")]
    InvalidFactor,
    #[error("weight vectors of lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("scheme is not pre-perfect")]
    NotPrePerfect,
    #[error("scheme notation, byte {pos}: {message}")]
    Parse { pos: usize, message: String },
}

/// A gathering `X_{a_1…a_n}^{b_1…b_n}` given by its first- and
/// last-appearance records.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gathering {
    first: Vec<Letter>,
    last: Vec<Letter>,
}

impl Gathering {
    pub fn new(first: Vec<Letter>, last: Vec<Letter>) -> Result<Self, SchemeError> {
        check_gathering(&first, &last).map_err(|e| SchemeError::InvalidGathering(e.to_string()))?;
        Ok(Gathering { first, last })
    }

    pub fn first(&self) -> &[Letter] {
        &self.first
    }

    pub fn last(&self) -> &[Letter] {
        &self.last
    }

    pub fn letters(&self) -> BTreeSet<Letter> {
        self.first.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }
}

/// A star `X_A` or a gathering.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bubble {
    Star(BTreeSet<Letter>),
    Gathering(Gathering),
}

impl Bubble {
    pub fn star(letters: &[Letter]) -> Self {
        Bubble::Star(letters.iter().copied().collect())
    }

    pub fn gathering(first: &[Letter], last: &[Letter]) -> Result<Self, SchemeError> {
        Ok(Bubble::Gathering(Gathering::new(first.to_vec(), last.to_vec())?))
    }

    pub fn letters(&self) -> BTreeSet<Letter> {
        match self {
            Bubble::Star(a) => a.clone(),
            Bubble::Gathering(g) => g.letters(),
        }
    }

    /// Number of distinct letters, the bubble's contribution to the weight.
    pub fn size(&self) -> usize {
        match self {
            Bubble::Star(a) => a.len(),
            Bubble::Gathering(g) => g.len(),
        }
    }

    pub fn accepts(&self, w: &[Letter]) -> bool {
        match self {
            Bubble::Star(a) => w.iter().all(|x| a.contains(x)),
            Bubble::Gathering(g) => matches_gathering(w, g),
        }
    }
}

/// `u_0 X_1 u_1 … X_n u_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathScheme {
    words: Vec<Word>,
    bubbles: Vec<Bubble>,
}

/// Per-bubble parts `(w_1, …, w_n)` of a word in `L(ρ)`.
pub type RhoFactor = Vec<Word>;

impl Default for PathScheme {
    fn default() -> Self {
        Self::epsilon()
    }
}

impl PathScheme {
    pub fn new(words: Vec<Word>, bubbles: Vec<Bubble>) -> Result<Self, SchemeError> {
        if words.len() != bubbles.len() + 1 {
            return Err(SchemeError::Shape {
                expected: bubbles.len() + 1,
                bubbles: bubbles.len(),
                found: words.len(),
            });
        }
        Ok(PathScheme { words, bubbles })
    }

    pub fn epsilon() -> Self {
        Self::word(Vec::new())
    }

    pub fn word(w: Word) -> Self {
        PathScheme {
            words: vec![w],
            bubbles: Vec::new(),
        }
    }

    pub fn bubble(b: Bubble) -> Self {
        PathScheme {
            words: vec![Vec::new(), Vec::new()],
            bubbles: vec![b],
        }
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn bubbles(&self) -> &[Bubble] {
        &self.bubbles
    }

    pub fn push_letter(&mut self, a: Letter) {
        self.words.last_mut().unwrap().push(a);
    }

    pub fn push_bubble(&mut self, b: Bubble) {
        self.bubbles.push(b);
        self.words.push(Vec::new());
    }

    /// Concatenation, merging the touching words.
    pub fn concat(&self, other: &PathScheme) -> PathScheme {
        let mut out = self.clone();
        out.words.last_mut().unwrap().extend(other.words[0].iter().copied());
        out.words.extend(other.words[1..].iter().cloned());
        out.bubbles.extend(other.bubbles.iter().cloned());
        out
    }

    /// All bubbles are gatherings.
    pub fn is_pre_perfect(&self) -> bool {
        self.bubbles.iter().all(|b| matches!(b, Bubble::Gathering(_)))
    }

    pub fn has_stars(&self) -> bool {
        !self.is_pre_perfect()
    }

    /// Drops empty stars (whose language is `{ε}`), merging neighbours.
    pub fn normalize(&self) -> PathScheme {
        let mut out = PathScheme::word(self.words[0].clone());
        for (b, u) in self.bubbles.iter().zip(&self.words[1..]) {
            if !matches!(b, Bubble::Star(a) if a.is_empty()) {
                out.push_bubble(b.clone());
            }
            out.words.last_mut().unwrap().extend(u.iter().copied());
        }
        out
    }

    /// Letters occurring anywhere in the scheme.
    pub fn letters(&self) -> BTreeSet<Letter> {
        let mut s: BTreeSet<Letter> = self.words.iter().flatten().copied().collect();
        for b in &self.bubbles {
            s.extend(b.letters());
        }
        s
    }

    /// Weight vector over an alphabet of `k` letters.
    pub fn weight(&self, k: usize) -> WeightVector {
        let mut counts = vec![0; k];
        for b in &self.bubbles {
            let s = b.size();
            if s > 0 {
                counts[s - 1] += 1;
            }
        }
        WeightVector(counts)
    }

    pub fn accepts(&self, w: &[Letter]) -> bool {
        !factorize_limited(w, self, 1).is_empty()
    }

    /// Textual notation: words as label strings, `[A:abc]` for stars,
    /// `[G:abc/bca]` for gatherings, `ε` for the empty scheme.
    pub fn notation(&self, sys: &Cvas) -> String {
        let fmt = |w: &[Letter]| if w.is_empty() { String::new() } else { sys.format_word(w) };
        let mut out = fmt(&self.words[0]);
        for (b, u) in self.bubbles.iter().zip(&self.words[1..]) {
            match b {
                Bubble::Star(a) => {
                    let v: Vec<Letter> = a.iter().copied().collect();
                    let _ = write!(out, "[A:{}]", fmt(&v));
                }
                Bubble::Gathering(g) => {
                    let _ = write!(out, "[G:{}/{}]", fmt(&g.first), fmt(&g.last));
                }
            }
            out.push_str(&fmt(u));
        }
        if out.is_empty() {
            out.push('ε');
        }
        out
    }

    /// Parses [`PathScheme::notation`].
    pub fn parse(s: &str, sys: &Cvas) -> Result<PathScheme, SchemeError> {
        let s = s.trim();
        if s == "ε" || s.is_empty() {
            return Ok(PathScheme::epsilon());
        }
        let perr = |pos: usize, message: String| SchemeError::Parse { pos, message };
        let word = |pos: usize, text: &str| sys.parse_word(text).map_err(|e| perr(pos, e.to_string()));
        let mut out = PathScheme::epsilon();
        let mut rest = s;
        let mut pos = 0;
        while !rest.is_empty() {
            match rest.find('[') {
                Some(0) => {
                    let close = rest.find(']').ok_or_else(|| perr(pos, "unclosed `[`".into()))?;
                    let inner = &rest[1..close];
                    if let Some(body) = inner.strip_prefix("A:") {
                        let letters = word(pos + 3, body)?;
                        out.push_bubble(Bubble::Star(letters.into_iter().collect()));
                    } else if let Some(body) = inner.strip_prefix("G:") {
                        let (f, l) = body
                            .split_once('/')
                            .ok_or_else(|| perr(pos, "gathering needs `first/last`".into()))?;
                        let b = Bubble::gathering(&word(pos + 3, f)?, &word(pos + 4 + f.len(), l)?)
                            .map_err(|e| perr(pos, e.to_string()))?;
                        out.push_bubble(b);
                    } else {
                        return Err(perr(pos, "expected `[A:` or `[G:`".into()));
                    }
                    pos += close + 1;
                    rest = &rest[close + 1..];
                }
                next => {
                    let end = next.unwrap_or(rest.len());
                    let w = word(pos, &rest[..end])?;
                    out.words.last_mut().unwrap().extend(w);
                    pos += end;
                    rest = &rest[end..];
                }
            }
        }
        Ok(out)
    }
}

/// Bubble counts by number of distinct letters: component `i` (0-based)
/// counts bubbles with exactly `i + 1` letters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct WeightVector(pub Vec<usize>);

impl WeightVector {
    /// Lexicographic comparison from the last component downwards.
    pub fn cmp_lex(&self, other: &WeightVector) -> Result<std::cmp::Ordering, SchemeError> {
        if self.0.len() != other.0.len() {
            return Err(SchemeError::LengthMismatch(self.0.len(), other.0.len()));
        }
        Ok(self.0.iter().rev().cmp(other.0.iter().rev()))
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &WeightVector) -> WeightVector {
        WeightVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl std::fmt::Display for WeightVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

pub fn lex_less(v1: &WeightVector, v2: &WeightVector) -> Result<bool, SchemeError> {
    Ok(v1.cmp_lex(v2)? == std::cmp::Ordering::Less)
}

pub fn lex_leq(v1: &WeightVector, v2: &WeightVector) -> Result<bool, SchemeError> {
    Ok(v1.cmp_lex(v2)? != std::cmp::Ordering::Greater)
}

/// Letters ordered by first occurrence and by last occurrence.
pub fn appearance_records(w: &[Letter]) -> (Vec<Letter>, Vec<Letter>) {
    let mut first = Vec::new();
    let mut seen = HashSet::new();
    for &a in w {
        if seen.insert(a) {
            first.push(a);
        }
    }
    let mut last = Vec::new();
    seen.clear();
    for &a in w.iter().rev() {
        if seen.insert(a) {
            last.push(a);
        }
    }
    last.reverse();
    (first, last)
}

/// Position of the first occurrence of `a_n` and of the last occurrence of
/// `b_1` when `w` matches `g`.
fn gathering_split(w: &[Letter], g: &Gathering) -> Option<(usize, usize)> {
    let (first, last) = appearance_records(w);
    if first != g.first || last != g.last {
        return None;
    }
    let a_n = *g.first.last().unwrap();
    let b_1 = g.last[0];
    let p = w.iter().position(|&x| x == a_n).unwrap();
    let q = w.iter().rposition(|&x| x == b_1).unwrap();
    // Every first appearance precedes every last appearance exactly when
    // the last first appearance precedes the first last appearance.
    (p < q).then_some((p, q))
}

pub fn matches_gathering(w: &[Letter], g: &Gathering) -> bool {
    gathering_split(w, g).is_some()
}

/// The factor between the first `a_n` and the last `b_1`.
pub fn center(w: &[Letter], g: &Gathering) -> Result<Word, SchemeError> {
    let (p, q) = gathering_split(w, g).ok_or(SchemeError::NoMatch)?;
    Ok(w[p + 1..q].to_vec())
}

/// Whether `u` is a (scattered) subword of `v`.
pub fn is_subword(u: &[Letter], v: &[Letter]) -> bool {
    let mut it = v.iter();
    u.iter().all(|a| it.any(|b| b == a))
}

/// Chain automaton for a scheme: letters append a fresh state, stars add
/// loops (or an optional looped state), gatherings run their flattening.
pub fn scheme_to_nfa(rho: &PathScheme, num_letters: usize) -> Nfa {
    struct Builder {
        nfa: Nfa,
        cur: Vec<StateId>,
        loops: HashMap<StateId, BTreeSet<Letter>>,
        fresh: bool,
    }
    impl Builder {
        fn letter(&mut self, a: Letter) {
            let t = self.nfa.add_state();
            for &s in &self.cur {
                self.nfa.add_edge(s, a, t);
            }
            self.cur = vec![t];
            self.fresh = true;
        }
        fn star(&mut self, set: &BTreeSet<Letter>) {
            if set.is_empty() {
                return;
            }
            if self.cur.len() == 1 {
                let s = self.cur[0];
                let have = self.loops.entry(s).or_default();
                if set.is_subset(have) {
                    return;
                }
                if self.fresh {
                    for &a in set {
                        self.nfa.add_edge(s, a, s);
                    }
                    have.extend(set.iter().copied());
                    self.fresh = false;
                    return;
                }
            }
            let t = self.nfa.add_state();
            for &s in &self.cur {
                for &a in set {
                    self.nfa.add_edge(s, a, t);
                }
            }
            for &a in set {
                self.nfa.add_edge(t, a, t);
            }
            self.loops.insert(t, set.clone());
            self.cur.push(t);
            self.fresh = false;
        }
    }
    let mut b = Builder {
        nfa: Nfa::empty(num_letters),
        cur: Vec::new(),
        loops: HashMap::new(),
        fresh: true,
    };
    let s0 = b.nfa.add_state();
    b.nfa.set_initial(s0);
    b.cur.push(s0);
    let flat = flatten_all(rho);
    for &a in &flat.words[0] {
        b.letter(a);
    }
    for (bub, u) in flat.bubbles.iter().zip(&flat.words[1..]) {
        if let Bubble::Star(set) = bub {
            b.star(set);
        }
        for &a in u {
            b.letter(a);
        }
    }
    for s in b.cur.clone() {
        b.nfa.set_accepting(s);
    }
    b.nfa
}

/// `fl(X)`: `a_1 X_{a_1} a_2 X_{a_1a_2} … a_n X_A b_1 X_{A∖b_1} … b_n`. The
/// central bubble `X_A` is bubble number `n` (1-based).
pub fn flatten(g: &Gathering) -> PathScheme {
    let n = g.len();
    let mut out = PathScheme::epsilon();
    let mut acc = BTreeSet::new();
    for &a in &g.first {
        out.push_letter(a);
        acc.insert(a);
        out.push_bubble(Bubble::Star(acc.clone()));
    }
    for (j, &b) in g.last.iter().enumerate() {
        out.push_letter(b);
        acc.remove(&b);
        if j + 1 < n {
            out.push_bubble(Bubble::Star(acc.clone()));
        }
    }
    out
}

/// Replaces every gathering by its flattening.
pub fn flatten_all(rho: &PathScheme) -> PathScheme {
    let mut out = PathScheme::word(rho.words[0].clone());
    for (b, u) in rho.bubbles.iter().zip(&rho.words[1..]) {
        match b {
            Bubble::Star(_) => out.push_bubble(b.clone()),
            Bubble::Gathering(g) => out = out.concat(&flatten(g)),
        }
        out.words.last_mut().unwrap().extend(u.iter().copied());
    }
    out
}

/// `ρ[ρ'/j]` with 1-based `j`.
pub fn substitute(rho: &PathScheme, inner: &PathScheme, j: usize) -> Result<PathScheme, SchemeError> {
    let n = rho.bubbles.len();
    if j == 0 || j > n {
        return Err(SchemeError::BubbleIndex { index: j, count: n });
    }
    let mut words: Vec<Word> = rho.words[..j - 1].to_vec();
    let mut left = rho.words[j - 1].clone();
    left.extend(inner.words[0].iter().copied());
    words.push(left);
    words.extend(inner.words[1..].iter().cloned());
    let tail = words.last_mut().unwrap();
    tail.extend(rho.words[j].iter().copied());
    words.extend(rho.words[j + 1..].iter().cloned());
    let mut bubbles = rho.bubbles[..j - 1].to_vec();
    bubbles.extend(inner.bubbles.iter().cloned());
    bubbles.extend(rho.bubbles[j..].iter().cloned());
    PathScheme::new(words, bubbles)
}

/// The scheme recognising the gathering words whose center dominates
/// `center(w)` in the subword order.
pub fn upward_closure_scheme(g: &Gathering, w: &[Letter]) -> Result<PathScheme, SchemeError> {
    let c = center(w, g)?;
    let a = g.letters();
    let mut xi = PathScheme::bubble(Bubble::Star(a.clone()));
    for &l in &c {
        xi.push_letter(l);
        xi.push_bubble(Bubble::Star(a.clone()));
    }
    substitute(&flatten(g), &xi, g.len())
}

/// Schemes covering the gathering words whose center does not dominate
/// `center(w)`: the `i`-th tracks the greedy embedding stopping before `c_i`.
pub fn complement_schemes(g: &Gathering, w: &[Letter]) -> Result<Vec<PathScheme>, SchemeError> {
    let c = center(w, g)?;
    let a = g.letters();
    let fl = flatten(g);
    let bar = |l: Letter| -> BTreeSet<Letter> { a.iter().copied().filter(|&x| x != l).collect() };
    let mut out = Vec::with_capacity(c.len());
    for i in 1..=c.len() {
        let mut sigma = PathScheme::bubble(Bubble::Star(bar(c[0])));
        for k in 1..i {
            sigma.push_letter(c[k - 1]);
            sigma.push_bubble(Bubble::Star(bar(c[k])));
        }
        out.push(substitute(&fl, &sigma, g.len())?);
    }
    Ok(out)
}

fn check_factor(rho: &PathScheme, f: &RhoFactor) -> Result<(), SchemeError> {
    if !rho.is_pre_perfect() {
        return Err(SchemeError::NotPrePerfect);
    }
    if f.len() != rho.bubbles.len() || !rho.bubbles.iter().zip(f).all(|(b, w)| b.accepts(w)) {
        return Err(SchemeError::InvalidFactor);
    }
    Ok(())
}

/// Scheme for the `ρ`-upward closure of a factor: every gathering replaced
/// by its upward-closure scheme.
pub fn scheme_upward_closure(rho: &PathScheme, f: &RhoFactor) -> Result<PathScheme, SchemeError> {
    check_factor(rho, f)?;
    let mut out = rho.clone();
    for i in (0..rho.bubbles.len()).rev() {
        let Bubble::Gathering(g) = &rho.bubbles[i] else { unreachable!() };
        out = substitute(&out, &upward_closure_scheme(g, &f[i])?, i + 1)?;
    }
    Ok(out)
}

/// The family `ρ[σ_i^j / i]` over every bubble `i` and every complement
/// scheme `σ_i^j` of `(X_i, w_i)`.
pub fn scheme_complement(rho: &PathScheme, f: &RhoFactor) -> Result<Vec<PathScheme>, SchemeError> {
    check_factor(rho, f)?;
    let mut out = Vec::new();
    for (i, (b, w)) in rho.bubbles.iter().zip(f).enumerate() {
        let Bubble::Gathering(g) = b else { unreachable!() };
        for sigma in complement_schemes(g, w)? {
            out.push(substitute(rho, &sigma, i + 1)?);
        }
    }
    Ok(out)
}

/// All `ρ`-factors of `w`.
pub fn factorize(w: &[Letter], rho: &PathScheme) -> Vec<RhoFactor> {
    factorize_limited(w, rho, usize::MAX)
}

/// At most `limit` factors, in order of shortest parts first.
pub fn factorize_limited(w: &[Letter], rho: &PathScheme, limit: usize) -> Vec<RhoFactor> {
    fn go(
        w: &[Letter],
        pos: usize,
        rho: &PathScheme,
        i: usize,
        parts: &mut Vec<Word>,
        out: &mut Vec<RhoFactor>,
        limit: usize,
    ) {
        if out.len() >= limit {
            return;
        }
        let u = &rho.words[i];
        if !w[pos..].starts_with(u) {
            return;
        }
        let pos = pos + u.len();
        if i == rho.bubbles.len() {
            if pos == w.len() {
                out.push(parts.clone());
            }
            return;
        }
        for end in pos..=w.len() {
            if let Bubble::Star(a) = &rho.bubbles[i] {
                if end > pos && !a.contains(&w[end - 1]) {
                    break;
                }
            }
            if rho.bubbles[i].accepts(&w[pos..end]) {
                parts.push(w[pos..end].to_vec());
                go(w, end, rho, i + 1, parts, out, limit);
                parts.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(w, 0, rho, 0, &mut Vec::new(), &mut out, limit);
    out
}

/// Subsets of a sorted letter list, in bitmask order.
fn subsets(letters: &[Letter]) -> Vec<BTreeSet<Letter>> {
    (0..1usize << letters.len())
        .map(|m| {
            letters
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, &a)| a)
                .collect()
        })
        .collect()
}

/// Permutations of a sorted list in lexicographic order.
pub fn permutations(letters: &[Letter]) -> Vec<Vec<Letter>> {
    if letters.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &a) in letters.iter().enumerate() {
        let mut rest = letters.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, a);
            out.push(p);
        }
    }
    out
}

/// All gatherings over `A`, first record outermost.
pub fn gatherings_over(a: &BTreeSet<Letter>) -> Vec<Gathering> {
    let v: Vec<Letter> = a.iter().copied().collect();
    let perms = permutations(&v);
    let mut out = Vec::new();
    for f in &perms {
        for l in &perms {
            out.push(Gathering {
                first: f.clone(),
                last: l.clone(),
            });
        }
    }
    out
}

fn dedup_in_order(v: Vec<PathScheme>) -> Vec<PathScheme> {
    let mut seen = HashSet::new();
    v.into_iter().filter(|s| seen.insert(s.clone())).collect()
}

type DecompMemo = Mutex<HashMap<BTreeSet<Letter>, Arc<Vec<PathScheme>>>>;

fn decomp_memo() -> &'static DecompMemo {
    static MEMO: OnceLock<DecompMemo> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The recursive decomposition of `A^*` into pre-perfect schemes:
/// gatherings over `A`, products of decompositions of `B^*` and `C^*` for
/// proper subsets, and decompositions of `B^* a C^*` for `B, C ⊆ A ∖ {a}`.
/// Memoised per letter set; duplicates removed keeping the first.
pub fn star_decompose(a: &BTreeSet<Letter>) -> Arc<Vec<PathScheme>> {
    if let Some(v) = decomp_memo().lock().unwrap().get(a) {
        return v.clone();
    }
    let result = if a.is_empty() {
        vec![PathScheme::epsilon()]
    } else {
        let letters: Vec<Letter> = a.iter().copied().collect();
        let mut out: Vec<PathScheme> = gatherings_over(a)
            .into_iter()
            .map(|g| PathScheme::bubble(Bubble::Gathering(g)))
            .collect();
        let proper: Vec<BTreeSet<Letter>> = subsets(&letters).into_iter().filter(|s| s != a).collect();
        let decs: Vec<Arc<Vec<PathScheme>>> = proper.iter().map(star_decompose).collect();
        for db in &decs {
            for dc in &decs {
                for s in db.iter() {
                    for t in dc.iter() {
                        out.push(s.concat(t));
                    }
                }
            }
        }
        for &l in &letters {
            let rest: Vec<Letter> = letters.iter().copied().filter(|&x| x != l).collect();
            let subs: Vec<Arc<Vec<PathScheme>>> = subsets(&rest).iter().map(star_decompose).collect();
            let mid = PathScheme::word(vec![l]);
            for db in &subs {
                for dc in &subs {
                    for s in db.iter() {
                        for t in dc.iter() {
                            out.push(s.concat(&mid).concat(t));
                        }
                    }
                }
            }
        }
        dedup_in_order(out)
    };
    let arc = Arc::new(result);
    decomp_memo().lock().unwrap().insert(a.clone(), arc.clone());
    arc
}

/// One unfolding of `A^*`: gatherings over `A`, `X_B X_C` for proper
/// subsets and `X_B a X_C` for `B, C ⊆ A ∖ {a}`. Fully unfolding the
/// remaining stars yields exactly [`star_decompose`].
pub fn star_unfold_once(a: &BTreeSet<Letter>) -> Vec<PathScheme> {
    if a.is_empty() {
        return vec![PathScheme::epsilon()];
    }
    let letters: Vec<Letter> = a.iter().copied().collect();
    let mut out: Vec<PathScheme> = gatherings_over(a)
        .into_iter()
        .map(|g| PathScheme::bubble(Bubble::Gathering(g)))
        .collect();
    let proper: Vec<BTreeSet<Letter>> = subsets(&letters).into_iter().filter(|s| s != a).collect();
    for b in &proper {
        for c in &proper {
            let mut s = PathScheme::bubble(Bubble::Star(b.clone()));
            s.push_bubble(Bubble::Star(c.clone()));
            out.push(s.normalize());
        }
    }
    for &l in &letters {
        let rest: Vec<Letter> = letters.iter().copied().filter(|&x| x != l).collect();
        for b in subsets(&rest) {
            for c in subsets(&rest) {
                let mut s = PathScheme::bubble(Bubble::Star(b.clone()));
                s.push_letter(l);
                s.push_bubble(Bubble::Star(c));
                out.push(s.normalize());
            }
        }
    }
    dedup_in_order(out)
}

/// Replaces every star by each member of its decomposition (cartesian
/// product, first star outermost), removing duplicates.
pub fn decompose_to_preperfect(rho: &PathScheme) -> Vec<PathScheme> {
    let mut partial = vec![PathScheme::word(rho.words[0].clone())];
    for (b, u) in rho.bubbles.iter().zip(&rho.words[1..]) {
        let options: Vec<PathScheme> = match b {
            Bubble::Star(a) => star_decompose(a).as_ref().clone(),
            Bubble::Gathering(_) => vec![PathScheme::bubble(b.clone())],
        };
        let tail = PathScheme::word(u.clone());
        let mut next = Vec::with_capacity(partial.len() * options.len());
        for p in &partial {
            for o in &options {
                next.push(p.concat(o).concat(&tail));
            }
        }
        partial = next;
    }
    dedup_in_order(partial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::words_up_to;

    fn abc() -> Cvas {
        Cvas::from_pairs(0, &[("a", &[]), ("b", &[]), ("c", &[])]).unwrap()
    }

    fn p(s: &str) -> PathScheme {
        PathScheme::parse(s, &abc()).unwrap()
    }

    fn g(s: &str) -> Gathering {
        let sys = abc();
        let (f, l) = s.split_once('/').unwrap();
        Gathering::new(sys.parse_word(f).unwrap(), sys.parse_word(l).unwrap()).unwrap()
    }

    fn w(s: &str) -> Word {
        abc().parse_word(s).unwrap()
    }

    #[test]
    fn notation_round_trip() {
        for s in ["ε", "ab", "[A:ab]", "a[A:a]b", "[G:abc/bca]c[A:]", "a[A:ab]c[G:abc/bac]"] {
            assert_eq!(p(s).notation(&abc()), s);
        }
        assert!(PathScheme::parse("[G:ab/a]", &abc()).is_err());
        assert!(PathScheme::parse("[X:ab]", &abc()).is_err());
        assert!(PathScheme::parse("[A:ab", &abc()).is_err());
    }

    #[test]
    fn center_examples() {
        let x = g("abc/abc");
        assert_eq!(center(&w("abcbacabc"), &x).unwrap(), w("bac"));
        assert_eq!(center(&w("abcabc"), &x).unwrap(), w(""));
        assert!(!matches_gathering(&w("ababc"), &x));
        assert_eq!(center(&w("ababc"), &x), Err(SchemeError::NoMatch));
    }

    #[test]
    fn records() {
        assert_eq!(appearance_records(&w("abcabc")), (w("abc"), w("abc")));
        assert_eq!(appearance_records(&w("abba")), (w("ab"), w("ba")));
        assert_eq!(appearance_records(&[]), (vec![], vec![]));
    }

    #[test]
    fn weights() {
        assert_eq!(p("[A:ab]").weight(3), WeightVector(vec![0, 1, 0]));
        assert_eq!(p("a[A:ab]c[G:bac/abc]").weight(3), WeightVector(vec![0, 1, 1]));
        assert!(lex_less(&WeightVector(vec![0, 1, 0]), &WeightVector(vec![0, 0, 1])).unwrap());
        assert!(lex_leq(&WeightVector(vec![1, 0]), &WeightVector(vec![1, 0])).unwrap());
        assert!(lex_less(&WeightVector(vec![1]), &WeightVector(vec![1, 0])).is_err());
    }

    #[test]
    fn flatten_examples() {
        assert_eq!(flatten(&g("a/a")).notation(&abc()), "a[A:a]a");
        assert_eq!(flatten(&g("ab/ba")).notation(&abc()), "a[A:a]b[A:ab]b[A:a]a");
    }

    #[test]
    fn substitute_examples() {
        assert_eq!(substitute(&p("a[A:a]b"), &p("c"), 1).unwrap(), p("acb"));
        assert_eq!(substitute(&p("a[A:a]b"), &p("[A:bc]c"), 1).unwrap(), p("a[A:bc]cb"));
        assert!(matches!(substitute(&p("ab"), &p("c"), 1), Err(SchemeError::BubbleIndex { .. })));
    }

    #[test]
    fn upward_closure_example() {
        let s = upward_closure_scheme(&g("abc/abc"), &w("abcbacabc")).unwrap();
        assert_eq!(s.notation(&abc()), "a[A:a]b[A:ab]c[A:abc]b[A:abc]a[A:abc]c[A:abc]a[A:bc]b[A:c]c");
    }

    #[test]
    fn scheme_nfa_examples() {
        let n = scheme_to_nfa(&p("a[A:a]b"), 3);
        for x in words_up_to(3, 5) {
            let expect = x.len() >= 2 && x[0] == 0 && *x.last().unwrap() == 1 && x[1..x.len() - 1].iter().all(|&l| l == 0);
            assert_eq!(n.accepts(&x), expect);
        }
        let n = scheme_to_nfa(&p("[A:ab][A:c][A:ab]"), 3);
        for x in words_up_to(3, 5) {
            assert_eq!(n.accepts(&x), p("[A:ab][A:c][A:ab]").accepts(&x), "{x:?}");
        }
    }

    #[test]
    fn star_decompose_small() {
        let d = star_decompose(&BTreeSet::new());
        assert_eq!(d.as_ref(), &vec![PathScheme::epsilon()]);
        let d = star_decompose(&[0].into_iter().collect());
        let set: HashSet<String> = d.iter().map(|s| s.notation(&abc())).collect();
        assert_eq!(set, ["[G:a/a]", "ε", "a"].iter().map(|s| s.to_string()).collect());
    }
}
