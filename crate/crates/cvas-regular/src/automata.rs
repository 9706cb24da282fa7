//! ε-free nondeterministic finite automata over a letter alphabet `0..k`.
//!
//! State identities are consecutive integers assigned in construction order,
//! so every construction is deterministic and DOT output is reproducible.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::cvas::Letter;

pub type StateId = usize;

/// Errors of automaton constructions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomataError {
    #[error("alphabet mismatch: {left} letters vs {right} letters")]
    AlphabetMismatch { left: usize, right: usize },
    #[error("letter {letter} outside an alphabet of {size} letters")]
    UnknownLetter { letter: Letter, size: usize },
    #[error("invalid gathering: {0}")]
    InvalidGathering(String),
    #[error("automaton too large: more than {cap} states")]
    TooLarge { cap: usize },
}

/// An ε-free NFA with possibly several initial states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nfa {
    num_letters: usize,
    /// Outgoing edges per state, sorted and deduplicated.
    succ: Vec<Vec<(Letter, StateId)>>,
    initial: BTreeSet<StateId>,
    accepting: BTreeSet<StateId>,
}

impl Nfa {
    /// An automaton with no states, accepting nothing.
    pub fn empty(num_letters: usize) -> Self {
        Nfa {
            num_letters,
            succ: Vec::new(),
            initial: BTreeSet::new(),
            accepting: BTreeSet::new(),
        }
    }

    /// Accepts exactly the empty word.
    pub fn epsilon(num_letters: usize) -> Self {
        Self::from_word(num_letters, &[])
    }

    pub fn add_state(&mut self) -> StateId {
        self.succ.push(Vec::new());
        self.succ.len() - 1
    }

    pub fn add_edge(&mut self, from: StateId, letter: Letter, to: StateId) {
        assert!(letter < self.num_letters, "letter outside alphabet");
        let list = &mut self.succ[from];
        if let Err(pos) = list.binary_search(&(letter, to)) {
            list.insert(pos, (letter, to));
        }
    }

    pub fn set_initial(&mut self, s: StateId) {
        self.initial.insert(s);
    }

    pub fn set_accepting(&mut self, s: StateId) {
        self.accepting.insert(s);
    }

    pub fn num_letters(&self) -> usize {
        self.num_letters
    }

    pub fn num_states(&self) -> usize {
        self.succ.len()
    }

    pub fn num_edges(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn initial(&self) -> &BTreeSet<StateId> {
        &self.initial
    }

    pub fn accepting(&self) -> &BTreeSet<StateId> {
        &self.accepting
    }

    pub fn successors(&self, s: StateId) -> &[(Letter, StateId)] {
        &self.succ[s]
    }

    /// All edges as `(source, letter, target)` in state order.
    pub fn edges(&self) -> Vec<(StateId, Letter, StateId)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(s, v)| v.iter().map(move |&(a, t)| (s, a, t)))
            .collect()
    }

    fn check_alphabet(&self, other: &Nfa) -> Result<(), AutomataError> {
        if self.num_letters != other.num_letters {
            return Err(AutomataError::AlphabetMismatch {
                left: self.num_letters,
                right: other.num_letters,
            });
        }
        Ok(())
    }

    /// Accepts exactly `w`.
    pub fn from_word(num_letters: usize, w: &[Letter]) -> Self {
        let mut n = Nfa::empty(num_letters);
        let mut cur = n.add_state();
        n.set_initial(cur);
        for &a in w {
            let next = n.add_state();
            n.add_edge(cur, a, next);
            cur = next;
        }
        n.set_accepting(cur);
        n
    }

    /// `A^*` as a single initial, accepting state with a loop per letter.
    pub fn star_of_subalphabet(num_letters: usize, letters: &BTreeSet<Letter>) -> Result<Self, AutomataError> {
        let mut n = Nfa::empty(num_letters);
        let s = n.add_state();
        n.set_initial(s);
        n.set_accepting(s);
        for &a in letters {
            if a >= num_letters {
                return Err(AutomataError::UnknownLetter {
                    letter: a,
                    size: num_letters,
                });
            }
            n.add_edge(s, a, s);
        }
        Ok(n)
    }

    /// Copies `other`'s states into `self`, returning the offset.
    fn absorb(&mut self, other: &Nfa) -> usize {
        let off = self.succ.len();
        for v in &other.succ {
            self.succ.push(v.iter().map(|&(a, t)| (a, t + off)).collect());
        }
        off
    }

    /// Disjoint union.
    pub fn union(a: &Nfa, b: &Nfa) -> Result<Nfa, AutomataError> {
        a.check_alphabet(b)?;
        let mut n = a.clone();
        let off = n.absorb(b);
        n.initial.extend(b.initial.iter().map(|s| s + off));
        n.accepting.extend(b.accepting.iter().map(|s| s + off));
        Ok(n)
    }

    /// Union of many automata, in order.
    pub fn union_all(num_letters: usize, parts: &[Nfa]) -> Result<Nfa, AutomataError> {
        let mut n = Nfa::empty(num_letters);
        for p in parts {
            n.check_alphabet(p)?;
            let off = n.absorb(p);
            n.initial.extend(p.initial.iter().map(|s| s + off));
            n.accepting.extend(p.accepting.iter().map(|s| s + off));
        }
        Ok(n)
    }

    pub fn accepts_epsilon(&self) -> bool {
        self.initial.iter().any(|s| self.accepting.contains(s))
    }

    /// Concatenation by rewiring: every edge into an accepting state of `a` is
    /// duplicated towards each initial state of `b`.
    pub fn concat(a: &Nfa, b: &Nfa) -> Result<Nfa, AutomataError> {
        a.check_alphabet(b)?;
        let mut n = a.clone();
        let off = n.absorb(b);
        let b_init: Vec<StateId> = b.initial.iter().map(|s| s + off).collect();
        for s in 0..a.num_states() {
            let extra: Vec<(Letter, StateId)> = a.succ[s]
                .iter()
                .filter(|(_, t)| a.accepting.contains(t))
                .flat_map(|&(l, _)| b_init.iter().map(move |&i| (l, i)))
                .collect();
            for (l, i) in extra {
                n.add_edge(s, l, i);
            }
        }
        let mut initial = a.initial.clone();
        if a.accepts_epsilon() {
            initial.extend(b_init.iter().copied());
        }
        let mut accepting: BTreeSet<StateId> = b.accepting.iter().map(|s| s + off).collect();
        if b.accepts_epsilon() {
            accepting.extend(a.accepting.iter().copied());
        }
        n.initial = initial;
        n.accepting = accepting;
        Ok(n)
    }

    /// Kleene star: a fresh accepting initial state plus, for every edge
    /// leaving an initial state, copies from the new state and from every
    /// accepting state.
    pub fn star(&self) -> Nfa {
        let mut n = self.clone();
        let s0 = n.add_state();
        let starts: Vec<(Letter, StateId)> = self
            .initial
            .iter()
            .flat_map(|&i| self.succ[i].iter().copied())
            .collect();
        let sources: Vec<StateId> = std::iter::once(s0).chain(self.accepting.iter().copied()).collect();
        for &src in &sources {
            for &(l, t) in &starts {
                n.add_edge(src, l, t);
            }
        }
        n.initial = BTreeSet::from([s0]);
        n.accepting.insert(s0);
        n
    }

    /// The chain automaton for `L(X_{a_1…a_n}^{b_1…b_n})`: segment `i ≤ n`
    /// loops on `{a_1..a_i}` and advances on `a_{i+1}`; segment `n+j` loops
    /// on `A ∖ {b_1..b_j}` and advances on `b_{j+1}`; segment `2n` accepts.
    pub fn gathering(num_letters: usize, first: &[Letter], last: &[Letter]) -> Result<Nfa, AutomataError> {
        check_gathering(first, last)?;
        if let Some(&a) = first.iter().find(|&&a| a >= num_letters) {
            return Err(AutomataError::UnknownLetter {
                letter: a,
                size: num_letters,
            });
        }
        let n = first.len();
        let mut nfa = Nfa::empty(num_letters);
        let segs: Vec<StateId> = (0..=2 * n).map(|_| nfa.add_state()).collect();
        nfa.set_initial(segs[0]);
        nfa.set_accepting(segs[2 * n]);
        for i in 0..n {
            // Segment i loops on a_1..a_i and advances on a_{i+1}.
            for &a in &first[..i] {
                nfa.add_edge(segs[i], a, segs[i]);
            }
            nfa.add_edge(segs[i], first[i], segs[i + 1]);
        }
        for j in 0..n {
            let removed: BTreeSet<Letter> = last[..j].iter().copied().collect();
            for &a in first {
                if !removed.contains(&a) {
                    nfa.add_edge(segs[n + j], a, segs[n + j]);
                }
            }
            nfa.add_edge(segs[n + j], last[j], segs[n + j + 1]);
        }
        Ok(nfa)
    }

    /// The set of states reachable from `from` by reading `w`.
    pub fn run_states(&self, w: &[Letter]) -> BTreeSet<StateId> {
        let mut cur: BTreeSet<StateId> = self.initial.clone();
        for &a in w {
            let mut next = BTreeSet::new();
            for &s in &cur {
                for &(l, t) in &self.succ[s] {
                    if l == a {
                        next.insert(t);
                    }
                }
            }
            cur = next;
            if cur.is_empty() {
                break;
            }
        }
        cur
    }

    pub fn accepts(&self, w: &[Letter]) -> bool {
        self.run_states(w).iter().any(|s| self.accepting.contains(s))
    }

    /// Product automaton over reachable state pairs, numbered in BFS order.
    pub fn product(a: &Nfa, b: &Nfa) -> Result<Nfa, AutomataError> {
        a.check_alphabet(b)?;
        let mut n = Nfa::empty(a.num_letters);
        let mut ids: HashMap<(StateId, StateId), StateId> = HashMap::new();
        let mut queue = VecDeque::new();
        for &p in &a.initial {
            for &q in &b.initial {
                let id = n.add_state();
                ids.insert((p, q), id);
                n.set_initial(id);
                queue.push_back((p, q));
            }
        }
        while let Some((p, q)) = queue.pop_front() {
            let id = ids[&(p, q)];
            if a.accepting.contains(&p) && b.accepting.contains(&q) {
                n.set_accepting(id);
            }
            for &(l, p2) in &a.succ[p] {
                for &(m, q2) in &b.succ[q] {
                    if l != m {
                        continue;
                    }
                    let tid = match ids.get(&(p2, q2)) {
                        Some(&t) => t,
                        None => {
                            let t = n.add_state();
                            ids.insert((p2, q2), t);
                            queue.push_back((p2, q2));
                            t
                        }
                    };
                    n.add_edge(id, l, tid);
                }
            }
        }
        Ok(n)
    }

    /// States reachable from the initial states.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut stack: Vec<StateId> = self.initial.iter().copied().collect();
        for &s in &stack {
            seen[s] = true;
        }
        while let Some(s) = stack.pop() {
            for &(_, t) in &self.succ[s] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// States from which an accepting state is reachable.
    pub fn coreachable(&self) -> Vec<bool> {
        let mut pred: Vec<Vec<StateId>> = vec![Vec::new(); self.num_states()];
        for (s, v) in self.succ.iter().enumerate() {
            for &(_, t) in v {
                pred[t].push(s);
            }
        }
        let mut seen = vec![false; self.num_states()];
        let mut stack: Vec<StateId> = self.accepting.iter().copied().collect();
        for &s in &stack {
            seen[s] = true;
        }
        while let Some(s) = stack.pop() {
            for &p in &pred[s] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        seen
    }

    pub fn is_empty(&self) -> bool {
        let r = self.reachable();
        !self.accepting.iter().any(|&s| r[s])
    }

    /// Removes states that are unreachable or cannot reach acceptance,
    /// renumbering the survivors in order.
    pub fn trim(&self) -> Nfa {
        let r = self.reachable();
        let c = self.coreachable();
        let keep: Vec<bool> = r.iter().zip(&c).map(|(a, b)| *a && *b).collect();
        let mut map = vec![usize::MAX; self.num_states()];
        let mut n = Nfa::empty(self.num_letters);
        for s in 0..self.num_states() {
            if keep[s] {
                map[s] = n.add_state();
            }
        }
        for s in 0..self.num_states() {
            if !keep[s] {
                continue;
            }
            for &(l, t) in &self.succ[s] {
                if keep[t] {
                    n.add_edge(map[s], l, map[t]);
                }
            }
        }
        n.initial = self.initial.iter().filter(|&&s| keep[s]).map(|&s| map[s]).collect();
        n.accepting = self.accepting.iter().filter(|&&s| keep[s]).map(|&s| map[s]).collect();
        n
    }

    /// Subset construction producing a complete DFA (the empty subset becomes
    /// a sink when reachable). Fails if more than `cap` subsets arise.
    pub fn determinize(&self, cap: usize) -> Result<Nfa, AutomataError> {
        let mut d = Nfa::empty(self.num_letters);
        let mut ids: HashMap<Vec<StateId>, StateId> = HashMap::new();
        let mut queue = VecDeque::new();
        let start: Vec<StateId> = self.initial.iter().copied().collect();
        let s0 = d.add_state();
        d.set_initial(s0);
        ids.insert(start.clone(), s0);
        queue.push_back(start);
        while let Some(set) = queue.pop_front() {
            let id = ids[&set];
            if set.iter().any(|s| self.accepting.contains(s)) {
                d.set_accepting(id);
            }
            let mut by_letter: BTreeMap<Letter, BTreeSet<StateId>> = BTreeMap::new();
            for &s in &set {
                for &(l, t) in &self.succ[s] {
                    by_letter.entry(l).or_default().insert(t);
                }
            }
            for l in 0..self.num_letters {
                let next: Vec<StateId> = by_letter
                    .get(&l)
                    .map(|s| s.iter().copied().collect())
                    .unwrap_or_default();
                let tid = match ids.get(&next) {
                    Some(&t) => t,
                    None => {
                        if d.num_states() >= cap {
                            return Err(AutomataError::TooLarge { cap });
                        }
                        let t = d.add_state();
                        ids.insert(next.clone(), t);
                        queue.push_back(next);
                        t
                    }
                };
                d.add_edge(id, l, tid);
            }
        }
        Ok(d)
    }

    /// Whether the automaton is a complete DFA: one initial state and exactly
    /// one successor per letter everywhere.
    pub fn is_complete_dfa(&self) -> bool {
        self.initial.len() == 1
            && self.succ.iter().all(|v| {
                v.len() == self.num_letters && v.iter().enumerate().all(|(i, &(l, _))| i == l)
            })
    }

    /// Hopcroft minimisation of a complete DFA (unreachable states dropped).
    /// Blocks are numbered by first reachable representative.
    pub fn minimize(&self) -> Nfa {
        assert!(self.is_complete_dfa(), "minimize expects a complete DFA");
        let reach = self.reachable();
        let states: Vec<StateId> = (0..self.num_states()).filter(|&s| reach[s]).collect();
        let k = self.num_letters;
        let delta = |s: StateId, a: Letter| self.succ[s][a].1;
        // Inverse transitions restricted to reachable states.
        let mut inv: Vec<Vec<Vec<StateId>>> = vec![vec![Vec::new(); k]; self.num_states()];
        for &s in &states {
            for a in 0..k {
                inv[delta(s, a)][a].push(s);
            }
        }
        let mut block_of = vec![usize::MAX; self.num_states()];
        let mut blocks: Vec<Vec<StateId>> = Vec::new();
        let acc: Vec<StateId> = states.iter().copied().filter(|s| self.accepting.contains(s)).collect();
        let rej: Vec<StateId> = states.iter().copied().filter(|s| !self.accepting.contains(s)).collect();
        for part in [acc, rej] {
            if !part.is_empty() {
                for &s in &part {
                    block_of[s] = blocks.len();
                }
                blocks.push(part);
            }
        }
        let mut work: VecDeque<(usize, Letter)> = VecDeque::new();
        let smallest = if blocks.len() == 2 && blocks[1].len() < blocks[0].len() { 1 } else { 0 };
        if !blocks.is_empty() {
            for a in 0..k {
                work.push_back((smallest, a));
            }
        }
        while let Some((splitter, a)) = work.pop_front() {
            let mut hit: BTreeMap<usize, Vec<StateId>> = BTreeMap::new();
            for &t in &blocks[splitter].clone() {
                for &s in &inv[t][a] {
                    hit.entry(block_of[s]).or_default().push(s);
                }
            }
            for (b, members) in hit {
                if members.len() == blocks[b].len() {
                    continue;
                }
                let member_set: BTreeSet<StateId> = members.iter().copied().collect();
                let (inside, outside): (Vec<StateId>, Vec<StateId>) =
                    blocks[b].iter().partition(|s| member_set.contains(s));
                let nb = blocks.len();
                blocks[b] = outside;
                for &s in &inside {
                    block_of[s] = nb;
                }
                blocks.push(inside);
                let small = if blocks[nb].len() <= blocks[b].len() { nb } else { b };
                for c in 0..k {
                    work.push_back((small, c));
                }
            }
        }
        // Renumber blocks in BFS order from the initial state.
        let init = *self.initial.iter().next().unwrap();
        let mut order = vec![usize::MAX; blocks.len()];
        let mut m = Nfa::empty(k);
        let mut queue = VecDeque::new();
        order[block_of[init]] = m.add_state();
        m.set_initial(0);
        queue.push_back(block_of[init]);
        while let Some(b) = queue.pop_front() {
            let rep = blocks[b][0];
            let id = order[b];
            if self.accepting.contains(&rep) {
                m.set_accepting(id);
            }
            for a in 0..k {
                let tb = block_of[delta(rep, a)];
                if order[tb] == usize::MAX {
                    order[tb] = m.add_state();
                    queue.push_back(tb);
                }
                m.add_edge(id, a, order[tb]);
            }
        }
        m
    }

    /// Complement of a complete DFA.
    pub fn complement_dfa(&self) -> Nfa {
        assert!(self.is_complete_dfa(), "complement expects a complete DFA");
        let mut c = self.clone();
        c.accepting = (0..self.num_states()).filter(|s| !self.accepting.contains(s)).collect();
        c
    }

    /// Language inclusion `L(self) ⊆ L(other)` via product with the
    /// complement of `other`'s determinisation.
    pub fn included_in(&self, other: &Nfa, cap: usize) -> Result<bool, AutomataError> {
        self.check_alphabet(other)?;
        let co = other.determinize(cap)?.complement_dfa();
        Ok(Nfa::product(self, &co)?.is_empty())
    }

    /// Language equality.
    pub fn equivalent(a: &Nfa, b: &Nfa, cap: usize) -> Result<bool, AutomataError> {
        Ok(a.included_in(b, cap)? && b.included_in(a, cap)?)
    }

    /// Graphviz rendering: nodes `q0, q1, …`, accepting states drawn as
    /// double circles, one edge per state pair listing its letters.
    pub fn to_dot(&self, labels: &[String]) -> String {
        let mut out = String::new();
        out.push_str("digraph nfa {\n  rankdir=LR;\n");
        for s in 0..self.num_states() {
            let shape = if self.accepting.contains(&s) { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  q{s} [shape={shape}];");
        }
        for (i, &s) in self.initial.iter().enumerate() {
            let _ = writeln!(out, "  init{i} [shape=point];");
            let _ = writeln!(out, "  init{i} -> q{s};");
        }
        for s in 0..self.num_states() {
            let mut grouped: BTreeMap<StateId, Vec<Letter>> = BTreeMap::new();
            for &(l, t) in &self.succ[s] {
                grouped.entry(t).or_default().push(l);
            }
            for (t, ls) in grouped {
                let text: Vec<&str> = ls.iter().map(|&l| labels[l].as_str()).collect();
                let _ = writeln!(out, "  q{s} -> q{t} [label=\"{}\"];", text.join(","));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Validates gathering records: non-empty, duplicate-free permutations of
/// each other.
pub fn check_gathering(first: &[Letter], last: &[Letter]) -> Result<(), AutomataError> {
    if first.is_empty() {
        return Err(AutomataError::InvalidGathering("empty records".into()));
    }
    let a: BTreeSet<Letter> = first.iter().copied().collect();
    let b: BTreeSet<Letter> = last.iter().copied().collect();
    if a.len() != first.len() || b.len() != last.len() {
        return Err(AutomataError::InvalidGathering("repeated letter in a record".into()));
    }
    if a != b {
        return Err(AutomataError::InvalidGathering(
            "records are not permutations of each other".into(),
        ));
    }
    Ok(())
}

/// All words over `0..k` of length at most `max_len`, in length-then-lex
/// order.
pub fn words_up_to(k: usize, max_len: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * k);
        for w in &layer {
            for a in 0..k {
                let mut v = w.clone();
                v.push(a);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}
