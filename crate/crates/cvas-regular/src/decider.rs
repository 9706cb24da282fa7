//! Reachability in the product of an NFA with a CVAS: does some accepted
//! word belong to `L_Σ^{x,y}`?
//!
//! A run of the product visits a chain of strongly connected edge supports
//! joined by edges used exactly once. The decider enumerates such chains
//! ("skeletons": vertex-disjoint blocks with an entry and an exit, joined by
//! bridge edges) and, per skeleton, computes the greatest support that is
//! (a) the support of a solution of the state equation, (b) fireable forward
//! from the block entry with the support of the entry configuration, and
//! (c) fireable backward from the block exit. A surviving skeleton yields an
//! explicit word that is re-certified with the membership system.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::automata::{Nfa, StateId};
use crate::cvas::{member, witness_fractions_budgeted, Configuration, Cvas, CvasError, Letter, Word};
use crate::linear::{maximize, solve_feasibility, BudgetExhausted, LinearSystem, Optimum, Relation, StepBudget};
use crate::rational::Rational;
use crate::scheme::{scheme_to_nfa, PathScheme};

/// Errors of the decision procedures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeciderError {
    #[error("automaton has {nfa} letters but the system has {sys}")]
    AlphabetMismatch { nfa: usize, sys: usize },
    #[error("strongly connected component with {0} states is too large for block enumeration")]
    ComponentTooLarge(usize),
    #[error("scheme is not pre-perfect")]
    NotPrePerfect,
    #[error("witness construction failed: {0}")]
    Witness(String),
    #[error(transparent)]
    Budget(#[from] BudgetExhausted),
    #[error(transparent)]
    Cvas(#[from] CvasError),
}

impl From<crate::linear::LinearError> for DeciderError {
    fn from(e: crate::linear::LinearError) -> Self {
        DeciderError::Witness(e.to_string())
    }
}

/// Largest strongly connected component for which vertex subsets are
/// enumerated.
pub const MAX_COMPONENT: usize = 10;

/// Counter sets as bitmasks.
type Mask = u128;

/// The product of an NFA with a CVAS: NFA edges labelled by effects.
#[derive(Debug, Clone)]
pub struct CvassProduct {
    pub num_states: usize,
    /// `(source, letter, target)`; the effect is the letter's transition.
    pub edges: Vec<(StateId, Letter, StateId)>,
    pub initial: Vec<StateId>,
    pub accepting: Vec<StateId>,
    pub source: Configuration,
    pub target: Configuration,
    inc: Vec<Mask>,
    dec: Vec<Mask>,
}

impl CvassProduct {
    pub fn new(nfa: &Nfa, x: &Configuration, y: &Configuration, sys: &Cvas) -> Result<Self, DeciderError> {
        if nfa.num_letters() > sys.len() {
            return Err(DeciderError::AlphabetMismatch {
                nfa: nfa.num_letters(),
                sys: sys.len(),
            });
        }
        for c in [x, y] {
            if c.dim() != sys.dim() {
                return Err(CvasError::DimensionMismatch {
                    expected: sys.dim(),
                    found: c.dim(),
                }
                .into());
            }
        }
        if sys.dim() > Mask::BITS as usize {
            return Err(DeciderError::Witness(format!("more than {} counters", Mask::BITS)));
        }
        let t = nfa.trim();
        let mask = |f: &dyn Fn(i64) -> bool, a: Letter| -> Mask {
            sys.effect(a)
                .iter()
                .enumerate()
                .filter(|(_, &e)| f(e))
                .fold(0, |m, (c, _)| m | 1 << c)
        };
        Ok(CvassProduct {
            num_states: t.num_states(),
            edges: t.edges(),
            initial: t.initial().iter().copied().collect(),
            accepting: t.accepting().iter().copied().collect(),
            source: x.clone(),
            target: y.clone(),
            inc: (0..sys.len()).map(|a| mask(&|e| e > 0, a)).collect(),
            dec: (0..sys.len()).map(|a| mask(&|e| e < 0, a)).collect(),
        })
    }
}

/// A block: vertex set (strongly connected in the NFA), entry and exit.
#[derive(Debug, Clone)]
struct Block {
    verts: Vec<StateId>,
    entry: StateId,
    exit: StateId,
}

/// Statistics of one decision call.
#[derive(Debug, Clone, Default)]
pub struct DeciderStats {
    pub skeletons: usize,
    pub lp_calls: usize,
}

fn support_mask(values: &[Rational]) -> Mask {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_positive())
        .fold(0, |m, (c, _)| m | 1 << c)
}

/// An affine expression `constant + Σ coeff·var`.
#[derive(Clone, Debug)]
struct Affine {
    constant: Rational,
    terms: Vec<(usize, i64)>,
}

impl Affine {
    fn eval(&self, point: &[Rational]) -> Rational {
        let mut v = self.constant.clone();
        for &(i, c) in &self.terms {
            v += &point[i] * &Rational::from_int(c);
        }
        v
    }

    fn add_term(&mut self, var: usize, coeff: i64) {
        if coeff != 0 {
            self.terms.push((var, coeff));
        }
    }

    fn rational_terms(&self) -> Vec<(usize, Rational)> {
        let mut merged: HashMap<usize, i64> = HashMap::new();
        for &(i, c) in &self.terms {
            *merged.entry(i).or_default() += c;
        }
        let mut v: Vec<(usize, Rational)> = merged
            .into_iter()
            .filter(|(_, c)| *c != 0)
            .map(|(i, c)| (i, Rational::from_int(c)))
            .collect();
        v.sort_by_key(|(i, _)| *i);
        v
    }
}

/// Solution of a skeleton's state equation.
struct SkeletonSolution {
    masses: Vec<Vec<Rational>>,
    betas: Vec<Rational>,
    entry_cfg: Vec<Vec<Rational>>,
    exit_cfg: Vec<Vec<Rational>>,
}

struct Search<'a> {
    p: &'a CvassProduct,
    sys: &'a Cvas,
    budget: &'a StepBudget,
    stats: DeciderStats,
    blocks_by_entry: Vec<Vec<Block>>,
    out_edges: Vec<Vec<(Letter, StateId)>>,
}

impl<'a> Search<'a> {
    fn effect(&self, a: Letter, c: usize) -> i64 {
        self.sys.effect(a)[c]
    }

    /// Greatest-support solution for the given allowed block edges, or
    /// `None` if the state equation is infeasible.
    fn max_support(
        &mut self,
        blocks: &[Block],
        bridges: &[(StateId, Letter, StateId)],
        allowed: &[Vec<(StateId, Letter, StateId)>],
    ) -> Result<Option<SkeletonSolution>, DeciderError> {
        let d = self.sys.dim();
        let mut base = LinearSystem::new(0);
        let mut mvars: Vec<Vec<usize>> = Vec::new();
        let mut bvars = Vec::new();
        let mut cur: Vec<Affine> = (0..d)
            .map(|c| Affine {
                constant: self.p.source.get(c).clone(),
                terms: Vec::new(),
            })
            .collect();
        let mut entry_exprs = Vec::new();
        let mut exit_exprs = Vec::new();
        let mut items: Vec<Affine> = Vec::new();
        for (i, _) in blocks.iter().enumerate() {
            if i > 0 {
                let (_, a, _) = bridges[i - 1];
                let v = base.add_var();
                base.push_sparse(&[(v, Rational::one())], Relation::Ge, Rational::zero());
                base.push_sparse(&[(v, Rational::one())], Relation::Le, Rational::one());
                bvars.push(v);
                items.push(Affine {
                    constant: Rational::zero(),
                    terms: vec![(v, 1)],
                });
                for (c, e) in cur.iter_mut().enumerate() {
                    e.add_term(v, self.effect(a, c));
                    if self.effect(a, c) < 0 {
                        base.push_sparse(&e.rational_terms(), Relation::Ge, -&e.constant);
                    }
                }
            }
            let mut dec_mask: Mask = 0;
            let mut inc_mask: Mask = 0;
            for &(_, a, _) in &allowed[i] {
                dec_mask |= self.p.dec[a];
                inc_mask |= self.p.inc[a];
            }
            for c in 0..d {
                if dec_mask >> c & 1 == 1 {
                    items.push(cur[c].clone());
                }
            }
            entry_exprs.push(cur.clone());
            let mut vs = Vec::new();
            for &(_, a, _) in &allowed[i] {
                let v = base.add_var();
                base.push_sparse(&[(v, Rational::one())], Relation::Ge, Rational::zero());
                items.push(Affine {
                    constant: Rational::zero(),
                    terms: vec![(v, 1)],
                });
                for (c, e) in cur.iter_mut().enumerate() {
                    e.add_term(v, self.effect(a, c));
                }
                vs.push(v);
            }
            mvars.push(vs);
            for c in 0..d {
                if dec_mask >> c & 1 == 1 {
                    base.push_sparse(&cur[c].rational_terms(), Relation::Ge, -&cur[c].constant);
                }
                if inc_mask >> c & 1 == 1 {
                    items.push(cur[c].clone());
                }
            }
            exit_exprs.push(cur.clone());
        }
        for (c, e) in cur.iter().enumerate() {
            base.push_sparse(&e.rational_terms(), Relation::Eq, self.p.target.get(c) - &e.constant);
        }
        let nbase = base.num_vars();
        let mut pending: Vec<usize> = (0..items.len()).collect();
        let mut points: Vec<Vec<Rational>> = Vec::new();
        loop {
            let mut s = base.clone();
            let mut objective = Vec::new();
            for &j in &pending {
                let v = s.add_var();
                s.push_sparse(&[(v, Rational::one())], Relation::Ge, Rational::zero());
                s.push_sparse(&[(v, Rational::one())], Relation::Le, Rational::one());
                let mut terms = items[j].rational_terms();
                for t in terms.iter_mut() {
                    t.1 = -&t.1;
                }
                terms.push((v, Rational::one()));
                s.push_sparse(&terms, Relation::Le, items[j].constant.clone());
                objective.push(v);
            }
            let mut obj = vec![Rational::zero(); s.num_vars()];
            for v in objective {
                obj[v] = Rational::one();
            }
            self.budget.charge()?;
            self.stats.lp_calls += 1;
            let point = match maximize(&s, &obj)? {
                Optimum::Optimum { point, .. } => point[..nbase].to_vec(),
                Optimum::Infeasible => {
                    if points.is_empty() {
                        return Ok(None);
                    }
                    break;
                }
                Optimum::Unbounded => unreachable!("bounded auxiliary objective"),
            };
            let before = pending.len();
            pending.retain(|&j| !items[j].eval(&point).is_positive());
            let progressed = pending.len() < before;
            points.push(point);
            if !progressed || pending.is_empty() {
                break;
            }
        }
        let k = Rational::from_int(points.len() as i64);
        let avg: Vec<Rational> = (0..nbase)
            .map(|i| points.iter().map(|p| p[i].clone()).sum::<Rational>() / &k)
            .collect();
        let eval_cfg = |e: &Vec<Affine>| e.iter().map(|a| a.eval(&avg)).collect::<Vec<_>>();
        Ok(Some(SkeletonSolution {
            masses: mvars.iter().map(|vs| vs.iter().map(|&v| avg[v].clone()).collect()).collect(),
            betas: bvars.iter().map(|&v| avg[v].clone()).collect(),
            entry_cfg: entry_exprs.iter().map(eval_cfg).collect(),
            exit_cfg: exit_exprs.iter().map(eval_cfg).collect(),
        }))
    }

    /// Edges of `edges` that some abstract walk from `(start, m0)` can fire,
    /// where an edge needs its decremented counters in the support and adds
    /// its incremented ones. With `reverse`, walks run backwards with negated
    /// effects.
    fn fireable(&self, edges: &[(StateId, Letter, StateId)], start: StateId, m0: Mask, reverse: bool) -> Vec<bool> {
        let (need, gain): (&[Mask], &[Mask]) = if reverse {
            (&self.p.inc, &self.p.dec)
        } else {
            (&self.p.dec, &self.p.inc)
        };
        let ends = |e: &(StateId, Letter, StateId)| if reverse { (e.2, e.0) } else { (e.0, e.2) };
        let mut fired = vec![false; edges.len()];
        let mut seen: BTreeSet<(StateId, Mask)> = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert((start, m0));
        queue.push_back((start, m0));
        while let Some((v, m)) = queue.pop_front() {
            for (k, e) in edges.iter().enumerate() {
                let (from, to) = ends(e);
                if from != v || need[e.1] & !m != 0 {
                    continue;
                }
                fired[k] = true;
                let nm = m | gain[e.1];
                if seen.insert((to, nm)) {
                    queue.push_back((to, nm));
                }
            }
        }
        fired
    }

    /// Shortest abstract walk from `(start, m0)` reaching a support that
    /// contains `goal`; returns the edge indices walked (forward order of
    /// traversal in the chosen direction) and the final vertex.
    fn walk_to_support(
        &self,
        edges: &[(StateId, Letter, StateId)],
        start: StateId,
        m0: Mask,
        goal: Mask,
        reverse: bool,
    ) -> Option<(Vec<usize>, StateId)> {
        let (need, gain): (&[Mask], &[Mask]) = if reverse {
            (&self.p.inc, &self.p.dec)
        } else {
            (&self.p.dec, &self.p.inc)
        };
        let ends = |e: &(StateId, Letter, StateId)| if reverse { (e.2, e.0) } else { (e.0, e.2) };
        let mut prev: HashMap<(StateId, Mask), ((StateId, Mask), usize)> = HashMap::new();
        let mut queue = VecDeque::new();
        queue.push_back((start, m0));
        let mut seen = BTreeSet::new();
        seen.insert((start, m0));
        while let Some((v, m)) = queue.pop_front() {
            if goal & !m == 0 {
                let mut path = Vec::new();
                let mut cur = (v, m);
                while let Some(&(p, k)) = prev.get(&cur) {
                    path.push(k);
                    cur = p;
                }
                path.reverse();
                return Some((path, v));
            }
            for (k, e) in edges.iter().enumerate() {
                let (from, to) = ends(e);
                if from != v || need[e.1] & !m != 0 {
                    continue;
                }
                let nm = m | gain[e.1];
                if seen.insert((to, nm)) {
                    prev.insert((to, nm), ((v, m), k));
                    queue.push_back((to, nm));
                }
            }
        }
        None
    }

    /// Edges lying on a cycle through `root` within `edges`.
    fn cycle_through(edges: &[(StateId, Letter, StateId)], root: StateId) -> Vec<bool> {
        let reach = |fwd: bool| {
            let mut seen: BTreeSet<StateId> = BTreeSet::new();
            seen.insert(root);
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                for e in edges {
                    let (a, b) = if fwd { (e.0, e.2) } else { (e.2, e.0) };
                    if a == v && seen.insert(b) {
                        stack.push(b);
                    }
                }
            }
            seen
        };
        let f = reach(true);
        let b = reach(false);
        edges
            .iter()
            .map(|e| f.contains(&e.0) && b.contains(&e.0) && f.contains(&e.2) && b.contains(&e.2))
            .collect()
    }

    /// Shortest path from `a` to `b` over `edges` (indices).
    fn path(edges: &[(StateId, Letter, StateId)], a: StateId, b: StateId) -> Option<Vec<usize>> {
        let mut prev: HashMap<StateId, (StateId, usize)> = HashMap::new();
        let mut queue = VecDeque::from([a]);
        let mut seen = BTreeSet::from([a]);
        while let Some(v) = queue.pop_front() {
            if v == b {
                let mut out = Vec::new();
                let mut cur = v;
                while cur != a {
                    let (p, k) = prev[&cur];
                    out.push(k);
                    cur = p;
                }
                out.reverse();
                return Some(out);
            }
            for (k, e) in edges.iter().enumerate() {
                if e.0 == v && seen.insert(e.2) {
                    prev.insert(e.2, (v, k));
                    queue.push_back(e.2);
                }
            }
        }
        None
    }

    fn check_skeleton(
        &mut self,
        blocks: &[Block],
        bridges: &[(StateId, Letter, StateId)],
    ) -> Result<Option<Word>, DeciderError> {
        self.stats.skeletons += 1;
        let mut allowed: Vec<Vec<(StateId, Letter, StateId)>> = blocks
            .iter()
            .map(|b| {
                self.p
                    .edges
                    .iter()
                    .filter(|e| b.verts.contains(&e.0) && b.verts.contains(&e.2))
                    .copied()
                    .collect()
            })
            .collect();
        let sol = loop {
            let Some(sol) = self.max_support(blocks, bridges, &allowed)? else {
                return Ok(None);
            };
            if sol.betas.iter().any(|b| !b.is_positive()) {
                return Ok(None);
            }
            let mut changed = false;
            for (i, b) in blocks.iter().enumerate() {
                let support: Vec<(StateId, Letter, StateId)> = allowed[i]
                    .iter()
                    .zip(&sol.masses[i])
                    .filter(|(_, m)| m.is_positive())
                    .map(|(e, _)| *e)
                    .collect();
                let fwd = self.fireable(&support, b.entry, support_mask(&sol.entry_cfg[i]), false);
                let bwd = self.fireable(&support, b.exit, support_mask(&sol.exit_cfg[i]), true);
                let kept: Vec<_> = support
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| fwd[*k] && bwd[*k])
                    .map(|(_, e)| *e)
                    .collect();
                let cyc = Self::cycle_through(&kept, b.entry);
                let kept: Vec<_> = kept.iter().zip(cyc).filter(|(_, c)| *c).map(|(e, _)| *e).collect();
                if kept.len() != allowed[i].len() {
                    changed = true;
                    allowed[i] = kept;
                }
            }
            if !changed {
                break sol;
            }
        };
        // A multi-vertex block must have a strongly connected support
        // spanning its vertices.
        for (i, b) in blocks.iter().enumerate() {
            if b.verts.len() > 1 {
                let touched: BTreeSet<StateId> = allowed[i].iter().flat_map(|e| [e.0, e.2]).collect();
                if touched.len() != b.verts.len() || !touched.contains(&b.exit) {
                    return Ok(None);
                }
            }
        }
        self.build_witness(blocks, bridges, &allowed, &sol).map(Some)
    }

    fn build_witness(
        &mut self,
        blocks: &[Block],
        bridges: &[(StateId, Letter, StateId)],
        allowed: &[Vec<(StateId, Letter, StateId)>],
        sol: &SkeletonSolution,
    ) -> Result<Word, DeciderError> {
        // Per block: prefix π1, cycle C, connecting path P, suffix π2.
        let mut parts: Vec<(Word, Word, Word)> = Vec::new();
        for (i, b) in blocks.iter().enumerate() {
            let s = &allowed[i];
            if s.is_empty() {
                parts.push((Vec::new(), Vec::new(), Vec::new()));
                continue;
            }
            let touched: Mask = s.iter().fold(0, |m, e| m | self.p.inc[e.1] | self.p.dec[e.1]);
            let (pre, v1) = self
                .walk_to_support(s, b.entry, support_mask(&sol.entry_cfg[i]), touched, false)
                .ok_or_else(|| DeciderError::Witness("no forward walk".into()))?;
            let (post_rev, v2) = self
                .walk_to_support(s, b.exit, support_mask(&sol.exit_cfg[i]), touched, true)
                .ok_or_else(|| DeciderError::Witness("no backward walk".into()))?;
            // Closed walk from v1 covering every support edge.
            let mut cycle = Vec::new();
            let mut cur = v1;
            for (k, e) in s.iter().enumerate() {
                let p = Self::path(s, cur, e.0).ok_or_else(|| DeciderError::Witness("disconnected".into()))?;
                cycle.extend(p);
                cycle.push(k);
                cur = e.2;
            }
            cycle.extend(Self::path(s, cur, v1).ok_or_else(|| DeciderError::Witness("disconnected".into()))?);
            let link = Self::path(s, v1, v2).ok_or_else(|| DeciderError::Witness("disconnected".into()))?;
            let letters = |ks: &[usize]| ks.iter().map(|&k| s[k].1).collect::<Word>();
            let mut pre_w = letters(&pre);
            let post: Vec<usize> = post_rev.iter().rev().copied().collect();
            let mut tail = letters(&link);
            tail.extend(letters(&post));
            pre_w.shrink_to_fit();
            parts.push((pre_w, letters(&cycle), tail));
        }
        let mut reps = 1usize;
        loop {
            let mut w = Vec::new();
            for (i, (pre, cyc, tail)) in parts.iter().enumerate() {
                if i > 0 {
                    w.push(bridges[i - 1].1);
                }
                w.extend(pre);
                for _ in 0..reps {
                    w.extend(cyc);
                }
                w.extend(tail);
            }
            self.budget.charge()?;
            self.stats.lp_calls += 1;
            if witness_fractions_budgeted(&w, &self.p.source, &self.p.target, self.sys, &StepBudget::unlimited())?
                .is_some()
            {
                return Ok(w);
            }
            if reps >= 256 || parts.iter().all(|p| p.1.is_empty()) {
                return Err(DeciderError::Witness(format!(
                    "skeleton certified but no word confirmed up to {reps} repetitions"
                )));
            }
            reps *= 2;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &mut self,
        blocks: &mut Vec<Block>,
        bridges: &mut Vec<(StateId, Letter, StateId)>,
        used: &mut Vec<bool>,
        accepting: &[bool],
    ) -> Result<Option<Word>, DeciderError> {
        let last = blocks.last().unwrap().clone();
        if accepting[last.exit] {
            if let Some(w) = self.check_skeleton(blocks, bridges)? {
                return Ok(Some(w));
            }
        }
        let outs = self.out_edges[last.exit].clone();
        for (a, t) in outs {
            if used[t] {
                continue;
            }
            let cands = self.blocks_by_entry[t].clone();
            for b in cands {
                if b.verts.iter().any(|&v| used[v]) {
                    continue;
                }
                for &v in &b.verts {
                    used[v] = true;
                }
                blocks.push(b.clone());
                bridges.push((last.exit, a, t));
                let r = self.dfs(blocks, bridges, used, accepting)?;
                blocks.pop();
                bridges.pop();
                for &v in &b.verts {
                    used[v] = false;
                }
                if r.is_some() {
                    return Ok(r);
                }
            }
        }
        Ok(None)
    }
}

/// Strongly connected components (Tarjan), as sorted vertex lists.
fn sccs(n: usize, succ: &[Vec<(Letter, StateId)>]) -> Vec<Vec<StateId>> {
    struct T<'a> {
        succ: &'a [Vec<(Letter, StateId)>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on: Vec<bool>,
        stack: Vec<StateId>,
        next: usize,
        out: Vec<Vec<StateId>>,
    }
    fn visit(t: &mut T, v: StateId) {
        t.index[v] = Some(t.next);
        t.low[v] = t.next;
        t.next += 1;
        t.stack.push(v);
        t.on[v] = true;
        for &(_, w) in t.succ[v].clone().iter() {
            match t.index[w] {
                None => {
                    visit(t, w);
                    t.low[v] = t.low[v].min(t.low[w]);
                }
                Some(iw) if t.on[w] => t.low[v] = t.low[v].min(iw),
                _ => {}
            }
        }
        if Some(t.low[v]) == t.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = t.stack.pop().unwrap();
                t.on[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort();
            t.out.push(comp);
        }
    }
    let mut t = T {
        succ,
        index: vec![None; n],
        low: vec![0; n],
        on: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if t.index[v].is_none() {
            visit(&mut t, v);
        }
    }
    t.out
}

fn strongly_connected(verts: &[StateId], edges: &[(StateId, Letter, StateId)]) -> bool {
    let inside: Vec<_> = edges
        .iter()
        .filter(|e| verts.contains(&e.0) && verts.contains(&e.2))
        .copied()
        .collect();
    let root = verts[0];
    let cyc = Search::cycle_through(&inside, root);
    let mut reached: BTreeSet<StateId> = BTreeSet::from([root]);
    for (e, c) in inside.iter().zip(cyc) {
        if c {
            reached.insert(e.0);
            reached.insert(e.2);
        }
    }
    reached.len() == verts.len()
}

/// A word accepted by `nfa` and firable from `x` to `y`, or `None`.
pub fn intersect_witness(
    nfa: &Nfa,
    x: &Configuration,
    y: &Configuration,
    sys: &Cvas,
    budget: &StepBudget,
) -> Result<Option<Word>, DeciderError> {
    intersect_witness_stats(nfa, x, y, sys, budget).map(|(w, _)| w)
}

/// [`intersect_witness`] together with search statistics.
pub fn intersect_witness_stats(
    nfa: &Nfa,
    x: &Configuration,
    y: &Configuration,
    sys: &Cvas,
    budget: &StepBudget,
) -> Result<(Option<Word>, DeciderStats), DeciderError> {
    let p = CvassProduct::new(nfa, x, y, sys)?;
    if p.initial.is_empty() {
        return Ok((None, DeciderStats::default()));
    }
    // Necessary condition: the state equation over all product edges.
    {
        let mut s = LinearSystem::new(p.edges.len());
        for k in 0..p.edges.len() {
            s.push_sparse(&[(k, Rational::one())], Relation::Ge, Rational::zero());
        }
        for c in 0..sys.dim() {
            let terms: Vec<(usize, Rational)> = p
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| sys.effect(e.1)[c] != 0)
                .map(|(k, e)| (k, Rational::from_int(sys.effect(e.1)[c])))
                .collect();
            s.push_sparse(&terms, Relation::Eq, y.get(c) - x.get(c));
        }
        budget.charge()?;
        if solve_feasibility(&s)?.is_none() {
            return Ok((None, DeciderStats { skeletons: 0, lp_calls: 1 }));
        }
    }
    let mut succ: Vec<Vec<(Letter, StateId)>> = vec![Vec::new(); p.num_states];
    for &(a, l, b) in &p.edges {
        succ[a].push((l, b));
    }
    let mut blocks_by_entry: Vec<Vec<Block>> = vec![Vec::new(); p.num_states];
    for comp in sccs(p.num_states, &succ) {
        if comp.len() == 1 {
            let v = comp[0];
            blocks_by_entry[v].push(Block {
                verts: vec![v],
                entry: v,
                exit: v,
            });
            continue;
        }
        if comp.len() > MAX_COMPONENT {
            return Err(DeciderError::ComponentTooLarge(comp.len()));
        }
        for m in 1usize..1 << comp.len() {
            let verts: Vec<StateId> = (0..comp.len()).filter(|i| m >> i & 1 == 1).map(|i| comp[i]).collect();
            if verts.len() > 1 && !strongly_connected(&verts, &p.edges) {
                continue;
            }
            for &en in &verts {
                for &ex in &verts {
                    if verts.len() == 1 && en != ex {
                        continue;
                    }
                    blocks_by_entry[en].push(Block {
                        verts: verts.clone(),
                        entry: en,
                        exit: ex,
                    });
                }
            }
        }
    }
    let mut accepting = vec![false; p.num_states];
    for &a in &p.accepting {
        accepting[a] = true;
    }
    let mut search = Search {
        p: &p,
        sys,
        budget,
        stats: DeciderStats::default(),
        blocks_by_entry,
        out_edges: succ,
    };
    for &s in &p.initial {
        for b in search.blocks_by_entry[s].clone() {
            let mut used = vec![false; p.num_states];
            for &v in &b.verts {
                used[v] = true;
            }
            let mut blocks = vec![b];
            let mut bridges = Vec::new();
            if let Some(w) = search.dfs(&mut blocks, &mut bridges, &mut used, &accepting)? {
                debug_assert!(nfa.accepts(&w));
                return Ok((Some(w), search.stats));
            }
        }
    }
    Ok((None, search.stats))
}

/// Whether `L(nfa) ∩ L_Σ^{x,y}` is non-empty.
pub fn regular_intersect_nonempty(
    nfa: &Nfa,
    x: &Configuration,
    y: &Configuration,
    sys: &Cvas,
) -> Result<bool, DeciderError> {
    Ok(intersect_witness(nfa, x, y, sys, &StepBudget::unlimited())?.is_some())
}

/// Shortest (then lexicographically least) accepted member word of length
/// at most `max_len`, by exhaustive enumeration.
pub fn bounded_witness_search(
    nfa: &Nfa,
    x: &Configuration,
    y: &Configuration,
    sys: &Cvas,
    max_len: usize,
) -> Result<Option<Word>, DeciderError> {
    if nfa.num_letters() > sys.len() {
        return Err(DeciderError::AlphabetMismatch {
            nfa: nfa.num_letters(),
            sys: sys.len(),
        });
    }
    let supp0: Vec<bool> = x.support();
    #[allow(clippy::too_many_arguments)]
    fn go(
        nfa: &Nfa,
        sys: &Cvas,
        x: &Configuration,
        y: &Configuration,
        len: usize,
        w: &mut Word,
        states: BTreeSet<StateId>,
        supp: Vec<bool>,
    ) -> Result<Option<Word>, DeciderError> {
        if w.len() == len {
            if states.iter().any(|s| nfa.accepting().contains(s)) && member(w, x, y, sys)? {
                return Ok(Some(w.clone()));
            }
            return Ok(None);
        }
        for a in 0..nfa.num_letters() {
            // A letter decrementing a counter that no earlier step made
            // positive can never fire.
            if sys.effect(a).iter().enumerate().any(|(c, &e)| e < 0 && !supp[c]) {
                continue;
            }
            let next: BTreeSet<StateId> = states
                .iter()
                .flat_map(|&s| nfa.successors(s).iter().filter(|(l, _)| *l == a).map(|(_, t)| *t))
                .collect();
            if next.is_empty() {
                continue;
            }
            let mut s2 = supp.clone();
            for (c, &e) in sys.effect(a).iter().enumerate() {
                if e > 0 {
                    s2[c] = true;
                }
            }
            w.push(a);
            let r = go(nfa, sys, x, y, len, w, next, s2)?;
            w.pop();
            if r.is_some() {
                return Ok(r);
            }
        }
        Ok(None)
    }
    for len in 0..=max_len {
        if let Some(w) = go(nfa, sys, x, y, len, &mut Vec::new(), nfa.initial().clone(), supp0.clone())? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// A pre-perfect scheme is perfect when its language meets `L_Σ^{x,y}`.
pub fn is_perfect(rho: &PathScheme, x: &Configuration, y: &Configuration, sys: &Cvas) -> Result<bool, DeciderError> {
    if !rho.is_pre_perfect() {
        return Err(DeciderError::NotPrePerfect);
    }
    regular_intersect_nonempty(&scheme_to_nfa(rho, sys.len()), x, y, sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use std::collections::BTreeSet;

    fn example() -> (Cvas, Configuration, Configuration) {
        let sys = Cvas::from_pairs(3, &[("a", &[1, 0, 0]), ("b", &[-1, 1, 0]), ("c", &[0, -1, 1])]).unwrap();
        let y = Configuration::new(vec![q(0, 1), q(1, 4), q(1, 4)]).unwrap();
        (sys, Configuration::zero(3), y)
    }

    fn sigma_star(k: usize) -> Nfa {
        Nfa::star_of_subalphabet(k, &(0..k).collect::<BTreeSet<_>>()).unwrap()
    }

    #[test]
    fn example_intersections() {
        let (sys, x, y) = example();
        let bbc = Nfa::from_word(3, &sys.parse_word("bbc").unwrap());
        assert!(!regular_intersect_nonempty(&bbc, &x, &y, &sys).unwrap());
        let w = intersect_witness(&sigma_star(3), &x, &y, &sys, &StepBudget::unlimited()).unwrap().unwrap();
        assert!(member(&w, &x, &y, &sys).unwrap());
        assert!(!regular_intersect_nonempty(&Nfa::empty(3), &x, &y, &sys).unwrap());
    }

    #[test]
    fn bounded_search_examples() {
        let (sys, x, y) = example();
        let w = bounded_witness_search(&sigma_star(3), &x, &y, &sys, 4).unwrap().unwrap();
        assert!(w.len() <= 4 && member(&w, &x, &y, &sys).unwrap());
        let dec = Cvas::from_pairs(1, &[("a", &[-1])]).unwrap();
        let z = Configuration::zero(1);
        let one = Configuration::new(vec![q(1, 1)]).unwrap();
        assert_eq!(bounded_witness_search(&sigma_star(1), &z, &one, &dec, 6).unwrap(), None);
        assert_eq!(bounded_witness_search(&Nfa::epsilon(1), &z, &z, &dec, 3).unwrap(), Some(vec![]));
    }

    #[test]
    fn perfectness() {
        let (sys, x, y) = example();
        let g = PathScheme::parse("[G:abc/abc]", &sys).unwrap();
        assert!(is_perfect(&g, &x, &y, &sys).unwrap());
        assert!(!is_perfect(&PathScheme::parse("bbc", &sys).unwrap(), &x, &y, &sys).unwrap());
        assert!(is_perfect(&PathScheme::epsilon(), &x, &x, &sys).unwrap());
        assert_eq!(
            is_perfect(&PathScheme::parse("[A:a]", &sys).unwrap(), &x, &y, &sys),
            Err(DeciderError::NotPrePerfect)
        );
    }

    #[test]
    fn multi_state_component() {
        // (ab)* over a two-state cycle with a = +1, b = -1.
        let sys = Cvas::from_pairs(1, &[("a", &[1]), ("b", &[-1])]).unwrap();
        let mut n = Nfa::empty(2);
        let s = n.add_state();
        let t = n.add_state();
        n.set_initial(s);
        n.set_accepting(s);
        n.add_edge(s, 0, t);
        n.add_edge(t, 1, s);
        let z = Configuration::zero(1);
        let half = Configuration::new(vec![q(1, 2)]).unwrap();
        let w = intersect_witness(&n, &z, &z, &sys, &StepBudget::unlimited()).unwrap().unwrap();
        assert!(member(&w, &z, &z, &sys).unwrap());
        let w = intersect_witness(&n, &half, &z, &sys, &StepBudget::unlimited()).unwrap().unwrap();
        assert!(!w.is_empty() && member(&w, &half, &z, &sys).unwrap());
        // Ending on `a` is impossible when the counter must stay at zero.
        n.set_accepting(t);
        let two = Configuration::new(vec![q(2, 1)]).unwrap();
        assert!(regular_intersect_nonempty(&n, &z, &two, &sys).unwrap());
    }
}
