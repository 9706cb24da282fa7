//! The alternating decomposition tree whose marked leaves describe
//! `L_Σ^{x,y}` as a finite union of path-scheme languages.
//!
//! Even-level leaves are split into perfect pre-perfect schemes; odd-level
//! leaves are split into the upward closure of a lifted witness (marked) and
//! the complement schemes that still meet the language (unmarked). Leaves
//! are expanded breadth-first, leftmost first, so the tree is a function of
//! the input alone.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

use crate::automata::{words_up_to, AutomataError, Nfa};
use crate::cvas::{witness_fractions_budgeted, Configuration, Cvas, Word};
use crate::decider::{intersect_witness, DeciderError};
use crate::lifting::{lift_run_witness, LiftConfig, LiftError};
use crate::linear::{BudgetExhausted, StepBudget};
use crate::scheme::{
    flatten_all, lex_leq, lex_less, scheme_complement, scheme_to_nfa, scheme_upward_closure, star_unfold_once,
    substitute, Bubble, PathScheme, SchemeError, WeightVector,
};

/// Configuration of [`build_nfa`].
#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    /// Largest number of tree nodes.
    pub max_nodes: usize,
    /// Largest number of linear-system solves over the whole run.
    pub max_solver_steps: u64,
    /// Mark an even leaf without expanding it when a padding certificate
    /// shows its whole language lies inside `L_Σ^{x,y}`.
    pub early_marking: bool,
    /// Expand the leaves of a level concurrently (same tree either way).
    pub parallel: bool,
    /// Largest single star unfolding (schemes produced for one star).
    pub max_unfold: usize,
    /// Limits of the canonical witness search used while lifting.
    pub lift: LiftConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_nodes: 200_000,
            max_solver_steps: 50_000_000,
            early_marking: true,
            parallel: false,
            max_unfold: 100_000,
            lift: LiftConfig::default(),
        }
    }
}

/// Which construction produced a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// The root scheme `X_Σ`.
    Root,
    /// A perfect pre-perfect scheme from the star decomposition of an even node.
    Decomposition,
    /// The upward closure of a lifted run witness of an odd node.
    UpwardClosure,
    /// A complement scheme of an odd node's lifted witness.
    Complement,
}

impl Provenance {
    fn tag(self) -> &'static str {
        match self {
            Provenance::Root => "root",
            Provenance::Decomposition => "decomposition",
            Provenance::UpwardClosure => "upward-closure",
            Provenance::Complement => "complement",
        }
    }
}

/// How a marked node was certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarkReason {
    /// Upward closure of a lifted witness.
    Lifted,
    /// Padding certificate: the base word and every single-letter padding
    /// of it are members.
    Padding,
}

/// One node of the decomposition tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub scheme: PathScheme,
    pub level: usize,
    pub marked: Option<MarkReason>,
    pub provenance: Provenance,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Whether the node has been processed (marked or given children).
    pub expanded: bool,
}

impl TreeNode {
    pub fn is_marked(&self) -> bool {
        self.marked.is_some()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// The decomposition tree; node `0` is the root.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    /// Letters of the system (weight vectors have this length).
    pub num_letters: usize,
}

impl Tree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf())
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    pub fn weight(&self, i: usize) -> WeightVector {
        self.nodes[i].scheme.weight(self.num_letters)
    }

    /// Union NFA of the leaf schemes (empty automaton for an empty tree).
    pub fn leaf_nfa(&self, marked_only: bool) -> Nfa {
        let parts: Vec<Nfa> = self
            .leaves()
            .filter(|&i| !marked_only || self.nodes[i].is_marked())
            .map(|i| scheme_to_nfa(&self.nodes[i].scheme, self.num_letters))
            .collect();
        Nfa::union_all(self.num_letters, &parts).expect("leaf automata share the alphabet")
    }

    /// Indented text dump: one node per line with level, mark flag, scheme
    /// notation, weight vector and provenance.
    pub fn dump(&self, sys: &Cvas) -> String {
        let mut out = String::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            let mark = match n.marked {
                Some(MarkReason::Lifted) => "M",
                Some(MarkReason::Padding) => "P",
                None if n.expanded => "-",
                None => "?",
            };
            let _ = writeln!(
                out,
                "{}{} {} {} {} {}",
                "  ".repeat(n.level),
                n.level,
                mark,
                n.scheme.notation(sys),
                self.weight(i),
                n.provenance.tag()
            );
            stack.extend(n.children.iter().rev());
        }
        out
    }
}

/// Per-run measurements; no bound is asserted on them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EngineMetrics {
    pub nodes: usize,
    pub leaves: usize,
    pub depth: usize,
    pub marked_lifted: usize,
    pub marked_padding: usize,
    pub max_weight: WeightVector,
    pub nfa_states: usize,
    pub nfa_edges: usize,
    pub solver_steps: u64,
}

/// The outcome of [`build_nfa`].
#[derive(Debug, Clone)]
pub struct EngineResult {
    pub nfa: Nfa,
    pub tree: Tree,
    pub metrics: EngineMetrics,
}

/// Errors of the engine. Cap exhaustion carries the partial tree.
#[derive(Debug, Clone, Error)]
pub enum EngineError {
    #[error("resource cap exceeded: {reason}")]
    Cap { reason: String, tree: Box<Tree> },
    #[error("unfolding a star over {letters} letters yields about {size:.0} schemes")]
    Unfold { letters: usize, size: f64 },
    #[error("decomposing one leaf yields more than {limit} perfect schemes")]
    Fanout { limit: usize },
    #[error("expansion of node {node} violates {invariant}")]
    Invariant { node: usize, invariant: String },
    #[error("expected a leaf at {expected} level, found level {level}")]
    Parity { expected: &'static str, level: usize },
    #[error(transparent)]
    Decider(#[from] DeciderError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Automata(#[from] AutomataError),
}

impl EngineError {
    fn is_cap(&self) -> bool {
        matches!(
            self,
            EngineError::Unfold { .. }
                | EngineError::Fanout { .. }
                | EngineError::Decider(DeciderError::Budget(_))
                | EngineError::Lift(LiftError::Budget(_))
                | EngineError::Lift(LiftError::Decider(DeciderError::Budget(_)))
                | EngineError::Lift(LiftError::CapExceeded { .. })
        )
    }
}

impl From<BudgetExhausted> for EngineError {
    fn from(e: BudgetExhausted) -> Self {
        EngineError::Decider(DeciderError::Budget(e))
    }
}

/// Shared solver state: the budget and memo tables of decided questions.
pub struct Context<'a> {
    pub sys: &'a Cvas,
    pub x: &'a Configuration,
    pub y: &'a Configuration,
    pub budget: StepBudget,
    pub cfg: EngineConfig,
    meets: Mutex<HashMap<PathScheme, bool>>,
    members: Mutex<HashMap<Word, bool>>,
}

impl<'a> Context<'a> {
    pub fn new(sys: &'a Cvas, x: &'a Configuration, y: &'a Configuration, cfg: EngineConfig) -> Self {
        Context {
            sys,
            x,
            y,
            budget: StepBudget::new(cfg.max_solver_steps),
            cfg,
            meets: Mutex::new(HashMap::new()),
            members: Mutex::new(HashMap::new()),
        }
    }

    /// Whether `L(ρ) ∩ L_Σ^{x,y} ≠ ∅`, memoised.
    pub fn meets(&self, rho: &PathScheme) -> Result<bool, EngineError> {
        if let Some(&b) = self.meets.lock().unwrap().get(rho) {
            return Ok(b);
        }
        let nfa = scheme_to_nfa(rho, self.sys.len());
        let b = intersect_witness(&nfa, self.x, self.y, self.sys, &self.budget)?.is_some();
        self.meets.lock().unwrap().insert(rho.clone(), b);
        Ok(b)
    }

    fn member(&self, w: &Word) -> Result<bool, EngineError> {
        if let Some(&b) = self.members.lock().unwrap().get(w) {
            return Ok(b);
        }
        let b = witness_fractions_budgeted(w, self.x, self.y, self.sys, &self.budget)
            .map_err(|e| match e {
                crate::cvas::CvasError::Budget(b) => EngineError::from(b),
                other => EngineError::Decider(DeciderError::Cvas(other)),
            })?
            .is_some();
        self.members.lock().unwrap().insert(w.clone(), b);
        Ok(b)
    }
}

/// Sufficient condition for `L(ρ) ⊆ L_Σ^{x,y}`: with `ρ` flattened to a
/// base word `w_0` padded by star letters `B_p` at each slot `p`, the word
/// `w_0` and every `w_0` with one letter of `B_p` inserted at slot `p` are
/// members. Any padded word then has a run: a convex combination of these
/// runs with each inserted occurrence sharing its letter's fraction.
pub fn padding_certificate(rho: &PathScheme, ctx: &Context<'_>) -> Result<bool, EngineError> {
    let flat = flatten_all(rho);
    let mut base: Word = Vec::new();
    let mut slots: Vec<(usize, Vec<usize>)> = Vec::new();
    base.extend(&flat.words()[0]);
    for (b, u) in flat.bubbles().iter().zip(&flat.words()[1..]) {
        let Bubble::Star(a) = b else { unreachable!("flattened") };
        match slots.last_mut() {
            Some((p, set)) if *p == base.len() => {
                set.extend(a.iter().copied());
                set.sort_unstable();
                set.dedup();
            }
            _ => slots.push((base.len(), a.iter().copied().collect())),
        }
        base.extend(u);
    }
    if !ctx.member(&base)? {
        return Ok(false);
    }
    for (p, letters) in &slots {
        for &b in letters {
            let mut w = base.clone();
            w.insert(*p, b);
            if !ctx.member(&w)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Perfect pre-perfect schemes of the star decomposition of `ρ`, unfolding
/// one star at a time and pruning schemes that miss `L_Σ^{x,y}`. More than
/// `max_nodes` outputs is a cap failure.
pub fn perfect_decomposition(rho: &PathScheme, ctx: &Context<'_>) -> Result<Vec<PathScheme>, EngineError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut stack = vec![rho.normalize()];
    while let Some(s) = stack.pop() {
        if !ctx.meets(&s)? {
            continue;
        }
        let star = s.bubbles().iter().position(|b| matches!(b, Bubble::Star(_)));
        match star {
            None => {
                if seen.insert(s.clone()) {
                    out.push(s);
                    if out.len() > ctx.cfg.max_nodes {
                        return Err(EngineError::Fanout { limit: ctx.cfg.max_nodes });
                    }
                }
            }
            Some(j) => {
                let Bubble::Star(a) = &s.bubbles()[j] else { unreachable!() };
                let size = unfold_size(a.len());
                if size > ctx.cfg.max_unfold as f64 {
                    return Err(EngineError::Unfold {
                        letters: a.len(),
                        size,
                    });
                }
                let mut next = Vec::new();
                for inner in star_unfold_once(a) {
                    next.push(substitute(&s, &inner, j + 1)?.normalize());
                }
                stack.extend(next.into_iter().rev());
            }
        }
    }
    Ok(out)
}

/// Upper estimate of the number of schemes in one unfolding of a star
/// over `n` letters.
fn unfold_size(n: usize) -> f64 {
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    let subsets = 2f64.powi(n as i32);
    fact * fact + subsets * subsets + n as f64 * subsets * subsets / 4.0
}

/// What expanding a leaf produced.
#[derive(Debug, Clone)]
pub enum Expansion {
    /// The leaf itself is certified and marked.
    Mark(MarkReason),
    /// New children, each with a provenance and an optional mark.
    Children(Vec<(PathScheme, Provenance, Option<MarkReason>)>),
}

/// Expands an unmarked even-level leaf.
pub fn expand_even_leaf(node: &TreeNode, ctx: &Context<'_>) -> Result<Expansion, EngineError> {
    if node.level % 2 != 0 {
        return Err(EngineError::Parity {
            expected: "an even",
            level: node.level,
        });
    }
    if ctx.cfg.early_marking && padding_certificate(&node.scheme, ctx)? {
        return Ok(Expansion::Mark(MarkReason::Padding));
    }
    let children = perfect_decomposition(&node.scheme, ctx)?;
    Ok(Expansion::Children(
        children.into_iter().map(|s| (s, Provenance::Decomposition, None)).collect(),
    ))
}

/// Expands an odd-level (perfect) leaf.
pub fn expand_odd_leaf(node: &TreeNode, ctx: &Context<'_>) -> Result<Expansion, EngineError> {
    if node.level % 2 != 1 {
        return Err(EngineError::Parity {
            expected: "an odd",
            level: node.level,
        });
    }
    let lw = lift_run_witness(&node.scheme, ctx.x, ctx.y, ctx.sys, &ctx.budget, &ctx.cfg.lift)?;
    let sigma = scheme_upward_closure(&node.scheme, &lw.factor)?;
    let mut out = vec![(sigma, Provenance::UpwardClosure, Some(MarkReason::Lifted))];
    for s in scheme_complement(&node.scheme, &lw.factor)? {
        let s = s.normalize();
        if ctx.meets(&s)? {
            out.push((s, Provenance::Complement, None));
        }
    }
    Ok(Expansion::Children(out))
}

fn expand(node: &TreeNode, ctx: &Context<'_>) -> Result<Expansion, EngineError> {
    if node.level % 2 == 0 {
        expand_even_leaf(node, ctx)
    } else {
        expand_odd_leaf(node, ctx)
    }
}

/// Checks the local invariants of a fresh expansion of node `i`.
fn check_expansion(tree: &Tree, i: usize, exp: &Expansion) -> Result<(), EngineError> {
    let Expansion::Children(children) = exp else { return Ok(()) };
    let parent = &tree.nodes[i];
    let pw = tree.weight(i);
    let bad = |inv: &str| EngineError::Invariant {
        node: i,
        invariant: inv.to_string(),
    };
    for (s, _, mark) in children {
        let cw = s.weight(tree.num_letters);
        if parent.level % 2 == 0 {
            if !s.is_pre_perfect() {
                return Err(bad("C0 (odd child not pre-perfect)"));
            }
            if !lex_leq(&cw, &pw)? {
                return Err(bad("C1 (odd child weight exceeds parent)"));
            }
            if let Some(gp) = parent.parent {
                if !lex_less(&cw, &tree.weight(gp))? {
                    return Err(bad("weight descent between consecutive odd levels"));
                }
            }
        } else if mark.is_none() {
            if !lex_less(&cw, &pw)? {
                return Err(bad("C2 (unmarked even child weight not below parent)"));
            }
        }
    }
    Ok(())
}

fn metrics(tree: &Tree, nfa: &Nfa, ctx: &Context<'_>) -> EngineMetrics {
    let mut max_weight = WeightVector(vec![0; tree.num_letters]);
    for i in 0..tree.len() {
        let w = tree.weight(i);
        if w.cmp_lex(&max_weight).map(|o| o.is_gt()).unwrap_or(false) {
            max_weight = w;
        }
    }
    EngineMetrics {
        nodes: tree.len(),
        leaves: tree.leaves().count(),
        depth: tree.depth(),
        marked_lifted: tree.nodes.iter().filter(|n| n.marked == Some(MarkReason::Lifted)).count(),
        marked_padding: tree.nodes.iter().filter(|n| n.marked == Some(MarkReason::Padding)).count(),
        max_weight,
        nfa_states: nfa.num_states(),
        nfa_edges: nfa.num_edges(),
        solver_steps: ctx.budget.used(),
    }
}

/// Builds an NFA for `L_Σ^{x,y}` together with its decomposition tree.
pub fn build_nfa(sys: &Cvas, x: &Configuration, y: &Configuration, cfg: &EngineConfig) -> Result<EngineResult, EngineError> {
    build_nfa_observed(sys, x, y, cfg, |_| {})
}

/// [`build_nfa`], calling `observe` on the tree after every completed level.
pub fn build_nfa_observed(
    sys: &Cvas,
    x: &Configuration,
    y: &Configuration,
    cfg: &EngineConfig,
    mut observe: impl FnMut(&Tree),
) -> Result<EngineResult, EngineError> {
    let ctx = Context::new(sys, x, y, *cfg);
    let k = sys.len();
    let mut tree = Tree {
        nodes: Vec::new(),
        num_letters: k,
    };
    let cap = |reason: String, tree: &Tree| EngineError::Cap {
        reason,
        tree: Box::new(tree.clone()),
    };
    let root = PathScheme::bubble(Bubble::star(&(0..k).collect::<Vec<_>>())).normalize();
    let nonempty = match ctx.meets(&root) {
        Ok(b) => b,
        Err(e) if e.is_cap() => return Err(cap(e.to_string(), &tree)),
        Err(e) => return Err(e),
    };
    if !nonempty {
        let nfa = Nfa::empty(k);
        let m = metrics(&tree, &nfa, &ctx);
        observe(&tree);
        return Ok(EngineResult { nfa, tree, metrics: m });
    }
    tree.nodes.push(TreeNode {
        scheme: root,
        level: 0,
        marked: None,
        provenance: Provenance::Root,
        parent: None,
        children: Vec::new(),
        expanded: false,
    });
    observe(&tree);
    let mut frontier = vec![0usize];
    while !frontier.is_empty() {
        let results: Vec<Result<Expansion, EngineError>> = if cfg.parallel {
            frontier.par_iter().map(|&i| expand(&tree.nodes[i], &ctx)).collect()
        } else {
            let mut v = Vec::with_capacity(frontier.len());
            for &i in &frontier {
                let r = expand(&tree.nodes[i], &ctx);
                let stop = r.is_err();
                v.push(r);
                if stop {
                    break;
                }
            }
            v
        };
        let mut next = Vec::new();
        for (&i, r) in frontier.iter().zip(results) {
            let exp = match r {
                Ok(e) => e,
                Err(e) if e.is_cap() => return Err(cap(e.to_string(), &tree)),
                Err(e) => return Err(e),
            };
            check_expansion(&tree, i, &exp)?;
            tree.nodes[i].expanded = true;
            match exp {
                Expansion::Mark(reason) => tree.nodes[i].marked = Some(reason),
                Expansion::Children(children) => {
                    if tree.len() + children.len() > cfg.max_nodes {
                        return Err(cap(format!("node cap of {} exceeded", cfg.max_nodes), &tree));
                    }
                    let level = tree.nodes[i].level + 1;
                    for (scheme, provenance, marked) in children {
                        let id = tree.len();
                        tree.nodes.push(TreeNode {
                            scheme,
                            level,
                            marked,
                            provenance,
                            parent: Some(i),
                            children: Vec::new(),
                            expanded: marked.is_some(),
                        });
                        tree.nodes[i].children.push(id);
                        if marked.is_none() {
                            next.push(id);
                        }
                    }
                }
            }
        }
        frontier = next;
        observe(&tree);
    }
    let nfa = tree.leaf_nfa(false);
    let m = metrics(&tree, &nfa, &ctx);
    Ok(EngineResult { nfa, tree, metrics: m })
}

/// One invariant violation found by [`audit_tree`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: Option<usize>,
    pub invariant: &'static str,
    pub detail: String,
}

/// Report of [`audit_tree`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
    pub nodes_checked: usize,
    pub words_checked: usize,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks C0–C3 on every node (C0 with the decider), strict weight descent
/// between consecutive odd levels on every path, and C4 by enumerating
/// every word of length at most `word_len_cap`: members must be accepted by
/// some leaf and words of marked leaves must be members.
pub fn audit_tree(tree: &Tree, sys: &Cvas, x: &Configuration, y: &Configuration, word_len_cap: usize) -> AuditReport {
    let mut report = AuditReport::default();
    let mut push = |node: Option<usize>, invariant: &'static str, detail: String| {
        report.violations.push(Violation { node, invariant, detail });
    };
    let budget = StepBudget::unlimited();
    let k = sys.len();
    for (i, n) in tree.nodes.iter().enumerate() {
        let w = tree.weight(i);
        let nfa = scheme_to_nfa(&n.scheme, k);
        match intersect_witness(&nfa, x, y, sys, &budget) {
            Ok(Some(_)) => {}
            Ok(None) => push(Some(i), "C0", "scheme misses the language".into()),
            Err(e) => push(Some(i), "C0", format!("decider failed: {e}")),
        }
        if n.level % 2 == 1 && !n.scheme.is_pre_perfect() {
            push(Some(i), "C0", "odd-level scheme is not pre-perfect".into());
        }
        if n.is_marked() && !n.children.is_empty() {
            push(Some(i), "C3", "marked node has children".into());
        }
        if let Some(p) = n.parent {
            let pw = tree.weight(p);
            if n.level % 2 == 1 && !lex_leq(&w, &pw).unwrap_or(false) {
                push(Some(i), "C1", format!("weight {w} exceeds parent {pw}"));
            }
            if n.level % 2 == 0 && !n.is_marked() && !lex_less(&w, &pw).unwrap_or(false) {
                push(Some(i), "C2", format!("weight {w} not below parent {pw}"));
            }
            if n.level % 2 == 1 {
                if let Some(gp) = tree.nodes[p].parent {
                    let gw = tree.weight(gp);
                    if !lex_less(&w, &gw).unwrap_or(false) {
                        push(Some(i), "descent", format!("weight {w} not below odd ancestor {gw}"));
                    }
                }
            }
        }
        report.nodes_checked += 1;
    }
    let all = tree.leaf_nfa(false);
    let marked = tree.leaf_nfa(true);
    for w in words_up_to(k, word_len_cap) {
        report.words_checked += 1;
        let m = match witness_fractions_budgeted(&w, x, y, sys, &budget) {
            Ok(r) => r.is_some(),
            Err(e) => {
                push(None, "C4", format!("membership failed on {}: {e}", sys.format_word(&w)));
                continue;
            }
        };
        if m && !all.accepts(&w) {
            push(None, "C4", format!("member {} not covered by any leaf", sys.format_word(&w)));
        }
        if !m && marked.accepts(&w) {
            push(None, "C3", format!("marked leaf accepts non-member {}", sys.format_word(&w)));
        }
    }
    report
}
