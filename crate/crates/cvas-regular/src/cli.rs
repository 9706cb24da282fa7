//! The `cvasreg` command line: instance and automaton parsing, the engine,
//! membership, intersection and the lower-bound family.
//!
//! Exit codes: 0 yes/success, 3 no, 1 input error, 2 resource cap,
//! 4 internal invariant failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::automata::{words_up_to, Nfa};
use crate::cvas::{member, Cvas, Letter};
use crate::decider::intersect_witness;
use crate::engine::{audit_tree, build_nfa, EngineConfig, EngineError};
use crate::instance::Instance;
use crate::linear::StepBudget;
use crate::lowerbound::{
    brute_force_short_runs, configs, exponential_run, generate, maxed_out_run, write_report, LowerBoundError, ReportRow,
};

pub const EXIT_YES: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CAP: i32 = 2;
pub const EXIT_NO: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cvasreg", about = "Regular languages of continuous vector addition systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an NFA for the language of an instance.
    BuildNfa {
        instance: PathBuf,
        /// Write the NFA as DOT to this file (default: standard output).
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Write the decomposition tree; without a path it goes to standard output.
        #[arg(long, num_args = 0..=1)]
        dump_tree: Option<Option<PathBuf>>,
        #[arg(long)]
        max_nodes: Option<usize>,
        #[arg(long)]
        max_solver_steps: Option<u64>,
        /// Audit the tree and compare the NFA with membership on all words up to this length.
        #[arg(long)]
        audit_len: Option<usize>,
        #[arg(long)]
        parallel: bool,
        /// Disable the padding certificate for even-level leaves.
        #[arg(long)]
        no_early_marking: bool,
    },
    /// Decide whether a word is in the language (exit 0) or not (exit 3).
    Member {
        instance: PathBuf,
        /// Word as letters separated by spaces, dots or commas (`ε` or empty for the empty word).
        word: String,
        /// Print the firing fractions of a witness run.
        #[arg(long)]
        witness: bool,
        #[arg(long)]
        max_solver_steps: Option<u64>,
    },
    /// Decide whether an automaton meets the language (exit 0) or not (exit 3).
    Intersect {
        instance: PathBuf,
        automaton: PathBuf,
        /// Print a witness word.
        #[arg(long)]
        witness: bool,
        #[arg(long)]
        max_solver_steps: Option<u64>,
    },
    /// The lower-bound family Σ_h with endpoints x_n, y_n.
    Lowerbound {
        h: usize,
        n: u64,
        action: LowerboundAction,
        /// Write the artifact to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_nodes: Option<usize>,
        #[arg(long)]
        max_solver_steps: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LowerboundAction {
    /// Print the instance file.
    Gen,
    /// Print the validated maxed-out run.
    Maxed,
    /// Print the validated exponential run.
    Exp,
    /// Enumerate short runs and report uniqueness.
    Brute,
    /// CSV row with run length and engine automaton sizes.
    Report,
}

/// Failures of automaton files.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct AutomatonError {
    pub line: usize,
    pub message: String,
}

fn aerr(line: usize, message: impl Into<String>) -> AutomatonError {
    AutomatonError {
        line,
        message: message.into(),
    }
}

/// Parses an automaton file over the letters of `sys`.
///
/// ```text
/// states 3
/// initial 0
/// accepting 2
/// edge 0 a 1
/// edge 1 b 2
/// ```
///
/// If the first non-comment line starts with `regex`, the rest of the file
/// is a regular expression instead: labels, juxtaposition, `|`, postfix `*`,
/// parentheses and `ε`. When every label is one character, adjacent
/// characters are separate letters.
pub fn parse_automaton(text: &str, sys: &Cvas) -> Result<Nfa, AutomatonError> {
    let k = sys.len();
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if let Some(&(ln, first)) = lines.first() {
        if let Some(rest) = first.strip_prefix("regex") {
            let mut src = rest.to_string();
            for (_, l) in &lines[1..] {
                src.push(' ');
                src.push_str(l);
            }
            return parse_regex(&src, sys).map_err(|m| aerr(ln, m));
        }
    }
    let mut nfa = Nfa::empty(k);
    let mut declared = false;
    let state = |ln: usize, s: &str, n: usize| -> Result<usize, AutomatonError> {
        let v: usize = s.parse().map_err(|_| aerr(ln, format!("invalid state `{s}`")))?;
        if v >= n {
            return Err(aerr(ln, format!("state {v} out of range (states {n})")));
        }
        Ok(v)
    };
    for (ln, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks[0] {
            "states" => {
                if declared || toks.len() != 2 {
                    return Err(aerr(ln, "expected a single `states N` line"));
                }
                let n: usize = toks[1].parse().map_err(|_| aerr(ln, format!("invalid count `{}`", toks[1])))?;
                for _ in 0..n {
                    nfa.add_state();
                }
                declared = true;
            }
            _ if !declared => return Err(aerr(ln, "expected `states` first")),
            "initial" | "accepting" => {
                for s in &toks[1..] {
                    let v = state(ln, s, nfa.num_states())?;
                    if toks[0] == "initial" {
                        nfa.set_initial(v);
                    } else {
                        nfa.set_accepting(v);
                    }
                }
            }
            "edge" => {
                if toks.len() != 4 {
                    return Err(aerr(ln, "expected `edge FROM LABEL TO`"));
                }
                let from = state(ln, toks[1], nfa.num_states())?;
                let to = state(ln, toks[3], nfa.num_states())?;
                let l = sys.letter(toks[2]).map_err(|e| aerr(ln, e.to_string()))?;
                nfa.add_edge(from, l, to);
            }
            other => return Err(aerr(ln, format!("unknown keyword `{other}`"))),
        }
    }
    Ok(nfa)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Letter(Letter),
    Eps,
    Bar,
    Star,
    Open,
    Close,
}

fn lex_regex(src: &str, sys: &Cvas) -> Result<Vec<Tok>, String> {
    let single = sys.single_char_labels();
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => {}
            '|' => out.push(Tok::Bar),
            '*' => out.push(Tok::Star),
            '(' => out.push(Tok::Open),
            ')' => out.push(Tok::Close),
            'ε' => out.push(Tok::Eps),
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i + 1 < chars.len() && (chars[i + 1].is_ascii_alphanumeric() || chars[i + 1] == '_') {
                    i += 1;
                }
                let ident: String = chars[start..=i].iter().collect();
                if single {
                    for ch in ident.chars() {
                        out.push(Tok::Letter(sys.letter(&ch.to_string()).map_err(|e| e.to_string())?));
                    }
                } else {
                    out.push(Tok::Letter(sys.letter(&ident).map_err(|e| e.to_string())?));
                }
            }
            other => return Err(format!("unexpected character `{other}` in regex")),
        }
        i += 1;
    }
    Ok(out)
}

/// Parses the regular-expression sugar into an NFA.
pub fn parse_regex(src: &str, sys: &Cvas) -> Result<Nfa, String> {
    struct P<'a> {
        toks: &'a [Tok],
        pos: usize,
        k: usize,
    }
    impl P<'_> {
        fn expr(&mut self) -> Result<Nfa, String> {
            let mut acc = self.term()?;
            while self.toks.get(self.pos) == Some(&Tok::Bar) {
                self.pos += 1;
                acc = Nfa::union(&acc, &self.term()?).map_err(|e| e.to_string())?;
            }
            Ok(acc)
        }
        fn term(&mut self) -> Result<Nfa, String> {
            let mut acc = Nfa::epsilon(self.k);
            while let Some(t) = self.toks.get(self.pos) {
                if matches!(t, Tok::Bar | Tok::Close) {
                    break;
                }
                let f = self.factor()?;
                acc = Nfa::concat(&acc, &f).map_err(|e| e.to_string())?;
            }
            Ok(acc)
        }
        fn factor(&mut self) -> Result<Nfa, String> {
            let mut a = match self.toks.get(self.pos) {
                Some(Tok::Letter(l)) => {
                    self.pos += 1;
                    Nfa::from_word(self.k, &[*l])
                }
                Some(Tok::Eps) => {
                    self.pos += 1;
                    Nfa::epsilon(self.k)
                }
                Some(Tok::Open) => {
                    self.pos += 1;
                    let e = self.expr()?;
                    if self.toks.get(self.pos) != Some(&Tok::Close) {
                        return Err("missing `)`".into());
                    }
                    self.pos += 1;
                    e
                }
                Some(t) => return Err(format!("unexpected {t:?}")),
                None => return Err("unexpected end of regex".into()),
            };
            while self.toks.get(self.pos) == Some(&Tok::Star) {
                self.pos += 1;
                a = a.star();
            }
            Ok(a)
        }
    }
    let toks = lex_regex(src, sys)?;
    let mut p = P {
        toks: &toks,
        pos: 0,
        k: sys.len(),
    };
    let nfa = p.expr()?;
    if p.pos != toks.len() {
        return Err("unbalanced `)`".into());
    }
    Ok(nfa)
}

fn read_instance(path: &Path) -> Result<Instance, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    Instance::parse(&text).map_err(|e| format!("parsing {}: {e}", path.display()))
}

fn write_to(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("writing {}: {e}", p.display())),
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

macro_rules! fail {
    ($err:expr, $code:expr, $($fmt:tt)*) => {{
        let _ = writeln!($err, $($fmt)*);
        return $code;
    }};
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(out, "{e}");
            return EXIT_YES;
        }
    };
    match cli.command {
        Command::BuildNfa {
            instance,
            dot,
            dump_tree,
            max_nodes,
            max_solver_steps,
            audit_len,
            parallel,
            no_early_marking,
        } => {
            let inst = match read_instance(&instance) {
                Ok(i) => i,
                Err(e) => fail!(err, EXIT_INPUT, "input: {e}"),
            };
            let defaults = EngineConfig::default();
            let cfg = EngineConfig {
                max_nodes: max_nodes.unwrap_or(defaults.max_nodes),
                max_solver_steps: max_solver_steps.unwrap_or(defaults.max_solver_steps),
                early_marking: !no_early_marking,
                parallel,
                ..defaults
            };
            let dump_path = dump_tree.clone().flatten();
            let result = match build_nfa(&inst.sys, &inst.source, &inst.target, &cfg) {
                Ok(r) => r,
                Err(EngineError::Cap { reason, tree }) => {
                    let _ = writeln!(err, "build-nfa: {reason}; partial tree has {} nodes", tree.len());
                    let dump = tree.dump(&inst.sys);
                    match &dump_path {
                        Some(p) => {
                            let _ = fs::write(p, &dump);
                        }
                        None => {
                            let _ = err.write_all(dump.as_bytes());
                        }
                    }
                    return EXIT_CAP;
                }
                Err(e) => fail!(err, EXIT_INTERNAL, "build-nfa: {e}"),
            };
            let m = &result.metrics;
            let _ = writeln!(
                err,
                "build-nfa: {} nodes, {} leaves, depth {}, NFA {} states / {} edges, {} solver steps",
                m.nodes, m.leaves, m.depth, m.nfa_states, m.nfa_edges, m.solver_steps
            );
            if dump_tree.is_some() {
                if let Err(e) = write_to(dump_path.as_deref(), &result.tree.dump(&inst.sys), out) {
                    fail!(err, EXIT_INPUT, "dump-tree: {e}");
                }
            }
            if let Some(len) = audit_len {
                let report = audit_tree(&result.tree, &inst.sys, &inst.source, &inst.target, len);
                let mut disagreements = 0;
                for w in words_up_to(inst.sys.len(), len) {
                    match member(&w, &inst.source, &inst.target, &inst.sys) {
                        Ok(b) if b == result.nfa.accepts(&w) => {}
                        _ => disagreements += 1,
                    }
                }
                let _ = writeln!(
                    err,
                    "audit: {} violations, {} disagreements on words up to length {len}",
                    report.violations.len(),
                    disagreements
                );
                for v in &report.violations {
                    let _ = writeln!(err, "  {}: {:?} {}", v.invariant, v.node, v.detail);
                }
                if !report.is_clean() || disagreements > 0 {
                    return EXIT_INTERNAL;
                }
            }
            let dot_text = result.nfa.to_dot(&inst.sys.labels());
            if let Err(e) = write_to(dot.as_deref(), &dot_text, out) {
                fail!(err, EXIT_INPUT, "dot: {e}");
            }
            EXIT_YES
        }
        Command::Member {
            instance,
            word,
            witness,
            max_solver_steps,
        } => {
            let inst = match read_instance(&instance) {
                Ok(i) => i,
                Err(e) => fail!(err, EXIT_INPUT, "input: {e}"),
            };
            let w = match inst.sys.parse_word(&word) {
                Ok(w) => w,
                Err(e) => fail!(err, EXIT_INPUT, "word: {e}"),
            };
            let budget = StepBudget::new(max_solver_steps.unwrap_or(u64::MAX));
            let fr = match crate::cvas::witness_fractions_budgeted(&w, &inst.source, &inst.target, &inst.sys, &budget) {
                Ok(f) => f,
                Err(crate::cvas::CvasError::Budget(b)) => fail!(err, EXIT_CAP, "member: {b}"),
                Err(e) => fail!(err, EXIT_INPUT, "member: {e}"),
            };
            match fr {
                Some(fr) => {
                    let _ = writeln!(out, "member");
                    if witness {
                        for (a, f) in w.iter().zip(&fr) {
                            let _ = writeln!(out, "{} {f}", inst.sys.label(*a));
                        }
                    }
                    EXIT_YES
                }
                None => {
                    let _ = writeln!(out, "not a member");
                    EXIT_NO
                }
            }
        }
        Command::Intersect {
            instance,
            automaton,
            witness,
            max_solver_steps,
        } => {
            let inst = match read_instance(&instance) {
                Ok(i) => i,
                Err(e) => fail!(err, EXIT_INPUT, "input: {e}"),
            };
            let text = match fs::read_to_string(&automaton) {
                Ok(t) => t,
                Err(e) => fail!(err, EXIT_INPUT, "reading {}: {e}", automaton.display()),
            };
            let nfa = match parse_automaton(&text, &inst.sys) {
                Ok(n) => n,
                Err(e) => fail!(err, EXIT_INPUT, "automaton: {e}"),
            };
            let budget = StepBudget::new(max_solver_steps.unwrap_or(u64::MAX));
            match intersect_witness(&nfa, &inst.source, &inst.target, &inst.sys, &budget) {
                Ok(Some(w)) => {
                    let _ = writeln!(out, "non-empty");
                    if witness {
                        let _ = writeln!(out, "{}", inst.sys.format_word(&w));
                    }
                    EXIT_YES
                }
                Ok(None) => {
                    let _ = writeln!(out, "empty");
                    EXIT_NO
                }
                Err(crate::decider::DeciderError::Budget(b)) => fail!(err, EXIT_CAP, "intersect: {b}"),
                Err(e) => fail!(err, EXIT_INTERNAL, "intersect: {e}"),
            }
        }
        Command::Lowerbound {
            h,
            n,
            action,
            out: out_path,
            max_nodes,
            max_solver_steps,
        } => {
            let code_of = |e: &LowerBoundError| match e {
                LowerBoundError::Cap(_) => EXIT_CAP,
                LowerBoundError::ZeroHeight | LowerBoundError::ZeroScale => EXIT_INPUT,
                _ => EXIT_INTERNAL,
            };
            let inst = match generate(h).and_then(|i| configs(h, n).map(|_| i)) {
                Ok(i) => i,
                Err(e) => fail!(err, code_of(&e), "lowerbound: {e}"),
            };
            let text = match action {
                LowerboundAction::Gen => inst.instance(n).map(|i| i.to_string()),
                LowerboundAction::Maxed | LowerboundAction::Exp => {
                    let run = if action == LowerboundAction::Maxed {
                        maxed_out_run(h, n)
                    } else {
                        exponential_run(h, n)
                    };
                    run.map(|r| {
                        let mut s = String::new();
                        for (i, (f, a)) in r.steps().iter().enumerate() {
                            s.push_str(&format!("{} {} {f}\n", i + 1, inst.sys.label(*a)));
                        }
                        s.push_str(&format!("length {}\nreached y_{n}\n", r.len()));
                        s
                    })
                }
                LowerboundAction::Brute => brute_force_short_runs(&inst, n).map(|runs| {
                    let fmt = |t: &Vec<u64>| format!("({})", t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "));
                    if runs.len() == 1 {
                        format!("unique short run: {}\n", fmt(&runs[0]))
                    } else {
                        format!("short runs: [{}]\n", runs.iter().map(fmt).collect::<Vec<_>>().join(", "))
                    }
                }),
                LowerboundAction::Report => maxed_out_run(h, n).map(|r| {
                    let defaults = EngineConfig::default();
                    let cfg = EngineConfig {
                        max_nodes: max_nodes.unwrap_or(defaults.max_nodes),
                        max_solver_steps: max_solver_steps.unwrap_or(defaults.max_solver_steps),
                        ..defaults
                    };
                    let (x, y) = configs(h, n).expect("checked");
                    let built = build_nfa(&inst.sys, &x, &y, &cfg).ok();
                    let nfa_states = built.as_ref().map(|b| b.nfa.num_states());
                    let dfa_states = built
                        .as_ref()
                        .and_then(|b| b.nfa.determinize(1 << 20).ok())
                        .map(|d| d.minimize().num_states());
                    let row = ReportRow {
                        h,
                        n,
                        run_length: r.len(),
                        nfa_states,
                        dfa_states,
                    };
                    let mut buf = Vec::new();
                    write_report(&[row], &mut buf).expect("in-memory csv");
                    String::from_utf8(buf).expect("utf-8 csv")
                }),
            };
            match text {
                Ok(t) => match write_to(out_path.as_deref(), &t, out) {
                    Ok(()) => EXIT_YES,
                    Err(e) => fail!(err, EXIT_INPUT, "lowerbound: {e}"),
                },
                Err(e) => fail!(err, code_of(&e), "lowerbound: {e}"),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> Cvas {
        Cvas::from_pairs(3, &[("a", &[1, 0, 0]), ("b", &[-1, 1, 0]), ("c", &[0, -1, 1])]).unwrap()
    }

    #[test]
    fn regex_sugar() {
        let sys = abc();
        let nfa = parse_automaton("# any\nregex (a|b|c)*\n", &sys).unwrap();
        for w in words_up_to(3, 4) {
            assert!(nfa.accepts(&w));
        }
        let nfa = parse_regex("ab*c | ε", &sys).unwrap();
        assert!(nfa.accepts(&[]));
        assert!(nfa.accepts(&[0, 2]));
        assert!(nfa.accepts(&[0, 1, 1, 2]));
        assert!(!nfa.accepts(&[0, 1]));
        let nfa = parse_regex("(ab)*", &sys).unwrap();
        assert!(nfa.accepts(&[0, 1, 0, 1]));
        assert!(!nfa.accepts(&[0, 1, 0]));
        assert!(parse_regex("(a", &sys).is_err());
        assert!(parse_regex("d", &sys).is_err());
    }

    #[test]
    fn explicit_automaton() {
        let sys = abc();
        let nfa = parse_automaton("states 4\ninitial 0\naccepting 3\nedge 0 b 1\nedge 1 b 2\nedge 2 c 3\n", &sys).unwrap();
        assert!(nfa.accepts(&[1, 1, 2]));
        assert_eq!(nfa.num_states(), 4);
        let e = parse_automaton("states 1\nedge 0 z 0\n", &sys).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_automaton("initial 0\n", &sys).is_err());
        assert!(parse_automaton("states 0\n", &sys).unwrap().is_empty());
    }

    #[test]
    fn star_of_automata() {
        let sys = abc();
        let nfa = parse_regex("(a|bc)*", &sys).unwrap();
        for w in words_up_to(3, 5) {
            let mut rest: &[Letter] = &w;
            let mut ok = true;
            while !rest.is_empty() {
                if rest[0] == 0 {
                    rest = &rest[1..];
                } else if rest.starts_with(&[1, 2]) {
                    rest = &rest[2..];
                } else {
                    ok = false;
                    break;
                }
            }
            assert_eq!(nfa.accepts(&w), ok, "{w:?}");
        }
    }

    #[test]
    fn parse_errors_exit_1() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["cvasreg", "frobnicate"], &mut out, &mut err), EXIT_INPUT);
        assert_eq!(run(["cvasreg", "lowerbound", "0", "2", "gen"], &mut out, &mut err), EXIT_INPUT);
        assert_eq!(run(["cvasreg", "--help"], &mut out, &mut err), EXIT_YES);
    }
}
