//! S-machines: symmetric rewriting systems on admissible words
//! `q_1 u_1 q_2 … u_k q_{k+1}`, the machine `S(v)` of a law, and the
//! translation of a machine into a group presentation.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::presentations::{GroupPresentation, Relator};
use crate::words::{free_reduce, invert, Alphabet, LawWord, Letter, Word, WordError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("not an admissible word: {0}")]
    NotAdmissible(String),
    #[error("invalid machine: {0}")]
    Invalid(String),
    #[error("rule {rule}: {violations:?}")]
    InvalidRule { rule: String, violations: Vec<RuleViolation> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleViolation {
    EmptyRule,
    /// `U_i` does not start and end with state letters in non-decreasing order.
    BadLeftSide { part: usize },
    /// Part ranges overlap or are out of order.
    Overlap { part: usize },
    /// `V_i` is not a subword of an admissible word spanning `Q_ℓ..Q_r`.
    BadRightSide { part: usize },
    /// Tape letters would be inserted left of `Q_1` or right of `Q_{k+1}`.
    Boundary { part: usize },
}

impl fmt::Display for RuleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleViolation::EmptyRule => write!(f, "rule has no parts"),
            RuleViolation::BadLeftSide { part } => write!(f, "part {part}: left side is not a state-bounded admissible subword"),
            RuleViolation::Overlap { part } => write!(f, "part {part}: state range overlaps the previous part"),
            RuleViolation::BadRightSide { part } => write!(f, "part {part}: right side does not span the same state range"),
            RuleViolation::Boundary { part } => write!(f, "part {part}: tape letters outside the first or last state letter"),
        }
    }
}

/// A positive rule `[U_1 → V_1, …, U_p → V_p]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SRule {
    pub name: String,
    pub parts: Vec<(Vec<Letter>, Vec<Letter>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AdmissibleWord {
    /// One state letter per state class, in class order.
    pub states: Vec<u32>,
    /// Reduced tape words; tape `i` sits between state classes `i` and `i + 1`.
    pub tapes: Vec<Word>,
}

impl AdmissibleWord {
    pub fn letters(&self) -> Vec<Letter> {
        let mut out = Vec::with_capacity(self.len());
        for (i, &q) in self.states.iter().enumerate() {
            out.push(Letter::pos(q));
            if let Some(t) = self.tapes.get(i) {
                out.extend_from_slice(t);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.states.len() + self.tape_len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn tape_len(&self) -> usize {
        self.tapes.iter().map(Word::len).sum()
    }
}

/// Split of a rule side into outer tape pieces, state letters and inner tapes.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Side {
    left: Vec<Letter>,
    states: Vec<u32>,
    inner: Vec<Vec<Letter>>,
    right: Vec<Letter>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Shape {
    lo: usize,
    hi: usize,
    u: Side,
    v: Side,
}

#[derive(Debug, Clone)]
pub struct SMachine {
    pub q_sets: Vec<Vec<String>>,
    pub y_sets: Vec<Vec<String>>,
    alphabet: Alphabet,
    q_class: HashMap<u32, usize>,
    y_members: Vec<HashSet<u32>>,
    pub rules: Vec<SRule>,
    pub w0: AdmissibleWord,
    shapes: Vec<Vec<Shape>>,
    inverse_shapes: Vec<Vec<Shape>>,
}

impl SMachine {
    /// Builds a machine; `w0` is given as text. Every rule must validate.
    pub fn new(q_sets: Vec<Vec<String>>, y_sets: Vec<Vec<String>>, rules: Vec<SRule>, w0: &str) -> Result<Self, MachineError> {
        let alphabet = Self::alphabet_for(&q_sets, &y_sets)?;
        Self::with_alphabet(alphabet, q_sets, y_sets, rules, w0)
    }

    /// The letter alphabet: all state letters, then the union of tape letters.
    pub fn alphabet_for(q_sets: &[Vec<String>], y_sets: &[Vec<String>]) -> Result<Alphabet, MachineError> {
        if q_sets.len() != y_sets.len() + 1 {
            return Err(MachineError::Invalid(format!("{} state classes for {} tapes", q_sets.len(), y_sets.len())));
        }
        let mut alphabet = Alphabet::new(Vec::<String>::new())?;
        for q in q_sets.iter().flatten() {
            alphabet.push(q.clone())?;
        }
        for y in y_sets.iter().flatten() {
            if alphabet.get(y).is_none() {
                alphabet.push(y.clone())?;
            } else if q_sets.iter().flatten().any(|q| q == y) {
                return Err(MachineError::Invalid(format!("`{y}` is both a state and a tape letter")));
            }
        }
        Ok(alphabet)
    }

    fn with_alphabet(
        alphabet: Alphabet,
        q_sets: Vec<Vec<String>>,
        y_sets: Vec<Vec<String>>,
        rules: Vec<SRule>,
        w0: &str,
    ) -> Result<Self, MachineError> {
        let mut q_class = HashMap::new();
        for (i, set) in q_sets.iter().enumerate() {
            if set.is_empty() {
                return Err(MachineError::Invalid(format!("state class {} is empty", i + 1)));
            }
            for q in set {
                q_class.insert(alphabet.get(q).expect("added above"), i);
            }
        }
        let y_members = y_sets
            .iter()
            .map(|set| set.iter().map(|y| alphabet.get(y).expect("added above")).collect())
            .collect();
        let mut m = SMachine {
            q_sets,
            y_sets,
            alphabet,
            q_class,
            y_members,
            rules: Vec::new(),
            w0: AdmissibleWord { states: Vec::new(), tapes: Vec::new() },
            shapes: Vec::new(),
            inverse_shapes: Vec::new(),
        };
        m.w0 = m.parse_admissible(w0)?;
        for rule in rules {
            let violations = m.validate_rule(&rule);
            if !violations.is_empty() {
                return Err(MachineError::InvalidRule { rule: rule.name.clone(), violations });
            }
            let inv = m.inverse_rule(&rule);
            let shapes = m.shapes_of(&rule).expect("validated");
            let inv_shapes = m.shapes_of(&inv).map_err(|v| MachineError::InvalidRule { rule: inv.name.clone(), violations: v })?;
            m.shapes.push(shapes);
            m.inverse_shapes.push(inv_shapes);
            m.rules.push(rule);
        }
        Ok(m)
    }

    /// The inverse rule: each part `U → L·C·R`, where `C` runs from the first
    /// to the last state letter of `V`, becomes `C → L⁻¹·U·R⁻¹`.
    pub fn inverse_rule(&self, rule: &SRule) -> SRule {
        let name = rule.name.strip_suffix("^-1").map(str::to_string).unwrap_or_else(|| format!("{}^-1", rule.name));
        let is_state = |l: &Letter| self.q_class.contains_key(&l.gen);
        let parts = rule
            .parts
            .iter()
            .map(|(u, v)| {
                let first = v.iter().position(is_state).unwrap_or(0);
                let last = v.iter().rposition(is_state).unwrap_or(v.len().saturating_sub(1));
                let c = v[first..=last].to_vec();
                let mut nu = invert(&v[..first]);
                nu.extend_from_slice(u);
                nu.extend(invert(&v[last + 1..]));
                (c, nu)
            })
            .collect();
        SRule { name, parts }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn tape_count(&self) -> usize {
        self.y_sets.len()
    }

    pub fn parse_admissible(&self, text: &str) -> Result<AdmissibleWord, MachineError> {
        let letters = self.alphabet.parse_letters(text)?;
        self.admissible_from(&letters)
    }

    pub fn admissible_from(&self, letters: &[Letter]) -> Result<AdmissibleWord, MachineError> {
        let bad = |msg: &str| MachineError::NotAdmissible(format!("{}: {msg}", self.alphabet.format(letters)));
        let mut states = Vec::new();
        let mut tapes: Vec<Vec<Letter>> = Vec::new();
        for &l in letters {
            match self.q_class.get(&l.gen) {
                Some(&c) => {
                    if l.inv || c != states.len() {
                        return Err(bad("state letters out of order"));
                    }
                    states.push(l.gen);
                    if states.len() <= self.tape_count() {
                        tapes.push(Vec::new());
                    }
                }
                None => {
                    let Some(t) = states.len().checked_sub(1).filter(|&t| t < self.tape_count()) else {
                        return Err(bad("tape letter outside the state letters"));
                    };
                    if !self.y_members[t].contains(&l.gen) {
                        return Err(bad("letter not in the tape alphabet"));
                    }
                    tapes[t].push(l);
                }
            }
        }
        if states.len() != self.q_sets.len() {
            return Err(bad("missing state letters"));
        }
        let tapes: Vec<Word> = tapes
            .into_iter()
            .map(|t| if crate::words::is_reduced(&t) { Ok(Word::from_reduced(t)) } else { Err(bad("tape word not reduced")) })
            .collect::<Result<_, _>>()?;
        Ok(AdmissibleWord { states, tapes })
    }

    pub fn format(&self, w: &AdmissibleWord) -> String {
        self.alphabet.format(&w.letters())
    }

    fn split_side(&self, s: &[Letter]) -> Option<Side> {
        let qpos: Vec<usize> = (0..s.len()).filter(|&i| self.q_class.contains_key(&s[i].gen)).collect();
        let (&first, &last) = (qpos.first()?, qpos.last()?);
        let mut states = Vec::new();
        let mut inner = Vec::new();
        for (n, &i) in qpos.iter().enumerate() {
            if s[i].inv {
                return None;
            }
            states.push(s[i].gen);
            if let Some(&next) = qpos.get(n + 1) {
                inner.push(s[i + 1..next].to_vec());
            }
        }
        Some(Side { left: s[..first].to_vec(), states, inner, right: s[last + 1..].to_vec() })
    }

    /// Checks that `side` spans classes `lo..=hi` consecutively with tape
    /// letters from the right alphabets.
    fn side_fits(&self, side: &Side, lo: usize, hi: usize) -> bool {
        if side.states.len() != hi - lo + 1 {
            return false;
        }
        if side.states.iter().enumerate().any(|(n, q)| self.q_class[q] != lo + n) {
            return false;
        }
        let tape_ok = |t: usize, w: &[Letter]| {
            crate::words::is_reduced(w) && w.iter().all(|l| self.y_members.get(t).is_some_and(|y| y.contains(&l.gen)))
        };
        let inner_ok = side.inner.iter().enumerate().all(|(n, w)| tape_ok(lo + n, w));
        let left_ok = side.left.is_empty() || lo == 0 || tape_ok(lo - 1, &side.left);
        let right_ok = side.right.is_empty() || hi == self.tape_count() || tape_ok(hi, &side.right);
        inner_ok && left_ok && right_ok
    }

    fn shapes_of(&self, rule: &SRule) -> Result<Vec<Shape>, Vec<RuleViolation>> {
        let mut out = Vec::new();
        let mut v = Vec::new();
        if rule.parts.is_empty() {
            v.push(RuleViolation::EmptyRule);
        }
        let mut prev_hi: Option<usize> = None;
        for (n, (u, w)) in rule.parts.iter().enumerate() {
            let Some(us) = self.split_side(u).filter(|s| s.left.is_empty() && s.right.is_empty()) else {
                v.push(RuleViolation::BadLeftSide { part: n });
                continue;
            };
            let lo = self.q_class[&us.states[0]];
            let hi = self.q_class[us.states.last().expect("non-empty")];
            if lo > hi || !self.side_fits(&us, lo, hi) {
                v.push(RuleViolation::BadLeftSide { part: n });
                continue;
            }
            if prev_hi.is_some_and(|p| p >= lo) {
                v.push(RuleViolation::Overlap { part: n });
            }
            prev_hi = Some(hi);
            let Some(vs) = self.split_side(w).filter(|s| self.side_fits(s, lo, hi)) else {
                v.push(RuleViolation::BadRightSide { part: n });
                continue;
            };
            if (lo == 0 && !vs.left.is_empty()) || (hi == self.tape_count() && !vs.right.is_empty()) {
                v.push(RuleViolation::Boundary { part: n });
            }
            out.push(Shape { lo, hi, u: us, v: vs });
        }
        if v.is_empty() {
            Ok(out)
        } else {
            Err(v)
        }
    }

    /// Every violated rule condition.
    pub fn validate_rule(&self, rule: &SRule) -> Vec<RuleViolation> {
        self.shapes_of(rule).err().unwrap_or_default()
    }

    fn apply_shapes(&self, w: &AdmissibleWord, shapes: &[Shape]) -> Option<AdmissibleWord> {
        for s in shapes {
            if w.states[s.lo..=s.hi] != s.u.states[..] {
                return None;
            }
            if (s.lo..s.hi).any(|t| w.tapes[t].letters() != &s.u.inner[t - s.lo][..]) {
                return None;
            }
        }
        let mut out = w.clone();
        for s in shapes {
            out.states[s.lo..=s.hi].copy_from_slice(&s.v.states);
            for t in s.lo..s.hi {
                out.tapes[t] = Word::from_reduced(s.v.inner[t - s.lo].clone());
            }
            if !s.v.left.is_empty() {
                let t = s.lo - 1;
                out.tapes[t] = free_reduce(&[out.tapes[t].letters(), &s.v.left].concat());
            }
            if !s.v.right.is_empty() {
                out.tapes[s.hi] = free_reduce(&[&s.v.right[..], out.tapes[s.hi].letters()].concat());
            }
        }
        Some(out)
    }

    /// Applies rule `index` (or its inverse), auto-reducing the tapes.
    pub fn apply(&self, w: &AdmissibleWord, index: usize, inverse: bool) -> Option<AdmissibleWord> {
        let shapes = if inverse { &self.inverse_shapes[index] } else { &self.shapes[index] };
        self.apply_shapes(w, shapes)
    }

    /// Applies an arbitrary valid rule.
    pub fn apply_rule(&self, w: &AdmissibleWord, rule: &SRule) -> Option<AdmissibleWord> {
        let shapes = self.shapes_of(rule).ok()?;
        self.apply_shapes(w, &shapes)
    }

    fn neighbours(&self, w: &AdmissibleWord) -> Vec<(AdmissibleWord, usize, bool)> {
        let mut out = Vec::new();
        for i in 0..self.rules.len() {
            for inv in [false, true] {
                if let Some(x) = self.apply(w, i, inv) {
                    out.push((x, i, inv));
                }
            }
        }
        out
    }

    /// Breadth-first search for a computation from `w` to `W_0`.
    pub fn accepts(&self, w: &AdmissibleWord, bounds: SearchLimits) -> Acceptance {
        let mut parent: HashMap<AdmissibleWord, Option<(AdmissibleWord, usize, bool)>> = HashMap::new();
        let mut queue = VecDeque::new();
        parent.insert(w.clone(), None);
        queue.push_back((w.clone(), 0usize));
        let (mut step_pruned, mut length_pruned) = (false, false);
        while let Some((cur, depth)) = queue.pop_front() {
            if cur == self.w0 {
                let mut words = vec![cur.clone()];
                let mut steps = Vec::new();
                let mut at = cur;
                while let Some(Some((prev, rule, inv))) = parent.get(&at) {
                    steps.push((self.rules[*rule].name.clone(), *inv));
                    words.push(prev.clone());
                    at = prev.clone();
                }
                words.reverse();
                steps.reverse();
                return Acceptance::Accepted(Computation { words, steps });
            }
            if depth >= bounds.max_steps {
                step_pruned = true;
                continue;
            }
            for (next, rule, inv) in self.neighbours(&cur) {
                if next.tape_len() > bounds.max_tape_len {
                    length_pruned = true;
                    continue;
                }
                if !parent.contains_key(&next) {
                    parent.insert(next.clone(), Some((cur.clone(), rule, inv)));
                    queue.push_back((next, depth + 1));
                }
            }
        }
        Acceptance::NotFound { explored: parent.len(), closed: !step_pruned, length_pruned }
    }

    /// Every admissible word reachable from `W_0` within the tape bound, and
    /// whether the reachable set closed without hitting the bound.
    pub fn reachable_from_w0(&self, max_tape_len: usize) -> (HashSet<AdmissibleWord>, bool) {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(self.w0.clone());
        queue.push_back(self.w0.clone());
        let mut closed = true;
        while let Some(cur) = queue.pop_front() {
            for (next, _, _) in self.neighbours(&cur) {
                if next.tape_len() > max_tape_len {
                    closed = false;
                    continue;
                }
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        (seen, closed)
    }

    /// All admissible words whose total tape length is at most `max`.
    pub fn admissible_words(&self, max: usize) -> Vec<AdmissibleWord> {
        let mut out = Vec::new();
        let tapes = self.tape_count();
        let pools: Vec<Vec<Word>> = (0..tapes)
            .map(|t| {
                let mut gens: Vec<u32> = self.y_members[t].iter().copied().collect();
                gens.sort_unstable();
                words_on(&gens, max)
            })
            .collect();
        let mut state_choices: Vec<Vec<u32>> = vec![Vec::new()];
        for set in &self.q_sets {
            let ids: Vec<u32> = set.iter().map(|q| self.alphabet.get(q).expect("state")).collect();
            state_choices = state_choices
                .into_iter()
                .flat_map(|p| ids.iter().map(move |&q| [p.clone(), vec![q]].concat()))
                .collect();
        }
        fn rec(pools: &[Vec<Word>], budget: usize, cur: &mut Vec<Word>, out: &mut Vec<Vec<Word>>) {
            if cur.len() == pools.len() {
                out.push(cur.clone());
                return;
            }
            for w in pools[cur.len()].iter().filter(|w| w.len() <= budget) {
                cur.push(w.clone());
                rec(pools, budget - w.len(), cur, out);
                cur.pop();
            }
        }
        let mut tape_choices = Vec::new();
        rec(&pools, max, &mut Vec::new(), &mut tape_choices);
        for s in &state_choices {
            for t in &tape_choices {
                out.push(AdmissibleWord { states: s.clone(), tapes: t.clone() });
            }
        }
        out
    }
}

fn words_on(gens: &[u32], max: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut frontier: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for w in &frontier {
            for &g in gens {
                for l in [Letter::pos(g), Letter::neg(g)] {
                    if !w.last().is_some_and(|t| t.cancels(l)) {
                        next.push([&w[..], &[l]].concat());
                    }
                }
            }
        }
        out.extend(next.iter().cloned().map(Word::from_reduced));
        frontier = next;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_tape_len: usize,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Computation {
    pub words: Vec<AdmissibleWord>,
    /// Rule name and whether its inverse was applied.
    pub steps: Vec<(String, bool)>,
}

impl Computation {
    /// `|Z| + |Z_1| + … + |Z_n|`.
    pub fn area(&self) -> usize {
        self.words.iter().map(AdmissibleWord::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Acceptance {
    Accepted(Computation),
    /// `closed`: every word reachable through words within the tape bound
    /// was explored. With `length_pruned` false this proves non-acceptance;
    /// otherwise it rules out computations that stay within the bound.
    NotFound { explored: usize, closed: bool, length_pruned: bool },
}

/// The machine `S(v)` over tape letters `a_1..a_m`.
pub fn build_machine_for_law(v: &LawWord, m: usize) -> Result<SMachine, MachineError> {
    let big_m = v.state_count();
    let q_sets: Vec<Vec<String>> = (1..=big_m).map(|t| vec![format!("q{t}")]).collect();
    let tape: Vec<String> = (1..=m).map(|j| format!("a{j}")).collect();
    let y_sets = vec![tape; big_m - 1];
    let alphabet = SMachine::alphabet_for(&q_sets, &y_sets)?;
    let q = |t: usize| Letter::pos(t as u32);
    let a = |j: usize| Letter::pos((big_m + j) as u32);
    let body = v.body();
    let mut rules = Vec::new();
    for j in 0..m {
        for l in 0..v.variable_count() {
            let x = l as u32;
            let mut parts = Vec::new();
            for t in 0..big_m {
                let left = t >= 1 && body[t - 1] == Letter::pos(x);
                let right = t < body.len() && body[t] == Letter::neg(x);
                if left {
                    parts.push((vec![q(t)], vec![a(j), q(t)]));
                } else if right {
                    parts.push((vec![q(t)], vec![q(t), a(j).inverse()]));
                }
            }
            rules.push(SRule { name: format!("r{}_{}", j + 1, l + 1), parts });
        }
    }
    let w0 = (1..=big_m).map(|t| format!("q{t}")).collect::<Vec<_>>().join(" ");
    SMachine::with_alphabet(alphabet, q_sets, y_sets, rules, &w0)
}

/// The predicate "obtained from `v(u_1..u_k)` by inserting the state
/// letters": some tuple `X` has `tape_s = X_{i_s}^{±1}` for every `s`.
pub fn is_law_pattern(v: &LawWord, tapes: &[Word]) -> bool {
    let mut assigned: Vec<Option<Word>> = vec![None; v.variable_count()];
    for (s, y) in v.body().iter().enumerate() {
        let x = if y.inv { tapes[s].inverse() } else { tapes[s].clone() };
        match &assigned[y.gen as usize] {
            Some(prev) if *prev != x => return false,
            Some(_) => {}
            None => assigned[y.gen as usize] = Some(x),
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MainPropertyReport {
    pub checked: usize,
    pub accepted: usize,
    pub mismatches: Vec<String>,
    /// The reachable set from `W_0` closed within the bound.
    pub closed: bool,
}

/// Compares acceptance (reachability from `W_0` within the tape bound)
/// with [`is_law_pattern`] on every admissible word within the bound.
pub fn main_property_check(v: &LawWord, m: usize, len_bound: usize) -> Result<MainPropertyReport, MachineError> {
    let machine = build_machine_for_law(v, m)?;
    let (reach, closed) = machine.reachable_from_w0(len_bound);
    let mut report = MainPropertyReport { checked: 0, accepted: 0, mismatches: Vec::new(), closed };
    for w in machine.admissible_words(len_bound) {
        let tapes: Vec<Word> = w.tapes.iter().map(|t| t.map_gens(|g| g - v.state_count() as u32)).collect();
        let acc = reach.contains(&w);
        report.checked += 1;
        report.accepted += acc as usize;
        if acc != is_law_pattern(v, &tapes) {
            report.mismatches.push(machine.format(&w));
        }
    }
    Ok(report)
}

/// The group presentation of a machine: transition relations `U^r = V`,
/// commutation of `r` with untouched state classes, tape letters and the
/// `k_j`, and the hub `k_1 W_0 … k_N W_0`.
pub fn machine_to_presentation(machine: &SMachine, n: usize) -> Result<GroupPresentation, MachineError> {
    let mut alphabet = machine.alphabet.clone();
    let ks: Vec<Letter> = (1..=n)
        .map(|b| alphabet.push(format!("k{b}")).map(Letter::pos))
        .collect::<Result<_, _>>()?;
    let rs: Vec<Letter> = machine
        .rules
        .iter()
        .map(|r| alphabet.push(r.name.clone()).map(Letter::pos))
        .collect::<Result<_, _>>()?;
    let mut tape_letters: Vec<u32> = machine.y_members.iter().flatten().copied().collect();
    tape_letters.sort_unstable();
    tape_letters.dedup();
    let mut relators = Vec::new();
    let push = |relators: &mut Vec<Relator>, raw: Vec<Letter>, tag: &str| {
        relators.push(Relator { word: free_reduce(&raw), tag: tag.to_string() });
    };
    for (i, rule) in machine.rules.iter().enumerate() {
        let r = rs[i];
        let mut touched = vec![false; machine.q_sets.len()];
        for (s, (u, v)) in machine.shapes[i].iter().zip(&rule.parts) {
            touched[s.lo..=s.hi].iter_mut().for_each(|t| *t = true);
            push(&mut relators, [&[r.inverse()][..], u, &[r], &invert(v)].concat(), "transition");
        }
        for (c, set) in machine.q_sets.iter().enumerate() {
            if touched[c] {
                continue;
            }
            for name in set {
                let q = Letter::pos(alphabet.get(name).expect("state"));
                push(&mut relators, vec![r.inverse(), q, r, q.inverse()], "commute-state");
            }
        }
        for x in tape_letters.iter().map(|&g| Letter::pos(g)).chain(ks.iter().copied()) {
            push(&mut relators, vec![r, x, r.inverse(), x.inverse()], "auxiliary");
        }
    }
    let mut hub = Vec::new();
    for &k in &ks {
        hub.push(k);
        hub.extend(machine.w0.letters());
    }
    push(&mut relators, hub, "hub");
    GroupPresentation::new(alphabet, relators).map_err(|e| MachineError::Invalid(e.to_string()))
}

/// Shared handle for a compiled machine presentation.
pub fn machine_presentation_arc(machine: &SMachine, n: usize) -> Result<Arc<GroupPresentation>, MachineError> {
    machine_to_presentation(machine, n).map(Arc::new)
}
