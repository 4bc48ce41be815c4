//! Free-group words over positional alphabets.
//!
//! Generators are identified by their index in an [`Alphabet`]; names are only
//! used for parsing and printing.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("invalid generator name `{0}`")]
    InvalidName(String),
    #[error("duplicate generator name `{0}`")]
    DuplicateName(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("generator index {0} outside alphabet of size {1}")]
    IndexOutOfRange(u32, usize),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("arity mismatch: law has {expected} variables, got {got} values")]
    Arity { expected: usize, got: usize },
    #[error("syntax error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("law is not freely reduced (reduces to `{0}`)")]
    NotReduced(String),
    #[error("law is not cyclically reduced")]
    NotCyclicallyReduced,
    #[error("law variable x{0} is unused")]
    UnusedVariable(usize),
    #[error("empty law")]
    EmptyLaw,
}

/// Ordered list of distinct generator names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name
            .chars()
            .any(|c| c == '^' || c == '-' || c == '[' || c == ']' || c.is_whitespace())
}

impl Alphabet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, WordError> {
        let mut out = Alphabet { names: Vec::new(), index: HashMap::new() };
        for n in names {
            out.push(n.into())?;
        }
        Ok(out)
    }

    /// Appends a generator and returns its index.
    pub fn push(&mut self, name: String) -> Result<u32, WordError> {
        if !valid_name(&name) {
            return Err(WordError::InvalidName(name));
        }
        if self.index.contains_key(&name) {
            return Err(WordError::DuplicateName(name));
        }
        let i = self.names.len() as u32;
        self.index.insert(name.clone(), i);
        self.names.push(name);
        Ok(i)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, g: u32) -> &str {
        &self.names[g as usize]
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn gen(&self, name: &str) -> Result<Letter, WordError> {
        self.get(name)
            .map(Letter::pos)
            .ok_or_else(|| WordError::UnknownGenerator(name.to_string()))
    }

    /// Checks that every letter of `w` is a generator of this alphabet.
    pub fn check(&self, w: &[Letter]) -> Result<(), WordError> {
        match w.iter().find(|l| l.gen as usize >= self.len()) {
            Some(l) => Err(WordError::IndexOutOfRange(l.gen, self.len())),
            None => Ok(()),
        }
    }

    /// Parses the `a1 b2^-1 q3` text format. Integer exponents other than -1
    /// are accepted as shorthand for repetition. The result is not reduced.
    pub fn parse_letters(&self, text: &str) -> Result<Vec<Letter>, WordError> {
        let mut out = Vec::new();
        for tok in text.split_whitespace() {
            let (name, exp) = match tok.split_once('^') {
                Some((n, e)) => {
                    let e: i64 = e.parse().map_err(|_| WordError::Syntax {
                        offset: 0,
                        msg: format!("bad exponent in `{tok}`"),
                    })?;
                    (n, e)
                }
                None => (tok, 1),
            };
            let l = self.gen(name)?;
            let l = if exp < 0 { l.inverse() } else { l };
            for _ in 0..exp.unsigned_abs() {
                out.push(l);
            }
        }
        Ok(out)
    }

    /// Parses and freely reduces a word.
    pub fn parse_word(&self, text: &str) -> Result<Word, WordError> {
        Ok(free_reduce(&self.parse_letters(text)?))
    }

    pub fn format(&self, w: &[Letter]) -> String {
        let mut s = String::new();
        for (i, l) in w.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(self.name(l.gen));
            if l.inv {
                s.push_str("^-1");
            }
        }
        s
    }
}

/// A generator or its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub gen: u32,
    pub inv: bool,
}

impl Letter {
    pub const fn pos(gen: u32) -> Self {
        Letter { gen, inv: false }
    }

    pub const fn neg(gen: u32) -> Self {
        Letter { gen, inv: true }
    }

    pub const fn inverse(self) -> Self {
        Letter { gen: self.gen, inv: !self.inv }
    }

    pub fn sign(self) -> i64 {
        if self.inv {
            -1
        } else {
            1
        }
    }

    /// `self` raised to `e` (e = ±1).
    pub fn pow(self, e: i64) -> Self {
        if e < 0 {
            self.inverse()
        } else {
            self
        }
    }

    pub fn cancels(self, other: Letter) -> bool {
        self.gen == other.gen && self.inv != other.inv
    }
}

/// A freely reduced word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Wraps `letters`, which must already be reduced.
    pub fn from_reduced(letters: Vec<Letter>) -> Self {
        debug_assert!(is_reduced(&letters));
        Word(letters)
    }

    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    /// `l^e` for any integer `e`.
    pub fn power_of(l: Letter, e: i64) -> Self {
        let l = l.pow(e);
        Word(vec![l; e.unsigned_abs() as usize])
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn into_letters(self) -> Vec<Letter> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(invert(&self.0))
    }

    pub fn concat(&self, other: &Word) -> Word {
        concat(self, other)
    }

    pub fn pow(&self, e: i64) -> Word {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut raw = Vec::with_capacity(base.len() * e.unsigned_abs() as usize);
        for _ in 0..e.unsigned_abs() {
            raw.extend_from_slice(&base.0);
        }
        free_reduce(&raw)
    }

    /// Letter-wise image under a generator map, reduced.
    pub fn map_gens(&self, f: impl Fn(u32) -> u32) -> Word {
        let raw: Vec<Letter> = self.0.iter().map(|l| Letter { gen: f(l.gen), inv: l.inv }).collect();
        free_reduce(&raw)
    }
}

impl std::ops::Deref for Word {
    type Target = [Letter];
    fn deref(&self) -> &[Letter] {
        &self.0
    }
}

pub fn is_reduced(raw: &[Letter]) -> bool {
    raw.windows(2).all(|p| !p[0].cancels(p[1]))
}

pub fn free_reduce(raw: &[Letter]) -> Word {
    let mut out: Vec<Letter> = Vec::with_capacity(raw.len());
    for &l in raw {
        if out.last().is_some_and(|t| t.cancels(l)) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    Word(out)
}

pub fn invert(raw: &[Letter]) -> Vec<Letter> {
    raw.iter().rev().map(|l| l.inverse()).collect()
}

/// `u · w`, reducing only at the seam.
pub fn concat(u: &Word, w: &Word) -> Word {
    let mut i = 0;
    while i < u.len() && i < w.len() && u.0[u.len() - 1 - i].cancels(w.0[i]) {
        i += 1;
    }
    let mut out = Vec::with_capacity(u.len() + w.len() - 2 * i);
    out.extend_from_slice(&u.0[..u.len() - i]);
    out.extend_from_slice(&w.0[i..]);
    Word(out)
}

/// `u · w · u⁻¹`, reduced.
pub fn conjugate(u: &Word, w: &Word) -> Word {
    concat(&concat(u, w), &u.inverse())
}

/// Returns `(core, conjugator)` with `w = conjugator · core · conjugator⁻¹`.
pub fn cyclic_reduce(w: &Word) -> (Word, Word) {
    let n = w.len();
    let mut i = 0;
    while 2 * i + 1 < n && w.0[i].cancels(w.0[n - 1 - i]) {
        i += 1;
    }
    (Word(w.0[i..n - i].to_vec()), Word(w.0[..i].to_vec()))
}

pub fn is_cyclically_reduced(w: &[Letter]) -> bool {
    is_reduced(w) && (w.len() < 2 || !w[0].cancels(w[w.len() - 1]))
}

pub fn exponent_sum(w: &[Letter], gen: u32) -> i64 {
    w.iter().filter(|l| l.gen == gen).map(|l| l.sign()).sum()
}

/// A group law `v(x_1..x_k)`; variable `x_j` is generator `j-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LawWord {
    k: usize,
    body: Word,
}

impl LawWord {
    pub fn new(body: Word) -> Result<Self, WordError> {
        if body.is_empty() {
            return Err(WordError::EmptyLaw);
        }
        if !is_cyclically_reduced(&body) {
            return Err(WordError::NotCyclicallyReduced);
        }
        let k = body.iter().map(|l| l.gen as usize + 1).max().unwrap_or(0);
        for j in 0..k {
            if !body.iter().any(|l| l.gen as usize == j) {
                return Err(WordError::UnusedVariable(j + 1));
            }
        }
        Ok(LawWord { k, body })
    }

    pub fn variable_count(&self) -> usize {
        self.k
    }

    pub fn body(&self) -> &Word {
        &self.body
    }

    /// Number of q-letters in the associated machine: `|v| + 1`.
    pub fn state_count(&self) -> usize {
        self.body.len() + 1
    }

    /// Variable alphabet `x1..xk`.
    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new((1..=self.k).map(|j| format!("x{j}"))).expect("variable names")
    }

    /// Exponent sum of each variable in the law.
    pub fn exponent_sums(&self) -> Vec<i64> {
        (0..self.k as u32).map(|j| exponent_sum(&self.body, j)).collect()
    }
}

impl fmt::Display for LawWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.alphabet().format(&self.body))
    }
}

/// Image of the law under `x_j ↦ values[j]`, reduced.
pub fn substitute(v: &LawWord, values: &[Word]) -> Result<Word, WordError> {
    if values.len() != v.k {
        return Err(WordError::Arity { expected: v.k, got: values.len() });
    }
    let mut raw = Vec::new();
    for l in v.body.iter() {
        let x = &values[l.gen as usize];
        if l.inv {
            raw.extend(x.iter().rev().map(|c| c.inverse()));
        } else {
            raw.extend_from_slice(x);
        }
    }
    Ok(free_reduce(&raw))
}

/// Parses a law: juxtaposition, `^n` powers, `[u,w]` commutators
/// (`u w u^-1 w^-1`), parentheses and variables `x1..xk`.
pub fn parse_law(expr: &str) -> Result<LawWord, WordError> {
    let mut p = LawParser { s: expr.as_bytes(), i: 0 };
    let raw = p.product()?;
    p.skip_ws();
    if p.i != p.s.len() {
        return Err(p.err("unexpected trailing input"));
    }
    let reduced = free_reduce(&raw);
    if reduced.len() != raw.len() || reduced.is_empty() {
        let alpha = Alphabet::new((1..=64).map(|j| format!("x{j}"))).expect("names");
        return Err(WordError::NotReduced(alpha.format(&reduced)));
    }
    LawWord::new(reduced)
}

struct LawParser<'a> {
    s: &'a [u8],
    i: usize,
}

impl LawParser<'_> {
    fn err(&self, msg: &str) -> WordError {
        WordError::Syntax { offset: self.i, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.i).copied()
    }

    fn product(&mut self) -> Result<Vec<Letter>, WordError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            if c == b')' || c == b']' || c == b',' {
                break;
            }
            out.extend(self.power()?);
        }
        Ok(out)
    }

    fn power(&mut self) -> Result<Vec<Letter>, WordError> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.i += 1;
        self.skip_ws();
        let start = self.i;
        if self.i < self.s.len() && self.s[self.i] == b'-' {
            self.i += 1;
        }
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        let e: i64 = std::str::from_utf8(&self.s[start..self.i])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err("expected integer exponent"))?;
        let unit = if e < 0 { invert(&base) } else { base };
        let mut out = Vec::new();
        for _ in 0..e.unsigned_abs() {
            out.extend_from_slice(&unit);
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<Vec<Letter>, WordError> {
        match self.peek() {
            Some(b'x') => {
                self.i += 1;
                let start = self.i;
                while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                    self.i += 1;
                }
                let j: usize = std::str::from_utf8(&self.s[start..self.i])
                    .ok()
                    .and_then(|t| t.parse().ok())
                    .filter(|&j| j >= 1)
                    .ok_or_else(|| self.err("expected variable index x1, x2, ..."))?;
                Ok(vec![Letter::pos((j - 1) as u32)])
            }
            Some(b'(') => {
                self.i += 1;
                let w = self.product()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.i += 1;
                Ok(w)
            }
            Some(b'[') => {
                self.i += 1;
                let u = self.product()?;
                if self.peek() != Some(b',') {
                    return Err(self.err("expected `,`"));
                }
                self.i += 1;
                let w = self.product()?;
                if self.peek() != Some(b']') {
                    return Err(self.err("expected `]`"));
                }
                self.i += 1;
                let mut out = u.clone();
                out.extend_from_slice(&w);
                out.extend(invert(&u));
                out.extend(invert(&w));
                Ok(out)
            }
            _ => Err(self.err("expected variable, `(` or `[`")),
        }
    }
}

/// All reduced words of length exactly `len` over `gens` generators, in
/// lexicographic order of letter codes.
pub fn reduced_words_of_length(gens: u32, len: usize) -> Vec<Word> {
    let letters: Vec<Letter> =
        (0..gens).flat_map(|g| [Letter::pos(g), Letter::neg(g)]).collect();
    let mut layer = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(layer.len() * 3);
        for w in &layer {
            for &l in &letters {
                if w.last().is_some_and(|t: &Letter| t.cancels(l)) {
                    continue;
                }
                let mut x = w.clone();
                x.push(l);
                next.push(x);
            }
        }
        layer = next;
    }
    layer.into_iter().map(Word).collect()
}

/// All reduced words of length at most `max_len`.
pub fn reduced_words_up_to(gens: u32, max_len: usize) -> Vec<Word> {
    (0..=max_len).flat_map(|n| reduced_words_of_length(gens, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab() -> Alphabet {
        Alphabet::new(["a", "b"]).unwrap()
    }

    fn raw_strategy(gens: u32, max: usize) -> impl Strategy<Value = Vec<Letter>> {
        prop::collection::vec((0..gens, any::<bool>()).prop_map(|(g, inv)| Letter { gen: g, inv }), 0..max)
    }

    #[test]
    fn reduction_examples() {
        let a = ab();
        assert!(free_reduce(&a.parse_letters("a a^-1").unwrap()).is_empty());
        assert_eq!(a.format(&free_reduce(&a.parse_letters("a b b^-1 a").unwrap())), "a a");
    }

    #[test]
    fn conjugation_examples() {
        let a = ab();
        let w = a.parse_word("b").unwrap();
        let u = a.parse_word("a").unwrap();
        assert_eq!(conjugate(&Word::empty(), &w), w);
        assert_eq!(a.format(&conjugate(&u, &w)), "a b a^-1");
    }

    #[test]
    fn cyclic_reduce_examples() {
        let a = ab();
        let (core, c) = cyclic_reduce(&a.parse_word("a b a^-1").unwrap());
        assert_eq!(a.format(&core), "b");
        assert_eq!(a.format(&c), "a");
        let w = a.parse_word("a b").unwrap();
        assert_eq!(cyclic_reduce(&w), (w.clone(), Word::empty()));
    }

    #[test]
    fn exponent_sum_examples() {
        let a = ab();
        assert_eq!(exponent_sum(&a.parse_word("a b a^-1 b^-1").unwrap(), 0), 0);
        assert_eq!(exponent_sum(&a.parse_word("a^3 b").unwrap(), 0), 3);
    }

    #[test]
    fn law_parsing() {
        let v = parse_law("x1^3").unwrap();
        assert_eq!(v.variable_count(), 1);
        assert_eq!(v.body().len(), 3);
        assert_eq!(v.state_count(), 4);
        let c = parse_law("[x1,x2]").unwrap();
        assert_eq!(c.variable_count(), 2);
        assert_eq!(c.to_string(), "x1 x2 x1^-1 x2^-1");
        assert_eq!(c.state_count(), 5);
        assert!(parse_law("x1 x1^-1").is_err());
        assert!(matches!(parse_law("x2^2"), Err(WordError::UnusedVariable(1))));
        assert!(matches!(parse_law("x1 x2 x1^-1"), Err(WordError::NotCyclicallyReduced)));
        assert!(parse_law("").is_err());
        assert!(parse_law("x1 ^").is_err());
        assert_eq!(parse_law("(x1 x2)^2").unwrap().body().len(), 4);
    }

    #[test]
    fn substitution_examples() {
        let a = ab();
        let x = |s: &str| a.parse_word(s).unwrap();
        let cube = parse_law("x1^3").unwrap();
        assert_eq!(a.format(&substitute(&cube, &[x("a")]).unwrap()), "a a a");
        let comm = parse_law("[x1,x2]").unwrap();
        assert!(substitute(&comm, &[x("a"), x("a")]).unwrap().is_empty());
        assert_eq!(a.format(&substitute(&comm, &[x("a"), x("b")]).unwrap()), "a b a^-1 b^-1");
        assert!(matches!(substitute(&comm, &[x("a")]), Err(WordError::Arity { .. })));
    }

    #[test]
    fn alphabet_rules() {
        assert!(Alphabet::new(["a", "a"]).is_err());
        assert!(Alphabet::new(["a^"]).is_err());
        assert!(Alphabet::new(["a b"]).is_err());
        let a = ab();
        assert!(a.parse_word("c").is_err());
        assert!(a.check(&[Letter::pos(5)]).is_err());
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(reduced_words_of_length(2, 3).len(), 36);
        assert_eq!(reduced_words_up_to(2, 2).len(), 1 + 4 + 12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn reduce_idempotent(raw in raw_strategy(3, 64)) {
            let r = free_reduce(&raw);
            prop_assert_eq!(free_reduce(&r), r.clone());
            prop_assert!(r.len() <= raw.len());
            prop_assert_eq!(r.len() % 2, raw.len() % 2);
            prop_assert!(is_reduced(&r));
        }
    }

    proptest! {
        #[test]
        fn inverse_properties(raw in raw_strategy(3, 40)) {
            let w = free_reduce(&raw);
            prop_assert_eq!(w.inverse().inverse(), w.clone());
            prop_assert!(concat(&w, &w.inverse()).is_empty());
        }

        #[test]
        fn concat_matches_full_reduction(x in raw_strategy(3, 30), y in raw_strategy(3, 30)) {
            let (u, w) = (free_reduce(&x), free_reduce(&y));
            let mut raw = u.letters().to_vec();
            raw.extend_from_slice(&w);
            prop_assert_eq!(concat(&u, &w), free_reduce(&raw));
        }

        #[test]
        fn cyclic_reassembly(raw in raw_strategy(3, 40)) {
            let w = free_reduce(&raw);
            let (core, c) = cyclic_reduce(&w);
            prop_assert!(is_cyclically_reduced(&core));
            prop_assert_eq!(conjugate(&c, &core), w);
        }

        #[test]
        fn exponent_sum_additive(x in raw_strategy(2, 30), y in raw_strategy(2, 30)) {
            let (u, w) = (free_reduce(&x), free_reduce(&y));
            prop_assert_eq!(exponent_sum(&concat(&u, &w), 0), exponent_sum(&u, 0) + exponent_sum(&w, 0));
        }

        #[test]
        fn substitute_is_homomorphism(
            body in raw_strategy(2, 12),
            vals in prop::collection::vec(raw_strategy(3, 6), 2),
        ) {
            let body = free_reduce(&body);
            let (core, _) = cyclic_reduce(&body);
            if let Ok(v) = LawWord::new(core) {
                let vals: Vec<Word> = vals.iter().map(|r| free_reduce(r)).take(v.variable_count()).collect();
                // naive letter-by-letter oracle
                let mut acc = Word::empty();
                for l in v.body().iter() {
                    acc = concat(&acc, &vals[l.gen as usize].pow(l.sign()));
                }
                prop_assert_eq!(substitute(&v, &vals).unwrap(), acc);
            }
        }
    }
}
