//! The groups `G(v,m) ≤ H(v,m)` built from a law `v`, and constructive
//! derivations of their key identities.
//!
//! `G` is generated by `a_1..a_m`, `q_1..q_M`, `k_1..k_N` and one letter
//! `r_{j,l}` per pair (tape letter, variable). Conjugating
//! `Λ(X) = q_1 X_{i_1} q_2 … q_M` by `r_{j,l}` appends `a_j` to `X_l`, and the
//! hub makes `Σ(1,…,1) = k_1 Λ … k_N Λ` trivial, so every `Σ(X)` is trivial.
//! `H` adds `ρ`, `d` and copies `b_j` of the tape letters; conjugating by `ρ`
//! splices `d` around the first `Λ` block, and `d` turns `Λ(X)` into
//! `Λ(X)·v(Y)`, which forces `v(Y) = 1` for every tuple `Y` of `b`-words.

use std::sync::Arc;

use thiserror::Error;

use crate::presentations::{rotate_trivial, DerivationTrace, GroupPresentation, Relator, TraceBuilder, TraceError};
use crate::verbal::VerbalWitness;
use crate::words::{free_reduce, invert, substitute, Alphabet, LawWord, Letter, Word};

#[derive(Debug, Error)]
pub enum HvmError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} component words, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("component words must be reduced words over a_1..a_{0}")]
    ForeignLetter(usize),
    #[error("witness does not certify the word")]
    BadWitness,
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HvmParams {
    pub v: LawWord,
    pub m: usize,
    pub n: usize,
}

impl HvmParams {
    pub fn new(v: LawWord, m: usize, n: usize) -> Result<Self, HvmError> {
        Self::with_small_n(v, m, n, false)
    }

    /// Like [`HvmParams::new`], optionally admitting `N < 29`.
    pub fn with_small_n(v: LawWord, m: usize, n: usize, allow_small_n: bool) -> Result<Self, HvmError> {
        if m < 1 {
            return Err(HvmError::InvalidParams("rank m must be at least 1".into()));
        }
        if n < 2 || (n < 29 && !allow_small_n) {
            return Err(HvmError::InvalidParams(format!("N = {n} must be at least 29")));
        }
        Ok(HvmParams { v, m, n })
    }

    /// Number of state letters `M = |v| + 1`.
    pub fn big_m(&self) -> usize {
        self.v.state_count()
    }

    pub fn k(&self) -> usize {
        self.v.variable_count()
    }
}

/// Generator indices of `H(v,m)`; those of `G(v,m)` are a prefix.
#[derive(Debug, Clone)]
pub struct HvmLetters {
    m: u32,
    big_m: u32,
    n: u32,
    k: u32,
}

impl HvmLetters {
    pub fn new(p: &HvmParams) -> Self {
        HvmLetters { m: p.m as u32, big_m: p.big_m() as u32, n: p.n as u32, k: p.k() as u32 }
    }

    /// `a_{j+1}`.
    pub fn a(&self, j: usize) -> Letter {
        Letter::pos(j as u32)
    }

    /// `q_{t+1}`.
    pub fn q(&self, t: usize) -> Letter {
        Letter::pos(self.m + t as u32)
    }

    /// `k_{b+1}`.
    pub fn k(&self, b: usize) -> Letter {
        Letter::pos(self.m + self.big_m + b as u32)
    }

    /// `r_{j+1, l+1}`.
    pub fn r(&self, j: usize, l: usize) -> Letter {
        Letter::pos(self.m + self.big_m + self.n + j as u32 * self.k + l as u32)
    }

    fn g_count(&self) -> u32 {
        self.m + self.big_m + self.n + self.m * self.k
    }

    pub fn rho(&self) -> Letter {
        Letter::pos(self.g_count())
    }

    pub fn d(&self) -> Letter {
        Letter::pos(self.g_count() + 1)
    }

    /// `b_{j+1}`.
    pub fn b(&self, j: usize) -> Letter {
        Letter::pos(self.g_count() + 2 + j as u32)
    }

    fn is_a(&self, x: Letter) -> bool {
        x.gen < self.m
    }

    fn is_b(&self, x: Letter) -> bool {
        x.gen >= self.g_count() + 2
    }

    fn q_index(&self, x: Letter) -> Option<usize> {
        (!x.inv && x.gen >= self.m && x.gen < self.m + self.big_m).then(|| (x.gen - self.m) as usize)
    }
}

/// How `r_{j,l}` acts on `q_t` (0-based `t`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QAction {
    Left,
    Right,
    Fixed,
}

fn q_action(v: &LawWord, l: usize, t: usize) -> QAction {
    let body = v.body();
    let y = |s: usize| body[s];
    let left = t >= 1 && y(t - 1) == Letter::pos(l as u32);
    let right = t < body.len() && y(t) == Letter::neg(l as u32);
    assert!(!(left && right), "law is not reduced");
    if left {
        QAction::Left
    } else if right {
        QAction::Right
    } else {
        QAction::Fixed
    }
}

fn rel(word: Vec<Letter>, tag: &str) -> Relator {
    Relator { word: Word::from_reduced(word), tag: tag.to_string() }
}

fn g_names(p: &HvmParams) -> Vec<String> {
    let mut names: Vec<String> = (1..=p.m).map(|j| format!("a{j}")).collect();
    names.extend((1..=p.big_m()).map(|t| format!("q{t}")));
    names.extend((1..=p.n).map(|b| format!("k{b}")));
    for j in 1..=p.m {
        for l in 1..=p.k() {
            names.push(format!("r{j}_{l}"));
        }
    }
    names
}

fn g_relators(p: &HvmParams, x: &HvmLetters) -> Vec<Relator> {
    let mut out = Vec::new();
    for j in 0..p.m {
        for l in 0..p.k() {
            let r = x.r(j, l);
            let (ri, a) = (r.inverse(), x.a(j));
            for t in 0..p.big_m() {
                let q = x.q(t);
                out.push(match q_action(&p.v, l, t) {
                    QAction::Left => rel(vec![ri, q, r, q.inverse(), a.inverse()], "2.1"),
                    QAction::Right => rel(vec![ri, q, r, a, q.inverse()], "2.2"),
                    QAction::Fixed => rel(vec![ri, q, r, q.inverse()], "2.3"),
                });
            }
        }
    }
    for j in 0..p.m {
        for l in 0..p.k() {
            let r = x.r(j, l);
            for jj in 0..p.m {
                let a = x.a(jj);
                out.push(rel(vec![r.inverse(), a, r, a.inverse()], "2.4"));
            }
        }
    }
    for j in 0..p.m {
        for l in 0..p.k() {
            let r = x.r(j, l);
            for b in 0..p.n {
                let k = x.k(b);
                out.push(rel(vec![r.inverse(), k, r, k.inverse()], "2.5"));
            }
        }
    }
    out.push(rel(sigma_letters(p, x, &vec![Word::empty(); p.k()]), "2.6-hub"));
    out
}

pub fn gen_g(p: &HvmParams) -> GroupPresentation {
    let x = HvmLetters::new(p);
    let alphabet = Alphabet::new(g_names(p)).expect("generated names are valid");
    GroupPresentation::new(alphabet, g_relators(p, &x)).expect("generated relators are cyclically reduced")
}

pub fn gen_h(p: &HvmParams) -> GroupPresentation {
    let x = HvmLetters::new(p);
    let mut names = g_names(p);
    names.push("rho".into());
    names.push("d".into());
    names.extend((1..=p.m).map(|j| format!("b{j}")));
    let alphabet = Alphabet::new(names).expect("generated names are valid");
    let mut out = g_relators(p, &x);
    let (rho, d) = (x.rho(), x.d());
    let (rhoi, di) = (rho.inverse(), d.inverse());
    let (k1, k2) = (x.k(0), x.k(1));
    out.push(rel(vec![rhoi, k1, rho, d, k1.inverse()], "2.7"));
    out.push(rel(vec![rhoi, k2, rho, k2.inverse(), di], "2.7"));
    for b in 2..p.n {
        let k = x.k(b);
        out.push(rel(vec![rhoi, k, rho, k.inverse()], "2.8"));
    }
    for t in 0..p.big_m() {
        let q = x.q(t);
        out.push(rel(vec![rhoi, q, rho, q.inverse()], "2.9"));
    }
    for j in 0..p.m {
        let a = x.a(j);
        out.push(rel(vec![rhoi, a, rho, a.inverse()], "2.10"));
    }
    for j in 0..p.m {
        let (a, b) = (x.a(j), x.b(j));
        out.push(rel(vec![di, a, d, b.inverse(), a.inverse()], "2.11"));
    }
    for t in 0..p.big_m() {
        let q = x.q(t);
        out.push(rel(vec![di, q, d, q.inverse()], "2.12"));
    }
    for j in 0..p.m {
        for l in 0..p.m {
            let (b, a) = (x.b(j), x.a(l));
            out.push(rel(vec![b, a, b.inverse(), a.inverse()], "2.13"));
        }
    }
    for j in 0..p.m {
        for t in 0..p.big_m() {
            let (b, q) = (x.b(j), x.q(t));
            out.push(rel(vec![b, q, b.inverse(), q.inverse()], "2.14"));
        }
    }
    GroupPresentation::new(alphabet, out).expect("generated relators are cyclically reduced")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaCounts {
    pub g_generators: usize,
    pub g_relators: Vec<(String, usize)>,
    pub h_generators: usize,
    pub h_relators: Vec<(String, usize)>,
}

impl SchemaCounts {
    pub fn g_total(&self) -> usize {
        self.g_relators.iter().map(|c| c.1).sum()
    }

    pub fn h_total(&self) -> usize {
        self.h_relators.iter().map(|c| c.1).sum()
    }
}

/// Closed-form generator and relator counts, by schema tag.
pub fn count_schema(p: &HvmParams) -> SchemaCounts {
    let (m, big_m, n, k) = (p.m, p.big_m(), p.n, p.k());
    let mut per_t = [0usize; 3];
    for l in 0..k {
        for t in 0..big_m {
            per_t[q_action(&p.v, l, t) as usize] += m;
        }
    }
    let g_relators: Vec<(String, usize)> = vec![
        ("2.1".into(), per_t[0]),
        ("2.2".into(), per_t[1]),
        ("2.3".into(), per_t[2]),
        ("2.4".into(), m * k * m),
        ("2.5".into(), m * k * n),
        ("2.6-hub".into(), 1),
    ];
    let mut h_relators = g_relators.clone();
    h_relators.extend([
        ("2.7".into(), 2),
        ("2.8".into(), n - 2),
        ("2.9".into(), big_m),
        ("2.10".into(), m),
        ("2.11".into(), m),
        ("2.12".into(), big_m),
        ("2.13".into(), m * m),
        ("2.14".into(), m * big_m),
    ]);
    let g_generators = m + big_m + n + m * k;
    SchemaCounts {
        g_generators,
        g_relators: g_relators.into_iter().filter(|c| c.1 > 0).collect(),
        h_generators: g_generators + 2 + m,
        h_relators: h_relators.into_iter().filter(|c| c.1 > 0).collect(),
    }
}

fn lambda_letters(p: &HvmParams, x: &HvmLetters, xs: &[Word]) -> Vec<Letter> {
    let body = p.v.body();
    let mut out = vec![x.q(0)];
    for (s, y) in body.iter().enumerate() {
        let comp = &xs[y.gen as usize];
        if y.inv {
            out.extend(invert(comp));
        } else {
            out.extend_from_slice(comp);
        }
        out.push(x.q(s + 1));
    }
    out
}

fn sigma_letters(p: &HvmParams, x: &HvmLetters, xs: &[Word]) -> Vec<Letter> {
    let lam = lambda_letters(p, x, xs);
    let mut out = Vec::with_capacity(p.n * (lam.len() + 1));
    for b in 0..p.n {
        out.push(x.k(b));
        out.extend_from_slice(&lam);
    }
    out
}

fn check_components(p: &HvmParams, xs: &[Word]) -> Result<(), HvmError> {
    if xs.len() != p.k() {
        return Err(HvmError::Arity { expected: p.k(), got: xs.len() });
    }
    if xs.iter().flat_map(|w| w.iter()).any(|l| l.gen as usize >= p.m) {
        return Err(HvmError::ForeignLetter(p.m));
    }
    Ok(())
}

/// `Λ(X_1..X_k)`; components are words over `a_1..a_m` (generator `j` is `a_{j+1}`).
pub fn lambda_word(p: &HvmParams, xs: &[Word]) -> Result<Vec<Letter>, HvmError> {
    check_components(p, xs)?;
    Ok(lambda_letters(p, &HvmLetters::new(p), xs))
}

/// `Σ(X_1..X_k) = k_1 Λ … k_N Λ`.
pub fn sigma_word(p: &HvmParams, xs: &[Word]) -> Result<Vec<Letter>, HvmError> {
    check_components(p, xs)?;
    Ok(sigma_letters(p, &HvmLetters::new(p), xs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `r⁻¹ Λ(X) r → Λ(X')` with `X'_l = X_l a_j`.
    Plus,
    /// `r Λ(X) r⁻¹ → Λ(X')` with `X'_l = X_l a_j⁻¹`.
    Minus,
}

fn with_trailing(xs: &[Word], l: usize, a: Letter) -> Vec<Word> {
    let mut out = xs.to_vec();
    out[l] = out[l].concat(&Word::letter(a));
    out
}

/// Derivations over one presentation (`G` or `H`) for fixed parameters.
pub struct HvmEmbedding {
    pub params: HvmParams,
    pub letters: HvmLetters,
    pub g: Arc<GroupPresentation>,
    pub h: Arc<GroupPresentation>,
}

impl HvmEmbedding {
    pub fn new(params: HvmParams) -> Self {
        HvmEmbedding {
            letters: HvmLetters::new(&params),
            g: Arc::new(gen_g(&params)),
            h: Arc::new(gen_h(&params)),
            params,
        }
    }

    /// `r⁻¹ Λ(X) r → Λ(X a_j at l)` by pushing `r⁻¹` to the right.
    fn plus_trace(&self, pres: &Arc<GroupPresentation>, j: usize, l: usize, xs: &[Word]) -> Result<DerivationTrace, TraceError> {
        let x = &self.letters;
        let r = x.r(j, l);
        let ri = r.inverse();
        let mut start = vec![ri];
        start.extend(lambda_letters(&self.params, x, xs));
        start.push(r);
        let mut tb = TraceBuilder::new(pres.clone(), start);
        let mut i = 0;
        loop {
            let y = tb.get(i + 1);
            if y == r {
                tb.cancel(i)?;
                break;
            }
            let image = match x.q_index(y).map(|t| q_action(&self.params.v, l, t)) {
                Some(QAction::Left) => vec![x.a(j), y, ri],
                Some(QAction::Right) => vec![y, x.a(j).inverse(), ri],
                _ => vec![y, ri],
            };
            tb.rewrite(i, &[ri, y], &image)?;
            i += image.len() - 1;
        }
        let len = tb.len();
        tb.reduce_segment(0, len)?;
        let t = tb.finish();
        debug_assert_eq!(t.end, lambda_letters(&self.params, x, &with_trailing(xs, l, x.a(j))));
        Ok(t)
    }

    /// Conjugation of `Λ(X)` by `r_{j,l}`, using only the `r`-relators.
    pub fn derive_conj_step(&self, j: usize, l: usize, dir: Direction, xs: &[Word]) -> Result<DerivationTrace, HvmError> {
        check_components(&self.params, xs)?;
        if j >= self.params.m || l >= self.params.k() {
            return Err(HvmError::InvalidParams(format!("no letter r{}_{}", j + 1, l + 1)));
        }
        let x = &self.letters;
        match dir {
            Direction::Plus => Ok(self.plus_trace(&self.g, j, l, xs)?),
            Direction::Minus => {
                let target = with_trailing(xs, l, x.a(j).inverse());
                let back = self.plus_trace(&self.g, j, l, &target)?.invert()?;
                let r = x.r(j, l);
                let mut start = vec![r];
                start.extend(lambda_letters(&self.params, x, xs));
                start.push(r.inverse());
                let mut tb = TraceBuilder::new(self.g.clone(), start);
                tb.embed(1, &back)?;
                let len = tb.len();
                tb.cancel(len - 2)?;
                tb.cancel(0)?;
                Ok(tb.finish())
            }
        }
    }

    /// `Σ(X) → ε`: peel the last letter of every component, conjugating each
    /// `Λ` block by the matching `r` letter, then apply the hub.
    fn sigma_trace(&self, pres: &Arc<GroupPresentation>, xs: &[Word]) -> Result<DerivationTrace, TraceError> {
        let p = &self.params;
        let x = &self.letters;
        let start = sigma_letters(p, x, xs);
        let mut tb = TraceBuilder::new(pres.clone(), start);
        let mut cur: Vec<Word> = xs.to_vec();
        let mut lo = 0;
        for l in 0..p.k() {
            while let Some(&last) = cur[l].letters().last() {
                let j = last.gen as usize;
                let r = x.r(j, l);
                let shorter = with_trailing(&cur, l, last.inverse());
                let lam_len = lambda_letters(p, x, &cur).len();
                // Λ(X) → c Λ(X') c⁻¹ with c = r⁻¹ for a trailing a_j, r for a_j⁻¹.
                let (c, block) = if !last.inv {
                    (r.inverse(), self.plus_trace(pres, j, l, &shorter)?.invert()?)
                } else {
                    (r, self.plus_trace(pres, j, l, &cur)?)
                };
                let new_lam = block.end.len() - if last.inv { 0 } else { 2 };
                let mut pos = lo;
                for _ in 0..p.n {
                    if last.inv {
                        tb.insert_pair(pos + 1, r)?;
                        tb.insert_pair(pos + 3 + lam_len, r)?;
                        tb.embed(pos + 2, &block)?;
                    } else {
                        tb.embed(pos + 1, &block)?;
                    }
                    pos += 3 + new_lam;
                }
                // k_1 c … c⁻¹ k_2 c … → c k_1 … k_2 … c⁻¹.
                tb.rewrite(lo, &[x.k(0), c], &[c, x.k(0)])?;
                let mut pos = lo + 2 + new_lam;
                for b in 1..p.n {
                    tb.rewrite(pos, &[c.inverse(), x.k(b), c], &[x.k(b)])?;
                    pos += 1 + new_lam;
                }
                lo += 1;
                cur = shorter;
            }
        }
        let hub = sigma_letters(p, x, &cur);
        tb.rewrite(lo, &hub, &[])?;
        tb.cancel_word_pair(0, lo)?;
        Ok(tb.finish())
    }

    /// `Σ(X) → ε` over `G`.
    pub fn derive_sigma_trivial(&self, xs: &[Word]) -> Result<DerivationTrace, HvmError> {
        check_components(&self.params, xs)?;
        Ok(self.sigma_trace(&self.g, xs)?)
    }

    /// Turns `d⁻¹ Λ d` at `pos` into `Λ · v(Y)`; returns the new segment length.
    fn d_conjugate(&self, tb: &mut TraceBuilder, pos: usize) -> Result<usize, TraceError> {
        let x = &self.letters;
        let (d, di) = (x.d(), x.d().inverse());
        let mut i = pos;
        loop {
            let y = tb.get(i + 1);
            if y == d {
                tb.cancel(i)?;
                break;
            }
            let image = if x.is_a(y) {
                let b = x.b(y.gen as usize);
                if y.inv {
                    vec![b.inverse(), y, di]
                } else {
                    vec![y, b, di]
                }
            } else {
                vec![y, di]
            };
            tb.rewrite(i, &[di, y], &image)?;
            i += image.len() - 1;
        }
        let end = i;
        let mut tail = end;
        for i in (pos..end).rev() {
            let y = tb.get(i);
            if !x.is_b(y) {
                continue;
            }
            let mut j = i;
            while j + 1 < tail {
                let z = tb.get(j + 1);
                tb.rewrite(j, &[y, z], &[z, y])?;
                j += 1;
            }
            tail = j;
        }
        let b_len = tb.reduce_segment(tail, end - tail)?;
        Ok(tail - pos + b_len)
    }

    fn b_copy(&self, xs: &[Word]) -> Vec<Word> {
        xs.iter().map(|w| w.map_gens(|g| self.letters.b(g as usize).gen)).collect()
    }

    /// `d⁻¹ Λ(X) d · (Λ(X) v(Y))⁻¹ → ε` over `H`.
    pub fn derive_d_conjugation(&self, xs: &[Word]) -> Result<DerivationTrace, HvmError> {
        check_components(&self.params, xs)?;
        let x = &self.letters;
        let lam = lambda_letters(&self.params, x, xs);
        let vy = substitute(&self.params.v, &self.b_copy(xs)).map_err(|e| HvmError::InvalidParams(e.to_string()))?;
        let mut start = vec![x.d().inverse()];
        start.extend_from_slice(&lam);
        start.push(x.d());
        start.extend(invert(&vy));
        start.extend(invert(&lam));
        let mut tb = TraceBuilder::new(self.h.clone(), start);
        let len = self.d_conjugate(&mut tb, 0)?;
        let total = len + vy.len() + lam.len();
        tb.reduce_segment(0, total)?;
        Ok(tb.finish())
    }

    /// `v(Y) → ε` over `H`, where `Y` is the `b`-copy of `X`.
    pub fn derive_law_instance(&self, xs: &[Word]) -> Result<DerivationTrace, HvmError> {
        check_components(&self.params, xs)?;
        Ok(self.law_instance_trace(xs)?)
    }

    fn law_instance_trace(&self, xs: &[Word]) -> Result<DerivationTrace, TraceError> {
        let p = &self.params;
        let x = &self.letters;
        let vy = substitute(&p.v, &self.b_copy(xs)).expect("arity checked").into_letters();
        if vy.is_empty() {
            return Ok(DerivationTrace::identity(self.h.clone(), vy));
        }
        let sigma = self.sigma_trace(&self.h, xs)?;
        let lam = lambda_letters(p, x, xs);

        // ε → ρ⁻¹ Σ ρ → k_1 d⁻¹ Λ d k_2 Λ … → k_1 Λ v(Y) k_2 Λ …
        let (rho, rhoi) = (x.rho(), x.rho().inverse());
        let mut b = TraceBuilder::new(self.h.clone(), Vec::new());
        b.insert_pair(0, rhoi)?;
        b.embed(1, &sigma.invert()?)?;
        let mut i = 0;
        loop {
            let y = b.get(i + 1);
            if y == rho {
                b.cancel(i)?;
                break;
            }
            let image = if y == x.k(0) {
                vec![y, x.d().inverse(), rhoi]
            } else if y == x.k(1) {
                vec![x.d(), y, rhoi]
            } else {
                vec![y, rhoi]
            };
            b.rewrite(i, &[rhoi, y], &image)?;
            i += image.len() - 1;
        }
        self.d_conjugate(&mut b, 1)?;
        let built = b.finish();

        // v(Y) → (k_1 Λ)⁻¹ · k_1 Λ v(Y) T · T⁻¹ → (T k_1 Λ)⁻¹ → ε.
        let head_len = 1 + lam.len();
        let tail = sigma.start[head_len..].to_vec();
        let mut tb = TraceBuilder::new(self.h.clone(), vy.clone());
        tb.insert_word_pair(0, &invert(&sigma.start[..head_len]))?;
        tb.insert_word_pair(2 * head_len + vy.len(), &tail)?;
        tb.embed(head_len, &built.invert()?)?;
        tb.embed(0, &rotate_trivial(&sigma, head_len)?.mirror()?)?;
        Ok(tb.finish())
    }

    /// `w → ε` over `H` for a word `w` in the `b`-letters certified by a
    /// verbal witness over the `a`-alphabet copy.
    pub fn derive_relatively_free_trivial(&self, w: &[Letter], witness: &VerbalWitness) -> Result<DerivationTrace, HvmError> {
        let x = &self.letters;
        let p = &self.params;
        let to_a = |l: &Letter| -> Result<Letter, HvmError> {
            if x.is_b(*l) {
                Ok(Letter { gen: l.gen - x.b(0).gen, inv: l.inv })
            } else {
                Err(HvmError::ForeignLetter(p.m))
            }
        };
        let wa: Vec<Letter> = w.iter().map(to_a).collect::<Result<_, _>>()?;
        if !witness.verify(&p.v, &wa) {
            return Err(HvmError::BadWitness);
        }
        let mut raw = Vec::new();
        let mut parts = Vec::new();
        for f in &witness.factors {
            check_components(p, &f.values)?;
            let u: Vec<Letter> = f.conjugator.iter().map(|l| x.b(l.gen as usize).pow(l.sign())).collect();
            let t = self.law_instance_trace(&f.values)?;
            let t = if f.sign < 0 { t.mirror()? } else { t };
            raw.extend_from_slice(&u);
            raw.extend_from_slice(&t.start);
            raw.extend(invert(&u));
            parts.push((u, t));
        }
        let mut tb = TraceBuilder::new(self.h.clone(), w.to_vec());
        let len = tb.len();
        tb.reduce_segment(0, len)?;
        tb.expand_segment(0, &raw)?;
        for (u, t) in &parts {
            tb.embed(u.len(), t)?;
            tb.cancel_word_pair(0, u.len())?;
        }
        Ok(tb.finish())
    }
}

/// `Word` tuple from plain letter vectors, reducing each.
pub fn components(raw: &[Vec<Letter>]) -> Vec<Word> {
    raw.iter().map(|w| free_reduce(w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentations::conjugate_product_word;
    use crate::verbal::WitnessFactor;
    use crate::words::parse_law;
    use proptest::prelude::*;

    fn emb(law: &str, m: usize, n: usize) -> HvmEmbedding {
        HvmEmbedding::new(HvmParams::with_small_n(parse_law(law).unwrap(), m, n, true).unwrap())
    }

    fn a(g: u32) -> Word {
        Word::letter(Letter::pos(g))
    }

    fn sorted(mut v: Vec<(String, usize)>) -> Vec<(String, usize)> {
        v.sort();
        v
    }

    #[test]
    fn presentation_counts() {
        let p = HvmParams::new(parse_law("x1^3").unwrap(), 2, 29).unwrap();
        let (g, h) = (gen_g(&p), gen_h(&p));
        assert_eq!((g.generator_count(), g.relator_count()), (37, 71));
        assert_eq!((h.generator_count(), h.relator_count()), (41, 124));
        let c = count_schema(&p);
        assert_eq!((c.g_generators, c.g_total(), c.h_generators, c.h_total()), (37, 71, 41, 124));
        assert_eq!(sorted(c.g_relators), sorted(g.counts_by_tag()));
        assert_eq!(sorted(c.h_relators), sorted(h.counts_by_tag()));
        assert!(g.is_prefix_of(&h));
        let hub = &g.relators()[70];
        assert_eq!(hub.tag, "2.6-hub");
        assert!(g.alphabet().format(&hub.word).starts_with("k1 q1 q2 q3 q4 k2 q1"));

        let p = HvmParams::new(parse_law("[x1,x2]").unwrap(), 1, 29).unwrap();
        let c = count_schema(&p);
        assert_eq!((c.g_generators, c.g_total()), (37, 71));
        assert_eq!(sorted(gen_g(&p).counts_by_tag()), sorted(c.g_relators));
        assert_eq!(sorted(gen_h(&p).counts_by_tag()), sorted(c.h_relators));
    }

    #[test]
    fn h_has_no_pure_b_relator() {
        let p = HvmParams::new(parse_law("x1^2").unwrap(), 2, 29).unwrap();
        let h = gen_h(&p);
        let x = HvmLetters::new(&p);
        assert!(h.relators().iter().all(|r| !r.word.iter().all(|l| x.is_b(*l))));
        let has = |txt: &str| {
            let w = h.alphabet().parse_word(txt).unwrap();
            h.find_cell(&w).is_some()
        };
        for j in 1..=2 {
            for l in 1..=2 {
                assert!(has(&format!("b{j} a{l} b{j}^-1 a{l}^-1")));
            }
        }
    }

    #[test]
    fn lambda_examples() {
        let e = emb("x1^3", 1, 3);
        let al = e.g.alphabet();
        assert_eq!(al.format(&lambda_word(&e.params, &[Word::empty()]).unwrap()), "q1 q2 q3 q4");
        assert_eq!(al.format(&lambda_word(&e.params, &[a(0)]).unwrap()), "q1 a1 q2 a1 q3 a1 q4");
        let e = emb("[x1,x2]", 2, 3);
        let al = e.g.alphabet();
        assert_eq!(al.format(&lambda_word(&e.params, &[a(0), a(1)]).unwrap()), "q1 a1 q2 a2 q3 a1^-1 q4 a2^-1 q5");
        assert_eq!(
            sigma_word(&e.params, &[Word::empty(), Word::empty()]).unwrap(),
            e.g.relators().last().unwrap().word.letters()
        );
    }

    #[test]
    fn conj_step_minimal_law() {
        let e = emb("x1", 1, 3);
        let t = e.derive_conj_step(0, 0, Direction::Plus, &[Word::empty()]).unwrap();
        assert_eq!(t.verify().unwrap().area, 2);
        assert_eq!(e.g.alphabet().format(&t.end), "q1 a1 q2");
        let t = e.derive_conj_step(0, 0, Direction::Minus, &[a(0)]).unwrap();
        t.verify().unwrap();
        assert_eq!(e.g.alphabet().format(&t.end), "q1 q2");
    }

    #[test]
    fn conj_steps_compose_to_lambda() {
        let e = emb("x1 x2 x1^-1 x2^-2", 2, 3);
        let target = vec![free_reduce(&[Letter::pos(0), Letter::pos(1), Letter::neg(0)]), a(1)];
        let mut cur = vec![Word::empty(), Word::empty()];
        for (l, comp) in target.iter().enumerate() {
            for &letter in comp.iter() {
                let dir = if letter.inv { Direction::Minus } else { Direction::Plus };
                let t = e.derive_conj_step(letter.gen as usize, l, dir, &cur).unwrap();
                t.verify().unwrap();
                cur = with_trailing(&cur, l, letter);
                assert_eq!(t.end, lambda_word(&e.params, &cur).unwrap());
            }
        }
        assert_eq!(cur, target);
    }

    #[test]
    fn sigma_and_law_instances() {
        let e = emb("x1^3", 1, 29);
        assert_eq!(e.derive_sigma_trivial(&[Word::empty()]).unwrap().verify().unwrap().area, 1);
        let t = e.derive_sigma_trivial(&[a(0)]).unwrap();
        t.verify().unwrap();
        let t = e.derive_law_instance(&[a(0)]).unwrap();
        t.verify().unwrap();
        assert_eq!(e.h.alphabet().format(&t.start), "b1 b1 b1");
        assert!(t.end.is_empty());
        let f = t.to_conjugate_product().unwrap();
        assert_eq!(conjugate_product_word(&e.h, &f), free_reduce(&t.start));
        assert_eq!(e.derive_law_instance(&[Word::empty()]).unwrap().verify().unwrap().area, 0);
    }

    #[test]
    fn d_conjugation() {
        let e = emb("x1^3", 1, 3);
        let t = e.derive_d_conjugation(&[Word::empty()]).unwrap();
        assert_eq!(t.verify().unwrap().area, 4);
        let t = e.derive_d_conjugation(&[a(0)]).unwrap();
        t.verify().unwrap();
        assert!(e.h.alphabet().format(&t.start).contains("b1^-1 b1^-1 b1^-1"));
        let e = emb("[x1,x2]", 2, 3);
        let xs = vec![free_reduce(&[Letter::pos(0), Letter::neg(1)]), a(1)];
        e.derive_d_conjugation(&xs).unwrap().verify().unwrap();
    }

    #[test]
    fn relatively_free_words() {
        let e = emb("[x1,x2]", 2, 5);
        let w = e.h.alphabet().parse_letters("b1 b2 b1^-1 b2^-1").unwrap();
        let wit = VerbalWitness {
            factors: vec![WitnessFactor { conjugator: Word::empty(), values: vec![a(0), a(1)], sign: 1 }],
        };
        let t = e.derive_relatively_free_trivial(&w, &wit).unwrap();
        t.verify().unwrap();
        assert!(t.end.is_empty());
        let bad = VerbalWitness { factors: vec![] };
        assert!(matches!(e.derive_relatively_free_trivial(&w, &bad), Err(HvmError::BadWitness)));

        let e = emb("x1^2", 1, 5);
        let w = e.h.alphabet().parse_letters("b1 b1").unwrap();
        let wit = VerbalWitness { factors: vec![WitnessFactor { conjugator: Word::empty(), values: vec![a(0)], sign: 1 }] };
        let t = e.derive_relatively_free_trivial(&w, &wit).unwrap();
        assert_eq!(t.verify().unwrap().area, e.derive_law_instance(&[a(0)]).unwrap().area());
    }

    fn comps(k: usize, m: u32, max: usize) -> impl Strategy<Value = Vec<Word>> {
        proptest::collection::vec(
            proptest::collection::vec((0..m, any::<bool>()), 0..=max)
                .prop_map(|v| free_reduce(&v.into_iter().map(|(g, i)| Letter { gen: g, inv: i }).collect::<Vec<_>>())),
            k,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn conj_steps_verify(xs in comps(2, 2, 5), j in 0usize..2, l in 0usize..2, plus in any::<bool>()) {
            let e = emb("x1 x2^-1 x1 x2", 2, 3);
            let dir = if plus { Direction::Plus } else { Direction::Minus };
            let t = e.derive_conj_step(j, l, dir, &xs).unwrap();
            let rep = t.verify().unwrap();
            if plus {
                prop_assert!(rep.area <= t.start.len() - 2 + 1);
            }
            let a = Letter::pos(j as u32);
            let expect = with_trailing(&xs, l, if plus { a } else { a.inverse() });
            prop_assert_eq!(t.end, lambda_word(&e.params, &expect).unwrap());
        }

        #[test]
        fn law_instances_verify(xs in comps(2, 2, 3)) {
            let e = emb("[x1,x2]", 2, 4);
            let t = e.derive_law_instance(&xs).unwrap();
            t.verify().unwrap();
            prop_assert!(t.end.is_empty());
        }
    }
}
