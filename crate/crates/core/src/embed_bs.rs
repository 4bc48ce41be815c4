//! Embedding of the Baumslag–Solitar group `BS(k,1) = ⟨b1, b2 | b1 b2 b1⁻¹ = b2^k⟩`
//! into a group with a polynomial isoperimetric function.
//!
//! `G` is an HNN-style extension with stable letter `r` whose relations turn
//! the hub word `Σ_0` into `Σ_s` after `s` conjugations by `r`. `H` adds `b1`,
//! `b2` and a letter `ρ` that conjugates `Σ_n` into a word carrying the
//! commutator `W_n` on its right, which gives quadratic-area derivations of
//! `W_n = 1` and, from them, derivations of every trivial `BS(k,1)` word.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

use crate::presentations::{DerivationTrace, GroupPresentation, Relator, TraceBuilder, TraceError};
use crate::words::{exponent_sum, free_reduce, invert, Alphabet, Letter, Word};

#[derive(Debug, Error)]
pub enum BsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("word is not trivial in BS(k,1)")]
    NotTrivial,
    #[error("word uses letters outside {{b1, b2}}")]
    ForeignLetter,
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BsParams {
    pub k: u32,
    pub n: usize,
}

impl BsParams {
    pub fn new(k: u32, n: usize) -> Result<Self, BsError> {
        Self::with_small_n(k, n, false)
    }

    /// Like [`BsParams::new`], optionally admitting `N < 29` for fast experiments.
    pub fn with_small_n(k: u32, n: usize, allow_small_n: bool) -> Result<Self, BsError> {
        if k < 2 {
            return Err(BsError::InvalidParams(format!("k = {k} must be at least 2")));
        }
        if n < 1 || (n < 29 && !allow_small_n) {
            return Err(BsError::InvalidParams(format!("N = {n} must be at least 29")));
        }
        Ok(BsParams { k, n })
    }
}

/// Generator indices shared by `G` and `H`.
#[derive(Debug, Clone)]
pub struct BsLetters {
    pub a1: Letter,
    pub a2: Letter,
    pub c: Letter,
    pub q: [Letter; 5],
    pub k: Vec<Letter>,
    pub r: Letter,
    pub b1: Letter,
    pub b2: Letter,
    pub rho: Letter,
}

impl BsLetters {
    pub fn new(p: &BsParams) -> Self {
        let n = p.n as u32;
        BsLetters {
            a1: Letter::pos(0),
            a2: Letter::pos(1),
            c: Letter::pos(2),
            q: [3, 4, 5, 6, 7].map(Letter::pos),
            k: (0..n).map(|j| Letter::pos(8 + j)).collect(),
            r: Letter::pos(8 + n),
            b1: Letter::pos(9 + n),
            b2: Letter::pos(10 + n),
            rho: Letter::pos(11 + n),
        }
    }

    /// The letter `q_t` is multiplied by under conjugation by `r`.
    fn tau(&self, t: usize) -> Letter {
        match t {
            0 | 2 => self.a1,
            1 | 3 => self.a1.inverse(),
            _ => self.c,
        }
    }
}

fn power(l: Letter, e: i64) -> Vec<Letter> {
    vec![l.pow(e); e.unsigned_abs() as usize]
}

fn cat(parts: &[&[Letter]]) -> Vec<Letter> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn rel(word: Vec<Letter>, tag: &str) -> Relator {
    Relator { word: Word::from_reduced(word), tag: tag.to_string() }
}

fn g_names(p: &BsParams) -> Vec<String> {
    let mut names: Vec<String> = ["a1", "a2", "c", "q1", "q2", "q3", "q4", "q5"].map(String::from).to_vec();
    names.extend((1..=p.n).map(|j| format!("k{j}")));
    names.push("r".into());
    names
}

fn g_relators(l: &BsLetters) -> Vec<Relator> {
    let (r, ri) = (l.r, l.r.inverse());
    let mut out = Vec::new();
    for t in 0..5 {
        let q = l.q[t];
        out.push(rel(vec![r, q, ri, l.tau(t).inverse(), q.inverse()], "7.1"));
    }
    for &k in &l.k {
        out.push(rel(vec![r, k, ri, k.inverse()], "7.2"));
    }
    for x in [l.a1, l.a2, l.c] {
        out.push(rel(vec![r, x, ri, x.inverse()], "7.3"));
    }
    out.push(rel(lambda_t(l, 0), "7.4-hub"));
    out
}

pub fn gen_g_bs(p: &BsParams) -> GroupPresentation {
    let l = BsLetters::new(p);
    let alphabet = Alphabet::new(g_names(p)).expect("generated names are valid");
    GroupPresentation::new(alphabet, g_relators(&l)).expect("generated relators are cyclically reduced")
}

pub fn gen_h_bs(p: &BsParams) -> GroupPresentation {
    let l = BsLetters::new(p);
    let mut names = g_names(p);
    names.extend(["b1", "b2", "rho"].map(String::from));
    let alphabet = Alphabet::new(names).expect("generated names are valid");
    let mut out = g_relators(&l);
    let (rho, rhoi) = (l.rho, l.rho.inverse());
    for (a, b) in [(l.a1, l.b1), (l.a2, l.b2)] {
        out.push(rel(vec![rho, a, rhoi, b.inverse(), a.inverse()], "7.5"));
    }
    out.push(rel(vec![rho, l.c, rhoi, l.c.inverse()], "7.6"));
    for &q in &l.q {
        out.push(rel(vec![rho, q, rhoi, q.inverse()], "7.7"));
    }
    for &k in &l.k {
        out.push(rel(vec![rho, k, rhoi, k.inverse()], "7.8"));
    }
    for b in [l.b1, l.b2] {
        for a in [l.a1, l.a2] {
            out.push(rel(vec![b, a, b.inverse(), a.inverse()], "7.9"));
        }
    }
    for b in [l.b1, l.b2] {
        for &q in &l.q[..4] {
            out.push(rel(vec![b, q, b.inverse(), q.inverse()], "7.10"));
        }
    }
    let mut bs = vec![l.b1, l.b2, l.b1.inverse()];
    bs.extend(power(l.b2, -(p.k as i64)));
    out.push(rel(bs, "7.11"));
    GroupPresentation::new(alphabet, out).expect("generated relators are cyclically reduced")
}

/// `Λ_s = q1 a1^s a2 q2 a1^-s a2 q3 a1^s a2⁻¹ q4 a1^-s a2⁻¹`.
fn lambda_s(l: &BsLetters, s: i64) -> Vec<Letter> {
    let (a1, a2) = (l.a1, l.a2);
    cat(&[
        &[l.q[0]],
        &power(a1, s),
        &[a2, l.q[1]],
        &power(a1, -s),
        &[a2, l.q[2]],
        &power(a1, s),
        &[a2.inverse(), l.q[3]],
        &power(a1, -s),
        &[a2.inverse()],
    ])
}

/// `T_s = k1 q5 c^s … kN q5 c^s`.
fn tail_s(l: &BsLetters, s: i64) -> Vec<Letter> {
    let mut out = Vec::new();
    for &k in &l.k {
        out.push(k);
        out.push(l.q[4]);
        out.extend(power(l.c, s));
    }
    out
}

fn lambda_t(l: &BsLetters, s: i64) -> Vec<Letter> {
    cat(&[&lambda_s(l, s), &tail_s(l, s)])
}

pub fn sigma_s(p: &BsParams, s: u32) -> Vec<Letter> {
    lambda_t(&BsLetters::new(p), s as i64)
}

/// `W_n = (b1^n b2 b1^-n) b2 (b1^n b2⁻¹ b1^-n) b2⁻¹` over the two-letter
/// alphabet of [`bs_alphabet`].
pub fn wn(n: u32) -> Vec<Letter> {
    wn_in(BS_B1, BS_B2, n as i64)
}

fn wn_in(b1: Letter, b2: Letter, n: i64) -> Vec<Letter> {
    cat(&[&power(b1, n), &[b2], &power(b1, -n), &[b2], &power(b1, n), &[b2.inverse()], &power(b1, -n), &[b2.inverse()]])
}

pub const BS_B1: Letter = Letter::pos(0);
pub const BS_B2: Letter = Letter::pos(1);

/// The alphabet `{b1, b2}` of [`BsWord`]s.
pub fn bs_alphabet() -> Alphabet {
    Alphabet::new(["b1", "b2"]).expect("valid names")
}

/// Words over [`bs_alphabet`].
pub type BsWord = Vec<Letter>;

/// Collapses a cyclic rotation of `Σ_s` to the empty word: `s` rounds of
/// conjugation by `r`, then the hub, then cancellation of the `r` letters.
fn collapse_sigma(pres: &Arc<GroupPresentation>, l: &BsLetters, start: Vec<Letter>) -> Result<DerivationTrace, TraceError> {
    let ri = l.r.inverse();
    let mut tb = TraceBuilder::new(pres.clone(), start);
    let (mut lo, mut len) = (0usize, tb.len());
    let hub_len = lambda_t(l, 0).len();
    while len > hub_len {
        tb.insert_pair(lo, l.r)?;
        let mut i = lo + 1;
        let mut end = lo + 2 + len;
        while i + 1 < end {
            let x = tb.get(i + 1);
            let t = l.q.iter().position(|&q| q == x);
            match t {
                Some(t) if i + 2 < end && tb.get(i + 2) == l.tau(t) => {
                    tb.rewrite(i, &[ri, x, l.tau(t)], &[x, ri])?;
                    end -= 1;
                }
                _ => tb.rewrite(i, &[ri, x], &[x, ri])?,
            }
            i += 1;
        }
        lo += 1;
        len = end - 1 - lo;
    }
    let hub = tb.segment(lo, lo + len);
    tb.rewrite(lo, &hub, &[])?;
    tb.cancel_word_pair(0, lo)?;
    Ok(tb.finish())
}

/// `Σ_s → ε` over `G`.
pub fn derive_sigma_s(p: &BsParams, s: u32) -> Result<DerivationTrace, BsError> {
    let pres = Arc::new(gen_g_bs(p));
    Ok(collapse_sigma(&pres, &BsLetters::new(p), sigma_s(p, s))?)
}

/// The `k1`-rotation `T_s Λ_s` of `Σ_s`, collapsed to `ε` over `H`.
fn rotated_sigma_trace(h: &Arc<GroupPresentation>, l: &BsLetters, s: i64) -> Result<DerivationTrace, TraceError> {
    collapse_sigma(h, l, cat(&[&tail_s(l, s), &lambda_s(l, s)]))
}

fn derive_wn_over(h: &Arc<GroupPresentation>, l: &BsLetters, n: i64) -> Result<DerivationTrace, TraceError> {
    let w = wn_in(l.b1, l.b2, n);
    if n == 0 {
        let mut tb = TraceBuilder::new(h.clone(), w);
        tb.reduce_segment(0, 4)?;
        return Ok(tb.finish());
    }
    let sigma = rotated_sigma_trace(h, l, n)?;
    let s_rot = sigma.start.clone();

    // ε → ρ Σ' ρ⁻¹ → Σ'·W_n, with the b-letters collected on the right.
    let mut b = TraceBuilder::new(h.clone(), Vec::new());
    b.insert_pair(0, l.rho)?;
    b.embed(1, &sigma.invert()?)?;
    let rhoi = l.rho.inverse();
    let mut i = 0;
    loop {
        let x = b.get(i + 1);
        if x == rhoi {
            b.cancel(i)?;
            break;
        }
        let image = if x == l.a1 || x == l.a2 {
            vec![x, if x == l.a1 { l.b1 } else { l.b2 }, l.rho]
        } else if x == l.a1.inverse() || x == l.a2.inverse() {
            vec![if x.gen == l.a1.gen { l.b1 } else { l.b2 }.inverse(), x, l.rho]
        } else {
            vec![x, l.rho]
        };
        b.rewrite(i, &[l.rho, x], &image)?;
        i += image.len() - 1;
    }
    let mut tail = b.len();
    for i in (0..b.len()).rev() {
        let x = b.get(i);
        if x.gen != l.b1.gen && x.gen != l.b2.gen {
            continue;
        }
        let mut j = i;
        while j + 1 < tail {
            let y = b.get(j + 1);
            b.rewrite(j, &[x, y], &[y, x])?;
            j += 1;
        }
        tail = j;
    }
    let built = b.finish();
    if built.end != cat(&[&s_rot, &w]) {
        return Err(TraceError::Construction("ρ-conjugate of Σ' did not assemble to Σ'·W_n".into()));
    }

    // W_n → Σ'⁻¹ Σ' W_n → Σ'⁻¹ → ε.
    let mut tb = TraceBuilder::new(h.clone(), w);
    tb.insert_word_pair(0, &invert(&s_rot))?;
    tb.embed(s_rot.len(), &built.invert()?)?;
    tb.embed(0, &sigma.mirror()?)?;
    Ok(tb.finish())
}

type TracePair = (Arc<DerivationTrace>, Arc<DerivationTrace>);

/// Precomputed presentations for a parameter set, with a cache of the
/// `W_d` derivations reused by [`BsEmbedding::derive_bs_trivial`].
pub struct BsEmbedding {
    pub params: BsParams,
    pub letters: BsLetters,
    pub g: Arc<GroupPresentation>,
    pub h: Arc<GroupPresentation>,
    wn_cache: Mutex<HashMap<i64, TracePair>>,
}

impl BsEmbedding {
    pub fn new(params: BsParams) -> Self {
        BsEmbedding {
            letters: BsLetters::new(&params),
            g: Arc::new(gen_g_bs(&params)),
            h: Arc::new(gen_h_bs(&params)),
            params,
            wn_cache: Mutex::new(HashMap::new()),
        }
    }

    /// Maps a word over [`bs_alphabet`] into `H`.
    pub fn lift(&self, w: &[Letter]) -> Result<Vec<Letter>, BsError> {
        w.iter()
            .map(|x| match x.gen {
                0 => Ok(self.letters.b1.pow(x.sign())),
                1 => Ok(self.letters.b2.pow(x.sign())),
                _ => Err(BsError::ForeignLetter),
            })
            .collect()
    }

    /// `Σ_s → ε` over `G`.
    pub fn derive_sigma_s(&self, s: u32) -> Result<DerivationTrace, BsError> {
        Ok(collapse_sigma(&self.g, &self.letters, lambda_t(&self.letters, s as i64))?)
    }

    /// `W_n → ε` over `H`.
    pub fn derive_wn(&self, n: u32) -> Result<DerivationTrace, BsError> {
        Ok(derive_wn_over(&self.h, &self.letters, n as i64)?)
    }

    /// Cached `W_d → ε` and `W_d⁻¹ → ε`.
    fn wn_pair(&self, d: i64) -> Result<(Arc<DerivationTrace>, Arc<DerivationTrace>), TraceError> {
        if let Some(hit) = self.wn_cache.lock().expect("cache lock").get(&d) {
            return Ok(hit.clone());
        }
        let t = derive_wn_over(&self.h, &self.letters, d)?;
        let m = t.mirror()?;
        let pair = (Arc::new(t), Arc::new(m));
        self.wn_cache.lock().expect("cache lock").insert(d, pair.clone());
        Ok(pair)
    }

    fn factor(&self, level: i64, sign: i64) -> Vec<Letter> {
        let l = &self.letters;
        cat(&[&power(l.b1, level), &[l.b2.pow(sign)], &power(l.b1, -level)])
    }

    /// Rewrites the raw commutator `[x, y]` of two factors sitting at `pos`
    /// to `ε`. Returns nothing; the segment is consumed.
    fn kill_commutator(
        &self,
        tb: &mut TraceBuilder,
        pos: usize,
        (p, e): (i64, i64),
        (q, d): (i64, i64),
    ) -> Result<(), TraceError> {
        let x = self.factor(p, e);
        let y = self.factor(q, d);
        let raw_len = 2 * (x.len() + y.len());
        let target = free_reduce(&cat(&[&x, &y, &invert(&x), &invert(&y)]));
        let len = tb.reduce_segment(pos, raw_len)?;
        if p == q {
            return Ok(());
        }
        let l = &self.letters;
        // With z = b1^δ b2 b1^-δ and W = [z, b2]:
        // [z^e, b2^d] = h W^± h⁻¹ for a short free conjugator h.
        let (base, dist, ze, be, flip) = if p > q { (q, p - q, e, d, false) } else { (p, q - p, d, e, true) };
        let z = self.factor(dist, 1);
        let (h, mut inverted) = match (ze, be) {
            (1, 1) => (Vec::new(), false),
            (-1, 1) => (invert(&z), true),
            (1, -1) => (vec![l.b2.inverse()], true),
            _ => (cat(&[&invert(&z), &[l.b2.inverse()]]), false),
        };
        if flip {
            inverted = !inverted;
        }
        let g = free_reduce(&cat(&[&power(l.b1, base), &h])).into_letters();
        let (fwd, mir) = self.wn_pair(dist)?;
        let t = if inverted { mir } else { fwd };
        if free_reduce(&cat(&[&g, &t.start, &invert(&g)])) != target {
            return Err(TraceError::Construction("commutator normal form mismatch".into()));
        }
        let rest = tb.apply_conjugated(pos, len, &g, &t)?;
        debug_assert_eq!(rest, 0);
        Ok(())
    }

    /// `[b1^p b2^e b1^-p, b1^q b2^d b1^-q] → ε` over `H`.
    pub fn derive_commutator(&self, p: i64, e: i64, q: i64, d: i64) -> Result<DerivationTrace, BsError> {
        if e.abs() != 1 || d.abs() != 1 {
            return Err(BsError::InvalidParams("signs must be ±1".into()));
        }
        let x = self.factor(p, e);
        let y = self.factor(q, d);
        let mut tb = TraceBuilder::new(self.h.clone(), cat(&[&x, &y, &invert(&x), &invert(&y)]));
        self.kill_commutator(&mut tb, 0, (p, e), (q, d))?;
        Ok(tb.finish())
    }

    /// Derives `w → ε` over `H` for a word `w` over [`bs_alphabet`] that is
    /// trivial in `BS(k,1)`.
    pub fn derive_bs_trivial(&self, w: &[Letter]) -> Result<DerivationTrace, BsError> {
        let k = self.params.k;
        let affine = oracle_affine(k, w)?;
        let britton = oracle_britton(k, w)?;
        if !affine.is_trivial() || !britton.is_trivial() {
            return Err(BsError::NotTrivial);
        }
        if exponent_sum(w, 0) != 0 {
            return Err(BsError::Internal("trivial word with non-zero b1 exponent sum".into()));
        }
        let lifted = self.lift(w)?;
        let mut tb = TraceBuilder::new(self.h.clone(), lifted.clone());
        let l = &self.letters;

        // Free factorization into b1^t b2^± b1^-t.
        let mut factors: Vec<(i64, i64)> = Vec::new();
        let mut level = 0i64;
        for x in &lifted {
            if x.gen == l.b1.gen {
                level += x.sign();
            } else {
                factors.push((level, x.sign()));
            }
        }
        let raw: Vec<Letter> = factors.iter().flat_map(|&(t, e)| self.factor(t, e)).collect();
        let reduced_len = tb.reduce_segment(0, lifted.len())?;
        debug_assert_eq!(reduced_len, free_reduce(&lifted).len());
        tb.expand_segment(0, &raw)?;

        let flen = |f: &(i64, i64)| 2 * f.0.unsigned_abs() as usize + 1;
        let offset = |fs: &[(i64, i64)], i: usize| fs[..i].iter().map(flen).sum::<usize>();
        // Swaps factors i and i+1.
        let transpose = |tb: &mut TraceBuilder, fs: &mut Vec<(i64, i64)>, i: usize| -> Result<(), TraceError> {
            let pos = offset(fs, i);
            let (a, b) = (fs[i], fs[i + 1]);
            let u = invert(&cat(&[&self.factor(b.0, b.1), &self.factor(a.0, a.1)]));
            tb.insert_word_pair(pos + u.len(), &u)?;
            self.kill_commutator(tb, pos, a, b)?;
            fs.swap(i, i + 1);
            Ok(())
        };

        while !factors.is_empty() {
            let s = factors.iter().map(|f| f.0).min().expect("non-empty");
            let at_min: Vec<usize> = (0..factors.len()).filter(|&i| factors[i].0 == s).collect();
            let pair = at_min.windows(2).find(|w| factors[w[0]].1 != factors[w[1]].1);
            if let Some(w) = pair {
                let (i, mut j) = (w[0], w[1]);
                while j > i + 1 {
                    transpose(&mut tb, &mut factors, j - 1)?;
                    j -= 1;
                }
                let pos = offset(&factors, i);
                let seg = flen(&factors[i]) * 2;
                tb.reduce_segment(pos, seg)?;
                factors.drain(i..=i + 1);
                continue;
            }
            let count = at_min.len();
            if !count.is_multiple_of(k as usize) {
                return Err(BsError::Internal(format!("{count} factors at the lowest level, not a multiple of {k}")));
            }
            let mut end = factors.len();
            for &i in at_min.iter().rev() {
                let mut j = i;
                while j + 1 < end {
                    transpose(&mut tb, &mut factors, j)?;
                    j += 1;
                }
                end = j;
            }
            let sign = factors[end].1;
            for g in 0..count / k as usize {
                let i = end + g;
                let pos = offset(&factors, i);
                let len = tb.reduce_segment(pos, flen(&factors[i]) * k as usize)?;
                let mid = pos + s.unsigned_abs() as usize;
                tb.rewrite(mid, &power(l.b2, sign * k as i64), &[l.b1, l.b2.pow(sign), l.b1.inverse()])?;
                tb.reduce_segment(pos, len - k as usize + 3)?;
                factors.splice(i..i + k as usize, [(s + 1, sign)]);
            }
        }
        let t = tb.finish();
        if !t.end.is_empty() {
            return Err(BsError::Internal("derivation did not reach the empty word".into()));
        }
        Ok(t)
    }
}

/// `x ↦ k^e · x + shift`, with exact rational shift.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineMap {
    pub k: u32,
    pub scale_exp: i64,
    pub shift: BigRational,
}

impl AffineMap {
    pub fn identity(k: u32) -> Self {
        AffineMap { k, scale_exp: 0, shift: BigRational::zero() }
    }

    fn scale(&self) -> BigRational {
        let k = BigRational::from_integer(BigInt::from(self.k));
        let mut out = BigRational::one();
        for _ in 0..self.scale_exp.unsigned_abs() {
            out *= &k;
        }
        if self.scale_exp < 0 {
            out.recip()
        } else {
            out
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            k: self.k,
            scale_exp: self.scale_exp + other.scale_exp,
            shift: self.scale() * &other.shift + &self.shift,
        }
    }

    pub fn apply(&self, x: &BigRational) -> BigRational {
        self.scale() * x + &self.shift
    }

    pub fn is_identity(&self) -> bool {
        self.scale_exp == 0 && self.shift.is_zero()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AffineVerdict {
    Trivial,
    Nontrivial(AffineMap),
}

impl AffineVerdict {
    pub fn is_trivial(&self) -> bool {
        matches!(self, AffineVerdict::Trivial)
    }
}

/// Word problem in `BS(k,1)` via the faithful action `b1: x ↦ kx`,
/// `b2: x ↦ x + 1`.
pub fn oracle_affine(k: u32, w: &[Letter]) -> Result<AffineVerdict, BsError> {
    let one = BigRational::one();
    let mut f = AffineMap::identity(k);
    for x in w {
        let g = match (x.gen, x.inv) {
            (0, false) => AffineMap { k, scale_exp: 1, shift: BigRational::zero() },
            (0, true) => AffineMap { k, scale_exp: -1, shift: BigRational::zero() },
            (1, false) => AffineMap { k, scale_exp: 0, shift: one.clone() },
            (1, true) => AffineMap { k, scale_exp: 0, shift: -one.clone() },
            _ => return Err(BsError::ForeignLetter),
        };
        f = f.compose(&g);
    }
    Ok(if f.is_identity() { AffineVerdict::Trivial } else { AffineVerdict::Nontrivial(f) })
}

/// A syllable of a Britton-reduced word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Syllable {
    B1(i64),
    B2(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BrittonVerdict {
    Trivial,
    Nontrivial(Vec<Syllable>),
}

impl BrittonVerdict {
    pub fn is_trivial(&self) -> bool {
        matches!(self, BrittonVerdict::Trivial)
    }
}

/// Word problem in `BS(k,1)` by pinching `b1 b2^t b1⁻¹ → b2^{kt}` and
/// `b1⁻¹ b2^{kt} b1 → b2^t` until no pinch applies.
pub fn oracle_britton(k: u32, w: &[Letter]) -> Result<BrittonVerdict, BsError> {
    let k = k as i64;
    let mut stack: Vec<Syllable> = Vec::new();
    let push_b2 = |stack: &mut Vec<Syllable>, t: i64| {
        if let Some(Syllable::B2(u)) = stack.last_mut() {
            *u += t;
            if *u == 0 {
                stack.pop();
            }
        } else if t != 0 {
            stack.push(Syllable::B2(t));
        }
    };
    for x in w {
        match x.gen {
            1 => push_b2(&mut stack, x.sign()),
            0 => {
                let e = x.sign();
                match stack[..] {
                    [.., Syllable::B1(f)] if f == -e => {
                        stack.pop();
                    }
                    [.., Syllable::B1(f), Syllable::B2(t)] if f == -e && (f == 1 || t % k == 0) => {
                        stack.truncate(stack.len() - 2);
                        let pinched = if f == 1 { t * k } else { t / k };
                        push_b2(&mut stack, pinched);
                    }
                    _ => stack.push(Syllable::B1(e)),
                }
            }
            _ => return Err(BsError::ForeignLetter),
        }
    }
    if stack.is_empty() {
        return Ok(BrittonVerdict::Trivial);
    }
    let mut out: Vec<Syllable> = Vec::new();
    for s in stack {
        match (out.last_mut(), s) {
            (Some(Syllable::B1(a)), Syllable::B1(b)) => *a += b,
            _ => out.push(s),
        }
    }
    Ok(BrittonVerdict::Nontrivial(out))
}

/// A random word of length at most `n` that is trivial in `BS(k,1)`: a
/// product of random conjugates of `b1 b2 b1⁻¹ b2^-k` and its inverse with
/// short conjugators, freely reduced. Returns `ε` if no attempt fits.
pub fn random_trivial_word<R: Rng>(k: u32, n: usize, rng: &mut R) -> BsWord {
    let relator = cat(&[&[BS_B1, BS_B2, BS_B1.inverse()], &power(BS_B2, -(k as i64))]);
    let max_factors = (n / relator.len()).max(1);
    let max_conj = n / 4;
    for _ in 0..1000 {
        let count = rng.gen_range(1..=max_factors);
        let mut raw = Vec::new();
        for _ in 0..count {
            let len = rng.gen_range(0..=max_conj);
            let u: Vec<Letter> = (0..len)
                .map(|_| {
                    let g = if rng.gen_bool(0.5) { BS_B1 } else { BS_B2 };
                    g.pow(if rng.gen_bool(0.5) { 1 } else { -1 })
                })
                .collect();
            let r = if rng.gen_bool(0.5) { relator.clone() } else { invert(&relator) };
            raw.extend(cat(&[&u, &r, &invert(&u)]));
        }
        let w = free_reduce(&raw);
        if w.len() <= n && !w.is_empty() {
            return w.into_letters();
        }
    }
    Vec::new()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::reduced_words_up_to;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> BsEmbedding {
        BsEmbedding::new(BsParams::with_small_n(2, 3, true).unwrap())
    }

    #[test]
    fn presentation_sizes() {
        let p = BsParams::new(2, 29).unwrap();
        let g = gen_g_bs(&p);
        let h = gen_h_bs(&p);
        assert_eq!((g.generator_count(), g.relator_count()), (38, 38));
        assert_eq!((h.generator_count(), h.relator_count()), (41, 88));
        assert!(g.is_prefix_of(&h));
        let counts = h.counts_by_tag();
        let get = |t: &str| counts.iter().find(|(x, _)| x == t).map(|c| c.1);
        assert_eq!(get("7.10"), Some(8));
        assert_eq!(get("7.11"), Some(1));
        let al = h.alphabet();
        let last = &h.relators().last().unwrap().word;
        assert_eq!(al.format(last), "b1 b2 b1^-1 b2^-1 b2^-1");
        for r in h.relators().iter().filter(|r| r.tag == "7.10") {
            assert!(!r.word.iter().any(|x| al.name(x.gen) == "q5"));
        }
    }

    #[test]
    fn small_n_needs_flag() {
        assert!(BsParams::new(2, 5).is_err());
        assert!(BsParams::new(1, 29).is_err());
        assert!(BsParams::with_small_n(2, 5, true).is_ok());
    }

    #[test]
    fn word_shapes() {
        let p = BsParams::new(2, 29).unwrap();
        let g = gen_g_bs(&p);
        assert_eq!(sigma_s(&p, 0), g.relators()[37].word.letters());
        for n in 1..=10u32 {
            assert_eq!(wn(n).len(), 4 * n as usize + 4);
        }
        assert!(free_reduce(&wn(0)).is_empty());
    }

    #[test]
    fn sigma_traces_verify() {
        let e = small();
        assert_eq!(e.derive_sigma_s(0).unwrap().verify().unwrap().area, 1);
        for s in 1..=6 {
            let t = e.derive_sigma_s(s).unwrap();
            t.verify().unwrap();
            assert!(t.end.is_empty());
        }
    }

    #[test]
    fn wn_traces_verify() {
        let e = small();
        assert_eq!(e.derive_wn(0).unwrap().verify().unwrap().area, 0);
        let mut prev = 0;
        for n in 1..=6 {
            let t = e.derive_wn(n).unwrap();
            let rep = t.verify().unwrap();
            assert!(rep.area >= prev);
            prev = rep.area;
            let f = t.to_conjugate_product().unwrap();
            assert_eq!(crate::presentations::conjugate_product_word(&e.h, &f), free_reduce(&t.start));
        }
    }

    #[test]
    fn commutators_verify() {
        let e = small();
        for p in 0..=4 {
            for q in 0..=4 {
                for sa in [1, -1] {
                    for sb in [1, -1] {
                        let t = e.derive_commutator(p, sa, q, sb).unwrap();
                        let rep = t.verify().unwrap();
                        if p == q {
                            assert_eq!(rep.area, 0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn oracle_examples() {
        let b1 = BS_B1;
        let b2 = BS_B2;
        for n in 0..=8 {
            assert!(oracle_affine(2, &wn(n)).unwrap().is_trivial());
            assert!(oracle_britton(2, &wn(n)).unwrap().is_trivial());
        }
        assert!(!oracle_affine(2, &[b2]).unwrap().is_trivial());
        let pinch = [b1.inverse(), b2, b1];
        assert!(!oracle_britton(2, &pinch).unwrap().is_trivial());
        let r = [b1, b2, b1.inverse(), b2.inverse(), b2.inverse()];
        assert!(oracle_britton(2, &r).unwrap().is_trivial());
        assert!(oracle_affine(2, &r).unwrap().is_trivial());
    }

    #[test]
    fn oracles_agree_on_ball() {
        for k in [2, 3] {
            for w in reduced_words_up_to(2, 8) {
                let a = oracle_affine(k, &w).unwrap().is_trivial();
                let b = oracle_britton(k, &w).unwrap().is_trivial();
                assert_eq!(a, b, "k={k}");
                if a {
                    assert_eq!(exponent_sum(&w, 0), 0);
                }
            }
        }
    }

    #[test]
    fn trivial_words_derive() {
        let e = small();
        let r = [BS_B1, BS_B2, BS_B1.inverse(), BS_B2.inverse(), BS_B2.inverse()];
        assert_eq!(e.derive_bs_trivial(&r).unwrap().verify().unwrap().area, 1);
        e.derive_bs_trivial(&wn(3)).unwrap().verify().unwrap();
        assert!(matches!(e.derive_bs_trivial(&[BS_B2]), Err(BsError::NotTrivial)));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [8, 16, 24] {
            let w = random_trivial_word(2, n, &mut rng);
            assert!(w.len() <= n);
            let t = e.derive_bs_trivial(&w).unwrap();
            t.verify().unwrap();
        }
    }

    #[test]
    fn affine_composition_associates() {
        let m = |e, s: i64| AffineMap { k: 3, scale_exp: e, shift: BigRational::from_integer(s.into()) };
        let (f, g, h) = (m(1, 2), m(-2, 5), m(0, -7));
        assert_eq!(f.compose(&g).compose(&h), f.compose(&g.compose(&h)));
        assert_eq!(oracle_affine(3, &[BS_B1, BS_B2, BS_B1.inverse()]).unwrap(), AffineVerdict::Nontrivial(m(0, 3)));
    }
}
