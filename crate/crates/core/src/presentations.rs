//! Finite presentations and replayable derivation traces.
//!
//! A [`DerivationTrace`] is the certificate that a word equals another word in
//! the group: a sequence of elementary steps, each either a free insertion or
//! cancellation of an inverse pair, or the replacement of a subword `P` by `Q`
//! where `P·Q⁻¹` is a cyclic rotation of a relator or its inverse. The area of
//! a trace is its number of relator applications, i.e. the number of cells of
//! the van Kampen diagram it describes.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::words::{free_reduce, invert, is_cyclically_reduced, Alphabet, Letter, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PresentationError {
    #[error("relator {0} is empty")]
    EmptyRelator(usize),
    #[error("relator {0} is not cyclically reduced")]
    NotCyclicallyReduced(usize),
    #[error("relator {0} uses a generator outside the alphabet")]
    ForeignGenerator(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("step {index}: {reason}")]
    StepFailed { index: usize, reason: String },
    #[error("replay ended at a word different from the declared end word")]
    EndMismatch,
    #[error("start word does not match the segment the trace is applied to")]
    StartMismatch,
    #[error("end word is not empty")]
    NonTrivialEnd,
    #[error("traces do not meet: end of the first differs from start of the second")]
    SeamMismatch,
    #[error("traces are over incompatible presentations")]
    PresentationMismatch,
    #[error("no relator cell reads `{0}`")]
    NoCell(String),
    #[error("construction failed: {0}")]
    Construction(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relator {
    pub word: Word,
    pub tag: String,
}

type CellKey = (u32, i8, u32);

/// Lookup from every rotation of every relator (and inverse) to its
/// `(relator, exponent, rotation)` coordinates.
#[derive(Debug, Clone, Default)]
struct RotationIndex {
    cells: HashMap<Vec<Letter>, CellKey>,
}

#[derive(Debug, Clone)]
pub struct GroupPresentation {
    alphabet: Alphabet,
    relators: Vec<Relator>,
    index: OnceLock<RotationIndex>,
}

impl PartialEq for GroupPresentation {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet && self.relators == other.relators
    }
}

impl GroupPresentation {
    pub fn new(alphabet: Alphabet, relators: Vec<Relator>) -> Result<Self, PresentationError> {
        for (i, r) in relators.iter().enumerate() {
            if r.word.is_empty() {
                return Err(PresentationError::EmptyRelator(i));
            }
            if !is_cyclically_reduced(&r.word) {
                return Err(PresentationError::NotCyclicallyReduced(i));
            }
            if alphabet.check(&r.word).is_err() {
                return Err(PresentationError::ForeignGenerator(i));
            }
        }
        Ok(GroupPresentation { alphabet, relators, index: OnceLock::new() })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn relators(&self) -> &[Relator] {
        &self.relators
    }

    pub fn generator_count(&self) -> usize {
        self.alphabet.len()
    }

    pub fn relator_count(&self) -> usize {
        self.relators.len()
    }

    /// Relator counts grouped by schema tag, in first-appearance order.
    pub fn counts_by_tag(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for r in &self.relators {
            match out.iter_mut().find(|(t, _)| *t == r.tag) {
                Some((_, c)) => *c += 1,
                None => out.push((r.tag.clone(), 1)),
            }
        }
        out
    }

    /// True if `self` is `other` restricted to a prefix of generators and
    /// relators, so relator indices of `self` are valid in `other`.
    pub fn is_prefix_of(&self, other: &GroupPresentation) -> bool {
        self.alphabet.len() <= other.alphabet.len()
            && self.alphabet.names() == &other.alphabet.names()[..self.alphabet.len()]
            && self.relators.len() <= other.relators.len()
            && self.relators[..] == other.relators[..self.relators.len()]
    }

    fn index(&self) -> &RotationIndex {
        self.index.get_or_init(|| {
            let mut cells = HashMap::new();
            for (i, r) in self.relators.iter().enumerate() {
                for exp in [1i8, -1] {
                    let base = relator_power(&r.word, exp);
                    let n = base.len();
                    for rot in 0..n {
                        let rotated: Vec<Letter> = (0..n).map(|j| base[(j + rot) % n]).collect();
                        cells.entry(rotated).or_insert((i as u32, exp, rot as u32));
                    }
                }
            }
            RotationIndex { cells }
        })
    }

    /// Finds the cell whose boundary, read from some vertex, is `boundary`.
    pub fn find_cell(&self, boundary: &[Letter]) -> Option<(usize, i8, usize)> {
        self.index()
            .cells
            .get(boundary)
            .map(|&(r, e, rot)| (r as usize, e, rot as usize))
    }

    /// Rotation `rot` of `relator^exp`.
    pub fn rotated_relator(&self, rel: usize, exp: i8, rot: usize) -> Vec<Letter> {
        let base = relator_power(&self.relators[rel].word, exp);
        let n = base.len();
        (0..n).map(|j| base[(j + rot) % n]).collect()
    }

    /// Each relator normalized up to rotation and inversion, spelled by
    /// generator names, then sorted. Two presentations with equal results
    /// have the same relator multiset.
    pub fn normalized_relators(&self) -> Vec<Vec<(String, bool)>> {
        let mut out: Vec<Vec<(String, bool)>> = self
            .relators
            .iter()
            .map(|r| {
                let named = |w: &[Letter]| -> Vec<(String, bool)> {
                    w.iter().map(|l| (self.alphabet.name(l.gen).to_string(), l.inv)).collect()
                };
                let mut best: Option<Vec<(String, bool)>> = None;
                for exp in [1i8, -1] {
                    let base = relator_power(&r.word, exp);
                    let n = base.len();
                    for rot in 0..n {
                        let rotated: Vec<Letter> = (0..n).map(|j| base[(j + rot) % n]).collect();
                        let cand = named(&rotated);
                        if best.as_ref().is_none_or(|b| cand < *b) {
                            best = Some(cand);
                        }
                    }
                }
                best.expect("relators are non-empty")
            })
            .collect();
        out.sort();
        out
    }
}

fn relator_power(w: &[Letter], exp: i8) -> Vec<Letter> {
    if exp > 0 {
        w.to_vec()
    } else {
        invert(w)
    }
}

/// One elementary step of a derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStep {
    /// Replace the `split` letters at `pos` (the prefix `P` of the rotated
    /// relator `R'`) by the inverse of the remaining suffix of `R'`.
    ApplyRelator { pos: u32, rel: u32, rot: u32, split: u32, exp: i8 },
    /// Delete the inverse pair at `pos`, `pos + 1`.
    FreeCancel { pos: u32 },
    /// Insert `letter letter⁻¹` at `pos`.
    FreeInsert { pos: u32, letter: Letter },
}

impl TraceStep {
    pub fn pos(&self) -> usize {
        match *self {
            TraceStep::ApplyRelator { pos, .. } | TraceStep::FreeCancel { pos } | TraceStep::FreeInsert { pos, .. } => {
                pos as usize
            }
        }
    }

    fn shifted(self, by: usize) -> Self {
        let by = by as u32;
        match self {
            TraceStep::ApplyRelator { pos, rel, rot, split, exp } => {
                TraceStep::ApplyRelator { pos: pos + by, rel, rot, split, exp }
            }
            TraceStep::FreeCancel { pos } => TraceStep::FreeCancel { pos: pos + by },
            TraceStep::FreeInsert { pos, letter } => TraceStep::FreeInsert { pos: pos + by, letter },
        }
    }
}

/// Word storage with a movable gap; edits near the previous edit are cheap.
#[derive(Debug, Clone)]
pub(crate) struct GapBuffer {
    buf: Vec<Letter>,
    gap_start: usize,
    gap_end: usize,
}

const FILLER: Letter = Letter::pos(u32::MAX);

impl GapBuffer {
    pub(crate) fn from_slice(s: &[Letter]) -> Self {
        let cap = (s.len() * 2).max(64);
        let mut buf = Vec::with_capacity(cap);
        buf.extend_from_slice(s);
        let gap_start = buf.len();
        buf.resize(cap, FILLER);
        GapBuffer { buf, gap_start, gap_end: cap }
    }

    pub(crate) fn len(&self) -> usize {
        self.buf.len() - (self.gap_end - self.gap_start)
    }

    pub(crate) fn get(&self, i: usize) -> Letter {
        if i < self.gap_start {
            self.buf[i]
        } else {
            self.buf[i + self.gap_end - self.gap_start]
        }
    }

    fn move_gap(&mut self, pos: usize) {
        if pos < self.gap_start {
            let n = self.gap_start - pos;
            self.buf.copy_within(pos..self.gap_start, self.gap_end - n);
            self.gap_start = pos;
            self.gap_end -= n;
        } else if pos > self.gap_start {
            let n = pos - self.gap_start;
            self.buf.copy_within(self.gap_end..self.gap_end + n, self.gap_start);
            self.gap_start += n;
            self.gap_end += n;
        }
    }

    fn reserve(&mut self, extra: usize) {
        if self.gap_end - self.gap_start >= extra {
            return;
        }
        let old_len = self.buf.len();
        let tail = old_len - self.gap_end;
        let new_cap = (old_len * 2).max(old_len + extra + 64);
        self.buf.resize(new_cap, FILLER);
        self.buf.copy_within(self.gap_end..old_len, new_cap - tail);
        self.gap_end = new_cap - tail;
    }

    /// Compares the letters at `pos..pos + s.len()` with `s`.
    pub(crate) fn matches(&mut self, pos: usize, s: &[Letter]) -> bool {
        if pos + s.len() > self.len() {
            return false;
        }
        self.move_gap(pos);
        self.buf[self.gap_end..self.gap_end + s.len()] == *s
    }

    pub(crate) fn replace(&mut self, pos: usize, remove: usize, insert: &[Letter]) {
        self.move_gap(pos);
        self.gap_end += remove;
        self.reserve(insert.len());
        self.buf[self.gap_start..self.gap_start + insert.len()].copy_from_slice(insert);
        self.gap_start += insert.len();
    }

    pub(crate) fn slice(&self, from: usize, to: usize) -> Vec<Letter> {
        (from..to).map(|i| self.get(i)).collect()
    }

    pub(crate) fn to_vec(&self) -> Vec<Letter> {
        let mut v = self.buf[..self.gap_start].to_vec();
        v.extend_from_slice(&self.buf[self.gap_end..]);
        v
    }
}

fn apply_step_buf(pres: &GroupPresentation, word: &mut GapBuffer, step: &TraceStep) -> Result<(), String> {
    match *step {
        TraceStep::ApplyRelator { pos, rel, rot, split, exp } => {
            let (pos, rel, rot, split) = (pos as usize, rel as usize, rot as usize, split as usize);
            if rel >= pres.relator_count() {
                return Err(format!("relator index {rel} out of range"));
            }
            if exp != 1 && exp != -1 {
                return Err(format!("exponent {exp} is not ±1"));
            }
            let n = pres.relators[rel].word.len();
            if rot >= n || split > n {
                return Err(format!("rotation {rot} or split {split} out of range for relator of length {n}"));
            }
            if pos + split > word.len() {
                return Err(format!("position {pos} out of range"));
            }
            let rotated = pres.rotated_relator(rel, exp, rot);
            if !word.matches(pos, &rotated[..split]) {
                return Err("subword does not match the relator prefix".into());
            }
            let q = invert(&rotated[split..]);
            word.replace(pos, split, &q);
        }
        TraceStep::FreeCancel { pos } => {
            let pos = pos as usize;
            if pos + 2 > word.len() {
                return Err(format!("position {pos} out of range"));
            }
            if !word.get(pos).cancels(word.get(pos + 1)) {
                return Err(format!("letters at {pos} and {} are not inverse", pos + 1));
            }
            word.replace(pos, 2, &[]);
        }
        TraceStep::FreeInsert { pos, letter } => {
            let pos = pos as usize;
            if pos > word.len() {
                return Err(format!("position {pos} out of range"));
            }
            if letter.gen as usize >= pres.generator_count() {
                return Err(format!("generator {} outside the alphabet", letter.gen));
            }
            word.replace(pos, 0, &[letter, letter.inverse()]);
        }
    }
    Ok(())
}

/// Applies one step to an unreduced letter sequence.
pub fn apply_step(
    word: &[Letter],
    step: &TraceStep,
    pres: &GroupPresentation,
) -> Result<Vec<Letter>, TraceError> {
    let mut buf = GapBuffer::from_slice(word);
    apply_step_buf(pres, &mut buf, step).map_err(|reason| TraceError::StepFailed { index: 0, reason })?;
    Ok(buf.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AreaReport {
    pub area: usize,
    pub max_intermediate_length: usize,
    pub step_count: usize,
}

#[derive(Debug, Clone)]
pub struct DerivationTrace {
    pub presentation: Arc<GroupPresentation>,
    pub start: Vec<Letter>,
    pub steps: Vec<TraceStep>,
    pub end: Vec<Letter>,
}

/// A conjugate `u · r^e · u⁻¹` of a relator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjugateFactor {
    pub conjugator: Word,
    pub relator: usize,
    pub exponent: i8,
}

impl DerivationTrace {
    /// The trivial trace on `w`.
    pub fn identity(presentation: Arc<GroupPresentation>, w: Vec<Letter>) -> Self {
        DerivationTrace { presentation, start: w.clone(), steps: Vec::new(), end: w }
    }

    pub fn area(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, TraceStep::ApplyRelator { .. })).count()
    }

    /// Replays every step from the start word and checks the end word.
    pub fn verify(&self) -> Result<AreaReport, TraceError> {
        let mut buf = GapBuffer::from_slice(&self.start);
        let mut max_len = buf.len();
        let mut area = 0;
        for (index, step) in self.steps.iter().enumerate() {
            apply_step_buf(&self.presentation, &mut buf, step)
                .map_err(|reason| TraceError::StepFailed { index, reason })?;
            max_len = max_len.max(buf.len());
            if matches!(step, TraceStep::ApplyRelator { .. }) {
                area += 1;
            }
        }
        if buf.to_vec() != self.end {
            return Err(TraceError::EndMismatch);
        }
        Ok(AreaReport { area, max_intermediate_length: max_len, step_count: self.steps.len() })
    }

    /// The same derivation inside `u · start · u⁻¹`.
    pub fn conjugate(&self, u: &[Letter]) -> DerivationTrace {
        let wrap = |w: &[Letter]| {
            let mut out = u.to_vec();
            out.extend_from_slice(w);
            out.extend(invert(u));
            out
        };
        DerivationTrace {
            presentation: self.presentation.clone(),
            start: wrap(&self.start),
            steps: self.steps.iter().map(|s| s.shifted(u.len())).collect(),
            end: wrap(&self.end),
        }
    }

    pub fn concat(&self, next: &DerivationTrace) -> Result<DerivationTrace, TraceError> {
        if !Arc::ptr_eq(&self.presentation, &next.presentation) && *self.presentation != *next.presentation {
            return Err(TraceError::PresentationMismatch);
        }
        if self.end != next.start {
            return Err(TraceError::SeamMismatch);
        }
        let mut steps = self.steps.clone();
        steps.extend_from_slice(&next.steps);
        Ok(DerivationTrace {
            presentation: self.presentation.clone(),
            start: self.start.clone(),
            steps,
            end: next.end.clone(),
        })
    }

    /// The reverse derivation, from `end` back to `start`.
    pub fn invert(&self) -> Result<DerivationTrace, TraceError> {
        let pres = &self.presentation;
        let mut buf = GapBuffer::from_slice(&self.start);
        let mut rev = Vec::with_capacity(self.steps.len());
        for (index, step) in self.steps.iter().enumerate() {
            let inv = match *step {
                TraceStep::ApplyRelator { pos, rel, rot, split, exp } => {
                    let n = pres.relators.get(rel as usize).map_or(1, |r| r.word.len()) as u32;
                    TraceStep::ApplyRelator { pos, rel, rot: (n - rot) % n, split: n - split, exp: -exp }
                }
                TraceStep::FreeCancel { pos } => {
                    let letter = if (pos as usize) < buf.len() { buf.get(pos as usize) } else { FILLER };
                    TraceStep::FreeInsert { pos, letter }
                }
                TraceStep::FreeInsert { pos, .. } => TraceStep::FreeCancel { pos },
            };
            apply_step_buf(pres, &mut buf, step).map_err(|reason| TraceError::StepFailed { index, reason })?;
            rev.push(inv);
        }
        rev.reverse();
        Ok(DerivationTrace {
            presentation: pres.clone(),
            start: self.end.clone(),
            steps: rev,
            end: self.start.clone(),
        })
    }

    /// The derivation of `start⁻¹` to `end⁻¹` obtained by reading every
    /// intermediate word backwards.
    pub fn mirror(&self) -> Result<DerivationTrace, TraceError> {
        let pres = &self.presentation;
        let mut buf = GapBuffer::from_slice(&self.start);
        let mut out = Vec::with_capacity(self.steps.len());
        for (index, step) in self.steps.iter().enumerate() {
            let len = buf.len() as u32;
            let m = match *step {
                TraceStep::ApplyRelator { pos, rel, rot, split, exp } => {
                    if rel as usize >= pres.relator_count() {
                        return Err(TraceError::StepFailed { index, reason: "relator index out of range".into() });
                    }
                    let rotated = pres.rotated_relator(rel as usize, exp, rot as usize);
                    let split_u = (split as usize).min(rotated.len());
                    // P⁻¹ is replaced by Q⁻¹ = rotated[split..]; the cell reads P⁻¹ · Q.
                    let mut boundary = invert(&rotated[..split_u]);
                    boundary.extend(invert(&rotated[split_u..]));
                    let (r, e, ro) = pres.find_cell(&boundary).ok_or_else(|| TraceError::StepFailed {
                        index,
                        reason: "mirrored cell not found".into(),
                    })?;
                    TraceStep::ApplyRelator {
                        pos: len.saturating_sub(pos + split),
                        rel: r as u32,
                        rot: ro as u32,
                        split,
                        exp: e,
                    }
                }
                TraceStep::FreeCancel { pos } => TraceStep::FreeCancel { pos: len.saturating_sub(pos + 2) },
                TraceStep::FreeInsert { pos, letter } => TraceStep::FreeInsert { pos: len.saturating_sub(pos), letter },
            };
            apply_step_buf(pres, &mut buf, step).map_err(|reason| TraceError::StepFailed { index, reason })?;
            out.push(m);
        }
        Ok(DerivationTrace {
            presentation: pres.clone(),
            start: invert(&self.start),
            steps: out,
            end: invert(&self.end),
        })
    }

    /// Reads a trace ending at the empty word as a product of conjugates of
    /// relators that is freely equal to the start word.
    pub fn to_conjugate_product(&self) -> Result<Vec<ConjugateFactor>, TraceError> {
        if !self.end.is_empty() {
            return Err(TraceError::NonTrivialEnd);
        }
        self.relator_factors()
    }

    /// Conjugates `f_1, …, f_n` with `start` freely equal to `f_1 ⋯ f_n · end`.
    pub fn relator_factors(&self) -> Result<Vec<ConjugateFactor>, TraceError> {
        let pres = &self.presentation;
        let mut buf = GapBuffer::from_slice(&self.start);
        let mut out = Vec::new();
        for (index, step) in self.steps.iter().enumerate() {
            if let TraceStep::ApplyRelator { pos, rel, rot, exp, .. } = *step {
                if (rel as usize) < pres.relator_count() && (pos as usize) <= buf.len() {
                    let base = relator_power(&pres.relators[rel as usize].word, exp);
                    let mut u = buf.slice(0, pos as usize);
                    u.extend(invert(&base[..(rot as usize).min(base.len())]));
                    out.push(ConjugateFactor { conjugator: free_reduce(&u), relator: rel as usize, exponent: exp });
                }
            }
            apply_step_buf(pres, &mut buf, step).map_err(|reason| TraceError::StepFailed { index, reason })?;
        }
        if buf.to_vec() != self.end {
            return Err(TraceError::EndMismatch);
        }
        Ok(out)
    }
}

/// Free reduction of `∏ u_i r_i^{e_i} u_i⁻¹`.
pub fn conjugate_product_word(pres: &GroupPresentation, factors: &[ConjugateFactor]) -> Word {
    let mut raw: Vec<Letter> = Vec::new();
    for f in factors {
        raw.extend_from_slice(&f.conjugator);
        raw.extend(relator_power(&pres.relators[f.relator].word, f.exponent));
        raw.extend(invert(&f.conjugator));
        raw = free_reduce(&raw).into_letters();
    }
    free_reduce(&raw)
}

/// Cancellation schedule that freely reduces `raw`: `(position, letter)`
/// pairs in application order.
fn reduction_schedule(raw: &[Letter]) -> Vec<(usize, Letter)> {
    let mut stack: Vec<Letter> = Vec::with_capacity(raw.len());
    let mut out = Vec::new();
    for &l in raw {
        if stack.last().is_some_and(|t| t.cancels(l)) {
            let t = stack.pop().expect("non-empty");
            out.push((stack.len(), t));
        } else {
            stack.push(l);
        }
    }
    out
}

/// Incremental construction of a [`DerivationTrace`]; every step is applied
/// and checked as it is recorded.
pub struct TraceBuilder {
    pres: Arc<GroupPresentation>,
    start: Vec<Letter>,
    word: GapBuffer,
    steps: Vec<TraceStep>,
}

impl TraceBuilder {
    pub fn new(pres: Arc<GroupPresentation>, start: Vec<Letter>) -> Self {
        let word = GapBuffer::from_slice(&start);
        TraceBuilder { pres, start, word, steps: Vec::new() }
    }

    pub fn presentation(&self) -> &Arc<GroupPresentation> {
        &self.pres
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.len() == 0
    }

    pub fn get(&self, i: usize) -> Letter {
        self.word.get(i)
    }

    pub fn peek(&self, i: usize) -> Option<Letter> {
        (i < self.word.len()).then(|| self.word.get(i))
    }

    pub fn current(&self) -> Vec<Letter> {
        self.word.to_vec()
    }

    pub fn segment(&self, from: usize, to: usize) -> Vec<Letter> {
        self.word.slice(from, to)
    }

    fn push(&mut self, step: TraceStep) -> Result<(), TraceError> {
        let index = self.steps.len();
        apply_step_buf(&self.pres, &mut self.word, &step).map_err(|reason| TraceError::StepFailed { index, reason })?;
        self.steps.push(step);
        Ok(())
    }

    pub fn insert_pair(&mut self, pos: usize, letter: Letter) -> Result<(), TraceError> {
        self.push(TraceStep::FreeInsert { pos: pos as u32, letter })
    }

    /// Inserts `u · u⁻¹` at `pos`.
    pub fn insert_word_pair(&mut self, pos: usize, u: &[Letter]) -> Result<(), TraceError> {
        for (i, &l) in u.iter().enumerate() {
            self.insert_pair(pos + i, l)?;
        }
        Ok(())
    }

    pub fn cancel(&mut self, pos: usize) -> Result<(), TraceError> {
        self.push(TraceStep::FreeCancel { pos: pos as u32 })
    }

    /// Cancels `u · u⁻¹` with `|u| = n` sitting at `pos`.
    pub fn cancel_word_pair(&mut self, pos: usize, n: usize) -> Result<(), TraceError> {
        for i in (0..n).rev() {
            self.cancel(pos + i)?;
        }
        Ok(())
    }

    /// Replaces `p` at `pos` by `q` through the unique cell reading `p · q⁻¹`.
    pub fn rewrite(&mut self, pos: usize, p: &[Letter], q: &[Letter]) -> Result<(), TraceError> {
        let mut boundary = p.to_vec();
        boundary.extend(invert(q));
        let (rel, exp, rot) = self
            .pres
            .find_cell(&boundary)
            .ok_or_else(|| TraceError::NoCell(self.pres.alphabet().format(&boundary)))?;
        self.push(TraceStep::ApplyRelator {
            pos: pos as u32,
            rel: rel as u32,
            rot: rot as u32,
            split: p.len() as u32,
            exp,
        })
    }

    /// Freely reduces the segment `pos..pos + len`; returns its new length.
    pub fn reduce_segment(&mut self, pos: usize, len: usize) -> Result<usize, TraceError> {
        let seg = self.segment(pos, pos + len);
        let sched = reduction_schedule(&seg);
        for &(p, _) in &sched {
            self.cancel(pos + p)?;
        }
        Ok(len - 2 * sched.len())
    }

    /// Turns the segment at `pos`, which must equal the free reduction of
    /// `raw`, into `raw` by free insertions.
    pub fn expand_segment(&mut self, pos: usize, raw: &[Letter]) -> Result<(), TraceError> {
        let reduced = free_reduce(raw);
        if !self.word.matches(pos, &reduced) {
            return Err(TraceError::StartMismatch);
        }
        for &(p, l) in reduction_schedule(raw).iter().rev() {
            self.insert_pair(pos + p, l)?;
        }
        Ok(())
    }

    /// Replays `t` on the segment at `pos` equal to `t.start`.
    pub fn embed(&mut self, pos: usize, t: &DerivationTrace) -> Result<(), TraceError> {
        if !Arc::ptr_eq(&self.pres, &t.presentation) && !t.presentation.is_prefix_of(&self.pres) {
            return Err(TraceError::PresentationMismatch);
        }
        if !self.word.matches(pos, &t.start) {
            return Err(TraceError::StartMismatch);
        }
        self.steps.reserve(t.steps.len());
        for s in &t.steps {
            self.push(s.shifted(pos))?;
        }
        Ok(())
    }

    /// Embeds `t` (a derivation `V → end`) inside `g · V · g⁻¹`, where the
    /// current segment at `pos` of length `len` is the free reduction of
    /// `g · V · g⁻¹`. Leaves `g · end · g⁻¹` freely reduced in place.
    /// Returns the new segment length.
    pub fn apply_conjugated(
        &mut self,
        pos: usize,
        len: usize,
        g: &[Letter],
        t: &DerivationTrace,
    ) -> Result<usize, TraceError> {
        let mut raw = g.to_vec();
        raw.extend_from_slice(&t.start);
        raw.extend(invert(g));
        if free_reduce(&raw).len() != len {
            return Err(TraceError::StartMismatch);
        }
        self.expand_segment(pos, &raw)?;
        self.embed(pos + g.len(), t)?;
        let new_len = 2 * g.len() + t.end.len();
        self.reduce_segment(pos, new_len)
    }

    pub fn finish(self) -> DerivationTrace {
        DerivationTrace { presentation: self.pres, start: self.start, steps: self.steps, end: self.word.to_vec() }
    }
}

/// For a trace `t: A·B → ε` with `|A| = split`, a trace `B·A → ε`.
pub fn rotate_trivial(t: &DerivationTrace, split: usize) -> Result<DerivationTrace, TraceError> {
    if !t.end.is_empty() {
        return Err(TraceError::NonTrivialEnd);
    }
    let (a, b) = t.start.split_at(split);
    let mut start = b.to_vec();
    start.extend_from_slice(a);
    let mut tb = TraceBuilder::new(t.presentation.clone(), start);
    tb.insert_word_pair(0, &invert(a))?;
    tb.embed(a.len(), t)?;
    tb.cancel_word_pair(0, a.len())?;
    Ok(tb.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs2() -> Arc<GroupPresentation> {
        let alpha = Alphabet::new(["a", "b"]).unwrap();
        let w = alpha.parse_word("b^-1 a b a^-2").unwrap();
        Arc::new(GroupPresentation::new(alpha, vec![Relator { word: w, tag: "bs".into() }]).unwrap())
    }

    #[test]
    fn free_insert_into_empty() {
        let p = bs2();
        let a = p.alphabet().gen("a").unwrap();
        let out = apply_step(&[], &TraceStep::FreeInsert { pos: 0, letter: a }, &p).unwrap();
        assert_eq!(out, vec![a, a.inverse()]);
    }

    #[test]
    fn single_cell_reads_both_ways() {
        let p = bs2();
        let al = p.alphabet();
        let start = al.parse_letters("b^-1 a b").unwrap();
        let step = TraceStep::ApplyRelator { pos: 0, rel: 0, rot: 0, split: 3, exp: 1 };
        assert_eq!(al.format(&apply_step(&start, &step, &p).unwrap()), "a a");
        let mut tb = TraceBuilder::new(p.clone(), start.clone());
        tb.rewrite(0, &start, &al.parse_letters("a a").unwrap()).unwrap();
        assert_eq!(tb.finish().steps, vec![step]);
    }

    #[test]
    fn rejects_bad_steps() {
        let p = bs2();
        let al = p.alphabet();
        let w = al.parse_letters("a b").unwrap();
        assert!(apply_step(&w, &TraceStep::FreeCancel { pos: 0 }, &p).is_err());
        assert!(apply_step(&w, &TraceStep::FreeCancel { pos: 5 }, &p).is_err());
        assert!(apply_step(&w, &TraceStep::ApplyRelator { pos: 0, rel: 3, rot: 0, split: 1, exp: 1 }, &p).is_err());
        assert!(apply_step(&w, &TraceStep::ApplyRelator { pos: 0, rel: 0, rot: 0, split: 1, exp: 1 }, &p).is_err());
    }

    #[test]
    fn empty_trace_verifies() {
        let p = bs2();
        let t = DerivationTrace::identity(p, vec![]);
        assert_eq!(t.verify().unwrap(), AreaReport { area: 0, max_intermediate_length: 0, step_count: 0 });
        assert!(t.to_conjugate_product().unwrap().is_empty());
    }

    fn relator_trace() -> DerivationTrace {
        let p = bs2();
        let start = p.relators()[0].word.letters().to_vec();
        let mut tb = TraceBuilder::new(p, start.clone());
        tb.rewrite(0, &start[..2], &invert(&start[2..])).unwrap();
        tb.reduce_segment(0, tb.len()).unwrap();
        tb.finish()
    }

    #[test]
    fn corrupted_step_is_named() {
        let mut t = relator_trace();
        t.steps.insert(0, TraceStep::FreeCancel { pos: 0 });
        assert!(matches!(t.verify(), Err(TraceError::StepFailed { index: 0, .. })));
    }

    #[test]
    fn single_relator_conjugate_product() {
        let t = relator_trace();
        assert_eq!(t.verify().unwrap().area, 1);
        let f = t.to_conjugate_product().unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(conjugate_product_word(&t.presentation, &f), free_reduce(&t.start));
    }

    #[test]
    fn trace_algebra() {
        let t = relator_trace();
        let p = t.presentation.clone();
        let al = p.alphabet();
        assert_eq!(t.conjugate(&[]).steps, t.steps);
        let u = al.parse_letters("b a b").unwrap();
        let c = t.conjugate(&u);
        assert_eq!(c.verify().unwrap().area, 1);
        let inv = t.invert().unwrap();
        assert_eq!(inv.verify().unwrap().area, 1);
        let both = t.concat(&inv).unwrap();
        assert_eq!(both.verify().unwrap().area, 2);
        assert!(t.concat(&t).is_err());
        let m = t.mirror().unwrap();
        m.verify().unwrap();
        assert_eq!(m.start, invert(&t.start));
        let r = rotate_trivial(&t, 2).unwrap();
        assert_eq!(r.verify().unwrap().area, 1);
        let f = r.to_conjugate_product().unwrap();
        assert_eq!(conjugate_product_word(&p, &f), free_reduce(&r.start));
    }

    #[test]
    fn gap_buffer_edits() {
        let l = |g| Letter::pos(g);
        let mut b = GapBuffer::from_slice(&[l(0), l(1), l(2)]);
        b.replace(1, 1, &[l(5), l(6)]);
        assert_eq!(b.to_vec(), vec![l(0), l(5), l(6), l(2)]);
        b.replace(0, 0, &vec![l(9); 200]);
        assert_eq!(b.len(), 204);
        assert!(b.matches(200, &[l(0), l(5)]));
        assert_eq!(b.get(203), l(2));
    }

    #[test]
    fn normalized_relators_ignore_rotation_and_inversion() {
        let alpha = Alphabet::new(["a", "b"]).unwrap();
        let w1 = alpha.parse_word("a b a^-1 b^-1").unwrap();
        let w2 = alpha.parse_word("b a b^-1 a^-1").unwrap();
        let p1 = GroupPresentation::new(alpha.clone(), vec![Relator { word: w1, tag: "x".into() }]).unwrap();
        let p2 = GroupPresentation::new(alpha, vec![Relator { word: w2, tag: "y".into() }]).unwrap();
        assert_eq!(p1.normalized_relators(), p2.normalized_relators());
    }
}
