//! Area sweeps over the derivation families, CSV output and log-log fits.
//!
//! All randomness comes from a ChaCha8 stream seeded by the run seed and
//! selected by instance number, so rows do not depend on thread scheduling.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::embed_bs::{random_trivial_word, sigma_s, wn, BsEmbedding, BsError, BsParams};
use crate::embed_hvm::{HvmEmbedding, HvmError, HvmParams};
use crate::presentations::{DerivationTrace, TraceError};
use crate::verbal::{verbal_dehn_estimate, SearchBounds, VerbalDehnTable};
use crate::words::{LawWord, Letter, Word};

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Bs(#[from] BsError),
    #[error(transparent)]
    Hvm(#[from] HvmError),
    #[error("trace failed verification: {0}")]
    Verify(#[from] TraceError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    SigmaS,
    Wn,
    BsRandomTrivial,
    SigmaHvm,
    LawInstance,
    VerbalDehn,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::SigmaS, Family::Wn, Family::BsRandomTrivial, Family::SigmaHvm, Family::LawInstance, Family::VerbalDehn];

    pub fn name(self) -> &'static str {
        match self {
            Family::SigmaS => "sigma_s",
            Family::Wn => "wn",
            Family::BsRandomTrivial => "bs-random-trivial",
            Family::SigmaHvm => "sigma_hvm",
            Family::LawInstance => "law-instance",
            Family::VerbalDehn => "verbal-dehn",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct MeasureConfig {
    pub family: Family,
    /// BS parameter `k`.
    pub k: u32,
    /// Number of hub copies `N`.
    pub big_n: usize,
    pub allow_small_n: bool,
    pub law: Option<LawWord>,
    /// Tape-letter count `m` for the law families; generator count for
    /// `verbal-dehn`.
    pub m: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub step: usize,
    /// Random instances per `n` for `bs-random-trivial`.
    pub samples: usize,
    pub seed: u64,
    /// Record wall-clock time; off by default so output is reproducible.
    pub timing: bool,
    pub bounds: SearchBounds,
    pub threads: usize,
}

impl MeasureConfig {
    pub fn new(family: Family) -> Self {
        MeasureConfig {
            family,
            k: 2,
            big_n: 29,
            allow_small_n: false,
            law: None,
            m: 2,
            n_min: 1,
            n_max: 16,
            step: 1,
            samples: 1,
            seed: 0,
            timing: false,
            bounds: SearchBounds::default(),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    fn sizes(&self) -> Vec<usize> {
        (self.n_min..=self.n_max).step_by(self.step.max(1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasureRow {
    pub family: String,
    pub k: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    #[serde(rename = "wordLength")]
    pub word_length: usize,
    pub area: usize,
    #[serde(rename = "maxIntermediateLength")]
    pub max_intermediate_length: usize,
    #[serde(rename = "wallMillis")]
    pub wall_millis: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerbalRow {
    pub law: String,
    pub n: usize,
    pub fhat: usize,
    pub exact: bool,
    #[serde(rename = "witnessCount")]
    pub witness_count: usize,
    #[serde(rename = "wallMillis")]
    pub wall_millis: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub family: String,
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_lo: f64,
    pub n_hi: f64,
}

/// Ordinary least squares of `ln area` on `ln n` over points with
/// `n ∈ [n_lo, n_hi]` and positive coordinates.
pub fn fit_loglog(family: &str, points: &[(f64, f64)], n_lo: f64, n_hi: f64) -> FitReport {
    let window: Vec<(f64, f64)> =
        points.iter().copied().filter(|&(n, a)| n >= n_lo && n <= n_hi && n > 0.0 && a > 0.0).collect();
    let xy: Vec<(f64, f64)> = window.iter().map(|&(n, a)| (n.ln(), a.ln())).collect();
    let len = xy.len() as f64;
    let (mut slope, mut intercept, mut r2) = (f64::NAN, f64::NAN, f64::NAN);
    if xy.len() >= 2 {
        let mx = xy.iter().map(|p| p.0).sum::<f64>() / len;
        let my = xy.iter().map(|p| p.1).sum::<f64>() / len;
        let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
        slope = sxy / sxx;
        intercept = my - slope * mx;
        r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    }
    FitReport { family: family.to_string(), points: window, slope, intercept, r2, n_lo, n_hi }
}

/// Fit with the default window `[n_max / 8, n_max]`.
pub fn fit_rows(family: &str, rows: &[MeasureRow]) -> FitReport {
    let points = worst_case_points(rows);
    let n_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    fit_loglog(family, &points, (n_max / 8.0).max(1.0), n_max)
}

/// Largest area for each `n`, in increasing `n`.
pub fn worst_case_points(rows: &[MeasureRow]) -> Vec<(f64, f64)> {
    let mut best: std::collections::BTreeMap<usize, usize> = Default::default();
    for r in rows {
        let e = best.entry(r.n).or_default();
        *e = (*e).max(r.area);
    }
    best.into_iter().map(|(n, a)| (n as f64, a as f64)).collect()
}

/// The random stream for instance `id` of a run.
pub fn instance_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// A tuple of `k` reduced words over `m` letters with total length `total`,
/// split as evenly as possible.
pub fn random_tuple<R: Rng>(k: usize, m: usize, total: usize, rng: &mut R) -> Vec<Word> {
    (0..k)
        .map(|i| {
            let len = total / k + usize::from(i < total % k);
            let mut w: Vec<Letter> = Vec::with_capacity(len);
            while w.len() < len {
                let g = rng.gen_range(0..m as u32);
                let l = if rng.gen_bool(0.5) { Letter::pos(g) } else { Letter::neg(g) };
                if !w.last().is_some_and(|t| t.cancels(l)) {
                    w.push(l);
                }
            }
            Word::from_reduced(w)
        })
        .collect()
}

struct Job {
    n: usize,
    id: u64,
}

/// Runs `f` over the jobs on up to `threads` workers and returns results in
/// job order.
fn run_parallel<T: Send>(jobs: &[Job], threads: usize, f: impl Fn(&Job) -> T + Sync) -> Vec<T> {
    let threads = threads.clamp(1, jobs.len().max(1));
    let mut out: Vec<Option<T>> = (0..jobs.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(&mut out);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = f(job);
                results.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    out.into_iter().map(|r| r.expect("every job ran")).collect()
}

fn row(cfg: &MeasureConfig, k: usize, n: usize, word_length: usize, t: &DerivationTrace, started: Instant) -> Result<MeasureRow, MeasureError> {
    let report = t.verify()?;
    Ok(MeasureRow {
        family: cfg.family.name().to_string(),
        k,
        big_n: cfg.big_n,
        n,
        word_length,
        area: report.area,
        max_intermediate_length: report.max_intermediate_length,
        wall_millis: if cfg.timing { started.elapsed().as_millis() as u64 } else { 0 },
    })
}

/// Sweeps an area family. Every trace is verified before its row is kept.
/// The `k` column carries the BS parameter for BS families and the law's
/// variable count for the law families.
pub fn measure_area(cfg: &MeasureConfig) -> Result<Vec<MeasureRow>, MeasureError> {
    let sizes = cfg.sizes();
    let per_n = if cfg.family == Family::BsRandomTrivial { cfg.samples.max(1) } else { 1 };
    let jobs: Vec<Job> = sizes
        .iter()
        .flat_map(|&n| (0..per_n).map(move |s| Job { n, id: (n * per_n + s) as u64 }))
        .collect();
    let results: Vec<Result<Option<MeasureRow>, MeasureError>> = match cfg.family {
        Family::SigmaS | Family::Wn | Family::BsRandomTrivial => {
            let params = BsParams::with_small_n(cfg.k, cfg.big_n, cfg.allow_small_n)?;
            let e = BsEmbedding::new(params);
            let k = cfg.k as usize;
            run_parallel(&jobs, cfg.threads, |job| {
                let started = Instant::now();
                match cfg.family {
                    Family::SigmaS => {
                        let len = sigma_s(&params, job.n as u32).len();
                        Ok(Some(row(cfg, k, job.n, len, &e.derive_sigma_s(job.n as u32)?, started)?))
                    }
                    Family::Wn => {
                        let len = wn(job.n as u32).len();
                        Ok(Some(row(cfg, k, job.n, len, &e.derive_wn(job.n as u32)?, started)?))
                    }
                    _ => {
                        let mut rng = instance_rng(cfg.seed, job.id);
                        let w = random_trivial_word(cfg.k, job.n, &mut rng);
                        if w.is_empty() {
                            return Ok(None);
                        }
                        Ok(Some(row(cfg, k, job.n, w.len(), &e.derive_bs_trivial(&w)?, started)?))
                    }
                }
            })
        }
        Family::SigmaHvm | Family::LawInstance => {
            let law = cfg.law.clone().ok_or_else(|| MeasureError::Config("a law is required".into()))?;
            let params = HvmParams::with_small_n(law, cfg.m, cfg.big_n, cfg.allow_small_n)?;
            let k = params.k();
            let e = HvmEmbedding::new(params);
            run_parallel(&jobs, cfg.threads, |job| {
                let started = Instant::now();
                let mut rng = instance_rng(cfg.seed, job.id);
                let xs = random_tuple(k, cfg.m, job.n, &mut rng);
                let t = if cfg.family == Family::SigmaHvm { e.derive_sigma_trivial(&xs)? } else { e.derive_law_instance(&xs)? };
                Ok(Some(row(cfg, k, job.n, t.start.len(), &t, started)?))
            })
        }
        Family::VerbalDehn => return Err(MeasureError::Config("verbal-dehn produces a verbal table".into())),
    };
    results.into_iter().filter_map(Result::transpose).collect()
}

/// The verbal Dehn table for `n ≤ n_max` as CSV rows.
pub fn measure_verbal(cfg: &MeasureConfig) -> Result<(VerbalDehnTable, Vec<VerbalRow>), MeasureError> {
    let law = cfg.law.clone().ok_or_else(|| MeasureError::Config("a law is required".into()))?;
    let started = Instant::now();
    let table = verbal_dehn_estimate(&law, cfg.m as u32, cfg.n_max, cfg.bounds);
    let millis = if cfg.timing { started.elapsed().as_millis() as u64 } else { 0 };
    let rows = table
        .rows
        .iter()
        .filter(|r| r.n >= cfg.n_min)
        .map(|r| VerbalRow {
            law: table.law.clone(),
            n: r.n,
            fhat: r.fhat,
            exact: r.exact,
            witness_count: r.witness_count,
            wall_millis: millis,
        })
        .collect();
    Ok((table, rows))
}

/// Writes rows as CSV with a header, `,` separators and LF line endings.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), MeasureError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String, MeasureError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::parse_law;

    #[test]
    fn fit_recovers_exponent() {
        let pts: Vec<(f64, f64)> = (1..=20).map(|n| (n as f64, 3.0 * (n as f64).powi(2))).collect();
        let f = fit_loglog("x", &pts, 1.0, 20.0);
        assert!((f.slope - 2.0).abs() < 1e-9);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-9);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        let f = fit_loglog("x", &pts, 5.0, 10.0);
        assert_eq!(f.points.len(), 6);
    }

    #[test]
    fn random_tuple_shape() {
        let mut rng = instance_rng(7, 3);
        let xs = random_tuple(3, 2, 10, &mut rng);
        assert_eq!(xs.iter().map(Word::len).collect::<Vec<_>>(), vec![4, 3, 3]);
        assert!(xs.iter().all(|w| crate::words::is_reduced(w)));
    }

    #[test]
    fn deterministic_csv() {
        let mut cfg = MeasureConfig::new(Family::BsRandomTrivial);
        cfg.big_n = 3;
        cfg.allow_small_n = true;
        cfg.n_min = 8;
        cfg.n_max = 16;
        cfg.step = 8;
        cfg.samples = 3;
        cfg.seed = 11;
        let a = csv_string(&measure_area(&cfg).unwrap()).unwrap();
        cfg.threads = 1;
        let b = csv_string(&measure_area(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("family,k,N,n,wordLength,area,maxIntermediateLength,wallMillis\n"));
        assert!(!a.contains('\r'));
    }

    #[test]
    fn law_families_run() {
        let mut cfg = MeasureConfig::new(Family::SigmaHvm);
        cfg.law = Some(parse_law("x1^3").unwrap());
        cfg.big_n = 3;
        cfg.allow_small_n = true;
        cfg.n_max = 4;
        let rows = measure_area(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        cfg.family = Family::LawInstance;
        cfg.m = 1;
        assert_eq!(measure_area(&cfg).unwrap().len(), 4);
    }

    #[test]
    fn verbal_rows() {
        let mut cfg = MeasureConfig::new(Family::VerbalDehn);
        cfg.law = Some(parse_law("[x1,x2]").unwrap());
        cfg.n_max = 4;
        let (_, rows) = measure_verbal(&cfg).unwrap();
        assert_eq!(rows.last().unwrap().fhat, 2);
        let text = csv_string(&rows).unwrap();
        assert!(text.starts_with("law,n,fhat,exact,witnessCount,wallMillis\n"));
    }
}
