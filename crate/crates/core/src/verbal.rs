//! Verbal subgroups of free groups: witnesses that a word is a product of
//! conjugated values of a law, bounded minimal-cost search, and estimates of
//! the verbal Dehn function.
//!
//! The cost of a witness `∏ u_i v(X_i)^{±1} u_i⁻¹` is `Σ |X_ij|`; conjugators
//! are free.

use std::collections::{HashMap, HashSet};

use crate::words::{exponent_sum, free_reduce, invert, substitute, LawWord, Letter, Word, WordError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessFactor {
    pub conjugator: Word,
    pub values: Vec<Word>,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerbalWitness {
    pub factors: Vec<WitnessFactor>,
}

impl VerbalWitness {
    pub fn cost(&self) -> usize {
        self.factors.iter().flat_map(|f| f.values.iter()).map(Word::len).sum()
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    /// The free reduction of `∏ u_i v(X_i)^{ε_i} u_i⁻¹`.
    pub fn product(&self, law: &LawWord) -> Result<Word, WordError> {
        let mut raw: Vec<Letter> = Vec::new();
        for f in &self.factors {
            let val = substitute(law, &f.values)?;
            raw.extend_from_slice(&f.conjugator);
            if f.sign < 0 {
                raw.extend(invert(&val));
            } else {
                raw.extend_from_slice(&val);
            }
            raw.extend(invert(&f.conjugator));
        }
        Ok(free_reduce(&raw))
    }

    /// True when the product is freely equal to `w`.
    pub fn verify(&self, law: &LawWord, w: &[Letter]) -> bool {
        self.product(law).is_ok_and(|p| p == free_reduce(w))
    }

    /// Image under the homomorphism deleting every generator not in `keep`.
    pub fn project(&self, keep: &HashSet<u32>) -> VerbalWitness {
        let kill = |w: &Word| free_reduce(&w.iter().copied().filter(|l| keep.contains(&l.gen)).collect::<Vec<_>>());
        VerbalWitness {
            factors: self
                .factors
                .iter()
                .map(|f| WitnessFactor {
                    conjugator: kill(&f.conjugator),
                    values: f.values.iter().map(kill).collect(),
                    sign: f.sign,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WitnessCheck {
    pub ok: bool,
    pub cost: usize,
}

pub fn witness_verify(law: &LawWord, w: &[Letter], witness: &VerbalWitness) -> Result<WitnessCheck, WordError> {
    let p = witness.product(law)?;
    Ok(WitnessCheck { ok: p == free_reduce(w), cost: witness.cost() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    In,
    Out,
    Unknown,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Sound necessary condition from abelianization: every exponent sum of `w`
/// is a multiple of the gcd of the law's exponent sums. Returns `In` only
/// when `known` is a verified witness.
pub fn membership_precheck(law: &LawWord, w: &[Letter], known: Option<&VerbalWitness>) -> Membership {
    let g = law.exponent_sums().into_iter().fold(0, gcd);
    let gens: HashSet<u32> = w.iter().map(|l| l.gen).collect();
    for gen in gens {
        let e = exponent_sum(w, gen);
        let bad = if g == 0 { e != 0 } else { e % g != 0 };
        if bad {
            return Membership::Out;
        }
    }
    match known {
        Some(wit) if wit.verify(law, w) => Membership::In,
        _ => Membership::Unknown,
    }
}

/// Witness for the commutator law obtained by sorting `w` into generator
/// order with adjacent swaps `xy = [x,y]·yx`, one factor per swap.
pub fn abelian_witness(w: &[Letter]) -> Result<VerbalWitness, WordError> {
    let mut gens: Vec<u32> = w.iter().map(|l| l.gen).collect();
    gens.sort_unstable();
    gens.dedup();
    for &g in &gens {
        if exponent_sum(w, g) != 0 {
            return Err(WordError::Syntax { offset: 0, msg: format!("exponent sum of generator {g} is non-zero") });
        }
    }
    let mut cur: Vec<Letter> = free_reduce(w).into_letters();
    let mut factors = Vec::new();
    while let Some(i) = (0..cur.len().saturating_sub(1)).find(|&i| cur[i].gen > cur[i + 1].gen) {
        let (x, y) = (cur[i], cur[i + 1]);
        factors.push(WitnessFactor {
            conjugator: free_reduce(&cur[..i]),
            values: vec![Word::letter(x), Word::letter(y)],
            sign: 1,
        });
        cur.swap(i, i + 1);
    }
    debug_assert!(free_reduce(&cur).is_empty());
    Ok(VerbalWitness { factors })
}

fn words_over(gens: &[u32], max_len: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut frontier = vec![Vec::<Letter>::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for &g in gens {
                for l in [Letter::pos(g), Letter::neg(g)] {
                    if w.last().is_some_and(|t| t.cancels(l)) {
                        continue;
                    }
                    let mut v = w.clone();
                    v.push(l);
                    next.push(v);
                }
            }
        }
        out.extend(next.iter().map(|v| Word::from_reduced(v.clone())));
        frontier = next;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBounds {
    pub cost: usize,
    pub conj: usize,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds { cost: 8, conj: 4 }
    }
}

/// Bounded witness search over a fixed generator set. Values `v(X)^{±1}` are
/// tabulated one cost level at a time as the search deepens, and failed
/// `(target, budget)` pairs are remembered across targets.
pub struct WitnessSearcher {
    law: LawWord,
    gens: Vec<u32>,
    bounds: SearchBounds,
    conjugators: Vec<Word>,
    /// Reduced words over `gens`, by length.
    pool: Vec<Vec<Word>>,
    /// Values first reached at each cost.
    by_cost: Vec<Vec<(Word, Vec<Word>, i8)>>,
    lookup: HashMap<Word, (usize, Vec<Word>, i8)>,
    failed: HashSet<(Word, usize)>,
    emax: usize,
}

impl WitnessSearcher {
    pub fn new(law: &LawWord, gens: &[u32], bounds: SearchBounds) -> Self {
        let emax = law.exponent_sums().iter().map(|e| e.unsigned_abs() as usize).max().unwrap_or(0);
        let mut pool: Vec<Vec<Word>> = vec![Vec::new(); bounds.cost + 1];
        for w in words_over(gens, bounds.cost) {
            pool[w.len()].push(w);
        }
        WitnessSearcher {
            law: law.clone(),
            gens: gens.to_vec(),
            bounds,
            conjugators: words_over(gens, bounds.conj),
            pool,
            by_cost: vec![Vec::new()],
            lookup: HashMap::new(),
            failed: HashSet::new(),
            emax,
        }
    }

    /// Tabulates values of every cost up to `c`.
    fn ensure_level(&mut self, c: usize) {
        while self.by_cost.len() <= c {
            let level = self.by_cost.len();
            let k = self.law.variable_count();
            let mut tuples: Vec<Vec<Word>> = Vec::new();
            fn fill(pool: &[Vec<Word>], k: usize, left: usize, cur: &mut Vec<Word>, out: &mut Vec<Vec<Word>>) {
                if cur.len() + 1 == k {
                    for w in &pool[left] {
                        cur.push(w.clone());
                        out.push(cur.clone());
                        cur.pop();
                    }
                    return;
                }
                for len in 0..=left {
                    for w in &pool[len] {
                        cur.push(w.clone());
                        fill(pool, k, left - len, cur, out);
                        cur.pop();
                    }
                }
            }
            fill(&self.pool, k, level, &mut Vec::new(), &mut tuples);
            tuples.sort();
            let mut found = Vec::new();
            for xs in tuples {
                let val = substitute(&self.law, &xs).expect("arity matches");
                if val.is_empty() {
                    continue;
                }
                for (v, s) in [(val.clone(), 1i8), (val.inverse(), -1)] {
                    if !self.lookup.contains_key(&v) {
                        self.lookup.insert(v.clone(), (level, xs.clone(), s));
                        found.push((v, xs.clone(), s));
                    }
                }
            }
            self.by_cost.push(found);
        }
    }

    fn lower_bound_ok(&self, t: &Word, budget: usize) -> bool {
        let mut gens: Vec<u32> = t.iter().map(|l| l.gen).collect();
        gens.sort_unstable();
        gens.dedup();
        let norm: usize = gens.iter().map(|&g| exponent_sum(t, g).unsigned_abs() as usize).sum();
        if self.emax == 0 {
            norm == 0
        } else {
            norm <= self.emax * budget
        }
    }

    fn dfs(&mut self, t: &Word, budget: usize) -> Option<Vec<WitnessFactor>> {
        if t.is_empty() {
            return Some(Vec::new());
        }
        if budget == 0 || !self.lower_bound_ok(t, budget) || self.failed.contains(&(t.clone(), budget)) {
            return None;
        }
        self.ensure_level(budget);
        for u in &self.conjugators {
            let core = free_reduce(&[&invert(u)[..], &t[..], &u[..]].concat());
            if let Some((c, xs, s)) = self.lookup.get(&core) {
                if *c <= budget {
                    return Some(vec![WitnessFactor { conjugator: u.clone(), values: xs.clone(), sign: *s }]);
                }
            }
        }
        for c in 1..budget {
            for vi in 0..self.by_cost[c].len() {
                for ui in 0..self.conjugators.len() {
                    let (val, xs, s) = self.by_cost[c][vi].clone();
                    let u = self.conjugators[ui].clone();
                    let f = [&u[..], &val[..], &invert(&u)[..]].concat();
                    let rest = free_reduce(&[&invert(&f)[..], &t[..]].concat());
                    if let Some(mut tail) = self.dfs(&rest, budget - c) {
                        tail.insert(0, WitnessFactor { conjugator: u, values: xs, sign: s });
                        return Some(tail);
                    }
                }
            }
        }
        self.failed.insert((t.clone(), budget));
        None
    }

    /// Minimal-cost witness for `w`, which must use only this searcher's
    /// generators.
    pub fn search(&mut self, w: &[Letter]) -> Option<VerbalWitness> {
        let target = free_reduce(w);
        if target.is_empty() {
            return Some(VerbalWitness::default());
        }
        assert!(target.iter().all(|l| self.gens.contains(&l.gen)), "word uses generators outside the searcher");
        if membership_precheck(&self.law, &target, None) == Membership::Out {
            return None;
        }
        for c in 1..=self.bounds.cost {
            if let Some(factors) = self.dfs(&target, c) {
                let wit = VerbalWitness { factors };
                debug_assert!(wit.verify(&self.law, &target));
                return Some(wit);
            }
        }
        None
    }
}

fn gens_of(w: &[Letter]) -> Vec<u32> {
    let mut gens: Vec<u32> = w.iter().map(|l| l.gen).collect();
    gens.sort_unstable();
    gens.dedup();
    gens
}

/// Minimal-cost witness for `w` among witnesses with `cost ≤ bounds.cost`
/// and conjugators of length `≤ bounds.conj` over the generators of `w`.
/// `None` means none exists within the bounds.
pub fn witness_search(law: &LawWord, w: &[Letter], bounds: SearchBounds) -> Option<VerbalWitness> {
    let target = free_reduce(w);
    WitnessSearcher::new(law, &gens_of(&target), bounds).search(&target)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbalDehnRow {
    pub n: usize,
    pub fhat: usize,
    pub exact: bool,
    pub witness_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbalDehnTable {
    pub law: String,
    pub rows: Vec<VerbalDehnRow>,
}

/// For `n = 0..=n_max`, the largest minimal witness cost over all reduced
/// words of length `≤ n` on `gens` generators that pass the membership
/// precheck. A row is exact when every such word's search found a witness.
pub fn verbal_dehn_estimate(law: &LawWord, gens: u32, n_max: usize, bounds: SearchBounds) -> VerbalDehnTable {
    let all: Vec<u32> = (0..gens).collect();
    let mut rows = Vec::new();
    let (mut fhat, mut exact, mut count) = (0usize, true, 0usize);
    let mut by_len: Vec<Vec<Word>> = vec![Vec::new(); n_max + 1];
    for w in words_over(&all, n_max) {
        by_len[w.len()].push(w);
    }
    let mut searchers: HashMap<Vec<u32>, WitnessSearcher> = HashMap::new();
    for (n, words) in by_len.iter().enumerate() {
        for w in words {
            if membership_precheck(law, w, None) == Membership::Out {
                continue;
            }
            let searcher = searchers
                .entry(gens_of(w))
                .or_insert_with_key(|g| WitnessSearcher::new(law, g, bounds));
            match searcher.search(w) {
                Some(wit) => {
                    fhat = fhat.max(wit.cost());
                    count += 1;
                }
                None => exact = false,
            }
        }
        rows.push(VerbalDehnRow { n, fhat, exact, witness_count: count });
    }
    VerbalDehnTable { law: law.to_string(), rows }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperadditivityReport {
    pub cost_first: Option<usize>,
    pub cost_second: Option<usize>,
    pub cost_joint: Option<usize>,
    /// Projections of the joint witness verify for each part with cost sum
    /// at most the joint cost.
    pub projection_ok: bool,
    pub projected_costs: Option<(usize, usize)>,
    pub holds: bool,
}

/// Checks `mincost(w1·w2) ≥ mincost(w1) + mincost(w2)` for words over
/// disjoint generator sets, and that projecting the joint witness onto each
/// generator set gives witnesses for the parts.
pub fn superadditivity_check(law: &LawWord, w1: &[Letter], w2: &[Letter], bounds: SearchBounds) -> SuperadditivityReport {
    let g1: HashSet<u32> = w1.iter().map(|l| l.gen).collect();
    let g2: HashSet<u32> = w2.iter().map(|l| l.gen).collect();
    assert!(g1.is_disjoint(&g2), "words must use disjoint generators");
    let a = witness_search(law, w1, bounds);
    let b = witness_search(law, w2, bounds);
    let joint_word = [w1, w2].concat();
    let joint = witness_search(law, &joint_word, bounds);
    let (mut projection_ok, mut projected_costs) = (true, None);
    if let Some(j) = &joint {
        let p1 = j.project(&g1);
        let p2 = j.project(&g2);
        projection_ok = p1.verify(law, w1) && p2.verify(law, w2) && p1.cost() + p2.cost() <= j.cost();
        projected_costs = Some((p1.cost(), p2.cost()));
    }
    let (ca, cb, cj) = (a.map(|w| w.cost()), b.map(|w| w.cost()), joint.map(|w| w.cost()));
    let holds = match (ca, cb, cj) {
        (Some(x), Some(y), Some(z)) => z >= x + y,
        (_, _, None) => true,
        _ => false,
    };
    SuperadditivityReport { cost_first: ca, cost_second: cb, cost_joint: cj, projection_ok, projected_costs, holds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::{parse_law, reduced_words_up_to, Alphabet};
    use proptest::prelude::*;

    fn abc() -> Alphabet {
        Alphabet::new(["a", "b", "c", "d"]).unwrap()
    }

    fn w(s: &str) -> Vec<Letter> {
        abc().parse_letters(s).unwrap()
    }

    fn single(xs: &[&str]) -> VerbalWitness {
        VerbalWitness {
            factors: vec![WitnessFactor {
                conjugator: Word::empty(),
                values: xs.iter().map(|x| abc().parse_word(x).unwrap()).collect(),
                sign: 1,
            }],
        }
    }

    #[test]
    fn verify_examples() {
        let comm = parse_law("[x1,x2]").unwrap();
        let c = witness_verify(&comm, &w("a b a^-1 b^-1"), &single(&["a", "b"])).unwrap();
        assert_eq!(c, WitnessCheck { ok: true, cost: 2 });
        let sq = parse_law("x1^2").unwrap();
        assert_eq!(witness_verify(&sq, &w("a a"), &single(&["a"])).unwrap(), WitnessCheck { ok: true, cost: 1 });
        assert!(!witness_verify(&comm, &w("a b a^-1 b^-1"), &single(&["b", "a"])).unwrap().ok);
        assert!(witness_verify(&comm, &w("a"), &single(&["a"])).is_err());
    }

    #[test]
    fn search_examples() {
        let comm = parse_law("[x1,x2]").unwrap();
        let b = SearchBounds { cost: 4, conj: 2 };
        assert_eq!(witness_search(&comm, &w("a b a^-1 b^-1"), b).unwrap().cost(), 2);
        let found = witness_search(&comm, &w("a a b a^-1 a^-1 b^-1"), b).unwrap();
        assert_eq!(found.cost(), 3);
        assert!(found.verify(&comm, &w("a a b a^-1 a^-1 b^-1")));
        let sq = parse_law("x1^2").unwrap();
        assert!(witness_search(&sq, &w("a b"), SearchBounds { cost: 6, conj: 2 }).is_none());
        assert_eq!(membership_precheck(&sq, &w("a b"), None), Membership::Out);
    }

    #[test]
    fn precheck_examples() {
        let cube = parse_law("x1^3").unwrap();
        assert_eq!(membership_precheck(&cube, &w("a"), None), Membership::Out);
        let comm = parse_law("[x1,x2]").unwrap();
        let x = w("a b a^-1 b^-1");
        assert_eq!(membership_precheck(&comm, &x, None), Membership::Unknown);
        assert_eq!(membership_precheck(&comm, &x, Some(&single(&["a", "b"]))), Membership::In);
        assert_eq!(membership_precheck(&comm, &w("a b"), None), Membership::Out);
    }

    #[test]
    fn abelian_examples() {
        let comm = parse_law("[x1,x2]").unwrap();
        let x = w("a b a^-1 b^-1");
        let wit = abelian_witness(&x).unwrap();
        assert_eq!((wit.factor_count(), wit.cost()), (1, 2));
        let x = w("a a b b a^-1 a^-1 b^-1 b^-1");
        let wit = abelian_witness(&x).unwrap();
        assert!(wit.verify(&comm, &x));
        assert!(wit.cost() <= 16);
        assert_eq!(abelian_witness(&[]).unwrap().cost(), 0);
        assert!(abelian_witness(&w("a b")).is_err());
    }

    #[test]
    fn abelian_witness_on_ball() {
        let comm = parse_law("[x1,x2]").unwrap();
        for x in reduced_words_up_to(3, 8) {
            if (0..3).all(|g| exponent_sum(&x, g) == 0) {
                let wit = abelian_witness(&x).unwrap();
                assert!(wit.verify(&comm, &x));
                assert!(wit.cost() <= x.len() * x.len());
                assert_ne!(membership_precheck(&comm, &x, Some(&wit)), Membership::Out);
            }
        }
    }

    #[test]
    fn dehn_table_commutator() {
        let comm = parse_law("[x1,x2]").unwrap();
        let t = verbal_dehn_estimate(&comm, 2, 4, SearchBounds { cost: 4, conj: 2 });
        let row = &t.rows[4];
        assert_eq!((row.fhat, row.exact), (2, true));
        for pair in t.rows.windows(2) {
            assert!(pair[0].fhat <= pair[1].fhat);
        }
    }

    #[test]
    fn superadditivity_examples() {
        let comm = parse_law("[x1,x2]").unwrap();
        let b = SearchBounds { cost: 4, conj: 1 };
        let r = superadditivity_check(&comm, &w("a b a^-1 b^-1"), &w("c d c^-1 d^-1"), b);
        assert_eq!(r.cost_joint, Some(4));
        assert!(r.holds && r.projection_ok);
        let r = superadditivity_check(&comm, &w("a b a^-1 b^-1"), &[], b);
        assert_eq!((r.cost_first, r.cost_joint), (Some(2), Some(2)));
        assert!(r.holds);
    }

    proptest! {
        #[test]
        fn projection_preserves_witnesses(raw in proptest::collection::vec((0u32..4, any::<bool>(), any::<u16>()), 0..6)) {
            let comm = parse_law("[x1,x2]").unwrap();
            // A word followed by a shuffle of its inverse letters has zero exponent sums.
            let mut x: Vec<Letter> = raw.iter().map(|&(g, i, _)| Letter { gen: g, inv: i }).collect();
            let mut back: Vec<(u16, Letter)> = raw.iter().map(|&(g, i, key)| (key, Letter { gen: g, inv: !i })).collect();
            back.sort();
            x.extend(back.into_iter().map(|(_, l)| l));
            let x = free_reduce(&x).into_letters();
            let wit = abelian_witness(&x).unwrap();
            let keep: HashSet<u32> = [0, 1].into();
            let p = wit.project(&keep);
            let px: Vec<Letter> = x.iter().copied().filter(|l| keep.contains(&l.gen)).collect();
            prop_assert!(p.verify(&comm, &px));
            prop_assert!(p.cost() <= wit.cost());
        }
    }
}
