use fpembed::embed_bs::{oracle_affine, oracle_britton, random_trivial_word, BsEmbedding, BsParams};
use fpembed::embed_hvm::{HvmEmbedding, HvmParams};
use fpembed::measure::instance_rng;
use fpembed::schema::TraceJson;
use fpembed::smachine::{build_machine_for_law, is_law_pattern};
use fpembed::verbal::abelian_witness;
use fpembed::words::{exponent_sum, free_reduce, parse_law, Letter, Word};
use proptest::prelude::*;

fn letters(max: usize, gens: u32) -> impl Strategy<Value = Vec<Letter>> {
    prop::collection::vec((0..gens, any::<bool>()), 0..=max)
        .prop_map(|v| v.into_iter().map(|(g, inv)| Letter { gen: g, inv }).collect())
}

fn bs_small() -> BsEmbedding {
    BsEmbedding::new(BsParams::with_small_n(2, 3, true).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bs_oracles_agree(raw in letters(24, 2), k in 2u32..5) {
        let w = free_reduce(&raw);
        let a = oracle_affine(k, &w).unwrap().is_trivial();
        let b = oracle_britton(k, &w).unwrap().is_trivial();
        prop_assert_eq!(a, b);
        if a {
            prop_assert_eq!(exponent_sum(&w, 0), 0);
        }
    }

    #[test]
    fn random_trivial_words_derive(seed in any::<u64>(), n in 4usize..24) {
        let mut rng = instance_rng(seed, 0);
        let w = random_trivial_word(2, n, &mut rng);
        prop_assert!(w.len() <= n);
        let t = bs_small().derive_bs_trivial(&w).unwrap();
        prop_assert!(t.verify().is_ok());
        prop_assert!(t.end.is_empty());
    }

    #[test]
    fn machine_walks_stay_in_pattern(steps in prop::collection::vec((0usize..4, any::<bool>()), 0..12)) {
        let v = parse_law("x1^2 x2^-1 x1").unwrap();
        let m = build_machine_for_law(&v, 2).unwrap();
        let mut w = m.w0.clone();
        for (i, inv) in steps {
            w = m.apply(&w, i % m.rules.len(), inv).unwrap_or(w);
            let tapes: Vec<Word> = w.tapes.iter().map(|t| t.map_gens(|g| g - v.state_count() as u32)).collect();
            prop_assert!(is_law_pattern(&v, &tapes));
        }
    }

    #[test]
    fn sigma_traces_survive_json(seed in any::<u64>(), total in 0usize..8) {
        let e = HvmEmbedding::new(HvmParams::with_small_n(parse_law("[x1,x2]").unwrap(), 2, 3, true).unwrap());
        let mut rng = instance_rng(seed, 1);
        let xs = fpembed::measure::random_tuple(2, 2, total, &mut rng);
        let t = e.derive_sigma_trivial(&xs).unwrap();
        let text = serde_json::to_string(&TraceJson::from_trace(&t)).unwrap();
        let back = serde_json::from_str::<TraceJson>(&text).unwrap().to_trace().unwrap();
        prop_assert_eq!(back.verify().unwrap().area, t.verify().unwrap().area);
    }
}

#[test]
fn wn_area_is_monotone() {
    let e = bs_small();
    let areas: Vec<usize> = (0..12).map(|n| e.derive_wn(n).unwrap().verify().unwrap().area).collect();
    assert!(areas.windows(2).all(|p| p[0] <= p[1]), "{areas:?}");
}

#[test]
fn abelian_witness_drives_relatively_free_derivation() {
    let e = HvmEmbedding::new(HvmParams::with_small_n(parse_law("[x1,x2]").unwrap(), 2, 3, true).unwrap());
    let h = e.params.clone();
    let al = fpembed::embed_hvm::gen_h(&h).alphabet().clone();
    for text in ["b1 b2 b1^-1 b2^-1", "b1 b2 b1^-1 b2^-1 b2 b1 b2^-1 b1^-1", "b1^2 b2 b1^-2 b2^-1"] {
        let w = al.parse_letters(text).unwrap();
        let b0 = al.gen("b1").unwrap().gen;
        let wa: Vec<Letter> = w.iter().map(|l| Letter { gen: l.gen - b0, inv: l.inv }).collect();
        let wit = abelian_witness(&wa).unwrap();
        let t = e.derive_relatively_free_trivial(&w, &wit).unwrap();
        assert!(t.verify().is_ok(), "{text}");
        assert!(t.end.is_empty());
    }
}
