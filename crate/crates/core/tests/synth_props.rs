use mmlab_core::synth::{
    self, ANCHOR_MARGIN, GAMMA_TOTAL, GenConfig, GammaPhase2, PAIR_MARGIN, Variant, generate, split,
};
use proptest::prelude::*;

fn small(variant: Variant, seed: u64, n: usize) -> GenConfig {
    GenConfig {
        d1: 10,
        d2: 7,
        d: 5,
        n,
        ..GenConfig::new(variant, seed)
    }
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Alpha), Just(Variant::Beta), Just(Variant::Gamma)]
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(24) })]

    #[test]
    fn generation_is_deterministic_and_valid(v in variant(), seed in any::<u64>(), n in 1usize..400) {
        let cfg = small(v, seed, n);
        let (a, stats) = generate(&cfg).unwrap();
        let (b, again) = generate(&cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&stats, &again);
        a.validate().unwrap();
        prop_assert_eq!(a.len(), cfg.effective_n());
        prop_assert!(stats.max_norm_error < 1e-9);
        let threshold = if v == Variant::Beta { PAIR_MARGIN } else { ANCHOR_MARGIN };
        prop_assert!(stats.min_accepted_margin >= threshold);
        if v == Variant::Gamma {
            prop_assert_eq!(a.class_counts(), vec![2500, 2500, 2500]);
        }
    }

    #[test]
    fn save_load_roundtrip(v in variant(), seed in any::<u64>(), frac in 0.1f64..0.9) {
        let cfg = small(v, seed, 60);
        let (ds, _) = generate(&cfg).unwrap();
        let sp = split(ds.len(), frac, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.bin");
        synth::save(&ds, &sp, &p).unwrap();
        let (back, back_sp) = synth::load(&p).unwrap();
        prop_assert_eq!(back, ds);
        prop_assert_eq!(back_sp.n, sp.n);
        prop_assert_eq!(back_sp.test_indices, sp.test_indices);
    }
}

#[test]
fn literal_gamma_fills_the_paired_phase() {
    let cfg = GenConfig {
        gamma_phase2: GammaPhase2::Literal,
        ..small(Variant::Gamma, 9, 10)
    };
    let (ds, stats) = generate(&cfg).unwrap();
    let counts = ds.class_counts();
    assert_eq!(ds.len(), GAMMA_TOTAL);
    assert_eq!(counts[0], 2500);
    assert_eq!(stats.discarded_by_quota, 0);
}

#[test]
fn different_seeds_give_different_data() {
    let (a, _) = generate(&small(Variant::Beta, 1, 50)).unwrap();
    let (b, _) = generate(&small(Variant::Beta, 2, 50)).unwrap();
    assert_ne!(a.x1, b.x1);
}
