mod common;

use common::gradcheck::{oracle_encode, smooth_case, Kind, STEP};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsd_core::encoder::{EncoderModel, TokenId, Vocabulary};

const TOLERANCE: f64 = 1e-4;

fn random_model(seed: u64, dim: usize, projection: bool) -> EncoderModel {
    let words: Vec<String> = (0..20).map(|i| format!("t{i}")).collect();
    let vocab = Vocabulary::build(words.iter().map(String::as_str), 1);
    EncoderModel::new(vocab, dim, projection, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Linear probe `L = g·encode(ids)`, checked on every parameter.
    #[test]
    fn encoder_backward_matches_finite_differences(
        seed in any::<u64>(),
        dim in prop::sample::select(vec![4usize, 16, 64]),
        projection in any::<bool>(),
        len in 1usize..=16,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = random_model(seed, dim, projection);
        if let Some(p) = &mut model.projection {
            p.bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        }
        let ids: Vec<TokenId> = (0..len).map(|_| rng.gen_range(0..model.vocab().len() as TokenId)).collect();
        let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe = |m: &EncoderModel| oracle_encode(m, &ids).iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();

        let mut grads = model.zero_gradients();
        grads.add(dim, &model.encode_backward(&ids, &g).unwrap());
        let mut m = model.clone();
        let (mut diff, mut na, mut nn) = (0.0f64, 0.0f64, 0.0f64);
        let mut check = |analytic: f64, numeric: f64| {
            diff += (analytic - numeric).powi(2);
            na += analytic * analytic;
            nn += numeric * numeric;
        };
        for i in 0..m.embeddings.len() {
            let orig = m.embeddings[i];
            m.embeddings[i] = orig + STEP;
            let plus = probe(&m);
            m.embeddings[i] = orig - STEP;
            let minus = probe(&m);
            m.embeddings[i] = orig;
            check(grads.embeddings[i], (plus - minus) / (2.0 * STEP));
        }
        if m.projection.is_some() {
            let n = dim * dim;
            for i in (0..n).step_by((n / 64).max(1)) {
                let orig = m.projection.as_ref().unwrap().weight[i];
                m.projection.as_mut().unwrap().weight[i] = orig + STEP;
                let plus = probe(&m);
                m.projection.as_mut().unwrap().weight[i] = orig - STEP;
                let minus = probe(&m);
                m.projection.as_mut().unwrap().weight[i] = orig;
                check(grads.weight.as_ref().unwrap()[i], (plus - minus) / (2.0 * STEP));
            }
            for i in 0..dim {
                let orig = m.projection.as_ref().unwrap().bias[i];
                m.projection.as_mut().unwrap().bias[i] = orig + STEP;
                let plus = probe(&m);
                m.projection.as_mut().unwrap().bias[i] = orig - STEP;
                let minus = probe(&m);
                m.projection.as_mut().unwrap().bias[i] = orig;
                check(grads.bias.as_ref().unwrap()[i], (plus - minus) / (2.0 * STEP));
            }
        }
        let rel = diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-8);
        prop_assert!(rel < TOLERANCE, "relative error {rel}");
    }

    #[test]
    fn untouched_rows_get_no_gradient(seed in any::<u64>(), len in 1usize..=8) {
        let model = random_model(seed, 4, true);
        let ids: Vec<TokenId> = (0..len as TokenId).map(|i| 4 + i % 3).collect();
        let grad = model.encode_backward(&ids, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        for (id, _) in &grad.rows {
            prop_assert!(ids.contains(id));
        }
    }

    #[test]
    fn encode_is_order_invariant(seed in any::<u64>(), mut ids in prop::collection::vec(0u32..20, 1..16)) {
        let model = random_model(seed, 16, true);
        let a = model.encode(&ids).unwrap();
        ids.reverse();
        let b = model.encode(&ids).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

macro_rules! loss_gradient_property {
    ($name:ident, $kind:expr) => {
        proptest! {
            #![proptest_config(ProptestConfig::with_cases(30))]
            #[test]
            fn $name(seed in any::<u64>()) {
                let (used, case) = smooth_case($kind, seed);
                let rel = case.relative_error(used);
                prop_assert!(rel < TOLERANCE, "seed {used}: relative error {rel}");
            }
        }
    };
}

loss_gradient_property!(cosine_loss_gradients, Kind::Cosine);
loss_gradient_property!(contrastive_loss_gradients, Kind::Contrastive);
loss_gradient_property!(online_contrastive_loss_gradients, Kind::Online);
loss_gradient_property!(triplet_loss_gradients, Kind::Triplet);
