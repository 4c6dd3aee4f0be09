//! The values opened for a challenge look the same whether they come from
//! the honest prover or from a witness-free simulator that knew the
//! challenge in advance.

use std::collections::HashMap;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use relzk::coding::gen_yes_instance;
use relzk::fq::FieldParams;
use relzk::seed::SessionSeed;
use relzk::stern::{
    cheating_preprocess, p1_respond, p2_respond, prover_preprocess, verifier_check, Challenge, Phase1Message,
};

type Cell = (BigUint, BigUint);

/// Two-sample chi-square statistic and its degrees of freedom.
fn homogeneity(a: &HashMap<Cell, u64>, b: &HashMap<Cell, u64>) -> (f64, f64) {
    let mut keys: Vec<&Cell> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let stat = keys
        .iter()
        .map(|k| {
            let (x, y) = (*a.get(*k).unwrap_or(&0) as f64, *b.get(*k).unwrap_or(&0) as f64);
            (x - y).powi(2) / (x + y)
        })
        .sum();
    (stat, keys.len() as f64 - 1.0)
}

#[test]
fn openings_are_simulatable() {
    let (n, k, w) = (4, 2, 1);
    let (inst, wit) = gen_yes_instance(n, k, w, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    let field = FieldParams::mersenne_for_code(61, n).unwrap();
    let honest_seed = SessionSeed::from_u64(2);
    let sim_seed = SessionSeed::from_u64(3);
    let b = Phase1Message {
        b: [1u64, 2, 3].map(|x| relzk::fq::FieldElement::from_u64(&field, x)),
    };
    let samples = 60_000u32;
    for c in Challenge::ALL {
        let (mut honest, mut simulated) = (HashMap::new(), HashMap::new());
        for round in 1..=samples {
            let real = prover_preprocess(&inst, &wit, &field, &honest_seed, round).unwrap();
            // the simulator prepares a state that loses some other challenge
            let fake = cheating_preprocess(&inst, c.next(), &field, &sim_seed, round).unwrap();
            for (st, counts) in [(&real, &mut honest), (&fake, &mut simulated)] {
                let az = p2_respond(st, c);
                let y = p1_respond(st, &b).unwrap();
                assert!(verifier_check(&inst, &b, &y, c, &az).accepted);
                let [o1, o2] = &az.openings;
                *counts.entry((o1.z.value().clone(), o2.z.value().clone())).or_insert(0u64) += 1;
            }
        }
        let (stat, df) = homogeneity(&honest, &simulated);
        let threshold = ChiSquared::new(df).unwrap().inverse_cdf(0.999);
        assert!(stat < threshold, "challenge {}: chi-square {stat:.1} >= {threshold:.1} on {df} df", c.index());
    }
}
