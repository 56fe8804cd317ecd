mod common;

use compgen::curation::Label;
use compgen::index::IndexBuilder;
use compgen::simulation::{
    composed_success_probability, generate_corpus, simulate_outcomes, SimulationSpec, SuccessModel, TestSetSpec,
    ZipfSampler,
};
use compgen::{ConceptId, ConceptSet};
use rand::Rng;

use common::spearman;

fn spec(v: usize, n: usize, s: f64) -> SimulationSpec {
    SimulationSpec {
        vocab_size: v,
        n_samples: n,
        zipf_s: s,
        objects_per_sample: (1, 1),
        seed: 17,
        per_object_success: SuccessModel { a: -4.0, b: 1.0 },
        test: TestSetSpec::default(),
    }
}

#[test]
fn rank_frequency_follows_zipf() {
    let sp = spec(10, 1000, 1.0);
    let mut counts = vec![0f64; 10];
    for rec in generate_corpus(&sp) {
        for c in rec.concepts.iter() {
            counts[c.index()] += 1.0;
        }
    }
    let ideal: Vec<f64> = (1..=10).map(|r| 1.0 / r as f64).collect();
    let rho = spearman(&counts, &ideal);
    assert!(rho >= 0.9, "rho = {rho}, counts {counts:?}");
}

#[test]
fn sampler_probabilities_are_normalized() {
    let z = ZipfSampler::new(50, 1.3);
    let total: f64 = (0..50).map(|i| z.probability(i)).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!((z.probability(0) / z.probability(1) - 2f64.powf(1.3)).abs() < 1e-9);
    let mut r = common::rng(3);
    for k in 1..=50 {
        let mut d = z.sample_distinct(&mut r, k);
        assert_eq!(d.len(), k);
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), k);
    }
}

#[test]
fn empirical_success_matches_mean_probability() {
    // Concept i appears in i + 1 of 60 samples.
    let v = 60;
    let mut b = IndexBuilder::new(v);
    for s in 0..v {
        let ids: Vec<ConceptId> = (s..v).map(|c| ConceptId(c as u32)).collect();
        b.add(&format!("s{s}"), &ids).unwrap();
    }
    let index = b.finish();
    let model = SuccessModel { a: -1.0, b: 1.0 };
    let sp = SimulationSpec {
        per_object_success: model,
        ..spec(v, 0, 1.0)
    };
    let mut r = common::rng(8);
    let pairs: Vec<(String, Label, ConceptSet)> = (0..100_000)
        .map(|i| {
            let a = r.gen_range(0..v as u32);
            let mut c = r.gen_range(0..v as u32 - 1);
            if c >= a {
                c += 1;
            }
            (format!("p{i}"), Label::Novel, [ConceptId(a), ConceptId(c)].into_iter().collect())
        })
        .collect();
    let mean_p = pairs
        .iter()
        .map(|(_, _, c)| composed_success_probability(c.as_slice(), &index, model).unwrap())
        .sum::<f64>()
        / pairs.len() as f64;
    let outcomes = simulate_outcomes(&sp, &pairs, &index).unwrap();
    let rate = outcomes.iter().filter(|o| o.y10).count() as f64 / outcomes.len() as f64;
    assert!((rate - mean_p).abs() <= 0.02, "rate {rate}, mean probability {mean_p}");
}

#[test]
fn composition_is_bounded_by_rarest_object() {
    let mut b = IndexBuilder::new(3);
    for s in 0..1000 {
        let mut ids = vec![ConceptId(0)];
        if s < 100 {
            ids.push(ConceptId(1));
        }
        if s < 3 {
            ids.push(ConceptId(2));
        }
        b.add(&format!("s{s}"), &ids).unwrap();
    }
    let index = b.finish();
    let model = SuccessModel { a: -4.0, b: 1.0 };
    let ids = [ConceptId(0), ConceptId(1), ConceptId(2)];
    let p = composed_success_probability(&ids, &index, model).unwrap();
    let rare = model.per_object(3);
    assert!(p <= rare);
    let single = composed_success_probability(&ids[1..2], &index, model).unwrap();
    assert_eq!(single, model.per_object(100));
    let pair = composed_success_probability(&ids[..2], &index, SuccessModel { a: -3.0, b: 1.0 }).unwrap();
    assert!((pair - 0.5 * SuccessModel { a: -3.0, b: 1.0 }.per_object(100)).abs() < 1e-12);
}

#[test]
fn saturated_models() {
    let mut b = IndexBuilder::new(2);
    b.add("s", &[ConceptId(0), ConceptId(1)]).unwrap();
    let index = b.finish();
    let pairs = vec![("p".to_string(), Label::Known, [ConceptId(0), ConceptId(1)].into_iter().collect())];
    for (a, want) in [(50.0, true), (-50.0, false)] {
        let sp = SimulationSpec {
            per_object_success: SuccessModel { a, b: 1.0 },
            ..spec(2, 1, 1.0)
        };
        let out = simulate_outcomes(&sp, &pairs, &index).unwrap();
        assert_eq!(out[0].y10, want);
    }
}
