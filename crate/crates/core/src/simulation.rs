//! Closed-world oracle: Zipfian synthetic corpora and a multiplicative
//! retrieval-success model.
//!
//! Each pretraining sample draws a handful of distinct concepts from a
//! Zipf law over concept ranks. A test sample succeeds with probability
//! `∏_o σ(a + b · log10 f(o))`, i.e. retrieval succeeds only if every object
//! in the query is independently handled correctly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curation::{curate, CuratedTestSet, Label, ManifestEntry, Modality, TestSample};
use crate::error::SimulationError;
use crate::index::ConceptIndex;
use crate::ingest::{ConceptExtractor, CorpusRecord, SampleRecord};
use crate::lemma::Lemmatizer;
use crate::outcome::EvalOutcome;
use crate::predictor::{sample_frequency, sigmoid};
use crate::vocab::{ConceptId, ConceptSet, ConceptVocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessModel {
    pub a: f64,
    pub b: f64,
}

impl SuccessModel {
    /// `σ(a + b · log10 f)` for one object.
    pub fn per_object(&self, frequency: u64) -> f64 {
        sigmoid(self.a + self.b * (frequency as f64).log10())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSetSpec {
    pub n_samples: usize,
    pub objects_per_sample: (usize, usize),
}

impl Default for TestSetSpec {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            objects_per_sample: (2, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub vocab_size: usize,
    pub n_samples: usize,
    pub zipf_s: f64,
    pub objects_per_sample: (usize, usize),
    pub seed: u64,
    pub per_object_success: SuccessModel,
    #[serde(default)]
    pub test: TestSetSpec,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: &str| Err(SimulationError::InvalidSpec(m.to_string()));
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2");
        }
        if !(self.zipf_s > 0.0 && self.zipf_s.is_finite()) {
            return bad("zipf_s must be positive");
        }
        for (name, (lo, hi)) in [
            ("objects_per_sample", self.objects_per_sample),
            ("test.objects_per_sample", self.test.objects_per_sample),
        ] {
            if lo < 1 || hi < lo {
                return Err(SimulationError::InvalidSpec(format!("{name} must satisfy 1 <= min <= max")));
            }
            if hi > self.vocab_size {
                return Err(SimulationError::InvalidSpec(format!("{name} max exceeds vocab_size")));
            }
        }
        if !(self.per_object_success.a.is_finite() && self.per_object_success.b.is_finite()) {
            return bad("per_object_success coefficients must be finite");
        }
        Ok(())
    }

    /// Synthetic lemmas `c0, c1, ...`, ordered by Zipf rank.
    pub fn vocabulary(&self) -> ConceptVocabulary {
        ConceptVocabulary::new((0..self.vocab_size).map(concept_lemma)).expect("synthetic lemmas are valid")
    }
}

pub fn concept_lemma(id: usize) -> String {
    format!("c{id}")
}

const CORPUS_DOMAIN: u64 = 1;
const TEST_DOMAIN: u64 = 2;
const OUTCOME_DOMAIN: u64 = 3;

/// Independent generator for item `index` of a stream.
pub fn item_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut z = seed ^ domain.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = splitmix(z ^ splitmix(index));
    ChaCha8Rng::seed_from_u64(z)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Inverse-CDF sampler for `p(r) ∝ r^(-s)` over ranks `1..=n`, returned as
/// 0-based indices.
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    weights: Vec<f64>,
    cdf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(n: usize, s: f64) -> Self {
        let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-s)).collect();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self { weights, cdf }
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.weights[index] / self.total()
    }

    fn total(&self) -> f64 {
        *self.cdf.last().expect("non-empty")
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u = rng.gen::<f64>() * self.total();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }

    /// `k` distinct indices by successive sampling without replacement.
    pub fn sample_distinct<R: Rng>(&self, rng: &mut R, k: usize) -> Vec<usize> {
        let k = k.min(self.weights.len());
        let mut chosen: Vec<usize> = Vec::with_capacity(k);
        while chosen.len() < k {
            let mut pick = None;
            for _ in 0..64 {
                let i = self.sample(rng);
                if !chosen.contains(&i) {
                    pick = Some(i);
                    break;
                }
            }
            let i = pick.unwrap_or_else(|| {
                // Exact draw from the remaining mass.
                let remaining: f64 = self.total() - chosen.iter().map(|&c| self.weights[c]).sum::<f64>();
                let mut u = rng.gen::<f64>() * remaining;
                let mut last = 0;
                for (j, &w) in self.weights.iter().enumerate() {
                    if chosen.contains(&j) {
                        continue;
                    }
                    last = j;
                    if u < w {
                        return j;
                    }
                    u -= w;
                }
                last
            });
            chosen.push(i);
        }
        chosen
    }
}

/// The synthetic pretraining corpus. Captions are the space-joined concept
/// lemmas and tags equal the concept set, so ingestion reconstructs the
/// drawn sets exactly.
pub fn generate_corpus(spec: &SimulationSpec) -> impl Iterator<Item = SampleRecord> + '_ {
    let zipf = ZipfSampler::new(spec.vocab_size, spec.zipf_s);
    let (lo, hi) = spec.objects_per_sample;
    (0..spec.n_samples).map(move |i| {
        let mut rng = item_rng(spec.seed, CORPUS_DOMAIN, i as u64);
        let k = rng.gen_range(lo..=hi);
        let drawn = zipf.sample_distinct(&mut rng, k);
        let lemmas: Vec<String> = drawn.iter().map(|&c| concept_lemma(c)).collect();
        SampleRecord {
            sample_id: format!("s{i}"),
            caption: lemmas.join(" "),
            image_tags: lemmas,
            concepts: drawn.into_iter().map(|c| ConceptId(c as u32)).collect(),
        }
    })
}

impl From<&SampleRecord> for CorpusRecord {
    fn from(r: &SampleRecord) -> Self {
        CorpusRecord {
            id: r.sample_id.clone(),
            caption: r.caption.clone(),
            tags: r.image_tags.clone(),
        }
    }
}

/// Caption-query test samples whose concepts are drawn uniformly without
/// replacement. Sample `i` queries row `i` with ground truth row `i`.
pub fn generate_test_manifest(spec: &SimulationSpec) -> Vec<ManifestEntry> {
    let (lo, hi) = spec.test.objects_per_sample;
    (0..spec.test.n_samples)
        .map(|i| {
            let mut rng = item_rng(spec.seed, TEST_DOMAIN, i as u64);
            let k = rng.gen_range(lo..=hi);
            let drawn = rand::seq::index::sample(&mut rng, spec.vocab_size, k).into_vec();
            let caption = drawn.iter().map(|&c| concept_lemma(c)).collect::<Vec<_>>().join(" ");
            ManifestEntry {
                test_id: format!("t{i}"),
                modality: Modality::CaptionQuery,
                caption: Some(caption),
                tags: None,
                payload_row: i,
                gt_rows: vec![i],
            }
        })
        .collect()
}

/// `∏_o σ(a + b · log10 f(o))` over the given concepts.
pub fn composed_success_probability(
    concepts: &[ConceptId],
    index: &ConceptIndex,
    model: SuccessModel,
) -> Result<f64, SimulationError> {
    let mut p = 1.0;
    for &c in concepts {
        let f = index.frequency(c)?;
        if f == 0 {
            return Err(SimulationError::ZeroFrequency { concept: c.0 });
        }
        p *= model.per_object(f);
    }
    Ok(p)
}

/// Draws `y ~ Bernoulli(composed probability)` for each sample, seeded by
/// its position. Samples must only contain concepts seen in `index`.
pub fn simulate_outcomes(
    spec: &SimulationSpec,
    samples: &[(String, Label, ConceptSet)],
    index: &ConceptIndex,
) -> Result<Vec<EvalOutcome>, SimulationError> {
    samples
        .iter()
        .enumerate()
        .map(|(i, (test_id, label, concepts))| {
            let p = composed_success_probability(concepts.as_slice(), index, spec.per_object_success)?;
            let mut rng = item_rng(spec.seed, OUTCOME_DOMAIN, i as u64);
            let y = rng.gen::<f64>() < p;
            let freqs = concepts
                .iter()
                .map(|c| index.frequency(c))
                .collect::<Result<Vec<_>, _>>()?;
            let f_avg = sample_frequency(&freqs).map_err(|_| SimulationError::ZeroFrequency {
                concept: concepts.as_slice().first().map_or(0, |c| c.0),
            })?;
            let f_cap = index.cooccurrence_frequency(concepts.as_slice())?;
            Ok(EvalOutcome::from_success(test_id.clone(), *label, y, f_avg, f_cap))
        })
        .collect()
}

/// Everything one simulated run produces.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub vocab: ConceptVocabulary,
    pub corpus: Vec<SampleRecord>,
    pub index: ConceptIndex,
    pub manifest: Vec<ManifestEntry>,
    pub curated: CuratedTestSet,
    pub outcomes: Vec<EvalOutcome>,
}

/// Generates corpus and test set, curates, and simulates outcomes for every
/// non-excluded test sample.
pub fn run_simulation(spec: &SimulationSpec) -> Result<SimulationRun, SimulationError> {
    spec.validate()?;
    let vocab = spec.vocabulary();
    let corpus: Vec<SampleRecord> = generate_corpus(spec).collect();
    let mut builder = crate::index::IndexBuilder::new(spec.vocab_size);
    for rec in &corpus {
        builder.add(&rec.sample_id, rec.concepts.as_slice())?;
    }
    let index = builder.finish();
    let manifest = generate_test_manifest(spec);
    let extractor = ConceptExtractor::new(vocab.clone(), Lemmatizer::default())
        .map_err(|e| SimulationError::InvalidSpec(e.to_string()))?;
    let samples = manifest
        .iter()
        .map(|e| TestSample::from_manifest(e, &extractor).map_err(SimulationError::InvalidSpec))
        .collect::<Result<Vec<_>, _>>()?;
    let curated = curate(&samples, &index)?;
    let scored: Vec<(String, Label, ConceptSet)> = curated
        .samples
        .iter()
        .filter(|s| s.label() != Label::Excluded)
        .map(|s| (s.sample.test_id.clone(), s.label(), s.sample.concepts.clone()))
        .collect();
    let outcomes = simulate_outcomes(spec, &scored, &index)?;
    Ok(SimulationRun {
        vocab,
        corpus,
        index,
        manifest,
        curated,
        outcomes,
    })
}
