//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p compgen --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use compgen::curation::{self, Label};
use compgen::embedding::EmbeddingMatrix;
use compgen::error::{IndexError, RetrievalError};
use compgen::outcome::{write_outcomes, EvalOutcome};
use compgen::predictor::{binned_recall, filter_and_fit, fit_logistic, geometric_mean, FitConfig, IqrConfig, LogisticFit};
use compgen::report::{self, ReportConfig};
use compgen::retrieval::{evaluate, rank_of_best_gt, GalleryScope, ScoringItem};
use compgen::simulation::{run_simulation, SimulationSpec, SuccessModel, TestSetSpec};
use compgen::{ConceptExtractor, ConceptId, ConceptIndex, ConceptVocabulary, Lemmatizer, TestSample};
use rand::seq::SliceRandom;
use rand::Rng;

use common::*;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

fn cooccurrence_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng(20);
    let mut queries = 0;
    for corpus_no in 0..20 {
        let n = r.gen_range(1..=1000);
        let v = r.gen_range(1..=50);
        let corpus = random_corpus(&mut r, n, v, 8);
        let index = build_index(&corpus, v);
        let ids: Vec<u32> = (0..v as u32).collect();
        for _ in 0..1000 {
            let size = r.gen_range(1..=4usize).min(v);
            let q: Vec<u32> = ids.choose_multiple(&mut r, size).copied().collect();
            let got = index
                .cooccurrence_frequency(&q.iter().map(|&c| ConceptId(c)).collect::<Vec<_>>())
                .map_err(|e| e.to_string())?;
            let want = scan_count(&corpus, &q);
            ensure(got == want, || format!("corpus {corpus_no}, query {q:?}: index {got}, scan {want}"))?;
            queries += 1;
        }
    }
    let took = within(Duration::from_secs(10), start)?;
    Ok(format!("{queries} queries over 20 corpora exact in {took:.2?}"))
}

/// The mini corpus `{d1: dog frisbee, d2: dog, d3: cat sofa}` and test
/// samples `{dog, frisbee}`, `{cat, frisbee}`, `{dog, zebra}`.
fn curation_fixture() -> Result<String, String> {
    let vocab = ConceptVocabulary::new(["dog", "frisbee", "cat", "sofa", "zebra"]).map_err(|e| e.to_string())?;
    let extractor = ConceptExtractor::new(vocab, Lemmatizer::default()).map_err(|e| e.to_string())?;
    let corpus = concat!(
        r#"{"id":"d1","caption":"A dog catches a frisbee.","tags":["dog","frisbee"]}"#,
        "\n",
        r#"{"id":"d2","caption":"Two dogs.","tags":["dogs"]}"#,
        "\n",
        r#"{"id":"d3","caption":"A cat on the sofa","tags":["cat","sofas"]}"#,
        "\n",
    );
    let (index, _) = compgen::ingest_corpus(corpus.as_bytes(), &extractor).map_err(|e| e.to_string())?;
    let manifest = concat!(
        r#"{"test_id":"x1","modality":"t2i","caption":"dogs with a frisbee","payload_row":0,"gt_rows":[0]}"#,
        "\n",
        r#"{"test_id":"x2","modality":"t2i","caption":"a cat and a frisbee","payload_row":1,"gt_rows":[1]}"#,
        "\n",
        r#"{"test_id":"x3","modality":"i2t","tags":["dog","zebras"],"payload_row":2,"gt_rows":[2]}"#,
        "\n",
    );
    let parsed = curation::read_manifest(manifest.as_bytes(), &extractor).map_err(|e| e.to_string())?;
    let samples: Vec<TestSample> = parsed.into_iter().map(|(_, s)| s).collect();
    let set = curation::curate(&samples, &index).map_err(|e| e.to_string())?;
    let labels: Vec<Label> = set.samples.iter().map(|s| s.label()).collect();
    ensure(labels == [Label::Known, Label::Novel, Label::Excluded], || {
        format!("labels {labels:?}")
    })?;
    let s = &set.summary;
    let total = s.percent_known + s.percent_novel + s.percent_excluded;
    ensure((total - 100.0).abs() < 1e-9, || format!("percentages sum to {total}"))?;
    Ok(format!("labels (known, novel, excluded); percentages sum to {total}"))
}

fn ranking_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng(7);
    let gallery: Vec<Vec<f32>> = (0..100).map(|_| unit_vector(&mut r, 16)).collect();
    let queries: Vec<Vec<f32>> = (0..100).map(|_| unit_vector(&mut r, 16)).collect();
    let g = EmbeddingMatrix::from_rows(&gallery).map_err(|e| e.to_string())?;
    for (qi, q) in queries.iter().enumerate() {
        let n_gt = r.gen_range(1..=3);
        let gt: Vec<usize> = (0..100).collect::<Vec<_>>().choose_multiple(&mut r, n_gt).copied().collect();
        let got = rank_of_best_gt(q, &g, &gt).map_err(|e| e.to_string())?;
        let want = full_sort_rank(q, &gallery, &gt);
        ensure(got == want, || format!("query {qi}: rank {got}, oracle {want}"))?;
    }
    // A gallery of duplicated rows exercises the tie rule.
    let tied: Vec<Vec<f32>> = (0..100).map(|i| gallery[i % 10].clone()).collect();
    let t = EmbeddingMatrix::from_rows(&tied).map_err(|e| e.to_string())?;
    for (qi, q) in queries.iter().enumerate() {
        let gt = [qi, (qi * 37) % 100];
        let got = rank_of_best_gt(q, &t, &gt).map_err(|e| e.to_string())?;
        let want = full_sort_rank(q, &tied, &gt);
        ensure(got == want, || format!("tied query {qi}: rank {got}, oracle {want}"))?;
    }
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!("200 queries x 100 gallery x 16 dims exact in {took:.2?}"))
}

fn rel_close(a: f64, b: f64) -> bool {
    (a.ln() - b.ln()).abs() <= 1e-12 * b.ln().abs().max(1.0)
}

fn geometric_mean_properties() -> Result<String, String> {
    let mut r = rng(2);
    let trials = 10_000;
    let gm = |v: &[f64]| geometric_mean(v).map_err(|e| e.to_string());
    for t in 0..trials {
        let n = r.gen_range(1..=8);
        let v: Vec<f64> = (0..n).map(|_| 10f64.powf(r.gen_range(0.0..7.0))).collect();
        let base = gm(&v)?;
        let mut p = v.clone();
        p.shuffle(&mut r);
        let permuted = gm(&p)?;
        ensure(rel_close(permuted, base), || format!("trial {t}: permutation {permuted} vs {base}"))?;
        let c = 10f64.powf(r.gen_range(-3.0..3.0));
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        let s = gm(&scaled)?;
        ensure(rel_close(s, c * base), || format!("trial {t}: scale {s} vs {}", c * base))?;
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(0.0, f64::max);
        ensure(base >= lo * (1.0 - 1e-12) && base <= hi * (1.0 + 1e-12), || {
            format!("trial {t}: {base} outside [{lo}, {hi}]")
        })?;
        let f = 10f64.powf(r.gen_range(0.0..7.0));
        let same = gm(&vec![f; n])?;
        ensure(rel_close(same, f), || format!("trial {t}: idempotence {same} vs {f}"))?;
    }
    Ok(format!("{trials} trials each for permutation, scale, bounds, idempotence"))
}

fn logistic_recovery() -> Result<String, String> {
    let mut r = rng(42);
    let mut data = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let x: f64 = r.gen_range(1.0..5.0);
        let p = 1.0 / (1.0 + (-(-8.0 + 2.0 * x)).exp());
        data.push((r.gen::<f64>() < p, 10f64.powf(x)));
    }
    let xs: Vec<f64> = data.iter().map(|&(_, f)| f.log10()).collect();
    let ys: Vec<bool> = data.iter().map(|&(y, _)| y).collect();
    let (rb0, rb1) = reference_logistic(&xs, &ys);
    let start = Instant::now();
    let cfg = FitConfig {
        bootstrap: 1000,
        seed: 42,
        ..FitConfig::default()
    };
    let fit = fit_logistic(&data, &cfg).map_err(|e| e.to_string())?;
    ensure((fit.beta0 - rb0).abs() <= 0.15 && (fit.beta1 - rb1).abs() <= 0.15, || {
        format!("fit ({}, {}) vs reference ({rb0}, {rb1})", fit.beta0, fit.beta1)
    })?;
    ensure(fit.p_value < 0.01, || format!("p = {}", fit.p_value))?;
    ensure(fit.bootstrap_betas.len() == 1000, || "bootstrap count".into())?;
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!(
        "beta ({:.4}, {:.4}) vs reference ({rb0:.4}, {rb1:.4}), p = {:.2e}, B=1000 in {took:.2?}",
        fit.beta0, fit.beta1, fit.p_value
    ))
}

fn closure_spec(seed: u64) -> SimulationSpec {
    SimulationSpec {
        vocab_size: 200,
        n_samples: 50_000,
        zipf_s: 1.1,
        objects_per_sample: (1, 4),
        seed,
        per_object_success: SuccessModel { a: -4.0, b: 1.0 },
        test: TestSetSpec {
            n_samples: 20_000,
            objects_per_sample: (2, 2),
        },
    }
}

/// Simulates, curates, fits each label and writes the report into `dir`.
fn pipeline(spec: &SimulationSpec, dir: &Path, bootstrap: usize) -> Result<BTreeMap<Label, LogisticFit>, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let run = run_simulation(spec).map_err(|e| err(&e))?;
    std::fs::create_dir_all(dir).map_err(|e| err(&e))?;
    let mut curated = Vec::new();
    curation::write_curated(&mut curated, &run.manifest, &run.curated).map_err(|e| err(&e))?;
    std::fs::write(dir.join("curated.jsonl"), &curated).map_err(|e| err(&e))?;
    let mut csv = Vec::new();
    write_outcomes(&mut csv, &run.outcomes).map_err(|e| err(&e))?;
    std::fs::write(dir.join("outcomes.csv"), &csv).map_err(|e| err(&e))?;

    let cfg = FitConfig {
        bootstrap,
        seed: spec.seed,
        ..FitConfig::default()
    };
    let mut fits = BTreeMap::new();
    for label in [Label::Known, Label::Novel] {
        let data: Vec<(bool, f64)> = run
            .outcomes
            .iter()
            .filter(|o| o.label == label)
            .map(|o| (o.y10, o.f_avg))
            .collect();
        if data.len() >= 4 {
            let f = filter_and_fit(&data, IqrConfig::default(), &cfg).map_err(|e| err(&e))?;
            fits.insert(label, f.fit);
        }
    }
    let rcfg = ReportConfig::default();
    report::emit_report(&run.curated.summary, &run.outcomes, &fits, dir, &rcfg).map_err(|e| err(&e))?;
    Ok(fits)
}

/// The success model ignores labels, so the trend is checked over every
/// scored pair; the novel-combination fit must be significant on its own.
fn simulation_closure() -> Result<String, String> {
    let start = Instant::now();
    let spec = closure_spec(11);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fits = pipeline(&spec, dir.path(), 1000)?;
    let novel = fits.get(&Label::Novel).ok_or("no novel fit")?;
    ensure(novel.beta1 > 0.0, || format!("novel beta1 = {}", novel.beta1))?;
    ensure(novel.p_value < 0.01, || format!("novel p = {}", novel.p_value))?;
    for name in ["histogram.csv", "binned_recall.csv", "regression.csv", "report_novel.svg"] {
        ensure(dir.path().join(name).exists(), || format!("{name} not written"))?;
    }

    let csv = std::fs::read(dir.path().join("outcomes.csv")).map_err(|e| e.to_string())?;
    let outcomes = compgen::outcome::read_outcomes(&csv[..]).map_err(|e| e.to_string())?;
    let pairs: Vec<(bool, f64)> = outcomes.iter().map(|o| (o.y10, o.f_avg)).collect();
    let cfg = FitConfig {
        bootstrap: 1000,
        seed: spec.seed,
        ..FitConfig::default()
    };
    let pooled = filter_and_fit(&pairs, IqrConfig::default(), &cfg).map_err(|e| e.to_string())?;
    ensure(pooled.fit.beta1 > 0.0, || format!("beta1 = {}", pooled.fit.beta1))?;
    ensure(pooled.fit.p_value < 0.01, || format!("p = {}", pooled.fit.p_value))?;
    let kept: Vec<(bool, f64)> = pairs
        .iter()
        .zip(&pooled.keep_mask)
        .filter(|(_, &k)| k)
        .map(|(&p, _)| p)
        .collect();
    let bins = binned_recall(&kept, 10).map_err(|e| e.to_string())?;
    let (centers, recalls): (Vec<f64>, Vec<f64>) = bins
        .iter()
        .filter_map(|b| b.mean_recall.map(|m| (b.center_log10, m)))
        .unzip();
    let rho = spearman(&centers, &recalls);
    ensure(rho > 0.95, || format!("Spearman rho = {rho} over {} bins: {recalls:?}", centers.len()))?;
    let took = within(Duration::from_secs(120), start)?;
    Ok(format!(
        "{} pairs: beta1 = {:.3}, p = {:.2e}, rho = {rho:.3}; novel beta1 = {:.3}, p = {:.2e}; {took:.2?}",
        pairs.len(),
        pooled.fit.beta1,
        pooled.fit.p_value,
        novel.beta1,
        novel.p_value
    ))
}

fn persistence() -> Result<String, String> {
    let mut r = rng(99);
    for i in 0..10 {
        let n = r.gen_range(1..=500);
        let v = r.gen_range(1..=40);
        let index = build_index(&random_corpus(&mut r, n, v, 6), v);
        let bytes = index.to_bytes();
        let back = ConceptIndex::from_bytes(&bytes).map_err(|e| e.to_string())?;
        ensure(back.to_bytes() == bytes && back == index, || format!("index {i} round trip"))?;

        let rows = r.gen_range(1..=50);
        let dim = r.gen_range(1..=32);
        let m = EmbeddingMatrix::from_rows(&(0..rows).map(|_| unit_vector(&mut r, dim)).collect::<Vec<_>>())
            .map_err(|e| e.to_string())?;
        let eb = m.to_bytes();
        let mb = EmbeddingMatrix::from_bytes(&eb).map_err(|e| e.to_string())?;
        ensure(mb.to_bytes() == eb, || format!("embedding {i} round trip"))?;

        let mut bad = bytes.clone();
        bad[r.gen_range(0..4)] ^= 0x20;
        ensure(matches!(ConceptIndex::from_bytes(&bad), Err(IndexError::BadMagic { offset: 0 })), || {
            format!("index {i}: corrupted magic")
        })?;
        let cut = r.gen_range(4..bytes.len());
        ensure(
            matches!(ConceptIndex::from_bytes(&bytes[..cut]), Err(IndexError::Truncated { .. })),
            || format!("index {i}: truncation at {cut}"),
        )?;
        let mut bad = eb.clone();
        bad[r.gen_range(0..4)] ^= 0x20;
        ensure(
            matches!(EmbeddingMatrix::from_bytes(&bad), Err(RetrievalError::BadMagic { offset: 0 })),
            || format!("embedding {i}: corrupted magic"),
        )?;
        let cut = r.gen_range(4..eb.len());
        ensure(
            matches!(EmbeddingMatrix::from_bytes(&eb[..cut]), Err(RetrievalError::Truncated { .. })),
            || format!("embedding {i}: truncation at {cut}"),
        )?;
    }
    Ok("10 index + 10 embedding instances byte-identical; magic and truncation rejected".into())
}

/// Curation, embedding retrieval, fit and report, written to `dir`.
fn full_run(dir: &Path) -> Result<(), String> {
    let spec = SimulationSpec {
        vocab_size: 60,
        n_samples: 5000,
        zipf_s: 1.0,
        objects_per_sample: (1, 3),
        seed: 5,
        per_object_success: SuccessModel { a: -3.0, b: 1.0 },
        test: TestSetSpec {
            n_samples: 400,
            objects_per_sample: (2, 3),
        },
    };
    pipeline(&spec, dir, 200)?;
    let run = run_simulation(&spec).map_err(|e| e.to_string())?;
    let (queries, gallery) = paired_embeddings(5, run.manifest.len(), 16, 0.6);
    let items: Vec<ScoringItem> = run.curated.samples.iter().map(ScoringItem::from).collect();
    let outcomes: Vec<EvalOutcome> =
        evaluate(&items, &queries, &gallery, GalleryScope::Full).map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    write_outcomes(&mut csv, &outcomes).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("retrieval_outcomes.csv"), csv).map_err(|e| e.to_string())
}

fn determinism() -> Result<String, String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    full_run(a.path())?;
    full_run(b.path())?;
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv") || n.ends_with(".svg"))
        .collect();
    names.sort();
    ensure(names.len() >= 6, || format!("only {names:?} written"))?;
    for name in &names {
        let x = std::fs::read(a.path().join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.path().join(name)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} CSV/SVG files byte-identical across two runs", names.len()))
}

fn main() {
    let checks: [(&str, Check); 8] = [
        ("co-occurrence oracle equivalence", cooccurrence_oracle),
        ("curation of the mini-corpus fixture", curation_fixture),
        ("ranking oracle equivalence", ranking_oracle),
        ("geometric-mean frequency properties", geometric_mean_properties),
        ("logistic recovery against reference optimizer", logistic_recovery),
        ("end-to-end simulation closure", simulation_closure),
        ("index and embedding persistence", persistence),
        ("pipeline determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
