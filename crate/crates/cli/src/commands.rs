use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use compgen::curation::{self, CurationSummary, Label, ManifestEntry};
use compgen::ingest::{ingest_corpus, ConceptExtractor};
use compgen::outcome::{read_outcomes, recall_at_k, write_outcomes, EvalOutcome};
use compgen::predictor::{filter_and_fit, IqrConfig, LogisticFit};
use compgen::report::{self, ReportConfig};
use compgen::retrieval::{evaluate, ScoringItem};
use compgen::simulation::{run_simulation, SimulationSpec};
use compgen::{ConceptIndex, ConceptId, ConceptVocabulary, EmbeddingMatrix, Lemmatizer};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::{Cli, Command};

pub const INDEX_FILE: &str = "index.cgix";
pub const INGEST_STATS_FILE: &str = "ingest_stats.json";
pub const CURATED_FILE: &str = "curated.jsonl";
pub const SUMMARY_FILE: &str = "curation_summary.json";
pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const RECALL_FILE: &str = "recall.json";

pub fn fit_file(label: Label) -> String {
    format!("fit_{label}.json")
}

/// Marks a failure that is not the user's fault, reported with exit code 2.
#[derive(Debug)]
struct Internal(anyhow::Error);

impl fmt::Display for Internal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Internal {}

fn internal(e: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(Internal(e.into()))
}

pub fn is_internal(e: &anyhow::Error) -> bool {
    e.chain().any(|c| c.is::<Internal>())
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| anyhow!("missing required --{flag}"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(internal)
}

fn write_file(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, body)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(internal)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(internal)?;
    text.push('\n');
    write_file(path, text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Input digests and effective configuration for one command invocation.
#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    inputs: BTreeMap<String, String>,
}

impl<'a> RunManifest<'a> {
    fn new(command: &'a str, config: &'a RunConfig) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            inputs: BTreeMap::new(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    fn write(&self, out_dir: &Path) -> Result<()> {
        write_json(&out_dir.join(format!("run_{}.json", self.command)), self)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let base = match &cli.common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let cfg = base.apply(&cli.common.overrides())?;
    cfg.validate()?;
    log::debug!("effective configuration: {cfg:?}");
    match cli.command {
        Command::Ingest => ingest(&cfg),
        Command::Stats => stats(&cfg),
        Command::Curate => curate(&cfg),
        Command::Eval => eval(&cfg),
        Command::Fit => fit(&cfg),
        Command::Simulate => simulate(&cfg),
        Command::Report => report_cmd(&cfg),
    }
}

fn extractor(cfg: &RunConfig, manifest: &mut RunManifest) -> Result<ConceptExtractor> {
    let vocab_path = require(&cfg.paths.vocab, "vocab")?;
    manifest.input(vocab_path)?;
    let vocab = ConceptVocabulary::from_path(vocab_path)?;
    let lemmatizer = match &cfg.paths.exceptions {
        Some(path) => {
            manifest.input(path)?;
            Lemmatizer::from_path(path)?
        }
        None => Lemmatizer::default(),
    };
    Ok(ConceptExtractor::new(vocab, lemmatizer)?)
}

fn ingest(cfg: &RunConfig) -> Result<()> {
    let out = require(&cfg.paths.out, "out")?;
    let corpus = require(&cfg.paths.corpus, "corpus")?;
    let mut manifest = RunManifest::new("ingest", cfg);
    let extractor = extractor(cfg, &mut manifest)?;
    manifest.input(corpus)?;
    let (index, stats) = ingest_corpus(open(corpus)?, &extractor)?;
    create_dir(out)?;
    let index_path = cfg.paths.index.clone().unwrap_or_else(|| out.join(INDEX_FILE));
    index.save(&index_path).map_err(internal)?;
    write_json(&out.join(INGEST_STATS_FILE), &stats)?;
    manifest.write(out)?;
    eprintln!(
        "indexed {} records ({} malformed lines skipped) into {}",
        stats.records,
        stats.parse_errors,
        index_path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct ConceptStat {
    id: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    lemma: Option<String>,
    frequency: u64,
}

#[derive(Debug, Serialize)]
struct IndexStats {
    n_samples: usize,
    vocab_size: usize,
    total_postings: u64,
    unseen_concepts: usize,
    concepts: Vec<ConceptStat>,
}

fn stats(cfg: &RunConfig) -> Result<()> {
    let index_path = require(&cfg.paths.index, "index")?;
    let index = ConceptIndex::load(index_path)?;
    let vocab = cfg.paths.vocab.as_deref().map(ConceptVocabulary::from_path).transpose()?;
    if let Some(v) = &vocab {
        if v.len() != index.vocab_size() {
            bail!(
                "vocabulary has {} entries but the index was built over {}",
                v.len(),
                index.vocab_size()
            );
        }
    }
    let freqs = index.frequencies();
    let mut concepts: Vec<ConceptStat> = freqs
        .iter()
        .enumerate()
        .map(|(i, &frequency)| ConceptStat {
            id: i as u32,
            lemma: vocab
                .as_ref()
                .and_then(|v| v.lemma(ConceptId(i as u32)))
                .map(str::to_string),
            frequency,
        })
        .collect();
    concepts.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(a.id.cmp(&b.id)));
    let stats = IndexStats {
        n_samples: index.n_samples(),
        vocab_size: index.vocab_size(),
        total_postings: freqs.iter().sum(),
        unseen_concepts: freqs.iter().filter(|&&f| f == 0).count(),
        concepts,
    };
    let text = serde_json::to_string_pretty(&stats).map_err(internal)?;
    if let Some(out) = &cfg.paths.out {
        create_dir(out)?;
        write_file(&out.join("index_stats.json"), format!("{text}\n"))?;
    }
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(internal(e)),
        _ => Ok(()),
    }
}

fn curate(cfg: &RunConfig) -> Result<()> {
    let out = require(&cfg.paths.out, "out")?;
    let index_path = require(&cfg.paths.index, "index")?;
    let manifest_path = require(&cfg.paths.manifest, "manifest")?;
    let mut run = RunManifest::new("curate", cfg);
    let extractor = extractor(cfg, &mut run)?;
    run.input(index_path)?;
    run.input(manifest_path)?;
    let index = ConceptIndex::load(index_path)?;
    if index.vocab_size() != extractor.vocab().len() {
        bail!(
            "vocabulary has {} entries but the index was built over {}",
            extractor.vocab().len(),
            index.vocab_size()
        );
    }
    let parsed = curation::read_manifest(open(manifest_path)?, &extractor)?;
    let (entries, samples): (Vec<ManifestEntry>, Vec<_>) = parsed.into_iter().unzip();
    let curated = curation::curate(&samples, &index)?;
    create_dir(out)?;
    write_curated_files(out, &entries, &curated)?;
    run.write(out)?;
    print_summary(&curated.summary);
    Ok(())
}

fn write_curated_files(out: &Path, entries: &[ManifestEntry], curated: &curation::CuratedTestSet) -> Result<()> {
    let path = out.join(CURATED_FILE);
    let file = File::create(&path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(internal)?;
    curation::write_curated(BufWriter::new(file), entries, curated)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(internal)?;
    write_json(&out.join(SUMMARY_FILE), &curated.summary)
}

fn print_summary(s: &CurationSummary) {
    eprintln!(
        "{} samples: known {} ({:.2}%), novel {} ({:.2}%), excluded {} ({:.2}%)",
        s.total, s.known, s.percent_known, s.novel, s.percent_novel, s.excluded, s.percent_excluded
    );
}

fn write_outcomes_file(path: &Path, outcomes: &[EvalOutcome]) -> Result<()> {
    let file = File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(internal)?;
    write_outcomes(BufWriter::new(file), outcomes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(internal)
}

fn eval(cfg: &RunConfig) -> Result<()> {
    let out = require(&cfg.paths.out, "out")?;
    let curated_path = cfg.paths.manifest.clone().unwrap_or_else(|| out.join(CURATED_FILE));
    let queries_path = require(&cfg.paths.queries, "queries")?;
    let gallery_path = require(&cfg.paths.gallery, "gallery")?;
    let mut run = RunManifest::new("eval", cfg);
    for p in [curated_path.as_path(), queries_path, gallery_path] {
        run.input(p)?;
    }
    let records = curation::read_curated(open(&curated_path)?)?;
    let items: Vec<ScoringItem> = records.iter().map(ScoringItem::from).collect();
    let queries = EmbeddingMatrix::load(queries_path)?;
    let gallery = EmbeddingMatrix::load(gallery_path)?;
    let outcomes = evaluate(&items, &queries, &gallery, cfg.gallery_scope)?;
    create_dir(out)?;
    write_outcomes_file(&out.join(OUTCOMES_FILE), &outcomes)?;
    let recall = recall_at_k(&outcomes, &cfg.ks);
    write_json(&out.join(RECALL_FILE), &recall)?;
    run.write(out)?;
    for r in &recall {
        eprintln!("{} R@{}: {:.4} (n={})", r.label, r.k, r.recall, r.n);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervals {
    pub beta0: Option<(f64, f64)>,
    pub beta1: Option<(f64, f64)>,
}

/// On-disk form of one label's fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub label: Label,
    pub k: usize,
    pub beta0: f64,
    pub beta1: f64,
    pub p_value: f64,
    pub ci: Intervals,
    pub ci_level: f64,
    pub n_used: usize,
    pub n_dropped_iqr: usize,
    #[serde(rename = "B")]
    pub bootstrap: usize,
    pub seed: u64,
    pub converged: bool,
    pub iqr: IqrConfig,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    pub bootstrap_betas: Vec<(f64, f64)>,
}

impl FitRecord {
    fn to_fit(&self) -> LogisticFit {
        LogisticFit {
            beta0: self.beta0,
            beta1: self.beta1,
            n_used: self.n_used,
            bootstrap_betas: self.bootstrap_betas.clone(),
            ci_level: self.ci_level,
            ci_beta0: self.ci.beta0,
            ci_beta1: self.ci.beta1,
            p_value: self.p_value,
            log_likelihood: self.log_likelihood,
            null_log_likelihood: self.null_log_likelihood,
            converged: self.converged,
        }
    }
}

fn fit(cfg: &RunConfig) -> Result<()> {
    let out = require(&cfg.paths.out, "out")?;
    let outcomes_path = cfg.paths.outcomes.clone().unwrap_or_else(|| out.join(OUTCOMES_FILE));
    let mut run = RunManifest::new("fit", cfg);
    run.input(&outcomes_path)?;
    let outcomes = read_outcomes(open(&outcomes_path)?).with_context(|| outcomes_path.display().to_string())?;
    create_dir(out)?;
    let mut fitted = 0;
    for label in [Label::Known, Label::Novel] {
        let mut data = Vec::new();
        for o in outcomes.iter().filter(|o| o.label == label) {
            let y = o.hit(cfg.fit_k).with_context(|| {
                format!(
                    "outcome {:?} has no rank, so success at k={} is unknown; use k in 1, 5, 10",
                    o.test_id, cfg.fit_k
                )
            })?;
            data.push((y, o.f_avg));
        }
        if data.is_empty() {
            continue;
        }
        let result = match filter_and_fit(&data, cfg.iqr, &cfg.fit) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("skipping {label} fit: {e}");
                eprintln!("warning: {label}: {e}");
                continue;
            }
        };
        let f = &result.fit;
        let record = FitRecord {
            label,
            k: cfg.fit_k,
            beta0: f.beta0,
            beta1: f.beta1,
            p_value: f.p_value,
            ci: Intervals {
                beta0: f.ci_beta0,
                beta1: f.ci_beta1,
            },
            ci_level: f.ci_level,
            n_used: f.n_used,
            n_dropped_iqr: result.n_dropped_iqr,
            bootstrap: cfg.fit.bootstrap,
            seed: cfg.fit.seed,
            converged: f.converged,
            iqr: cfg.iqr,
            log_likelihood: f.log_likelihood,
            null_log_likelihood: f.null_log_likelihood,
            bootstrap_betas: f.bootstrap_betas.clone(),
        };
        write_json(&out.join(fit_file(label)), &record)?;
        eprintln!(
            "{label}: beta0={:.4} beta1={:.4} p={:.3e} (n={}, {} dropped)",
            f.beta0, f.beta1, f.p_value, f.n_used, result.n_dropped_iqr
        );
        fitted += 1;
    }
    if fitted == 0 {
        bail!("no label could be fitted");
    }
    run.write(out)
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let out = require(&cfg.paths.out, "out")?;
    let spec_path = require(&cfg.paths.spec, "spec")?;
    let mut spec: SimulationSpec = read_json(spec_path)?;
    if let Some(seed) = cfg.seed_override {
        spec.seed = seed;
    }
    let mut manifest = RunManifest::new("simulate", cfg);
    manifest.input(spec_path)?;
    let run = run_simulation(&spec)?;
    create_dir(out)?;
    write_file(&out.join("vocab.txt"), run.vocab.to_text())?;
    let mut corpus = String::new();
    let mut lines = String::new();
    for r in &run.corpus {
        let rec = compgen::ingest::CorpusRecord::from(r);
        corpus.push_str(&serde_json::to_string(&rec).map_err(internal)?);
        corpus.push('\n');
    }
    write_file(&out.join("corpus.jsonl"), corpus)?;
    run.index.save(&out.join(INDEX_FILE)).map_err(internal)?;
    for e in &run.manifest {
        lines.push_str(&serde_json::to_string(e).map_err(internal)?);
        lines.push('\n');
    }
    write_file(&out.join("manifest.jsonl"), lines)?;
    write_curated_files(out, &run.manifest, &run.curated)?;
    write_outcomes_file(&out.join(OUTCOMES_FILE), &run.outcomes)?;
    write_json(&out.join("spec.json"), &spec)?;
    manifest.write(out)?;
    print_summary(&run.curated.summary);
    Ok(())
}

fn report_cmd(cfg: &RunConfig) -> Result<()> {
    let out = require(&cfg.paths.out, "out")?;
    let summary_path = out.join(SUMMARY_FILE);
    let outcomes_path = cfg.paths.outcomes.clone().unwrap_or_else(|| out.join(OUTCOMES_FILE));
    let fit_paths: Vec<(Label, PathBuf)> = [Label::Known, Label::Novel]
        .into_iter()
        .map(|l| (l, out.join(fit_file(l))))
        .collect();
    let mut required = vec![summary_path.as_path(), outcomes_path.as_path()];
    if fit_paths.iter().all(|(_, p)| !p.exists()) {
        required.extend(fit_paths.iter().map(|(_, p)| p.as_path()));
    }
    report::check_inputs(&required)?;
    let mut run = RunManifest::new("report", cfg);
    run.input(&summary_path)?;
    run.input(&outcomes_path)?;
    let summary: CurationSummary = read_json(&summary_path)?;
    let outcomes = read_outcomes(open(&outcomes_path)?).with_context(|| outcomes_path.display().to_string())?;
    let mut fits = BTreeMap::new();
    let mut k = cfg.fit_k;
    for (label, path) in &fit_paths {
        if !path.exists() {
            if outcomes.iter().any(|o| o.label == *label) {
                log::warn!("{} not found; {label} panel has no fitted curve", path.display());
            }
            continue;
        }
        run.input(path)?;
        let record: FitRecord = read_json(path)?;
        k = record.k;
        fits.insert(*label, record.to_fit());
    }
    let report_cfg = ReportConfig {
        k,
        iqr: Some(cfg.iqr),
        ..ReportConfig::default()
    };
    let written = report::emit_report(&summary, &outcomes, &fits, out, &report_cfg).map_err(|e| match e {
        compgen::error::ReportError::Io { .. } => internal(e),
        other => other.into(),
    })?;
    run.write(out)?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
