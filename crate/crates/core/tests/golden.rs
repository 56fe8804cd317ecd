//! Byte comparison of report output for a fixed simulated run against
//! frozen copies in `tests/golden/`. Set `COMPGEN_BLESS=1` to regenerate.

use std::collections::BTreeMap;
use std::path::Path;

use compgen::curation::Label;
use compgen::predictor::{filter_and_fit, FitConfig, IqrConfig};
use compgen::report::{emit_report, ReportConfig};
use compgen::simulation::{run_simulation, SimulationSpec, SuccessModel, TestSetSpec};

const FILES: [&str; 5] = [
    "histogram.csv",
    "binned_recall.csv",
    "regression.csv",
    "report_known.svg",
    "report_novel.svg",
];

#[test]
fn fixed_run_matches_golden_files() {
    let spec = SimulationSpec {
        vocab_size: 40,
        n_samples: 3000,
        zipf_s: 1.1,
        objects_per_sample: (1, 3),
        seed: 2024,
        per_object_success: SuccessModel { a: -2.0, b: 1.0 },
        test: TestSetSpec {
            n_samples: 300,
            objects_per_sample: (2, 2),
        },
    };
    let run = run_simulation(&spec).unwrap();
    let cfg = FitConfig {
        bootstrap: 100,
        seed: 1,
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
        fits.insert(label, filter_and_fit(&data, IqrConfig::default(), &cfg).unwrap().fit);
    }
    let dir = tempfile::tempdir().unwrap();
    emit_report(&run.curated.summary, &run.outcomes, &fits, dir.path(), &ReportConfig::default()).unwrap();

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let bless = std::env::var_os("COMPGEN_BLESS").is_some();
    for name in FILES {
        let got = std::fs::read(dir.path().join(name)).unwrap();
        let path = golden.join(name);
        if bless {
            std::fs::write(&path, &got).unwrap();
            continue;
        }
        let want = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(got == want, "{name} differs from {}", path.display());
    }
}
