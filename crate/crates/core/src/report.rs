//! Static report emission: a frequency histogram, binned recall points and
//! the fitted regression curve with its bootstrap band, one SVG per label,
//! plus CSVs holding every plotted number.
//!
//! CSV values use Rust's shortest round-trip float formatting. SVG
//! coordinates and labels are rounded to four decimals so output is byte
//! stable across platforms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::curation::{CurationSummary, Label};
use crate::error::ReportError;
use crate::outcome::EvalOutcome;
use crate::predictor::{binned_recall, iqr_filter, IqrConfig, LogisticFit, RecallBin};

pub const HISTOGRAM_CSV: &str = "histogram.csv";
pub const BINNED_RECALL_CSV: &str = "binned_recall.csv";
pub const REGRESSION_CSV: &str = "regression.csv";

pub fn svg_name(label: Label) -> String {
    format!("report_{label}.svg")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportConfig {
    /// Recall cutoff plotted.
    pub k: usize,
    pub histogram_bins: usize,
    pub recall_bins: usize,
    pub curve_points: usize,
    /// Outlier filter applied before binning recall, matching the fit.
    /// The histogram always shows every sample.
    pub iqr: Option<IqrConfig>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            k: 10,
            histogram_bins: 20,
            recall_bins: 10,
            curve_points: 50,
            iqr: Some(IqrConfig::default()),
        }
    }
}

/// Fails with every absent path listed.
pub fn check_inputs(paths: &[&Path]) -> Result<(), ReportError> {
    let missing: Vec<String> = paths
        .iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(ReportError::MissingInputs(missing))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lo_log10: f64,
    pub hi_log10: f64,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub x_log10: f64,
    pub p: f64,
    pub band: Option<(f64, f64)>,
}

/// Everything drawn in one label's panel.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPanel {
    pub label: Label,
    pub label_total: usize,
    pub label_percent: f64,
    pub histogram: Vec<HistogramBin>,
    pub bins: Vec<RecallBin>,
    pub curve: Vec<CurvePoint>,
    pub fit: Option<(f64, f64, f64)>,
}

/// Computes panels for every scored label that has outcomes. The
/// histogram shares one log-frequency axis across labels.
pub fn build_panels(
    summary: &CurationSummary,
    outcomes: &[EvalOutcome],
    fits: &BTreeMap<Label, LogisticFit>,
    cfg: &ReportConfig,
) -> Result<Vec<LabelPanel>, ReportError> {
    if outcomes.is_empty() {
        return Err(ReportError::NoOutcomes);
    }
    let logs: Vec<f64> = outcomes.iter().map(|o| o.f_avg.log10()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / cfg.histogram_bins as f64;

    let mut panels = Vec::new();
    for label in [Label::Known, Label::Novel] {
        let points: Vec<(bool, f64)> = outcomes
            .iter()
            .filter(|o| o.label == label)
            .map(|o| (o.hit(cfg.k).unwrap_or(o.y10), o.f_avg))
            .collect();
        if points.is_empty() {
            continue;
        }
        let mut counts = vec![0usize; cfg.histogram_bins];
        for &(_, f) in &points {
            let b = if width > 0.0 {
                (((f.log10() - lo) / width) as usize).min(cfg.histogram_bins - 1)
            } else {
                0
            };
            counts[b] += 1;
        }
        let histogram = counts
            .iter()
            .enumerate()
            .map(|(i, &count)| HistogramBin {
                lo_log10: lo + width * i as f64,
                hi_log10: if i + 1 == cfg.histogram_bins { hi } else { lo + width * (i + 1) as f64 },
                count,
                percent: 100.0 * count as f64 / points.len() as f64,
            })
            .collect();
        let bins = binned_recall(&kept_points(&points, cfg.iqr)?, cfg.recall_bins)?;
        let fit = fits.get(&label);
        let curve = match fit {
            Some(fit) => {
                let (p_lo, p_hi) = points
                    .iter()
                    .map(|&(_, f)| f.log10())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
                let steps = cfg.curve_points.max(2) - 1;
                (0..=steps)
                    .map(|i| {
                        let x = p_lo + (p_hi - p_lo) * i as f64 / steps as f64;
                        let f = 10f64.powf(x);
                        CurvePoint {
                            x_log10: x,
                            p: fit.predict(f),
                            band: fit.predict_band(f),
                        }
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        panels.push(LabelPanel {
            label,
            label_total: summary.count(label),
            label_percent: summary.percent(label),
            histogram,
            bins,
            curve,
            fit: fit.map(|f| (f.beta0, f.beta1, f.p_value)),
        });
    }
    Ok(panels)
}

fn kept_points(points: &[(bool, f64)], iqr: Option<IqrConfig>) -> Result<Vec<(bool, f64)>, ReportError> {
    match iqr {
        Some(cfg) if points.len() >= 4 => {
            let freqs: Vec<f64> = points.iter().map(|&(_, f)| f).collect();
            let keep = iqr_filter(&freqs, cfg)?;
            Ok(points.iter().zip(keep).filter(|(_, k)| *k).map(|(&p, _)| p).collect())
        }
        _ => Ok(points.to_vec()),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn histogram_csv(panels: &[LabelPanel]) -> String {
    let mut s = String::from("label,label_total,label_percent,bin,lo_log10,hi_log10,count,percent\n");
    for p in panels {
        for (i, b) in p.histogram.iter().enumerate() {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                p.label, p.label_total, p.label_percent, i, b.lo_log10, b.hi_log10, b.count, b.percent
            )
            .unwrap();
        }
    }
    s
}

pub fn binned_recall_csv(panels: &[LabelPanel]) -> String {
    let mut s = String::from("label,bin,lo_log10,hi_log10,center_log10,mean_recall,count\n");
    for p in panels {
        for (i, b) in p.bins.iter().enumerate() {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                p.label,
                i,
                b.lo_log10,
                b.hi_log10,
                b.center_log10,
                opt(b.mean_recall),
                b.count
            )
            .unwrap();
        }
    }
    s
}

pub fn regression_csv(panels: &[LabelPanel]) -> String {
    let mut s = String::from("label,beta0,beta1,p_value,x_log10,p,band_lo,band_hi\n");
    for p in panels {
        let Some((b0, b1, pv)) = p.fit else { continue };
        for c in &p.curve {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                p.label,
                b0,
                b1,
                pv,
                c.x_log10,
                c.p,
                opt(c.band.map(|b| b.0)),
                opt(c.band.map(|b| b.1))
            )
            .unwrap();
        }
    }
    s
}

const W: f64 = 640.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 610.0;
const HIST_TOP: f64 = 50.0;
const HIST_BOTTOM: f64 = 210.0;
const REC_TOP: f64 = 260.0;
const REC_BOTTOM: f64 = 440.0;
const H: f64 = 490.0;

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn x(&self, v: f64) -> f64 {
        if self.hi > self.lo {
            LEFT + (v - self.lo) / (self.hi - self.lo) * (RIGHT - LEFT)
        } else {
            0.5 * (LEFT + RIGHT)
        }
    }
}

fn r4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

/// One self-contained SVG document for a label panel.
pub fn panel_svg(panel: &LabelPanel, k: usize) -> String {
    let axis = Axis {
        lo: panel.histogram.first().map_or(0.0, |b| b.lo_log10),
        hi: panel.histogram.last().map_or(1.0, |b| b.hi_log10),
    };
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
        w = W,
        h = H
    )
    .unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{} combinations: n={} ({}%)</text>"#,
        r4(W / 2.0),
        panel.label,
        panel.label_total,
        r4(panel.label_percent)
    )
    .unwrap();

    // Histogram.
    let max_pct = panel.histogram.iter().map(|b| b.percent).fold(0.0, f64::max).max(1e-9);
    writeln!(s, r##"<g class="histogram" fill="#8da0cb" stroke="#4b5d8c">"##).unwrap();
    for b in &panel.histogram {
        let x0 = axis.x(b.lo_log10);
        let x1 = axis.x(b.hi_log10);
        let height = b.percent / max_pct * (HIST_BOTTOM - HIST_TOP);
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
            r4(x0),
            r4(HIST_BOTTOM - height),
            r4((x1 - x0).max(0.0)),
            r4(height)
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();
    frame(&mut s, HIST_TOP, HIST_BOTTOM);
    writeln!(
        s,
        r#"<text x="18" y="{}" transform="rotate(-90 18 {})" text-anchor="middle">% of samples (max {})</text>"#,
        r4((HIST_TOP + HIST_BOTTOM) / 2.0),
        r4((HIST_TOP + HIST_BOTTOM) / 2.0),
        r4(max_pct)
    )
    .unwrap();

    // Recall panel.
    let y = |p: f64| REC_BOTTOM - p * (REC_BOTTOM - REC_TOP);
    let band: Vec<(f64, (f64, f64))> = panel
        .curve
        .iter()
        .filter_map(|c| c.band.map(|b| (c.x_log10, b)))
        .collect();
    if !band.is_empty() {
        let mut pts: Vec<String> = band.iter().map(|(x, b)| format!("{},{}", r4(axis.x(*x)), r4(y(b.1)))).collect();
        pts.extend(band.iter().rev().map(|(x, b)| format!("{},{}", r4(axis.x(*x)), r4(y(b.0)))));
        writeln!(
            s,
            r##"<polygon class="band" points="{}" fill="#fc8d62" fill-opacity="0.3" stroke="none"/>"##,
            pts.join(" ")
        )
        .unwrap();
    }
    if !panel.curve.is_empty() {
        let pts: Vec<String> = panel
            .curve
            .iter()
            .map(|c| format!("{},{}", r4(axis.x(c.x_log10)), r4(y(c.p))))
            .collect();
        writeln!(
            s,
            r##"<polyline class="fit" points="{}" fill="none" stroke="#d95f02" stroke-width="2"/>"##,
            pts.join(" ")
        )
        .unwrap();
    }
    writeln!(s, r##"<g class="binned" fill="#1b9e77">"##).unwrap();
    for b in &panel.bins {
        if let Some(m) = b.mean_recall {
            writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="4"><title>{} (n={})</title></circle>"#,
                r4(axis.x(b.center_log10)),
                r4(y(m)),
                r4(m),
                b.count
            )
            .unwrap();
        }
    }
    writeln!(s, "</g>").unwrap();
    frame(&mut s, REC_TOP, REC_BOTTOM);
    for tick in [0.0, 0.5, 1.0] {
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            r4(LEFT - 4.0),
            r4(y(tick) + 4.0),
            r4(tick)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="18" y="{}" transform="rotate(-90 18 {})" text-anchor="middle">Recall@{k}</text>"#,
        r4((REC_TOP + REC_BOTTOM) / 2.0),
        r4((REC_TOP + REC_BOTTOM) / 2.0)
    )
    .unwrap();
    if let Some((b0, b1, pv)) = panel.fit {
        writeln!(
            s,
            r#"<text x="{}" y="{}">beta0={} beta1={} p={}</text>"#,
            r4(LEFT + 6.0),
            r4(REC_TOP + 14.0),
            r4(b0),
            r4(b1),
            r4(pv)
        )
        .unwrap();
    }

    // Shared log-frequency axis ticks at integer decades.
    let first = axis.lo.ceil() as i64;
    let last = axis.hi.floor() as i64;
    for d in first..=last {
        let x = r4(axis.x(d as f64));
        for bottom in [HIST_BOTTOM, REC_BOTTOM] {
            writeln!(
                s,
                r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
                r4(bottom),
                r4(bottom + 4.0)
            )
            .unwrap();
        }
        writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">1e{d}</text>"#, r4(REC_BOTTOM + 16.0)).unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">average pretraining frequency f_avg</text>"#,
        r4(W / 2.0),
        r4(H - 14.0)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

fn frame(s: &mut String, top: f64, bottom: f64) {
    writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r4(LEFT),
        r4(top),
        r4(RIGHT - LEFT),
        r4(bottom - top)
    )
    .unwrap();
}

/// Writes the three CSVs and one SVG per label with outcomes into `out_dir`.
pub fn emit_report(
    summary: &CurationSummary,
    outcomes: &[EvalOutcome],
    fits: &BTreeMap<Label, LogisticFit>,
    out_dir: &Path,
    cfg: &ReportConfig,
) -> Result<Vec<PathBuf>, ReportError> {
    let panels = build_panels(summary, outcomes, fits, cfg)?;
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ReportError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<(), ReportError> {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
        Ok(())
    };
    put(HISTOGRAM_CSV, histogram_csv(&panels))?;
    put(BINNED_RECALL_CSV, binned_recall_csv(&panels))?;
    put(REGRESSION_CSV, regression_csv(&panels))?;
    for panel in &panels {
        put(&svg_name(panel.label), panel_svg(panel, cfg.k))?;
    }
    Ok(written)
}
