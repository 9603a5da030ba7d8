use super::config::TrainConfig;
use super::run::{train, write_divergence, write_run};
use super::TrainError;
use crate::data::{Dataset, Split};
use crate::eval::dtw_acoustic_ap;
use crate::losses::{FunctionKind, LossSpec, Method, Objective};
use crate::math::SimilarityKind;
use crate::seed::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Streams for repeat seeds start here, clear of the per-run streams.
const STREAM_REPEAT: u64 = 1000;

/// One row of a comparison table. `objective` is absent for the DTW
/// baseline, which has nothing to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub name: String,
    pub objective: Option<Objective>,
}

impl GridEntry {
    pub fn new(name: impl Into<String>, objective: Option<Objective>) -> Self {
        Self {
            name: name.into(),
            objective,
        }
    }

    fn spec(name: &str, spec: LossSpec) -> Self {
        Self::new(name, Some(spec.into()))
    }
}

/// Seed of repeat `r`. Repeat 0 keeps the base seed; all entries share the
/// same repeat seeds, so every row sees the same initializations and batch
/// orders.
pub fn repeat_seed(base: u64, r: usize) -> u64 {
    if r == 0 {
        base
    } else {
        derive_seed(base, STREAM_REPEAT + r as u64)
    }
}

/// Rows of the method comparison, from raw-feature DTW to Asymmetric-Proxy.
pub fn table1() -> Vec<GridEntry> {
    Method::TABLE1
        .iter()
        .map(|m| GridEntry::new(m.name(), m.objective()))
        .collect()
}

/// Asymmetric functions under a shared similarity type.
pub fn table2() -> Vec<GridEntry> {
    use FunctionKind::{Else, Msp};
    use SimilarityKind::{ProxyAnchor as A, ProxyPn as Pn};
    let mut out = Vec::new();
    for s in [Pn, A] {
        for (fp, fn_) in [(Msp, Else), (Else, Msp)] {
            out.push(GridEntry::spec("", LossSpec::new(fp, fn_, s, s)));
        }
    }
    name_by_spec(out)
}

/// Shared function under asymmetric similarity types.
pub fn table3() -> Vec<GridEntry> {
    use FunctionKind::{Else, Msp};
    use SimilarityKind::{ProxyAnchor as A, ProxyPn as Pn};
    let mut out = Vec::new();
    for f in [Msp, Else] {
        for (sp, sn) in [(Pn, A), (A, Pn)] {
            out.push(GridEntry::spec("", LossSpec::new(f, f, sp, sn)));
        }
    }
    name_by_spec(out)
}

/// Asymmetric functions and asymmetric similarity types together.
pub fn table4() -> Vec<GridEntry> {
    use FunctionKind::{Else, Msp};
    use SimilarityKind::{ProxyAnchor as A, ProxyPn as Pn};
    let mut out = Vec::new();
    for (fp, fn_) in [(Msp, Else), (Else, Msp)] {
        for (sp, sn) in [(Pn, A), (A, Pn)] {
            out.push(GridEntry::spec("", LossSpec::new(fp, fn_, sp, sn)));
        }
    }
    name_by_spec(out)
}

fn name_by_spec(entries: Vec<GridEntry>) -> Vec<GridEntry> {
    entries
        .into_iter()
        .map(|mut e| {
            let spec = e.objective.and_then(|o| o.loss_spec()).expect("gpw entry");
            e.name = spec.to_string();
            e
        })
        .collect()
}

pub fn table(number: usize) -> Option<Vec<GridEntry>> {
    match number {
        1 => Some(table1()),
        2 => Some(table2()),
        3 => Some(table3()),
        4 => Some(table4()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub repeat: usize,
    pub seed: u64,
    pub best_epoch: Option<usize>,
    pub test_acoustic_ap: Option<f64>,
    pub test_crossview_ap: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub name: String,
    pub objective: Option<Objective>,
    pub runs: Vec<RunSummary>,
    pub acoustic: Option<Stat>,
    pub crossview: Option<Stat>,
}

impl GridRow {
    pub fn loss_spec(&self) -> Option<LossSpec> {
        self.objective.and_then(|o| o.loss_spec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub repeats: usize,
    pub base_seed: u64,
    pub dataset_seed: u64,
    pub rows: Vec<GridRow>,
}

impl GridReport {
    pub fn row(&self, name: &str) -> Option<&GridRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

fn slug(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    while s.contains("--") {
        s = s.replace("--", "-");
    }
    s.trim_matches('-').to_string()
}

/// Directory of one run inside a grid output directory.
pub fn run_dir(out: &Path, row: usize, name: &str, repeat: usize) -> std::path::PathBuf {
    out.join(format!("{row:02}-{}", slug(name)))
        .join(format!("repeat-{repeat}"))
}

/// Trains every entry `repeats` times and summarizes test APs per entry.
/// Failed runs are recorded and excluded from the statistics. Runs are
/// independent and execute on the ambient rayon pool; results do not depend
/// on its size.
pub fn grid_run(
    base: &TrainConfig,
    entries: &[GridEntry],
    dataset: &Dataset,
    repeats: usize,
    out: Option<&Path>,
) -> Result<GridReport, TrainError> {
    if repeats == 0 {
        return Err(TrainError::InvalidConfig(
            "repeats must be at least 1".into(),
        ));
    }
    base.validate()?;
    let jobs: Vec<(usize, usize)> = entries
        .iter()
        .enumerate()
        .flat_map(|(e, entry)| {
            let reps = if entry.objective.is_some() {
                repeats
            } else {
                1
            };
            (0..reps).map(move |r| (e, r))
        })
        .collect();
    let results: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(e, r)| {
            let entry = &entries[e];
            let seed = repeat_seed(base.seed, r);
            let mut summary = RunSummary {
                repeat: r,
                seed,
                best_epoch: None,
                test_acoustic_ap: None,
                test_crossview_ap: None,
                error: None,
            };
            match entry.objective {
                None => {
                    let items = dataset.split(Split::Test);
                    let seqs: Vec<_> = items.iter().map(|i| i.features.clone()).collect();
                    let classes: Vec<usize> = items.iter().map(|i| i.class).collect();
                    match dtw_acoustic_ap(&seqs, &classes) {
                        Ok(r) => summary.test_acoustic_ap = Some(r.ap),
                        Err(err) => summary.error = Some(err.to_string()),
                    }
                }
                Some(objective) => {
                    let cfg = TrainConfig {
                        objective,
                        seed,
                        ..base.clone()
                    };
                    let dir = out.map(|o| run_dir(o, e, &entry.name, r));
                    match train(&cfg, dataset) {
                        Ok(outcome) => {
                            summary.best_epoch = Some(outcome.record.best_epoch);
                            summary.test_acoustic_ap = Some(outcome.record.test_acoustic_ap);
                            summary.test_crossview_ap = outcome.record.test_crossview_ap;
                            if let Some(d) = &dir {
                                if let Err(err) = write_run(d, &outcome) {
                                    summary.error = Some(err.to_string());
                                }
                            }
                        }
                        Err(err) => {
                            if let (Some(d), TrainError::Diverged(div)) = (&dir, &err) {
                                let _ = write_divergence(d, div);
                            }
                            summary.error = Some(err.to_string());
                        }
                    }
                }
            }
            summary
        })
        .collect();

    let mut rows: Vec<GridRow> = entries
        .iter()
        .map(|e| GridRow {
            name: e.name.clone(),
            objective: e.objective,
            runs: Vec::new(),
            acoustic: None,
            crossview: None,
        })
        .collect();
    for (&(e, _), summary) in jobs.iter().zip(results) {
        rows[e].runs.push(summary);
    }
    for row in &mut rows {
        let ok: Vec<&RunSummary> = row.runs.iter().filter(|r| r.error.is_none()).collect();
        let ac: Vec<f64> = ok.iter().filter_map(|r| r.test_acoustic_ap).collect();
        let cv: Vec<f64> = ok.iter().filter_map(|r| r.test_crossview_ap).collect();
        row.acoustic = Stat::of(&ac);
        row.crossview = Stat::of(&cv);
    }
    Ok(GridReport {
        repeats,
        base_seed: base.seed,
        dataset_seed: dataset.spec.seed,
        rows,
    })
}

fn fmt_stat(s: Option<Stat>) -> String {
    match s {
        Some(s) if s.n > 1 => format!("{:.3} ± {:.3}", s.mean, s.std),
        Some(s) => format!("{:.3}", s.mean),
        None => "-".into(),
    }
}

/// Markdown table with one row per entry and the constituents in columns.
pub fn render_table(report: &GridReport) -> String {
    let mut out = String::new();
    out.push_str("| Method | F_P | F_N | S^P | S^N | Acoustic AP | Cross-view AP |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for row in &report.rows {
        let (fp, fn_, sp, sn) = match row.loss_spec() {
            Some(s) => (
                s.fp.label().to_string(),
                s.fn_.label().to_string(),
                s.sp_kind.label().to_string(),
                s.sn_kind.label().to_string(),
            ),
            None => ("-".into(), "-".into(), "-".into(), "-".into()),
        };
        let failures = row.runs.iter().filter(|r| r.error.is_some()).count();
        let note = if failures > 0 {
            format!(" ({failures} failed)")
        } else {
            String::new()
        };
        let _ = writeln!(
            out,
            "| {}{} | {} | {} | {} | {} | {} | {} |",
            row.name,
            note,
            fp,
            fn_,
            sp,
            sn,
            fmt_stat(row.acoustic),
            fmt_stat(row.crossview)
        );
    }
    out
}

/// The table as CSV: one line per row with mean, spread and run counts.
pub fn render_csv(report: &GridReport) -> Result<String, TrainError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| TrainError::Io(e.into());
    w.write_record([
        "method",
        "f_p",
        "f_n",
        "s_p",
        "s_n",
        "acoustic_mean",
        "acoustic_std",
        "crossview_mean",
        "crossview_std",
        "runs",
        "failed",
    ])
    .map_err(io)?;
    let num = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for row in &report.rows {
        let spec = row.loss_spec();
        let label = |f: fn(&LossSpec) -> &'static str| spec.as_ref().map_or("", f).to_string();
        let failed = row.runs.iter().filter(|r| r.error.is_some()).count();
        w.write_record([
            row.name.clone(),
            label(|s| s.fp.label()),
            label(|s| s.fn_.label()),
            label(|s| s.sp_kind.label()),
            label(|s| s.sn_kind.label()),
            num(row.acoustic.map(|s| s.mean)),
            num(row.acoustic.map(|s| s.std)),
            num(row.crossview.map(|s| s.mean)),
            num(row.crossview.map(|s| s.std)),
            row.runs.len().to_string(),
            failed.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| TrainError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn tables_enumerate_expected_cells() {
        assert_eq!(table1().len(), 11);
        assert!(table1()[0].objective.is_none());
        for t in 2..=4 {
            let rows = table(t).unwrap();
            assert_eq!(rows.len(), 4);
            let specs: HashSet<String> = rows.iter().map(|r| r.name.clone()).collect();
            assert_eq!(specs.len(), 4);
        }
        let t4: Vec<String> = table4().iter().map(|r| r.name.clone()).collect();
        assert!(t4.contains(&"(ELSE, MSP, A, P/N)".to_string()));
        assert!(t4.contains(&"(MSP, ELSE, P/N, A)".to_string()));
        assert!(table(5).is_none());
    }

    #[test]
    fn stats_are_mean_and_sample_std() {
        let s = Stat::of(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert!((s.mean - 0.3).abs() < 1e-15);
        assert!((s.std - 0.158_113_883_008_418_97).abs() < 1e-12);
        assert_eq!(Stat::of(&[0.7]).unwrap().std, 0.0);
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn repeat_seeds_keep_base_first() {
        assert_eq!(repeat_seed(9, 0), 9);
        assert_ne!(repeat_seed(9, 1), repeat_seed(9, 2));
    }

    #[test]
    fn slugs_are_path_safe() {
        assert_eq!(slug("(ELSE, MSP, A, P/N)"), "else-msp-a-p-n");
        assert_eq!(slug("MV Triplet"), "mv-triplet");
    }
}
