use crate::config::CliConfig;
use crate::error::CliError;
use awe_core::audit::run_audit;
use awe_core::data::{generate_dataset, load_dataset, save_dataset, Dataset, Split};
use awe_core::encoders::{load_checkpoint, EncoderConfig};
use awe_core::eval::write_curve;
use awe_core::train::{
    evaluate_params, grid_run, render_csv, render_table, train as train_run, write_divergence,
    write_json, write_run, GridReport, RunRecord, TrainError, CURVE_FILE, RECORD_FILE,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const DATASET_FILE: &str = "dataset.bin";
pub const CONFIG_FILE: &str = "config.toml";
pub const EVAL_FILE: &str = "eval.json";
pub const AUDIT_FILE: &str = "audit.json";
pub const GRID_FILE: &str = "grid.json";
pub const TABLE_MD_FILE: &str = "table.md";
pub const TABLE_CSV_FILE: &str = "table.csv";
pub const SUMMARY_FILE: &str = "summary.md";

fn dataset_for(cfg: &CliConfig, path: Option<&Path>) -> Result<Dataset, CliError> {
    match path {
        Some(p) => load_dataset(p).map_err(|e| match CliError::from(e) {
            CliError::Io(m) => CliError::Io(format!("{}: {m}", p.display())),
            other => other,
        }),
        None => {
            cfg.dataset.validate()?;
            Ok(generate_dataset(&cfg.dataset)?)
        }
    }
}

fn check_compatible(enc: &EncoderConfig, ds: &Dataset) -> Result<(), CliError> {
    if enc.feature_dim != ds.spec.feature_dim {
        return Err(CliError::Usage(format!(
            "encoder expects {}-dimensional features but the dataset has {}",
            enc.feature_dim, ds.spec.feature_dim
        )));
    }
    if enc.alphabet_size < ds.spec.alphabet_size {
        return Err(CliError::Usage(format!(
            "encoder alphabet of {} symbols cannot spell a {}-symbol lexicon",
            enc.alphabet_size, ds.spec.alphabet_size
        )));
    }
    Ok(())
}

fn create_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn generate(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = CliConfig::load(config)?;
    if let Some(s) = seed {
        cfg.dataset.seed = s;
    }
    cfg.dataset.validate()?;
    let ds = generate_dataset(&cfg.dataset)?;
    create_out(out)?;
    save_dataset(&out.join(DATASET_FILE), &ds)?;
    println!(
        "wrote {} ({} train, {} dev, {} test items, {} classes)",
        out.join(DATASET_FILE).display(),
        ds.train.len(),
        ds.dev.len(),
        ds.test.len(),
        ds.num_classes()
    );
    Ok(())
}

pub fn train(
    config: Option<&Path>,
    dataset: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut cfg = CliConfig::load(config)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    cfg.train.validate()?;
    let ds = dataset_for(&cfg, dataset)?;
    check_compatible(&cfg.train.encoder, &ds)?;
    match train_run(&cfg.train, &ds) {
        Ok(outcome) => {
            write_run(out, &outcome)?;
            write_text(&out.join(CONFIG_FILE), &cfg.to_toml())?;
            let r = &outcome.record;
            println!(
                "{}: best epoch {} (dev acoustic AP {:.4}); test acoustic AP {:.4}{}",
                r.label,
                r.best_epoch,
                r.best_dev_acoustic_ap,
                r.test_acoustic_ap,
                r.test_crossview_ap
                    .map_or(String::new(), |c| format!(", cross-view AP {c:.4}"))
            );
            Ok(())
        }
        Err(TrainError::Diverged(d)) => {
            write_divergence(out, &d)?;
            Err(CliError::Numeric(format!(
                "training diverged at epoch {} step {}; state written to {}",
                d.report.epoch,
                d.report.step,
                out.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn eval(
    config: Option<&Path>,
    dataset: Option<&Path>,
    checkpoint: &Path,
    split: Split,
    dtw: bool,
    out: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg = CliConfig::load(config)?;
    let ck = load_checkpoint(checkpoint).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", checkpoint.display())),
        other => other,
    })?;
    let ds = dataset_for(&cfg, dataset)?;
    check_compatible(&ck.params.config, &ds)?;
    let reports = evaluate_params(&ck.params, &ds, split, dtw, seed.unwrap_or(cfg.train.seed))?;
    create_out(out)?;
    write_json(&out.join(EVAL_FILE), &reports)?;
    for r in &reports {
        println!(
            "{:?} {} AP {:.4} over {} pairs",
            r.task,
            r.split.name(),
            r.ap,
            r.num_pairs
        );
    }
    Ok(())
}

pub fn grad_check(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = CliConfig::load(config)?;
    if let Some(s) = seed {
        cfg.audit.seed = s;
    }
    let report = run_audit(&cfg.audit)?;
    create_out(out)?;
    write_json(&out.join(AUDIT_FILE), &report)?;
    for e in &report.entries {
        println!(
            "{} {}: max error {:.3e} (tolerance {:.0e}, {} cases)",
            if e.passed { "ok  " } else { "FAIL" },
            e.name,
            e.max_error,
            e.tolerance,
            e.cases
        );
    }
    if report.passed {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|e| e.name.as_str()).collect();
        Err(CliError::Numeric(format!(
            "gradient audit failed for: {}",
            names.join(", ")
        )))
    }
}

pub fn grid(
    config: Option<&Path>,
    dataset: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    table: Option<usize>,
    repeats: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg = CliConfig::load(config)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(t) = table {
        cfg.grid.table = t;
        cfg.grid.methods = None;
    }
    if let Some(r) = repeats {
        cfg.grid.repeats = r;
    }
    let entries = cfg.grid.entries()?;
    cfg.train.validate()?;
    for e in &entries {
        if let Some(o) = &e.objective {
            o.validate()?;
        }
    }
    let ds = dataset_for(&cfg, dataset)?;
    check_compatible(&cfg.train.encoder, &ds)?;
    create_out(out)?;
    let report = grid_run(&cfg.train, &entries, &ds, cfg.grid.repeats, Some(out))?;
    write_text(&out.join(CONFIG_FILE), &cfg.to_toml())?;
    write_grid(&report, out)?;
    print!("{}", render_table(&report));
    Ok(())
}

fn write_grid(report: &GridReport, out: &Path) -> Result<(), CliError> {
    write_json(&out.join(GRID_FILE), report)?;
    write_text(&out.join(TABLE_MD_FILE), &render_table(report))?;
    write_text(&out.join(TABLE_CSV_FILE), &render_csv(report)?)?;
    Ok(())
}

fn render_record(r: &RunRecord) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}\n", r.label);
    let _ = writeln!(
        s,
        "Best epoch {} with dev acoustic AP {:.4}.\n",
        r.best_epoch, r.best_dev_acoustic_ap
    );
    s.push_str("| Epoch | Train loss | Dev acoustic AP | Dev cross-view AP |\n");
    s.push_str("|---|---|---|---|\n");
    for e in &r.epochs {
        let _ = writeln!(
            s,
            "| {} | {} | {:.4} | {} |",
            e.epoch,
            e.train_loss.map_or("-".into(), |l| format!("{l:.4}")),
            e.dev_acoustic_ap,
            e.dev_crossview_ap.map_or("-".into(), |c| format!("{c:.4}"))
        );
    }
    s.push('\n');
    for t in &r.test {
        let _ = writeln!(
            s,
            "Test {:?} AP: {:.4} ({} pairs)",
            t.task, t.ap, t.num_pairs
        );
    }
    s
}

fn locate(input: &Path) -> Result<PathBuf, CliError> {
    if input.is_dir() {
        for name in [GRID_FILE, RECORD_FILE] {
            let p = input.join(name);
            if p.is_file() {
                return Ok(p);
            }
        }
        return Err(CliError::Io(format!(
            "{} holds neither {GRID_FILE} nor {RECORD_FILE}",
            input.display()
        )));
    }
    Ok(input.to_path_buf())
}

pub fn report(input: &Path, out: &Path) -> Result<(), CliError> {
    let path = locate(input)?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let malformed = |e: serde_json::Error| CliError::Io(format!("{}: {e}", path.display()));
    if value.get("rows").is_some() {
        let grid: GridReport = serde_json::from_value(value).map_err(malformed)?;
        create_out(out)?;
        write_grid(&grid, out)?;
        print!("{}", render_table(&grid));
    } else {
        let record: RunRecord = serde_json::from_value(value).map_err(malformed)?;
        create_out(out)?;
        let summary = render_record(&record);
        write_text(&out.join(SUMMARY_FILE), &summary)?;
        write_curve(&out.join(CURVE_FILE), &record.curve())?;
        print!("{summary}");
    }
    Ok(())
}
