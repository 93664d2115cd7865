//! Persist a [`ReportBundle`] to disk: CSV tables for estimates,
//! comparisons, tail shapes, and calibration curves, plus a JSON manifest
//! describing the run. All CSV content is a pure function of the bundle,
//! so identical runs produce byte-identical files; only the manifest's
//! timing section varies between reruns.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::SubsampleSize;
use crate::error::{Error, Result};
use crate::pipeline::ReportBundle;

/// Shortest-round-trip decimal rendering: parsing the text back yields the
/// exact same float, which is what makes rerun outputs byte-identical and
/// re-parsed tables exact.
fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// JSON value for a float that may be non-finite (JSON numbers cannot be).
fn json_f64(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn write_file(dir: &Path, name: &str, content: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    let mut file = std::fs::File::create(&path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(content.as_bytes())
        .and_then(|_| file.flush())
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    written.push(path);
    Ok(())
}

fn elpd_table(bundle: &ReportBundle) -> String {
    let mut out = String::from("model,estimator,elpd_sum,elpd_avg,se,subsampling_se,n_refits\n");
    for model in &bundle.models {
        for report in &model.reports {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                model.name,
                report.estimator.label(),
                fmt(report.elpd_sum),
                fmt(report.elpd_avg),
                fmt(report.se_loo),
                fmt_opt(report.subsampling_se),
                report.n_refits
            ));
        }
    }
    out
}

fn comparison_table(bundle: &ReportBundle) -> String {
    let mut out = String::from("estimator,model_a,model_b,elpd_diff,se_diff,subsampling_se\n");
    for table in &bundle.comparisons {
        for row in &table.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                table.estimator.label(),
                row.model_a,
                row.model_b,
                fmt(row.elpd_diff),
                fmt(row.se_diff),
                fmt_opt(row.subsampling_se)
            ));
        }
    }
    out
}

fn khat_table(khat: &[f64]) -> String {
    let mut out = String::from("observation_index,khat\n");
    for (i, &k) in khat.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", fmt(k)));
    }
    out
}

/// Long-format calibration table: PIT values (x = observation index), the
/// PIT kernel density, and the uniform reference envelope (x = grid point).
fn loopit_table(bundle: &ReportBundle, model_index: usize) -> Option<String> {
    let model = &bundle.models[model_index];
    let pit = model.loo_pit.as_ref()?;
    let mut out = String::from("kind,x,y\n");
    for (i, &u) in pit.pit.iter().enumerate() {
        out.push_str(&format!("pit,{i},{}\n", fmt(u)));
    }
    if let (Some(grid), Some(density)) = (&bundle.pit_grid, &model.pit_density) {
        for (x, y) in grid.iter().zip(density.iter()) {
            out.push_str(&format!("density,{},{}\n", fmt(*x), fmt(*y)));
        }
    }
    if let (Some(grid), Some(bands)) = (&bundle.pit_grid, &bundle.pit_bands) {
        for (x, y) in grid.iter().zip(bands.lower.iter()) {
            out.push_str(&format!("band_lower,{},{}\n", fmt(*x), fmt(*y)));
        }
        for (x, y) in grid.iter().zip(bands.upper.iter()) {
            out.push_str(&format!("band_upper,{},{}\n", fmt(*x), fmt(*y)));
        }
    }
    Some(out)
}

fn manifest(bundle: &ReportBundle) -> Value {
    let config = &bundle.config;
    let models: Vec<Value> = config
        .models
        .iter()
        .map(|m| json!({ "name": m.name, "predictors": m.predictors }))
        .collect();
    let estimators: Vec<&str> = config.estimators.iter().map(|e| e.label()).collect();
    let subsample_m = config.subsample_m.map(|s| match s {
        SubsampleSize::Fraction(f) => json!({ "kind": "fraction", "value": f }),
        SubsampleSize::Count(c) => json!({ "kind": "count", "value": c }),
    });

    let fits: Vec<Value> = bundle
        .models
        .iter()
        .map(|m| {
            json!({
                "model": m.name,
                "method": m.fit.method.label(),
                "max_rhat": m.fit.max_rhat.map(json_f64),
                "divergent_chains": m.fit.divergent_chains,
                "num_draws": m.fit.num_draws,
            })
        })
        .collect();

    let pit: Vec<Value> = bundle
        .models
        .iter()
        .filter_map(|m| {
            m.loo_pit.as_ref().map(|p| {
                json!({
                    "model": m.name,
                    "randomized": p.randomized,
                    "ks_statistic": json_f64(p.ks_statistic),
                    "ks_pvalue": json_f64(p.ks_pvalue),
                    "ks_band": format!("{:?}", p.ks_band).to_lowercase(),
                })
            })
        })
        .collect();

    let subsample = bundle.subsample.as_ref().map(|plan| {
        json!({
            "m": plan.m(),
            "population_n": plan.n(),
            "seed": plan.seed(),
            "indices": plan.indices(),
        })
    });

    let timings: Vec<Value> = bundle
        .timings
        .iter()
        .map(|t| json!({ "stage": t.stage, "seconds": json_f64(t.seconds) }))
        .collect();

    let mut root = Map::new();
    root.insert("tool_version".into(), json!(env!("CARGO_PKG_VERSION")));
    root.insert(
        "config".into(),
        json!({
            "dataset": config.dataset_path.display().to_string(),
            "outcome": config.outcome_column,
            "models": models,
            "estimators": estimators,
            "inference": config.inference.label(),
            "chains": config.chains,
            "iterations": config.iterations,
            "warmup": config.warmup,
            "kfold_k": config.kfold_k,
            "subsample_m": subsample_m,
            "seed": config.seed,
            "standardize": config.standardize,
        }),
    );
    root.insert(
        "data".into(),
        json!({ "n": bundle.n, "dropped_rows": bundle.dropped_rows }),
    );
    root.insert("subsample".into(), subsample.unwrap_or(Value::Null));
    root.insert("fits".into(), Value::Array(fits));
    root.insert("pit".into(), Value::Array(pit));
    root.insert("warnings".into(), json!(bundle.warnings));
    root.insert("timings".into(), Value::Array(timings));
    Value::Object(root)
}

/// Write the bundle's tables and manifest into `out_dir` (created if
/// absent). Tables that would hold no data rows are skipped; the manifest
/// is always written. Returns the paths written.
pub fn emit_reports(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();

    if bundle.models.iter().any(|m| !m.reports.is_empty()) {
        write_file(out_dir, "elpd_table.csv", &elpd_table(bundle), &mut written)?;
    }
    if !bundle.comparisons.is_empty() {
        write_file(
            out_dir,
            "comparison.csv",
            &comparison_table(bundle),
            &mut written,
        )?;
    }
    for (idx, model) in bundle.models.iter().enumerate() {
        if let Some(khat) = &model.khat {
            write_file(
                out_dir,
                &format!("khat_{}.csv", model.name),
                &khat_table(khat),
                &mut written,
            )?;
        }
        if let Some(table) = loopit_table(bundle, idx) {
            write_file(
                out_dir,
                &format!("loopit_{}.csv", model.name),
                &table,
                &mut written,
            )?;
        }
    }

    let manifest_text = serde_json::to_string_pretty(&manifest(bundle))
        .map_err(|e| Error::InvalidInput(format!("manifest serialization: {e}")))?;
    write_file(
        out_dir,
        "run_manifest.json",
        &format!("{manifest_text}\n"),
        &mut written,
    )?;
    Ok(written)
}
