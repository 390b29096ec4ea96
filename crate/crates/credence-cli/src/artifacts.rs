//! On-disk artifacts: the versioned model file and the CSV/JSON writers
//! shared by the commands.

use std::path::Path;

use credence::credence::CredenceModel;
use credence::tabular::{GeneratedSample, ObservationalSample};
use credence::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned JSON container for a trained model; round-trips byte-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: CredenceModel,
}

pub fn save_model(model: &CredenceModel, path: &Path) -> Result<()> {
    let file = ModelFile { format_version: MODEL_FORMAT_VERSION, model: model.clone() };
    write_json(&file, path)
}

pub fn load_model(path: &Path) -> Result<CredenceModel> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("invalid model file {}: {e}", path.display())))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::data(format!(
            "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    Ok(file.model)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::data(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    // shortest round-trip decimal keeps artifacts byte-stable across runs
    format!("{v}")
}

/// Full potential-outcome CSV: covariates, z, y0, y1, y.
pub fn write_generated_csv(sample: &GeneratedSample, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = sample.column_names.clone();
    header.extend(["z", "y0", "y1", "y"].map(String::from));
    writer.write_record(&header)?;
    for i in 0..sample.x.nrows() {
        let mut row: Vec<String> = (0..sample.x.ncols()).map(|j| fmt(sample.x[[i, j]])).collect();
        row.push(fmt(sample.z[i]));
        row.push(fmt(sample.y0[i]));
        row.push(fmt(sample.y1[i]));
        row.push(fmt(sample.y[i]));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Observational CSV: covariates, z, y (potential outcomes withheld).
pub fn write_observational_csv(sample: &ObservationalSample, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = sample.column_names.clone();
    header.extend(["z", "y"].map(String::from));
    writer.write_record(&header)?;
    for i in 0..sample.x.nrows() {
        let mut row: Vec<String> = (0..sample.x.ncols()).map(|j| fmt(sample.x[[i, j]])).collect();
        row.push(fmt(sample.z[i]));
        row.push(fmt(sample.y[i]));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_estimates_csv(
    estimates: &[credence::estimators::AteEstimate],
    path: &Path,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["method", "ate", "se", "diagnostics"])?;
    for est in estimates {
        let se = est.se.map(fmt).unwrap_or_default();
        let diagnostics = serde_json::to_string(&est.diagnostics)
            .map_err(|e| Error::data(format!("serialization failed: {e}")))?;
        writer.write_record([est.method.as_str(), &fmt(est.ate), &se, &diagnostics])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_loss_csv(history: &[credence::credence::EpochLoss], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["epoch", "loss_x", "loss_y", "y_recon", "y_kl", "y_effect", "y_bias"])?;
    for row in history {
        writer.write_record([
            row.epoch.to_string(),
            fmt(row.loss_x),
            fmt(row.loss_y),
            fmt(row.y_recon),
            fmt(row.y_kl),
            fmt(row.y_effect),
            fmt(row.y_bias),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_benchmark_csv(
    report: &credence::evaluation::BenchmarkReport,
    path: &Path,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["method", "mean_bias", "sd", "rmse", "replicates", "failures"])?;
    for s in &report.scores {
        writer.write_record([
            s.method.clone(),
            fmt(s.mean_bias),
            fmt(s.sd),
            fmt(s.rmse),
            s.replicates.to_string(),
            s.failures.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
