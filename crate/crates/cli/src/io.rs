//! JSON-lines readers and writers for network, label and subset files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use dppl_core::learn::{DppModel, TrainingSample, TrainingSet};
use dppl_core::{ActiveSubset, LinkNetwork};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One line of a labeled file: the network geometry plus its schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    #[serde(flatten)]
    pub network: LinkNetwork,
    pub optimal_subset: ActiveSubset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

/// A network file line, with or without a label.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct NetworkLine {
    #[serde(flatten)]
    pub network: LinkNetwork,
    #[serde(default)]
    pub optimal_subset: Option<ActiveSubset>,
    #[serde(default)]
    pub solver_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRecord {
    pub network_id: usize,
    pub mode: String,
    pub subset: ActiveSubset,
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| CliError::Invalid(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_networks(path: &Path) -> CliResult<Vec<NetworkLine>> {
    let lines: Vec<NetworkLine> = read_jsonl(path)?;
    for (i, l) in lines.iter().enumerate() {
        if let Some(s) = &l.optimal_subset {
            s.validate(l.network.len()).map_err(|e| CliError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
    }
    Ok(lines)
}

/// Reads a labeled file into a training set; every line must carry a label.
pub fn read_training_set(path: &Path) -> CliResult<TrainingSet> {
    let records: Vec<LabeledRecord> = read_jsonl(path)?;
    if records.is_empty() {
        return Err(CliError::Invalid(format!("{}: no labeled records", path.display())));
    }
    let samples = records
        .into_iter()
        .map(|r| TrainingSample {
            network: r.network,
            label: r.optimal_subset,
        })
        .collect();
    Ok(TrainingSet::new(samples)?)
}

pub fn write_model(path: &Path, model: &DppModel) -> CliResult<()> {
    let text = serde_json::to_string_pretty(model).map_err(|e| CliError::Invalid(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_model(path: &Path) -> CliResult<DppModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// `dir/stem<suffix>` next to `path`, e.g. `eval.csv` -> `eval_cdf.csv`.
pub fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dppl_core::net::generate_network;

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("/a/eval.csv"), "_cdf.csv"), Path::new("/a/eval_cdf.csv"));
        assert_eq!(sibling(Path::new("labels.jsonl"), "_trace.csv"), Path::new("labels_trace.csv"));
    }

    #[test]
    fn labeled_records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.jsonl");
        let recs: Vec<LabeledRecord> = (0..3)
            .map(|s| {
                let network = generate_network(4, 10.0, 1.0, 2.0, s).unwrap();
                LabeledRecord {
                    network,
                    optimal_subset: ActiveSubset::new(vec![s as usize], 4).unwrap(),
                    solver_time_s: Some(0.125 * s as f64),
                    converged: Some(true),
                }
            })
            .collect();
        write_jsonl(&path, &recs).unwrap();
        assert_eq!(read_jsonl::<LabeledRecord>(&path).unwrap(), recs);
        let set = read_training_set(&path).unwrap();
        assert_eq!(set.len(), 3);
        let lines = read_networks(&path).unwrap();
        assert_eq!(lines[2].optimal_subset.as_ref().unwrap().indices(), &[2]);
        let text = std::fs::read_to_string(&path).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["tx", "rx", "d", "alpha", "optimal_subset"] {
            assert!(first.get(key).is_some(), "{key}");
        }
        assert!(first.get("gains").is_none());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = serde_json::to_string(&generate_network(2, 10.0, 1.0, 2.0, 1).unwrap()).unwrap();
        std::fs::write(&path, format!("{good}\n{{\"tx\": 1}}\n")).unwrap();
        match read_networks(&path) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let out_of_range = good.trim_end_matches('}').to_string() + ",\"optimal_subset\":[5]}";
        std::fs::write(&path, out_of_range + "\n").unwrap();
        assert!(matches!(read_networks(&path), Err(CliError::Parse { line: 1, .. })));
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let model = DppModel::new([0.1, -2.0, 3.5e-4], 0.266, None).unwrap();
        write_model(&path, &model).unwrap();
        assert_eq!(read_model(&path).unwrap(), model);
    }
}
