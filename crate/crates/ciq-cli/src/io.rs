//! File formats: learning-curve CSV, paired-recording CSV, JSON reports,
//! and network checkpoints.
//!
//! Everything written here must be byte-reproducible for a fixed (config,
//! seed), so no timestamps or machine identifiers appear in any format and
//! floats print in Rust's shortest round-trip form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use ciq_core::agent::network_roles;
use ciq_core::metrics::{EpisodeRecording, StepRecord};
use ciq_core::nn::Mlp;

use crate::config::{AgentChoice, HyperConfig};
use crate::runner::{AgentHandle, LearningCurve};
use crate::CliError;

/// Serialize as pretty JSON with a trailing newline.
pub fn to_json_string(value: &impl Serialize) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Shortest round-trip decimal form; `ryu`-style output from the standard
/// formatter keeps runs byte-identical.
fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Learning curve rows: `episode, return, running_mean`.
pub fn write_curve_csv(path: &Path, curve: &LearningCurve) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["episode", "return", "running_mean"])?;
    for (i, (ret, mean)) in curve.returns.iter().zip(&curve.running_mean).enumerate() {
        w.write_record([(i + 1).to_string(), fmt_f64(*ret), fmt_f64(*mean)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<(u32, f64, f64)>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let parse = |i: usize| -> Result<f64, CliError> {
            record
                .get(i)
                .ok_or_else(|| CliError::runtime("curve row too short"))?
                .parse::<f64>()
                .map_err(|e| CliError::runtime(format!("curve field: {e}")))
        };
        rows.push((parse(0)? as u32, parse(1)?, parse(2)?));
    }
    Ok(rows)
}

/// Paired-trace CSV: one row per step with the clean and delivered
/// observations, the label and its estimate, both actions, and both
/// Q-vectors.
pub fn write_recordings_csv(
    path: &Path,
    recordings: &[EpisodeRecording],
) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let first = recordings
        .iter()
        .flat_map(|r| r.steps.first())
        .next()
        .ok_or_else(|| CliError::runtime("nothing recorded"))?;
    let obs_dim = first.clean.len();
    let actions = first.q_clean.len();

    let mut header = vec!["episode".to_string(), "t".to_string()];
    for i in 0..obs_dim {
        header.push(format!("clean_{i}"));
    }
    for i in 0..obs_dim {
        header.push(format!("noisy_{i}"));
    }
    header.push("label".into());
    header.push("p".into());
    header.push("action".into());
    header.push("action_clean".into());
    for a in 0..actions {
        header.push(format!("q_clean_{a}"));
    }
    for a in 0..actions {
        header.push(format!("q_noisy_{a}"));
    }

    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for (episode, rec) in recordings.iter().enumerate() {
        for (t, s) in rec.steps.iter().enumerate() {
            let mut row = vec![episode.to_string(), t.to_string()];
            row.extend(s.clean.iter().map(|x| fmt_f64(*x)));
            row.extend(s.noisy.iter().map(|x| fmt_f64(*x)));
            row.push(s.label.to_string());
            row.push(fmt_f64(s.p_est));
            row.push(s.action_noisy.to_string());
            row.push(s.action_clean.to_string());
            row.extend(s.q_clean.iter().map(|x| fmt_f64(*x)));
            row.extend(s.q_noisy.iter().map(|x| fmt_f64(*x)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_recordings_csv(path: &Path) -> Result<Vec<EpisodeRecording>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let obs_dim = header.iter().filter(|h| h.starts_with("clean_")).count();
    let actions = header.iter().filter(|h| h.starts_with("q_clean_")).count();
    if obs_dim == 0 || actions == 0 {
        return Err(CliError::runtime("recording header is missing columns"));
    }
    let mut recordings: Vec<EpisodeRecording> = Vec::new();
    for record in r.records() {
        let record = record?;
        let field = |i: usize| -> Result<&str, CliError> {
            record
                .get(i)
                .ok_or_else(|| CliError::runtime("recording row too short"))
        };
        let float = |i: usize| -> Result<f64, CliError> {
            field(i)?
                .parse()
                .map_err(|e| CliError::runtime(format!("recording field {i}: {e}")))
        };
        let int = |i: usize| -> Result<usize, CliError> {
            field(i)?
                .parse()
                .map_err(|e| CliError::runtime(format!("recording field {i}: {e}")))
        };
        let episode = int(0)?;
        let mut col = 2;
        let mut clean = Vec::with_capacity(obs_dim);
        for _ in 0..obs_dim {
            clean.push(float(col)?);
            col += 1;
        }
        let mut noisy = Vec::with_capacity(obs_dim);
        for _ in 0..obs_dim {
            noisy.push(float(col)?);
            col += 1;
        }
        let label = int(col)? as u8;
        let p_est = float(col + 1)?;
        let action_noisy = int(col + 2)?;
        let action_clean = int(col + 3)?;
        col += 4;
        let mut q_clean = Vec::with_capacity(actions);
        for _ in 0..actions {
            q_clean.push(float(col)?);
            col += 1;
        }
        let mut q_noisy = Vec::with_capacity(actions);
        for _ in 0..actions {
            q_noisy.push(float(col)?);
            col += 1;
        }
        while recordings.len() <= episode {
            recordings.push(EpisodeRecording::default());
        }
        recordings[episode].steps.push(StepRecord {
            clean,
            noisy,
            label,
            p_est,
            action_noisy,
            action_clean,
            q_clean,
            q_noisy,
        });
    }
    if recordings.is_empty() {
        return Err(CliError::runtime("recording file has no rows"));
    }
    Ok(recordings)
}

/// Checkpoint manifest: enough to rebuild the agent next to the binary
/// network files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub agent: AgentChoice,
    pub m: usize,
    pub obs_dim: usize,
    pub actions: usize,
    pub hyper: HyperConfig,
    /// Role names, one network file per role, in load order.
    pub networks: Vec<String>,
    /// Whether an auxiliary label classifier ships with the checkpoint.
    pub classifier: bool,
    /// Held-out accuracy of that classifier, when present.
    pub classifier_holdout_accuracy: Option<f64>,
}

fn network_path(dir: &Path, role: &str) -> PathBuf {
    dir.join(format!("{role}.ciqp"))
}

/// Write the manifest plus one binary file per network role.
pub fn save_checkpoint(
    dir: &Path,
    handle: &AgentHandle,
    hyper: &HyperConfig,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let kind = handle.kind();
    let roles = network_roles(kind);
    let nets = handle.networks();
    debug_assert_eq!(roles.len(), nets.len());
    for (role, net) in roles.iter().zip(&nets) {
        fs::write(network_path(dir, role), net.to_bytes())?;
    }
    if let Some(classifier) = handle.classifier() {
        fs::write(network_path(dir, "classifier"), classifier.net.to_bytes())?;
    }
    let manifest = CheckpointManifest {
        agent: AgentChoice::from_kind(kind),
        m: handle.m(),
        obs_dim: handle.obs_dim(),
        actions: handle.actions(),
        hyper: hyper.clone(),
        networks: roles.iter().map(|r| r.to_string()).collect(),
        classifier: handle.classifier().is_some(),
        classifier_holdout_accuracy: handle.classifier().map(|c| c.holdout_accuracy),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(())
}

/// Rebuild an agent from [`save_checkpoint`] output.
pub fn load_checkpoint(dir: &Path) -> Result<(AgentHandle, CheckpointManifest), CliError> {
    let manifest: CheckpointManifest = read_json(&dir.join("manifest.json"))?;
    let expected: Vec<String> = network_roles(manifest.agent.kind())
        .iter()
        .map(|r| r.to_string())
        .collect();
    if manifest.networks != expected {
        return Err(CliError::runtime(format!(
            "manifest lists networks {:?}, agent kind needs {:?}",
            manifest.networks, expected
        )));
    }
    let mut nets = Vec::with_capacity(manifest.networks.len());
    for role in &manifest.networks {
        let bytes = fs::read(network_path(dir, role))?;
        nets.push(Mlp::from_bytes(&bytes)?);
    }
    let classifier = if manifest.classifier {
        let bytes = fs::read(network_path(dir, "classifier"))?;
        Some((
            Mlp::from_bytes(&bytes)?,
            manifest.classifier_holdout_accuracy.unwrap_or(f64::NAN),
        ))
    } else {
        None
    };
    let handle = AgentHandle::from_networks(&manifest, nets, classifier)?;
    Ok((handle, manifest))
}
