//! Content-addressed run directories.
//!
//! A run lives in `<out>/<hash>/` where `hash` is the first 16 hex digits of
//! the SHA-256 of the config serialized as JSON with sorted keys. Everything
//! written there is a pure function of the config; wall-clock time goes to a
//! separate `timing.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exponents::{LifespanBound, RegionClassification};
use crate::functionals::{MonitorSeries, VerificationReport};
use crate::lifespan::{FitResult, SweepConfig, SweepResult, VerdictRecord};
use crate::solver::{GridMeta, Outcome, RunResult, SimConfig};

pub const TOOL_NAME: &str = "blowuplab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MONITORS_FILE: &str = "monitors.csv";
pub const TIMING_FILE: &str = "timing.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const FIT_FILE: &str = "fit.json";
pub const VERIFY_FILE: &str = "verify.json";
pub const SUMMARY_FILE: &str = "summary.csv";

/// JSON with object keys sorted at every level and no whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Map is a BTreeMap here, so a round trip through Value sorts keys.
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let digest = Sha256::digest(canonical_json(value)?.as_bytes());
    Ok(hex::encode(&digest[..8]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Run,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: ArtifactKind,
    pub tool: ToolInfo,
    pub config_hash: String,
    pub config: SimConfig,
    pub classification: Option<RegionClassification>,
    pub outcome: Outcome,
    pub grid: GridMeta,
    pub monitor_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub kind: ArtifactKind,
    pub tool: ToolInfo,
    pub config_hash: String,
    pub config: SweepConfig,
    pub result: SweepResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub fit: FitResult,
    pub bound: LifespanBound,
    pub verdict: Option<VerdictRecord>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `monitors.csv` and `manifest.json` for `result`; returns the run directory.
pub fn write_run(out: &Path, cfg: &SimConfig, result: &RunResult) -> Result<PathBuf> {
    let hash = config_hash(cfg)?;
    let dir = out.join(&hash);
    fs::create_dir_all(&dir)?;
    let file = fs::File::create(dir.join(MONITORS_FILE))?;
    result.monitors.write_csv(std::io::BufWriter::new(file))?;
    let manifest = RunManifest {
        kind: ArtifactKind::Run,
        tool: ToolInfo::default(),
        config_hash: hash,
        config: cfg.clone(),
        classification: crate::exponents::classify(&cfg.params).ok(),
        outcome: result.outcome.clone(),
        grid: result.grid.clone(),
        monitor_rows: result.monitors.len(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

pub fn write_timing(dir: &Path, wall_seconds: f64) -> Result<()> {
    write_json(&dir.join(TIMING_FILE), &Timing { wall_seconds })
}

pub fn read_run(dir: &Path) -> Result<(RunManifest, MonitorSeries)> {
    let manifest: RunManifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.kind != ArtifactKind::Run {
        return Err(Error::InvalidConfig(format!("{} is not a run directory", dir.display())));
    }
    let file = fs::File::open(dir.join(MONITORS_FILE))?;
    let series = MonitorSeries::read_csv(std::io::BufReader::new(file))?;
    Ok((manifest, series))
}

pub fn write_verification(dir: &Path, report: &VerificationReport) -> Result<()> {
    write_json(&dir.join(VERIFY_FILE), report)
}

/// Writes `sweep.csv`, `manifest.json` and, when a fit exists, `fit.json`;
/// returns the sweep directory.
pub fn write_sweep(
    out: &Path,
    cfg: &SweepConfig,
    result: &SweepResult,
    fit: Option<&FitArtifact>,
) -> Result<PathBuf> {
    let hash = config_hash(cfg)?;
    let dir = out.join(&hash);
    fs::create_dir_all(&dir)?;
    let file = fs::File::create(dir.join(SWEEP_FILE))?;
    result.write_csv(std::io::BufWriter::new(file))?;
    let fit_path = dir.join(FIT_FILE);
    match fit {
        Some(fit) => write_json(&fit_path, fit)?,
        None if fit_path.exists() => fs::remove_file(&fit_path)?,
        None => {}
    }
    let manifest = SweepManifest {
        kind: ArtifactKind::Sweep,
        tool: ToolInfo::default(),
        config_hash: hash,
        config: cfg.clone(),
        result: result.clone(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(dir)
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config_hash: String,
    pub kind: ArtifactKind,
    #[serde(rename = "N")]
    pub n: u32,
    pub mu: f64,
    pub p: f64,
    pub q: f64,
    pub a: u8,
    pub b: u8,
    /// Run: its eps. Sweep: the largest eps.
    pub eps: f64,
    /// Run: outcome tag. Sweep: verdict, if any.
    pub status: String,
    /// Run: blow-up time. Sweep: measured exponent.
    pub value: Option<f64>,
}

#[derive(Deserialize)]
struct KindProbe {
    kind: ArtifactKind,
}

/// Collects every manifest under `out` (one directory level), sorted by hash.
pub fn collect_summary(out: &Path) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for entry in fs::read_dir(out)? {
        let dir = entry?.path();
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            continue;
        }
        let text = fs::read_to_string(&path)?;
        let probe: KindProbe = match serde_json::from_str(&text) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        let row = match probe.kind {
            ArtifactKind::Run => {
                let m: RunManifest = serde_json::from_str(&text)?;
                let prm = m.config.params;
                SummaryRow {
                    config_hash: m.config_hash,
                    kind: ArtifactKind::Run,
                    n: prm.n,
                    mu: prm.mu,
                    p: prm.p,
                    q: prm.q,
                    a: prm.a,
                    b: prm.b,
                    eps: m.config.eps,
                    status: m.outcome.tag().into(),
                    value: m.outcome.blow_up_time(),
                }
            }
            ArtifactKind::Sweep => {
                let m: SweepManifest = serde_json::from_str(&text)?;
                let fit: Option<FitArtifact> = read_json(&dir.join(FIT_FILE)).ok();
                let prm = m.config.base.params;
                let verdict = fit.as_ref().and_then(|f| f.verdict.as_ref());
                SummaryRow {
                    config_hash: m.config_hash,
                    kind: ArtifactKind::Sweep,
                    n: prm.n,
                    mu: prm.mu,
                    p: prm.p,
                    q: prm.q,
                    a: prm.a,
                    b: prm.b,
                    eps: m.config.eps_list[0],
                    status: verdict
                        .map(|v| serde_json::to_value(v.verdict).unwrap().as_str().unwrap_or("").to_owned())
                        .unwrap_or_else(|| "no-fit".into()),
                    value: fit.map(|f| f.fit.measured_exponent()).filter(|v| v.is_finite()),
                }
            }
        };
        rows.push(row);
    }
    rows.sort_by(|a, b| a.config_hash.cmp(&b.config_hash));
    Ok(rows)
}

pub fn write_summary(out: &Path, rows: &[SummaryRow]) -> Result<PathBuf> {
    let path = out.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(path)
}
