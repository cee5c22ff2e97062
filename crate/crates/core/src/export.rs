//! Config loading, CSV and JSON output, and run manifests.
//!
//! CSV files carry a header row, comma separators, LF line endings and 17
//! significant digits, so every value reads back bit-exact. Files are written
//! through a temporary file in the target directory and renamed into place.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::barrier::{BarrierCurve, ComputedSet};
use crate::error::{Error, Result};
use crate::policy::Trajectory;
use crate::scenario::{reconstruct_removed, validate_config, ModelVariant, Scenario, Tolerances};

pub const FORMAT_VERSION: u32 = 1;

/// Reads and validates a JSON config file.
pub fn load_config(path: &Path) -> Result<(Scenario, Tolerances)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    validate_config(&raw)
}

/// Formats a value with 17 significant digits (positional notation for
/// moderate magnitudes, scientific otherwise).
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor();
    if (-5.0..16.0).contains(&mag) {
        format!("{:.*}", (16.0 - mag) as usize, v)
    } else {
        format!("{v:.16e}")
    }
}

/// Header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<CsvTable> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty CSV".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split(',')
                    .map(|c| c.parse::<f64>().map_err(|e| Error::Parse(format!("{c:?}: {e}"))))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CsvTable { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

fn state_columns(variant: ModelVariant) -> Vec<String> {
    let names: &[&str] = if variant.is_seir() { &["S", "E", "I"] } else { &["S", "I"] };
    names.iter().map(|s| s.to_string()).collect()
}

fn rate_columns(variant: ModelVariant) -> Vec<String> {
    let names: &[&str] = if variant.is_seir() { &["beta", "gamma", "eta"] } else { &["beta", "gamma"] };
    names.iter().map(|s| s.to_string()).collect()
}

/// Barrier curve as `t,S,(E),I,lambda1..k,beta,gamma,(eta),switch_flag`. The
/// flag marks the recorded sample closest to each switch.
pub fn curve_table(curve: &BarrierCurve) -> CsvTable {
    let v = curve.variant;
    let mut header = vec!["t".to_string()];
    header.extend(state_columns(v));
    header.extend((1..=v.dim()).map(|k| format!("lambda{k}")));
    header.extend(rate_columns(v));
    header.push("switch_flag".into());
    let mut flags = vec![0.0; curve.samples.len()];
    for sw in &curve.switch_times {
        let nearest = curve
            .samples
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.t - sw.t).abs().total_cmp(&(b.1.t - sw.t).abs()))
            .map(|(k, _)| k);
        if let Some(k) = nearest {
            flags[k] = 1.0;
        }
    }
    let rows = curve
        .samples
        .iter()
        .zip(flags)
        .map(|(s, flag)| {
            let mut row = vec![s.t];
            row.extend_from_slice(s.state.as_slice());
            row.extend_from_slice(&s.adjoint);
            row.push(s.input.beta);
            row.push(s.input.gamma);
            if v.is_seir() {
                row.push(s.input.eta_or_zero());
            }
            row.push(flag);
            row
        })
        .collect();
    CsvTable { header, rows }
}

/// Trajectory as `t,S,(E),I,R,beta,gamma,(eta)`.
pub fn trajectory_table(variant: ModelVariant, traj: &Trajectory) -> CsvTable {
    let mut header = vec!["t".to_string()];
    header.extend(state_columns(variant));
    header.push("R".into());
    header.extend(rate_columns(variant));
    let rows = traj
        .samples
        .iter()
        .map(|s| {
            let mut row = vec![s.t];
            row.extend_from_slice(s.state.as_slice());
            row.push(reconstruct_removed(&s.state));
            row.push(s.input.beta);
            row.push(s.input.gamma);
            if variant.is_seir() {
                row.push(s.input.eta_or_zero());
            }
            row
        })
        .collect();
    CsvTable { header, rows }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

/// Provenance of one command run. Apart from the optional runtime, identical
/// inputs give identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub scenario: Scenario,
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub flags: BTreeMap<String, String>,
    pub outputs: Vec<OutputFile>,
    /// Wall-clock time of the run. Left out of manifests embedded in other
    /// outputs so that those stay byte-identical across reruns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl Manifest {
    pub fn new(command: &str, config_bytes: &[u8], scenario: &Scenario, tolerances: &Tolerances) -> Self {
        Manifest {
            tool: "epibarrier".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: sha256_hex(config_bytes),
            scenario: scenario.clone(),
            tolerances: *tolerances,
            seed: None,
            flags: BTreeMap::new(),
            outputs: Vec::new(),
            runtime_seconds: None,
        }
    }

    /// Writes `bytes` atomically under `dir` and records its digest.
    pub fn write_output(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&dir.join(name), bytes)?;
        self.outputs.push(OutputFile {
            file: name.into(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }
}

/// Contents of `set.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetDocument {
    pub format_version: u32,
    pub set: ComputedSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<Manifest>,
}

impl SetDocument {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<SetDocument> {
        let doc: SetDocument = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported set.json version {}", doc.format_version)));
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<SetDocument> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        SetDocument::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::assemble_set;
    use crate::policy::{simulate, Policy};
    use crate::{SetKind, StateVec};

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 0.8333333333333334, 1e-9, 2.5e-300, -7.25, 1e20, 123456.789] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(0.5), "0.50000000000000000");
        assert_eq!(fmt_f64(0.0), "0");
    }

    #[test]
    fn digest_matches_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let sc = Scenario::sir_perfect(0.5, (0.6, 0.8), 0.02).unwrap();
        let p = Policy::constant(&sc, 0.7, None, None).unwrap();
        let tr = simulate(&sc, &p, &StateVec::sir(0.8, 0.01), 1.0, &Tolerances::default()).unwrap();
        let table = trajectory_table(sc.variant, &tr);
        assert_eq!(table.header, ["t", "S", "I", "R", "beta", "gamma"]);
        let back = CsvTable::parse(&table.to_csv()).unwrap();
        assert_eq!(back, table);
        let r = back.column("R").unwrap();
        assert!((r[0] - 0.19).abs() < 1e-15);
    }

    #[test]
    fn curve_csv_columns() {
        let sc = Scenario::sir_perfect(0.5, (0.6, 0.8), 0.02).unwrap();
        let set = assemble_set(&sc, SetKind::Admissible, 1, &Tolerances::default()).unwrap();
        let table = curve_table(&set.curves[0]);
        assert_eq!(
            table.header,
            ["t", "S", "I", "lambda1", "lambda2", "beta", "gamma", "switch_flag"]
        );
        assert_eq!(table.rows.len(), set.curves[0].samples.len());
        assert!(table.rows.iter().all(|r| r[7] == 0.0));
    }

    #[test]
    fn set_document_round_trip() {
        let sc = Scenario::sir_perfect(0.5, (0.6, 0.8), 0.02).unwrap();
        let tol = Tolerances::default();
        let set = assemble_set(&sc, SetKind::Mrpi, 1, &tol).unwrap();
        let doc = SetDocument {
            format_version: FORMAT_VERSION,
            set,
            manifest: Some(Manifest::new("barrier", b"{}", &sc, &tol)),
        };
        let back = SetDocument::from_json(&doc.to_json().unwrap()).unwrap();
        let p = StateVec::sir(0.5, 0.01);
        assert_eq!(back.set.membership(&p), doc.set.membership(&p));
        assert_eq!(back.manifest, doc.manifest);
    }

    #[test]
    fn atomic_write_and_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("x.txt");
        write_atomic(&path, b"hello").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"hello");
        write_atomic(&path, b"bye").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"bye");

        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, "{not json").unwrap();
        assert_eq!(load_config(&cfg).unwrap_err().code(), "PARSE");
        assert_eq!(load_config(&dir.path().join("missing.json")).unwrap_err().code(), "IO");
        std::fs::write(&cfg, r#"{"variant":"SIR_PERFECT","beta":[0.6,0.8],"gamma":0.5,"i_max":0.02}"#).unwrap();
        let (s, t) = load_config(&cfg).unwrap();
        assert_eq!(s.i_max, 0.02);
        assert_eq!(t, Tolerances::default());
    }
}
