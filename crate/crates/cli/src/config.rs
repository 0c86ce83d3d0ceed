//! Run-configuration resolution.
//!
//! Every run resolves to a flat key=value map with one entry per
//! setting. Precedence: command-line flags, then a `--config` file,
//! then the `NODAL_MC_SEED` environment variable (seed only), then
//! built-in defaults. The fully resolved map is echoed into every
//! output artifact together with its fingerprint, and feeding the echo
//! back as a config file reproduces the identical run.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nodal_mc::ensembles::{EnsembleDescriptor, SphereBasis};
use nodal_mc::grid::GridGeometry;
use nodal_mc::laws::CoefficientLaw;
use sha2::{Digest, Sha256};

pub const SEED_ENV: &str = "NODAL_MC_SEED";

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    map: BTreeMap<String, String>,
}

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(UsageError(format!(
                    "config line {} is not key=value: {line:?}",
                    lineno + 1
                )));
            };
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    /// Sets the key unless a flag already provided it.
    pub fn default_key(&mut self, key: &str, value: impl ToString) {
        self.map.entry(key.to_string()).or_insert_with(|| value.to_string());
    }

    /// Flag overlay: flags win over file values.
    pub fn overlay(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.set(key, v.to_string());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, UsageError> {
        self.get(key).ok_or_else(|| UsageError(format!("missing required setting '{key}'")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.require(key)?;
        raw.parse::<T>()
            .map_err(|e| UsageError(format!("setting '{key}': cannot parse {raw:?}: {e}")))
    }

    pub fn parse_list_f64(&self, key: &str) -> Result<Vec<f64>, UsageError> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| UsageError(format!("setting '{key}': bad entry {s:?}: {e}")))
            })
            .collect()
    }

    pub fn parse_list_usize(&self, key: &str) -> Result<Vec<usize>, UsageError> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| UsageError(format!("setting '{key}': bad entry {s:?}: {e}")))
            })
            .collect()
    }

    pub fn parse_law(&self) -> Result<CoefficientLaw, UsageError> {
        parse_law(self.require("law")?)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical key=value text (also the config-file round-trip form).
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Hash of the canonical text; stamped into every output artifact.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.map
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        )
    }
}

pub fn parse_law(raw: &str) -> Result<CoefficientLaw, UsageError> {
    let lowered = raw.to_ascii_lowercase();
    match lowered.as_str() {
        "gaussian" => Ok(CoefficientLaw::Gaussian),
        "rademacher" => Ok(CoefficientLaw::Rademacher),
        "uniform" => Ok(CoefficientLaw::Uniform),
        other => {
            if let Some(p) = other.strip_prefix("two-point:").or_else(|| other.strip_prefix("two_point:")) {
                let p: f64 = p
                    .parse()
                    .map_err(|e| UsageError(format!("two-point probability {p:?}: {e}")))?;
                CoefficientLaw::two_point(p).map_err(|e| UsageError(e.to_string()))
            } else {
                Err(UsageError(format!(
                    "unknown law {raw:?} (expected gaussian|rademacher|uniform|two-point:p)"
                )))
            }
        }
    }
}

/// The ensemble descriptor and its natural grid from a resolved config.
pub fn build_ensemble(cfg: &RunConfig) -> Result<(EnsembleDescriptor, GridGeometry), UsageError> {
    let law = cfg.parse_law()?;
    let grid: usize = cfg.parse("grid")?;
    match cfg.require("ensemble")? {
        "arw" => {
            let n: u64 = cfg.parse("n")?;
            Ok((EnsembleDescriptor::Arw { n, law }, GridGeometry::Torus2 { n: grid }))
        }
        "torus-window" => {
            let t: f64 = cfg.parse("t")?;
            let rho: f64 = cfg.parse("rho")?;
            Ok((
                EnsembleDescriptor::TorusWindow { dim: 2, t, rho, law },
                GridGeometry::Torus2 { n: grid },
            ))
        }
        "sphere" => {
            let ell: u32 = cfg.parse("ell")?;
            let basis = match cfg.get("basis").unwrap_or("real") {
                "real" => SphereBasis::RealBasis,
                "complex-bernoulli" => SphereBasis::ComplexBernoulli,
                other => return Err(UsageError(format!("unknown sphere basis {other:?}"))),
            };
            Ok((
                EnsembleDescriptor::Sphere { ell, law, basis },
                GridGeometry::Sphere { n_theta: grid, n_phi: 2 * grid },
            ))
        }
        "rwm" => {
            let j: usize = cfg.parse("j")?;
            let side: f64 = cfg.parse("side")?;
            Ok((
                EnsembleDescriptor::Rwm { j, law },
                GridGeometry::PlaneChart { n: grid, side },
            ))
        }
        other => Err(UsageError(format!(
            "unknown ensemble {other:?} (expected arw|sphere|torus-window|rwm)"
        ))),
    }
}
