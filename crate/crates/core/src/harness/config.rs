//! Sweep configuration: JSON with dimensionless grids (`χ = 1`).

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::PropagationSettings;
use crate::error::{Error, Result};
use crate::models::{HamiltonianKind, HamiltonianSpec};
use crate::spincore::DEFAULT_MAX_PARTICLES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    QfiScan,
    QfiVsTime,
    ScalingVsN,
    ReadoutScan,
    NoiseScan,
    FloquetConvergence,
    Semiclassical,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::QfiScan,
        Experiment::QfiVsTime,
        Experiment::ScalingVsN,
        Experiment::ReadoutScan,
        Experiment::NoiseScan,
        Experiment::FloquetConvergence,
        Experiment::Semiclassical,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::QfiScan => "qfi_scan",
            Experiment::QfiVsTime => "qfi_vs_time",
            Experiment::ScalingVsN => "scaling_vs_n",
            Experiment::ReadoutScan => "readout_scan",
            Experiment::NoiseScan => "noise_scan",
            Experiment::FloquetConvergence => "floquet_convergence",
            Experiment::Semiclassical => "semiclassical",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

/// Either an explicit list or an inclusive `{start, stop, step}` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range(RangeGrid),
}

impl Grid {
    pub fn range(start: f64, stop: f64, step: f64) -> Self {
        Grid::Range(RangeGrid { start, stop, step })
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let out = match self {
            Grid::List(v) => v.clone(),
            Grid::Range(r) => {
                if !(r.step > 0.0) || !r.start.is_finite() || !r.stop.is_finite() || r.stop < r.start {
                    return Err(Error::Config(format!("bad range {r:?}")));
                }
                let count = ((r.stop - r.start) / r.step + 1e-9).floor() as usize + 1;
                if count > 1_000_000 {
                    return Err(Error::Config("range has more than 10^6 points".into()));
                }
                // Rounded so that 0.1 + 2·0.1 prints as 0.3.
                (0..count).map(|k| ((r.start + k as f64 * r.step) * 1e12).round() / 1e12).collect()
            }
        };
        if out.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("grid holds a non-finite value".into()));
        }
        Ok(out)
    }
}

/// Named grids. Units: `delta` in `Nχ`, `time` in `1/χ` (for
/// `scaling_vs_n`, in units of `3(1.9 + 0.55 ln N)/N`), `omega0` as
/// `Ω₀/(2πNχ)`, `sigma` in atoms, `phi` in radians.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<Grid>,
}

fn required(grid: &Option<Grid>, name: &str) -> Result<Vec<f64>> {
    grid.as_ref().ok_or_else(|| Error::Config(format!("grid `{name}` is required")))?.values()
}

impl Grids {
    pub fn n_values(&self) -> Result<Vec<usize>> {
        required(&self.n, "n")?
            .into_iter()
            .map(|v| {
                if v < 1.0 || v.fract() != 0.0 || v > DEFAULT_MAX_PARTICLES as f64 {
                    Err(Error::Config(format!("particle number {v} must be an integer in 1..={DEFAULT_MAX_PARTICLES}")))
                } else {
                    Ok(v as usize)
                }
            })
            .collect()
    }

    pub fn delta_values(&self) -> Result<Vec<f64>> {
        required(&self.delta, "delta")
    }

    pub fn time_values(&self) -> Result<Vec<f64>> {
        let t = required(&self.time, "time")?;
        if t.iter().any(|&v| v < 0.0) || t.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("times must be non-negative and non-decreasing".into()));
        }
        Ok(t)
    }

    pub fn sigma_values(&self) -> Result<Vec<f64>> {
        let s = required(&self.sigma, "sigma")?;
        if s.iter().any(|&v| v < 0.0) {
            return Err(Error::Config("sigma must be non-negative".into()));
        }
        Ok(s)
    }

    pub fn phi_values(&self) -> Result<Vec<f64>> {
        let p = required(&self.phi, "phi")?;
        if p.iter().any(|&v| v == 0.0) {
            return Err(Error::Config("phi must be nonzero".into()));
        }
        Ok(p)
    }

    pub fn omega0_values(&self) -> Result<Vec<f64>> {
        let o = required(&self.omega0, "omega0")?;
        if o.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Config("omega0 must be positive".into()));
        }
        Ok(o)
    }
}

fn default_model() -> HamiltonianSpec {
    HamiltonianSpec::tatnt(1.0, 0.0, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: Experiment,
    /// Template; `chi` and `alpha` are taken from it, `kind` selects the
    /// protocol where an experiment offers a choice.
    #[serde(default = "default_model")]
    pub model: HamiltonianSpec,
    pub grids: Grids,
    #[serde(default)]
    pub settings: PropagationSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl SweepConfig {
    pub fn new(experiment: Experiment, grids: Grids) -> Self {
        Self { experiment, model: default_model(), grids, settings: PropagationSettings::default(), output_path: None }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, ignoring `output_path`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_path = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.settings.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.model.chi > 0.0) || !self.model.chi.is_finite() {
            return Err(Error::Config("model.chi must be positive (the sweep works in units of chi)".into()));
        }
        let g = &self.grids;
        match self.experiment {
            Experiment::QfiScan => {
                if g.n_values()?.len() != 1 {
                    return Err(Error::Config("qfi_scan takes exactly one particle number".into()));
                }
                g.delta_values()?;
                g.time_values()?;
                if self.model.kind != HamiltonianKind::Tatnt {
                    return Err(Error::Config("qfi_scan scans the ideal TATNT model".into()));
                }
            }
            Experiment::QfiVsTime => {
                g.n_values()?;
                g.delta_values()?;
                g.time_values()?;
                g.omega0_values()?;
            }
            Experiment::ScalingVsN => {
                g.n_values()?;
                g.delta_values()?;
                g.time_values()?;
            }
            Experiment::ReadoutScan => {
                g.n_values()?;
                g.time_values()?;
                g.phi_values()?;
                if g.sigma.is_some() {
                    g.sigma_values()?;
                }
                if !matches!(self.model.kind, HamiltonianKind::Tatnt | HamiltonianKind::Oat) {
                    return Err(Error::Config("readout_scan supports TATNT or OAT models".into()));
                }
                if self.model.kind == HamiltonianKind::Tatnt {
                    g.delta_values()?;
                }
            }
            Experiment::NoiseScan => {
                g.n_values()?;
                g.delta_values()?;
                g.time_values()?;
                g.sigma_values()?;
                g.phi_values()?;
            }
            Experiment::FloquetConvergence => {
                g.n_values()?;
                g.delta_values()?;
                g.time_values()?;
                g.omega0_values()?;
            }
            Experiment::Semiclassical => {
                g.n_values()?;
                g.delta_values()?;
                g.time_values()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse_both_forms() {
        let g: Grids = serde_json::from_str(r#"{"n": [100], "delta": {"start": -0.1, "stop": 0.1, "step": 0.05}}"#).unwrap();
        assert_eq!(g.n_values().unwrap(), vec![100]);
        assert_eq!(g.delta_values().unwrap(), vec![-0.1, -0.05, 0.0, 0.05, 0.1]);
        let r = Grid::range(0.0, 0.25, 0.002).values().unwrap();
        assert_eq!(r.len(), 126);
        assert_eq!(r[125], 0.25);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = r#"{"experiment": "qfi_scan", "grids": {"n": [10]}, "extra": 1}"#;
        assert!(SweepConfig::from_json(bad).unwrap_err().is_config());
        let bad_grid = r#"{"experiment": "qfi_scan", "grids": {"n": [10], "nn": [1]}}"#;
        assert!(SweepConfig::from_json(bad_grid).is_err());
    }

    #[test]
    fn empty_time_grid_is_config_error() {
        let cfg = r#"{"experiment": "qfi_scan", "grids": {"n": [10], "delta": [0.3], "time": []}}"#;
        let err = SweepConfig::from_json(cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn hash_ignores_output_path_only() {
        let text = r#"{"experiment": "qfi_scan", "grids": {"n": [10], "delta": [0.3], "time": [0.1]}}"#;
        let mut a = SweepConfig::from_json(text).unwrap();
        let h = a.hash();
        assert_eq!(h.len(), 64);
        a.output_path = Some("elsewhere".into());
        assert_eq!(a.hash(), h);
        a.grids.time = Some(Grid::List(vec![0.2]));
        assert_ne!(a.hash(), h);
    }
}
