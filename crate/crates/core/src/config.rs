//! Run configuration, read from TOML.
//!
//! ```toml
//! dimension = 1
//! alpha = 2.0
//! t_list = [0.02, 0.05, 0.1, 0.2]
//!
//! [[potential]]
//! weight = 1.0
//! center = [0.0]
//! sharpness = 1.0
//!
//! [grid]            # optional; defaults depend on the dimension
//! points_per_axis = 256
//! half_extent = 16.0
//!
//! [mc]              # every key optional
//! n_paths = 1000000
//! m_steps = 64
//! seed = 1
//! threads = 1
//! proposal_center = [0.0]
//! proposal_sigma = 2.0
//!
//! [validation]      # every key optional
//! n_max = 3
//! gamma = 0.5
//! moment_samples = 1000000
//!
//! [outputs]         # every key optional
//! directory = "out"
//! formats = "both"  # csv | json | both
//! ```
//!
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feynman_kac::{McConfig, Proposal};
use crate::output::OutputFormat;
use crate::potentials::{Component, GaussianMixturePotential};
use crate::spectral::SpectralGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points_per_axis: usize,
    pub half_extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub n_paths: usize,
    pub m_steps: usize,
    pub seed: u64,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposal_center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposal_sigma: Option<f64>,
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            n_paths: 1_000_000,
            m_steps: 64,
            seed: 1,
            threads: 1,
            proposal_center: None,
            proposal_sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSection {
    pub n_max: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub moment_samples: usize,
}

impl Default for ValidationSection {
    fn default() -> Self {
        ValidationSection {
            n_max: 3,
            gamma: None,
            moment_samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub formats: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: "out".into(),
            formats: OutputFormat::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub alpha: f64,
    pub t_list: Vec<f64>,
    pub potential: Vec<Component>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub validation: ValidationSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

impl RunConfig {
    /// Parses and validates; parse errors carry the line and key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// The unit Gaussian in `d = 1` at `α = 2` with default settings.
    pub fn example() -> Self {
        RunConfig {
            dimension: 1,
            alpha: 2.0,
            t_list: vec![0.02, 0.05, 0.1, 0.2],
            potential: vec![Component::new(1.0, vec![0.0], 1.0)],
            grid: None,
            mc: McSection::default(),
            validation: ValidationSection::default(),
            outputs: OutputSection::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("key `{key}`: {msg}")));
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return bad("alpha", format!("need 0 < alpha <= 2, got {}", self.alpha));
        }
        self.potential_checked().map_err(|e| Error::Config(format!("key `potential`: {e}")))?;
        self.grid_checked().map_err(|e| Error::Config(format!("key `grid`: {e}")))?;
        if self.t_list.is_empty() {
            return bad("t_list", "must not be empty".into());
        }
        if let Some(t) = self.t_list.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return bad("t_list", format!("times must be positive and finite, got {t}"));
        }
        if !(1..=5).contains(&self.validation.n_max) {
            return bad("validation.n_max", format!("need 1 <= n_max <= 5, got {}", self.validation.n_max));
        }
        if let Some(g) = self.validation.gamma {
            if !(g > 0.0 && g < self.alpha.min(1.0)) {
                return bad("validation.gamma", format!("need 0 < gamma < min(1, alpha), got {g}"));
            }
        }
        if self.validation.moment_samples < 2 {
            return bad("validation.moment_samples", "need at least 2".into());
        }
        let v = self.potential_checked()?;
        self.mc_config(&v).map_err(|e| Error::Config(format!("key `mc`: {e}")))?;
        Ok(())
    }

    fn potential_checked(&self) -> Result<GaussianMixturePotential> {
        GaussianMixturePotential::new(self.dimension, self.potential.clone())
    }

    fn grid_checked(&self) -> Result<SpectralGrid> {
        match &self.grid {
            Some(g) => SpectralGrid::new(self.dimension, g.points_per_axis, g.half_extent),
            None => SpectralGrid::default_for(self.dimension),
        }
    }

    pub fn potential(&self) -> GaussianMixturePotential {
        self.potential_checked().expect("validated")
    }

    pub fn grid(&self) -> SpectralGrid {
        self.grid_checked().expect("validated")
    }

    /// Monte Carlo settings, with the default proposal for `v` unless
    /// overridden.
    pub fn mc_config(&self, v: &GaussianMixturePotential) -> Result<McConfig> {
        let default = Proposal::default_for(v);
        let cfg = McConfig {
            n_paths: self.mc.n_paths,
            m_steps: self.mc.m_steps,
            proposal: Proposal {
                center: self.mc.proposal_center.clone().unwrap_or(default.center),
                sigma: self.mc.proposal_sigma.unwrap_or(default.sigma),
            },
            seed: self.mc.seed,
            threads: self.mc.threads,
        };
        cfg.validate(v.dimension())?;
        Ok(cfg)
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    /// Thread count and output location do not affect results and are
    /// excluded.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.mc.threads = 1;
        canonical.outputs = OutputSection::default();
        let hash = Sha256::digest(canonical.to_toml_string().as_bytes());
        hex::encode(&hash[..8])
    }
}
