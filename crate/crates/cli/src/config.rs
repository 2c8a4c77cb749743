//! Run configuration: TOML file plus flag overrides, resolved into a pole
//! field and the numeric knobs of every command. A persisted config re-runs
//! to identical outputs; all outputs embed the SHA-256 of the resolved
//! config.

use escapedim::polefield::{CoeffDecay, PoleField, PoleTail, TailGeometry};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

pub const TOOL_NAME: &str = "escapedim";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunConfig {
    pub family: FamilyConfig,
    pub constants: Constants,
    pub tolerances: Tolerances,
    pub pipeline: PipelineConfig,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            family: FamilyConfig::default(),
            constants: Constants::default(),
            tolerances: Tolerances::default(),
            pipeline: PipelineConfig::default(),
            run: RunSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FamilyConfig {
    pub tag: String,
    pub alpha: f64,
    pub mult: u32,
    pub shift: f64,
    /// CSV pole list for custom fields (header `index,re_a,im_a,re_b,im_b,mult`).
    pub csv: Option<PathBuf>,
    pub singular_bound: Option<f64>,
    /// Sidecar tail declaration for custom fields.
    pub tail: Vec<TailConfig>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            tag: "lattice_power".into(),
            alpha: 3.0,
            mult: 1,
            shift: 0.0,
            csv: None,
            singular_bound: None,
            tail: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TailConfig {
    pub mult: u32,
    /// plane | line | log_spaced
    pub geometry: String,
    pub spacing: f64,
    pub direction: Option<f64>,
    /// power | exp_index | exp_radius | factorial | unknown
    pub coeff: String,
    pub exponent: f64,
    pub rate: f64,
    pub start_index: usize,
    pub start_radius: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            mult: 1,
            geometry: "plane".into(),
            spacing: 1.0,
            direction: None,
            coeff: "power".into(),
            exponent: 3.0,
            rate: 1.0,
            start_index: 1,
            start_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Constants {
    pub koebe_k: f64,
    /// 0 means the default 2KM.
    pub cover_c: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            koebe_k: 12.0,
            cover_c: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Tolerances {
    pub delta: f64,
    pub bracket: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            bracket: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PipelineConfig {
    /// Distortion constant of the cover/desk pipelines (K = 2 is sound at the
    /// radius ratios these budgets use).
    pub koebe_k: f64,
    pub desk_r2: f64,
    pub pool_hi: f64,
    pub n_levels: usize,
    pub ladder: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            koebe_k: 2.0,
            desk_r2: 20.0,
            pool_hi: 80.0,
            n_levels: 64,
            ladder: vec![1e3, 1e4, 1e5, 1e6, 1e7, 1e8],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunSection {
    pub horizon: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Escape radius for orbit classification and rendering.
    pub radius: f64,
    /// Parallelism cap; the ESCAPEDIM_THREADS environment variable lowers it.
    pub threads: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            horizon: 50,
            seed: 7,
            out: None,
            radius: 50.0,
            threads: 1,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialized config.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_toml().as_bytes());
        let digest = h.finalize();
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    /// Effective thread cap: config value bounded by ESCAPEDIM_THREADS.
    pub fn effective_threads(&self) -> usize {
        let cap = std::env::var("ESCAPEDIM_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(usize::MAX);
        self.run.threads.clamp(1, cap.max(1))
    }

    /// Build the pole field this config describes.
    pub fn build_field(&self) -> escapedim::Result<PoleField> {
        match self.family.tag.as_str() {
            "lattice_power" => PoleField::lattice_power(self.family.alpha, self.family.mult),
            "lattice_exp" => PoleField::lattice_exp(self.family.mult),
            "log_poles" => Ok(PoleField::log_poles()),
            "gamma" => PoleField::gamma(self.family.shift),
            "custom" => {
                let path = self.family.csv.as_ref().ok_or_else(|| {
                    escapedim::Error::BadParameter("custom family needs a csv path".into())
                })?;
                let text = std::fs::read_to_string(path).map_err(|e| {
                    escapedim::Error::BadParameter(format!("cannot read {}: {e}", path.display()))
                })?;
                let tails = self
                    .family
                    .tail
                    .iter()
                    .map(parse_tail)
                    .collect::<Result<Vec<_>, escapedim::Error>>()?;
                let mut f = PoleField::from_csv_str(&text, tails)?;
                if let Some(b) = self.family.singular_bound {
                    f = f.with_singular_bound(b);
                }
                Ok(f)
            }
            other => Err(escapedim::Error::BadParameter(format!(
                "unknown family tag `{other}`"
            ))),
        }
    }

    pub fn cover_c(&self, field: &PoleField) -> f64 {
        if self.constants.cover_c > 0.0 {
            self.constants.cover_c
        } else {
            2.0 * self.pipeline.koebe_k * field.max_mult as f64
        }
    }
}

fn parse_tail(t: &TailConfig) -> Result<PoleTail, escapedim::Error> {
    let geometry = match t.geometry.as_str() {
        "plane" => TailGeometry::Plane,
        "line" => TailGeometry::Line {
            spacing: t.spacing,
            direction: t.direction,
        },
        "log_spaced" => TailGeometry::LogSpaced,
        other => {
            return Err(escapedim::Error::BadParameter(format!(
                "unknown tail geometry `{other}`"
            )))
        }
    };
    let coeff = match t.coeff.as_str() {
        "power" => CoeffDecay::Power {
            exponent: t.exponent,
        },
        "exp_index" => CoeffDecay::ExpIndex { rate: t.rate },
        "exp_radius" => CoeffDecay::ExpRadius { rate: t.rate },
        "factorial" => CoeffDecay::Factorial,
        "unknown" => CoeffDecay::Unknown,
        other => {
            return Err(escapedim::Error::BadParameter(format!(
                "unknown coefficient decay `{other}`"
            )))
        }
    };
    Ok(PoleTail {
        mult: t.mult,
        geometry,
        coeff,
        start_index: t.start_index,
        start_radius: t.start_radius,
    })
}
