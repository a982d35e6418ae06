//! Run configuration, read from TOML.
//!
//! ```toml
//! horizon = 10000
//! batch_size = 100
//! offline_size = 1200
//! seeds = [0, 1, 2, 3, 4]
//! output_dir = "out"
//!
//! [algorithm]
//! name = "atlas_ada"          # fix | fth | ftfwh | uogd | atlas | atlas_ada
//! meta_rate = "auto"          # auto | self_confident | <number>
//! hint = { kind = "periodic", length = 40, mix = "running" }
//!
//! [shift]
//! kind = "squ"                # lin | squ | sin | ber
//! period = 40
//!
//! [data]
//! source = "synthetic"        # synthetic | csv
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use olas_core::hints::{HintKind, Mix};
use olas_core::shiftsim::ShiftKind;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    Fix,
    Fth,
    Ftfwh,
    Uogd,
    Atlas,
    AtlasAda,
}

impl AlgorithmId {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::Fix => "fix",
            AlgorithmId::Fth => "fth",
            AlgorithmId::Ftfwh => "ftfwh",
            AlgorithmId::Uogd => "uogd",
            AlgorithmId::Atlas => "atlas",
            AlgorithmId::AtlasAda => "atlas_ada",
        }
    }
}

impl FromStr for AlgorithmId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "fix" => AlgorithmId::Fix,
            "fth" => AlgorithmId::Fth,
            "ftfwh" => AlgorithmId::Ftfwh,
            "uogd" => AlgorithmId::Uogd,
            "atlas" => AlgorithmId::Atlas,
            "atlas_ada" => AlgorithmId::AtlasAda,
            other => return Err(HarnessError::Config(format!("unknown algorithm {other:?}"))),
        })
    }
}

/// A keyword or a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeywordOr {
    Number(f64),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintConfig {
    /// none | forward | window | periodic | okm
    pub kind: String,
    /// `L_m`, `L_p` or `L_k`.
    #[serde(default = "default_hint_len")]
    pub length: usize,
    /// "running" for `1/n`, or a constant in [0, 1].
    #[serde(default = "default_mix")]
    pub mix: KeywordOr,
}

fn default_hint_len() -> usize {
    10
}

fn default_mix() -> KeywordOr {
    KeywordOr::Keyword("running".into())
}

impl HintConfig {
    pub fn resolve(&self) -> Result<Option<HintKind>> {
        let mix = match &self.mix {
            KeywordOr::Number(c) if (0.0..=1.0).contains(c) => Mix::Constant(*c),
            KeywordOr::Keyword(k) if k == "running" => Mix::RunningAverage,
            other => return Err(HarnessError::Config(format!("bad hint mix {other:?}"))),
        };
        if self.length == 0 {
            return Err(HarnessError::Config("hint length must be at least 1".into()));
        }
        let len = self.length;
        Ok(match self.kind.to_ascii_lowercase().as_str() {
            "none" => None,
            "forward" | "fwd" => Some(HintKind::Forward),
            "window" | "win" => Some(HintKind::Window { len }),
            "periodic" | "peri" => Some(HintKind::Periodic { len, mix }),
            "okm" => Some(HintKind::Okm { prototypes: len, mix }),
            other => return Err(HarnessError::Config(format!("unknown hint {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: AlgorithmId,
    /// FTFWH window.
    #[serde(default = "default_window")]
    pub window: usize,
    /// "auto" picks the fixed rate for atlas and the self-confident one for
    /// atlas_ada.
    #[serde(default = "default_meta_rate")]
    pub meta_rate: KeywordOr,
    /// Truncates or extends the step pool to this many learners.
    #[serde(default)]
    pub pool_size: Option<usize>,
    /// Overrides the UOGD step size.
    #[serde(default)]
    pub step_size: Option<f64>,
    #[serde(default)]
    pub hint: Option<HintConfig>,
    #[serde(default = "default_prox_tol")]
    pub prox_tol: f64,
    #[serde(default = "default_prox_iters")]
    pub prox_max_iters: usize,
}

fn default_window() -> usize {
    100
}

fn default_meta_rate() -> KeywordOr {
    KeywordOr::Keyword("auto".into())
}

fn default_prox_tol() -> f64 {
    1e-8
}

fn default_prox_iters() -> usize {
    50
}

impl AlgorithmConfig {
    pub fn named(name: AlgorithmId) -> Self {
        Self {
            name,
            window: default_window(),
            meta_rate: default_meta_rate(),
            pool_size: None,
            step_size: None,
            hint: None,
            prox_tol: default_prox_tol(),
            prox_max_iters: default_prox_iters(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    pub kind: String,
    /// Defaults to sqrt(T) rounded to even.
    #[serde(default)]
    pub period: Option<usize>,
    /// Defaults to 1/sqrt(T).
    #[serde(default)]
    pub flip_prob: Option<f64>,
    /// Defaults to uniform.
    #[serde(default)]
    pub mu1: Option<Vec<f64>>,
    /// Defaults to all mass on class 1.
    #[serde(default)]
    pub mu2: Option<Vec<f64>>,
}

impl ShiftConfig {
    pub fn named(kind: ShiftKind) -> Self {
        Self {
            kind: kind.name().into(),
            period: None,
            flip_prob: None,
            mu1: None,
            mu2: None,
        }
    }

    pub fn kind(&self) -> Result<ShiftKind> {
        ShiftKind::from_str(&self.kind).map_err(|_| HarnessError::Config(format!("unknown shift {:?}", self.kind)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Gaussian classes with block-pattern means; the defaults give the
    /// benchmark model.
    Synthetic {
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_block")]
        block: usize,
    },
    /// Pre-featurized files with header `f1,...,fd,label`, labels 1..K.
    /// Online batches resample `online_path` rows class by class.
    Csv { offline_path: PathBuf, online_path: PathBuf },
}

fn default_classes() -> usize {
    3
}

fn default_block() -> usize {
    4
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Synthetic {
            classes: default_classes(),
            block: default_block(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfflineConfig {
    /// Ball radius used while training `f0`, before the online domain is
    /// known.
    pub radius: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub safety_factor: f64,
    pub sigma_floor: f64,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self {
            radius: 100.0,
            max_iters: 2000,
            tol: 1e-6,
            safety_factor: 2.0,
            sigma_floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: usize,
    pub batch_size: usize,
    pub offline_size: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Online domain radius; defaults to `2 max(1, ||f0||)`.
    #[serde(default)]
    pub radius: Option<f64>,
    pub algorithm: AlgorithmConfig,
    pub shift: ShiftConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub offline: OfflineConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl RunConfig {
    /// Synthetic benchmark defaults: `T = 10000`, `N_t = 100`, `N_0 = 1200`.
    pub fn benchmark(algorithm: AlgorithmId, shift: ShiftKind) -> Self {
        Self {
            horizon: 10_000,
            batch_size: 100,
            offline_size: 1200,
            seeds: default_seeds(),
            output_dir: None,
            radius: None,
            algorithm: AlgorithmConfig::named(algorithm),
            shift: ShiftConfig::named(shift),
            data: DataConfig::default(),
            offline: OfflineConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&s).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.horizon == 0 || self.batch_size == 0 || self.offline_size == 0 {
            return bad("horizon, batch_size and offline_size must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("need at least one seed");
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad("radius must be positive");
            }
        }
        if !(self.offline.radius > 0.0) || !(self.offline.safety_factor > 0.0) || !(self.offline.sigma_floor > 0.0) {
            return bad("offline radius, safety factor and sigma floor must be positive");
        }
        if self.algorithm.window == 0 {
            return bad("window must be at least 1");
        }
        if self.algorithm.pool_size == Some(0) {
            return bad("pool_size must be at least 1");
        }
        if let Some(h) = &self.algorithm.hint {
            let kind = h.resolve()?;
            if kind.is_some() && self.algorithm.name != AlgorithmId::AtlasAda {
                return bad("hints apply to atlas_ada only");
            }
        }
        match &self.algorithm.meta_rate {
            KeywordOr::Number(e) if *e >= 0.0 && e.is_finite() => {}
            KeywordOr::Keyword(k) if k == "auto" || k == "self_confident" => {}
            other => return Err(HarnessError::Config(format!("bad meta_rate {other:?}"))),
        }
        self.shift.kind()?;
        if let DataConfig::Synthetic { classes, block } = self.data {
            if classes < 2 || block == 0 {
                return bad("synthetic data needs K >= 2 and block >= 1");
            }
        }
        Ok(())
    }

    pub fn hint_kind(&self) -> Result<Option<HintKind>> {
        match &self.algorithm.hint {
            Some(h) => h.resolve(),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let s = r#"
            horizon = 200
            batch_size = 10
            offline_size = 300
            seeds = [1, 2]
            [algorithm]
            name = "atlas_ada"
            hint = { kind = "periodic", length = 40, mix = "running" }
            [shift]
            kind = "squ"
            period = 40
            [data]
            source = "synthetic"
        "#;
        let c = RunConfig::from_toml_str(s).unwrap();
        assert_eq!(c.algorithm.name, AlgorithmId::AtlasAda);
        assert_eq!(c.hint_kind().unwrap(), Some(HintKind::Periodic { len: 40, mix: Mix::RunningAverage }));
        let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        let base = |extra: &str| {
            format!("horizon = 5\nbatch_size = 1\noffline_size = 10\n{extra}\n[algorithm]\nname = \"atlas\"\n[shift]\nkind = \"lin\"\n")
        };
        assert!(RunConfig::from_toml_str(&base("")).is_ok());
        assert!(RunConfig::from_toml_str(&base("radius = -1.0")).is_err());
        assert!(RunConfig::from_toml_str(&base("seeds = []")).is_err());
        assert!(RunConfig::from_toml_str(&base("bogus = 1")).is_err());
        assert!(RunConfig::from_toml_str(&base("").replace("lin", "zigzag")).is_err());
        assert!(RunConfig::from_toml_str(&base("").replace("\"atlas\"", "\"rogd\"")).is_err());
    }
}
