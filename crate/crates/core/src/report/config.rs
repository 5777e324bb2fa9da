//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifgls::{ArOrder, IfglsConfig};
use crate::ingest::{parse_timestamp, ColumnMap, Feature, FilterRules, TurbulenceSource};
use crate::mars::MarsConfig;
use crate::rsp::RspConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub path: Option<PathBuf>,
    /// Inclusive bounds on the record timestamps.
    pub start: Option<String>,
    pub end: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnsSection {
    pub timestamp: String,
    pub power: String,
    pub wind_speed: String,
    pub wind_dir: String,
    pub out_temp: String,
    /// A column name, or `StdColumn/MeanColumn` to derive it as a ratio.
    pub turb_intensity: String,
    pub wind_dir_sd: String,
    pub out_temp_sd: String,
    pub pitch: String,
    pub delimiter: Option<String>,
}

impl Default for ColumnsSection {
    fn default() -> Self {
        let m = ColumnMap::default();
        ColumnsSection {
            timestamp: m.timestamp,
            power: m.power_kw,
            wind_speed: m.wind_speed,
            wind_dir: m.wind_dir,
            out_temp: m.out_temp,
            turb_intensity: m.turb_intensity.to_string(),
            wind_dir_sd: m.wind_dir_sd,
            out_temp_sd: m.out_temp_sd,
            pitch: m.pitch_deg,
            delimiter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub idle_power_max_kw: f64,
    pub pitch_max_deg: f64,
    pub grid_step_minutes: i64,
}

impl Default for FilterSection {
    fn default() -> Self {
        let r = FilterRules::default();
        FilterSection {
            idle_power_max_kw: r.idle_power_max_kw,
            pitch_max_deg: r.pitch_max_deg,
            grid_step_minutes: r.grid_step.num_minutes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    #[serde(rename = "use")]
    pub use_: Vec<Feature>,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            use_: Feature::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarsSection {
    pub max_terms: Option<usize>,
    pub max_degree: usize,
    pub penalty: f64,
    pub min_rel_improvement: f64,
}

impl Default for MarsSection {
    fn default() -> Self {
        let c = MarsConfig::default();
        MarsSection {
            max_terms: c.max_terms,
            max_degree: c.max_degree,
            penalty: c.penalty,
            min_rel_improvement: c.min_rel_improvement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IfglsSection {
    /// Fixed AR order; when absent the order is chosen by BIC up to `p_max`.
    pub ar_order: Option<usize>,
    pub p_max: usize,
    pub conv_threshold: f64,
    pub alpha_lb: f64,
    pub max_iter: usize,
}

impl Default for IfglsSection {
    fn default() -> Self {
        let c = IfglsConfig::default();
        let p_max = match c.order {
            ArOrder::Select { max } => max,
            ArOrder::Fixed(p) => p,
        };
        IfglsSection {
            ar_order: None,
            p_max,
            conv_threshold: c.conv_threshold,
            alpha_lb: c.alpha_lb,
            max_iter: c.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RspSection {
    pub n: usize,
    pub k: usize,
    pub l_min: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: Option<u64>,
}

impl Default for RspSection {
    fn default() -> Self {
        let c = RspConfig::default();
        RspSection {
            n: c.n,
            k: c.k,
            l_min: c.l_min,
            permutations: c.permutations,
            alpha: c.alpha,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSection,
    pub columns: ColumnsSection,
    pub filter: FilterSection,
    pub features: FeaturesSection,
    pub mars: MarsSection,
    pub ifgls: IfglsSection,
    pub rsp: RspSection,
    pub output: OutputSection,
}

/// Commented template with every default filled in.
pub const DEFAULT_CONFIG: &str = r#"# Phase I SCADA analysis configuration.

[input]
# path = "R80711_2013.csv"
# Optional inclusive time window.
# start = "2012-12-31T23:00:00Z"
# end = "2013-04-01T22:00:00Z"

[columns]
timestamp = "Date_time"
power = "P_avg"
wind_speed = "Ws_avg"
wind_dir = "Wa_avg"
out_temp = "Ot_avg"
# Either a column or "StdColumn/MeanColumn", e.g. "Ws_std/Ws_avg".
turb_intensity = "Va_avg"
wind_dir_sd = "Wa_std"
out_temp_sd = "Ot_std"
pitch = "Ba_avg"
# delimiter = ";"     # detected from the header when omitted

[filter]
idle_power_max_kw = 0.0
pitch_max_deg = 20.0
grid_step_minutes = 10

[features]
use = ["wind_speed", "wind_dir", "out_temp", "turb_intensity", "wind_dir_sd", "out_temp_sd", "month"]

[mars]
# max_terms = 141      # default: min(20 * features + 1, 201)
max_degree = 2
penalty = 2.0
min_rel_improvement = 1e-6

[ifgls]
# ar_order = 1         # fixed order; otherwise BIC up to p_max
p_max = 5
conv_threshold = 0.001
alpha_lb = 0.05
max_iter = 50

[rsp]
n = 6
k = 50
l_min = 5
permutations = 1000
alpha = 0.05
# seed = 20130101      # required by analyze / run-all unless given with --seed

[output]
dir = "out"
"#;

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.mars_config().validate()?;
        self.ifgls_config().validate()?;
        RspConfig {
            seed: 0,
            ..self.rsp_config_unseeded()
        }
        .validate()?;
        if self.features.use_.is_empty() {
            return Err(Error::InvalidConfig("features.use must name at least one feature".into()));
        }
        if self.filter.grid_step_minutes <= 0 {
            return Err(Error::InvalidConfig("filter.grid_step_minutes must be > 0".into()));
        }
        if let Some(d) = &self.columns.delimiter {
            if d.len() != 1 {
                return Err(Error::InvalidConfig(format!("columns.delimiter must be one byte, got {d:?}")));
            }
        }
        for (key, v) in [("input.start", &self.input.start), ("input.end", &self.input.end)] {
            if let Some(s) = v {
                if parse_timestamp(s).is_none() {
                    return Err(Error::InvalidConfig(format!("{key}: cannot parse timestamp {s:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn column_map(&self) -> ColumnMap {
        let c = &self.columns;
        ColumnMap {
            timestamp: c.timestamp.clone(),
            power_kw: c.power.clone(),
            wind_speed: c.wind_speed.clone(),
            wind_dir: c.wind_dir.clone(),
            out_temp: c.out_temp.clone(),
            turb_intensity: TurbulenceSource::parse(&c.turb_intensity),
            wind_dir_sd: c.wind_dir_sd.clone(),
            out_temp_sd: c.out_temp_sd.clone(),
            pitch_deg: c.pitch.clone(),
            delimiter: c.delimiter.as_ref().map(|d| d.as_bytes()[0]),
        }
    }

    pub fn filter_rules(&self) -> FilterRules {
        FilterRules {
            idle_power_max_kw: self.filter.idle_power_max_kw,
            pitch_max_deg: self.filter.pitch_max_deg,
            grid_step: chrono::Duration::minutes(self.filter.grid_step_minutes),
        }
    }

    pub fn mars_config(&self) -> MarsConfig {
        MarsConfig {
            max_terms: self.mars.max_terms,
            max_degree: self.mars.max_degree,
            penalty: self.mars.penalty,
            min_rel_improvement: self.mars.min_rel_improvement,
        }
    }

    pub fn ifgls_config(&self) -> IfglsConfig {
        IfglsConfig {
            order: match self.ifgls.ar_order {
                Some(p) => ArOrder::Fixed(p),
                None => ArOrder::Select { max: self.ifgls.p_max },
            },
            conv_threshold: self.ifgls.conv_threshold,
            alpha_lb: self.ifgls.alpha_lb,
            max_iter: self.ifgls.max_iter,
        }
    }

    fn rsp_config_unseeded(&self) -> RspConfig {
        RspConfig {
            n: self.rsp.n,
            k: self.rsp.k,
            l_min: self.rsp.l_min,
            permutations: self.rsp.permutations,
            alpha: self.rsp.alpha,
            seed: self.rsp.seed.unwrap_or(0),
        }
    }

    /// Chart settings; fails when no seed has been given.
    pub fn rsp_config(&self) -> Result<RspConfig> {
        if self.rsp.seed.is_none() {
            return Err(Error::InvalidConfig(
                "rsp.seed is not set; pass --seed or set it in the config".into(),
            ));
        }
        Ok(self.rsp_config_unseeded())
    }
}
