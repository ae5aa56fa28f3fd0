use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::climate::FillPolicy;
use crate::grid::BusId;
use crate::rating::RatingMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Reduce,
    Climate,
    Renewables,
    Load,
    #[serde(alias = "rate")]
    Rating,
    Scuc,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Reduce,
        Stage::Climate,
        Stage::Renewables,
        Stage::Load,
        Stage::Rating,
        Stage::Scuc,
        Stage::Report,
    ];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Reduce => "reduce",
            Stage::Climate => "climate",
            Stage::Renewables => "renewables",
            Stage::Load => "load",
            Stage::Rating => "rating",
            Stage::Scuc => "scuc",
            Stage::Report => "report",
        })
    }
}

/// Which line limits a commitment run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitMode {
    Static,
    Daily,
    Hourly,
}

impl LimitMode {
    pub fn rating_mode(self) -> Option<RatingMode> {
        match self {
            LimitMode::Static => None,
            LimitMode::Daily => Some(RatingMode::Daily),
            LimitMode::Hourly => Some(RatingMode::Hourly),
        }
    }
}

impl fmt::Display for LimitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LimitMode::Static => "static",
            LimitMode::Daily => "daily",
            LimitMode::Hourly => "hourly",
        })
    }
}

impl std::str::FromStr for LimitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" => Ok(LimitMode::Static),
            "daily" => Ok(LimitMode::Daily),
            "hourly" => Ok(LimitMode::Hourly),
            other => Err(format!("unknown limit mode '{other}' (static, daily or hourly)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportKind {
    Prices,
    Congestion,
    DlrCompare,
}

impl ReportKind {
    pub const ALL: [ReportKind; 3] = [ReportKind::Prices, ReportKind::Congestion, ReportKind::DlrCompare];
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportKind::Prices => "prices",
            ReportKind::Congestion => "congestion",
            ReportKind::DlrCompare => "dlr-compare",
        })
    }
}

impl std::str::FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "prices" => Ok(ReportKind::Prices),
            "congestion" => Ok(ReportKind::Congestion),
            "dlr-compare" | "dlr_compare" => Ok(ReportKind::DlrCompare),
            other => Err(format!("unknown report '{other}' (prices, congestion or dlr-compare)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub out: PathBuf,
    pub seed: u64,
    pub stages: Vec<Stage>,
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            seed: 0,
            stages: Stage::ALL.to_vec(),
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSection {
    pub dir: PathBuf,
    /// Cluster count for the geographic reduction; absent keeps every bus.
    #[serde(default)]
    pub reduce_to: Option<usize>,
    /// Buses that survive the reduction unmerged.
    #[serde(default)]
    pub keep: Vec<BusId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClimateSection {
    pub path: Option<PathBuf>,
    pub fill: FillPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenewablesSection {
    pub specs: Option<PathBuf>,
    /// `timestamp,target_mw` series the wind farms are calibrated against.
    pub calibrate_target: Option<PathBuf>,
    pub solar_headroom: f64,
}

impl Default for RenewablesSection {
    fn default() -> Self {
        Self {
            specs: None,
            calibrate_target: None,
            solar_headroom: 1.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadSection {
    pub zonal: Option<PathBuf>,
    /// Absent: equal weights within each zone.
    pub factors: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatingSection {
    /// Rating files written by the rating stage.
    pub modes: Vec<RatingMode>,
    /// Overrides merged over the built-in conductor table.
    pub conductors: Option<PathBuf>,
    pub conductor_height: f64,
    pub wind_angle: f64,
}

impl Default for RatingSection {
    fn default() -> Self {
        Self {
            modes: vec![RatingMode::Daily, RatingMode::Hourly],
            conductors: None,
            conductor_height: 30.0,
            wind_angle: 45.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScucSection {
    /// Empty: every whole day of the horizon.
    pub days: Vec<NaiveDate>,
    pub limits: Vec<LimitMode>,
    pub reserve: f64,
    pub segments: usize,
    pub gap: f64,
    /// Seconds per solve.
    pub time_limit: Option<f64>,
    /// $/MWh; absent forbids load shedding.
    pub shed_penalty: Option<f64>,
    pub initial_state: Option<PathBuf>,
    pub export_mps: bool,
}

impl Default for ScucSection {
    fn default() -> Self {
        Self {
            days: Vec::new(),
            limits: vec![LimitMode::Daily, LimitMode::Hourly],
            reserve: 0.03,
            segments: 3,
            gap: 1e-4,
            time_limit: None,
            shed_penalty: None,
            initial_state: None,
            export_mps: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub kinds: Vec<ReportKind>,
    pub svg: bool,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            kinds: ReportKind::ALL.to_vec(),
            svg: false,
        }
    }
}

/// A whole run, read from TOML. Relative paths resolve against the
/// directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    pub case: CaseSection,
    #[serde(default)]
    pub climate: ClimateSection,
    #[serde(default)]
    pub renewables: RenewablesSection,
    #[serde(default)]
    pub load: LoadSection,
    #[serde(default)]
    pub rating: RatingSection,
    #[serde(default)]
    pub scuc: ScucSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Validation(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.run.out)
    }

    pub fn wants(&self, stage: Stage) -> bool {
        self.run.stages.contains(&stage)
    }

    /// Parameter checks that need no file access.
    pub fn check(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Validation(m));
        if self.run.stages.is_empty() {
            return bad("no stages requested".into());
        }
        if self.case.reduce_to == Some(0) {
            return bad("case.reduce_to must be positive".into());
        }
        if !(self.renewables.solar_headroom >= 1.0 && self.renewables.solar_headroom.is_finite()) {
            return bad(format!("renewables.solar_headroom {} must be at least 1", self.renewables.solar_headroom));
        }
        if !(self.rating.conductor_height > 0.0) {
            return bad("rating.conductor_height must be positive".into());
        }
        if !(0.0..=90.0).contains(&self.rating.wind_angle) {
            return bad("rating.wind_angle must lie in [0, 90] degrees".into());
        }
        if self.scuc.limits.is_empty() {
            return bad("scuc.limits is empty".into());
        }
        if !(0.0..1.0).contains(&self.scuc.reserve) {
            return bad(format!("scuc.reserve {} must lie in [0, 1)", self.scuc.reserve));
        }
        if !(self.scuc.gap >= 0.0 && self.scuc.gap.is_finite()) {
            return bad(format!("scuc.gap {} must be a non-negative number", self.scuc.gap));
        }
        if self.scuc.time_limit.is_some_and(|t| !(t > 0.0)) {
            return bad("scuc.time_limit must be positive".into());
        }
        if self.scuc.shed_penalty.is_some_and(|p| !(p > 0.0)) {
            return bad("scuc.shed_penalty must be positive".into());
        }
        Ok(())
    }
}
