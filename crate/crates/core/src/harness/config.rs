use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mobility::CellGrid;
use crate::qnet::QueueNetworkConfig;
use crate::signaling::ProcedureTiming;
use crate::stochastic::{Distribution, DistributionSpec};
use crate::traffic::{ApplicationMix, LinkProfile, TrafficModel, TrafficParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Population sizes emulated by replaying the base trace.
    pub user_counts: Vec<usize>,
    pub instances: Vec<usize>,
    pub budget_ms: f64,
    /// Length of the replayed slice of the base trace.
    pub window_s: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            user_counts: (1..=12).map(|k| k * 100_000).collect(),
            instances: vec![1, 2, 3],
            budget_ms: 1.0,
            window_s: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    /// Sessions drawn to estimate the rate-model inputs.
    pub samples: usize,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        Self { samples: 200_000 }
    }
}

/// Everything a CLI run depends on. An empty file gives the reference
/// scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub num_users: usize,
    pub sim_duration_s: f64,
    pub inactivity_timer_s: f64,
    /// Timer values for `predict-rates`.
    pub timer_sweep_s: Vec<f64>,
    pub output_dir: PathBuf,
    pub mix: ApplicationMix,
    pub traffic: TrafficParams,
    pub link: LinkProfile,
    pub grid: CellGrid,
    /// Per-user speed, m/s.
    pub speed: DistributionSpec,
    pub signaling: ProcedureTiming,
    pub qnet: QueueNetworkConfig,
    pub sweep: SweepConfig,
    pub analytics: AnalyticsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            num_users: 2000,
            sim_duration_s: 1e4,
            inactivity_timer_s: 10.0,
            timer_sweep_s: vec![1.0, 5.0, 10.0, 20.0, 40.0],
            output_dir: PathBuf::from("vmme-out"),
            mix: ApplicationMix::default(),
            traffic: TrafficParams::default(),
            link: LinkProfile::default(),
            grid: CellGrid::default(),
            speed: DistributionSpec::Uniform { min: 0.0, max: 4.2 },
            signaling: ProcedureTiming::default(),
            qnet: QueueNetworkConfig::default(),
            sweep: SweepConfig::default(),
            analytics: AnalyticsConfig::default(),
        }
    }
}

fn timer_ok(field: &str, t: f64) -> Result<()> {
    if t >= 0.0 && !t.is_nan() {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be >= 0, got {t}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::input(line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_users > u32::MAX as usize {
            return Err(Error::param("num_users", format!("must lie in [1, 2^32), got {}", self.num_users)));
        }
        if !(self.sim_duration_s > 0.0 && self.sim_duration_s.is_finite()) {
            return Err(Error::param(
                "sim_duration_s",
                format!("must be finite and > 0, got {}", self.sim_duration_s),
            ));
        }
        timer_ok("inactivity_timer_s", self.inactivity_timer_s)?;
        for (i, &t) in self.timer_sweep_s.iter().enumerate() {
            timer_ok(&format!("timer_sweep_s[{i}]"), t)?;
        }
        self.mix.validate().map_err(|e| e.within("mix"))?;
        TrafficModel::new(&self.traffic, self.link).map_err(|e| e.within("traffic"))?;
        self.grid.validate().map_err(|e| e.within("grid"))?;
        let speed = Distribution::new(self.speed.clone()).map_err(|e| e.within("speed"))?;
        if speed.support().0 < 0.0 {
            return Err(Error::param("speed", "support must be nonnegative"));
        }
        speed.mean().map_err(|e| e.within("speed"))?;
        self.signaling.validate().map_err(|e| e.within("signaling"))?;
        self.qnet.validate().map_err(|e| e.within("qnet"))?;
        let sweep = &self.sweep;
        if sweep.user_counts.is_empty() {
            return Err(Error::param("sweep.user_counts", "must be nonempty"));
        }
        if sweep.user_counts.contains(&0) {
            return Err(Error::param("sweep.user_counts", "entries must be >= 1"));
        }
        if sweep.instances.is_empty() || sweep.instances.contains(&0) {
            return Err(Error::param("sweep.instances", "must be nonempty with entries >= 1"));
        }
        if !(sweep.budget_ms > 0.0) {
            return Err(Error::param("sweep.budget_ms", format!("must be > 0, got {}", sweep.budget_ms)));
        }
        if !(sweep.window_s > 0.0 && sweep.window_s <= self.sim_duration_s) {
            return Err(Error::param(
                "sweep.window_s",
                format!("must lie in (0, sim_duration_s], got {}", sweep.window_s),
            ));
        }
        if self.analytics.samples < 2 {
            return Err(Error::param("analytics.samples", "must be >= 2"));
        }
        Ok(())
    }
}
