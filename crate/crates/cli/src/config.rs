//! TOML run configuration. Every section is optional and falls back to the
//! experiment defaults; relative input paths resolve against the config
//! file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::Deserialize;

use specreg::backtest::{Cleaning, StrategyKind, StrategySpec, VolCentering};
use specreg::market_data::{CsvFormat, GapPolicy};
use specreg::regime::IndicatorMode;
use specreg::spectrum::WindowSpec;
use specreg::synth::TwoRegimeConfig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub window: WindowSection,
    pub cleaning: CleaningSection,
    pub regime: RegimeSection,
    pub strategies: StrategiesSection,
    pub betas: BetasSection,
    pub output: OutputSection,
    pub synth: SynthSection,
    pub markets: BTreeMap<String, MarketSection>,
    pub merged: MergedSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    /// Window length T in trading days.
    pub length: usize,
    /// Step between windows in trading days.
    pub step: usize,
    /// Eigenvalues reported per window.
    pub top_k: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            length: 252,
            step: 5,
            top_k: 4,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningSection {
    pub method: Cleaning,
    pub delta: f64,
}

impl Default for CleaningSection {
    fn default() -> Self {
        Self {
            method: Cleaning::ClipAndShrink,
            delta: 0.1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeSection {
    /// Smoothing length in rebalance steps.
    pub ell: usize,
    pub mode: IndicatorMode,
}

impl Default for RegimeSection {
    fn default() -> Self {
        Self {
            ell: 2,
            mode: IndicatorMode::Causal,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategiesSection {
    pub kinds: Vec<StrategyKind>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub vol_centering: VolCentering,
}

impl Default for StrategiesSection {
    fn default() -> Self {
        Self {
            kinds: StrategyKind::ALL.to_vec(),
            gamma1: 0.3,
            gamma2: 0.2,
            vol_centering: VolCentering::AnnualizedMean,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetasSection {
    pub top_k: usize,
}

impl Default for BetasSection {
    fn default() -> Self {
        Self { top_k: 3 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub seed: u64,
    pub n_assets: usize,
    pub n_days: usize,
    pub segment_len: usize,
    pub rho_calm: f64,
    pub rho_crisis: f64,
    pub vol: f64,
    pub drift_calm: f64,
    pub drift_crisis: f64,
    pub start_date: NaiveDate,
}

impl Default for SynthSection {
    fn default() -> Self {
        let g = TwoRegimeConfig::default();
        Self {
            seed: 1,
            n_assets: g.n_assets,
            n_days: g.n_days,
            segment_len: g.segment_len,
            rho_calm: g.rho_calm,
            rho_crisis: g.rho_crisis,
            vol: g.vol,
            drift_calm: g.drift_calm,
            drift_crisis: g.drift_crisis,
            start_date: g.start_date,
        }
    }
}

impl SynthSection {
    pub fn generator(&self) -> TwoRegimeConfig {
        TwoRegimeConfig {
            n_assets: self.n_assets,
            n_days: self.n_days,
            segment_len: self.segment_len,
            rho_calm: self.rho_calm,
            rho_crisis: self.rho_crisis,
            vol: self.vol,
            drift_calm: self.drift_calm,
            drift_crisis: self.drift_crisis,
            start_date: self.start_date,
            ..TwoRegimeConfig::default()
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: CsvFormat,
    #[serde(default)]
    pub max_forward_fill_days: Option<usize>,
    #[serde(default)]
    pub max_missing_fraction: Option<f64>,
}

fn default_format() -> CsvFormat {
    CsvFormat::Wide
}

impl MarketSection {
    pub fn gap_policy(&self) -> GapPolicy {
        let d = GapPolicy::default();
        GapPolicy {
            max_forward_fill_days: self.max_forward_fill_days.unwrap_or(d.max_forward_fill_days),
            max_missing_fraction: self.max_missing_fraction.unwrap_or(d.max_missing_fraction),
        }
    }
}

/// The universe formed by joining every market on common dates.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergedSection {
    pub enabled: bool,
    pub name: String,
}

impl Default for MergedSection {
    fn default() -> Self {
        Self {
            enabled: false,
            name: "merged".into(),
        }
    }
}

impl RunConfig {
    /// Reads and validates a config file. Input paths become absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file `{}`", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("invalid config file `{}`", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for m in cfg.markets.values_mut() {
            if m.path.is_relative() {
                m.path = base.join(&m.path);
            }
        }
        if let Some(dir) = cfg.output.dir.as_mut() {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.window_spec()?;
        if self.window.top_k == 0 {
            bail!("window.top_k must be at least 1");
        }
        if self.betas.top_k == 0 {
            bail!("betas.top_k must be at least 1");
        }
        if self.strategies.kinds.is_empty() {
            bail!("strategies.kinds must name at least one strategy");
        }
        for kind in &self.strategies.kinds {
            self.strategy(*kind).validate()?;
        }
        for (name, m) in &self.markets {
            if !m.path.is_file() {
                bail!("market `{name}`: input file `{}` not found", m.path.display());
            }
            m.gap_policy().validate()?;
        }
        if self.merged.enabled && self.markets.len() < 2 {
            bail!("merged universe needs at least 2 markets");
        }
        if self.merged.enabled && self.markets.contains_key(&self.merged.name) {
            bail!("merged universe name `{}` collides with a market", self.merged.name);
        }
        self.synth.generator().validate()?;
        Ok(())
    }

    pub fn window_spec(&self) -> Result<WindowSpec> {
        Ok(WindowSpec::new(self.window.length, self.window.step)?)
    }

    pub fn strategy(&self, kind: StrategyKind) -> StrategySpec {
        StrategySpec {
            kind,
            cleaning: self.cleaning.method,
            delta: self.cleaning.delta,
            gamma1: self.strategies.gamma1,
            gamma2: self.strategies.gamma2,
            indicator_mode: self.regime.mode,
            ell: self.regime.ell,
            vol_centering: self.strategies.vol_centering,
        }
    }

    pub fn require_markets(&self) -> Result<()> {
        if self.markets.is_empty() {
            bail!("config defines no [markets.<name>] section");
        }
        Ok(())
    }
}
