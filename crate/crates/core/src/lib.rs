//! Rolling correlation spectra, random-matrix cleaning, an eigenvalue-ratio
//! crisis indicator and regime-aware long-only portfolio construction.
//!
//! Every numerical routine is generic over [`Scalar`] (`f64` or `f32`); the
//! aliases at the crate root pin the production `f64` instantiation.

pub mod backtest;
pub mod cleaning;
pub mod error;
pub mod factor;
pub mod market_data;
pub mod portfolio;
pub mod regime;
pub mod scalar;
pub mod spectrum;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PricePanel64 = market_data::PricePanel<f64>;
pub type ReturnPanel64 = market_data::ReturnPanel<f64>;
pub type CorrelationMatrix64 = spectrum::CorrelationMatrix<f64>;
pub type Spectrum64 = spectrum::Spectrum<f64>;
pub type SpectralWindow64 = spectrum::SpectralWindow<f64>;
pub type RegimeSeries64 = regime::RegimeSeries<f64>;
pub type Weights64 = portfolio::Weights<f64>;
pub type BacktestReport64 = backtest::BacktestReport<f64>;
pub type Metrics64 = backtest::Metrics<f64>;
pub type OlsResult64 = factor::OlsResult<f64>;
