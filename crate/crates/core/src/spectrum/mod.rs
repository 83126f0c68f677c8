//! Rolling correlation estimation, eigen-decomposition and the
//! Marchenko–Pastur null benchmark.

mod correlation;
mod eigen;
mod mp;
mod series;
mod windows;

pub use correlation::{correlation, CorrelationMatrix};
pub use eigen::{eigendecompose, fix_sign, sorted_eigen, Spectrum};
pub(crate) use eigen::reconstruct;
pub use mp::{empirical_spectral_density, mp_bounds, mp_density, Histogram};
pub use series::{
    eigenvalue_cross_correlation, expanding_standardized_series, spectral_series,
    standardized_series, window_correlation, CrossCorrelation, SpectralWindow,
};
pub use windows::{make_windows, Window, WindowSpec};
