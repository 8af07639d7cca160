//! Dispersion, second-order identification rates and the finite-blocklength
//! engines behind them.

pub mod dispersion;
pub mod finite_n;
pub mod gaussian;
pub mod spectrum;

pub use dispersion::{dispersion_analysis, u_eps, u_eps_vertex, v_eps, DispersionReport, Vertex};
pub use finite_n::{
    achievability_rate, finite_n_converse, finite_n_converse_with, lemma5_code_point, second_order_id_capacity,
    AchievabilityReport, FiniteNOptions, FiniteNReport, Lemma5Params, Lemma5Point, SecondOrderReport,
};
pub use gaussian::{gaussian_quantile, normal_cdf};
pub use spectrum::{spectrum_cdf, spectrum_cdf_capped, SpectrumCDF, SpectrumMode};
