//! Probabilities of heralding outcomes: exact coefficients, lossy detection,
//! approximation schemes, false positives and the loss expansion.

pub mod coefficients;
pub mod detector;
pub mod grid;
pub mod rooftop;
pub mod success;

pub use coefficients::{
    c_coefficient, c_row, d_sum, edge_coefficient, f_factor, f_weight, g_factor, load_or_build, CCoefficientTable,
};
pub use detector::{detector_thinning, DetectorModel};
pub use grid::{resonance_free, Parity, ProbabilityGrid};
pub use rooftop::{FitReport, RooftopModel, Tent};
pub use success::{
    prob_avg, prob_false_positive, prob_succ, prob_succ_ideal, prob_succ_series, shell_tail_bound, shells_for_tail,
    SuccessMethod, SuccessModel, SuccessValue,
};
