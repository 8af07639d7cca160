//! Capacity, the minimax saddle point of the hypothesis-testing converse and
//! the single-shot ID converses built on it.

pub mod capacity;
pub mod converse;
pub mod saddle;

pub use capacity::{blahut_arimoto, CapacityResult};
pub use converse::{
    beta_joint, corollary1_bound, corollary2_bound, existing_bound, sup_ds_over_inputs, ConverseReport,
    ConverseVariant, SlackTerms,
};
pub use saddle::{saddle_solve, SaddleResult};
