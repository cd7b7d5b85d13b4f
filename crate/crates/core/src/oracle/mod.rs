//! Exact evaluation of partition functions, correlations and densities of
//! states. Everything here is independent of the circuit machinery and serves
//! as ground truth for it.

mod brute;
mod dos;
mod transfer;

pub use brute::{
    brute_force_z, brute_force_z_capped, correlation, weighted_sum, CorrelationValue, BRUTE_FORCE_CAP, DEGENERACY_TOL,
};
pub use dos::{density_of_states, dos_cylinder, dos_enumerate, DensityOfStates, DOS_ENUMERATION_CAP, DOS_TRANSFER_CAP};
pub use transfer::{transfer_matrix_z, TRANSFER_CAP};
