//! Dense real linear-algebra kernels and structural tests.

mod expm;
mod matrix;
mod modal;
pub(crate) mod schur;
mod spectrum;
mod structure;
pub(crate) mod svd;
mod sylvester;

pub use expm::expm;
pub(crate) use expm::expm_dense;
pub use matrix::RealMatrix;
pub use modal::{modal_split, ModalDecomposition, BLOCK_REL};
pub use spectrum::{
    is_detectable, is_neutrally_stable, is_stabilizable, spectrum, AxisClass, SpectrumReport,
    AXIS_REL, CLUSTER_REL, RANK_REL,
};
pub(crate) use spectrum::{axis_tolerance, cluster, mean, shifted, spectrum_dense};
pub use structure::{is_skew_symmetric, spd_sqrt};
pub(crate) use structure::{skew_residual, spd_power};
pub use sylvester::{solve_lyapunov, solve_sylvester};
