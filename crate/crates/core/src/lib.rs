//! Zero counts, singular series and singular integral for the forms
//!
//! ```text
//! f(x) = f_d(x_1..x_d) + f_d(x_{d+1}..x_{2d}) - x_{2d+1}^d
//! ```
//!
//! where `f_d` is a product of `floor(d/2)` binary sums of squares (times a
//! linear variable when `d` is odd). The crate counts the zeros of `f` in the
//! box `[1, P]^{2d+1}` exactly and compares the count with the asymptotic main
//! term `P^{d+1} * S * J`.

pub mod arith;
pub mod counting;
pub mod error;
pub mod exec;
pub mod expsums;
pub mod forms;
pub mod integral;
pub mod local;
pub mod report;

pub use counting::{CountMethod, CountTable, ExactCount};
pub use error::{Error, Result};
pub use exec::Execution;
pub use forms::FormSpec;

use serde::{Deserialize, Serialize};

/// Resource limits shared by the exact kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    /// Maximum number of points evaluated by brute-force counting.
    pub bruteforce_points: u128,
    /// Maximum number of (value, count) pairs produced by one convolution level.
    pub table_entries: u64,
    /// Largest modulus for which residue-count tables (quadratic cost) are built.
    pub residue_modulus: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            bruteforce_points: 1_000_000_000,
            table_entries: 200_000_000,
            residue_modulus: 1 << 13,
        }
    }
}
