//! Sign-carrying unitary propagators built from spin-register rotations,
//! moved between Hilbert subspaces with certified truncation bounds, and
//! their coordinate-space Green functions.
//!
//! Natural units (`hbar = 1`) are the default but every physical formula
//! takes `m`, `omega` and `hbar` explicitly.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual_oracle;
pub mod error;
pub mod exec;
pub mod green_calculus;
pub mod hilbert_core;
pub mod oscillator_basis;
pub mod path_integral;
pub mod perturbation;
pub mod quadrature;
pub mod spin_synthesis;
pub mod subspace_transfer;
pub mod verify;

pub use error::{Result, SicError};
pub use exec::Exec;
pub use hilbert_core::{C64, DenseOperator, GlobalPhase, MonomialOperator, StateVector};

/// The double-valued sign `a` that every construction is parameterized by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogicalSign {
    Plus,
    Minus,
}

impl LogicalSign {
    pub fn from_int(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Self::Plus),
            -1 => Ok(Self::Minus),
            _ => Err(SicError::Contract(format!("logical sign must be +1 or -1, got {v}"))),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Plus => 1.0,
            Self::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Self::Plus => Self::Minus,
            Self::Minus => Self::Plus,
        }
    }

    pub fn both() -> [Self; 2] {
        [Self::Plus, Self::Minus]
    }
}

impl std::fmt::Display for LogicalSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Plus => "+1",
            Self::Minus => "-1",
        })
    }
}
