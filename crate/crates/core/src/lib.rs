//! Exact verification of dual certificates for bounds on mutually unbiased
//! bases in low dimension, with the supporting character theory, tableau
//! combinatorics and Hadamard-matrix tools.

pub mod certify;
pub mod cyclotomic;
pub mod hadamard;
pub mod perm;
pub mod smatrix;
pub mod symchar;
pub mod tableaux;
pub mod zeroweight;
