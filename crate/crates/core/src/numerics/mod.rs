//! Numeric kernels: complex dense linear algebra, exact rationals, special functions, seeded RNG.

mod matrix;
mod rational;
mod rng;
mod special;

pub use matrix::{
    condition_number, dot, least_squares, left_null_vector, max_abs, rank, singular_values, solve_linear,
    ComplexMatrix, DEFAULT_RANK_TOL,
};
pub use num_complex::Complex64;
pub use rational::{decimal_string, fraction_string, integer, is_integral, parse_fraction, ratio, to_f64, Rational};
pub use rng::{ComplexRng, RandomStream};
pub use special::{gamma_fn, ln_gamma, xx_inverse};
