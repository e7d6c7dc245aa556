//! Exceptional points and optical-RF double-resonance spectra of a driven
//! four-level atomic magnetometer.
//!
//! The crate covers the model Hamiltonians ([`model`]), non-Hermitian
//! eigenanalysis and exceptional-point search ([`eigen`]), Lindblad dynamics
//! and steady states ([`lindblad`]), resonance spectra and peak splitting
//! ([`spectra`]), and sensing figures of merit ([`sensing`]).
//!
//! Rates are angular frequencies in rad/s internally. Grids and tables that
//! face the user are in kHz (ν = ω/2π) and ms.
//!
//! ```
//! use epmag_core::{eigen, units::khz_to_rad, PhysicalParams};
//!
//! let p = PhysicalParams::from_saturation(0.3, khz_to_rad(0.7), khz_to_rad(5750.0), 0.0, 0.0).unwrap();
//! let j_ep = epmag_core::units::rad_to_khz(eigen::j_ep(&p).unwrap());
//! assert!((j_ep - 0.14849).abs() < 1e-5);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod error;
pub mod export;
pub mod lindblad;
pub mod matrix;
pub mod model;
pub mod optimize;
pub mod sensing;
pub mod spectra;
pub mod units;

pub use error::{Error, Result};
pub use export::Table;
pub use lindblad::{DensityMatrix, Liouvillian, ModelKind, Relaxation};
pub use matrix::ComplexMatrix;
pub use model::{FieldCalibration, ParamsConfig, PhysicalParams};
pub use num_complex::Complex64;
pub use spectra::{Channel, Spectrum, SplittingCurve};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crate_example() {
        let p =
            PhysicalParams::from_saturation(0.3, units::khz_to_rad(0.7), units::khz_to_rad(5750.0), 0.0, 0.0).unwrap();
        let j_ep = units::rad_to_khz(eigen::j_ep(&p).unwrap());
        assert!((j_ep - 0.14849).abs() < 1e-5);
    }
}
