//! Unit conversions.
//!
//! Every rate inside the crate is an angular frequency in rad/s and every time
//! is in seconds. User-facing values are ordinary frequencies ν = ω/2π in kHz
//! and times in ms.

use std::f64::consts::TAU;

const RAD_PER_S_PER_KHZ: f64 = TAU * 1e3;

/// ν/2π in kHz → ω in rad/s.
#[inline]
pub fn khz_to_rad(nu_khz: f64) -> f64 {
    nu_khz * RAD_PER_S_PER_KHZ
}

/// ω in rad/s → ν/2π in kHz.
#[inline]
pub fn rad_to_khz(omega: f64) -> f64 {
    omega / RAD_PER_S_PER_KHZ
}

#[inline]
pub fn ms_to_s(t_ms: f64) -> f64 {
    t_ms * 1e-3
}

#[inline]
pub fn s_to_ms(t_s: f64) -> f64 {
    t_s * 1e3
}
