//! 60 GHz link model: Friis gain with Rayleigh fading, Shannon rate, and
//! the deterministic SNR operating point used to size the cells.
//!
//! Everything here works in linear SI units with powers in milliwatts.
//! Decibel helpers are provided for config parsing only.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel parameter `{name}` must be {requirement}, got {value}")]
    InvalidParam {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("{quantity} must be strictly positive, got {value}")]
    Domain { quantity: &'static str, value: f64 },
    #[error("target SNR {target} is not below the reference SNR {reference}; no radius beyond d0 reaches it")]
    InfeasibleRadius { target: f64, reference: f64 },
}

/// Physical-layer constants shared by every link in the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Noise power spectral density N0 in mW/Hz.
    pub noise_density: f64,
    /// System bandwidth W in Hz.
    pub bandwidth: f64,
    /// Far-field reference distance d0 in meters.
    pub ref_distance: f64,
    /// Path-loss exponent, within [2, 6].
    pub path_loss_exp: f64,
    /// Transmit power P0 in mW.
    pub tx_power: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    /// Interference spectral density I_j in mW/Hz, uniform over clients.
    pub interference_density: f64,
}

impl Default for ChannelParams {
    /// The 60 GHz operating point used throughout the numerical study:
    /// 5 mm wavelength, -134 dBm/MHz noise, 1200 MHz, d0 = 1 m, 0.1 mW,
    /// unit antenna gains, no interference, free-space exponent 2.
    fn default() -> Self {
        Self {
            wavelength: 5e-3,
            noise_density: dbm_per_mhz_to_mw_per_hz(-134.0),
            bandwidth: 1200e6,
            ref_distance: 1.0,
            path_loss_exp: 2.0,
            tx_power: 0.1,
            tx_gain: 1.0,
            rx_gain: 1.0,
            interference_density: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let positive = [
            ("wavelength", self.wavelength),
            ("noise_density", self.noise_density),
            ("bandwidth", self.bandwidth),
            ("ref_distance", self.ref_distance),
            ("path_loss_exp", self.path_loss_exp),
            ("tx_power", self.tx_power),
            ("tx_gain", self.tx_gain),
            ("rx_gain", self.rx_gain),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ChannelError::InvalidParam {
                    name,
                    requirement: "finite and strictly positive",
                    value,
                });
            }
        }
        if !(self.interference_density >= 0.0 && self.interference_density.is_finite()) {
            return Err(ChannelError::InvalidParam {
                name: "interference_density",
                requirement: "finite and non-negative",
                value: self.interference_density,
            });
        }
        if !(2.0..=6.0).contains(&self.path_loss_exp) {
            return Err(ChannelError::InvalidParam {
                name: "path_loss_exp",
                requirement: "within [2, 6]",
                value: self.path_loss_exp,
            });
        }
        Ok(())
    }

    /// Fading-free gain at the reference distance, G^Tx G^Rx λ² / (16π²).
    fn reference_gain(&self) -> f64 {
        self.tx_gain * self.rx_gain * self.wavelength * self.wavelength / (16.0 * PI * PI)
    }

    /// Effective noise-plus-interference power over the band, in mW.
    fn noise_power(&self) -> f64 {
        (self.noise_density + self.interference_density) * self.bandwidth
    }

    /// SNR at (or inside) the reference distance: P0 λ² / (16π² N0 W).
    ///
    /// Antenna gains are included; with the default unit gains this is the
    /// textbook operating-point constant.
    pub fn reference_snr(&self) -> f64 {
        self.tx_power * self.reference_gain() / (self.noise_density * self.bandwidth)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// dBm/MHz to mW/Hz: -134 dBm/MHz becomes 10^(-19.4) mW/Hz.
pub fn dbm_per_mhz_to_mw_per_hz(dbm_per_mhz: f64) -> f64 {
    db_to_linear(dbm_per_mhz) / 1e6
}

/// Power gain of one link: G^Tx G^Rx λ² α / (16π² (d/d0)^η).
///
/// No near-field clamp: for d < d0 the ratio is applied as written.
pub fn compute_gain(p: &ChannelParams, distance: f64, fading: f64) -> Result<f64, ChannelError> {
    if !(distance > 0.0) {
        return Err(ChannelError::Domain {
            quantity: "distance",
            value: distance,
        });
    }
    if !(fading > 0.0) {
        return Err(ChannelError::Domain {
            quantity: "fading",
            value: fading,
        });
    }
    let path_loss = (distance / p.ref_distance).powf(p.path_loss_exp);
    Ok(p.reference_gain() * fading / path_loss)
}

/// Shannon rate W log2(1 + P G / ((N0 + I) W)) in bits per second.
pub fn compute_rate(p: &ChannelParams, gain: f64) -> f64 {
    let snr = p.tx_power * gain / p.noise_power();
    p.bandwidth * snr.ln_1p() / std::f64::consts::LN_2
}

/// Deterministic (fading-free) SNR at distance `d` from an AP. Constant
/// inside the reference distance, decaying as (d/d0)^-η beyond it.
pub fn snr_at_distance(p: &ChannelParams, d: f64) -> f64 {
    let reference = p.reference_snr();
    if d <= p.ref_distance {
        reference
    } else {
        reference * (d / p.ref_distance).powf(-p.path_loss_exp)
    }
}

/// The unique r > d0 with `snr_at_distance(r) == target_snr`.
pub fn cell_radius(p: &ChannelParams, target_snr: f64) -> Result<f64, ChannelError> {
    if !(target_snr > 0.0) {
        return Err(ChannelError::Domain {
            quantity: "target SNR",
            value: target_snr,
        });
    }
    let reference = p.reference_snr();
    if target_snr >= reference {
        return Err(ChannelError::InfeasibleRadius {
            target: target_snr,
            reference,
        });
    }
    Ok(p.ref_distance * (reference / target_snr).powf(1.0 / p.path_loss_exp))
}

/// One AP-client link drawn in a time slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRealization {
    pub distance: f64,
    pub fading: f64,
    pub gain: f64,
    pub rate: f64,
}

impl LinkRealization {
    pub fn new(p: &ChannelParams, distance: f64, fading: f64) -> Result<Self, ChannelError> {
        let gain = compute_gain(p, distance, fading)?;
        Ok(Self {
            distance,
            fading,
            gain,
            rate: compute_rate(p, gain),
        })
    }

    /// Received power P0 G in mW, the quantity an RSSI-based policy compares.
    pub fn received_power(&self, p: &ChannelParams) -> f64 {
        p.tx_power * self.gain
    }
}
