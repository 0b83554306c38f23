//! Loss bookkeeping for the superconducting cavity: surface resistance of a
//! normal conductor, the measured electrode-loss scaling and its inversion to
//! a conductivity, the trapped-flux residual resistance, and the quality-factor
//! arithmetic that ties a linewidth budget together.
//!
//! Reference constants for the electrode-loss scaling: the calibrated mode
//! shows 121 kHz of added linewidth for copper-conductivity (5.8e7 S/m)
//! electrodes, falling off as 1/sqrt(conductivity). The trapped-flux residual
//! resistance is 2.2 nOhm per microtesla of frozen-in field, growing with the
//! square root of frequency.

use crate::constants::MU_0;
use crate::error::{Error, Result};
use crate::geometry::{geometry_factor, CavityGeometry, ModeIndex};

/// added linewidth (Hz) of the calibrated TE301 mode at the reference conductivity
const ELECTRODE_REF_LINEWIDTH: f64 = 121.0e3;
/// reference (copper) conductivity for the electrode-loss scaling, S/m
const ELECTRODE_REF_CONDUCTIVITY: f64 = 5.8e7;
/// trapped-flux residual resistance per microtesla at 1 GHz, ohm
const FLUX_RESISTANCE_PER_UT: f64 = 2.2e-9;

/// Surface resistance √(μ0·ω/σ) of a normal conductor at frequency ν.
pub fn surface_resistivity(sigma: f64, nu: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("conductivity must be positive, got {sigma}")));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidInput(format!("frequency must be positive, got {nu}")));
    }
    Ok((MU_0 * 2.0 * std::f64::consts::PI * nu / sigma).sqrt())
}

/// Added cavity linewidth (as Δκ/2π in Hz) from normal-conducting electrodes,
/// using the measured TE301 scaling. Other modes have no calibration and are
/// rejected.
pub fn electrode_linewidth(sigma: f64, mode: ModeIndex) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("conductivity must be positive, got {sigma}")));
    }
    if (mode.m, mode.n, mode.l) != (3, 0, 1) {
        return Err(Error::Unsupported(format!(
            "electrode loss scaling is calibrated for TE301 only, not {}",
            mode.label()
        )));
    }
    Ok(ELECTRODE_REF_LINEWIDTH * (ELECTRODE_REF_CONDUCTIVITY / sigma).sqrt())
}

/// Invert the electrode-loss scaling: conductivity that produces the given
/// added linewidth (Δκ/2π in Hz). Exact inverse of [`electrode_linewidth`].
pub fn conductivity_from_linewidth(delta_kappa: f64) -> Result<f64> {
    if !(delta_kappa > 0.0) || !delta_kappa.is_finite() {
        return Err(Error::InvalidInput(format!(
            "added linewidth must be positive, got {delta_kappa}"
        )));
    }
    Ok(ELECTRODE_REF_CONDUCTIVITY * (ELECTRODE_REF_LINEWIDTH / delta_kappa).powi(2))
}

/// Residual surface resistance from trapped magnetic flux: linear in the
/// frozen-in field, square-root in frequency.
pub fn trapped_flux_resistance(b_trap: f64, nu: f64) -> Result<f64> {
    if !(b_trap >= 0.0) || !b_trap.is_finite() {
        return Err(Error::InvalidInput(format!("trapped field must be ≥ 0, got {b_trap}")));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidInput(format!("frequency must be positive, got {nu}")));
    }
    let b_microtesla = b_trap * 1.0e6;
    Ok(FLUX_RESISTANCE_PER_UT * b_microtesla * (nu / 1.0e9).sqrt())
}

/// Quality factor ceiling imposed by trapped flux, Q = G/R_res.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxQLimit {
    /// zero trapped field: flux losses impose no ceiling
    Unlimited,
    Limited(f64),
}

impl FluxQLimit {
    pub fn value(&self) -> Option<f64> {
        match self {
            FluxQLimit::Unlimited => None,
            FluxQLimit::Limited(q) => Some(*q),
        }
    }
}

pub fn trapped_flux_q_limit(
    geom: &CavityGeometry,
    mode: ModeIndex,
    b_trap: f64,
) -> Result<FluxQLimit> {
    let g = geometry_factor(geom, mode)?;
    let nu = crate::geometry::resonance_frequency(geom, mode)?;
    let r = trapped_flux_resistance(b_trap, nu)?;
    if r == 0.0 {
        return Ok(FluxQLimit::Unlimited);
    }
    Ok(FluxQLimit::Limited(g / r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityFactors {
    pub loaded: f64,
    pub internal: f64,
}

/// Loaded and internal quality factors from the total linewidth and the
/// on-resonance transmission amplitude of a symmetric two-port cavity:
/// Q_loaded = ν/(κ/2π), Q_internal = Q_loaded/(1 − |S21(ν0)|).
pub fn quality_factors(nu: f64, kappa_total: f64, amplitude: f64) -> Result<QualityFactors> {
    if !(nu > 0.0) || !(kappa_total > 0.0) {
        return Err(Error::InvalidInput(
            "frequency and linewidth must both be positive".into(),
        ));
    }
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::InvalidInput(format!(
            "on-resonance transmission amplitude must lie in [0, 1), got {amplitude} \
             (≥ 1 would mean over-unity transmission)"
        )));
    }
    let loaded = nu / kappa_total;
    Ok(QualityFactors { loaded, internal: loaded / (1.0 - amplitude) })
}

/// Linewidth budget of one mode: every component as Δκ/2π in Hz.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LossBudget {
    pub mode: ModeIndex,
    /// walls + residual surface defects (measured input, not predicted)
    pub base_linewidth: f64,
    pub electrode_linewidth: f64,
    pub trapped_flux_linewidth: f64,
    pub total_linewidth: f64,
    pub loaded_q: f64,
    pub internal_q: f64,
}

impl LossBudget {
    /// Assemble a budget from its components. `amplitude` is the on-resonance
    /// transmission amplitude used to split off the coupling contribution.
    pub fn assemble(
        mode: ModeIndex,
        nu: f64,
        base_linewidth: f64,
        electrode_linewidth: f64,
        trapped_flux_linewidth: f64,
        amplitude: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("base", base_linewidth),
            ("electrode", electrode_linewidth),
            ("trapped-flux", trapped_flux_linewidth),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} linewidth must be ≥ 0, got {v}"
                )));
            }
        }
        let total = base_linewidth + electrode_linewidth + trapped_flux_linewidth;
        if total == 0.0 {
            return Err(Error::InvalidInput("all linewidth components are zero".into()));
        }
        let q = quality_factors(nu, total, amplitude)?;
        Ok(LossBudget {
            mode,
            base_linewidth,
            electrode_linewidth,
            trapped_flux_linewidth,
            total_linewidth: total,
            loaded_q: q.loaded,
            internal_q: q.internal,
        })
    }
}
