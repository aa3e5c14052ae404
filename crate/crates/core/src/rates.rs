//! Closed-form rates: effective Rabi frequency, Raman emission with and
//! without the cavity, Purcell factor and lifetime relations.
//!
//! Frequencies are GHz; rates come back in ns⁻¹ with the 2π made explicit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::TWO_PI;

/// Optical carrier used for the quality factor when none is given (737 nm).
pub const DEFAULT_NU0_THZ: f64 = 406.8;

/// Rounded bare `|e> -> |g2>` emission rate quoted for the device, in GHz.
pub const GAMMA_BARE_QUOTED: f64 = 0.0021;

/// Off-resonant excited-state lifetime of the device, ns.
pub const TAU_OFF: f64 = 1.74;

/// Cavity-resonant excited-state lifetime of the device, ns.
pub const TAU_ON: f64 = 1.14;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

/// `Ω·g/Δ`, the coupling between `|g1,0>` and `|g2,1>` once `|e,0>` is eliminated.
pub fn effective_rabi(omega: f64, g: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::domain(format!("detuning must be nonzero, got {delta}")));
    }
    Ok(omega * g / delta)
}

/// Cavity-enhanced Raman rate `2π·Ω_eff²/κ` in ns⁻¹.
pub fn raman_rate_cavity(p: &ModelParams) -> Result<f64> {
    positive("kappa", p.kappa)?;
    let w = effective_rabi(p.omega_drive, p.g, p.delta_laser)?;
    Ok(TWO_PI * w * w / p.kappa)
}

/// Raman rate of a bare Λ-system, `2π·Γα/(2α + Γ_tot)` with
/// `α = (Ω²/2)·γ/(Δ² + γ²)`.
///
/// `gamma` is the emission rate into the target ground state, `gamma_tot` the
/// total excited-state decay and `gamma_dephase` the optical coherence decay.
pub fn raman_rate_bare(
    omega: f64,
    delta: f64,
    gamma: f64,
    gamma_tot: f64,
    gamma_dephase: f64,
) -> Result<f64> {
    positive("gamma", gamma)?;
    positive("gamma_tot", gamma_tot)?;
    positive("gamma_dephase", gamma_dephase)?;
    let alpha = 0.5 * omega * omega * gamma_dephase / (delta * delta + gamma_dephase * gamma_dephase);
    Ok(TWO_PI * gamma * alpha / (2.0 * alpha + gamma_tot))
}

/// Upper bound of the bare Raman rate: all decay into the target state and a
/// lifetime-limited optical line (`Γ_tot = Γ`, `γ = Γ/2`).
pub fn raman_rate_bare_ideal(omega: f64, delta: f64, gamma: f64) -> Result<f64> {
    raman_rate_bare(omega, delta, gamma, gamma, 0.5 * gamma)
}

/// `F = 4g²/(κ·Γ_bare)`.
pub fn purcell_factor(g: f64, kappa: f64, gamma_bare: f64) -> Result<f64> {
    if !(g >= 0.0) {
        return Err(Error::domain(format!("g must be >= 0, got {g}")));
    }
    positive("kappa", kappa)?;
    positive("gamma_bare", gamma_bare)?;
    Ok(4.0 * g * g / (kappa * gamma_bare))
}

/// Efficiencies bounding the bare `|e> -> |g2>` emission rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PurcellBoundInputs {
    pub eta_radiative: f64,
    pub eta_zpl: f64,
    pub eta_d: f64,
    pub tau_off: f64,
}

impl PurcellBoundInputs {
    pub fn new(eta_radiative: f64, eta_zpl: f64, eta_d: f64, tau_off: f64) -> Result<Self> {
        for (name, v) in [
            ("eta_radiative", eta_radiative),
            ("eta_zpl", eta_zpl),
            ("eta_d", eta_d),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        positive("tau_off", tau_off)?;
        Ok(Self {
            eta_radiative,
            eta_zpl,
            eta_d,
            tau_off,
        })
    }

    /// 30% quantum yield, 80% zero-phonon fraction, 10% branching into `|g2>`.
    pub fn device() -> Self {
        Self {
            eta_radiative: 0.30,
            eta_zpl: 0.80,
            eta_d: 0.10,
            tau_off: TAU_OFF,
        }
    }
}

/// `η_rad·η_ZPL·η_D/(2π·τ_off)` in GHz.
pub fn gamma_bare_bound(inp: &PurcellBoundInputs) -> f64 {
    inp.eta_radiative * inp.eta_zpl * inp.eta_d / (TWO_PI * inp.tau_off)
}

/// Inverts `1/τ_on = 2π·4g²/κ + 1/τ_off` for `g` (GHz).
pub fn g_from_lifetimes(tau_on: f64, tau_off: f64, kappa: f64) -> Result<f64> {
    positive("tau_on", tau_on)?;
    positive("kappa", kappa)?;
    if !(tau_on < tau_off) {
        return Err(Error::domain(format!(
            "tau_on ({tau_on}) must be shorter than tau_off ({tau_off})"
        )));
    }
    Ok((kappa * (1.0 / tau_on - 1.0 / tau_off) / (4.0 * TWO_PI)).sqrt())
}

/// Cavity-shortened lifetime `1/(2π·4g²/κ + 1/τ_off)` in ns.
pub fn lifetime_on(g: f64, kappa: f64, tau_off: f64) -> Result<f64> {
    positive("kappa", kappa)?;
    positive("tau_off", tau_off)?;
    Ok(1.0 / (TWO_PI * 4.0 * g * g / kappa + 1.0 / tau_off))
}

/// `Q = ν₀/κ` with `ν₀` in THz and `κ` in GHz.
pub fn quality_factor(nu0_thz: f64, kappa: f64) -> Result<f64> {
    positive("nu0", nu0_thz)?;
    positive("kappa", kappa)?;
    Ok(1000.0 * nu0_thz / kappa)
}

/// All closed-form rates for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    /// GHz.
    pub omega_eff: f64,
    /// ns⁻¹.
    pub r_cavity: f64,
    /// ns⁻¹, ideal bound with `Γ = gamma_bare`.
    pub r_bare: f64,
    /// `r_cavity/r_bare`; absent when the bare rate vanishes.
    pub enhancement: Option<f64>,
    pub purcell: f64,
}

pub fn rate_report(p: &ModelParams, gamma_bare: f64) -> Result<RateReport> {
    let omega_eff = effective_rabi(p.omega_drive, p.g, p.delta_laser)?;
    let r_cavity = raman_rate_cavity(p)?;
    let r_bare = raman_rate_bare_ideal(p.omega_drive, p.delta_laser, gamma_bare)?;
    Ok(RateReport {
        omega_eff,
        r_cavity,
        r_bare,
        enhancement: (r_bare > 0.0).then(|| r_cavity / r_bare),
        purcell: purcell_factor(p.g, p.kappa, gamma_bare)?,
    })
}
