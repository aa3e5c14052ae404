//! Steady-state cavity emission spectra from the quantum regression theorem.
//!
//! `g1(τ) = Tr[a† e^{Lτ}(a ρ_ss)]` is expanded over the eigenmodes of `L`,
//! so the spectrum is an exact sum of complex Lorentzians. The rotating frame
//! maps to the lab detuning axis (relative to the `|g2> <-> |e>` line) by
//! `ν_lab = ν_rot − Δ_L`, which places the Raman line at `−Δ_L` and the
//! spontaneous line near zero.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::liouvillian::{self, DensityMatrix, Superoperator};
use crate::model::ModelParams;
use crate::TWO_PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Rotating,
    Lab,
}

/// Ideal band-pass window on the lab axis (full width in GHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterWindow {
    pub center: f64,
    pub width: f64,
}

impl FilterWindow {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !center.is_finite() || !width.is_finite() {
            return Err(Error::domain(format!("filter width must be positive, got {width}")));
        }
        Ok(Self { center, width })
    }

    /// The 120 GHz monochromator window centred on the `|g2> <-> |e>` line.
    pub fn monochromator() -> Self {
        Self {
            center: 0.0,
            width: 120.0,
        }
    }

    pub fn contains(&self, nu: f64) -> bool {
        (nu - self.center).abs() <= 0.5 * self.width
    }
}

/// Intensity samples (ns⁻¹ per GHz) on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub intensity: Vec<f64>,
    pub frame: Frame,
    pub filter: Option<FilterWindow>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.freqs
            .windows(2)
            .zip(self.intensity.windows(2))
            .map(|(f, s)| 0.5 * (f[1] - f[0]) * (s[0] + s[1]))
            .sum()
    }

    pub fn max(&self) -> f64 {
        self.intensity.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Frequency of the largest sample.
    pub fn argmax(&self) -> Option<f64> {
        let (i, _) = self
            .intensity
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?;
        Some(self.freqs[i])
    }

    /// `(freq, intensity)` pairs restricted to `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        self.freqs
            .iter()
            .zip(&self.intensity)
            .filter(|(f, _)| (lo..=hi).contains(*f))
            .map(|(&f, &s)| (f, s))
            .collect()
    }
}

/// Checks that a grid is finite and strictly increasing.
pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("frequency grid contains non-finite values"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("frequency grid must be strictly increasing"));
    }
    Ok(())
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// One eigenmode contribution to `g1(τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    /// Rotating-frame centre, GHz.
    pub center: f64,
    /// Half width at half maximum, GHz.
    pub hwhm: f64,
    pub weight_re: f64,
    pub weight_im: f64,
}

/// `g1(τ) = Σ_j c_j e^{λ_j τ}` over the eigenmodes of `L`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Eigenvalues in rad/ns.
    pub eigenvalues: Vec<c64>,
    pub residues: Vec<c64>,
    /// Index of the stationary mode (skipped when building spectra).
    pub zero_mode: usize,
    /// `Tr[a†a ρ_ss]`.
    pub photon_number: f64,
    /// Cavity decay in rad/ns.
    pub kappa_rate: f64,
}

/// Real part above which a non-stationary mode counts as growing, rad/ns.
pub const INSTABILITY_TOL: f64 = 1e-10;

impl SpectralDecomposition {
    pub fn new(l: &Superoperator, rho_ss: &DensityMatrix, kappa: f64) -> Result<Self> {
        let (vals, v) = linalg::general_eigen(l.matrix())?;
        let zero_mode = (0..vals.len())
            .min_by(|&i, &j| vals[i].norm().total_cmp(&vals[j].norm()))
            .ok_or_else(|| Error::Linalg("empty Liouvillian".into()))?;
        for (j, lam) in vals.iter().enumerate() {
            if j != zero_mode && lam.re >= INSTABILITY_TOL {
                return Err(Error::UnstableLiouvillian(lam.re));
            }
        }

        let a = annihilation_for(l.dim());
        let adag = linalg::dagger(&a);
        let w = linalg::vec_of(&adag.transpose().to_owned());
        let x = linalg::vec_of(&(&a * rho_ss.matrix()));
        let vinv = linalg::inverse(&v);
        let proj = linalg::matvec(&vinv, &x);
        let residues = (0..vals.len())
            .map(|j| {
                let left: c64 = (0..w.len()).map(|i| w[i] * v[(i, j)]).sum();
                left * proj[j]
            })
            .collect();
        let photon_number = rho_ss.expect(&(&adag * &a)).re;
        Ok(Self {
            eigenvalues: vals,
            residues,
            zero_mode,
            photon_number,
            kappa_rate: TWO_PI * kappa,
        })
    }

    /// `Σ_j c_j`, which equals `g1(0)`.
    pub fn residue_sum(&self) -> c64 {
        self.residues.iter().sum()
    }

    pub fn correlation(&self, tau: f64) -> c64 {
        self.eigenvalues
            .iter()
            .zip(&self.residues)
            .map(|(l, c)| c * (l * tau).exp())
            .sum()
    }

    /// `S(ν) = 2·2πκ·Re Σ_j c_j/(i2πν − λ_j)` at rotating-frame frequency `nu`,
    /// normalized so that `∫S dν = 2πκ·⟨a†a⟩` (ns⁻¹).
    pub fn intensity(&self, nu: f64) -> f64 {
        let s = c64::new(0.0, TWO_PI * nu);
        let sum: c64 = self
            .eigenvalues
            .iter()
            .zip(&self.residues)
            .enumerate()
            .filter(|(j, _)| *j != self.zero_mode)
            .map(|(_, (l, c))| c / (s - l))
            .sum();
        2.0 * self.kappa_rate * sum.re
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.eigenvalues
            .iter()
            .zip(&self.residues)
            .enumerate()
            .filter(|(j, _)| *j != self.zero_mode)
            .map(|(_, (l, c))| Mode {
                center: l.im / TWO_PI,
                hwhm: -l.re / TWO_PI,
                weight_re: c.re,
                weight_im: c.im,
            })
            .collect()
    }
}

/// Cavity annihilation operator for the truncated basis.
fn annihilation_for(dim: usize) -> CMat {
    assert_eq!(dim, crate::model::DIM, "spectra are defined on the truncated basis");
    liouvillian::cavity_annihilation()
}

/// `g1(τ) = Tr[a† e^{Lτ}(a ρ_ss)]` by direct propagation.
///
/// Consecutive equal spacings reuse one propagator.
pub fn first_order_correlation(
    l: &Superoperator,
    rho_ss: &DensityMatrix,
    taus: &[f64],
) -> Result<Vec<c64>> {
    if taus.first().is_some_and(|&t| t < 0.0) || taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("taus must be nonnegative and ascending"));
    }
    let a = annihilation_for(l.dim());
    let adag_t = linalg::dagger(&a).transpose().to_owned();
    let w = linalg::vec_of(&adag_t);
    let mut x = linalg::vec_of(&(&a * rho_ss.matrix()));
    let mut out = Vec::with_capacity(taus.len());
    let mut t = 0.0;
    let mut cached: Option<(f64, CMat)> = None;
    for &tau in taus {
        let dt = tau - t;
        if dt > 0.0 {
            let reuse = cached
                .as_ref()
                .is_some_and(|(h, _)| (h - dt).abs() <= 1e-12 * dt);
            if !reuse {
                cached = Some((dt, liouvillian::evolution_operator(l, dt)));
            }
            let u = &cached.as_ref().unwrap().1;
            x = linalg::matvec(u, &x);
            t = tau;
        }
        out.push(w.iter().zip(&x).map(|(a, b)| a * b).sum());
    }
    Ok(out)
}

/// Builds `L`, its steady state and the mode expansion for `p`.
pub fn decompose(p: &ModelParams) -> Result<(Superoperator, DensityMatrix, SpectralDecomposition)> {
    let l = liouvillian::build_liouvillian(p)?;
    let rho = liouvillian::steady_state(&l)?;
    let dec = SpectralDecomposition::new(&l, &rho, p.kappa)?;
    Ok((l, rho, dec))
}

/// Spectrum on a rotating-frame grid.
pub fn rotating_spectrum(p: &ModelParams, grid: &[f64]) -> Result<Spectrum> {
    check_grid(grid)?;
    let (_, _, dec) = decompose(p)?;
    Ok(Spectrum {
        freqs: grid.to_vec(),
        intensity: grid.iter().map(|&nu| dec.intensity(nu)).collect(),
        frame: Frame::Rotating,
        filter: None,
    })
}

/// Emission spectrum sampled on `grid`, given as lab detunings from the
/// `|g2> <-> |e>` line. The result is in the lab frame.
pub fn emission_spectrum(p: &ModelParams, grid: &[f64]) -> Result<Spectrum> {
    let rot: Vec<f64> = grid.iter().map(|nu| nu + p.delta_laser).collect();
    let s = rotating_spectrum(p, &rot)?;
    let mut lab = frame_shift(s, p)?;
    // shift back exactly so callers get their own grid values
    lab.freqs = grid.to_vec();
    Ok(lab)
}

/// Maps rotating-frame frequencies to lab detuning, `ν_lab = ν_rot − Δ_L`.
pub fn frame_shift(s: Spectrum, p: &ModelParams) -> Result<Spectrum> {
    if s.frame == Frame::Lab {
        return Err(Error::Frame("spectrum is already in the lab frame".into()));
    }
    Ok(Spectrum {
        freqs: s.freqs.iter().map(|f| f - p.delta_laser).collect(),
        frame: Frame::Lab,
        ..s
    })
}

/// Zeroes the intensity outside the window.
pub fn apply_filter(s: Spectrum, w: FilterWindow) -> Result<Spectrum> {
    if s.frame != Frame::Lab {
        return Err(Error::Frame("filters apply on the lab axis only".into()));
    }
    let intensity = s
        .freqs
        .iter()
        .zip(&s.intensity)
        .map(|(&f, &v)| if w.contains(f) { v } else { 0.0 })
        .collect();
    Ok(Spectrum {
        intensity,
        filter: Some(w),
        ..s
    })
}
