//! Physical parameters, the truncated basis, the driven emitter–cavity
//! Hamiltonian, its dressed states and the thermal phonon occupation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};

/// Boltzmann constant over Planck constant, in GHz per kelvin.
pub const K_B_OVER_H_GHZ_PER_K: f64 = 20.8366;

/// Basis state indices of the single-excitation manifold.
pub const G1_0: usize = 0;
pub const G2_0: usize = 1;
pub const G2_1: usize = 2;
pub const E_0: usize = 3;
pub const DIM: usize = 4;

/// Indices of the coherently coupled block (everything except `|g2,0>`).
pub const COHERENT_BLOCK: [usize; 3] = [G1_0, G2_1, E_0];

/// The fixed single-excitation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncatedBasis;

impl TruncatedBasis {
    pub const LABELS: [&'static str; DIM] = ["|g1,0>", "|g2,0>", "|g2,1>", "|e,0>"];

    pub const fn dim(self) -> usize {
        DIM
    }

    pub fn label(self, index: usize) -> &'static str {
        Self::LABELS[index]
    }
}

/// All physical constants of the emitter–cavity–bath system.
///
/// Frequencies are ordinary frequencies in GHz. `phonon_alpha*` carry units of
/// GHz^(1-n) so that `alpha * delta^n` is a frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub g: f64,
    pub kappa: f64,
    pub omega_drive: f64,
    pub delta_laser: f64,
    pub delta_cavity: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_flip: f64,
    #[serde(rename = "kT")]
    pub kt: f64,
    pub delta_g: f64,
    pub phonon_alpha1: f64,
    pub phonon_alpha2: f64,
    pub phonon_n: f64,
}

impl Default for ModelParams {
    /// Measured device values at 4 K with Raman resonance at 55 GHz detuning.
    /// The phonon prefactor is not a measured quantity; 1.0 is a placeholder scale.
    fn default() -> Self {
        Self {
            g: 0.80,
            kappa: 53.7,
            omega_drive: 2.58,
            delta_laser: 55.0,
            delta_cavity: 55.0,
            gamma1: 0.046,
            gamma2: 0.046,
            gamma_flip: 0.8,
            kt: 83.0,
            delta_g: 544.0,
            phonon_alpha1: 1.0,
            phonon_alpha2: 1.0,
            phonon_n: 0.31,
        }
    }
}

impl ModelParams {
    /// Names of all fields, in the order they are serialized to config files.
    pub const FIELD_NAMES: [&'static str; 13] = [
        "g",
        "kappa",
        "omega_drive",
        "delta_laser",
        "delta_cavity",
        "gamma1",
        "gamma2",
        "gamma_flip",
        "kT",
        "delta_g",
        "phonon_alpha1",
        "phonon_alpha2",
        "phonon_n",
    ];

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "g" => self.g,
            "kappa" => self.kappa,
            "omega_drive" => self.omega_drive,
            "delta_laser" => self.delta_laser,
            "delta_cavity" => self.delta_cavity,
            "gamma1" => self.gamma1,
            "gamma2" => self.gamma2,
            "gamma_flip" => self.gamma_flip,
            "kT" => self.kt,
            "delta_g" => self.delta_g,
            "phonon_alpha1" => self.phonon_alpha1,
            "phonon_alpha2" => self.phonon_alpha2,
            "phonon_n" => self.phonon_n,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "g" => &mut self.g,
            "kappa" => &mut self.kappa,
            "omega_drive" => &mut self.omega_drive,
            "delta_laser" => &mut self.delta_laser,
            "delta_cavity" => &mut self.delta_cavity,
            "gamma1" => &mut self.gamma1,
            "gamma2" => &mut self.gamma2,
            "gamma_flip" => &mut self.gamma_flip,
            "kT" => &mut self.kt,
            "delta_g" => &mut self.delta_g,
            "phonon_alpha1" => &mut self.phonon_alpha1,
            "phonon_alpha2" => &mut self.phonon_alpha2,
            "phonon_n" => &mut self.phonon_n,
            _ => return Err(Error::Config(format!("unknown parameter `{name}`"))),
        };
        *slot = value;
        Ok(())
    }

    /// Locks both detunings to `delta` (Raman resonance).
    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.delta_laser = delta;
        self.delta_cavity = delta;
        self
    }

    /// Sets a common spectral-density prefactor for both phonon channels.
    pub fn with_phonon(mut self, alpha: f64, n: f64) -> Self {
        self.phonon_alpha1 = alpha;
        self.phonon_alpha2 = alpha;
        self.phonon_n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for name in Self::FIELD_NAMES {
            let v = self.get(name).unwrap_or(f64::NAN);
            if !v.is_finite() {
                return Err(Error::domain(format!("parameter `{name}` is not finite ({v})")));
            }
        }
        let nonneg = [
            ("g", self.g),
            ("kappa", self.kappa),
            ("omega_drive", self.omega_drive),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma_flip", self.gamma_flip),
            ("kT", self.kt),
            ("delta_g", self.delta_g),
            ("phonon_alpha1", self.phonon_alpha1),
            ("phonon_alpha2", self.phonon_alpha2),
        ];
        for (name, v) in nonneg {
            if v < 0.0 {
                return Err(Error::domain(format!("parameter `{name}` must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `(Ω/2)² + g²`, the squared coupling of `|e,0>` to the ground block.
    pub fn coupling_sq(&self) -> f64 {
        (0.5 * self.omega_drive).powi(2) + self.g * self.g
    }

    /// True when `max(Ω/2, g) < Δ_L / 10`.
    pub fn adiabatic_valid(&self) -> bool {
        (0.5 * self.omega_drive).max(self.g) < self.delta_laser.abs() / 10.0
    }

    /// True when `γ_flip < κ / 10`.
    pub fn truncation_valid(&self) -> bool {
        self.gamma_flip < self.kappa / 10.0
    }
}

/// System Hamiltonian on the truncated basis, in GHz.
///
/// `H = Δ_L|e,0><e,0| + (Δ_L-Δ_c)|g2,1><g2,1| + (Ω/2)(|e,0><g1,0| + h.c.) + g(|e,0><g2,1| + h.c.)`
pub fn build_hamiltonian(p: &ModelParams) -> CMat {
    let mut h = linalg::zeros(DIM);
    let re = |x: f64| c64::new(x, 0.0);
    h[(E_0, E_0)] = re(p.delta_laser);
    h[(G2_1, G2_1)] = re(p.delta_laser - p.delta_cavity);
    h[(E_0, G1_0)] = re(0.5 * p.omega_drive);
    h[(G1_0, E_0)] = re(0.5 * p.omega_drive);
    h[(E_0, G2_1)] = re(p.g);
    h[(G2_1, E_0)] = re(p.g);
    h
}

/// Eigenvalues of the coherent block at Raman resonance (Δ_L = Δ_c = Δ),
/// from `λ(λ(λ-Δ) - ((Ω/2)²+g²)) = 0`. Returned ascending.
pub fn resonant_block_eigenvalues(p: &ModelParams) -> [f64; 3] {
    let d = p.delta_laser;
    let root = (d * d + 4.0 * p.coupling_sq()).sqrt();
    let mut v = [0.0, 0.5 * (d + root), 0.5 * (d - root)];
    v.sort_by(f64::total_cmp);
    v
}

/// Second-order perturbative dressed-state frequencies `(ω₊, ω₋, ω_d)` in GHz.
pub fn perturbative_frequencies(p: &ModelParams) -> (f64, f64, f64) {
    let d = p.delta_laser;
    let s = p.coupling_sq();
    (d + s / d, -s / d, 0.0)
}

/// Exact eigenvectors of the coherent block, labelled by their `|e,0>` content.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedStates {
    pub plus: [c64; DIM],
    pub minus: [c64; DIM],
    pub dark: [c64; DIM],
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub omega_dark: f64,
}

impl DressedStates {
    /// The unnormalized first-order vectors written in closed form for
    /// `Ω, g << Δ` at Raman resonance. Only used for comparison runs.
    pub fn perturbative(p: &ModelParams) -> Result<Self> {
        let d = p.delta_laser;
        if d == 0.0 {
            return Err(Error::domain("perturbative dressed states need delta_laser != 0"));
        }
        let half = 0.5 * p.omega_drive;
        let root = p.coupling_sq().sqrt();
        if root == 0.0 {
            return Err(Error::domain("perturbative dressed states need g or omega_drive > 0"));
        }
        let mut plus = [c64::new(0.0, 0.0); DIM];
        let mut minus = plus;
        let mut dark = plus;
        plus[G1_0] = c64::new(half / d, 0.0);
        plus[G2_1] = c64::new(p.g / d, 0.0);
        plus[E_0] = c64::new(1.0, 0.0);
        minus[G1_0] = c64::new(half / root, 0.0);
        minus[G2_1] = c64::new(p.g / root, 0.0);
        minus[E_0] = c64::new(-root / d, 0.0);
        dark[G1_0] = c64::new(p.g / root, 0.0);
        dark[G2_1] = c64::new(-half / root, 0.0);
        let (op, om, od) = perturbative_frequencies(p);
        Ok(Self {
            plus,
            minus,
            dark,
            omega_plus: op,
            omega_minus: om,
            omega_dark: od,
        })
    }

    pub fn e_overlap_sq(v: &[c64; DIM]) -> f64 {
        v[E_0].norm_sqr()
    }
}

const DEGENERACY_TOL: f64 = 1e-9;

/// Dressed states of the driven Λ-system coupled to the cavity.
pub fn dressed_states(p: &ModelParams) -> Result<DressedStates> {
    if p.delta_laser == 0.0 {
        return Err(Error::domain(
            "dressed-state labelling needs delta_laser != 0",
        ));
    }
    let h = build_hamiltonian(p);
    let block = CMat::from_fn(3, 3, |i, j| h[(COHERENT_BLOCK[i], COHERENT_BLOCK[j])]);
    let (vals, vecs) = linalg::hermitian_eigen(&block)?;
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (vals[i] - vals[j]).abs() < DEGENERACY_TOL {
                return Err(Error::DegenerateSpectrum(vals[i], vals[j]));
            }
        }
    }

    let embed = |k: usize| -> [c64; DIM] {
        let mut v = [c64::new(0.0, 0.0); DIM];
        for (row, &idx) in COHERENT_BLOCK.iter().enumerate() {
            v[idx] = vecs[(row, k)];
        }
        // Fix the global phase: the largest component is real and positive.
        let pivot = v
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or(c64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        v.map(|z| z * phase)
    };

    let overlap: Vec<f64> = (0..3).map(|k| vecs[(2, k)].norm_sqr()).collect();
    let plus_k = (0..3).max_by(|&a, &b| overlap[a].total_cmp(&overlap[b])).unwrap();
    let dark_k = (0..3)
        .filter(|&k| k != plus_k)
        .min_by(|&a, &b| overlap[a].total_cmp(&overlap[b]))
        .unwrap();
    let minus_k = 3 - plus_k - dark_k;

    Ok(DressedStates {
        plus: embed(plus_k),
        minus: embed(minus_k),
        dark: embed(dark_k),
        omega_plus: vals[plus_k],
        omega_minus: vals[minus_k],
        omega_dark: vals[dark_k],
    })
}

/// Bose–Einstein occupation `1/(exp(δ/kT) - 1)` of a phonon mode at frequency
/// `delta` (GHz) for thermal energy `kt` (GHz). Zero temperature gives zero.
pub fn n_thermal(delta: f64, kt: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::domain(format!(
            "phonon frequency must be positive, got {delta}"
        )));
    }
    if kt < 0.0 || kt.is_nan() {
        return Err(Error::domain(format!("kT must be >= 0, got {kt}")));
    }
    if kt == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (delta / kt).exp_m1())
}

/// Thermal energy in GHz for a temperature in kelvin.
pub fn kt_from_kelvin(kelvin: f64) -> f64 {
    K_B_OVER_H_GHZ_PER_K * kelvin
}

#[cfg(test)]
mod tests {
    use super::*;

    fn device() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn decoupled_hamiltonian_is_diagonal() {
        let p = ModelParams {
            g: 0.0,
            omega_drive: 0.0,
            delta_laser: 55.0,
            delta_cavity: 40.0,
            ..device()
        };
        let h = build_hamiltonian(&p);
        let diag = [0.0, 0.0, 15.0, 55.0];
        for i in 0..DIM {
            for j in 0..DIM {
                let want = if i == j { diag[i] } else { 0.0 };
                assert_eq!(h[(i, j)], c64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn device_hamiltonian_entries() {
        let h = build_hamiltonian(&device());
        assert!((h[(E_0, G1_0)].re - 1.29).abs() < 1e-15);
        assert!((h[(E_0, G2_1)].re - 0.80).abs() < 1e-15);
        assert_eq!(h[(E_0, E_0)].re, 55.0);
        assert_eq!(h[(G2_1, G2_1)].re, 0.0);
        for k in 0..DIM {
            assert_eq!(h[(G2_0, k)], c64::new(0.0, 0.0));
            assert_eq!(h[(k, G2_0)], c64::new(0.0, 0.0));
        }
        assert_eq!(linalg::hermiticity_defect(&h), 0.0);
    }

    #[test]
    fn largest_eigenvalue_matches_closed_form() {
        let p = device();
        let vals = linalg::hermitian_eigenvalues(&build_hamiltonian(&p)).unwrap();
        let closed = resonant_block_eigenvalues(&p);
        // closed form: (55 + sqrt(55² + 4·2.3041))/2
        assert!((closed[2] - 55.041_860_9).abs() < 1e-6);
        assert!((vals[3] - closed[2]).abs() < 1e-10 * 55.0);
        assert!((vals[3] - 55.04186).abs() < 1e-5);
    }

    #[test]
    fn dressed_plus_matches_perturbative_frequency() {
        let d = dressed_states(&device()).unwrap();
        let (wp, wm, wd) = perturbative_frequencies(&device());
        assert!((d.omega_plus - 55.0419).abs() < 1e-4);
        assert!((wp - 55.0419).abs() < 1e-4);
        let s = device().coupling_sq();
        let rel = s / 55.0f64.powi(2);
        assert!((d.omega_minus - wm).abs() <= rel * wm.abs());
        assert!((d.omega_dark - wd).abs() < 1e-12);
        assert!(DressedStates::e_overlap_sq(&d.plus) > 0.998);
    }

    #[test]
    fn dark_state_is_ground_when_undriven() {
        let p = ModelParams {
            omega_drive: 0.0,
            ..device()
        };
        let d = dressed_states(&p).unwrap();
        assert!((d.dark[G1_0].norm_sqr() - 1.0).abs() < 1e-14);
        assert_eq!(d.omega_dark, 0.0);
    }

    #[test]
    fn dressed_states_are_orthonormal_and_avoid_g2_0() {
        let d = dressed_states(&device()).unwrap();
        let vs = [d.plus, d.minus, d.dark];
        for (i, a) in vs.iter().enumerate() {
            assert_eq!(a[G2_0], c64::new(0.0, 0.0));
            for (j, b) in vs.iter().enumerate() {
                let ip: c64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - c64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_block_is_rejected() {
        let p = ModelParams {
            g: 0.0,
            omega_drive: 0.0,
            delta_laser: 10.0,
            delta_cavity: 10.0,
            ..device()
        };
        assert!(matches!(
            dressed_states(&p),
            Err(Error::DegenerateSpectrum(..))
        ));
    }

    #[test]
    fn n_thermal_values() {
        assert!((n_thermal(55.0, 83.0).unwrap() - 1.0639).abs() < 1e-4);
        let kt = 83.0;
        assert!((n_thermal(kt * 2f64.ln(), kt).unwrap() - 1.0).abs() < 1e-14);
        assert!(n_thermal(5000.0, 83.0).unwrap() < 1e-26);
        assert_eq!(n_thermal(10.0, 0.0).unwrap(), 0.0);
        assert!(matches!(n_thermal(0.0, 83.0), Err(Error::Domain(_))));
        assert!(matches!(n_thermal(-1.0, 83.0), Err(Error::Domain(_))));
    }

    #[test]
    fn n_thermal_high_temperature_expansion() {
        let kt = 83.0;
        for k in 1..=8 {
            let delta = kt / 10.0 * k as f64 / 8.0;
            let n = n_thermal(delta, kt).unwrap();
            let approx = kt / delta - 0.5;
            assert!((n - approx).abs() <= 0.02 * n);
        }
    }

    #[test]
    fn regime_flags() {
        let p = device();
        assert!(p.adiabatic_valid());
        assert!(p.truncation_valid());
        let q = ModelParams {
            gamma_flip: p.kappa,
            ..p
        };
        assert!(!q.truncation_valid());
    }

    #[test]
    fn kelvin_helper() {
        assert!((kt_from_kelvin(4.0) - 83.35).abs() < 0.01);
    }

    #[test]
    fn params_reject_negative_rates() {
        let p = ModelParams {
            kappa: -1.0,
            ..device()
        };
        assert!(p.validate().is_err());
        assert!(device().validate().is_ok());
    }
}
