//! Lindblad dissipators, the full Liouvillian, time evolution and steady states.
//!
//! Superoperators act on column-stacked density matrices, so
//! `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::model::{self, DressedStates, ModelParams, DIM, E_0, G1_0, G2_0, G2_1};
use crate::TWO_PI;

/// Hermitian, unit-trace, positive semidefinite state over some fixed basis.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    m: CMat,
}

impl DensityMatrix {
    pub const TOL: f64 = 1e-9;

    /// Validates hermiticity, trace and positivity.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::domain("density matrix must be square and nonempty"));
        }
        let herm = linalg::hermiticity_defect(&m);
        if herm > Self::TOL {
            return Err(Error::domain(format!("density matrix not Hermitian ({herm:.3e})")));
        }
        let tr = linalg::trace(&m);
        if (tr - c64::new(1.0, 0.0)).norm() > Self::TOL {
            return Err(Error::domain(format!("density matrix trace {tr} != 1")));
        }
        let min = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&m))?[0];
        if min < -Self::TOL {
            return Err(Error::domain(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(Self { m })
    }

    /// Pure basis state `|k><k|` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        Self {
            m: linalg::outer_basis(dim, k, k),
        }
    }

    /// Ground state `|g1,0>` of the truncated basis.
    pub fn ground() -> Self {
        Self::basis(DIM, G1_0)
    }

    /// Skips validation; callers guarantee the invariants up to round-off.
    pub(crate) fn from_mat_unchecked(m: CMat) -> Self {
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn population(&self, k: usize) -> f64 {
        self.m[(k, k)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.population(k)).collect()
    }

    /// `Tr[O ρ]`.
    pub fn expect(&self, op: &CMat) -> c64 {
        linalg::trace(&(op * &self.m))
    }

    pub fn purity(&self) -> f64 {
        linalg::trace(&(&self.m * &self.m)).re
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        let diff = linalg::hermitian_part(&(&self.m - &other.m));
        let ev = linalg::hermitian_eigenvalues(&diff)?;
        Ok(0.5 * ev.iter().map(|x| x.abs()).sum::<f64>())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(&linalg::hermitian_part(&self.m))?[0])
    }
}

/// Linear map on column-stacked density matrices, in rad/ns.
#[derive(Debug, Clone)]
pub struct Superoperator {
    m: CMat,
    dim: usize,
}

impl Superoperator {
    pub fn zero(dim: usize) -> Self {
        Self {
            m: CMat::zeros(dim * dim, dim * dim),
            dim,
        }
    }

    pub fn from_matrix(m: CMat) -> Self {
        let dim = (m.nrows() as f64).sqrt().round() as usize;
        assert_eq!(dim * dim, m.nrows(), "superoperator size is not a square");
        Self { m, dim }
    }

    /// Hilbert-space dimension of the states it acts on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn add_assign(&mut self, other: &Superoperator) {
        assert_eq!(self.dim, other.dim);
        self.m = &self.m + &other.m;
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        linalg::unvec(&linalg::matvec(&self.m, &linalg::vec_of(rho)))
    }

    /// `max_k |Σ_i L[ii, k]|`: how far `vec(I)ᴴ L` is from zero.
    pub fn trace_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for k in 0..n * n {
            let s: c64 = (0..n).map(|i| self.m[(i * n + i, k)]).sum();
            worst = worst.max(s.norm());
        }
        worst
    }

    pub fn is_zero(&self) -> bool {
        linalg::max_abs(&self.m) == 0.0
    }
}

/// A collapse operator with its rate in ns⁻¹.
#[derive(Debug, Clone)]
pub struct CollapseChannel {
    pub operator: CMat,
    pub rate: f64,
}

impl CollapseChannel {
    pub fn new(operator: CMat, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::domain(format!("collapse rate must be finite and >= 0, got {rate}")));
        }
        Ok(Self { operator, rate })
    }
}

/// `rate·(O ρ O† − ½{O†O, ρ})` as a superoperator.
pub fn lindblad_dissipator(ch: &CollapseChannel) -> Superoperator {
    let n = ch.operator.nrows();
    let o = &ch.operator;
    let id = linalg::identity(n);
    let odo = linalg::dagger(o) * o;
    let conj = CMat::from_fn(n, n, |i, j| o[(i, j)].conj());
    let jump = linalg::kron(&conj, o);
    let left = linalg::kron(&id, &odo);
    let right = linalg::kron(&odo.transpose().to_owned(), &id);
    let half = c64::new(0.5, 0.0);
    let m = CMat::from_fn(n * n, n * n, |i, j| {
        (jump[(i, j)] - half * (left[(i, j)] + right[(i, j)])) * ch.rate
    });
    Superoperator { m, dim: n }
}

/// `−i[H, ·]` for `h` already in rad/ns.
pub fn hamiltonian_superoperator(h: &CMat) -> Superoperator {
    let n = h.nrows();
    let id = linalg::identity(n);
    let left = linalg::kron(&id, h);
    let right = linalg::kron(&h.transpose().to_owned(), &id);
    let m = CMat::from_fn(n * n, n * n, |i, j| {
        c64::new(0.0, -1.0) * (left[(i, j)] - right[(i, j)])
    });
    Superoperator { m, dim: n }
}

/// Cavity annihilation operator on the truncated basis, `|g2,0><g2,1|`.
pub fn cavity_annihilation() -> CMat {
    linalg::outer_basis(DIM, G2_0, G2_1)
}

/// How the phonon dissipator is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PhononOptions {
    /// Evaluate `J` and `n_th` at the exact dressed splittings `ω₊−ω₋` and
    /// `ω₊−ω_d` instead of at `Δ_L`.
    pub exact_splitting: bool,
    /// Use the unnormalized first-order dressed vectors instead of the exact eigenvectors.
    pub perturbative_vectors: bool,
}

/// Spectral density `J(ν) = α·νⁿ`, in GHz.
pub fn spectral_density(alpha: f64, n: f64, nu: f64) -> f64 {
    alpha * nu.powf(n)
}

/// The four phonon collapse channels: `|+><−|`, `|−><+|`, `|+><d|`, `|d><+|`.
pub fn phonon_channels(
    p: &ModelParams,
    d: &DressedStates,
    opts: PhononOptions,
) -> Result<Vec<CollapseChannel>> {
    if !(p.delta_laser > 0.0) {
        return Err(Error::domain(format!(
            "phonon dissipator needs delta_laser > 0, got {}",
            p.delta_laser
        )));
    }
    let delta = p.delta_laser;
    let mix = p.coupling_sq() / (delta * delta);
    let (split1, split2) = if opts.exact_splitting {
        (d.omega_plus - d.omega_minus, d.omega_plus - d.omega_dark)
    } else {
        (delta, delta)
    };
    let rate1 = TWO_PI * mix * spectral_density(p.phonon_alpha1, p.phonon_n, split1);
    let rate2 = TWO_PI * mix * spectral_density(p.phonon_alpha2, p.phonon_n, split2);
    let n1 = model::n_thermal(split1, p.kt)?;
    let n2 = model::n_thermal(split2, p.kt)?;

    let op = |u: &[c64; DIM], v: &[c64; DIM]| linalg::outer(u, v);
    Ok(vec![
        CollapseChannel::new(op(&d.plus, &d.minus), rate1 * n1)?,
        CollapseChannel::new(op(&d.minus, &d.plus), rate1 * (1.0 + n1))?,
        CollapseChannel::new(op(&d.plus, &d.dark), rate2 * n2)?,
        CollapseChannel::new(op(&d.dark, &d.plus), rate2 * (1.0 + n2))?,
    ])
}

/// Phonon-induced transitions between dressed states, with `Λ ≈ Δ_L`.
pub fn phonon_dissipator(p: &ModelParams, d: &DressedStates) -> Result<Superoperator> {
    phonon_dissipator_with(p, d, PhononOptions::default())
}

pub fn phonon_dissipator_with(
    p: &ModelParams,
    d: &DressedStates,
    opts: PhononOptions,
) -> Result<Superoperator> {
    let mut l = Superoperator::zero(DIM);
    for ch in phonon_channels(p, d, opts)? {
        l.add_assign(&lindblad_dissipator(&ch));
    }
    Ok(l)
}

/// True when the phonon dissipator would vanish identically.
pub fn phonons_off(p: &ModelParams) -> bool {
    (p.phonon_alpha1 == 0.0 && p.phonon_alpha2 == 0.0) || p.coupling_sq() == 0.0
}

/// Cavity, emitter and ground-flip channels on the truncated basis (rates in ns⁻¹).
pub fn bare_channels(p: &ModelParams) -> Result<Vec<CollapseChannel>> {
    Ok(vec![
        CollapseChannel::new(cavity_annihilation(), TWO_PI * p.kappa)?,
        CollapseChannel::new(linalg::outer_basis(DIM, G1_0, E_0), TWO_PI * p.gamma1)?,
        CollapseChannel::new(linalg::outer_basis(DIM, G2_0, E_0), TWO_PI * p.gamma2)?,
        CollapseChannel::new(linalg::outer_basis(DIM, G1_0, G2_0), TWO_PI * p.gamma_flip)?,
    ])
}

pub fn build_liouvillian(p: &ModelParams) -> Result<Superoperator> {
    build_liouvillian_with(p, PhononOptions::default())
}

pub fn build_liouvillian_with(p: &ModelParams, opts: PhononOptions) -> Result<Superoperator> {
    p.validate()?;
    let h = linalg::scale_re(&model::build_hamiltonian(p), TWO_PI);
    let mut l = hamiltonian_superoperator(&h);
    for ch in bare_channels(p)? {
        l.add_assign(&lindblad_dissipator(&ch));
    }
    if !phonons_off(p) {
        let d = if opts.perturbative_vectors {
            DressedStates::perturbative(p)?
        } else {
            model::dressed_states(p)?
        };
        l.add_assign(&phonon_dissipator_with(p, &d, opts)?);
    }
    Ok(l)
}

/// `exp(L t)` as a matrix on vectorized states.
pub fn evolution_operator(l: &Superoperator, t: f64) -> CMat {
    linalg::expm(&linalg::scale_re(l.matrix(), t))
}

/// Evolves `rho0` for time `t` (ns).
pub fn propagate(l: &Superoperator, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("evolution time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let u = evolution_operator(l, t);
    Ok(step(&u, rho0))
}

/// Applies a precomputed evolution operator and re-Hermitizes.
pub fn step(u: &CMat, rho: &DensityMatrix) -> DensityMatrix {
    let v = linalg::matvec(u, &linalg::vec_of(rho.matrix()));
    DensityMatrix::from_mat_unchecked(linalg::hermitian_part(&linalg::unvec(&v)))
}

/// Relative threshold on the second-smallest singular value.
pub const NULL_SPACE_TOL: f64 = 1e-10;

/// Unique fixed point of `L`, normalized and Hermitized.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    let ns = linalg::null_space(l.matrix())?;
    if ns.second_smallest_rel < NULL_SPACE_TOL {
        return Err(Error::NonUniqueSteadyState(ns.second_smallest_rel));
    }
    let m = linalg::unvec(&ns.vector);
    let tr = linalg::trace(&m);
    if tr.norm() == 0.0 {
        return Err(Error::Linalg("null vector has zero trace".into()));
    }
    let m = linalg::scale(&m, tr.inv());
    Ok(DensityMatrix::from_mat_unchecked(linalg::hermitian_part(&m)))
}
