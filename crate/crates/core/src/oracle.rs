//! Brute-force cross-checks of the truncated model and the closed-form rates:
//! the multi-photon emitter–cavity ladder, direct integration of a bare
//! Λ-system and the adiabatic elimination of the excited state.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::liouvillian::{self, CollapseChannel, DensityMatrix, PhononOptions, Superoperator};
use crate::model::{self, ModelParams, DIM, E_0, G1_0, G2_0, G2_1};
use crate::ode::{self, OdeOptions};
use crate::rates;
use crate::TWO_PI;

/// Emitter levels `{g1, g2, e}` times photon numbers `0..=n_max`, ordered
/// lexicographically as `(level, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LadderBasis {
    pub n_max: usize,
}

impl LadderBasis {
    pub const G1: usize = 0;
    pub const G2: usize = 1;
    pub const E: usize = 2;

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::domain("ladder needs n_max >= 1"));
        }
        Ok(Self { n_max })
    }

    pub fn dim(&self) -> usize {
        3 * (self.n_max + 1)
    }

    pub fn index(&self, level: usize, n: usize) -> usize {
        level * (self.n_max + 1) + n
    }

    /// Ladder indices of the truncated basis states, in truncated order.
    pub fn truncated_indices(&self) -> [usize; DIM] {
        let mut idx = [0; DIM];
        idx[G1_0] = self.index(Self::G1, 0);
        idx[G2_0] = self.index(Self::G2, 0);
        idx[G2_1] = self.index(Self::G2, 1);
        idx[E_0] = self.index(Self::E, 0);
        idx
    }

    fn sigma(&self, to: usize, from: usize) -> CMat {
        let mut m = linalg::zeros(self.dim());
        for n in 0..=self.n_max {
            m[(self.index(to, n), self.index(from, n))] = linalg::ONE;
        }
        m
    }

    fn annihilation(&self) -> CMat {
        let mut m = linalg::zeros(self.dim());
        for level in 0..3 {
            for n in 0..self.n_max {
                m[(self.index(level, n), self.index(level, n + 1))] = c64::new(((n + 1) as f64).sqrt(), 0.0);
            }
        }
        m
    }

    /// Places a truncated-basis operator on its four ladder states.
    fn embed(&self, op: &CMat) -> CMat {
        let idx = self.truncated_indices();
        let mut m = linalg::zeros(self.dim());
        for i in 0..DIM {
            for j in 0..DIM {
                m[(idx[i], idx[j])] = op[(i, j)];
            }
        }
        m
    }
}

/// Ladder Hamiltonian in GHz.
pub fn ladder_hamiltonian(p: &ModelParams, b: &LadderBasis) -> CMat {
    let a = b.annihilation();
    let ad = linalg::dagger(&a);
    let see = b.sigma(LadderBasis::E, LadderBasis::E);
    let seg1 = b.sigma(LadderBasis::E, LadderBasis::G1);
    let sg2e = b.sigma(LadderBasis::G2, LadderBasis::E);
    let omega_p = p.delta_laser - p.delta_cavity;
    let drive = &seg1 + linalg::dagger(&seg1);
    let jc = &ad * &sg2e;
    let jc = &jc + linalg::dagger(&jc);
    let h = linalg::scale_re(&see, p.delta_laser)
        + linalg::scale_re(&(&ad * &a), omega_p)
        + linalg::scale_re(&drive, 0.5 * p.omega_drive)
        + linalg::scale_re(&jc, p.g);
    linalg::hermitian_part(&h)
}

pub fn ladder_liouvillian(p: &ModelParams, b: &LadderBasis) -> Result<Superoperator> {
    p.validate()?;
    let h = linalg::scale_re(&ladder_hamiltonian(p, b), TWO_PI);
    let mut l = liouvillian::hamiltonian_superoperator(&h);
    let channels = [
        (b.annihilation(), p.kappa),
        (b.sigma(LadderBasis::G1, LadderBasis::E), p.gamma1),
        (b.sigma(LadderBasis::G2, LadderBasis::E), p.gamma2),
        (b.sigma(LadderBasis::G1, LadderBasis::G2), p.gamma_flip),
    ];
    for (op, rate) in channels {
        l.add_assign(&liouvillian::lindblad_dissipator(&CollapseChannel::new(op, TWO_PI * rate)?));
    }
    if !liouvillian::phonons_off(p) {
        let d = model::dressed_states(p)?;
        for ch in liouvillian::phonon_channels(p, &d, PhononOptions::default())? {
            let ch = CollapseChannel::new(b.embed(&ch.operator), ch.rate)?;
            l.add_assign(&liouvillian::lindblad_dissipator(&ch));
        }
    }
    Ok(l)
}

#[derive(Debug, Clone)]
pub struct LadderSteadyState {
    pub basis: LadderBasis,
    pub rho: DensityMatrix,
    /// Population outside the four truncated states.
    pub excess_excitation: f64,
}

impl LadderSteadyState {
    /// The four truncated-basis rows and columns, renormalized.
    pub fn restricted(&self) -> Result<DensityMatrix> {
        let idx = self.basis.truncated_indices();
        let m = CMat::from_fn(DIM, DIM, |i, j| self.rho.matrix()[(idx[i], idx[j])]);
        let tr = linalg::trace(&m).re;
        if !(tr > 0.0) {
            return Err(Error::domain("no population in the truncated states"));
        }
        Ok(DensityMatrix::from_mat_unchecked(linalg::scale_re(&m, 1.0 / tr)))
    }
}

pub const DEFAULT_N_MAX: usize = 3;

pub fn full_ladder_steady_state(p: &ModelParams, n_max: usize) -> Result<LadderSteadyState> {
    let basis = LadderBasis::new(n_max)?;
    let l = ladder_liouvillian(p, &basis)?;
    let rho = liouvillian::steady_state(&l)?;
    let inside: f64 = basis.truncated_indices().iter().map(|&k| rho.population(k)).sum();
    Ok(LadderSteadyState {
        basis,
        rho,
        excess_excitation: (1.0 - inside).max(0.0),
    })
}

/// Trace distance between the truncated steady state and the restricted ladder one.
pub fn truncation_error(p: &ModelParams, n_max: usize) -> Result<f64> {
    let truncated = liouvillian::steady_state(&liouvillian::build_liouvillian(p)?)?;
    let full = full_ladder_steady_state(p, n_max)?;
    truncated.trace_distance(&full.restricted()?)
}

/// Change in the restricted ladder state between `n_max` and `n_max + 1`.
pub fn ladder_convergence(p: &ModelParams, n_max: usize) -> Result<f64> {
    let a = full_ladder_steady_state(p, n_max)?.restricted()?;
    let b = full_ladder_steady_state(p, n_max + 1)?.restricted()?;
    a.trace_distance(&b)
}

// ---------------------------------------------------------------------------
// Bare Λ-system

#[derive(Debug, Clone, Serialize)]
pub struct BareTrajectory {
    pub t: Vec<f64>,
    pub s11: Vec<f64>,
    pub s22: Vec<f64>,
    pub s33: Vec<f64>,
}

/// Integrates the optical Bloch equations of a driven Λ-system from `|1>`.
///
/// `gamma` is the `|3> -> |2>` emission rate, `gamma_tot` the total decay of
/// `|3>` (the remainder returns to `|1>`) and `gamma_dephase` the decay of the
/// `|1>-|3>` coherence. All in GHz; times in ns.
pub fn bare_lambda_evolve(
    omega: f64,
    delta: f64,
    gamma: f64,
    gamma_tot: f64,
    gamma_dephase: f64,
    t_grid: &[f64],
) -> Result<BareTrajectory> {
    if !(gamma >= 0.0 && gamma_tot >= gamma && gamma_dephase >= 0.0) {
        return Err(Error::domain("need 0 <= gamma <= gamma_tot and gamma_dephase >= 0"));
    }
    let w = TWO_PI;
    let (om, de, g, gt, gd) = (w * omega, w * delta, w * gamma, w * gamma_tot, w * gamma_dephase);
    let i = c64::new(0.0, 1.0);
    // y = [σ13, σ11, σ22, σ33]
    let rhs = move |_t: f64, y: &[c64], dy: &mut [c64]| {
        let s13 = y[0];
        let s31 = s13.conj();
        let (s11, s33) = (y[1], y[3]);
        dy[0] = -(i * de + gd) * s13 - i * (om / 2.0) * (s11 - s33);
        dy[3] = -gt * s33 - i * (om / 2.0) * (s31 - s13);
        dy[2] = g * s33;
        dy[1] = (gt - g) * s33 + i * (om / 2.0) * (s31 - s13);
    };
    let y0 = [c64::new(0.0, 0.0), c64::new(1.0, 0.0), c64::new(0.0, 0.0), c64::new(0.0, 0.0)];
    let ys = ode::integrate(rhs, 0.0, &y0, t_grid, OdeOptions::default())?;
    Ok(BareTrajectory {
        t: t_grid.to_vec(),
        s11: ys.iter().map(|y| y[1].re).collect(),
        s22: ys.iter().map(|y| y[2].re).collect(),
        s33: ys.iter().map(|y| y[3].re).collect(),
    })
}

/// Growth rate (ns⁻¹) of `σ22` from a least-squares line through
/// `ln(1 − σ22)` over one e-fold after the optical transient has died out.
pub fn bare_growth_rate(
    omega: f64,
    delta: f64,
    gamma: f64,
    gamma_tot: f64,
    gamma_dephase: f64,
) -> Result<f64> {
    let guess = rates::raman_rate_bare(omega, delta, gamma, gamma_tot, gamma_dephase)?;
    let settle = 20.0 / (TWO_PI * gamma_dephase.min(gamma_tot));
    let horizon = settle + 2.0 / guess;
    let n = 2001;
    let grid: Vec<f64> = (0..n).map(|k| horizon * k as f64 / (n - 1) as f64).collect();
    let tr = bare_lambda_evolve(omega, delta, gamma, gamma_tot, gamma_dephase, &grid)?;
    let logs: Vec<f64> = tr.s22.iter().map(|s| (1.0 - s).ln()).collect();
    let start = grid.iter().position(|&t| t >= settle).unwrap_or(0);
    let stop_level = logs[start] - 1.0;
    let stop = (start..n).find(|&k| logs[k] <= stop_level).unwrap_or(n - 1);
    if stop <= start + 2 {
        return Err(Error::domain("trajectory too short to fit a growth rate"));
    }
    let pts: Vec<(f64, f64)> = (start..=stop).map(|k| (grid[k], logs[k])).collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    Ok(-sxy / sxx)
}

/// Growth rate (ns⁻¹) of `P(|g2,0>)` from `|g1,0>` under the truncated master
/// equation, from `ln(1 − P)` between `0.15/rate_guess` and `1.1/rate_guess`.
pub fn cavity_growth_rate(p: &ModelParams, rate_guess: f64) -> Result<f64> {
    let l = liouvillian::build_liouvillian(p)?;
    let dt = 0.05 / rate_guess;
    let u = liouvillian::evolution_operator(&l, dt);
    let mut rho = DensityMatrix::ground();
    let mut pts = Vec::new();
    for k in 1..=22 {
        rho = liouvillian::step(&u, &rho);
        if k > 2 {
            pts.push((k as f64 * dt, (1.0 - rho.population(G2_0)).ln()));
        }
    }
    let (t0, y0) = pts[0];
    let (t1, y1) = pts[pts.len() - 1];
    Ok(-(y1 - y0) / (t1 - t0))
}

// ---------------------------------------------------------------------------
// Adiabatic elimination

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdiabaticReport {
    /// `max_t |P_exact(|g2,1>) − P_eff(|g2,1>)|`.
    pub max_population_error: f64,
    /// `max_t |c3(t)|²`.
    pub max_excited_population: f64,
}

fn effective_rhs(omega: f64, g: f64, delta: f64) -> impl Fn(f64, &[c64], &mut [c64]) {
    let i = c64::new(0.0, 1.0);
    let (om, gg, de) = (TWO_PI * omega, TWO_PI * g, TWO_PI * delta);
    move |_t, c, dc| {
        dc[0] = i * (om * om / (4.0 * de)) * c[0] + i * (om * gg / (2.0 * de)) * c[1];
        dc[1] = i * (gg * gg / de) * c[1] + i * (om * gg / (2.0 * de)) * c[0];
    }
}

// one effective period spans ~Δ²/(Ω g) fast cycles
const ADIABATIC_ODE: OdeOptions = OdeOptions {
    rtol: 1e-10,
    atol: 1e-12,
    h0: None,
    max_steps: 200_000_000,
};

/// Compares the three-amplitude Schrödinger dynamics of `|g1,0>, |g2,1>, |e,0>`
/// with the effective two-level model after eliminating `|e,0>`.
pub fn adiabatic_error(omega: f64, g: f64, delta: f64, t_grid: &[f64]) -> Result<AdiabaticReport> {
    if !(delta > 0.0) {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    let i = c64::new(0.0, 1.0);
    let (om, gg, de) = (TWO_PI * omega, TWO_PI * g, TWO_PI * delta);
    let exact = move |_t: f64, c: &[c64], dc: &mut [c64]| {
        dc[0] = -i * (om / 2.0) * c[2];
        dc[1] = -i * gg * c[2];
        dc[2] = -i * de * c[2] - i * (om / 2.0) * c[0] - i * gg * c[1];
    };
    let one = c64::new(1.0, 0.0);
    let zero = c64::new(0.0, 0.0);
    let ex = ode::integrate(exact, 0.0, &[one, zero, zero], t_grid, ADIABATIC_ODE)?;
    let eff = ode::integrate(effective_rhs(omega, g, delta), 0.0, &[one, zero], t_grid, ADIABATIC_ODE)?;
    let mut err = 0.0f64;
    let mut exc = 0.0f64;
    for (a, b) in ex.iter().zip(&eff) {
        err = err.max((a[1].norm_sqr() - b[1].norm_sqr()).abs());
        exc = exc.max(a[2].norm_sqr());
    }
    Ok(AdiabaticReport {
        max_population_error: err,
        max_excited_population: exc,
    })
}

/// Time (ns) of the first maximum of `P_eff(|g2,1>)` in the effective model.
pub fn effective_first_maximum(omega: f64, g: f64, delta: f64) -> Result<f64> {
    let w = rates::effective_rabi(omega, g, delta)?.abs();
    if w == 0.0 {
        return Err(Error::domain("no effective coupling"));
    }
    let horizon = 1.0 / w;
    let n = 4001;
    let grid: Vec<f64> = (0..n).map(|k| horizon * k as f64 / (n - 1) as f64).collect();
    let one = c64::new(1.0, 0.0);
    let zero = c64::new(0.0, 0.0);
    let ys = ode::integrate(effective_rhs(omega, g, delta), 0.0, &[one, zero], &grid, OdeOptions::default())?;
    let p: Vec<f64> = ys.iter().map(|y| y[1].norm_sqr()).collect();
    let k = (1..n - 1)
        .find(|&k| p[k] >= p[k - 1] && p[k] > p[k + 1])
        .ok_or_else(|| Error::domain("no maximum within one effective period"))?;
    // parabolic refinement through the three samples around the peak
    let h = grid[1] - grid[0];
    let denom = p[k - 1] - 2.0 * p[k] + p[k + 1];
    let shift = if denom != 0.0 { 0.5 * (p[k - 1] - p[k + 1]) / denom } else { 0.0 };
    Ok(grid[k] + shift * h)
}

/// Uniform grid covering one effective Rabi period with at least 20 samples
/// per fast oscillation at `delta`.
pub fn adiabatic_grid(omega: f64, g: f64, delta: f64) -> Result<Vec<f64>> {
    let w = rates::effective_rabi(omega, g, delta)?.abs();
    let shift = ((omega * omega / 4.0 - g * g) / delta).abs();
    let period = 1.0 / (w * w + shift * shift).sqrt().max(f64::MIN_POSITIVE);
    let n = ((20.0 * delta.abs() * period).ceil() as usize).clamp(200, 2_000_000);
    Ok((0..=n).map(|k| period * k as f64 / n as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_basis_layout() {
        let b = LadderBasis::new(3).unwrap();
        assert_eq!(b.dim(), 12);
        assert_eq!(b.truncated_indices(), [0, 4, 5, 8]);
        assert!(LadderBasis::new(0).is_err());
    }

    #[test]
    fn ladder_hamiltonian_restricts_to_truncated_one() {
        let p = ModelParams { delta_cavity: 40.0, ..Default::default() };
        let b = LadderBasis::new(2).unwrap();
        let h = ladder_hamiltonian(&p, &b);
        let h4 = model::build_hamiltonian(&p);
        let idx = b.truncated_indices();
        for i in 0..DIM {
            for j in 0..DIM {
                assert!((h[(idx[i], idx[j])] - h4[(i, j)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn ladder_liouvillian_is_trace_preserving() {
        let b = LadderBasis::new(2).unwrap();
        let l = ladder_liouvillian(&ModelParams::default(), &b).unwrap();
        assert!(l.trace_defect() < 1e-10);
    }

    #[test]
    fn no_excess_without_ground_flip() {
        let p = ModelParams { gamma_flip: 0.0, ..Default::default() };
        let s = full_ladder_steady_state(&p, 3).unwrap();
        assert!(s.excess_excitation < 1e-12);
        assert!(truncation_error(&p, 3).unwrap() < 1e-10);
    }

    #[test]
    fn excess_grows_with_ground_flip() {
        let mut last = -1.0;
        for gf in [0.1, 0.4, 0.8, 3.0, 10.0] {
            let p = ModelParams { gamma_flip: gf, ..Default::default() };
            let e = full_ladder_steady_state(&p, 3).unwrap().excess_excitation;
            assert!(e >= last);
            last = e;
        }
    }

    #[test]
    fn bare_system_without_drive_stays_put() {
        let grid: Vec<f64> = (0..=50).map(|k| k as f64 * 0.2).collect();
        let tr = bare_lambda_evolve(0.0, 10.0, 1.0, 1.0, 0.5, &grid).unwrap();
        assert!(tr.s22.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bare_system_conserves_probability() {
        let grid: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
        let tr = bare_lambda_evolve(3.0, 2.0, 0.3, 0.5, 0.4, &grid).unwrap();
        for k in 0..grid.len() {
            assert!((tr.s11[k] + tr.s22[k] + tr.s33[k] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn resonant_rabi_oscillation() {
        // weak damping, Δ = 0: σ33 peaks first at half a Rabi period 1/(2Ω)
        let omega = 2.0;
        let grid: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.0005).collect();
        let tr = bare_lambda_evolve(omega, 0.0, 0.001, 0.001, 0.0005, &grid).unwrap();
        let k = (1..grid.len() - 1)
            .find(|&k| tr.s33[k] >= tr.s33[k - 1] && tr.s33[k] > tr.s33[k + 1])
            .unwrap();
        assert!((grid[k] - 0.5 / omega).abs() < 0.01 * 0.5 / omega);
    }

    #[test]
    fn adiabatic_symmetric_case() {
        let omega = 1.0;
        let g = 0.5;
        let delta = 100.0;
        let grid = adiabatic_grid(omega, g, delta).unwrap();
        let r = adiabatic_error(omega, g, delta, &grid).unwrap();
        assert!(r.max_population_error < 1e-3, "{r:?}");
        let bound = 4.0 * (0.25 * omega * omega + g * g) / (delta * delta);
        assert!(r.max_excited_population < bound);
        let t = effective_first_maximum(omega, g, delta).unwrap();
        let want = 1.0 / (2.0 * rates::effective_rabi(omega, g, delta).unwrap());
        assert!((t - want).abs() < 0.01 * want);
    }

    #[test]
    fn adiabatic_without_drive_is_exact() {
        let grid: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let r = adiabatic_error(0.0, 0.5, 50.0, &grid).unwrap();
        assert_eq!(r.max_population_error, 0.0);
    }

    #[test]
    fn adiabatic_error_shrinks_with_detuning() {
        let (omega, g) = (1.0, 0.5);
        let e1 = adiabatic_error(omega, g, 20.0, &adiabatic_grid(omega, g, 20.0).unwrap()).unwrap();
        let e2 = adiabatic_error(omega, g, 40.0, &adiabatic_grid(omega, g, 20.0).unwrap()).unwrap();
        assert!(e2.max_population_error < e1.max_population_error);
    }
}
