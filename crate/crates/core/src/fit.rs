//! Least-squares extraction of observables: Lorentzian peaks, exponential
//! lifetimes, Raman-to-spontaneous ratios and the phonon exponent.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::spectrum::{self, SpectralDecomposition};

// ---------------------------------------------------------------------------
// Levenberg–Marquardt

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    pub lambda0: f64,
    /// Largest scaled gradient component `|J_jᵀr|/(‖J_j‖‖r‖)` accepted as converged.
    pub gtol: f64,
    /// Relative step size accepted as converged.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            lambda0: 1e-3,
            gtol: 1e-8,
            xtol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Row-major `m × n` Jacobian at the solution.
    pub jacobian: Vec<Vec<f64>>,
    pub chi2: f64,
    pub iterations: usize,
}

impl LmSolution {
    /// `(JᵀJ)⁻¹`, optionally scaled by the reduced chi-square.
    pub fn covariance(&self, scale_by_chi2: bool) -> Result<Vec<Vec<f64>>> {
        let n = self.params.len();
        let m = self.residuals.len();
        let jtj = normal_matrix(&self.jacobian, n);
        let inv = jtj.partial_piv_lu().inverse();
        let s2 = if scale_by_chi2 && m > n {
            self.chi2 / (m - n) as f64
        } else {
            1.0
        };
        let cov: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| inv[(i, j)] * s2).collect())
            .collect();
        if cov.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        Ok(cov)
    }
}

fn normal_matrix(jac: &[Vec<f64>], n: usize) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| jac.iter().map(|row| row[i] * row[j]).sum())
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Minimizes `Σ r_k(x)²` from `x0`.
pub fn levenberg_marquardt<R, J>(
    residual: R,
    jacobian: J,
    x0: &[f64],
    opts: LmOptions,
) -> Result<LmSolution>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    J: Fn(&[f64]) -> Result<Vec<Vec<f64>>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residual(&x)?;
    let mut chi2 = sum_sq(&r);
    if !chi2.is_finite() {
        return Err(Error::domain("residuals are not finite at the starting point"));
    }
    let mut jac = jacobian(&x)?;
    let mut lambda = opts.lambda0;

    for iter in 1..=opts.max_iter {
        let rnorm = chi2.sqrt();
        let grad: Vec<f64> = (0..n)
            .map(|j| jac.iter().zip(&r).map(|(row, rk)| row[j] * rk).sum())
            .collect();
        let col_norm: Vec<f64> = (0..n)
            .map(|j| jac.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt())
            .collect();
        let scaled_grad = (0..n)
            .map(|j| {
                let d = col_norm[j] * rnorm;
                if d > 0.0 { grad[j].abs() / d } else { 0.0 }
            })
            .fold(0.0, f64::max);
        if rnorm == 0.0 || scaled_grad < opts.gtol {
            return Ok(LmSolution { params: x, residuals: r, jacobian: jac, chi2, iterations: iter - 1 });
        }

        let jtj = normal_matrix(&jac, n);
        let mut accepted = false;
        while !accepted {
            let a = Mat::from_fn(n, n, |i, j| {
                if i == j {
                    jtj[(i, i)] + lambda * jtj[(i, i)].max(1e-12)
                } else {
                    jtj[(i, j)]
                }
            });
            let b = Mat::from_fn(n, 1, |i, _| -grad[i]);
            let step = a.partial_piv_lu().solve(&b);
            let trial: Vec<f64> = (0..n).map(|i| x[i] + step[(i, 0)]).collect();
            let trial_r = match residual(&trial) {
                Ok(v) => v,
                Err(Error::Domain(_)) => vec![f64::INFINITY],
                Err(e) => return Err(e),
            };
            let trial_chi2 = sum_sq(&trial_r);
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                let small_step = (0..n).all(|i| {
                    step[(i, 0)].abs() <= opts.xtol * (x[i].abs() + opts.xtol)
                });
                x = trial;
                r = trial_r;
                chi2 = trial_chi2;
                jac = jacobian(&x)?;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if small_step {
                    return Ok(LmSolution { params: x, residuals: r, jacobian: jac, chi2, iterations: iter });
                }
            } else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    // no descent direction left at working precision
                    return Ok(LmSolution { params: x, residuals: r, jacobian: jac, chi2, iterations: iter });
                }
            }
        }
    }
    Err(Error::NoConvergence(opts.max_iter))
}

// ---------------------------------------------------------------------------
// Lorentzian peaks

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakStderr {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakFit {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    /// `amplitude·fwhm·π/2`.
    pub area: f64,
    pub stderr: PeakStderr,
    pub residual_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorentzianFit {
    pub peaks: Vec<PeakFit>,
    pub baseline: f64,
    pub baseline_stderr: f64,
    pub residual_rms: f64,
    pub iterations: usize,
}

/// Starting point for one peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakGuess {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
}

/// `A/(1 + (2(ν−ν₀)/w)²)`.
pub fn lorentzian(nu: f64, center: f64, fwhm: f64, amplitude: f64) -> f64 {
    let u = 2.0 * (nu - center) / fwhm;
    amplitude / (1.0 + u * u)
}

fn lorentz_model(params: &[f64], nu: f64) -> f64 {
    let n_peaks = (params.len() - 1) / 3;
    let mut y = params[params.len() - 1];
    for k in 0..n_peaks {
        let p = &params[3 * k..3 * k + 3];
        y += lorentzian(nu, p[1], p[2], p[0]);
    }
    y
}

fn lorentz_jacobian(params: &[f64], nu: f64) -> Vec<f64> {
    let n_peaks = (params.len() - 1) / 3;
    let mut row = vec![0.0; params.len()];
    for k in 0..n_peaks {
        let (a, c, w) = (params[3 * k], params[3 * k + 1], params[3 * k + 2]);
        let u = 2.0 * (nu - c) / w;
        let d = 1.0 + u * u;
        row[3 * k] = 1.0 / d;
        row[3 * k + 1] = 4.0 * a * u / (w * d * d);
        row[3 * k + 2] = 2.0 * a * u * u / (w * d * d);
    }
    row[params.len() - 1] = 1.0;
    row
}

/// Half-maximum width of the largest feature, by walking outwards from `peak`.
fn estimate_fwhm(x: &[f64], y: &[f64], peak: usize, base: f64) -> f64 {
    let half = base + 0.5 * (y[peak] - base);
    let mut lo = peak;
    while lo > 0 && y[lo] > half {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < y.len() && y[hi] > half {
        hi += 1;
    }
    let span = x[x.len() - 1] - x[0];
    let w = x[hi] - x[lo];
    if w > 0.0 { w } else { span / 10.0 }
}

fn data_driven_guesses(x: &[f64], y: &[f64], n_peaks: usize) -> Vec<PeakGuess> {
    let base = y.iter().copied().fold(f64::INFINITY, f64::min);
    let mut work: Vec<f64> = y.to_vec();
    let mut out = Vec::with_capacity(n_peaks);
    for _ in 0..n_peaks {
        let (i, _) = work
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let fwhm = estimate_fwhm(x, &work, i, base);
        let g = PeakGuess {
            center: x[i],
            fwhm,
            amplitude: work[i] - base,
        };
        for (k, v) in work.iter_mut().enumerate() {
            *v -= lorentzian(x[k], g.center, g.fwhm, g.amplitude);
        }
        out.push(g);
    }
    out
}

fn check_xy(data: &[(f64, f64)], min_points: usize) -> Result<()> {
    if data.len() < min_points {
        return Err(Error::domain(format!(
            "need at least {min_points} points, got {}",
            data.len()
        )));
    }
    if data.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::domain("data contains non-finite values"));
    }
    Ok(())
}

/// Fits `Σ_k A_k/(1 + (2(ν−ν_k)/w_k)²) + b` with one or two peaks.
///
/// Without `init`, peaks are seeded from the data maxima.
pub fn fit_lorentzian(
    data: &[(f64, f64)],
    n_peaks: usize,
    init: Option<&[PeakGuess]>,
) -> Result<LorentzianFit> {
    if !(1..=2).contains(&n_peaks) {
        return Err(Error::domain(format!("n_peaks must be 1 or 2, got {n_peaks}")));
    }
    check_xy(data, 4 * n_peaks + 1)?;
    let x: Vec<f64> = data.iter().map(|d| d.0).collect();
    let y: Vec<f64> = data.iter().map(|d| d.1).collect();

    let guesses = match init {
        Some(g) if g.len() == n_peaks => g.to_vec(),
        Some(g) => {
            return Err(Error::domain(format!(
                "expected {n_peaks} initial guesses, got {}",
                g.len()
            )))
        }
        None => data_driven_guesses(&x, &y, n_peaks),
    };
    let base = y.iter().copied().fold(f64::INFINITY, f64::min);
    let mut x0 = Vec::with_capacity(3 * n_peaks + 1);
    for g in &guesses {
        x0.extend([g.amplitude, g.center, g.fwhm]);
    }
    x0.push(base);

    let sol = levenberg_marquardt(
        |p| Ok(x.iter().zip(&y).map(|(&nu, &v)| lorentz_model(p, nu) - v).collect()),
        |p| Ok(x.iter().map(|&nu| lorentz_jacobian(p, nu)).collect()),
        &x0,
        LmOptions::default(),
    )?;
    let cov = sol.covariance(true)?;
    let rms = (sol.chi2 / x.len() as f64).sqrt();
    let sd = |i: usize| cov[i][i].max(0.0).sqrt();

    let mut peaks = Vec::with_capacity(n_peaks);
    for k in 0..n_peaks {
        let (a, c, w) = (sol.params[3 * k], sol.params[3 * k + 1], sol.params[3 * k + 2].abs());
        let (ia, iw) = (3 * k, 3 * k + 2);
        let half_pi = std::f64::consts::FRAC_PI_2;
        // area gradient w.r.t. (A, w)
        let (ga, gw) = (w * half_pi, a * half_pi);
        let var_area = ga * ga * cov[ia][ia] + gw * gw * cov[iw][iw] + 2.0 * ga * gw * cov[ia][iw];
        peaks.push(PeakFit {
            center: c,
            fwhm: w,
            amplitude: a,
            area: a * w * half_pi,
            stderr: PeakStderr {
                center: sd(3 * k + 1),
                fwhm: sd(iw),
                amplitude: sd(ia),
                area: var_area.max(0.0).sqrt(),
            },
            residual_rms: rms,
        });
    }
    if n_peaks == 2 {
        let sep = (peaks[0].center - peaks[1].center).abs();
        if sep < 0.1 * peaks[0].fwhm.max(peaks[1].fwhm) {
            return Err(Error::DegeneratePeaks(peaks[0].center, peaks[1].center));
        }
    }
    let nb = sol.params.len() - 1;
    Ok(LorentzianFit {
        peaks,
        baseline: sol.params[nb],
        baseline_stderr: sd(nb),
        residual_rms: rms,
        iterations: sol.iterations,
    })
}

// ---------------------------------------------------------------------------
// Exponential decay

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpStderr {
    pub tau: f64,
    pub amplitude: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpFit {
    pub tau: f64,
    /// Value of the decaying part at `t = 0`.
    pub amplitude: f64,
    pub baseline: f64,
    pub stderr: ExpStderr,
    pub residual_rms: f64,
    pub iterations: usize,
}

/// Fits `A·exp(−t/τ) + b`.
pub fn fit_exponential(data: &[(f64, f64)]) -> Result<ExpFit> {
    check_xy(data, 4)?;
    if data.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::domain("times must be strictly ascending"));
    }
    let t0 = data[0].0;
    let t: Vec<f64> = data.iter().map(|d| d.0 - t0).collect();
    let y: Vec<f64> = data.iter().map(|d| d.1).collect();

    // log-linear seed against a floor just below the data minimum
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = ymin - 0.01 * (ymax - ymin).max(f64::MIN_POSITIVE);
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(&y) {
        if yi - floor > 0.05 * (ymax - floor) {
            let l = (yi - floor).ln();
            sx += ti;
            sy += l;
            sxx += ti * ti;
            sxy += ti * l;
            cnt += 1.0;
        }
    }
    let slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    let span = t[t.len() - 1];
    let k0 = if slope.is_finite() && slope != 0.0 { -slope } else { 3.0 / span };

    // fitted in the rate k = 1/τ so that growth (k < 0) stays reachable
    let sol = levenberg_marquardt(
        |p| {
            Ok(t.iter()
                .zip(&y)
                .map(|(&ti, &yi)| p[0] * (-p[1] * ti).exp() + p[2] - yi)
                .collect())
        },
        |p| {
            Ok(t.iter()
                .map(|&ti| {
                    let e = (-p[1] * ti).exp();
                    vec![e, -p[0] * e * ti, 1.0]
                })
                .collect())
        },
        &[y[0] - floor, k0, floor],
        LmOptions::default(),
    )?;
    let (a, k, b) = (sol.params[0], sol.params[1], sol.params[2]);
    let tau = 1.0 / k;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::NonDecaying(tau));
    }
    let cov = sol.covariance(true)?;
    let sd = |i: usize| cov[i][i].max(0.0).sqrt();
    let shift = (t0 / tau).exp();
    Ok(ExpFit {
        tau,
        amplitude: a * shift,
        baseline: b,
        stderr: ExpStderr {
            tau: sd(1) * tau * tau,
            amplitude: sd(0) * shift,
            baseline: sd(2),
        },
        residual_rms: (sol.chi2 / t.len() as f64).sqrt(),
        iterations: sol.iterations,
    })
}

// ---------------------------------------------------------------------------
// Raman / spontaneous ratio

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioMode {
    #[default]
    Area,
    Amplitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RsPoint {
    pub delta: f64,
    pub ratio: f64,
    pub ratio_err: f64,
}

/// Tolerance on the assignment cost difference, GHz.
const ASSIGNMENT_TOL: f64 = 1.0;

/// Labels the two peaks (Raman nearer `−Δ`, spontaneous nearer 0) and returns `(R, S)`.
pub fn assign_peaks(a: &PeakFit, b: &PeakFit, delta: f64) -> Result<(PeakFit, PeakFit)> {
    let cost_ab = (a.center + delta).abs() + b.center.abs();
    let cost_ba = (b.center + delta).abs() + a.center.abs();
    if (cost_ab - cost_ba).abs() < ASSIGNMENT_TOL {
        return Err(Error::AmbiguousAssignment(format!(
            "centers {:.3} and {:.3} GHz are equally close to -{delta} and 0",
            a.center, b.center
        )));
    }
    Ok(if cost_ab < cost_ba { (*a, *b) } else { (*b, *a) })
}

pub fn rs_ratio(peaks: (&PeakFit, &PeakFit), delta: f64, mode: RatioMode) -> Result<RsPoint> {
    let (r, s) = assign_peaks(peaks.0, peaks.1, delta)?;
    if s.area < 3.0 * s.stderr.area {
        return Err(Error::VanishingSpontaneous {
            area: s.area,
            stderr: s.stderr.area,
        });
    }
    let (vr, er, vs, es) = match mode {
        RatioMode::Area => (r.area, r.stderr.area, s.area, s.stderr.area),
        RatioMode::Amplitude => (r.amplitude, r.stderr.amplitude, s.amplitude, s.stderr.amplitude),
    };
    let ratio = vr / vs;
    if !(ratio > 0.0) {
        return Err(Error::domain(format!("R/S ratio must be positive, got {ratio}")));
    }
    let rel = ((er / vr).powi(2) + (es / vs).powi(2)).sqrt();
    Ok(RsPoint {
        delta,
        ratio,
        ratio_err: ratio * rel,
    })
}

/// How model spectra are reduced to peak fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsOptions {
    /// Half width of the window fitted around each line, GHz.
    pub window: f64,
    /// Samples per window.
    pub points: usize,
    pub mode: RatioMode,
}

impl Default for RsOptions {
    fn default() -> Self {
        Self {
            window: 5.0,
            points: 401,
            mode: RatioMode::Area,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RsAnalysis {
    pub raman: PeakFit,
    pub spontaneous: PeakFit,
    pub point: RsPoint,
}

/// Single-Lorentzian fit of a model spectrum in `[center ± window]` (lab axis).
pub fn local_peak(
    dec: &SpectralDecomposition,
    p: &ModelParams,
    center: f64,
    opts: RsOptions,
) -> Result<PeakFit> {
    let grid = spectrum::linear_grid(center - opts.window, center + opts.window, opts.points);
    let data: Vec<(f64, f64)> = grid
        .iter()
        .map(|&nu| (nu, dec.intensity(nu + p.delta_laser)))
        .collect();
    let fit = fit_lorentzian(&data, 1, None)?;
    Ok(fit.peaks[0])
}

/// Raman and spontaneous lines of the model spectrum at `p`, each fitted
/// locally around `−Δ_L` and 0, and their ratio.
pub fn model_rs(p: &ModelParams, opts: RsOptions) -> Result<RsAnalysis> {
    let (_, _, dec) = spectrum::decompose(p)?;
    let raman = local_peak(&dec, p, -p.delta_laser, opts)?;
    let spontaneous = local_peak(&dec, p, 0.0, opts)?;
    let point = rs_ratio((&raman, &spontaneous), p.delta_laser, opts.mode)?;
    Ok(RsAnalysis {
        raman,
        spontaneous,
        point,
    })
}

/// Model R/S ratio at Raman resonance `Δ_L = Δ_c = delta`.
pub fn model_ratio(p: &ModelParams, delta: f64, opts: RsOptions) -> Result<f64> {
    Ok(model_rs(&p.with_detuning(delta), opts)?.point.ratio)
}

// ---------------------------------------------------------------------------
// Phonon exponent

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhononFit {
    pub n: f64,
    pub alpha: f64,
    pub n_stderr: f64,
    pub alpha_stderr: f64,
    /// Covariance of `(ln α, n)`.
    pub covariance: [[f64; 2]; 2],
    pub condition: f64,
    pub iterations: usize,
    pub residual_rms: f64,
}

/// Largest acceptable condition number of the `(ln α, n)` covariance.
pub const MAX_CONDITION: f64 = 1e8;

fn condition_2x2(c: &[Vec<f64>]) -> f64 {
    let (a, b, d) = (c[0][0], c[0][1], c[1][1]);
    let tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d).powi(2) + b * b).sqrt();
    let (hi, lo) = (tr + disc, tr - disc);
    if lo <= 0.0 { f64::INFINITY } else { hi / lo }
}

/// Exponents tried as starting points by [`fit_phonon_exponent`].
pub const N_STARTS: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];

/// Weighted least-squares fit of `(α, n)` with `α₁ = α₂ = α`, matching the
/// pipeline ratio to `points`. Other fields of `p` are held fixed.
///
/// The ratio is not monotone in `n`, so LM is started from each exponent in
/// [`N_STARTS`] with `α` scaled to match the point nearest the middle
/// detuning, and the lowest chi-square wins.
pub fn fit_phonon_exponent(points: &[RsPoint], p: &ModelParams) -> Result<PhononFit> {
    let opts = RsOptions::default();
    check_phonon_points(points)?;
    let mid = points
        .iter()
        .min_by(|a, b| {
            let c = 0.5 * (points[0].delta + points[points.len() - 1].delta);
            (a.delta - c).abs().total_cmp(&(b.delta - c).abs())
        })
        .copied()
        .expect("checked non-empty");
    let runs: Vec<Result<PhononFit>> = N_STARTS
        .par_iter()
        .map(|&n| {
            // S scales roughly linearly with α, so R/S ~ 1/α
            let unit = model_ratio(&p.with_phonon(1.0, n), mid.delta, opts)?;
            let alpha = (unit / mid.ratio).clamp(1e-12, 1e12);
            fit_phonon_exponent_with(points, p, (alpha, n), opts)
        })
        .collect();
    let mut best: Option<PhononFit> = None;
    let mut first_err = None;
    for r in runs {
        match r {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.residual_rms < b.residual_rms) {
                    best = Some(f);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start"))
}

fn check_phonon_points(points: &[RsPoint]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::domain(format!("need at least 3 points, got {}", points.len())));
    }
    let lo = points.iter().map(|q| q.delta).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|q| q.delta).fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) || hi < 3.0 * lo {
        return Err(Error::domain(format!(
            "detunings must span a factor of 3 (got {lo} to {hi} GHz)"
        )));
    }
    if points.iter().any(|q| !(q.ratio > 0.0)) {
        return Err(Error::domain("ratios must be positive"));
    }
    Ok(())
}

/// Single LM run from `start = (α, n)`.
pub fn fit_phonon_exponent_with(
    points: &[RsPoint],
    p: &ModelParams,
    start: (f64, f64),
    opts: RsOptions,
) -> Result<PhononFit> {
    check_phonon_points(points)?;
    let weighted = points.iter().all(|q| q.ratio_err > 0.0);

    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let q = p.with_phonon(x[0].exp(), x[1]);
        points
            .par_iter()
            .map(|pt| {
                // a trial point where the pipeline breaks down is a rejected step
                let m = model_ratio(&q, pt.delta, opts)
                    .map_err(|e| Error::domain(format!("model undefined at (ln α, n) = ({}, {}): {e}", x[0], x[1])))?;
                let w = if weighted { pt.ratio_err } else { 1.0 };
                Ok((m - pt.ratio) / w)
            })
            .collect()
    };
    let jacobian = |x: &[f64]| -> Result<Vec<Vec<f64>>> {
        let mut cols = Vec::with_capacity(2);
        for j in 0..2 {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[j] += h;
            dn[j] -= h;
            let ru = residual(&up)?;
            let rd = residual(&dn)?;
            cols.push(ru.iter().zip(&rd).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
        }
        Ok((0..points.len()).map(|k| vec![cols[0][k], cols[1][k]]).collect())
    };

    let sol = levenberg_marquardt(
        |x| residual(x),
        jacobian,
        &[start.0.ln(), start.1],
        LmOptions::default(),
    )?;
    let cov = sol.covariance(!weighted)?;
    let condition = condition_2x2(&cov);
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned(condition));
    }
    let alpha = sol.params[0].exp();
    Ok(PhononFit {
        n: sol.params[1],
        alpha,
        n_stderr: cov[1][1].max(0.0).sqrt(),
        alpha_stderr: alpha * cov[0][0].max(0.0).sqrt(),
        covariance: [[cov[0][0], cov[0][1]], [cov[1][0], cov[1][1]]],
        condition,
        iterations: sol.iterations,
        residual_rms: (sol.chi2 / points.len() as f64).sqrt(),
    })
}

// ---------------------------------------------------------------------------
// CSV input

/// Parses comma-separated numeric rows with at least `min_cols` columns.
/// `#` lines and blank lines are skipped; one non-numeric header row is allowed
/// before the first data row. Line numbers in errors are 1-based.
pub fn parse_columns(text: &str, min_cols: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if vals.len() < min_cols {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("expected at least {min_cols} columns, found {}", vals.len()),
                    });
                }
                rows.push(vals);
            }
            Err(e) => {
                if rows.is_empty() && !header_seen {
                    header_seen = true;
                    continue;
                }
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("invalid number in `{line}`: {e}"),
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: "no data rows".into(),
        });
    }
    Ok(rows)
}

/// Two-column `(x, y)` data.
pub fn parse_xy(text: &str) -> Result<Vec<(f64, f64)>> {
    Ok(parse_columns(text, 2)?.into_iter().map(|r| (r[0], r[1])).collect())
}

/// `(delta, ratio[, ratio_err])` rows; a missing error column means unit weights.
pub fn parse_rs_points(text: &str) -> Result<Vec<RsPoint>> {
    Ok(parse_columns(text, 2)?
        .into_iter()
        .map(|r| RsPoint {
            delta: r[0],
            ratio: r[1],
            ratio_err: r.get(2).copied().unwrap_or(0.0),
        })
        .collect())
}
