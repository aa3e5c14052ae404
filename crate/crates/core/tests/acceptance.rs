//! Acceptance criteria 1–11. Each test prints one PASS/FAIL line.

use cavity_raman::cli;
use cavity_raman::fit::{self, RsOptions, RsPoint};
use cavity_raman::linalg::{self, c64};
use cavity_raman::liouvillian::{self, PhononOptions};
use cavity_raman::model::{self, ModelParams};
use cavity_raman::oracle;
use cavity_raman::rates::{self, PurcellBoundInputs};
use cavity_raman::spectrum::{self, SpectralDecomposition};
use cavity_raman::TWO_PI;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

fn report(n: u32, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} [{name}]: {verdict} ({detail})");
    assert!(ok, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_g_extraction() {
    let g = rates::g_from_lifetimes(1.14, 1.74, 53.7).unwrap();
    report(1, "g from lifetimes", (g - 0.80).abs() <= 0.01, &format!("g = {g:.4} GHz"));
}

#[test]
fn criterion_02_purcell_bound() {
    let quoted = rates::purcell_factor(0.80, 53.7, 0.0021).unwrap();
    let gamma = rates::gamma_bare_bound(&PurcellBoundInputs::device());
    let unrounded = rates::purcell_factor(0.80, 53.7, gamma).unwrap();
    let ok = (quoted - 22.7).abs() <= 0.1 && (unrounded - 21.7).abs() <= 0.3;
    report(
        2,
        "Purcell factor",
        ok,
        &format!("F = {quoted:.3} with 0.0021 GHz, F = {unrounded:.3} with bound {gamma:.5} GHz"),
    );
}

#[test]
fn criterion_03_lifetime_forward() {
    let tau = rates::lifetime_on(0.80, 53.7, 1.74).unwrap();
    report(3, "cavity lifetime", (tau - 1.14).abs() <= 0.01, &format!("tau_on = {tau:.4} ns"));
}

#[test]
fn criterion_04_rate_formulas_vs_dynamics() {
    let mut worst_bare = 0.0f64;
    let mut parts = Vec::new();
    for ratio in [20.0, 50.0, 100.0] {
        // Γ = Γ_tot = 1 GHz, lifetime-limited coherence, weak drive Ω = Δ/20
        let delta = ratio;
        let omega = delta / 20.0;
        let want = rates::raman_rate_bare(omega, delta, 1.0, 1.0, 0.5).unwrap();
        let got = oracle::bare_growth_rate(omega, delta, 1.0, 1.0, 0.5).unwrap();
        let rel = (got / want - 1.0).abs();
        worst_bare = worst_bare.max(rel);
        parts.push(format!("bare D/G={ratio}: {rel:.2e}"));
    }
    let p = ModelParams {
        gamma1: 0.0,
        gamma2: 0.0,
        gamma_flip: 0.0,
        phonon_alpha1: 0.0,
        phonon_alpha2: 0.0,
        ..ModelParams::default()
    };
    let want = rates::raman_rate_cavity(&p).unwrap();
    let got = oracle::cavity_growth_rate(&p, want).unwrap();
    let cav = (got / want - 1.0).abs();
    parts.push(format!("cavity: {cav:.2e}"));
    report(4, "rate formulas vs ODE", worst_bare < 0.02 && cav < 0.05, &parts.join(", "));
}

#[test]
fn criterion_05_adiabatic_elimination() {
    let mut worst_err = 0.0f64;
    let mut worst_period = 0.0f64;
    for omega in [0.5, 1.0, 2.0] {
        let g = omega / 2.0;
        for factor in [100.0, 200.0] {
            let delta = factor * omega;
            let grid = oracle::adiabatic_grid(omega, g, delta).unwrap();
            let r = oracle::adiabatic_error(omega, g, delta, &grid).unwrap();
            worst_err = worst_err.max(r.max_population_error);
            let t = oracle::effective_first_maximum(omega, g, delta).unwrap();
            let want = std::f64::consts::PI / (TWO_PI * rates::effective_rabi(omega, g, delta).unwrap());
            worst_period = worst_period.max((t / want - 1.0).abs());
        }
    }
    report(
        5,
        "adiabatic elimination",
        worst_err < 1e-3 && worst_period < 0.01,
        &format!("max population error {worst_err:.2e}, period deviation {worst_period:.2e}"),
    );
}

#[test]
fn criterion_06_truncation_oracle() {
    let p = ModelParams::default();
    let device = oracle::truncation_error(&p, oracle::DEFAULT_N_MAX).unwrap();
    let flip = ModelParams { gamma_flip: p.kappa, ..p };
    let broken = oracle::truncation_error(&flip, oracle::DEFAULT_N_MAX).unwrap();
    report(
        6,
        "truncation oracle",
        device < 1e-3 && broken > 1e-2,
        &format!("device params {device:.2e} (< 1e-3), gamma_flip = kappa {broken:.2e} (> 1e-2)"),
    );
}

#[test]
fn criterion_07_spectrum_structure() {
    let p = ModelParams::default();
    let a = fit::model_rs(&p, RsOptions::default()).unwrap();
    let mut ok = (a.raman.center + 55.0).abs() <= 2.0 && a.spontaneous.center.abs() <= 3.0;
    let mut worst: f64 = 0.0;
    for k in 0..9 {
        let delta = 15.0 + 10.0 * k as f64;
        let r = fit::model_rs(&p.with_detuning(delta), RsOptions::default()).unwrap();
        worst = worst.max((r.raman.center + delta).abs());
    }
    ok &= worst <= 2.0;
    report(
        7,
        "spectrum structure",
        ok,
        &format!(
            "R at {:.3}, S at {:.3} GHz; worst R tracking offset over 15..95 GHz {worst:.3} GHz",
            a.raman.center, a.spontaneous.center
        ),
    );
}

#[test]
fn criterion_08_rs_growth() {
    let growth = |alpha: f64| {
        let q = ModelParams::default().with_phonon(alpha, 0.31);
        let hi = fit::model_ratio(&q, 88.0, RsOptions::default()).unwrap();
        let lo = fit::model_ratio(&q, 15.0, RsOptions::default()).unwrap();
        hi / lo
    };
    let base = growth(1.0);
    let spread = [0.1, 10.0]
        .iter()
        .map(|&a| (growth(a) / base - 1.0).abs())
        .fold(0.0, f64::max);
    report(
        8,
        "R/S growth",
        (5.0..=15.0).contains(&base) && spread < 1e-6,
        &format!("ratio(88)/ratio(15) = {base:.3} at alpha = 1; relative change for alpha in {{0.1, 10}} {spread:.3e} (needs < 1e-6)"),
    );
}

#[test]
fn criterion_09_cavity_enhancement() {
    let p = ModelParams::default();
    let on = cli::cavity_row(&p, p.delta_laser).unwrap().raman_intensity;
    let below = cli::cavity_row(&p, p.delta_laser - 100.0).unwrap().raman_intensity;
    let above = cli::cavity_row(&p, p.delta_laser + 100.0).unwrap().raman_intensity;
    let enh = (on / below).min(on / above);
    report(9, "cavity-sweep enhancement", enh >= 10.0, &format!("enhancement {enh:.2}"));
}

#[test]
fn criterion_10_phonon_exponent_round_trip() {
    let base = ModelParams::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, alpha, tol) in [(0.0, 1.0, 0.05), (0.31, 1.0, 0.02), (3.0, 5e-5, 0.1)] {
        let q = base.with_phonon(alpha, n);
        let pts: Vec<RsPoint> = (0..9)
            .map(|k| {
                fit::model_rs(&q.with_detuning(15.0 + 10.0 * k as f64), RsOptions::default())
                    .unwrap()
                    .point
            })
            .collect();
        match fit::fit_phonon_exponent(&pts, &base) {
            Ok(f) => {
                ok &= (f.n - n).abs() <= tol;
                parts.push(format!("n = {n}: {:.4}", f.n));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("n = {n}: {e}"));
            }
        }
    }
    report(10, "phonon exponent round trip", ok, &parts.join(", "));
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    let delta_laser = rng.random_range(15.0..100.0);
    let n = rng.random_range(0.0..3.0);
    // α is drawn through J(Δ_L) = αΔ_Lⁿ so the phonon rates stay physical
    let alpha = |rng: &mut ChaCha8Rng| rng.random_range(1.0..30.0) / f64::powf(delta_laser, n);
    ModelParams {
        g: rng.random_range(0.2..2.0),
        kappa: rng.random_range(20.0..100.0),
        omega_drive: rng.random_range(0.5..5.0),
        delta_laser,
        delta_cavity: delta_laser + rng.random_range(-10.0..10.0),
        gamma1: rng.random_range(0.01..0.2),
        gamma2: rng.random_range(0.01..0.2),
        gamma_flip: rng.random_range(0.1..2.0),
        kt: rng.random_range(20.0..150.0),
        delta_g: 544.0,
        phonon_alpha1: alpha(rng),
        phonon_alpha2: alpha(rng),
        phonon_n: n,
    }
}

/// Spectrum from an FFT of `g1(τ)` sampled every `dt`, trapezoid-corrected.
fn fft_spectrum(dec: &SpectralDecomposition, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let slowest = dec
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != dec.zero_mode)
        .map(|(_, l)| -l.re)
        .fold(f64::INFINITY, f64::min);
    let n = ((40.0 / slowest / dt) as usize).next_power_of_two().max(1 << 17);
    let zero = dec.residues[dec.zero_mode];
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = (0..n)
        .map(|m| {
            let g = dec.correlation(m as f64 * dt) - zero;
            rustfft::num_complex::Complex::new(g.re, g.im)
        })
        .collect();
    buf[0] *= 0.5;
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt);
    let mut freqs = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    for (k, v) in buf.iter().enumerate() {
        let f = if k < n / 2 { k as f64 } else { k as f64 - n as f64 } * df;
        freqs.push(f);
        vals.push(2.0 * dec.kappa_rate * v.re * dt);
    }
    (freqs, vals)
}

#[test]
fn criterion_11_structural_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    let (mut worst_tp, mut worst_sum, mut worst_db, mut worst_fft) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let sets = 50;
    for s in 0..sets {
        let p = random_params(&mut rng);
        let l = liouvillian::build_liouvillian(&p).unwrap();
        worst_tp = worst_tp.max(l.trace_defect());
        let rho = liouvillian::steady_state(&l).unwrap();
        let herm = linalg::hermiticity_defect(rho.matrix());
        let min_eig = rho.min_eigenvalue().unwrap();
        if herm > 1e-12 || min_eig < -1e-12 {
            failures.push(format!("set {s}: hermiticity {herm:.1e}, min eigenvalue {min_eig:.1e}"));
        }

        let dec = SpectralDecomposition::new(&l, &rho, p.kappa).unwrap();
        let sum: c64 = dec.residue_sum();
        worst_sum = worst_sum.max((sum - c64::new(dec.photon_number, 0.0)).norm());

        let grid = spectrum::linear_grid(-200.0, 200.0, 4001);
        let spec: Vec<f64> = grid.iter().map(|&nu| dec.intensity(nu)).collect();
        let peak = spec.iter().cloned().fold(0.0, f64::max);
        let low = spec.iter().cloned().fold(f64::INFINITY, f64::min);
        if low < -1e-9 * peak {
            failures.push(format!("set {s}: negative intensity {low:.2e} (peak {peak:.2e})"));
        }

        let d = model::dressed_states(&p).unwrap();
        let chans = liouvillian::phonon_channels(&p, &d, PhononOptions::default()).unwrap();
        let want = (-p.delta_laser / p.kt).exp();
        for pair in chans.chunks(2) {
            worst_db = worst_db.max((pair[0].rate / pair[1].rate / want - 1.0).abs());
        }

        let (freqs, vals) = fft_spectrum(&dec, 1e-3);
        let mut dev = 0.0f64;
        let mut fft_peak = 0.0f64;
        for (f, v) in freqs.iter().zip(&vals) {
            if f.abs() <= 200.0 {
                dev = dev.max((v - dec.intensity(*f)).abs());
                fft_peak = fft_peak.max(*v);
            }
        }
        worst_fft = worst_fft.max(dev / peak.max(fft_peak));
    }
    if worst_tp > 1e-10 {
        failures.push(format!("trace defect {worst_tp:.1e}"));
    }
    if worst_sum > 1e-10 {
        failures.push(format!("residue sum off by {worst_sum:.1e}"));
    }
    if worst_db > 1e-12 {
        failures.push(format!("detailed balance off by {worst_db:.1e}"));
    }
    if worst_fft > 0.01 {
        failures.push(format!("FFT deviation {worst_fft:.2e} of peak"));
    }
    let detail = format!(
        "{sets} random sets; trace defect {worst_tp:.1e}, sum rule {worst_sum:.1e}, detailed balance {worst_db:.1e}, FFT {worst_fft:.1e} of peak{}",
        if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
    );
    report(11, "structural invariants", failures.is_empty(), &detail);
}
