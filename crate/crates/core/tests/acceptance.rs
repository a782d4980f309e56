//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line with the
//! measured value, the pinned tolerance and the runtime, then asserts.
//!
//! Reference numbers and pattern gains are recomputed here with direct
//! summation rather than through the library's grid evaluators.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use upa_codebook::codebook::{
    baseline_allones, baseline_kp_dft, design_codebook, phase_shift, Codebook, DesignOptions,
    Sweep,
};
use upa_codebook::omp::rayleigh_baseband;
use upa_codebook::sim::{evaluate_rate, simulate_outcomes, with_workers, ChannelScenario, SimParams};
use upa_codebook::{CMatrix, CVector, CodebookConfig, UpaConfig};

// ---- tolerances -----------------------------------------------------------

const PARSEVAL_REL_TOL: f64 = 5e-3;
const SHIFT_IDENTITY_TOL: f64 = 1e-10;
const SHIFT_INVARIANCE_TOL: f64 = 1e-9;
const RAYLEIGH_COS_TOL: f64 = 1e-8;
const ALLONES_TARGET: f64 = 0.440;
const ALLONES_TOL: f64 = 0.03;
const PROPOSED_TARGET: f64 = 0.553;
const PROPOSED_TOL: f64 = 0.03;
const STRIDED_FLOOR: f64 = 0.50;
const GUARD_TARGET: f64 = 0.467;
const GUARD_TOL: f64 = 0.04;
const PAIRED_SE_MULTIPLE: f64 = 2.0;

const STRIDE: u64 = 729;
const RATE_SNRS_DB: [f64; 3] = [0.0, 10.0, 20.0];
const RATE_REALIZATIONS: usize = 2000;
const BOUND_REALIZATIONS: usize = 10_000;

/// Physical-angle grid used for the mean-gain criteria.
const THETA_GRID: (usize, usize) = (180, 90);

fn report(id: &str, what: &str, pass: bool, detail: String, elapsed: Duration) {
    println!(
        "[{}] {id} {what}: {detail} ({:.1} s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

// ---- oracles --------------------------------------------------------------

/// `|d(ψ_h) ⊗ d(ψ_v)|^H c|²` by direct summation.
fn gain(c: &[Complex64], m_h: usize, m_v: usize, psi_h: f64, psi_v: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..m_h {
        for j in 0..m_v {
            let ph = i as f64 * psi_h + j as f64 * psi_v;
            acc += Complex64::from_polar(1.0, -ph) * c[i * m_v + j];
        }
    }
    acc.norm_sqr() / (m_h * m_v) as f64
}

/// Mean and minimum over a physical midpoint grid of the best-beam gain.
fn theta_coverage(book: &Codebook) -> (f64, f64) {
    let (gh, gv) = THETA_GRID;
    let (m_h, m_v) = (book.upa.m_h, book.upa.m_v);
    let comps: Vec<Vec<Complex64>> = book
        .entries
        .iter()
        .map(|e| e.composite.iter().copied().collect())
        .collect();
    let (mut sum, mut min) = (0.0, f64::INFINITY);
    for a in 0..gh {
        let th = -PI / 2.0 + (a as f64 + 0.5) * PI / gh as f64;
        for b in 0..gv {
            let tv = -PI / 4.0 + (b as f64 + 0.5) * (PI / 2.0) / gv as f64;
            let (ph, pv) = (PI * th.sin() * tv.cos(), PI * tv.sin());
            let best = comps
                .iter()
                .map(|c| gain(c, m_h, m_v, ph, pv))
                .fold(0.0, f64::max);
            sum += best;
            min = min.min(best);
        }
    }
    (sum / (gh * gv) as f64, min)
}

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn random_unit(rng: &mut ChaCha8Rng, m: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..m).map(|_| cn(rng)).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

fn random_equal_gain(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMatrix {
    let a = 1.0 / (m as f64).sqrt();
    CMatrix::from_fn(m, n, |_, _| Complex64::from_polar(a, rng.random::<f64>() * TAU))
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

// ---- shared codebooks -----------------------------------------------------

fn upa_12x6() -> UpaConfig {
    UpaConfig::new(12, 6, 4, 6).unwrap()
}

fn upa_16x8() -> UpaConfig {
    UpaConfig::new(16, 8, 4, 6).unwrap()
}

fn proposed_12x6(gamma: f64) -> Codebook {
    let cb = CodebookConfig::new(8, 8, 8, 8, 3).with_gamma(gamma);
    design_codebook(&upa_12x6(), &cb, &Sweep::Strided(STRIDE), 0, &DesignOptions::default()).unwrap()
}

fn proposed_12x6_plain() -> &'static (Codebook, Duration) {
    static CELL: OnceLock<(Codebook, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Instant::now();
        let b = proposed_12x6(0.0);
        (b, t.elapsed())
    })
}

fn proposed_16x8() -> &'static (Codebook, Duration) {
    static CELL: OnceLock<(Codebook, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Instant::now();
        let cb = CodebookConfig::new(8, 4, 8, 8, 3);
        let b = design_codebook(&upa_16x8(), &cb, &Sweep::Strided(STRIDE), 0, &DesignOptions::default())
            .unwrap();
        (b, t.elapsed())
    })
}

fn kp_dft_16x8() -> Codebook {
    baseline_kp_dft(&upa_16x8(), 8, 4).unwrap()
}

// ---- criteria -------------------------------------------------------------

#[test]
fn c01_parseval_energy() {
    let t = Instant::now();
    let (m_h, m_v) = (12, 6);
    let k = 64;
    let cell = (TAU / k as f64).powi(2);
    let want = TAU * TAU / 72.0;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = random_unit(&mut rng, 72);
        let mut e = 0.0;
        for a in 0..k {
            let ph = -PI + (a as f64 + 0.5) * TAU / k as f64;
            for b in 0..k {
                let pv = -PI + (b as f64 + 0.5) * TAU / k as f64;
                e += gain(&c, m_h, m_v, ph, pv);
            }
        }
        worst = worst.max((e * cell / want - 1.0).abs());
    }
    let el = t.elapsed();
    let pass = worst <= PARSEVAL_REL_TOL && el < Duration::from_secs(30);
    report("C1", "Parseval energy (12,6), 100 beamformers", pass,
        format!("max rel err {worst:.3e} <= {PARSEVAL_REL_TOL:e}, limit 30 s"), el);
    assert!(pass);
}

#[test]
fn c02_shifted_pattern_identity() {
    let t = Instant::now();
    let upa = upa_12x6();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let f = random_equal_gain(&mut rng, 72, n);
        let v = CVector::from_fn(n, |_, _| cn(&mut rng));
        let v = v.unscale((&f * &v).norm());
        let (a, b) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let (ph, pv) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let c0 = &f * &v;
        let c1 = phase_shift(&f, &upa, a, b) * &v;
        let g0 = gain(c0.as_slice(), 12, 6, ph, pv);
        let g1 = gain(c1.as_slice(), 12, 6, ph + a, pv + b);
        worst = worst.max((g0 - g1).abs());
    }
    let el = t.elapsed();
    let pass = worst <= SHIFT_IDENTITY_TOL && el < Duration::from_secs(5);
    report("C2", "shifted-pattern identity, 1000 triples", pass,
        format!("max |dG| {worst:.3e} <= {SHIFT_IDENTITY_TOL:e}, limit 5 s"), el);
    assert!(pass);
}

#[test]
fn c03_shift_invariant_mse() {
    let t = Instant::now();
    let (book, _) = proposed_16x8();
    let (m_h, m_v) = (16, 8);
    let (q_h, q_v) = (8, 4);
    let dh = TAU / q_h as f64;
    let dv = 2.0 * PI / SQRT_2 / q_v as f64;
    let level = (32.0 * SQRT_2 / 128.0f64).min(1.0);
    let k = 64;
    let step = TAU / k as f64;
    let mse = |q: usize, p: usize| -> f64 {
        let c: Vec<Complex64> = book.entry(q, p).composite.iter().copied().collect();
        let lo_h = -PI + q as f64 * dh;
        let lo_v = -PI / SQRT_2 + p as f64 * dv;
        let mut s = 0.0;
        for a in 0..k {
            let off_h = (a as f64 + 0.5) * step;
            for b in 0..k {
                let off_v = (b as f64 + 0.5) * step;
                let ideal = if off_h < dh && off_v < dv { level } else { 0.0 };
                s += (ideal - gain(&c, m_h, m_v, lo_h + off_h, lo_v + off_v)).powi(2);
            }
        }
        s / (k * k) as f64
    };
    let base = mse(0, 0);
    let mut worst = 0.0f64;
    for q in 0..q_h {
        for p in 0..q_v {
            worst = worst.max((mse(q, p) - base).abs());
        }
    }
    let el = t.elapsed();
    let pass = worst <= SHIFT_INVARIANCE_TOL && el < Duration::from_secs(60);
    report("C3", "full-period MSE equal across 32 entries, (16,8)/(8,4)", pass,
        format!("max |dMSE| {worst:.3e} <= {SHIFT_INVARIANCE_TOL:e} (MSE {base:.5}), limit 60 s"), el);
    assert!(pass);
}

#[test]
fn c04_rayleigh_matches_power_iteration() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let sizes = [72usize, 128, 288];
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let m = sizes[rng.random_range(0..sizes.len())];
        let n = rng.random_range(1..=4);
        let f = random_equal_gain(&mut rng, m, n);
        let w = CVector::from_vec(random_unit(&mut rng, m));
        let (v, _) = rayleigh_baseband(&f, &w).unwrap();

        // power iteration on B^{-1} A, A = F^H w w^H F, B = F^H F
        let fw = f.adjoint() * &w;
        let a: DMatrix<Complex64> = &fw * fw.adjoint();
        let b_inv = (f.adjoint() * &f).lu().try_inverse().unwrap();
        let op = b_inv * a;
        let mut u = CVector::from_fn(n, |_, _| cn(&mut rng));
        for _ in 0..30 {
            u = &op * &u;
            u /= Complex64::from(u.norm());
        }
        let cos = v.dotc(&u).norm() / (v.norm() * u.norm());
        worst = worst.max(1.0 - cos);
    }
    let el = t.elapsed();
    let pass = worst < RAYLEIGH_COS_TOL && el < Duration::from_secs(60);
    report("C4", "baseband solve vs power iteration, 10^4 instances", pass,
        format!("max 1-|cos| {worst:.3e} < {RAYLEIGH_COS_TOL:e}, limit 60 s"), el);
    assert!(pass);
}

fn allones_mean() -> &'static (f64, f64, f64, Duration) {
    static CELL: OnceLock<(f64, f64, f64, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Instant::now();
        let book = baseline_allones(&upa_12x6(), 8, 8).unwrap();
        let (mean, min) = theta_coverage(&book);
        (mean, min, book.coverage.mean_gain_psi, t.elapsed())
    })
}

#[test]
fn c05_allones_baseline_gain() {
    let (mean, _, psi_mean, el) = *allones_mean();
    let pass = (mean - ALLONES_TARGET).abs() <= ALLONES_TOL && el < Duration::from_secs(120);
    report("C5", "all-ones baseline mean gain, (12,6)/(8,8)", pass,
        format!(
            "mean {mean:.4} (psi-grid {psi_mean:.4}), target {ALLONES_TARGET} +/- {ALLONES_TOL}, limit 120 s"
        ),
        el);
    assert!(pass);
}

#[test]
fn c06_proposed_gain() {
    let t = Instant::now();
    let (book, design_time) = proposed_12x6_plain();
    let (mean, _) = theta_coverage(book);
    let (base, _, _, _) = *allones_mean();
    let el = t.elapsed().max(*design_time);
    let pass = mean >= STRIDED_FLOOR
        && mean > base
        && el < Duration::from_secs(900);
    report("C6", "proposed strided(729) mean gain, (12,6)/(8,8)", pass,
        format!(
            "mean {mean:.4} >= {STRIDED_FLOOR} and > measured all-ones {base:.4}; \
             {} candidates, limit 900 s",
            book.stats.candidates_evaluated
        ),
        el);

    if std::env::var_os("UPACB_FULL_SWEEP").is_some() {
        let t = Instant::now();
        let cb = CodebookConfig::new(8, 8, 8, 8, 3);
        let full = design_codebook(&upa_12x6(), &cb, &Sweep::Full, 0, &DesignOptions::default()).unwrap();
        let (fm, _) = theta_coverage(&full);
        let ok = (fm - PROPOSED_TARGET).abs() <= PROPOSED_TOL;
        report("C6*", "full sweep mean gain (optional)", ok,
            format!("mean {fm:.4}, target {PROPOSED_TARGET} +/- {PROPOSED_TOL}"), t.elapsed());
        assert!(ok);
    } else {
        println!("[SKIP] C6* full 3^14 sweep (optional): set UPACB_FULL_SWEEP=1 to run");
    }
    assert!(pass);
}

#[test]
fn c07_guard_band() {
    let t = Instant::now();
    let guarded = proposed_12x6(0.075);
    let (mean, min_g) = theta_coverage(&guarded);
    let (plain, _) = proposed_12x6_plain();
    let (_, min_0) = theta_coverage(plain);
    let el = t.elapsed();
    let level_ok = (mean - GUARD_TARGET).abs() <= GUARD_TOL;
    let dips_ok = min_g > min_0;
    let pass = level_ok && dips_ok && el < Duration::from_secs(900);
    report("C7", "guard band gamma=0.075 strided(729)", pass,
        format!(
            "mean {mean:.4}, target {GUARD_TARGET} +/- {GUARD_TOL} [{}]; min gain {min_g:.4} vs {min_0:.4} at gamma=0 [{}]",
            if level_ok { "ok" } else { "out of tolerance" },
            if dips_ok { "shallower" } else { "not shallower" }
        ),
        el);
    assert!(pass);
}

fn rate_tables(workers: usize) -> String {
    let (prop, _) = proposed_16x8();
    let kp = kp_dft_16x8();
    with_workers(workers, || {
        let mut out = String::new();
        for (name, sc) in [("s1", ChannelScenario::scenario1()), ("s2", ChannelScenario::scenario2())] {
            let params = SimParams::new(sc, RATE_REALIZATIONS, 7);
            for (label, book) in [(format!("proposed_{name}"), prop), (format!("kp_dft_{name}"), &kp)] {
                out.push_str(&evaluate_rate(book, &label, &params, &RATE_SNRS_DB).unwrap().to_csv(false));
            }
        }
        out
    })
    .unwrap()
}

#[test]
fn c08_rate_ordering() {
    let t = Instant::now();
    let (prop, _) = proposed_16x8();
    let kp = kp_dft_16x8();
    let mut all = true;
    let mut detail = Vec::new();
    for (name, sc) in [("scenario1", ChannelScenario::scenario1()), ("scenario2", ChannelScenario::scenario2())] {
        let params = SimParams::new(sc, RATE_REALIZATIONS, 7);
        for &snr in &RATE_SNRS_DB {
            let a = simulate_outcomes(prop, &params, snr).unwrap();
            let b = simulate_outcomes(&kp, &params, snr).unwrap();
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.rate - y.rate).collect();
            let (m, se) = mean_se(&d);
            let ok = m > PAIRED_SE_MULTIPLE * se;
            all &= ok;
            detail.push(format!("{name}@{snr}dB diff {m:.3} (z {:.1})", m / se));
        }
    }
    let el = t.elapsed();
    let pass = all && el < Duration::from_secs(600);
    report("C8", "proposed > KP-DFT rate by > 2 paired SE, (16,8)/(8,4)", pass,
        format!("{}; limit 600 s", detail.join(", ")), el);
    assert!(pass);
}

#[test]
fn c09_rate_upper_bound() {
    let t = Instant::now();
    let (book, _) = proposed_16x8();
    let params = SimParams::new(ChannelScenario::los_only(), BOUND_REALIZATIONS, 9);
    let m = 128.0;
    let q_lambda = 32.0 * SQRT_2;
    let mut all = true;
    let mut detail = Vec::new();
    for &snr in &RATE_SNRS_DB {
        let rho = 10f64.powf(snr / 10.0);
        let bound = (1.0 + rho * m * q_lambda / m).log2();
        let out = simulate_outcomes(book, &params, snr).unwrap();
        let mean = out.iter().map(|o| o.rate).sum::<f64>() / out.len() as f64;
        all &= mean <= bound;
        detail.push(format!("{snr}dB {mean:.3} <= {bound:.3}"));
    }
    let el = t.elapsed();
    let pass = all && el < Duration::from_secs(300);
    report("C9", "LOS-only mean rate below upper bound, 10^4 realizations", pass,
        format!("{}; limit 300 s", detail.join(", ")), el);
    assert!(pass);
}

#[test]
fn c10_worker_count_determinism() {
    let t = Instant::now();
    let one = rate_tables(1);
    let eight = rate_tables(8);
    let el = t.elapsed();
    let pass = one == eight && !one.is_empty();
    report("C10", "rate CSV identical with 1 and 8 workers", pass,
        format!("{} bytes, identical: {}", one.len(), one == eight), el);
    assert!(pass);
}
