//! Seeded Poisson sampling: inversion for small rates, PTRS rejection
//! (Hörmann's transformed rejection with squeeze) for large ones.

use rand::Rng;

const INVERSION_CUTOFF: f64 = 30.0;

pub fn poisson_sample<R: Rng>(lambda: f64, rng: &mut R) -> u64 {
    assert!(lambda.is_finite() && lambda >= 0.0, "bad rate {lambda}");
    if lambda == 0.0 {
        0
    } else if lambda < INVERSION_CUTOFF {
        // multiply uniforms until the product drops below e^-λ;
        // e^-30 ≈ 9e-14 keeps the product well inside f64 range
        let limit = (-lambda).exp();
        let mut k = 0u64;
        let mut prod = rng.gen::<f64>();
        while prod > limit {
            k += 1;
            prod *= rng.gen::<f64>();
        }
        k
    } else {
        ptrs(lambda, rng)
    }
}

fn ptrs<R: Rng>(lambda: f64, rng: &mut R) -> u64 {
    let log_lambda = lambda.ln();
    let b = 0.931 + 2.53 * lambda.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.gen::<f64>() - 0.5;
        let v = rng.gen::<f64>();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let accept = (v * inv_alpha / (a / (us * us) + b)).ln();
        if accept <= k * log_lambda - lambda - ln_factorial(k as u64) {
            return k as u64;
        }
    }
}

fn ln_factorial(k: u64) -> f64 {
    if k < 128 {
        (2..=k).map(|i| (i as f64).ln()).sum()
    } else {
        // Stirling series, error < 1e-12 at this size
        let x = (k + 1) as f64;
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
    }
}
