//! Distribution samplers driven by [`RandomSource`].

use super::{NumericsError, RandomSource};

fn invalid(msg: impl Into<String>) -> NumericsError {
    NumericsError::InvalidParameter(msg.into())
}

pub fn sample_bernoulli(p: f64, rng: &mut RandomSource) -> Result<bool, NumericsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("bernoulli p = {p} outside [0, 1]")));
    }
    Ok(rng.next_f64() < p)
}

/// Marsaglia polar method; no cached second variate, so every call
/// consumes whole rejection rounds and sequences stay aligned per call.
pub fn standard_normal(rng: &mut RandomSource) -> f64 {
    loop {
        let u = 2.0 * rng.next_f64() - 1.0;
        let v = 2.0 * rng.next_f64() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

pub fn sample_normal(mean: f64, sd: f64, rng: &mut RandomSource) -> Result<f64, NumericsError> {
    if !(sd > 0.0 && sd.is_finite()) || !mean.is_finite() {
        return Err(invalid(format!("normal requires finite mean and sd > 0 (mean = {mean}, sd = {sd})")));
    }
    Ok(mean + sd * standard_normal(rng))
}

/// Marsaglia-Tsang; shapes below one use the `U^(1/shape)` boost.
pub fn sample_gamma(shape: f64, scale: f64, rng: &mut RandomSource) -> Result<f64, NumericsError> {
    if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("gamma requires shape, scale > 0 (shape = {shape}, scale = {scale})")));
    }
    if shape < 1.0 {
        let g = sample_gamma(shape + 1.0, scale, rng)?;
        let u = rng.next_f64();
        return Ok(g * u.powf(1.0 / shape));
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = rng.next_f64();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return Ok(d * v * scale);
        }
    }
}

/// Multiplicative inversion below rate 10, Hörmann's PTRS above.
pub fn sample_poisson(rate: f64, rng: &mut RandomSource) -> Result<u64, NumericsError> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(invalid(format!("poisson rate = {rate} must be finite and >= 0")));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    if rate < 10.0 {
        let limit = (-rate).exp();
        let mut k = 0u64;
        let mut prod = rng.next_f64();
        while prod > limit {
            k += 1;
            prod *= rng.next_f64();
        }
        return Ok(k);
    }
    let slam = rate.sqrt();
    let loglam = rate.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.next_f64() - 0.5;
        let v = rng.next_f64();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return Ok(k as u64);
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -rate + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return Ok(k as u64);
        }
    }
}

/// Negative binomial in mean-dispersion form (variance = mean + mean²/dispersion),
/// drawn as a gamma-Poisson mixture.
pub fn sample_negative_binomial(mean: f64, dispersion: f64, rng: &mut RandomSource) -> Result<u64, NumericsError> {
    if !(mean > 0.0 && mean.is_finite() && dispersion > 0.0 && dispersion.is_finite()) {
        return Err(invalid(format!(
            "negative binomial requires mean, dispersion > 0 (mean = {mean}, dispersion = {dispersion})"
        )));
    }
    let rate = sample_gamma(dispersion, mean / dispersion, rng)?;
    sample_poisson(rate, rng)
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}
