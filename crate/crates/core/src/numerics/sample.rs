use rand_distr::{Distribution, StandardNormal};

use super::RngState;
use crate::{Error, Result};

pub fn standard_normal(rng: &mut RngState) -> f64 {
    StandardNormal.sample(rng.rng())
}

/// One draw from the isotropic Gaussian `N(mean, sigma^2 I)`.
///
/// `sigma == 0` is accepted and returns `mean` without consuming randomness.
pub fn gaussian_sample(mean: &[f64], sigma: f64, rng: &mut RngState) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("gaussian sigma must be >= 0, got {sigma}")));
    }
    if mean.iter().any(|m| !m.is_finite()) {
        return Err(Error::param("gaussian mean must be finite"));
    }
    if sigma == 0.0 {
        return Ok(mean.to_vec());
    }
    Ok(mean.iter().map(|m| m + sigma * standard_normal(rng)).collect())
}

/// Natural log of a Gamma(shape, 1) variate.
///
/// Marsaglia & Tsang squeeze for shape >= 1. For shape < 1 the draw is
/// boosted: `G(shape) = G(shape + 1) * U^(1/shape)`, kept in log space so tiny
/// shapes cannot underflow to zero.
fn ln_gamma_variate(shape: f64, rng: &mut RngState) -> f64 {
    if shape < 1.0 {
        let boosted = ln_gamma_variate(shape + 1.0, rng);
        // (0, 1]: avoid ln(0)
        let u = 1.0 - rng.uniform();
        return boosted + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x = standard_normal(rng);
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u = rng.uniform();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return (d * v).ln();
        }
    }
}

fn check_shape(name: &str, shape: f64) -> Result<()> {
    if shape > 0.0 && shape.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be a positive finite real, got {shape}")))
    }
}

/// One draw from Gamma(shape, scale = 1).
pub fn gamma_sample(shape: f64, rng: &mut RngState) -> Result<f64> {
    check_shape("gamma shape", shape)?;
    Ok(ln_gamma_variate(shape, rng).exp())
}

/// One draw from Beta(a, b) as `X / (X + Y)` with `X ~ Gamma(a)`, `Y ~ Gamma(b)`.
pub fn beta_sample(a: f64, b: f64, rng: &mut RngState) -> Result<f64> {
    check_shape("beta a", a)?;
    check_shape("beta b", b)?;
    let ln_x = ln_gamma_variate(a, rng);
    let ln_y = ln_gamma_variate(b, rng);
    // X/(X+Y) = 1/(1 + exp(ln Y - ln X)); exact in [0, 1] for any magnitudes.
    Ok(1.0 / (1.0 + (ln_y - ln_x).exp()))
}
