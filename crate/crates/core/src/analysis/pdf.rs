//! Probability densities used by the fits.

use statrs::function::gamma::ln_gamma;

use super::{AnalysisError, Result};

/// Exponentially scaled modified Bessel function of the first kind, order
/// zero: `I0(x) exp(-|x|)`. Relative error below 2e-7.
pub fn bessel_i0e(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 3.75 {
        let t = (x / 3.75).powi(2);
        let i0 = 1.0
            + t * (3.515_622_9
                + t * (3.089_942_4 + t * (1.206_749_2 + t * (0.265_973_2 + t * (0.036_076_8 + t * 0.004_581_3)))));
        i0 * (-ax).exp()
    } else {
        let t = 3.75 / ax;
        (0.398_942_28
            + t * (0.013_285_92
                + t * (0.002_253_19
                    + t * (-0.001_575_65
                        + t * (0.009_162_81
                            + t * (-0.020_577_06 + t * (0.026_355_37 + t * (-0.016_476_33 + t * 0.003_923_77))))))))
            / ax.sqrt()
    }
}

fn check(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(AnalysisError::Domain(what.to_string()))
    }
}

/// Rayleigh density of amplitude `a` with scale parameter `sigma2`.
pub fn rayleigh_pdf(a: f64, sigma2: f64) -> Result<f64> {
    check(a >= 0.0, "amplitude must be non-negative")?;
    check(sigma2 > 0.0, "sigma2 must be positive")?;
    Ok(a / sigma2 * (-a * a / (2.0 * sigma2)).exp())
}

/// Rician density of amplitude `a` with diffuse power parameter `sigma2`
/// and specular amplitude `z`.
pub fn rician_pdf(a: f64, sigma2: f64, z: f64) -> Result<f64> {
    check(a >= 0.0, "amplitude must be non-negative")?;
    check(sigma2 > 0.0, "sigma2 must be positive")?;
    check(z >= 0.0, "specular amplitude must be non-negative")?;
    let arg = a * z / sigma2;
    Ok(a / sigma2 * (-(a - z).powi(2) / (2.0 * sigma2)).exp() * bessel_i0e(arg))
}

pub fn exponential_pdf(x: f64, lambda: f64) -> Result<f64> {
    check(x >= 0.0, "value must be non-negative")?;
    check(lambda > 0.0, "rate must be positive")?;
    Ok(lambda * (-lambda * x).exp())
}

/// Gamma density with shape `k` and scale `theta`.
pub fn gamma_pdf(x: f64, k: f64, theta: f64) -> Result<f64> {
    check(x >= 0.0, "value must be non-negative")?;
    check(k > 0.0 && theta > 0.0, "shape and scale must be positive")?;
    if x == 0.0 {
        return Ok(if k < 1.0 {
            f64::INFINITY
        } else if k == 1.0 {
            1.0 / theta
        } else {
            0.0
        });
    }
    Ok(((k - 1.0) * x.ln() - x / theta - ln_gamma(k) - k * theta.ln()).exp())
}
