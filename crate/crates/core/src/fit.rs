//! Power-law fits in log–log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-space RMS residual above which a fit is not trusted.
pub const MAX_RELIABLE_RESIDUAL: f64 = 0.15;

/// Least-squares fit `value ≈ constant · r^exponent` of a sampled quantity.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DecayFit {
    pub quantity: String,
    /// Where the samples were taken, e.g. `ray(0,1,0)` or `sphere`.
    pub sampling: String,
    pub exponent: f64,
    pub constant: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// RMS of the residuals of `ln(value)` about the fitted line.
    pub residual: f64,
}

impl DecayFit {
    pub fn fit(quantity: &str, sampling: &str, radii: &[f64], values: &[f64]) -> Result<Self> {
        let (exponent, constant, residual) = power_law_fit(radii, values)?;
        Ok(Self {
            quantity: quantity.to_string(),
            sampling: sampling.to_string(),
            exponent,
            constant,
            radii: radii.to_vec(),
            values: values.to_vec(),
            residual,
        })
    }

    pub fn reliable(&self) -> bool {
        self.residual.is_finite() && self.residual <= MAX_RELIABLE_RESIDUAL
    }

    /// True when the fit is reliable and its exponent lies within `target ± tol`.
    pub fn matches(&self, target: f64, tol: f64) -> bool {
        self.reliable() && (self.exponent - target).abs() <= tol
    }
}

/// Ordinary least squares on `(ln r, ln v)`. Returns `(exponent, constant, rms)`.
pub fn power_law_fit(radii: &[f64], values: &[f64]) -> Result<(f64, f64, f64)> {
    if radii.len() != values.len() {
        return Err(Error::InvalidParameter(format!(
            "{} radii but {} values",
            radii.len(),
            values.len()
        )));
    }
    if radii.len() < 2 {
        return Err(Error::DegenerateFit("need at least two samples".into()));
    }
    if let Some(bad) = radii.iter().chain(values).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit(format!("non-positive or non-finite sample {bad}")));
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-24 {
        return Err(Error::DegenerateFit("all radii are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok((slope, intercept.exp(), (rss / n).sqrt()))
}

/// `n` geometrically spaced radii from `lo` to `hi` inclusive.
pub fn geometric_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let q = (hi / lo).powf(1.0 / (n as f64 - 1.0));
    (0..n).map(|i| if i == n - 1 { hi } else { lo * q.powi(i as i32) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let r = geometric_radii(4.0, 64.0, 5);
        let v: Vec<f64> = r.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
        let (e, c, res) = power_law_fit(&r, &v).unwrap();
        assert!((e + 1.5).abs() < 1e-12);
        assert!((c - 3.0).abs() < 1e-10);
        assert!(res < 1e-12);
    }

    #[test]
    fn equal_radii_rejected() {
        let r = [2.0; 4];
        let v = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(power_law_fit(&r, &v), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn noisy_fit_flagged_unreliable() {
        let r = [1.0, 2.0, 4.0, 8.0];
        let v = [1.0, 0.2, 1.0, 0.2];
        let fit = DecayFit::fit("noise", "test", &r, &v).unwrap();
        assert!(!fit.reliable());
        assert!(!fit.matches(fit.exponent, 1.0));
    }
}
