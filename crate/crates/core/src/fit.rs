//! Small least-squares helpers for scaling fits.

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl LineFit {
    /// Fits with R² below this are reported as inconclusive.
    pub const MIN_R2: f64 = 0.95;

    pub fn conclusive(&self) -> bool {
        self.r2 >= Self::MIN_R2
    }
}

/// Ordinary least squares y = a + b x.
pub fn line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("line fit needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("degenerate abscissae in line fit"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LineFit { slope, intercept, r2 })
}

/// Unweighted fit of ln y = ln a + b ln x; returns slope b and intercept ln a.
pub fn power_law(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(invalid("power-law fit needs positive data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line(&lx, &ly)
}

/// Fit y = c x through the origin; returns (c, rms residual).
pub fn through_origin(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.is_empty() {
        return Err(invalid("fit needs paired points"));
    }
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Err(invalid("all abscissae vanish"));
    }
    let c = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - c * a).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    Ok((c, rms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        let f = power_law(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn origin_fit() {
        let (c, rms) = through_origin(&[1.0, 2.0], &[2.0, 4.0]).unwrap();
        assert_eq!(c, 2.0);
        assert_eq!(rms, 0.0);
    }
}
