//! Weighted least-squares fits and significance measures for correlation
//! curves.
//!
//! The question these answer: when the degree of correlation is measured at
//! a handful of analyzer angles, is the curve flat, or does it oscillate the
//! way an entangled state demands? Both candidate shapes are linear in their
//! parameters, so weighted normal equations solve them exactly:
//!
//! * a constant `y = a`, and
//! * a sinusoid `y = a + b cos(2 pi x / P) + c sin(2 pi x / P)` with a fixed
//!   period `P`.
//!
//! Fits report coefficients with their standard errors, the chi-squared
//! against the data, and — for the sinusoid — the swing of the fitted curve,
//! which is what a visibility argument actually consumes. `sigma_distance`
//! expresses a point discrepancy in units of its quoted uncertainty.

use serde::Serialize;
use thiserror::Error;

use crate::qstate::eigen::jacobi_real_symmetric;

/// Design matrices whose eigenvalue ratio falls below this are reported as
/// singular instead of inverted.
const SINGULAR_RATIO: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("{model} fit needs at least {needed} points, got {got}")]
    TooFewPoints {
        model: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("point {index} is unusable: {reason}")]
    InvalidPoint { index: usize, reason: String },
    #[error("period = {0} must be positive and finite")]
    BadPeriod(f64),
    #[error("design matrix is singular: the sample points cannot separate the model terms")]
    SingularDesign,
    #[error("sigma = {0} must be positive to measure a distance in sigma units")]
    NonPositiveSigma(f64),
}

/// One weighted sample.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

/// Outcome of a weighted fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    /// Fitted coefficients: `[a]` for the constant, `[a, b, c]` for the
    /// sinusoid.
    pub coefficients: Vec<f64>,
    /// Standard errors of the coefficients, same order.
    pub sigmas: Vec<f64>,
    pub chi_squared: f64,
    pub degrees_of_freedom: usize,
    pub reduced_chi_squared: f64,
    /// Swing of the fitted sinusoid, sqrt(b^2 + c^2); None for the constant.
    pub amplitude: Option<f64>,
    /// [lowest, highest] value the fitted sinusoid reaches over a period.
    pub amplitude_range: Option<[f64; 2]>,
}

fn validate_points(points: &[DataPoint]) -> Result<(), FitError> {
    for (index, p) in points.iter().enumerate() {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(FitError::InvalidPoint {
                index,
                reason: format!("x = {}, y = {}", p.x, p.y),
            });
        }
        if !(p.sigma.is_finite() && p.sigma > 0.0) {
            return Err(FitError::InvalidPoint {
                index,
                reason: format!("sigma = {} must be positive", p.sigma),
            });
        }
    }
    Ok(())
}

fn chi_squared(points: &[DataPoint], predict: impl Fn(f64) -> f64) -> f64 {
    points
        .iter()
        .map(|p| {
            let r = (p.y - predict(p.x)) / p.sigma;
            r * r
        })
        .sum()
}

/// Weighted mean of the samples — the best-fit constant — with its standard
/// error and the chi-squared of the flat model.
pub fn fit_constant(points: &[DataPoint]) -> Result<FitResult, FitError> {
    if points.len() < 2 {
        return Err(FitError::TooFewPoints {
            model: "constant",
            needed: 2,
            got: points.len(),
        });
    }
    validate_points(points)?;
    let mut weight_sum = 0.0;
    let mut weighted_y = 0.0;
    for p in points {
        let w = 1.0 / (p.sigma * p.sigma);
        weight_sum += w;
        weighted_y += w * p.y;
    }
    let a = weighted_y / weight_sum;
    let chi = chi_squared(points, |_| a);
    let dof = points.len() - 1;
    Ok(FitResult {
        coefficients: vec![a],
        sigmas: vec![(1.0 / weight_sum).sqrt()],
        chi_squared: chi,
        degrees_of_freedom: dof,
        reduced_chi_squared: chi / dof as f64,
        amplitude: None,
        amplitude_range: None,
    })
}

/// Solves the symmetric system A x = rhs by eigendecomposition, returning
/// the solution and the inverse of A. Errs when the eigenvalue ratio says
/// the basis functions are indistinguishable on these sample points.
fn solve_symmetric(
    n: usize,
    a: &mut [f64],
    rhs: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), FitError> {
    let (values, vectors) = jacobi_real_symmetric(n, a);
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 || values.iter().any(|v| v.abs() <= SINGULAR_RATIO * max) {
        return Err(FitError::SingularDesign);
    }
    // x = V diag(1/lambda) V^T rhs, inverse = V diag(1/lambda) V^T.
    let mut x = vec![0.0; n];
    let mut inverse = vec![0.0; n * n];
    for k in 0..n {
        let mut proj = 0.0;
        for i in 0..n {
            proj += vectors[i * n + k] * rhs[i];
        }
        let scale = proj / values[k];
        for i in 0..n {
            x[i] += vectors[i * n + k] * scale;
            for j in 0..n {
                inverse[i * n + j] += vectors[i * n + k] * vectors[j * n + k] / values[k];
            }
        }
    }
    Ok((x, inverse))
}

/// Weighted fit of `y = a + b cos(2 pi x / period) + c sin(2 pi x / period)`.
pub fn fit_sinusoid(points: &[DataPoint], period: f64) -> Result<FitResult, FitError> {
    if !(period.is_finite() && period > 0.0) {
        return Err(FitError::BadPeriod(period));
    }
    if points.len() < 4 {
        return Err(FitError::TooFewPoints {
            model: "sinusoid",
            needed: 4,
            got: points.len(),
        });
    }
    validate_points(points)?;
    let omega = 2.0 * std::f64::consts::PI / period;
    let basis = |x: f64| [1.0, (omega * x).cos(), (omega * x).sin()];
    let mut a = [0.0; 9];
    let mut rhs = [0.0; 3];
    for p in points {
        let w = 1.0 / (p.sigma * p.sigma);
        let row = basis(p.x);
        for i in 0..3 {
            rhs[i] += w * row[i] * p.y;
            for j in 0..3 {
                a[i * 3 + j] += w * row[i] * row[j];
            }
        }
    }
    let (coef, inverse) = solve_symmetric(3, &mut a, &rhs)?;
    let chi = chi_squared(points, |x| {
        let row = basis(x);
        coef[0] * row[0] + coef[1] * row[1] + coef[2] * row[2]
    });
    let dof = points.len() - 3;
    let amplitude = (coef[1] * coef[1] + coef[2] * coef[2]).sqrt();
    Ok(FitResult {
        sigmas: (0..3).map(|i| inverse[i * 3 + i].sqrt()).collect(),
        chi_squared: chi,
        degrees_of_freedom: dof,
        reduced_chi_squared: chi / dof as f64,
        amplitude: Some(amplitude),
        amplitude_range: Some([coef[0] - amplitude, coef[0] + amplitude]),
        coefficients: coef,
    })
}

/// How many quoted standard deviations separate `value` from `reference`.
pub fn sigma_distance(value: f64, sigma: f64, reference: f64) -> Result<f64, FitError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(FitError::NonPositiveSigma(sigma));
    }
    Ok((reference - value).abs() / sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(x: f64, y: f64, sigma: f64) -> DataPoint {
        DataPoint { x, y, sigma }
    }

    #[test]
    fn constant_fit_hand_value() {
        // Weights 1 and 4: a = (1 + 12)/5, sigma_a = 1/sqrt(5),
        // chi2 = (1 - 2.6)^2 + ((3 - 2.6)/0.5)^2.
        let points = [pt(0.0, 1.0, 1.0), pt(1.0, 3.0, 0.5)];
        let fit = fit_constant(&points).unwrap();
        assert_relative_eq!(fit.coefficients[0], 2.6, epsilon = 1e-14);
        assert_relative_eq!(fit.sigmas[0], 0.4472135954999579, epsilon = 1e-14);
        assert_relative_eq!(fit.chi_squared, 3.2, epsilon = 1e-12);
        assert_eq!(fit.degrees_of_freedom, 1);
        assert!(fit.amplitude.is_none());
    }

    #[test]
    fn constant_fit_needs_two_points() {
        assert!(matches!(
            fit_constant(&[pt(0.0, 1.0, 1.0)]),
            Err(FitError::TooFewPoints { needed: 2, got: 1, .. })
        ));
    }

    #[test]
    fn sinusoid_fit_recovers_exact_curve() {
        let period = 8.0;
        let truth = |x: f64| {
            let w = 2.0 * std::f64::consts::PI / period;
            2.0 + 0.5 * (w * x).cos() - 0.25 * (w * x).sin()
        };
        let points: Vec<DataPoint> = (0..9).map(|i| pt(i as f64, truth(i as f64), 0.1)).collect();
        let fit = fit_sinusoid(&points, period).unwrap();
        assert_relative_eq!(fit.coefficients[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(fit.coefficients[1], 0.5, epsilon = 1e-10);
        assert_relative_eq!(fit.coefficients[2], -0.25, epsilon = 1e-10);
        assert!(fit.chi_squared < 1e-18);
        assert_eq!(fit.degrees_of_freedom, 6);
        assert_relative_eq!(
            fit.amplitude.unwrap(),
            0.5590169943749475,
            epsilon = 1e-12
        );
        let range = fit.amplitude_range.unwrap();
        assert_relative_eq!(range[0], 1.4409830056250525, epsilon = 1e-10);
        assert_relative_eq!(range[1], 2.5590169943749475, epsilon = 1e-10);
    }

    #[test]
    fn sinusoid_sigma_matches_constant_when_data_is_flat() {
        // On flat data the sinusoid's offset coefficient and its error must
        // agree with the plain weighted mean (the extra terms fit zero).
        let points: Vec<DataPoint> = (0..8).map(|i| pt(i as f64, 1.5, 0.2)).collect();
        let flat = fit_constant(&points).unwrap();
        let wave = fit_sinusoid(&points, 5.0).unwrap();
        assert_relative_eq!(wave.coefficients[0], flat.coefficients[0], epsilon = 1e-10);
        assert!(wave.amplitude.unwrap() < 1e-10);
    }

    #[test]
    fn aliased_sample_points_are_reported_singular() {
        // Sampling only at whole periods makes cos == 1 and sin == 0
        // everywhere: the three basis functions collapse to one.
        let points: Vec<DataPoint> = (0..5).map(|i| pt(8.0 * i as f64, 1.0, 0.1)).collect();
        assert!(matches!(
            fit_sinusoid(&points, 8.0),
            Err(FitError::SingularDesign)
        ));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let good = [pt(0.0, 1.0, 0.1), pt(1.0, 1.0, 0.1)];
        assert!(matches!(
            fit_constant(&[pt(0.0, 1.0, 0.0), good[1]]),
            Err(FitError::InvalidPoint { index: 0, .. })
        ));
        assert!(matches!(
            fit_constant(&[pt(f64::NAN, 1.0, 0.1), good[1]]),
            Err(FitError::InvalidPoint { index: 0, .. })
        ));
        let four = [good[0], good[1], pt(2.0, 1.0, 0.1), pt(3.0, 1.0, 0.1)];
        assert!(matches!(
            fit_sinusoid(&four, 0.0),
            Err(FitError::BadPeriod(_))
        ));
    }

    #[test]
    fn sigma_distance_hand_value() {
        assert_relative_eq!(
            sigma_distance(0.222, 0.028, 0.5).unwrap(),
            9.928571428571429,
            epsilon = 1e-14
        );
        assert_eq!(sigma_distance(0.3, 1.0, 0.3).unwrap(), 0.0);
        assert!(matches!(
            sigma_distance(0.222, 0.0, 0.5),
            Err(FitError::NonPositiveSigma(_))
        ));
    }
}
