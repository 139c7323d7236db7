//! Damped Chebyshev series on `[-1, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

const DOMAIN_SLACK: f64 = 1e-12;

/// `Σ c_k T_k(t)`, scaled by `amp_scale` into world units.
///
/// Coefficients are dimensionless; `amp_scale` converts them to voxels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevSeries {
    pub coeffs: Vec<f64>,
    pub alpha: f64,
    pub amp_scale: f64,
}

/// Reject parameters outside `[-1, 1]` and snap round-off back inside.
pub(crate) fn check_domain(t: f64) -> Result<f64> {
    if !t.is_finite() || t.abs() > 1.0 + DOMAIN_SLACK {
        return Err(Error::Domain(format!(
            "parameter t = {t} lies outside [-1, 1]"
        )));
    }
    Ok(t.clamp(-1.0, 1.0))
}

/// `T_k(t)` by the three-term recurrence.
pub fn chebyshev_t(k: usize, t: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, t);
    match k {
        0 => prev,
        _ => {
            for _ in 1..k {
                let next = 2.0 * t * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `(k + 1)^-alpha`, the amplitude envelope of coefficient `k`.
pub fn damping(k: usize, alpha: f64) -> f64 {
    ((k + 1) as f64).powf(-alpha)
}

impl ChebyshevSeries {
    pub fn new(coeffs: Vec<f64>, alpha: f64, amp_scale: f64) -> Self {
        assert!(!coeffs.is_empty(), "a Chebyshev series needs at least c_0");
        Self {
            coeffs,
            alpha,
            amp_scale,
        }
    }

    /// Series with every coefficient zero (a straight centerline offset).
    pub fn zero(degree: usize) -> Self {
        Self::new(vec![0.0; degree + 1], 0.0, 1.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Draw `c_k = u_k (k+1)^-alpha` with `u_k ~ U(-1, 1)`.
    pub fn sample_damped(degree: usize, alpha: f64, amp_scale: f64, stream: &mut Stream) -> Self {
        let coeffs = (0..=degree)
            .map(|k| stream.uniform(-1.0, 1.0) * damping(k, alpha))
            .collect();
        Self::new(coeffs, alpha, amp_scale)
    }

    /// Clenshaw summation of the series at `t`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let t = check_domain(t)?;
        Ok(self.amp_scale * clenshaw(&self.coeffs, t))
    }

    /// Derivative with respect to `t`, via `T'_k = k U_{k-1}`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        let t = check_domain(t)?;
        let mut acc = 0.0;
        let (mut u_prev, mut u_cur) = (0.0, 1.0); // U_{-1}, U_0
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            acc += c * k as f64 * u_cur;
            let next = 2.0 * t * u_cur - u_prev;
            u_prev = u_cur;
            u_cur = next;
        }
        Ok(self.amp_scale * acc)
    }

    /// True if every coefficient sits inside its damping envelope.
    pub fn within_envelope(&self) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(k, c)| c.abs() <= damping(k, self.alpha))
    }
}

fn clenshaw(coeffs: &[f64], t: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + t * b1 - b2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(coeffs: &[f64], amp: f64) -> ChebyshevSeries {
        ChebyshevSeries::new(coeffs.to_vec(), 0.0, amp)
    }

    #[test]
    fn constant_term() {
        let s = series(&[1.0], 2.5);
        for t in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_eq!(s.eval(t).unwrap(), 2.5);
        }
    }

    #[test]
    fn first_and_second_order() {
        assert_eq!(series(&[0.0, 1.0], 1.0).eval(0.5).unwrap(), 0.5);
        let v = series(&[0.0, 0.0, 1.0], 1.0).eval(0.3).unwrap();
        assert!((v - (-0.82)).abs() < 1e-15);
        assert!((v - (2.0 * 0.3f64.acos()).cos()).abs() < 1e-14);
    }

    #[test]
    fn rejects_outside_domain() {
        let s = series(&[1.0, 2.0], 1.0);
        assert!(matches!(s.eval(1.0 + 1e-9), Err(Error::Domain(_))));
        assert!(s.eval(1.0 + 1e-13).is_ok());
        assert!(s.eval(f64::NAN).is_err());
        assert!(s.derivative(-1.1).is_err());
    }

    #[test]
    fn clenshaw_matches_explicit_sum() {
        let coeffs = [0.3, -0.7, 0.25, 0.1, -0.05, 0.02];
        let s = series(&coeffs, 1.7);
        for i in 0..=40 {
            let t = -1.0 + i as f64 * 0.05;
            let direct: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * chebyshev_t(k, t))
                .sum();
            assert!((s.eval(t).unwrap() - 1.7 * direct).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let s = series(&[0.1, 0.4, -0.3, 0.2, 0.15, -0.1], 2.0);
        let h = 1e-6;
        for i in 1..20 {
            let t = -0.95 + i as f64 * 0.095;
            let fd = (s.eval(t + h).unwrap() - s.eval(t - h).unwrap()) / (2.0 * h);
            assert!((s.derivative(t).unwrap() - fd).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn sampled_coefficients_respect_envelope() {
        for seed in 0..200 {
            let mut st = Stream::keyed(seed, "cheb", 0);
            let s = ChebyshevSeries::sample_damped(8, 1.5, 4.0, &mut st);
            assert_eq!(s.coeffs.len(), 9);
            assert!(s.within_envelope());
        }
    }

    #[test]
    fn zero_degree_has_single_coefficient() {
        let mut st = Stream::keyed(5, "cheb", 0);
        let s = ChebyshevSeries::sample_damped(0, 2.0, 1.0, &mut st);
        assert_eq!(s.degree(), 0);
        assert!(s.coeffs[0].abs() < 1.0);
    }
}
