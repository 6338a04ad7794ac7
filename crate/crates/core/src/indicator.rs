//! Test-ball indicator `I(z, h)`: far-field data against the translated basis,
//! weighted by the inverse ball eigenvalues, summed order by order.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fitting::ls_slope;
use crate::harmonics::{analyze, TangentialCoeffs, TangentialField};
use crate::mie::{BallSpectrum, TestBall};
use crate::specfun::N_MAX_ORDER;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Bounded,
    Divergent,
    Undetermined,
}

/// Truncation and decision rule for the indicator series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub n_max: usize,
    /// Absolute noise level `δ` of the data coefficients.
    pub noise_floor: f64,
    /// Log-growth per order above which a series is called divergent.
    pub tau: f64,
    pub window: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { n_max: 30, noise_floor: 0.0, tau: 0.1, window: 8 }
    }
}

/// Relative noise level assigned to noise-free data. Squared, it sits well
/// above the square of double-precision coefficient roundoff, so no order
/// whose eigenvalue is swamped by roundoff enters the sum.
pub const EXACT_DATA_REL_NOISE: f64 = 1e-8;

impl TruncationPolicy {
    /// The default policy with noise floor `rel_noise · ‖w‖` (`EXACT_DATA_REL_NOISE`
    /// is used when `rel_noise` is smaller).
    pub fn for_data(w: &TangentialField, rel_noise: f64) -> Self {
        Self { noise_floor: rel_noise.max(EXACT_DATA_REL_NOISE) * w.l2_norm(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max > N_MAX_ORDER {
            return Err(Error::OrderCapExceeded { n: self.n_max, cap: N_MAX_ORDER });
        }
        if self.window < 2 || self.window >= self.n_max {
            return Err(Error::Domain(format!("window {} must lie in [2, n_max)", self.window)));
        }
        if !(self.noise_floor >= 0.0) || !(self.tau > 0.0) {
            return Err(Error::Domain("noise floor must be non-negative and tau positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicatorCurve {
    #[serde(skip)]
    pub ball: TestBall,
    /// `partials[N - 1] = I_N`.
    pub partials: Vec<f64>,
    /// Expected contribution of data noise to the last term.
    pub noise_increment: f64,
    pub classification: Classification,
    pub slope: f64,
}

impl IndicatorCurve {
    pub fn order(&self) -> usize {
        self.partials.len()
    }

    pub fn value(&self) -> f64 {
        self.partials.last().copied().unwrap_or(0.0)
    }
}

/// Largest `N ≤ spectrum.order` with `min(|u_n|, |v_n|) > δ²` for every `n ≤ N`.
pub fn select_truncation(k: f64, h: f64, noise_delta: f64, spectrum: &BallSpectrum) -> usize {
    debug_assert!((spectrum.k - k).abs() <= 1e-12 * k && (spectrum.h - h).abs() <= 1e-12 * h);
    let floor = noise_delta * noise_delta;
    (1..=spectrum.order)
        .take_while(|&n| spectrum.u(n).norm().min(spectrum.v(n).norm()) > floor)
        .last()
        .unwrap_or(0)
}

/// Partial sums `I_N = (1/4π) Σ_{n≤N} Σ_m (|⟨w, Ũ⟩|²/|u_n| + |⟨w, Ṽ⟩|²/|v_n|)`
/// for `N = 1..=min(policy.n_max, select_truncation)`, and their classification.
pub fn indicator_partials(
    w_inf: &TangentialField,
    ball: &TestBall,
    spectrum: &BallSpectrum,
    policy: &TruncationPolicy,
) -> Result<IndicatorCurve> {
    policy.validate()?;
    if (spectrum.h - ball.h).abs() > 1e-12 * ball.h {
        return Err(Error::Domain(format!("spectrum radius {} differs from ball radius {}", spectrum.h, ball.h)));
    }
    let k = spectrum.k;
    let order = policy.n_max.min(select_truncation(k, ball.h, policy.noise_floor, spectrum));
    if order == 0 {
        return Ok(IndicatorCurve {
            ball: *ball,
            partials: Vec::new(),
            noise_increment: 0.0,
            classification: Classification::Undetermined,
            slope: f64::NAN,
        });
    }
    let coeffs = analyze(w_inf, &ball.z, k, order)?;
    indicator_from_coeffs(&coeffs, ball, spectrum, policy)
}

/// As [`indicator_partials`], reusing coefficients already analysed about
/// `ball.z` (to any order at least the truncation).
pub fn indicator_from_coeffs(
    coeffs: &TangentialCoeffs,
    ball: &TestBall,
    spectrum: &BallSpectrum,
    policy: &TruncationPolicy,
) -> Result<IndicatorCurve> {
    if (coeffs.center - ball.z).norm() > 1e-12 * (1.0 + ball.z.norm()) {
        return Err(Error::Domain("coefficients analysed about a different centre".into()));
    }
    let order = policy.n_max.min(select_truncation(spectrum.k, ball.h, policy.noise_floor, spectrum)).min(coeffs.order);
    if order == 0 {
        return Ok(IndicatorCurve {
            ball: *ball,
            partials: Vec::new(),
            noise_increment: 0.0,
            classification: Classification::Undetermined,
            slope: f64::NAN,
        });
    }
    let mut partials = Vec::with_capacity(order);
    let mut acc = 0.0;
    for n in 1..=order {
        let (au, av) = (spectrum.u(n).norm(), spectrum.v(n).norm());
        let mut term = 0.0;
        for m in -(n as i64)..=n as i64 {
            term += coeffs.u(n, m).norm_sqr() / au + coeffs.v(n, m).norm_sqr() / av;
        }
        acc += term / (4.0 * PI);
        partials.push(acc);
    }
    let (au, av) = (spectrum.u(order).norm(), spectrum.v(order).norm());
    let delta2 = policy.noise_floor * policy.noise_floor;
    let noise_increment = (2 * order + 1) as f64 / (4.0 * PI) * delta2 * (1.0 / au + 1.0 / av);
    let (classification, slope) = classify_partials(&partials, noise_increment, policy);
    Ok(IndicatorCurve { ball: *ball, partials, noise_increment, classification, slope })
}

/// Re-applies the decision rule to an existing curve.
pub fn classify(curve: &IndicatorCurve, policy: &TruncationPolicy) -> Classification {
    classify_partials(&curve.partials, curve.noise_increment, policy).0
}

/// Least-squares slope of `ln I_N` against `N` over the trailing window.
/// Divergent above `τ`; Bounded below `τ/4` when the last increment is
/// within `τ/4` of the sum plus twice the expected noise contribution.
/// Short series shrink the window to half their length (at least two points).
pub fn classify_partials(partials: &[f64], noise_increment: f64, policy: &TruncationPolicy) -> (Classification, f64) {
    let n = partials.len();
    let last = match partials.last() {
        Some(&v) => v,
        None => return (Classification::Undetermined, f64::NAN),
    };
    if last <= 0.0 {
        return (Classification::Bounded, 0.0);
    }
    let window = policy.window.min(n / 2).max(2);
    if n < window {
        return (Classification::Undetermined, f64::NAN);
    }
    let pts: Vec<(f64, f64)> = (n - window..n)
        .filter(|&i| partials[i] > 0.0)
        .map(|i| ((i + 1) as f64, partials[i].ln()))
        .collect();
    if pts.len() < 2 {
        return (Classification::Undetermined, f64::NAN);
    }
    let slope = ls_slope(&pts);
    let increment = if n >= 2 { last - partials[n - 2] } else { last };
    let class = if slope > policy.tau {
        Classification::Divergent
    } else if slope < policy.tau / 4.0 && increment <= policy.tau / 4.0 * last + 2.0 * noise_increment {
        Classification::Bounded
    } else {
        Classification::Undetermined
    };
    (class, slope)
}
