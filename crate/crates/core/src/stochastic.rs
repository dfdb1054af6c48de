//! Distribution laws used by the traffic, mobility and rate models.
//!
//! A [`DistributionSpec`] is plain data (it round-trips through the config
//! file as `kind` plus named parameters). Turning it into a [`Distribution`]
//! validates the parameters once; sampling, survival functions, means and
//! capped expectations are then infallible apart from undefined means.
//!
//! Every law here has a closed-form survival function and capped expectation
//! `E[min(X, c)]`, so no numerical quadrature is needed at run time.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::{Error, Result};

/// Minimum probability mass a truncation window must keep for rejection
/// sampling to terminate in reasonable time.
const MIN_TRUNCATED_MASS: f64 = 1e-9;

/// Seed-deterministic random stream.
///
/// Backed by ChaCha8 with 2^64 independent streams per seed, so every user
/// (or every run) can own a stream derived from `(seed, stream_id)` without
/// sharing state.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on the open interval `(0, 1)`; safe for logarithms and inverse
    /// transforms at either end.
    pub fn open_uniform(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

/// Description of a statistical law, as written in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Exponential {
        mean: f64,
    },
    /// Lognormal with parameters of the underlying normal, conditioned on
    /// `[min, max]`.
    TruncatedLognormal {
        mu: f64,
        sigma: f64,
        min: f64,
        max: f64,
    },
    /// Pareto with minimum `scale`, conditioned on `x <= max`. `max` may be
    /// infinite.
    TruncatedPareto {
        scale: f64,
        shape: f64,
        max: f64,
    },
    /// Generalized Pareto with shape `k`, scale `s` and location `m`; the
    /// support is bounded above by `m - s/k` when `k < 0`.
    GeneralizedPareto {
        shape: f64,
        scale: f64,
        location: f64,
    },
    /// Repetition count `N >= 1` with continuation probability `p`:
    /// `P(N = n) = (1 - p) p^(n-1)`.
    Geometric {
        p: f64,
    },
    Uniform {
        min: f64,
        max: f64,
    },
    Constant {
        value: f64,
    },
    /// Zero with probability `p_zero`, otherwise exponential with `mean`.
    DeferredExponential {
        mean: f64,
        p_zero: f64,
    },
}

impl DistributionSpec {
    /// Truncated Pareto on `[scale, max]` whose scale is solved so the
    /// conditional mean equals `mean`.
    pub fn truncated_pareto_with_mean(mean: f64, shape: f64, max: f64) -> Result<Self> {
        if !(shape > 0.0) || !(max > 0.0) || !(mean > 0.0 && mean < max) {
            return Err(Error::param(
                "",
                format!("cannot fit truncated Pareto: need 0 < mean < max and shape > 0 (mean={mean}, shape={shape}, max={max})"),
            ));
        }
        let mean_at = |scale: f64| truncated_pareto_mean(scale, shape, max);
        let (mut lo, mut hi) = (0.0_f64, max);
        // The conditional mean is increasing in the scale, from 0 to max.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_at(mid) < mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(DistributionSpec::TruncatedPareto {
            scale: 0.5 * (lo + hi),
            shape,
            max,
        })
    }

    pub fn validate(&self) -> Result<()> {
        Distribution::new(*self).map(|_| ())
    }
}

/// A validated law with any normalisation constants precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distribution {
    spec: DistributionSpec,
    law: Law,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Law {
    Exponential {
        mean: f64,
    },
    TruncatedLognormal {
        mu: f64,
        sigma: f64,
        min: f64,
        max: f64,
        // Standard-normal survival at the truncation points and their difference.
        upper_tail_at_min: f64,
        upper_tail_at_max: f64,
        mass: f64,
    },
    TruncatedPareto {
        scale: f64,
        shape: f64,
        max: f64,
        // (scale / max)^shape, zero when untruncated.
        ratio: f64,
    },
    GeneralizedPareto {
        shape: f64,
        scale: f64,
        location: f64,
    },
    Geometric {
        p: f64,
    },
    Uniform {
        min: f64,
        max: f64,
    },
    Constant {
        value: f64,
    },
    DeferredExponential {
        mean: f64,
        p_zero: f64,
    },
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be finite and > 0, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be finite, got {v}")))
    }
}

fn probability(field: &str, v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::param(field, format!("must lie in [0, 1), got {v}")))
    }
}

fn ordered(min: f64, max: f64) -> Result<()> {
    if min < max {
        Ok(())
    } else {
        Err(Error::param("max", format!("must exceed min ({min} >= {max})")))
    }
}

/// Standard normal survival function, accurate far into both tails.
fn normal_upper_tail(z: f64) -> f64 {
    if z == f64::INFINITY {
        0.0
    } else if z == f64::NEG_INFINITY {
        1.0
    } else {
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    }
}

fn truncated_pareto_mean(scale: f64, shape: f64, max: f64) -> f64 {
    let ratio = if max.is_finite() { (scale / max).powf(shape) } else { 0.0 };
    if max.is_infinite() {
        return if shape > 1.0 {
            shape * scale / (shape - 1.0)
        } else {
            f64::INFINITY
        };
    }
    let norm = 1.0 - ratio;
    if (shape - 1.0).abs() < 1e-12 {
        scale * (max / scale).ln() / norm
    } else {
        shape * scale.powf(shape) / norm * (scale.powf(1.0 - shape) - max.powf(1.0 - shape))
            / (shape - 1.0)
    }
}

impl Distribution {
    pub fn new(spec: DistributionSpec) -> Result<Self> {
        let law = match spec {
            DistributionSpec::Exponential { mean } => {
                positive("mean", mean)?;
                Law::Exponential { mean }
            }
            DistributionSpec::TruncatedLognormal {
                mu,
                sigma,
                min,
                max,
            } => {
                finite("mu", mu)?;
                positive("sigma", sigma)?;
                if !(min >= 0.0) {
                    return Err(Error::param("min", format!("must be >= 0, got {min}")));
                }
                if max.is_nan() {
                    return Err(Error::param("max", "must not be NaN"));
                }
                ordered(min, max)?;
                let z = |x: f64| {
                    if x <= 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        (x.ln() - mu) / sigma
                    }
                };
                let upper_tail_at_min = normal_upper_tail(z(min));
                let upper_tail_at_max = normal_upper_tail(z(max));
                let mass = upper_tail_at_min - upper_tail_at_max;
                if !(mass >= MIN_TRUNCATED_MASS) {
                    return Err(Error::param(
                        "min",
                        format!("truncation window [{min}, {max}] keeps only {mass:e} of the probability mass"),
                    ));
                }
                Law::TruncatedLognormal {
                    mu,
                    sigma,
                    min,
                    max,
                    upper_tail_at_min,
                    upper_tail_at_max,
                    mass,
                }
            }
            DistributionSpec::TruncatedPareto { scale, shape, max } => {
                positive("scale", scale)?;
                positive("shape", shape)?;
                if max.is_nan() {
                    return Err(Error::param("max", "must not be NaN"));
                }
                ordered(scale, max)?;
                let ratio = if max.is_finite() { (scale / max).powf(shape) } else { 0.0 };
                Law::TruncatedPareto {
                    scale,
                    shape,
                    max,
                    ratio,
                }
            }
            DistributionSpec::GeneralizedPareto {
                shape,
                scale,
                location,
            } => {
                finite("shape", shape)?;
                positive("scale", scale)?;
                finite("location", location)?;
                Law::GeneralizedPareto {
                    shape,
                    scale,
                    location,
                }
            }
            DistributionSpec::Geometric { p } => {
                probability("p", p)?;
                Law::Geometric { p }
            }
            DistributionSpec::Uniform { min, max } => {
                finite("min", min)?;
                finite("max", max)?;
                ordered(min, max)?;
                Law::Uniform { min, max }
            }
            DistributionSpec::Constant { value } => {
                finite("value", value)?;
                Law::Constant { value }
            }
            DistributionSpec::DeferredExponential { mean, p_zero } => {
                positive("mean", mean)?;
                probability("p_zero", p_zero)?;
                Law::DeferredExponential { mean, p_zero }
            }
        };
        Ok(Self { spec, law })
    }

    pub fn spec(&self) -> DistributionSpec {
        self.spec
    }

    /// Closed support interval `(lower, upper)`; `upper` may be infinite.
    pub fn support(&self) -> (f64, f64) {
        match self.law {
            Law::Exponential { .. } | Law::DeferredExponential { .. } => (0.0, f64::INFINITY),
            Law::TruncatedLognormal { min, max, .. } => (min, max),
            Law::TruncatedPareto { scale, max, .. } => (scale, max),
            Law::GeneralizedPareto {
                shape,
                scale,
                location,
            } => {
                if shape < 0.0 {
                    (location, location - scale / shape)
                } else {
                    (location, f64::INFINITY)
                }
            }
            Law::Geometric { p } => (1.0, if p == 0.0 { 1.0 } else { f64::INFINITY }),
            Law::Uniform { min, max } => (min, max),
            Law::Constant { value } => (value, value),
        }
    }

    /// Draw one variate. Always inside [`support`](Self::support).
    pub fn sample(&self, stream: &mut RandomStream) -> f64 {
        match self.law {
            Law::Exponential { mean } => -mean * stream.open_uniform().ln(),
            Law::TruncatedLognormal {
                mu,
                sigma,
                min,
                max,
                ..
            } => loop {
                // Resample outside the window; clamping would put atoms on the bounds.
                let x = (mu + sigma * stream.standard_normal()).exp();
                if (min..=max).contains(&x) {
                    break x;
                }
            },
            Law::TruncatedPareto {
                scale,
                shape,
                max,
                ratio,
            } => {
                let v = stream.open_uniform();
                let x = scale * (ratio + v * (1.0 - ratio)).powf(-1.0 / shape);
                x.clamp(scale, max)
            }
            Law::GeneralizedPareto {
                shape,
                scale,
                location,
            } => {
                let v = stream.open_uniform();
                let x = if shape == 0.0 {
                    location - scale * v.ln()
                } else {
                    location + scale / shape * (v.powf(-shape) - 1.0)
                };
                let (lo, hi) = self.support();
                x.clamp(lo, hi)
            }
            Law::Geometric { p } => {
                if p == 0.0 {
                    1.0
                } else {
                    1.0 + (stream.open_uniform().ln() / p.ln()).floor()
                }
            }
            Law::Uniform { min, max } => (min + (max - min) * stream.uniform()).min(max),
            Law::Constant { value } => value,
            Law::DeferredExponential { mean, p_zero } => {
                let u = stream.uniform();
                if u < p_zero {
                    0.0
                } else {
                    -mean * stream.open_uniform().ln()
                }
            }
        }
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self.law {
            Law::Exponential { mean } => {
                if x < 0.0 {
                    1.0
                } else {
                    (-x / mean).exp()
                }
            }
            Law::TruncatedLognormal {
                mu,
                sigma,
                min,
                max,
                upper_tail_at_max,
                mass,
                ..
            } => {
                if x < min {
                    1.0
                } else if x >= max {
                    0.0
                } else {
                    let z = (x.ln() - mu) / sigma;
                    ((normal_upper_tail(z) - upper_tail_at_max) / mass).clamp(0.0, 1.0)
                }
            }
            Law::TruncatedPareto {
                scale,
                shape,
                max,
                ratio,
            } => {
                if x < scale {
                    1.0
                } else if x >= max {
                    0.0
                } else {
                    (((scale / x).powf(shape) - ratio) / (1.0 - ratio)).clamp(0.0, 1.0)
                }
            }
            Law::GeneralizedPareto {
                shape,
                scale,
                location,
            } => {
                if x < location {
                    return 1.0;
                }
                let y = (x - location) / scale;
                if shape == 0.0 {
                    (-y).exp()
                } else {
                    let base = 1.0 + shape * y;
                    if base <= 0.0 {
                        0.0
                    } else {
                        base.powf(-1.0 / shape)
                    }
                }
            }
            Law::Geometric { p } => {
                if x < 1.0 {
                    1.0
                } else {
                    p.powf(x.floor())
                }
            }
            Law::Uniform { min, max } => {
                if x < min {
                    1.0
                } else if x >= max {
                    0.0
                } else {
                    (max - x) / (max - min)
                }
            }
            Law::Constant { value } => {
                if x < value {
                    1.0
                } else {
                    0.0
                }
            }
            Law::DeferredExponential { mean, p_zero } => {
                if x < 0.0 {
                    1.0
                } else {
                    (1.0 - p_zero) * (-x / mean).exp()
                }
            }
        }
    }

    /// Expected value. Fails when the mean is infinite or undefined.
    pub fn mean(&self) -> Result<f64> {
        let m = match self.law {
            Law::Exponential { mean } => mean,
            Law::TruncatedLognormal {
                mu,
                sigma,
                min,
                max,
                mass,
                ..
            } => lognormal_partial_mean(mu, sigma, min, max) / mass,
            Law::TruncatedPareto { scale, shape, max, .. } => {
                truncated_pareto_mean(scale, shape, max)
            }
            Law::GeneralizedPareto {
                shape,
                scale,
                location,
            } => {
                if shape < 1.0 {
                    location + scale / (1.0 - shape)
                } else {
                    f64::INFINITY
                }
            }
            Law::Geometric { p } => 1.0 / (1.0 - p),
            Law::Uniform { min, max } => 0.5 * (min + max),
            Law::Constant { value } => value,
            Law::DeferredExponential { mean, p_zero } => (1.0 - p_zero) * mean,
        };
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::param(
                "",
                format!("{:?} has no finite mean", self.spec),
            ))
        }
    }

    /// `E[min(X, cap)]`: the mean of the variate upper-truncated at `cap`.
    pub fn truncated_expectation(&self, cap: f64) -> Result<f64> {
        if !(cap >= 0.0) {
            return Err(Error::param("cap", format!("must be >= 0, got {cap}")));
        }
        let (lo, hi) = self.support();
        if cap <= lo {
            return Ok(cap);
        }
        if cap >= hi {
            return self.mean();
        }
        let value = match self.law {
            Law::Exponential { mean } => mean * (-(-cap / mean).exp_m1()),
            Law::DeferredExponential { mean, p_zero } => {
                (1.0 - p_zero) * mean * (-(-cap / mean).exp_m1())
            }
            Law::TruncatedLognormal {
                mu,
                sigma,
                min,
                mass,
                ..
            } => lognormal_partial_mean(mu, sigma, min, cap) / mass + cap * self.survival(cap),
            Law::TruncatedPareto {
                scale,
                shape,
                ratio,
                ..
            } => {
                // scale + integral of the survival function over [scale, cap].
                let power_integral = if (shape - 1.0).abs() < 1e-12 {
                    scale * (cap / scale).ln()
                } else {
                    scale.powf(shape) * (cap.powf(1.0 - shape) - scale.powf(1.0 - shape))
                        / (1.0 - shape)
                };
                scale + (power_integral - ratio * (cap - scale)) / (1.0 - ratio)
            }
            Law::GeneralizedPareto {
                shape,
                scale,
                location,
            } => {
                let y = (cap - location) / scale;
                let integral = if shape == 0.0 {
                    scale * (-(-y).exp_m1())
                } else if (shape - 1.0).abs() < 1e-12 {
                    scale * (1.0 + y).ln()
                } else {
                    let base = 1.0 + shape * y;
                    scale / (1.0 - shape) * (1.0 - base.powf((shape - 1.0) / shape))
                };
                location + integral
            }
            Law::Geometric { p } => {
                let whole = cap.floor();
                let tail = p.powf(whole);
                (1.0 - tail) / (1.0 - p) + (cap - whole) * tail
            }
            Law::Uniform { min, max } => {
                (0.5 * (cap * cap - min * min) + cap * (max - cap)) / (max - min)
            }
            Law::Constant { value } => value.min(cap),
        };
        Ok(value)
    }
}

/// `E[X; a <= X <= b]` for an untruncated lognormal.
fn lognormal_partial_mean(mu: f64, sigma: f64, a: f64, b: f64) -> f64 {
    let shifted = |x: f64| {
        if x <= 0.0 {
            1.0
        } else if x.is_infinite() {
            0.0
        } else {
            normal_upper_tail((x.ln() - mu) / sigma - sigma)
        }
    };
    (mu + 0.5 * sigma * sigma).exp() * (shifted(a) - shifted(b))
}

impl TryFrom<DistributionSpec> for Distribution {
    type Error = Error;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        Distribution::new(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(spec: DistributionSpec) -> Distribution {
        Distribution::new(spec).unwrap()
    }

    const CALL_HOLDING: DistributionSpec = DistributionSpec::GeneralizedPareto {
        shape: -0.39,
        scale: 69.33,
        location: 0.0,
    };

    /// Adaptive Simpson quadrature on `[a, b]`.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                left + right + delta / 15.0
            } else {
                step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                    + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
            }
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        step(&f, a, b, fa, fm, fb, whole, 1e-13 * (b - a).max(1.0), 50)
    }

    #[test]
    fn exponential_survival_closed_form() {
        let d = dist(DistributionSpec::Exponential { mean: 30.0 });
        assert!((d.survival(10.0) - 0.716_531_310_573_789_2).abs() < 1e-12);
        assert_eq!(d.survival(-1.0), 1.0);
    }

    #[test]
    fn call_holding_support_is_bounded() {
        let d = dist(CALL_HOLDING);
        let (_, hi) = d.support();
        assert!((hi - 69.33 / 0.39).abs() < 1e-9);
        assert_eq!(d.survival(200.0), 0.0);
        assert!((d.mean().unwrap() - 69.33 / 1.39).abs() < 1e-12);
        assert!((d.truncated_expectation(1000.0).unwrap() - 49.877_697_841_726_62).abs() < 1e-9);
    }

    #[test]
    fn geometric_mean_uses_continuation_probability() {
        assert!((dist(DistributionSpec::Geometric { p: 0.6 }).mean().unwrap() - 2.5).abs() < 1e-12);
        let web = dist(DistributionSpec::Geometric { p: 0.893 }).mean().unwrap();
        assert!((web - 9.345_794_392_523_365).abs() < 1e-9);
    }

    #[test]
    fn exponential_capped_mean_matches_quadrature() {
        let d = dist(DistributionSpec::Exponential { mean: 30.0 });
        let closed = d.truncated_expectation(10.0).unwrap();
        assert!((closed - 8.504_060_682_786_33).abs() < 1e-9);
        let quad = simpson(|x| d.survival(x), 0.0, 10.0);
        assert!((closed - quad).abs() / quad < 1e-8);
        assert_eq!(d.truncated_expectation(0.0).unwrap(), 0.0);
    }

    #[test]
    fn capped_expectation_matches_quadrature_for_every_law() {
        let specs = [
            DistributionSpec::TruncatedLognormal {
                mu: 6.17,
                sigma: 2.36,
                min: 50.0,
                max: 2e6,
            },
            DistributionSpec::TruncatedLognormal {
                mu: 175f64.ln(),
                sigma: 1.0,
                min: 10.0,
                max: 3600.0,
            },
            DistributionSpec::TruncatedPareto {
                scale: 4.0,
                shape: 1.1,
                max: 55.0,
            },
            DistributionSpec::TruncatedPareto {
                scale: 2.0,
                shape: 1.0,
                max: 40.0,
            },
            CALL_HOLDING,
            DistributionSpec::GeneralizedPareto {
                shape: 0.3,
                scale: 5.0,
                location: 1.0,
            },
            DistributionSpec::Geometric { p: 0.893 },
            DistributionSpec::Uniform { min: 0.0, max: 4.2 },
            DistributionSpec::DeferredExponential {
                mean: 1200.0,
                p_zero: 0.2,
            },
        ];
        for spec in specs {
            let d = dist(spec);
            for cap in [0.5, 3.0, 17.0, 60.0, 400.0, 3000.0] {
                let closed = d.truncated_expectation(cap).unwrap();
                // E[min(X, c)] = integral over [0, c] of P(X > x) for X >= 0.
                // Split at the integer points so the geometric staircase is exact.
                let mut quad = 0.0;
                let mut a = 0.0;
                let (lo, hi) = d.support();
                let mut knots: Vec<f64> = (1..=cap.floor() as usize).map(|k| k as f64).collect();
                knots.push(lo.min(cap));
                knots.push(hi.min(cap));
                knots.push(cap);
                knots.sort_by(f64::total_cmp);
                for b in knots {
                    if b > a {
                        quad += simpson(|x| d.survival(x), a, b);
                        a = b;
                    }
                }
                let rel = (closed - quad).abs() / quad.max(1e-300);
                assert!(rel < 1e-7, "{spec:?} cap={cap}: closed={closed} quad={quad}");
            }
        }
    }

    #[test]
    fn infinite_means_are_rejected() {
        let pareto = dist(DistributionSpec::TruncatedPareto {
            scale: 1.0,
            shape: 0.9,
            max: f64::INFINITY,
        });
        assert!(pareto.mean().is_err());
        let gpd = dist(DistributionSpec::GeneralizedPareto {
            shape: 1.2,
            scale: 1.0,
            location: 0.0,
        });
        assert!(gpd.mean().is_err());
        assert!(gpd.truncated_expectation(10.0).unwrap().is_finite());
    }

    #[test]
    fn invalid_parameters_rejected_at_construction() {
        let bad = [
            DistributionSpec::Exponential { mean: 0.0 },
            DistributionSpec::Exponential { mean: f64::NAN },
            DistributionSpec::Uniform { min: 3.0, max: 3.0 },
            DistributionSpec::Geometric { p: 1.0 },
            DistributionSpec::Geometric { p: -0.1 },
            DistributionSpec::TruncatedLognormal {
                mu: 0.0,
                sigma: 1.0,
                min: 10.0,
                max: 5.0,
            },
            DistributionSpec::TruncatedLognormal {
                mu: 0.0,
                sigma: 0.001,
                min: 1e6,
                max: 2e6,
            },
            DistributionSpec::TruncatedPareto {
                scale: 0.0,
                shape: 1.1,
                max: 55.0,
            },
            DistributionSpec::GeneralizedPareto {
                shape: -0.39,
                scale: -1.0,
                location: 0.0,
            },
            DistributionSpec::DeferredExponential {
                mean: 10.0,
                p_zero: 1.0,
            },
        ];
        for spec in bad {
            assert!(Distribution::new(spec).is_err(), "{spec:?} accepted");
        }
        let d = dist(DistributionSpec::Exponential { mean: 1.0 });
        assert!(d.truncated_expectation(-1.0).is_err());
    }

    #[test]
    fn pareto_scale_solved_for_target_mean() {
        let spec = DistributionSpec::truncated_pareto_with_mean(22.0, 1.1, 55.0).unwrap();
        let d = dist(spec);
        assert!((d.mean().unwrap() - 22.0).abs() < 1e-9);
    }

    #[test]
    fn same_seed_same_sequence() {
        let d = dist(DistributionSpec::TruncatedLognormal {
            mu: 6.17,
            sigma: 2.36,
            min: 50.0,
            max: 2e6,
        });
        let draw = |seed| {
            let mut s = RandomStream::substream(seed, 7);
            (0..1000).map(|_| d.sample(&mut s).to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn spec_round_trips_through_toml() {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct Wrapper {
            law: DistributionSpec,
        }
        let w = Wrapper { law: CALL_HOLDING };
        let text = toml::to_string(&w).unwrap();
        assert!(text.contains("kind = \"generalized_pareto\""));
        assert_eq!(toml::from_str::<Wrapper>(&text).unwrap(), w);
        let bad = "law = { kind = \"exponential\", mean = 1.0, sigma = 2.0 }";
        assert!(toml::from_str::<Wrapper>(bad).is_err());
    }
}
