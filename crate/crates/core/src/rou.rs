//! Heavy-traffic approximations from the regulated Ornstein-Uhlenbeck limit
//! and an Euler-Maruyama simulator for the reflected diffusion.
//!
//! The stationary scaled queue is a normal with mean β/θ and variance
//! σ̂²/(2θ) truncated to `[0, ∞)`. Unscaled, Q is approximately
//! N((λ−μ)/θ, μσ̂²/(2θ)) truncated at zero, and all the closed forms below
//! are moments of that law.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::primitives::{open_unit, stream_rng, Stream, SystemParams};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Beyond this point the tail underflows and the hazard switches to its
/// asymptotic series.
pub const HAZARD_ASYMPTOTIC_FROM: f64 = 37.0;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x) = erfc(−x/√2)/2.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// 1 − Φ(x) without cancellation.
pub fn std_normal_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// h(x) = φ(x)/(1 − Φ(x)).
///
/// Above [`HAZARD_ASYMPTOTIC_FROM`] the Mills-ratio series
/// x + 1/x − 2/x³ + 10/x⁵ is used; its error there is below 1e-9.
pub fn hazard(x: f64) -> f64 {
    if x > HAZARD_ASYMPTOTIC_FROM {
        let r = 1.0 / x;
        let r2 = r * r;
        x + r * (1.0 - r2 * (2.0 - 10.0 * r2))
    } else {
        std_normal_pdf(x) / std_normal_tail(x)
    }
}

/// Normal law truncated to `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    /// Mean of the untruncated normal.
    pub location: f64,
    /// Variance of the untruncated normal.
    pub variance: f64,
}

impl TruncatedNormal {
    pub fn new(location: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite() && location.is_finite()) {
            return Err(Error::domain(format!(
                "truncated normal needs finite location and positive variance, got ({location}, {variance})"
            )));
        }
        Ok(TruncatedNormal { location, variance })
    }

    fn scale(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn mean(&self) -> f64 {
        let s = self.scale();
        self.location + s * hazard(-self.location / s)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let s = self.scale();
        let z0 = -self.location / s;
        let z = (x - self.location) / s;
        (1.0 - std_normal_tail(z) / std_normal_tail(z0)).clamp(0.0, 1.0)
    }
}

/// The inputs the closed forms depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouInputs {
    pub lambda: f64,
    pub mu: f64,
    /// F'_b(0)
    pub f0: f64,
    /// F'_d(0)
    pub g0: f64,
    /// Coefficient of variation of interarrival times.
    pub cv_a: f64,
    /// Coefficient of variation of service times.
    pub cv_s: f64,
}

impl RouInputs {
    pub fn from_params(p: &SystemParams) -> Self {
        RouInputs {
            lambda: p.lambda,
            mu: p.mu,
            f0: p.f0(),
            g0: p.g0(),
            cv_a: p.interarrival.law.cv(),
            cv_s: p.service.law.cv(),
        }
    }

    pub fn theta(&self) -> f64 {
        self.f0 + self.g0
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    /// σ̂ = √(cv_a² + cv_s²).
    pub fn sigma_hat(&self) -> f64 {
        (self.cv_a * self.cv_a + self.cv_s * self.cv_s).sqrt()
    }

    /// σ = μ·√((cv_a/λ)² + (cv_s/μ)²), which equals σ̂ when λ = μ.
    pub fn sigma(&self) -> f64 {
        let a = self.cv_a / self.lambda;
        let s = self.cv_s / self.mu;
        self.mu * (a * a + s * s).sqrt()
    }

    fn check(&self) -> Result<f64> {
        let theta = self.theta();
        if !(theta > 0.0) {
            return Err(Error::domain(format!("θ = F'_b(0) + F'_d(0) must be positive, got {theta}")));
        }
        if !(self.lambda > 0.0 && self.mu > 0.0) {
            return Err(Error::domain(format!(
                "rates must be positive, got λ={}, μ={}",
                self.lambda, self.mu
            )));
        }
        Ok(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouSummary {
    pub theta: f64,
    pub beta: f64,
    pub sigma_hat: f64,
    pub sigma: f64,
    pub tn_mean: f64,
    pub tn_var: f64,
    pub e_q: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub e_x: f64,
    pub f0: f64,
    pub g0: f64,
}

impl RouSummary {
    pub fn new(inputs: &RouInputs) -> Result<Self> {
        let theta = inputs.check()?;
        let tn = steady_state_distribution(inputs)?;
        let e_q = expected_queue_length(inputs)?;
        let (alpha1, alpha2, alpha3) = abandonment_fractions(inputs)?;
        let (gamma1, gamma2, gamma3) = balking_fractions(inputs)?;
        Ok(RouSummary {
            theta,
            beta: (inputs.lambda - inputs.mu) / inputs.mu.sqrt(),
            sigma_hat: inputs.sigma_hat(),
            sigma: inputs.sigma(),
            tn_mean: tn.location,
            tn_var: tn.variance,
            e_q,
            alpha1,
            alpha2,
            alpha3,
            gamma1,
            gamma2,
            gamma3,
            e_x: expected_unresolved_abandoned(inputs)?,
            f0: inputs.f0,
            g0: inputs.g0,
        })
    }

    /// W ≈ E[Q]/μ.
    pub fn workload(&self, mu: f64) -> f64 {
        self.e_q / mu
    }
}

/// N((λ−μ)/θ, μσ̂²/(2θ)) truncated to `[0, ∞)`.
pub fn steady_state_distribution(inputs: &RouInputs) -> Result<TruncatedNormal> {
    let theta = inputs.check()?;
    let s2 = inputs.sigma_hat().powi(2);
    TruncatedNormal::new((inputs.lambda - inputs.mu) / theta, inputs.mu * s2 / (2.0 * theta))
}

/// E[Q] = (λ−μ)/θ + σ̂·√(μ/(2θ))·h((1−ρ)/σ̂·√(2μ/θ)).
pub fn expected_queue_length(inputs: &RouInputs) -> Result<f64> {
    let theta = inputs.check()?;
    let sigma_hat = inputs.sigma_hat();
    let mu = inputs.mu;
    let arg = (1.0 - inputs.rho()) / sigma_hat * (2.0 * mu / theta).sqrt();
    Ok((inputs.lambda - mu) / theta + sigma_hat * (mu / (2.0 * theta)).sqrt() * hazard(arg))
}

/// (E[Q]/λ, E[Q]/μ, critical-load form) scaled by `rate`.
fn fractions(inputs: &RouInputs, rate: f64) -> Result<(f64, f64, f64)> {
    let theta = inputs.check()?;
    let e_q = expected_queue_length(inputs)?;
    let third = inputs.sigma() * rate / (std::f64::consts::PI * theta * inputs.mu).sqrt();
    Ok((rate * e_q / inputs.lambda, rate * e_q / inputs.mu, third))
}

/// (α₁, α₂, α₃): abandonment fraction normalized by arrivals, by service
/// capacity, and the critical-load closed form σ·g(0)/√(πθμ).
pub fn abandonment_fractions(inputs: &RouInputs) -> Result<(f64, f64, f64)> {
    fractions(inputs, inputs.g0)
}

/// (γ₁, γ₂, γ₃), as [`abandonment_fractions`] with F'_b(0).
pub fn balking_fractions(inputs: &RouInputs) -> Result<(f64, f64, f64)> {
    fractions(inputs, inputs.f0)
}

/// E[X] ≈ g(0)·E[Q]²/(2μ).
pub fn expected_unresolved_abandoned(inputs: &RouInputs) -> Result<f64> {
    let e_q = expected_queue_length(inputs)?;
    Ok(inputs.g0 * e_q * e_q / (2.0 * inputs.mu))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouPathConfig {
    pub beta: f64,
    pub theta: f64,
    pub sigma: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Starting point; `None` starts at max(β/θ, 0).
    pub start: Option<f64>,
    /// Keep every `thin`-th step in the returned sample.
    pub thin: usize,
}

impl RouPathConfig {
    pub fn new(beta: f64, theta: f64, sigma: f64, dt: f64, horizon: f64, seed: u64) -> Self {
        RouPathConfig {
            beta,
            theta,
            sigma,
            dt,
            horizon,
            seed,
            start: None,
            thin: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouPath {
    pub dt: f64,
    pub thin: usize,
    /// Path value every `thin` steps, starting with the initial point.
    pub sample: Vec<f64>,
    /// Time-average over all steps.
    pub mean: f64,
    pub last: f64,
}

/// Reflected Euler-Maruyama:
/// Q̃_{k+1} = max(0, Q̃_k + (β − θQ̃_k)dt + σ√dt·Z_k).
pub fn simulate_rou_path(cfg: &RouPathConfig) -> Result<RouPath> {
    if !(cfg.theta > 0.0) {
        return Err(Error::domain(format!("θ must be positive, got {}", cfg.theta)));
    }
    if !(cfg.dt > 0.0 && cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return Err(Error::usage("dt and horizon must be positive"));
    }
    if cfg.dt >= 1.0 / cfg.theta {
        return Err(Error::Stability(format!(
            "step {} is not below 1/θ = {}",
            cfg.dt,
            1.0 / cfg.theta
        )));
    }
    if !(cfg.sigma >= 0.0) {
        return Err(Error::usage(format!("σ must be nonnegative, got {}", cfg.sigma)));
    }
    let thin = cfg.thin.max(1);
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let mut rng = stream_rng(cfg.seed, Stream::Diffusion);
    let noise = cfg.sigma * cfg.dt.sqrt();
    let mut x = cfg.start.unwrap_or((cfg.beta / cfg.theta).max(0.0));
    let mut sample = Vec::with_capacity(steps / thin + 1);
    sample.push(x);
    let mut sum = 0.0;
    for k in 1..=steps {
        let z = if noise > 0.0 {
            standard_normal_quantile(open_unit(&mut rng))
        } else {
            0.0
        };
        let next = (x + (cfg.beta - cfg.theta * x) * cfg.dt + noise * z).max(0.0);
        // trapezoid over the step
        sum += 0.5 * (x + next);
        x = next;
        if k % thin == 0 {
            sample.push(x);
        }
    }
    Ok(RouPath {
        dt: cfg.dt,
        thin,
        sample,
        mean: if steps > 0 { sum / steps as f64 } else { x },
        last: x,
    })
}

fn standard_normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    thread_local! {
        static STD: Normal = Normal::standard();
    }
    STD.with(|n| n.inverse_cdf(p))
}
