//! Distribution specifications, the shared per-customer primitive stream and
//! the initial-condition recursion for jobs present at time zero.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// A nonnegative law. Interarrival and service laws are *unitized*: the
/// sampled value is divided by λ or μ by the simulators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    Exponential { rate: f64 },
    /// Parameterized by the mean and variance of the lognormal variable itself.
    LogNormal { mean: f64, variance: f64 },
    /// Uniform on `(0, upper)`.
    Uniform { upper: f64 },
    Deterministic { value: f64 },
    /// Infinite tolerance: the customer never balks (or never abandons).
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Interarrival,
    Service,
    Balking,
    Deadline,
}

impl Role {
    fn is_unitized(self) -> bool {
        matches!(self, Role::Interarrival | Role::Service)
    }
}

impl Law {
    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        match *self {
            Law::Exponential { rate } if !ok(rate) => {
                Err(Error::config(format!("exponential rate must be positive, got {rate}")))
            }
            Law::LogNormal { mean, variance } if !ok(mean) || !ok(variance) => Err(Error::config(
                format!("lognormal mean and variance must be positive, got ({mean}, {variance})"),
            )),
            Law::Uniform { upper } if !ok(upper) => {
                Err(Error::config(format!("uniform upper bound must be positive, got {upper}")))
            }
            Law::Deterministic { value } if !value.is_finite() || value < 0.0 => Err(
                Error::config(format!("deterministic value must be finite and nonnegative, got {value}")),
            ),
            _ => Ok(()),
        }
    }

    /// Parameters `(mu_ln, sigma_ln)` of the underlying normal.
    fn lognormal_parameters(mean: f64, variance: f64) -> (f64, f64) {
        let s2 = (1.0 + variance / (mean * mean)).ln();
        (mean.ln() - 0.5 * s2, s2.sqrt())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Law::Exponential { rate } => 1.0 / rate,
            Law::LogNormal { mean, .. } => mean,
            Law::Uniform { upper } => 0.5 * upper,
            Law::Deterministic { value } => value,
            Law::Never => f64::INFINITY,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Law::Exponential { rate } => 1.0 / (rate * rate),
            Law::LogNormal { variance, .. } => variance,
            Law::Uniform { upper } => upper * upper / 12.0,
            Law::Deterministic { .. } => 0.0,
            Law::Never => f64::NAN,
        }
    }

    /// Coefficient of variation (standard deviation over mean).
    pub fn cv(&self) -> f64 {
        self.variance().sqrt() / self.mean()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return match *self {
                Law::Deterministic { value } if value <= x => 1.0,
                _ => 0.0,
            };
        }
        match *self {
            Law::Exponential { rate } => -(-rate * x).exp_m1(),
            Law::LogNormal { mean, variance } => {
                let (m, s) = Self::lognormal_parameters(mean, variance);
                Normal::standard().cdf((x.ln() - m) / s)
            }
            Law::Uniform { upper } => (x / upper).min(1.0),
            Law::Deterministic { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
            Law::Never => 0.0,
        }
    }

    /// Inverse CDF at `p` in `(0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Law::Exponential { rate } => -(-p).ln_1p() / rate,
            Law::LogNormal { mean, variance } => {
                let (m, s) = Self::lognormal_parameters(mean, variance);
                (m + s * Normal::standard().inverse_cdf(p)).exp()
            }
            Law::Uniform { upper } => p * upper,
            Law::Deterministic { value } => value,
            Law::Never => f64::INFINITY,
        }
    }

    /// One draw. Every law consumes exactly one 64-bit word of the stream so
    /// that streams stay aligned across laws.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open_unit(rng);
        self.quantile(u)
    }
}

/// Uniform variate on the open interval `(0, 1)` built from one 64-bit word.
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    pub law: Law,
    pub role: Role,
}

impl DistributionSpec {
    pub fn new(law: Law, role: Role) -> Result<Self> {
        law.validate()?;
        match role {
            Role::Interarrival | Role::Service => {
                if matches!(law, Law::Never) {
                    return Err(Error::config(format!("{role:?} law cannot be infinite")));
                }
                let mean = law.mean();
                if (mean - 1.0).abs() > 1e-9 {
                    return Err(Error::config(format!(
                        "{role:?} law must be unitized (mean 1), got mean {mean}"
                    )));
                }
            }
            Role::Balking | Role::Deadline => {
                if !matches!(law, Law::Exponential { .. } | Law::Uniform { .. } | Law::Never) {
                    return Err(Error::config(format!(
                        "{role:?} law must be exponential or uniform, got {law:?}"
                    )));
                }
            }
        }
        Ok(DistributionSpec { law, role })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.law.sample(rng)
    }

    /// F'(0) for a balking or deadline law.
    pub fn derivative_at_zero(&self) -> Result<f64> {
        if self.role.is_unitized() {
            return Err(Error::usage(format!(
                "derivative at zero is only defined for balking/deadline laws, not {:?}",
                self.role
            )));
        }
        Ok(match self.law {
            Law::Exponential { rate } => rate,
            Law::Uniform { upper } => 1.0 / upper,
            Law::Never => 0.0,
            // rejected by the constructor
            _ => unreachable!("balking/deadline law validated at construction"),
        })
    }

    /// Law with F'(0) = `rate`; a zero rate means the customer is infinitely tolerant.
    fn impatience(role: Role, rate: f64, uniform: bool) -> Result<Self> {
        if rate == 0.0 {
            return DistributionSpec::new(Law::Never, role);
        }
        let law = if uniform {
            Law::Uniform { upper: 1.0 / rate }
        } else {
            Law::Exponential { rate }
        };
        DistributionSpec::new(law, role)
    }
}

/// The two distribution families exercised by the tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Exponential interarrival, service, balking and deadline laws.
    Markovian,
    /// Exponential arrivals, LogNormal(1/μ, 1/μ²) service, uniform balking and deadlines.
    LognormalUniform,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Markovian => "markovian",
            Family::LognormalUniform => "lognormal-uniform",
        }
    }

    /// `(interarrival, service, balking, deadline)` laws with F'_b(0) = `theta_b`
    /// and F'_d(0) = `theta_r`.
    pub fn laws(
        self,
        theta_b: f64,
        theta_r: f64,
    ) -> Result<(DistributionSpec, DistributionSpec, DistributionSpec, DistributionSpec)> {
        let uniform = self == Family::LognormalUniform;
        let interarrival = DistributionSpec::new(Law::Exponential { rate: 1.0 }, Role::Interarrival)?;
        let service = match self {
            Family::Markovian => Law::Exponential { rate: 1.0 },
            Family::LognormalUniform => Law::LogNormal { mean: 1.0, variance: 1.0 },
        };
        let service = DistributionSpec::new(service, Role::Service)?;
        let balking = DistributionSpec::impatience(Role::Balking, theta_b, uniform)?;
        let deadline = DistributionSpec::impatience(Role::Deadline, theta_r, uniform)?;
        Ok((interarrival, service, balking, deadline))
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markovian" | "exponential" | "markov" => Ok(Family::Markovian),
            "lognormal-uniform" | "lognormal_uniform" | "lognormal" => Ok(Family::LognormalUniform),
            other => Err(Error::config(format!("unknown family `{other}`"))),
        }
    }
}

/// Resolve `(λ, μ, β)` from exactly two of the three, with β = (λ − μ)/√μ.
pub fn resolve_rates(lambda: Option<f64>, mu: Option<f64>, beta: Option<f64>) -> Result<(f64, f64, f64)> {
    let (lambda, mu, beta) = match (lambda, mu, beta) {
        (Some(l), Some(m), None) => (l, m, (l - m) / m.sqrt()),
        (None, Some(m), Some(b)) => (m + b * m.sqrt(), m, b),
        (Some(l), None, Some(b)) => {
            let root = 0.5 * (-b + (b * b + 4.0 * l).sqrt());
            (l, root * root, b)
        }
        _ => {
            return Err(Error::config(
                "exactly two of lambda, mu and beta must be given",
            ))
        }
    };
    if !(lambda > 0.0 && lambda.is_finite() && mu > 0.0 && mu.is_finite()) {
        return Err(Error::config(format!(
            "rates must be positive and finite, got lambda={lambda}, mu={mu}"
        )));
    }
    Ok((lambda, mu, beta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub lambda: f64,
    pub mu: f64,
    pub beta: f64,
    pub interarrival: DistributionSpec,
    pub service: DistributionSpec,
    pub balking: DistributionSpec,
    pub deadline: DistributionSpec,
}

impl SystemParams {
    pub fn new(
        lambda: f64,
        mu: f64,
        interarrival: DistributionSpec,
        service: DistributionSpec,
        balking: DistributionSpec,
        deadline: DistributionSpec,
    ) -> Result<Self> {
        let (lambda, mu, beta) = resolve_rates(Some(lambda), Some(mu), None)?;
        let roles = [
            (interarrival.role, Role::Interarrival),
            (service.role, Role::Service),
            (balking.role, Role::Balking),
            (deadline.role, Role::Deadline),
        ];
        if let Some((got, want)) = roles.iter().find(|(g, w)| g != w) {
            return Err(Error::config(format!("expected a {want:?} law, got a {got:?} law")));
        }
        Ok(SystemParams {
            lambda,
            mu,
            beta,
            interarrival,
            service,
            balking,
            deadline,
        })
    }

    /// Parameters for one of the table families given `(μ, β)`.
    pub fn from_family(mu: f64, beta: f64, theta_b: f64, theta_r: f64, family: Family) -> Result<Self> {
        let (lambda, mu, _) = resolve_rates(None, Some(mu), Some(beta))?;
        let (a, s, b, d) = family.laws(theta_b, theta_r)?;
        let mut params = SystemParams::new(lambda, mu, a, s, b, d)?;
        // keep the β literal instead of the round-tripped value
        params.beta = beta;
        Ok(params)
    }

    /// F'_b(0).
    pub fn f0(&self) -> f64 {
        self.balking.derivative_at_zero().expect("balking role")
    }

    /// F'_d(0).
    pub fn g0(&self) -> f64 {
        self.deadline.derivative_at_zero().expect("deadline role")
    }

    /// θ = F'_b(0) + F'_d(0).
    pub fn theta(&self) -> f64 {
        self.f0() + self.g0()
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }
}

/// Stream identifiers for the counter-based generator. Each coordinate of the
/// primitive quadruple draws from its own stream so that changing one law
/// does not shift the draws of the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Interarrival = 0,
    Service = 1,
    Balking = 2,
    Deadline = 3,
    InitialService = 4,
    InitialDeadline = 5,
    Markov = 6,
    Diffusion = 7,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Derive a child seed from a base seed and a path of indices (SplitMix64 finalizer).
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(base), |acc, &p| {
        mix(acc.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(mix(p)))
    })
}

/// One arriving customer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Customer {
    /// Arrival time t_i.
    pub arrival: f64,
    /// Unitized service requirement v_i; the service time is v_i / μ.
    pub service: f64,
    /// Balking tolerance b_i (time).
    pub balk: f64,
    /// Patience deadline d_i (time).
    pub deadline: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomerPrimitives {
    pub horizon: f64,
    pub customers: Vec<Customer>,
}

impl CustomerPrimitives {
    /// Hand-built stream; arrival times must be strictly increasing and positive.
    pub fn from_customers(customers: Vec<Customer>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::usage("horizon must be positive"));
        }
        let mut last = 0.0;
        for (i, c) in customers.iter().enumerate() {
            if !(c.arrival > last) {
                return Err(Error::config(format!(
                    "arrival {i} at {} is not after the previous arrival at {last}",
                    c.arrival
                )));
            }
            if !(c.service >= 0.0 && c.balk > 0.0 && c.deadline > 0.0) {
                return Err(Error::config(format!("customer {i} has invalid primitives {c:?}")));
            }
            last = c.arrival;
        }
        Ok(CustomerPrimitives { horizon, customers })
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    pub fn arrival_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.customers.iter().map(|c| c.arrival)
    }
}

/// All customers with t_i ≤ `horizon`, drawn from four independent sub-streams of `seed`.
pub fn generate_stream(params: &SystemParams, seed: u64, horizon: f64) -> Result<CustomerPrimitives> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::usage(format!("horizon must be positive and finite, got {horizon}")));
    }
    let mut u_rng = stream_rng(seed, Stream::Interarrival);
    let mut v_rng = stream_rng(seed, Stream::Service);
    let mut b_rng = stream_rng(seed, Stream::Balking);
    let mut d_rng = stream_rng(seed, Stream::Deadline);

    let expected = (params.lambda * horizon * 1.05) as usize + 16;
    let mut customers = Vec::with_capacity(expected);
    let mut sum_u = 0.0;
    loop {
        let u = params.interarrival.sample(&mut u_rng);
        if !(u > 0.0) {
            return Err(Error::config("interarrival law produced a zero interarrival time"));
        }
        sum_u += u;
        let arrival = sum_u / params.lambda;
        if arrival > horizon {
            break;
        }
        customers.push(Customer {
            arrival,
            service: params.service.sample(&mut v_rng),
            balk: params.balking.sample(&mut b_rng),
            deadline: params.deadline.sample(&mut d_rng),
        });
    }
    Ok(CustomerPrimitives { horizon, customers })
}

/// A job present at time zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialJob {
    /// Unitized service requirement v̂_i.
    pub service: f64,
    /// Residual deadline d̂_i.
    pub residual_deadline: f64,
    /// Whether d̂_i > ŵ_{i-1}, i.e. the job is eventually served.
    pub served: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub mu: f64,
    pub jobs: Vec<InitialJob>,
    /// ŵ_0, ŵ_1, …, ŵ_{Q(0)}.
    pub cumulative_work: Vec<f64>,
}

impl InitialConditions {
    pub fn empty(mu: f64) -> Self {
        InitialConditions {
            mu,
            jobs: Vec::new(),
            cumulative_work: vec![0.0],
        }
    }

    /// Run the ŵ recursion over explicit (v̂, d̂) values.
    pub fn from_values(services: &[f64], residual_deadlines: &[f64], mu: f64) -> Result<Self> {
        if services.len() != residual_deadlines.len() {
            return Err(Error::usage("service and deadline sequences differ in length"));
        }
        if !(mu > 0.0) {
            return Err(Error::config("mu must be positive"));
        }
        let mut jobs = Vec::with_capacity(services.len());
        let mut cumulative_work = Vec::with_capacity(services.len() + 1);
        let mut w = 0.0;
        cumulative_work.push(w);
        for (&v, &d) in services.iter().zip(residual_deadlines) {
            if !(v >= 0.0 && d >= 0.0) {
                return Err(Error::config(format!("invalid initial job (v̂={v}, d̂={d})")));
            }
            let served = d > w;
            if served {
                w += v / mu;
            }
            jobs.push(InitialJob {
                service: v,
                residual_deadline: d,
                served,
            });
            cumulative_work.push(w);
        }
        Ok(InitialConditions {
            mu,
            jobs,
            cumulative_work,
        })
    }

    /// Draw `q0` initial jobs. `deadlines` holds either one law shared by all
    /// jobs or one law per job.
    pub fn build(
        q0: usize,
        service: &DistributionSpec,
        deadlines: &[DistributionSpec],
        mu: f64,
        seed: u64,
    ) -> Result<Self> {
        if q0 > 0 && deadlines.len() != 1 && deadlines.len() != q0 {
            return Err(Error::usage(format!(
                "expected 1 or {q0} residual deadline laws, got {}",
                deadlines.len()
            )));
        }
        let mut v_rng = stream_rng(seed, Stream::InitialService);
        let mut d_rng = stream_rng(seed, Stream::InitialDeadline);
        let services: Vec<f64> = (0..q0).map(|_| service.sample(&mut v_rng)).collect();
        let residuals: Vec<f64> = (0..q0)
            .map(|i| deadlines[if deadlines.len() == 1 { 0 } else { i }].sample(&mut d_rng))
            .collect();
        Self::from_values(&services, &residuals, mu)
    }

    pub fn q0(&self) -> usize {
        self.jobs.len()
    }

    /// W(0) = ŵ_{Q(0)}.
    pub fn w0(&self) -> f64 {
        *self.cumulative_work.last().expect("ŵ_0 always present")
    }

    pub fn served_flags(&self) -> Vec<bool> {
        self.jobs.iter().map(|j| j.served).collect()
    }
}
