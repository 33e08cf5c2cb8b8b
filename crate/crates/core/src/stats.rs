//! Steady-state estimates from trajectories and replication confidence intervals.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::trajectory::{Outcome, Trajectory};

pub const DEFAULT_WARMUP: f64 = 0.2;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimMetrics {
    pub q_bar: f64,
    pub w_bar: f64,
    /// Reneging arrivals over all arrivals after the warmup.
    pub r_frac: f64,
    /// Balking arrivals over all arrivals after the warmup.
    pub b_frac: f64,
    pub x_bar: f64,
    pub idle_frac: f64,
    pub arrivals: u64,
    pub reneged: u64,
    pub balked: u64,
}

/// Time averages over `[warmup·t, t]` and arrival fractions over the same window.
pub fn time_average(traj: &Trajectory, warmup_fraction: f64) -> Result<SimMetrics> {
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(Error::usage(format!("warmup fraction must lie in [0, 1), got {warmup_fraction}")));
    }
    if traj.path.is_empty() {
        return Err(Error::usage("empty trajectory"));
    }
    let from = warmup_fraction * traj.horizon;
    let to = traj.horizon;
    let span = to - from;
    let integrals = traj.integrate(from, to);

    let mut arrivals = 0u64;
    let mut reneged = 0u64;
    let mut balked = 0u64;
    let first = traj.arrivals.partition_point(|a| a.time < from);
    for a in &traj.arrivals[first..] {
        arrivals += 1;
        match a.outcome {
            Outcome::Reneged => reneged += 1,
            Outcome::Balked => balked += 1,
            Outcome::Served | Outcome::Pending => {}
        }
    }
    let frac = |k: u64| if arrivals > 0 { k as f64 / arrivals as f64 } else { 0.0 };
    Ok(SimMetrics {
        q_bar: integrals.queue / span,
        w_bar: integrals.workload / span,
        r_frac: frac(reneged),
        b_frac: frac(balked),
        x_bar: integrals.unresolved / span,
        idle_frac: integrals.idle / span,
        arrivals,
        reneged,
        balked,
    })
}

/// Mean and Student-t half-width.
pub fn ci(values: &[f64], level: f64) -> Result<(f64, f64)> {
    let k = values.len();
    if k < 2 {
        return Err(Error::usage(format!("a confidence interval needs at least 2 values, got {k}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::usage(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let n = k as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let sd = (ss / (n - 1.0)).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::usage(e.to_string()))?
        .inverse_cdf(0.5 * (1.0 + level));
    Ok((mean, t * sd / n.sqrt()))
}

/// Mean and half-width of one metric.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricSummary {
    pub q: Estimate,
    pub w: Estimate,
    pub r: Estimate,
    pub b: Estimate,
    pub x: Estimate,
    pub idle: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSet {
    pub replications: Vec<SimMetrics>,
    pub level: f64,
}

impl ReplicationSet {
    pub fn new(replications: Vec<SimMetrics>, level: f64) -> Self {
        ReplicationSet { replications, level }
    }

    fn estimate(&self, f: impl Fn(&SimMetrics) -> f64) -> Result<Estimate> {
        let values: Vec<f64> = self.replications.iter().map(f).collect();
        let (mean, half_width) = ci(&values, self.level)?;
        Ok(Estimate { mean, half_width })
    }

    pub fn summary(&self) -> Result<MetricSummary> {
        Ok(MetricSummary {
            q: self.estimate(|m| m.q_bar)?,
            w: self.estimate(|m| m.w_bar)?,
            r: self.estimate(|m| m.r_frac)?,
            b: self.estimate(|m| m.b_frac)?,
            x: self.estimate(|m| m.x_bar)?,
            idle: self.estimate(|m| m.idle_frac)?,
        })
    }
}

/// Kolmogorov-Smirnov distance between the empirical law of `sample` and `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::usage("KS statistic of an empty sample"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = 0.5 * (i + j) as f64 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation. Returns 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Discipline;

    #[test]
    fn ci_closed_forms() {
        let (m, hw) = ci(&[1.0, 2.0, 3.0], 0.95).unwrap();
        assert_eq!(m, 2.0);
        assert!((hw - 4.302_652_73 / 3f64.sqrt()).abs() < 1e-7);
        let (m, hw) = ci(&[0.0, 0.0, 0.0, 4.0], 0.95).unwrap();
        assert_eq!(m, 1.0);
        assert!((hw - 3.182_446_31).abs() < 1e-7);
        assert_eq!(ci(&[5.0, 5.0, 5.0], 0.95).unwrap().1, 0.0);
        assert!(ci(&[1.0], 0.95).is_err());
    }

    #[test]
    fn ks_single_point_and_mismatch() {
        let std = |x: f64| crate::rou::std_normal_cdf(x);
        assert_eq!(ks_statistic(&[0.0], std).unwrap(), 0.5);
        let uniform: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0 * 10.0).collect();
        assert!(ks_statistic(&uniform, std).unwrap() > 0.2);
    }

    #[test]
    fn ks_of_a_sample_from_its_own_law_is_small() {
        use crate::primitives::{stream_rng, Law, Stream};
        let law = Law::Exponential { rate: 2.0 };
        let mut rng = stream_rng(3, Stream::Service);
        let sample: Vec<f64> = (0..10_000).map(|_| law.sample(&mut rng)).collect();
        assert!(ks_statistic(&sample, |x| law.cdf(x)).unwrap() < 1.63 / 100.0);
    }

    #[test]
    fn spearman_edge_cases() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), 0.0);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 3.0]) - 0.948_683_3).abs() < 1e-6);
    }

    #[test]
    fn constant_path_average() {
        let mut t = Trajectory::new(Discipline::Standard, 1.0, 10.0, true);
        t.record(0.0, 3, 0.0, 0);
        let m = time_average(&t, 0.2).unwrap();
        assert_eq!(m.q_bar, 3.0);
        assert_eq!(m.idle_frac, 0.0);
        assert!(time_average(&t, 1.0).is_err());
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[2.0, 9.0, 1.0]), 2.0);
    }

    mod props {
        use super::super::*;
        use crate::primitives::{generate_stream, Family, InitialConditions, SystemParams};
        use crate::trajectory::Breakpoint;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn refinement_leaves_time_averages_unchanged(seed in any::<u64>(), cuts in prop::collection::vec(0.0f64..30.0, 1..20)) {
                let p = SystemParams::from_family(9.0, 0.3, 0.2, 0.2, Family::Markovian).unwrap();
                let prim = generate_stream(&p, seed, 30.0).unwrap();
                let traj = crate::ticket_queue::simulate_ticket(&p, &prim, &InitialConditions::empty(9.0), 30.0).unwrap();
                let mut refined = traj.clone();
                for t in cuts {
                    let k = refined.path.partition_point(|b| b.time <= t);
                    if k == 0 || refined.path[k - 1].time == t {
                        continue;
                    }
                    let prev = refined.path[k - 1];
                    let bp = Breakpoint { time: t, workload: refined.drained(&prev, t), ..prev };
                    refined.path.insert(k, bp);
                }
                for warmup in [0.0, 0.2, 0.5] {
                    let a = time_average(&traj, warmup).unwrap();
                    let b = time_average(&refined, warmup).unwrap();
                    prop_assert_eq!(a.q_bar.to_bits(), b.q_bar.to_bits());
                    prop_assert_eq!(a.x_bar.to_bits(), b.x_bar.to_bits());
                    prop_assert_eq!(a.idle_frac.to_bits(), b.idle_frac.to_bits());
                    prop_assert!((a.w_bar - b.w_bar).abs() <= 1e-12 * a.w_bar.max(1.0));
                }
            }

            #[test]
            fn ci_is_translation_and_scale_equivariant(
                values in prop::collection::vec(-100.0f64..100.0, 2..30),
                shift in -50.0f64..50.0,
                scale in 0.1f64..10.0,
            ) {
                let (m, hw) = ci(&values, 0.95).unwrap();
                let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
                let (ms, hws) = ci(&shifted, 0.95).unwrap();
                prop_assert!((ms - (m + shift)).abs() < 1e-9);
                prop_assert!((hws - hw).abs() < 1e-9 * hw.max(1.0));
                let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
                let (mk, hwk) = ci(&scaled, 0.95).unwrap();
                prop_assert!((mk - m * scale).abs() < 1e-9 * (m * scale).abs().max(1.0));
                prop_assert!((hwk - hw * scale).abs() < 1e-9 * (hw * scale).max(1.0));
            }

            #[test]
            fn fractions_stay_in_the_unit_interval(seed in any::<u64>(), beta in -1.0f64..1.0) {
                let p = SystemParams::from_family(16.0, beta, 0.5, 0.5, Family::LognormalUniform).unwrap();
                let prim = generate_stream(&p, seed, 25.0).unwrap();
                let traj = crate::standard_queue::simulate_standard(&p, &prim, &InitialConditions::empty(16.0), 25.0).unwrap();
                let m = time_average(&traj, 0.2).unwrap();
                prop_assert!(m.r_frac >= 0.0 && m.b_frac >= 0.0 && m.r_frac + m.b_frac <= 1.0);
                prop_assert!(m.q_bar >= 0.0 && m.w_bar >= 0.0);
                prop_assert!((0.0..=1.0).contains(&m.idle_frac));
            }
        }
    }
}
