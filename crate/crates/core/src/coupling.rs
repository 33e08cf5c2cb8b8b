//! Paired runs of both disciplines on one primitive stream, and the
//! diffusion-scaling experiments built on them.
//!
//! At scale n the service rate is μⁿ = n·μ_base and the arrival rate is
//! λⁿ = μⁿ + β√μⁿ, so with μ_base = 1 this is λⁿ = n + β√n. Scaled processes
//! are Q̃ = Q/√n and W̃ = √n·W.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::primitives::{derive_seed, generate_stream, Family, InitialConditions, SystemParams};
use crate::standard_queue::simulate_standard;
use crate::stats::{median, spearman, DEFAULT_WARMUP};
use crate::ticket_queue::simulate_ticket;
use crate::trajectory::{Breakpoint, Trajectory};

#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub standard: Trajectory,
    pub ticket: Trajectory,
    /// sup |Q_S − Q_T| over `[0, horizon]`.
    pub sup_gap_q: f64,
    /// sup |W_S − W_T| over `[0, horizon]`.
    pub sup_gap_w: f64,
}

/// Walk the merged breakpoint grid of two paths. For each maximal interval
/// on which neither path has a breakpoint, `visit` receives the interval and
/// the breakpoint in force on each path.
fn merged_segments(
    a: &Trajectory,
    b: &Trajectory,
    horizon: f64,
    mut visit: impl FnMut(f64, f64, &Breakpoint, &Breakpoint),
) {
    let (pa, pb) = (&a.path, &b.path);
    if pa.is_empty() || pb.is_empty() {
        return;
    }
    let (mut i, mut j) = (0usize, 0usize);
    let mut start = pa[0].time.max(pb[0].time);
    while start < horizon {
        while i + 1 < pa.len() && pa[i + 1].time <= start {
            i += 1;
        }
        while j + 1 < pb.len() && pb[j + 1].time <= start {
            j += 1;
        }
        let next_a = pa.get(i + 1).map_or(f64::INFINITY, |p| p.time);
        let next_b = pb.get(j + 1).map_or(f64::INFINITY, |p| p.time);
        let end = next_a.min(next_b).min(horizon);
        visit(start, end, &pa[i], &pb[j]);
        start = end;
    }
}

/// Candidate extremum points of |W_a − W_b| on `[s, e]`: both ends and the
/// instants where either workload reaches zero.
fn workload_candidates(s: f64, e: f64, ba: &Breakpoint, bb: &Breakpoint) -> [f64; 4] {
    let clip = |z: f64| if z > s && z < e { z } else { s };
    [s, e, clip(ba.time + ba.workload), clip(bb.time + bb.workload)]
}

/// Both disciplines from the same primitives and initial conditions.
pub fn run_coupled_pair_with(
    params: &SystemParams,
    primitives: &crate::primitives::CustomerPrimitives,
    init: &InitialConditions,
    horizon: f64,
) -> Result<CoupledPair> {
    let standard = simulate_standard(params, primitives, init, horizon)?;
    let ticket = simulate_ticket(params, primitives, init, horizon)?;
    let mut sup_gap_q: f64 = 0.0;
    let mut sup_gap_w: f64 = 0.0;
    merged_segments(&standard, &ticket, horizon, |s, e, ba, bb| {
        sup_gap_q = sup_gap_q.max((ba.queue as f64 - bb.queue as f64).abs());
        for t in workload_candidates(s, e, ba, bb) {
            let gap = (standard.drained(ba, t) - ticket.drained(bb, t)).abs();
            sup_gap_w = sup_gap_w.max(gap);
        }
    });
    Ok(CoupledPair {
        standard,
        ticket,
        sup_gap_q,
        sup_gap_w,
    })
}

/// Coupled pair from an empty start on the stream generated by `seed`.
pub fn run_coupled_pair(params: &SystemParams, seed: u64, horizon: f64) -> Result<CoupledPair> {
    let primitives = generate_stream(params, seed, horizon)?;
    run_coupled_pair_with(params, &primitives, &InitialConditions::empty(params.mu), horizon)
}

/// sup over `[0, t]` of |Q/√n − μ_base·√n·W|, i.e. |Q − μⁿW|/√n, with n = μⁿ/μ_base.
pub fn check_state_space_collapse(traj: &Trajectory, n: f64) -> f64 {
    let scale = n.sqrt();
    let mut sup: f64 = 0.0;
    for (k, bp) in traj.path.iter().enumerate() {
        if bp.time >= traj.horizon {
            break;
        }
        let end = traj.segment_end(k).min(traj.horizon);
        // Q − μW is monotone on a segment, so the ends suffice
        for t in [bp.time, end] {
            let gap = (bp.queue as f64 - traj.mu * traj.drained(bp, t)).abs();
            sup = sup.max(gap);
        }
    }
    sup / scale
}

/// Busy fraction T(t)/t.
pub fn utilization(traj: &Trajectory) -> f64 {
    traj.utilization()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    /// Scale indices, strictly increasing.
    pub n_values: Vec<u32>,
    pub beta: f64,
    pub mu_base: f64,
    pub horizon: f64,
    pub seeds: Vec<u64>,
    pub theta_b: f64,
    pub theta_r: f64,
    pub family: Family,
}

impl ScalingConfig {
    pub fn new(n_values: Vec<u32>, beta: f64, theta_b: f64, theta_r: f64, seeds: Vec<u64>) -> Self {
        ScalingConfig {
            n_values,
            beta,
            mu_base: 1.0,
            horizon: 50.0,
            seeds,
            theta_b,
            theta_r,
            family: Family::Markovian,
        }
    }

    pub fn params(&self, n: u32) -> Result<SystemParams> {
        SystemParams::from_family(
            self.mu_base * n as f64,
            self.beta,
            self.theta_b,
            self.theta_r,
            self.family,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.n_values.len() < 3 {
            return Err(Error::usage(format!(
                "a scaling series needs at least 3 scale values, got {}",
                self.n_values.len()
            )));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) || self.n_values[0] == 0 {
            return Err(Error::usage("scale values must be positive and strictly increasing"));
        }
        if self.seeds.len() < 10 {
            return Err(Error::usage(format!(
                "a scaling series needs at least 10 seeds, got {}",
                self.seeds.len()
            )));
        }
        if !(self.mu_base > 0.0) {
            return Err(Error::usage("mu_base must be positive"));
        }
        Ok(())
    }
}

/// One (n, seed) cell of a scaling series, in scaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub n: u32,
    pub seed: u64,
    pub gap_q: f64,
    pub gap_w: f64,
    pub collapse_standard: f64,
    pub collapse_ticket: f64,
    pub utilization_standard: f64,
    pub utilization_ticket: f64,
    /// Post-warmup time-average of Q̃ for the standard queue.
    pub level_standard: f64,
    pub level_ticket: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingSummary {
    pub n: u32,
    pub median_gap_q: f64,
    pub median_gap_w: f64,
    pub median_collapse_standard: f64,
    pub median_collapse_ticket: f64,
    pub mean_idle_standard: f64,
    pub mean_idle_ticket: f64,
    pub median_level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub summary: Vec<ScalingSummary>,
    /// Spearman correlation with n of each per-n statistic.
    pub trend_gap_q: f64,
    pub trend_collapse_standard: f64,
    pub trend_collapse_ticket: f64,
    pub trend_idle_standard: f64,
    pub trend_idle_ticket: f64,
}

fn scaling_row(cfg: &ScalingConfig, n: u32, seed: u64) -> Result<ScalingRow> {
    let params = cfg.params(n)?;
    let run_seed = derive_seed(seed, &[n as u64]);
    let pair = run_coupled_pair(&params, run_seed, cfg.horizon)?;
    let root_n = (params.mu / cfg.mu_base).sqrt();
    let warm = DEFAULT_WARMUP * cfg.horizon;
    let span = cfg.horizon - warm;
    let level = |t: &Trajectory| t.integrate(warm, cfg.horizon).queue / span / root_n;
    let n_eff = params.mu / cfg.mu_base;
    Ok(ScalingRow {
        n,
        seed,
        gap_q: pair.sup_gap_q / root_n,
        gap_w: pair.sup_gap_w * root_n,
        collapse_standard: check_state_space_collapse(&pair.standard, n_eff),
        collapse_ticket: check_state_space_collapse(&pair.ticket, n_eff),
        utilization_standard: utilization(&pair.standard),
        utilization_ticket: utilization(&pair.ticket),
        level_standard: level(&pair.standard),
        level_ticket: level(&pair.ticket),
    })
}

pub fn run_scaling_series(cfg: &ScalingConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let cells: Vec<(u32, u64)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(n, s)| scaling_row(cfg, n, s))
        .collect::<Result<Vec<_>>>()?;

    let summary: Vec<ScalingSummary> = cfg
        .n_values
        .iter()
        .map(|&n| {
            let at: Vec<&ScalingRow> = rows.iter().filter(|r| r.n == n).collect();
            let col = |f: fn(&ScalingRow) -> f64| at.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
            ScalingSummary {
                n,
                median_gap_q: median(&col(|r| r.gap_q)),
                median_gap_w: median(&col(|r| r.gap_w)),
                median_collapse_standard: median(&col(|r| r.collapse_standard)),
                median_collapse_ticket: median(&col(|r| r.collapse_ticket)),
                mean_idle_standard: mean(col(|r| 1.0 - r.utilization_standard)),
                mean_idle_ticket: mean(col(|r| 1.0 - r.utilization_ticket)),
                median_level: median(&col(|r| r.level_standard)),
            }
        })
        .collect();

    let ns: Vec<f64> = summary.iter().map(|s| s.n as f64).collect();
    let trend = |f: fn(&ScalingSummary) -> f64| spearman(&ns, &summary.iter().map(f).collect::<Vec<_>>());
    Ok(ScalingReport {
        trend_gap_q: trend(|s| s.median_gap_q),
        trend_collapse_standard: trend(|s| s.median_collapse_standard),
        trend_collapse_ticket: trend(|s| s.median_collapse_ticket),
        trend_idle_standard: trend(|s| s.mean_idle_standard),
        trend_idle_ticket: trend(|s| s.mean_idle_ticket),
        rows,
        summary,
    })
}

impl ScalingReport {
    /// Long-form CSV, one line per (n, seed).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "n,seed,gap_Q,gap_W,collapse_gap_S,collapse_gap_T,utilization_S,utilization_T,level_S,level_T"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.seed,
                r.gap_q,
                r.gap_w,
                r.collapse_standard,
                r.collapse_ticket,
                r.utilization_standard,
                r.utilization_ticket,
                r.level_standard,
                r.level_ticket
            )?;
        }
        Ok(())
    }

    pub fn write_markdown<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "| n | median gap Q | median gap W | median collapse S | median collapse T | idle S | idle T | median level |"
        )?;
        writeln!(out, "|---|---|---|---|---|---|---|---|")?;
        for s in &self.summary {
            writeln!(
                out,
                "| {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} |",
                s.n,
                s.median_gap_q,
                s.median_gap_w,
                s.median_collapse_standard,
                s.median_collapse_ticket,
                s.mean_idle_standard,
                s.mean_idle_ticket,
                s.median_level
            )?;
        }
        writeln!(out)?;
        writeln!(
            out,
            "Spearman vs n: gap Q {:.3}, collapse S {:.3}, collapse T {:.3}, idle S {:.3}, idle T {:.3}",
            self.trend_gap_q,
            self.trend_collapse_standard,
            self.trend_collapse_ticket,
            self.trend_idle_standard,
            self.trend_idle_ticket
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{Customer, CustomerPrimitives, DistributionSpec, Law, Role};

    fn patient_params(lambda: f64, mu: f64) -> SystemParams {
        let a = DistributionSpec::new(Law::Exponential { rate: 1.0 }, Role::Interarrival).unwrap();
        let s = DistributionSpec::new(Law::Exponential { rate: 1.0 }, Role::Service).unwrap();
        let b = DistributionSpec::new(Law::Never, Role::Balking).unwrap();
        let d = DistributionSpec::new(Law::Never, Role::Deadline).unwrap();
        SystemParams::new(lambda, mu, a, s, b, d).unwrap()
    }

    #[test]
    fn micro_trace_gap_is_one() {
        let inf = f64::INFINITY;
        let prim = CustomerPrimitives::from_customers(
            vec![
                Customer { arrival: 1.0, service: 2.0, balk: inf, deadline: inf },
                Customer { arrival: 1.5, service: 1.0, balk: inf, deadline: 1.0 },
            ],
            4.0,
        )
        .unwrap();
        let p = patient_params(1.0, 1.0);
        let pair = run_coupled_pair_with(&p, &prim, &InitialConditions::empty(1.0), 4.0).unwrap();
        assert_eq!(pair.sup_gap_q, 1.0);
        assert_eq!(pair.sup_gap_w, 0.0);
    }

    #[test]
    fn patient_customers_have_no_gap() {
        let p = patient_params(9.0, 10.0);
        let pair = run_coupled_pair(&p, 11, 100.0).unwrap();
        assert_eq!(pair.sup_gap_q, 0.0);
        assert_eq!(pair.sup_gap_w, 0.0);
        let ta: Vec<f64> = pair.standard.arrivals.iter().map(|a| a.time).collect();
        let tb: Vec<f64> = pair.ticket.arrivals.iter().map(|a| a.time).collect();
        assert_eq!(ta, tb);
    }

    #[test]
    fn deterministic_service_collapse_bound() {
        let n = 25.0;
        let customers = (1..200)
            .map(|k| Customer {
                arrival: k as f64 * 0.035,
                service: 1.0,
                balk: f64::INFINITY,
                deadline: f64::INFINITY,
            })
            .collect();
        let prim = CustomerPrimitives::from_customers(customers, 8.0).unwrap();
        let p = patient_params(n, n);
        let traj = simulate_standard(&p, &prim, &InitialConditions::empty(n), 8.0).unwrap();
        let gap = check_state_space_collapse(&traj, n);
        assert!(gap <= 1.0 / n.sqrt() + 1e-12, "gap {gap}");
        assert!(gap > 0.0);
    }

    #[test]
    fn empty_system_has_no_collapse_gap() {
        let prim = CustomerPrimitives::from_customers(vec![], 5.0).unwrap();
        let p = patient_params(1.0, 1.0);
        let traj = simulate_standard(&p, &prim, &InitialConditions::empty(1.0), 5.0).unwrap();
        assert_eq!(check_state_space_collapse(&traj, 1.0), 0.0);
        assert_eq!(utilization(&traj), 0.0);
    }

    #[test]
    fn series_needs_three_scales_and_ten_seeds() {
        let cfg = ScalingConfig::new(vec![4, 25], 0.0, 0.1, 0.1, (0..10).collect());
        assert!(matches!(run_scaling_series(&cfg), Err(Error::Usage(_))));
        let cfg = ScalingConfig::new(vec![4, 25, 100], 0.0, 0.1, 0.1, (0..5).collect());
        assert!(matches!(run_scaling_series(&cfg), Err(Error::Usage(_))));
    }

    #[test]
    fn no_impatience_series_has_zero_gap() {
        let mut cfg = ScalingConfig::new(vec![4, 16, 64], -0.5, 0.0, 0.0, (0..10).collect());
        cfg.horizon = 20.0;
        let report = run_scaling_series(&cfg).unwrap();
        assert!(report.rows.iter().all(|r| r.gap_q == 0.0));
        assert!(report.summary.iter().all(|s| s.mean_idle_standard > 0.0));
    }
}
