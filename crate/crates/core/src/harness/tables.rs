//! Regeneration of the four comparison tables: simulated Q, W, R, B for both
//! disciplines next to the closed-form approximations.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::coupling::run_coupled_pair_with;
use crate::error::{Error, Result};
use crate::primitives::{derive_seed, generate_stream, Family, InitialConditions, SystemParams};
use crate::rou::{RouInputs, RouSummary};
use crate::stats::{time_average, MetricSummary, ReplicationSet, SimMetrics, DEFAULT_LEVEL, DEFAULT_WARMUP};
use crate::trajectory::Discipline;

pub const RHO_GRID: [f64; 6] = [1.1, 1.01, 1.0, 0.99, 0.9, 0.8];
pub const MU_GRID: [f64; 3] = [100.0, 25.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fidelity {
    Smoke,
    Desk,
    Full,
}

impl FromStr for Fidelity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smoke" => Ok(Fidelity::Smoke),
            "desk" => Ok(Fidelity::Desk),
            "full" => Ok(Fidelity::Full),
            other => Err(Error::usage(format!("unknown fidelity `{other}` (smoke, desk, full)"))),
        }
    }
}

impl Fidelity {
    pub fn replications(self) -> usize {
        match self {
            Fidelity::Smoke => 2,
            Fidelity::Desk => 50,
            Fidelity::Full => 200,
        }
    }

    /// Run length at service rate `mu`.
    pub fn horizon(self, mu: f64) -> f64 {
        let small = mu < 25.0;
        match self {
            Fidelity::Smoke => 50.0,
            Fidelity::Desk if small => 2000.0,
            Fidelity::Desk => 500.0,
            Fidelity::Full if small => 8000.0,
            Fidelity::Full => 2000.0,
        }
    }
}

/// One grid point of a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub rho: f64,
    pub mu: f64,
    /// β = (ρ − 1)√μ, so that λ = μ + β√μ = ρμ.
    pub beta: f64,
    pub theta_b: f64,
    pub theta_r: f64,
    pub family: Family,
}

impl GridPoint {
    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::from_family(self.mu, self.beta, self.theta_b, self.theta_r, self.family)
    }
}

/// The 18 grid points of table `id`, in printed order.
pub fn table_grid(id: u32) -> Result<Vec<GridPoint>> {
    let (family, theta) = match id {
        1 => (Family::Markovian, 0.1),
        2 => (Family::LognormalUniform, 0.1),
        3 => (Family::Markovian, 1.0),
        4 => (Family::LognormalUniform, 1.0),
        _ => return Err(Error::usage(format!("unknown table id {id} (expected 1-4)"))),
    };
    Ok(RHO_GRID
        .iter()
        .flat_map(|&rho| {
            MU_GRID.iter().map(move |&mu| GridPoint {
                rho,
                mu,
                beta: round_beta((rho - 1.0) * mu.sqrt()),
                theta_b: theta,
                theta_r: theta,
                family,
            })
        })
        .collect())
}

/// Snap β to the decimal it is meant to be (0.1 × 10 = 1.0000000000000009).
fn round_beta(beta: f64) -> f64 {
    (beta * 1e9).round() / 1e9
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableConfig {
    pub id: u32,
    pub fidelity: Fidelity,
    pub replications: Option<usize>,
    pub horizon: Option<f64>,
    pub warmup: f64,
    pub level: f64,
    pub seed: u64,
}

impl TableConfig {
    pub fn new(id: u32, fidelity: Fidelity, seed: u64) -> Self {
        TableConfig {
            id,
            fidelity,
            replications: None,
            horizon: None,
            warmup: DEFAULT_WARMUP,
            level: DEFAULT_LEVEL,
            seed,
        }
    }

    pub fn replications(&self) -> usize {
        self.replications.unwrap_or_else(|| self.fidelity.replications())
    }

    pub fn horizon(&self, mu: f64) -> f64 {
        self.horizon.unwrap_or_else(|| self.fidelity.horizon(mu))
    }
}

/// Closed-form columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouColumns {
    pub q: f64,
    pub w: f64,
    pub r: f64,
    pub b: f64,
}

impl RouColumns {
    pub fn for_point(point: &GridPoint) -> Result<Self> {
        let params = point.params()?;
        let summary = RouSummary::new(&RouInputs::from_params(&params))?;
        Ok(RouColumns {
            q: summary.e_q,
            w: summary.workload(params.mu),
            r: summary.alpha1,
            b: summary.gamma1,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub discipline: Discipline,
    pub point: GridPoint,
    pub sim: MetricSummary,
    pub rou: RouColumns,
}

/// Per-replication metrics of both disciplines on common random numbers.
fn replicate(cfg: &TableConfig, index: usize, point: &GridPoint, rep: usize) -> Result<(SimMetrics, SimMetrics)> {
    let params = point.params()?;
    let horizon = cfg.horizon(point.mu);
    let seed = derive_seed(cfg.seed, &[cfg.id as u64, index as u64, rep as u64]);
    let primitives = generate_stream(&params, seed, horizon)?;
    let pair = run_coupled_pair_with(&params, &primitives, &InitialConditions::empty(params.mu), horizon)?;
    Ok((
        time_average(&pair.standard, cfg.warmup)?,
        time_average(&pair.ticket, cfg.warmup)?,
    ))
}

/// Two rows (standard, ticket) per grid point.
pub fn run_table(cfg: &TableConfig) -> Result<Vec<TableRow>> {
    let grid = table_grid(cfg.id)?;
    let reps = cfg.replications();
    if reps < 2 {
        return Err(Error::usage("at least 2 replications are needed for confidence intervals"));
    }
    if !(0.0..1.0).contains(&cfg.warmup) {
        return Err(Error::usage(format!("warmup must lie in [0, 1), got {}", cfg.warmup)));
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..reps).map(move |r| (g, r))).collect();
    let results = jobs
        .par_iter()
        .map(|&(g, r)| replicate(cfg, g, &grid[g], r))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(2 * grid.len());
    for (g, point) in grid.iter().enumerate() {
        let chunk = &results[g * reps..(g + 1) * reps];
        let rou = RouColumns::for_point(point)?;
        let standard = ReplicationSet::new(chunk.iter().map(|p| p.0).collect(), cfg.level);
        let ticket = ReplicationSet::new(chunk.iter().map(|p| p.1).collect(), cfg.level);
        for (discipline, set) in [(Discipline::Standard, standard), (Discipline::Ticket, ticket)] {
            rows.push(TableRow {
                discipline,
                point: *point,
                sim: set.summary()?,
                rou,
            });
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str =
    "discipline,rho,mu,beta,theta_b,theta_r,Q,Q_hw,W,W_hw,R,R_hw,B,B_hw,Q_rou,W_rou,R_rou,B_rou";

pub fn write_csv<W: Write>(rows: &[TableRow], mut out: W, header: bool) -> Result<()> {
    if header {
        writeln!(out, "{CSV_HEADER}")?;
    }
    for row in rows {
        let p = &row.point;
        let s = &row.sim;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.discipline.label(),
            p.rho,
            p.mu,
            p.beta,
            p.theta_b,
            p.theta_r,
            s.q.mean,
            s.q.half_width,
            s.w.mean,
            s.w.half_width,
            s.r.mean,
            s.r.half_width,
            s.b.mean,
            s.b.half_width,
            row.rou.q,
            row.rou.w,
            row.rou.r,
            row.rou.b
        )?;
    }
    Ok(())
}

pub fn write_markdown<W: Write>(rows: &[TableRow], mut out: W, title: &str) -> Result<()> {
    writeln!(out, "### {title}")?;
    writeln!(out)?;
    writeln!(out, "| disc | ρ | μ | β | Q | W | R | B | Q_ROU | W_ROU | R_ROU | B_ROU |")?;
    writeln!(out, "|---|---|---|---|---|---|---|---|---|---|---|---|")?;
    for row in rows {
        let p = &row.point;
        let s = &row.sim;
        writeln!(
            out,
            "| {} | {} | {} | {} | {:.2} ± {:.2} | {:.4} ± {:.4} | {:.4} ± {:.4} | {:.4} ± {:.4} | {:.2} | {:.4} | {:.4} | {:.4} |",
            row.discipline.label(),
            p.rho,
            p.mu,
            p.beta,
            s.q.mean,
            s.q.half_width,
            s.w.mean,
            s.w.half_width,
            s.r.mean,
            s.r.half_width,
            s.b.mean,
            s.b.half_width,
            row.rou.q,
            row.rou.w,
            row.rou.r,
            row.rou.b
        )?;
    }
    writeln!(out)?;
    Ok(())
}
