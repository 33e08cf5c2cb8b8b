//! Sample paths produced by the simulators.
//!
//! Queue length Q and the unresolved-ticket count X are piecewise constant.
//! The workload W jumps at admissions and otherwise drains at rate one while
//! positive, so each breakpoint stores its right-limit value and the path in
//! between is `max(0, W_k - (t - t_k))`.

use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Discipline {
    Standard,
    Ticket,
    /// Ticket queue driven by racing exponential clocks.
    TicketMarkov,
}

impl Discipline {
    pub fn label(self) -> &'static str {
        match self {
            Discipline::Standard => "S",
            Discipline::Ticket => "T",
            Discipline::TicketMarkov => "T-markov",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub time: f64,
    /// Q(t): physical line length (standard) or perceived ticket count (ticket).
    pub queue: u32,
    /// W(t) right after the event.
    pub workload: f64,
    /// X(t): abandoned tickets whose holder already left but which are not yet resolved.
    pub unresolved: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Balked,
    Served,
    Reneged,
    /// Still waiting at the horizon (only the clock-driven ticket simulator leaves
    /// outcomes undecided; the event simulators decide at arrival).
    Pending,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalRecord {
    pub time: f64,
    pub outcome: Outcome,
}

/// Counting processes evaluated at the horizon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// A(t)
    pub arrivals: u64,
    /// B(t)
    pub balked: u64,
    /// R(t): abandonments of post-zero arrivals detected by t.
    pub reneged: u64,
    /// R̂(t)
    pub reneged_initial: u64,
    /// S: completions of post-zero arrivals.
    pub served: u64,
    /// Ŝ(t)
    pub served_initial: u64,
    /// Q̂(t)
    pub initial_remaining: u64,
    /// Q(t)
    pub in_system: u64,
    /// X(t)
    pub unresolved: u64,
}

/// Consistency checks collected while a run executes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Audit {
    /// Abandoned tickets whose resolution instant differed from arrival + W(arrival-).
    pub resolution_mismatches: u64,
    pub max_resolution_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub discipline: Discipline,
    pub mu: f64,
    pub horizon: f64,
    pub path: Vec<Breakpoint>,
    pub arrivals: Vec<ArrivalRecord>,
    pub counters: Counters,
    pub audit: Audit,
    /// `false` when the workload channel is a piecewise-constant proxy.
    pub workload_drains: bool,
}

/// Time integrals of the path channels over a window.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Integrals {
    pub queue: f64,
    pub workload: f64,
    pub unresolved: f64,
    pub idle: f64,
}

/// A maximal run of a piecewise-constant channel.
#[derive(Default)]
struct Run {
    value: f64,
    start: f64,
    end: f64,
    open: bool,
}

impl Run {
    /// Extend by the segment `[a, b]` carrying `value`; returns the integral of
    /// the previous run if this segment starts a new one.
    fn extend(&mut self, value: f64, a: f64, b: f64) -> f64 {
        if self.open && self.value == value && self.end == a {
            self.end = b;
            return 0.0;
        }
        let done = self.flush();
        *self = Run {
            value,
            start: a,
            end: b,
            open: true,
        };
        done
    }

    fn flush(&mut self) -> f64 {
        if !self.open {
            return 0.0;
        }
        self.open = false;
        self.value * (self.end - self.start)
    }
}

impl Trajectory {
    pub(crate) fn new(discipline: Discipline, mu: f64, horizon: f64, drains: bool) -> Self {
        Trajectory {
            discipline,
            mu,
            horizon,
            path: Vec::new(),
            arrivals: Vec::new(),
            counters: Counters::default(),
            audit: Audit::default(),
            workload_drains: drains,
        }
    }

    /// Append the state in force from `time` on. Several events at one instant
    /// collapse into a single breakpoint holding the final state.
    pub(crate) fn record(&mut self, time: f64, queue: u32, workload: f64, unresolved: u32) {
        let bp = Breakpoint {
            time,
            queue,
            workload,
            unresolved,
        };
        match self.path.last_mut() {
            Some(last) if last.time == time => *last = bp,
            Some(last)
                if last.queue == queue
                    && last.unresolved == unresolved
                    && self.workload_drains
                    && workload == (last.workload - (time - last.time)).max(0.0) =>
            {
                // nothing changed; keep the path sparse
            }
            _ => self.path.push(bp),
        }
    }

    fn index_at(&self, t: f64) -> usize {
        // last breakpoint with time <= t
        self.path.partition_point(|b| b.time <= t).saturating_sub(1)
    }

    pub(crate) fn drained(&self, bp: &Breakpoint, t: f64) -> f64 {
        if self.workload_drains {
            (bp.workload - (t - bp.time)).max(0.0)
        } else {
            bp.workload
        }
    }

    pub fn queue_at(&self, t: f64) -> u32 {
        self.path[self.index_at(t)].queue
    }

    pub fn unresolved_at(&self, t: f64) -> u32 {
        self.path[self.index_at(t)].unresolved
    }

    pub fn workload_at(&self, t: f64) -> f64 {
        let bp = &self.path[self.index_at(t)];
        self.drained(bp, t)
    }

    /// End of the segment starting at breakpoint `k`.
    pub fn segment_end(&self, k: usize) -> f64 {
        self.path.get(k + 1).map_or(self.horizon, |b| b.time)
    }

    /// Integrals of Q, W, X and 1(Q = 0) over `[from, to]`.
    ///
    /// The piecewise-constant channels are integrated over maximal runs of
    /// equal value, so inserting redundant breakpoints leaves them bit-identical.
    pub fn integrate(&self, from: f64, to: f64) -> Integrals {
        let mut acc = Integrals::default();
        let mut q_run = Run::default();
        let mut x_run = Run::default();
        let mut idle_run = Run::default();
        let start = self.index_at(from);
        for k in start..self.path.len() {
            let bp = &self.path[k];
            if bp.time >= to {
                break;
            }
            let a = bp.time.max(from);
            let b = self.segment_end(k).min(to);
            if b <= a {
                continue;
            }
            acc.queue += q_run.extend(bp.queue as f64, a, b);
            acc.unresolved += x_run.extend(bp.unresolved as f64, a, b);
            acc.idle += idle_run.extend(if bp.queue == 0 { 1.0 } else { 0.0 }, a, b);
            acc.workload += if self.workload_drains {
                // ∫ max(0, w - (τ - t_k)) dτ over [a, b]
                let zero_at = bp.time + bp.workload;
                let b_eff = b.min(zero_at);
                if b_eff > a {
                    let (x, y) = (a - bp.time, b_eff - bp.time);
                    bp.workload * (y - x) - 0.5 * (y * y - x * x)
                } else {
                    0.0
                }
            } else {
                bp.workload * (b - a)
            };
        }
        acc.queue += q_run.flush();
        acc.unresolved += x_run.flush();
        acc.idle += idle_run.flush();
        acc
    }

    /// T(t) = ∫₀ᵗ 1(Q(s) > 0) ds.
    pub fn busy_time(&self, t: f64) -> f64 {
        t - self.integrate(0.0, t).idle
    }

    pub fn idle_time(&self, t: f64) -> f64 {
        self.integrate(0.0, t).idle
    }

    /// Busy fraction T(t)/t over the whole run.
    pub fn utilization(&self) -> f64 {
        if self.horizon > 0.0 {
            (self.busy_time(self.horizon) / self.horizon).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Time-average of X over the whole run.
    pub fn mean_unresolved(&self) -> f64 {
        self.integrate(0.0, self.horizon).unresolved / self.horizon
    }

    /// Breakpoint CSV: `time,Q,W` plus `X` for ticket runs.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let with_x = self.discipline != Discipline::Standard;
        if with_x {
            writeln!(out, "time,Q,W,X")?;
        } else {
            writeln!(out, "time,Q,W")?;
        }
        for bp in &self.path {
            if with_x {
                writeln!(out, "{},{},{},{}", bp.time, bp.queue, bp.workload, bp.unresolved)?;
            } else {
                writeln!(out, "{},{},{}", bp.time, bp.queue, bp.workload)?;
            }
        }
        Ok(())
    }

    /// Counter record as `key,value` lines.
    pub fn write_counters<W: Write>(&self, mut out: W) -> Result<()> {
        let c = &self.counters;
        writeln!(out, "key,value")?;
        writeln!(out, "discipline,{}", self.discipline.label())?;
        writeln!(out, "horizon,{}", self.horizon)?;
        for (k, v) in [
            ("A", c.arrivals),
            ("B", c.balked),
            ("R", c.reneged),
            ("R_hat", c.reneged_initial),
            ("S", c.served),
            ("S_hat", c.served_initial),
            ("Q_hat", c.initial_remaining),
            ("Q", c.in_system),
            ("X", c.unresolved),
        ] {
            writeln!(out, "{k},{v}")?;
        }
        writeln!(out, "T,{}", self.busy_time(self.horizon))?;
        writeln!(out, "I,{}", self.idle_time(self.horizon))?;
        Ok(())
    }
}
