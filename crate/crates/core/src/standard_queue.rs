//! The standard queue: a physical line where an abandonment is visible the
//! instant the customer walks away.
//!
//! Whether a joining customer abandons is decided at arrival by comparing the
//! deadline with the workload it sees; only the queue-length decrement is
//! deferred to `t_i + d_i`. Initial jobs are served first, in order, and an
//! initial job that will abandon leaves at its residual deadline.

use crate::calendar::{Calendar, EventKey, EventKind};
use crate::error::{Error, Result};
use crate::primitives::{CustomerPrimitives, InitialConditions, SystemParams};
use crate::trajectory::{ArrivalRecord, Discipline, Outcome, Trajectory};

/// A customer who sees `q_seen` jobs joins iff `b > q_seen / μ`.
pub fn balk_decision(b: f64, q_seen: u64, mu: f64) -> bool {
    b > q_seen as f64 / mu
}

/// `Some(d)` (abandon after `d`) iff `d ≤ w_seen`, otherwise `None`.
pub fn renege_decision_standard(d: f64, w_seen: f64) -> Option<f64> {
    if w_seen > 0.0 && d <= w_seen {
        Some(d)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Initial,
    Arrived,
}

pub(crate) fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::usage(format!("horizon must be positive and finite, got {horizon}")))
    }
}

pub fn simulate_standard(
    params: &SystemParams,
    primitives: &CustomerPrimitives,
    init: &InitialConditions,
    horizon: f64,
) -> Result<Trajectory> {
    check_horizon(horizon)?;
    let mu = params.mu;
    let mut traj = Trajectory::new(Discipline::Standard, mu, horizon, true);
    let mut calendar: Calendar<Job> = Calendar::new();

    for (i, job) in init.jobs.iter().enumerate() {
        if job.served {
            calendar.schedule(init.cumulative_work[i + 1], EventKind::Completion, Job::Initial);
        } else {
            calendar.schedule(job.residual_deadline, EventKind::Abandonment, Job::Initial);
        }
    }

    let mut queue = init.q0() as u64;
    let mut initial_remaining = queue;
    // time at which all admitted work is done; W(t) = (work_end - t)^+
    let mut work_end = init.w0();
    let c = &mut traj.counters;
    c.initial_remaining = initial_remaining;

    let workload = |work_end: f64, t: f64| (work_end - t).max(0.0);
    traj.record(0.0, queue as u32, workload(work_end, 0.0), 0);

    let customers = &primitives.customers;
    let mut next = 0usize;
    loop {
        let arrival_key = customers
            .get(next)
            .map(|c| EventKey::new(c.arrival, EventKind::Arrival));
        let take_calendar = match (calendar.peek(), arrival_key) {
            (Some(k), Some(a)) => k.precedes(&a),
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        let now = if take_calendar {
            calendar.peek().unwrap().time
        } else {
            arrival_key.unwrap().time
        };
        if now > horizon {
            break;
        }

        if take_calendar {
            let (key, job) = calendar.pop().unwrap();
            queue -= 1;
            match (key.kind, job) {
                (EventKind::Completion, Job::Initial) => {
                    traj.counters.served_initial += 1;
                    initial_remaining -= 1;
                }
                (EventKind::Completion, Job::Arrived) => traj.counters.served += 1,
                (EventKind::Abandonment, Job::Initial) => {
                    traj.counters.reneged_initial += 1;
                    initial_remaining -= 1;
                }
                (EventKind::Abandonment, Job::Arrived) => traj.counters.reneged += 1,
                (EventKind::Arrival, _) => unreachable!("arrivals are not calendared"),
            }
        } else {
            let cust = customers[next];
            next += 1;
            traj.counters.arrivals += 1;
            let outcome = if !balk_decision(cust.balk, queue, mu) {
                traj.counters.balked += 1;
                Outcome::Balked
            } else {
                queue += 1;
                let w_seen = workload(work_end, now);
                match renege_decision_standard(cust.deadline, w_seen) {
                    Some(offset) => {
                        calendar.schedule(now + offset, EventKind::Abandonment, Job::Arrived);
                        Outcome::Reneged
                    }
                    None => {
                        work_end = work_end.max(now) + cust.service / mu;
                        calendar.schedule(work_end, EventKind::Completion, Job::Arrived);
                        Outcome::Served
                    }
                }
            };
            traj.arrivals.push(ArrivalRecord { time: now, outcome });
        }
        traj.record(now, queue as u32, workload(work_end, now), 0);
    }

    let c = &mut traj.counters;
    c.in_system = queue;
    c.initial_remaining = initial_remaining;
    Ok(traj)
}
