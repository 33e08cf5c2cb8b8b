//! The ticket queue: joining customers take a numbered ticket and an abandoned
//! ticket stays on the board until it reaches the front.
//!
//! The board is a sequence of ones (holder present) and zeros (holder gone).
//! When the ticket in service completes, the leading run of zeros is removed
//! in zero time and service moves to the next one. Arrivals see the perceived
//! length, which counts the zeros.

use std::collections::VecDeque;

use crate::calendar::{Calendar, EventKey, EventKind};
use crate::error::{Error, Result};
use crate::primitives::{open_unit, stream_rng, CustomerPrimitives, InitialConditions, Law, Stream, SystemParams};
use crate::standard_queue::{balk_decision, check_horizon};
use crate::trajectory::{ArrivalRecord, Discipline, Outcome, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ticket {
    /// Serial number on the board (initial jobs first, then arrivals).
    pub serial: usize,
    pub initial: bool,
    /// Flag: `true` for a one (holder present), `false` for a zero.
    pub present: bool,
    pub arrival: f64,
    /// W(t_i-) seen by the holder; the ticket reaches the front at `arrival + seen_workload`.
    pub seen_workload: f64,
    /// Completion time of a present ticket (NaN when service is clock-driven).
    pub completion: f64,
    /// Physical departure time of an abandoning holder (+∞ for present tickets).
    pub departure: f64,
}

impl Ticket {
    /// A one with a known completion time.
    pub fn present(serial: usize, arrival: f64, seen_workload: f64, completion: f64) -> Self {
        Ticket {
            serial,
            initial: false,
            present: true,
            arrival,
            seen_workload,
            completion,
            departure: f64::INFINITY,
        }
    }

    /// A zero whose holder leaves at `departure`.
    pub fn abandoned(serial: usize, arrival: f64, seen_workload: f64, departure: f64) -> Self {
        Ticket {
            serial,
            initial: false,
            present: false,
            arrival,
            seen_workload,
            completion: f64::NAN,
            departure,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TicketBoard {
    slots: VecDeque<Ticket>,
}

impl TicketBoard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, ticket: Ticket) {
        self.slots.push_back(ticket);
    }

    /// Perceived queue length: every outstanding ticket, zeros included.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn front(&self) -> Option<&Ticket> {
        self.slots.front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Ticket> {
        self.slots.iter()
    }

    /// The zero/one descriptor of the board.
    pub fn flags(&self) -> Vec<u8> {
        self.slots.iter().map(|t| t.present as u8).collect()
    }

    /// Remove the front ticket if `front_completed`, then every leading zero.
    /// Each removed zero is passed to `on_resolved`; the completed ticket is returned.
    pub fn resolve_front_with(
        &mut self,
        front_completed: bool,
        mut on_resolved: impl FnMut(Ticket),
    ) -> Option<Ticket> {
        let completed = if front_completed {
            let t = self.slots.pop_front();
            debug_assert!(t.is_none_or(|t| t.present), "completed a zero ticket");
            t
        } else {
            None
        };
        while let Some(front) = self.slots.front() {
            if front.present {
                break;
            }
            on_resolved(self.slots.pop_front().unwrap());
        }
        completed
    }

    pub fn resolve_front(&mut self, front_completed: bool) -> Resolution {
        let mut resolved = Vec::new();
        let completed = self.resolve_front_with(front_completed, |t| resolved.push(t));
        Resolution {
            completed,
            resolved,
            next: self.slots.front().copied(),
        }
    }

    /// Zeros whose holder has physically left by `t`.
    pub fn unresolved_abandoned(&self, t: f64) -> usize {
        self.slots
            .iter()
            .filter(|s| !s.present && s.departure <= t)
            .count()
    }

    /// Present tickets behind the one in service.
    fn waiting_present(&self) -> impl Iterator<Item = (usize, &Ticket)> {
        self.slots.iter().enumerate().skip(1).filter(|(_, t)| t.present)
    }

    fn slot_mut(&mut self, index: usize) -> &mut Ticket {
        &mut self.slots[index]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub completed: Option<Ticket>,
    /// Zeros removed at this instant; each one is a detected abandonment.
    pub resolved: Vec<Ticket>,
    /// New front of the board (now in service), if any.
    pub next: Option<Ticket>,
}

/// X(t) for a board snapshot.
pub fn unresolved_abandoned_count(board: &TicketBoard, t: f64) -> usize {
    board.unresolved_abandoned(t)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ZeroState {
    OnBoard,
    Departed,
    Resolved,
}

/// Bookkeeping for zeros shared by both ticket simulators.
struct ZeroTracker {
    state: Vec<ZeroState>,
    unresolved: u32,
}

impl ZeroTracker {
    fn new(capacity: usize) -> Self {
        ZeroTracker {
            state: vec![ZeroState::OnBoard; capacity],
            unresolved: 0,
        }
    }

    fn ensure(&mut self, serial: usize) {
        if serial >= self.state.len() {
            self.state.resize(serial + 1, ZeroState::OnBoard);
        }
    }

    fn depart(&mut self, serial: usize) {
        self.ensure(serial);
        if self.state[serial] == ZeroState::OnBoard {
            self.state[serial] = ZeroState::Departed;
            self.unresolved += 1;
        }
    }

    /// Returns `false` if the zero was resolved before its holder left.
    fn resolve(&mut self, serial: usize) -> bool {
        self.ensure(serial);
        let departed = self.state[serial] == ZeroState::Departed;
        if departed {
            self.unresolved -= 1;
        }
        self.state[serial] = ZeroState::Resolved;
        departed
    }
}

pub fn simulate_ticket(
    params: &SystemParams,
    primitives: &CustomerPrimitives,
    init: &InitialConditions,
    horizon: f64,
) -> Result<Trajectory> {
    check_horizon(horizon)?;
    let mu = params.mu;
    let mut traj = Trajectory::new(Discipline::Ticket, mu, horizon, true);
    let q0 = init.q0();
    let customers = &primitives.customers;

    let mut board = TicketBoard::new();
    let mut departures: Calendar<usize> = Calendar::new();
    let mut zeros = ZeroTracker::new(q0 + customers.len());
    let mut initial_remaining = q0 as u64;

    for (i, job) in init.jobs.iter().enumerate() {
        let seen = init.cumulative_work[i];
        let mut ticket = if job.served {
            Ticket::present(i, 0.0, seen, init.cumulative_work[i + 1])
        } else {
            departures.schedule(job.residual_deadline, EventKind::Abandonment, i);
            Ticket::abandoned(i, 0.0, seen, job.residual_deadline)
        };
        ticket.initial = true;
        board.push(ticket);
    }
    let mut work_end = init.w0();
    let workload = |work_end: f64, t: f64| (work_end - t).max(0.0);

    // Handles the zeros removed at `now` (the run behind a completion).
    let resolve = |ticket: Ticket,
                       now: f64,
                       traj: &mut Trajectory,
                       zeros: &mut ZeroTracker,
                       initial_remaining: &mut u64| {
        if ticket.initial {
            traj.counters.reneged_initial += 1;
            *initial_remaining -= 1;
        } else {
            traj.counters.reneged += 1;
        }
        let departed = zeros.resolve(ticket.serial);
        let error = (now - (ticket.arrival + ticket.seen_workload)).abs();
        if !departed || error > 1e-9 * now.abs().max(1.0) {
            traj.audit.resolution_mismatches += 1;
        }
        traj.audit.max_resolution_error = traj.audit.max_resolution_error.max(error);
    };

    // zeros at the very front (a residual deadline of zero)
    let mut leading = Vec::new();
    board.resolve_front_with(false, |t| leading.push(t));
    for t in leading {
        resolve(t, 0.0, &mut traj, &mut zeros, &mut initial_remaining);
    }
    traj.record(0.0, board.len() as u32, workload(work_end, 0.0), zeros.unresolved);

    let mut next = 0usize;
    let mut resolved_now = Vec::new();
    loop {
        let candidates = [
            departures.peek(),
            board
                .front()
                .map(|t| EventKey::new(t.completion, EventKind::Completion)),
            customers
                .get(next)
                .map(|c| EventKey::new(c.arrival, EventKind::Arrival)),
        ];
        let Some((which, key)) = candidates
            .iter()
            .enumerate()
            .filter_map(|(i, k)| k.map(|k| (i, k)))
            .reduce(|best, cand| if cand.1.precedes(&best.1) { cand } else { best })
        else {
            break;
        };
        let now = key.time;
        if now > horizon {
            break;
        }

        match which {
            0 => {
                let (_, serial) = departures.pop().unwrap();
                zeros.depart(serial);
            }
            1 => {
                resolved_now.clear();
                let done = board
                    .resolve_front_with(true, |t| resolved_now.push(t))
                    .expect("completion with an empty board");
                if done.initial {
                    traj.counters.served_initial += 1;
                    initial_remaining -= 1;
                } else {
                    traj.counters.served += 1;
                }
                for t in resolved_now.drain(..) {
                    resolve(t, now, &mut traj, &mut zeros, &mut initial_remaining);
                }
            }
            _ => {
                let cust = customers[next];
                let serial = q0 + next;
                next += 1;
                traj.counters.arrivals += 1;
                let perceived = board.len() as u64;
                let outcome = if !balk_decision(cust.balk, perceived, mu) {
                    traj.counters.balked += 1;
                    Outcome::Balked
                } else {
                    let w_seen = workload(work_end, now);
                    if w_seen > 0.0 && cust.deadline <= w_seen {
                        let departure = now + cust.deadline;
                        departures.schedule(departure, EventKind::Abandonment, serial);
                        board.push(Ticket::abandoned(serial, now, w_seen, departure));
                        Outcome::Reneged
                    } else {
                        work_end = work_end.max(now) + cust.service / mu;
                        board.push(Ticket::present(serial, now, w_seen, work_end));
                        Outcome::Served
                    }
                };
                traj.arrivals.push(ArrivalRecord { time: now, outcome });
            }
        }
        traj.record(now, board.len() as u32, workload(work_end, now), zeros.unresolved);
    }

    let c = &mut traj.counters;
    c.in_system = board.len() as u64;
    c.initial_remaining = initial_remaining;
    c.unresolved = zeros.unresolved as u64;
    Ok(traj)
}

fn exponential_rate(law: &Law, what: &str) -> Result<f64> {
    match *law {
        Law::Exponential { rate } => Ok(rate),
        Law::Never => Ok(0.0),
        other => Err(Error::Unsupported(format!(
            "the clock-driven ticket simulator needs exponential {what} laws, got {other:?}"
        ))),
    }
}

/// Continuous-time Markov simulation of the ticket board, started empty.
///
/// Arrivals come at rate λ, the front ticket completes at rate μ and every
/// waiting one abandons at rate θ_r through a single aggregate clock whose
/// rate is recomputed after every state change; the abandoning ticket is
/// chosen uniformly among the waiting ones. The workload channel holds the
/// expected remaining work of the present holders, (#ones)/μ.
pub fn simulate_ticket_markov_aggregate(params: &SystemParams, seed: u64, horizon: f64) -> Result<Trajectory> {
    check_horizon(horizon)?;
    for (law, what) in [(&params.interarrival.law, "interarrival"), (&params.service.law, "service")] {
        if exponential_rate(law, what)? != 1.0 {
            return Err(Error::Unsupported(format!("{what} law must be unitized exponential")));
        }
    }
    let theta_b = exponential_rate(&params.balking.law, "balking")?;
    let theta_r = exponential_rate(&params.deadline.law, "deadline")?;
    let (lambda, mu) = (params.lambda, params.mu);

    let mut rng = stream_rng(seed, Stream::Markov);

    let mut traj = Trajectory::new(Discipline::TicketMarkov, mu, horizon, false);
    let mut board = TicketBoard::new();
    let mut zeros = ZeroTracker::new(1024);
    let mut waiting_present = 0usize;
    let mut present = 0usize;
    let mut serial = 0usize;
    let mut now = 0.0;
    traj.record(0.0, 0, 0.0, 0);

    loop {
        let service_rate = if board.is_empty() { 0.0 } else { mu };
        let abandon_rate = theta_r * waiting_present as f64;
        let total = lambda + service_rate + abandon_rate;
        now += -open_unit(&mut rng).ln() / total;
        if now > horizon {
            break;
        }
        let pick = open_unit(&mut rng) * total;
        if pick < lambda {
            traj.counters.arrivals += 1;
            let perceived = board.len() as f64;
            let balk_prob = -(-theta_b * perceived / mu).exp_m1();
            let outcome = if open_unit(&mut rng) < balk_prob {
                traj.counters.balked += 1;
                Outcome::Balked
            } else {
                if !board.is_empty() {
                    waiting_present += 1;
                }
                present += 1;
                board.push(Ticket::present(serial, now, f64::NAN, f64::NAN));
                Outcome::Pending
            };
            traj.arrivals.push(ArrivalRecord { time: now, outcome });
            serial += 1;
        } else if pick < lambda + service_rate {
            let mut resolved = 0u64;
            let done = board
                .resolve_front_with(true, |t| {
                    zeros.resolve(t.serial);
                    resolved += 1;
                })
                .expect("service clock with an empty board");
            traj.counters.served += 1;
            traj.counters.reneged += resolved;
            traj.arrivals[done.serial].outcome = Outcome::Served;
            present -= 1;
            if !board.is_empty() {
                // the new front was waiting
                waiting_present -= 1;
            }
        } else {
            let k = ((open_unit(&mut rng) * waiting_present as f64) as usize).min(waiting_present - 1);
            let (index, _) = board.waiting_present().nth(k).expect("k-th waiting ticket");
            let slot = board.slot_mut(index);
            slot.present = false;
            slot.departure = now;
            let s = slot.serial;
            zeros.depart(s);
            traj.arrivals[s].outcome = Outcome::Reneged;
            waiting_present -= 1;
            present -= 1;
        }
        traj.record(now, board.len() as u32, present as f64 / mu, zeros.unresolved);
    }

    let c = &mut traj.counters;
    c.in_system = board.len() as u64;
    c.unresolved = zeros.unresolved as u64;
    Ok(traj)
}
