//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use ticketq::coupling::{run_coupled_pair_with, run_scaling_series, ScalingConfig};
use ticketq::harness::tables::{run_table, table_grid, Fidelity, RouColumns, TableConfig, TableRow};
use ticketq::primitives::{derive_seed, generate_stream, Customer, DistributionSpec, Role};
use ticketq::rou::{
    expected_queue_length, hazard, simulate_rou_path, std_normal_pdf, steady_state_distribution, RouInputs,
    RouPathConfig, TruncatedNormal,
};
use ticketq::standard_queue::simulate_standard;
use ticketq::stats::{ks_statistic, time_average, Estimate, ReplicationSet};
use ticketq::ticket_queue::{simulate_ticket, simulate_ticket_markov_aggregate};
use ticketq::{CustomerPrimitives, Discipline, Family, InitialConditions, Law, SystemParams};

// ---------------------------------------------------------------------------
// Printed reference values, grid order: ρ ∈ {1.1, 1.01, 1, .99, .9, .8} outer,
// μ ∈ {100, 25, 4} inner. Strings keep the printed precision.

const Q_ROU_LOW_THETA: [&str; 18] = [
    "50.74", "15.24", "4.40", "19.78", "9.39", "3.64", "17.84", "8.92", "3.56", "16.14", "8.48", "3.49", "7.77",
    "5.61", "2.93", "4.59", "3.88", "2.44",
];
const W_ROU_LOW_THETA: [&str; 18] = [
    ".5074", ".6099", "1.100", ".1978", ".3956", ".9104", ".1784", ".3568", ".8920", ".1614", ".3392", ".8741",
    ".0777", ".2246", ".7328", ".0459", ".1555", ".6113",
];
const R_ROU_LOW_THETA: [&str; 18] = [
    ".0461", ".0554", ".1000", ".0195", ".03718", ".0901", ".0178", ".0356", ".0892", ".0163", ".0342", ".0882",
    ".0086", ".0249", ".0814", ".0057", ".0194", ".0764",
];
const Q_ROU_HIGH_THETA: [&str; 18] = [
    "7.88", "3.32", "1.20", "5.82", "2.86", "1.13", "5.64", "2.82", "1.12", "5.46", "2.77", "1.12", "4.16", "2.41",
    "1.05", "3.19", "2.08", ".9947",
];
const W_ROU_HIGH_THETA: [&str; 18] = [
    ".0788", ".133", ".301", ".0582", ".1146", ".2839", ".0564", ".1128", ".2820", ".0551", ".1110", ".2802",
    ".0416", ".0964", ".2646", ".0319", ".0832", ".2486",
];
const R_ROU_HIGH_THETA: [&str; 18] = [
    ".0717", ".1209", ".2736", ".0576", ".1135", ".2811", ".0564", ".1128", ".2820", ".0546", ".1121", ".2831",
    ".0462", ".1071", ".2940", ".0399", ".1040", ".3108",
];

/// Printed cells that contradict the same row's printed Q_ROU/μ: (table, grid index, column).
const ERRATA: [(u32, usize, &str); 2] = [(1, 4, "W"), (2, 4, "W")];

/// Simulated Table 1 columns for μ ∈ {100, 25}:
/// (ρ, μ, Q_S, Q_T, R_S, R_T, B_S, B_T).
type Criterion = (&'static str, fn() -> String);
type SimRow = (f64, f64, f64, f64, f64, f64, f64, f64);
const TABLE1_SIMULATED: [SimRow; 12] = [
    (1.1, 100.0, 49.48, 50.18, 0.044, 0.043, 0.048, 0.049),
    (1.1, 25.0, 15.25, 15.59, 0.0519, 0.0510, 0.0585, 0.0597),
    (1.01, 100.0, 19.79, 19.98, 0.0186, 0.0186, 0.0195, 0.0196),
    (1.01, 25.0, 9.34, 9.51, 0.0333, 0.0330, 0.0362, 0.0368),
    (1.0, 100.0, 17.82, 17.98, 0.0168, 0.0168, 0.0176, 0.0177),
    (1.0, 25.0, 8.86, 9.03, 0.0317, 0.0314, 0.0344, 0.0350),
    (0.99, 100.0, 15.95, 16.10, 0.0152, 0.0151, 0.0157, 0.0159),
    (0.99, 25.0, 8.40, 8.55, 0.0302, 0.0299, 0.0326, 0.0332),
    (0.9, 100.0, 7.12, 7.16, 0.00692, 0.00691, 0.0071, 0.0071),
    (0.9, 25.0, 5.19, 5.27, 0.0192, 0.0192, 0.0204, 0.0207),
    (0.8, 100.0, 3.73, 3.75, 0.0037, 0.0037, 0.0037, 0.0037),
    (0.8, 25.0, 3.22, 3.25, 0.0122, 0.0122, 0.0127, 0.0129),
];

const DESK_SEED: u64 = 7;

fn decimals(printed: &str) -> i32 {
    printed.split_once('.').map_or(0, |(_, frac)| frac.len() as i32)
}

/// Printed values are cut, not rounded, at their last digit.
fn truncate_to(value: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    // guard against representation error just below a digit boundary
    (value * scale + 1e-9).floor() / scale
}

fn desk_table_one() -> &'static Vec<TableRow> {
    static ROWS: OnceLock<Vec<TableRow>> = OnceLock::new();
    ROWS.get_or_init(|| run_table(&TableConfig::new(1, Fidelity::Desk, DESK_SEED)).expect("desk table 1"))
}

// ---------------------------------------------------------------------------

fn criterion_1() -> String {
    let start = Instant::now();
    let mut checked = 0;
    let mut notes = Vec::new();
    let mut worst: f64 = 0.0;
    for id in 1..=4u32 {
        let (q, w, r) = if id <= 2 {
            (&Q_ROU_LOW_THETA, &W_ROU_LOW_THETA, &R_ROU_LOW_THETA)
        } else {
            (&Q_ROU_HIGH_THETA, &W_ROU_HIGH_THETA, &R_ROU_HIGH_THETA)
        };
        for (g, point) in table_grid(id).unwrap().iter().enumerate() {
            let cols = RouColumns::for_point(point).unwrap();
            // R and B share a printed column value since F'_b(0) = F'_d(0)
            for (name, computed, printed) in [
                ("Q", cols.q, q[g]),
                ("W", cols.w, w[g]),
                ("R", cols.r, r[g]),
                ("B", cols.b, r[g]),
            ] {
                let p: f64 = printed.parse().unwrap();
                let cut = truncate_to(computed, decimals(printed));
                let err = (cut - p).abs();
                checked += 1;
                if err <= 0.006 + 1e-12 {
                    worst = worst.max(err);
                    continue;
                }
                let listed = ERRATA.contains(&(id, g, name));
                let printed_q: f64 = q[g].parse().unwrap();
                // a genuine misprint: the printed cell disagrees with the row's own
                // printed Q/μ while the computed value agrees with it
                let misprint = name == "W"
                    && (p - printed_q / point.mu).abs() > 0.006
                    && (computed - printed_q / point.mu).abs() <= 0.006;
                assert!(
                    listed && misprint,
                    "table {id} ρ={} μ={} {name}_ROU: computed {computed:.6} (cut {cut}) vs printed {printed}",
                    point.rho,
                    point.mu
                );
                notes.push(format!(
                    "table {id} ρ={} μ={} W printed {printed} but Q/μ = {:.4}, computed {computed:.4}",
                    point.rho,
                    point.mu,
                    printed_q / point.mu
                ));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "closed-form columns took {elapsed:.3}s");
    format!(
        "{checked} cells, max |cut - printed| = {worst:.4}, {elapsed:.3}s; misprints: {}",
        notes.join("; ")
    )
}

fn criterion_2() -> String {
    let rows = desk_table_one();
    let mut worst_q: f64 = 0.0;
    let mut worst_rb: f64 = 0.0;
    for &(rho, mu, qs, qt, rs, rt, bs, bt) in &TABLE1_SIMULATED {
        for (disc, q, r, b) in [(Discipline::Standard, qs, rs, bs), (Discipline::Ticket, qt, rt, bt)] {
            let row = rows
                .iter()
                .find(|x| x.discipline == disc && x.point.rho == rho && x.point.mu == mu)
                .expect("grid row");
            let rel = (row.sim.q.mean - q).abs() / q;
            let dr = (row.sim.r.mean - r).abs();
            let db = (row.sim.b.mean - b).abs();
            assert!(
                rel <= 0.05,
                "{} ρ={rho} μ={mu}: Q {:.3} vs printed {q} ({:.1}%)",
                disc.label(),
                row.sim.q.mean,
                100.0 * rel
            );
            assert!(dr <= 0.005, "{} ρ={rho} μ={mu}: R {:.4} vs {r}", disc.label(), row.sim.r.mean);
            assert!(db <= 0.005, "{} ρ={rho} μ={mu}: B {:.4} vs {b}", disc.label(), row.sim.b.mean);
            worst_q = worst_q.max(rel);
            worst_rb = worst_rb.max(dr).max(db);
        }
    }
    format!(
        "24 rows, max Q deviation {:.2}%, max R/B deviation {worst_rb:.4}",
        100.0 * worst_q
    )
}

fn criterion_3() -> String {
    let rows = desk_table_one();
    let mut min_gap = f64::INFINITY;
    for pair in rows.chunks(2) {
        let (s, t) = (&pair[0], &pair[1]);
        assert_eq!((s.discipline, t.discipline), (Discipline::Standard, Discipline::Ticket));
        let gap = t.sim.q.mean - s.sim.q.mean;
        assert!(
            gap >= 0.0,
            "ρ={} μ={}: Q_T {:.4} < Q_S {:.4}",
            s.point.rho,
            s.point.mu,
            t.sim.q.mean,
            s.sim.q.mean
        );
        min_gap = min_gap.min(gap);
    }
    format!("18 grid points, smallest Q_T - Q_S = {min_gap:.4}")
}

fn scaling_report() -> &'static ticketq::coupling::ScalingReport {
    static REPORT: OnceLock<ticketq::coupling::ScalingReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let cfg = ScalingConfig::new(vec![4, 25, 100, 400], 0.0, 0.1, 0.1, (1..=20).collect());
        run_scaling_series(&cfg).expect("scaling series")
    })
}

fn fmt_series(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
}

fn criterion_4() -> String {
    let r = scaling_report();
    assert!(r.trend_collapse_standard <= 0.0, "standard trend {}", r.trend_collapse_standard);
    assert!(r.trend_collapse_ticket <= 0.0, "ticket trend {}", r.trend_collapse_ticket);
    format!(
        "median collapse S [{}] (ρ_s {:.2}), T [{}] (ρ_s {:.2})",
        fmt_series(r.summary.iter().map(|s| s.median_collapse_standard)),
        r.trend_collapse_standard,
        fmt_series(r.summary.iter().map(|s| s.median_collapse_ticket)),
        r.trend_collapse_ticket
    )
}

fn criterion_5() -> String {
    let r = scaling_report();
    assert!(r.trend_gap_q <= 0.0, "gap trend {}", r.trend_gap_q);
    let last = r.summary.last().unwrap();
    let ratio = last.median_gap_q / last.median_level;
    assert!(ratio <= 0.25, "gap/level at n=400 is {ratio:.3}");
    format!(
        "median scaled gap [{}] (ρ_s {:.2}); at n=400 gap/level = {:.3}/{:.3} = {ratio:.3}",
        fmt_series(r.summary.iter().map(|s| s.median_gap_q)),
        r.trend_gap_q,
        last.median_gap_q,
        last.median_level
    )
}

fn criterion_6() -> String {
    let r = scaling_report();
    for pick in [
        |s: &ticketq::coupling::ScalingSummary| s.mean_idle_standard,
        |s: &ticketq::coupling::ScalingSummary| s.mean_idle_ticket,
    ] {
        let idle: Vec<f64> = r.summary.iter().map(pick).collect();
        assert!(idle.windows(2).all(|w| w[1] < w[0]), "idle fractions not decreasing: {idle:?}");
        assert!(*idle.last().unwrap() <= 0.05, "idle fraction at n=400: {}", idle.last().unwrap());
    }
    format!(
        "mean idle S [{}], T [{}]",
        fmt_series(r.summary.iter().map(|s| s.mean_idle_standard)),
        fmt_series(r.summary.iter().map(|s| s.mean_idle_ticket))
    )
}

fn criterion_7() -> String {
    let params = SystemParams::from_family(100.0, 1.0, 0.1, 0.1, Family::Markovian).unwrap();
    let horizon = 500.0;
    let warmup = 0.2;
    let reps = 100u64;
    let event: Vec<_> = (0..reps)
        .map(|k| {
            let prim = generate_stream(&params, derive_seed(71, &[k]), horizon).unwrap();
            let traj = simulate_ticket(&params, &prim, &InitialConditions::empty(params.mu), horizon).unwrap();
            time_average(&traj, warmup).unwrap()
        })
        .collect();
    let clock: Vec<_> = (0..reps)
        .map(|k| {
            let traj = simulate_ticket_markov_aggregate(&params, derive_seed(72, &[k]), horizon).unwrap();
            time_average(&traj, warmup).unwrap()
        })
        .collect();
    let a: Estimate = ReplicationSet::new(event, 0.95).summary().unwrap().q;
    let b: Estimate = ReplicationSet::new(clock, 0.95).summary().unwrap().q;
    assert!(a.overlaps(&b), "event {a:?} vs clock {b:?}");
    format!(
        "event-driven Q_T {:.3} ± {:.3}, clock-driven Q_T {:.3} ± {:.3}",
        a.mean, a.half_width, b.mean, b.half_width
    )
}

fn criterion_8() -> String {
    let (beta, theta, sigma) = (1.0, 0.2, 2f64.sqrt());
    let cfg = RouPathConfig::new(beta, theta, sigma, 1e-3, 1e4, 20_240_601);
    let path = simulate_rou_path(&cfg).unwrap();
    let target = TruncatedNormal::new(beta / theta, sigma * sigma / (2.0 * theta)).unwrap();
    // the same law reached from the unscaled closed form at μ = 100, λ = 110
    let unscaled = RouInputs { lambda: 110.0, mu: 100.0, f0: 0.1, g0: 0.1, cv_a: 1.0, cv_s: 1.0 };
    let scaled_mean = expected_queue_length(&unscaled).unwrap() / 10.0;
    assert!((scaled_mean - target.mean()).abs() < 1e-9);

    let ks = ks_statistic(&path.sample, |x| target.cdf(x)).unwrap();
    let rel = (path.mean - target.mean()).abs() / target.mean();
    let line = format!(
        "KS {ks:.4} over {} points, mean {:.4} vs {:.4} ({:.2}%)",
        path.sample.len(),
        path.mean,
        target.mean(),
        100.0 * rel
    );
    assert!(ks <= 0.02, "{line}");
    assert!(rel <= 0.02, "{line}");
    line
}

fn criterion_9() -> String {
    let unit = |law: Law, role: Role| DistributionSpec::new(law, role).unwrap();
    let params = SystemParams::new(
        1.0,
        1.0,
        unit(Law::Exponential { rate: 1.0 }, Role::Interarrival),
        unit(Law::Exponential { rate: 1.0 }, Role::Service),
        unit(Law::Never, Role::Balking),
        unit(Law::Never, Role::Deadline),
    )
    .unwrap();
    let inf = f64::INFINITY;
    let prim = CustomerPrimitives::from_customers(
        vec![
            Customer { arrival: 1.0, service: 2.0, balk: inf, deadline: inf },
            Customer { arrival: 1.5, service: 1.0, balk: inf, deadline: 1.0 },
        ],
        3.0,
    )
    .unwrap();
    let init = InitialConditions::empty(1.0);
    let s = simulate_standard(&params, &prim, &init, 3.0).unwrap();
    let t = simulate_ticket(&params, &prim, &init, 3.0).unwrap();

    assert_eq!((s.queue_at(2.4999), s.queue_at(2.5)), (2, 1));
    assert_eq!((t.queue_at(2.9999), t.queue_at(3.0)), (2, 0));
    assert_eq!(t.queue_at(2.5), 2);
    for k in 0..=300 {
        let x = k as f64 * 0.01;
        let expect = u32::from((2.5..3.0).contains(&x));
        assert_eq!(t.unresolved_at(x), expect, "X({x})");
    }
    let qs = time_average(&s, 0.0).unwrap().q_bar;
    let qt = time_average(&t, 0.0).unwrap().q_bar;
    assert!((qs - 1.0).abs() < 1e-15, "standard q_bar {qs}");
    assert!((qt - 7.0 / 6.0).abs() < 1e-15, "ticket q_bar {qt}");
    let pair = run_coupled_pair_with(&params, &prim, &init, 3.0).unwrap();
    assert_eq!(pair.sup_gap_q, 1.0);
    format!("Q_S drops at 2.5, Q_T at 3.0, X = 1 on [2.5, 3), q_bar {qs} and {qt:.6}, sup gap 1")
}

/// ∫ₓ^∞ φ by composite Simpson.
fn tail_by_quadrature(x: f64) -> f64 {
    let upper = x.max(0.0) + 12.0;
    let n = 24_000usize;
    let h = (upper - x) / n as f64;
    let mut sum = std_normal_pdf(x) + std_normal_pdf(upper);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * std_normal_pdf(x + i as f64 * h);
    }
    sum * h / 3.0
}

fn criterion_10() -> String {
    let mut worst: f64 = 0.0;
    for k in 0..=160 {
        let x = -8.0 + k as f64 * 0.1;
        let oracle = std_normal_pdf(x) / tail_by_quadrature(x);
        let err = (hazard(x) - oracle).abs();
        assert!(err <= 1e-7, "h({x}): {} vs quadrature {oracle}", hazard(x));
        worst = worst.max(err);
    }
    let mut worst_rel: f64 = 0.0;
    for id in 1..=4 {
        for point in table_grid(id).unwrap() {
            let inputs = RouInputs::from_params(&point.params().unwrap());
            let closed = expected_queue_length(&inputs).unwrap();
            let tn = steady_state_distribution(&inputs).unwrap();
            let s = tn.variance.sqrt();
            let tn_mean = tn.location + s * hazard(-tn.location / s);
            let rel = (closed - tn_mean).abs() / tn_mean;
            assert!(rel <= 1e-10, "E[Q] {closed} vs truncated mean {tn_mean}");
            worst_rel = worst_rel.max(rel);
        }
    }
    format!("max hazard error {worst:.2e} on [-8, 8]; max E[Q] identity error {worst_rel:.2e} over 72 grid points")
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form columns", criterion_1),
        ("desk simulation vs printed simulation", criterion_2),
        ("ticket dominance", criterion_3),
        ("state-space collapse trend", criterion_4),
        ("asymptotic coupling trend", criterion_5),
        ("allocation convergence", criterion_6),
        ("event vs clock ticket formulations", criterion_7),
        ("reflected OU path", criterion_8),
        ("two-customer trace", criterion_9),
        ("numerical kernels", criterion_10),
    ];
    // keep assertion messages on our own line instead of the default hook's
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS [{secs:.1}s] {name}: {detail}", i + 1),
            Err(payload) => {
                failed += 1;
                let msg = payload
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                println!("criterion {:>2} FAIL [{secs:.1}s] {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
