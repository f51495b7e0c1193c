//! Acceptance suite: one PASS/FAIL line per criterion; exits nonzero if any criterion fails.
//!
//! Simulation criteria request N1 = 90 and go through the same rounding the CLI applies.

use std::time::{Duration, Instant};

use hopdof::accounting::{
    beta_star, dof_report, eta2, scaling_point, t1_exact, t1_gamma, t2, two_hop_3user, verify_hop_bounds,
};
use hopdof::numerics::{decimal_string, fraction_string, integer, ratio, to_f64, Rational};
use hopdof::scheme::ic6::simulate_ic6;
use hopdof::scheme::psin::plc_rank_trial;
use hopdof::scheme::two_hop::simulate_two_hop;
use hopdof::scheme::x3::{check_concordance, round_n1, simulate_x3};

const RESIDUAL_TOL: f64 = 1e-8;
const GAMMA_TOL: f64 = 1e-9;
const NEAR_SINGULAR: f64 = 1e9;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into(), notes: Vec::new() }
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn c1_table() -> Outcome {
    let start = Instant::now();
    let expected = [
        (3, ratio(15, 11), ratio(18, 11)),
        (5, ratio(315, 193), ratio(300, 137)),
        (10, ratio(92378, 43191), ratio(25200, 7381)),
        (20, ratio(156, 59), Rational::new(62078016.into(), 11167027.into())),
    ];
    let mut ok = true;
    let mut rendered = Vec::new();
    for (k, dof, upper) in &expected {
        let r = dof_report(*k).expect("valid K");
        ok &= &r.dof_actual == dof && &r.miso_bc_upper == upper;
        rendered.push(format!("K={k}: {} / {}", fraction_string(&r.dof_actual), fraction_string(&r.miso_bc_upper)));
    }
    let elapsed = start.elapsed();
    Outcome::new(ok && within(elapsed, Duration::from_secs(1)), format!("{}, {elapsed:.2?}", rendered.join(", ")))
}

fn c2_components() -> Outcome {
    let a = t1_exact(2, 3).unwrap();
    let b = t2(2, 3).unwrap();
    let relaxed = Rational::from_integer(1.into()) / (&a + &b);
    let ok =
        a == ratio(11, 15) && b == ratio(53, 90) && relaxed == ratio(90, 119) && decimal_string(&relaxed, 3) == "0.756";
    Outcome::new(ok, format!("t1={a} t2={b} relaxed={relaxed} ~{}", decimal_string(&relaxed, 3)))
}

fn c3_gamma() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 3..=40 {
        for q in 2..k {
            let exact = to_f64(&t1_exact(q, k).unwrap());
            worst = worst.max((exact - t1_gamma(q, k).unwrap()).abs() / exact);
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst < GAMMA_TOL && within(elapsed, Duration::from_secs(10)),
        format!("max relative gap {worst:.2e}, {elapsed:.2?}"),
    )
}

fn c4_interior_bound() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    let mut ok = true;
    for k in 3..=50 {
        for l in 3..=k {
            cases += 1;
            ok &= verify_hop_bounds(k, l).unwrap().appendix_b_ok;
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(ok && within(elapsed, Duration::from_secs(30)), format!("{cases} (K, L) pairs, {elapsed:.2?}"))
}

fn c5_endpoints() -> Outcome {
    let r3 = verify_hop_bounds(100, 3).unwrap();
    let r7 = verify_hop_bounds(100, 7).unwrap();
    Outcome::new(r3.remark5_ok && r7.remark5_ok, format!("L=3: {}, L=7: {}", r3.remark5_ok, r7.remark5_ok))
}

fn c6_x3() -> Outcome {
    let (n1, _) = round_n1(90);
    let mut ok = true;
    let mut first_failure = None;
    let mut slowest = Duration::ZERO;
    for seed in 0..20u64 {
        let start = Instant::now();
        let t = simulate_x3(n1, seed).expect("simulation runs");
        slowest = slowest.max(start.elapsed());
        let seed_ok = t.hop_totals == [53, 46, 66]
            && t.dof == "15/11"
            && t.causality_violations == 0
            && t.max_residual < RESIDUAL_TOL;
        if !seed_ok && first_failure.is_none() {
            first_failure = Some(format!(
                "seed {seed}: N1 90 runs as {n1}, hop slots {:?}, DoF {}, violations {}, residual {:.3e}",
                t.hop_totals, t.dof, t.causality_violations, t.max_residual
            ));
        }
        ok &= seed_ok;
    }
    ok &= within(slowest, Duration::from_secs(5));
    let mut o = Outcome::new(ok, first_failure.unwrap_or_else(|| format!("20 seeds, slowest {slowest:.2?}")));
    let t = simulate_x3(n1, 0).unwrap();
    let d = &t.stages[0].destinations[0];
    o.notes.push(format!(
        "slowest seed {slowest:.2?}; PLC rank phase 1 {}/{}, phase 2 {}/{}; equation gap {:.1e}",
        d.phase1.rank, d.phase1.unknowns, d.phase2.rank, d.phase2.unknowns, d.equation_residual
    ));
    o
}

fn c7_ic6() -> Outcome {
    let (n1, _) = round_n1(90);
    let mut ok = true;
    let mut first_failure = None;
    for seed in 0..10u64 {
        let (t, per_dest) = simulate_ic6(n1, seed).expect("simulation runs");
        let seed_ok = per_dest.iter().all(|r| *r < RESIDUAL_TOL) && t.causality_violations == 0;
        if !seed_ok && first_failure.is_none() {
            first_failure = Some(format!(
                "seed {seed}: hop slots {:?}, DoF {}, per-destination residual {:?}",
                t.hop_totals,
                t.dof,
                per_dest.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()
            ));
        }
        ok &= seed_ok;
    }
    Outcome::new(ok, first_failure.unwrap_or_else(|| "10 seeds".into()))
}

fn c8_psin_rank() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, l) in [(3, 3), (4, 3)] {
        let mut full = 0;
        for trial in 0..1000 {
            let r = plc_rank_trial(k, l, 0, trial).unwrap();
            if r.full_rank {
                full += 1;
            } else {
                ok &= r.worst_condition > NEAR_SINGULAR;
            }
        }
        ok &= full >= 999;
        parts.push(format!("(K={k}, L={l}) {full}/1000"));
    }
    Outcome::new(ok, parts.join(", "))
}

fn c9_two_hop() -> Outcome {
    let one = integer(1);
    let base = two_hop_3user(&integer(0), &one).unwrap();
    let b = beta_star();
    let best = two_hop_3user(&b, &one).unwrap();
    let mut ok = base.dof == ratio(36, 25)
        && b == ratio(1, 4)
        && best.dof == ratio(16, 11)
        && best.t1 == ratio(11, 16)
        && best.t2 == ratio(11, 16);
    let x3 = simulate_x3(270, 0).unwrap();
    let g = x3.stages[0].generated;
    let n2 = integer((g.direct_order2 + g.paired_order2) as i64);
    let eta_x3 = eta2(&n2, &integer((g.direct_order2 + 2 * g.paired_order2) as i64)).unwrap();
    let th = simulate_two_hop(36, 0).unwrap();
    let eta_th = eta2(&integer(th.order2 as i64), &integer(th.useful_equations as i64)).unwrap();
    ok &= eta_x3 == ratio(2, 3) && eta_th == one;
    Outcome::new(ok, format!("36/25 -> {}, beta*={b}, DoF {}, eta2 {eta_x3} and {eta_th}", base.dof, best.dof))
}

fn c10_concordance() -> Outcome {
    let mut ok = true;
    let mut configs = 0;
    for (n1, seed) in [(270, 1), (540, 2)] {
        let t = simulate_x3(n1, seed).unwrap();
        ok &= check_concordance(&t.stages[0], n1).is_ok();
        configs += 1;
    }
    let (t, _) = simulate_ic6(270, 3).unwrap();
    for s in &t.stages {
        ok &= check_concordance(s, 270).is_ok();
        configs += 1;
    }
    for n1 in [36, 72] {
        let th = simulate_two_hop(n1, 4).unwrap();
        let n = integer(n1 as i64);
        let eq = |measured: usize, expected: Rational| integer(measured as i64) == expected;
        ok &= eq(th.t(1, 1), &n * ratio(7, 18)) && eq(th.t(1, 2), &n * ratio(1, 4)) && eq(th.t(2, 1), &n * ratio(1, 4));
        ok &= th.order2 * 2 == n1;
        configs += 1;
    }
    Outcome::new(ok, format!("{configs} simulated configurations"))
}

fn c11_scaling() -> Outcome {
    let start = Instant::now();
    let ratios: Vec<f64> = [10, 100, 1000, 10000].iter().map(|&k| scaling_point(k).unwrap().ratio).collect();
    let mut ok = ratios.windows(2).all(|w| w[1] >= w[0]);
    let dofs: Vec<Rational> = (3..=40).map(|k| dof_report(k).unwrap().dof_actual).collect();
    ok &= dofs.windows(2).all(|w| w[1] >= w[0]);
    let elapsed = start.elapsed();
    Outcome::new(
        ok && within(elapsed, Duration::from_secs(60)),
        format!("ratios {:?}, {elapsed:.2?}", ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>()),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("published DoF table", c1_table),
        ("first-hop and later-hop totals for K=3", c2_components),
        ("gamma closed form vs exact sum", c3_gamma),
        ("interior hops bounded by end hops sum", c4_interior_bound),
        ("end-hop dominance at K=100", c5_endpoints),
        ("3-user 3-hop X simulation at N1=90", c6_x3),
        ("6-hop cascade simulation at N1=90", c7_ic6),
        ("stacked PLC matrix rank", c8_psin_rank),
        ("3-user 2-hop schemes", c9_two_hop),
        ("count concordance", c10_concordance),
        ("scaling behaviour", c11_scaling),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("[{}] {:>2}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        for n in &o.notes {
            println!("          info: {n}");
        }
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
