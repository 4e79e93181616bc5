//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! criteria run sequentially so that the wall-clock comparison is not
//! disturbed by other work competing for the CPU.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use airig::airig::{run_airig, RunOptions};
use airig::baselines::{
    run_baseline, step_projected_ig, step_prox_iag, step_saga, tune_constant_step, BaselineOptions, BaselineStep,
    GradientTable, PILOT_PASSES,
};
use airig::history::SolverKind;
use airig::problem::estimate_bounds;
use airig::qp::{project_polyhedron, solve_calls_on_current_thread};
use airig::report::{check_bounds, fit_rates, BoundsContext};
use airig::schedules::harmonic_sum_table;
use airig::svm::{reference_optimum, SvmPreset};
use airig::{AgentBlock, BoxSet, Oracle, PhiMode, PolyhedralSet, ProblemSpec, QpSolver, ScheduleParams};

use common::{brute_force_projection, max_abs_diff, normal_vec, random_polyhedron, random_problem};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn paper_params(r: f64) -> ScheduleParams {
    ScheduleParams::new(1.0, 1.0, 0.25, r).unwrap()
}

fn rate_bounds() -> Check {
    const N_MAX: u64 = 100_000;
    // min x s.t. x ≥ 0 over [−1, 1]
    let one_d = ProblemSpec::new(
        vec![AgentBlock::unconstrained_eq(
            Oracle::Affine { c: vec![1.0], d: 0.0 },
            Oracle::Affine { c: vec![-1.0], d: 0.0 },
        )],
        BoxSet::cube(1, 1.0).unwrap(),
        vec![],
        PhiMode::Hinge,
    )
    .unwrap();
    // min ½‖x‖² s.t. x1 + x2 = 1 over [−2, 2]², split over two agents
    let inactive = Oracle::Constant { value: -1.0 };
    let two_d = ProblemSpec::new(
        vec![
            AgentBlock::new(
                Oracle::Quadratic { q: vec![vec![1.0, 0.0], vec![0.0, 0.0]], c: vec![0.0, 0.0], d: 0.0 },
                inactive.clone(),
                vec![vec![1.0, 1.0]],
                vec![1.0],
            )
            .unwrap(),
            AgentBlock::unconstrained_eq(
                Oracle::Quadratic { q: vec![vec![0.0, 0.0], vec![0.0, 1.0]], c: vec![0.0, 0.0], d: 0.0 },
                inactive,
            ),
        ],
        BoxSet::cube(2, 2.0).unwrap(),
        vec![],
        PhiMode::Hinge,
    )
    .unwrap();

    let params = paper_params(0.0);
    let mut details = Vec::new();
    for (name, problem, f_star) in [("1-d", &one_d, 0.0), ("2-d", &two_d, 0.25)] {
        let bounds = estimate_bounds(problem, 1000, 7).map_err(|e| e.to_string())?;
        let ctx = BoundsContext::new(bounds, params, problem.agents()).map_err(|e| e.to_string())?;
        let x0 = vec![0.0; problem.dim()];
        let h = run_airig(problem, &params, &x0, &RunOptions::iterations(N_MAX)).map_err(|e| e.to_string())?;
        let window: Vec<_> = h.records.iter().filter(|r| (16..=N_MAX).contains(&(r.k + 1))).copied().collect();
        ensure(window.len() == (N_MAX - 15) as usize, || format!("{name}: {} records in window", window.len()))?;
        let violations = check_bounds(&window, f_star, &ctx).map_err(|e| e.to_string())?;
        ensure(violations.is_empty(), || format!("{name}: first violation {:?}", violations[0]))?;
        let last = h.last().unwrap();
        details.push(format!(
            "{name}: f−f* {:.2e} ≤ {:.2e}, φ {:.2e} ≤ {:.2e} at N=1e5",
            last.f_bar - f_star,
            ctx.suboptimality(N_MAX).unwrap(),
            last.phi_bar,
            ctx.infeasibility(N_MAX).unwrap()
        ));
    }
    Ok(details.join("; "))
}

fn infeasibility_rate() -> Check {
    // φ(x̄_k) reaches exactly zero after a few thousand passes on this
    // instance, so the fit uses the whole trace (zeros excluded).
    const WINDOW_FRACTION: f64 = 1.0;
    let preset = SvmPreset::paper_fig1().scaled(100, 10);
    let inst = preset.build().map_err(|e| e.to_string())?;
    let (_, f_star) = reference_optimum(&inst, 1e-8).map_err(|e| e.to_string())?;
    let x0 = vec![0.0; inst.dim()];
    let h = run_airig(&inst.problem, &preset.params, &x0, &RunOptions::iterations(20_000)).map_err(|e| e.to_string())?;
    let rep = fit_rates(&h.records, f_star, WINDOW_FRACTION, None).map_err(|e| e.to_string())?;
    let phi_100 = h.records[99].phi_bar;
    let phi_n = h.records[19_999].phi_bar;
    let detail = format!(
        "slope_phi {:.3} (r² {:.3}, {} zero records excluded), φ(x̄_100) {:.3e}, φ(x̄_20000) {:.3e}",
        rep.slope_phi, rep.r2_phi, rep.excluded_phi, phi_100, phi_n
    );
    ensure(rep.slope_phi <= -0.10 && rep.r2_phi >= 0.8, || detail.clone())?;
    ensure(phi_n < phi_100 / 3.0, || detail.clone())?;
    Ok(detail)
}

fn harmonic_sandwich() -> Check {
    let mut checked = 0usize;
    for i in 0..10 {
        let alpha = i as f64 / 10.0;
        let table = harmonic_sum_table(alpha, 10_000).map_err(|e| e.to_string())?;
        for (j, b) in table.iter().enumerate() {
            ensure(b.lower <= b.sum && b.sum <= b.upper, || format!("α={alpha}, offset {j}: {b:?}"))?;
        }
        checked += table.len();
    }
    Ok(format!("{checked} (α, N) pairs"))
}

fn averaging_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for r in [0.0, 0.3, 0.7] {
        for _ in 0..5 {
            let problem = random_problem(&mut rng);
            let params = ScheduleParams::new(rng.random_range(0.2..2.0), rng.random_range(0.2..2.0), 0.25, r).unwrap();
            let x0 = problem.box_set().sample(&mut rng);
            let h = run_airig(&problem, &params, &x0, &RunOptions::iterations(200).with_logging())
                .map_err(|e| e.to_string())?;
            let log = h.log.as_ref().unwrap();
            for k in 0..=200usize {
                let weights: Vec<f64> = (0..=k as u64).map(|t| params.weight(t)).collect();
                let total: f64 = weights.iter().sum();
                let mut explicit = vec![0.0; problem.dim()];
                for (w, x) in weights.iter().zip(&log.iterates) {
                    for (e, v) in explicit.iter_mut().zip(x) {
                        *e += w / total * v;
                    }
                }
                worst = worst.max(max_abs_diff(&explicit, &log.averages[k]));
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("max deviation {worst:.2e} over r ∈ {{0, 0.3, 0.7}}, k ≤ 200"))
}

fn drift_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tightest = 0.0_f64;
    for p in 0..100 {
        let problem = random_problem(&mut rng);
        let bounds = estimate_bounds(&problem, 400, p).map_err(|e| e.to_string())?;
        let params = ScheduleParams::new(rng.random_range(0.2..2.0), rng.random_range(0.2..2.0), 0.25, 0.0).unwrap();
        let x0 = problem.box_set().sample(&mut rng);
        let h = run_airig(&problem, &params, &x0, &RunOptions::iterations(60).with_logging())
            .map_err(|e| e.to_string())?;
        let m = problem.agents() as f64;
        for (gamma, eta, drifts) in &h.log.as_ref().unwrap().drifts {
            for (idx, d) in drifts.iter().enumerate() {
                let i = (idx + 1) as f64;
                let bound = i * gamma * (bounds.c + eta * bounds.c_f) / m;
                ensure(*d <= bound + 1e-9, || format!("problem {p}: drift {d:.3e} > {bound:.3e} at i = {i}"))?;
                if bound > 0.0 {
                    tightest = tightest.max(d / bound);
                }
            }
        }
    }
    Ok(format!("100 problems, largest drift/bound ratio {tightest:.3}"))
}

fn qp_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for case in 0..500 {
        let set = random_polyhedron(&mut rng);
        let z: Vec<f64> = normal_vec(&mut rng, set.dim()).iter().map(|v| 3.0 * v).collect();
        let expected = brute_force_projection(&set, &z).ok_or_else(|| format!("case {case}: oracle found nothing"))?;
        let got = project_polyhedron(&set, &z, 1e-10).map_err(|e| format!("case {case}: {e}"))?.x;
        let diff = max_abs_diff(&got, &expected);
        ensure(diff <= 1e-8, || format!("case {case}: differs by {diff:.3e}"))?;
        worst = worst.max(diff);

        let again = project_polyhedron(&set, &got, 1e-10).map_err(|e| e.to_string())?.x;
        ensure(max_abs_diff(&again, &got) <= 1e-8, || format!("case {case}: not idempotent"))?;

        let z2: Vec<f64> = normal_vec(&mut rng, set.dim()).iter().map(|v| 3.0 * v).collect();
        let got2 = project_polyhedron(&set, &z2, 1e-10).map_err(|e| e.to_string())?.x;
        let lhs = airig::linalg::dist(&got, &got2);
        let rhs = airig::linalg::dist(&z, &z2);
        ensure(lhs <= rhs + 1e-9, || format!("case {case}: expansive {lhs} > {rhs}"))?;
    }
    Ok(format!("500 polyhedra, max deviation from enumeration {worst:.2e}"))
}

/// Strongly convex quadratic split over `m` agents, with its minimizer.
fn quadratic_agents(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (ProblemSpec, Vec<f64>, f64) {
    let mut q_sum = DMatrix::<f64>::zeros(n, n);
    let mut c_sum = DVector::<f64>::zeros(n);
    let blocks = (0..m)
        .map(|_| {
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let q = a.transpose() * &a + DMatrix::identity(n, n) * 0.5;
            let c = DVector::from_column_slice(&normal_vec(rng, n));
            q_sum += &q;
            c_sum += &c;
            let rows = (0..n).map(|i| q.row(i).iter().copied().collect()).collect();
            AgentBlock::unconstrained_eq(
                Oracle::Quadratic { q: rows, c: c.as_slice().to_vec(), d: 0.0 },
                Oracle::Constant { value: -1.0 },
            )
        })
        .collect();
    let x_star = q_sum.clone().cholesky().unwrap().solve(&(-c_sum));
    let l_avg = q_sum.symmetric_eigenvalues().max() / m as f64;
    let problem = ProblemSpec::new(blocks, BoxSet::cube(n, 100.0).unwrap(), vec![], PhiMode::Hinge).unwrap();
    (problem, x_star.as_slice().to_vec(), l_avg)
}

fn baseline_sanity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);

    // proximal IAG contracts on a smooth strongly convex quadratic
    let (problem, x_star, l_avg) = quadratic_agents(&mut rng, 3, 4);
    let free = PolyhedralSet::unconstrained(3);
    let mut solver = QpSolver::projection(free.clone(), 1e-12).unwrap();
    let mut table = GradientTable::empty(4, 3);
    let gamma = 0.1 / l_avg;
    let mut x = vec![0.0; 3];
    let mut errors = vec![airig::linalg::dist(&x, &x_star)];
    for _ in 0..60 {
        for i in 0..4 {
            x = step_prox_iag(&problem, &mut table, &x, gamma, &mut solver, i).map_err(|e| e.to_string())?;
        }
        errors.push(airig::linalg::dist(&x, &x_star));
    }
    let mut worst_ratio = 0.0_f64;
    for k in 2..errors.len() - 1 {
        if errors[k] < 1e-12 {
            break;
        }
        let ratio = errors[k + 1] / errors[k];
        ensure(ratio < 1.0, || format!("IAG error ratio {ratio:.4} at pass {k}"))?;
        worst_ratio = worst_ratio.max(ratio);
    }

    // SAGA direction is unbiased at a fixed point
    const DRAWS: usize = 100_000;
    let x_fixed = normal_vec(&mut rng, 3);
    let stale = GradientTable::at(&problem, &normal_vec(&mut rng, 3)).map_err(|e| e.to_string())?;
    let mut solver = QpSolver::projection(free.clone(), 1e-12).unwrap();
    let mut sum = [0.0; 3];
    let mut sum_sq = [0.0; 3];
    for _ in 0..DRAWS {
        let mut t = stale.clone();
        let (next, _) = step_saga(&problem, &mut t, &x_fixed, 1.0, &mut solver, &mut rng).map_err(|e| e.to_string())?;
        for j in 0..3 {
            let d = x_fixed[j] - next[j];
            sum[j] += d;
            sum_sq[j] += d * d;
        }
    }
    let mut target = vec![0.0; 3];
    for i in 0..4 {
        problem.add_f_subgradient(i, &x_fixed, 0.25, &mut target).map_err(|e| e.to_string())?;
    }
    let mut worst_sigma = 0.0_f64;
    for j in 0..3 {
        let mean = sum[j] / DRAWS as f64;
        let var = sum_sq[j] / DRAWS as f64 - mean * mean;
        let se = (var / DRAWS as f64).sqrt();
        let z = (mean - target[j]).abs() / se.max(1e-300);
        ensure(z <= 3.0, || format!("SAGA mean off by {z:.2}σ in coordinate {j}"))?;
        worst_sigma = worst_sigma.max(z);
    }

    // every baseline iterate stays in the polyhedron
    let mut checked = 0usize;
    for _ in 0..20 {
        let set = loop {
            let s = random_polyhedron(&mut rng);
            if s.dim() >= 2 {
                break s;
            }
        };
        let n = set.dim();
        let (problem, _, l) = quadratic_agents(&mut rng, n, 3);
        let gamma = 0.5 / l;
        let tol = 1e-8;
        let x0 = normal_vec(&mut rng, n);
        let mut solver = QpSolver::projection(set.clone(), tol).unwrap();
        let start = solver.project(&x0).map_err(|e| e.to_string())?.x;
        let (mut a, mut b, mut c) = (start.clone(), start.clone(), start.clone());
        let mut iag = GradientTable::empty(3, n);
        let mut saga = GradientTable::at(&problem, &start).map_err(|e| e.to_string())?;
        for k in 0..20u64 {
            a = step_projected_ig(&problem, &a, gamma / ((k + 1) as f64).sqrt(), &mut solver).map_err(|e| e.to_string())?;
            ensure(set.contains(&a, tol), || "projected IG left the polyhedron".into())?;
            for i in 0..3 {
                b = step_prox_iag(&problem, &mut iag, &b, gamma, &mut solver, i).map_err(|e| e.to_string())?;
                ensure(set.contains(&b, tol), || "proximal IAG left the polyhedron".into())?;
                c = step_saga(&problem, &mut saga, &c, gamma, &mut solver, &mut rng).map_err(|e| e.to_string())?.0;
                ensure(set.contains(&c, tol), || "SAGA left the polyhedron".into())?;
                checked += 2;
            }
            checked += 1;
        }
        for kind in [SolverKind::ProjIg, SolverKind::ProxIag, SolverKind::Saga] {
            let opts = BaselineOptions::new(RunOptions::iterations(10), BaselineStep::Constant(gamma));
            let h = run_baseline(kind, &problem, &set, &x0, &opts).map_err(|e| e.to_string())?;
            ensure(set.contains(&h.final_xbar, tol), || format!("{kind} reported an infeasible iterate"))?;
        }
    }
    Ok(format!(
        "IAG worst ratio {worst_ratio:.3} after pass 2; SAGA mean within {worst_sigma:.2}σ; {checked} iterates feasible"
    ))
}

fn projection_free() -> Check {
    let preset = SvmPreset::paper_fig1().scaled(100, 10);
    let inst = preset.build().map_err(|e| e.to_string())?;
    let x0 = vec![0.0; inst.dim()];
    let before = solve_calls_on_current_thread();
    let h = run_airig(&inst.problem, &preset.params, &x0, &RunOptions::iterations(2000)).map_err(|e| e.to_string())?;
    let calls = solve_calls_on_current_thread() - before;
    ensure(calls == 0, || format!("aIR-IG made {calls} QP calls"))?;
    // the counter does see the baselines
    let before = solve_calls_on_current_thread();
    let opts = BaselineOptions::new(RunOptions::iterations(1), BaselineStep::Diminishing { gamma0: 1.0 });
    run_baseline(SolverKind::ProjIg, &inst.problem, &inst.polyhedron, &x0, &opts).map_err(|e| e.to_string())?;
    let baseline_calls = solve_calls_on_current_thread() - before;
    ensure(baseline_calls > 0, || "counter did not register baseline projections".into())?;
    Ok(format!(
        "0 QP calls in {} aIR-IG passes (one projected IG pass: {baseline_calls})",
        h.iterations
    ))
}

fn end_to_end() -> Check {
    const BUDGET: Duration = Duration::from_secs(30);
    let preset = SvmPreset::paper_fig1();
    let inst = preset.build().map_err(|e| e.to_string())?;
    let x0 = vec![0.0; inst.dim()];
    let opts = RunOptions::iterations(u64::MAX).with_budget(BUDGET).with_eval_every(1000);
    let ours = run_airig(&inst.problem, &preset.params, &x0, &opts).map_err(|e| e.to_string())?;
    let phi = inst.problem.eval_phi(&ours.final_xbar).map_err(|e| e.to_string())?;
    let mut most = 0u64;
    let mut parts = Vec::new();
    for kind in [SolverKind::ProjIg, SolverKind::ProxIag, SolverKind::Saga] {
        let step = if kind == SolverKind::ProjIg {
            BaselineStep::Diminishing { gamma0: preset.params.gamma0 }
        } else {
            let g = tune_constant_step(kind, &inst.problem, &inst.polyhedron, &x0, PILOT_PASSES, 0)
                .map_err(|e| e.to_string())?;
            BaselineStep::Constant(g)
        };
        let h = run_baseline(kind, &inst.problem, &inst.polyhedron, &x0, &BaselineOptions::new(opts.clone(), step))
            .map_err(|e| e.to_string())?;
        most = most.max(h.iterations);
        parts.push(format!("{kind} {}", h.iterations));
    }
    let detail = format!(
        "aIR-IG {} passes, φ(x̄) {phi:.2e}; {} passes in {}s",
        ours.iterations,
        parts.join(", "),
        BUDGET.as_secs()
    );
    ensure(ours.iterations >= 10 * most && phi <= 1e-2, || detail.clone())?;
    Ok(detail)
}

/// Set `ACCEPTANCE_ONLY` to a substring of a criterion name to run a subset.
fn main() -> ExitCode {
    // `cargo test -- --list` and friends probe test binaries
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let only = std::env::var("ACCEPTANCE_ONLY").unwrap_or_default();
    let criteria: [(&str, fn() -> Check); 9] = [
        ("rate bound conformance", rate_bounds),
        ("empirical infeasibility rate", infeasibility_rate),
        ("harmonic sum sandwich", harmonic_sandwich),
        ("averaging identity", averaging_identity),
        ("drift bound", drift_bound),
        ("qp oracle equivalence", qp_oracle),
        ("baseline sanity", baseline_sanity),
        ("projection-free contract", projection_free),
        ("end-to-end comparison", end_to_end),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        if !name.contains(only.as_str()) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [PRIMARY] {name} ({secs:.1}s): {detail}"),
            Err(why) => {
                println!("FAIL [PRIMARY] {name} ({secs:.1}s): {why}");
                failed.push(name);
            }
        }
    }
    let ran = criteria.iter().filter(|(n, _)| n.contains(only.as_str())).count();
    println!("acceptance: {} of {ran} criteria passed", ran - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
