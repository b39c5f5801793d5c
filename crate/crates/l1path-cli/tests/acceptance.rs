//! Acceptance gate: one test per shipping criterion, each printing a
//! single `criterion N: PASS/FAIL` line (run with `--nocapture` to see
//! the lines on success; they are always shown on failure).
//!
//! Criteria:
//! 1. parametric sweeps match the concrete fixed-assignment solvers,
//! 2. closed-form exit thresholds for a known scalar pair,
//! 3. L1 regression paths are stationary everywhere and match brute
//!    force on exhaustively checkable instances,
//! 4. diagonal designs reproduce the soft-threshold closed form,
//! 5. output-side paths satisfy first-order conditions and match the
//!    iterative solver's objective,
//! 6. terminal intervals: inputs vanish (L1 input penalties), outputs
//!    freeze (output penalties with no end term),
//! 7. every produced path is piecewise affine and continuous, and the
//!    `check` subcommand is green on all fixtures,
//! 8. per-knot time on the trend filter scales at most 2.6x per
//!    doubling of the series length.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use l1path::nalgebra::{DMatrix, DVector};
use l1path::oracle::{
    brute_force_active_sets, kkt_residual_input, kkt_residual_output, solve_output_reg,
};
use l1path::parametric::{param_bffd, param_ffbdd, ParamAffine};
use l1path::path::{
    eval_path, exit_sigma2, path_bffd, path_bffd_limited, path_ffbdd, PathPiece, RegPath,
};
use l1path::plcost::SegmentedCost;
use l1path::solvers::{bffd, ffbdd};
use l1path::ssm::{RegSide, StateSpaceModel};
use l1path::tol;
use l1path::Error;

/// Fail the whole criterion with a formatted message.
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn report(number: u32, what: &str, outcome: Result<(), String>) {
    match outcome {
        Ok(()) => println!("criterion {number} ({what}): PASS"),
        Err(why) => {
            println!("criterion {number} ({what}): FAIL - {why}");
            panic!("criterion {number} ({what}) failed: {why}");
        }
    }
}

fn rel_ok(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * (1.0 + b.abs())
}

fn piece_mid(piece: &PathPiece) -> f64 {
    if piece.hi.is_finite() {
        0.5 * (piece.lo + piece.hi)
    } else {
        piece.lo + 1.0
    }
}

/// A random piecewise-linear convex cost: absolute value, a shifted
/// two-sided insensitive band, or a three-slope custom shape.
fn random_cost(rng: &mut ChaCha8Rng) -> SegmentedCost {
    match rng.gen_range(0..3) {
        0 => SegmentedCost::make_l1(),
        1 => {
            let a = rng.gen_range(-1.2..-0.1);
            let b = rng.gen_range(0.1..1.2);
            SegmentedCost::make_vapnik(a, b).expect("a < b")
        }
        _ => {
            let b0 = rng.gen_range(-1.0..-0.2);
            let b1 = rng.gen_range(0.2..1.0);
            let s0 = rng.gen_range(-2.0..-0.5);
            let s1 = rng.gen_range(-0.3..0.3);
            let s2 = rng.gen_range(0.5..2.0);
            SegmentedCost::make_custom(&[b0, b1], &[s0, s1, s2]).expect("increasing slopes")
        }
    }
}

fn random_psd(rng: &mut ChaCha8Rng, m: usize, ridge: f64) -> DMatrix<f64> {
    let r = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-0.6..0.6));
    &r * r.transpose() + DMatrix::identity(m, m) * ridge
}

/// Random general state space model on the requested side.
fn random_model(rng: &mut ChaCha8Rng, side: RegSide) -> StateSpaceModel {
    loop {
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(2..=12);
        let a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-0.7..0.7))
            + DMatrix::identity(m, m) * 0.4;
        let b: Vec<DVector<f64>> =
            (0..n).map(|_| DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let c: Vec<DVector<f64>> =
            (0..n).map(|_| DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let fixed_initial_state = side == RegSide::Input && rng.gen_bool(0.3);
        let q0 = if fixed_initial_state {
            DMatrix::zeros(m, m)
        } else {
            random_psd(rng, m, 0.4)
        };
        let qn = if rng.gen_bool(0.5) {
            DMatrix::zeros(m, m)
        } else {
            random_psd(rng, m, 0.1)
        };
        let raw_costs: Vec<SegmentedCost> = (0..n).map(|_| random_cost(rng)).collect();
        let costs = match side {
            RegSide::Input => raw_costs,
            // Output penalties act on the deviation from the data.
            RegSide::Output => raw_costs.iter().zip(&y).map(|(k, &yn)| k.shifted(yn)).collect(),
        };
        let model = StateSpaceModel {
            state_dim: m,
            steps: n,
            a,
            b,
            c,
            side,
            y: y.clone(),
            q0,
            x0_bar: DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)),
            fixed_initial_state,
            qn,
            xn_bar: DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)),
            costs,
        };
        if model.validate().is_ok() {
            return model;
        }
    }
}

/// A uniformly random segment assignment that the parametric sweep
/// accepts (some assignments are unidentifiable; redraw those).
fn admissible_active(rng: &mut ChaCha8Rng, model: &StateSpaceModel) -> Option<Vec<usize>> {
    for _ in 0..60 {
        let active: Vec<usize> = model
            .costs
            .iter()
            .map(|k| rng.gen_range(0..k.num_segments()))
            .collect();
        let ok = match model.side {
            RegSide::Input => param_bffd(model, &active).is_ok(),
            RegSide::Output => param_ffbdd(model, &active).is_ok(),
        };
        if ok {
            return Some(active);
        }
    }
    None
}

// ---------------------------------------------------------------------
// 1. Parametric sweeps match the concrete solvers.
// ---------------------------------------------------------------------

#[test]
fn criterion_1_parametric_sweeps_match_concrete_solvers() {
    report(1, "parametric sweeps match concrete solvers", criterion_1());
}

fn criterion_1() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC0_0001);
    let started = Instant::now();
    let mut done = 0;
    while done < 50 {
        let side = if done % 2 == 0 { RegSide::Input } else { RegSide::Output };
        let model = random_model(&mut rng, side);
        let Some(active) = admissible_active(&mut rng, &model) else {
            continue;
        };
        for _ in 0..10 {
            // Log-uniform over (1e-3, 1e3).
            let sigma2 = 10.0_f64.powf(rng.gen_range(-3.0..3.0));
            let check = match side {
                RegSide::Input => {
                    let par = param_bffd(&model, &active).map_err(|e| e.to_string())?.eval(sigma2);
                    let con = bffd(&model, sigma2, &active).map_err(|e| e.to_string())?;
                    compare(&par.u, &con.u, "u")
                        .or(compare(&par.y, &con.y, "y"))
                        .or(compare(par.x0.as_slice(), con.x0.as_slice(), "x0"))
                }
                RegSide::Output => {
                    let par = param_ffbdd(&model, &active).map_err(|e| e.to_string())?.eval(sigma2);
                    let con = ffbdd(&model, sigma2, &active).map_err(|e| e.to_string())?;
                    compare(&par.u, &con.u, "u")
                        .or(compare(&par.y, &con.y, "y"))
                        .or(compare(
                            par.x0_posterior.as_slice(),
                            con.x0_posterior.as_slice(),
                            "x0",
                        ))
                }
            };
            if let Some(why) = check {
                return Err(format!("model {done} at sigma2 = {sigma2}: {why}"));
            }
        }
        done += 1;
    }
    println!("  criterion 1 detail: 50 models x 10 sigma2 in {:?}", started.elapsed());
    Ok(())
}

/// Largest relative mismatch, or None when within 1e-9.
fn compare(a: &[f64], b: &[f64], what: &str) -> Option<String> {
    if a.len() != b.len() {
        return Some(format!("{what}: length {} vs {}", a.len(), b.len()));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if !rel_ok(*x, *y, 1e-9) {
            return Some(format!("{what}[{i}]: parametric {x} vs concrete {y}"));
        }
    }
    None
}

// ---------------------------------------------------------------------
// 2. Closed-form exit thresholds for the shifted scalar pair.
// ---------------------------------------------------------------------

#[test]
fn criterion_2_closed_form_exit_thresholds() {
    report(2, "closed-form exit thresholds", criterion_2());
}

fn criterion_2() -> Result<(), String> {
    // Incoming pair: mean sigma2 + 2, variance 2 sigma2, against |u|.
    let cost = SegmentedCost::make_l1();
    let mb = ParamAffine::in_sigma2(1.0, 2.0);
    let vb = ParamAffine::in_sigma2(2.0, 0.0);

    // Active right line u > 0: valid exactly up to sigma2 = 2.
    let exit = exit_sigma2(&cost, 2, mb, vb, 0.0).map_err(|e| e.to_string())?;
    ensure!(exit == 2.0, "right line: expected exactly 2, got {exit}");

    // Active kink {{0}}: valid from 2 on, never exits.
    let exit = exit_sigma2(&cost, 1, mb, vb, 0.0).map_err(|e| e.to_string())?;
    ensure!(exit == f64::INFINITY, "kink: expected +inf, got {exit}");

    // Active left line u < 0: wrong for every sigma2 >= 0.
    match exit_sigma2(&cost, 0, mb, vb, 0.0) {
        Err(Error::Infeasible { index: 0 }) => Ok(()),
        other => Err(format!("left line: expected the infeasible report, got {other:?}")),
    }
}

// ---------------------------------------------------------------------
// 3. L1 regression paths: stationary everywhere, equal to brute force.
// ---------------------------------------------------------------------

#[test]
fn criterion_3_l1_regression_paths_are_optimal() {
    report(3, "L1 regression path optimality", criterion_3());
}

fn criterion_3() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC0_0003);
    let started = Instant::now();
    for instance in 0..30 {
        let l = rng.gen_range(2..=8);
        let k = rng.gen_range(1..=12);
        let f = DMatrix::from_fn(l, k, |_, _| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let model = StateSpaceModel::lasso_model(&f, &y).map_err(|e| e.to_string())?;
        let path = path_bffd(&model)
            .map_err(|e| format!("instance {instance} ({l}x{k}): path failed: {e}"))?;

        // Stationarity at the midpoint of every interval.
        for (i, piece) in path.pieces.iter().enumerate() {
            let mid = piece_mid(piece);
            let res = kkt_residual_input(&model, mid, &eval_path(&path, mid))
                .map_err(|e| e.to_string())?;
            ensure!(
                res <= 1e-6,
                "instance {instance}: residual {res:.3e} at piece {i} midpoint {mid}"
            );
        }

        // ... and at 25 samples spread over the whole range.
        let top = path
            .knots
            .iter()
            .copied()
            .filter(|x| x.is_finite())
            .fold(0.0_f64, f64::max)
            .max(1e-3);
        for j in 0..25 {
            let sigma2 = 1.3 * top * (j as f64 + 0.5) / 25.0;
            let res = kkt_residual_input(&model, sigma2, &eval_path(&path, sigma2))
                .map_err(|e| e.to_string())?;
            ensure!(
                res <= 1e-6,
                "instance {instance}: residual {res:.3e} at global sample {sigma2}"
            );
        }

        // Exhaustive comparison where the assignment space is small.
        if k <= 6 {
            let picks = [0, path.pieces.len() / 2, path.pieces.len() - 1];
            for &i in &picks {
                let mid = piece_mid(&path.pieces[i]);
                let bf = brute_force_active_sets(&model, mid).map_err(|e| e.to_string())?;
                let u = eval_path(&path, mid);
                for n in 0..u.len() {
                    ensure!(
                        rel_ok(u[n], bf.u[n], 1e-6),
                        "instance {instance}: path u[{n}] = {} vs brute force {} at {mid}",
                        u[n],
                        bf.u[n]
                    );
                }
                let ev = param_bffd(&model, &path.pieces[i].active)
                    .map_err(|e| e.to_string())?
                    .eval(mid);
                let obj = model.objective(mid, &ev.x0, &ev.u);
                ensure!(
                    obj <= bf.objective + 1e-6,
                    "instance {instance}: path objective {obj} vs brute force {} at {mid}",
                    bf.objective
                );
            }
        }
    }
    let elapsed = started.elapsed();
    ensure!(
        elapsed < Duration::from_secs(60),
        "30 instances took {elapsed:?} (budget 1 minute)"
    );
    println!("  criterion 3 detail: 30 instances in {elapsed:?}");
    Ok(())
}

// ---------------------------------------------------------------------
// 4. Diagonal designs reproduce the soft-threshold closed form.
// ---------------------------------------------------------------------

#[test]
fn criterion_4_diagonal_design_soft_threshold() {
    report(4, "diagonal-design soft threshold", criterion_4());
}

fn criterion_4() -> Result<(), String> {
    let d = [2.0, -1.0, 0.5, 1.5, -0.7];
    let y = [1.2, -0.9, 2.0, 0.015, -1.4];
    let f = DMatrix::from_fn(5, 5, |i, j| if i == j { d[i] } else { 0.0 });
    let model = StateSpaceModel::lasso_model(&f, &y).map_err(|e| e.to_string())?;
    let path = path_bffd(&model).map_err(|e| e.to_string())?;

    // With a diagonal design the problem separates: coordinate n's
    // stationarity d(du - y) + sigma2 * sign(u) = 0 gives
    //   u_n(sigma2) = sign(d y) * max(|d y| - sigma2, 0) / d^2,
    // so the knots are exactly the distinct |d_n y_n|.
    let mut thresholds: Vec<f64> = d.iter().zip(&y).map(|(di, yi)| (di * yi).abs()).collect();
    let mut expected = thresholds.clone();
    expected.sort_by(f64::total_cmp);
    expected.insert(0, 0.0);
    expected.push(f64::INFINITY);
    ensure!(
        path.knots.len() == expected.len(),
        "expected {} knots, got {} ({:?})",
        expected.len(),
        path.knots.len(),
        path.knots
    );
    for (got, want) in path.knots.iter().zip(&expected) {
        if want.is_finite() {
            ensure!((got - want).abs() <= 1e-8, "knot {got} should be {want}");
        } else {
            ensure!(*got == f64::INFINITY, "last knot should be +inf, got {got}");
        }
    }

    // Per-coordinate values across every interval and beyond the end.
    thresholds.sort_by(f64::total_cmp);
    let mut samples: Vec<f64> = Vec::new();
    let mut prev = 0.0;
    for &t in &thresholds {
        samples.push(0.5 * (prev + t));
        prev = t;
    }
    samples.push(prev + 1.0);
    for &sigma2 in &samples {
        let u = eval_path(&path, sigma2);
        for n in 0..5 {
            let r = d[n] * y[n];
            let closed = r.signum() * (r.abs() - sigma2).max(0.0) / (d[n] * d[n]);
            ensure!(
                (u[n] - closed).abs() <= 1e-8,
                "u[{n}]({sigma2}) = {} but the closed form gives {closed}",
                u[n]
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// 5. Output-side paths against the iterative first-order solver.
// ---------------------------------------------------------------------

#[test]
fn criterion_5_output_paths_match_the_iterative_solver() {
    report(5, "output-side stationarity and objective", criterion_5());
}

fn criterion_5() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC0_0005);
    for instance in 0..8 {
        let k = rng.gen_range(1..=6);
        let l = rng.gen_range(2..=10);
        let f = DMatrix::from_fn(l, k, |_, _| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let model = StateSpaceModel::output_model(&f, &y).map_err(|e| e.to_string())?;
        let path = path_ffbdd(&model)
            .map_err(|e| format!("instance {instance} ({l}x{k}): path failed: {e}"))?;

        // Sample up to four intervals: ends plus two interior.
        let count = path.pieces.len();
        let mut picks = vec![0, count / 3, 2 * count / 3, count - 1];
        picks.dedup();
        for &i in &picks {
            let piece = &path.pieces[i];
            let mid = piece_mid(piece);
            let out = param_ffbdd(&model, &piece.active)
                .map_err(|e| e.to_string())?
                .eval(mid);
            let res = kkt_residual_output(&model, mid, &out.x0_posterior, &out.u)
                .map_err(|e| e.to_string())?;
            ensure!(
                res <= 1e-6,
                "instance {instance}: residual {res:.3e} at piece {i} midpoint {mid}"
            );

            let sol = solve_output_reg(&model, mid).map_err(|e| e.to_string())?;
            ensure!(
                sol.report.converged,
                "instance {instance}: iterative solver did not converge at {mid}"
            );
            let path_obj = model.objective(mid, &out.x0_posterior, &out.u);
            let oracle_obj = model.objective(mid, &sol.x0, &sol.u);
            ensure!(
                oracle_obj - path_obj <= 1e-6,
                "instance {instance}: iterative objective {oracle_obj} exceeds the path's {path_obj} by more than 1e-6 at {mid}"
            );
            // The reverse direction is asserted only where f64 can hold
            // it: the objective carries a 2σ² factor, so a single-ulp
            // residue in a coefficient slope is amplified by ~2σ⁴ and an
            // absolute 1e-6 stops being representable past σ² ~ 1e3.
            if mid <= 1e3 {
                ensure!(
                    path_obj - oracle_obj <= 1e-6,
                    "instance {instance}: path objective {path_obj} is worse than the iterative {oracle_obj} at {mid}"
                );
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// 6. Terminal intervals.
// ---------------------------------------------------------------------

#[test]
fn criterion_6_terminal_intervals() {
    report(6, "terminal interval behavior", criterion_6());
}

fn criterion_6() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC0_0006);

    // |u| input penalties: the last interval is identically zero.
    for instance in 0..5 {
        let l = rng.gen_range(3..=7);
        let k = rng.gen_range(2..=8);
        let f = DMatrix::from_fn(l, k, |_, _| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let model = StateSpaceModel::lasso_model(&f, &y).map_err(|e| e.to_string())?;
        let path = path_bffd(&model).map_err(|e| e.to_string())?;
        let last = path.pieces.last().expect("nonempty path");
        ensure!(last.hi == f64::INFINITY, "last interval must be unbounded");
        for (n, c) in last.coeffs.iter().enumerate() {
            ensure!(
                c.c1 == 0.0 && c.c0 == 0.0,
                "instance {instance}: terminal u[{n}] is {}*sigma2 + {}, not 0",
                c.c1,
                c.c0
            );
        }
        let probe = eval_path(&path, 2.0 * last.lo.max(1.0));
        ensure!(
            probe.iter().all(|v| *v == 0.0),
            "instance {instance}: terminal evaluation is not exactly zero"
        );
    }

    // Robust level smoother (no end weight): the last interval's output
    // no longer moves with sigma2.
    let y = [1.0, 1.2, 0.9, 1.1, 6.0, 1.0, 0.8, 1.15, 0.95, 1.05];
    let model = StateSpaceModel::median_smoother_model(&y, 1e-3).map_err(|e| e.to_string())?;
    let summary = model.validate().map_err(|e| e.to_string())?;
    ensure!(summary.qn_zero, "the smoother must carry no end weight");
    let path = path_ffbdd(&model).map_err(|e| e.to_string())?;
    let last = path.pieces.last().expect("nonempty path");
    ensure!(last.hi == f64::INFINITY, "last interval must be unbounded");
    for (n, c) in last.coeffs.iter().enumerate() {
        ensure!(
            c.c1.abs() <= 1e-12 * (1.0 + c.c0.abs()),
            "terminal y[{n}] still has slope {} in sigma2",
            c.c1
        );
    }
    let a = eval_path(&path, last.lo + 1.0);
    let b = eval_path(&path, 10.0 * (last.lo + 1.0));
    for n in 0..a.len() {
        ensure!(
            (a[n] - b[n]).abs() <= 1e-9 * (1.0 + a[n].abs()),
            "terminal y[{n}] moved from {} to {}",
            a[n],
            b[n]
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------
// 7. Affinity + continuity on every produced path; `check` green on all
//    fixtures.
// ---------------------------------------------------------------------

#[test]
fn criterion_7_affinity_continuity_and_check_subcommand() {
    report(7, "piecewise affinity, continuity, check green", criterion_7());
}

/// Second differences of equally spaced interior samples, and value
/// agreement across knots.
fn affine_and_continuous(path: &RegPath) -> Result<(), String> {
    path.validate().map_err(|e| format!("structural validation: {e}"))?;
    for (i, piece) in path.pieces.iter().enumerate() {
        let lo = piece.lo;
        let hi = if piece.hi.is_finite() { piece.hi } else { lo + 2.0 * (1.0 + lo) };
        let samples: Vec<Vec<f64>> =
            (1..=4).map(|j| eval_path(path, lo + (hi - lo) * j as f64 / 5.0)).collect();
        for n in 0..path.steps {
            let v: Vec<f64> = samples.iter().map(|s| s[n]).collect();
            let scale = 1.0 + v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
            for w in v.windows(3) {
                let second = w[0] - 2.0 * w[1] + w[2];
                ensure!(
                    second.abs() <= 1e-9 * scale,
                    "coordinate {n} bends inside piece {i} (second difference {second:.3e})"
                );
            }
        }
    }
    for i in 0..path.pieces.len().saturating_sub(1) {
        let k = path.knots[i + 1];
        for n in 0..path.steps {
            let a = path.pieces[i].coeffs[n].eval(k);
            let b = path.pieces[i + 1].coeffs[n].eval(k);
            ensure!(
                (a - b).abs() <= tol::knot_eps(k) * (1.0 + a.abs().max(b.abs())),
                "coordinate {n} jumps from {a} to {b} at the knot {k}"
            );
        }
    }
    Ok(())
}

fn criterion_7() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC0_0007);

    // Direct affinity/continuity over a spread of produced paths.
    let bent: Vec<f64> =
        (0..24).map(|i| if i < 12 { 0.4 * i as f64 } else { 4.4 - 0.6 * (i - 12) as f64 }).collect();
    let level = [1.0, 1.2, 0.9, 1.1, 6.0, 1.0, 0.8, 1.15, 0.95, 1.05];
    let mut paths: Vec<RegPath> = vec![
        path_bffd(&StateSpaceModel::trend_filter_model(&bent).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?,
        path_ffbdd(&StateSpaceModel::median_smoother_model(&level, 1e-3).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?,
    ];
    for _ in 0..6 {
        let l = rng.gen_range(2..=8);
        let k = rng.gen_range(1..=10);
        let f = DMatrix::from_fn(l, k, |_, _| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect();
        paths.push(
            path_bffd(&StateSpaceModel::lasso_model(&f, &y).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?,
        );
        let costs = vec![SegmentedCost::make_vapnik(-0.5, 0.5).expect("band"); k];
        paths.push(
            path_bffd(
                &StateSpaceModel::input_matrix_model(&f, &y, costs).map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?,
        );
    }
    for (i, path) in paths.iter().enumerate() {
        affine_and_continuous(path).map_err(|why| format!("path {i}: {why}"))?;
    }

    // The `check` subcommand must be green on every fixture the CLI
    // supports end to end.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let series = dir.path().join("series.csv");
    fs::write(&series, bent.iter().map(|v| format!("{v}\n")).collect::<String>())
        .map_err(|e| e.to_string())?;
    let matrix = dir.path().join("matrix.csv");
    let mut text = String::new();
    for i in 0..7 {
        for j in 0..4 {
            text.push_str(&format!("{},", ((i * 4 + j) as f64 * 0.37).sin()));
        }
        text.push_str(&format!("{}\n", ((i as f64) * 0.9).cos() * 2.0));
    }
    fs::write(&matrix, text).map_err(|e| e.to_string())?;

    let fixtures: Vec<(&str, &std::path::Path, Vec<&str>)> = vec![
        ("trend_filter", &series, vec![]),
        ("median_smoother", &series, vec!["--q0", "0.01"]),
        ("lasso", &matrix, vec![]),
        ("svr", &matrix, vec![]),
        ("custom", &matrix, vec!["--cost", r#"{"breakpoints":[-0.25,0.25],"slopes":[-1.0,0.0,1.0]}"#]),
    ];
    for (preset, data, extra) in fixtures {
        let out = dir.path().join(format!("{preset}.json"));
        let mut args = vec![
            "run",
            "--preset",
            preset,
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend(&extra);
        let run = Command::new(env!("CARGO_BIN_EXE_l1path"))
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            run.status.code() == Some(0),
            "run failed on the {preset} fixture: {}",
            String::from_utf8_lossy(&run.stderr)
        );
        let mut args = vec![
            "check",
            "--path",
            out.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--preset",
            preset,
        ];
        args.extend(&extra);
        let check = Command::new(env!("CARGO_BIN_EXE_l1path"))
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            check.status.code() == Some(0),
            "check not green on the {preset} fixture:\n{}",
            String::from_utf8_lossy(&check.stdout)
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------
// 8. Per-knot time scaling on the trend filter.
// ---------------------------------------------------------------------

#[test]
fn criterion_8_per_knot_time_scaling() {
    report(8, "per-knot time scaling", criterion_8());
}

fn criterion_8() -> Result<(), String> {
    const SIZES: [usize; 3] = [2000, 4000, 8000];
    const BUDGET: usize = 40;
    const ROUNDS: usize = 5;

    let mut rng = ChaCha8Rng::seed_from_u64(0xACC0_0008);
    let mut series: Vec<Vec<f64>> = Vec::new();
    for &n in &SIZES {
        series.push(
            (0..n)
                .map(|i| (0.05 * i as f64).sin() + rng.gen_range(-0.3..0.3))
                .collect(),
        );
    }

    // Round-robin over the sizes so machine noise hits all of them alike.
    let mut per_knot: Vec<Vec<f64>> = vec![Vec::new(); SIZES.len()];
    for _ in 0..ROUNDS {
        for (s, y) in series.iter().enumerate() {
            let model = StateSpaceModel::trend_filter_model(y).map_err(|e| e.to_string())?;
            let started = Instant::now();
            let path = path_bffd_limited(&model, BUDGET).map_err(|e| e.to_string())?;
            let elapsed = started.elapsed().as_secs_f64();
            let knots = path.knots.iter().filter(|k| k.is_finite() && **k > 0.0).count();
            ensure!(knots > 0, "size {}: no knots produced", SIZES[s]);
            per_knot[s].push(elapsed / knots as f64);
        }
    }

    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let med: Vec<f64> = per_knot.into_iter().map(median).collect();
    println!(
        "  criterion 8 detail: per-knot medians {:.3} ms (N=2000), {:.3} ms (N=4000), {:.3} ms (N=8000)",
        med[0] * 1e3,
        med[1] * 1e3,
        med[2] * 1e3
    );
    for s in 1..SIZES.len() {
        let ratio = med[s] / med[s - 1];
        ensure!(
            ratio <= 2.6,
            "per-knot time grew {ratio:.2}x from N = {} to N = {} (limit 2.6x)",
            SIZES[s - 1],
            SIZES[s]
        );
    }
    Ok(())
}
