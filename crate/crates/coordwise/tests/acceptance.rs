//! Acceptance gate: one test per criterion, each printing a single PASS/FAIL
//! line (visible with `cargo test -- --nocapture`). All tolerances are pinned
//! here rather than taken from defaults, so the gate does not drift.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use coordwise::analysis::{
    check_condition_cw, check_condition_strict, classify_convergence, condition_b_certificate,
    energy_profile_monotone, hessian_kernel_basis, kernel_zero_component_property,
    AnalysisParams, ConvergenceVerdict,
};
use coordwise::energy::{Edge, EdgePotential, EnergyFunction, PotentialKind};
use coordwise::multiagent::{
    envelope_monotonicity_check, find_constrained_minimizer, ActuatorModel,
};
use coordwise::scenarios::{
    build_platoon, default_quad_descent, example1_trajectory, quadratic_descent_trajectory,
    spiral_trajectory, PlatoonPerturbation, PlatoonPotential,
};

fn report(criterion: usize, label: &str, result: Result<(), String>) {
    match &result {
        Ok(()) => println!("acceptance criterion {criterion} ({label}): PASS"),
        Err(msg) => println!("acceptance criterion {criterion} ({label}): FAIL — {msg}"),
    }
    if let Err(msg) = result {
        panic!("criterion {criterion} failed: {msg}");
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

#[test]
fn criterion_1_example1_reproduction() {
    report(1, "Example 1 reproduction", (|| {
        let start = Instant::now();
        let traj = example1_trajectory(200.0, 0.01).map_err(|e| e.to_string())?;
        let v = EnergyFunction::box_distance_quartic(
            DVector::from_vec(vec![-1.0, -1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .map_err(|e| e.to_string())?;

        // (i) zero weak-condition violations at tol 1e-9
        let weak = check_condition_cw(&traj, &v, 1e-9).map_err(|e| e.to_string())?;
        ensure!(weak.passed(), "weak condition: {} violations", weak.violations.len());

        // (ii) verdict NotConverged
        let params = AnalysisParams::default();
        let verdict = classify_convergence(&traj, &v, &params).map_err(|e| e.to_string())?;
        let (centers, certs) = match verdict {
            ConvergenceVerdict::NotConverged { accumulation_points, condition_b } => {
                (accumulation_points, condition_b)
            }
            other => return Err(format!("expected NotConverged, got {other:?}")),
        };

        // (iii) >= 5 centers within 0.05 of {2} x [-1, 1], second coordinates
        // spanning at least [-0.9, 0.9]
        ensure!(centers.len() >= 5, "only {} accumulation centers", centers.len());
        let mut y2_min = f64::INFINITY;
        let mut y2_max = f64::NEG_INFINITY;
        for c in &centers {
            let dist =
                ((c[0] - 2.0).powi(2) + (c[1].abs() - 1.0).max(0.0).powi(2)).sqrt();
            ensure!(dist <= 0.05, "center {c:?} is {dist} from {{2}}x[-1,1]");
            y2_min = y2_min.min(c[1]);
            y2_max = y2_max.max(c[1]);
        }
        ensure!(
            y2_min <= -0.9 && y2_max >= 0.9,
            "second coordinates span [{y2_min}, {y2_max}], need to cover [-0.9, 0.9]"
        );

        // (iv) condition (b) holds at every center, kernel aligned with (0, 1)
        for cert in &certs {
            ensure!(
                cert.holds && cert.sigma_min < 1e-8 * cert.sigma_max,
                "certificate at {:?}: sigma_min {:e}, sigma_max {:e}",
                cert.point,
                cert.sigma_min,
                cert.sigma_max
            );
            let angle = cert.kernel_vector[1].abs().min(1.0).acos();
            ensure!(
                angle <= 1e-4,
                "kernel vector {:?} at {:?} is {angle} rad from (0,1)",
                cert.kernel_vector,
                cert.point
            );
        }

        let elapsed = start.elapsed().as_secs_f64();
        ensure!(elapsed < 2.0, "runtime {elapsed:.2}s exceeds 2s");
        Ok(())
    })());
}

#[test]
fn criterion_2_spiral_separation() {
    report(2, "spiral separation", (|| {
        let traj = spiral_trajectory(20.0, 0.01).map_err(|e| e.to_string())?;
        let v = EnergyFunction::euclidean_norm(2).map_err(|e| e.to_string())?;
        let profile = energy_profile_monotone(&traj, &v, 1e-12).map_err(|e| e.to_string())?;
        ensure!(
            profile.monotone && profile.max_increase <= 1e-12,
            "energy profile max increase {:e}",
            profile.max_increase
        );
        let weak = check_condition_cw(&traj, &v, 1e-9).map_err(|e| e.to_string())?;
        let frac = weak.violations.len() as f64 / weak.checked_pairs() as f64;
        ensure!(frac >= 0.10, "violation fraction {frac:.3} below 10%");
        Ok(())
    })());
}

#[test]
fn criterion_3_corollary3_quad_descent() {
    report(3, "strongly convex stop-go descent", (|| {
        let start = Instant::now();
        let seed = 2026;
        let (q, gains, y0) = default_quad_descent(seed);
        let traj = quadratic_descent_trajectory(&q, &gains, &y0, 200.0, 1e-3, seed)
            .map_err(|e| e.to_string())?;
        let v = EnergyFunction::quadratic(q.clone()).map_err(|e| e.to_string())?;
        let params = AnalysisParams::default();
        let verdict = classify_convergence(&traj, &v, &params).map_err(|e| e.to_string())?;
        let (limit, tail_diameter) = match verdict {
            ConvergenceVerdict::Converged { limit, tail_diameter } => (limit, tail_diameter),
            other => return Err(format!("expected Converged, got {other:?}")),
        };
        ensure!(tail_diameter < 1e-4, "tail diameter {tail_diameter:e}");
        let grad_norm = (2.0 * &q * &limit).norm();
        ensure!(grad_norm < 1e-3, "final gradient norm {grad_norm:e}");
        let elapsed = start.elapsed().as_secs_f64();
        ensure!(elapsed < 5.0, "runtime {elapsed:.2}s exceeds 5s");
        Ok(())
    })());
}

fn acceptance_platoon(pbar: f64, actuator: ActuatorModel) -> coordwise::multiagent::MultiAgentConfig {
    let mut cfg = build_platoon(
        5,
        1.0,
        PlatoonPotential::Quadratic { weight: 4.0 },
        pbar,
        PlatoonPerturbation::SinusoidStallMix { amplitude_frac: 0.8 },
        actuator,
        11,
    )
    .expect("valid platoon");
    cfg.t_end = 200.0;
    cfg.dt = 1e-3;
    cfg
}

#[test]
fn criterion_4_platoon_convergence() {
    report(4, "perturbed platoon", (|| {
        let start = Instant::now();
        let cfg =
            acceptance_platoon(0.1, ActuatorModel::StopGo { period: 1.0, duty: 0.5, kappa: 1.0 });
        let out = cfg.simulate().map_err(|e| e.to_string())?;
        let v = cfg.energy().map_err(|e| e.to_string())?;

        // (i) strict condition, zero violations
        let strict = check_condition_strict(&out.trajectory, &v, 1e-12, 1e-9)
            .map_err(|e| e.to_string())?;
        ensure!(
            strict.passed(),
            "{} strict violations, worst product {:e}",
            strict.violations.len(),
            strict.worst_violation
        );

        // (ii) energy nonincreasing within 10*dt^2 per step
        let profile = energy_profile_monotone(&out.trajectory, &v, 10.0 * cfg.dt * cfg.dt)
            .map_err(|e| e.to_string())?;
        ensure!(profile.monotone, "energy max increase {:e}", profile.max_increase);

        // (iii) envelope monotonicity within 10*dt
        let minimizer = find_constrained_minimizer(&v, 1e-9).map_err(|e| e.to_string())?;
        let mean = cfg.y0.iter().sum::<f64>() / cfg.n as f64;
        let x_star = minimizer.x.map(|v| v + mean);
        let env = envelope_monotonicity_check(&out.trajectory, &x_star);
        ensure!(
            env.max_upper_increase <= 10.0 * cfg.dt && env.max_lower_decrease <= 10.0 * cfg.dt,
            "envelope drift: upper {:e}, lower {:e}",
            env.max_upper_increase,
            env.max_lower_decrease
        );

        // (iv) verdict Converged
        let params = AnalysisParams::default();
        let verdict =
            classify_convergence(&out.trajectory, &v, &params).map_err(|e| e.to_string())?;
        let limit = match verdict {
            ConvergenceVerdict::Converged { limit, .. } => limit,
            other => return Err(format!("expected Converged, got {other:?}")),
        };

        // (v) residual-set membership of the limit
        let sp = cfg.sp_membership(limit.as_slice(), 1e-8);
        ensure!(sp.member, "limit not in S^p: {:?}", sp.agents);

        let elapsed = start.elapsed().as_secs_f64();
        ensure!(elapsed < 10.0, "runtime {elapsed:.2}s exceeds 10s");
        Ok(())
    })());
}

#[test]
fn criterion_5_zero_perturbation_limit() {
    report(5, "zero-perturbation platoon limit", (|| {
        let cfg = acceptance_platoon(0.0, ActuatorModel::Identity);
        let out = cfg.simulate().map_err(|e| e.to_string())?;
        let v = cfg.energy().map_err(|e| e.to_string())?;
        let params = AnalysisParams::default();
        let verdict =
            classify_convergence(&out.trajectory, &v, &params).map_err(|e| e.to_string())?;
        let limit = match verdict {
            ConvergenceVerdict::Converged { limit, .. } => limit,
            other => return Err(format!("expected Converged, got {other:?}")),
        };
        let minimizer = find_constrained_minimizer(&v, 1e-10).map_err(|e| e.to_string())?;
        ensure!(
            minimizer.grad_norm < 1e-10,
            "minimizer gradient norm {:e}",
            minimizer.grad_norm
        );
        // oracle for the linear quadratic case: the equally spaced profile
        let spaced: DVector<f64> =
            DVector::from_fn(5, |i, _| i as f64 - 2.0);
        ensure!(
            (&minimizer.x - &spaced).amax() < 1e-7,
            "minimizer {:?} differs from equally spaced profile",
            minimizer.x
        );
        let mean = limit.sum() / limit.len() as f64;
        let centered = limit.map(|v| v - mean);
        let err = (&centered - &minimizer.x).amax();
        ensure!(err < 1e-3, "centered limit is {err:e} from the constrained minimizer");
        Ok(())
    })());
}

fn random_potential(rng: &mut ChaCha12Rng) -> EdgePotential {
    let weight = rng.gen_range(0.5..2.0);
    let spacing = rng.gen_range(-0.5..0.5);
    let kind = match rng.gen_range(0..3) {
        0 => PotentialKind::QuadraticSpacing { weight, spacing },
        1 => PotentialKind::QuadQuartic { weight, spacing, quartic: rng.gen_range(0.0..1.0) },
        _ => PotentialKind::Cosh { weight, spacing },
    };
    EdgePotential::new(kind, 0.0).expect("valid potential")
}

#[test]
fn criterion_6_lemma5_structure() {
    report(6, "pairwise Hessian Laplacian structure", (|| {
        let mut rng = ChaCha12Rng::seed_from_u64(66);
        for case in 0..100 {
            let n = rng.gen_range(2..=8usize);
            // random connected graph: spanning tree plus up to n extras
            let mut pairs: Vec<(usize, usize)> = Vec::new();
            for i in 1..n {
                pairs.push((rng.gen_range(0..i), i));
            }
            for _ in 0..rng.gen_range(0..=n) {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                let (a, b) = (a.min(b), a.max(b));
                if a != b && !pairs.contains(&(a, b)) {
                    pairs.push((a, b));
                }
            }
            let edges: Vec<Edge> = pairs
                .iter()
                .map(|&(a, b)| Edge { a, b, potential: random_potential(&mut rng) })
                .collect();
            let v = EnergyFunction::pairwise(n, edges.clone()).map_err(|e| e.to_string())?;
            let x = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let h = v.hessian(&x).map_err(|e| e.to_string())?;

            // oracle: weighted Laplacian with edge weights 2 f''(gap)
            let mut lap = DMatrix::zeros(n, n);
            for e in &edges {
                let w = 2.0 * e.potential.second_deriv(x[e.b] - x[e.a]);
                ensure!(w > 0.0, "case {case}: nonpositive weight {w}");
                lap[(e.a, e.a)] += w;
                lap[(e.b, e.b)] += w;
                lap[(e.a, e.b)] -= w;
                lap[(e.b, e.a)] -= w;
            }
            let dev = (&h - &lap).amax();
            ensure!(dev < 1e-9, "case {case}: Hessian deviates from Laplacian by {dev:e}");

            // numerical kernel exactly span{1}
            let basis = hessian_kernel_basis(&h, 1e-8).map_err(|e| e.to_string())?;
            ensure!(basis.ncols() == 1, "case {case}: nullity {}", basis.ncols());
            let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
            // angle via the orthogonal residual; acos near 1 loses half the bits
            let dot = basis.column(0).dot(&ones);
            let resid = (basis.column(0) - dot * &ones).norm();
            let angle = resid.atan2(dot.abs());
            ensure!(angle < 1e-8, "case {case}: kernel basis angle to 1/sqrt(n) is {angle:e}");

            // second-smallest eigenvalue positive (connected graph)
            let mut eigs: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ensure!(eigs[1] > 1e-9, "case {case}: lambda_2 = {:e}", eigs[1]);

            let has_zero =
                kernel_zero_component_property(&basis, 1e-9).map_err(|e| e.to_string())?;
            ensure!(!has_zero, "case {case}: all-ones kernel flagged a zero component");
        }
        Ok(())
    })());
}

/// Exact rank of a matrix by Gaussian elimination with partial pivoting and
/// an absolute pivot threshold.
fn row_reduction_rank(m: &DMatrix<f64>, pivot_tol: f64) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let mut rank = 0;
    for col in 0..cols {
        let mut best = rank;
        for r in rank + 1..rows {
            if a[(r, col)].abs() > a[(best, col)].abs() {
                best = r;
            }
        }
        if rank >= rows || a[(best, col)].abs() <= pivot_tol {
            continue;
        }
        a.swap_rows(rank, best);
        for r in rank + 1..rows {
            let factor = a[(r, col)] / a[(rank, col)];
            for c in col..cols {
                a[(r, c)] -= factor * a[(rank, c)];
            }
        }
        rank += 1;
    }
    rank
}

fn random_orthogonal(n: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let qr = a.qr();
    qr.q()
}

#[test]
fn criterion_7_certificate_oracle_equivalence() {
    report(7, "certificate vs row-reduction oracle", (|| {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let mut planted_true = 0;
        for case in 0..500 {
            let n = if case % 2 == 0 { 3 } else { 4 };
            // three planted shapes: PD (full rank), block-singular with a
            // coordinate-axis kernel and vanishing gradient on it (deficient),
            // and rotated-singular with a gradient blocking the kernel (full
            // rank through the diag(grad) block)
            let (q, x) = match case % 3 {
                0 => {
                    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                    let q = &a * a.transpose() + DMatrix::identity(n, n) * 0.01;
                    let x = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                    (q, x)
                }
                1 => {
                    let dead = rng.gen_range(1..n);
                    let live = n - dead;
                    let a = DMatrix::from_fn(live, live, |_, _| rng.gen_range(-1.0..1.0));
                    let block = &a * a.transpose() + DMatrix::identity(live, live) * 0.01;
                    let mut q = DMatrix::zeros(n, n);
                    q.view_mut((0, 0), (live, live)).copy_from(&block);
                    let x = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                    (q, x)
                }
                _ => loop {
                    let u = random_orthogonal(n, &mut rng);
                    let mut d = DMatrix::zeros(n, n);
                    for i in 1..n {
                        d[(i, i)] = rng.gen_range(0.01..1.0);
                    }
                    let q = &u * d * u.transpose();
                    let q = (&q + q.transpose()) * 0.5; // exact symmetry
                    let x = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                    let g = 2.0 * &q * &x;
                    let v0 = u.column(0);
                    let blocking = (0..n).map(|i| (g[i] * v0[i]).abs()).fold(0.0, f64::max);
                    if blocking > 1e-2 {
                        break (q, x);
                    }
                },
            };
            let v = EnergyFunction::quadratic(q.clone()).map_err(|e| e.to_string())?;
            let cert = condition_b_certificate(&v, &x, 1e-8).map_err(|e| e.to_string())?;

            let g = 2.0 * &q * &x;
            let mut stacked = DMatrix::zeros(2 * n, n);
            stacked.view_mut((0, 0), (n, n)).copy_from(&(2.0 * &q));
            for i in 0..n {
                stacked[(n + i, i)] = g[i];
            }
            let oracle_holds = row_reduction_rank(&stacked, 1e-10) < n;
            ensure!(
                cert.holds == oracle_holds,
                "case {case}: certificate holds = {}, oracle = {} (sigma_min {:e})",
                cert.holds,
                oracle_holds,
                cert.sigma_min
            );
            if oracle_holds {
                planted_true += 1;
            }
        }
        // both outcomes must actually be exercised
        ensure!(
            planted_true >= 100 && planted_true <= 400,
            "unbalanced planted instances: {planted_true}/500 rank-deficient"
        );
        Ok(())
    })());
}

#[test]
fn criterion_8_fd_suite() {
    report(8, "finite-difference consistency", (|| {
        let h = 1e-5;
        let mut rng = ChaCha12Rng::seed_from_u64(88);

        let a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let q = (&a + a.transpose()) * 0.5;
        let quad = EnergyFunction::quadratic(q).map_err(|e| e.to_string())?;

        let mut rng2 = ChaCha12Rng::seed_from_u64(888);
        let edges = vec![
            Edge { a: 0, b: 1, potential: random_potential(&mut rng2) },
            Edge { a: 1, b: 2, potential: random_potential(&mut rng2) },
            Edge { a: 2, b: 3, potential: random_potential(&mut rng2) },
            Edge { a: 0, b: 3, potential: random_potential(&mut rng2) },
        ];
        let pairwise = EnergyFunction::pairwise(4, edges).map_err(|e| e.to_string())?;

        let lower = DVector::from_vec(vec![-1.0, -0.5]);
        let upper = DVector::from_vec(vec![1.0, 0.75]);
        let boxed = EnergyFunction::box_distance_quartic(lower.clone(), upper.clone())
            .map_err(|e| e.to_string())?;

        for trial in 0..200 {
            for (name, v) in [("quadratic", &quad), ("pairwise", &pairwise)] {
                let x = DVector::from_fn(v.dimension(), |_, _| rng.gen_range(-2.0..2.0));
                let fd = v.fd_consistency(&x, h).map_err(|e| e.to_string())?;
                ensure!(
                    fd.max_rel_err_grad < 1e-6 && fd.max_rel_err_hess < 1e-6,
                    "{name} trial {trial}: grad err {:e}, hess err {:e}",
                    fd.max_rel_err_grad,
                    fd.max_rel_err_hess
                );
            }
            // box samples stay >= 10h away from every region boundary
            let x = DVector::from_fn(2, |i, _| loop {
                let c = rng.gen_range(-2.0..2.0);
                if (c - lower[i]).abs() >= 10.0 * h && (c - upper[i]).abs() >= 10.0 * h {
                    break c;
                }
            });
            let fd = boxed.fd_consistency(&x, h).map_err(|e| e.to_string())?;
            ensure!(
                fd.max_rel_err_grad < 1e-6 && fd.max_rel_err_hess < 1e-6,
                "box trial {trial} at {x:?}: grad err {:e}, hess err {:e}",
                fd.max_rel_err_grad,
                fd.max_rel_err_hess
            );
        }
        Ok(())
    })());
}
