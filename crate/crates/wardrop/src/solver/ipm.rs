//! Primal-dual interior-point iteration.

use nalgebra::{DMatrix, DVector};

use super::{ConicProblem, IterateDiag, Sense, SolveOptions, SolveReport, SolveStatus};

/// Static quasi-definite regularization of the KKT system. Keeps the
/// factorization stable when the Lagrangian Hessian is singular on a
/// subspace (pure-linear variables, redundant rows); the induced solution
/// bias is far below the solver tolerances.
const STATIC_REG: f64 = 1e-12;

/// Which original constraint an internal inequality came from.
#[derive(Debug, Clone, Copy)]
enum IneqSource {
    Row(usize),
    Lower(usize),
    Upper(usize),
    Quad,
}

struct Scaled {
    /// Objective scale: internal objective = omega * original.
    omega: f64,
    p_mat: DMatrix<f64>,
    q_vec: DVector<f64>,
    /// Inequality scales tau_i: internal c_i = tau_i * original c_i.
    ineq: Vec<(IneqSource, f64)>,
    /// Linear inequality data (gradient rows and constants), quad handled
    /// separately.
    eq_mat: DMatrix<f64>,
    eq_rhs: DVector<f64>,
    eq_scale: Vec<f64>,
    quad: Option<(DMatrix<f64>, DVector<f64>, f64)>,
}

fn build_scaled(problem: &ConicProblem) -> Scaled {
    let n = problem.num_vars();
    let omega = 1.0
        / problem
            .objective_quad
            .amax()
            .max(problem.objective_lin.amax())
            .max(1.0);
    let p_mat = &problem.objective_quad * omega;
    let q_vec = &problem.objective_lin * omega;

    let mut ineq = Vec::new();
    let mut eq_rows = Vec::new();
    let mut eq_scale = Vec::new();
    for (i, row) in problem.rows.iter().enumerate() {
        let tau = 1.0 / row.coeffs.amax().max(row.rhs.abs()).max(1.0);
        match row.sense {
            Sense::Le => ineq.push((IneqSource::Row(i), tau)),
            Sense::Eq => {
                eq_rows.push((i, tau));
                eq_scale.push(tau);
            }
        }
    }
    for j in 0..n {
        if problem.lower[j].is_some() {
            ineq.push((IneqSource::Lower(j), 1.0));
        }
        if problem.upper[j].is_some() {
            ineq.push((IneqSource::Upper(j), 1.0));
        }
    }
    let quad = problem.quad_row.as_ref().map(|qr| {
        let tau = 1.0 / qr.quad.amax().max(qr.lin.amax()).max(qr.offset.abs()).max(1.0);
        (&qr.quad * tau, &qr.lin * tau, qr.offset * tau)
    });
    if quad.is_some() {
        ineq.push((IneqSource::Quad, 1.0));
    }

    let p = eq_rows.len();
    let mut eq_mat = DMatrix::zeros(p, n);
    let mut eq_rhs = DVector::zeros(p);
    for (k, (i, tau)) in eq_rows.iter().enumerate() {
        eq_mat.row_mut(k).copy_from(&(problem.rows[*i].coeffs.transpose() * *tau));
        eq_rhs[k] = problem.rows[*i].rhs * tau;
    }
    Scaled { omega, p_mat, q_vec, ineq, eq_mat, eq_rhs, eq_scale, quad }
}

impl Scaled {
    /// Scaled constraint value for inequality `k` at `x`.
    fn c_value(&self, problem: &ConicProblem, k: usize, x: &DVector<f64>) -> f64 {
        let (source, tau) = self.ineq[k];
        match source {
            IneqSource::Row(i) => {
                let row = &problem.rows[i];
                tau * (row.coeffs.dot(x) - row.rhs)
            }
            IneqSource::Lower(j) => problem.lower[j].unwrap() - x[j],
            IneqSource::Upper(j) => x[j] - problem.upper[j].unwrap(),
            IneqSource::Quad => {
                let (q, r, s0) = self.quad.as_ref().unwrap();
                0.5 * (q * x).dot(x) + r.dot(x) + s0
            }
        }
    }

    /// Writes the gradient of scaled inequality `k` at `x` into `out`.
    fn c_gradient(&self, problem: &ConicProblem, k: usize, x: &DVector<f64>, out: &mut DVector<f64>) {
        out.fill(0.0);
        let (source, tau) = self.ineq[k];
        match source {
            IneqSource::Row(i) => {
                out.copy_from(&problem.rows[i].coeffs);
                *out *= tau;
            }
            IneqSource::Lower(j) => out[j] = -1.0,
            IneqSource::Upper(j) => out[j] = 1.0,
            IneqSource::Quad => {
                let (q, r, _) = self.quad.as_ref().unwrap();
                out.copy_from(&(q * x + r));
            }
        }
    }
}

/// Lagrangian dual value on the original problem data, if the inner
/// minimization is attained. Returns `None` when the Lagrangian is unbounded
/// below in `x` at these multipliers.
fn dual_value(
    problem: &ConicProblem,
    row_duals: &[f64],
    lower_duals: &[f64],
    upper_duals: &[f64],
    quad_dual: f64,
) -> Option<f64> {
    let n = problem.num_vars();
    let mut hess = problem.objective_quad.clone();
    let mut lin = problem.objective_lin.clone();
    let mut constant = 0.0;
    for (row, &dual) in problem.rows.iter().zip(row_duals.iter()) {
        lin += row.coeffs.clone() * dual;
        constant -= dual * row.rhs;
    }
    for j in 0..n {
        if let Some(l) = problem.lower[j] {
            lin[j] -= lower_duals[j];
            constant += lower_duals[j] * l;
        }
        if let Some(u) = problem.upper[j] {
            lin[j] += upper_duals[j];
            constant -= upper_duals[j] * u;
        }
    }
    if let Some(qr) = &problem.quad_row {
        hess += &qr.quad * quad_dual;
        lin += &qr.lin * quad_dual;
        constant += quad_dual * qr.offset;
    }
    // Minimize 1/2 x'Hx + lin'x + constant.
    let mut reg = hess.clone();
    for j in 0..n {
        reg[(j, j)] += 1e-12 * (1.0 + hess[(j, j)].abs());
    }
    let lu = reg.lu();
    let sol = lu.solve(&(-&lin))?;
    let residual = (&hess * &sol + &lin).amax();
    if residual > 1e-6 * (1.0 + lin.amax()) {
        return None; // effectively unbounded below
    }
    Some(0.5 * (&hess * &sol).dot(&sol) + lin.dot(&sol) + constant)
}

/// Solves the problem. Never panics on validated inputs; failure modes are
/// carried in the report status.
pub fn solve(problem: &ConicProblem, opts: &SolveOptions) -> SolveReport {
    if let Err(msg) = problem.validate() {
        // A structurally invalid problem cannot be iterated on at all.
        panic!("conic problem failed validation: {msg}");
    }
    let n = problem.num_vars();
    let scaled = build_scaled(problem);
    let m = scaled.ineq.len();
    let p = scaled.eq_rhs.len();

    // Starting point: midpoint of finite bounds, else zero.
    let mut x = DVector::zeros(n);
    for j in 0..n {
        x[j] = match (problem.lower[j], problem.upper[j]) {
            (Some(l), Some(u)) => 0.5 * (l + u),
            (Some(l), None) => l + 1.0,
            (None, Some(u)) => u - 1.0,
            (None, None) => 0.0,
        };
    }

    if m == 0 {
        return solve_equality_only(problem, &scaled, opts, x);
    }

    let mut s = DVector::zeros(m);
    let mut lambda = DVector::from_element(m, 1.0);
    for k in 0..m {
        let c = scaled.c_value(problem, k, &x);
        s[k] = (-c).max(1.0);
    }
    let mut y = DVector::zeros(p);

    let mut iterates = Vec::new();
    let mut status = SolveStatus::Stalled;
    let mut iterations = 0;
    let mut tiny_steps = 0;
    let mut grad_k = DVector::zeros(n);
    let mut best: Option<(f64, DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> = None;

    for iter in 0..opts.max_iters {
        iterations = iter + 1;

        // Residuals at the current point.
        let mut jac = DMatrix::zeros(m, n);
        let mut c_val = DVector::zeros(m);
        for k in 0..m {
            c_val[k] = scaled.c_value(problem, k, &x);
            scaled.c_gradient(problem, k, &x, &mut grad_k);
            jac.row_mut(k).copy_from(&grad_k.transpose());
        }
        let mut r_dual = &scaled.p_mat * &x + &scaled.q_vec + jac.transpose() * &lambda;
        if p > 0 {
            r_dual += scaled.eq_mat.transpose() * &y;
        }
        let r_prim = &c_val + &s;
        let r_eq = if p > 0 { &scaled.eq_mat * &x - &scaled.eq_rhs } else { DVector::zeros(0) };
        let mu = s.dot(&lambda) / m as f64;

        // Diagnostics on original-unit data.
        let primal_obj = problem.objective_value(&x);
        let (mut row_d, low_d, up_d, quad_d) = unscale_duals(problem, &scaled, &lambda);
        let mut eq_idx = 0;
        for (i, row) in problem.rows.iter().enumerate() {
            if row.sense == Sense::Eq {
                row_d[i] = y[eq_idx] * scaled.eq_scale[eq_idx] / scaled.omega;
                eq_idx += 1;
            }
        }
        let dual_obj = dual_value(problem, &row_d, &low_d, &up_d, quad_d);
        let mut viol = (0..m)
            .map(|k| {
                let (_, tau) = scaled.ineq[k];
                (c_val[k] / tau).max(0.0)
            })
            .fold(0.0, f64::max);
        for row in problem.rows.iter().filter(|r| r.sense == Sense::Eq) {
            viol = viol.max((row.coeffs.dot(&x) - row.rhs).abs());
        }
        iterates.push(IterateDiag {
            primal_objective: primal_obj,
            dual_objective: dual_obj,
            max_primal_violation: viol,
            complementarity: s.dot(&lambda),
        });

        let primal_res = r_prim.amax().max(if p > 0 { r_eq.amax() } else { 0.0 });
        let dual_res = r_dual.amax();
        let obj_scale = 1.0 + (&scaled.p_mat * &x).dot(&x).abs() * 0.5 + scaled.q_vec.dot(&x).abs();
        if std::env::var_os("WARDROP_IPM_DEBUG").is_some() {
            let worst = r_dual.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
            eprintln!(
                "ipm it {iter}: primal {primal_res:.3e} dual {dual_res:.3e} (var {:?}) mu*m {:.3e} scale {obj_scale:.3e}",
                worst.map(|(i, v)| (i, *v)),
                mu * m as f64
            );
        }
        let merit = primal_res + dual_res + mu * m as f64;
        if best.as_ref().map(|b| merit < b.0).unwrap_or(true) {
            best = Some((merit, x.clone(), s.clone(), lambda.clone(), y.clone()));
        }
        if primal_res <= opts.tol_primal && dual_res <= opts.tol_primal.max(opts.tol_gap) && mu * m as f64 <= opts.tol_gap * obj_scale
        {
            status = SolveStatus::Optimal;
            break;
        }

        // Lagrangian Hessian: objective plus quad-row curvature.
        let mut w_mat = scaled.p_mat.clone();
        if let Some((q, _, _)) = &scaled.quad {
            let quad_idx = m - 1;
            w_mat += q * lambda[quad_idx];
        }
        // KKT matrix [[W + J'DJ + reg, A'], [A, -reg]]. The regularization
        // scales with the Lagrangian Hessian, not with the barrier term
        // J'DJ, which grows without bound as the iterates converge.
        let reg = STATIC_REG * (1.0 + w_mat.amax());
        let dim = n + p;
        let mut kkt = DMatrix::zeros(dim, dim);
        let d: DVector<f64> = lambda.component_div(&s);
        let mut jdj = w_mat;
        for k in 0..m {
            let row = jac.row(k);
            for a in 0..n {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for b in 0..n {
                    jdj[(a, b)] += d[k] * ra * row[b];
                }
            }
        }
        for a in 0..n {
            jdj[(a, a)] += reg;
        }
        kkt.view_mut((0, 0), (n, n)).copy_from(&jdj);
        if p > 0 {
            kkt.view_mut((n, 0), (p, n)).copy_from(&scaled.eq_mat);
            kkt.view_mut((0, n), (n, p)).copy_from(&scaled.eq_mat.transpose());
            for k in 0..p {
                kkt[(n + k, n + k)] = -reg;
            }
        }
        let lu = kkt.clone().lu();
        let solve_kkt = |rhs: &DVector<f64>| -> Option<DVector<f64>> {
            let mut z = lu.solve(rhs)?;
            // One pass of iterative refinement against the unregularized
            // system keeps the step accurate when scales are mixed.
            let r = rhs - &kkt * &z;
            if let Some(corr) = lu.solve(&r) {
                z += corr;
            }
            Some(z)
        };

        // Affine predictor.
        let assemble_rhs = |sigma_mu: f64, corr: Option<(&DVector<f64>, &DVector<f64>)>| {
            let mut rhs = DVector::zeros(dim);
            // rhs_x = -(r_dual) - J' [ (sigma_mu - s.*lambda - corr)/s - lambda + D r_prim ]
            // Derived from eliminating ds and dlambda from the Newton system.
            let mut t = DVector::zeros(m);
            for k in 0..m {
                let extra = corr.map(|(ds, dl)| ds[k] * dl[k]).unwrap_or(0.0);
                // target complementarity: s.lambda + lambda ds + s dl = sigma_mu - extra
                t[k] = (sigma_mu - extra) / s[k] - lambda[k] + d[k] * r_prim[k];
            }
            let rhs_x = -&r_dual - jac.transpose() * t;
            rhs.rows_mut(0, n).copy_from(&rhs_x);
            if p > 0 {
                rhs.rows_mut(n, p).copy_from(&(-&r_eq));
            }
            rhs
        };
        let recover = |z: &DVector<f64>, sigma_mu: f64, corr: Option<(&DVector<f64>, &DVector<f64>)>| {
            let dx = z.rows(0, n).into_owned();
            let dy = if p > 0 { z.rows(n, p).into_owned() } else { DVector::zeros(0) };
            let jdx = &jac * &dx;
            let mut ds = DVector::zeros(m);
            let mut dl = DVector::zeros(m);
            for k in 0..m {
                ds[k] = -r_prim[k] - jdx[k];
                let extra = corr.map(|(ds_a, dl_a)| ds_a[k] * dl_a[k]).unwrap_or(0.0);
                dl[k] = (sigma_mu - extra - s[k] * lambda[k] - lambda[k] * ds[k]) / s[k];
            }
            (dx, ds, dl, dy)
        };

        // Once the barrier is essentially exhausted, further centering steps
        // only erode the floating-point range of s and lambda; the terminal
        // polish recovers full accuracy from the located active set.
        if primal_res <= 1e2 * opts.tol_primal && mu * m as f64 <= 1e-2 * opts.tol_gap * obj_scale {
            status = SolveStatus::Optimal;
            break;
        }

        let rhs_aff = assemble_rhs(0.0, None);
        let Some(z_aff) = solve_kkt(&rhs_aff) else {
            status = SolveStatus::Stalled;
            break;
        };
        let (_, ds_aff, dl_aff, _) = recover(&z_aff, 0.0, None);
        let alpha_aff_p = max_step(&s, &ds_aff);
        let alpha_aff_d = max_step(&lambda, &dl_aff);
        let mu_aff = (&s + &ds_aff * alpha_aff_p).dot(&(&lambda + &dl_aff * alpha_aff_d)) / m as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let rhs_cc = assemble_rhs(sigma * mu, Some((&ds_aff, &dl_aff)));
        let Some(z) = solve_kkt(&rhs_cc) else {
            status = SolveStatus::Stalled;
            break;
        };
        let (dx, ds, dl, dy) = recover(&z, sigma * mu, Some((&ds_aff, &dl_aff)));

        let alpha_p = 0.99 * max_step(&s, &ds);
        let alpha_d = 0.99 * max_step(&lambda, &dl);
        let x_new = &x + &dx * alpha_p;
        let s_new = &s + &ds * alpha_p;
        let l_new = &lambda + &dl * alpha_d;
        let y_new = if p > 0 { &y + &dy * alpha_d } else { y.clone() };
        let finite = x_new.iter().chain(s_new.iter()).chain(l_new.iter()).all(|v| v.is_finite());
        if !finite {
            status = detect_infeasible(primal_res, mu, opts);
            break;
        }
        x = x_new;
        s = s_new;
        lambda = l_new;
        y = y_new;

        if alpha_p < 1e-10 && alpha_d < 1e-10 {
            tiny_steps += 1;
            if tiny_steps >= 3 {
                status = detect_infeasible(primal_res, mu, opts);
                break;
            }
        } else {
            tiny_steps = 0;
        }
    }

    // Work from the best iterate seen; late barrier steps can degrade.
    if let Some((_, bx, bs, bl, by)) = best {
        x = bx;
        s = bs;
        lambda = bl;
        y = by;
    }
    polish(problem, &scaled, &mut x, &mut s, &mut lambda, &mut y, opts, &mut status);
    finish(problem, &scaled, x, lambda, y, status, iterations, iterates)
}

/// Terminal Newton refinement on the active-set equality system. The
/// barrier path locates the active set and an approximate solution; solving
/// the corresponding equality-constrained KKT conditions directly removes
/// the dual-accuracy floor left by the ill-conditioned final barrier steps.
#[allow(clippy::too_many_arguments)]
fn polish(
    problem: &ConicProblem,
    scaled: &Scaled,
    x: &mut DVector<f64>,
    s: &mut DVector<f64>,
    lambda: &mut DVector<f64>,
    y: &mut DVector<f64>,
    opts: &SolveOptions,
    status: &mut SolveStatus,
) {
    if *status == SolveStatus::Infeasible {
        return;
    }
    let n = problem.num_vars();
    let m = scaled.ineq.len();
    let p = scaled.eq_rhs.len();
    if m == 0 {
        return;
    }
    let active: Vec<usize> = (0..m).filter(|&k| lambda[k] > s[k]).collect();

    let eval_residuals = |x: &DVector<f64>, lam: &DVector<f64>, y: &DVector<f64>| -> (f64, f64) {
        let mut grad_k = DVector::zeros(n);
        let mut r_dual = &scaled.p_mat * x + &scaled.q_vec;
        let mut worst_primal: f64 = 0.0;
        for k in 0..m {
            let c = scaled.c_value(problem, k, x);
            worst_primal = worst_primal.max(c);
            if lam[k] != 0.0 {
                scaled.c_gradient(problem, k, x, &mut grad_k);
                r_dual += &grad_k * lam[k];
            }
        }
        if p > 0 {
            r_dual += scaled.eq_mat.transpose() * y;
            worst_primal = worst_primal.max((&scaled.eq_mat * x - &scaled.eq_rhs).amax());
        }
        (worst_primal, r_dual.amax())
    };
    let (base_primal, base_dual) = eval_residuals(x, lambda, y);
    let debug = std::env::var_os("WARDROP_IPM_DEBUG").is_some();

    // Newton solve of grad L = 0, c_active = 0, Ax = b for a trial active
    // set, refined by dropping rows whose multiplier comes out negative and
    // adding rows the trial point violates.
    let mut active = active;
    let mut xp = x.clone();
    let mut lam_full = DVector::zeros(m);
    let mut yp = y.clone();
    let mut grad_k = DVector::zeros(n);
    let mut accepted = false;
    'refine: for _pass in 0..12 {
        let na = active.len();
        let mut xt = x.clone();
        let mut lam_act = DVector::from_fn(na, |i, _| lambda[active[i]].max(STATIC_REG));
        let mut yt = y.clone();
        for _ in 0..6 {
            let dim = n + na + p;
            let mut mat = DMatrix::zeros(dim, dim);
            let mut rhs = DVector::zeros(dim);

            let mut w_mat = scaled.p_mat.clone();
            if let Some((q, _, _)) = &scaled.quad {
                if let Some(pos) =
                    active.iter().position(|&k| matches!(scaled.ineq[k].0, IneqSource::Quad))
                {
                    w_mat += q * lam_act[pos];
                }
            }
            let mut r_dual = &scaled.p_mat * &xt + &scaled.q_vec;
            for (i, &k) in active.iter().enumerate() {
                scaled.c_gradient(problem, k, &xt, &mut grad_k);
                r_dual += &grad_k * lam_act[i];
                for a in 0..n {
                    mat[(n + i, a)] = grad_k[a];
                    mat[(a, n + i)] = grad_k[a];
                }
                rhs[n + i] = -scaled.c_value(problem, k, &xt);
            }
            if p > 0 {
                r_dual += scaled.eq_mat.transpose() * &yt;
                for r in 0..p {
                    for a in 0..n {
                        mat[(n + na + r, a)] = scaled.eq_mat[(r, a)];
                        mat[(a, n + na + r)] = scaled.eq_mat[(r, a)];
                    }
                }
                let r_eq = &scaled.eq_mat * &xt - &scaled.eq_rhs;
                for r in 0..p {
                    rhs[n + na + r] = -r_eq[r];
                }
            }
            mat.view_mut((0, 0), (n, n)).copy_from(&w_mat);
            let reg = STATIC_REG * (1.0 + w_mat.amax());
            for a in 0..n {
                mat[(a, a)] += reg;
            }
            for d in n..dim {
                mat[(d, d)] -= reg;
            }
            rhs.rows_mut(0, n).copy_from(&(-&r_dual));

            let lu = mat.clone().lu();
            let Some(mut step) = lu.solve(&rhs) else { break 'refine };
            let corr_rhs = &rhs - &mat * &step;
            if let Some(corr) = lu.solve(&corr_rhs) {
                step += corr;
            }
            if !step.iter().all(|v| v.is_finite()) {
                break 'refine;
            }
            xt += step.rows(0, n);
            for i in 0..na {
                lam_act[i] += step[n + i];
            }
            for r in 0..p {
                yt[r] += step[n + na + r];
            }
        }

        // Refinement: drop the rows that want negative multipliers.
        let drop_tol = -1e-10 * (1.0 + lam_act.amax());
        let negatives: Vec<usize> =
            (0..na).filter(|&i| lam_act[i] < drop_tol).map(|i| active[i]).collect();
        if !negatives.is_empty() {
            active.retain(|k| !negatives.contains(k));
            continue 'refine;
        }
        // Add rows the trial point violates.
        let mut violated: Vec<usize> = Vec::new();
        for k in 0..m {
            if !active.contains(&k) && scaled.c_value(problem, k, &xt) > STATIC_REG {
                violated.push(k);
            }
        }
        if !violated.is_empty() {
            active.extend(violated);
            active.sort_unstable();
            continue 'refine;
        }

        xp = xt;
        yp = yt;
        lam_full.fill(0.0);
        for (i, &k) in active.iter().enumerate() {
            lam_full[k] = lam_act[i].max(0.0);
        }
        accepted = true;
        break;
    }
    if !accepted {
        if debug {
            eprintln!("polish abandoned after refinement passes");
        }
        return;
    }

    let (pol_primal, pol_dual) = eval_residuals(&xp, &lam_full, &yp);
    let better = pol_primal <= base_primal.max(opts.tol_primal) && pol_dual <= base_dual;
    if debug {
        eprintln!(
            "polish: na {} base ({base_primal:.3e}, {base_dual:.3e}) polished ({pol_primal:.3e}, {pol_dual:.3e}) accept {better}",
            active.len()
        );
    }
    if !better {
        return;
    }
    for k in 0..m {
        let c = scaled.c_value(problem, k, &xp);
        s[k] = (-c).max(0.0);
    }
    *x = xp;
    *lambda = lam_full;
    *y = yp;
    if pol_primal <= opts.tol_primal && pol_dual <= opts.tol_primal.max(opts.tol_gap) {
        *status = SolveStatus::Optimal;
    }
}

fn detect_infeasible(primal_res: f64, mu: f64, opts: &SolveOptions) -> SolveStatus {
    if primal_res > 1e3 * opts.tol_primal && mu < opts.tol_gap {
        SolveStatus::Infeasible
    } else {
        SolveStatus::Stalled
    }
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut alpha: f64 = 1.0;
    for k in 0..v.len() {
        if dv[k] < 0.0 {
            alpha = alpha.min(-v[k] / dv[k]);
        }
    }
    alpha
}

fn unscale_duals(
    problem: &ConicProblem,
    scaled: &Scaled,
    lambda: &DVector<f64>,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let n = problem.num_vars();
    let mut row_duals = vec![0.0; problem.rows.len()];
    let mut lower_duals = vec![0.0; n];
    let mut upper_duals = vec![0.0; n];
    let mut quad_dual = 0.0;
    for (k, &(source, tau)) in scaled.ineq.iter().enumerate() {
        let v = lambda[k] * tau / scaled.omega;
        match source {
            IneqSource::Row(i) => row_duals[i] = v,
            IneqSource::Lower(j) => lower_duals[j] = v,
            IneqSource::Upper(j) => upper_duals[j] = v,
            IneqSource::Quad => quad_dual = v,
        }
    }
    (row_duals, lower_duals, upper_duals, quad_dual)
}

fn solve_equality_only(
    problem: &ConicProblem,
    scaled: &Scaled,
    _opts: &SolveOptions,
    _x0: DVector<f64>,
) -> SolveReport {
    // No inequalities: the KKT system is linear.
    let n = problem.num_vars();
    let p = scaled.eq_rhs.len();
    let dim = n + p;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&scaled.p_mat);
    let reg = STATIC_REG * (1.0 + scaled.p_mat.amax());
    for a in 0..n {
        kkt[(a, a)] += reg;
    }
    if p > 0 {
        kkt.view_mut((n, 0), (p, n)).copy_from(&scaled.eq_mat);
        kkt.view_mut((0, n), (n, p)).copy_from(&scaled.eq_mat.transpose());
        for k in 0..p {
            kkt[(n + k, n + k)] = -reg;
        }
    }
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-&scaled.q_vec));
    if p > 0 {
        rhs.rows_mut(n, p).copy_from(&scaled.eq_rhs);
    }
    let solution = kkt.clone().lu().solve(&rhs);
    match solution {
        Some(z) => {
            let x = z.rows(0, n).into_owned();
            let y = if p > 0 { z.rows(n, p).into_owned() } else { DVector::zeros(0) };
            finish(problem, scaled, x, DVector::zeros(0), y, SolveStatus::Optimal, 1, Vec::new())
        }
        None => finish(
            problem,
            scaled,
            DVector::zeros(n),
            DVector::zeros(0),
            DVector::zeros(p),
            SolveStatus::Stalled,
            1,
            Vec::new(),
        ),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &ConicProblem,
    scaled: &Scaled,
    x: DVector<f64>,
    lambda: DVector<f64>,
    y: DVector<f64>,
    status: SolveStatus,
    iterations: usize,
    iterates: Vec<IterateDiag>,
) -> SolveReport {
    let (mut row_duals, lower_duals, upper_duals, quad_dual) = if lambda.len() == scaled.ineq.len()
    {
        unscale_duals(problem, scaled, &lambda)
    } else {
        (vec![0.0; problem.rows.len()], vec![0.0; problem.num_vars()], vec![0.0; problem.num_vars()], 0.0)
    };
    // Equality duals.
    let mut eq_idx = 0;
    for (i, row) in problem.rows.iter().enumerate() {
        if row.sense == Sense::Eq {
            if eq_idx < y.len() {
                row_duals[i] = y[eq_idx] * scaled.eq_scale[eq_idx] / scaled.omega;
            }
            eq_idx += 1;
        }
    }

    // Final residuals in original units.
    let n = problem.num_vars();
    let mut grad = problem.objective_quad.clone() * &x + &problem.objective_lin;
    let mut primal_residual: f64 = 0.0;
    for (row, &dual) in problem.rows.iter().zip(row_duals.iter()) {
        let slack = row.coeffs.dot(&x) - row.rhs;
        match row.sense {
            Sense::Le => primal_residual = primal_residual.max(slack),
            Sense::Eq => primal_residual = primal_residual.max(slack.abs()),
        }
        grad += row.coeffs.clone() * dual;
    }
    for j in 0..n {
        if let Some(l) = problem.lower[j] {
            primal_residual = primal_residual.max(l - x[j]);
            grad[j] -= lower_duals[j];
        }
        if let Some(u) = problem.upper[j] {
            primal_residual = primal_residual.max(x[j] - u);
            grad[j] += upper_duals[j];
        }
    }
    if let Some(qr) = &problem.quad_row {
        let value = problem.quad_row_value(&x).unwrap();
        primal_residual = primal_residual.max(value);
        grad += (&qr.quad * &x + &qr.lin) * quad_dual;
    }
    let objective = problem.objective_value(&x);
    let dual_obj = dual_value(problem, &row_duals, &lower_duals, &upper_duals, quad_dual);
    let duality_gap = dual_obj.map(|d| objective - d).unwrap_or(f64::INFINITY);

    SolveReport {
        status,
        x,
        row_duals,
        lower_duals,
        upper_duals,
        quad_dual,
        objective,
        primal_residual,
        dual_residual: grad.amax(),
        duality_gap,
        iterations,
        iterates,
        static_regularization: STATIC_REG,
    }
}
