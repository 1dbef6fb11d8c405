//! Brute-force reference minimizer used to cross-check the interior-point
//! path. Enumerates active sets of a strictly convex quadratic program and
//! solves each candidate equality system directly; independent of the
//! iterative solver on purpose, and only intended for small seeded problems.

use nalgebra::{DMatrix, DVector};

use super::{ConicProblem, Sense};

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub active_set: Vec<usize>,
}

/// Solves `min 1/2 x'Px + q'x` over the problem's linear rows and bounds by
/// enumerating active sets. Requires strictly convex `P`, no quadratic row,
/// and a modest number of inequalities (the search is exponential).
///
/// Returns `None` when no active set yields a feasible KKT point, which for
/// strictly convex data means the constraints are infeasible.
pub fn active_set_minimize(problem: &ConicProblem, tol: f64) -> Option<OracleSolution> {
    assert!(problem.quad_row.is_none(), "oracle handles linear rows only");
    let n = problem.num_vars();

    // Gather all inequalities as g'x <= h; equalities are always active.
    let mut ineq: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut eq: Vec<(DVector<f64>, f64)> = Vec::new();
    for row in &problem.rows {
        match row.sense {
            Sense::Le => ineq.push((row.coeffs.clone(), row.rhs)),
            Sense::Eq => eq.push((row.coeffs.clone(), row.rhs)),
        }
    }
    for j in 0..n {
        if let Some(l) = problem.lower[j] {
            let mut g = DVector::zeros(n);
            g[j] = -1.0;
            ineq.push((g, -l));
        }
        if let Some(u) = problem.upper[j] {
            let mut g = DVector::zeros(n);
            g[j] = 1.0;
            ineq.push((g, u));
        }
    }
    let m = ineq.len();
    assert!(m <= 20, "active-set enumeration limited to 20 inequalities");

    let mut best: Option<OracleSolution> = None;
    for mask in 0u32..(1u32 << m) {
        let active: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
        let na = active.len() + eq.len();
        if na > n {
            continue;
        }
        // KKT system: [P  G_A'; G_A  0] [x; mult] = [-q; h_A]
        let dim = n + na;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&problem.objective_quad);
        rhs.rows_mut(0, n).copy_from(&(-&problem.objective_lin));
        for (r, (g, h)) in eq.iter().chain(active.iter().map(|&k| &ineq[k])).enumerate() {
            for a in 0..n {
                kkt[(n + r, a)] = g[a];
                kkt[(a, n + r)] = g[a];
            }
            rhs[n + r] = *h;
        }
        let Some(z) = kkt.lu().solve(&rhs) else { continue };
        let x = z.rows(0, n).into_owned();
        let mult = z.rows(n + eq.len(), active.len());

        // Multipliers for active inequalities must be nonnegative.
        if mult.iter().any(|&v| v < -tol) {
            continue;
        }
        // All inequalities must hold.
        let feasible = ineq
            .iter()
            .all(|(g, h)| g.dot(&x) <= h + tol * (1.0 + h.abs()))
            && eq.iter().all(|(g, h)| (g.dot(&x) - h).abs() <= tol * (1.0 + h.abs()));
        if !feasible {
            continue;
        }
        let objective = problem.objective_value(&x);
        if best.as_ref().map(|b| objective < b.objective).unwrap_or(true) {
            best = Some(OracleSolution { x, objective, active_set: active });
        }
    }
    best
}
