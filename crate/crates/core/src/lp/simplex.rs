use super::{dot, LinearProgram, LpSolution, LpStatus, Relation, Sense, Tolerances};
use crate::error::Result;

/// Dense tableau in canonical form with respect to `basis`. The last
/// column holds the right-hand side; `obj` holds reduced profits with the
/// negated objective value in its last slot.
struct Tableau {
    data: Vec<f64>,
    width: usize,
    obj: Vec<f64>,
    basis: Vec<usize>,
}

enum Outcome {
    Optimal,
    Unbounded,
    PivotLimit,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn ncols(&self) -> usize {
        self.width - 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.ncols())
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width;
        let p = self.at(r, e);
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        self.data[r * w + e] = 1.0;
        let pivot_row: Vec<f64> = self.row(r).to_vec();
        for i in 0..self.m() {
            if i == r {
                continue;
            }
            let f = self.data[i * w + e];
            if f != 0.0 {
                for (v, pv) in self.data[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.data[i * w + e] = 0.0;
            }
        }
        let f = self.obj[e];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[e] = 0.0;
        }
        self.basis[r] = e;
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let mut obj = cost.to_vec();
        obj.push(0.0);
        for i in 0..self.m() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(self.row(i)) {
                    *o -= cb * v;
                }
            }
        }
        self.obj = obj;
    }

    /// Textbook ratio test, ties to the lowest basic index.
    fn bland_ratio(&self, enter: usize, tol: &Tolerances) -> Option<(usize, f64)> {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.m() {
            let a = self.at(i, enter);
            if a <= tol.pivot {
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / a;
            leave = match leave {
                Some((k, best)) if !(ratio < best || (ratio == best && self.basis[i] < self.basis[k])) => Some((k, best)),
                _ => Some((i, ratio)),
            };
        }
        leave
    }

    /// Two-pass ratio test: bound the step allowing each basic variable to
    /// dip by the feasibility tolerance, then take the largest pivot among
    /// rows whose exact ratio fits under that bound.
    fn harris_ratio(&self, enter: usize, tol: &Tolerances) -> Option<(usize, f64)> {
        let col_max = (0..self.m()).map(|i| self.at(i, enter).abs()).fold(0.0, f64::max);
        let floor = tol.pivot.max(1e-9 * col_max);
        let bound = (0..self.m())
            .filter(|&i| self.at(i, enter) > floor)
            .map(|i| (self.rhs(i).max(0.0) + tol.feasibility) / self.at(i, enter))
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        (0..self.m())
            .filter(|&i| self.at(i, enter) > floor)
            .map(|i| (i, self.rhs(i).max(0.0) / self.at(i, enter)))
            .filter(|&(_, ratio)| ratio <= bound)
            .max_by(|p, q| self.at(p.0, enter).total_cmp(&self.at(q.0, enter)).then(q.0.cmp(&p.0)))
    }

    /// Primal simplex over the `allowed` columns. Prices by largest reduced
    /// cost and, among ratio ties, pivots on the largest element. After a
    /// run of degenerate pivots it switches to Bland's rule for good, which
    /// cannot cycle.
    fn optimize(&mut self, allowed: &[bool], opt_tol: f64, tol: &Tolerances, pivots: &mut usize, bland_only: bool) -> Outcome {
        let mut bland = bland_only;
        let mut degenerate_run = 0;
        loop {
            let candidates = (0..self.ncols()).filter(|&j| allowed[j] && self.obj[j] > opt_tol);
            let enter = if bland {
                candidates.min()
            } else {
                candidates.max_by(|&a, &b| self.obj[a].total_cmp(&self.obj[b]).then(b.cmp(&a)))
            };
            let Some(enter) = enter else {
                return Outcome::Optimal;
            };
            let leave = if bland {
                self.bland_ratio(enter, tol)
            } else {
                self.harris_ratio(enter, tol)
            };
            let Some((r, ratio)) = leave else {
                return Outcome::Unbounded;
            };
            if *pivots >= tol.max_pivots {
                return Outcome::PivotLimit;
            }
            if ratio <= 0.0 {
                degenerate_run += 1;
                bland |= degenerate_run > DEGENERATE_RUN_LIMIT;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, enter);
            *pivots += 1;
        }
    }
}

/// Consecutive degenerate pivots tolerated before falling back to Bland.
const DEGENERATE_RUN_LIMIT: usize = 50;

/// Power-of-two geometric scaling of rows and columns. Exact in floating
/// point; returns the scaled rows and the column factors, so that the
/// original variable is `x_j = col_scale_j * y_j`.
fn equilibrate(mut rows: Vec<(Vec<f64>, Relation, f64)>, n: usize) -> (Vec<(Vec<f64>, Relation, f64)>, Vec<f64>) {
    let mut col_scale = vec![1.0; n];
    let pow2 = |v: f64| v.log2().round().exp2();
    let spread = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.filter(|v| *v > 0.0).fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        (hi > 0.0).then(|| pow2(1.0 / (lo * hi).sqrt()))
    };
    for _ in 0..4 {
        for row in rows.iter_mut() {
            if let Some(f) = spread(&mut row.0.iter().map(|v| v.abs())) {
                row.0.iter_mut().for_each(|v| *v *= f);
                row.2 *= f;
            }
        }
        for (j, cs) in col_scale.iter_mut().enumerate() {
            if let Some(f) = spread(&mut rows.iter().map(|r| r.0[j].abs())) {
                rows.iter_mut().for_each(|r| r.0[j] *= f);
                *cs *= f;
            }
        }
    }
    (rows, col_scale)
}

/// Solves `B x = b` for the basis columns of the initial tableau by
/// Gaussian elimination with partial pivoting. `None` when singular.
fn solve_basis(initial: &[f64], width: usize, basis: &[usize]) -> Option<Vec<f64>> {
    let m = basis.len();
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let row = &initial[i * width..(i + 1) * width];
            let mut r: Vec<f64> = basis.iter().map(|&j| row[j]).collect();
            r.push(row[width - 1]);
            r
        })
        .collect();
    for c in 0..m {
        let p = (c..m).max_by(|&i, &k| a[i][c].abs().total_cmp(&a[k][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        let pivot_row = a[c].clone();
        for row in a.iter_mut().skip(c + 1) {
            let f = row[c] / pivot_row[c];
            if f != 0.0 {
                for (v, pv) in row[c..].iter_mut().zip(&pivot_row[c..]) {
                    *v -= f * pv;
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for c in (0..m).rev() {
        let tail: f64 = (c + 1..m).map(|k| a[c][k] * x[k]).sum();
        x[c] = (a[c][m] - tail) / a[c][c];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solves `lp` with a two-phase dense simplex.
///
/// Returns an error only for a malformed program; solver outcomes
/// (infeasible, unbounded, numerical failure) are reported in the status.
pub fn solve(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution> {
    lp.validate()?;
    let first = solve_once(lp, tol, false)?;
    if first.status != LpStatus::NumericalFailure || tol.max_pivots == 0 {
        return Ok(first);
    }
    // Bland's rule takes a different path through the bases, which is
    // often enough to get around an ill-conditioned one.
    log::debug!("simplex retrying with Bland's rule after {} pivots", first.pivots);
    let second = solve_once(lp, tol, true)?;
    Ok(LpSolution {
        pivots: first.pivots + second.pivots,
        ..second
    })
}

fn solve_once(lp: &LinearProgram, tol: &Tolerances, bland_only: bool) -> Result<LpSolution> {
    let n = lp.n_vars();

    // Normalize to nonnegative right-hand sides. A `>=` row with zero rhs
    // becomes `<=` so its slack can start in the basis.
    let rows: Vec<(Vec<f64>, Relation, f64)> = lp
        .rows
        .iter()
        .map(|row| {
            let (mut a, mut rel, mut b) = (row.coeffs.clone(), row.relation, row.rhs);
            if b < 0.0 || (b == 0.0 && rel == Relation::Ge) {
                a.iter_mut().for_each(|v| *v = -*v);
                b = -b;
                rel = rel.flipped();
            }
            (a, rel, b.abs())
        })
        .collect();
    let (rows, col_scale) = equilibrate(rows, n);
    let objective: Vec<f64> = lp.objective.iter().zip(&col_scale).map(|(c, s)| c * s).collect();

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = n + n_slack;
    let ncols = art_start + n_art;
    let width = ncols + 1;

    let mut data = vec![0.0; m * width];
    let mut basis = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n, art_start);
    for (i, (a, rel, b)) in rows.iter().enumerate() {
        let row = &mut data[i * width..(i + 1) * width];
        row[..n].copy_from_slice(a);
        row[ncols] = *b;
        match rel {
            Relation::Le => {
                row[next_slack] = 1.0;
                basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -1.0;
                next_slack += 1;
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
        }
    }

    let initial = data.clone();
    let mut tab = Tableau {
        data,
        width,
        obj: Vec::new(),
        basis,
    };
    let mut pivots = 0;
    let rhs_scale = rows.iter().map(|r| r.2).fold(1.0, f64::max);

    if n_art > 0 {
        let mut cost = vec![0.0; ncols];
        cost[art_start..].iter_mut().for_each(|c| *c = -1.0);
        tab.set_objective(&cost);
        let allowed = vec![true; ncols];
        match tab.optimize(&allowed, tol.feasibility, tol, &mut pivots, bland_only) {
            Outcome::Optimal => {}
            // Phase one is bounded above by zero; anything else is breakdown.
            Outcome::Unbounded | Outcome::PivotLimit => {
                return Ok(LpSolution::without_point(LpStatus::NumericalFailure, pivots));
            }
        }
        let residual: f64 = (0..tab.m())
            .filter(|&i| tab.basis[i] >= art_start)
            .map(|i| tab.rhs(i).max(0.0))
            .sum();
        if residual > tol.feasibility * rhs_scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, pivots));
        }
        drive_out_artificials(&mut tab, art_start, tol);
    }

    let mut cost = vec![0.0; ncols];
    let sign = match lp.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    for (c, &o) in cost.iter_mut().zip(&objective) {
        *c = sign * o;
    }
    tab.set_objective(&cost);
    let mut allowed = vec![true; ncols];
    allowed[art_start..].iter_mut().for_each(|a| *a = false);
    let cost_scale = objective.iter().fold(1.0_f64, |acc, c| acc.max(c.abs()));
    match tab.optimize(&allowed, tol.feasibility * cost_scale, tol, &mut pivots, bland_only) {
        Outcome::Optimal => {}
        Outcome::Unbounded => return Ok(LpSolution::without_point(LpStatus::Unbounded, pivots)),
        Outcome::PivotLimit => return Ok(LpSolution::without_point(LpStatus::NumericalFailure, pivots)),
    }

    // The updated tableau drifts on ill-conditioned bases, so the basic
    // solution is also recomputed from the original rows; the point with
    // the smaller violation wins.
    let mut from_tableau = vec![0.0; n];
    for i in 0..tab.m() {
        if tab.basis[i] < n {
            from_tableau[tab.basis[i]] = tab.rhs(i);
        }
    }
    let refined = solve_basis(&initial, width, &tab.basis).map(|xb| {
        let mut x = vec![0.0; n];
        for (k, &j) in tab.basis.iter().enumerate() {
            if j < n {
                x[j] = xb[k];
            }
        }
        x
    });
    let best = [Some(from_tableau), refined]
        .into_iter()
        .flatten()
        .filter(|y| y.iter().all(|v| *v >= -tol.feasibility * rhs_scale && v.is_finite()))
        .map(|y| {
            let x: Vec<f64> = y.iter().zip(&col_scale).map(|(v, s)| (v * s).max(0.0)).collect();
            (lp.max_relative_violation(&x), x)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let x = match best {
        Some((violation, x)) if violation <= tol.feasibility => x,
        _ => return Ok(LpSolution::without_point(LpStatus::NumericalFailure, pivots)),
    };
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: Some(dot(&lp.objective, &x)),
        x: Some(x),
        pivots,
    })
}

/// After phase one, pivots zero-level artificials out of the basis; rows
/// where that is impossible are linearly dependent and get dropped.
fn drive_out_artificials(tab: &mut Tableau, art_start: usize, tol: &Tolerances) {
    let mut i = 0;
    while i < tab.m() {
        if tab.basis[i] < art_start {
            i += 1;
            continue;
        }
        let best = (0..art_start)
            .map(|j| (j, tab.at(i, j).abs()))
            .filter(|&(_, a)| a > tol.pivot)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((j, _)) => {
                tab.pivot(i, j);
                i += 1;
            }
            None => {
                let w = tab.width;
                tab.data.drain(i * w..(i + 1) * w);
                tab.basis.remove(i);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LinearProgram;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn face_optimum() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 1.0], Relation::Le, 1.0);
        let sol = solve(&lp, &tol()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value.unwrap() - 1.0).abs() < 1e-12);
        let x = sol.x.unwrap();
        assert!((x[0] + x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_row(vec![1.0], Relation::Ge, 2.0);
        lp.add_row(vec![1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp, &tol()).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.add_row(vec![-1.0, 1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp, &tol()).unwrap().status, LpStatus::Unbounded);
        let empty = LinearProgram::maximize(vec![1.0]);
        assert_eq!(solve(&empty, &tol()).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn minimize_with_equality_and_ge() {
        // min 2x + 3y s.t. x + y = 4, x >= 1, y >= 1 -> x = 3, y = 1, value 9
        let mut lp = LinearProgram::minimize(vec![2.0, 3.0]);
        lp.add_row(vec![1.0, 1.0], Relation::Eq, 4.0);
        lp.add_row(vec![1.0, 0.0], Relation::Ge, 1.0);
        lp.add_row(vec![0.0, 1.0], Relation::Ge, 1.0);
        let sol = solve(&lp, &tol()).unwrap();
        assert!((sol.objective_value.unwrap() - 9.0).abs() < 1e-12);
        let x = sol.x.unwrap();
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_rows_are_normalized() {
        // max -x s.t. -x <= -2  (x >= 2) -> x = 2
        let mut lp = LinearProgram::maximize(vec![-1.0]);
        lp.add_row(vec![-1.0], Relation::Le, -2.0);
        let sol = solve(&lp, &tol()).unwrap();
        assert!((sol.x.unwrap()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::maximize(vec![1.0, 2.0]);
        lp.add_row(vec![1.0, 1.0], Relation::Eq, 2.0);
        lp.add_row(vec![2.0, 2.0], Relation::Eq, 4.0);
        lp.add_row(vec![0.0, 1.0], Relation::Le, 1.5);
        let sol = solve(&lp, &tol()).unwrap();
        assert!((sol.objective_value.unwrap() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn beale_cycling_example_terminates() {
        // Beale's LP cycles under the textbook largest-coefficient rule.
        // min -3/4 x4 + 20 x5 - 1/2 x6 + 6 x7 over the standard rows.
        let mut lp = LinearProgram::minimize(vec![-0.75, 20.0, -0.5, 6.0]);
        lp.add_row(vec![0.25, -8.0, -1.0, 9.0], Relation::Le, 0.0);
        lp.add_row(vec![0.5, -12.0, -0.5, 3.0], Relation::Le, 0.0);
        lp.add_row(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let sol = solve(&lp, &tol()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value.unwrap() + 1.25).abs() < 1e-12);
    }

    #[test]
    fn pivot_limit_reports_numerical_failure() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 2.0], Relation::Le, 4.0);
        lp.add_row(vec![3.0, 1.0], Relation::Le, 6.0);
        let strict = Tolerances {
            max_pivots: 0,
            ..Tolerances::default()
        };
        assert_eq!(solve(&lp, &strict).unwrap().status, LpStatus::NumericalFailure);
    }
}
