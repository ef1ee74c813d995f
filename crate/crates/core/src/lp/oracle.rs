use super::{LinearProgram, LpStatus, Relation, Sense};
use crate::error::{Error, Result};

const STAGE: &str = "vertex enumeration";

/// Optimal objective value found by enumerating every basic solution.
///
/// Each candidate vertex is the intersection of `n` hyperplanes chosen from
/// the rows and the nonnegativity bounds. Feasible intersections are kept
/// and the best objective among them is returned. This is exponential in
/// size and exists to cross-check [`super::solve`] on small programs.
///
/// The region must be provably bounded: every variable needs a positive
/// coefficient in some `<=` row whose coefficients are all nonnegative.
/// Without that certificate the call fails with an `Unbounded` status.
pub fn vertex_enumeration(lp: &LinearProgram, feasibility_tol: f64) -> Result<f64> {
    lp.validate()?;
    let n = lp.n_vars();
    if !has_bounding_certificate(lp) {
        return Err(Error::Lp {
            stage: STAGE,
            status: LpStatus::Unbounded,
        });
    }
    if n == 0 {
        return if lp.rows.iter().all(|r| r.violation(&[]) <= feasibility_tol * r.scale(&[])) {
            Ok(0.0)
        } else {
            Err(Error::Lp {
                stage: STAGE,
                status: LpStatus::Infeasible,
            })
        };
    }

    // Hyperplanes: rows first, then x_j = 0.
    let planes: Vec<(Vec<f64>, f64)> = lp
        .rows
        .iter()
        .map(|r| (r.coeffs.clone(), r.rhs))
        .chain((0..n).map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            (e, 0.0)
        }))
        .collect();

    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = intersect(&planes, &subset) {
            if lp.is_feasible(&x, feasibility_tol) {
                let v = lp.evaluate(&x);
                best = Some(match (best, lp.sense) {
                    (None, _) => v,
                    (Some(b), Sense::Maximize) => b.max(v),
                    (Some(b), Sense::Minimize) => b.min(v),
                });
            }
        }
        if !next_combination(&mut subset, planes.len()) {
            break;
        }
    }
    best.ok_or(Error::Lp {
        stage: STAGE,
        status: LpStatus::Infeasible,
    })
}

fn has_bounding_certificate(lp: &LinearProgram) -> bool {
    (0..lp.n_vars()).all(|j| {
        lp.rows.iter().any(|r| {
            r.relation == Relation::Le
                && r.coeffs[j] > 0.0
                && r.coeffs.iter().all(|&a| a >= 0.0)
        })
    })
}

/// Solves the square system formed by the chosen hyperplanes with
/// partially pivoted Gaussian elimination; `None` when singular.
fn intersect(planes: &[(Vec<f64>, f64)], subset: &[usize]) -> Option<Vec<f64>> {
    let n = subset.len();
    let mut a: Vec<Vec<f64>> = subset
        .iter()
        .map(|&k| {
            let mut row = planes[k].0.clone();
            row.push(planes[k].1);
            row
        })
        .collect();
    let scale = a
        .iter()
        .flat_map(|r| r[..n].iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let p = (col..n).max_by(|&i, &k| a[i][col].abs().total_cmp(&a[k][col].abs()))?;
        if a[p][col].abs() <= 1e-11 * scale {
            return None;
        }
        a.swap(col, p);
        for i in 0..n {
            if i != col {
                let f = a[i][col] / a[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        a[i][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

fn next_combination(c: &mut [usize], total: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < total - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
