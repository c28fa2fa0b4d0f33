//! Exact feasibility for `A x = b, x ≥ 0` by phase-one simplex with Bland's rule.

use num_traits::{Signed, Zero};

use crate::rational::Q;

/// Returns some `x ≥ 0` with `A x = b`, or `None` when the system is infeasible.
pub fn feasible_point(a: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let m = a.len();
    assert_eq!(m, b.len(), "row count mismatch");
    let n = a.first().map_or(0, |r| r.len());
    if m == 0 {
        return Some(vec![Q::zero(); n]);
    }
    let width = n + m + 1;
    let mut t: Vec<Vec<Q>> = Vec::with_capacity(m);
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.len(), n, "ragged constraint matrix");
        let flip = b[i].is_negative();
        let mut r = Vec::with_capacity(width);
        for v in row {
            r.push(if flip { -v.clone() } else { v.clone() });
        }
        for k in 0..m {
            r.push(if k == i { Q::from_integer(1.into()) } else { Q::zero() });
        }
        r.push(if flip { -b[i].clone() } else { b[i].clone() });
        t.push(r);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    // reduced costs of the phase-one objective (sum of artificials)
    let mut cost = vec![Q::zero(); width];
    for j in 0..n {
        cost[j] = -t.iter().fold(Q::zero(), |acc, r| acc + &r[j]);
    }
    cost[width - 1] = -t.iter().fold(Q::zero(), |acc, r| acc + &r[width - 1]);

    loop {
        let entering = (0..width - 1).find(|&j| cost[j].is_negative());
        let Some(j) = entering else { break };
        let mut leave: Option<(usize, Q)> = None;
        for i in 0..m {
            if t[i][j].is_positive() {
                let ratio = &t[i][width - 1] / &t[i][j];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // phase one is bounded below by zero, so an entering column always has a pivot row
        let (r, _) = leave.expect("phase-one objective is bounded");
        pivot(&mut t, &mut cost, r, j);
        basis[r] = j;
    }
    if !cost[width - 1].is_zero() {
        return None;
    }
    let mut x = vec![Q::zero(); n];
    for (i, &bj) in basis.iter().enumerate() {
        if bj < n {
            x[bj] = t[i][width - 1].clone();
        }
    }
    Some(x)
}

fn pivot(t: &mut [Vec<Q>], cost: &mut [Q], r: usize, c: usize) {
    let p = t[r][c].clone();
    for v in t[r].iter_mut() {
        *v /= &p;
    }
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r || row[c].is_zero() {
            continue;
        }
        let f = row[c].clone();
        for (v, pv) in row.iter_mut().zip(&prow) {
            if !pv.is_zero() {
                *v -= &f * pv;
            }
        }
    }
    if !cost[c].is_zero() {
        let f = cost[c].clone();
        for (v, pv) in cost.iter_mut().zip(&prow) {
            if !pv.is_zero() {
                *v -= &f * pv;
            }
        }
    }
}

/// Is `target` a convex combination of `points`? Returns the weights if so.
pub fn convex_weights(points: &[Vec<Q>], target: &[Q]) -> Option<Vec<Q>> {
    if points.is_empty() {
        return None;
    }
    let d = target.len();
    let mut a: Vec<Vec<Q>> = (0..d).map(|k| points.iter().map(|p| p[k].clone()).collect()).collect();
    a.push(vec![Q::from_integer(1.into()); points.len()]);
    let mut b = target.to_vec();
    b.push(Q::from_integer(1.into()));
    feasible_point(&a, &b)
}

/// Unique solution of the square system `a x = b` by Gauss–Jordan elimination; None if singular.
pub fn solve_square(a: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let n = b.len();
    let mut m: Vec<Vec<Q>> = a.iter().zip(b).map(|(row, v)| row.iter().cloned().chain(std::iter::once(v.clone())).collect()).collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].is_zero())?;
        m.swap(c, p);
        let pivot = m[c][c].clone();
        for x in m[c].iter_mut() {
            *x /= &pivot;
        }
        for r in 0..n {
            if r != c && !m[r][c].is_zero() {
                let k = m[r][c].clone();
                for j in c..=n {
                    let d = &k * &m[c][j];
                    m[r][j] -= d;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn simple_feasible() {
        // x + y = 1, x - y = 0
        let a = vec![vec![qi(1), qi(1)], vec![qi(1), qi(-1)]];
        let x = feasible_point(&a, &[qi(1), qi(0)]).unwrap();
        assert_eq!(x, vec![q(1, 2), q(1, 2)]);
    }

    #[test]
    fn infeasible_with_negativity() {
        // x + y = -1 has no nonnegative solution
        let a = vec![vec![qi(1), qi(1)]];
        assert!(feasible_point(&a, &[qi(-1)]).is_none());
    }

    #[test]
    fn hull_membership() {
        let pts = vec![vec![qi(0), qi(0)], vec![qi(1), qi(0)], vec![qi(0), qi(1)]];
        let w = convex_weights(&pts, &[q(1, 4), q(1, 4)]).unwrap();
        let mut back = vec![qi(0), qi(0)];
        for (p, wi) in pts.iter().zip(&w) {
            for k in 0..2 {
                back[k] += &p[k] * wi;
            }
        }
        assert_eq!(back, vec![q(1, 4), q(1, 4)]);
        assert!(convex_weights(&pts, &[q(3, 4), q(1, 2)]).is_none());
    }

    #[test]
    fn degenerate_redundant_rows() {
        let a = vec![vec![qi(1), qi(2)], vec![qi(2), qi(4)]];
        assert!(feasible_point(&a, &[qi(2), qi(4)]).is_some());
        assert!(feasible_point(&a, &[qi(2), qi(5)]).is_none());
    }

    #[test]
    fn square_solve() {
        let a = vec![vec![qi(2), qi(1)], vec![qi(1), qi(3)]];
        let x = solve_square(&a, &[qi(3), qi(5)]).unwrap();
        assert_eq!(x, vec![q(4, 5), q(7, 5)]);
        assert!(solve_square(&[vec![qi(1), qi(2)], vec![qi(2), qi(4)]], &[qi(1), qi(2)]).is_none());
    }
}
