//! Exact two-player zero-sum matrix game solving.
//!
//! The row player maximizes, the column player minimizes. The primary solver
//! reduces the game to a linear program and runs a dense primal simplex with
//! Bland's rule, which reaches machine-precision equilibria on every matrix
//! size used here. An independent support-enumeration solver doubles as a
//! fallback and as the cross-check oracle for small matrices.

use crate::error::{Error, Result};
use crate::games::matrix::DecisionMatrix;

/// A mixed-strategy solution with an explicit duality-gap certificate.
#[derive(Clone, Debug)]
pub struct GameSolution {
    /// Column player's mixture (the minimizer; the agent in regret games).
    pub agent_mixture: Vec<f64>,
    /// Row player's mixture (the maximizer; the adversary in regret games).
    pub adversary_distribution: Vec<f64>,
    pub value: f64,
    pub duality_gap: f64,
}

impl GameSolution {
    /// Row indices carrying probability above `eps`.
    pub fn support(&self, eps: f64) -> Vec<usize> {
        self.adversary_distribution
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > eps)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Recompute the duality gap of `(x, y)` on `payoffs` from scratch:
/// best pure-row response against `y` minus best pure-column response
/// against `x`. Zero at an exact equilibrium.
pub fn duality_gap(payoffs: &DecisionMatrix, adversary: &[f64], agent: &[f64]) -> f64 {
    let best_row = (0..payoffs.rows())
        .map(|i| {
            (0..payoffs.cols())
                .map(|j| payoffs.at(i, j) * agent[j])
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let best_col = (0..payoffs.cols())
        .map(|j| {
            (0..payoffs.rows())
                .map(|i| payoffs.at(i, j) * adversary[i])
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    (best_row - best_col).max(0.0)
}

fn mixture_value(payoffs: &DecisionMatrix, adversary: &[f64], agent: &[f64]) -> f64 {
    let mut v = 0.0;
    for i in 0..payoffs.rows() {
        if adversary[i] == 0.0 {
            continue;
        }
        for j in 0..payoffs.cols() {
            v += adversary[i] * payoffs.at(i, j) * agent[j];
        }
    }
    v
}

/// Solve a zero-sum matrix game to within `tolerance` duality gap.
///
/// `max_iterations` bounds simplex pivots. On numerical trouble the solver
/// falls back to support enumeration for matrices up to 8x8 before giving up
/// with the last observed gap.
pub fn solve_zero_sum(
    payoffs: &DecisionMatrix,
    tolerance: f64,
    max_iterations: usize,
) -> Result<GameSolution> {
    assert!(tolerance > 0.0, "tolerance must be positive");
    assert!(payoffs.rows() > 0 && payoffs.cols() > 0);
    let lp = simplex_equilibrium(payoffs, max_iterations);
    if let Ok((adversary, agent)) = &lp {
        let gap = duality_gap(payoffs, adversary, agent);
        if gap <= tolerance {
            let value = mixture_value(payoffs, adversary, agent);
            return Ok(GameSolution {
                agent_mixture: agent.clone(),
                adversary_distribution: adversary.clone(),
                value,
                duality_gap: gap,
            });
        }
    }
    if payoffs.rows() <= 8 && payoffs.cols() <= 8 {
        if let Some(sol) = support_enumeration(payoffs, tolerance) {
            return Ok(sol);
        }
    }
    let gap = match &lp {
        Ok((adversary, agent)) => duality_gap(payoffs, adversary, agent),
        Err(_) => f64::INFINITY,
    };
    Err(Error::NotConverged {
        iterations: max_iterations,
        gap,
    })
}

const PIVOT_EPS: f64 = 1e-9;

/// Equilibrium via the standard LP reduction. Payoffs are shifted positive;
/// the column player's scaled strategy solves `max 1'y : A y <= 1, y >= 0`
/// and the row player's strategy is read off the duals of the slack columns.
fn simplex_equilibrium(payoffs: &DecisionMatrix, max_pivots: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = payoffs.rows();
    let n = payoffs.cols();
    let shift = 1.0 - payoffs.min_entry();
    let width = n + m + 1;
    let mut t = vec![vec![0.0f64; width]; m + 1];
    for i in 0..m {
        for j in 0..n {
            t[i][j] = payoffs.at(i, j) + shift;
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = 1.0;
    }
    for j in 0..n {
        t[m][j] = -1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut pivots = 0usize;
    loop {
        // Bland's rule: smallest-index column with a negative reduced cost.
        let entering = (0..n + m).find(|&j| t[m][j] < -PIVOT_EPS);
        let Some(col) = entering else { break };
        let mut row: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if t[i][col] > PIVOT_EPS {
                let ratio = t[i][width - 1] / t[i][col];
                match row {
                    None => {
                        row = Some(i);
                        best_ratio = ratio;
                    }
                    Some(r) => {
                        if ratio < best_ratio - PIVOT_EPS {
                            row = Some(i);
                            best_ratio = ratio;
                        } else if (ratio - best_ratio).abs() <= PIVOT_EPS && basis[i] < basis[r] {
                            // Bland's tie-break on the leaving variable.
                            row = Some(i);
                            best_ratio = best_ratio.min(ratio);
                        }
                    }
                }
            }
        }
        let Some(r) = row else {
            return Err(Error::NotConverged {
                iterations: pivots,
                gap: f64::INFINITY,
            });
        };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::NotConverged {
                iterations: pivots,
                gap: f64::INFINITY,
            });
        }
        let pivot = t[r][col];
        for x in t[r].iter_mut() {
            *x /= pivot;
        }
        for i in 0..=m {
            if i == r {
                continue;
            }
            let f = t[i][col];
            if f != 0.0 {
                for j in 0..width {
                    t[i][j] -= f * t[r][j];
                }
            }
        }
        basis[r] = col;
    }
    let sum_y = t[m][width - 1];
    if sum_y <= PIVOT_EPS {
        return Err(Error::NotConverged {
            iterations: pivots,
            gap: f64::INFINITY,
        });
    }
    let v_bar = 1.0 / sum_y;
    let mut agent = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            agent[b] = t[i][width - 1].max(0.0) * v_bar;
        }
    }
    let mut adversary = vec![0.0; m];
    for i in 0..m {
        adversary[i] = t[m][n + i].max(0.0) * v_bar;
    }
    normalize(&mut agent);
    normalize(&mut adversary);
    Ok((adversary, agent))
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

/// Exact support enumeration for small games: try every equal-size support
/// pair, solve the indifference systems, and keep the first pair satisfying
/// the equilibrium inequalities. Independent of the simplex path.
pub fn support_enumeration(payoffs: &DecisionMatrix, tolerance: f64) -> Option<GameSolution> {
    let m = payoffs.rows();
    let n = payoffs.cols();
    let eps = tolerance.max(1e-9);
    for k in 1..=m.min(n) {
        for rows in combinations(m, k) {
            for cols in combinations(n, k) {
                if let Some((x, y, v)) = try_support(payoffs, &rows, &cols, eps) {
                    let mut adversary = vec![0.0; m];
                    for (idx, &i) in rows.iter().enumerate() {
                        adversary[i] = x[idx];
                    }
                    let mut agent = vec![0.0; n];
                    for (idx, &j) in cols.iter().enumerate() {
                        agent[j] = y[idx];
                    }
                    let gap = duality_gap(payoffs, &adversary, &agent);
                    if gap <= tolerance {
                        return Some(GameSolution {
                            agent_mixture: agent,
                            adversary_distribution: adversary,
                            value: v,
                            duality_gap: gap,
                        });
                    }
                }
            }
        }
    }
    None
}

fn try_support(
    payoffs: &DecisionMatrix,
    rows: &[usize],
    cols: &[usize],
    eps: f64,
) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let k = rows.len();
    // Row mixture x on `rows` making every column in `cols` worth v:
    //   sum_i x_i A[i][j] - v = 0 for j in cols;  sum_i x_i = 1.
    let mut ax = vec![vec![0.0; k + 2]; k + 1];
    for (e, &j) in cols.iter().enumerate() {
        for (i_idx, &i) in rows.iter().enumerate() {
            ax[e][i_idx] = payoffs.at(i, j);
        }
        ax[e][k] = -1.0;
        ax[e][k + 1] = 0.0;
    }
    for i_idx in 0..k {
        ax[k][i_idx] = 1.0;
    }
    ax[k][k + 1] = 1.0;
    let solx = gauss_solve(ax)?;
    let (x, v1) = (solx[..k].to_vec(), solx[k]);

    let mut ay = vec![vec![0.0; k + 2]; k + 1];
    for (e, &i) in rows.iter().enumerate() {
        for (j_idx, &j) in cols.iter().enumerate() {
            ay[e][j_idx] = payoffs.at(i, j);
        }
        ay[e][k] = -1.0;
        ay[e][k + 1] = 0.0;
    }
    for j_idx in 0..k {
        ay[k][j_idx] = 1.0;
    }
    ay[k][k + 1] = 1.0;
    let soly = gauss_solve(ay)?;
    let (y, v2) = (soly[..k].to_vec(), soly[k]);

    if (v1 - v2).abs() > eps {
        return None;
    }
    if x.iter().any(|&p| p < -eps) || y.iter().any(|&p| p < -eps) {
        return None;
    }
    let v = v1;
    // Equilibrium inequalities against every pure strategy.
    let mut full_y = vec![0.0; payoffs.cols()];
    for (j_idx, &j) in cols.iter().enumerate() {
        full_y[j] = y[j_idx].max(0.0);
    }
    for i in 0..payoffs.rows() {
        let u: f64 = (0..payoffs.cols())
            .map(|j| payoffs.at(i, j) * full_y[j])
            .sum();
        if u > v + eps {
            return None;
        }
    }
    let mut full_x = vec![0.0; payoffs.rows()];
    for (i_idx, &i) in rows.iter().enumerate() {
        full_x[i] = x[i_idx].max(0.0);
    }
    for j in 0..payoffs.cols() {
        let u: f64 = (0..payoffs.rows())
            .map(|i| payoffs.at(i, j) * full_x[i])
            .sum();
        if u < v - eps {
            return None;
        }
    }
    let mut xs = x;
    let mut ys = y;
    for p in xs.iter_mut().chain(ys.iter_mut()) {
        *p = p.max(0.0);
    }
    normalize(&mut xs);
    normalize(&mut ys);
    Some((xs, ys, v))
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col][col];
        for j in col..=n {
            a[col][j] /= p;
        }
        for i in 0..n {
            if i != col && a[i][col] != 0.0 {
                let f = a[i][col];
                for j in col..=n {
                    a[i][j] -= f * a[col][j];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_pennies_scaled() {
        let m = DecisionMatrix::from_rows(&[vec![0.0, 200.0], vec![200.0, 0.0]]);
        let sol = solve_zero_sum(&m, 1e-9, 1000).unwrap();
        assert!((sol.value - 100.0).abs() < 1e-9);
        assert!((sol.agent_mixture[0] - 0.5).abs() < 1e-9);
        assert!((sol.adversary_distribution[0] - 0.5).abs() < 1e-9);
        assert!(sol.duality_gap <= 1e-9);
    }

    #[test]
    fn dominant_column_is_pure() {
        // Column 1 dominates (column player minimizes).
        let m = DecisionMatrix::from_rows(&[vec![5.0, 1.0], vec![4.0, 2.0]]);
        let sol = solve_zero_sum(&m, 1e-9, 1000).unwrap();
        assert!((sol.agent_mixture[1] - 1.0).abs() < 1e-9);
        assert!((sol.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn asymmetric_two_by_two() {
        // Regrets (0.2, 0 / 0, 1.4): value 0.175, agent (0.875, 0.125).
        let m = DecisionMatrix::from_rows(&[vec![0.2, 0.0], vec![0.0, 1.4]]);
        let sol = solve_zero_sum(&m, 1e-9, 1000).unwrap();
        assert!((sol.value - 0.175).abs() < 1e-9);
        assert!((sol.agent_mixture[0] - 0.875).abs() < 1e-9);
        assert!((sol.agent_mixture[1] - 0.125).abs() < 1e-9);
    }

    #[test]
    fn support_enumeration_agrees_with_simplex() {
        let m = DecisionMatrix::from_rows(&[
            vec![3.0, -1.0, 2.0],
            vec![-2.0, 4.0, 0.5],
            vec![1.0, 0.0, -3.0],
        ]);
        let sol = solve_zero_sum(&m, 1e-9, 1000).unwrap();
        let oracle = support_enumeration(&m, 1e-6).unwrap();
        assert!((sol.value - oracle.value).abs() < 1e-6);
    }

    #[test]
    fn saddle_point_game() {
        let m = DecisionMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, -1.0]]);
        // Row 0 dominates; column player picks column 0: value 1.
        let sol = solve_zero_sum(&m, 1e-9, 1000).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-9);
    }
}
