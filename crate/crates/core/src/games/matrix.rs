//! Decision matrices and the classic decision rules over them.

use std::fmt;

/// A rectangular utility (or regret) matrix: rows are states/levels, columns
/// are actions/policies.
#[derive(Clone, PartialEq)]
pub struct DecisionMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
}

impl DecisionMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data must be rectangular");
        assert!(data.iter().all(|x| x.is_finite()), "entries must be finite");
        DecisionMatrix {
            rows,
            cols,
            data,
            row_labels: (0..rows).map(|i| format!("r{i}")).collect(),
            column_labels: (0..cols).map(|j| format!("c{j}")).collect(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c));
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn with_labels(mut self, row_labels: Vec<String>, column_labels: Vec<String>) -> Self {
        assert_eq!(row_labels.len(), self.rows);
        assert_eq!(column_labels.len(), self.cols);
        self.row_labels = row_labels;
        self.column_labels = column_labels;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.at(i, col)).collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Debug for DecisionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DecisionMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {}: {:?}", self.row_labels[i], self.row(i))?;
        }
        Ok(())
    }
}

/// Comparison slack for rule ties; matrix entries are exact table values, so
/// this only absorbs float noise from upstream arithmetic.
const RULE_EPS: f64 = 1e-9;

/// Per-row regret: entry (i, j) becomes `max_k u(i, k) - u(i, j)`. Every
/// entry is nonnegative and each row contains a zero.
pub fn regret_matrix(utilities: &DecisionMatrix) -> DecisionMatrix {
    let mut data = Vec::with_capacity(utilities.rows() * utilities.cols());
    for i in 0..utilities.rows() {
        let row_max = utilities
            .row(i)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        for j in 0..utilities.cols() {
            data.push(row_max - utilities.at(i, j));
        }
    }
    DecisionMatrix::new(utilities.rows(), utilities.cols(), data)
        .with_labels(utilities.row_labels.clone(), utilities.column_labels.clone())
}

/// Columns maximizing the worst-case utility; ties all included.
pub fn rule_minimax(utilities: &DecisionMatrix) -> Vec<usize> {
    let minima: Vec<f64> = (0..utilities.cols())
        .map(|j| {
            utilities
                .column(j)
                .into_iter()
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let best = minima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..utilities.cols())
        .filter(|&j| minima[j] >= best - RULE_EPS)
        .collect()
}

/// Columns maximal under the lexicographic ordering of their
/// sorted-ascending utility profiles. Always a subset of `rule_minimax`.
pub fn rule_leximin(utilities: &DecisionMatrix) -> Vec<usize> {
    let profiles: Vec<Vec<f64>> = (0..utilities.cols())
        .map(|j| {
            let mut col = utilities.column(j);
            col.sort_by(f64::total_cmp);
            col
        })
        .collect();
    let mut best: Vec<usize> = vec![0];
    for j in 1..utilities.cols() {
        match lex_cmp(&profiles[j], &profiles[best[0]]) {
            std::cmp::Ordering::Greater => best = vec![j],
            std::cmp::Ordering::Equal => best.push(j),
            std::cmp::Ordering::Less => {}
        }
    }
    best
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > RULE_EPS {
            return x.partial_cmp(y).expect("finite entries");
        }
    }
    std::cmp::Ordering::Equal
}

/// Columns minimizing the worst-case regret; ties all included.
pub fn rule_minimax_regret(utilities: &DecisionMatrix) -> Vec<usize> {
    let regrets = regret_matrix(utilities);
    let maxima: Vec<f64> = (0..regrets.cols())
        .map(|j| {
            regrets
                .column(j)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let best = maxima.iter().copied().fold(f64::INFINITY, f64::min);
    (0..regrets.cols())
        .filter(|&j| maxima[j] <= best + RULE_EPS)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The worked 3x4 decision matrix used across the decision-rule docs.
    pub fn example_matrix() -> DecisionMatrix {
        DecisionMatrix::from_rows(&[
            vec![-100.0, -100.0, -101.0, -101.0],
            vec![-90.0, -2.0, -1.0, 1.0],
            vec![-90.0, 0.0, -1.0, -2.0],
        ])
    }

    #[test]
    fn rules_on_example_matrix() {
        let m = example_matrix();
        assert_eq!(rule_minimax(&m), vec![0, 1]);
        assert_eq!(rule_leximin(&m), vec![1]);
        assert_eq!(rule_minimax_regret(&m), vec![2, 3]);
    }

    #[test]
    fn regret_of_example_matrix() {
        let r = regret_matrix(&example_matrix());
        assert_eq!(r.row(0), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(r.row(1), &[91.0, 3.0, 2.0, 0.0]);
        assert_eq!(r.row(2), &[90.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn constant_matrix_is_all_ties() {
        let m = DecisionMatrix::from_rows(&[vec![3.0, 3.0], vec![3.0, 3.0]]);
        assert_eq!(rule_minimax_regret(&m), vec![0, 1]);
        let r = regret_matrix(&m);
        assert!(r.row(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_row_minimax_is_argmax() {
        let m = DecisionMatrix::from_rows(&[vec![1.0, 5.0, 5.0, 2.0]]);
        assert_eq!(rule_minimax(&m), vec![1, 2]);
    }

    #[test]
    fn leximin_keeps_identical_columns() {
        let m = DecisionMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert_eq!(rule_leximin(&m), vec![0, 1]);
    }
}
