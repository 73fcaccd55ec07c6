//! Small dense linear algebra: a square matrix type, Perron-root estimation
//! for nonnegative matrices, and Gaussian elimination.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("matrix must be nonnegative and finite (entry ({row}, {col}) = {value})")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("power iteration did not converge in {iterations} iterations: rho in [{lower}, {upper}]")]
    NotConverged { lower: f64, upper: f64, iterations: usize },
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![0.0; n * n] }
    }

    /// Row-major construction. Panics if `data.len() != n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "expected {} entries", n * n);
        SquareMatrix { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let data: Vec<f64> = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), n, "rows must have {n} entries");
                r.iter().copied()
            })
            .collect();
        SquareMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    fn check_nonnegative(&self) -> Result<(), SpectralError> {
        for (k, &value) in self.data.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(SpectralError::InvalidEntry { row: k / self.n, col: k % self.n, value });
            }
        }
        Ok(())
    }

    /// Strongly connected components of the directed graph with an edge
    /// i → j whenever entry (i, j) is positive.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        let mut reach = vec![false; n * n];
        for start in 0..n {
            let mut stack = vec![start];
            reach[start * n + start] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if self.get(i, j) > 0.0 && !reach[start * n + j] {
                        reach[start * n + j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        let mut assigned = vec![false; n];
        let mut components = Vec::new();
        for i in 0..n {
            if assigned[i] {
                continue;
            }
            let comp: Vec<usize> = (i..n).filter(|&j| reach[i * n + j] && reach[j * n + i]).collect();
            for &j in &comp {
                assigned[j] = true;
            }
            components.push(comp);
        }
        components
    }

    fn submatrix(&self, idx: &[usize]) -> SquareMatrix {
        let k = idx.len();
        let mut out = SquareMatrix::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }
}

/// Perron root with certified Collatz–Wielandt bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub radius: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

impl SpectralEstimate {
    pub fn bound_gap(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Spectral radius of a nonnegative matrix.
///
/// The matrix is split into its strongly connected components; ρ is the
/// largest Perron root over the irreducible diagonal blocks. Each block of
/// size > 1 is iterated as `B + sI` with `s` half its largest row sum, which
/// makes the block primitive and leaves the Perron root shifted by exactly
/// `s`. Iteration starts from the all-ones vector and stops once the
/// Collatz–Wielandt bounds `min_i (Bv)_i / v_i <= ρ <= max_i (Bv)_i / v_i`
/// are closer than `tol`, or than the rounding noise of the ratios when that
/// is larger (large ρ).
pub fn spectral_radius(m: &SquareMatrix, tol: f64, max_iter: usize) -> Result<SpectralEstimate, SpectralError> {
    m.check_nonnegative()?;
    let mut best = SpectralEstimate { radius: 0.0, lower: 0.0, upper: 0.0, iterations: 0 };
    let mut converged_all = true;
    for comp in m.strongly_connected_components() {
        let (lower, upper, iters, converged) = if comp.len() == 1 {
            let d = m.get(comp[0], comp[0]);
            (d, d, 0, true)
        } else {
            perron_root_irreducible(&m.submatrix(&comp), tol, max_iter)
        };
        best.iterations += iters;
        converged_all &= converged;
        best.lower = best.lower.max(lower);
        best.upper = best.upper.max(upper);
    }
    if !converged_all {
        return Err(SpectralError::NotConverged { lower: best.lower, upper: best.upper, iterations: best.iterations });
    }
    best.radius = 0.5 * (best.lower + best.upper);
    Ok(best)
}

/// Returns `(lower, upper, iterations, converged)` for an irreducible block.
fn perron_root_irreducible(b: &SquareMatrix, tol: f64, max_iter: usize) -> (f64, f64, usize, bool) {
    let n = b.dim();
    let max_row_sum = (0..n).map(|i| b.row(i).iter().sum::<f64>()).fold(0.0, f64::max);
    let shift = (0.5 * max_row_sum).max(1e-6 * b.max_entry());
    let mut v = vec![1.0; n];
    let mut w = vec![0.0; n];
    let (mut lower, mut upper) = (0.0, f64::INFINITY);
    for iter in 1..=max_iter {
        for i in 0..n {
            w[i] = b.row(i).iter().zip(&v).map(|(a, x)| a * x).sum::<f64>() + shift * v[i];
        }
        lower = f64::INFINITY;
        upper = 0.0;
        for i in 0..n {
            let r = w[i] / v[i];
            lower = lower.min(r);
            upper = upper.max(r);
        }
        lower = (lower - shift).max(0.0);
        upper -= shift;
        let noise = 16.0 * n as f64 * f64::EPSILON * (upper + shift);
        if upper - lower < tol.max(noise) {
            return (lower, upper, iter, true);
        }
        let norm = w.iter().copied().fold(0.0, f64::max);
        for i in 0..n {
            v[i] = w[i] / norm;
        }
    }
    (lower, upper, max_iter, false)
}

/// Solves `a x = rhs` by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve(a: &SquareMatrix, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = a.dim();
    assert_eq!(rhs.len(), n);
    let mut m = a.as_slice().to_vec();
    let mut x = rhs.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return if n == 0 { Some(x) } else { None };
    }
    let eps = f64::EPSILON * n as f64 * scale;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs())).unwrap();
        if m[pivot * n + col].abs() <= eps {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }
    Some(x)
}
