//! Dense vector helpers and the column-major atom matrix shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Dictionary of atoms stored column-major, with squared column norms
/// precomputed for coordinate descent.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomMatrix {
    dim: usize,
    data: Vec<f64>,
    sq_norms: Vec<f64>,
}

impl AtomMatrix {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new(), sq_norms: Vec::new() }
    }

    pub fn from_columns<I, C>(dim: usize, columns: I) -> Result<Self>
    where
        I: IntoIterator<Item = C>,
        C: AsRef<[f64]>,
    {
        let mut m = Self::new(dim);
        for c in columns {
            m.push(c.as_ref())?;
        }
        Ok(m)
    }

    pub fn push(&mut self, column: &[f64]) -> Result<()> {
        if column.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: column.len() });
        }
        self.data.extend_from_slice(column);
        self.sq_norms.push(dot(column, column));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sq_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sq_norms.is_empty()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn sq_norm(&self, j: usize) -> f64 {
        self.sq_norms[j]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.len())
    }

    /// `sum_j weights[j] * column(j)` over the given sparse weights.
    pub fn combine<'a, I>(&self, weights: I) -> Vec<f64>
    where
        I: IntoIterator<Item = (&'a usize, &'a f64)>,
    {
        let mut out = vec![0.0; self.dim];
        for (&j, &w) in weights {
            axpy(w, self.column(j), &mut out);
        }
        out
    }

    /// Euclidean norm of `goal - sum_j w_j * column(j)`. Every solver reports
    /// its residual through this one function so residuals are comparable
    /// bit-for-bit when supports and weights coincide.
    pub fn residual_norm<'a, I>(&self, goal: &[f64], weights: I) -> f64
    where
        I: IntoIterator<Item = (&'a usize, &'a f64)>,
    {
        norm(&sub(goal, &self.combine(weights)))
    }
}

/// Solves the normal equations `gram * x = rhs` for a small symmetric system.
/// Falls back to an SVD pseudo-inverse when the system is singular, which
/// happens when selected atoms are linearly dependent.
pub fn solve_normal(gram: &[f64], rhs: &[f64]) -> Vec<f64> {
    let k = rhs.len();
    if k == 0 {
        return Vec::new();
    }
    let g = DMatrix::from_row_slice(k, k, gram);
    let b = DVector::from_column_slice(rhs);
    if let Some(chol) = g.clone().cholesky() {
        let x = chol.solve(&b);
        if x.iter().all(|v| v.is_finite()) {
            return x.iter().copied().collect();
        }
    }
    let scale = g.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    match g.svd(true, true).solve(&b, 1e-12 * scale) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => vec![0.0; k],
    }
}

/// Unconstrained least squares restricted to `support` (sorted ascending).
pub fn least_squares(atoms: &AtomMatrix, goal: &[f64], support: &[usize]) -> Vec<f64> {
    let (gram, rhs) = normal_system(atoms, goal, support);
    solve_normal(&gram, &rhs)
}

pub(crate) fn normal_system(atoms: &AtomMatrix, goal: &[f64], support: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let k = support.len();
    let mut gram = vec![0.0; k * k];
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            gram[a * k + b] = dot(atoms.column(i), atoms.column(j));
        }
    }
    let rhs = support.iter().map(|&j| dot(atoms.column(j), goal)).collect();
    (gram, rhs)
}

/// Lawson-Hanson nonnegative least squares restricted to `support` (sorted
/// ascending). The returned weights are, on their positive entries, exactly
/// the output of [`least_squares`] on that passive set.
pub fn nonneg_least_squares(atoms: &AtomMatrix, goal: &[f64], support: &[usize]) -> Vec<f64> {
    let k = support.len();
    let (gram, rhs) = normal_system(atoms, goal, support);
    let mut x = vec![0.0; k];
    let mut passive = vec![false; k];
    let tol = 1e-12 * rhs.iter().fold(1.0_f64, |m, v| m.max(v.abs()));

    let sub_solve = |passive: &[bool]| -> (Vec<usize>, Vec<f64>) {
        let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
        let n = idx.len();
        let mut g = vec![0.0; n * n];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                g[a * n + b] = gram[i * k + j];
            }
        }
        let r: Vec<f64> = idx.iter().map(|&i| rhs[i]).collect();
        (idx, solve_normal(&g, &r))
    };

    for _outer in 0..3 * k.max(1) {
        // negative gradient of 0.5|Ax-b|^2
        let grad: Vec<f64> = (0..k)
            .map(|i| rhs[i] - (0..k).map(|j| gram[i * k + j] * x[j]).sum::<f64>())
            .collect();
        let entering = (0..k)
            .filter(|&i| !passive[i] && grad[i] > tol)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if grad[b] >= grad[i] => Some(b),
                _ => Some(i),
            });
        let Some(e) = entering else { break };
        passive[e] = true;

        loop {
            let (idx, z) = sub_solve(&passive);
            if z.iter().all(|&v| v > 0.0) {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (&i, &v) in idx.iter().zip(&z) {
                    x[i] = v;
                }
                break;
            }
            // step toward z until the first passive coordinate hits zero
            let mut alpha = f64::INFINITY;
            let mut blocking = idx[0];
            for (&i, &v) in idx.iter().zip(&z) {
                if v <= 0.0 {
                    let denom = x[i] - v;
                    let a = if denom > 0.0 { x[i] / denom } else { 0.0 };
                    if a < alpha {
                        alpha = a;
                        blocking = i;
                    }
                }
            }
            for (&i, &v) in idx.iter().zip(&z) {
                x[i] += alpha * (v - x[i]);
                if i == blocking || x[i] <= 0.0 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(dim: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    }

    #[test]
    fn least_squares_recovers_exact_combination() {
        let atoms = AtomMatrix::from_columns(3, [vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
        let goal = vec![2.0, 5.0, 3.0];
        let w = least_squares(&atoms, &goal, &[0, 1]);
        assert!((w[0] - 2.0).abs() < 1e-12 && (w[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_system_falls_back_to_pseudo_inverse() {
        let atoms = AtomMatrix::from_columns(2, [basis(2, 0), basis(2, 0)]).unwrap();
        let w = least_squares(&atoms, &[2.0, 0.0], &[0, 1]);
        assert!((w[0] + w[1] - 2.0).abs() < 1e-9);
        assert!(w.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn nnls_clamps_negative_component() {
        // unconstrained optimum would put a negative weight on column 1
        let atoms = AtomMatrix::from_columns(2, [vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let goal = vec![1.0, -1.0];
        let w = nonneg_least_squares(&atoms, &goal, &[0, 1]);
        assert!(w.iter().all(|&v| v >= 0.0));
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn nnls_matches_least_squares_bitwise_when_interior() {
        let atoms = AtomMatrix::from_columns(3, [vec![1.0, 0.2, 0.1], vec![0.3, 1.0, -0.2]]).unwrap();
        let goal = vec![1.3, 1.2, -0.1];
        assert_eq!(nonneg_least_squares(&atoms, &goal, &[0, 1]), least_squares(&atoms, &goal, &[0, 1]));
    }

    #[test]
    fn dimension_checked_on_push() {
        let mut m = AtomMatrix::new(3);
        assert!(matches!(m.push(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
