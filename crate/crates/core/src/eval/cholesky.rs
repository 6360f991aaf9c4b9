use crate::error::{Error, Result};

/// Lower-triangular factor of a regularised symmetric positive semi-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors `matrix + regularization * I`. `matrix` is row-major `n x n`;
    /// only its lower triangle is read.
    pub fn factor(mut matrix: Vec<f64>, n: usize, regularization: f64) -> Result<Self> {
        if matrix.len() != n * n {
            return Err(Error::Internal(format!("{n}x{n} matrix needs {} entries", n * n)));
        }
        for i in 0..n {
            matrix[i * n + i] += regularization;
        }
        for j in 0..n {
            let row_j = &matrix[j * n..j * n + j];
            let pivot = matrix[j * n + j] - row_j.iter().map(|v| v * v).sum::<f64>();
            if !(pivot > 0.0 && pivot.is_finite()) {
                return Err(Error::DegenerateReference(format!(
                    "Gram matrix is singular at column {j} despite regularisation"
                )));
            }
            let d = pivot.sqrt();
            matrix[j * n + j] = d;
            let row_j = matrix[j * n..j * n + j].to_vec();
            for i in j + 1..n {
                let row_i = &mut matrix[i * n..(i + 1) * n];
                let mut s = row_i[j];
                for k in 0..j {
                    s -= row_i[k] * row_j[k];
                }
                row_i[j] = s / d;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                matrix[i * n + j] = 0.0;
            }
        }
        Ok(Self { n, lower: matrix })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `(matrix + regularization * I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side length");
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lower[k * n + i] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = vec![4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * x_true[j]).sum()).collect();
        let chol = Cholesky::factor(a, 3, 0.0).unwrap();
        let x = chol.solve(&b);
        for (got, want) in x.iter().zip(x_true) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_regularised() {
        let chol = Cholesky::factor(vec![0.0; 4], 2, 1e-10).unwrap();
        assert_eq!(chol.solve(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn indefinite_rejected() {
        let err = Cholesky::factor(vec![1.0, 2.0, 2.0, 1.0], 2, 1e-10).unwrap_err();
        assert!(matches!(err, Error::DegenerateReference(_)));
    }
}
