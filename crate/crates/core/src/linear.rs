//! Ordinary least squares with a small ridge term to survive the
//! collinearity of neighboring spectral bands.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RIDGE_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

fn check_matrix(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput("linear fit".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::EmptyInput("linear fit: zero features".into()));
    }
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("design matrix".into()));
        }
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("target vector".into()));
    }
    Ok(d)
}

/// Gaussian elimination with partial pivoting on a dense symmetric system.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < f64::MIN_POSITIVE {
            return Err(Error::InvalidParam("singular normal equations".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Minimize sum((y - Xw - b)^2) + lambda * |w|^2 with the intercept left
/// unpenalized (features and target are centered first).
pub fn fit_linear(x: &[Vec<f64>], y: &[f64]) -> Result<LinearModel> {
    let d = check_matrix(x, y)?;
    let n = x.len();

    let mut x_mean = vec![0.0; d];
    for row in x {
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut x_mean {
        *m /= n as f64;
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;

    // Normal equations on centered data: (Xc'Xc + lambda I) w = Xc'y
    let mut gram = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    for (row, &yi) in x.iter().zip(y) {
        let centered: Vec<f64> = row.iter().zip(&x_mean).map(|(v, m)| v - m).collect();
        let yc = yi - y_mean;
        for i in 0..d {
            rhs[i] += centered[i] * yc;
            for j in i..d {
                gram[i][j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[i][j] = gram[j][i];
        }
        gram[i][i] += RIDGE_LAMBDA;
    }

    let weights = solve_dense(gram, rhs)?;
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel { weights, intercept })
}

pub fn predict_linear(model: &LinearModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = model.weights.len();
    x.iter()
        .map(|row| {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            Ok(model.intercept + row.iter().zip(&model.weights).map(|(v, w)| v * w).sum::<f64>())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_relation() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![2.0, 4.0, 6.0];
        let m = fit_linear(&x, &y).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-6);
        assert!(m.intercept.abs() < 1e-6);
        let p = predict_linear(&m, &[vec![4.0]]).unwrap();
        assert!((p[0] - 8.0).abs() < 1e-6);
    }

    #[test]
    fn constant_target() {
        let x = vec![vec![1.0, -2.0], vec![4.0, 0.5], vec![-3.0, 7.0]];
        let y = vec![3.0; 3];
        let m = fit_linear(&x, &y).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-6));
        assert!((m.intercept - 3.0).abs() < 1e-6);
    }

    #[test]
    fn collinear_features_still_fit_training_data() {
        let x = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let y = vec![1.0, 2.0, 3.0];
        let m = fit_linear(&x, &y).unwrap();
        let p = predict_linear(&m, &x).unwrap();
        for (pi, yi) in p.iter().zip(&y) {
            assert!((pi - yi).abs() < 1e-4);
        }
    }

    #[test]
    fn predict_only_cases() {
        let m = LinearModel { weights: vec![2.0], intercept: 0.0 };
        assert_eq!(predict_linear(&m, &[vec![5.0]]).unwrap(), vec![10.0]);
        let c = LinearModel { weights: vec![0.0, 0.0], intercept: 3.0 };
        assert_eq!(predict_linear(&c, &[vec![9.0, -1.0]]).unwrap(), vec![3.0]);
        assert!(predict_linear(&m, &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_linear(&[], &[]).is_err());
        assert!(fit_linear(&[vec![f64::NAN]], &[1.0]).is_err());
        assert!(fit_linear(&[vec![1.0]], &[f64::INFINITY]).is_err());
    }
}
