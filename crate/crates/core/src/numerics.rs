//! Minimal dense linear algebra and activation functions used by every other
//! module, plus a finite-difference gradient checker.
//!
//! Everything is 64-bit. Matrix-vector products scan the matrix row-major and
//! accumulate left to right, so results are bit-reproducible given a seed.

use crate::{Error, Result};

/// Dense row-major matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// y = A x, accumulating each row left to right.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for c in 0..self.cols {
                acc += row[c] * x[c];
            }
            y.push(acc);
        }
        y
    }

    /// y = A^T x. The matrix is still scanned row-major; each output
    /// coordinate accumulates contributions in increasing row order.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let xr = x[r];
            for c in 0..self.cols {
                y[c] += row[c] * xr;
            }
        }
        y
    }

    /// A[r][c] += u[r] * v[c] for all r, c (gradient outer-product update).
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        assert_eq!(u.len(), self.rows);
        assert_eq!(v.len(), self.cols);
        for r in 0..self.rows {
            let ur = u[r];
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for c in 0..v.len() {
                row[c] += ur * v[c];
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Numerically stable logistic function.
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Coordinate-wise logistic function.
pub fn sigmoid(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| sigmoid_scalar(x)).collect()
}

/// Softmax with max-subtraction; output entries are positive and sum to one.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    assert!(!z.is_empty());
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// log(sum_i exp(z_i)) with max-subtraction.
pub fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Length-d vector that is 1 at index i and 0 elsewhere.
pub fn one_hot(i: usize, d: usize) -> Result<Vec<f64>> {
    if i >= d {
        return Err(Error::IndexOutOfRange { index: i, dim: d });
    }
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    Ok(v)
}

/// Compares an analytic gradient against central finite differences of
/// `loss_fn` and returns the worst relative error
/// |analytic - numeric| / max(1, |analytic|, |numeric|) over all coordinates.
pub fn grad_check(
    loss_fn: impl Fn(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> Result<f64> {
    assert_eq!(params.len(), analytic.len());
    let mut worst = 0.0_f64;
    let mut scratch = params.to_vec();
    for i in 0..params.len() {
        scratch[i] = params[i] + eps;
        let lp = loss_fn(&scratch);
        scratch[i] = params[i] - eps;
        let lm = loss_fn(&scratch);
        scratch[i] = params[i];
        if !lp.is_finite() || !lm.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let numeric = (lp - lm) / (2.0 * eps);
        let denom = 1.0_f64.max(analytic[i].abs()).max(numeric.abs());
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_at_zero() {
        assert_eq!(sigmoid(&[0.0]), vec![0.5]);
    }

    #[test]
    fn sigmoid_saturates() {
        let y = sigmoid(&[1e9]);
        assert!((y[0] - 1.0).abs() < 1e-15);
        let y = sigmoid(&[-1e9]);
        assert!(y[0].abs() < 1e-15);
    }

    #[test]
    fn sigmoid_of_ln_3() {
        // 1 / (1 + 1/3) = 0.75
        let y = sigmoid(&[3.0_f64.ln()]);
        assert!((y[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x: f64 = rng.gen_range(-40.0..40.0);
            let s = sigmoid_scalar(x);
            let sm = sigmoid_scalar(-x);
            assert!((sm - (1.0 - s)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn softmax_uniform_cases() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let t = softmax(&[0.0, 0.0, 0.0]);
        for v in t {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_direct_evaluation() {
        // exp(ln 2) : exp(0) = 2 : 1
        let y = softmax(&[2.0_f64.ln(), 0.0]);
        assert!((y[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((y[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..8);
            let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let y = softmax(&z);
            let sum: f64 = y.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(y.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn one_hot_cases() {
        assert_eq!(one_hot(0, 2).unwrap(), vec![1.0, 0.0]);
        assert_eq!(one_hot(1, 2).unwrap(), vec![0.0, 1.0]);
        assert_eq!(one_hot(3, 5).unwrap(), vec![0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(one_hot(2, 2).is_err());
    }

    // Naive oracle with the same per-coordinate accumulation order; results
    // must agree bit for bit.
    fn matvec_oracle(a: &Mat, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; a.rows()];
        for r in 0..a.rows() {
            for c in 0..a.cols() {
                y[r] += a.at(r, c) * x[c];
            }
        }
        y
    }

    fn matvec_t_oracle(a: &Mat, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; a.cols()];
        for c in 0..a.cols() {
            for r in 0..a.rows() {
                y[c] += a.at(r, c) * x[r];
            }
        }
        y
    }

    #[test]
    fn matvec_matches_naive_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = Mat::from_fn(10, 10, |_, _| rng.gen_range(-1.0..1.0));
            let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert_eq!(a.matvec(&x), matvec_oracle(&a, &x));
            assert_eq!(a.matvec_t(&x), matvec_t_oracle(&a, &x));
        }
    }

    #[test]
    fn grad_check_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        // loss = 0.5 * ||p||^2, gradient is p itself
        let err = grad_check(
            |q| 0.5 * q.iter().map(|v| v * v).sum::<f64>(),
            &p,
            &p,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "err={err}");
    }

    #[test]
    fn grad_check_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let c: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let cc = c.clone();
        let err = grad_check(
            move |q| q.iter().zip(cc.iter()).map(|(a, b)| a * b).sum::<f64>(),
            &p,
            &c,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "err={err}");
    }

    #[test]
    fn grad_check_rejects_non_finite_loss() {
        let p = vec![1.0];
        assert!(grad_check(|_| f64::NAN, &p, &p, 1e-5).is_err());
    }
}
