use super::cholesky::dot;
use super::exp::{exp_nonpositive, scaled_exp_in_place};
use super::{check_rows_finite, FeatureVector, Hyperparams, Matrix, DIM};
use crate::error::{Error, Result};

/// Squared-exponential covariance between two inputs, with `sigma_y^2` added
/// when both refer to the same training index.
pub fn kernel_eval(
    xi: &FeatureVector,
    xj: &FeatureVector,
    same_index: bool,
    hyper: &Hyperparams,
) -> Result<f64> {
    if xi.iter().chain(xj.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite kernel input {xi:?} / {xj:?}"
        )));
    }
    Ok(kernel_unchecked(xi, xj, same_index, hyper))
}

#[inline]
pub(crate) fn weighted_sq_dist(xi: &FeatureVector, xj: &FeatureVector, w: &[f64; DIM]) -> f64 {
    let mut q = 0.0;
    for k in 0..DIM {
        let d = xi[k] - xj[k];
        q += w[k] * d * d;
    }
    q
}

#[inline]
fn kernel_unchecked(
    xi: &FeatureVector,
    xj: &FeatureVector,
    same_index: bool,
    hyper: &Hyperparams,
) -> f64 {
    let k = hyper.signal_var() * (-0.5 * weighted_sq_dist(xi, xj, &hyper.w)).exp();
    if same_index {
        k + hyper.noise_var()
    } else {
        k
    }
}

/// Training Gram matrix by direct double loop over [`kernel_eval`].
pub fn gram_naive(x: &[FeatureVector], hyper: &Hyperparams) -> Result<Matrix> {
    if x.is_empty() {
        return Err(Error::Contract("gram matrix of an empty input set".into()));
    }
    check_rows_finite(x)?;
    let n = x.len();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g.set(i, j, kernel_unchecked(&x[i], &x[j], i == j, hyper));
        }
    }
    Ok(g)
}

/// Cross-covariance by direct double loop (no noise term). This is the
/// reference the expanded-norm path is checked against.
pub fn cross_kernel_naive(
    a: &[FeatureVector],
    b: &[FeatureVector],
    hyper: &Hyperparams,
) -> Result<Matrix> {
    check_rows_finite(a)?;
    check_rows_finite(b)?;
    let mut k = Matrix::zeros(a.len(), b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            k.set(i, j, kernel_unchecked(ai, bj, false, hyper));
        }
    }
    Ok(k)
}

/// Cross-covariance `K[i][j] = sigma_s^2 exp(-0.5 (a_i - b_j)^T W (a_i - b_j))`
/// via the expansion `|a|^2 - 2 a.b + |b|^2` in `sqrt(W)`-scaled coordinates.
pub fn cross_kernel_fast(
    a: &[FeatureVector],
    b: &[FeatureVector],
    hyper: &Hyperparams,
) -> Result<Matrix> {
    check_rows_finite(b)?;
    let points = ScaledPoints::new(a, hyper)?;
    let mut k = Matrix::zeros(b.len(), a.len());
    for (j, bj) in b.iter().enumerate() {
        points.kernel_column(bj, &mut k.data[j * a.len()..(j + 1) * a.len()]);
    }
    Ok(k.transpose())
}

/// Training inputs pre-scaled by `sqrt(w)` and centered, stored column-wise
/// together with their squared norms. Evaluating the kernel against one query
/// then costs four fused multiply-adds and one `exp` per training point, all
/// over contiguous arrays.
#[derive(Debug, Clone)]
pub struct ScaledPoints {
    cols: [Vec<f64>; DIM],
    norms: Vec<f64>,
    center: [f64; DIM],
    sqrt_w: [f64; DIM],
    signal_var: f64,
}

impl ScaledPoints {
    pub fn new(x: &[FeatureVector], hyper: &Hyperparams) -> Result<Self> {
        check_rows_finite(x)?;
        let n = x.len();
        let sqrt_w = hyper.w.map(f64::sqrt);
        // Centering keeps the norms small; the distance is translation invariant.
        let mut center = [0.0; DIM];
        if n > 0 {
            for row in x {
                for k in 0..DIM {
                    center[k] += row[k];
                }
            }
            for c in center.iter_mut() {
                *c /= n as f64;
            }
        }
        let mut cols: [Vec<f64>; DIM] = Default::default();
        for (k, col) in cols.iter_mut().enumerate() {
            *col = x.iter().map(|r| (r[k] - center[k]) * sqrt_w[k]).collect();
        }
        let norms = (0..n)
            .map(|i| cols.iter().map(|c| c[i] * c[i]).sum())
            .collect();
        Ok(ScaledPoints {
            cols,
            norms,
            center,
            sqrt_w,
            signal_var: hyper.signal_var(),
        })
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    #[inline]
    fn scale_query(&self, q: &FeatureVector) -> ([f64; DIM], f64) {
        let mut s = [0.0; DIM];
        for k in 0..DIM {
            s[k] = (q[k] - self.center[k]) * self.sqrt_w[k];
        }
        let norm = s.iter().map(|v| v * v).sum();
        (s, norm)
    }

    /// Writes `k(x_i, query)` for every training point into `out`.
    pub fn kernel_column(&self, query: &FeatureVector, out: &mut [f64]) {
        assert_eq!(out.len(), self.len());
        let (q, qn) = self.scale_query(query);
        let [c0, c1, c2, c3] = &self.cols;
        for (i, o) in out.iter_mut().enumerate() {
            let dot = c0[i] * q[0] + c1[i] * q[1] + c2[i] * q[2] + c3[i] * q[3];
            let d2 = (self.norms[i] + qn - 2.0 * dot).max(0.0);
            *o = -0.5 * d2;
        }
        scaled_exp_in_place(out, self.signal_var);
    }

    /// `sum_i k(x_i, query) * weights[i]` without materializing the column.
    pub fn weighted_sum(&self, query: &FeatureVector, weights: &[f64]) -> f64 {
        assert_eq!(weights.len(), self.len());
        let (q, qn) = self.scale_query(query);
        // Fixed-size tiles keep the scratch on the stack; the summation order
        // depends only on N, never on how queries are batched.
        const TILE: usize = 256;
        let mut buf = [0.0f64; TILE];
        let mut total = 0.0;
        let n = self.len();
        let mut start = 0;
        while start < n {
            let end = (start + TILE).min(n);
            let len = end - start;
            let tile = &mut buf[..len];
            let c0 = &self.cols[0][start..end];
            let c1 = &self.cols[1][start..end];
            let c2 = &self.cols[2][start..end];
            let c3 = &self.cols[3][start..end];
            let norms = &self.norms[start..end];
            for i in 0..len {
                let dot = c0[i] * q[0] + c1[i] * q[1] + c2[i] * q[2] + c3[i] * q[3];
                let d2 = (norms[i] + qn - 2.0 * dot).max(0.0);
                tile[i] = exp_nonpositive(-0.5 * d2);
            }
            total += dot(tile, &weights[start..end]);
            start = end;
        }
        self.signal_var * total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_hyper() -> Hyperparams {
        Hyperparams::new([2.0, 0.04, 1.29, 0.002], 0.031, 0.044).unwrap()
    }

    #[test]
    fn same_point_same_index() {
        let h = paper_hyper();
        let x = [0.1, -0.2, 0.7, 21.0];
        let k = kernel_eval(&x, &x, true, &h).unwrap();
        assert_eq!(k, 0.031 * 0.031 + 0.044 * 0.044);
        let k = kernel_eval(&x, &x, false, &h).unwrap();
        assert_eq!(k, 0.031 * 0.031);
    }

    #[test]
    fn hand_evaluated_offset() {
        // 0.031^2 * exp(-0.5 * 2.0 * 0.1^2) = 9.61e-4 * exp(-0.01)
        let expected = 9.61e-4 * 0.990_049_833_749_168;
        let k = kernel_eval(&[0.1, 0.0, 0.0, 0.0], &[0.0; 4], false, &paper_hyper()).unwrap();
        assert!((k - expected).abs() < 1e-15);
        assert!((k - 9.514e-4).abs() < 1e-7);
    }

    #[test]
    fn rejects_non_finite() {
        let h = paper_hyper();
        assert!(matches!(
            kernel_eval(&[f64::NAN, 0.0, 0.0, 0.0], &[0.0; 4], false, &h),
            Err(Error::Domain(_))
        ));
        assert!(cross_kernel_fast(&[[0.0; 4]], &[[f64::INFINITY, 0.0, 0.0, 0.0]], &h).is_err());
    }

    #[test]
    fn gram_small_cases() {
        let h = paper_hyper();
        let g = gram_naive(&[[0.3, 0.1, 0.5, 12.0]], &h).unwrap();
        assert_eq!(g.data, vec![h.prior_var()]);
        let p = [0.3, 0.1, 0.5, 12.0];
        let g = gram_naive(&[p, p], &h).unwrap();
        assert_eq!(
            g.data,
            vec![h.prior_var(), h.signal_var(), h.signal_var(), h.prior_var()]
        );
    }

    #[test]
    fn fast_single_row_and_zero_weights() {
        let h = paper_hyper();
        let p = [0.3, 0.1, 0.5, 12.0];
        let k = cross_kernel_fast(&[p], &[p], &h).unwrap();
        assert_eq!(k.data, vec![h.signal_var()]);

        let flat = Hyperparams::new([0.0; 4], 0.5, 0.1).unwrap();
        let a = [[1.0, 2.0, 3.0, 4.0], [-5.0, 0.5, 9.0, 30.0]];
        let b = [[0.0; 4], [7.0, 7.0, 7.0, 7.0], [1.0, 1.0, 1.0, 1.0]];
        let k = cross_kernel_fast(&a, &b, &flat).unwrap();
        assert!(k.data.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn weighted_sum_matches_column_dot() {
        let h = paper_hyper();
        let x: Vec<FeatureVector> = (0..37)
            .map(|i| {
                let f = i as f64;
                [0.01 * f, -0.02 * f, 0.5 + 0.003 * f, 10.0 + 0.5 * f]
            })
            .collect();
        let w: Vec<f64> = (0..37).map(|i| (i as f64 - 18.0) * 0.1).collect();
        let pts = ScaledPoints::new(&x, &h).unwrap();
        let q = [0.05, -0.1, 0.6, 17.0];
        let mut col = vec![0.0; 37];
        pts.kernel_column(&q, &mut col);
        let direct: f64 = col.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((pts.weighted_sum(&q, &w) - direct).abs() < 1e-15);
    }
}
