use rayon::prelude::*;

use super::cholesky::{
    cholesky_packed, solve_lower_in_place, solve_lower_lanes, PackedLower, RHS_LANES,
};
use super::kernel::{weighted_sq_dist, ScaledPoints};
use super::{check_rows_finite, FeatureVector, Hyperparams, Matrix, TrainingSet};
use crate::error::{Error, Result};

/// Diagonal jitter tried in order when the plain factorization fails.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Queries handled per parallel work item in [`FittedGp::predict`].
const PAR_CHUNK: usize = 256;

/// A GP conditioned on its training data. Immutable after construction.
#[derive(Debug, Clone)]
pub struct FittedGp {
    x: Vec<FeatureVector>,
    hyper: Hyperparams,
    mean_const: f64,
    chol: PackedLower,
    alpha: Vec<f64>,
    jitter: f64,
    points: ScaledPoints,
}

/// Posterior mean and marginal variance for a batch of queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Factors the training Gram matrix (no jitter) and solves for the weights.
pub fn fit(train: &TrainingSet, hyper: &Hyperparams, mean_const: f64) -> Result<FittedGp> {
    fit_inner(train, hyper, mean_const, &[0.0])
}

/// Like [`fit`], retrying with [`JITTER_LADDER`] when the factorization fails.
pub fn fit_with_jitter(
    train: &TrainingSet,
    hyper: &Hyperparams,
    mean_const: f64,
) -> Result<FittedGp> {
    fit_inner(train, hyper, mean_const, &JITTER_LADDER)
}

fn fit_inner(
    train: &TrainingSet,
    hyper: &Hyperparams,
    mean_const: f64,
    ladder: &[f64],
) -> Result<FittedGp> {
    train.validate()?;
    hyper.validate()?;
    if !mean_const.is_finite() {
        return Err(Error::Domain("non-finite prior mean".into()));
    }
    let mut last_err = None;
    for &jitter in ladder {
        match factor_gram(&train.x, hyper, jitter) {
            Ok(chol) => {
                let mut alpha: Vec<f64> = train.y.iter().map(|y| y - mean_const).collect();
                chol.solve_in_place(&mut alpha);
                if jitter > 0.0 {
                    log::warn!("gram matrix factored with diagonal jitter {jitter:e}");
                }
                return FittedGp::from_parts(
                    train.x.clone(),
                    *hyper,
                    mean_const,
                    chol,
                    alpha,
                    jitter,
                );
            }
            Err(e @ Error::NotPositiveDefinite { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("jitter ladder is not empty"))
}

pub(crate) fn factor_gram(
    x: &[FeatureVector],
    hyper: &Hyperparams,
    jitter: f64,
) -> Result<PackedLower> {
    let sv = hyper.signal_var();
    let nv = hyper.noise_var();
    cholesky_packed(x.len(), jitter, |i, j| {
        let k = sv * (-0.5 * weighted_sq_dist(&x[i], &x[j], &hyper.w)).exp();
        if i == j {
            k + nv
        } else {
            k
        }
    })
}

impl FittedGp {
    pub(crate) fn from_parts(
        x: Vec<FeatureVector>,
        hyper: Hyperparams,
        mean_const: f64,
        chol: PackedLower,
        alpha: Vec<f64>,
        jitter: f64,
    ) -> Result<Self> {
        if chol.order() != x.len() || alpha.len() != x.len() {
            return Err(Error::Contract(format!(
                "model parts disagree: {} inputs, factor of order {}, {} weights",
                x.len(),
                chol.order(),
                alpha.len()
            )));
        }
        let points = ScaledPoints::new(&x, &hyper)?;
        Ok(FittedGp {
            x,
            hyper,
            mean_const,
            chol,
            alpha,
            jitter,
            points,
        })
    }

    pub fn inputs(&self) -> &[FeatureVector] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn mean_const(&self) -> f64 {
        self.mean_const
    }

    pub fn cholesky(&self) -> &PackedLower {
        &self.chol
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Diagonal jitter that was needed to factor the Gram matrix.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Posterior mean at one query; no input validation.
    #[inline]
    pub(crate) fn mean_at(&self, q: &FeatureVector) -> f64 {
        self.mean_const + self.points.weighted_sum(q, &self.alpha)
    }

    /// Posterior mean only. Cost is `O(N)` per query.
    pub fn predict_mean(&self, xstar: &[FeatureVector]) -> Result<Vec<f64>> {
        check_rows_finite(xstar)?;
        Ok(xstar
            .par_chunks(PAR_CHUNK)
            .flat_map_iter(|c| c.iter().map(|q| self.mean_at(q)).collect::<Vec<_>>())
            .collect())
    }

    /// Posterior mean and marginal predictive variance
    /// `sigma_s^2 + sigma_y^2 - |L^-1 k_*|^2`, clamped to `[0, sigma_s^2 + sigma_y^2]`.
    /// Cost is `O(N^2)` per query because of the triangular solve.
    pub fn predict(&self, xstar: &[FeatureVector]) -> Result<Prediction> {
        check_rows_finite(xstar)?;
        let (mean, variance) = xstar
            .par_chunks(PAR_CHUNK)
            .flat_map_iter(|chunk| {
                let mut out = Vec::with_capacity(chunk.len());
                self.mean_var_into(chunk, &mut out);
                out
            })
            .unzip();
        Ok(Prediction { mean, variance })
    }

    /// Appends `(mean, variance)` for each query to `out`. Queries are solved
    /// [`RHS_LANES`] at a time; the result for one query does not depend on
    /// its neighbors.
    pub(crate) fn mean_var_into(&self, qs: &[FeatureVector], out: &mut Vec<(f64, f64)>) {
        const K: usize = RHS_LANES;
        let n = self.len();
        let prior = self.hyper.prior_var();
        let mut col = vec![0.0; n];
        let mut lanes = vec![0.0; n * K];
        for group in qs.chunks(K) {
            lanes.fill(0.0);
            for (q, x) in group.iter().enumerate() {
                self.points.kernel_column(x, &mut col);
                for (i, &v) in col.iter().enumerate() {
                    lanes[i * K + q] = v;
                }
            }
            solve_lower_lanes(&self.chol, &mut lanes);
            for (q, x) in group.iter().enumerate() {
                let explained: f64 = lanes[q..].iter().step_by(K).map(|v| v * v).sum();
                out.push((self.mean_at(x), (prior - explained).clamp(0.0, prior)));
            }
        }
    }

    /// Full posterior covariance of the noisy targets at `xstar`. Intended for
    /// small query sets only; `M` is capped at 4096.
    pub fn posterior_covariance(&self, xstar: &[FeatureVector]) -> Result<Matrix> {
        const MAX_M: usize = 4096;
        check_rows_finite(xstar)?;
        if xstar.len() > MAX_M {
            return Err(Error::Contract(format!(
                "full posterior covariance limited to {MAX_M} queries, got {}",
                xstar.len()
            )));
        }
        let m = xstar.len();
        let mut v = Vec::with_capacity(m);
        for q in xstar {
            let mut col = vec![0.0; self.len()];
            self.points.kernel_column(q, &mut col);
            solve_lower_in_place(&self.chol, &mut col);
            v.push(col);
        }
        let mut cov = Matrix::zeros(m, m);
        for a in 0..m {
            for b in 0..=a {
                let prior = self.hyper.signal_var()
                    * (-0.5 * weighted_sq_dist(&xstar[a], &xstar[b], &self.hyper.w)).exp()
                    + if a == b { self.hyper.noise_var() } else { 0.0 };
                let c = prior - v[a].iter().zip(&v[b]).map(|(p, q)| p * q).sum::<f64>();
                cov.set(a, b, c);
                cov.set(b, a, c);
            }
        }
        Ok(cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper() -> Hyperparams {
        Hyperparams::new([4.0, 4.0, 4.0, 0.01], 0.5, 0.1).unwrap()
    }

    #[test]
    fn single_point_closed_form() {
        let h = hyper();
        let train = TrainingSet::new(vec![[0.1, 0.2, 0.7, 15.0]], vec![0.3]).unwrap();
        let gp = fit(&train, &h, 0.0).unwrap();
        let s = h.prior_var();
        assert!((gp.alpha()[0] - 0.3 / s).abs() < 1e-15);
        assert!((gp.cholesky().get(0, 0) - s.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_targets_at_mean_give_zero_weights() {
        let h = hyper();
        let x = vec![
            [0.0, 0.0, 0.5, 10.0],
            [0.1, 0.0, 0.5, 13.0],
            [0.0, 0.2, 0.6, 16.0],
        ];
        let gp = fit(&TrainingSet::new(x, vec![0.02; 3]).unwrap(), &h, 0.02).unwrap();
        assert!(gp.alpha().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn far_queries_recover_the_prior() {
        let h = hyper();
        let x = vec![[0.0, 0.0, 0.5, 10.0], [0.1, 0.0, 0.5, 13.0]];
        let gp = fit(&TrainingSet::new(x, vec![0.3, -0.2]).unwrap(), &h, 0.05).unwrap();
        let p = gp.predict(&[[50.0, 50.0, 50.0, 500.0]]).unwrap();
        assert!((p.mean[0] - 0.05).abs() < 1e-12);
        assert!((p.variance[0] - h.prior_var()).abs() < 1e-12);
    }

    #[test]
    fn jitter_rescues_duplicate_rows() {
        // Exact duplicates with tiny noise make the Gram matrix numerically singular.
        let h = Hyperparams::new([1.0; 4], 1.0, 1e-9).unwrap();
        let p = [0.0, 0.0, 1.0, 10.0];
        let train = TrainingSet::new(vec![p, p, p], vec![0.1, 0.1, 0.1]).unwrap();
        assert!(matches!(
            fit(&train, &h, 0.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let gp = fit_with_jitter(&train, &h, 0.0).unwrap();
        assert!(gp.jitter() > 0.0);
    }

    #[test]
    fn rejects_mismatched_set() {
        let t = TrainingSet {
            x: vec![[0.0; 4]; 2],
            y: vec![0.0],
        };
        assert!(matches!(fit(&t, &hyper(), 0.0), Err(Error::Contract(_))));
    }

    #[test]
    fn posterior_covariance_diagonal_matches_variance() {
        let h = hyper();
        let x = vec![
            [0.0, 0.0, 0.5, 10.0],
            [0.1, 0.0, 0.5, 13.0],
            [0.2, 0.1, 0.4, 11.0],
        ];
        let gp = fit(&TrainingSet::new(x, vec![0.3, -0.2, 0.1]).unwrap(), &h, 0.0).unwrap();
        let q = [[0.05, 0.0, 0.5, 11.0], [0.3, 0.3, 0.3, 20.0]];
        let cov = gp.posterior_covariance(&q).unwrap();
        let p = gp.predict(&q).unwrap();
        for i in 0..2 {
            assert!((cov.get(i, i) - p.variance[i]).abs() < 1e-12);
        }
        assert_eq!(cov.get(0, 1), cov.get(1, 0));
    }
}
