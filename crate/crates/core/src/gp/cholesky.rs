use crate::error::{Error, Result};

use super::Matrix;

/// Offset of `(i, j)`, `j <= i`, in a row-major packed lower triangle.
#[inline]
pub fn packed_index(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

/// Lower-triangular matrix stored row-major as `n(n+1)/2` values.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedLower {
    n: usize,
    data: Vec<f64>,
}

impl PackedLower {
    pub fn from_packed(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * (n + 1) / 2 {
            return Err(Error::Contract(format!(
                "packed triangle of order {n} needs {} values, got {}",
                n * (n + 1) / 2,
                data.len()
            )));
        }
        Ok(PackedLower { n, data })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn as_packed(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[packed_index(i, j)]
        }
    }

    /// Row `i` up to and including the diagonal.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let s = packed_index(i, 0);
        &self.data[s..s + i + 1]
    }

    pub fn diag(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.data[packed_index(i, i)])
    }

    /// `sum_i ln L_ii`, i.e. half the log-determinant of `L L^T`.
    pub fn half_log_det(&self) -> f64 {
        self.diag().map(f64::ln).sum()
    }

    /// Solves `L^T x = b` in place.
    pub fn solve_upper_transposed_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for i in (0..self.n).rev() {
            let row = self.row(i);
            let xi = b[i] / row[i];
            b[i] = xi;
            for (bk, lik) in b[..i].iter_mut().zip(&row[..i]) {
                *bk -= lik * xi;
            }
        }
    }

    /// Solves `L L^T x = b` in place with two triangular sweeps.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        solve_lower_in_place(self, b);
        self.solve_upper_transposed_in_place(b);
    }

    /// `(L L^T)^-1` as a dense matrix, column by column.
    pub fn inverse_of_product(&self) -> Matrix {
        let n = self.n;
        // row c of `u` holds column c of L^-1, nonzero from index c on
        let mut u = Matrix::zeros(n, n);
        for c in 0..n {
            let m = &mut u.data[c * n..(c + 1) * n];
            m[c] = 1.0 / self.data[packed_index(c, c)];
            for i in c + 1..n {
                let row = self.row(i);
                m[i] = -dot(&row[c..i], &m[c..i]) / row[i];
            }
        }
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(
                    &u.data[i * n + i..(i + 1) * n],
                    &u.data[j * n + i..(j + 1) * n],
                );
                inv.data[i * n + j] = v;
                inv.data[j * n + i] = v;
            }
        }
        inv
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..=i {
                m.set(i, j, self.get(i, j));
            }
        }
        m
    }
}

/// Solves `L x = b` in place by forward substitution.
pub fn solve_lower_in_place(l: &PackedLower, b: &mut [f64]) {
    assert_eq!(b.len(), l.n);
    for i in 0..l.n {
        let row = l.row(i);
        let s = dot(&row[..i], &b[..i]);
        b[i] = (b[i] - s) / row[i];
    }
}

/// Right-hand sides handled together by [`solve_lower_lanes`].
pub(crate) const RHS_LANES: usize = 16;

/// Forward substitution for [`RHS_LANES`] systems at once, stored
/// interleaved: `b[i * RHS_LANES + q]` is entry `i` of system `q`. Each row of
/// the factor is read once for all systems, and every lane is computed with
/// the same operation order regardless of what the other lanes hold.
pub(crate) fn solve_lower_lanes(l: &PackedLower, b: &mut [f64]) {
    const K: usize = RHS_LANES;
    assert_eq!(b.len(), l.n * K);
    for i in 0..l.n {
        let row = l.row(i);
        let (done, rest) = b.split_at_mut(i * K);
        let mut even = [0.0f64; K];
        let mut odd = [0.0f64; K];
        let mut lp = row[..i].chunks_exact(2);
        let mut bp = done.chunks_exact(2 * K);
        for (lr, bb) in (&mut lp).zip(&mut bp) {
            for q in 0..K {
                even[q] += lr[0] * bb[q];
                odd[q] += lr[1] * bb[K + q];
            }
        }
        if let [last] = lp.remainder() {
            let bb = bp.remainder();
            for q in 0..K {
                even[q] += last * bb[q];
            }
        }
        let d = row[i];
        for q in 0..K {
            rest[q] = (rest[q] - (even[q] + odd[q])) / d;
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

const BLOCK: usize = 48;

/// Cholesky factor of a symmetric positive-definite matrix given by its lower
/// triangle `lower(i, j)` for `j <= i`, with `jitter` added to the diagonal.
///
/// Left-looking and blocked over rows: a block of rows is finished against
/// every earlier row before moving on, so each earlier row is streamed from
/// memory once per block.
pub fn cholesky_packed<F>(n: usize, jitter: f64, lower: F) -> Result<PackedLower>
where
    F: Fn(usize, usize) -> f64,
{
    let mut data = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        for j in 0..=i {
            data[packed_index(i, j)] = lower(i, j);
        }
        data[packed_index(i, i)] += jitter;
    }

    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        // Columns left of the block.
        for j in 0..start {
            let (head, tail) = data.split_at_mut(packed_index(start, 0));
            let row_j = &head[packed_index(j, 0)..packed_index(j, 0) + j + 1];
            let ljj = row_j[j];
            for i in start..end {
                let off = packed_index(i, 0) - packed_index(start, 0);
                let row_i = &mut tail[off..off + i + 1];
                let s = dot(&row_i[..j], &row_j[..j]);
                row_i[j] = (row_i[j] - s) / ljj;
            }
        }
        // Inside the diagonal block.
        for i in start..end {
            for j in start..=i {
                let s = {
                    let ri = &data[packed_index(i, 0)..packed_index(i, 0) + j];
                    let rj = &data[packed_index(j, 0)..packed_index(j, 0) + j];
                    dot(ri, rj)
                };
                let idx = packed_index(i, j);
                if i == j {
                    let d = data[idx] - s;
                    if !(d > 0.0) || !d.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: d });
                    }
                    data[idx] = d.sqrt();
                } else {
                    let ljj = data[packed_index(j, j)];
                    data[idx] = (data[idx] - s) / ljj;
                }
            }
        }
        start = end;
    }
    Ok(PackedLower { n, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Matrix {
        // A = B B^T + n I with a deterministic B
        let b: Vec<f64> = (0..n * n)
            .map(|k| ((k * 7919) % 101) as f64 / 50.0 - 1.0)
            .collect();
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum();
                a.set(i, j, s + if i == j { n as f64 } else { 0.0 });
            }
        }
        a
    }

    #[test]
    fn reconstructs_across_block_boundaries() {
        for &n in &[1, 2, 5, BLOCK, BLOCK + 1, 2 * BLOCK + 7] {
            let a = spd(n);
            let l = cholesky_packed(n, 0.0, |i, j| a.get(i, j)).unwrap();
            for i in 0..n {
                assert!(l.get(i, i) > 0.0);
                for j in 0..=i {
                    let r: f64 = (0..=j).map(|k| l.get(i, k) * l.get(j, k)).sum();
                    assert!(
                        (r - a.get(i, j)).abs() <= 1e-10 * a.get(i, j).abs().max(1.0),
                        "n={n} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn lane_solve_matches_single_solves() {
        for n in [1, 2, 7, BLOCK + 3] {
            let a = spd(n);
            let l = cholesky_packed(n, 0.0, |i, j| a.get(i, j)).unwrap();
            let mut lanes = vec![0.0; n * RHS_LANES];
            for (k, v) in lanes.iter_mut().enumerate() {
                *v = ((k * 31) % 17) as f64 - 8.0;
            }
            let mut singles: Vec<Vec<f64>> = (0..RHS_LANES)
                .map(|q| (0..n).map(|i| lanes[i * RHS_LANES + q]).collect())
                .collect();
            solve_lower_lanes(&l, &mut lanes);
            for (q, b) in singles.iter_mut().enumerate() {
                solve_lower_in_place(&l, b);
                for i in 0..n {
                    let v = lanes[i * RHS_LANES + q];
                    assert!((v - b[i]).abs() <= 1e-12 * (1.0 + b[i].abs()));
                }
            }
        }
    }

    #[test]
    fn reports_failing_pivot() {
        // [[1, 2], [2, 1]] is indefinite; the second pivot is 1 - 4 = -3.
        let a = [[1.0, 2.0], [2.0, 1.0]];
        match cholesky_packed(2, 0.0, |i, j| a[i][j]) {
            Err(Error::NotPositiveDefinite { pivot, value }) => {
                assert_eq!(pivot, 1);
                assert!((value + 3.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn solves_and_inverts() {
        let n = 9;
        let a = spd(n);
        let l = cholesky_packed(n, 0.0, |i, j| a.get(i, j)).unwrap();
        let inv = l.inverse_of_product();
        for i in 0..n {
            for j in 0..n {
                let p: f64 = (0..n).map(|k| a.get(i, k) * inv.get(k, j)).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p - e).abs() < 1e-10);
            }
        }
    }
}
