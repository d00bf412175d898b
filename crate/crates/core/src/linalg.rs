//! Householder QR for tall, thin least-squares problems (a handful of
//! columns, hundreds of rows), as used by the linear LPPL sub-problem and the
//! local polynomial fits of the derivative filter.

/// Thin QR factorization of an `n x p` column-major matrix, `n >= p`.
///
/// Columns are scaled to unit norm before factoring so the rank test is
/// insensitive to column magnitudes.
#[derive(Debug, Clone)]
pub(crate) struct HouseholderQr {
    n: usize,
    p: usize,
    /// Householder vectors below the diagonal, R strictly above it.
    qr: Vec<f64>,
    beta: Vec<f64>,
    rdiag: Vec<f64>,
    col_scale: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RankDeficient {
    pub column: usize,
}

const RANK_TOL: f64 = 1e-12;

impl HouseholderQr {
    /// `columns` holds `p` columns of length `n`, back to back.
    pub fn factor(mut columns: Vec<f64>, n: usize, p: usize) -> Result<Self, RankDeficient> {
        debug_assert_eq!(columns.len(), n * p);
        debug_assert!(n >= p);
        let mut col_scale = vec![1.0; p];
        for j in 0..p {
            let col = &mut columns[j * n..(j + 1) * n];
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(RankDeficient { column: j });
            }
            col.iter_mut().for_each(|x| *x /= norm);
            col_scale[j] = norm;
        }

        let mut beta = vec![0.0; p];
        let mut rdiag = vec![0.0; p];
        for k in 0..p {
            let (head, tail) = columns.split_at_mut((k + 1) * n);
            let v = &mut head[k * n + k..(k + 1) * n];
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= RANK_TOL {
                return Err(RankDeficient { column: k });
            }
            let alpha = if v[0] > 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vtv = v.iter().map(|x| x * x).sum::<f64>();
            let b = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            beta[k] = b;
            rdiag[k] = alpha;
            for j in (k + 1)..p {
                let col = &mut tail[(j - k - 1) * n + k..(j - k) * n];
                let dot: f64 = v.iter().zip(col.iter()).map(|(a, c)| a * c).sum();
                let s = b * dot;
                col.iter_mut().zip(v.iter()).for_each(|(c, a)| *c -= s * a);
            }
        }

        Ok(Self {
            n,
            p,
            qr: columns,
            beta,
            rdiag,
            col_scale,
        })
    }

    fn reflector(&self, k: usize) -> &[f64] {
        &self.qr[k * self.n + k..(k + 1) * self.n]
    }

    /// y <- Q^T y
    pub fn apply_qt(&self, y: &mut [f64]) {
        for k in 0..self.p {
            self.reflect(k, y);
        }
    }

    /// y <- Q y
    pub fn apply_q(&self, y: &mut [f64]) {
        for k in (0..self.p).rev() {
            self.reflect(k, y);
        }
    }

    fn reflect(&self, k: usize, y: &mut [f64]) {
        let v = self.reflector(k);
        let seg = &mut y[k..];
        let dot: f64 = v.iter().zip(seg.iter()).map(|(a, b)| a * b).sum();
        let s = self.beta[k] * dot;
        seg.iter_mut().zip(v.iter()).for_each(|(b, a)| *b -= s * a);
    }

    /// Least-squares coefficients and residual sum of squares for `y`.
    pub fn solve(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let mut z = y.to_vec();
        self.apply_qt(&mut z);
        let rss: f64 = z[self.p..].iter().map(|x| x * x).sum();
        let mut coef = vec![0.0; self.p];
        for i in (0..self.p).rev() {
            let mut acc = z[i];
            for j in (i + 1)..self.p {
                acc -= self.qr[j * self.n + i] * coef[j];
            }
            coef[i] = acc / self.rdiag[i];
        }
        for (c, s) in coef.iter_mut().zip(&self.col_scale) {
            *c /= s;
        }
        (coef, rss)
    }

    /// Removes from `v` its component in the column space.
    pub fn project_out(&self, v: &mut [f64]) {
        self.apply_qt(v);
        v[..self.p].iter_mut().for_each(|x| *x = 0.0);
        self.apply_q(v);
    }
}

/// Solves the small symmetric positive definite system `m x = b` by Cholesky.
/// Returns `None` when `m` is not numerically positive definite.
pub(crate) fn cholesky_solve<const N: usize>(m: &[[f64; N]; N], b: &[f64; N]) -> Option<[f64; N]> {
    let mut l = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [0.0; N];
    for i in 0..N {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [0.0; N];
    for i in (0..N).rev() {
        let mut s = y[i];
        for k in (i + 1)..N {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_exact_polynomial() {
        let n = 20;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.3 - 2.0).collect();
        let mut cols = Vec::new();
        for p in 0..3 {
            cols.extend(xs.iter().map(|x| x.powi(p)));
        }
        let y: Vec<f64> = xs.iter().map(|x| 1.5 - 2.0 * x + 0.25 * x * x).collect();
        let qr = HouseholderQr::factor(cols, n, 3).unwrap();
        let (c, rss) = qr.solve(&y);
        assert!((c[0] - 1.5).abs() < 1e-12);
        assert!((c[1] + 2.0).abs() < 1e-12);
        assert!((c[2] - 0.25).abs() < 1e-12);
        assert!(rss < 1e-24);
    }

    #[test]
    fn detects_collinear_columns() {
        let n = 10;
        let a: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let mut cols = a.clone();
        cols.extend(a.iter().map(|x| 3.0 * x));
        assert!(HouseholderQr::factor(cols, n, 2).is_err());
        assert!(HouseholderQr::factor(vec![0.0; 10], 10, 1).is_err());
    }

    #[test]
    fn projection_is_orthogonal_to_columns() {
        let n = 12;
        let mut cols: Vec<f64> = (0..n).map(|_| 1.0).collect();
        cols.extend((0..n).map(|i| (i as f64).sin()));
        let qr = HouseholderQr::factor(cols.clone(), n, 2).unwrap();
        let mut v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos() + i as f64).collect();
        qr.project_out(&mut v);
        for j in 0..2 {
            let dot: f64 = cols[j * n..(j + 1) * n]
                .iter()
                .zip(&v)
                .map(|(a, b)| a * b)
                .sum();
            assert!(dot.abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_small_system() {
        let m = [[4.0, 1.0], [1.0, 3.0]];
        let x = cholesky_solve(&m, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
        assert!(cholesky_solve(&[[1.0, 2.0], [2.0, 1.0]], &[1.0, 1.0]).is_none());
    }
}
