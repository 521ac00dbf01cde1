use nalgebra::{DMatrix, DVector};

/// Jitter added, in growing multiples, when a matrix fails to factorise.
pub const JITTER: f64 = 1e-8;

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(m.clone()).map(|c| c.l())
}

/// Cholesky factor, retrying with `1e-8 * 10^k * I` added when the plain
/// factorisation fails.
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(l) = cholesky_lower(m) {
        return Some(l);
    }
    let n = m.nrows();
    let scale = m.diagonal().amax().max(1.0);
    let mut jitter = JITTER * scale;
    for _ in 0..8 {
        let shifted = m + DMatrix::identity(n, n) * jitter;
        if let Some(l) = cholesky_lower(&shifted) {
            return Some(l);
        }
        jitter *= 10.0;
    }
    None
}

/// Solves `L L' x = b` given the lower factor.
pub fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let y = l.solve_lower_triangular(b).expect("triangular solve");
    l.transpose().solve_upper_triangular(&y).expect("triangular solve")
}

/// Inverse of an SPD matrix from its lower factor.
pub fn chol_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let linv = l.solve_lower_triangular(&DMatrix::identity(n, n)).expect("triangular solve");
    linv.transpose() * linv
}

/// `log det (L L')`.
pub fn chol_log_det(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for a in 0..n {
        for b in 0..a {
            let v = 0.5 * (m[(a, b)] + m[(b, a)]);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
}

/// Serde adapter storing a matrix as a list of rows.
pub mod serde_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let l = cholesky_lower(&m).unwrap();
        let x = chol_solve(&l, &DVector::from_vec(vec![1.0, 2.0]));
        assert!(((&m * &x) - DVector::from_vec(vec![1.0, 2.0])).norm() < 1e-12);
        assert!((chol_inverse(&l) * &m - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!((chol_log_det(&l) - 11f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky_lower(&m).is_none());
        assert!(cholesky_jittered(&m).is_some());
    }
}
