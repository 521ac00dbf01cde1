//! Allocation-free Laplace fits of one subject's random effect, used by the
//! local-label update where they run once per (subject, marker, cluster).

use nalgebra::DMatrix;
use rand::Rng;

use crate::dist::std_normal;
use crate::family::Family;
use crate::linalg::JITTER;

const MAX_NEWTON: usize = 30;
const MAX_HALVINGS: usize = 30;

/// Reusable scratch for [`LaplaceWork::fit`]. After a successful fit, `mode`
/// holds the conditional mode and `chol` the row-major lower Cholesky factor
/// of the posterior precision at the mode.
#[derive(Debug, Clone, Default)]
pub(crate) struct LaplaceWork {
    offset: Vec<f64>,
    eta: Vec<f64>,
    pub mode: Vec<f64>,
    cand: Vec<f64>,
    grad: Vec<f64>,
    step: Vec<f64>,
    hess: Vec<f64>,
    pub chol: Vec<f64>,
}

/// In-place lower Cholesky of a row-major `q x q` matrix, retrying with
/// growing diagonal jitter. `false` when every attempt fails.
fn cholesky_small(m: &[f64], q: usize, out: &mut [f64]) -> bool {
    let scale = (0..q).map(|a| m[a * q + a].abs()).fold(1.0, f64::max);
    let mut jitter = 0.0;
    for attempt in 0..9 {
        if attempt > 0 {
            jitter = if attempt == 1 { JITTER * scale } else { jitter * 10.0 };
        }
        let mut ok = true;
        out.fill(0.0);
        'outer: for a in 0..q {
            for b in 0..=a {
                let mut s = m[a * q + b];
                if a == b {
                    s += jitter;
                }
                for c in 0..b {
                    s -= out[a * q + c] * out[b * q + c];
                }
                if a == b {
                    if !(s > 0.0) {
                        ok = false;
                        break 'outer;
                    }
                    out[a * q + a] = s.sqrt();
                } else {
                    out[a * q + b] = s / out[b * q + b];
                }
            }
        }
        if ok {
            return true;
        }
    }
    false
}

/// Solves `L L' x = rhs` in place.
fn chol_solve_small(l: &[f64], q: usize, x: &mut [f64]) {
    for a in 0..q {
        let mut s = x[a];
        for c in 0..a {
            s -= l[a * q + c] * x[c];
        }
        x[a] = s / l[a * q + a];
    }
    for a in (0..q).rev() {
        let mut s = x[a];
        for c in a + 1..q {
            s -= l[c * q + a] * x[c];
        }
        x[a] = s / l[a * q + a];
    }
}

impl LaplaceWork {
    fn objective(&mut self, family: Family, y: &[f64], z: &DMatrix<f64>, sigma_inv: &DMatrix<f64>, phi: f64, b: &[f64]) -> f64 {
        let q = b.len();
        let mut total = 0.0;
        for (j, &yj) in y.iter().enumerate() {
            let mut e = self.offset[j];
            for c in 0..q {
                e += z[(j, c)] * b[c];
            }
            self.eta[j] = e;
            total += (yj * e - family.cumulant(e)) / phi;
        }
        let mut quad = 0.0;
        for a in 0..q {
            for c in 0..q {
                quad += b[a] * sigma_inv[(a, c)] * b[c];
            }
        }
        total - 0.5 * quad
    }

    /// Gradient and negative Hessian of the objective at the `eta` left by
    /// the last [`Self::objective`] call on `mode`.
    fn curvature(&mut self, family: Family, y: &[f64], z: &DMatrix<f64>, sigma_inv: &DMatrix<f64>, phi: f64) {
        let q = self.mode.len();
        for a in 0..q {
            let mut g = 0.0;
            for c in 0..q {
                g -= sigma_inv[(a, c)] * self.mode[c];
                self.hess[a * q + c] = sigma_inv[(a, c)];
            }
            self.grad[a] = g;
        }
        let inv_phi = 1.0 / phi;
        for (j, &yj) in y.iter().enumerate() {
            let e = self.eta[j];
            let resid = (yj - family.inverse_link(e)) * inv_phi;
            let w = family.variance_function(e, phi) * inv_phi * inv_phi;
            for a in 0..q {
                let za = z[(j, a)];
                self.grad[a] += za * resid;
                for c in 0..q {
                    self.hess[a * q + c] += w * za * z[(j, c)];
                }
            }
        }
    }

    /// Damped Newton for the mode of `log f(y | gamma, b) - b' sigma_inv b / 2`,
    /// started at `start`. Returns the Laplace log marginal
    /// `log \int f(y | gamma, b) N(b; 0, Sigma) db` up to the family's base
    /// measure, which the caller adds when it varies between candidates.
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        &mut self,
        family: Family,
        y: &[f64],
        x: &DMatrix<f64>,
        z: &DMatrix<f64>,
        gamma: &[f64],
        sigma_inv: &DMatrix<f64>,
        sigma_inv_logdet: f64,
        phi: f64,
        start: &[f64],
    ) -> Option<f64> {
        let (n, q) = (y.len(), z.ncols());
        self.offset.clear();
        for j in 0..n {
            let mut e = 0.0;
            for (c, &g) in gamma.iter().enumerate() {
                e += x[(j, c)] * g;
            }
            self.offset.push(e);
        }
        self.eta.resize(n, 0.0);
        for v in [&mut self.mode, &mut self.cand, &mut self.grad, &mut self.step] {
            v.resize(q, 0.0);
        }
        self.hess.resize(q * q, 0.0);
        self.chol.resize(q * q, 0.0);

        let mut mode = std::mem::take(&mut self.mode);
        mode.copy_from_slice(start);
        let mut current = self.objective(family, y, z, sigma_inv, phi, &mode);
        if !current.is_finite() {
            mode.fill(0.0);
            current = self.objective(family, y, z, sigma_inv, phi, &mode);
        }
        self.mode = mode;
        for _ in 0..MAX_NEWTON {
            self.curvature(family, y, z, sigma_inv, phi);
            let hess = std::mem::take(&mut self.hess);
            let mut chol = std::mem::take(&mut self.chol);
            let ok = cholesky_small(&hess, q, &mut chol);
            self.hess = hess;
            if !ok {
                self.chol = chol;
                return None;
            }
            self.step.copy_from_slice(&self.grad);
            chol_solve_small(&chol, q, &mut self.step);
            self.chol = chol;
            let mut scale = 1.0;
            let mut moved = false;
            for _ in 0..MAX_HALVINGS {
                let mut cand = std::mem::take(&mut self.cand);
                for a in 0..q {
                    cand[a] = self.mode[a] + scale * self.step[a];
                }
                let val = self.objective(family, y, z, sigma_inv, phi, &cand);
                if val.is_finite() && val >= current {
                    moved = val - current > 1e-12 * current.abs().max(1.0);
                    current = val;
                    self.cand = std::mem::replace(&mut self.mode, cand);
                    break;
                }
                self.cand = cand;
                scale *= 0.5;
            }
            if !moved {
                break;
            }
        }
        // eta now matches the mode: refresh the curvature there
        let mode = std::mem::take(&mut self.mode);
        self.objective(family, y, z, sigma_inv, phi, &mode);
        self.mode = mode;
        self.curvature(family, y, z, sigma_inv, phi);
        let hess = std::mem::take(&mut self.hess);
        let mut chol = std::mem::take(&mut self.chol);
        let ok = cholesky_small(&hess, q, &mut chol);
        self.hess = hess;
        self.chol = chol;
        if !ok {
            return None;
        }
        let log_det_post: f64 = (0..q).map(|a| 2.0 * self.chol[a * q + a].ln()).sum();
        Some(current + 0.5 * sigma_inv_logdet - 0.5 * log_det_post)
    }

    /// Draws from `N(mode, P^{-1})` using the factor left by the last fit.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let q = self.mode.len();
        let mut w: Vec<f64> = (0..q).map(|_| std_normal(rng)).collect();
        // L' w = z
        for a in (0..q).rev() {
            let mut s = w[a];
            for c in a + 1..q {
                s -= self.chol[c * q + a] * w[c];
            }
            w[a] = s / self.chol[a * q + a];
        }
        w.iter().zip(&self.mode).map(|(d, m)| m + d).collect()
    }
}

/// Sum of the base measure over a series; only the Gaussian's depends on the cluster.
pub(crate) fn gaussian_base(y: &[f64], phi: f64) -> f64 {
    y.iter().map(|&v| Family::Gaussian.base_measure(v, phi)).sum()
}
