//! Restarted GMRES with right preconditioning on plain `f64` vectors.

/// Outcome of a GMRES solve.
#[derive(Clone, Debug, PartialEq)]
pub struct GmresOutcome {
    pub solution: Vec<f64>,
    /// Total number of Arnoldi steps.
    pub iterations: usize,
    /// Final true residual norm `‖b − A x‖`.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solves `A x = b` from `x = 0` with right preconditioner `M⁻¹`, stopping
/// when `‖b − A x‖ ≤ rel_tol·‖b‖` or after `max_iter` Arnoldi steps.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rel_tol: f64,
    restart: usize,
    max_iter: usize,
) -> GmresOutcome {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return GmresOutcome { solution: x, iterations: 0, residual: 0.0, converged: true };
    }
    let target = rel_tol * b_norm;
    let restart = restart.max(1);
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut beta = b_norm;

    while iterations < max_iter && beta > target {
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut preconditioned: Vec<Vec<f64>> = Vec::new();

        for j in 0..restart {
            if iterations >= max_iter {
                break;
            }
            iterations += 1;
            let z = precondition(&basis[j]);
            let mut w = apply(&z);
            preconditioned.push(z);
            // Modified Gram–Schmidt with one reorthogonalization pass.
            let mut h = vec![0.0; j + 2];
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = dot(&w, q);
                    h[i] += c;
                    axpy(-c, q, &mut w);
                }
            }
            h[j + 1] = norm(&w);
            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let denom = h[j].hypot(h[j + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[j] / denom, h[j + 1] / denom) };
            let next_norm = h[j + 1];
            h[j] = denom;
            h[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            hess.push(h);
            if next_norm > 0.0 && g[j + 1].abs() > target {
                basis.push(w.iter().map(|v| v / next_norm).collect());
            } else {
                break;
            }
        }

        // Back substitution for the least-squares coefficients.
        let k = hess.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (jj, col) in hess.iter().enumerate().skip(i + 1) {
                s -= col[i] * y[jj];
            }
            y[i] = if hess[i][i] != 0.0 { s / hess[i][i] } else { 0.0 };
        }
        for (yi, z) in y.iter().zip(&preconditioned) {
            axpy(*yi, z, &mut x);
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let new_beta = norm(&r);
        let stalled = new_beta >= beta * (1.0 - 1e-12);
        beta = new_beta;
        if stalled {
            break;
        }
    }
    GmresOutcome { solution: x, iterations, residual: beta, converged: beta <= target }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 40;
        let a = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let mut s = (2.0 + i as f64 * 0.1) * x[i];
                    if i > 0 {
                        s -= x[i - 1];
                    }
                    if i + 1 < n {
                        s += 0.5 * x[i + 1];
                    }
                    s
                })
                .collect()
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let out = gmres(a, |v| v.to_vec(), &b, 1e-12, 10, 400);
        assert!(out.converged, "{out:?}");
        let r: Vec<f64> = a(&out.solution).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&r) <= 1e-11 * norm(&b));
    }

    #[test]
    fn exact_preconditioner_converges_in_one_step() {
        let d: Vec<f64> = (1..=10).map(|i| i as f64 - 5.5).collect();
        let b = vec![1.0; 10];
        let out = gmres(
            |x| x.iter().zip(&d).map(|(x, d)| x * d).collect(),
            |x| x.iter().zip(&d).map(|(x, d)| x / d).collect(),
            &b,
            1e-14,
            5,
            5,
        );
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
    }
}
