//! One-sided Jacobi SVD for dense square matrices.
//!
//! Columns of the working copy are rotated pairwise until they are mutually
//! orthogonal; their norms are the singular values and the accumulated
//! rotations form `V`. All loops run in a fixed order, so the result is
//! bitwise reproducible.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// `a = u · diag(singular_values) · vᵀ`, singular values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Array2<f64>,
    pub singular_values: Array1<f64>,
    pub v: Array2<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(p: &mut [f64], q: &mut [f64], c: f64, s: f64) {
    for (x, y) in p.iter_mut().zip(q.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

fn pair_mut(cols: &mut [Vec<f64>], i: usize, j: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
    debug_assert!(i < j);
    let (head, tail) = cols.split_at_mut(j);
    (&mut head[i], &mut tail[0])
}

/// Full SVD of a square matrix.
///
/// Singular vectors follow a fixed sign convention: the largest-magnitude
/// entry of every column of `u` is positive (first such entry on ties), with
/// the matching column of `v` flipped alongside.
pub fn jacobi_svd(a: &Array2<f64>) -> Result<Svd> {
    let (rows, n) = a.dim();
    if rows != n {
        return Err(Error::invalid(format!(
            "jacobi_svd expects a square matrix, got {rows}x{n}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("jacobi_svd on an empty matrix"));
    }
    let mut g: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let tol = f64::EPSILON * n as f64;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let alpha = dot(&g[p], &g[p]);
                let beta = dot(&g[q], &g[q]);
                let gamma = dot(&g[p], &g[q]);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (gp, gq) = pair_mut(&mut g, p, q);
                rotate(gp, gq, c, s);
                let (vp, vq) = pair_mut(&mut v, p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNonConvergence(MAX_SWEEPS));
    }

    let norms: Vec<f64> = g.iter().map(|col| dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let sigma_max = norms[order[0]];
    // Columns this small carry no reliable direction; they are rebuilt as an
    // orthonormal completion of the well-determined ones.
    let floor = sigma_max * 1e-12;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for &j in &order {
        let col = if norms[j] > floor && norms[j] > 0.0 {
            g[j].iter().map(|x| x / norms[j]).collect()
        } else {
            complete_basis(&u_cols, n, &g[j])
        };
        u_cols.push(col);
        v_cols.push(v[j].clone());
        sigma.push(norms[j]);
    }

    for (u, v) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        let mut lead = 0;
        for (i, x) in u.iter().enumerate() {
            if x.abs() > u[lead].abs() {
                lead = i;
            }
        }
        if u[lead] < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }

    let u = Array2::from_shape_fn((n, n), |(i, j)| u_cols[j][i]);
    let v = Array2::from_shape_fn((n, n), |(i, j)| v_cols[j][i]);
    Ok(Svd {
        u,
        singular_values: Array1::from(sigma),
        v,
    })
}

/// Unit vector orthogonal to every column in `basis`, starting from `hint`
/// and falling back to the canonical axes.
fn complete_basis(basis: &[Vec<f64>], n: usize, hint: &[f64]) -> Vec<f64> {
    let mut candidates: Vec<Vec<f64>> = vec![hint.to_vec()];
    candidates.extend((0..n).map(|i| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    }));
    for mut c in candidates {
        let start = dot(&c, &c).sqrt();
        if start == 0.0 {
            continue;
        }
        c.iter_mut().for_each(|x| *x /= start);
        // Two Gram-Schmidt passes keep the result orthogonal to working precision.
        for _ in 0..2 {
            for b in basis {
                let proj = dot(&c, b);
                c.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let rest = dot(&c, &c).sqrt();
        if rest > 0.5 {
            c.iter_mut().for_each(|x| *x /= rest);
            return c;
        }
    }
    unreachable!("fewer than n basis vectors always leave a canonical axis outside their span")
}
