//! Root finding for the monic autoregressive polynomials
//! `z^p - c_1 z^{p-1} - ... - c_p`.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A root together with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// Eigenvalues of a real square matrix.
///
/// The Francis iteration has no exceptional shifts and can stall on
/// structured matrices. A stalled run is retried with a looser deflation
/// tolerance, then on an orthogonally similar matrix `H m H` with a
/// Householder reflection `H`.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    let max_iter = 200 * n.max(1);
    let mut work = m.clone();
    for attempt in 0..3u32 {
        for eps in [f64::EPSILON, 1e-14, 1e-13, 1e-12] {
            if let Some(schur) = Schur::try_new(work.clone(), eps, max_iter) {
                let eig: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
                if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Numeric("non-finite eigenvalue".into()));
                }
                return Ok(eig);
            }
        }
        let v = DVector::from_fn(n, |i, _| ((i as f64 + 1.0) * (1.618_033_988_7 + attempt as f64)).sin()).normalize();
        let h = DMatrix::identity(n, n) - 2.0 * &v * v.transpose();
        work = &h * m * &h;
    }
    Err(Error::Numeric("eigenvalue iteration did not converge".into()))
}

/// Evaluates `z^p - sum c_i z^{p-i}` by Horner's rule.
pub fn eval_ar(c: &[f64], z: Complex64) -> Complex64 {
    c.iter().fold(Complex64::new(1.0, 0.0), |acc, &ci| acc * z - ci)
}

fn eval_ar_derivative(c: &[f64], z: Complex64) -> Complex64 {
    let p = c.len();
    let mut d = Complex64::new(p as f64, 0.0);
    for (i, &ci) in c.iter().enumerate().take(p - 1) {
        d = d * z - ci * (p - 1 - i) as f64;
    }
    d
}

/// All `p` roots (with repetition) of `z^p - c_1 z^{p-1} - ... - c_p`, as
/// eigenvalues of the companion matrix, each refined by a few Newton steps
/// when that reduces the residual.
pub fn ar_roots(c: &[f64]) -> Result<Vec<Complex64>> {
    let p = c.len();
    if p == 0 {
        return Ok(Vec::new());
    }
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite polynomial coefficient".into()));
    }
    let mut m = DMatrix::<f64>::zeros(p, p);
    for (j, &cj) in c.iter().enumerate() {
        m[(0, j)] = cj;
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    let mut roots = eigenvalues(&m)?;
    for z in roots.iter_mut() {
        let mut best = *z;
        let mut best_res = eval_ar(c, best).norm();
        for _ in 0..3 {
            let d = eval_ar_derivative(c, best);
            if d.norm() == 0.0 {
                break;
            }
            let cand = best - eval_ar(c, best) / d;
            let res = eval_ar(c, cand).norm();
            if res < best_res {
                best = cand;
                best_res = res;
            } else {
                break;
            }
        }
        *z = best;
    }
    Ok(roots)
}

/// Groups roots closer than `tol` into clusters, each represented by its
/// centroid and carrying the cluster size as multiplicity.
pub fn cluster(roots: &[Complex64], tol: f64) -> Vec<Root> {
    let n = roots.len();
    let mut label: Vec<usize> = (0..n).collect();
    // single linkage via repeated relabelling; n is small
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for j in 0..n {
                if (roots[i] - roots[j]).norm() < tol && label[j] > label[i] {
                    label[j] = label[i];
                    changed = true;
                }
            }
        }
    }
    let mut out: Vec<Root> = Vec::new();
    let mut seen: Vec<usize> = Vec::new();
    for i in 0..n {
        if seen.contains(&label[i]) {
            continue;
        }
        seen.push(label[i]);
        let members: Vec<Complex64> = (0..n).filter(|&j| label[j] == label[i]).map(|j| roots[j]).collect();
        let k = members.len();
        let centroid = members.iter().sum::<Complex64>() / k as f64;
        out.push(Root {
            value: centroid,
            multiplicity: k,
        });
    }
    out
}

/// Expands `prod (z - r_i)` into monic coefficients, highest degree first.
pub fn from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coef = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coef.len() + 1];
        for (i, &a) in coef.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a * r;
        }
        coef = next;
    }
    coef
}
