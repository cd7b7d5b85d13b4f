use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::DensityOfStates;

pub const ABERTH_TOL: f64 = 1e-12;
pub const ABERTH_MAX_ITER: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroKind {
    /// Roots in `x = e^{-2K}` at fixed uniform field.
    Fisher,
    /// Roots in `z = e^{-2H}` at fixed uniform coupling.
    LeeYang,
}

/// Horner evaluation of an ascending coefficient list.
pub fn poly_eval(coeffs: &[Complex64], x: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
}

fn eval_with_derivative(coeffs: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs
        .iter()
        .rev()
        .fold((zero, zero), |(p, dp), c| (p * x + c, dp * x + p))
}

/// Splits off exact zero coefficients: returns the number of roots at the
/// origin and the trimmed coefficient slice.
fn trim(coeffs: &[Complex64]) -> (usize, &[Complex64]) {
    let zero = Complex64::new(0.0, 0.0);
    let hi = coeffs.iter().rposition(|c| *c != zero).map_or(0, |p| p + 1);
    let lo = coeffs[..hi].iter().position(|c| *c != zero).unwrap_or(hi);
    (lo, &coeffs[lo..hi])
}

/// Divides out `x ∓ 1` factors exactly when all coefficients are integers
/// representable in a double. Lattice polynomials carry high-multiplicity
/// roots at `x = -1`, which no floating-point root finder resolves to better
/// than the `m`-th root of the rounding error.
fn deflate_unit_roots(p: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    const EXACT: f64 = (1u64 << 53) as f64;
    let exact = |v: &[Complex64]| {
        v.iter()
            .all(|c| c.im == 0.0 && c.re.fract() == 0.0 && c.re.abs() < EXACT)
    };
    let mut rest = p.to_vec();
    let mut roots = Vec::new();
    if !exact(&rest) {
        return (roots, rest);
    }
    for r in [-1.0, 1.0] {
        while rest.len() > 1 {
            // synthetic division by (x - r), highest power first
            let n = rest.len() - 1;
            let mut q = vec![Complex64::new(0.0, 0.0); n];
            let mut carry = Complex64::new(0.0, 0.0);
            for k in (0..=n).rev() {
                carry = carry * r + rest[k];
                if k > 0 {
                    q[k - 1] = carry;
                }
            }
            if carry != Complex64::new(0.0, 0.0) || !exact(&q) {
                break;
            }
            roots.push(Complex64::new(r, 0.0));
            rest = q;
        }
    }
    (roots, rest)
}

/// Rounding-level bound on `|p(z)|`, used as a backward-error stop.
fn eval_noise(p: &[Complex64], z: Complex64) -> f64 {
    let r = z.norm();
    let sum = p.iter().rev().fold(0.0, |acc, c| acc * r + c.norm());
    8.0 * f64::EPSILON * sum * p.len() as f64
}

/// All roots (with multiplicity) by Aberth–Ehrlich simultaneous iteration,
/// started from a circle sized by the coefficient magnitudes.
pub fn aberth_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let (n_zero, p) = trim(coeffs);
    let mut roots = vec![Complex64::new(0.0, 0.0); n_zero];
    let (unit, p) = deflate_unit_roots(p);
    roots.extend(unit);
    let p = p.as_slice();
    if p.len() < 2 {
        return Ok(roots);
    }
    let n = p.len() - 1;
    let lead = p[n];
    let p: Vec<Complex64> = p.iter().map(|c| c / lead).collect();
    let radius = p[0].norm().powf(1.0 / n as f64);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, TAU * k as f64 / n as f64 + 0.4))
        .collect();

    let mut converged = vec![false; n];
    for _ in 0..ABERTH_MAX_ITER {
        let mut all = true;
        for i in 0..n {
            if converged[i] {
                continue;
            }
            let (v, dv) = eval_with_derivative(&p, z[i]);
            if v.norm() <= eval_noise(&p, z[i]) {
                converged[i] = true;
                continue;
            }
            let ratio = v / dv;
            let repulsion: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let w = ratio / (1.0 - ratio * repulsion);
            if !w.is_finite() {
                return Err(Error::NonConvergence(ABERTH_MAX_ITER));
            }
            z[i] -= w;
            if w.norm() <= ABERTH_TOL * z[i].norm().max(1.0) {
                converged[i] = true;
            } else {
                all = false;
            }
        }
        if all {
            roots.extend(z);
            return Ok(roots);
        }
    }
    Err(Error::NonConvergence(ABERTH_MAX_ITER))
}

/// Eigenvalues of the companion matrix, an independent route to the roots.
pub fn companion_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let (n_zero, p) = trim(coeffs);
    let mut roots = vec![Complex64::new(0.0, 0.0); n_zero];
    let (unit, p) = deflate_unit_roots(p);
    roots.extend(unit);
    let p = p.as_slice();
    if p.len() < 2 {
        return Ok(roots);
    }
    let n = p.len() - 1;
    let lead = p[n];
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        m[(0, k)] = -p[n - 1 - k] / lead;
        if k + 1 < n {
            m[(k + 1, k)] = Complex64::new(1.0, 0.0);
        }
    }
    let eig = m
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Invalid("Schur decomposition failed".into()))?;
    roots.extend(eig.iter().copied());
    Ok(roots)
}

/// Roots of `Z` as a polynomial in `x = e^{-2K}` (Fisher, `fixed` = H) or
/// `z = e^{-2H}` (Lee-Yang, `fixed` = K).
pub fn polynomial_roots(dos: &DensityOfStates, kind: ZeroKind, fixed: Complex64) -> Result<Vec<Complex64>> {
    aberth_roots(&coefficients(dos, kind, fixed))
}

pub fn coefficients(dos: &DensityOfStates, kind: ZeroKind, fixed: Complex64) -> Vec<Complex64> {
    match kind {
        ZeroKind::Fisher => dos.fisher_coefficients(fixed),
        ZeroKind::LeeYang => dos.lee_yang_coefficients(fixed),
    }
}

/// Largest distance in a greedy nearest-neighbour pairing of two root
/// multisets; infinite when the sizes differ.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].re.total_cmp(&a[j].re).then(a[i].im.total_cmp(&a[j].im)));
    for i in order {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, r)| (k, (r - a[i]).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("sizes match");
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}
