use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::logc::{CompensatedSum, LogComplex};

pub const TRANSFER_CAP: usize = 16;

const PAR_THRESHOLD: usize = 1 << 12;

fn row_log_weight(state: usize, n_circ: usize, kx: Complex64, h: Complex64) -> Complex64 {
    let spin = |j: usize| if (state >> j) & 1 == 0 { 1.0 } else { -1.0 };
    let mut w = Complex64::new(0.0, 0.0);
    for j in 0..n_circ {
        w -= kx * (spin(j) * spin((j + 1) % n_circ));
        w -= h * spin(j);
    }
    w
}

/// Partition function of the `n_circ × l_len` cylinder (periodic rows, open
/// ends) by row-to-row transfer.
///
/// The inter-row operator is a tensor product of identical 2×2 site factors,
/// so each application costs `O(n_circ·2^n_circ)`; the full matrix is never
/// formed. For `n_circ == 2` the two ring bonds act on the same pair, which
/// matches the merged cylinder builder.
pub fn transfer_matrix_z(
    n_circ: usize,
    l_len: usize,
    kx: Complex64,
    ky: Complex64,
    h: Complex64,
) -> Result<LogComplex> {
    if n_circ > TRANSFER_CAP {
        return Err(Error::CapExceeded {
            what: "transfer-matrix circumference",
            size: n_circ,
            cap: TRANSFER_CAP,
        });
    }
    if n_circ < 2 || l_len == 0 {
        return Err(Error::InvalidSize(format!("cylinder {n_circ}x{l_len}")));
    }
    let dim = 1usize << n_circ;
    let row_shift = n_circ as f64 * (kx.re.abs() + h.re.abs());
    let row: Vec<Complex64> = (0..dim)
        .map(|s| (row_log_weight(s, n_circ, kx, h) - row_shift).exp())
        .collect();

    // site factor: same spin -> e^{-ky}, opposite -> e^{+ky}, scaled by e^{-|ky.re|}
    let site_shift = ky.re.abs();
    let aligned = (-ky - site_shift).exp();
    let flipped = (ky - site_shift).exp();

    let mut v = row.clone();
    let mut log_scale = row_shift;
    let mut scratch = vec![Complex64::new(0.0, 0.0); dim];
    for _ in 1..l_len {
        for j in 0..n_circ {
            let bit = 1usize << j;
            let kernel = |(s, out): (usize, &mut Complex64)| {
                *out = aligned * v[s] + flipped * v[s ^ bit];
            };
            if dim >= PAR_THRESHOLD {
                scratch.par_iter_mut().enumerate().for_each(kernel);
            } else {
                scratch.iter_mut().enumerate().for_each(kernel);
            }
            std::mem::swap(&mut v, &mut scratch);
        }
        log_scale += n_circ as f64 * site_shift + row_shift;
        let mut max = 0.0f64;
        for (x, r) in v.iter_mut().zip(&row) {
            *x *= r;
            max = max.max(x.norm());
        }
        if max > 0.0 {
            for x in v.iter_mut() {
                *x /= max;
            }
            log_scale += max.ln();
        }
    }

    let mut acc = CompensatedSum::new();
    for x in &v {
        acc.add(*x);
    }
    let z = LogComplex::from_complex(acc.value());
    if z.is_zero() {
        return Ok(z);
    }
    Ok(LogComplex::new(z.log_magnitude + log_scale, z.phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_chain, build_cylinder, build_cylinder_merged};
    use crate::oracle::brute_force_z;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn free_cylinder_is_power_of_two() {
        let z = transfer_matrix_z(4, 5, c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!((z.log_magnitude - 20.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_row_is_a_ring() {
        let k = c(0.3, -0.8);
        let h = c(-0.2, 0.5);
        let ring = build_chain(5, true, k, h).unwrap();
        let tm = transfer_matrix_z(5, 1, k, c(1.0, 1.0), h).unwrap();
        assert!(tm.rel_diff(brute_force_z(&ring).unwrap()) < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_small_cylinders() {
        let (kx, ky, h) = (c(0.21, 0.63), c(-0.44, 0.17), c(0.05, -0.3));
        let tm = transfer_matrix_z(3, 3, kx, ky, h).unwrap();
        let bf = brute_force_z(&build_cylinder(3, 3, kx, ky, h).unwrap()).unwrap();
        assert!(tm.rel_diff(bf) < 1e-12);

        let tm = transfer_matrix_z(2, 3, kx, ky, h).unwrap();
        let bf = brute_force_z(&build_cylinder_merged(2, 3, kx, ky, h).unwrap()).unwrap();
        assert!(tm.rel_diff(bf) < 1e-12);
    }

    #[test]
    fn large_cylinders_stay_finite() {
        let z = transfer_matrix_z(7, 7, c(-2.0, 0.1), c(-2.0, 0.1), c(0.0, 0.0)).unwrap();
        // ground states dominate: log|Z| ≈ 91·2 + ln 2
        assert!(z.log_magnitude.is_finite());
        assert!((z.log_magnitude - (182.0 + 2f64.ln())).abs() < 1e-3);
    }

    #[test]
    fn rejects_oversized_rows() {
        assert!(matches!(
            transfer_matrix_z(17, 2, c(0.1, 0.0), c(0.1, 0.0), c(0.0, 0.0)),
            Err(Error::CapExceeded { .. })
        ));
        assert!(transfer_matrix_z(1, 2, c(0.1, 0.0), c(0.1, 0.0), c(0.0, 0.0)).is_err());
    }
}
