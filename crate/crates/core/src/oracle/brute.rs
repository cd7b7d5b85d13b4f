use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::logc::{CompensatedSum, LogComplex};
use crate::model::IsingModel;

pub const BRUTE_FORCE_CAP: usize = 24;

/// Relative size of `|Z|` against `Σ|w|` below which ratios over `Z` are
/// reported as ill-defined.
pub const DEGENERACY_TOL: f64 = 1e-10;

// Fixed partition of the configuration range. Partial sums are merged in
// chunk order, so results do not depend on the worker count.
const CHUNKS: u64 = 64;

struct Sums {
    z: CompensatedSum,
    observable: CompensatedSum,
    abs: f64,
}

fn enumerate<F>(model: &IsingModel, cap: usize, observable: F) -> Result<(f64, Sums)>
where
    F: Fn(u64) -> f64 + Sync,
{
    let n = model.n_spins();
    if n > cap {
        return Err(Error::CapExceeded {
            what: "brute-force spin count",
            size: n,
            cap,
        });
    }
    let total = 1u64 << n;
    let chunks = CHUNKS.min(total);
    let per_chunk = total / chunks;
    let shift = model.log_weight_bound();

    let partials: Vec<Sums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut sums = Sums {
                z: CompensatedSum::new(),
                observable: CompensatedSum::new(),
                abs: 0.0,
            };
            for config in c * per_chunk..(c + 1) * per_chunk {
                let w = (model.log_weight(config) - shift).exp();
                sums.z.add(w);
                sums.observable.add(w * observable(config));
                sums.abs += w.norm();
            }
            sums
        })
        .collect();

    let mut out = Sums {
        z: CompensatedSum::new(),
        observable: CompensatedSum::new(),
        abs: 0.0,
    };
    for p in &partials {
        out.z.merge(&p.z);
        out.observable.merge(&p.observable);
        out.abs += p.abs;
    }
    Ok((shift, out))
}

fn shifted(shift: f64, value: Complex64) -> LogComplex {
    let v = LogComplex::from_complex(value);
    if v.is_zero() {
        v
    } else {
        LogComplex::new(v.log_magnitude + shift, v.phase)
    }
}

/// Exact `Z = Σ_s exp(-Σ K s s - Σ H s)` by enumerating all `2^N`
/// configurations, with compensated summation.
pub fn brute_force_z(model: &IsingModel) -> Result<LogComplex> {
    brute_force_z_capped(model, BRUTE_FORCE_CAP)
}

pub fn brute_force_z_capped(model: &IsingModel, cap: usize) -> Result<LogComplex> {
    let (shift, sums) = enumerate(model, cap, |_| 0.0)?;
    Ok(shifted(shift, sums.z.value()))
}

/// `Σ_s f(s) w(s)` together with `Z`.
pub fn weighted_sum<F>(model: &IsingModel, observable: F) -> Result<(LogComplex, LogComplex)>
where
    F: Fn(u64) -> f64 + Sync,
{
    let (shift, sums) = enumerate(model, BRUTE_FORCE_CAP, observable)?;
    Ok((shifted(shift, sums.z.value()), shifted(shift, sums.observable.value())))
}

/// Complex thermal correlation `⟨s_i s_j⟩`, an unconstrained complex ratio
/// once the couplings leave the real axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationValue(pub Complex64);

/// Exact `⟨s_i s_j⟩ = Σ s_i s_j w / Z`. Fails at partition-function zeroes,
/// where the ratio is undefined.
pub fn correlation(model: &IsingModel, i: usize, j: usize) -> Result<CorrelationValue> {
    let n = model.n_spins();
    for index in [i, j] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, n });
        }
    }
    let parity = |config: u64| {
        if ((config >> i) ^ (config >> j)) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    };
    let (_, sums) = enumerate(model, BRUTE_FORCE_CAP, parity)?;
    let z = sums.z.value();
    let rel = z.norm() / sums.abs;
    if rel < DEGENERACY_TOL {
        return Err(Error::AtZero(rel));
    }
    if i == j {
        return Ok(CorrelationValue(Complex64::new(1.0, 0.0)));
    }
    Ok(CorrelationValue(sums.observable.value() / z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_chain, Bond, FieldTerm};
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_spin_lee_yang_zero() {
        let m = IsingModel::from_edge_list(
            1,
            vec![],
            vec![FieldTerm {
                i: 0,
                field: c(0.0, FRAC_PI_2),
            }],
        )
        .unwrap();
        let z = brute_force_z(&m).unwrap().to_complex();
        assert!(z.norm() < 1e-15, "{z}");
    }

    #[test]
    fn free_spins_give_power_of_two() {
        let m = build_chain(10, false, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        let z = brute_force_z(&m).unwrap();
        assert!((z.log_magnitude - 10.0 * 2f64.ln()).abs() < 1e-13);
        assert!(z.phase.abs() < 1e-15);
    }

    #[test]
    fn open_plaquette_matches_hand_enumeration() {
        let k = c(0.4, -0.7);
        let bonds = vec![(0, 1), (1, 3), (3, 2), (2, 0)]
            .into_iter()
            .map(|(i, j)| Bond { i, j, coupling: k })
            .collect();
        let m = IsingModel::from_edge_list(4, bonds, vec![]).unwrap();
        // 16 configurations: all aligned (2), one spin flipped (8, two broken
        // bonds), checkerboard (2, four broken), two adjacent flipped (4, two broken).
        let expected = (-k * 4.0).exp() * 2.0 + (k * 4.0).exp() * 2.0 + Complex64::new(12.0, 0.0);
        let z = brute_force_z(&m).unwrap().to_complex();
        assert!((z - expected).norm() < 1e-13 * expected.norm());
    }

    #[test]
    fn cap_is_enforced() {
        let m = build_chain(5, false, c(0.1, 0.0), c(0.0, 0.0)).unwrap();
        assert!(matches!(
            brute_force_z_capped(&m, 4),
            Err(Error::CapExceeded { size: 5, cap: 4, .. })
        ));
    }

    #[test]
    fn correlation_trivial_cases() {
        let free = build_chain(4, false, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!(correlation(&free, 0, 3).unwrap().0.norm() < 1e-15);
        let m = build_chain(4, false, c(0.3, 0.2), c(0.1, -0.4)).unwrap();
        assert_eq!(correlation(&m, 2, 2).unwrap().0, c(1.0, 0.0));
    }

    #[test]
    fn open_chain_neighbour_correlation() {
        // open chain, zero field: <s0 s1> = -tanh K under exp(-K s s)
        let k = c(0.35, 0.0);
        let m = build_chain(5, false, k, c(0.0, 0.0)).unwrap();
        let corr = correlation(&m, 1, 2).unwrap().0;
        assert!((corr - (-k.tanh())).norm() < 1e-13);
        // and three bonds apart the chain factorizes
        let corr = correlation(&m, 0, 3).unwrap().0;
        assert!((corr - (-k.tanh()).powi(3)).norm() < 1e-13);
    }

    #[test]
    fn correlation_fails_at_zero() {
        let m = IsingModel::from_edge_list(
            2,
            vec![Bond {
                i: 0,
                j: 1,
                coupling: c(0.0, FRAC_PI_2 / 2.0),
            }],
            vec![],
        )
        .unwrap();
        // Z = 2e^{-K} + 2e^{K} = 4 cosh K vanishes at K = iπ/2; use that point
        let at_zero = m.with_uniform_coupling(c(0.0, FRAC_PI_2));
        assert!(matches!(correlation(&at_zero, 0, 1), Err(Error::AtZero(_))));
    }
}
