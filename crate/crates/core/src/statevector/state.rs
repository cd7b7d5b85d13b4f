//! Dense amplitude storage and gate kernels.
//!
//! Layout: qubit `q` owns bit `q` of the basis index (little-endian). Bit value
//! 0 is `|↑⟩` (σᶻ = +1), so a spin `s = (-1)^bit`. Every kernel below derives
//! its strides from this convention.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::circuit::{Gate, QubitRole};
use crate::error::{Error, Result};
use crate::logc::CompensatedSum;

/// Arrays at least this long are processed in parallel.
const PAR_LEN: usize = 1 << 14;
const PAR_BLOCK: usize = 1 << 12;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
    norm_tracker: f64,
}

impl StateVector {
    /// `|0…0⟩`, i.e. all qubits up.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector {
            n_qubits,
            amps,
            norm_tracker: 1.0,
        }
    }

    /// Product state with `|+⟩` on physical and x-ancilla qubits and `|↑⟩` on
    /// z-ancillas.
    pub fn initial(roles: &[QubitRole]) -> Self {
        let n = roles.len();
        let x_mask: usize = roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r != QubitRole::AncillaZ)
            .map(|(q, _)| 1 << q)
            .sum();
        let amp = Complex64::new(FRAC_1_SQRT_2.powi(x_mask.count_ones() as i32), 0.0);
        let amps = (0..1usize << n)
            .map(|i| {
                if i & !x_mask == 0 {
                    amp
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        StateVector {
            n_qubits: n,
            amps,
            norm_tracker: 1.0,
        }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::Invalid(format!(
                "{} amplitudes is not a power of two",
                amps.len()
            )));
        }
        let n_qubits = amps.len().trailing_zeros() as usize;
        let mut s = StateVector {
            n_qubits,
            amps,
            norm_tracker: 0.0,
        };
        s.norm_tracker = s.norm_sqr();
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Accumulated weight: 1 under unitary evolution, the success probability
    /// of the projections applied so far otherwise.
    pub fn norm_tracker(&self) -> f64 {
        self.norm_tracker
    }

    pub(crate) fn refresh_norm(&mut self) {
        self.norm_tracker = self.norm_sqr();
    }

    pub fn norm_sqr(&self) -> f64 {
        if self.amps.len() >= PAR_LEN {
            self.amps
                .par_chunks(PAR_BLOCK)
                .map(|c| c.iter().map(|a| a.norm_sqr()).sum::<f64>())
                .collect::<Vec<_>>()
                .iter()
                .sum()
        } else {
            self.amps.iter().map(|a| a.norm_sqr()).sum()
        }
    }

    /// Returns a normalized copy; the tracked weight is reset to 1.
    pub fn normalized(&self) -> Self {
        let norm = self.norm_sqr().sqrt();
        let mut s = self.clone();
        if norm > 0.0 {
            for a in &mut s.amps {
                *a /= norm;
            }
        }
        s.norm_tracker = 1.0;
        s
    }

    fn check(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            Err(Error::IndexOutOfRange {
                index: q,
                n: self.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        let (a, b) = gate.qubits();
        self.check(a)?;
        if let Some(b) = b {
            self.check(b)?;
            if a == b {
                return Err(Error::Invalid(format!("two-qubit gate on a single qubit {a}")));
            }
        }
        match *gate {
            Gate::Zz { a, b, theta } => {
                let mask = (1usize << a) | (1 << b);
                let even = Complex64::from_polar(1.0, -theta);
                let odd = even.conj();
                self.diagonal(|i| {
                    if (i & mask).count_ones().is_multiple_of(2) {
                        even
                    } else {
                        odd
                    }
                });
            }
            Gate::ZRot { q, h } => {
                let up = Complex64::from_polar(1.0, -h);
                let down = up.conj();
                self.diagonal(|i| if (i >> q) & 1 == 0 { up } else { down });
            }
            Gate::XRot { q, h } => {
                let (c, s) = (h.cos(), Complex64::new(0.0, -h.sin()));
                self.pairs(q, 0, |x, y| {
                    let (a0, a1) = (*x, *y);
                    *x = a0 * c + a1 * s;
                    *y = a0 * s + a1 * c;
                });
            }
            Gate::Xx { a, b, theta } => {
                let (c, s) = (theta.cos(), Complex64::new(0.0, -theta.sin()));
                let (hi, lo) = (a.max(b), a.min(b));
                self.pairs(hi, 1 << lo, |x, y| {
                    let (a0, a1) = (*x, *y);
                    *x = a0 * c + a1 * s;
                    *y = a0 * s + a1 * c;
                });
            }
        }
        Ok(())
    }

    pub fn hadamard(&mut self, q: usize) -> Result<()> {
        self.check(q)?;
        self.pairs(q, 0, |x, y| {
            let (a0, a1) = (*x, *y);
            *x = (a0 + a1) * FRAC_1_SQRT_2;
            *y = (a0 - a1) * FRAC_1_SQRT_2;
        });
        Ok(())
    }

    /// Multiplies every amplitude by `factor(index)`.
    pub(crate) fn diagonal<F>(&mut self, factor: F)
    where
        F: Fn(usize) -> Complex64 + Sync,
    {
        if self.amps.len() >= PAR_LEN {
            self.amps.par_chunks_mut(PAR_BLOCK).enumerate().for_each(|(c, chunk)| {
                let base = c * PAR_BLOCK;
                for (k, a) in chunk.iter_mut().enumerate() {
                    *a *= factor(base + k);
                }
            });
        } else {
            for (i, a) in self.amps.iter_mut().enumerate() {
                *a *= factor(i);
            }
        }
    }

    /// Visits every pair `(i, i ^ (1 << high | low_mask))` with bit `high` of
    /// `i` clear exactly once. `low_mask` is zero or a single bit below `high`.
    pub(crate) fn pairs<F>(&mut self, high: usize, low_mask: usize, f: F)
    where
        F: Fn(&mut Complex64, &mut Complex64) + Sync,
    {
        let half = 1usize << high;
        let visit = |lo: &mut [Complex64], hi: &mut [Complex64]| {
            for off in 0..lo.len() {
                f(&mut lo[off], &mut hi[off ^ low_mask]);
            }
        };
        if self.amps.len() < PAR_LEN {
            for chunk in self.amps.chunks_mut(2 * half) {
                let (lo, hi) = chunk.split_at_mut(half);
                visit(lo, hi);
            }
            return;
        }
        let sub = half.min((2 * low_mask).max(PAR_BLOCK));
        self.amps.par_chunks_mut(2 * half).for_each(|chunk| {
            let (lo, hi) = chunk.split_at_mut(half);
            lo.par_chunks_mut(sub)
                .zip(hi.par_chunks_mut(sub))
                .for_each(|(l, h)| visit(l, h));
        });
    }

    /// Overlap `⟨ψ₀|ψ⟩` with the product state defined by `roles`.
    pub fn overlap_with_initial(&self, roles: &[QubitRole]) -> Complex64 {
        assert_eq!(roles.len(), self.n_qubits, "role count must match qubit count");
        let z_mask: usize = roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == QubitRole::AncillaZ)
            .map(|(q, _)| 1 << q)
            .sum();
        let n_x = self.n_qubits - z_mask.count_ones() as usize;
        let mut acc = CompensatedSum::new();
        if self.amps.len() >= PAR_LEN {
            let partials: Vec<CompensatedSum> = self
                .amps
                .par_chunks(PAR_BLOCK)
                .enumerate()
                .map(|(c, chunk)| {
                    let mut s = CompensatedSum::new();
                    for (k, a) in chunk.iter().enumerate() {
                        if (c * PAR_BLOCK + k) & z_mask == 0 {
                            s.add(*a);
                        }
                    }
                    s
                })
                .collect();
            for p in &partials {
                acc.merge(p);
            }
        } else {
            for (i, a) in self.amps.iter().enumerate() {
                if i & z_mask == 0 {
                    acc.add(*a);
                }
            }
        }
        acc.value() * FRAC_1_SQRT_2.powi(n_x as i32)
    }

    /// Binary dump: `u32` little-endian qubit count, then `2^n` pairs of
    /// little-endian `f64` (re, im).
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n_qubits as u32).to_le_bytes())?;
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word) as usize;
        if n > 40 {
            return Err(Error::Invalid(format!("dump claims {n} qubits")));
        }
        let mut amps = Vec::with_capacity(1 << n);
        let mut buf = [0u8; 16];
        for _ in 0..1usize << n {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
            amps.push(Complex64::new(re, im));
        }
        Self::from_amplitudes(amps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1 << n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        StateVector::from_amplitudes(amps).unwrap().normalized()
    }

    fn distance(a: &StateVector, b: &StateVector) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn zrot_on_plus_gives_cosine_overlap() {
        let roles = [QubitRole::Physical];
        let mut s = StateVector::initial(&roles);
        s.apply_gate(&Gate::ZRot { q: 0, h: 0.37 }).unwrap();
        let overlap = s.overlap_with_initial(&roles);
        assert!((overlap - Complex64::new(0.37f64.cos(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zz_inverse_is_identity() {
        let original = random_state(5, 1);
        let mut s = original.clone();
        s.apply_gate(&Gate::Zz { a: 1, b: 4, theta: 0.8 }).unwrap();
        s.apply_gate(&Gate::Zz {
            a: 4,
            b: 1,
            theta: -0.8,
        })
        .unwrap();
        assert!(distance(&s, &original) < 1e-14);
    }

    #[test]
    fn x_gates_are_hadamard_conjugated_z_gates() {
        for n in [3, 15] {
            let original = random_state(n, 7);
            let mut direct = original.clone();
            direct.apply_gate(&Gate::XRot { q: 2, h: 0.61 }).unwrap();
            direct
                .apply_gate(&Gate::Xx {
                    a: n - 1,
                    b: 0,
                    theta: -0.33,
                })
                .unwrap();

            let targets: &[usize] = if n == 3 { &[0, 2] } else { &[0, 2, n - 1] };
            let mut conj = original.clone();
            for &q in targets {
                conj.hadamard(q).unwrap();
            }
            conj.apply_gate(&Gate::ZRot { q: 2, h: 0.61 }).unwrap();
            conj.apply_gate(&Gate::Zz {
                a: n - 1,
                b: 0,
                theta: -0.33,
            })
            .unwrap();
            for &q in targets {
                conj.hadamard(q).unwrap();
            }
            assert!(distance(&direct, &conj) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn unitary_gates_preserve_norm() {
        let mut s = random_state(15, 3);
        let gates = [
            Gate::Zz {
                a: 0,
                b: 14,
                theta: 1.1,
            },
            Gate::XRot { q: 14, h: -0.4 },
            Gate::Xx {
                a: 3,
                b: 9,
                theta: 0.25,
            },
            Gate::ZRot { q: 7, h: 2.0 },
        ];
        for g in &gates {
            s.apply_gate(g).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_gates() {
        let mut s = StateVector::zero(2);
        assert!(matches!(
            s.apply_gate(&Gate::XRot { q: 2, h: 0.1 }),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        ));
    }

    #[test]
    fn dump_round_trip() {
        let s = random_state(4, 11);
        let mut bytes = Vec::new();
        s.write_dump(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 4 + 16 * 16);
        assert_eq!(&bytes[..4], &[4, 0, 0, 0]);
        let back = StateVector::read_dump(&bytes[..]).unwrap();
        assert_eq!(back.amplitudes(), s.amplitudes());
    }
}
