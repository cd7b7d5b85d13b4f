//! Kicked transverse-field protocol for cylinders.
//!
//! A single periodic row of `N` physical qubits is reused for all `L` rows:
//!
//! `P_kicked = |⟨+| D (e^{-H Σσˣ} D)^{L-1} |+⟩|²`, with `D = e^{-K Σ σᶻσᶻ}` over the ring.
//!
//! Inserting σᶻ resolutions of the identity between layers maps this onto the
//! classical `N × L` cylinder with ring coupling `K` and inter-row coupling
//! `K_y`, where `e^{2K_y} = tanh(-H)`:
//!
//! `P_kicked = |sinh(2H)^{N(L-1)} / 2^{N(L+1)}| · |Z(K, K_y)|²`.
//!
//! The matrix element `⟨s'|e^{-Hσˣ}|s⟩` is `cosh H` for `s = s'` and `-sinh H`
//! otherwise; matching it to `e^{-K_y s s'}` gives the ratio
//! `e^{2K_y} = -tanh H`. The sign matters once longitudinal fields break the
//! row-flip gauge `K_y -> -K_y`; see [`KICK_SIGN`].

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::compile::{push_bond, push_field, CompileOptions};
use super::gadget::{gadget_params_field, GadgetParams};
use super::{Circuit, Gate, QubitRole};
use crate::error::{Error, Result};
use crate::model::{build_cylinder, build_cylinder_merged, IsingModel};
use crate::oracle::brute_force_z;

/// Sign relating the circuit's kick field to the field `H` of the mapping
/// `K_y = ln(tanh H)/2`: the circuit must run with `KICK_SIGN · H`.
pub const KICK_SIGN: f64 = -1.0;

const SINGULAR_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
struct RowBond {
    row: usize,
    i: usize,
    j: usize,
    delta: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct RowField {
    row: usize,
    i: usize,
    delta: Complex64,
}

/// An `n_circ × l_len` kicked protocol, optionally with extra couplings or
/// longitudinal fields inserted into individual rows (used by the
/// correlation probes).
#[derive(Clone, Debug, PartialEq)]
pub struct KickedProtocol {
    n_circ: usize,
    l_len: usize,
    coupling: Complex64,
    kick_field: Complex64,
    extra_bonds: Vec<RowBond>,
    extra_fields: Vec<RowField>,
}

impl KickedProtocol {
    /// `coupling` is the ring coupling `K`, `kick_field` the transverse field
    /// applied by the circuit.
    ///
    /// A ring of two qubits gets both ring bonds, each with its own gadget, so
    /// the classical counterpart is the merged cylinder with coupling `2K`.
    pub fn new(n_circ: usize, l_len: usize, coupling: Complex64, kick_field: Complex64) -> Result<Self> {
        if n_circ < 2 || l_len == 0 {
            return Err(Error::InvalidSize(format!("kicked protocol {n_circ}x{l_len}")));
        }
        Ok(KickedProtocol {
            n_circ,
            l_len,
            coupling,
            kick_field,
            extra_bonds: Vec::new(),
            extra_fields: Vec::new(),
        })
    }

    pub fn n_circ(&self) -> usize {
        self.n_circ
    }

    pub fn l_len(&self) -> usize {
        self.l_len
    }

    pub fn coupling(&self) -> Complex64 {
        self.coupling
    }

    pub fn kick_field(&self) -> Complex64 {
        self.kick_field
    }

    fn check_site(&self, row: usize, i: usize) -> Result<()> {
        if row >= self.l_len {
            return Err(Error::IndexOutOfRange {
                index: row,
                n: self.l_len,
            });
        }
        if i >= self.n_circ {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: self.n_circ,
            });
        }
        Ok(())
    }

    fn ring_neighbours(&self, i: usize, j: usize) -> bool {
        let n = self.n_circ;
        (i + 1) % n == j || (j + 1) % n == i
    }

    /// Adds `delta` to the coupling between columns `i` and `j` of `row`.
    /// Ring neighbours have their existing bond modified; other pairs get an
    /// extra bond in that row's coupling layer.
    pub fn with_row_coupling(mut self, row: usize, i: usize, j: usize, delta: Complex64) -> Result<Self> {
        self.check_site(row, i)?;
        self.check_site(row, j)?;
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        self.extra_bonds.push(RowBond { row, i, j, delta });
        Ok(self)
    }

    /// Adds a longitudinal field `delta` on column `i` of `row`.
    pub fn with_row_field(mut self, row: usize, i: usize, delta: Complex64) -> Result<Self> {
        self.check_site(row, i)?;
        self.extra_fields.push(RowField { row, i, delta });
        Ok(self)
    }

    pub fn has_longitudinal_field(&self) -> bool {
        self.extra_fields.iter().any(|f| f.delta.norm() != 0.0)
    }

    fn ring_bond_coupling(&self, row: usize, i: usize, j: usize) -> Complex64 {
        let mut k = self.coupling;
        // for n_circ == 2 the extra coupling goes onto the first of the two ring bonds
        let first = if self.n_circ == 2 { (0, 1) } else { (i, j) };
        for e in &self.extra_bonds {
            if e.row == row && self.ring_neighbours(e.i, e.j) {
                let same = (e.i.min(e.j), e.i.max(e.j)) == (i.min(j), i.max(j));
                if same && (self.n_circ != 2 || (i, j) == first) {
                    k += e.delta;
                }
            }
        }
        k
    }

    pub fn compile(&self) -> Circuit {
        let n = self.n_circ;
        let opts = CompileOptions::default();
        let mut circuit = Circuit::new(n);
        for row in 0..self.l_len {
            if row > 0 {
                self.push_kick_layer(&mut circuit);
            }
            for col in 0..n {
                let next = (col + 1) % n;
                let k = self.ring_bond_coupling(row, col, next);
                push_bond(&mut circuit, col, next, k, opts);
            }
            for e in self.extra_bonds.iter().filter(|e| e.row == row) {
                if !self.ring_neighbours(e.i, e.j) {
                    push_bond(&mut circuit, e.i, e.j, e.delta, opts);
                }
            }
            for f in self.extra_fields.iter().filter(|f| f.row == row) {
                push_field(&mut circuit, f.i, f.delta, opts);
            }
        }
        circuit
    }

    fn push_kick_layer(&self, circuit: &mut Circuit) {
        let h = self.kick_field;
        let GadgetParams::Field { lambda, mu } = gadget_params_field(h.re) else {
            unreachable!()
        };
        for j in 0..self.n_circ {
            circuit
                .push(Gate::XRot { q: j, h: h.im })
                .expect("physical qubits are allocated");
            circuit
                .push_gadget(QubitRole::AncillaZ, |a| {
                    vec![
                        Gate::Xx {
                            a: j,
                            b: a,
                            theta: lambda,
                        },
                        Gate::XRot { q: a, h: mu },
                    ]
                })
                .expect("gadget qubits are allocated");
            circuit.add_log_prefactor(h.re.abs());
        }
    }

    /// Inter-row coupling `K_y` of the classical cylinder this protocol
    /// samples, `ln(tanh(KICK_SIGN · H))/2` on the principal branch.
    /// Fails when `sinh(2H)` vanishes. `|Z|` does not depend on the branch.
    pub fn classical_ky(&self) -> Result<Complex64> {
        let h = self.kick_field;
        if (2.0 * h).sinh().norm() < SINGULAR_TOL {
            return Err(Error::BranchPoint(format!("sinh(2H) = 0 at H = {h}")));
        }
        Ok((h * KICK_SIGN).tanh().ln() / 2.0)
    }

    /// The classical `n_circ × l_len` model whose `|Z|²` the return
    /// probability measures, including the probe insertions.
    pub fn classical_model(&self) -> Result<IsingModel> {
        let ky = if self.l_len > 1 {
            self.classical_ky()?
        } else {
            Complex64::new(0.0, 0.0)
        };
        let zero = Complex64::new(0.0, 0.0);
        let mut model = if self.n_circ == 2 {
            build_cylinder_merged(2, self.l_len, self.coupling, ky, zero)?
        } else {
            build_cylinder(self.n_circ, self.l_len, self.coupling, ky, zero)?
        };
        let site = |row: usize, col: usize| row * self.n_circ + col;
        for e in &self.extra_bonds {
            model = model.add_coupling(site(e.row, e.i), site(e.row, e.j), e.delta)?;
        }
        for f in &self.extra_fields {
            model = model.add_field(site(f.row, f.i), f.delta)?;
        }
        Ok(model)
    }

    /// `ln |sinh(2H)^{N(L-1)} / 2^{N(L+1)}|`, so that
    /// `P_kicked = e^{this} · |Z|²`.
    pub fn log_kick_prefactor(&self) -> f64 {
        let (n, l) = (self.n_circ as f64, self.l_len as f64);
        let sinh = if self.l_len > 1 {
            n * (l - 1.0) * (2.0 * self.kick_field).sinh().norm().ln()
        } else {
            0.0
        };
        sinh - n * (l + 1.0) * LN_2
    }
}

/// Kicked circuit for ring coupling `k` and circuit kick field `h_kick`.
pub fn compile_kicked(n_circ: usize, l_len: usize, k: Complex64, h_kick: Complex64) -> Result<Circuit> {
    Ok(KickedProtocol::new(n_circ, l_len, k, h_kick)?.compile())
}

/// Field `H` with `tanh H = e^{2 K_y}` on the principal branch. Drive the
/// kicked circuit with `KICK_SIGN · H` to sample the cylinder with inter-row
/// coupling `K_y`.
pub fn ky_to_kick_field(ky: Complex64) -> Result<Complex64> {
    let t = (2.0 * ky).exp();
    if (t - 1.0).norm() < SINGULAR_TOL || (t + 1.0).norm() < SINGULAR_TOL {
        return Err(Error::BranchPoint(format!("e^(2Ky) = {t} is a branch point of artanh")));
    }
    if t.norm() < 1e-4 {
        // series avoids the cancellation in the logarithmic form
        let t2 = t * t;
        return Ok(t * (1.0 + t2 * (1.0 / 3.0 + t2 * (0.2 + t2 / 7.0))));
    }
    Ok(t.atanh())
}

/// Outcome of matching the kicked return probability against brute-force
/// partition functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickedCalibration {
    pub n_circ: usize,
    pub l_len: usize,
    /// Power of two as printed in the closed-form relation, `N(L+1)`.
    pub printed_exponent: f64,
    /// Mean of `log2(|sinh(2H)|^{N(L-1)} |Z|² / P_kicked)` over the samples.
    pub fitted_exponent: f64,
    /// Spread of the fitted exponent across samples.
    pub exponent_spread: f64,
    /// Kick sign that makes the relation hold (-1 means `tanh(-H)`).
    pub kick_sign: f64,
    /// Worst relative deviation of the frozen relation over the samples.
    pub max_rel_error: f64,
    pub samples: usize,
}

impl KickedCalibration {
    pub fn exponent_deviation(&self) -> f64 {
        self.fitted_exponent - self.printed_exponent
    }

    /// Circuit kick field realizing inter-row coupling `ky`.
    pub fn circuit_field(&self, ky: Complex64) -> Result<Complex64> {
        Ok(ky_to_kick_field(ky)? * self.kick_sign)
    }
}

/// Simulates the kicked circuit at `samples` random complex `(K, H)` and fits
/// the power of two and the kick sign against brute-force `|Z|²`.
pub fn calibrate_kicked(n_circ: usize, l_len: usize, samples: usize, seed: u64) -> Result<KickedCalibration> {
    if l_len < 2 {
        return Err(Error::InvalidSize("calibration needs at least two rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fits: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut points = Vec::new();
    for _ in 0..samples {
        let k = Complex64::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
        let h = Complex64::new(rng.random_range(0.15..0.9), rng.random_range(-0.6..0.6));
        let protocol = KickedProtocol::new(n_circ, l_len, k, h)?;
        let circuit = protocol.compile();
        let amp = crate::statevector::run_streamed(&circuit)?;
        let log_p = amp.probability.ln() + 2.0 * circuit.log_prefactor();
        let log_sinh = n_circ as f64 * (l_len as f64 - 1.0) * (2.0 * h).sinh().norm().ln();
        for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
            let ky = (h * sign).tanh().ln() / 2.0;
            let model = if n_circ == 2 {
                build_cylinder_merged(2, l_len, k, ky, Complex64::new(0.0, 0.0))?
            } else {
                build_cylinder(n_circ, l_len, k, ky, Complex64::new(0.0, 0.0))?
            };
            let z = brute_force_z(&model)?;
            fits[slot].push((log_sinh + z.log_norm_sqr() - log_p) / LN_2);
        }
        points.push((protocol, log_p));
    }

    let stats = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let spread = v.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
        (mean, spread)
    };
    let (plus, minus) = (stats(&fits[0]), stats(&fits[1]));
    let (kick_sign, (fitted, spread)) = if minus.1 <= plus.1 { (-1.0, minus) } else { (1.0, plus) };
    if kick_sign != KICK_SIGN {
        log::warn!("kicked calibration selected kick sign {kick_sign}, expected {KICK_SIGN}");
    }
    let printed = (n_circ * (l_len + 1)) as f64;
    if (fitted - printed).abs() > 1e-6 {
        log::warn!("kicked calibration: fitted power of two {fitted} differs from printed {printed}");
    }

    let mut max_rel_error = 0.0f64;
    for (protocol, log_p) in &points {
        let z = brute_force_z(&protocol.classical_model()?)?;
        let predicted = protocol.log_kick_prefactor() + z.log_norm_sqr();
        max_rel_error = max_rel_error.max((predicted - log_p).exp_m1().abs());
    }
    Ok(KickedCalibration {
        n_circ,
        l_len,
        printed_exponent: printed,
        fitted_exponent: fitted,
        exponent_spread: spread,
        kick_sign,
        max_rel_error,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{resource_counts, ResourceCounts};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kicked_three_by_three_counts() {
        let circuit = compile_kicked(3, 3, c(0.2, 0.4), c(0.5, 0.1)).unwrap();
        assert_eq!(
            resource_counts(&circuit),
            ResourceCounts {
                n_physical: 3,
                n_ancilla_x: 9,
                n_ancilla_z: 6,
                n_gates: 45
            }
        );
        assert_eq!(circuit.n_qubits(), 18);
        circuit.check_single_use().unwrap();
    }

    #[test]
    fn single_row_has_no_kicks() {
        let circuit = compile_kicked(4, 1, c(0.2, 0.4), c(0.5, 0.1)).unwrap();
        let counts = circuit.resource_counts();
        assert_eq!((counts.n_physical, counts.n_ancilla_x, counts.n_ancilla_z), (4, 4, 0));
    }

    #[test]
    fn kicked_prefactor_records_gadget_norms() {
        let (k, h) = (c(-0.3, 0.2), c(0.45, -0.1));
        let circuit = compile_kicked(3, 4, k, h).unwrap();
        let expected = 3.0 * 3.0 * 0.45 + 12.0 * 0.3;
        assert!((circuit.log_prefactor() - expected).abs() < 1e-13);
    }

    #[test]
    fn ky_mapping_examples() {
        let ky = c(0.5f64.ln() / 2.0, 0.0);
        let h = ky_to_kick_field(ky).unwrap();
        assert!((h - c(0.5f64.atanh(), 0.0)).norm() < 1e-15);
        assert!((h.re - 0.549_306_144_334_054_8).abs() < 1e-15);
        // round trip inside the principal strip
        let ky = c(0.4, 0.3);
        let h = ky_to_kick_field(ky).unwrap();
        assert!((h.tanh().ln() / 2.0 - ky).norm() < 1e-13);
        // large negative Ky: H ≈ e^{2Ky}
        let ky = c(-8.0, 0.0);
        let h = ky_to_kick_field(ky).unwrap();
        assert!((h.re - (-16f64).exp()).abs() < 1e-20);
        assert!(matches!(ky_to_kick_field(c(0.0, 0.0)), Err(Error::BranchPoint(_))));
    }

    #[test]
    fn classical_model_rejects_singular_kick() {
        let p = KickedProtocol::new(3, 2, c(0.1, 0.0), c(0.0, 0.0)).unwrap();
        assert!(matches!(p.classical_model(), Err(Error::BranchPoint(_))));
        let p = KickedProtocol::new(3, 1, c(0.1, 0.0), c(0.0, 0.0)).unwrap();
        assert!(p.classical_model().is_ok());
    }

    #[test]
    fn probes_extend_the_classical_model() {
        let p = KickedProtocol::new(4, 2, c(0.1, 0.0), c(0.5, 0.0))
            .unwrap()
            .with_row_coupling(1, 0, 1, c(0.01, 0.0))
            .unwrap()
            .with_row_coupling(0, 0, 2, c(0.0, 0.02))
            .unwrap()
            .with_row_field(1, 3, c(0.03, 0.0))
            .unwrap();
        let m = p.classical_model().unwrap();
        assert_eq!(m.bonds().len(), 2 * 4 * 2 - 4 + 1);
        assert_eq!(m.fields().len(), 1);
        let counts = p.compile().resource_counts();
        // one extra bond gadget and one field gadget
        assert_eq!(counts.n_ancilla_x, 8 + 1 + 1);
        assert!(p.has_longitudinal_field());
        assert!(KickedProtocol::new(4, 2, c(0.1, 0.0), c(0.5, 0.0))
            .unwrap()
            .with_row_field(2, 0, c(0.1, 0.0))
            .is_err());
    }

    #[test]
    fn longitudinal_fields_fix_the_inter_row_sign() {
        let fields = [(1, 1, c(0.13, 0.05)), (2, 0, c(-0.07, 0.11)), (0, 2, c(0.05, -0.09))];
        for h in [c(0.5, 0.1), c(-0.4, 0.2), c(0.0, 0.6)] {
            let mut p = KickedProtocol::new(3, 3, c(0.2, 0.25), h).unwrap();
            for &(row, col, f) in &fields {
                p = p.with_row_field(row, col, f).unwrap();
            }
            let circuit = p.compile();
            let log_p =
                crate::statevector::run_full(&circuit).unwrap().probability.ln() + 2.0 * circuit.log_prefactor();
            let z = brute_force_z(&p.classical_model().unwrap()).unwrap();
            assert!(
                (p.log_kick_prefactor() + z.log_norm_sqr() - log_p).abs() < 1e-12,
                "H = {h}"
            );
        }
    }
}
