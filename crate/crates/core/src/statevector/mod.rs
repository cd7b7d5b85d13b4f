//! State-vector simulation of the compiled circuits.
//!
//! Three backends compute the same return amplitude `⟨ψ₀|U|ψ₀⟩`:
//! - [`run_full`] keeps every qubit of the circuit in memory;
//! - [`run_streamed`] attaches each ancilla into a recycled slot at its first
//!   gate and projects it back onto its initial state after its last gate, so
//!   memory scales with the physical register plus the live ancillas;
//! - [`run_effective`] skips the circuit and applies the projected gadgets as
//!   diagonal non-unitary factors on the physical register.

mod sampling;
mod state;

use std::f64::consts::FRAC_1_SQRT_2;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{compile_general, Circuit, Gate, QubitRole};
use crate::error::{Error, Result};
use crate::logc::CompensatedSum;
use crate::model::IsingModel;

pub use sampling::{sample_shots, MeasurementBasis, ShotResult};
pub use state::StateVector;

pub const FULL_CAP: usize = 26;
pub const STREAMED_CAP: usize = 28;
pub const EFFECTIVE_CAP: usize = 26;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub amplitude: Complex64,
    pub probability: f64,
}

impl OverlapResult {
    fn new(amplitude: Complex64) -> Self {
        OverlapResult {
            amplitude,
            probability: amplitude.norm_sqr(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Full,
    Streamed,
    Effective,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Backend::Full),
            "streamed" => Ok(Backend::Streamed),
            "effective" => Ok(Backend::Effective),
            other => Err(Error::Invalid(format!("unknown backend {other:?}"))),
        }
    }
}

/// Return amplitude of the general-scheme circuit for `model` on the chosen
/// backend. All backends agree up to rounding.
pub fn run_model(model: &IsingModel, backend: Backend) -> Result<OverlapResult> {
    match backend {
        Backend::Effective => run_effective(model),
        Backend::Full => run_full(&compile_general(model)),
        Backend::Streamed => run_streamed(&compile_general(model)),
    }
}

fn cap(what: &'static str, size: usize, cap: usize) -> Result<()> {
    if size > cap {
        Err(Error::CapExceeded { what, size, cap })
    } else {
        Ok(())
    }
}

/// Final state of the whole circuit, every qubit kept.
pub fn final_state(circuit: &Circuit) -> Result<StateVector> {
    cap("full state-vector qubits", circuit.n_qubits(), FULL_CAP)?;
    let mut state = StateVector::initial(circuit.roles());
    for g in circuit.gates() {
        state.apply_gate(g)?;
    }
    Ok(state)
}

pub fn run_full(circuit: &Circuit) -> Result<OverlapResult> {
    let state = final_state(circuit)?;
    Ok(OverlapResult::new(state.overlap_with_initial(circuit.roles())))
}

struct SlotPlan {
    /// circuit qubit -> simulator qubit
    map: Vec<usize>,
    /// ancillas to attach before / project after each gate
    attach: Vec<Vec<usize>>,
    release: Vec<Vec<usize>>,
    n_physical: usize,
    n_slots: usize,
}

fn plan_slots(circuit: &Circuit) -> SlotPlan {
    let roles = circuit.roles();
    let gates = circuit.gates();
    let mut first = vec![usize::MAX; roles.len()];
    let mut last = vec![0; roles.len()];
    for (g, gate) in gates.iter().enumerate() {
        let (a, b) = gate.qubits();
        for q in std::iter::once(a).chain(b) {
            first[q] = first[q].min(g);
            last[q] = g;
        }
    }
    let mut map = vec![usize::MAX; roles.len()];
    let mut n_physical = 0;
    for (q, role) in roles.iter().enumerate() {
        if !role.is_ancilla() {
            map[q] = n_physical;
            n_physical += 1;
        }
    }
    let mut attach = vec![Vec::new(); gates.len()];
    let mut release = vec![Vec::new(); gates.len()];
    for (q, role) in roles.iter().enumerate() {
        if role.is_ancilla() && first[q] != usize::MAX {
            attach[first[q]].push(q);
            release[last[q]].push(q);
        }
    }
    let mut free: Vec<usize> = Vec::new();
    let mut n_slots = 0;
    for g in 0..gates.len() {
        for &q in &attach[g] {
            let slot = free.pop().unwrap_or_else(|| {
                n_slots += 1;
                n_slots - 1
            });
            map[q] = n_physical + slot;
        }
        for &q in &release[g] {
            free.push(map[q] - n_physical);
        }
    }
    SlotPlan {
        map,
        attach,
        release,
        n_physical,
        n_slots,
    }
}

fn remap(gate: &Gate, map: &[usize]) -> Gate {
    match *gate {
        Gate::Zz { a, b, theta } => Gate::Zz {
            a: map[a],
            b: map[b],
            theta,
        },
        Gate::Xx { a, b, theta } => Gate::Xx {
            a: map[a],
            b: map[b],
            theta,
        },
        Gate::ZRot { q, h } => Gate::ZRot { q: map[q], h },
        Gate::XRot { q, h } => Gate::XRot { q: map[q], h },
    }
}

/// Number of simulator qubits [`run_streamed`] needs for `circuit`.
pub fn streamed_width(circuit: &Circuit) -> usize {
    let plan = plan_slots(circuit);
    plan.n_physical + plan.n_slots
}

pub fn run_streamed(circuit: &Circuit) -> Result<OverlapResult> {
    let plan = plan_slots(circuit);
    let width = plan.n_physical + plan.n_slots;
    cap("streamed state-vector qubits", width, STREAMED_CAP)?;
    let roles = circuit.roles();

    let mut sim_roles = vec![QubitRole::Physical; plan.n_physical];
    sim_roles.resize(width, QubitRole::AncillaZ);
    let mut state = StateVector::initial(&sim_roles);

    for (g, gate) in circuit.gates().iter().enumerate() {
        for &q in &plan.attach[g] {
            if roles[q] == QubitRole::AncillaX {
                state.pairs(plan.map[q], 0, |x, y| {
                    *x *= FRAC_1_SQRT_2;
                    *y = *x;
                });
            }
        }
        state.apply_gate(&remap(gate, &plan.map))?;
        for &q in &plan.release[g] {
            if roles[q] == QubitRole::AncillaX {
                state.pairs(plan.map[q], 0, |x, y| {
                    *x = (*x + *y) * FRAC_1_SQRT_2;
                    *y = Complex64::new(0.0, 0.0);
                });
            } else {
                state.pairs(plan.map[q], 0, |_, y| *y = Complex64::new(0.0, 0.0));
            }
        }
    }
    state.refresh_norm();

    let mut acc = CompensatedSum::new();
    for a in &state.amplitudes()[..1 << plan.n_physical] {
        acc.add(*a);
    }
    let amplitude = acc.value() * FRAC_1_SQRT_2.powi(plan.n_physical as i32);
    Ok(OverlapResult::new(amplitude))
}

/// Applies `e^{-|Kᴿ|} e^{-K s s}` per bond and `e^{-|Hᴿ|} e^{-H s}` per field
/// directly to `|+⟩^N`. The amplitude equals the general-scheme circuit
/// amplitude, so `Z = amplitude · e^C` with `C = N ln 2 + Σ|Kᴿ| + Σ|Hᴿ|`.
pub fn run_effective(model: &IsingModel) -> Result<OverlapResult> {
    let state = effective_state(model)?;
    Ok(OverlapResult::new(
        state.overlap_with_initial(&vec![QubitRole::Physical; model.n_spins()]),
    ))
}

/// Physical register after the normalized Boltzmann factors, before overlap.
pub fn effective_state(model: &IsingModel) -> Result<StateVector> {
    let n = model.n_spins();
    cap("effective state-vector qubits", n, EFFECTIVE_CAP)?;
    let mut state = StateVector::initial(&vec![QubitRole::Physical; n]);
    for b in model.bonds() {
        let k = b.coupling;
        let aligned = (-k - k.re.abs()).exp();
        let flipped = (k - k.re.abs()).exp();
        let mask = (1usize << b.i) | (1 << b.j);
        state.diagonal(|i| {
            if (i & mask).count_ones().is_multiple_of(2) {
                aligned
            } else {
                flipped
            }
        });
    }
    for f in model.fields() {
        let h = f.field;
        let up = (-h - h.re.abs()).exp();
        let down = (h - h.re.abs()).exp();
        let q = f.i;
        state.diagonal(|i| if (i >> q) & 1 == 0 { up } else { down });
    }
    state.refresh_norm();
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::compile_kicked;
    use crate::model::{build_cylinder, FieldTerm};
    use crate::oracle::brute_force_z;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_spin_field_circuit_reproduces_z() {
        let h = c(0.3, 0.4);
        let m = IsingModel::from_edge_list(1, vec![], vec![FieldTerm { i: 0, field: h }]).unwrap();
        let circuit = compile_general(&m);
        let r = run_full(&circuit).unwrap();
        let z = 2.0 * h.cosh();
        let predicted = r.amplitude * circuit.log_prefactor().exp();
        assert!((predicted - z).norm() < 1e-13 * z.norm(), "{predicted} vs {z}");
    }

    #[test]
    fn backends_agree_with_brute_force() {
        let m = build_cylinder(3, 2, c(0.31, -0.45), c(-0.2, 0.6), c(0.15, 0.25)).unwrap();
        let circuit = compile_general(&m);
        let z = brute_force_z(&m).unwrap().to_complex();
        let scale = circuit.log_prefactor().exp();
        for backend in [Backend::Full, Backend::Streamed, Backend::Effective] {
            let r = run_model(&m, backend).unwrap();
            assert!((r.probability - r.amplitude.norm_sqr()).abs() < 1e-16);
            assert!(r.probability <= 1.0);
            let err = (r.amplitude * scale - z).norm() / z.norm();
            assert!(err < 1e-10, "{backend:?}: {err}");
        }
    }

    #[test]
    fn streamed_uses_one_slot_for_sequential_gadgets() {
        let m = build_cylinder(3, 3, c(0.3, 0.1), c(0.3, 0.1), c(0.0, 0.0)).unwrap();
        assert_eq!(streamed_width(&compile_general(&m)), 10);
        assert_eq!(
            streamed_width(&compile_kicked(3, 3, c(0.2, 0.0), c(0.4, 0.1)).unwrap()),
            4
        );
    }

    #[test]
    fn streamed_matches_full_on_kicked_circuit() {
        let circuit = compile_kicked(3, 2, c(0.2, 0.3), c(0.5, -0.2)).unwrap();
        let full = run_full(&circuit).unwrap();
        let streamed = run_streamed(&circuit).unwrap();
        assert!((full.amplitude - streamed.amplitude).norm() < 1e-13);
    }

    #[test]
    fn caps_are_enforced() {
        let big = build_cylinder(3, 5, c(0.3, 0.1), c(0.3, 0.1), c(0.0, 0.0)).unwrap();
        assert!(matches!(
            run_full(&compile_general(&big)),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn backend_parses() {
        assert_eq!("streamed".parse::<Backend>().unwrap(), Backend::Streamed);
        assert!("gpu".parse::<Backend>().is_err());
    }
}
