//! Gate-level circuits realizing return probabilities proportional to `|Z|²`.
//!
//! Every circuit starts from a product state fixed by the qubit roles:
//! physical qubits and x-ancillas in `|+⟩`, z-ancillas in `|↑⟩`. The quantity
//! of interest is the overlap of the evolved state with that same state.
//! Ancillas enter only through two-gate gadgets which, once the ancilla is
//! projected back onto its initial state, act as a real imaginary-time factor
//! on the physical register.

mod compile;
mod gadget;
mod kicked;

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use compile::{compile_general, compile_general_with, CompileOptions};
pub use gadget::{gadget_params_coupling, gadget_params_field, GadgetParams};
pub use kicked::{calibrate_kicked, compile_kicked, ky_to_kick_field, KickedCalibration, KickedProtocol, KICK_SIGN};

pub const CIRCUIT_FORMAT_VERSION: u32 = 1;

/// Gate semantics: `ZZ(a, b, θ) = exp(-iθ σᶻ_a σᶻ_b)`, `ZRot(q, h) = exp(-ih σᶻ_q)`,
/// and the same with `σˣ` for `XX` and `XRot`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    Zz { a: usize, b: usize, theta: f64 },
    ZRot { q: usize, h: f64 },
    Xx { a: usize, b: usize, theta: f64 },
    XRot { q: usize, h: f64 },
}

impl Gate {
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::Zz { a, b, .. } | Gate::Xx { a, b, .. } => (a, Some(b)),
            Gate::ZRot { q, .. } | Gate::XRot { q, .. } => (q, None),
        }
    }

    pub fn touches(&self, q: usize) -> bool {
        let (a, b) = self.qubits();
        a == q || b == Some(q)
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, Gate::Zz { .. } | Gate::ZRot { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitRole {
    Physical,
    /// Starts in `|+⟩`, measured along x.
    AncillaX,
    /// Starts in `|↑⟩`, measured along z.
    AncillaZ,
}

impl QubitRole {
    pub fn is_ancilla(self) -> bool {
        !matches!(self, QubitRole::Physical)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    roles: Vec<QubitRole>,
    gates: Vec<Gate>,
    /// `C` with `|Z| = e^C · |⟨ψ₀|U|ψ₀⟩|` (general scheme) or the gadget
    /// normalization alone (kicked scheme).
    log_prefactor: f64,
    /// ancilla qubit -> gadget id
    ancilla_usage: BTreeMap<usize, usize>,
    /// gate range of each gadget
    gadgets: Vec<Range<usize>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCounts {
    pub n_physical: usize,
    pub n_ancilla_x: usize,
    pub n_ancilla_z: usize,
    pub n_gates: usize,
}

impl ResourceCounts {
    pub fn total_qubits(&self) -> usize {
        self.n_physical + self.n_ancilla_x + self.n_ancilla_z
    }
}

impl Circuit {
    pub fn new(n_physical: usize) -> Self {
        Circuit {
            roles: vec![QubitRole::Physical; n_physical],
            ..Default::default()
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[QubitRole] {
        &self.roles
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn log_prefactor(&self) -> f64 {
        self.log_prefactor
    }

    pub fn ancilla_usage(&self) -> &BTreeMap<usize, usize> {
        &self.ancilla_usage
    }

    pub fn gadget_gates(&self, id: usize) -> &[Gate] {
        &self.gates[self.gadgets[id].clone()]
    }

    pub fn n_gadgets(&self) -> usize {
        self.gadgets.len()
    }

    pub fn n_physical(&self) -> usize {
        self.roles.iter().filter(|r| !r.is_ancilla()).count()
    }

    pub(crate) fn add_log_prefactor(&mut self, c: f64) {
        self.log_prefactor += c;
    }

    /// Appends a gate on already-allocated qubits.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let n = self.n_qubits();
        let (a, b) = gate.qubits();
        for q in std::iter::once(a).chain(b) {
            if q >= n {
                return Err(Error::IndexOutOfRange { index: q, n });
            }
        }
        if b == Some(a) {
            return Err(Error::Invalid(format!("two-qubit gate on a single qubit {a}")));
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Allocates a fresh ancilla and appends its gadget; `build` receives the
    /// ancilla index and returns the gadget gates.
    pub(crate) fn push_gadget<F>(&mut self, role: QubitRole, build: F) -> Result<usize>
    where
        F: FnOnce(usize) -> Vec<Gate>,
    {
        debug_assert!(role.is_ancilla());
        let a = self.roles.len();
        self.roles.push(role);
        let start = self.gates.len();
        for g in build(a) {
            self.push(g)?;
        }
        let id = self.gadgets.len();
        self.gadgets.push(start..self.gates.len());
        self.ancilla_usage.insert(a, id);
        Ok(a)
    }

    pub fn resource_counts(&self) -> ResourceCounts {
        let count = |role| self.roles.iter().filter(|&&r| r == role).count();
        ResourceCounts {
            n_physical: count(QubitRole::Physical),
            n_ancilla_x: count(QubitRole::AncillaX),
            n_ancilla_z: count(QubitRole::AncillaZ),
            n_gates: self.gates.len(),
        }
    }

    /// Checks that each ancilla is touched only by the gates of its own gadget.
    pub fn check_single_use(&self) -> Result<()> {
        for (q, role) in self.roles.iter().enumerate() {
            if !role.is_ancilla() {
                continue;
            }
            let id = *self
                .ancilla_usage
                .get(&q)
                .ok_or_else(|| Error::Invalid(format!("ancilla {q} has no gadget")))?;
            let range = &self.gadgets[id];
            for (g, gate) in self.gates.iter().enumerate() {
                if gate.touches(q) && !range.contains(&g) {
                    return Err(Error::Invalid(format!(
                        "ancilla {q} touched by gate {g} outside gadget {id}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&CircuitFile {
            version: CIRCUIT_FORMAT_VERSION,
            circuit: self,
        })
        .expect("circuit serializes")
    }
}

#[derive(Serialize)]
struct CircuitFile<'a> {
    version: u32,
    #[serde(flatten)]
    circuit: &'a Circuit,
}

/// Tally of qubits by role and of gates.
pub fn resource_counts(circuit: &Circuit) -> ResourceCounts {
    circuit.resource_counts()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_circuit_counts_are_zero() {
        assert_eq!(resource_counts(&Circuit::new(0)), ResourceCounts::default());
    }

    #[test]
    fn push_validates_indices() {
        let mut c = Circuit::new(2);
        assert!(c.push(Gate::Zz { a: 0, b: 1, theta: 0.1 }).is_ok());
        assert!(matches!(
            c.push(Gate::ZRot { q: 2, h: 0.1 }),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        ));
        assert!(c.push(Gate::Xx { a: 1, b: 1, theta: 0.1 }).is_err());
    }

    #[test]
    fn single_use_violation_is_detected() {
        let mut c = Circuit::new(1);
        let a = c
            .push_gadget(QubitRole::AncillaX, |a| vec![Gate::Zz { a: 0, b: a, theta: 0.2 }])
            .unwrap();
        assert!(c.check_single_use().is_ok());
        c.push(Gate::ZRot { q: a, h: 0.1 }).unwrap();
        assert!(c.check_single_use().is_err());
    }
}
