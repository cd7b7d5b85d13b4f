use std::f64::consts::LN_2;

use num_complex::Complex64;

use super::gadget::{gadget_params_coupling, gadget_params_field, GadgetParams};
use super::{Circuit, Gate, QubitRole};
use crate::model::IsingModel;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CompileOptions {
    /// Skip gadgets whose real part is exactly zero. Off by default so that
    /// resource counts follow the closed-form qubit and gate totals.
    pub elide_identity_gadgets: bool,
}

/// Appends the gates for one bond: the unitary `ZZ(i, j, Kᴵ)` followed by a
/// coupling gadget for `Kᴿ`.
pub(super) fn push_bond(circuit: &mut Circuit, i: usize, j: usize, k: Complex64, opts: CompileOptions) {
    circuit
        .push(Gate::Zz {
            a: i,
            b: j,
            theta: k.im,
        })
        .expect("physical qubits are allocated");
    let params = gadget_params_coupling(k.re);
    if opts.elide_identity_gadgets && params.is_identity() {
        return;
    }
    let GadgetParams::Coupling { kappa, kappa_prime } = params else {
        unreachable!()
    };
    circuit
        .push_gadget(QubitRole::AncillaX, |a| {
            vec![
                Gate::Zz {
                    a: i,
                    b: a,
                    theta: kappa,
                },
                Gate::Zz {
                    a: j,
                    b: a,
                    theta: kappa_prime,
                },
            ]
        })
        .expect("gadget qubits are allocated");
    circuit.add_log_prefactor(k.re.abs());
}

/// Appends the gates for a longitudinal field: `ZRot(i, Hᴵ)` plus a field
/// gadget for `Hᴿ`.
pub(super) fn push_field(circuit: &mut Circuit, i: usize, h: Complex64, opts: CompileOptions) {
    circuit
        .push(Gate::ZRot { q: i, h: h.im })
        .expect("physical qubits are allocated");
    let params = gadget_params_field(h.re);
    if opts.elide_identity_gadgets && params.is_identity() {
        return;
    }
    let GadgetParams::Field { lambda, mu } = params else {
        unreachable!()
    };
    circuit
        .push_gadget(QubitRole::AncillaX, |a| {
            vec![
                Gate::Zz {
                    a: i,
                    b: a,
                    theta: lambda,
                },
                Gate::ZRot { q: a, h: mu },
            ]
        })
        .expect("gadget qubits are allocated");
    circuit.add_log_prefactor(h.re.abs());
}

/// General scheme for an arbitrary graph: one x-ancilla per bond and per field
/// term. The log prefactor is `N ln 2 + Σ|Kᴿ| + Σ|Hᴿ|`, so that
/// `|Z|² = e^{2C} · L` with `L` the return probability.
pub fn compile_general(model: &IsingModel) -> Circuit {
    compile_general_with(model, CompileOptions::default())
}

pub fn compile_general_with(model: &IsingModel, opts: CompileOptions) -> Circuit {
    let n = model.n_spins();
    let mut circuit = Circuit::new(n);
    circuit.add_log_prefactor(n as f64 * LN_2);
    for b in model.bonds() {
        push_bond(&mut circuit, b.i, b.j, b.coupling, opts);
    }
    for f in model.fields() {
        push_field(&mut circuit, f.i, f.field, opts);
    }
    circuit
}
