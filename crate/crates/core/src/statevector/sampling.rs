use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StateVector;
use crate::circuit::QubitRole;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Z,
}

/// Per-qubit measurement axis. A shot succeeds when every qubit returns the
/// outcome of its initial state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementBasis(pub Vec<Axis>);

impl MeasurementBasis {
    pub fn from_roles(roles: &[QubitRole]) -> Self {
        MeasurementBasis(
            roles
                .iter()
                .map(|r| match r {
                    QubitRole::Physical | QubitRole::AncillaX => Axis::X,
                    QubitRole::AncillaZ => Axis::Z,
                })
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotResult {
    pub n_shots: u64,
    pub successes: u64,
    pub estimate: f64,
}

/// Draws `n_shots` full measurement records from `state` and counts returns to
/// the initial product state. The state is normalized first.
pub fn sample_shots(state: &StateVector, basis: &MeasurementBasis, n_shots: u64, seed: u64) -> Result<ShotResult> {
    if basis.0.len() != state.n_qubits() {
        return Err(Error::Invalid(format!(
            "basis has {} axes for {} qubits",
            basis.0.len(),
            state.n_qubits()
        )));
    }
    if n_shots == 0 {
        return Err(Error::Invalid("zero shots".into()));
    }
    let mut rotated = state.normalized();
    for (q, axis) in basis.0.iter().enumerate() {
        if *axis == Axis::X {
            rotated.hadamard(q)?;
        }
    }
    let mut cdf = Vec::with_capacity(rotated.amplitudes().len());
    let mut acc = 0.0;
    for a in rotated.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0;
    for _ in 0..n_shots {
        let u = rng.random::<f64>() * acc;
        if cdf.partition_point(|&c| c <= u) == 0 {
            successes += 1;
        }
    }
    Ok(ShotResult {
        n_shots,
        successes,
        estimate: successes as f64 / n_shots as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{compile_general, Gate};
    use crate::model::build_chain;
    use crate::statevector::{final_state, run_full};
    use num_complex::Complex64;

    #[test]
    fn initial_state_always_returns() {
        let roles = [QubitRole::Physical, QubitRole::AncillaZ, QubitRole::AncillaX];
        let s = StateVector::initial(&roles);
        let r = sample_shots(&s, &MeasurementBasis::from_roles(&roles), 500, 1).unwrap();
        assert_eq!(r.successes, 500);
    }

    #[test]
    fn flipped_state_never_returns() {
        let roles = [QubitRole::AncillaZ];
        let mut s = StateVector::initial(&roles);
        s.apply_gate(&Gate::XRot {
            q: 0,
            h: std::f64::consts::FRAC_PI_2,
        })
        .unwrap();
        let r = sample_shots(&s, &MeasurementBasis::from_roles(&roles), 200, 3).unwrap();
        assert_eq!(r.successes, 0);
    }

    #[test]
    fn estimate_is_close_and_seeded() {
        let m = build_chain(3, false, Complex64::new(0.4, 0.7), Complex64::new(0.1, 0.2)).unwrap();
        let circuit = compile_general(&m);
        let p = run_full(&circuit).unwrap().probability;
        let state = final_state(&circuit).unwrap();
        let basis = MeasurementBasis::from_roles(circuit.roles());
        let n = 200_000;
        let a = sample_shots(&state, &basis, n, 42).unwrap();
        let b = sample_shots(&state, &basis, n, 42).unwrap();
        assert_eq!(a, b);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((a.estimate - p).abs() < 5.0 * sigma + 1e-12, "{} vs {p}", a.estimate);
    }
}
