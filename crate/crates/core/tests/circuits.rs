use num_complex::Complex64;
use zeroscope::circuit::{compile_general, ky_to_kick_field, Circuit, KickedProtocol, KICK_SIGN};
use zeroscope::oracle::brute_force_z;
use zeroscope::statevector::{run_full, run_model, run_streamed, Backend};
use zeroscope::{build_chain, build_cylinder, IsingModel};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn general_scheme_reproduces_z_on_a_chain_with_fields() {
    let model = build_chain(5, true, c(-0.35, 0.6), c(0.25, -0.4)).unwrap();
    let circuit = compile_general(&model);
    circuit.check_single_use().unwrap();
    let z = brute_force_z(&model).unwrap().to_complex();
    for backend in [Backend::Full, Backend::Streamed, Backend::Effective] {
        let amp = run_model(&model, backend).unwrap().amplitude * circuit.log_prefactor().exp();
        assert!((amp - z).norm() < 1e-11 * z.norm(), "{backend:?}");
    }
}

#[test]
fn kicked_probability_tracks_isotropic_z() {
    let (n, l) = (3, 3);
    let k = c(0.27, -0.33);
    let kick = ky_to_kick_field(k).unwrap() * KICK_SIGN;
    let protocol = KickedProtocol::new(n, l, k, kick).unwrap();
    let circuit = protocol.compile();
    let p = run_streamed(&circuit).unwrap().probability;
    let z = brute_force_z(&build_cylinder(n, l, k, k, c(0.0, 0.0)).unwrap()).unwrap();
    let lhs = p.ln() + 2.0 * circuit.log_prefactor() - protocol.log_kick_prefactor();
    assert!((lhs - z.log_norm_sqr()).abs() < 1e-10);
}

#[test]
fn serialized_artifacts_round_trip() {
    let model = build_cylinder(3, 2, c(0.1, 0.2), c(0.3, -0.1), c(0.05, 0.0)).unwrap();
    let back = IsingModel::from_json(&model.to_json()).unwrap();
    assert_eq!(back.to_json(), model.to_json());
    assert_eq!(back.content_hash(), model.content_hash());

    let circuit = compile_general(&model);
    let text = circuit.to_json();
    let again: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(again["gates"]
        .as_array()
        .is_some_and(|g| g.len() == circuit.gates().len()));
}

#[test]
fn empty_circuit_returns_with_certainty() {
    let circuit = Circuit::new(4);
    let p = run_full(&circuit).unwrap().probability;
    assert!((p - 1.0).abs() < 1e-14, "{p}");
}
