use serde::{Deserialize, Serialize};

/// Angles of a two-gate ancilla gadget.
///
/// Coupling gadget: `ZZ(i, a, κ) ZZ(j, a, κ')` projected on `⟨+|_a` gives
/// `cos(κ s_i + κ' s_j)`, which equals `e^{-|Kᴿ|} e^{-Kᴿ s_i s_j}` for
/// `cos 2κ = e^{-2|Kᴿ|}` and `κ' = sgn(Kᴿ) κ`.
///
/// Field gadget: `ZZ(j, a, λ) ZRot(a, μ)` gives `cos(λ s_j + μ)`, equal to
/// `e^{-|Hᴿ|} e^{-Hᴿ s_j}` for `cos 2λ = e^{-2|Hᴿ|}` and `μ = sgn(Hᴿ) λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GadgetParams {
    Coupling { kappa: f64, kappa_prime: f64 },
    Field { lambda: f64, mu: f64 },
}

impl GadgetParams {
    pub fn is_identity(&self) -> bool {
        match *self {
            GadgetParams::Coupling { kappa, .. } => kappa == 0.0,
            GadgetParams::Field { lambda, .. } => lambda == 0.0,
        }
    }
}

fn half_angle(real_part: f64) -> f64 {
    (-2.0 * real_part.abs()).exp().acos() / 2.0
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gadget angles for the real part of a coupling. The gadget contributes
/// `|k_real|` to the circuit's log prefactor.
pub fn gadget_params_coupling(k_real: f64) -> GadgetParams {
    let kappa = half_angle(k_real);
    GadgetParams::Coupling {
        kappa,
        kappa_prime: sign(k_real) * kappa,
    }
}

/// Gadget angles for the real part of a field. The gadget contributes
/// `|h_real|` to the circuit's log prefactor.
pub fn gadget_params_field(h_real: f64) -> GadgetParams {
    let lambda = half_angle(h_real);
    GadgetParams::Field {
        lambda,
        mu: sign(h_real) * lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn coupling(k: f64) -> (f64, f64) {
        match gadget_params_coupling(k) {
            GadgetParams::Coupling { kappa, kappa_prime } => (kappa, kappa_prime),
            _ => unreachable!(),
        }
    }

    fn field(h: f64) -> (f64, f64) {
        match gadget_params_field(h) {
            GadgetParams::Field { lambda, mu } => (lambda, mu),
            _ => unreachable!(),
        }
    }

    #[test]
    fn coupling_angles() {
        assert_eq!(coupling(0.0), (0.0, 0.0));
        assert!(gadget_params_coupling(0.0).is_identity());
        let ln2 = 2f64.ln() / 2.0;
        let (k, kp) = coupling(ln2);
        assert!((k - PI / 6.0).abs() < 1e-15 && (kp - PI / 6.0).abs() < 1e-15);
        let (k, kp) = coupling(-ln2);
        assert!((k - PI / 6.0).abs() < 1e-15 && (kp + PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn field_angles() {
        assert_eq!(field(0.0), (0.0, 0.0));
        let ln2 = 2f64.ln() / 2.0;
        let (l, m) = field(ln2);
        assert!((l - PI / 6.0).abs() < 1e-15 && (m - PI / 6.0).abs() < 1e-15);
        let (l, m) = field(-0.4);
        assert!(m == -l && l > 0.0);
    }

    #[test]
    fn angles_stay_below_quarter_turn() {
        for x in [1e-9, 0.1, 1.0, 10.0] {
            let (k, _) = coupling(x);
            assert!((0.0..FRAC_PI_4).contains(&k));
        }
    }

    /// Projected gadget amplitudes reproduce the imaginary-time factors on all
    /// spin configurations.
    #[test]
    fn projected_gadgets_match_boltzmann_factors() {
        for x in [-1.3, -0.2, 0.0, 0.45, 2.0] {
            let (k, kp) = coupling(x);
            for si in [1.0, -1.0] {
                for sj in [1.0, -1.0] {
                    let gadget = x.abs().exp() * (k * si + kp * sj).cos();
                    assert!((gadget - (-x * si * sj).exp()).abs() < 1e-12);
                }
            }
            let (l, m) = field(x);
            for s in [1.0, -1.0] {
                let gadget = x.abs().exp() * (l * s + m).cos();
                assert!((gadget - (-x * s).exp()).abs() < 1e-12);
            }
        }
    }
}
