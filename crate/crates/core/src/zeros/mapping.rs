use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::GridSpec;

/// Preimages of `x = e^{-2K}` (or `z = e^{-2H}`) inside `window`, over all
/// branches `K = -ln|x|/2 - i(arg x)/2 - iπk`. A root at the origin has no
/// finite preimage and is skipped.
pub fn map_roots(roots: &[Complex64], window: &GridSpec) -> Vec<Complex64> {
    let mut out = Vec::new();
    for &x in roots {
        if x.norm() == 0.0 {
            log::debug!("root at the origin has no finite preimage; skipped");
            continue;
        }
        let principal = -x.ln() / 2.0;
        if principal.re < window.re_min || principal.re > window.re_max {
            continue;
        }
        let k_lo = ((principal.im - window.im_max) / PI).ceil() as i64;
        let k_hi = ((principal.im - window.im_min) / PI).floor() as i64;
        for k in k_lo..=k_hi {
            let w = Complex64::new(principal.re, principal.im - PI * k as f64);
            if window.contains(w) {
                out.push(w);
            }
        }
    }
    out
}

/// Candidate rescaled coupling variables for the unit-circle trend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaledVariable {
    X,
    TanhK,
    Sinh2K,
}

impl RescaledVariable {
    pub fn name(self) -> &'static str {
        match self {
            RescaledVariable::X => "x",
            RescaledVariable::TanhK => "tanh_k",
            RescaledVariable::Sinh2K => "sinh_2k",
        }
    }

    /// Value at `x = e^{-2K}`; all three are single-valued in `x`.
    pub fn from_x(self, x: Complex64) -> Complex64 {
        match self {
            RescaledVariable::X => x,
            RescaledVariable::TanhK => (1.0 - x) / (1.0 + x),
            RescaledVariable::Sinh2K => (x.inv() - x) / 2.0,
        }
    }
}

/// Mean of `||v| - 1|` over the non-zero roots, in the chosen variable.
pub fn mean_unit_circle_distance(roots_x: &[Complex64], var: RescaledVariable) -> f64 {
    let d: Vec<f64> = roots_x
        .iter()
        .filter(|x| x.norm() > 0.0)
        .map(|&x| var.from_x(x))
        .filter(|v| v.is_finite())
        .map(|v| (v.norm() - 1.0).abs())
        .collect();
    d.iter().sum::<f64>() / d.len() as f64
}

/// First variable in `candidates` whose mean distance is non-increasing along
/// `root_sets` (ordered by system size), with the per-set means.
pub fn choose_rescaled_variable(
    root_sets: &[Vec<Complex64>],
    candidates: &[RescaledVariable],
) -> Option<(RescaledVariable, Vec<f64>)> {
    candidates.iter().find_map(|&var| {
        let means: Vec<f64> = root_sets.iter().map(|r| mean_unit_circle_distance(r, var)).collect();
        means.windows(2).all(|w| w[1] <= w[0]).then_some((var, means))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn unit_root_maps_to_branch_lattice() {
        let window = GridSpec::new([-1.0, 1.0, -4.0, 4.0], 10, 10).unwrap();
        let mut k = map_roots(&[Complex64::new(1.0, 0.0)], &window);
        k.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert_eq!(k.len(), 3);
        for (w, expect) in k.iter().zip([-PI, 0.0, PI]) {
            assert!(w.re.abs() < 1e-15 && (w.im - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn minus_one_maps_to_half_periods() {
        let window = GridSpec::new([-1.0, 1.0, -2.0, 2.0], 10, 10).unwrap();
        let mut k = map_roots(&[Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.0)], &window);
        k.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert_eq!(k.len(), 2);
        assert!((k[0].im + FRAC_PI_2).abs() < 1e-15 && (k[1].im - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn rescaled_variables() {
        let x = Complex64::new(0.3, 0.2);
        let k = -x.ln() / 2.0;
        assert!((RescaledVariable::TanhK.from_x(x) - k.tanh()).norm() < 1e-14);
        assert!((RescaledVariable::Sinh2K.from_x(x) - (2.0 * k).sinh()).norm() < 1e-14);
    }
}
