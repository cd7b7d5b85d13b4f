use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Float, ToPrimitive, Zero};

/// Polynomial with integer coefficients, evaluated exactly at binary
/// floating-point points and rounded once at the end. Its values keep full
/// relative precision arbitrarily close to a multiple root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerPolynomial {
    coeffs: Vec<BigInt>,
}

fn decompose(v: f64) -> (BigInt, i64) {
    let (mantissa, exponent, sign) = v.integer_decode();
    (BigInt::from(mantissa) * sign, exponent as i64)
}

fn scale2(v: f64, mut e: i64) -> f64 {
    let mut out = v;
    while e != 0 {
        let step = e.clamp(-1000, 1000);
        out *= 2f64.powi(step as i32);
        e -= step;
    }
    out
}

fn big_to_f64(v: &BigInt, exp2: i64) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    let shift = (v.bits() as i64 - 62).max(0);
    let mantissa = (v >> shift as usize).to_f64().expect("62-bit integer fits a double");
    scale2(mantissa, shift + exp2)
}

impl IntegerPolynomial {
    /// Ascending coefficients; `None` unless every coefficient is a real
    /// integer.
    pub fn from_complex(coeffs: &[Complex64]) -> Option<Self> {
        coeffs
            .iter()
            .map(|c| {
                (c.im == 0.0 && c.re.fract() == 0.0 && c.re.is_finite()).then(|| {
                    let (m, e) = decompose(c.re);
                    if e >= 0 {
                        m << e as usize
                    } else {
                        m >> (-e) as usize
                    }
                })
            })
            .collect::<Option<Vec<_>>>()
            .map(|coeffs| IntegerPolynomial { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        let Some(lead) = self.coeffs.last() else {
            return Complex64::new(0.0, 0.0);
        };
        let (mut wr, er) = decompose(x.re);
        let (mut wi, ei) = decompose(x.im);
        let e = match (wr.is_zero(), wi.is_zero()) {
            (true, true) => 0,
            (true, false) => ei,
            (false, true) => er,
            (false, false) => er.min(ei),
        };
        if !wr.is_zero() {
            wr <<= (er - e) as usize;
        }
        if !wi.is_zero() {
            wi <<= (ei - e) as usize;
        }
        let s = if e >= 0 {
            wr <<= e as usize;
            wi <<= e as usize;
            0
        } else {
            (-e) as usize
        };
        // Horner on P(x)·2^{s·n} with x = w·2^{-s}
        let n = self.degree();
        let (mut ar, mut ai) = (lead.clone(), BigInt::zero());
        for k in (0..n).rev() {
            let nr = &ar * &wr - &ai * &wi;
            let ni = &ar * &wi + &ai * &wr;
            ar = nr + (&self.coeffs[k] << (s * (n - k)));
            ai = ni;
        }
        let exp2 = -((s * n) as i64);
        Complex64::new(big_to_f64(&ar, exp2), big_to_f64(&ai, exp2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_non_integers() {
        assert!(IntegerPolynomial::from_complex(&[c(1.5, 0.0)]).is_none());
        assert!(IntegerPolynomial::from_complex(&[c(1.0, 1.0)]).is_none());
    }

    #[test]
    fn matches_floating_point_away_from_roots() {
        let coeffs = [c(3.0, 0.0), c(-2.0, 0.0), c(0.0, 0.0), c(7.0, 0.0)];
        let p = IntegerPolynomial::from_complex(&coeffs).unwrap();
        for x in [c(0.3, -1.7), c(-2.5, 0.0), c(0.0, 0.125), c(1e3, 4.0), c(0.0, 0.0)] {
            let float = crate::zeros::poly_eval(&coeffs, x);
            assert!((p.eval(x) - float).norm() <= 1e-14 * float.norm().max(1.0), "{x}");
        }
    }

    #[test]
    fn keeps_relative_precision_at_a_quadruple_root() {
        // (x + 1)^4
        let coeffs: Vec<_> = [1.0, 4.0, 6.0, 4.0, 1.0].iter().map(|&v| c(v, 0.0)).collect();
        let p = IntegerPolynomial::from_complex(&coeffs).unwrap();
        let d = c(3e-9, -1e-9);
        let exact = d.powi(4);
        let x = c(-1.0, 0.0) + d;
        let d_rounded = x + 1.0;
        let expected = d_rounded.powi(4);
        assert!((p.eval(x) - expected).norm() <= 1e-12 * exact.norm());
    }
}
