//! Complex numbers stored as `exp(log_magnitude + i·phase)`.
//!
//! Partition functions of the larger cylinders overflow `f64` long before the
//! interesting structure is reached, so the oracle hands results across module
//! boundaries in this form.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Div, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub log_magnitude: f64,
    pub phase: f64,
}

fn wrap_phase(phase: f64) -> f64 {
    let mut p = phase.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    // rem_euclid maps -pi to pi already, keep the half-open interval (-pi, pi]
    if p <= -PI {
        p += 2.0 * PI;
    }
    p
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex {
        log_magnitude: f64::NEG_INFINITY,
        phase: 0.0,
    };

    pub const ONE: LogComplex = LogComplex {
        log_magnitude: 0.0,
        phase: 0.0,
    };

    pub fn new(log_magnitude: f64, phase: f64) -> Self {
        if log_magnitude == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        LogComplex {
            log_magnitude,
            phase: wrap_phase(phase),
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.re == 0.0 && z.im == 0.0 {
            return Self::ZERO;
        }
        Self::new(z.norm().ln(), z.arg())
    }

    /// `exp(w)` for a complex exponent `w`.
    pub fn exp(w: Complex64) -> Self {
        Self::new(w.re, w.im)
    }

    pub fn is_zero(&self) -> bool {
        self.log_magnitude == f64::NEG_INFINITY
    }

    /// Converts back to a plain complex number; overflows to infinity when
    /// the magnitude does not fit.
    pub fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.log_magnitude.exp(), self.phase)
    }

    /// `ln |z|^2`
    pub fn log_norm_sqr(self) -> f64 {
        2.0 * self.log_magnitude
    }

    pub fn conj(self) -> Self {
        Self::new(self.log_magnitude, -self.phase)
    }

    pub fn powi(self, n: i32) -> Self {
        if self.is_zero() {
            return if n == 0 { Self::ONE } else { Self::ZERO };
        }
        Self::new(self.log_magnitude * n as f64, self.phase * n as f64)
    }

    /// Principal complex logarithm.
    pub fn ln(self) -> Complex64 {
        Complex64::new(self.log_magnitude, self.phase)
    }

    /// Relative distance `|a - b| / max(|a|, |b|)`, computed without leaving
    /// log space.
    pub fn rel_diff(self, other: Self) -> f64 {
        if self.is_zero() && other.is_zero() {
            return 0.0;
        }
        let m = self.log_magnitude.max(other.log_magnitude);
        let a = Complex64::from_polar((self.log_magnitude - m).exp(), self.phase);
        let b = Complex64::from_polar((other.log_magnitude - m).exp(), other.phase);
        (a - b).norm()
    }
}

impl Default for LogComplex {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<Complex64> for LogComplex {
    fn from(z: Complex64) -> Self {
        Self::from_complex(z)
    }
}

impl Mul for LogComplex {
    type Output = LogComplex;
    fn mul(self, rhs: LogComplex) -> LogComplex {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.log_magnitude + rhs.log_magnitude, self.phase + rhs.phase)
    }
}

impl Div for LogComplex {
    type Output = LogComplex;
    fn div(self, rhs: LogComplex) -> LogComplex {
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.log_magnitude - rhs.log_magnitude, self.phase - rhs.phase)
    }
}

impl Add for LogComplex {
    type Output = LogComplex;
    fn add(self, rhs: LogComplex) -> LogComplex {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let m = self.log_magnitude.max(rhs.log_magnitude);
        let sum = Complex64::from_polar((self.log_magnitude - m).exp(), self.phase)
            + Complex64::from_polar((rhs.log_magnitude - m).exp(), rhs.phase);
        let s = LogComplex::from_complex(sum);
        if s.is_zero() {
            return s;
        }
        Self::new(s.log_magnitude + m, s.phase)
    }
}

impl fmt::Display for LogComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({} {:+}i)", self.log_magnitude, self.phase)
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.sum.re, &mut self.comp.re, z.re);
        neumaier(&mut self.sum.im, &mut self.comp.im, z.im);
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}
