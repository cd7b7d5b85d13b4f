//! Fisher and Lee-Yang zero location: complex-plane scans, local-minimum
//! detection, Newton refinement, and exact polynomial roots.

mod exact;
mod mapping;
mod poly;

use std::f64::consts::LN_10;
use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use exact::IntegerPolynomial;
pub use mapping::{choose_rescaled_variable, map_roots, mean_unit_circle_distance, RescaledVariable};
pub use poly::{
    aberth_roots, coefficients, companion_roots, multiset_distance, poly_eval, polynomial_roots, ZeroKind, ABERTH_TOL,
};

pub const GRID_FORMAT_VERSION: u32 = 1;
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_STEP: f64 = 1e-6;

/// Variable spanned by a scan window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneTag {
    K,
    /// `x = e^{-2K}`
    X,
    TanhK,
    H,
    /// `z = e^{-2H}`
    Fugacity,
    /// Transverse kick field of the kicked protocol.
    KickH,
}

impl PlaneTag {
    pub fn name(self) -> &'static str {
        match self {
            PlaneTag::K => "k",
            PlaneTag::X => "x",
            PlaneTag::TanhK => "tanh_k",
            PlaneTag::H => "h",
            PlaneTag::Fugacity => "fugacity",
            PlaneTag::KickH => "kick_h",
        }
    }

    /// Maps a point of this plane to the coupling (`K`, `x`, `tanh K` planes)
    /// or field (`H`, fugacity, kick planes) it stands for. Logarithms take
    /// the principal branch; `|Z|` does not depend on the branch.
    pub fn to_parameter(self, w: Complex64) -> Result<Complex64> {
        match self {
            PlaneTag::K | PlaneTag::H | PlaneTag::KickH => Ok(w),
            PlaneTag::X | PlaneTag::Fugacity => {
                if w.norm() == 0.0 {
                    Err(Error::BranchPoint("logarithm of zero".into()))
                } else {
                    Ok(-w.ln() / 2.0)
                }
            }
            PlaneTag::TanhK => {
                if (w - 1.0).norm() == 0.0 || (w + 1.0).norm() == 0.0 {
                    Err(Error::BranchPoint(format!("artanh({w})")))
                } else {
                    Ok(w.atanh())
                }
            }
        }
    }

    pub fn is_field(self) -> bool {
        matches!(self, PlaneTag::H | PlaneTag::Fugacity | PlaneTag::KickH)
    }
}

impl FromStr for PlaneTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            PlaneTag::K,
            PlaneTag::X,
            PlaneTag::TanhK,
            PlaneTag::H,
            PlaneTag::Fugacity,
            PlaneTag::KickH,
        ]
        .into_iter()
        .find(|t| t.name() == s)
        .ok_or_else(|| Error::Invalid(format!("unknown plane {s:?}")))
    }
}

/// Rectangular window with inclusive corners sampled on `n_re × n_im` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl GridSpec {
    pub fn new(window: [f64; 4], n_re: usize, n_im: usize) -> Result<Self> {
        let [re_min, re_max, im_min, im_max] = window;
        if n_re < 2 || n_im < 2 {
            return Err(Error::InvalidSize(format!("grid resolution {n_re}×{n_im} below 2")));
        }
        if !(re_min < re_max && im_min < im_max) || window.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("degenerate window {window:?}")));
        }
        Ok(GridSpec {
            re_min,
            re_max,
            im_min,
            im_max,
            n_re,
            n_im,
        })
    }

    pub fn d_re(&self) -> f64 {
        (self.re_max - self.re_min) / (self.n_re - 1) as f64
    }

    pub fn d_im(&self) -> f64 {
        (self.im_max - self.im_min) / (self.n_im - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n_re * self.n_im
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `(i, j)`, with `i` along the real axis.
    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(
            self.re_min + i as f64 * self.d_re(),
            self.im_min + j as f64 * self.d_im(),
        )
    }

    /// Grid point of linear index `idx = j·n_re + i`.
    pub fn point_at(&self, idx: usize) -> Complex64 {
        self.point(idx % self.n_re, idx / self.n_re)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (self.re_min..=self.re_max).contains(&z.re) && (self.im_min..=self.im_max).contains(&z.im)
    }

    /// Nearest grid indices to `z` (clamped to the window).
    pub fn nearest(&self, z: Complex64) -> (usize, usize) {
        let i = ((z.re - self.re_min) / self.d_re())
            .round()
            .clamp(0.0, (self.n_re - 1) as f64);
        let j = ((z.im - self.im_min) / self.d_im())
            .round()
            .clamp(0.0, (self.n_im - 1) as f64);
        (i as usize, j as usize)
    }

    /// Typical linear size, used to scale finite-difference steps.
    pub fn scale(&self) -> f64 {
        (self.re_max - self.re_min).max(self.im_max - self.im_min)
    }
}

/// Logarithmic scan values: `ln|Z|²` (or `ln L`), `-∞` at exact zeros, NaN
/// where the evaluator failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub spec: GridSpec,
    pub plane: PlaneTag,
    pub values: Vec<f64>,
}

impl ScanGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.n_re + i]
    }

    pub fn missing(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_nan())
            .map(|(k, _)| k)
            .collect()
    }

    /// Median over non-missing values.
    pub fn median(&self) -> f64 {
        let mut v: Vec<f64> = self.values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return f64::NAN;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 || v[n / 2 - 1] == v[n / 2] {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }

    /// CSV: one `#`-prefixed line of `key=value` metadata, a column header,
    /// then `re,im,value` rows in index order.
    pub fn to_csv(&self, extra: &[(&str, String)]) -> String {
        let s = &self.spec;
        let mut out = format!(
            "# format={GRID_FORMAT_VERSION} plane={} re_min={:?} re_max={:?} im_min={:?} im_max={:?} n_re={} n_im={}",
            self.plane.name(),
            s.re_min,
            s.re_max,
            s.im_min,
            s.im_max,
            s.n_re,
            s.n_im
        );
        for (k, v) in extra {
            write!(out, " {k}={v}").expect("writing to a String");
        }
        out.push_str("\nre,im,value\n");
        for (idx, v) in self.values.iter().enumerate() {
            let p = s.point_at(idx);
            writeln!(out, "{:?},{:?},{:?}", p.re, p.im, v).expect("writing to a String");
        }
        out
    }
}

/// Evaluates `evaluator` (returning a log value) on every grid point in
/// parallel. Failures are logged and stored as NaN.
pub fn scan<F>(evaluator: F, spec: GridSpec, plane: PlaneTag) -> ScanGrid
where
    F: Fn(Complex64) -> Result<f64> + Sync,
{
    let values = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let w = spec.point_at(idx);
            match evaluator(w) {
                Ok(v) => v,
                Err(e) => {
                    log::debug!("scan point {w} failed: {e}");
                    f64::NAN
                }
            }
        })
        .collect();
    ScanGrid { spec, plane, values }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub i: usize,
    pub j: usize,
    pub location: Complex64,
    pub value: f64,
}

/// Interior points below all eight neighbours and below
/// `rel_threshold × median` on the linear scale. Of two equal neighbours
/// (mirror-symmetric windows produce them) the one with the lower index wins.
pub fn find_minima(grid: &ScanGrid, rel_threshold: f64) -> Vec<Candidate> {
    let s = &grid.spec;
    let cutoff = grid.median() + rel_threshold.ln();
    let mut out = Vec::new();
    for j in 1..s.n_im - 1 {
        for i in 1..s.n_re - 1 {
            let v = grid.value(i, j);
            if v.is_nan() || v >= cutoff {
                continue;
            }
            let is_min = (j - 1..=j + 1).all(|jj| {
                (i - 1..=i + 1).all(|ii| {
                    let w = grid.value(ii, jj);
                    (ii == i && jj == j) || w.is_nan() || v < w || (v == w && (jj, ii) > (j, i))
                })
            });
            if is_min {
                out.push(Candidate {
                    i,
                    j,
                    location: s.point(i, j),
                    value: v,
                });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMethod {
    GridMinimum,
    Newton,
    Polynomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroEstimate {
    pub location: Complex64,
    /// `log10 |Z|` at the location; `-∞` when it vanishes exactly.
    pub residual: f64,
    pub method: ZeroMethod,
    pub iterations: usize,
}

fn log10_abs(z: Complex64) -> f64 {
    z.norm().ln() / LN_10
}

/// Complex Newton iteration with a central-difference derivative. The
/// difference step starts at `NEWTON_STEP × scale` and then follows the
/// Newton steps down (to a hundredth of the last one, floored at
/// `1e-13 × scale`), so it stays well below the distance to the root.
///
/// Near a root of multiplicity `m` plain Newton steps shrink by `(m-1)/m`
/// per iteration; once three consecutive step ratios agree, the steps are
/// scaled by the estimated `m`, which restores fast convergence.
pub fn refine_newton<F>(f: F, z0: Complex64, scale: f64) -> Result<ZeroEstimate>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut h = NEWTON_STEP * scale;
    let mut z = z0;
    let mut multiplicity = 1.0;
    let mut steps: Vec<f64> = Vec::new();
    for it in 0..=NEWTON_MAX_ITER {
        let fz = f(z)?;
        if fz.norm() == 0.0 {
            return Ok(ZeroEstimate {
                location: z,
                residual: f64::NEG_INFINITY,
                method: ZeroMethod::Newton,
                iterations: it,
            });
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let d = (f(z + h)? - f(z - h)?) / (2.0 * h);
        if !d.is_finite() || d.norm() <= f64::MIN_POSITIVE {
            return Err(Error::DerivativeUnderflow(z));
        }
        let newton = fz / d;
        let dz = newton * multiplicity;
        z -= dz;
        if dz.norm() < NEWTON_TOL {
            let residual = log10_abs(f(z)?);
            return Ok(ZeroEstimate {
                location: z,
                residual,
                method: ZeroMethod::Newton,
                iterations: it + 1,
            });
        }
        h = h.min((0.01 * dz.norm()).max(1e-13 * scale));
        steps.push(newton.norm());
        if multiplicity == 1.0 && steps.len() >= 3 {
            let n = steps.len();
            let (r1, r2) = (steps[n - 1] / steps[n - 2], steps[n - 2] / steps[n - 3]);
            if (0.3..0.97).contains(&r1) && (r1 - r2).abs() < 0.05 * r1 {
                multiplicity = (1.0 / (1.0 - r1)).round().max(1.0);
            }
        }
    }
    Err(Error::NonConvergence(NEWTON_MAX_ITER))
}

pub fn polynomial_estimates(roots: &[Complex64], coeffs: &[Complex64]) -> Vec<ZeroEstimate> {
    roots
        .iter()
        .map(|&r| ZeroEstimate {
            location: r,
            residual: log10_abs(poly_eval(coeffs, r)),
            method: ZeroMethod::Polynomial,
            iterations: 0,
        })
        .collect()
}

pub fn grid_estimates(candidates: &[Candidate]) -> Vec<ZeroEstimate> {
    candidates
        .iter()
        .map(|c| ZeroEstimate {
            location: c.location,
            residual: c.value / (2.0 * LN_10),
            method: ZeroMethod::GridMinimum,
            iterations: 0,
        })
        .collect()
}

#[derive(Serialize)]
struct ZeroFile<'a> {
    version: u32,
    plane: &'a str,
    zeros: Vec<ZeroRow>,
}

#[derive(Serialize)]
struct ZeroRow {
    re: f64,
    im: f64,
    residual: Option<f64>,
    method: ZeroMethod,
    iterations: usize,
}

/// JSON list of zero estimates. Residuals of exact zeros serialize as null.
pub fn zeros_to_json(zeros: &[ZeroEstimate], plane: PlaneTag) -> String {
    let file = ZeroFile {
        version: GRID_FORMAT_VERSION,
        plane: plane.name(),
        zeros: zeros
            .iter()
            .map(|z| ZeroRow {
                re: z.location.re,
                im: z.location.im,
                residual: z.residual.is_finite().then_some(z.residual),
                method: z.method,
                iterations: z.iterations,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("zero list serializes")
}
