use num_complex::Complex64;
use zeroscope::circuit::{compile_general, ky_to_kick_field, KickedProtocol, KICK_SIGN};
use zeroscope::oracle::{brute_force_z, density_of_states, transfer_matrix_z, DensityOfStates, TRANSFER_CAP};
use zeroscope::statevector::{run_full, run_model, run_streamed, Backend};
use zeroscope::zeros::{coefficients, map_roots, polynomial_roots, GridSpec, IntegerPolynomial, PlaneTag, ZeroKind};
use zeroscope::{Error, IsingModel, LogComplex, Result};

use crate::config::{BackendChoice, Cylinder, Protocol, RunConfig};
use crate::CliError;

/// A model at one point of the scan plane.
pub struct Instance {
    pub model: IsingModel,
    pub cylinder: Option<Cylinder>,
    pub kicked: Option<KickedProtocol>,
}

/// Maps plane points to model instances and evaluates them on one backend.
pub struct Target {
    base: IsingModel,
    cylinder: Option<Cylinder>,
    plane: PlaneTag,
    protocol: Protocol,
    backend: BackendChoice,
}

fn circuit_backend(b: BackendChoice) -> Backend {
    match b {
        BackendChoice::Effective => Backend::Effective,
        BackendChoice::Full => Backend::Full,
        BackendChoice::Oracle | BackendChoice::Streamed => Backend::Streamed,
    }
}

impl Target {
    pub fn new(config: &RunConfig) -> std::result::Result<Self, CliError> {
        let base = config.model.build(config.flip_sign)?;
        let cylinder = config.model.cylinder().map(|c| c.flipped(config.flip_sign));
        let plane = config.plane;
        if config.protocol == Protocol::Kicked && plane.is_field() && plane != PlaneTag::KickH {
            return Err(CliError::Config(
                "the kicked protocol scans coupling planes or kick_h".into(),
            ));
        }
        if config.protocol == Protocol::General && plane == PlaneTag::KickH {
            return Err(CliError::Config("the kick_h plane needs --protocol kicked".into()));
        }
        if let (Protocol::Kicked, Some(c)) = (config.protocol, cylinder) {
            if c.h.norm() != 0.0 {
                return Err(CliError::Config(
                    "the kicked protocol has no longitudinal field; use h=0".into(),
                ));
            }
        }
        Ok(Target {
            base,
            cylinder,
            plane,
            protocol: config.protocol,
            backend: config.backend,
        })
    }

    pub fn plane(&self) -> PlaneTag {
        self.plane
    }

    pub fn instance(&self, w: Complex64) -> Result<Instance> {
        let p = self.plane.to_parameter(w)?;
        if self.protocol == Protocol::Kicked {
            let c = self.cylinder.expect("validated: kicked needs a cylinder");
            let (kx, kick) = if self.plane == PlaneTag::KickH {
                (c.kx, p)
            } else {
                (p, ky_to_kick_field(p)? * KICK_SIGN)
            };
            let protocol = KickedProtocol::new(c.n_circ, c.l_len, kx, kick)?;
            let ky = if c.l_len > 1 {
                protocol.classical_ky()?
            } else {
                Complex64::new(0.0, 0.0)
            };
            let cyl = Cylinder {
                kx,
                ky,
                h: Complex64::new(0.0, 0.0),
                ..c
            };
            return Ok(Instance {
                model: cyl.build()?,
                cylinder: Some(cyl),
                kicked: Some(protocol),
            });
        }
        let field = self.plane.is_field();
        if let Some(c) = self.cylinder {
            let cyl = if field {
                Cylinder { h: p, ..c }
            } else {
                Cylinder { kx: p, ky: p, ..c }
            };
            return Ok(Instance {
                model: cyl.build()?,
                cylinder: Some(cyl),
                kicked: None,
            });
        }
        let model = if field {
            self.base.with_uniform_field(p)
        } else {
            self.base.with_uniform_coupling(p)
        };
        Ok(Instance {
            model,
            cylinder: None,
            kicked: None,
        })
    }

    /// `ln |Z|²` as reconstructed from the chosen backend.
    pub fn log_z_sqr(&self, w: Complex64) -> Result<f64> {
        let inst = self.instance(w)?;
        match (self.backend, &inst.kicked) {
            (BackendChoice::Oracle, _) => Ok(exact_z(&inst)?.log_norm_sqr()),
            (b, Some(protocol)) => {
                let circuit = protocol.compile();
                let p = kicked_probability(&circuit, b)?;
                Ok(p.ln() + 2.0 * circuit.log_prefactor() - protocol.log_kick_prefactor())
            }
            (b, None) => {
                let p = run_model(&inst.model, circuit_backend(b))?.probability;
                Ok(p.ln() + 2.0 * compile_general(&inst.model).log_prefactor())
            }
        }
    }

    /// `ln L`, the logarithm of the return probability an experiment would
    /// sample.
    pub fn log_return_probability(&self, w: Complex64) -> Result<f64> {
        let inst = self.instance(w)?;
        match (self.backend, &inst.kicked) {
            (BackendChoice::Oracle, Some(protocol)) => {
                let c = protocol.compile().log_prefactor();
                Ok(exact_z(&inst)?.log_norm_sqr() + protocol.log_kick_prefactor() - 2.0 * c)
            }
            (BackendChoice::Oracle, None) => {
                let c = compile_general(&inst.model).log_prefactor();
                Ok(exact_z(&inst)?.log_norm_sqr() - 2.0 * c)
            }
            (b, Some(protocol)) => Ok(kicked_probability(&protocol.compile(), b)?.ln()),
            (b, None) => Ok(run_model(&inst.model, circuit_backend(b))?.probability.ln()),
        }
    }

    /// Exact complex `Z` at a plane point.
    pub fn exact_z(&self, w: Complex64) -> Result<Complex64> {
        Ok(exact_z(&self.instance(w)?)?.to_complex())
    }

    /// Density of states when the model is homogeneous across the plane.
    pub fn density_of_states(&self, window: &GridSpec) -> Option<(DensityOfStates, Complex64)> {
        if self.plane == PlaneTag::KickH {
            return None;
        }
        let mut inst = self.instance(window.point(0, 0)).ok()?;
        if let (Some(_), Some(c)) = (&inst.kicked, inst.cylinder) {
            // the kick realizes ky = kx only up to rounding
            inst.model = Cylinder { ky: c.kx, ..c }.build().ok()?;
        }
        let fixed = if self.plane.is_field() {
            if inst.model.bonds().is_empty() {
                Complex64::new(0.0, 0.0)
            } else {
                inst.model.uniform_coupling()?
            }
        } else {
            let n = inst.model.n_spins();
            let h = inst.model.field_on(0);
            if (1..n).any(|i| inst.model.field_on(i) != h) {
                return None;
            }
            h
        };
        let dos = density_of_states(&inst.model).ok()?;
        Some((dos, fixed))
    }

    fn zero_kind(&self) -> ZeroKind {
        if self.plane.is_field() {
            ZeroKind::LeeYang
        } else {
            ZeroKind::Fisher
        }
    }

    /// Polynomial roots mapped into the plane and clipped to `window`. Roots
    /// at the origin of `x` or `z` are factors of the prefactor, not zeros.
    pub fn polynomial_zeros(&self, window: &GridSpec) -> Option<Result<Vec<Complex64>>> {
        let (dos, fixed) = self.density_of_states(window)?;
        let roots = match polynomial_roots(&dos, self.zero_kind(), fixed) {
            Ok(r) => r,
            Err(e) => return Some(Err(e)),
        };
        let nonzero: Vec<Complex64> = roots.into_iter().filter(|r| r.norm() > 0.0).collect();
        let mapped = match self.plane {
            PlaneTag::X | PlaneTag::Fugacity => nonzero,
            PlaneTag::K | PlaneTag::H => map_roots(&nonzero, window),
            PlaneTag::TanhK => nonzero.iter().map(|x| (1.0 - x) / (1.0 + x)).collect(),
            PlaneTag::KickH => unreachable!("no density of states on the kick plane"),
        };
        Some(Ok(mapped
            .into_iter()
            .filter(|w| w.is_finite() && window.contains(*w))
            .collect()))
    }

    /// Analytic function whose zeros in the plane are the zeros of `Z`,
    /// for Newton refinement. On the `x` and fugacity planes this is the
    /// polynomial itself (exact arithmetic when its coefficients are
    /// integers); elsewhere it is `Z`.
    pub fn newton_function(&self, window: &GridSpec) -> Box<dyn Fn(Complex64) -> Result<Complex64> + Sync + '_> {
        if matches!(self.plane, PlaneTag::X | PlaneTag::Fugacity) {
            if let Some((dos, fixed)) = self.density_of_states(window) {
                let coeffs = coefficients(&dos, self.zero_kind(), fixed);
                if let Some(exact) = IntegerPolynomial::from_complex(&coeffs) {
                    return Box::new(move |w| Ok(exact.eval(w)));
                }
                return Box::new(move |w| Ok(zeroscope::zeros::poly_eval(&coeffs, w)));
            }
        }
        Box::new(move |w| self.exact_z(w))
    }
}

fn kicked_probability(circuit: &zeroscope::circuit::Circuit, b: BackendChoice) -> Result<f64> {
    match b {
        BackendChoice::Full => Ok(run_full(circuit)?.probability),
        BackendChoice::Streamed => Ok(run_streamed(circuit)?.probability),
        other => Err(Error::Invalid(format!("{other:?} backend cannot run a kicked circuit"))),
    }
}

/// Exact `Z`: transfer matrix for cylinders, enumeration otherwise.
pub fn exact_z(inst: &Instance) -> Result<LogComplex> {
    match inst.cylinder {
        Some(c) if c.n_circ <= TRANSFER_CAP => transfer_matrix_z(c.n_circ, c.l_len, c.kx, c.ky, c.h),
        _ => brute_force_z(&inst.model),
    }
}
