use std::path::Path;

use clap::ValueEnum;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use zeroscope::model::{Bond, FieldTerm};
use zeroscope::zeros::PlaneTag;
use zeroscope::{build_chain, build_cylinder, build_cylinder_merged, IsingModel};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Scan,
    Zeros,
    Verify,
    Noise,
    Corr,
    Counts,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Scan => "scan",
            Task::Zeros => "zeros",
            Task::Verify => "verify",
            Task::Noise => "noise",
            Task::Corr => "corr",
            Task::Counts => "counts",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    /// Exact classical evaluation, no circuit.
    Oracle,
    Effective,
    Full,
    Streamed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Ancilla gadget per bond and field, any graph.
    General,
    /// Transverse-field kicks on one reused row; cylinders only.
    Kicked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CorrMethod {
    /// Norm ratio, plus the same-row or cross-row probe for cylinders.
    Auto,
    Norm,
    SameRow,
    CrossRow,
}

/// Where the model comes from. Lattice specs keep their parameters so that
/// scans can substitute a plane variable and oracles can use the transfer
/// matrix; file models are embedded verbatim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Cylinder {
        n_circ: usize,
        l_len: usize,
        k: Complex64,
        ky: Complex64,
        h: Complex64,
    },
    Chain {
        n: usize,
        periodic: bool,
        k: Complex64,
        h: Complex64,
    },
    Inline {
        model: serde_json::Value,
    },
}

fn parse_complex(key: &str, v: &str) -> Result<Complex64, CliError> {
    v.trim()
        .parse::<Complex64>()
        .map_err(|_| CliError::Config(format!("{key}={v:?} is not a complex number (try 0.1-0.3i)")))
}

impl ModelSpec {
    /// `cylinder:NxL[,k=..][,ky=..][,h=..]`, `chain:N[,periodic][,k=..][,h=..]`,
    /// or a path to a model JSON file.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let (kind, rest) = match text.split_once(':') {
            Some((kind @ ("cylinder" | "chain"), rest)) => (kind, rest),
            _ => return Self::from_file(Path::new(text)),
        };
        let mut parts = rest.split(',');
        let size = parts.next().unwrap_or_default();
        let zero = Complex64::new(0.0, 0.0);
        let (mut k, mut ky, mut h, mut periodic) = (zero, None, zero, false);
        for p in parts {
            match p.split_once('=') {
                Some(("k", v)) => k = parse_complex("k", v)?,
                Some(("ky", v)) if kind == "cylinder" => ky = Some(parse_complex("ky", v)?),
                Some(("h", v)) => h = parse_complex("h", v)?,
                None if p == "periodic" && kind == "chain" => periodic = true,
                _ => return Err(CliError::Config(format!("unknown {kind} option {p:?}"))),
            }
        }
        let count = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| CliError::Config(format!("bad size {s:?} in model {text:?}")))
        };
        let spec = if kind == "cylinder" {
            let (n, l) = size
                .split_once('x')
                .ok_or_else(|| CliError::Config(format!("cylinder size must be NxL, got {size:?}")))?;
            ModelSpec::Cylinder {
                n_circ: count(n)?,
                l_len: count(l)?,
                k,
                ky: ky.unwrap_or(k),
                h,
            }
        } else {
            ModelSpec::Chain {
                n: count(size)?,
                periodic,
                k,
                h,
            }
        };
        spec.build(false)?;
        Ok(spec)
    }

    fn from_file(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("model {}: {e}", path.display())))?;
        let model =
            IsingModel::from_json(&text).map_err(|e| CliError::Config(format!("model {}: {e}", path.display())))?;
        let value = serde_json::from_str(&model.to_json()).expect("model JSON is valid JSON");
        Ok(ModelSpec::Inline { model: value })
    }

    /// Cylinder dimensions and parameters, when the spec is one.
    pub fn cylinder(&self) -> Option<Cylinder> {
        match *self {
            ModelSpec::Cylinder {
                n_circ,
                l_len,
                k,
                ky,
                h,
            } => Some(Cylinder {
                n_circ,
                l_len,
                kx: k,
                ky,
                h,
            }),
            _ => None,
        }
    }

    pub fn build(&self, flip_sign: bool) -> Result<IsingModel, CliError> {
        let s = if flip_sign { -1.0 } else { 1.0 };
        let model = match self {
            ModelSpec::Cylinder { .. } => self.cylinder().expect("cylinder spec").flipped(flip_sign).build(),
            ModelSpec::Chain { n, periodic, k, h } => build_chain(*n, *periodic, k * s, h * s),
            ModelSpec::Inline { model } => {
                let m = IsingModel::from_json(&model.to_string())?;
                if flip_sign {
                    let bonds = m
                        .bonds()
                        .iter()
                        .map(|b| Bond {
                            coupling: -b.coupling,
                            ..*b
                        })
                        .collect();
                    let fields = m.fields().iter().map(|f| FieldTerm { field: -f.field, ..*f }).collect();
                    IsingModel::from_edge_list(m.n_spins(), bonds, fields)
                } else {
                    Ok(m)
                }
            }
        };
        Ok(model?)
    }
}

/// Homogeneous cylinder parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cylinder {
    pub n_circ: usize,
    pub l_len: usize,
    pub kx: Complex64,
    pub ky: Complex64,
    pub h: Complex64,
}

impl Cylinder {
    pub fn flipped(self, flip: bool) -> Self {
        if flip {
            Cylinder {
                kx: -self.kx,
                ky: -self.ky,
                h: -self.h,
                ..self
            }
        } else {
            self
        }
    }

    pub fn build(&self) -> zeroscope::Result<IsingModel> {
        if self.n_circ == 2 {
            build_cylinder_merged(2, self.l_len, self.kx, self.ky, self.h)
        } else {
            build_cylinder(self.n_circ, self.l_len, self.kx, self.ky, self.h)
        }
    }
}

/// Everything that determines the data of a run. Output locations, thread
/// count and image emission are deliberately excluded: they must not change
/// the bytes written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub model: ModelSpec,
    pub task: Task,
    pub backend: BackendChoice,
    pub protocol: Protocol,
    pub plane: PlaneTag,
    /// `[re_min, re_max, im_min, im_max]`
    pub window: [f64; 4],
    /// `[n_re, n_im]`
    pub res: [usize; 2],
    pub shots: u64,
    pub seed: u64,
    /// Random points for `verify`.
    pub samples: usize,
    pub sites: [usize; 2],
    pub corr_method: CorrMethod,
    pub delta: f64,
    /// Grid minima must lie below `threshold × median` of `|Z|²`.
    pub threshold: f64,
    /// Detection radius in grid cells for `noise`.
    pub radius: f64,
    /// Relative tolerance for `verify`.
    pub tolerance: f64,
    pub flip_sign: bool,
    /// Perturbs one backend in `verify` to exercise the failure path.
    pub force_mismatch: bool,
}

impl RunConfig {
    pub fn new(model: ModelSpec, task: Task) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            model,
            task,
            backend: BackendChoice::Oracle,
            protocol: Protocol::General,
            plane: PlaneTag::K,
            window: [-1.0, 1.0, -1.0, 1.0],
            res: [64, 64],
            shots: 5000,
            seed: 0,
            samples: 20,
            sites: [0, 1],
            corr_method: CorrMethod::Auto,
            delta: 0.01,
            threshold: 1.0,
            radius: zeroscope::noise::DEFAULT_DETECTION_RADIUS,
            tolerance: 1e-10,
            flip_sign: false,
            force_mismatch: false,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Recovers the config embedded in an output file: the `config=` entry of
    /// a CSV header line, the `config` member of a JSON report, or a bare
    /// config JSON.
    pub fn from_output(text: &str) -> Result<Self, CliError> {
        let bad = |e: serde_json::Error| CliError::Config(format!("embedded config: {e}"));
        let config: RunConfig = if text.starts_with('#') {
            let header = text.lines().next().unwrap_or_default();
            let (_, json) = header
                .split_once(" config=")
                .ok_or_else(|| CliError::Config("CSV header carries no config".into()))?;
            serde_json::from_str(json).map_err(bad)?
        } else {
            let value: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
            match value.get("config") {
                Some(c) => serde_json::from_value(c.clone()).map_err(bad)?,
                None => serde_json::from_value(value).map_err(bad)?,
            }
        };
        if config.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                config.version
            )));
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let [a, b, c, d] = self.window;
        if !(a < b && c < d) || self.window.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config(format!(
                "window {:?} must satisfy re0 < re1 and im0 < im1",
                self.window
            )));
        }
        if self.res.iter().any(|&r| r < 3) {
            return Err(CliError::Config(format!(
                "resolution {:?} must be at least 3x3",
                self.res
            )));
        }
        if self.shots == 0 {
            return Err(CliError::Config("shots must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(CliError::Config(format!("delta {} must be positive", self.delta)));
        }
        if [self.threshold, self.tolerance].iter().any(|&x| x.is_nan() || x <= 0.0)
            || self.radius.is_nan()
            || self.radius < 0.0
        {
            return Err(CliError::Config(
                "threshold, radius and tolerance must be positive".into(),
            ));
        }
        if self.protocol == Protocol::Kicked {
            if self.model.cylinder().is_none() {
                return Err(CliError::Config("the kicked protocol needs a cylinder model".into()));
            }
            if self.backend == BackendChoice::Effective {
                return Err(CliError::Config("the kicked protocol has no effective backend".into()));
            }
        }
        self.model.build(self.flip_sign)?;
        Ok(())
    }
}

pub fn parse_window(s: &str) -> Result<[f64; 4], CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("window {s:?} must be re0,re1,im0,im1")))?;
    v.try_into()
        .map_err(|_| CliError::Config(format!("window {s:?} needs four numbers")))
}

pub fn parse_res(s: &str) -> Result<[usize; 2], CliError> {
    let bad = || CliError::Config(format!("resolution {s:?} must be NxM or N"));
    let (a, b) = s.split_once('x').unwrap_or((s, s));
    Ok([a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?])
}

pub fn parse_sites(s: &str) -> Result<[usize; 2], CliError> {
    let bad = || CliError::Config(format!("sites {s:?} must be i,j"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok([
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lattice_specs() {
        let m = ModelSpec::parse("cylinder:3x4,k=0.1-0.2i,h=0.3").unwrap();
        let c = m.cylinder().unwrap();
        assert_eq!((c.n_circ, c.l_len), (3, 4));
        assert_eq!(c.kx, Complex64::new(0.1, -0.2));
        assert_eq!(c.ky, c.kx);
        assert_eq!(c.h, Complex64::new(0.3, 0.0));
        let m = ModelSpec::parse("chain:5,periodic,k=0.2i").unwrap();
        assert_eq!(m.build(false).unwrap().bonds().len(), 5);
        assert!(ModelSpec::parse("cylinder:3,k=1").is_err());
        assert!(ModelSpec::parse("chain:4,ky=1").is_err());
        assert!(ModelSpec::parse("/nonexistent/model.json").is_err());
    }

    #[test]
    fn sign_flip_negates_every_parameter() {
        let spec = ModelSpec::parse("chain:3,k=0.2+0.1i,h=-0.4").unwrap();
        let m = spec.build(true).unwrap();
        assert!(m.bonds().iter().all(|b| b.coupling == Complex64::new(-0.2, -0.1)));
        assert!(m.fields().iter().all(|f| f.field == Complex64::new(0.4, 0.0)));
    }

    #[test]
    fn config_round_trips_through_outputs() {
        let mut cfg = RunConfig::new(ModelSpec::parse("cylinder:3x3").unwrap(), Task::Scan);
        cfg.window = [-0.25, 0.75, -1.0, 1.5];
        let csv = format!("# format=1 plane=k config={}\nre,im,value\n", cfg.to_json());
        assert_eq!(RunConfig::from_output(&csv).unwrap(), cfg);
        let json = serde_json::json!({ "format": 1, "config": cfg }).to_string();
        assert_eq!(RunConfig::from_output(&json).unwrap(), cfg);
        assert_eq!(RunConfig::from_output(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn argument_parsers() {
        assert_eq!(parse_window("-1,1,-2,2.5").unwrap(), [-1.0, 1.0, -2.0, 2.5]);
        assert!(parse_window("1,2,3").is_err());
        assert_eq!(parse_res("100x80").unwrap(), [100, 80]);
        assert_eq!(parse_res("50").unwrap(), [50, 50]);
        assert_eq!(parse_sites("0, 7").unwrap(), [0, 7]);
    }
}
