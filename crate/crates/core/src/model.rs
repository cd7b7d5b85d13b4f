//! Classical Ising models with complex couplings and fields.
//!
//! Boltzmann weights follow `exp(-Σ K_ij s_i s_j - Σ H_i s_i)`. Under this
//! convention ferromagnetic order corresponds to negative real `K`; nothing in
//! the crate flips that sign silently.
//!
//! Spin `s = +1` is encoded as bit value 0 and `s = -1` as bit value 1.

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub coupling: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldTerm {
    pub i: usize,
    pub field: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lattice {
    Chain {
        n: usize,
        periodic: bool,
    },
    /// `n_circ` spins around the periodic direction, `l_len` rows along the
    /// open one. Spin `(row, col)` has index `row * n_circ + col`.
    Cylinder {
        n_circ: usize,
        l_len: usize,
    },
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    n_spins: usize,
    bonds: Vec<Bond>,
    fields: Vec<FieldTerm>,
    lattice: Lattice,
}

fn is_zero(z: Complex64) -> bool {
    z.re == 0.0 && z.im == 0.0
}

impl IsingModel {
    /// Validating constructor for arbitrary graphs.
    pub fn from_edge_list(n_spins: usize, bonds: Vec<Bond>, fields: Vec<FieldTerm>) -> Result<Self> {
        Self::with_lattice(n_spins, bonds, fields, Lattice::Custom)
    }

    fn with_lattice(n_spins: usize, bonds: Vec<Bond>, fields: Vec<FieldTerm>, lattice: Lattice) -> Result<Self> {
        let check = |index: usize| {
            if index >= n_spins {
                Err(Error::IndexOutOfRange { index, n: n_spins })
            } else {
                Ok(())
            }
        };
        let mut seen = HashSet::new();
        for b in &bonds {
            check(b.i)?;
            check(b.j)?;
            if b.i == b.j {
                return Err(Error::SelfLoop(b.i));
            }
            if !seen.insert((b.i.min(b.j), b.i.max(b.j))) {
                return Err(Error::DuplicateBond(b.i, b.j));
            }
        }
        let mut seen_fields = HashSet::new();
        for f in &fields {
            check(f.i)?;
            if !seen_fields.insert(f.i) {
                return Err(Error::DuplicateField(f.i));
            }
        }
        let fields = fields.into_iter().filter(|f| !is_zero(f.field)).collect();
        Ok(IsingModel {
            n_spins,
            bonds,
            fields,
            lattice,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn fields(&self) -> &[FieldTerm] {
        &self.fields
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    /// The common coupling when every bond carries the same value.
    pub fn uniform_coupling(&self) -> Option<Complex64> {
        let first = self.bonds.first()?.coupling;
        self.bonds.iter().all(|b| b.coupling == first).then_some(first)
    }

    /// Same graph with every bond set to `k`.
    pub fn with_uniform_coupling(&self, k: Complex64) -> Self {
        let mut m = self.clone();
        for b in &mut m.bonds {
            b.coupling = k;
        }
        m
    }

    /// Same couplings with field `h` on every spin (no field terms when `h == 0`).
    pub fn with_uniform_field(&self, h: Complex64) -> Self {
        let mut m = self.clone();
        m.fields = if is_zero(h) {
            Vec::new()
        } else {
            (0..self.n_spins).map(|i| FieldTerm { i, field: h }).collect()
        };
        m
    }

    /// Field on spin `i`, zero when absent.
    pub fn field_on(&self, i: usize) -> Complex64 {
        self.fields
            .iter()
            .find(|f| f.i == i)
            .map_or(Complex64::new(0.0, 0.0), |f| f.field)
    }

    /// Adds `delta` to the bond (i, j), creating it when missing.
    pub fn add_coupling(&self, i: usize, j: usize, delta: Complex64) -> Result<Self> {
        let mut bonds = self.bonds.clone();
        match bonds
            .iter_mut()
            .find(|b| (b.i == i && b.j == j) || (b.i == j && b.j == i))
        {
            Some(b) => b.coupling += delta,
            None => bonds.push(Bond { i, j, coupling: delta }),
        }
        Self::with_lattice(self.n_spins, bonds, self.fields.clone(), self.lattice)
    }

    /// Adds `delta` to the field on spin `i`.
    pub fn add_field(&self, i: usize, delta: Complex64) -> Result<Self> {
        let mut fields = self.fields.clone();
        match fields.iter_mut().find(|f| f.i == i) {
            Some(f) => f.field += delta,
            None => fields.push(FieldTerm { i, field: delta }),
        }
        Self::with_lattice(self.n_spins, self.bonds.clone(), fields, self.lattice)
    }

    /// Exponent `-Σ K s s - Σ H s` of the Boltzmann weight of a configuration
    /// given as a bit mask.
    pub fn log_weight(&self, config: u64) -> Complex64 {
        let spin = |i: usize| if (config >> i) & 1 == 0 { 1.0 } else { -1.0 };
        let mut w = Complex64::new(0.0, 0.0);
        for b in &self.bonds {
            w -= b.coupling * (spin(b.i) * spin(b.j));
        }
        for f in &self.fields {
            w -= f.field * spin(f.i);
        }
        w
    }

    /// Upper bound on `Re log_weight` over all configurations.
    pub fn log_weight_bound(&self) -> f64 {
        self.bonds.iter().map(|b| b.coupling.re.abs()).sum::<f64>()
            + self.fields.iter().map(|f| f.field.re.abs()).sum::<f64>()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }

    /// Hash of the bond graph alone: couplings set to one, fields dropped.
    pub fn graph_hash(&self) -> String {
        let mut m = self.with_uniform_coupling(Complex64::new(1.0, 0.0));
        m.fields.clear();
        m.content_hash()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        Sha256::digest(self.to_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub fn build_chain(n: usize, periodic: bool, k: Complex64, h: Complex64) -> Result<IsingModel> {
    if n == 0 {
        return Err(Error::InvalidSize("chain needs at least one spin".into()));
    }
    if periodic && n < 3 {
        return Err(Error::InvalidSize(format!(
            "periodic chain of {n} spins has no well-defined bond set"
        )));
    }
    let mut bonds: Vec<Bond> = (0..n - 1)
        .map(|i| Bond {
            i,
            j: i + 1,
            coupling: k,
        })
        .collect();
    if periodic {
        bonds.push(Bond {
            i: n - 1,
            j: 0,
            coupling: k,
        });
    }
    let fields = (0..n).map(|i| FieldTerm { i, field: h }).collect();
    IsingModel::with_lattice(n, bonds, fields, Lattice::Chain { n, periodic })
}

/// Cylinder with periodic rows of `n_circ` spins (coupling `kx`) stacked
/// `l_len` deep with open ends (coupling `ky` between rows).
///
/// A ring of two spins would produce the pair (0, 1) twice; this is rejected.
/// Use [`build_cylinder_merged`] to fold it into a single bond of `2·kx`.
pub fn build_cylinder(n_circ: usize, l_len: usize, kx: Complex64, ky: Complex64, h: Complex64) -> Result<IsingModel> {
    if n_circ < 3 {
        return Err(Error::InvalidSize(format!(
            "cylinder circumference {n_circ} < 3 (use the merged builder for 2)"
        )));
    }
    cylinder(n_circ, l_len, kx, ky, h)
}

/// Like [`build_cylinder`] but also accepts `n_circ == 2`, where the two ring
/// bonds between the same pair are merged by summing their couplings.
pub fn build_cylinder_merged(
    n_circ: usize,
    l_len: usize,
    kx: Complex64,
    ky: Complex64,
    h: Complex64,
) -> Result<IsingModel> {
    if n_circ < 2 {
        return Err(Error::InvalidSize(format!("cylinder circumference {n_circ} < 2")));
    }
    cylinder(n_circ, l_len, kx, ky, h)
}

fn cylinder(n_circ: usize, l_len: usize, kx: Complex64, ky: Complex64, h: Complex64) -> Result<IsingModel> {
    if l_len == 0 {
        return Err(Error::InvalidSize("cylinder needs at least one row".into()));
    }
    let site = |row: usize, col: usize| row * n_circ + col;
    let mut bonds = Vec::with_capacity(2 * n_circ * l_len);
    for row in 0..l_len {
        if n_circ == 2 {
            bonds.push(Bond {
                i: site(row, 0),
                j: site(row, 1),
                coupling: kx * 2.0,
            });
        } else {
            for col in 0..n_circ {
                bonds.push(Bond {
                    i: site(row, col),
                    j: site(row, (col + 1) % n_circ),
                    coupling: kx,
                });
            }
        }
        if row + 1 < l_len {
            for col in 0..n_circ {
                bonds.push(Bond {
                    i: site(row, col),
                    j: site(row + 1, col),
                    coupling: ky,
                });
            }
        }
    }
    let n = n_circ * l_len;
    let fields = (0..n).map(|i| FieldTerm { i, field: h }).collect();
    IsingModel::with_lattice(n, bonds, fields, Lattice::Cylinder { n_circ, l_len })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    n_spins: usize,
    bonds: Vec<(usize, usize, f64, f64)>,
    fields: Vec<(usize, f64, f64)>,
    lattice: Lattice,
}

impl From<&IsingModel> for ModelFile {
    fn from(m: &IsingModel) -> Self {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            n_spins: m.n_spins,
            bonds: m
                .bonds
                .iter()
                .map(|b| (b.i, b.j, b.coupling.re, b.coupling.im))
                .collect(),
            fields: m.fields.iter().map(|f| (f.i, f.field.re, f.field.im)).collect(),
            lattice: m.lattice,
        }
    }
}

impl TryFrom<ModelFile> for IsingModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.version != MODEL_FORMAT_VERSION {
            return Err(Error::Invalid(format!("unsupported model version {}", f.version)));
        }
        let bonds = f
            .bonds
            .into_iter()
            .map(|(i, j, re, im)| Bond {
                i,
                j,
                coupling: Complex64::new(re, im),
            })
            .collect();
        let fields = f
            .fields
            .into_iter()
            .map(|(i, re, im)| FieldTerm {
                i,
                field: Complex64::new(re, im),
            })
            .collect();
        IsingModel::with_lattice(f.n_spins, bonds, fields, f.lattice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn chain_bond_counts() {
        let open = build_chain(3, false, c(0.2, 0.1), c(0.0, 0.0)).unwrap();
        assert_eq!(open.n_spins(), 3);
        assert_eq!(open.bonds().len(), 2);
        assert!(open.fields().is_empty());

        let single = build_chain(1, false, c(0.2, 0.0), c(0.0, 0.0)).unwrap();
        assert_eq!(single.bonds().len(), 0);

        let ring = build_chain(4, true, c(0.2, 0.0), c(0.1, 0.0)).unwrap();
        assert_eq!(ring.bonds().len(), 4);
        assert_eq!(ring.fields().len(), 4);

        assert!(matches!(
            build_chain(0, false, c(0.0, 0.0), c(0.0, 0.0)),
            Err(Error::InvalidSize(_))
        ));
    }

    #[test]
    fn cylinder_bond_counts() {
        let k = c(0.3, 0.0);
        let m = build_cylinder(3, 3, k, k, c(0.0, 0.0)).unwrap();
        assert_eq!((m.n_spins(), m.bonds().len()), (9, 15));
        let m = build_cylinder(7, 7, k, k, c(0.0, 0.0)).unwrap();
        assert_eq!((m.n_spins(), m.bonds().len()), (49, 91));
        assert_eq!(m.lattice(), Lattice::Cylinder { n_circ: 7, l_len: 7 });
    }

    #[test]
    fn ring_of_two_requires_merge() {
        let k = c(0.3, 0.1);
        assert!(build_cylinder(2, 1, k, k, c(0.0, 0.0)).is_err());
        let m = build_cylinder_merged(2, 1, k, k, c(0.0, 0.0)).unwrap();
        assert_eq!((m.n_spins(), m.bonds().len()), (2, 1));
        assert_eq!(m.bonds()[0].coupling, k * 2.0);
        assert!(build_cylinder(3, 0, k, k, c(0.0, 0.0)).is_err());
        assert!(build_cylinder_merged(1, 3, k, k, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn edge_list_validation() {
        let k = c(0.5, 0.0);
        assert!(IsingModel::from_edge_list(
            2,
            vec![Bond {
                i: 0,
                j: 1,
                coupling: k
            }],
            vec![]
        )
        .is_ok());
        assert!(matches!(
            IsingModel::from_edge_list(
                2,
                vec![Bond {
                    i: 0,
                    j: 0,
                    coupling: k
                }],
                vec![]
            ),
            Err(Error::SelfLoop(0))
        ));
        assert!(matches!(
            IsingModel::from_edge_list(
                2,
                vec![
                    Bond {
                        i: 0,
                        j: 1,
                        coupling: k
                    },
                    Bond {
                        i: 1,
                        j: 0,
                        coupling: k
                    }
                ],
                vec![]
            ),
            Err(Error::DuplicateBond(1, 0))
        ));
        assert!(matches!(
            IsingModel::from_edge_list(
                2,
                vec![Bond {
                    i: 0,
                    j: 2,
                    coupling: k
                }],
                vec![]
            ),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        ));
        assert!(matches!(
            IsingModel::from_edge_list(
                2,
                vec![],
                vec![FieldTerm { i: 1, field: k }, FieldTerm { i: 1, field: k }]
            ),
            Err(Error::DuplicateField(1))
        ));
    }

    #[test]
    fn zero_fields_are_dropped() {
        let m = IsingModel::from_edge_list(
            2,
            vec![],
            vec![
                FieldTerm {
                    i: 0,
                    field: c(0.0, 0.0),
                },
                FieldTerm {
                    i: 1,
                    field: c(0.0, 0.2),
                },
            ],
        )
        .unwrap();
        assert_eq!(m.fields().len(), 1);
        assert_eq!(m.field_on(0), c(0.0, 0.0));
    }

    #[test]
    fn add_coupling_merges_or_appends() {
        let m = build_chain(3, false, c(0.1, 0.0), c(0.0, 0.0)).unwrap();
        let m2 = m.add_coupling(1, 0, c(0.05, 0.0)).unwrap();
        assert_eq!(m2.bonds().len(), 2);
        assert!((m2.bonds()[0].coupling - c(0.15, 0.0)).norm() < 1e-15);
        let m3 = m.add_coupling(0, 2, c(0.0, 0.01)).unwrap();
        assert_eq!(m3.bonds().len(), 3);
    }

    #[test]
    fn json_layout_is_stable() {
        let m = build_chain(2, false, c(0.5, -0.25), c(0.0, 1.0)).unwrap();
        assert_eq!(
            m.to_json(),
            r#"{"version":1,"n_spins":2,"bonds":[[0,1,0.5,-0.25]],"fields":[[0,0.0,1.0],[1,0.0,1.0]],"lattice":{"kind":"chain","n":2,"periodic":false}}"#
        );
        assert_eq!(m.content_hash().len(), 64);
    }

    proptest! {
        #[test]
        fn cylinder_bond_formula(n in 3usize..9, l in 1usize..9) {
            let m = build_cylinder(n, l, c(0.1, 0.2), c(-0.3, 0.1), c(0.0, 0.0)).unwrap();
            prop_assert_eq!(m.bonds().len(), 2 * n * l - n);
        }

        #[test]
        fn json_round_trip(n in 3usize..6, l in 1usize..5, kr in -1.0..1.0f64, ki in -1.0..1.0f64, hr in -1.0..1.0f64) {
            let m = build_cylinder(n, l, c(kr, ki), c(ki, kr), c(hr, 0.0)).unwrap();
            prop_assert_eq!(IsingModel::from_json(&m.to_json()).unwrap(), m.clone());
            let chain = build_chain(n, true, c(kr, ki), c(hr, ki)).unwrap();
            prop_assert_eq!(IsingModel::from_json(&chain.to_json()).unwrap(), chain);
        }
    }
}
