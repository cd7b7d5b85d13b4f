//! Density of states `g(b, m)`: the number of configurations with `b` aligned
//! bonds and magnetization `m`.
//!
//! With `x = e^{-2K}` the partition function of a homogeneous model reads
//! `Z(K, H) = e^{K·B} Σ_{b,m} g(b, m) x^b e^{-H m}`, since `Σ s_i s_j = 2b - B`.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logc::{CompensatedSum, LogComplex};
use crate::model::IsingModel;

pub const DOS_ENUMERATION_CAP: usize = 30;
pub const DOS_TRANSFER_CAP: usize = 10;
pub const DOS_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityOfStates {
    n_spins: usize,
    bond_count: usize,
    // counts[b * (n_spins + 1) + k], k = number of up spins, m = 2k - N
    counts: Vec<u64>,
}

impl DensityOfStates {
    fn empty(n_spins: usize, bond_count: usize) -> Self {
        DensityOfStates {
            n_spins,
            bond_count,
            counts: vec![0; (bond_count + 1) * (n_spins + 1)],
        }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn bond_count(&self) -> usize {
        self.bond_count
    }

    fn idx(&self, b: usize, k: usize) -> usize {
        b * (self.n_spins + 1) + k
    }

    /// `g(b, m)`; zero for unreachable or out-of-range entries.
    pub fn count(&self, b: usize, m: i64) -> u64 {
        let n = self.n_spins as i64;
        if b > self.bond_count || m < -n || m > n || (m + n) % 2 != 0 {
            return 0;
        }
        self.counts[self.idx(b, ((m + n) / 2) as usize)]
    }

    /// Non-zero entries as `(b, m, count)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, i64, u64)> + '_ {
        let n = self.n_spins;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(move |(idx, &c)| {
                let b = idx / (n + 1);
                let k = idx % (n + 1);
                (b, 2 * k as i64 - n as i64, c)
            })
    }

    pub fn total(&self) -> u128 {
        self.counts.iter().map(|&c| c as u128).sum()
    }

    /// Reconstructs `Z(K, H)` for uniform coupling `k` and uniform field `h`.
    pub fn partition_function(&self, k: Complex64, h: Complex64) -> LogComplex {
        let big_b = self.bond_count as f64;
        let terms: Vec<Complex64> = self
            .entries()
            .map(|(b, m, g)| Complex64::new((g as f64).ln(), 0.0) + k * (big_b - 2.0 * b as f64) - h * m as f64)
            .collect();
        let shift = terms.iter().map(|t| t.re).fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return LogComplex::ZERO;
        }
        let mut acc = CompensatedSum::new();
        for t in &terms {
            acc.add((t - shift).exp());
        }
        let z = LogComplex::from_complex(acc.value());
        if z.is_zero() {
            z
        } else {
            LogComplex::new(z.log_magnitude + shift, z.phase)
        }
    }

    /// Coefficients (ascending powers of `x = e^{-2K}`) of `Z·e^{-K·B}` at
    /// fixed uniform field `h`, up to a common positive scale.
    pub fn fisher_coefficients(&self, h: Complex64) -> Vec<Complex64> {
        let n = self.n_spins as i64;
        let shift = h.re.abs() * n as f64;
        (0..=self.bond_count)
            .map(|b| {
                (0..=self.n_spins)
                    .map(|k| {
                        let g = self.counts[self.idx(b, k)];
                        if g == 0 {
                            return Complex64::new(0.0, 0.0);
                        }
                        let m = 2 * k as i64 - n;
                        (-h * m as f64 - shift).exp() * g as f64
                    })
                    .sum()
            })
            .collect()
    }

    /// Coefficients (ascending powers of `z = e^{-2H}`) of `Z·e^{-H·N}` at
    /// fixed uniform coupling `k`, up to a common positive scale.
    pub fn lee_yang_coefficients(&self, k: Complex64) -> Vec<Complex64> {
        let big_b = self.bond_count as f64;
        let shift = k.re.abs() * big_b;
        (0..=self.n_spins)
            .map(|up| {
                (0..=self.bond_count)
                    .map(|b| {
                        let g = self.counts[self.idx(b, up)];
                        if g == 0 {
                            return Complex64::new(0.0, 0.0);
                        }
                        (k * (big_b - 2.0 * b as f64) - shift).exp() * g as f64
                    })
                    .sum()
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&DosFile {
            version: DOS_FORMAT_VERSION,
            n_spins: self.n_spins,
            bond_count: self.bond_count,
            entries: self.entries().collect(),
        })
        .expect("dos serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DosFile = serde_json::from_str(text)?;
        if file.version != DOS_FORMAT_VERSION {
            return Err(Error::Invalid(format!("unsupported dos version {}", file.version)));
        }
        let mut dos = DensityOfStates::empty(file.n_spins, file.bond_count);
        let n = file.n_spins as i64;
        for (b, m, g) in file.entries {
            if b > file.bond_count || m.abs() > n || (m + n) % 2 != 0 {
                return Err(Error::Invalid(format!("dos entry ({b}, {m}) out of range")));
            }
            let idx = dos.idx(b, ((m + n) / 2) as usize);
            dos.counts[idx] = g;
        }
        Ok(dos)
    }

    /// Loads `dir/dos-<model hash>.json` when present, otherwise computes the
    /// table and stores it there.
    pub fn cached(model: &IsingModel, dir: &Path) -> Result<Self> {
        let path = dir.join(format!("dos-{}.json", model.graph_hash()));
        if let Ok(text) = std::fs::read_to_string(&path) {
            return Self::from_json(&text);
        }
        let dos = density_of_states(model)?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(&path, dos.to_json())?;
        Ok(dos)
    }
}

#[derive(Serialize, Deserialize)]
struct DosFile {
    version: u32,
    n_spins: usize,
    bond_count: usize,
    entries: Vec<(usize, i64, u64)>,
}

fn add_checked(dst: &mut u64, v: u64) -> Result<()> {
    *dst = dst.checked_add(v).ok_or(Error::CountOverflow)?;
    Ok(())
}

/// Density of states of a homogeneously coupled model.
///
/// Cylinders with circumference up to [`DOS_TRANSFER_CAP`] go through a
/// polynomial-valued transfer matrix; anything else is enumerated directly
/// (up to [`DOS_ENUMERATION_CAP`] spins).
pub fn density_of_states(model: &IsingModel) -> Result<DensityOfStates> {
    if !model.bonds().is_empty() && model.uniform_coupling().is_none() {
        return Err(Error::InhomogeneousCoupling);
    }
    if let crate::model::Lattice::Cylinder { n_circ, l_len } = model.lattice() {
        if (3..=DOS_TRANSFER_CAP).contains(&n_circ) {
            return dos_cylinder(n_circ, l_len);
        }
    }
    dos_enumerate(model)
}

/// Direct Gray-code enumeration over all configurations.
pub fn dos_enumerate(model: &IsingModel) -> Result<DensityOfStates> {
    let n = model.n_spins();
    if n > DOS_ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            what: "density-of-states enumeration",
            size: n,
            cap: DOS_ENUMERATION_CAP,
        });
    }
    let bonds: Vec<(usize, usize)> = model.bonds().iter().map(|b| (b.i, b.j)).collect();
    let mut neighbours = vec![Vec::new(); n];
    for &(i, j) in &bonds {
        neighbours[i].push(j);
        neighbours[j].push(i);
    }
    let total = 1u64 << n;
    let chunks = 64u64.min(total);
    let per_chunk = total / chunks;

    let partials: Vec<Result<DensityOfStates>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut dos = DensityOfStates::empty(n, bonds.len());
            let start = c * per_chunk;
            let mut config = start ^ (start >> 1);
            let mut aligned = bonds
                .iter()
                .filter(|&&(i, j)| ((config >> i) ^ (config >> j)) & 1 == 0)
                .count();
            let mut up = n - config.count_ones() as usize;
            for idx in start..start + per_chunk {
                let at = dos.idx(aligned, up);
                add_checked(&mut dos.counts[at], 1)?;
                let next = idx + 1;
                if next == start + per_chunk {
                    break;
                }
                let q = next.trailing_zeros() as usize;
                for &nb in &neighbours[q] {
                    if ((config >> q) ^ (config >> nb)) & 1 == 0 {
                        aligned -= 1;
                    } else {
                        aligned += 1;
                    }
                }
                config ^= 1 << q;
                if (config >> q) & 1 == 0 {
                    up += 1;
                } else {
                    up -= 1;
                }
            }
            Ok(dos)
        })
        .collect();

    let mut out = DensityOfStates::empty(n, bonds.len());
    for p in partials {
        let p = p?;
        for (dst, &v) in out.counts.iter_mut().zip(&p.counts) {
            add_checked(dst, v)?;
        }
    }
    Ok(out)
}

/// Density of states of the `n_circ × l_len` cylinder via a transfer matrix
/// whose entries are count tables.
pub fn dos_cylinder(n_circ: usize, l_len: usize) -> Result<DensityOfStates> {
    if n_circ > DOS_TRANSFER_CAP {
        return Err(Error::CapExceeded {
            what: "density-of-states transfer circumference",
            size: n_circ,
            cap: DOS_TRANSFER_CAP,
        });
    }
    if n_circ < 2 || l_len == 0 {
        return Err(Error::InvalidSize(format!("cylinder {n_circ}x{l_len}")));
    }
    let n = n_circ * l_len;
    let big_b = 2 * n_circ * l_len - n_circ;
    let width = n + 1;
    let table = (big_b + 1) * width;
    let dim = 1usize << n_circ;

    let ring_aligned = |s: usize| {
        (0..n_circ)
            .filter(|&j| ((s >> j) ^ (s >> ((j + 1) % n_circ))) & 1 == 0)
            .count()
    };
    let ups = |s: usize| n_circ - s.count_ones() as usize;

    // v[s] is the count table of all partial configurations whose last row is s
    let mut v = vec![0u64; dim * table];
    for s in 0..dim {
        v[s * table + ring_aligned(s) * width + ups(s)] = 1;
    }
    let mut scratch = vec![0u64; dim * table];

    for _ in 1..l_len {
        for j in 0..n_circ {
            let bit = 1usize << j;
            scratch
                .par_chunks_mut(table)
                .enumerate()
                .try_for_each(|(s, out)| -> Result<()> {
                    let same = &v[s * table..(s + 1) * table];
                    let other = &v[(s ^ bit) * table..((s ^ bit) + 1) * table];
                    // aligned vertical bond shifts b by one
                    out[..width].copy_from_slice(&other[..width]);
                    for idx in width..table {
                        out[idx] = other[idx].checked_add(same[idx - width]).ok_or(Error::CountOverflow)?;
                    }
                    Ok(())
                })?;
            std::mem::swap(&mut v, &mut scratch);
        }
        // new row: ring bonds and magnetization
        v.par_chunks_mut(table).enumerate().for_each(|(s, t)| {
            let shift = ring_aligned(s) * width + ups(s);
            t.copy_within(0..table - shift, shift);
            t[..shift].fill(0);
        });
    }

    let mut dos = DensityOfStates::empty(n, big_b);
    for s in 0..dim {
        for (dst, &c) in dos.counts.iter_mut().zip(&v[s * table..(s + 1) * table]) {
            add_checked(dst, c)?;
        }
    }
    Ok(dos)
}
