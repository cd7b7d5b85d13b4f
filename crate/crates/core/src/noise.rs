//! Projection noise on return-probability maps.
//!
//! A return probability measured with `n` shots is a relative frequency of the
//! all-initial outcome, i.e. `Binomial(n, L)/n`. Each grid point draws from its
//! own ChaCha stream selected by the point index, so results do not depend on
//! how the points are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zeros::{GridSpec, ScanGrid};

pub const DEFAULT_DETECTION_RADIUS: f64 = 2.0;
const PROBABILITY_SLACK: f64 = 1e-9;

/// Generator for grid point `index` under `seed`.
pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_probability(l: f64) -> Result<f64> {
    if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&l) {
        return Err(Error::NotAProbability(l));
    }
    Ok(l.clamp(0.0, 1.0))
}

/// One relative-frequency estimate of `l` from `n_shots` shots.
pub fn sample_estimate(l: f64, n_shots: u64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let l = check_probability(l)?;
    if n_shots == 0 {
        return Err(Error::Invalid("zero shots".into()));
    }
    let draw = Binomial::new(n_shots, l).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(draw.sample(rng) as f64 / n_shots as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyGrid {
    /// True values as `ln L`.
    pub base: ScanGrid,
    /// `L̂` per point; NaN where the base value is missing.
    pub estimates: Vec<f64>,
    pub n_shots: u64,
    pub seed: u64,
}

impl NoisyGrid {
    pub fn spec(&self) -> &GridSpec {
        &self.base.spec
    }

    /// Noisy map on the same log scale as the base grid.
    pub fn log_grid(&self) -> ScanGrid {
        ScanGrid {
            spec: self.base.spec,
            plane: self.base.plane,
            values: self.estimates.iter().map(|v| v.ln()).collect(),
        }
    }

    pub fn to_csv(&self, extra: &[(&str, String)]) -> String {
        let mut meta = vec![("n_shots", self.n_shots.to_string()), ("seed", self.seed.to_string())];
        meta.extend(extra.iter().cloned());
        self.log_grid().to_csv(&meta)
    }
}

/// Replaces every value `L` of `true_grid` (stored as `ln L`) by
/// `Binomial(n_shots, L)/n_shots`.
pub fn noisy_scan(true_grid: &ScanGrid, n_shots: u64, seed: u64) -> Result<NoisyGrid> {
    if n_shots == 0 {
        return Err(Error::Invalid("zero shots".into()));
    }
    let estimates = true_grid
        .values
        .par_iter()
        .enumerate()
        .map(|(idx, &v)| {
            if v.is_nan() {
                return Ok(f64::NAN);
            }
            sample_estimate(v.exp(), n_shots, &mut point_rng(seed, idx as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NoisyGrid {
        base: true_grid.clone(),
        estimates,
        n_shots,
        seed,
    })
}

/// Empirical mean and (unbiased) variance of `trials` estimates of `l`.
pub fn error_stats(l: f64, n_shots: u64, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if trials < 100 {
        return Err(Error::Invalid(format!("{trials} trials; at least 100 needed")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = (0..trials)
        .map(|_| sample_estimate(l, n_shots, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mean = xs.iter().sum::<f64>() / trials as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    Ok((mean, var))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    /// Centroid in grid coordinates `(i, j)`.
    pub i: f64,
    pub j: f64,
    pub value: f64,
    pub cells: usize,
}

/// Local minima of a map that may contain plateaus of equal values (shot
/// counts are integers). A minimum is a connected set of equal cells whose
/// neighbours are all strictly larger and which stays off the boundary; it is
/// reported at its centroid. NaN cells are ignored.
pub fn plateau_minima(grid: &ScanGrid) -> Vec<Minimum> {
    let (n_re, n_im) = (grid.spec.n_re, grid.spec.n_im);
    let mut seen = vec![false; grid.values.len()];
    let mut out = Vec::new();
    for start in 0..grid.values.len() {
        let v = grid.values[start];
        if seen[start] || v.is_nan() {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut cells = Vec::new();
        let mut is_min = true;
        while let Some(idx) = stack.pop() {
            cells.push(idx);
            let (i, j) = ((idx % n_re) as i64, (idx / n_re) as i64);
            if i == 0 || j == 0 || i == n_re as i64 - 1 || j == n_im as i64 - 1 {
                is_min = false;
            }
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (ii, jj) = (i + di, j + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= n_re as i64 || jj >= n_im as i64 {
                        continue;
                    }
                    let k = jj as usize * n_re + ii as usize;
                    let w = grid.values[k];
                    if w == v {
                        if !seen[k] {
                            seen[k] = true;
                            stack.push(k);
                        }
                    } else if w < v {
                        is_min = false;
                    }
                }
            }
        }
        if is_min {
            let n = cells.len() as f64;
            let i = cells.iter().map(|&k| (k % n_re) as f64).sum::<f64>() / n;
            let j = cells.iter().map(|&k| (k / n_re) as f64).sum::<f64>() / n;
            out.push(Minimum {
                i,
                j,
                value: v,
                cells: cells.len(),
            });
        }
    }
    out.sort_by(|a, b| a.j.total_cmp(&b.j).then(a.i.total_cmp(&b.i)));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectabilityReport {
    /// Chebyshev distance in cells from each true zero to the nearest minimum
    /// of the noisy map (infinite when there is none).
    pub distances: Vec<f64>,
    pub radius: f64,
    pub fraction_detected: f64,
    pub n_minima: usize,
}

impl DetectabilityReport {
    pub fn all_detected(&self) -> bool {
        self.distances.iter().all(|&d| d <= self.radius)
    }
}

pub fn detectability(noisy: &NoisyGrid, true_zeros: &[num_complex::Complex64], radius: f64) -> DetectabilityReport {
    detect_on_grid(&noisy.log_grid(), true_zeros, radius)
}

/// Same report for any map, e.g. the noiseless base grid.
pub fn detect_on_grid(grid: &ScanGrid, true_zeros: &[num_complex::Complex64], radius: f64) -> DetectabilityReport {
    let minima = plateau_minima(grid);
    let s = &grid.spec;
    let distances: Vec<f64> = true_zeros
        .iter()
        .map(|z| {
            let (zi, zj) = ((z.re - s.re_min) / s.d_re(), (z.im - s.im_min) / s.d_im());
            minima
                .iter()
                .map(|m| (m.i - zi).abs().max((m.j - zj).abs()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let hits = distances.iter().filter(|&&d| d <= radius).count();
    DetectabilityReport {
        fraction_detected: if distances.is_empty() {
            1.0
        } else {
            hits as f64 / distances.len() as f64
        },
        distances,
        radius,
        n_minima: minima.len(),
    }
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zeros::PlaneTag;
    use num_complex::Complex64;

    fn grid_of(values: Vec<f64>, n_re: usize, n_im: usize) -> ScanGrid {
        ScanGrid {
            spec: GridSpec::new([0.0, (n_re - 1) as f64, 0.0, (n_im - 1) as f64], n_re, n_im).unwrap(),
            plane: PlaneTag::K,
            values,
        }
    }

    #[test]
    fn certain_outcomes_have_no_noise() {
        let g = grid_of(vec![f64::NEG_INFINITY, 0.0, f64::NAN, (0.3f64).ln()], 2, 2);
        let noisy = noisy_scan(&g, 100, 5).unwrap();
        assert_eq!(noisy.estimates[0], 0.0);
        assert_eq!(noisy.estimates[1], 1.0);
        assert!(noisy.estimates[2].is_nan());
        let k = noisy.estimates[3] * 100.0;
        assert_eq!(k, k.round());
    }

    #[test]
    fn rejects_values_above_one() {
        let g = grid_of(vec![0.1, 0.0, 0.0, 0.0], 2, 2);
        assert!(matches!(noisy_scan(&g, 10, 0), Err(Error::NotAProbability(_))));
    }

    #[test]
    fn seeded_scans_repeat() {
        let g = grid_of((0..64).map(|k| (0.01 + k as f64 / 70.0).ln()).collect(), 8, 8);
        assert_eq!(noisy_scan(&g, 1000, 9).unwrap(), noisy_scan(&g, 1000, 9).unwrap());
        assert_ne!(
            noisy_scan(&g, 1000, 9).unwrap().estimates,
            noisy_scan(&g, 1000, 10).unwrap().estimates
        );
    }

    #[test]
    fn binomial_moments() {
        let (mean, var) = error_stats(0.5, 10_000, 1000, 3).unwrap();
        assert!((mean - 0.5).abs() < 5.0 * 0.005);
        assert!((var / 2.5e-5 - 1.0).abs() < 0.2);
        assert_eq!(error_stats(0.0, 100, 100, 1).unwrap(), (0.0, 0.0));
        assert!(error_stats(0.5, 100, 10, 1).is_err());
    }

    #[test]
    fn plateau_minimum_reports_its_centroid() {
        let mut v = vec![5.0; 36];
        for idx in [14, 15, 20, 21] {
            v[idx] = 1.0;
        }
        v[0] = 0.0;
        let m = plateau_minima(&grid_of(v, 6, 6));
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].i, m[0].j, m[0].cells), (2.5, 2.5, 4));
    }

    #[test]
    fn detection_distances() {
        let mut v = vec![3.0; 49];
        v[3 * 7 + 4] = 0.5;
        let g = grid_of(v, 7, 7);
        let r = detect_on_grid(&g, &[Complex64::new(4.2, 3.0), Complex64::new(1.0, 1.0)], 2.0);
        assert!(r.distances[0] < 0.5);
        assert_eq!(r.distances[1], 3.0);
        assert_eq!(r.fraction_detected, 0.5);
        assert!(!r.all_detected());
    }

    #[test]
    fn ks_separates_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draw = |l: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..4000).map(|_| sample_estimate(l, 50, rng).unwrap()).collect()
        };
        let a = draw(0.3, &mut rng);
        let b = draw(0.3, &mut rng);
        let c = draw(0.4, &mut rng);
        assert!(ks_two_sample(&a, &b).1 > 1e-3);
        assert!(ks_two_sample(&a, &c).1 < 1e-6);
    }
}
