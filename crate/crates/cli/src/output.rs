use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde::Serialize;
use zeroscope::zeros::ScanGrid;

use crate::config::RunConfig;
use crate::CliError;

pub const OUTPUT_FORMAT_VERSION: u32 = 1;

/// Where and how results are written. Not part of the embedded config.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub png: bool,
}

impl OutputOptions {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Output(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

/// Grid CSV with the run config as the last header entry.
pub fn grid_csv(grid: &ScanGrid, config: &RunConfig, extra: &[(&str, String)]) -> String {
    let mut meta: Vec<(&str, String)> = extra.to_vec();
    meta.push(("config", config.to_json()));
    grid.to_csv(&meta)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    format: u32,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

pub fn report_json<T: Serialize>(config: &RunConfig, body: &T) -> String {
    let env = Envelope {
        format: OUTPUT_FORMAT_VERSION,
        config,
        body,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("report serializes");
    s.push('\n');
    s
}

/// Piecewise-linear dark-to-bright palette; zeros of `|Z|` come out black.
const PALETTE: [[f64; 3]; 5] = [
    [0.0, 0.0, 4.0],
    [87.0, 16.0, 110.0],
    [188.0, 55.0, 84.0],
    [249.0, 142.0, 9.0],
    [252.0, 255.0, 164.0],
];

fn color(t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let k = (t.floor() as usize).min(PALETTE.len() - 2);
    let f = t - k as f64;
    let c = |ch: usize| (PALETTE[k][ch] * (1.0 - f) + PALETTE[k + 1][ch] * f).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Heatmap of a log-valued grid, imaginary axis pointing up. The color scale
/// spans the 1st percentile to the maximum of the finite values.
pub fn heatmap_png(grid: &ScanGrid, path: &Path) -> Result<PathBuf, CliError> {
    let s = &grid.spec;
    let mut finite: Vec<f64> = grid.values.iter().copied().filter(|v| v.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let (lo, hi) = match (finite.first(), finite.last()) {
        (Some(_), Some(&hi)) => (finite[finite.len() / 100], hi),
        _ => (0.0, 1.0),
    };
    let span = if hi > lo { hi - lo } else { 1.0 };
    let scale = (512 / s.n_re.max(s.n_im)).max(1) as u32;
    let mut img = RgbImage::new(s.n_re as u32 * scale, s.n_im as u32 * scale);
    for j in 0..s.n_im {
        for i in 0..s.n_re {
            let v = grid.value(i, j);
            let px = if v.is_nan() {
                Rgb([255, 0, 255])
            } else if v == f64::NEG_INFINITY {
                color(0.0)
            } else {
                color((v - lo) / span)
            };
            let y0 = (s.n_im - 1 - j) as u32 * scale;
            for dy in 0..scale {
                for dx in 0..scale {
                    img.put_pixel(i as u32 * scale + dx, y0 + dy, px);
                }
            }
        }
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Output(format!("{}: {e}", parent.display())))?;
    }
    img.save(path)
        .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}
