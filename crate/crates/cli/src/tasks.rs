use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use zeroscope::circuit::{
    calibrate_kicked, compile_general, compile_kicked, ky_to_kick_field, KickedProtocol, ResourceCounts, KICK_SIGN,
};
use zeroscope::correlation::{corr_cross_row, corr_same_row, norm_ratio_report, CorrelationReport};
use zeroscope::noise::{detectability, noisy_scan, DetectabilityReport};
use zeroscope::oracle::BRUTE_FORCE_CAP;
use zeroscope::statevector::{run_effective, run_full, run_streamed, streamed_width, Backend, FULL_CAP, STREAMED_CAP};
use zeroscope::zeros::{find_minima, refine_newton, scan, GridSpec, ScanGrid};
use zeroscope::IsingModel;

use crate::config::{BackendChoice, CorrMethod, Cylinder, RunConfig, Task};
use crate::eval::{exact_z, Instance, Target};
use crate::output::{grid_csv, heatmap_png, report_json, write, OutputOptions};
use crate::{CliError, Outcome};

pub fn run(config: &RunConfig, out: &OutputOptions) -> Result<Outcome, CliError> {
    config.validate()?;
    match config.task {
        Task::Scan => cmd_scan(config, out),
        Task::Zeros => cmd_zeros(config, out),
        Task::Verify => cmd_verify(config, out),
        Task::Noise => cmd_noise(config, out),
        Task::Corr => cmd_corr(config, out),
        Task::Counts => cmd_counts(config, out),
    }
}

fn grid_spec(config: &RunConfig) -> Result<GridSpec, CliError> {
    Ok(GridSpec::new(config.window, config.res[0], config.res[1])?)
}

fn ensure_values(grid: &ScanGrid) -> Result<(), CliError> {
    if grid.values.iter().all(|v| v.is_nan()) {
        return Err(CliError::Numerical("every grid point failed to evaluate".into()));
    }
    Ok(())
}

fn c2(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Serialize)]
struct ScanSummary {
    value: &'static str,
    missing: usize,
    minimum: Option<f64>,
    median: f64,
}

fn summarize(grid: &ScanGrid, value: &'static str) -> ScanSummary {
    ScanSummary {
        value,
        missing: grid.missing().len(),
        minimum: grid
            .values
            .iter()
            .copied()
            .filter(|v| !v.is_nan())
            .min_by(f64::total_cmp)
            .filter(|v| v.is_finite()),
        median: grid.median(),
    }
}

fn emit_grid(
    grid: &ScanGrid,
    config: &RunConfig,
    out: &OutputOptions,
    name: &str,
    extra: &[(&str, String)],
    files: &mut Vec<std::path::PathBuf>,
) -> Result<(), CliError> {
    files.push(write(
        &out.path(&format!("{name}.csv")),
        grid_csv(grid, config, extra).as_bytes(),
    )?);
    if out.png {
        files.push(heatmap_png(grid, &out.path(&format!("{name}.png")))?);
    }
    Ok(())
}

fn cmd_scan(config: &RunConfig, out: &OutputOptions) -> Result<Outcome, CliError> {
    let target = Target::new(config)?;
    let grid = scan(|w| target.log_z_sqr(w), grid_spec(config)?, config.plane);
    ensure_values(&grid)?;
    let mut files = Vec::new();
    emit_grid(
        &grid,
        config,
        out,
        "scan",
        &[("value", "ln_abs_z_sqr".into())],
        &mut files,
    )?;
    let summary = summarize(&grid, "ln_abs_z_sqr");
    files.push(write(&out.path("scan.json"), report_json(config, &summary).as_bytes())?);
    let text = format!(
        "scanned {} points on the {} plane ({} missing), median ln|Z|^2 = {:.6}\n",
        grid.spec.len(),
        config.plane.name(),
        summary.missing,
        summary.median
    );
    Ok(Outcome::ok(files, text))
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimumRow {
    pub cell: [usize; 2],
    pub location: [f64; 2],
    pub ln_abs_z_sqr: f64,
    pub refined: Option<[f64; 2]>,
    pub refined_log10_residual: Option<f64>,
    pub newton_iterations: Option<usize>,
    pub newton_error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchRow {
    pub root: usize,
    pub minimum: usize,
    /// Chebyshev distance in grid cells between the root's nearest cell and
    /// the minimum.
    pub cells: usize,
    /// `|refined − root|`, when the minimum was refined.
    pub newton_distance: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZerosReport {
    pub plane: &'static str,
    pub polynomial_available: bool,
    pub roots: Vec<[f64; 2]>,
    pub minima: Vec<MinimumRow>,
    pub matches: Vec<MatchRow>,
    pub unmatched_roots: Vec<usize>,
    pub unmatched_minima: Vec<usize>,
}

/// Scan, grid minima, Newton refinement and polynomial cross-listing.
pub fn find_zeros(config: &RunConfig) -> Result<(ScanGrid, ZerosReport), CliError> {
    let target = Target::new(config)?;
    let spec = grid_spec(config)?;
    let grid = scan(|w| target.log_z_sqr(w), spec, config.plane);
    ensure_values(&grid)?;
    let candidates = find_minima(&grid, config.threshold);
    let f = target.newton_function(&spec);
    let scale = spec.scale();
    let minima: Vec<MinimumRow> = candidates
        .par_iter()
        .map(|c| {
            let refined = refine_newton(&f, c.location, scale);
            let (ok, err) = match refined {
                Ok(z) => (Some(z), None),
                Err(e) => (None, Some(e.to_string())),
            };
            MinimumRow {
                cell: [c.i, c.j],
                location: c2(c.location),
                ln_abs_z_sqr: c.value,
                refined: ok.map(|z| c2(z.location)),
                refined_log10_residual: ok.map(|z| z.residual).filter(|r| r.is_finite()),
                newton_iterations: ok.map(|z| z.iterations),
                newton_error: err,
            }
        })
        .collect();

    let (available, mut roots) = match target.polynomial_zeros(&spec) {
        Some(r) => (true, r?),
        None => (false, Vec::new()),
    };
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let mut matches = Vec::new();
    let mut unmatched_roots = Vec::new();
    for (ri, r) in roots.iter().enumerate() {
        let (i, j) = spec.nearest(*r);
        let best = minima
            .iter()
            .enumerate()
            .map(|(mi, m)| (mi, m.cell[0].abs_diff(i).max(m.cell[1].abs_diff(j))))
            .filter(|&(_, d)| d <= 1)
            .min_by_key(|&(mi, d)| (d, mi));
        match best {
            Some((mi, cells)) => matches.push(MatchRow {
                root: ri,
                minimum: mi,
                cells,
                newton_distance: minima[mi].refined.map(|z| (Complex64::new(z[0], z[1]) - r).norm()),
            }),
            None => unmatched_roots.push(ri),
        }
    }
    let unmatched_minima = if available {
        (0..minima.len())
            .filter(|mi| !matches.iter().any(|m| m.minimum == *mi))
            .collect()
    } else {
        Vec::new()
    };
    let report = ZerosReport {
        plane: config.plane.name(),
        polynomial_available: available,
        roots: roots.iter().copied().map(c2).collect(),
        minima,
        matches,
        unmatched_roots,
        unmatched_minima,
    };
    Ok((grid, report))
}

fn cmd_zeros(config: &RunConfig, out: &OutputOptions) -> Result<Outcome, CliError> {
    let (grid, report) = find_zeros(config)?;
    let mut files = Vec::new();
    emit_grid(
        &grid,
        config,
        out,
        "zeros",
        &[("value", "ln_abs_z_sqr".into())],
        &mut files,
    )?;
    files.push(write(&out.path("zeros.json"), report_json(config, &report).as_bytes())?);
    let mut text = format!(
        "{} grid minima, {} polynomial roots in window, {} matched\n",
        report.minima.len(),
        report.roots.len(),
        report.matches.len()
    );
    for m in &report.minima {
        if let Some(z) = m.refined {
            writeln!(text, "  zero at {:+.10} {:+.10}i", z[0], z[1]).expect("string write");
        }
    }
    Ok(Outcome::ok(files, text))
}

#[derive(Serialize)]
struct NoiseReport {
    plane: &'static str,
    value: &'static str,
    zero_source: &'static str,
    true_zeros: Vec<[f64; 2]>,
    detection: DetectabilityReport,
}

fn cmd_noise(config: &RunConfig, out: &OutputOptions) -> Result<Outcome, CliError> {
    let target = Target::new(config)?;
    let spec = grid_spec(config)?;
    let truth = scan(|w| target.log_return_probability(w), spec, config.plane);
    ensure_values(&truth)?;
    let noisy = noisy_scan(&truth, config.shots, config.seed)?;

    let (zero_source, zeros) = match target.polynomial_zeros(&spec) {
        Some(r) => ("polynomial", r?),
        None => {
            let f = target.newton_function(&spec);
            let mut zeros: Vec<Complex64> = Vec::new();
            for c in find_minima(&truth, config.threshold) {
                if let Ok(z) = refine_newton(&f, c.location, spec.scale()) {
                    if spec.contains(z.location) && zeros.iter().all(|p| (p - z.location).norm() > 1e-6) {
                        zeros.push(z.location);
                    }
                }
            }
            ("refined_minima", zeros)
        }
    };
    let detection = detectability(&noisy, &zeros, config.radius);

    let mut files = Vec::new();
    let mut meta = vec![("value", "ln_return_probability_estimate".to_string())];
    meta.push(("config", config.to_json()));
    files.push(write(&out.path("noise.csv"), noisy.to_csv(&meta).as_bytes())?);
    emit_grid(
        &truth,
        config,
        out,
        "noise_truth",
        &[("value", "ln_return_probability".into())],
        &mut files,
    )?;
    if out.png {
        files.push(heatmap_png(&noisy.log_grid(), &out.path("noise.png"))?);
    }
    let text = format!(
        "{} true zeros in window, {:.0}% within {} cells of a noisy minimum ({} minima)\n",
        zeros.len(),
        100.0 * detection.fraction_detected,
        config.radius,
        detection.n_minima
    );
    let report = NoiseReport {
        plane: config.plane.name(),
        value: "ln_return_probability_estimate",
        zero_source,
        true_zeros: zeros.iter().copied().map(c2).collect(),
        detection,
    };
    files.push(write(&out.path("noise.json"), report_json(config, &report).as_bytes())?);
    Ok(Outcome::ok(files, text))
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyRow {
    pub point: usize,
    pub k: [f64; 2],
    pub h: [f64; 2],
    pub check: String,
    /// Relative error, or `None` when the check was skipped.
    pub rel_error: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationRow {
    pub n_circ: usize,
    pub l_len: usize,
    pub printed_exponent: f64,
    pub fitted_exponent: f64,
    pub kick_sign: f64,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub tolerance: f64,
    pub rows: Vec<VerifyRow>,
    pub calibration: Option<CalibrationRow>,
    pub worst: f64,
    pub passed: bool,
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn uniform_instance(config: &RunConfig, base: &IsingModel, k: Complex64, h: Complex64) -> zeroscope::Result<Instance> {
    match config.model.cylinder() {
        Some(c) => {
            let cyl = Cylinder { kx: k, ky: k, h, ..c };
            Ok(Instance {
                model: cyl.build()?,
                cylinder: Some(cyl),
                kicked: None,
            })
        }
        None => Ok(Instance {
            model: base.with_uniform_coupling(k).with_uniform_field(h),
            cylinder: None,
            kicked: None,
        }),
    }
}

pub fn verify(config: &RunConfig) -> Result<VerifyReport, CliError> {
    let base = config.model.build(config.flip_sign)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let mut rows = Vec::new();
    for point in 0..config.samples {
        let k = Complex64::new(draw(-0.6, 0.6), draw(-0.6, 0.6));
        let h = Complex64::new(draw(-0.6, 0.6), draw(-0.6, 0.6));
        let kick = Complex64::new(draw(0.15, 0.9), draw(-0.6, 0.6));
        let inst = uniform_instance(config, &base, k, h)?;
        let z = exact_z(&inst)?.to_complex();
        let circuit = compile_general(&inst.model);
        let scale = circuit.log_prefactor().exp();
        let row = |check: &str, rel_error: Option<f64>, note: Option<String>| VerifyRow {
            point,
            k: c2(k),
            h: c2(h),
            check: check.into(),
            rel_error,
            note,
        };
        for backend in [Backend::Effective, Backend::Full, Backend::Streamed] {
            let (name, size, cap) = match backend {
                Backend::Effective => ("effective", inst.model.n_spins(), zeroscope::statevector::EFFECTIVE_CAP),
                Backend::Full => ("full", circuit.n_qubits(), FULL_CAP),
                Backend::Streamed => ("streamed", streamed_width(&circuit), STREAMED_CAP),
            };
            if size > cap {
                rows.push(row(name, None, Some(format!("{size} qubits exceed cap {cap}"))));
                continue;
            }
            let amp = match backend {
                Backend::Effective => run_effective(&inst.model)?,
                Backend::Full => run_full(&circuit)?,
                Backend::Streamed => run_streamed(&circuit)?,
            }
            .amplitude;
            let mut predicted = amp * scale;
            if config.force_mismatch && backend == Backend::Effective {
                predicted *= 1.0 + 1e-6;
            }
            rows.push(row(name, Some(rel(predicted, z)), None));
        }
        if let Some(c) = config.model.cylinder() {
            let protocol = KickedProtocol::new(c.n_circ, c.l_len, k, kick)?;
            let kc = protocol.compile();
            if streamed_width(&kc) > STREAMED_CAP {
                rows.push(row(
                    "kicked",
                    None,
                    Some("kicked circuit exceeds the streamed cap".into()),
                ));
            } else {
                let cl = protocol.classical_model()?;
                let cyl = Cylinder {
                    kx: k,
                    ky: protocol.classical_ky().unwrap_or_default(),
                    h: Complex64::new(0.0, 0.0),
                    ..c
                };
                let zc = exact_z(&Instance {
                    model: cl,
                    cylinder: Some(cyl),
                    kicked: None,
                })?;
                let log_p = run_streamed(&kc)?.probability.ln() + 2.0 * kc.log_prefactor();
                let err = (protocol.log_kick_prefactor() + zc.log_norm_sqr() - log_p)
                    .exp_m1()
                    .abs();
                rows.push(row("kicked", Some(err), Some(format!("kick field {kick}"))));
            }
        }
    }
    let calibration = match config.model.cylinder() {
        Some(c) if c.l_len >= 2 && c.n_circ * c.l_len <= BRUTE_FORCE_CAP => {
            let cal = calibrate_kicked(c.n_circ, c.l_len, config.samples.clamp(1, 20), config.seed)?;
            Some(CalibrationRow {
                n_circ: cal.n_circ,
                l_len: cal.l_len,
                printed_exponent: cal.printed_exponent,
                fitted_exponent: cal.fitted_exponent,
                kick_sign: cal.kick_sign,
                max_rel_error: cal.max_rel_error,
            })
        }
        _ => None,
    };
    let worst = rows
        .iter()
        .filter_map(|r| r.rel_error)
        .chain(calibration.as_ref().map(|c| c.max_rel_error))
        .fold(0.0, f64::max);
    let passed = worst <= config.tolerance;
    Ok(VerifyReport {
        tolerance: config.tolerance,
        rows,
        calibration,
        worst,
        passed,
    })
}

fn cmd_verify(config: &RunConfig, out: &OutputOptions) -> Result<Outcome, CliError> {
    let report = verify(config)?;
    let mut csv = format!(
        "# format={} config={}\n",
        crate::output::OUTPUT_FORMAT_VERSION,
        config.to_json()
    );
    csv.push_str("point,k_re,k_im,h_re,h_im,check,rel_error\n");
    let mut text = format!(
        "{:>5}  {:>24}  {:>24}  {:<9}  {}\n",
        "point", "K", "H", "check", "rel. error"
    );
    for r in &report.rows {
        let err = r.rel_error.map_or("skipped".to_string(), |e| format!("{e:?}"));
        writeln!(
            csv,
            "{},{:?},{:?},{:?},{:?},{},{}",
            r.point, r.k[0], r.k[1], r.h[0], r.h[1], r.check, err
        )
        .expect("string write");
        let shown = r.rel_error.map_or("skipped".to_string(), |e| format!("{e:.2e}"));
        writeln!(
            text,
            "{:>5}  {:>+11.6}{:>+11.6}i  {:>+11.6}{:>+11.6}i  {:<9}  {}",
            r.point, r.k[0], r.k[1], r.h[0], r.h[1], r.check, shown
        )
        .expect("string write");
    }
    if let Some(c) = &report.calibration {
        writeln!(
            text,
            "kicked calibration {}x{}: power of two {:.9} (printed {}), kick sign {:+}, max rel. error {:.2e}",
            c.n_circ, c.l_len, c.fitted_exponent, c.printed_exponent, c.kick_sign, c.max_rel_error
        )
        .expect("string write");
    }
    writeln!(
        text,
        "{}: worst relative error {:.2e} (tolerance {:.0e})",
        if report.passed { "PASS" } else { "FAIL" },
        report.worst,
        report.tolerance
    )
    .expect("string write");
    let files = vec![
        write(&out.path("verify.csv"), csv.as_bytes())?,
        write(&out.path("verify.json"), report_json(config, &report).as_bytes())?,
    ];
    Ok(Outcome {
        files,
        summary: text,
        violated: !report.passed,
    })
}

#[derive(Serialize)]
struct CorrFile {
    reports: Vec<CorrelationReport>,
}

fn kicked_base(c: &Cylinder) -> Result<KickedProtocol, CliError> {
    if c.h.norm() != 0.0 {
        return Err(CliError::Config(
            "coupling and field probes need a cylinder with h=0".into(),
        ));
    }
    let kick = if c.l_len > 1 {
        ky_to_kick_field(c.ky)? * KICK_SIGN
    } else {
        Complex64::new(0.0, 0.0)
    };
    Ok(KickedProtocol::new(c.n_circ, c.l_len, c.kx, kick)?)
}

fn cmd_corr(config: &RunConfig, out: &OutputOptions) -> Result<Outcome, CliError> {
    let model = config.model.build(config.flip_sign)?;
    let [i, j] = config.sites;
    let n = model.n_spins();
    if i >= n || j >= n {
        return Err(CliError::Config(format!("sites {i},{j} out of range for {n} spins")));
    }
    let backend = match config.backend {
        BackendChoice::Effective => Backend::Effective,
        BackendChoice::Full => Backend::Full,
        BackendChoice::Oracle | BackendChoice::Streamed => Backend::Streamed,
    };
    let probe_backend = if backend == Backend::Full {
        Backend::Full
    } else {
        Backend::Streamed
    };
    let cylinder = config.model.cylinder().map(|c| c.flipped(config.flip_sign));
    let mut reports = Vec::new();
    if matches!(config.corr_method, CorrMethod::Auto | CorrMethod::Norm) {
        reports.push(norm_ratio_report(&model, i, j, backend)?);
    }
    let probe = match (config.corr_method, cylinder) {
        (CorrMethod::Norm, _) | (CorrMethod::Auto, None) => None,
        (CorrMethod::Auto, Some(c)) if c.h.norm() != 0.0 || i == j => None,
        (m, Some(c)) => {
            let same = i / c.n_circ == j / c.n_circ;
            let same_row = match m {
                CorrMethod::SameRow => true,
                CorrMethod::CrossRow => false,
                _ => same,
            };
            if same_row && !same {
                return Err(CliError::Config(format!("sites {i} and {j} are not in the same row")));
            }
            Some((c, same_row))
        }
        (_, None) => {
            return Err(CliError::Config(
                "coupling and field probes need a cylinder model".into(),
            ))
        }
    };
    if let Some((c, same_row)) = probe {
        let protocol = kicked_base(&c)?;
        let (a, b) = ((i / c.n_circ, i % c.n_circ), (j / c.n_circ, j % c.n_circ));
        reports.push(if same_row {
            corr_same_row(&protocol, a.0, a.1, b.1, config.delta, probe_backend)?
        } else {
            corr_cross_row(&protocol, a, b, config.delta, probe_backend)?
        });
    }
    let mut text = String::new();
    for r in &reports {
        let oracle = r
            .oracle
            .map_or("n/a".into(), |o| format!("{:+.10}{:+.10}i", o.re, o.im));
        writeln!(
            text,
            "{:?} sites {:?}: estimate {:+.10}{:+.10}i, exact {oracle}",
            r.method,
            r.sites,
            r.best().re,
            r.best().im
        )
        .expect("string write");
    }
    let files = vec![write(
        &out.path("corr.json"),
        report_json(config, &CorrFile { reports }).as_bytes(),
    )?];
    Ok(Outcome::ok(files, text))
}

#[derive(Clone, Debug, Serialize)]
pub struct CountRow {
    pub scheme: &'static str,
    pub counts: ResourceCounts,
    pub total_qubits: usize,
    /// Closed-form totals for cylinders without field, `(qubits, gates)`.
    pub expected: Option<[usize; 2]>,
}

/// Resource counts of the general scheme and, for cylinders, the kicked one.
/// Counts are structural: every bond and field term gets its gadget whatever
/// its value.
pub fn counts(config: &RunConfig) -> Result<Vec<CountRow>, CliError> {
    let model = config.model.build(config.flip_sign)?;
    let general = compile_general(&model).resource_counts();
    let cyl = config.model.cylinder().filter(|c| c.h.norm() == 0.0 && c.n_circ >= 3);
    let closed = |q: usize, g: usize| cyl.map(|_| [q, g]);
    let (n, l) = cyl.map_or((0, 0), |c| (c.n_circ, c.l_len));
    let mut rows = vec![CountRow {
        scheme: "general",
        total_qubits: general.total_qubits(),
        counts: general,
        expected: closed((3 * n * l).saturating_sub(n), (6 * n * l).saturating_sub(3 * n)),
    }];
    if let Some(c) = config.model.cylinder() {
        let kicked = compile_kicked(c.n_circ, c.l_len, c.kx, Complex64::new(0.5, 0.0))?.resource_counts();
        rows.push(CountRow {
            scheme: "kicked",
            total_qubits: kicked.total_qubits(),
            counts: kicked,
            expected: closed(2 * n * l, (6 * n * l).saturating_sub(3 * n)),
        });
    }
    Ok(rows)
}

fn cmd_counts(config: &RunConfig, out: &OutputOptions) -> Result<Outcome, CliError> {
    let rows = counts(config)?;
    let mut csv = format!(
        "# format={} config={}\n",
        crate::output::OUTPUT_FORMAT_VERSION,
        config.to_json()
    );
    csv.push_str("scheme,n_physical,n_ancilla_x,n_ancilla_z,total_qubits,n_gates,expected_qubits,expected_gates\n");
    let mut text = format!("{:<8} {:>8} {:>8} {:>8}\n", "scheme", "qubits", "gates", "closed form");
    for r in &rows {
        let c = &r.counts;
        let (eq, eg) = r
            .expected
            .map_or((String::new(), String::new()), |[q, g]| (q.to_string(), g.to_string()));
        writeln!(
            csv,
            "{},{},{},{},{},{},{eq},{eg}",
            r.scheme, c.n_physical, c.n_ancilla_x, c.n_ancilla_z, r.total_qubits, c.n_gates
        )
        .expect("string write");
        let closed = r.expected.map_or("-".to_string(), |[q, g]| format!("({q}, {g})"));
        writeln!(
            text,
            "{:<8} {:>8} {:>8} {:>8}",
            r.scheme, r.total_qubits, c.n_gates, closed
        )
        .expect("string write");
    }
    let files = vec![write(&out.path("counts.csv"), csv.as_bytes())?];
    Ok(Outcome::ok(files, text))
}
