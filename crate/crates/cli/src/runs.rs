//! One function per subcommand: builds core-module inputs from the config,
//! runs the experiment, and emits the artifacts.
//!
//! Every run function returns the process exit code. Code 3 (κ-criterion
//! violation) is produced here rather than through `Failure` because those
//! runs complete and write their artifacts — the code is a verdict on the
//! result, not an abort.

use std::path::PathBuf;

use serde_json::Value;

use biharmonic_core::determinant::{
    alpha, alpha_lattice_profile, choose_kappa0, AlphaMethod, SpectralParameter,
};
use biharmonic_core::dynamics::{conservation_report, simulate as run_flow, SimulationConfig};
use biharmonic_core::estimates::{
    bilinear_sweep, l4_interval_sweep, strichartz_sweep, BilinearMode, FrequencyInterval,
    PacketEnsemble, SweepReport,
};
use biharmonic_core::norms::{modulation_norm, sobolev_norm, z_norm, NormParams};
use biharmonic_core::spectral::{SpectralField, SpectralGrid, WindowFamily};

use crate::artifacts::{
    csv_f64, json_f64, json_f64_array, ArtifactDir, ArtifactMeta, PlotSpec, Series,
};
use crate::config::{require, require_field, ConfigDoc, DataSection, GridSection, ModeName};
use crate::Failure;

/// Everything a run needs beyond the config document itself.
pub struct RunContext {
    pub doc: ConfigDoc,
    pub config_sha256: String,
    pub seed: u64,
    pub out: PathBuf,
    pub plot: bool,
}

impl RunContext {
    fn meta(&self, command: &'static str) -> ArtifactMeta {
        ArtifactMeta {
            config_sha256: self.config_sha256.clone(),
            seed: self.seed,
            command,
        }
    }

    fn dir(&self) -> Result<ArtifactDir, Failure> {
        let prefix = self.doc.output.as_ref().and_then(|o| o.prefix.clone());
        ArtifactDir::create(&self.out, prefix)
    }
}

/// A JSON object literal with insertion-ordered fields.
fn obj(entries: Vec<(&str, Value)>) -> Value {
    Value::Object(entries.into_iter().map(|(k, v)| (k.to_owned(), v)).collect())
}

fn build_field(
    grid_section: &GridSection,
    data_section: &DataSection,
) -> Result<SpectralField, Failure> {
    let grid = SpectralGrid::new(grid_section.box_length(), grid_section.points)?;
    Ok(data_section.to_initial().build(&grid)?.without_nyquist())
}

fn announce(dir: &ArtifactDir) {
    for file in dir.written() {
        println!("wrote {file}");
    }
}

// ---------------------------------------------------------------------------
// simulate / conservation-report
// ---------------------------------------------------------------------------

pub fn simulate(ctx: &RunContext, conservation_only: bool) -> Result<u8, Failure> {
    let grid_section = require(ctx.doc.grid, "grid")?;
    let data_section = require(ctx.doc.data, "data")?;
    let physics = require(ctx.doc.physics, "physics")?;

    let mut sim = SimulationConfig::new(
        grid_section.box_length(),
        grid_section.points,
        data_section.to_initial(),
        physics.dt,
        physics.horizon,
    )
    .with_record_every(physics.record_every)
    .with_dealias(physics.dealias);
    if let Some(coefficients) = physics.coefficients {
        sim = sim.with_coefficients(coefficients.into());
    }

    // Optional κ-lattice tracking, with the base point found by the doubling
    // search when the config does not pin it.
    let mut kappa0 = None;
    if let Some(det) = ctx.doc.determinant {
        let field = build_field(&grid_section, &data_section)?;
        let base = match det.kappa0 {
            Some(value) => value,
            None => choose_kappa0(&field, det.s, det.q, det.delta, -det.range..=det.range)?.kappa0,
        };
        kappa0 = Some(base);
        let lattice = (-det.range..=det.range)
            .map(|n| SpectralParameter::lattice(base, n))
            .collect::<Result<Vec<_>, _>>()?;
        sim = sim.with_kappa_list(lattice);
    }

    let command = if conservation_only {
        "conservation-report"
    } else {
        "simulate"
    };
    let trajectory = run_flow(&sim)?;
    let report = conservation_report(&trajectory, &sim.kappa_list);

    let meta = ctx.meta(command);
    let mut dir = ctx.dir()?;

    if !conservation_only {
        let rows: Vec<Vec<String>> = report
            .times
            .iter()
            .zip(&trajectory.diagnostics)
            .map(|(&t, diag)| {
                vec![
                    csv_f64(t),
                    csv_f64(diag.mass),
                    csv_f64(diag.sobolev),
                    csv_f64(diag.modulation),
                    csv_f64(diag.z),
                ]
            })
            .collect();
        dir.write_csv(
            "trajectory.csv",
            &meta,
            &["time", "mass", "sobolev", "modulation", "z"],
            &rows,
        )?;

        if !sim.kappa_list.is_empty() {
            let mut rows = Vec::new();
            for (&t, diag) in report.times.iter().zip(&trajectory.diagnostics) {
                for sample in &diag.alphas {
                    rows.push(vec![
                        csv_f64(t),
                        sample
                            .kappa
                            .lattice_index()
                            .map_or_else(String::new, |n| n.to_string()),
                        csv_f64(sample.kappa.re()),
                        csv_f64(sample.kappa.im()),
                        csv_f64(sample.value),
                        csv_f64(sample.hs),
                        sample.converged.to_string(),
                    ]);
                }
            }
            dir.write_csv(
                "alphas.csv",
                &meta,
                &["time", "n", "kappa_re", "kappa_im", "alpha", "hs", "converged"],
                &rows,
            )?;
        }
    }

    let rows: Vec<Vec<String>> = report
        .kappa_rows
        .iter()
        .map(|row| {
            vec![
                row.kappa
                    .lattice_index()
                    .map_or_else(String::new, |n| n.to_string()),
                csv_f64(row.kappa.re()),
                csv_f64(row.kappa.im()),
                csv_f64(*row.alpha_series.first().unwrap_or(&f64::NAN)),
                csv_f64(*row.alpha_series.last().unwrap_or(&f64::NAN)),
                csv_f64(row.drift),
                csv_f64(row.max_hs),
                row.criterion_ok.to_string(),
            ]
        })
        .collect();
    dir.write_csv(
        "conservation.csv",
        &meta,
        &[
            "n",
            "kappa_re",
            "kappa_im",
            "alpha_initial",
            "alpha_final",
            "drift",
            "max_hs",
            "criterion_ok",
        ],
        &rows,
    )?;

    let worst_hs = report
        .kappa_rows
        .iter()
        .map(|row| row.max_hs)
        .fold(0.0, f64::max);
    let kappa_rows_json: Vec<Value> = report
        .kappa_rows
        .iter()
        .map(|row| {
            obj(vec![
                (
                    "n",
                    row.kappa.lattice_index().map_or(Value::Null, Value::from),
                ),
                ("kappa_re", json_f64(row.kappa.re())),
                ("kappa_im", json_f64(row.kappa.im())),
                ("alpha_series", json_f64_array(&row.alpha_series)),
                ("drift", json_f64(row.drift)),
                ("max_hs", json_f64(row.max_hs)),
                ("criterion_ok", Value::Bool(row.criterion_ok)),
            ])
        })
        .collect();
    dir.write_json(
        "conservation.json",
        &meta,
        obj(vec![
            ("box_length", json_f64(grid_section.box_length())),
            ("points", Value::from(grid_section.points)),
            ("dt", json_f64(physics.dt)),
            ("horizon", json_f64(physics.horizon)),
            ("snapshots", Value::from(report.times.len())),
            ("kappa0", kappa0.map_or(Value::Null, json_f64)),
            ("mass_drift", json_f64(report.mass_drift)),
            ("modulation_ratio", json_f64(report.modulation_ratio)),
            ("max_hs", json_f64(worst_hs)),
            ("expansion_ok", Value::Bool(worst_hs < 1.0)),
            ("times", json_f64_array(&report.times)),
            ("mass", json_f64_array(&report.mass_series)),
            ("modulation", json_f64_array(&report.modulation_series)),
            ("z", json_f64_array(&report.z_series)),
            ("kappa_rows", Value::Array(kappa_rows_json)),
        ]),
    )?;

    if ctx.plot {
        let mass_start = report.mass_series.first().copied().unwrap_or(0.0);
        let mass_drift: Vec<(f64, f64)> = report
            .times
            .iter()
            .zip(&report.mass_series)
            .map(|(&t, &m)| (t, (m - mass_start).abs()))
            .collect();
        let mut series = vec![Series {
            label: "|mass(t) - mass(0)|".to_owned(),
            points: mass_drift,
            line: true,
        }];
        if !report.kappa_rows.is_empty() {
            let alpha_drift: Vec<(f64, f64)> = report
                .times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let worst = report
                        .kappa_rows
                        .iter()
                        .filter_map(|row| {
                            let first = *row.alpha_series.first()?;
                            let now = *row.alpha_series.get(i)?;
                            let drift = (now - first).abs();
                            drift.is_finite().then_some(drift)
                        })
                        .fold(0.0, f64::max);
                    (t, worst)
                })
                .collect();
            series.push(Series {
                label: "max_n |alpha_n(t) - alpha_n(0)|".to_owned(),
                points: alpha_drift,
                line: true,
            });
        }
        dir.write_svg(
            "conservation.svg",
            &meta,
            &PlotSpec {
                title: "conservation drift".to_owned(),
                x_label: "t".to_owned(),
                y_label: "absolute drift".to_owned(),
                log_x: false,
                log_y: true,
                fit: None,
                series,
            },
        )?;
    }

    announce(&dir);
    println!(
        "{command}: {} snapshots, mass drift {:.3e}, modulation ratio {:.4}",
        report.times.len(),
        report.mass_drift,
        report.modulation_ratio
    );
    if let Some(base) = kappa0 {
        println!(
            "kappa lattice: kappa0 = {base}, {} rows, max hs = {worst_hs:.4}",
            report.kappa_rows.len()
        );
    }
    if worst_hs >= 1.0 {
        eprintln!(
            "kappa criterion violated: max hs = {worst_hs:.4} >= 1, \
             determinant expansion not convergent on the requested lattice"
        );
        return Ok(3);
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// alpha
// ---------------------------------------------------------------------------

pub fn alpha_profile(ctx: &RunContext) -> Result<u8, Failure> {
    let grid_section = require(ctx.doc.grid, "grid")?;
    let data_section = require(ctx.doc.data, "data")?;
    let det = require(ctx.doc.determinant, "determinant")?;

    let field = build_field(&grid_section, &data_section)?;
    let range = -det.range..=det.range;

    let (kappa0, search) = match det.kappa0 {
        Some(value) => (value, None),
        None => {
            let choice = choose_kappa0(&field, det.s, det.q, det.delta, range.clone())?;
            (choice.kappa0, Some(choice.history))
        }
    };

    let profile = alpha_lattice_profile(&field, kappa0, det.s, det.q, range)?;

    // Dual evaluation: the truncated series next to the log-determinant,
    // with the geometric tail bound that budgets their disagreement.
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for row in &profile.rows {
        let kappa = SpectralParameter::lattice(kappa0, row.n)?;
        let series = alpha(
            &field,
            &kappa,
            AlphaMethod::Series {
                l_max: det.series_terms,
            },
        )?;
        let agreement = (row.alpha - series.value).abs();
        rows.push(vec![
            row.n.to_string(),
            csv_f64(kappa.re()),
            csv_f64(kappa.im()),
            csv_f64(row.alpha),
            csv_f64(series.value),
            csv_f64(agreement),
            csv_f64(series.tail_bound),
            csv_f64(row.leading),
            csv_f64(row.residual),
            csv_f64(row.hs),
            row.converged.to_string(),
        ]);
        json_rows.push(obj(vec![
            ("n", Value::from(row.n)),
            ("kappa_re", json_f64(kappa.re())),
            ("kappa_im", json_f64(kappa.im())),
            ("alpha_logdet", json_f64(row.alpha)),
            ("alpha_series", json_f64(series.value)),
            ("agreement", json_f64(agreement)),
            ("series_tail_bound", json_f64(series.tail_bound)),
            ("leading", json_f64(row.leading)),
            ("residual", json_f64(row.residual)),
            ("hs", json_f64(row.hs)),
            ("converged", Value::Bool(row.converged)),
        ]));
    }

    let meta = ctx.meta("alpha");
    let mut dir = ctx.dir()?;
    dir.write_csv(
        "profile.csv",
        &meta,
        &[
            "n",
            "kappa_re",
            "kappa_im",
            "alpha_logdet",
            "alpha_series",
            "agreement",
            "series_tail_bound",
            "leading",
            "residual",
            "hs",
            "converged",
        ],
        &rows,
    )?;

    let max_hs = profile.rows.iter().map(|r| r.hs).fold(0.0, f64::max);
    let flagged: Vec<Value> = profile
        .rows
        .iter()
        .filter(|r| r.hs >= 1.0)
        .map(|r| Value::from(r.n))
        .collect();
    let uncertified: Vec<Value> = profile
        .rows
        .iter()
        .filter(|r| r.hs > 0.5)
        .map(|r| Value::from(r.n))
        .collect();
    let search_json = search.as_ref().map_or(Value::Null, |history| {
        Value::Array(
            history
                .iter()
                .map(|&(k, h)| Value::Array(vec![json_f64(k), json_f64(h)]))
                .collect(),
        )
    });
    let expansion_ok = flagged.is_empty();
    dir.write_json(
        "profile.json",
        &meta,
        obj(vec![
            ("kappa0", json_f64(profile.kappa0)),
            ("kappa0_search", search_json),
            ("s", json_f64(profile.s)),
            ("q", json_f64(profile.q)),
            ("delta", json_f64(profile.delta)),
            ("range", Value::from(det.range)),
            ("series_terms", Value::from(det.series_terms)),
            ("max_hs", json_f64(max_hs)),
            ("expansion_ok", Value::Bool(expansion_ok)),
            ("flagged_n", Value::Array(flagged)),
            ("uncertified_n", Value::Array(uncertified)),
            ("residual_norm", json_f64(profile.residual_norm)),
            ("comparison", json_f64(profile.comparison)),
            ("rows", Value::Array(json_rows)),
        ]),
    )?;

    if ctx.plot {
        let alpha_points: Vec<(f64, f64)> = profile
            .rows
            .iter()
            .map(|r| (r.n as f64, r.alpha))
            .collect();
        let leading_points: Vec<(f64, f64)> = profile
            .rows
            .iter()
            .map(|r| (r.n as f64, r.leading))
            .collect();
        dir.write_svg(
            "profile.svg",
            &meta,
            &PlotSpec {
                title: format!("alpha across the kappa lattice (kappa0 = {kappa0})"),
                x_label: "lattice index n".to_owned(),
                y_label: "alpha".to_owned(),
                log_x: false,
                log_y: false,
                fit: None,
                series: vec![
                    Series {
                        label: "alpha".to_owned(),
                        points: alpha_points,
                        line: true,
                    },
                    Series {
                        label: "leading closed form".to_owned(),
                        points: leading_points,
                        line: true,
                    },
                ],
            },
        )?;
    }

    announce(&dir);
    println!(
        "alpha: kappa0 = {}, delta = {:.6}, max hs = {max_hs:.4}, \
         residual comparison = {:.4}",
        profile.kappa0, profile.delta, profile.comparison
    );
    if !expansion_ok {
        eprintln!(
            "kappa criterion violated: hs >= 1 on part of the lattice \
             (see flagged_n in profile.json); alpha values there are not \
             certified by the convergent expansion"
        );
        return Ok(3);
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// norms
// ---------------------------------------------------------------------------

pub fn norms(ctx: &RunContext) -> Result<u8, Failure> {
    let grid_section = require(ctx.doc.grid, "grid")?;
    let data_section = require(ctx.doc.data, "data")?;
    let section = require(ctx.doc.norms, "norms")?;

    let field = build_field(&grid_section, &data_section)?;
    let params = NormParams::new(section.s, section.q, section.kappa0)?;
    let windows = WindowFamily::new();

    let mass = field.mass();
    let sobolev = sobolev_norm(&field, section.s);
    let modulation = modulation_norm(&field, &params, &windows);
    let z = z_norm(&field, &params)?;

    let meta = ctx.meta("norms");
    let mut dir = ctx.dir()?;
    dir.write_csv(
        "norms.csv",
        &meta,
        &["s", "q", "kappa0", "mass", "sobolev", "modulation", "z"],
        &[vec![
            csv_f64(section.s),
            csv_f64(section.q),
            csv_f64(section.kappa0),
            csv_f64(mass),
            csv_f64(sobolev),
            csv_f64(modulation),
            csv_f64(z),
        ]],
    )?;
    dir.write_json(
        "norms.json",
        &meta,
        obj(vec![
            ("s", json_f64(section.s)),
            ("q", json_f64(section.q)),
            ("kappa0", json_f64(section.kappa0)),
            ("mass", json_f64(mass)),
            ("sobolev", json_f64(sobolev)),
            ("modulation", json_f64(modulation)),
            ("z", json_f64(z)),
        ]),
    )?;

    announce(&dir);
    println!(
        "norms: mass = {mass:.6e}, sobolev = {sobolev:.6e}, \
         modulation = {modulation:.6e}, z = {z:.6e}"
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

pub fn sweep_strichartz(ctx: &RunContext) -> Result<u8, Failure> {
    let grid_section = require(ctx.doc.grid, "grid")?;
    let sweep = require(ctx.doc.sweep.clone(), "sweep")?;
    let family = require_field(sweep.family, "family")?;
    let p = require_field(sweep.p, "p")?.0;
    let q = require_field(sweep.q, "q")?.0;
    let t_end = require_field(sweep.t_end, "t_end")?;
    let levels = require_field(sweep.levels, "levels")?;
    let size = require_field(sweep.ensemble_size, "ensemble_size")?;

    let ensemble = PacketEnsemble::new(
        grid_section.box_length(),
        grid_section.points,
        size,
        ctx.seed,
    );
    let report = strichartz_sweep(&ensemble, family.into(), p, q, t_end, &levels)?;
    emit_sweep(ctx, "sweep-strichartz", "strichartz", &report)
}

pub fn sweep_bilinear(ctx: &RunContext) -> Result<u8, Failure> {
    let grid_section = require(ctx.doc.grid, "grid")?;
    let sweep = require(ctx.doc.sweep.clone(), "sweep")?;
    let t_end = require_field(sweep.t_end, "t_end")?;
    let size = require_field(sweep.ensemble_size, "ensemble_size")?;
    let mode = match require_field(sweep.mode, "mode")? {
        ModeName::Separated => BilinearMode::Separated {
            levels: require_field(sweep.levels, "levels")?,
        },
        ModeName::Comparable => BilinearMode::Comparable {
            level: require_field(sweep.shell_level, "shell_level")?,
            width: require_field(sweep.width, "width")?,
            lambdas: require_field(sweep.lambdas, "lambdas")?,
        },
    };

    let ensemble = PacketEnsemble::new(
        grid_section.box_length(),
        grid_section.points,
        size,
        ctx.seed,
    );
    let report = bilinear_sweep(&ensemble, &mode, t_end)?;
    emit_sweep(ctx, "sweep-bilinear", "bilinear", &report)
}

pub fn sweep_l4(ctx: &RunContext) -> Result<u8, Failure> {
    let sweep = require(ctx.doc.sweep.clone(), "sweep")?;
    let t_end = require_field(sweep.t_end, "t_end")?;
    let size = require_field(sweep.ensemble_size, "ensemble_size")?;
    let sections = require_field(sweep.intervals, "intervals")?;
    let intervals: Vec<FrequencyInterval> = sections
        .iter()
        .map(|i| FrequencyInterval::new(i.offset, i.length))
        .collect();
    let q = sweep.window_exponent.map_or(4.0, |e| e.0);

    let report = l4_interval_sweep(size, ctx.seed, &intervals, q, t_end)?;
    emit_sweep(ctx, "sweep-l4", "l4", &report)
}

/// Shared sweep emission: full sample table as CSV, fitted summary as JSON,
/// and a log-log scatter with the fitted power law as SVG.
fn emit_sweep(
    ctx: &RunContext,
    command: &'static str,
    name: &str,
    report: &SweepReport,
) -> Result<u8, Failure> {
    let meta = ctx.meta(command);
    let mut dir = ctx.dir()?;

    let mut rows = Vec::new();
    for (i, &parameter) in report.parameters.iter().enumerate() {
        for (j, &ratio) in report.ratios[i].iter().enumerate() {
            rows.push(vec![csv_f64(parameter), j.to_string(), csv_f64(ratio)]);
        }
    }
    dir.write_csv(
        &format!("{name}.csv"),
        &meta,
        &[report.parameter_label.as_str(), "sample", "ratio"],
        &rows,
    )?;

    let means = report.mean_ratios();
    let stderr = report.slope_standard_error();
    dir.write_json(
        &format!("{name}.json"),
        &meta,
        obj(vec![
            (
                "parameter_label",
                Value::from(report.parameter_label.as_str()),
            ),
            ("parameters", json_f64_array(&report.parameters)),
            ("mean_ratios", json_f64_array(&means)),
            ("slope", json_f64(report.slope)),
            ("slope_stderr", json_f64(stderr)),
            (
                "slope_ci",
                Value::Array(vec![
                    json_f64(report.slope - 2.0 * stderr),
                    json_f64(report.slope + 2.0 * stderr),
                ]),
            ),
            ("intercept", json_f64(report.intercept)),
            ("max_ratio", json_f64(report.max_ratio)),
            ("ensemble_size", Value::from(report.ensemble_size)),
            (
                "ratios",
                Value::Array(
                    report
                        .ratios
                        .iter()
                        .map(|column| json_f64_array(column))
                        .collect(),
                ),
            ),
        ]),
    )?;

    let scatter: Vec<(f64, f64)> = report
        .parameters
        .iter()
        .zip(&report.ratios)
        .flat_map(|(&parameter, column)| column.iter().map(move |&r| (parameter, r)))
        .collect();
    let mean_curve: Vec<(f64, f64)> = report
        .parameters
        .iter()
        .copied()
        .zip(means.iter().copied())
        .collect();
    dir.write_svg(
        &format!("{name}.svg"),
        &meta,
        &PlotSpec {
            title: format!("{name} sweep (ensemble of {})", report.ensemble_size),
            x_label: report.parameter_label.clone(),
            y_label: "ratio".to_owned(),
            log_x: true,
            log_y: true,
            fit: Some((report.slope, report.intercept)),
            series: vec![
                Series {
                    label: "samples".to_owned(),
                    points: scatter,
                    line: false,
                },
                Series {
                    label: "mean".to_owned(),
                    points: mean_curve,
                    line: true,
                },
            ],
        },
    )?;

    announce(&dir);
    println!(
        "{name}: slope = {:.4} (stderr {:.4}), max ratio = {:.6e}",
        report.slope, stderr, report.max_ratio
    );
    Ok(0)
}
