//! The four subcommands. Each `*_report` function does the computation and
//! returns tables and charts; [`emit`] writes them out.

use std::io::Write;
use std::path::{Path, PathBuf};

use llweak::baselines::{romberg_estimate, FunctionalEstimate};
use llweak::montecarlo::{
    arctan_functional_error, error_count, error_table, fit_gamma, functional_error, EnsembleMoments,
    GammaFit, McEstimate, CONFIDENCE_ALPHA,
};
use llweak::problems::NamedProblem;
use llweak::scheme::moment_propagate;
use llweak::sde::Moments;
use llweak::{SdeProblem, TimeGrid};

use crate::config::{ExperimentConfig, SchemeKind};
use crate::error::{CliError, Result};
use crate::runner::{
    ensemble_moments, sample_paths, stream_tag, terminal_batches, EnsembleSpec, Kernel, Role, Runner,
};
use crate::svg::{Chart, Series};
use crate::table::{fmt_f64, Table};

/// A finished command: one CSV table, optional charts, and notes for stderr.
#[derive(Debug, Clone)]
pub struct Output {
    pub table: Table,
    /// `(file suffix, chart)`.
    pub charts: Vec<(String, Chart)>,
    pub notes: Vec<String>,
}

fn single<T: Copy>(values: &[T], what: &str) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => Err(CliError::Config(format!("this command takes exactly one {what}"))),
    }
}

fn grid_for(problem: &dyn SdeProblem, delta: f64) -> Result<TimeGrid> {
    TimeGrid::uniform(problem.t0(), problem.t_end(), delta).map_err(|e| {
        CliError::Config(format!(
            "delta {delta} does not divide [{}, {}]: {e}",
            problem.t0(),
            problem.t_end()
        ))
    })
}

fn exact_curve(named: &NamedProblem, grid: &TimeGrid) -> Result<Vec<Moments>> {
    let p = named.problem();
    grid.nodes()
        .iter()
        .map(|&t| {
            p.exact_moments(t).ok_or_else(|| {
                CliError::Unsupported(format!("problem {} has no closed-form moments", named.name()))
            })
        })
        .collect()
}

fn moment_columns(prefix: &str, d: usize) -> Vec<String> {
    let mut cols: Vec<String> = (1..=d).map(|i| format!("{prefix}_mean_{i}")).collect();
    for i in 1..=d {
        for j in 1..=d {
            cols.push(format!("{prefix}_var_{i}_{j}"));
        }
    }
    cols
}

fn push_moments(row: &mut Vec<String>, mean: &[f64], var: &llweak::Matrix) {
    row.extend(mean.iter().map(|v| fmt_f64(*v)));
    let d = mean.len();
    for i in 0..d {
        for j in 0..d {
            row.push(fmt_f64(var[(i, j)]));
        }
    }
}

/// Exact mean and variance per node next to a Monte Carlo or propagated
/// estimate.
pub fn moments_report(cfg: &ExperimentConfig, runner: &Runner) -> Result<Output> {
    let named = cfg.named_problem()?;
    let p = named.problem();
    let grid = grid_for(p, single(&cfg.delta, "delta")?)?;
    let scheme = single(&cfg.scheme, "scheme")?;
    let exact = exact_curve(&named, &grid)?;
    let d = p.dim();
    let mut notes = Vec::new();

    let estimate: Vec<(Vec<f64>, llweak::Matrix)> = if cfg.propagate {
        if scheme != SchemeKind::Llweak {
            return Err(CliError::Unsupported(
                "--propagate applies to the llweak scheme only".into(),
            ));
        }
        moment_propagate(p, &grid)?
            .into_iter()
            .map(|m| {
                let v = m.covariance();
                (m.mean, v)
            })
            .collect()
    } else {
        if scheme == SchemeKind::EulerRomberg {
            return Err(CliError::Unsupported(
                "euler-romberg extrapolates functionals, not per-node moments".into(),
            ));
        }
        let kernel = Kernel::new(&named, scheme, &grid)?;
        let spec = EnsembleSpec {
            seed: cfg.seed,
            tag: stream_tag(Role::for_scheme(scheme), 0),
        };
        let m = single(&cfg.samples, "sample size")?;
        let (est, overflow) = ensemble_moments(runner, &kernel, &grid, &p.x0(), m, spec)?;
        if overflow > 0 {
            notes.push(format!("{overflow} of {m} paths overflowed and were excluded"));
        }
        est.nodes.into_iter().map(|n| (n.mean, n.variance)).collect()
    };

    let mut header = vec!["t".to_string()];
    header.extend(moment_columns("exact", d));
    header.extend(moment_columns("estimate", d));
    let mut table = Table::new(header);
    for ((t, ex), (mean, var)) in grid.nodes().iter().zip(&exact).zip(&estimate) {
        let mut row = vec![fmt_f64(*t)];
        push_moments(&mut row, &ex.mean, &ex.covariance());
        push_moments(&mut row, mean, var);
        table.push(row);
    }

    let label = if cfg.propagate {
        "propagated"
    } else {
        scheme.as_str()
    };
    let mut charts = Vec::new();
    for i in 0..d {
        let ts = grid.nodes();
        charts.push((
            format!("mean{}", i + 1),
            Chart {
                title: format!("{}: mean of component {}", named.name(), i + 1),
                x_label: "t".into(),
                y_label: format!("m{}", i + 1),
                log_log: false,
                series: vec![
                    Series::line(
                        "exact",
                        ts.iter().zip(&exact).map(|(t, m)| (*t, m.mean[i])).collect(),
                    ),
                    Series::markers(
                        label,
                        ts.iter().zip(&estimate).map(|(t, e)| (*t, e.0[i])).collect(),
                    ),
                ],
            },
        ));
        charts.push((
            format!("var{}", i + 1),
            Chart {
                title: format!("{}: variance of component {}", named.name(), i + 1),
                x_label: "t".into(),
                y_label: format!("v{}{}", i + 1, i + 1),
                log_log: false,
                series: vec![
                    Series::line(
                        "exact",
                        ts.iter()
                            .zip(&exact)
                            .map(|(t, m)| (*t, m.covariance()[(i, i)]))
                            .collect(),
                    ),
                    Series::markers(
                        label,
                        ts.iter().zip(&estimate).map(|(t, e)| (*t, e.1[(i, i)])).collect(),
                    ),
                ],
            },
        ));
    }
    Ok(Output { table, charts, notes })
}

/// Monte Carlo errors against closed-form moments for a list of sample
/// sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTableReport {
    pub samples: Vec<usize>,
    /// `scheme_max[k][l]`: max over nodes of the scheme-ensemble error `l`
    /// at `samples[k]`.
    pub scheme_max: Vec<Vec<f64>>,
    /// Same for the exact-solution ensemble.
    pub exact_max: Vec<Vec<f64>>,
    /// `arctan[k][l]`: relative arctan-functional difference, component `l`.
    pub arctan: Vec<Vec<f64>>,
    /// Per error type; present when at least two sample sizes were run.
    pub gamma_scheme: Option<Vec<GammaFit>>,
    pub gamma_exact: Option<Vec<GammaFit>>,
    pub overflow: Vec<usize>,
}

fn gamma_per_type(samples: &[usize], per_node: &[Vec<Vec<f64>>], types: usize) -> Result<Vec<GammaFit>> {
    (0..types)
        .map(|l| {
            // node 0 is the deterministic initial state; skip it
            let errors: Vec<Vec<f64>> = per_node
                .iter()
                .map(|nodes| nodes.iter().skip(1).map(|e| e[l]).collect())
                .collect();
            Ok(fit_gamma(samples, &errors)?)
        })
        .collect()
}

pub fn error_table_data(cfg: &ExperimentConfig, runner: &Runner) -> Result<ErrorTableReport> {
    let named = cfg.named_problem()?;
    let p = named.problem();
    let grid = grid_for(p, single(&cfg.delta, "delta")?)?;
    let scheme = single(&cfg.scheme, "scheme")?;
    if scheme == SchemeKind::EulerRomberg {
        return Err(CliError::Unsupported(
            "euler-romberg has no per-node moments".into(),
        ));
    }
    let exact = exact_curve(&named, &grid)?;
    let reference_kernel = Kernel::new(&named, SchemeKind::Exact, &grid)?;
    let scheme_kernel = Kernel::new(&named, scheme, &grid)?;
    let x0 = p.x0();
    let d = p.dim();

    let mut report = ErrorTableReport {
        samples: cfg.samples.clone(),
        scheme_max: Vec::new(),
        exact_max: Vec::new(),
        arctan: Vec::new(),
        gamma_scheme: None,
        gamma_exact: None,
        overflow: Vec::new(),
    };
    let mut scheme_nodes = Vec::new();
    let mut exact_nodes = Vec::new();
    for (slot, &m) in cfg.samples.iter().enumerate() {
        let reference_spec = EnsembleSpec {
            seed: cfg.seed,
            tag: stream_tag(Role::Reference, slot),
        };
        let scheme_spec = EnsembleSpec {
            seed: cfg.seed,
            tag: stream_tag(Role::for_scheme(scheme), slot),
        };
        let (reference, _) = ensemble_moments(runner, &reference_kernel, &grid, &x0, m, reference_spec)?;
        let (est, overflow): (EnsembleMoments, usize) =
            ensemble_moments(runner, &scheme_kernel, &grid, &x0, m, scheme_spec)?;
        let st = error_table(&est, &exact)?;
        let rt = error_table(&reference, &exact)?;
        report.arctan.push(
            (0..d)
                .map(|l| arctan_functional_error(&reference, &est, l))
                .collect::<llweak::Result<Vec<f64>>>()?,
        );
        report.scheme_max.push(st.max);
        report.exact_max.push(rt.max);
        report.overflow.push(overflow);
        scheme_nodes.push(st.per_node);
        exact_nodes.push(rt.per_node);
    }
    if cfg.samples.len() >= 2 {
        let types = error_count(d);
        report.gamma_scheme = Some(gamma_per_type(&cfg.samples, &scheme_nodes, types)?);
        report.gamma_exact = Some(gamma_per_type(&cfg.samples, &exact_nodes, types)?);
    }
    Ok(report)
}

/// Long format: `section,statistic,samples,value`.
pub fn error_table_output(report: &ErrorTableReport) -> Output {
    let mut table = Table::new(["section", "statistic", "samples", "value"]);
    let mut row = |section: &str, stat: String, samples: String, value: f64| {
        table.push(vec![section.into(), stat, samples, fmt_f64(value)]);
    };
    for (k, &m) in report.samples.iter().enumerate() {
        for (l, e) in report.scheme_max[k].iter().enumerate() {
            row("scheme_error", format!("e{}", l + 1), m.to_string(), *e);
        }
        for (l, e) in report.exact_max[k].iter().enumerate() {
            row("exact_error", format!("e{}", l + 1), m.to_string(), *e);
        }
        for (l, r) in report.arctan[k].iter().enumerate() {
            row("arctan_relative", format!("r{}", l + 1), m.to_string(), *r);
        }
        row(
            "overflow",
            "count".into(),
            m.to_string(),
            report.overflow[k] as f64,
        );
    }
    for (name, fits) in [("scheme", &report.gamma_scheme), ("exact", &report.gamma_exact)] {
        for (l, g) in fits.iter().flatten().enumerate() {
            row(
                &format!("gamma_mean_{name}"),
                format!("e{}", l + 1),
                String::new(),
                g.mean,
            );
            row(
                &format!("gamma_std_{name}"),
                format!("e{}", l + 1),
                String::new(),
                g.std,
            );
        }
    }

    let sizes: Vec<f64> = report.samples.iter().map(|m| *m as f64).collect();
    let types = report.scheme_max.first().map_or(0, Vec::len);
    let mut charts = Vec::new();
    for (name, data) in [("scheme", &report.scheme_max), ("exact", &report.exact_max)] {
        charts.push((
            format!("errors-{name}"),
            Chart {
                title: format!("max error vs samples ({name} ensemble)"),
                x_label: "M".into(),
                y_label: "error".into(),
                log_log: true,
                series: (0..types)
                    .map(|l| {
                        Series::line(
                            format!("e{}", l + 1),
                            sizes.iter().zip(data).map(|(m, e)| (*m, e[l])).collect(),
                        )
                    })
                    .collect(),
            },
        ));
    }
    Output {
        table,
        charts,
        notes: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub scheme: SchemeKind,
    pub delta: f64,
    /// Batch-means estimate of `E phi(X_T) - E phi(z_N)`; `value` is NaN
    /// when fewer than two batches had a usable mean.
    pub estimate: McEstimate,
}

fn squared_norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

/// Mean error of `E|z_N|²` per scheme and step size.
pub fn convergence_data(cfg: &ExperimentConfig, runner: &Runner) -> Result<Vec<ConvergenceRow>> {
    let named = cfg.named_problem()?;
    let p = named.problem();
    let exact = p.exact_mean_square(p.t_end()).ok_or_else(|| {
        CliError::Unsupported(format!("problem {} has no closed-form E|X_T|^2", named.name()))
    })?;
    if cfg.batches < 2 {
        return Err(CliError::Config("convergence needs at least 2 batches".into()));
    }
    let m = single(&cfg.samples, "sample size")?;
    let k = cfg.batches;
    let x0 = p.x0();
    let mut rows = Vec::new();
    for &scheme in &cfg.scheme {
        for (slot, &delta) in cfg.delta.iter().enumerate() {
            let run = |kind: SchemeKind, role: Role, delta: f64| -> Result<_> {
                let grid = grid_for(p, delta)?;
                let kernel = Kernel::new(&named, kind, &grid)?;
                let spec = EnsembleSpec {
                    seed: cfg.seed,
                    tag: stream_tag(role, slot),
                };
                terminal_batches(runner, &kernel, &grid, &x0, k, m, spec, &squared_norm)
            };
            let coarse = run(scheme, Role::for_scheme(scheme), delta)?;
            let mut overflow: usize = coarse.iter().map(|b| b.overflowed).sum();
            let errors: Vec<f64> = if scheme == SchemeKind::EulerRomberg {
                let fine = run(scheme, Role::EulerFine, 0.5 * delta)?;
                overflow += fine.iter().map(|b| b.overflowed).sum::<usize>();
                coarse
                    .iter()
                    .zip(&fine)
                    .filter_map(|(c, f)| {
                        let c = FunctionalEstimate {
                            value: c.mean()?,
                            step: delta,
                        };
                        let f = FunctionalEstimate {
                            value: f.mean()?,
                            step: 0.5 * delta,
                        };
                        Some(romberg_estimate(c, f).map(|r| exact - r.value))
                    })
                    .collect::<llweak::Result<_>>()?
            } else {
                coarse
                    .iter()
                    .filter_map(|b| b.mean())
                    .map(|v| exact - v)
                    .collect()
            };
            let estimate = if errors.len() >= 2 {
                functional_error(&errors, CONFIDENCE_ALPHA, m, overflow)?
            } else {
                McEstimate {
                    value: f64::NAN,
                    std_error: f64::NAN,
                    half_width: f64::NAN,
                    batches: errors.len(),
                    batch_size: m,
                    overflow_count: overflow,
                }
            };
            rows.push(ConvergenceRow {
                scheme,
                delta,
                estimate,
            });
        }
    }
    Ok(rows)
}

pub fn convergence_output(rows: &[ConvergenceRow]) -> Output {
    let mut table = Table::new([
        "scheme",
        "delta",
        "error",
        "half_width",
        "std_error",
        "batches",
        "batch_size",
        "overflow_count",
    ]);
    for r in rows {
        let e = &r.estimate;
        table.push(vec![
            r.scheme.as_str().into(),
            fmt_f64(r.delta),
            fmt_f64(e.value),
            fmt_f64(e.half_width),
            fmt_f64(e.std_error),
            e.batches.to_string(),
            e.batch_size.to_string(),
            e.overflow_count.to_string(),
        ]);
    }
    let mut schemes: Vec<SchemeKind> = rows.iter().map(|r| r.scheme).collect();
    schemes.dedup();
    let chart = Chart {
        title: "|mean error of E|z_N|^2| vs step size".into(),
        x_label: "delta".into(),
        y_label: "|error|".into(),
        log_log: true,
        series: schemes
            .iter()
            .map(|s| {
                Series::line(
                    s.as_str(),
                    rows.iter()
                        .filter(|r| r.scheme == *s)
                        .map(|r| (r.delta, r.estimate.value.abs()))
                        .collect(),
                )
            })
            .collect(),
    };
    let notes = rows
        .iter()
        .filter(|r| r.estimate.overflow_count > 0)
        .map(|r| {
            format!(
                "{} at delta {}: {} paths overflowed and were excluded",
                r.scheme.as_str(),
                r.delta,
                r.estimate.overflow_count
            )
        })
        .collect();
    Output {
        table,
        charts: vec![("convergence".into(), chart)],
        notes,
    }
}

/// Individual sample paths in long format: `path,step,t,x_1..x_d`.
pub fn simulate_report(cfg: &ExperimentConfig, runner: &Runner) -> Result<Output> {
    let named = cfg.named_problem()?;
    let p = named.problem();
    let grid = grid_for(p, single(&cfg.delta, "delta")?)?;
    let scheme = single(&cfg.scheme, "scheme")?;
    let kind = if scheme == SchemeKind::EulerRomberg {
        SchemeKind::Euler
    } else {
        scheme
    };
    let kernel = Kernel::new(&named, kind, &grid)?;
    let m = single(&cfg.samples, "sample size")?;
    let spec = EnsembleSpec {
        seed: cfg.seed,
        tag: stream_tag(Role::for_scheme(kind), 0),
    };
    let paths = sample_paths(runner, &kernel, &grid, &p.x0(), m, spec)?;
    let d = p.dim();
    let mut header = vec!["path".to_string(), "step".into(), "t".into()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    let mut table = Table::new(header);
    let mut notes = Vec::new();
    let mut series = Vec::new();
    for (i, (path, done)) in paths.iter().enumerate() {
        if !done {
            notes.push(format!("path {i} overflowed after {} steps", path.len() - 1));
        }
        for (n, z) in path.iter().enumerate() {
            let mut row = vec![i.to_string(), n.to_string(), fmt_f64(grid.nodes()[n])];
            row.extend(z.iter().map(|v| fmt_f64(*v)));
            table.push(row);
        }
        if i < 6 {
            series.push(Series::line(
                format!("path {i}"),
                path.iter()
                    .enumerate()
                    .map(|(n, z)| (grid.nodes()[n], z[0]))
                    .collect(),
            ));
        }
    }
    let chart = Chart {
        title: format!("{} sample paths ({})", named.name(), kind.as_str()),
        x_label: "t".into(),
        y_label: "x_1".into(),
        log_log: false,
        series,
    };
    Ok(Output {
        table,
        charts: vec![("paths".into(), chart)],
        notes,
    })
}

fn chart_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}-{suffix}.svg"))
}

/// Writes the CSV to `cfg.out` (or `stdout`) and, with `emit_plots`, each
/// chart next to it as `<stem>-<suffix>.svg`. Returns the SVG paths.
pub fn emit(cfg: &ExperimentConfig, output: &Output, stdout: &mut dyn Write) -> Result<Vec<PathBuf>> {
    match &cfg.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
            output.table.write(std::io::BufWriter::new(file))?;
        }
        None => output.table.write(&mut *stdout)?,
    }
    let mut written = Vec::new();
    if cfg.emit_plots {
        let out = cfg
            .out
            .as_ref()
            .ok_or_else(|| CliError::Config("--emit-plots needs --out to place the SVG files".into()))?;
        for (suffix, chart) in &output.charts {
            let path = chart_path(out, suffix);
            std::fs::write(&path, chart.render())
                .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(problem: &str) -> ExperimentConfig {
        ExperimentConfig {
            problem: problem.into(),
            threads: Some(2),
            ..Default::default()
        }
    }

    #[test]
    fn chart_paths_sit_next_to_csv() {
        assert_eq!(
            chart_path(Path::new("/tmp/run/table.csv"), "mean1"),
            PathBuf::from("/tmp/run/table-mean1.svg")
        );
    }

    #[test]
    fn propagated_moments_match_exact() {
        let c = ExperimentConfig {
            propagate: true,
            t_end: Some(1.0),
            ..cfg("example1")
        };
        let out = moments_report(&c, &Runner::new(1).unwrap()).unwrap();
        assert_eq!(out.table.rows.len(), 65);
        let last = out.table.rows.last().unwrap();
        for i in 0..6 {
            let (a, b): (f64, f64) = (last[1 + i].parse().unwrap(), last[7 + i].parse().unwrap());
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
        }
    }

    #[test]
    fn moments_need_closed_form() {
        let c = cfg("example2");
        let e = moments_report(&c, &Runner::new(1).unwrap()).unwrap_err();
        assert!(matches!(e, CliError::Config(_) | CliError::Unsupported(_)));
    }

    #[test]
    fn single_path_moments_are_finite() {
        let c = ExperimentConfig {
            samples: vec![1],
            t_end: Some(0.5),
            ..cfg("example1")
        };
        let out = moments_report(&c, &Runner::new(1).unwrap()).unwrap();
        assert!(out
            .table
            .rows
            .iter()
            .flatten()
            .skip(1)
            .all(|v| v.parse::<f64>().map_or(true, f64::is_finite)));
    }

    #[test]
    fn exact_against_exact_gives_zero_arctan_error() {
        let c = ExperimentConfig {
            scheme: vec![SchemeKind::Exact],
            samples: vec![64, 256],
            t_end: Some(0.5),
            ..cfg("example1")
        };
        let r = error_table_data(&c, &Runner::new(2).unwrap()).unwrap();
        assert!(r.arctan.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(r.scheme_max, r.exact_max);
        assert_eq!(r.gamma_scheme.as_ref().unwrap().len(), 5);
    }

    #[test]
    fn convergence_smoke() {
        let c = ExperimentConfig {
            scheme: vec![SchemeKind::Llweak, SchemeKind::EulerRomberg],
            delta: vec![0.5],
            samples: vec![10],
            batches: 2,
            t_end: Some(1.0),
            ..cfg("example2")
        };
        let rows = convergence_data(&c, &Runner::new(2).unwrap()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.estimate.value.is_finite()));
        let out = convergence_output(&rows);
        assert_eq!(out.table.rows.len(), 2);
        assert_eq!(out.table.rows[1][0], "euler-romberg");
    }

    #[test]
    fn convergence_rejects_single_batch() {
        let c = ExperimentConfig {
            batches: 1,
            ..cfg("example2")
        };
        assert!(matches!(
            convergence_data(&c, &Runner::new(1).unwrap()),
            Err(CliError::Config(_))
        ));
    }
}
