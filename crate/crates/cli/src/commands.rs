//! Subcommand implementations: run, analyze, compare.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gdrem_control::excitation::classify_excitation;
use gdrem_control::sim::{run_scenario, EstimatorConfig, ScenarioConfig};
use gdrem_control::trace::Trace;

use crate::config::EstimatorSection;
use crate::csv::{read_trace_csv, write_trace_csv};
use crate::plot::emit_plots;
use crate::{CliError, Result};

/// Tracks written files so a failing command leaves no partial outputs.
struct OutputSet {
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    fn new() -> Self {
        OutputSet {
            written: Vec::new(),
            committed: false,
        }
    }

    fn add(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.written {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn summary_text(cfg: &ScenarioConfig, trace: &Trace) -> String {
    let last = trace.samples.last().expect("non-empty trace");
    let sup_eref = trace
        .samples
        .iter()
        .map(|s| s.e_ref.norm())
        .fold(0.0f64, f64::max);
    let mut s = String::new();
    let _ = writeln!(s, "run summary: {}", cfg.label);
    let _ = writeln!(s, "  estimator: {}", cfg.estimator.kind().name());
    let _ = writeln!(s, "  dims (n, m, p): {:?}", cfg.system.dims);
    let _ = writeln!(s, "  dt: {}, t_final: {}, samples: {}", cfg.dt, cfg.t_final, trace.len());
    let _ = writeln!(s, "  final ||e_ref||: {:.6e}", last.e_ref.norm());
    let _ = writeln!(s, "  final ||theta_hat - Theta||: {:.6e}", last.norm_theta_cap_err);
    let _ = writeln!(s, "  final ||theta_hat - theta||: {:.6e}", last.norm_theta_err);
    let _ = writeln!(s, "  sup ||e_ref||: {:.6e}", sup_eref);
    let _ = writeln!(s, "  final omega: {:.6e}, final rank: {}", last.omega, last.rank);
    s
}

/// `run`: simulate one scenario; write CSV, summary and plots.
pub fn run(cfg: &ScenarioConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_out_dir(out_dir)?;
    let trace = run_scenario(cfg)?;
    let mut outputs = OutputSet::new();

    let csv_path = out_dir.join(format!("{}.csv", cfg.label));
    write_trace_csv(&trace, &csv_path)?;
    outputs.add(csv_path);

    let summary_path = out_dir.join(format!("{}_summary.txt", cfg.label));
    write_text(&summary_path, &summary_text(cfg, &trace))?;
    outputs.add(summary_path);

    for p in emit_plots(&trace, out_dir, &cfg.label)? {
        outputs.add(p);
    }
    Ok(outputs.commit())
}

/// `analyze`: excitation report for an existing trace CSV.
pub fn analyze(trace_path: &Path, window_t: f64, level_threshold: f64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_out_dir(out_dir)?;
    let csv = read_trace_csv(trace_path)?;
    // the recorded omega and the estimator's switch threshold drive kT
    let omega_threshold = level_threshold.powi(csv.p as i32);
    let report = classify_excitation(
        &csv.times,
        &csv.phi_bars,
        window_t,
        level_threshold,
        Some((&csv.omega, omega_threshold)),
    )?;
    let stem = trace_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trace");
    let mut outputs = OutputSet::new();
    let report_path = out_dir.join(format!("{stem}_excitation.txt"));
    write_text(&report_path, &report.to_string())?;
    outputs.add(report_path);
    println!("{report}");
    Ok(outputs.commit())
}

/// Parse `--estimators gdrem,rls` into estimator configurations with the
/// documented default gains.
pub fn parse_estimators(list: &str) -> Result<Vec<EstimatorConfig>> {
    let mut out = Vec::new();
    for key in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let cfg = match key {
            "gdrem" => EstimatorConfig::Gdrem {
                gamma0: 10.0,
                gamma1: 1.0,
            },
            "gradient" => EstimatorConfig::Gradient {
                gain: EstimatorSection::DEFAULT_GRADIENT_GAIN,
            },
            "rls" => EstimatorConfig::Rls {
                gain0: EstimatorSection::DEFAULT_RLS_GAIN0,
                lambda_f: EstimatorSection::DEFAULT_RLS_LAMBDA_F,
            },
            "drem" => EstimatorConfig::Drem {
                gamma: EstimatorSection::DEFAULT_DREM_GAMMA,
            },
            other => {
                return Err(CliError::Config(format!(
                    "unknown estimator {other:?} (expected gdrem, gradient, rls or drem)"
                )))
            }
        };
        if out
            .iter()
            .any(|e: &EstimatorConfig| e.kind() == cfg.kind())
        {
            return Err(CliError::Config(format!("duplicate estimator {key:?}")));
        }
        out.push(cfg);
    }
    if out.is_empty() {
        return Err(CliError::Config("--estimators list is empty".into()));
    }
    Ok(out)
}

/// `compare`: run the scenario once per estimator; one CSV each plus a
/// joined summary of the final error norms.
pub fn compare(
    base: &ScenarioConfig,
    estimators: &[EstimatorConfig],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    ensure_out_dir(out_dir)?;
    let mut outputs = OutputSet::new();
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "comparison: {} (dt = {}, t_final = {})",
        base.label, base.dt, base.t_final
    );
    let _ = writeln!(
        summary,
        "{:<10} {:>16} {:>20} {:>20}",
        "estimator", "final ||e_ref||", "final ||Theta_err||", "final ||theta_err||"
    );
    for est in estimators {
        let mut cfg = base.clone();
        cfg.estimator = *est;
        cfg.label = format!("{}_{}", base.label, est.kind().name());
        let trace = run_scenario(&cfg)?;
        let csv_path = out_dir.join(format!("{}.csv", cfg.label));
        write_trace_csv(&trace, &csv_path)?;
        outputs.add(csv_path);
        let last = trace.samples.last().expect("non-empty trace");
        let _ = writeln!(
            summary,
            "{:<10} {:>16.6e} {:>20.6e} {:>20.6e}",
            est.kind().name(),
            last.e_ref.norm(),
            last.norm_theta_cap_err,
            last.norm_theta_err
        );
    }
    let summary_path = out_dir.join(format!("{}_compare_summary.txt", base.label));
    write_text(&summary_path, &summary)?;
    outputs.add(summary_path);
    println!("{summary}");
    Ok(outputs.commit())
}
