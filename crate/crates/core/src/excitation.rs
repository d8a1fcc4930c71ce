//! Offline analysis of regressor traces: sliding-window Gram matrices,
//! PE / s-PE classification with rank profiles, and empirical detection of
//! the time after which the scalar-regressor floor holds.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sym_eig;

/// Per-window record of the classification.
#[derive(Debug, Clone)]
pub struct WindowRecord {
    pub t_start: f64,
    /// Gram eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Count of eigenvalues at or above the level threshold.
    pub rank: usize,
}

/// Global excitation verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// Every window has full rank at the threshold.
    Pe,
    /// Every window has rank >= 1; the per-window rank profile is reported.
    SemiPe { rank_profile: Vec<usize> },
    /// Some window has rank 0.
    None,
}

/// Result of classifying a regressor trace.
#[derive(Debug, Clone)]
pub struct ExcitationReport {
    pub window_t: f64,
    pub level_threshold: f64,
    pub windows: Vec<WindowRecord>,
    pub verdict: Verdict,
    /// (alpha_lower, alpha_upper): min qualifying eigenvalue and max observed
    /// eigenvalue over windows.
    pub alpha_bounds: (f64, f64),
    pub kt_estimate: Option<f64>,
}

impl fmt::Display for ExcitationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "excitation report")?;
        writeln!(f, "  window T: {}", self.window_t)?;
        writeln!(f, "  level threshold: {:e}", self.level_threshold)?;
        match &self.verdict {
            Verdict::Pe => writeln!(f, "  verdict: PE")?,
            Verdict::SemiPe { rank_profile } => {
                writeln!(f, "  verdict: s-PE, rank profile {:?}", rank_profile)?
            }
            Verdict::None => writeln!(f, "  verdict: none")?,
        }
        writeln!(
            f,
            "  alpha bounds: [{:.6e}, {:.6e}]",
            self.alpha_bounds.0, self.alpha_bounds.1
        )?;
        match self.kt_estimate {
            Some(t) => writeln!(f, "  kT estimate: {:.6}", t)?,
            None => writeln!(f, "  kT estimate: none")?,
        }
        writeln!(f, "  windows (t_start, rank, eigenvalues):")?;
        for w in &self.windows {
            write!(f, "    {:10.4}  r={}  [", w.t_start, w.rank)?;
            for (i, e) in w.eigenvalues.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:.6e}", e)?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

/// Trapezoid-rule approximation of the window Gram integral
/// `int_{t_start}^{t_start+T} phibar phibar^T dtau` over a uniformly sampled
/// trace of regressor values.
pub fn window_gram(
    times: &[f64],
    phi_bars: &[DVector<f64>],
    t_start: f64,
    window_t: f64,
) -> Result<DMatrix<f64>> {
    if times.len() != phi_bars.len() || times.len() < 2 {
        return Err(Error::Range("window_gram needs at least two samples".into()));
    }
    let t_end = t_start + window_t;
    let eps = 1e-9 * (1.0 + window_t);
    if t_start < times[0] - eps || t_end > times[times.len() - 1] + eps {
        return Err(Error::Range(format!(
            "window [{t_start}, {t_end}] exceeds trace range [{}, {}]",
            times[0],
            times[times.len() - 1]
        )));
    }
    let i0 = times.iter().position(|&t| t >= t_start - eps).unwrap();
    let i1 = times.iter().rposition(|&t| t <= t_end + eps).unwrap();
    if i1 <= i0 {
        return Err(Error::Range("window contains fewer than two samples".into()));
    }
    let p = phi_bars[0].len();
    let mut gram = DMatrix::zeros(p, p);
    for k in i0..i1 {
        let dt = times[k + 1] - times[k];
        let a = &phi_bars[k] * phi_bars[k].transpose();
        let b = &phi_bars[k + 1] * phi_bars[k + 1].transpose();
        gram += 0.5 * dt * (a + b);
    }
    Ok(gram)
}

/// Classify a regressor trace into PE / s-PE / none over tiled windows of
/// length `window_t`, with `omega` optionally supplied for kT detection.
pub fn classify_excitation(
    times: &[f64],
    phi_bars: &[DVector<f64>],
    window_t: f64,
    level_threshold: f64,
    omega: Option<(&[f64], f64)>,
) -> Result<ExcitationReport> {
    if times.is_empty() || phi_bars.is_empty() {
        return Err(Error::Range("empty trace".into()));
    }
    let span = times[times.len() - 1] - times[0];
    if span < 2.0 * window_t {
        return Err(Error::Range(format!(
            "trace span {span} provides fewer than 2 windows of length {window_t}"
        )));
    }
    let p = phi_bars[0].len();
    let n_windows = (span / window_t).floor() as usize;
    let mut windows = Vec::with_capacity(n_windows);
    let mut alpha_lo = f64::INFINITY;
    let mut alpha_hi = 0.0f64;
    for w in 0..n_windows {
        let t_start = times[0] + w as f64 * window_t;
        let gram = window_gram(times, phi_bars, t_start, window_t)?;
        let eig = sym_eig(&gram, level_threshold)?;
        let eigenvalues: Vec<f64> = eig.lambdas.iter().copied().collect();
        let rank = eig.rank;
        if rank > 0 {
            alpha_lo = alpha_lo.min(eigenvalues[rank - 1]);
        }
        alpha_hi = alpha_hi.max(eigenvalues[0]);
        windows.push(WindowRecord {
            t_start,
            eigenvalues,
            rank,
        });
    }
    let verdict = if windows.iter().all(|w| w.rank == p) {
        Verdict::Pe
    } else if windows.iter().all(|w| w.rank >= 1) {
        Verdict::SemiPe {
            rank_profile: windows.iter().map(|w| w.rank).collect(),
        }
    } else {
        Verdict::None
    };
    if !alpha_lo.is_finite() {
        alpha_lo = 0.0;
    }
    let kt_estimate = omega.and_then(|(om, thr)| detect_kt(times, om, thr, window_t));
    Ok(ExcitationReport {
        window_t,
        level_threshold,
        windows,
        verdict,
        alpha_bounds: (alpha_lo, alpha_hi),
        kt_estimate,
    })
}

/// Earliest time after which omega stays at or above the gain-switch
/// threshold through the end of the trace, provided that tail is at least one
/// window long. The excitation guarantee is existential in the window count,
/// so the detector keys on the last up-crossing rather than the first.
pub fn detect_kt(times: &[f64], omega: &[f64], threshold: f64, window_t: f64) -> Option<f64> {
    if times.len() != omega.len() || times.is_empty() {
        return None;
    }
    let last_below = omega.iter().rposition(|&o| o < threshold);
    let start_idx = match last_below {
        Some(i) if i + 1 >= times.len() => return None,
        Some(i) => i + 1,
        None => 0,
    };
    let t_star = times[start_idx];
    if times[times.len() - 1] - t_star >= window_t {
        Some(t_star)
    } else {
        None
    }
}

/// Count of regressor eigenvalues at or above the clipping threshold: the
/// online piecewise-constant rank profile.
pub fn regressor_rank(decomposition: &crate::linalg::SymEig, eps_bar: f64) -> usize {
    decomposition.lambdas.iter().filter(|&&l| l >= eps_bar).count()
}
