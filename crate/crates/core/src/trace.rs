//! Time-indexed record of all closed-loop signals for analysis and CSV
//! emission. Samples are uniform in time (up to the recording stride) and
//! immutable after a run.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One recorded sample of the closed loop.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub x: DVector<f64>,
    pub x_ref: DVector<f64>,
    pub e_ref: DVector<f64>,
    pub u: DVector<f64>,
    pub u_bl: DVector<f64>,
    pub u_ad: DVector<f64>,
    pub u_nd: DVector<f64>,
    pub phi_bar: DVector<f64>,
    pub z: DVector<f64>,
    pub omega: f64,
    /// Raw eigenvalues of phi, descending.
    pub lambdas: DVector<f64>,
    /// Eigenvalue count at the clipping threshold.
    pub rank: usize,
    pub theta_hat: DMatrix<f64>,
    /// Indistinguishable-parameter ground truth.
    pub theta_cap: DMatrix<f64>,
    pub norm_theta_cap_err: f64,
    pub norm_theta_err: f64,
    pub eps_norm: f64,
    /// Nullspace projector V2 V2^T at this sample (not serialized to CSV).
    pub projector: DMatrix<f64>,
    /// Instantaneous regressor Psi(x, t) (not serialized to CSV).
    pub psi: DVector<f64>,
    /// Ground-truth theta(t) (not serialized to CSV).
    pub theta_true: DMatrix<f64>,
}

/// Immutable run record.
#[derive(Debug, Clone)]
pub struct Trace {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub samples: Vec<Sample>,
}

impl Trace {
    pub fn new(n: usize, m: usize, p: usize) -> Self {
        Self {
            n,
            m,
            p,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if sample.t <= last.t {
                return Err(Error::Range(format!(
                    "trace time must be strictly increasing: {} after {}",
                    sample.t, last.t
                )));
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn t_first(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t)
    }

    pub fn t_last(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    /// Index of the first sample with t >= the given time.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        self.samples.iter().position(|s| s.t >= t)
    }

    /// All sample values are finite.
    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|s| {
            s.t.is_finite()
                && s.omega.is_finite()
                && s.x.iter().all(|v| v.is_finite())
                && s.x_ref.iter().all(|v| v.is_finite())
                && s.u.iter().all(|v| v.is_finite())
                && s.theta_hat.iter().all(|v| v.is_finite())
                && s.lambdas.iter().all(|v| v.is_finite())
        })
    }

    /// CSV column names as a pure function of (n, m, p).
    pub fn csv_header(n: usize, m: usize, p: usize) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        let push_vec = |cols: &mut Vec<String>, base: &str, count: usize| {
            for i in 1..=count {
                cols.push(format!("{base}{i}"));
            }
        };
        push_vec(&mut cols, "x", n);
        push_vec(&mut cols, "xref", n);
        push_vec(&mut cols, "eref", n);
        push_vec(&mut cols, "u", m);
        push_vec(&mut cols, "u_bl", m);
        push_vec(&mut cols, "u_ad", m);
        push_vec(&mut cols, "u_nd", m);
        push_vec(&mut cols, "phibar", p);
        push_vec(&mut cols, "z", m);
        cols.push("omega".to_string());
        push_vec(&mut cols, "lambda", p);
        cols.push("rank".to_string());
        for i in 1..=p {
            for j in 1..=m {
                cols.push(format!("thetahat_{i}_{j}"));
            }
        }
        for i in 1..=p {
            for j in 1..=m {
                cols.push(format!("Theta_{i}_{j}"));
            }
        }
        cols.push("norm_Theta_err".to_string());
        cols.push("norm_theta_err".to_string());
        cols.push("eps_norm".to_string());
        cols
    }

    /// Values of one sample in CSV column order.
    pub fn csv_row(&self, s: &Sample) -> Vec<f64> {
        let mut row = vec![s.t];
        row.extend(s.x.iter());
        row.extend(s.x_ref.iter());
        row.extend(s.e_ref.iter());
        row.extend(s.u.iter());
        row.extend(s.u_bl.iter());
        row.extend(s.u_ad.iter());
        row.extend(s.u_nd.iter());
        row.extend(s.phi_bar.iter());
        row.extend(s.z.iter());
        row.push(s.omega);
        row.extend(s.lambdas.iter());
        row.push(s.rank as f64);
        for i in 0..self.p {
            for j in 0..self.m {
                row.push(s.theta_hat[(i, j)]);
            }
        }
        for i in 0..self.p {
            for j in 0..self.m {
                row.push(s.theta_cap[(i, j)]);
            }
        }
        row.push(s.norm_theta_cap_err);
        row.push(s.norm_theta_err);
        row.push(s.eps_norm);
        row
    }
}
