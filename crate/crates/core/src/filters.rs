//! First-order stable filter states for the operator 1/(p + k0)[.] and the
//! l-gain filters of the parametrization. Filters never self-integrate: they
//! only provide right-hand sides, so all dynamics live in one integrator.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Matrix-valued first-order low-pass filter state.
#[derive(Debug, Clone)]
pub struct FirstOrderFilter {
    gain: f64,
    state: DMatrix<f64>,
    initial_state: DMatrix<f64>,
}

impl FirstOrderFilter {
    /// Zero-initialized filter of the given shape. `gain` must be positive.
    pub fn zeroed(gain: f64, rows: usize, cols: usize) -> Result<Self> {
        Self::with_initial_state(gain, DMatrix::zeros(rows, cols))
    }

    pub fn with_initial_state(gain: f64, initial_state: DMatrix<f64>) -> Result<Self> {
        if gain <= 0.0 {
            return Err(Error::Config(format!(
                "filter gain must be positive, got {gain}"
            )));
        }
        Ok(Self {
            gain,
            state: initial_state.clone(),
            initial_state,
        })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn state(&self) -> &DMatrix<f64> {
        &self.state
    }

    pub fn initial_state(&self) -> &DMatrix<f64> {
        &self.initial_state
    }

    /// Replace the state with an externally integrated value of the same shape.
    pub fn set_state(&mut self, state: DMatrix<f64>) -> Result<()> {
        if state.shape() != self.state.shape() {
            return Err(Error::shape(
                "FirstOrderFilter::set_state",
                format!("{:?}", self.state.shape()),
                format!("{:?}", state.shape()),
            ));
        }
        self.state = state;
        Ok(())
    }

    /// d(state)/dt = -gain * state + input.
    pub fn derivative(&self, input: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if input.shape() != self.state.shape() {
            return Err(Error::shape(
                "filter_derivative",
                format!("{:?}", self.state.shape()),
                format!("{:?}", input.shape()),
            ));
        }
        Ok(-self.gain * &self.state + input)
    }
}

/// Stateless form of the same right-hand side, used where the integrator
/// owns the state directly.
pub fn filter_rhs(gain: f64, state: &DMatrix<f64>, input: &DMatrix<f64>) -> DMatrix<f64> {
    -gain * state + input
}
