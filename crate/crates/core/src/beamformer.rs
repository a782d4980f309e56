//! Hybrid beamformer `c = F v`.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::upa::{phase_0_2pi, CMatrix, CVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    /// `M × N` analog matrix with equal-gain columns.
    pub analog: CMatrix,
    pub baseband: CVector,
    pub composite: CVector,
    /// Analog phases were rounded to `Z_{2^B}`.
    pub quantized: bool,
    /// The baseband solve needed a ridge term (near-duplicate analog columns).
    pub regularized: bool,
}

impl Beamformer {
    pub fn new(analog: CMatrix, baseband: CVector, quantized: bool) -> Result<Self> {
        if analog.ncols() != baseband.len() {
            return Err(Error::DimensionMismatch {
                expected: analog.ncols(),
                got: baseband.len(),
            });
        }
        let composite = &analog * &baseband;
        Ok(Beamformer {
            analog,
            baseband,
            composite,
            quantized,
            regularized: false,
        })
    }

    /// A pure analog beamformer: one equal-gain column, unit baseband.
    pub fn analog_only(column: CVector) -> Self {
        let analog = CMatrix::from_columns(std::slice::from_ref(&column));
        Beamformer {
            analog,
            baseband: CVector::from_element(1, Complex64::new(1.0, 0.0)),
            composite: column,
            quantized: false,
            regularized: false,
        }
    }

    pub fn m(&self) -> usize {
        self.analog.nrows()
    }

    pub fn n_rf(&self) -> usize {
        self.analog.ncols()
    }

    /// Largest deviation of any analog entry magnitude from `1/√M`.
    pub fn equal_gain_error(&self) -> f64 {
        let target = 1.0 / (self.m() as f64).sqrt();
        self.analog
            .iter()
            .map(|z| (z.norm() - target).abs())
            .fold(0.0, f64::max)
    }

    /// Largest distance (radians) of any analog phase from the `Z_{2^B}` grid.
    pub fn phase_grid_error(&self, b_phase: u32) -> f64 {
        let step = TAU / (1u64 << b_phase) as f64;
        self.analog
            .iter()
            .map(|z| {
                let x = phase_0_2pi(*z) / step;
                (x - x.round()).abs() * step
            })
            .fold(0.0, f64::max)
    }

    pub fn composite_norm_error(&self) -> f64 {
        (self.composite.norm() - 1.0).abs()
    }
}
