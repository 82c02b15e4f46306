//! External signal fields: the chemoattractant-like landscape sensed by the
//! cells, together with its gradient and characteristic variation length.

use crate::error::{Error, Result};
use crate::grid::{Domain1D, ScalarField};

/// A strictly positive signal landscape S(x).
#[derive(Debug, Clone, PartialEq)]
pub enum SignalField {
    Constant {
        value: f64,
    },
    Gaussian {
        amplitude: f64,
        center: f64,
        sigma: f64,
    },
    /// Sum of two Gaussian modes.
    Bimodal {
        amplitude1: f64,
        center1: f64,
        sigma1: f64,
        amplitude2: f64,
        center2: f64,
        sigma2: f64,
    },
    /// Grid samples, linearly interpolated, clamped outside the sample range.
    Sampled(ScalarField),
}

impl SignalField {
    pub fn gaussian(amplitude: f64, center: f64, sigma: f64) -> Self {
        SignalField::Gaussian {
            amplitude,
            center,
            sigma,
        }
    }

    pub fn bimodal(a1: f64, c1: f64, s1: f64, a2: f64, c2: f64, s2: f64) -> Self {
        SignalField::Bimodal {
            amplitude1: a1,
            center1: c1,
            sigma1: s1,
            amplitude2: a2,
            center2: c2,
            sigma2: s2,
        }
    }

    fn raw_eval(&self, x: f64) -> f64 {
        match *self {
            SignalField::Constant { value } => value,
            SignalField::Gaussian {
                amplitude,
                center,
                sigma,
            } => gauss(x, amplitude, center, sigma),
            SignalField::Bimodal {
                amplitude1,
                center1,
                sigma1,
                amplitude2,
                center2,
                sigma2,
            } => gauss(x, amplitude1, center1, sigma1) + gauss(x, amplitude2, center2, sigma2),
            SignalField::Sampled(ref f) => f.eval(x),
        }
    }

    /// Evaluate S(x); errors if the result is not strictly positive.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let v = self.raw_eval(x);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidSignal { x, value: v })
        }
    }

    /// Spatial gradient; analytic for the closed forms, central differences
    /// on the sample grid for sampled signals.
    pub fn gradient(&self, x: f64) -> f64 {
        match *self {
            SignalField::Constant { .. } => 0.0,
            SignalField::Gaussian {
                amplitude,
                center,
                sigma,
            } => -(x - center) / (sigma * sigma) * gauss(x, amplitude, center, sigma),
            SignalField::Bimodal {
                amplitude1,
                center1,
                sigma1,
                amplitude2,
                center2,
                sigma2,
            } => {
                -(x - center1) / (sigma1 * sigma1) * gauss(x, amplitude1, center1, sigma1)
                    - (x - center2) / (sigma2 * sigma2) * gauss(x, amplitude2, center2, sigma2)
            }
            SignalField::Sampled(ref f) => {
                let h = f.domain.dx();
                (f.eval(x + h) - f.eval(x - h)) / (2.0 * h)
            }
        }
    }
}

fn gauss(x: f64, amplitude: f64, center: f64, sigma: f64) -> f64 {
    let z = (x - center) / sigma;
    amplitude * (-0.5 * z * z).exp()
}

/// Characteristic variation length of the signal over the domain:
/// 1 / max_x |S'(x)|/S(x), the maximum taken over cell centers.
/// A spatially constant signal returns +infinity.
pub fn signal_variation_length(signal: &SignalField, dom: &Domain1D) -> Result<f64> {
    let mut max_rel = 0.0f64;
    for x in dom.centers() {
        let s = signal.eval(x)?;
        let rel = (signal.gradient(x) / s).abs();
        max_rel = max_rel.max(rel);
    }
    if max_rel == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(1.0 / max_rel)
    }
}
