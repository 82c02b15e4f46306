//! Uniform 1D cell-centered grids and grid functions.

use crate::error::{Error, Result};

/// A uniform 1D interval split into cells, optionally periodic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub periodic: bool,
}

impl Domain1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize, periodic: bool) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "domain bounds [{x_min}, {x_max}] invalid"
            )));
        }
        if n_cells < 2 {
            return Err(Error::InvalidConfig(format!(
                "domain needs at least 2 cells, got {n_cells}"
            )));
        }
        Ok(Domain1D {
            x_min,
            x_max,
            n_cells,
            periodic,
        })
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_cells as f64
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.cell_center(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Map x into [x_min, x_max) by periodic wrapping.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.length();
        let mut y = (x - self.x_min) % l;
        if y < 0.0 {
            y += l;
        }
        self.x_min + y
    }
}

/// A grid function sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub domain: Domain1D,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: Domain1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.n_cells {
            return Err(Error::InvalidConfig(format!(
                "field has {} values for {} cells",
                values.len(),
                domain.n_cells
            )));
        }
        Ok(ScalarField { domain, values })
    }

    pub fn from_fn(domain: Domain1D, f: impl Fn(f64) -> f64) -> Self {
        let values = domain.centers().iter().map(|&x| f(x)).collect();
        ScalarField { domain, values }
    }

    pub fn constant(domain: Domain1D, c: f64) -> Self {
        ScalarField {
            domain,
            values: vec![c; domain.n_cells],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear interpolation between cell centers. Periodic domains wrap;
    /// bounded domains clamp to the end cell values.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let dx = self.domain.dx();
        if self.domain.periodic {
            let y = self.domain.wrap(x);
            let s = (y - self.domain.x_min) / dx - 0.5;
            let i0 = s.floor();
            let w = s - i0;
            let i = i0.rem_euclid(n as f64) as usize % n;
            let j = (i + 1) % n;
            self.values[i] * (1.0 - w) + self.values[j] * w
        } else {
            let s = (x - self.domain.x_min) / dx - 0.5;
            if s <= 0.0 {
                return self.values[0];
            }
            if s >= (n - 1) as f64 {
                return self.values[n - 1];
            }
            let i = s.floor() as usize;
            let w = s - i as f64;
            self.values[i] * (1.0 - w) + self.values[i + 1] * w
        }
    }

    /// Total mass of the field as a cell-averaged density.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.domain.dx()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Index of the maximal value (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Mean and variance of the position weighted by the field values.
    pub fn position_moments(&self) -> (f64, f64) {
        let total: f64 = self.values.iter().sum();
        if total == 0.0 {
            return (f64::NAN, f64::NAN);
        }
        let mut mean = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            mean += self.domain.cell_center(i) * v;
        }
        mean /= total;
        let mut var = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            let d = self.domain.cell_center(i) - mean;
            var += d * d * v;
        }
        (mean, var / total)
    }

    /// Standard deviation of the values around their spatial mean,
    /// relative to that mean.
    pub fn relative_std(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        if mean == 0.0 {
            return f64::NAN;
        }
        let var = self
            .values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        var.sqrt() / mean.abs()
    }
}
