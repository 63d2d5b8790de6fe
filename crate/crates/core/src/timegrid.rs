//! Uniform grid on the destination-arrival-time axis and the discrete
//! calculus used by every formulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SPAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiffScheme {
    /// `x'[k] = (x[k] - x[k-1]) / dt`, `x'[0] = 0`.
    #[default]
    Backward,
    /// `x'[k] = (x[k+1] - x[k]) / dt`, `x'[K-1] = 0`.
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub k: usize,
    #[serde(default)]
    pub scheme: DiffScheme,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Grid(format!("dt must be positive, got {dt}")));
        }
        if !(t_end > t_start) {
            return Err(Error::Grid(format!(
                "empty window [{t_start}, {t_end}]"
            )));
        }
        let ratio = (t_end - t_start) / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > SPAN_TOL * ratio.max(1.0) {
            return Err(Error::Grid(format!(
                "window length {} is not a multiple of dt = {dt}",
                t_end - t_start
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            dt,
            k: steps as usize + 1,
            scheme: DiffScheme::Backward,
        })
    }

    pub fn with_scheme(mut self, scheme: DiffScheme) -> Self {
        self.scheme = scheme;
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.k).map(|k| self.time(k))
    }

    /// Quadrature weight of step `k` under the left-Riemann rule.
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        if k + 1 < self.k {
            self.dt
        } else {
            0.0
        }
    }

    /// Index of the grid point nearest to `t`, clamped to the grid.
    pub fn index_of(&self, t: f64) -> usize {
        let r = ((t - self.t_start) / self.dt).round();
        r.clamp(0.0, (self.k - 1) as f64) as usize
    }

    pub fn zeros(&self) -> TimeSeries {
        TimeSeries::zeros(self.k)
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            values: self.times().map(f).collect(),
        }
    }

    /// Discrete derivative under the grid's difference scheme.
    pub fn differentiate(&self, x: &TimeSeries) -> Result<TimeSeries> {
        self.check_len(x)?;
        if self.k < 2 {
            return Err(Error::Grid("derivative needs at least two points".into()));
        }
        Ok(TimeSeries {
            values: diff_slice(&x.values, self.dt, self.scheme),
        })
    }

    /// Left-Riemann sum over `k = 0..K-2`.
    pub fn integrate(&self, x: &TimeSeries) -> f64 {
        integrate_slice(&x.values, self.dt)
    }

    fn check_len(&self, x: &TimeSeries) -> Result<()> {
        if x.len() != self.k {
            return Err(Error::Grid(format!(
                "series has {} values, grid has {}",
                x.len(),
                self.k
            )));
        }
        Ok(())
    }
}

pub fn make_grid(t_start: f64, t_end: f64, dt: f64) -> Result<TimeGrid> {
    TimeGrid::new(t_start, t_end, dt)
}

/// Per-step derivative of a raw slice; same rules as
/// [`TimeGrid::differentiate`].
pub fn diff_slice(x: &[f64], dt: f64, scheme: DiffScheme) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    match scheme {
        DiffScheme::Backward => {
            for k in 1..n {
                out[k] = (x[k] - x[k - 1]) / dt;
            }
        }
        DiffScheme::Forward => {
            for k in 0..n.saturating_sub(1) {
                out[k] = (x[k + 1] - x[k]) / dt;
            }
        }
    }
    out
}

pub fn integrate_slice(x: &[f64], dt: f64) -> f64 {
    match x.len() {
        0 | 1 => 0.0,
        n => x[..n - 1].iter().sum::<f64>() * dt,
    }
}

/// Scalar series on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeSeries {
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn zeros(k: usize) -> Self {
        Self { values: vec![0.0; k] }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for TimeSeries {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl std::ops::IndexMut<usize> for TimeSeries {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}

/// A family of series sharing one grid, one per entity (link or origin).
/// Stored entity-major so each entity's history is contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSet {
    pub k: usize,
    pub data: Vec<f64>,
}

impl SeriesSet {
    pub fn zeros(entities: usize, k: usize) -> Self {
        Self {
            k,
            data: vec![0.0; entities * k],
        }
    }

    #[inline]
    pub fn entities(&self) -> usize {
        self.data.len().checked_div(self.k).unwrap_or(0)
    }

    #[inline]
    pub fn get(&self, e: usize, k: usize) -> f64 {
        self.data[e * self.k + k]
    }

    #[inline]
    pub fn set(&mut self, e: usize, k: usize, v: f64) {
        self.data[e * self.k + k] = v;
    }

    #[inline]
    pub fn row(&self, e: usize) -> &[f64] {
        &self.data[e * self.k..(e + 1) * self.k]
    }

    #[inline]
    pub fn row_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.data[e * self.k..(e + 1) * self.k]
    }

    pub fn series(&self, e: usize) -> TimeSeries {
        TimeSeries::from_vec(self.row(e).to_vec())
    }

    pub fn differentiate(&self, grid: &TimeGrid) -> SeriesSet {
        let mut out = SeriesSet::zeros(self.entities(), self.k);
        for e in 0..self.entities() {
            out.row_mut(e)
                .copy_from_slice(&diff_slice(self.row(e), grid.dt, grid.scheme));
        }
        out
    }

    pub fn integrate(&self, grid: &TimeGrid, e: usize) -> f64 {
        integrate_slice(self.row(e), grid.dt)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SeriesSet) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_sizes() {
        assert_eq!(make_grid(0.0, 60.0, 0.1).unwrap().k, 601);
        assert_eq!(make_grid(0.0, 1.0, 1.0).unwrap().k, 2);
        assert!(make_grid(0.0, 60.0, 0.7).is_err());
        assert!(make_grid(0.0, 0.0, 0.1).is_err());
        assert!(make_grid(0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn derivative_of_constant_and_ramp() {
        let g = make_grid(0.0, 5.0, 0.5).unwrap();
        let c = g.sample(|_| 3.0);
        assert!(g.differentiate(&c).unwrap().values.iter().all(|&v| v == 0.0));
        let r = g.sample(|t| t);
        let d = g.differentiate(&r).unwrap();
        assert_eq!(d[0], 0.0);
        for k in 1..g.k {
            assert_abs_diff_eq!(d[k], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn left_riemann() {
        let g = make_grid(0.0, 60.0, 0.1).unwrap();
        assert_abs_diff_eq!(g.integrate(&g.sample(|_| 1.0)), 60.0, epsilon = 1e-9);
        assert_eq!(g.integrate(&g.zeros()), 0.0);
        let g = make_grid(0.0, 1.0, 0.25).unwrap();
        assert_abs_diff_eq!(g.integrate(&g.sample(|t| t)), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn forward_scheme() {
        let g = make_grid(0.0, 1.0, 0.5).unwrap().with_scheme(DiffScheme::Forward);
        let d = g.differentiate(&TimeSeries::from_vec(vec![0.0, 1.0, 3.0])).unwrap();
        assert_eq!(d.values, vec![2.0, 4.0, 0.0]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let g = make_grid(0.0, 1.0, 0.5).unwrap();
        assert!(g.differentiate(&TimeSeries::zeros(2)).is_err());
    }
}
