use serde::{Deserialize, Serialize};

use super::Diagnostic;
use crate::error::{Error, Result};
use crate::timegrid::{TimeGrid, TimeSeries};

const SLOPE_FLOOR: f64 = -1.0;

/// Schedule-delay cost `s(t)` of arriving at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleCost {
    /// `beta (tp - t)` early, `gamma (t - tp)` late.
    PiecewiseLinear { beta: f64, gamma: f64, t_p: f64 },
    /// `beta/60 (tp - t)^2` early, `gamma/60 (t - tp)^2` late.
    Quadratic { beta: f64, gamma: f64, t_p: f64 },
    /// Linear interpolation through `(times[i], values[i])`; the slope of
    /// the end segments extends past the table.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// Scale only the branch after the preferred arrival time.
    #[default]
    LateSide,
    /// Scale the whole function.
    Global,
}

impl ScheduleCost {
    pub fn piecewise_linear(beta: f64, gamma: f64, t_p: f64) -> Result<Self> {
        let sc = ScheduleCost::PiecewiseLinear { beta, gamma, t_p };
        sc.check()?;
        Ok(sc)
    }

    pub fn quadratic(beta: f64, gamma: f64, t_p: f64) -> Result<Self> {
        let sc = ScheduleCost::Quadratic { beta, gamma, t_p };
        sc.check()?;
        Ok(sc)
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let sc = ScheduleCost::Tabulated { times, values };
        sc.check()?;
        Ok(sc)
    }

    /// Parameter checks that do not depend on a grid: nonnegative
    /// parameters, zero at the preferred time, convexity and slope > -1.
    pub fn check(&self) -> Result<()> {
        match self {
            ScheduleCost::PiecewiseLinear { beta, gamma, t_p }
            | ScheduleCost::Quadratic { beta, gamma, t_p } => {
                if !(*beta >= 0.0 && *gamma >= 0.0) || !t_p.is_finite() {
                    return Err(Error::Schedule(format!(
                        "parameters must be nonnegative, got beta={beta}, gamma={gamma}"
                    )));
                }
                if matches!(self, ScheduleCost::PiecewiseLinear { .. }) && -beta <= SLOPE_FLOOR {
                    return Err(Error::Schedule(format!(
                        "early slope -{beta} is not above -1"
                    )));
                }
            }
            ScheduleCost::Tabulated { times, values } => {
                if times.len() < 2 || times.len() != values.len() {
                    return Err(Error::Schedule("table needs at least two matching samples".into()));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Schedule("table times must increase".into()));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Schedule("table values must be finite and nonnegative".into()));
                }
                if !values.contains(&0.0) {
                    return Err(Error::Schedule("table has no zero (preferred arrival time)".into()));
                }
                let slopes = table_slopes(times, values);
                if slopes.windows(2).any(|w| w[1] < w[0] - 1e-12) {
                    return Err(Error::Schedule("table is not convex".into()));
                }
                if let Some(m) = slopes.first() {
                    if *m <= SLOPE_FLOOR {
                        return Err(Error::Schedule(format!("slope {m} is not above -1")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn preferred_time(&self) -> f64 {
        match self {
            ScheduleCost::PiecewiseLinear { t_p, .. } | ScheduleCost::Quadratic { t_p, .. } => *t_p,
            ScheduleCost::Tabulated { times, values } => {
                times[values.iter().position(|&v| v == 0.0).unwrap_or(0)]
            }
        }
    }

    /// Value and right-derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            ScheduleCost::PiecewiseLinear { beta, gamma, t_p } => {
                if t < t_p {
                    (beta * (t_p - t), -beta)
                } else {
                    (gamma * (t - t_p), gamma)
                }
            }
            ScheduleCost::Quadratic { beta, gamma, t_p } => {
                if t < t_p {
                    let d = t_p - t;
                    (beta / 60.0 * d * d, -2.0 * beta / 60.0 * d)
                } else {
                    let d = t - t_p;
                    (gamma / 60.0 * d * d, 2.0 * gamma / 60.0 * d)
                }
            }
            ScheduleCost::Tabulated {
                ref times,
                ref values,
            } => {
                let n = times.len();
                // segment whose left end is the last sample <= t
                let seg = match times.partition_point(|&x| x <= t) {
                    0 => 0,
                    p => (p - 1).min(n - 2),
                };
                let slope = (values[seg + 1] - values[seg]) / (times[seg + 1] - times[seg]);
                (values[seg] + slope * (t - times[seg]), slope)
            }
        }
    }

    pub fn series(&self, grid: &TimeGrid) -> TimeSeries {
        grid.sample(|t| self.eval(t).0)
    }

    /// `kappa`-scaled copy. `LateSide` scales the branch after `t_p`.
    pub fn scaled(&self, kappa: f64, mode: ScalingMode) -> ScheduleCost {
        let early = match mode {
            ScalingMode::LateSide => 1.0,
            ScalingMode::Global => kappa,
        };
        match self {
            ScheduleCost::PiecewiseLinear { beta, gamma, t_p } => ScheduleCost::PiecewiseLinear {
                beta: beta * early,
                gamma: gamma * kappa,
                t_p: *t_p,
            },
            ScheduleCost::Quadratic { beta, gamma, t_p } => ScheduleCost::Quadratic {
                beta: beta * early,
                gamma: gamma * kappa,
                t_p: *t_p,
            },
            ScheduleCost::Tabulated { times, values } => {
                let tp = self.preferred_time();
                ScheduleCost::Tabulated {
                    times: times.clone(),
                    values: times
                        .iter()
                        .zip(values)
                        .map(|(&t, &v)| if t >= tp { v * kappa } else { v * early })
                        .collect(),
                }
            }
        }
    }

    pub(super) fn diagnostics(&self, grid: Option<&TimeGrid>) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let tp = self.preferred_time();
        let v = self.eval(tp).0;
        if v.abs() > 1e-12 {
            out.push(Diagnostic::NonzeroAtPreferredTime { value: v });
        }
        let times: Vec<f64> = match grid {
            Some(g) => g.times().collect(),
            None => match self {
                ScheduleCost::Tabulated { times, .. } => times.clone(),
                _ => vec![tp - 1.0, tp],
            },
        };
        let mut first_slope = true;
        let mut prev: Option<f64> = None;
        for &t in &times {
            let (_, m) = self.eval(t);
            if m <= SLOPE_FLOOR && first_slope {
                out.push(Diagnostic::SlopeViolation { time: t, slope: m });
                first_slope = false;
            }
            if let Some(p) = prev {
                if m < p - 1e-12 {
                    out.push(Diagnostic::NotConvex { time: t });
                    break;
                }
            }
            prev = Some(m);
        }
        out
    }
}

pub fn eval_schedule_cost(sc: &ScheduleCost, t: f64) -> (f64, f64) {
    sc.eval(t)
}

fn table_slopes(times: &[f64], values: &[f64]) -> Vec<f64> {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn piecewise_linear_kink() {
        let sc = ScheduleCost::piecewise_linear(0.3, 0.6, 30.0).unwrap();
        assert_eq!(sc.eval(30.0), (0.0, 0.6));
        let (s, m) = sc.eval(29.0);
        assert_abs_diff_eq!(s, 0.3, epsilon = 1e-12);
        assert_eq!(m, -0.3);
        assert_abs_diff_eq!(sc.eval(34.0).0, 2.4, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_values() {
        let sc = ScheduleCost::quadratic(0.3, 0.6, 30.0).unwrap();
        assert_abs_diff_eq!(sc.eval(20.0).0, 0.5, epsilon = 1e-12);
        assert_eq!(sc.eval(30.0), (0.0, 0.0));
        assert_abs_diff_eq!(sc.eval(40.0).1, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn tabulated_matches_piecewise() {
        let tab = ScheduleCost::tabulated(vec![0.0, 30.0, 60.0], vec![9.0, 0.0, 18.0]).unwrap();
        let pl = ScheduleCost::piecewise_linear(0.3, 0.6, 30.0).unwrap();
        for t in [0.0, 12.5, 29.9, 30.0, 30.1, 45.0, 60.0, 70.0] {
            let (a, ma) = tab.eval(t);
            let (b, mb) = pl.eval(t);
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            assert_abs_diff_eq!(ma, mb, epsilon = 1e-12);
        }
        assert_eq!(tab.preferred_time(), 30.0);
    }

    #[test]
    fn steep_early_side_rejected() {
        assert!(ScheduleCost::piecewise_linear(1.5, 0.6, 30.0).is_err());
        assert!(ScheduleCost::tabulated(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(ScheduleCost::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 2.5]).is_err());
    }

    #[test]
    fn steep_early_side_flagged_by_validator() {
        let sc = ScheduleCost::PiecewiseLinear { beta: 1.5, gamma: 0.6, t_p: 30.0 };
        let d = sc.diagnostics(None);
        assert_eq!(d.len(), 1);
        match d[0] {
            Diagnostic::SlopeViolation { slope, .. } => assert_eq!(slope, -1.5),
            ref other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scaling_modes() {
        let sc = ScheduleCost::piecewise_linear(0.4, 1.2, 30.0).unwrap();
        assert_eq!(
            sc.scaled(0.5, ScalingMode::LateSide),
            ScheduleCost::PiecewiseLinear { beta: 0.4, gamma: 0.6, t_p: 30.0 }
        );
        assert_eq!(
            sc.scaled(0.5, ScalingMode::Global),
            ScheduleCost::PiecewiseLinear { beta: 0.2, gamma: 0.6, t_p: 30.0 }
        );
    }
}
