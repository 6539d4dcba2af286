//! Empirical checks on regret curves and regret tables: shape of the
//! single-agent regret curve, monotonicity in coalition size, and invariance
//! of the grand-coalition outcome under agent relabelling.

mod merrier;
mod symmetry;

use crate::error::{Error, Result};

pub use merrier::{check_more_merrier, write_violation_table, MerrierRow, MoreMerrierReport, VIOLATION_TABLE_HEADER};
pub use symmetry::{check_symmetry_empirical, CoalitionRunner, SymmetryReport, SymmetryRow};

/// Mean cumulative regret `R(0..=T)` with `R(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    values: Vec<f64>,
    stderr: Vec<f64>,
    num_reps: usize,
    /// Per-repetition curves, kept so window statistics use the exact spread.
    reps: Option<Vec<Vec<f64>>>,
}

impl RegretCurve {
    /// A noiseless curve; `values[0]` must be 0.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.first() != Some(&0.0) {
            return Err(Error::InvalidInput("curve must start with R(0) = 0".into()));
        }
        let n = values.len();
        Ok(RegretCurve { values, stderr: vec![0.0; n], num_reps: 1, reps: None })
    }

    /// `R(0) = 0`, `R(t) = f(t)` for `t = 1..=T`.
    pub fn from_fn(horizon: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = std::iter::once(0.0).chain((1..=horizon).map(|t| f(t as f64))).collect();
        Self::from_values(values).expect("starts at zero")
    }

    /// Mean and per-step standard error of several runs; each run holds
    /// `R(1..=T)` (no leading zero), e.g. from `Trajectory::regret_curve`.
    pub fn from_reps(runs: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = runs.first() else {
            return Err(Error::InvalidInput("no runs".into()));
        };
        let horizon = first.len();
        if runs.iter().any(|r| r.len() != horizon) {
            return Err(Error::InvalidInput("runs have different lengths".into()));
        }
        let reps: Vec<Vec<f64>> = runs.iter().map(|r| std::iter::once(0.0).chain(r.iter().copied()).collect()).collect();
        let n = reps.len() as f64;
        let mut values = vec![0.0; horizon + 1];
        let mut stderr = vec![0.0; horizon + 1];
        for t in 0..=horizon {
            let col = reps.iter().map(|r| r[t]);
            let (m, se) = mean_stderr(col, n);
            values[t] = m;
            stderr[t] = se;
        }
        Ok(RegretCurve { values, stderr, num_reps: reps.len(), reps: Some(reps) })
    }

    /// Mean values with given standard errors but no per-run data.
    pub fn with_stderr(values: Vec<f64>, stderr: Vec<f64>, num_reps: usize) -> Result<Self> {
        if stderr.len() != values.len() || stderr.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidInput("stderr must be non-negative and match values".into()));
        }
        let mut c = Self::from_values(values)?;
        c.stderr = stderr;
        c.num_reps = num_reps.max(1);
        Ok(c)
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stderr(&self) -> &[f64] {
        &self.stderr
    }

    pub fn num_reps(&self) -> usize {
        self.num_reps
    }

    fn check_window(&self, t: usize, g: usize, h: usize) -> Result<()> {
        if g == 0 || h == 0 {
            return Err(Error::InvalidInput("g and h must be positive".into()));
        }
        if t + g + h > self.horizon() {
            return Err(Error::InvalidInput(format!(
                "window t={t}, g={g}, h={h} exceeds horizon {}",
                self.horizon()
            )));
        }
        Ok(())
    }

    /// Standard error of `r2` on the window: exact from per-run data when
    /// available, otherwise the (conservative) sum of the four point errors.
    fn r2_stderr(&self, t: usize, g: usize, h: usize) -> f64 {
        let scale = (g * h) as f64;
        match &self.reps {
            Some(reps) if reps.len() > 1 => {
                let per = reps.iter().map(|r| second_difference(r, t, g, h));
                mean_stderr(per, reps.len() as f64).1
            }
            _ => [t, t + g, t + h, t + g + h].iter().map(|&i| self.stderr[i]).sum::<f64>() / scale,
        }
    }
}

fn mean_stderr(xs: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn second_difference(r: &[f64], t: usize, g: usize, h: usize) -> f64 {
    let d1 = |s: usize| (r[s + h] - r[s]) / h as f64;
    (d1(t + g) - d1(t)) / g as f64
}

/// `r1 = (R(t+h) - R(t)) / h` and `r2 = (R'(t+g, h) - R'(t, h)) / g`.
pub fn discrete_derivatives(curve: &RegretCurve, t: usize, g: usize, h: usize) -> Result<(f64, f64)> {
    curve.check_window(t, g, h)?;
    let r = &curve.values;
    Ok(((r[t + h] - r[t]) / h as f64, second_difference(r, t, g, h)))
}

/// A finite set of `(t, g, h)` windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowGrid {
    pub windows: Vec<(usize, usize, usize)>,
}

impl WindowGrid {
    /// Every `t` in `ts` crossed with every `g = h` in `steps`, keeping valid windows.
    pub fn product(ts: &[usize], steps: &[usize], horizon: usize) -> Self {
        let mut windows = Vec::new();
        for &s in steps {
            for &t in ts {
                if s > 0 && t + 2 * s <= horizon {
                    windows.push((t, s, s));
                }
            }
        }
        WindowGrid { windows }
    }

    /// `h = g ∈ {T/32, T/16, T/8}` and 16 log-spaced `t ≥ 8` with `t + g + h ≤ T`.
    pub fn default_for(horizon: usize) -> Self {
        let mut steps: Vec<usize> = [32, 16, 8].iter().map(|d| (horizon / d).max(1)).collect();
        steps.dedup();
        let mut windows = Vec::new();
        for s in steps {
            if horizon < 8 + 2 * s {
                continue;
            }
            let hi = (horizon - 2 * s) as f64;
            let lo = 8.0f64;
            let mut ts: Vec<usize> = (0..16)
                .map(|i| (lo * (hi / lo).powf(i as f64 / 15.0)).round() as usize)
                .map(|t| t.clamp(8, horizon - 2 * s))
                .collect();
            ts.dedup();
            windows.extend(ts.into_iter().map(|t| (t, s, s)));
        }
        WindowGrid { windows }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowFlag {
    pub t: usize,
    pub g: usize,
    pub h: usize,
    /// The measured `r2`.
    pub measured: f64,
    pub stderr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub pass: bool,
    pub violations: Vec<WindowFlag>,
    pub num_checked: usize,
    pub min_r2: f64,
    pub max_r2: f64,
    /// `min -r2` over the grid: an empirical floor for the concavity margin.
    pub upsilon_floor: f64,
}

fn scan(
    curve: &RegretCurve,
    grid: &WindowGrid,
    mut flag: impl FnMut(usize, f64, f64) -> Option<f64>,
) -> Result<AssumptionReport> {
    let mut rep = AssumptionReport {
        pass: true,
        violations: Vec::new(),
        num_checked: 0,
        min_r2: f64::INFINITY,
        max_r2: f64::NEG_INFINITY,
        upsilon_floor: f64::INFINITY,
    };
    for &(t, g, h) in &grid.windows {
        let (_, r2) = discrete_derivatives(curve, t, g, h)?;
        let se = curve.r2_stderr(t, g, h);
        rep.num_checked += 1;
        rep.min_r2 = rep.min_r2.min(r2);
        rep.max_r2 = rep.max_r2.max(r2);
        rep.upsilon_floor = rep.upsilon_floor.min(-r2);
        if let Some(threshold) = flag(t, r2, se) {
            rep.violations.push(WindowFlag { t, g, h, measured: r2, stderr: se, threshold });
        }
    }
    rep.pass = rep.violations.is_empty();
    Ok(rep)
}

/// Flags windows where `r2` is not significantly negative:
/// `r2 - k·se ≥ -δ`, with `δ = 1e-12·max(1, max|R|)` absorbing rounding.
///
/// For noiseless curves this is plain strict negativity. With noise, a
/// window is flagged only when the data rule out concavity at `k` standard
/// errors; raising `k` never turns a pass into a fail.
pub fn check_strict_concavity(curve: &RegretCurve, grid: &WindowGrid, k: f64) -> Result<AssumptionReport> {
    let scale = curve.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let delta = 1e-12 * scale;
    scan(curve, grid, |_, r2, se| {
        let margin = if se == 0.0 { 0.0 } else { k * se };
        (r2 - margin >= -delta).then_some(-delta)
    })
}

/// Flags windows where `r2 + k·se < -c·t^(-2+eps)`.
pub fn check_log_limitation(curve: &RegretCurve, c: f64, eps: f64, grid: &WindowGrid, k: f64) -> Result<AssumptionReport> {
    if !(c > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidInput("c and eps must be positive".into()));
    }
    scan(curve, grid, |t, r2, se| {
        let bound = -c * (t as f64).powf(-2.0 + eps);
        let margin = if se == 0.0 { 0.0 } else { k * se };
        (r2 + margin < bound).then_some(bound)
    })
}

/// Default log-limitation constants for `K` actions: `c = 10·K`, `eps = 0.1`.
pub fn default_log_limitation(num_actions: usize) -> (f64, f64) {
    (10.0 * num_actions as f64, 0.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_examples() {
        let c = RegretCurve::from_values(vec![0.0, 3.0, 5.0, 6.0]).unwrap();
        assert_eq!(discrete_derivatives(&c, 0, 1, 1).unwrap(), (3.0, -1.0));
        assert!(discrete_derivatives(&c, 1, 1, 2).is_err());
        assert!(discrete_derivatives(&c, 0, 0, 1).is_err());

        let lin = RegretCurve::from_fn(50, |t| 2.5 * t);
        let flat = RegretCurve::from_fn(50, |_| 0.0);
        for (t, g, h) in [(0, 1, 1), (3, 5, 7), (10, 20, 20)] {
            assert!(discrete_derivatives(&lin, t, g, h).unwrap().1.abs() < 1e-12);
            assert_eq!(discrete_derivatives(&flat, t, g, h).unwrap(), (0.0, 0.0));
        }
        assert!(RegretCurve::from_values(vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn reconstruction_from_r1() {
        let c = RegretCurve::from_fn(64, |t| 3.0 * t.sqrt() + 0.1 * t.ln());
        for t in 0..50 {
            for h in 1..10 {
                let (r1, _) = discrete_derivatives(&c, t, 1, h).unwrap();
                assert!((c.values()[t] + h as f64 * r1 - c.values()[t + h]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn concavity_examples() {
        let t = 200;
        let ts: Vec<usize> = (4..=t - 2).collect();
        let grid = WindowGrid::product(&ts, &[1], t);
        assert!(check_strict_concavity(&RegretCurve::from_fn(t, |x| 10.0 * x.sqrt()), &grid, 3.0).unwrap().pass);
        let lin = check_strict_concavity(&RegretCurve::from_fn(t, |x| x), &grid, 3.0).unwrap();
        assert_eq!(lin.violations.len(), grid.windows.len());
        let sq = check_strict_concavity(&RegretCurve::from_fn(t, |x| x * x), &grid, 3.0).unwrap();
        assert!(!sq.pass && sq.violations.iter().all(|v| v.measured > 0.0));
    }

    #[test]
    fn log_limitation_examples() {
        let t = 1024;
        let grid = WindowGrid::default_for(t);
        let ln = RegretCurve::from_fn(t, f64::ln);
        assert!(check_log_limitation(&ln, 1.0, 0.1, &grid, 3.0).unwrap().pass);
        assert!(check_log_limitation(&RegretCurve::from_fn(t, |_| 0.0), 1.0, 0.1, &grid, 3.0).unwrap().pass);
        // slope 1 up to 100, then flat: the window straddling the cliff fails
        let cliff = RegretCurve::from_fn(t, |x| x.min(100.0));
        let g = WindowGrid { windows: vec![(90, 10, 10), (300, 10, 10)] };
        let r = check_log_limitation(&cliff, 1.0, 0.1, &g, 3.0).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].t, 90);
    }

    #[test]
    fn default_grid_shape() {
        let g = WindowGrid::default_for(1024);
        assert!(!g.windows.is_empty());
        for &(t, gg, h) in &g.windows {
            assert!(t >= 8 && t + gg + h <= 1024 && gg == h);
            assert!([32, 64, 128].contains(&gg));
        }
        assert_eq!(g.windows.iter().filter(|w| w.1 == 32).count(), 16);
        assert!(WindowGrid::default_for(9).windows.is_empty());
    }

    #[test]
    fn noisy_curves_use_per_run_spread() {
        let runs = vec![vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 1.0, 1.0, 1.0]];
        let c = RegretCurve::from_reps(&runs).unwrap();
        assert_eq!(c.values(), &[0.0, 1.0, 1.5, 2.0, 2.5]);
        assert_eq!(c.num_reps(), 2);
        // r2 at (0,1,1) is 0 and -1 in the two runs
        assert!((c.r2_stderr(0, 1, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn thresholds_are_monotone() {
        let runs: Vec<Vec<f64>> = (0..5)
            .map(|r| (1..=300).map(|t| (t as f64).sqrt() * 4.0 + ((t * (r + 3)) % 7) as f64 * 0.3).collect())
            .collect();
        let c = RegretCurve::from_reps(&runs).unwrap();
        let grid = WindowGrid::default_for(300);
        let mut prev = usize::MAX;
        for k in [0.0, 1.0, 3.0, 10.0] {
            let n = check_strict_concavity(&c, &grid, k).unwrap().violations.len();
            assert!(n <= prev);
            prev = n;
        }
        let mut prev = usize::MAX;
        for cc in [0.01, 0.1, 1.0, 100.0] {
            let n = check_log_limitation(&c, cc, 0.1, &grid, 0.0).unwrap().violations.len();
            assert!(n <= prev);
            prev = n;
        }
    }
}
