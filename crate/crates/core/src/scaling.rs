//! Size sweeps over square lattices and power-law fits `value = beta * N^alpha`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::bounds_report;
use crate::error::{Error, Result};
use crate::green::build_coupling_matrices;
use crate::kspace::PolTag;
use crate::lattice::{build_array, LatticeSpec, DEFAULT_SEED};
use crate::sdp::{solve_low_rank, SdpOptions, SdpProblem};
use crate::spectral::{decompose, gamma_max};

/// How sweep points are distributed between two endpoints.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Geometric,
    Linear,
}

/// `count` integer points from `lo` to `hi`, strictly increasing. Points that round
/// onto each other are merged, so fewer than `count` may come back.
pub fn sweep_points(lo: usize, hi: usize, count: usize, spacing: Spacing) -> Result<Vec<usize>> {
    if lo == 0 || hi <= lo || count < 2 {
        return Err(Error::invalid("sweep needs 0 < lo < hi and at least two points"));
    }
    let (a, b) = (lo as f64, hi as f64);
    let mut pts: Vec<usize> = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            let v = match spacing {
                Spacing::Geometric => a * (b / a).powf(t),
                Spacing::Linear => a + (b - a) * t,
            };
            v.round() as usize
        })
        .collect();
    pts.dedup();
    Ok(pts)
}

/// Quantity evaluated at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    GammaMax,
    SdpEstimate,
    LbBest,
    Ub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderPlan {
    pub eta: f64,
    pub n_realizations: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub dimension: u8,
    pub spacing: f64,
    pub polarization: PolTag,
    /// Emitters per axis at each point.
    pub n_values: Vec<usize>,
    pub quantity: Quantity,
    #[serde(default)]
    pub disorder: Option<DisorderPlan>,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.len() < 3 {
            return Err(Error::invalid("a sweep needs at least three points"));
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sweep sizes must be strictly increasing"));
        }
        if let Some(dis) = &self.disorder {
            if dis.n_realizations == 0 {
                return Err(Error::invalid("disorder needs at least one realization"));
            }
            if !(dis.eta.is_finite() && dis.eta >= 0.0) {
                return Err(Error::invalid("disorder strength must be finite and non-negative"));
            }
        }
        for &n in &self.n_values {
            self.lattice(n, 0).validate()?;
        }
        Ok(())
    }

    fn lattice(&self, n_per_axis: usize, realization: usize) -> LatticeSpec {
        let mut spec = LatticeSpec::new(
            self.dimension,
            n_per_axis,
            self.spacing,
            self.polarization.vector(self.dimension),
        );
        if let Some(dis) = &self.disorder {
            spec.disorder_eta = dis.eta;
            spec.seed = realization_seed(dis.seed, realization);
        }
        spec
    }
}

/// Seed of one disorder realization; it depends only on the realization index.
pub fn realization_seed(base: u64, realization: usize) -> u64 {
    base.wrapping_add((realization as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_per_axis: usize,
    pub n_atoms: usize,
    /// Ensemble mean, absent when the point failed.
    pub value: Option<f64>,
    /// Standard error of the mean over realizations, when there are several.
    pub stderr: Option<f64>,
    pub error: Option<String>,
}

/// Evaluate one quantity on one lattice.
pub fn evaluate(spec: &LatticeSpec, quantity: Quantity, sdp: &SdpOptions) -> Result<f64> {
    let array = build_array(spec)?;
    let mats = build_coupling_matrices(&array, &spec.polarization)?;
    match quantity {
        Quantity::GammaMax => gamma_max(&mats),
        Quantity::LbBest | Quantity::Ub => {
            let summary = decompose(&mats)?;
            let b = bounds_report(&summary, &mats);
            Ok(if quantity == Quantity::Ub { b.ub } else { b.lb_best })
        }
        Quantity::SdpEstimate => {
            let opts = SdpOptions {
                gamma0: mats.gamma0,
                ..*sdp
            };
            Ok(solve_low_rank(&SdpProblem::from_couplings(&mats), &opts)?.rstar_estimate)
        }
    }
}

/// Run a sweep, calling `on_row` as each point completes. Points run in order;
/// disorder realizations of one point run in parallel.
pub fn run_sweep_with<F>(plan: &SweepPlan, sdp: &SdpOptions, mut on_row: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(&SweepRow),
{
    plan.validate()?;
    let realizations = plan.disorder.as_ref().map_or(1, |d| d.n_realizations);
    let mut rows = Vec::with_capacity(plan.n_values.len());
    for &n in &plan.n_values {
        let values: Result<Vec<f64>> = (0..realizations)
            .into_par_iter()
            .map(|r| evaluate(&plan.lattice(n, r), plan.quantity, sdp))
            .collect();
        let n_atoms = plan.lattice(n, 0).atom_count()?;
        let row = match values {
            Ok(v) => {
                let (mean, stderr) = mean_stderr(&v);
                SweepRow {
                    n_per_axis: n,
                    n_atoms,
                    value: Some(mean),
                    stderr,
                    error: None,
                }
            }
            Err(e) => SweepRow {
                n_per_axis: n,
                n_atoms,
                value: None,
                stderr: None,
                error: Some(e.to_string()),
            },
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn run_sweep(plan: &SweepPlan, sdp: &SdpOptions) -> Result<Vec<SweepRow>> {
    run_sweep_with(plan, sdp, |_| {})
}

/// Sample mean and standard error; the error is absent for a single value.
pub fn mean_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Writes `n_atoms,value,stderr`; failed points leave `value` empty.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n_atoms", "value", "stderr"])?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in rows {
        w.write_record([r.n_atoms.to_string(), fmt(r.value), fmt(r.stderr)])?;
    }
    w.flush()?;
    Ok(())
}

/// Coefficient of determination below which a fit is rejected.
pub const R_SQUARED_GATE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub alpha: f64,
    pub beta: f64,
    /// One-sigma half-widths.
    pub alpha_ci: f64,
    pub beta_ci: f64,
    /// Absent when the values have no spread.
    pub r_squared: Option<f64>,
    pub accepted: bool,
    pub degenerate: bool,
}

/// Ordinary least squares of `ln value` on `ln N`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::invalid("a power-law fit needs at least three points"));
    }
    if points.iter().any(|&(n, v)| !(n > 0.0 && v > 0.0 && n.is_finite() && v.is_finite())) {
        return Err(Error::invalid("power-law fits need positive finite sizes and values"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid("power-law fits need at least two distinct sizes"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ybar).powi(2)).sum();
    let alpha = sxy / sxx;
    let intercept = ybar - alpha * xbar;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - alpha * x).powi(2))
        .sum();
    let s2 = ssr / (m - 2.0);
    let alpha_ci = (s2 / sxx).sqrt();
    let intercept_ci = (s2 * (1.0 / m + xbar * xbar / sxx)).sqrt();
    let beta = intercept.exp();
    // Spread below rounding noise of the logs counts as no spread.
    let degenerate = syy <= 1e-24 * m * ybar.abs().max(1.0).powi(2);
    let r_squared = (!degenerate).then(|| (1.0 - ssr / syy).clamp(0.0, 1.0));
    Ok(ScalingFit {
        alpha,
        beta,
        alpha_ci,
        beta_ci: beta * intercept_ci,
        r_squared,
        accepted: r_squared.is_some_and(|r| r >= R_SQUARED_GATE),
        degenerate,
    })
}

/// Fit the successful rows of a sweep against total atom number.
pub fn fit_sweep(rows: &[SweepRow]) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.value.map(|v| (r.n_atoms as f64, v)))
        .collect();
    fit_power_law(&pts)
}
