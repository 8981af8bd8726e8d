//! Collective rates of spin waves on infinite square lattices and the finite-grid
//! estimate of the largest rate of a finite array.
//!
//! Wavevectors are measured in units of the free-space wavenumber `k0`, so the
//! light line is `|q| = 1` and reciprocal vectors are integer multiples of `1/d`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::K0;

/// Dipole orientation relative to the array.
///
/// For chains, parallel means along the chain axis (z) and perpendicular means x.
/// For planar and cubic arrays, parallel means in-plane along x and perpendicular
/// means along z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolTag {
    Parallel,
    Perpendicular,
}

impl PolTag {
    pub fn vector(self, dimension: u8) -> [f64; 3] {
        match (dimension, self) {
            (1, PolTag::Parallel) => [0.0, 0.0, 1.0],
            (1, PolTag::Perpendicular) => [1.0, 0.0, 0.0],
            (_, PolTag::Parallel) => [1.0, 0.0, 0.0],
            (_, PolTag::Perpendicular) => [0.0, 0.0, 1.0],
        }
    }
}

/// Distance from the light line below which a planar mode counts as divergent.
const LIGHT_LINE_EPS: f64 = 1e-12;

fn check_dim_spacing(dimension: u8, d: f64) -> Result<()> {
    if !(1..=3).contains(&dimension) {
        return Err(Error::invalid(format!("dimension must be 1, 2 or 3 (got {dimension})")));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid("spacing must be positive"));
    }
    Ok(())
}

/// Rate contributed by a single Bragg-shifted wavevector `q = k + g` (components along
/// the lattice axes).
fn mode_term(dimension: u8, kd: f64, pol: PolTag, q: &[f64], reg: f64) -> Result<f64> {
    match dimension {
        1 => {
            let q2 = q[0] * q[0];
            if q2 > 1.0 {
                return Ok(0.0);
            }
            let pre = 3.0 * PI / (2.0 * kd);
            Ok(match pol {
                PolTag::Parallel => pre * (1.0 - q2),
                PolTag::Perpendicular => 0.5 * pre * (1.0 + q2),
            })
        }
        2 => {
            let q2 = q[0] * q[0] + q[1] * q[1];
            let gap = 1.0 - q2;
            if gap.abs() <= LIGHT_LINE_EPS {
                return Err(Error::DivergentMode);
            }
            if gap < 0.0 {
                return Ok(0.0);
            }
            let num = match pol {
                PolTag::Parallel => 1.0 - q[0] * q[0],
                PolTag::Perpendicular => q2,
            };
            Ok(3.0 * PI / (kd * kd) * num / gap.sqrt())
        }
        _ => {
            let q2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
            let gap = 1.0 - q2;
            if gap <= 0.0 {
                return Ok(0.0);
            }
            let qp = match pol {
                PolTag::Parallel => q[0],
                PolTag::Perpendicular => q[2],
            };
            Ok(6.0 * PI / (kd * kd * kd) * reg * (1.0 - qp * qp) / (gap * gap + reg * reg))
        }
    }
}

/// Integer reciprocal-lattice indices that can bring a component within the light cone.
fn bragg_range(k: f64, d: f64, halfwidth: f64) -> std::ops::RangeInclusive<i64> {
    let lo = ((-1.0 - halfwidth - k) * d).floor() as i64;
    let hi = ((1.0 + halfwidth - k) * d).ceil() as i64;
    lo..=hi
}

/// Sum `f` over every reciprocal vector `g = n / d` with `|k + g|` possibly inside the
/// light cone; `halfwidth` widens the search for cell integrals.
fn sum_over_bragg<F>(k: &[f64], d: f64, halfwidth: f64, mut f: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let ranges: Vec<_> = k.iter().map(|&c| bragg_range(c, d, halfwidth)).collect();
    let mut total = 0.0;
    let mut shifted = k.to_vec();
    let mut idx: Vec<i64> = ranges.iter().map(|r| *r.start()).collect();
    loop {
        for (axis, &n) in idx.iter().enumerate() {
            shifted[axis] = k[axis] + n as f64 / d;
        }
        total += f(&shifted)?;
        let mut axis = 0;
        loop {
            if axis == idx.len() {
                return Ok(total);
            }
            if idx[axis] < *ranges[axis].end() {
                idx[axis] += 1;
                break;
            }
            idx[axis] = *ranges[axis].start();
            axis += 1;
        }
    }
}

/// Decay rate of the spin wave with lattice momentum `k` (one component per lattice axis).
///
/// Cubic lattices need the Lorentzian regularizer `reg_delta`; the sum there is
/// restricted to reciprocal vectors with `|k + g| < k0`.
pub fn gamma_k(dimension: u8, d: f64, pol: PolTag, k: &[f64], reg_delta: Option<f64>) -> Result<f64> {
    check_dim_spacing(dimension, d)?;
    if k.len() != dimension as usize {
        return Err(Error::invalid("wavevector must have one component per lattice axis"));
    }
    let half_zone = 0.5 / d;
    if k.iter().any(|c| c.abs() > half_zone * (1.0 + 1e-12)) {
        return Err(Error::invalid("wavevector outside the first Brillouin zone"));
    }
    let reg = match (dimension, reg_delta) {
        (3, Some(r)) if r > 0.0 => r,
        (3, _) => return Err(Error::invalid("cubic lattices need a positive reg_delta")),
        _ => 0.0,
    };
    let kd = K0 * d;
    sum_over_bragg(k, d, 0.0, |q| mode_term(dimension, kd, pol, q, reg))
}

/// How the finite grid of lattice momenta is turned into an estimate of the largest rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridEstimator {
    /// Average the rate over each grid cell and take the largest cell.
    CellAverage,
    /// Largest rate over the grid points themselves.
    PointSample,
    /// Rate one grid step inside the light line, transverse to the dipole.
    LightLineOffset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub estimator: GridEstimator,
    /// Cubic regularizer in units of the grid step.
    pub reg_scale: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            estimator: GridEstimator::CellAverage,
            reg_scale: 1.0,
        }
    }
}

/// Lattice momenta of an `n`-site axis, `-1/(2d) + mu/((n+1)d)` for `mu = 1..=n`,
/// together with the grid step.
pub fn grid_axis(d: f64, n: usize) -> (Vec<f64>, f64) {
    let step = 1.0 / ((n as f64 + 1.0) * d);
    let pts = (1..=n).map(|mu| -0.5 / d + mu as f64 * step).collect();
    (pts, step)
}

/// Grid-based estimate of the largest collective rate of an `n`-per-axis array.
pub fn gamma_max_finite_grid(
    dimension: u8,
    d: f64,
    pol: PolTag,
    n_per_axis: usize,
    opts: &GridOptions,
) -> Result<f64> {
    check_dim_spacing(dimension, d)?;
    if n_per_axis < 2 {
        return Err(Error::invalid("finite-grid estimate needs at least two sites per axis"));
    }
    if !(opts.reg_scale.is_finite() && opts.reg_scale > 0.0) {
        return Err(Error::invalid("reg_scale must be positive"));
    }
    let (axis, step) = grid_axis(d, n_per_axis);
    let reg = opts.reg_scale * step;
    match opts.estimator {
        GridEstimator::PointSample => point_sample_max(dimension, d, pol, &axis, step, reg),
        GridEstimator::LightLineOffset => light_line_offset(dimension, d, pol, &axis, step, reg),
        GridEstimator::CellAverage => cell_average_max(dimension, d, pol, &axis, step, reg),
    }
}

fn for_each_grid_point<F>(dimension: u8, axis: &[f64], mut f: F) -> Result<()>
where
    F: FnMut(&[f64]) -> Result<()>,
{
    let n = axis.len();
    let total = n.pow(u32::from(dimension));
    let mut k = vec![0.0; dimension as usize];
    for flat in 0..total {
        let mut rem = flat;
        for c in k.iter_mut() {
            *c = axis[rem % n];
            rem /= n;
        }
        f(&k)?;
    }
    Ok(())
}

fn point_sample_max(dimension: u8, d: f64, pol: PolTag, axis: &[f64], step: f64, reg: f64) -> Result<f64> {
    let mut best = 0.0f64;
    for_each_grid_point(dimension, axis, |k| {
        let value = match gamma_k(dimension, d, pol, k, Some(reg)) {
            Err(Error::DivergentMode) => {
                // Pull the point a grid step towards the zone center.
                let norm = k.iter().map(|c| c * c).sum::<f64>().sqrt();
                let shrunk: Vec<f64> = k.iter().map(|c| c * (1.0 - step / norm)).collect();
                gamma_k(dimension, d, pol, &shrunk, Some(reg))?
            }
            other => other?,
        };
        best = best.max(value);
        Ok(())
    })?;
    Ok(best)
}

fn light_line_offset(dimension: u8, d: f64, pol: PolTag, axis: &[f64], step: f64, reg: f64) -> Result<f64> {
    if dimension == 1 {
        return point_sample_max(dimension, d, pol, axis, step, reg);
    }
    // Approach the light line along y, which is transverse to both dipole choices.
    let radius = (1.0 - step).min(0.5 / d);
    let mut k = vec![0.0; dimension as usize];
    k[1] = radius;
    gamma_k(dimension, d, pol, &k, Some(reg))
}

fn cell_average_max(dimension: u8, d: f64, pol: PolTag, axis: &[f64], step: f64, reg: f64) -> Result<f64> {
    let kd = K0 * d;
    let half = 0.5 * step;
    let mut best = 0.0f64;
    for_each_grid_point(dimension, axis, |k| {
        let avg = sum_over_bragg(k, d, half, |q| {
            Ok(match dimension {
                1 => chain_cell(kd, pol, q[0] - half, q[0] + half) / step,
                2 => planar_cell(kd, pol, [q[0] - half, q[0] + half], [q[1] - half, q[1] + half])
                    / (step * step),
                _ => cubic_cell(kd, pol, q, step, reg)?,
            })
        })?;
        best = best.max(avg);
        Ok(())
    })?;
    Ok(best)
}

/// Integral of the chain rate over `[a, b]` clipped to the light cone.
fn chain_cell(kd: f64, pol: PolTag, a: f64, b: f64) -> f64 {
    let (a, b) = (a.max(-1.0), b.min(1.0));
    if b <= a {
        return 0.0;
    }
    let pre = 3.0 * PI / (2.0 * kd);
    let cubic = (b * b * b - a * a * a) / 3.0;
    match pol {
        PolTag::Parallel => pre * ((b - a) - cubic),
        PolTag::Perpendicular => 0.5 * pre * ((b - a) + cubic),
    }
}

/// Midpoint nodes along x for the planar cell integral.
const PLANAR_NODES: usize = 64;

/// Integral of the planar rate over a rectangle: exact in y, midpoint rule in x.
fn planar_cell(kd: f64, pol: PolTag, xs: [f64; 2], ys: [f64; 2]) -> f64 {
    let width = (xs[1] - xs[0]) / PLANAR_NODES as f64;
    let mut total = 0.0;
    for i in 0..PLANAR_NODES {
        let x = xs[0] + (i as f64 + 0.5) * width;
        let a2 = 1.0 - x * x;
        if a2 <= 0.0 {
            continue;
        }
        let a = a2.sqrt();
        let (lo, hi) = (ys[0].max(-a), ys[1].min(a));
        if hi <= lo {
            continue;
        }
        let angle = |y: f64| (y / a).clamp(-1.0, 1.0).asin();
        let root = |y: f64| (a2 - y * y).max(0.0).sqrt();
        let column = match pol {
            PolTag::Parallel => (1.0 - x * x) * (angle(hi) - angle(lo)),
            PolTag::Perpendicular => {
                let prim = |y: f64| x * x * angle(y) + 0.5 * a2 * angle(y) - 0.5 * y * root(y);
                prim(hi) - prim(lo)
            }
        };
        total += column * width;
    }
    3.0 * PI / (kd * kd) * total
}

/// Midpoint nodes per axis for the cubic cell average.
const CUBIC_NODES: usize = 8;

/// Average of the regularized cubic rate over a cell centered at `q`.
fn cubic_cell(kd: f64, pol: PolTag, q: &[f64], step: f64, reg: f64) -> Result<f64> {
    let s = CUBIC_NODES;
    let offsets: Vec<f64> = (0..s).map(|i| ((i as f64 + 0.5) / s as f64 - 0.5) * step).collect();
    let mut total = 0.0;
    for &ox in &offsets {
        for &oy in &offsets {
            for &oz in &offsets {
                total += mode_term(3, kd, pol, &[q[0] + ox, q[1] + oy, q[2] + oz], reg)?;
            }
        }
    }
    Ok(total / (s * s * s) as f64)
}

/// Rates sampled on the lattice-momentum grid of a finite array.
#[derive(Debug, Clone, Serialize)]
pub struct KSpaceRates {
    pub dimension: u8,
    pub spacing: f64,
    pub polarization: PolTag,
    pub reg_delta: Option<f64>,
    /// One wavevector per row, one component per lattice axis.
    pub grid: Vec<Vec<f64>>,
    pub rates: Vec<f64>,
}

/// Tabulate the rate on the grid of an `n`-per-axis array. Points on the light line are
/// nudged one grid step inward.
pub fn kspace_rates(dimension: u8, d: f64, pol: PolTag, n_per_axis: usize, reg_scale: f64) -> Result<KSpaceRates> {
    check_dim_spacing(dimension, d)?;
    if n_per_axis < 1 {
        return Err(Error::invalid("need at least one site per axis"));
    }
    let (axis, step) = grid_axis(d, n_per_axis);
    let reg = (dimension == 3).then_some(reg_scale * step);
    let mut grid = Vec::new();
    let mut rates = Vec::new();
    for_each_grid_point(dimension, &axis, |k| {
        let rate = match gamma_k(dimension, d, pol, k, reg) {
            Err(Error::DivergentMode) => {
                let norm = k.iter().map(|c| c * c).sum::<f64>().sqrt();
                let shrunk: Vec<f64> = k.iter().map(|c| c * (1.0 - step / norm)).collect();
                gamma_k(dimension, d, pol, &shrunk, reg)?
            }
            other => other?,
        };
        grid.push(k.to_vec());
        rates.push(rate);
        Ok(())
    })?;
    Ok(KSpaceRates {
        dimension,
        spacing: d,
        polarization: pol,
        reg_delta: reg,
        grid,
        rates,
    })
}

/// Large-array scaling `Gamma_max ~ beta N^alpha` for subwavelength spacings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prefactors {
    pub alpha: f64,
    pub beta: f64,
    /// False when the spacing lies outside `0 < d <= 0.5`.
    pub in_domain: bool,
}

pub fn asymptotic_prefactors(dimension: u8, d: f64) -> Result<Prefactors> {
    check_dim_spacing(dimension, d)?;
    let kd = K0 * d;
    let (alpha, beta) = match dimension {
        1 => (0.0, 3.0 * PI / (2.0 * kd)),
        2 => (0.25, 3.0 * PI.sqrt() / (2.0 * kd.powf(1.5))),
        _ => (1.0 / 3.0, 3.0 / (5.0 * kd * kd)),
    };
    Ok(Prefactors {
        alpha,
        beta,
        in_domain: d <= 0.5,
    })
}

/// Exponent of `Gamma_max ~ N^x` for a `lattice_dim` lattice in a `space_dim` vacuum.
pub fn scaling_exponent_general(lattice_dim: u32, space_dim: u32) -> Result<f64> {
    if lattice_dim < 1 || lattice_dim > space_dim {
        return Err(Error::invalid(format!(
            "lattice dimension {lattice_dim} must lie between 1 and the space dimension {space_dim}"
        )));
    }
    let space = f64::from(space_dim);
    Ok(if lattice_dim + 1 < space_dim {
        0.0
    } else if lattice_dim + 1 == space_dim {
        1.0 / (2.0 * (space - 1.0))
    } else {
        1.0 / space
    })
}
