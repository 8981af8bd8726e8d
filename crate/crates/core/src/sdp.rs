//! Semidefinite relaxation of the best product-state rate.
//!
//! The relaxation maximizes `Tr(C X) / 4` over `X >= 0` with `X_ii <= 1`, where `C` is
//! the decay matrix with its diagonal removed. Two first-order solvers are provided: a
//! low-rank factorization `X = V V^T` solved by projected gradient ascent, and a
//! full-matrix ADMM solver used as a reference. A rank-2 rounding turns a solution into
//! an explicit product state.

use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::CouplingMatrices;

/// Off-diagonal coupling matrix of the classical XY objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub n: usize,
    /// Row-major, zero diagonal.
    pub gtilde: Vec<f64>,
}

impl SdpProblem {
    pub fn new(n: usize, gtilde: Vec<f64>) -> Result<Self> {
        if n == 0 || gtilde.len() != n * n {
            return Err(Error::invalid("coupling matrix has the wrong size"));
        }
        for i in 0..n {
            if gtilde[i * n + i].abs() > 1e-12 {
                return Err(Error::invalid("coupling matrix must have a zero diagonal"));
            }
            for j in 0..i {
                if (gtilde[i * n + j] - gtilde[j * n + i]).abs() > 1e-12 {
                    return Err(Error::invalid("coupling matrix must be symmetric"));
                }
            }
        }
        Ok(Self { n, gtilde })
    }

    pub fn from_couplings(mats: &CouplingMatrices) -> Self {
        let n = mats.n;
        let mut gtilde = mats.gamma.clone();
        for i in 0..n {
            gtilde[i * n + i] = 0.0;
        }
        Self { n, gtilde }
    }

    fn matrix(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.gtilde[i * self.n + j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverTag {
    Lowrank,
    Projection,
}

/// A feasible point of the relaxation and how it was reached.
#[derive(Debug, Clone, Serialize)]
pub struct SdpSolution {
    pub value: f64,
    /// `n x rank` factor with `X = V V^T`, row-major.
    #[serde(skip)]
    pub factor: Vec<f64>,
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the projected gradient at the returned point.
    pub grad_residual: f64,
    pub feasibility_max_diag: f64,
    pub solver_tag: SolverTag,
    /// Relaxation value plus the diagonal contribution `N Gamma0 / 2`.
    pub rstar_estimate: f64,
    /// `N Gamma0 + 6 * value`.
    pub rstar_upper_from_sdp: f64,
}

impl SdpSolution {
    fn finish(
        problem: &SdpProblem,
        gamma0: f64,
        v: &Mat<f64>,
        iterations: usize,
        converged: bool,
        solver_tag: SolverTag,
    ) -> Self {
        let c = problem.matrix();
        let value = objective(&c, v);
        let grad = &c * v * 0.5;
        let projected = project_rows(&(v + &grad));
        let grad_residual = (&projected - v).norm_l2();
        let feasibility_max_diag = (0..v.nrows())
            .map(|i| row_norm2(v, i))
            .fold(0.0, f64::max);
        let n = problem.n as f64;
        let factor = (0..v.nrows())
            .flat_map(|i| (0..v.ncols()).map(move |j| v[(i, j)]))
            .collect();
        SdpSolution {
            value,
            factor,
            rank: v.ncols(),
            iterations,
            converged,
            grad_residual,
            feasibility_max_diag,
            solver_tag,
            rstar_estimate: value + 0.5 * n * gamma0,
            rstar_upper_from_sdp: n * gamma0 + 6.0 * value,
        }
    }

    fn factor_mat(&self) -> Mat<f64> {
        let n = self.factor.len() / self.rank.max(1);
        Mat::from_fn(n, self.rank, |i, j| self.factor[i * self.rank + j])
    }
}

/// Fields written when a solution is exported.
#[derive(Debug, Clone, Serialize)]
pub struct SdpExport {
    pub value: f64,
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
    pub rstar_estimate: f64,
    pub rstar_upper_from_sdp: f64,
}

impl From<&SdpSolution> for SdpExport {
    fn from(s: &SdpSolution) -> Self {
        Self {
            value: s.value,
            rank: s.rank,
            iterations: s.iterations,
            converged: s.converged,
            rstar_estimate: s.rstar_estimate,
            rstar_upper_from_sdp: s.rstar_upper_from_sdp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub max_iters: usize,
    /// Relative objective change over the stopping window.
    pub tol: f64,
    pub seed: u64,
    /// Factor rank; defaults to `ceil(sqrt(2 N))`.
    pub rank: Option<usize>,
    /// Re-solve at higher rank until the value stops improving.
    pub rank_escape: bool,
    /// Diagonal rate used for the derived estimates.
    pub gamma0: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol: 1e-8,
            seed: crate::lattice::DEFAULT_SEED,
            rank: None,
            rank_escape: true,
            gamma0: 1.0,
        }
    }
}

/// Iterations over which the relative objective change is measured.
const WINDOW: usize = 25;
/// Remembered values for the nonmonotone line search.
const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;

pub fn default_rank(n: usize) -> usize {
    ((2.0 * n as f64).sqrt().ceil() as usize).clamp(1, n.max(1))
}

fn objective(c: &Mat<f64>, v: &Mat<f64>) -> f64 {
    let cv = c * v;
    let mut total = 0.0;
    for j in 0..v.ncols() {
        for i in 0..v.nrows() {
            total += v[(i, j)] * cv[(i, j)];
        }
    }
    0.25 * total
}

fn row_norm2(v: &Mat<f64>, i: usize) -> f64 {
    (0..v.ncols()).map(|j| v[(i, j)] * v[(i, j)]).sum()
}

/// Project every row onto the closed unit ball.
fn project_rows(v: &Mat<f64>) -> Mat<f64> {
    let mut out = v.clone();
    for i in 0..v.nrows() {
        let norm = row_norm2(v, i).sqrt();
        if norm > 1.0 {
            for j in 0..v.ncols() {
                out[(i, j)] /= norm;
            }
        }
    }
    out
}

fn inner(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut total = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            total += a[(i, j)] * b[(i, j)];
        }
    }
    total
}

fn window_converged(history: &[f64], tol: f64) -> bool {
    if history.len() <= WINDOW {
        return false;
    }
    let now = history[history.len() - 1];
    let then = history[history.len() - 1 - WINDOW];
    (now - then).abs() <= tol * now.abs()
}

fn random_sphere_rows(n: usize, r: usize, seed: u64) -> Mat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Mat::from_fn(n, r, |_, _| StandardNormal.sample(&mut rng));
    for i in 0..n {
        let norm = row_norm2(&v, i).sqrt().max(f64::MIN_POSITIVE);
        for j in 0..r {
            v[(i, j)] /= norm;
        }
    }
    v
}

struct Ascent {
    v: Mat<f64>,
    iterations: usize,
    converged: bool,
}

/// Projected gradient ascent with Barzilai-Borwein steps and a nonmonotone line search.
fn ascend(c: &Mat<f64>, start: Mat<f64>, opts: &SdpOptions) -> Ascent {
    let mut v = project_rows(&start);
    let mut f = objective(c, &v);
    let mut grad = c * &v * 0.5;
    let scale = c.norm_l2().max(f64::MIN_POSITIVE);
    let mut step = 1.0 / scale;
    let mut history = vec![f];
    let mut best = (f, v.clone());
    for it in 1..=opts.max_iters {
        let reference = history.iter().rev().take(MEMORY).copied().fold(f64::INFINITY, f64::min);
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = project_rows(&(&v + &grad * t));
            let diff = &trial - &v;
            let ft = objective(c, &trial);
            if ft >= reference + ARMIJO * inner(&grad, &diff) {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((next, f_next)) = accepted else {
            // No ascent direction left within floating-point resolution.
            return Ascent { v: best.1, iterations: it, converged: true };
        };
        let grad_next = c * &next * 0.5;
        let s = &next - &v;
        let y = &grad_next - &grad;
        let ss = inner(&s, &s);
        let sy = inner(&s, &y).abs();
        step = if sy > 1e-300 && ss > 0.0 { (ss / sy).clamp(1e-10 / scale, 1e10 / scale) } else { 1.0 / scale };
        v = next;
        grad = grad_next;
        f = f_next;
        history.push(f);
        if f > best.0 {
            best = (f, v.clone());
        }
        if ss == 0.0 || window_converged(&history, opts.tol) {
            return Ascent { v: best.1, iterations: it, converged: true };
        }
    }
    Ascent { v: best.1, iterations: opts.max_iters, converged: false }
}

/// Low-rank factorization solver.
pub fn solve_low_rank(problem: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let n = problem.n;
    let rank = opts.rank.unwrap_or_else(|| default_rank(n));
    if n >= 2 && !(2..=n).contains(&rank) {
        return Err(Error::invalid(format!("rank must lie in 2..={n}")));
    }
    let c = problem.matrix();
    let mut run = ascend(&c, random_sphere_rows(n, rank, opts.seed), opts);
    let mut total_iters = run.iterations;
    if opts.rank_escape {
        let mut value = objective(&c, &run.v);
        let mut r = run.v.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9E37_79B9_7F4A_7C15);
        while r < n {
            // Warm start with a small random extra column so it is not a stationary point.
            let widened = Mat::from_fn(n, r + 1, |i, j| {
                if j < r {
                    run.v[(i, j)]
                } else {
                    1e-3 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                }
            });
            let next = ascend(&c, widened, opts);
            total_iters += next.iterations;
            let next_value = objective(&c, &next.v);
            let agree = (next_value - value).abs() <= 1e-6 * value.abs().max(f64::MIN_POSITIVE);
            let improved = next_value > value;
            if improved {
                run = next;
                value = next_value;
                r += 1;
            }
            if agree || !improved {
                break;
            }
        }
    }
    Ok(SdpSolution::finish(problem, opts.gamma0, &run.v, total_iters, run.converged, SolverTag::Lowrank))
}

/// Largest size accepted by the full-matrix solver.
pub const PROJECTION_MAX_N: usize = 400;

fn psd_part(m: &Mat<f64>) -> Result<Mat<f64>> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?} in PSD projection")))?;
    let u = evd.U();
    let s = evd.S().column_vector();
    let n = m.nrows();
    let scaled = Mat::from_fn(n, n, |i, k| u[(i, k)] * s[k].max(0.0));
    Ok(&scaled * u.transpose())
}

/// Full-matrix ADMM solver splitting the PSD cone from the diagonal constraint.
pub fn solve_projection(problem: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let n = problem.n;
    if n > PROJECTION_MAX_N {
        return Err(Error::invalid(format!(
            "full-matrix solver is limited to N <= {PROJECTION_MAX_N} (got {n})"
        )));
    }
    let c = problem.matrix() * 0.25;
    let scale = c.norm_l2().max(1e-12);
    let mut rho = scale / (n as f64).sqrt();
    let mut z = Mat::<f64>::identity(n, n);
    let mut u = Mat::<f64>::zeros(n, n);
    let mut x = z.clone();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = opts.max_iters;
    for it in 1..=opts.max_iters {
        x = psd_part(&(&z - &u + &c * (1.0 / rho)))?;
        let z_prev = z.clone();
        z = &x + &u;
        for i in 0..n {
            z[(i, i)] = z[(i, i)].min(1.0);
        }
        u = &u + &x - &z;
        let primal = (&x - &z).norm_l2();
        let dual = rho * (&z - &z_prev).norm_l2();
        history.push(inner(&c, &z));
        let size = x.norm_l2().max(1.0);
        if primal <= 1e-9 * size && dual <= 1e-9 * size * rho.max(1.0) && window_converged(&history, opts.tol) {
            converged = true;
            iterations = it;
            break;
        }
        // Residual balancing keeps the two residuals comparable.
        if it % 50 == 0 {
            let factor = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                u = &u * (1.0 / factor);
            }
        }
    }
    // Rescale to exact feasibility and factor the result.
    let diag: Vec<f64> = (0..n).map(|i| x[(i, i)].max(1.0).sqrt()).collect();
    let feasible = Mat::from_fn(n, n, |i, j| x[(i, j)] / (diag[i] * diag[j]));
    let evd = feasible
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?} in final factorization")))?;
    let ev = evd.U();
    let s = evd.S().column_vector();
    let v = Mat::from_fn(n, n, |i, k| ev[(i, k)] * s[k].max(0.0).sqrt());
    let v = project_rows(&v);
    Ok(SdpSolution::finish(problem, opts.gamma0, &v, iterations, converged, SolverTag::Projection))
}

/// A product state of spins in the xy-plane extracted from a relaxation solution.
#[derive(Debug, Clone, Serialize)]
pub struct RoundedState {
    /// Polar angles; all equal to pi / 2.
    pub theta: Vec<f64>,
    /// Azimuthal angles.
    pub phi: Vec<f64>,
    /// Classical XY value of the state; a lower bound on the relaxation value.
    pub value: f64,
}

fn xy_value(problem: &SdpProblem, spins: &[[f64; 2]]) -> f64 {
    let n = problem.n;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let g = problem.gtilde[i * n + j];
            total += g * (spins[i][0] * spins[j][0] + spins[i][1] * spins[j][1]);
        }
    }
    0.25 * total
}

/// Rank-2 rounding by principal components followed by single-spin local search.
pub fn round_to_product_state(problem: &SdpProblem, solution: &SdpSolution) -> Result<RoundedState> {
    let n = problem.n;
    let v = solution.factor_mat();
    if v.nrows() != n {
        return Err(Error::invalid("solution does not match the problem size"));
    }
    let r = v.ncols();
    let gram = v.transpose() * &v;
    let evd = gram
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?} in rounding")))?;
    let basis = evd.U();
    let axes: Vec<usize> = (0..r.min(2)).map(|k| r - 1 - k).collect();
    let mut spins: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let mut p = [0.0; 2];
            for (slot, &k) in axes.iter().enumerate() {
                p[slot] = (0..r).map(|j| v[(i, j)] * basis[(j, k)]).sum();
            }
            let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if norm > 1e-12 {
                [p[0] / norm, p[1] / norm]
            } else {
                [1.0, 0.0]
            }
        })
        .collect();

    // Align each spin with its local field until no move gains more than 1e-10.
    for _sweep in 0..10_000 {
        let mut best_gain = 0.0f64;
        for i in 0..n {
            let mut h = [0.0; 2];
            for j in 0..n {
                if j != i {
                    let g = problem.gtilde[i * n + j];
                    h[0] += g * spins[j][0];
                    h[1] += g * spins[j][1];
                }
            }
            let hn = (h[0] * h[0] + h[1] * h[1]).sqrt();
            if hn <= 0.0 {
                continue;
            }
            let gain = 0.5 * (hn - (spins[i][0] * h[0] + spins[i][1] * h[1]));
            if gain > 1e-10 {
                spins[i] = [h[0] / hn, h[1] / hn];
                best_gain = best_gain.max(gain);
            }
        }
        if best_gain <= 1e-10 {
            break;
        }
    }
    Ok(RoundedState {
        theta: vec![std::f64::consts::FRAC_PI_2; n],
        phi: spins.iter().map(|s| s[1].atan2(s[0])).collect(),
        value: xy_value(problem, &spins),
    })
}

/// Certified quantities derived from a relaxation value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdpCertificate {
    pub value: f64,
    /// `(N / 4) (Gamma_max - Gamma0)`, which every relaxation value must respect.
    pub cap: f64,
    pub rstar_estimate: f64,
    pub rstar_upper_from_sdp: f64,
}

pub fn sdp_certificates(
    problem: &SdpProblem,
    solution: &SdpSolution,
    gamma_max: f64,
    gamma0: f64,
) -> Result<SdpCertificate> {
    let n = problem.n as f64;
    let cap = 0.25 * n * (gamma_max - gamma0);
    if solution.value > cap + 1e-6 {
        return Err(Error::Validation(format!(
            "relaxation value {} exceeds the spectral cap {cap}",
            solution.value
        )));
    }
    Ok(SdpCertificate {
        value: solution.value,
        cap,
        rstar_estimate: solution.value + 0.5 * n * gamma0,
        rstar_upper_from_sdp: n * gamma0 + 6.0 * solution.value,
    })
}
