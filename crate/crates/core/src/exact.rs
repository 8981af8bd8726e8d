//! Exact maximal decay rate for small arrays.
//!
//! The rate operator `H = sum_ij Gamma_ij s+_i s-_j` conserves the number of
//! excitations, so it is diagonalized one excitation sector at a time. States are
//! bitmasks with bit `i` set when emitter `i` is excited. Sector bases are sorted
//! ascending, which is colexicographic order of the excited sets, and are indexed by
//! their combinatorial rank.
//!
//! Note that this "exact diagonalization" acts on the `2^N`-dimensional many-body
//! space, unlike the `N x N` eigenproblem of the decay matrix itself.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::CouplingMatrices;

/// Largest emitter count handled by the sector solvers.
pub const MAX_EXACT_ATOMS: usize = 24;
/// Largest emitter count for Haar sampling over the full space.
pub const MAX_HAAR_ATOMS: usize = 14;

fn binomial_table(n: usize) -> Vec<Vec<usize>> {
    let mut c = vec![vec![0usize; n + 2]; n + 1];
    for row in 0..=n {
        c[row][0] = 1;
        for k in 1..=row {
            c[row][k] = c[row - 1][k - 1] + if k < row { c[row - 1][k] } else { 0 };
        }
    }
    c
}

/// Basis of the sector with `n - m_ground` excitations.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub n: usize,
    pub m_ground: usize,
    pub states: Vec<u32>,
    low_bits: usize,
    /// Rank contribution of the low half of a mask.
    low_rank: Vec<usize>,
    /// Rank contribution of the high half, indexed by high mask and the number of
    /// excitations below it.
    high_rank: Vec<Vec<usize>>,
}

impl SectorBasis {
    pub fn new(n: usize, m_ground: usize) -> Result<Self> {
        if n == 0 || n > MAX_EXACT_ATOMS {
            return Err(Error::invalid(format!(
                "exact diagonalization supports 1..={MAX_EXACT_ATOMS} emitters (got {n})"
            )));
        }
        if m_ground > n {
            return Err(Error::invalid("more ground-state emitters than emitters"));
        }
        let k = n - m_ground;
        let binom = binomial_table(n);
        let mut states = Vec::with_capacity(binom[n][k]);
        // Gosper's hack walks k-subsets in ascending order.
        if k == 0 {
            states.push(0);
        } else {
            let mut s: u64 = (1u64 << k) - 1;
            let limit = 1u64 << n;
            while s < limit {
                states.push(s as u32);
                let c = s & s.wrapping_neg();
                let r = s + c;
                s = (((r ^ s) >> 2) / c) | r;
            }
        }
        let low_bits = n / 2;
        let high_bits = n - low_bits;
        let rank_of_bits = |mask: u32, shift: usize, before: usize| -> usize {
            let mut rank = 0;
            let mut order = before;
            for b in 0..32 {
                if mask >> b & 1 == 1 {
                    let pos = b + shift;
                    order += 1;
                    if order <= n {
                        rank += binom[pos].get(order).copied().unwrap_or(0);
                    }
                }
            }
            rank
        };
        let low_rank = (0..1u32 << low_bits).map(|m| rank_of_bits(m, 0, 0)).collect();
        let high_rank = (0..1u32 << high_bits)
            .map(|m| (0..=low_bits).map(|before| rank_of_bits(m, low_bits, before)).collect())
            .collect();
        Ok(Self {
            n,
            m_ground,
            states,
            low_bits,
            low_rank,
            high_rank,
        })
    }

    pub fn excitations(&self) -> usize {
        self.n - self.m_ground
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Position of `mask` in the sorted basis.
    #[inline]
    pub fn index(&self, mask: u32) -> usize {
        let low = mask & ((1u32 << self.low_bits) - 1);
        let high = mask >> self.low_bits;
        self.low_rank[low as usize] + self.high_rank[high as usize][low.count_ones() as usize]
    }
}

/// Apply the rate operator restricted to one sector: `out = H v`.
pub fn sector_matvec(mats: &CouplingMatrices, basis: &SectorBasis, v: &[f64], out: &mut [f64]) -> Result<()> {
    if v.len() != basis.len() || out.len() != basis.len() || mats.n != basis.n {
        return Err(Error::invalid("sector vector dimension mismatch"));
    }
    apply_sector(mats, basis, v, out);
    Ok(())
}

fn apply_sector(mats: &CouplingMatrices, basis: &SectorBasis, v: &[f64], out: &mut [f64]) {
    let n = basis.n;
    let diag = mats.gamma0 * basis.excitations() as f64;
    for (a, &s) in basis.states.iter().enumerate() {
        let mut acc = diag * v[a];
        let mut excited = s;
        while excited != 0 {
            let i = excited.trailing_zeros() as usize;
            excited &= excited - 1;
            let row = &mats.gamma[i * n..(i + 1) * n];
            let mut ground = !s & ((1u32 << n) - 1);
            while ground != 0 {
                let j = ground.trailing_zeros() as usize;
                ground &= ground - 1;
                // Source state has j excited and i in the ground state.
                let t = s ^ (1 << i) ^ (1 << j);
                acc += row[j] * v[basis.index(t)];
            }
        }
        out[a] = acc;
    }
}

/// Explicit matrix of the rate operator in one sector.
pub fn sector_matrix(mats: &CouplingMatrices, basis: &SectorBasis) -> Mat<f64> {
    let dim = basis.len();
    let mut m = Mat::<f64>::zeros(dim, dim);
    let n = basis.n;
    let diag = mats.gamma0 * basis.excitations() as f64;
    for (a, &s) in basis.states.iter().enumerate() {
        m[(a, a)] += diag;
        for i in (0..n).filter(|&i| s >> i & 1 == 1) {
            for j in (0..n).filter(|&j| s >> j & 1 == 0) {
                let t = s ^ (1 << i) ^ (1 << j);
                m[(a, basis.index(t))] += mats.gamma_at(i, j);
            }
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    /// Sectors up to this dimension are diagonalized densely.
    pub dense_max_dim: usize,
    pub lanczos_tol: f64,
    pub lanczos_max_iters: usize,
    pub seed: u64,
    /// Force one method for every sector.
    pub force: Option<Method>,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            dense_max_dim: 1024,
            lanczos_tol: 1e-10,
            lanczos_max_iters: 600,
            seed: crate::lattice::DEFAULT_SEED,
            force: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactResult {
    pub rstar_exact: f64,
    /// Number of ground-state emitters in the maximizing sector.
    pub argmax_sector: usize,
    /// Largest eigenvalue per sector, indexed by the number of ground-state emitters.
    pub per_sector_max: Vec<f64>,
    pub method: Method,
}

/// Largest eigenvalue of the rate operator over all excitation sectors.
pub fn exact_rstar(mats: &CouplingMatrices, opts: &ExactOptions) -> Result<ExactResult> {
    let n = mats.n;
    if n > MAX_EXACT_ATOMS {
        return Err(Error::invalid(format!(
            "exact diagonalization supports at most {MAX_EXACT_ATOMS} emitters (got {n})"
        )));
    }
    let per_sector: Vec<(f64, Method)> = (0..=n)
        .into_par_iter()
        .map(|m| {
            let basis = SectorBasis::new(n, m)?;
            sector_top(mats, &basis, opts)
        })
        .collect::<Result<_>>()?;
    let (argmax_sector, &(rstar_exact, _)) = per_sector
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(b.0.cmp(&a.0)))
        .expect("at least one sector");
    let method = if per_sector.iter().any(|(_, m)| *m == Method::Lanczos) {
        Method::Lanczos
    } else {
        Method::Dense
    };
    Ok(ExactResult {
        rstar_exact,
        argmax_sector,
        per_sector_max: per_sector.iter().map(|(v, _)| *v).collect(),
        method,
    })
}

/// Largest eigenvalue of one sector and the method used.
pub fn sector_top(mats: &CouplingMatrices, basis: &SectorBasis, opts: &ExactOptions) -> Result<(f64, Method)> {
    let dim = basis.len();
    let method = opts.force.unwrap_or(if dim <= opts.dense_max_dim {
        Method::Dense
    } else {
        Method::Lanczos
    });
    match method {
        Method::Dense => {
            let eig = crate::spectral::eigenvalues_ascending(&sector_matrix(mats, basis))?;
            Ok((*eig.last().expect("non-empty sector"), Method::Dense))
        }
        Method::Lanczos => {
            let seed = opts.seed ^ (basis.m_ground as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let top = lanczos_top(|v, out| apply_sector(mats, basis, v, out), dim, opts, seed)?;
            Ok((top, Method::Lanczos))
        }
    }
}

/// Largest eigenvalue of a symmetric operator by restarted Lanczos with full
/// reorthogonalization inside each cycle.
///
/// `lanczos_max_iters` bounds the operator applications of one start. A start that
/// fails to converge is retried twice with fresh seeds.
pub fn lanczos_top<F>(apply: F, dim: usize, opts: &ExactOptions, seed: u64) -> Result<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    if dim == 0 {
        return Err(Error::invalid("empty operator"));
    }
    let mut last_residual = f64::NAN;
    for attempt in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0xD1B5_4A32_D192_ED03)));
        match lanczos_run(&apply, dim, opts, &mut rng) {
            Ok(v) => return Ok(v),
            Err(residual) => last_residual = residual,
        }
    }
    Err(Error::NonConvergence(format!(
        "Lanczos did not reach tolerance {} in {} iterations (residual {last_residual:e})",
        opts.lanczos_tol, opts.lanczos_max_iters
    )))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One Lanczos run with explicit restarts from the current Ritz vector, so at most
/// `KRYLOV_DIM` basis vectors are held at once. On failure returns the last residual.
fn lanczos_run<F>(apply: &F, dim: usize, opts: &ExactOptions, rng: &mut ChaCha8Rng) -> std::result::Result<f64, f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut start: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let mut residual = f64::INFINITY;
    let mut budget = opts.lanczos_max_iters;
    while budget > 0 {
        let steps = budget.min(KRYLOV_DIM).min(dim);
        budget -= steps;
        match lanczos_cycle(apply, &start, steps, opts.lanczos_tol) {
            Cycle::Converged(theta) => return Ok(theta),
            Cycle::Restart { ritz, residual: r } => {
                start = ritz;
                residual = r;
            }
        }
    }
    Err(residual)
}

/// Krylov vectors kept before a restart.
const KRYLOV_DIM: usize = 60;

enum Cycle {
    Converged(f64),
    Restart { ritz: Vec<f64>, residual: f64 },
}

fn lanczos_cycle<F>(apply: &F, start: &[f64], steps: usize, tol: f64) -> Cycle
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = start.len();
    let norm = dot(start, start).sqrt();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    basis.push(start.iter().map(|x| x / norm).collect());
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut w = vec![0.0; dim];
    loop {
        let j = basis.len() - 1;
        apply(&basis[j], &mut w);
        alpha.push(dot(&basis[j], &w));
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for qk in &basis {
                let c = dot(qk, &w);
                w.iter_mut().zip(qk).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();
        let last = j + 1 == steps;
        let breakdown = b <= 1e-13 * alpha.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if j % 5 == 4 || last || breakdown {
            let (theta, y) = tridiagonal_top(&alpha, &beta);
            let residual = b * y[j].abs();
            if residual <= tol * theta.abs().max(1.0) || breakdown {
                return Cycle::Converged(theta);
            }
            if last {
                let mut ritz = vec![0.0; dim];
                for (qk, c) in basis.iter().zip(&y) {
                    ritz.iter_mut().zip(qk).for_each(|(x, q)| *x += c * q);
                }
                return Cycle::Restart { ritz, residual };
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

/// Largest eigenvalue of the tridiagonal matrix and its eigenvector.
fn tridiagonal_top(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let t = Mat::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("small tridiagonal eigenproblem");
    let s = evd.S().column_vector();
    let u = evd.U();
    (s[k - 1], (0..k).map(|i| u[(i, k - 1)]).collect())
}

/// Summary statistics of the decay rate over Haar-random states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HaarStats {
    pub samples: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Sample Haar-random states on the full `2^N` space and evaluate their decay rate.
pub fn haar_rate_samples(mats: &CouplingMatrices, n_samples: usize, seed: u64) -> Result<HaarStats> {
    let n = mats.n;
    if n > MAX_HAAR_ATOMS {
        return Err(Error::invalid(format!(
            "Haar sampling supports at most {MAX_HAAR_ATOMS} emitters (got {n})"
        )));
    }
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let bases: Vec<SectorBasis> = (0..=n).map(|m| SectorBasis::new(n, m)).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = 1usize << n;
    let mut rates = Vec::with_capacity(n_samples);
    let mut re = vec![0.0; full];
    let mut im = vec![0.0; full];
    for _ in 0..n_samples {
        for k in 0..full {
            re[k] = StandardNormal.sample(&mut rng);
            im[k] = StandardNormal.sample(&mut rng);
        }
        let norm2 = dot(&re, &re) + dot(&im, &im);
        let mut total = 0.0;
        for basis in &bases {
            let dim = basis.len();
            let mut out = vec![0.0; dim];
            for part in [&re, &im] {
                let v: Vec<f64> = basis.states.iter().map(|&s| part[s as usize]).collect();
                apply_sector(mats, basis, &v, &mut out);
                total += dot(&v, &out);
            }
        }
        rates.push(total / norm2);
    }
    let count = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / count;
    let var = if rates.len() > 1 {
        rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    Ok(HaarStats {
        samples: rates.len(),
        mean,
        std: var.sqrt(),
        min: rates.iter().copied().fold(f64::INFINITY, f64::min),
        max: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
