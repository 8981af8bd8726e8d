//! Closed-form bounds on the maximal decay rate and the physical quantities
//! derived from them: burst onset and timescale, drive thresholds and
//! retardation limits.
//!
//! All rates are in units of the single-emitter rate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::{CouplingMatrices, K0};
use crate::spectral::SpectralSummary;

/// Every analytic lower and upper bound on the maximal decay rate.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub n: usize,
    pub gamma0: f64,
    pub gamma_max: f64,
    pub delta: f64,
    /// Sum of the off-diagonal couplings.
    pub s_sum: f64,
    pub lb_trivial: f64,
    pub lb_product: f64,
    pub lb_delocalized: f64,
    pub lb_best: f64,
    pub ub: f64,
    /// All couplings non-negative: the uniform superposition product state is optimal
    /// and the maximal rate grows like the coupling sum.
    pub in_phase: bool,
}

/// Decay rate of the product state with every spin at polar angle `theta`.
pub fn product_state_rate(theta: f64, n: usize, gamma0: f64, s_sum: f64) -> f64 {
    let nf = n as f64;
    0.5 * nf * gamma0 * (1.0 - theta.cos()) + 0.25 * s_sum * theta.sin().powi(2)
}

/// Maximum of [`product_state_rate`] over the polar angle.
pub fn product_state_max(n: usize, gamma0: f64, s_sum: f64) -> f64 {
    let ng = n as f64 * gamma0;
    if s_sum >= ng {
        (ng + s_sum).powi(2) / (4.0 * s_sum)
    } else {
        ng
    }
}

pub fn bounds_report(summary: &SpectralSummary, mats: &CouplingMatrices) -> BoundsReport {
    let n = mats.n;
    let nf = n as f64;
    let gamma0 = mats.gamma0;
    let gamma_max = summary.gamma_max;
    let delta = summary.delta;
    let s_sum = mats.off_diagonal_sum();
    let lb_trivial = nf * gamma0;
    let lb_product = product_state_max(n, gamma0, s_sum);
    let lb_delocalized = nf * gamma_max / (4.0 * (delta * delta + 1.0));
    let lb_best = lb_trivial.max(lb_product).max(lb_delocalized);
    let ub = 0.5 * nf * (3.0 * gamma_max - gamma0);
    let in_phase = (0..n).all(|i| (0..n).all(|j| mats.gamma_at(i, j) >= 0.0));
    BoundsReport {
        n,
        gamma0,
        gamma_max,
        delta,
        s_sum,
        lb_trivial,
        lb_product,
        lb_delocalized,
        lb_best,
        ub,
        in_phase,
    }
}

/// Rate of the spin-wave state with `m` de-excitations of the brightest channel.
pub fn spin_wave_rate(m: usize, n: usize, gamma_max: f64, gamma0: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("spin-wave rates need at least two emitters"));
    }
    if m > n {
        return Err(Error::invalid("more de-excitations than emitters"));
    }
    let (m, n) = (m as f64, n as f64);
    Ok(((n - m) * (n - m - 1.0) * gamma0 + m * (n - m) * gamma_max) / (n - 1.0))
}

/// Optimal de-excitation number of the spin-wave family, rounded half to even and
/// clamped to `[0, n]`.
pub fn optimal_m(n: usize, gamma_max: f64, gamma0: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::invalid("spin-wave rates need at least two emitters"));
    }
    if (gamma_max - gamma0).abs() <= 1e-12 * gamma0 {
        return Ok(0);
    }
    let nf = n as f64;
    let raw = 0.5 * nf * (1.0 + 2.0 / nf + (nf - 1.0) / nf * gamma0 / (gamma0 - gamma_max));
    Ok(raw.round_ties_even().clamp(0.0, nf) as usize)
}

/// Initial slope of the decay rate from the fully excited state.
pub fn burst_slope(mats: &CouplingMatrices) -> f64 {
    let frob2: f64 = mats.gamma.iter().map(|x| x * x).sum();
    frob2 - 2.0 * mats.n as f64 * mats.gamma0 * mats.gamma0
}

/// Numerical rank with singular values below `1e-10 * gamma_max` treated as zero.
pub fn numerical_rank(summary: &SpectralSummary) -> usize {
    let tol = 1e-10 * summary.gamma_max.abs();
    summary.eigenvalues.iter().filter(|x| x.abs() > tol).count()
}

/// Upper bound on the burst slope given a maximal rate `r_star`.
pub fn burst_slope_cap(n: usize, gamma0: f64, delta: f64, rank: usize, r_star: f64) -> f64 {
    let nf = n as f64;
    let spread = 1.0 + delta * delta;
    16.0 / (nf * nf) * spread * spread * rank as f64 * r_star * r_star - 2.0 * nf * gamma0 * gamma0
}

/// Burst timescale and the inverse per-atom rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BurstTime {
    pub tau0: f64,
    pub t_r: f64,
    /// The logarithm is not positive, so no burst timescale exists.
    pub degenerate: bool,
}

/// Burst timescale for a per-atom maximal rate `beta * n^alpha`.
pub fn burst_time(n: usize, alpha: f64, beta: f64) -> Result<BurstTime> {
    if n == 0 || !(beta > 0.0) {
        return Err(Error::invalid("burst time needs n >= 1 and beta > 0"));
    }
    Ok(burst_time_from_rate(beta * (n as f64).powf(alpha)))
}

fn burst_time_from_rate(rate_per_atom: f64) -> BurstTime {
    let t_r = 1.0 / rate_per_atom;
    let arg = rate_per_atom / 2.0;
    if arg <= 1.0 {
        BurstTime {
            tau0: 0.0,
            t_r,
            degenerate: true,
        }
    } else {
        BurstTime {
            tau0: t_r * arg.ln(),
            t_r,
            degenerate: false,
        }
    }
}

/// Ratio of transition frequency to decay rate typical of optical transitions.
pub const DEFAULT_OMEGA_RATIO: f64 = 1e8;

/// Largest per-axis size for which retardation across the array stays negligible.
pub fn markov_limit(dimension: u8, d: f64, omega_ratio: f64) -> Result<f64> {
    if !(1..=3).contains(&dimension) || !(d > 0.0) || !(omega_ratio > 0.0) {
        return Err(Error::invalid("markov limit needs D in 1..=3, d > 0 and omega0/gamma0 > 0"));
    }
    let dim = f64::from(dimension);
    let x = K0 * d;
    let f = if x <= 1.0 {
        x.powf((dim - 1.0) / (dim + 1.0))
    } else {
        1.0 / x
    };
    Ok(omega_ratio.powf(2.0 / (dim + 1.0)) * f)
}

/// Atom number where array scaling takes over from independent decay.
pub fn crossover_n_crit(dimension: u8, d: f64) -> Result<f64> {
    let x = K0 * d;
    match dimension {
        2 => Ok(16.0 * x.powi(6) / (81.0 * std::f64::consts::PI.powi(2))),
        3 => Ok(125.0 * x.powi(6) / 27.0),
        1 => Err(Error::invalid("chains have no superlinear regime, so no crossover")),
        _ => Err(Error::invalid("dimension must be 2 or 3")),
    }
}

/// Quantities relevant to driven and transient experiments.
#[derive(Debug, Clone, Serialize)]
pub struct DrivenReport {
    pub eta_c: f64,
    /// Pump bound from the best lower bound on the maximal rate.
    pub w_star_conservative: f64,
    /// Pump bound from the upper bound on the maximal rate.
    pub w_star_permissive: f64,
    /// Pump bound from the exact maximal rate, when known.
    pub w_star_exact: Option<f64>,
    pub r_dot0: f64,
    pub burst: bool,
    /// Burst-slope cap evaluated at the upper bound (or the exact rate when known).
    pub r_dot0_cap: f64,
    pub rank: usize,
    pub tau0: f64,
    pub t_r: f64,
    pub burst_time_degenerate: bool,
    pub markov_limit: Option<f64>,
    pub n_crit: Option<f64>,
    pub typical_rate: f64,
}

/// Lattice context for the geometry-dependent entries of [`DrivenReport`].
#[derive(Debug, Clone, Copy)]
pub struct LatticeContext {
    pub dimension: u8,
    pub spacing: f64,
    pub omega_ratio: f64,
}

pub fn driven_report(
    summary: &SpectralSummary,
    bounds: &BoundsReport,
    mats: &CouplingMatrices,
    lattice: Option<LatticeContext>,
    exact_rstar: Option<f64>,
) -> Result<DrivenReport> {
    let n = bounds.n;
    let nf = n as f64;
    let gamma0 = bounds.gamma0;
    let r_dot0 = burst_slope(mats);
    let rank = numerical_rank(summary);
    let r_ref = exact_rstar.unwrap_or(bounds.ub);
    let burst = burst_time_from_rate(bounds.gamma_max / gamma0);
    let (markov, n_crit) = match lattice {
        Some(ctx) => (
            Some(markov_limit(ctx.dimension, ctx.spacing, ctx.omega_ratio)?),
            crossover_n_crit(ctx.dimension, ctx.spacing).ok(),
        ),
        None => (None, None),
    };
    Ok(DrivenReport {
        eta_c: 0.5 * gamma0 * (1.0 + bounds.gamma_max / gamma0).sqrt(),
        w_star_conservative: 2.0 * bounds.lb_best / nf,
        w_star_permissive: 2.0 * bounds.ub / nf,
        w_star_exact: exact_rstar.map(|r| 2.0 * r / nf),
        r_dot0,
        burst: r_dot0 > 0.0,
        r_dot0_cap: burst_slope_cap(n, gamma0, bounds.delta, rank, r_ref),
        rank,
        tau0: burst.tau0,
        t_r: burst.t_r,
        burst_time_degenerate: burst.degenerate,
        markov_limit: markov,
        n_crit,
        typical_rate: typical_rate(n, gamma0),
    })
}

/// Bounds on how fast an observable can change, given the maximal rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableBounds {
    /// For a positive operator of norm `a_norm`.
    pub positive_operator: Option<f64>,
    /// For a sum of `q` terms, each acting on at most `k` emitters with unit norm.
    pub local_observable: Option<f64>,
}

pub fn observable_rate_bounds(
    r_star: f64,
    gamma0: f64,
    a_norm: Option<f64>,
    locality: Option<(usize, usize)>,
) -> Result<ObservableBounds> {
    if r_star < 0.0 {
        return Err(Error::invalid("maximal rate must be non-negative"));
    }
    if a_norm.is_none() && locality.is_none() {
        return Err(Error::invalid("need an operator norm or a locality (k, Q)"));
    }
    Ok(ObservableBounds {
        positive_operator: a_norm.map(|a| r_star * a),
        local_observable: locality.map(|(k, q)| 2.0 * (k * q) as f64 * (gamma0 * r_star).sqrt()),
    })
}

/// Mean decay rate of a Haar-random state.
pub fn typical_rate(n: usize, gamma0: f64) -> f64 {
    0.5 * n as f64 * gamma0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::decompose;

    fn report(m: &CouplingMatrices) -> BoundsReport {
        bounds_report(&decompose(m).unwrap(), m)
    }

    #[test]
    fn product_rate_endpoints() {
        assert_eq!(product_state_rate(0.0, 4, 1.0, 12.0), 0.0);
        assert!((product_state_rate(std::f64::consts::PI, 4, 1.0, 12.0) - 4.0).abs() < 1e-12);
        let theta = (-1.0f64 / 3.0).acos();
        let r = product_state_rate(theta, 4, 1.0, 12.0);
        assert!((r - 16.0 * 16.0 / 48.0).abs() < 1e-12);
        assert!((product_state_max(4, 1.0, 12.0) - r).abs() < 1e-12);
    }

    #[test]
    fn independent_bounds_are_tight() {
        let b = report(&CouplingMatrices::independent(10));
        assert!((b.lb_best - 10.0).abs() < 1e-12);
        assert!((b.ub - 10.0).abs() < 1e-12);
    }

    #[test]
    fn dicke_bounds() {
        let b = report(&CouplingMatrices::dicke(10));
        assert!((b.lb_delocalized - 25.0).abs() < 1e-9);
        assert!((b.lb_product - 1000.0 / 36.0).abs() < 1e-9);
        assert!((b.ub - 145.0).abs() < 1e-9);
        assert!(b.lb_best <= 30.0 && 30.0 <= b.ub);
        assert!(b.in_phase);
    }

    #[test]
    fn spin_wave_examples() {
        assert!((spin_wave_rate(1, 2, 2.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(spin_wave_rate(0, 7, 3.0, 1.0).unwrap(), 7.0);
        assert_eq!(spin_wave_rate(7, 7, 3.0, 1.0).unwrap(), 0.0);
        assert!(spin_wave_rate(0, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn optimal_m_examples() {
        assert_eq!(optimal_m(10, 1.0, 1.0).unwrap(), 0);
        assert_eq!(optimal_m(10, 3.0, 1.0).unwrap(), 4);
        let m = optimal_m(100, 100.0, 1.0).unwrap();
        assert!(m == 50 || m == 51);
    }

    #[test]
    fn dicke_spin_wave_reaches_exact_rate() {
        for n in 3..40usize {
            let m = optimal_m(n, n as f64, 1.0).unwrap();
            let r = spin_wave_rate(m, n, n as f64, 1.0).unwrap();
            let exact = (n * (n + 2)) as f64 / 4.0;
            assert!((r - exact).abs() <= exact / n as f64, "n = {n}: {r} vs {exact}");
        }
    }

    #[test]
    fn burst_slope_examples() {
        assert_eq!(burst_slope(&CouplingMatrices::dicke(4)), 8.0);
        assert_eq!(burst_slope(&CouplingMatrices::independent(4)), -4.0);
    }

    #[test]
    fn burst_times() {
        let n = 1000;
        let t = burst_time(n, 1.0, 1.0).unwrap();
        assert!((t.tau0 - (500f64).ln() / 1000.0).abs() < 1e-15);
        let t = burst_time(n, 0.0, 40.0).unwrap();
        assert!((t.tau0 - 20f64.ln() / 40.0).abs() < 1e-15);
        let t = burst_time(n, 0.0, 2.0).unwrap();
        assert!(t.degenerate && t.tau0 == 0.0);
    }

    #[test]
    fn markov_limits() {
        let d = 0.1;
        let x = K0 * d;
        let v = markov_limit(2, d, DEFAULT_OMEGA_RATIO).unwrap();
        assert!((v / (1e16f64.powf(1.0 / 3.0) * x.powf(1.0 / 3.0)) - 1.0).abs() < 1e-12);
        let v = markov_limit(3, d, DEFAULT_OMEGA_RATIO).unwrap();
        assert!((v / (1e4 * x.sqrt()) - 1.0).abs() < 1e-12);
        assert!((markov_limit(1, d, DEFAULT_OMEGA_RATIO).unwrap() - 1e8).abs() < 1e-4);
        let far = markov_limit(1, 1.0, DEFAULT_OMEGA_RATIO).unwrap();
        assert!((far - 1e8 / K0).abs() < 1e-4);
    }

    #[test]
    fn crossover_values() {
        assert!((crossover_n_crit(2, 0.4).unwrap() - 5.05).abs() < 0.01);
        assert!((crossover_n_crit(3, 0.4).unwrap() - 1166.8).abs() < 0.5);
        assert!(crossover_n_crit(1, 0.4).is_err());
        let pi2 = std::f64::consts::PI.powi(2);
        for d in [0.1, 0.3, 0.45] {
            let ratio = crossover_n_crit(3, d).unwrap() / crossover_n_crit(2, d).unwrap();
            assert!((ratio - 125.0 * 81.0 * pi2 / (27.0 * 16.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn driven_thresholds() {
        let m = CouplingMatrices::independent(5);
        let s = decompose(&m).unwrap();
        let b = bounds_report(&s, &m);
        let r = driven_report(&s, &b, &m, None, None).unwrap();
        assert!((r.eta_c - 0.5f64.sqrt()).abs() < 1e-12);

        let n = 12;
        let m = CouplingMatrices::dicke(n);
        let s = decompose(&m).unwrap();
        let b = bounds_report(&s, &m);
        let exact = (n * (n + 2)) as f64 / 4.0;
        let r = driven_report(&s, &b, &m, None, Some(exact)).unwrap();
        assert!((r.w_star_exact.unwrap() - (n + 2) as f64 / 2.0).abs() < 1e-12);
        assert!(r.w_star_conservative <= r.w_star_exact.unwrap());
        assert!(r.w_star_exact.unwrap() <= r.w_star_permissive);
        assert_eq!(r.rank, 1);
        assert!(r.burst && r.r_dot0 <= r.r_dot0_cap + 1e-9);
        assert_eq!(r.typical_rate, 6.0);
    }

    #[test]
    fn eta_c_for_three() {
        let m = CouplingMatrices::from_gamma(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut s = decompose(&m).unwrap();
        s.gamma_max = 3.0;
        let b = bounds_report(&s, &m);
        let r = driven_report(&s, &b, &m, None, None).unwrap();
        assert!((r.eta_c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn observable_bounds() {
        let b = observable_rate_bounds(4.0, 1.0, Some(1.0), None).unwrap();
        assert_eq!(b.positive_operator, Some(4.0));
        let n = 9;
        let r = 6.0;
        let b = observable_rate_bounds(r, 1.0, None, Some((1, n))).unwrap();
        assert!((b.local_observable.unwrap() - 2.0 * n as f64 * r.sqrt()).abs() < 1e-12);
        let b = observable_rate_bounds(0.0, 1.0, Some(3.0), Some((2, 5))).unwrap();
        assert_eq!(b.positive_operator, Some(0.0));
        assert_eq!(b.local_observable, Some(0.0));
        assert!(observable_rate_bounds(1.0, 1.0, None, None).is_err());
    }

    #[test]
    fn typical_rates() {
        assert_eq!(typical_rate(8, 1.0), 4.0);
        assert_eq!(typical_rate(0, 1.0), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn product_max_matches_grid(n in 1usize..50, s_frac in -1.0f64..1.0) {
                let nf = n as f64;
                let s = if s_frac < 0.0 { s_frac * nf } else { s_frac * nf * (nf - 1.0) };
                let grid = (0..=10_000)
                    .map(|i| product_state_rate(std::f64::consts::PI * i as f64 / 10_000.0, n, 1.0, s))
                    .fold(f64::MIN, f64::max);
                let closed = product_state_max(n, 1.0, s);
                prop_assert!(closed >= grid - 1e-9);
                prop_assert!(closed - grid <= 1e-6 * closed.max(1.0));
            }

            #[test]
            fn ub_monotone_in_gamma_max(n in 1usize..100, g1 in 1.0f64..50.0, dg in 0.0f64..10.0) {
                let ub = |g: f64| 0.5 * n as f64 * (3.0 * g - 1.0);
                prop_assert!(ub(g1) <= ub(g1 + dg));
                prop_assert!(n as f64 <= ub(g1));
            }

            #[test]
            fn burst_slope_matches_summation(n in 1usize..12, seed: u64) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut g = vec![0.0; n * n];
                for i in 0..n {
                    g[i * n + i] = 1.0;
                    for j in 0..i {
                        let v: f64 = rng.random_range(-0.3..0.3);
                        g[i * n + j] = v;
                        g[j * n + i] = v;
                    }
                }
                let m = CouplingMatrices::from_gamma(n, g.clone()).unwrap();
                let mut brute = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        brute += g[i * n + j] * g[i * n + j];
                    }
                }
                brute -= 2.0 * n as f64;
                prop_assert!((burst_slope(&m) - brute).abs() <= 1e-10 * brute.abs().max(1.0));
            }
        }
    }
}
