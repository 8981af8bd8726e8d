//! Eigen-analysis of the decay matrix: collective rates, the brightest channel and
//! how delocalized it is, plus a momentum-space view of that channel.

use std::io::Write;

use faer::{Mat, Side};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::CouplingMatrices;
use crate::lattice::{generate_lattice, AtomArray};

/// Collective decay rates and the dominant channel of a decay matrix.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    /// Sorted in descending order.
    pub eigenvalues: Vec<f64>,
    pub gamma_max: f64,
    /// Unit eigenvector of `gamma_max`; its largest-magnitude entry is positive.
    pub dominant_vec: Vec<f64>,
    pub delta: f64,
    pub gamma0: f64,
    /// How many eigenvalues tie with the largest one.
    pub degeneracy: usize,
}

/// All eigenvalues of a symmetric matrix in ascending order.
pub fn eigenvalues_ascending(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?} for a {}x{} matrix", a.nrows(), a.ncols())))
}

/// Largest eigenvalue of the decay matrix without computing eigenvectors.
pub fn gamma_max(mats: &CouplingMatrices) -> Result<f64> {
    let eig = eigenvalues_ascending(&mats.gamma_mat())?;
    Ok(*eig.last().expect("non-empty matrix"))
}

/// Full eigendecomposition of the decay matrix.
pub fn decompose(mats: &CouplingMatrices) -> Result<SpectralSummary> {
    let n = mats.n;
    let a = mats.gamma_mat();
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|e| {
        let max_abs = mats.gamma.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Error::Eigen(format!("{e:?}; n = {n}, max |entry| = {max_abs}"))
    })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut eigenvalues: Vec<f64> = (0..n).map(|i| s[i]).collect();
    eigenvalues.reverse();
    let top = n - 1;
    let mut dominant_vec: Vec<f64> = (0..n).map(|i| u[(i, top)]).collect();
    orient(&mut dominant_vec);
    let gamma_max = eigenvalues[0];
    let tie = 1e-9 * gamma_max.abs().max(mats.gamma0);
    let degeneracy = eigenvalues
        .iter()
        .take_while(|&&x| gamma_max - x <= tie)
        .count();
    let delta = delocalization_delta(&dominant_vec)?;
    Ok(SpectralSummary {
        eigenvalues,
        gamma_max,
        dominant_vec,
        delta,
        gamma0: mats.gamma0,
        degeneracy,
    })
}

/// Flip the sign so the largest-magnitude entry is positive.
fn orient(v: &mut [f64]) {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Relative fluctuation of the entry magnitudes of a unit vector:
/// `sqrt(N / ||v||_1^2 - 1)`, clamped at zero.
pub fn delocalization_delta(v: &[f64]) -> Result<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 == 0.0 {
        return Err(Error::invalid("zero vector has no delocalization"));
    }
    let ratio = v.len() as f64 / (l1 * l1) - 1.0;
    Ok(ratio.max(0.0).sqrt())
}

/// Cyclic Jacobi eigensolver for a symmetric row-major matrix.
///
/// Independent from the main backend and used to cross-check it. Returns the
/// eigenvalues in ascending order and the matching eigenvectors as columns of a
/// row-major matrix.
pub fn jacobi_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != n * n {
        return Err(Error::invalid("matrix size mismatch"));
    }
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut converged = false;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Eigen("Jacobi sweeps exhausted".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[a * n + a].total_cmp(&m[b * n + b]));
    let values = order.iter().map(|&k| m[k * n + k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + k];
        }
    }
    Ok((values, vectors))
}

/// Weight of one lattice momentum in the dominant channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumWeight {
    /// Wavevector in units of the free-space wavenumber.
    pub k: [f64; 3],
    pub weight: f64,
}

/// Discrete Fourier weights `|a_k|^2` of a vector living on an ordered lattice.
///
/// The momenta form the reciprocal grid of the finite lattice, centered on zero,
/// so the weights sum to one for a unit vector.
pub fn momentum_distribution(vec: &[f64], array: &AtomArray) -> Result<Vec<MomentumWeight>> {
    let spec = &array.spec;
    let ordered = generate_lattice(spec)?;
    if vec.len() != array.len() {
        return Err(Error::invalid("vector length does not match the array"));
    }
    let on_lattice = ordered.positions.len() == array.positions.len()
        && ordered
            .positions
            .iter()
            .zip(&array.positions)
            .all(|(a, b)| (0..3).all(|c| (a[c] - b[c]).abs() <= 1e-12 * spec.spacing.max(1.0)));
    if !on_lattice {
        return Err(Error::invalid("momentum distribution needs an ordered lattice"));
    }
    let n = spec.n_per_axis;
    let step = 1.0 / (n as f64 * spec.spacing);
    let offset = (n / 2) as f64;
    let axes: &[usize] = match spec.dimension {
        1 => &[2],
        2 => &[0, 1],
        _ => &[0, 1, 2],
    };
    let count = array.len();
    let norm = 1.0 / (count as f64).sqrt();
    let mut out = Vec::with_capacity(count);
    for flat in 0..count {
        let mut k = [0.0; 3];
        let mut rem = flat;
        for &axis in axes.iter().rev() {
            k[axis] = ((rem % n) as f64 - offset) * step;
            rem /= n;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (p, a) in array.positions.iter().zip(vec) {
            let phase = 2.0 * std::f64::consts::PI * (k[0] * p[0] + k[1] * p[1] + k[2] * p[2]);
            let (s, c) = phase.sin_cos();
            re += a * c;
            im += a * s;
        }
        out.push(MomentumWeight {
            k,
            weight: (re * re + im * im) * norm * norm,
        });
    }
    Ok(out)
}

pub fn write_spectrum_csv<W: Write>(eigenvalues: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "eigenvalue"])?;
    for (i, x) in eigenvalues.iter().enumerate() {
        w.write_record(&[i.to_string(), format!("{x:e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_momentum_csv<W: Write>(weights: &[MomentumWeight], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kx", "ky", "kz", "weight"])?;
    for m in weights {
        w.write_record(&[
            format!("{:e}", m.k[0]),
            format!("{:e}", m.k[1]),
            format!("{:e}", m.k[2]),
            format!("{:e}", m.weight),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::build_coupling_matrices;
    use crate::lattice::LatticeSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize, d: f64, pol: [f64; 3]) -> (AtomArray, CouplingMatrices) {
        let spec = LatticeSpec::new(1, n, d, pol);
        let arr = generate_lattice(&spec).unwrap();
        let m = build_coupling_matrices(&arr, &pol).unwrap();
        (arr, m)
    }

    #[test]
    fn dicke_spectrum() {
        let s = decompose(&CouplingMatrices::dicke(4)).unwrap();
        assert!((s.eigenvalues[0] - 4.0).abs() < 1e-12);
        assert!(s.eigenvalues[1..].iter().all(|x| x.abs() < 1e-12));
        assert!(s.dominant_vec.iter().all(|x| (x - 0.5).abs() < 1e-12));
        assert!(s.delta < 1e-6);
        assert_eq!(s.degeneracy, 1);
    }

    #[test]
    fn identity_spectrum() {
        let s = decompose(&CouplingMatrices::independent(5)).unwrap();
        assert!(s.eigenvalues.iter().all(|x| (x - 1.0).abs() < 1e-14));
        assert_eq!(s.gamma_max, 1.0);
        assert_eq!(s.degeneracy, 5);
    }

    #[test]
    fn chain_matches_jacobi() {
        let (_, m) = chain(50, 0.4, [1.0, 0.0, 0.0]);
        let s = decompose(&m).unwrap();
        let (vals, _) = jacobi_eigen(&m.gamma, m.n).unwrap();
        let top = *vals.last().unwrap();
        assert!((s.gamma_max - top).abs() <= 1e-9 * top);
        for (a, b) in s.eigenvalues.iter().rev().zip(&vals) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn residuals_and_trace() {
        let (_, m) = chain(40, 0.3, [0.0, 0.0, 1.0]);
        let s = decompose(&m).unwrap();
        let trace: f64 = s.eigenvalues.iter().sum();
        assert!((trace - m.n as f64).abs() < 1e-8 * m.n as f64);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let v = &s.dominant_vec;
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-10);
        let frob = m.gamma.iter().map(|x| x * x).sum::<f64>().sqrt();
        let res: f64 = (0..m.n)
            .map(|i| {
                let gv: f64 = (0..m.n).map(|j| m.gamma_at(i, j) * v[j]).sum();
                (gv - s.gamma_max * v[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-8 * frob);
        let pivot = v.iter().fold(0.0f64, |b, &x| if x.abs() > b.abs() { x } else { b });
        assert!(pivot > 0.0);
    }

    #[test]
    fn delta_examples() {
        let n = 9;
        let u = vec![1.0 / (n as f64).sqrt(); n];
        assert!(delocalization_delta(&u).unwrap() < 1e-7);
        let mut e = vec![0.0; 10];
        e[0] = 1.0;
        assert!((delocalization_delta(&e).unwrap() - 3.0).abs() < 1e-12);
        let h = 0.5f64.sqrt();
        assert!((delocalization_delta(&[h, h, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(delocalization_delta(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn jacobi_vectors_diagonalize() {
        let a = vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let (vals, vecs) = jacobi_eigen(&a, 3).unwrap();
        let expected = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (a, b) in vals.iter().zip(expected) {
            assert!((a - b).abs() < 1e-13);
        }
        for col in 0..3 {
            for row in 0..3 {
                let av: f64 = (0..3).map(|k| a[row * 3 + k] * vecs[k * 3 + col]).sum();
                assert!((av - vals[col] * vecs[row * 3 + col]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn momentum_of_uniform_vector_is_a_peak() {
        let spec = LatticeSpec::new(2, 6, 0.3, [1.0, 0.0, 0.0]);
        let arr = generate_lattice(&spec).unwrap();
        let v = vec![1.0 / 6.0; 36];
        let w = momentum_distribution(&v, &arr).unwrap();
        let peak = w.iter().find(|m| m.k == [0.0, 0.0, 0.0]).unwrap();
        assert!((peak.weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn momentum_parseval_for_random_vector() {
        let spec = LatticeSpec::new(3, 4, 0.35, [1.0, 0.0, 0.0]);
        let arr = generate_lattice(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut v: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        let total: f64 = momentum_distribution(&v, &arr).unwrap().iter().map(|m| m.weight).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn chain_channel_peaks_near_light_line() {
        let pol = [1.0, 0.0, 0.0];
        let mut widths = Vec::new();
        for n in [30, 60] {
            let (arr, m) = chain(n, 0.3, pol);
            let s = decompose(&m).unwrap();
            let w = momentum_distribution(&s.dominant_vec, &arr).unwrap();
            let best = w.iter().max_by(|a, b| a.weight.total_cmp(&b.weight)).unwrap();
            assert!((best.k[2].abs() - 1.0).abs() < 0.15, "peak at {:?}", best.k);
            let mean_abs: f64 = w.iter().map(|m| m.weight * m.k[2].abs()).sum();
            let var: f64 = w.iter().map(|m| m.weight * (m.k[2].abs() - mean_abs).powi(2)).sum();
            widths.push(var.sqrt());
        }
        assert!(widths[1] < widths[0]);
    }

    #[test]
    fn momentum_rejects_disorder() {
        let mut spec = LatticeSpec::new(1, 5, 0.3, [1.0, 0.0, 0.0]);
        spec.disorder_eta = 0.1;
        let arr = crate::lattice::build_array(&spec).unwrap();
        assert!(momentum_distribution(&[0.2; 5], &arr).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::{prop_assert, prop_assume, proptest, ProptestConfig};

        fn random_psd(n: usize, seed: u64) -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum();
                }
            }
            a
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn weyl_inequality(n in 2usize..12, seed: u64, eps in 0.0f64..0.5) {
                let a = random_psd(n, seed);
                let e = random_psd(n, seed ^ 0xABCD);
                let scale = eps / e.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                let pert: Vec<f64> = e.iter().map(|x| x * scale * if seed % 2 == 0 { 1.0 } else { -1.0 }).collect();
                let sum: Vec<f64> = a.iter().zip(&pert).map(|(x, y)| x + y).collect();
                let top = |m: &[f64]| *eigenvalues_ascending(&Mat::from_fn(n, n, |i, j| m[i * n + j])).unwrap().last().unwrap();
                let spec_norm = eigenvalues_ascending(&Mat::from_fn(n, n, |i, j| pert[i * n + j]))
                    .unwrap().iter().fold(0.0f64, |m, x| m.max(x.abs()));
                prop_assert!((top(&sum) - top(&a)).abs() <= spec_norm + 1e-10);
            }

            #[test]
            fn delta_is_bounded(n in 1usize..40, seed: u64) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                prop_assume!(norm > 1e-6);
                v.iter_mut().for_each(|x| *x /= norm);
                let d = delocalization_delta(&v).unwrap();
                prop_assert!(d >= 0.0 && d <= ((n - 1) as f64).sqrt() + 1e-9);
            }
        }
    }
}
