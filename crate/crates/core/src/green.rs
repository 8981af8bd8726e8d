//! Free-space dyadic Green's tensor and the dipole coupling matrices built from it.
//!
//! With `x = k0 r` the tensor contracted with two real unit vectors reduces to
//! `c_iso(x) + c_dyad(x) cos^2`, where `cos` is the angle between the dipole and
//! the separation. The imaginary part gives the dissipative rate and the real
//! part the coherent exchange. Rates are in units of the single-emitter rate.

use std::f64::consts::PI;
use std::io::{Read, Write};

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{check_unit, AtomArray};

/// Free-space wavenumber with lengths measured in wavelengths.
pub const K0: f64 = 2.0 * PI;

/// Largest atom count accepted for dense storage.
pub const MAX_DENSE_ATOMS: usize = 46341;

/// Below this `k0 r` the rates switch to their Taylor series to avoid cancellation.
const SERIES_CUTOFF: f64 = 1e-2;

/// Isotropic and dyadic radiation kernels, scaled so that `Im` gives rates in units of the
/// single-emitter rate.
pub fn radiation_kernels(x: f64) -> (Complex64, Complex64) {
    let phase = Complex64::new(0.0, x).exp() * (1.5 / (x * x * x));
    let iso = Complex64::new(x * x - 1.0, x) * phase;
    let dyad = Complex64::new(3.0 - x * x, -3.0 * x) * phase;
    (iso, dyad)
}

/// Dissipative rate for dipoles perpendicular to their separation.
pub fn transverse_rate(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - x2 / 5.0 + 3.0 * x2 * x2 / 280.0
    } else {
        let (s, c) = x.sin_cos();
        1.5 * (s / x + c / (x * x) - s / (x * x * x))
    }
}

/// Dissipative rate for dipoles parallel to their separation.
pub fn longitudinal_rate(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - x2 / 10.0 + x2 * x2 / 280.0
    } else {
        let (s, c) = x.sin_cos();
        3.0 * (s / (x * x * x) - c / (x * x))
    }
}

/// The Green's tensor `G(r)` at the resonant frequency, for `r` in wavelengths.
pub fn green_tensor(r: [f64; 3]) -> Result<[[Complex64; 3]; 3]> {
    let dist = norm(&r);
    if dist == 0.0 {
        return Err(Error::SelfTerm);
    }
    let (iso, dyad) = radiation_kernels(K0 * dist);
    // Undo the 6 pi / k0 rate normalisation.
    let scale = K0 / (6.0 * PI);
    let mut g = [[Complex64::new(0.0, 0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let unit = if a == b { iso } else { Complex64::new(0.0, 0.0) };
            g[a][b] = (unit + dyad * (r[a] * r[b] / (dist * dist))) * scale;
        }
    }
    Ok(g)
}

/// Coherent and dissipative couplings `(J, Gamma)` between two emitters.
pub fn coupling_pair(ri: &[f64; 3], rj: &[f64; 3], pol: &[f64; 3]) -> Result<(f64, f64)> {
    let sep = [ri[0] - rj[0], ri[1] - rj[1], ri[2] - rj[2]];
    let dist = norm(&sep);
    if dist == 0.0 {
        return Err(Error::SelfTerm);
    }
    let x = K0 * dist;
    let cos = (sep[0] * pol[0] + sep[1] * pol[1] + sep[2] * pol[2]) / dist;
    let cos2 = cos * cos;
    let gamma = transverse_rate(x) * (1.0 - cos2) + longitudinal_rate(x) * cos2;
    let (iso, dyad) = radiation_kernels(x);
    let j = -0.5 * (iso.re + dyad.re * cos2);
    Ok((j, gamma))
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Dense symmetric coupling matrices in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    pub n: usize,
    pub gamma0: f64,
    pub gamma: Vec<f64>,
    pub jmat: Vec<f64>,
}

impl CouplingMatrices {
    /// Wrap a user-supplied decay matrix; the coherent part is left at zero.
    pub fn from_gamma(n: usize, gamma: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("empty coupling matrix"));
        }
        if gamma.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                gamma.len()
            )));
        }
        if gamma.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite matrix entry"));
        }
        let gamma0 = gamma[0];
        for i in 0..n {
            if (gamma[i * n + i] - gamma0).abs() > 1e-12 * gamma0.abs().max(1.0) {
                return Err(Error::invalid("diagonal entries must all be equal"));
            }
            for j in 0..i {
                let (a, b) = (gamma[i * n + j], gamma[j * n + i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::invalid(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        if gamma0 <= 0.0 {
            return Err(Error::invalid("diagonal rate must be positive"));
        }
        Ok(Self {
            n,
            gamma0,
            gamma,
            jmat: vec![0.0; n * n],
        })
    }

    /// All-to-all equal couplings: the Dicke limit.
    pub fn dicke(n: usize) -> Self {
        Self {
            n,
            gamma0: 1.0,
            gamma: vec![1.0; n * n],
            jmat: vec![0.0; n * n],
        }
    }

    /// Independent emitters.
    pub fn independent(n: usize) -> Self {
        let mut gamma = vec![0.0; n * n];
        for i in 0..n {
            gamma[i * n + i] = 1.0;
        }
        Self {
            n,
            gamma0: 1.0,
            gamma,
            jmat: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn gamma_at(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.n + j]
    }

    /// Decay matrix as a faer matrix.
    pub fn gamma_mat(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.gamma[i * self.n + j])
    }

    /// Sum of the off-diagonal decay couplings.
    pub fn off_diagonal_sum(&self) -> f64 {
        let total: f64 = self.gamma.iter().sum();
        total - self.n as f64 * self.gamma0
    }

    /// Write both matrices as `i,j,gamma,jcoupling` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "gamma", "jcoupling"])?;
        for i in 0..self.n {
            for j in 0..self.n {
                let k = i * self.n + j;
                w.write_record(&[
                    i.to_string(),
                    j.to_string(),
                    format!("{:e}", self.gamma[k]),
                    format!("{:e}", self.jmat[k]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read the CSV layout produced by [`CouplingMatrices::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["i", "j", "gamma", "jcoupling"] {
            return Err(Error::invalid("matrix CSV header must be i,j,gamma,jcoupling"));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse_err = |_| Error::invalid("malformed matrix CSV row");
            let i: usize = rec[0].trim().parse().map_err(parse_err)?;
            let j: usize = rec[1].trim().parse().map_err(parse_err)?;
            let g: f64 = rec[2].trim().parse().map_err(|_| Error::invalid("bad gamma"))?;
            let jc: f64 = rec[3].trim().parse().map_err(|_| Error::invalid("bad jcoupling"))?;
            rows.push((i, j, g, jc));
        }
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n * n != rows.len() {
            return Err(Error::invalid("matrix CSV must hold a full square matrix"));
        }
        let mut gamma = vec![f64::NAN; n * n];
        let mut jmat = vec![0.0; n * n];
        for (i, j, g, jc) in rows {
            if i >= n || j >= n {
                return Err(Error::invalid("matrix CSV index out of range"));
            }
            gamma[i * n + j] = g;
            jmat[i * n + j] = jc;
        }
        let mut mats = Self::from_gamma(n, gamma)?;
        mats.jmat = jmat;
        Ok(mats)
    }

    /// Binary layout: 8-byte magic, little-endian `u64` atom count, then the
    /// decay matrix and the coherent matrix as row-major little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        for x in self.gamma.iter().chain(&self.jmat) {
            out.write_all(&x.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; 16];
        input.read_exact(&mut header)?;
        if &header[..8] != BINARY_MAGIC {
            return Err(Error::invalid("not a coupling-matrix file (bad magic)"));
        }
        let n = u64::from_le_bytes(header[8..].try_into().expect("8 bytes")) as usize;
        if n == 0 || n > MAX_DENSE_ATOMS {
            return Err(Error::invalid(format!("unsupported matrix size {n}")));
        }
        let mut read_block = || -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * n * 8];
            input.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let gamma = read_block()?;
        let jmat = read_block()?;
        let mut mats = Self::from_gamma(n, gamma)?;
        mats.jmat = jmat;
        Ok(mats)
    }
}

pub const BINARY_MAGIC: &[u8; 8] = b"CDGAMMA1";

/// Fill the decay and coherent matrices for every pair of emitters.
pub fn build_coupling_matrices(array: &AtomArray, pol: &[f64; 3]) -> Result<CouplingMatrices> {
    check_unit(pol)?;
    let n = array.len();
    if n == 0 {
        return Err(Error::invalid("empty atom array"));
    }
    if n > MAX_DENSE_ATOMS {
        return Err(Error::invalid(format!(
            "{n} atoms exceed the dense-matrix limit of {MAX_DENSE_ATOMS}"
        )));
    }
    let pos = &array.positions;
    // Each row computes its upper triangle; the lower one is mirrored afterwards.
    let rows: Vec<Vec<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| coupling_pair(&pos[i], &pos[j], pol).map_err(|_| Error::CoincidentPositions(i, j)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut gamma = vec![0.0; n * n];
    let mut jmat = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        gamma[i * n + i] = 1.0;
        for (off, (jc, g)) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            gamma[i * n + j] = g;
            gamma[j * n + i] = g;
            jmat[i * n + j] = jc;
            jmat[j * n + i] = jc;
        }
    }
    Ok(CouplingMatrices {
        n,
        gamma0: 1.0,
        gamma,
        jmat,
    })
}

/// Result of the positive-semidefiniteness check.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PsdDiagnostic {
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Smallest eigenvalue allowed before a decay matrix is rejected, per unit rate.
pub const PSD_TOLERANCE: f64 = -1e-8;

pub fn validate_psd(mats: &CouplingMatrices) -> Result<PsdDiagnostic> {
    let eig = crate::spectral::eigenvalues_ascending(&mats.gamma_mat())?;
    let min_eigenvalue = eig[0];
    let tolerance = PSD_TOLERANCE * mats.gamma0;
    Ok(PsdDiagnostic {
        min_eigenvalue,
        tolerance,
        pass: min_eigenvalue >= tolerance,
    })
}
