//! Square-lattice emitter arrays with optional Gaussian position disorder.
//!
//! Lengths are in units of the resonant wavelength, so `k0 * r = 2 * PI * r`.
//! Chains run along z, planar arrays lie in the xy-plane and cubic arrays fill
//! all three axes. The origin sits at a lattice corner.
//!
//! Disorder draws use ChaCha8 seeded through `SeedableRng::seed_from_u64`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recipe for an emitter array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub dimension: u8,
    pub n_per_axis: usize,
    /// Lattice constant in units of the wavelength.
    pub spacing: f64,
    /// Real unit dipole orientation.
    pub polarization: [f64; 3],
    /// Standard deviation of each displacement coordinate, as a fraction of `spacing`.
    #[serde(default)]
    pub disorder_eta: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// Seed used whenever a caller does not provide one.
pub const DEFAULT_SEED: u64 = 0x5EED_C0DE;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl LatticeSpec {
    pub fn new(dimension: u8, n_per_axis: usize, spacing: f64, polarization: [f64; 3]) -> Self {
        Self {
            dimension,
            n_per_axis,
            spacing,
            polarization,
            disorder_eta: 0.0,
            seed: DEFAULT_SEED,
        }
    }

    /// Total atom count, or an error if it overflows.
    pub fn atom_count(&self) -> Result<usize> {
        self.n_per_axis
            .checked_pow(u32::from(self.dimension))
            .ok_or_else(|| Error::invalid("atom count overflows a machine integer"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dimension) {
            return Err(Error::invalid(format!(
                "dimension must be 1, 2 or 3 (got {})",
                self.dimension
            )));
        }
        if self.n_per_axis < 1 {
            return Err(Error::invalid("n_per_axis must be at least 1"));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::invalid("spacing must be positive and finite"));
        }
        check_unit(&self.polarization)?;
        if !(self.disorder_eta.is_finite() && self.disorder_eta >= 0.0) {
            return Err(Error::invalid("disorder_eta must be non-negative"));
        }
        self.atom_count()?;
        Ok(())
    }
}

pub(crate) fn check_unit(v: &[f64; 3]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "polarization must be a unit vector (norm {norm})"
        )));
    }
    Ok(())
}

/// Positions of an emitter array together with the recipe that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomArray {
    pub positions: Vec<[f64; 3]>,
    pub spec: LatticeSpec,
}

impl AtomArray {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Ordered lattice sites for `spec`, ignoring its disorder fields.
pub fn generate_lattice(spec: &LatticeSpec) -> Result<AtomArray> {
    spec.validate()?;
    let n = spec.n_per_axis;
    let d = spec.spacing;
    let total = spec.atom_count()?;
    let mut positions = Vec::with_capacity(total);
    match spec.dimension {
        1 => positions.extend((0..n).map(|i| [0.0, 0.0, i as f64 * d])),
        2 => {
            for ix in 0..n {
                for iy in 0..n {
                    positions.push([ix as f64 * d, iy as f64 * d, 0.0]);
                }
            }
        }
        _ => {
            for ix in 0..n {
                for iy in 0..n {
                    for iz in 0..n {
                        positions.push([ix as f64 * d, iy as f64 * d, iz as f64 * d]);
                    }
                }
            }
        }
    }
    Ok(AtomArray {
        positions,
        spec: spec.clone(),
    })
}

/// Displace every coordinate by an independent draw from N(0, (eta * d)^2).
///
/// Displacements are isotropic in 3D even for chains and planar arrays.
pub fn apply_position_disorder(array: &AtomArray, eta: f64, seed: u64) -> Result<AtomArray> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::invalid("disorder eta must be non-negative"));
    }
    if eta == 0.0 {
        return Ok(array.clone());
    }
    let normal = Normal::new(0.0, eta * array.spec.spacing)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = array
        .positions
        .iter()
        .map(|p| {
            let mut q = *p;
            for c in q.iter_mut() {
                *c += normal.sample(&mut rng);
            }
            q
        })
        .collect();
    let mut spec = array.spec.clone();
    spec.disorder_eta = eta;
    spec.seed = seed;
    Ok(AtomArray { positions, spec })
}

/// Lattice plus the disorder described by the spec, with an overlap check.
pub fn build_array(spec: &LatticeSpec) -> Result<AtomArray> {
    let ordered = generate_lattice(spec)?;
    let array = apply_position_disorder(&ordered, spec.disorder_eta, spec.seed)?;
    if let Some((i, j, _)) = closest_pair(&array.positions) {
        if distance(&array.positions[i], &array.positions[j]) == 0.0 {
            return Err(Error::CoincidentPositions(i, j));
        }
    }
    Ok(array)
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Indices and separation of the closest pair, `None` for fewer than two atoms.
pub fn closest_pair(positions: &[[f64; 3]]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let r = distance(&positions[i], &positions[j]);
            if best.map_or(true, |(_, _, b)| r < b) {
                best = Some((i, j, r));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dim: u8, n: usize, d: f64) -> LatticeSpec {
        LatticeSpec::new(dim, n, d, [1.0, 0.0, 0.0])
    }

    #[test]
    fn chain_lies_along_z() {
        let a = generate_lattice(&spec(1, 3, 0.5)).unwrap();
        assert_eq!(
            a.positions,
            vec![[0.0, 0.0, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, 1.0]]
        );
    }

    #[test]
    fn square_is_planar() {
        let a = generate_lattice(&spec(2, 2, 0.4)).unwrap();
        assert_eq!(a.len(), 4);
        assert!(a.positions.iter().all(|p| p[2] == 0.0));
        assert!(a.positions.contains(&[0.4, 0.4, 0.0]));
    }

    #[test]
    fn cube_distances() {
        let a = generate_lattice(&spec(3, 2, 0.3)).unwrap();
        assert_eq!(a.len(), 8);
        let (_, _, min) = closest_pair(&a.positions).unwrap();
        assert!((min - 0.3).abs() < 1e-15);
        let max = a
            .positions
            .iter()
            .flat_map(|p| a.positions.iter().map(move |q| distance(p, q)))
            .fold(0.0, f64::max);
        assert!((max - 3f64.sqrt() * 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate_lattice(&spec(4, 2, 0.3)).is_err());
        assert!(generate_lattice(&spec(0, 2, 0.3)).is_err());
        assert!(generate_lattice(&spec(2, 0, 0.3)).is_err());
        assert!(generate_lattice(&spec(2, 2, -0.3)).is_err());
        let mut s = spec(2, 2, 0.3);
        s.polarization = [1.0, 1.0, 0.0];
        assert!(generate_lattice(&s).is_err());
        assert!(spec(3, usize::MAX / 2, 0.3).validate().is_err());
    }

    #[test]
    fn zero_disorder_is_identity() {
        let a = generate_lattice(&spec(2, 5, 0.4)).unwrap();
        let b = apply_position_disorder(&a, 0.0, 7).unwrap();
        assert_eq!(a.positions, b.positions);
    }

    #[test]
    fn disorder_is_deterministic() {
        let a = generate_lattice(&spec(2, 5, 0.4)).unwrap();
        let b = apply_position_disorder(&a, 0.05, 3).unwrap();
        let c = apply_position_disorder(&a, 0.05, 3).unwrap();
        assert_eq!(b.positions, c.positions);
        let e = apply_position_disorder(&a, 0.05, 4).unwrap();
        assert_ne!(b.positions, e.positions);
    }

    #[test]
    fn disorder_statistics() {
        let d = 0.7;
        let a = generate_lattice(&spec(1, 1000, d)).unwrap();
        let b = apply_position_disorder(&a, 0.05, 1).unwrap();
        let sigma = 0.05 * d;
        for axis in 0..3 {
            let disp: Vec<f64> = a
                .positions
                .iter()
                .zip(&b.positions)
                .map(|(p, q)| q[axis] - p[axis])
                .collect();
            let n = disp.len() as f64;
            let mean = disp.iter().sum::<f64>() / n;
            let std = (disp.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((std / sigma - 1.0).abs() < 0.05, "axis {axis}: std {std}");
            assert!(mean.abs() < 3.0 * sigma / n.sqrt(), "axis {axis}: mean {mean}");
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let s = spec(2, 4, 0.4);
        let text = serde_json::to_string(&s).unwrap();
        for key in ["dimension", "n_per_axis", "spacing", "polarization", "disorder_eta", "seed"] {
            assert!(text.contains(key));
        }
        let back: LatticeSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let bad = text.replace("\"seed\"", "\"sed\"");
        assert!(serde_json::from_str::<LatticeSpec>(&bad).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn disorder_preserves_count(dim in 1u8..=3, n in 1usize..6, eta in 0.0f64..0.2, seed: u64) {
                let a = generate_lattice(&spec(dim, n, 0.4)).unwrap();
                let b = apply_position_disorder(&a, eta, seed).unwrap();
                prop_assert_eq!(a.len(), b.len());
                prop_assert_eq!(a.len(), n.pow(dim as u32));
            }

            #[test]
            fn generation_is_pure(dim in 1u8..=3, n in 1usize..6, d in 0.05f64..2.0) {
                let s = spec(dim, n, d);
                prop_assert_eq!(generate_lattice(&s).unwrap(), generate_lattice(&s).unwrap());
            }
        }
    }
}
