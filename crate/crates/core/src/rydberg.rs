//! Collective-decay error budget for Rydberg gates in tweezer arrays.
//!
//! Unlike the rest of the crate, rates here carry laboratory units: every
//! frequency is an angular frequency divided by 2 pi, in Hz. Interaction
//! strengths come in as GHz um^6 and Rabi frequencies as MHz and are converted
//! on entry.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimal gate time times the Rabi frequency for the time-optimal CZ gate.
pub const GATE_TIME_CONSTANT: f64 = 2.95;

/// One decay channel of the Rydberg level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub label: String,
    pub wavelength_um: f64,
    pub gamma0_2pi_hz: f64,
    /// Thermal photon occupation at the transition frequency.
    pub nbar: f64,
    /// Whether the channel also decays spontaneously; false for purely
    /// black-body-induced upward transitions.
    #[serde(default = "spontaneous_default")]
    pub spontaneous: bool,
}

fn spontaneous_default() -> bool {
    true
}

/// Where the collective term comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectiveMode {
    /// All atoms within one wavelength: `(N - 2) Gamma0 / 4` of the dominant channel.
    Dicke,
    /// A known largest collective rate of the dominant channel, in Hz.
    GammaMax(f64),
    /// A decay matrix of the dominant channel in units of its single-atom rate.
    Matrix { n: usize, gamma: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RydbergInput {
    pub n_atoms: usize,
    /// Blockaded pair separation in um.
    pub spacing_um: f64,
    pub c6_ghz_um6: f64,
    pub rabi_mhz: f64,
    pub transitions: Vec<Transition>,
    pub dominant: String,
    pub collective: CollectiveMode,
    /// Replaces the sum over the table when the independent rate is known directly.
    #[serde(default)]
    pub gamma_ind_2pi_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RydbergReport {
    pub v_nn: f64,
    pub gamma_collective: f64,
    pub gamma_ind: f64,
    pub gamma_tot: f64,
    pub chi: f64,
    pub gate_error: f64,
}

pub fn rydberg_report(input: &RydbergInput) -> Result<RydbergReport> {
    if !(input.rabi_mhz.is_finite() && input.rabi_mhz > 0.0) {
        return Err(Error::invalid("Rabi frequency must be positive"));
    }
    if !(input.spacing_um > 0.0 && input.c6_ghz_um6 > 0.0) {
        return Err(Error::invalid("spacing and C6 must be positive"));
    }
    if input.n_atoms < 2 {
        return Err(Error::invalid("need at least one pair of atoms"));
    }
    for t in &input.transitions {
        if !(t.gamma0_2pi_hz > 0.0 && t.nbar >= 0.0 && t.wavelength_um > 0.0) {
            return Err(Error::invalid(format!("transition {} has non-physical data", t.label)));
        }
    }
    let dominant = input
        .transitions
        .iter()
        .find(|t| t.label == input.dominant)
        .ok_or_else(|| Error::invalid(format!("dominant transition {} not in table", input.dominant)))?;

    let v_nn = input.c6_ghz_um6 * 1e9 / input.spacing_um.powi(6);
    let gamma_collective = match &input.collective {
        CollectiveMode::Dicke => (input.n_atoms as f64 - 2.0) * dominant.gamma0_2pi_hz / 4.0,
        CollectiveMode::GammaMax(g) => {
            if !(*g > 0.0) {
                return Err(Error::invalid("collective rate must be positive"));
            }
            g / 4.0
        }
        CollectiveMode::Matrix { n, gamma } => {
            let mats = crate::green::CouplingMatrices::from_gamma(*n, gamma.clone())?;
            crate::spectral::gamma_max(&mats)? * dominant.gamma0_2pi_hz / mats.gamma0 / 4.0
        }
    };
    let gamma_ind = match input.gamma_ind_2pi_hz {
        Some(g) if g > 0.0 => g,
        Some(_) => return Err(Error::invalid("independent rate must be positive")),
        None => input
            .transitions
            .iter()
            .map(|t| (t.nbar + if t.spontaneous { 1.0 } else { 0.0 }) * t.gamma0_2pi_hz)
            .sum(),
    };
    let gamma_tot = gamma_collective + gamma_ind;
    let chi = gamma_tot / v_nn;
    let rabi = input.rabi_mhz * 1e6;
    Ok(RydbergReport {
        v_nn,
        gamma_collective,
        gamma_ind,
        gamma_tot,
        chi,
        gate_error: GATE_TIME_CONSTANT * chi * v_nn / rabi,
    })
}

/// Parse a transition table with header `label,wavelength_um,gamma0_2pi_hz,nbar` and an
/// optional fifth `spontaneous` column.
pub fn read_transition_table<R: Read>(input: R) -> Result<Vec<Transition>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let base = ["label", "wavelength_um", "gamma0_2pi_hz", "nbar"];
    let ok = headers.len() >= 4
        && headers[..4].iter().zip(base).all(|(a, b)| a == b)
        && (headers.len() == 4 || (headers.len() == 5 && headers[4] == "spontaneous"));
    if !ok {
        return Err(Error::invalid(
            "transition table header must be label,wavelength_um,gamma0_2pi_hz,nbar[,spontaneous]",
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let t: Transition = rec.map_err(|e| Error::invalid(format!("transition table: {e}")))?;
        rows.push(t);
    }
    if rows.is_empty() {
        return Err(Error::invalid("transition table is empty"));
    }
    Ok(rows)
}

/// Bose-Einstein occupation of a mode at `wavelength_um` and `temperature_k`.
pub fn thermal_occupation(wavelength_um: f64, temperature_k: f64) -> f64 {
    const H: f64 = 6.626_070_15e-34;
    const C: f64 = 299_792_458.0;
    const KB: f64 = 1.380_649e-23;
    if temperature_k <= 0.0 {
        return 0.0;
    }
    let energy_ratio = H * C / (wavelength_um * 1e-6 * KB * temperature_k);
    1.0 / energy_ratio.exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn array_input(n: usize, collective: CollectiveMode) -> RydbergInput {
        RydbergInput {
            n_atoms: n,
            spacing_um: 2.0,
            c6_ghz_um6: 28.8,
            rabi_mhz: 4.6,
            transitions: vec![Transition {
                label: "53S-52P".into(),
                wavelength_um: 1.0e4,
                gamma0_2pi_hz: 315.0,
                nbar: 0.0,
                spontaneous: true,
            }],
            dominant: "53S-52P".into(),
            collective,
            gamma_ind_2pi_hz: Some(3220.0),
        }
    }

    #[test]
    fn small_gate_array() {
        let r = rydberg_report(&array_input(160, CollectiveMode::GammaMax(176.0))).unwrap();
        assert!((r.v_nn - 450e6).abs() < 1e-3);
        assert!((r.chi / 7.25e-6 - 1.0).abs() < 0.02);
        assert!((r.gate_error / 0.002 - 1.0).abs() < 0.1);
    }

    #[test]
    fn large_gate_array() {
        let r = rydberg_report(&array_input(16000, CollectiveMode::GammaMax(6800.0))).unwrap();
        assert!((r.gate_error / 0.003 - 1.0).abs() < 0.1);
    }

    #[test]
    fn single_pair_has_no_collective_term() {
        let r = rydberg_report(&array_input(2, CollectiveMode::Dicke)).unwrap();
        assert_eq!(r.gamma_collective, 0.0);
        assert_eq!(r.gamma_tot, r.gamma_ind);
    }

    #[test]
    fn matrix_mode_scales_by_channel_rate() {
        let gamma = vec![1.0, 0.5, 0.5, 1.0];
        let r = rydberg_report(&array_input(2, CollectiveMode::Matrix { n: 2, gamma })).unwrap();
        assert!((r.gamma_collective - 1.5 * 315.0 / 4.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut i = array_input(10, CollectiveMode::Dicke);
        i.rabi_mhz = 0.0;
        assert!(rydberg_report(&i).is_err());
        let mut i = array_input(10, CollectiveMode::Dicke);
        i.dominant = "missing".into();
        assert!(rydberg_report(&i).is_err());
    }

    #[test]
    fn table_sum_for_independent_rate() {
        let csv = "label,wavelength_um,gamma0_2pi_hz,nbar,spontaneous\n\
                   a,0.3,100,0.0,true\nb,100,10,2.5,true\nc,120,5,3.0,false\n";
        let rows = read_transition_table(csv.as_bytes()).unwrap();
        let mut i = array_input(10, CollectiveMode::Dicke);
        i.transitions = rows;
        i.dominant = "b".into();
        i.gamma_ind_2pi_hz = None;
        let r = rydberg_report(&i).unwrap();
        assert!((r.gamma_ind - (100.0 + 35.0 + 15.0)).abs() < 1e-12);
        assert!((r.gamma_collective - 8.0 * 10.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn table_header_checked() {
        assert!(read_transition_table("label,wavelength,gamma0,nbar\nx,1,1,0\n".as_bytes()).is_err());
        let rows = read_transition_table("label,wavelength_um,gamma0_2pi_hz,nbar\nx,1,1,0\n".as_bytes()).unwrap();
        assert!(rows[0].spontaneous);
    }

    #[test]
    fn planck_occupation() {
        // Second radiation constant h c / k = 1.438777e-2 m K.
        let n = thermal_occupation(100.0, 300.0);
        assert!((n - 1.0 / ((1.438_777e-2_f64 / (100e-6 * 300.0)).exp() - 1.0)).abs() < 1e-4);
        assert_eq!(thermal_occupation(1.0, 0.0), 0.0);
    }
}
