//! One-shot analysis of a decay matrix: spectrum, bounds, relaxation, derived
//! quantities and, for small arrays, the exact maximal rate.

use serde::Serialize;

use crate::bounds::{bounds_report, driven_report, BoundsReport, DrivenReport, LatticeContext};
use crate::error::{Error, Result};
use crate::exact::{exact_rstar, ExactOptions, ExactResult, MAX_EXACT_ATOMS};
use crate::green::{validate_psd, CouplingMatrices, PsdDiagnostic};
use crate::sdp::{
    round_to_product_state, sdp_certificates, solve_low_rank, solve_projection, SdpCertificate, SdpOptions,
    SdpProblem, SdpSolution, SolverTag,
};
use crate::spectral::{decompose, SpectralSummary};

#[derive(Debug, Clone, Copy)]
pub struct AnalyzeOptions {
    pub sdp: SdpOptions,
    pub solver: SolverTag,
    pub exact: ExactOptions,
    /// Largest emitter count for which the exact rate is computed.
    pub exact_max_n: usize,
    pub lattice: Option<LatticeContext>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            sdp: SdpOptions::default(),
            solver: SolverTag::Lowrank,
            exact: ExactOptions::default(),
            exact_max_n: MAX_EXACT_ATOMS,
            lattice: None,
        }
    }
}

/// Product state recovered from the relaxation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RoundedSummary {
    /// Classical XY value of the rounded state.
    pub value: f64,
    /// Decay rate of the rounded state, `N Gamma0 / 2 + value`.
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub n: usize,
    pub psd: PsdDiagnostic,
    pub spectral: SpectralSummary,
    pub bounds: BoundsReport,
    pub sdp: SdpSolution,
    pub sdp_certificate: SdpCertificate,
    pub rounded: RoundedSummary,
    pub driven: DrivenReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactResult>,
}

/// Run every stage on one decay matrix. A matrix that is not positive semidefinite
/// is rejected with a validation error.
pub fn analyze(mats: &CouplingMatrices, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let psd = validate_psd(mats)?;
    if !psd.pass {
        return Err(Error::Validation(format!(
            "decay matrix has eigenvalue {:e} below tolerance {:e}",
            psd.min_eigenvalue, psd.tolerance
        )));
    }
    let spectral = decompose(mats)?;
    let bounds = bounds_report(&spectral, mats);
    let problem = SdpProblem::from_couplings(mats);
    let sdp_opts = SdpOptions {
        gamma0: mats.gamma0,
        ..opts.sdp
    };
    let sdp = match opts.solver {
        SolverTag::Lowrank => solve_low_rank(&problem, &sdp_opts)?,
        SolverTag::Projection => solve_projection(&problem, &sdp_opts)?,
    };
    let sdp_certificate = sdp_certificates(&problem, &sdp, spectral.gamma_max, mats.gamma0)?;
    let rounded_state = round_to_product_state(&problem, &sdp)?;
    let rounded = RoundedSummary {
        value: rounded_state.value,
        rate: 0.5 * mats.n as f64 * mats.gamma0 + rounded_state.value,
    };
    let exact = if mats.n <= opts.exact_max_n.min(MAX_EXACT_ATOMS) {
        Some(exact_rstar(mats, &opts.exact)?)
    } else {
        None
    };
    let driven = driven_report(
        &spectral,
        &bounds,
        mats,
        opts.lattice,
        exact.as_ref().map(|e| e.rstar_exact),
    )?;
    Ok(AnalysisReport {
        n: mats.n,
        psd,
        spectral,
        bounds,
        sdp,
        sdp_certificate,
        rounded,
        driven,
        exact,
    })
}
