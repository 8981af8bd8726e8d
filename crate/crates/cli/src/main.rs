//! `corrdecay` command-line front end.
//!
//! Every run writes its outputs and a `manifest.json` into `--out-dir`. Exit codes:
//! 0 success, 2 configuration error, 3 physics-validation failure, 4 solver
//! non-convergence.

mod config;

use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use corrdecay::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use config::*;

#[derive(Parser)]
#[command(name = "corrdecay", version, about = "Maximal correlated decay rates of dipole-coupled emitter arrays")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the decay and coherent coupling matrices of a lattice.
    Gamma {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Also write the matrices in the binary format.
        #[arg(long)]
        binary: bool,
    },
    /// Spectrum, bounds, relaxation and (for small N) the exact maximal rate.
    Analyze {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        sdp: SdpArgs,
        #[command(flatten)]
        exact: ExactArgs,
    },
    /// Size sweep with a power-law fit.
    Scan {
        #[command(flatten)]
        scan: ScanArgs,
        #[command(flatten)]
        sdp: SdpArgs,
    },
    /// Solve the product-state relaxation and round it to a product state.
    Sdp {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        sdp: SdpArgs,
    },
    /// Exact maximal rate by excitation-sector diagonalization.
    Exact {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        exact: ExactArgs,
        /// Also sample this many Haar-random states.
        #[arg(long)]
        haar_samples: Option<usize>,
    },
    /// Momentum-space rates of an infinite lattice sampled on a finite grid.
    Kspace {
        #[command(flatten)]
        kspace: KSpaceArgs,
    },
    /// Collective-decay error estimate for a Rydberg blockade gate.
    Rydberg {
        #[command(flatten)]
        rydberg: RydbergArgs,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::DivergentMode => 3,
        Error::NonConvergence(_) | Error::Eigen(_) => 4,
        _ => 2,
    }
}

/// Collects output files and writes them in one place.
struct Run {
    common: Common,
    outputs: Vec<String>,
}

impl Run {
    fn new(common: Common) -> Result<Self> {
        std::fs::create_dir_all(&common.out_dir)?;
        Ok(Self {
            common,
            outputs: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> std::path::PathBuf {
        self.outputs.push(name.to_owned());
        self.common.out_dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = match self.common.output_format {
            OutputFormat::Json => serde_json::to_string(value),
            OutputFormat::Pretty => serde_json::to_string_pretty(value),
        }
        .map_err(|e| Error::InvalidInput(format!("serializing {name}: {e}")))?;
        std::fs::write(self.path(name), text + "\n")?;
        Ok(())
    }

    fn file<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(std::io::BufWriter<std::fs::File>) -> Result<()>,
    {
        let f = std::fs::File::create(self.path(name))?;
        write(std::io::BufWriter::new(f))
    }

    fn manifest(&self, command: &str, settings: &Value, started: Instant) -> Result<()> {
        let canonical = serde_json::to_string(&json!({"command": command, "settings": settings}))
            .expect("settings serialize");
        let manifest = json!({
            "command": command,
            "config_sha256": hex::encode(Sha256::digest(canonical.as_bytes())),
            "seed": self.common.seed,
            "threads": rayon::current_num_threads(),
            "versions": {"corrdecay": corrdecay::VERSION, "corrdecay_cli": env!("CARGO_PKG_VERSION")},
            "wall_time_s": started.elapsed().as_secs_f64(),
            "outputs": self.outputs,
            "settings": settings,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(self.common.out_dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("settings serialize")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let file = match &cli.global.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let common = resolve_common(&cli.global, &file)?;
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    let seed = common.seed;
    match &cli.command {
        Command::Gamma { lattice, binary } => {
            let spec = resolve_lattice(lattice, file.lattice.as_ref(), seed)?;
            let settings = json!({"lattice": spec, "binary": binary});
            let mut run = Run::new(common)?;
            let failed = cmd_gamma(&mut run, &spec, *binary)?;
            run.manifest("gamma", &settings, started)?;
            failed.map_or(Ok(()), Err)
        }
        Command::Analyze { source, sdp, exact } => {
            let src = resolve_source(source, &file, seed)?;
            let sdp = resolve_sdp(sdp, file.sdp.as_ref(), seed)?;
            let exact = resolve_exact(exact, file.exact.as_ref(), seed)?;
            let settings = json!({"source": src, "sdp": sdp, "exact": exact});
            let mut run = Run::new(common)?;
            let (mats, lattice) = src.load()?;
            let opts = analyze_options(&sdp, &exact, lattice.as_ref());
            let report = corrdecay::analyze::analyze(&mats, &opts)?;
            if !report.sdp.converged {
                eprintln!("warning: relaxation stopped at the iteration limit");
            }
            run.json("analysis.json", &report)?;
            run.manifest("analyze", &settings, started)
        }
        Command::Scan { scan, sdp } => {
            let plan = resolve_scan(scan, file.scan.as_ref(), seed)?;
            let sdp = resolve_sdp(sdp, file.sdp.as_ref(), seed)?;
            let settings = json!({"plan": plan, "sdp": sdp});
            let mut run = Run::new(common)?;
            let outcome = cmd_scan(&mut run, &plan, &sdp);
            run.manifest("scan", &settings, started)?;
            outcome
        }
        Command::Sdp { source, sdp } => {
            let src = resolve_source(source, &file, seed)?;
            let sdp = resolve_sdp(sdp, file.sdp.as_ref(), seed)?;
            let settings = json!({"source": src, "sdp": sdp});
            let mut run = Run::new(common)?;
            cmd_sdp(&mut run, &src, &sdp)?;
            run.manifest("sdp", &settings, started)
        }
        Command::Exact {
            source,
            exact,
            haar_samples,
        } => {
            let src = resolve_source(source, &file, seed)?;
            let exact = resolve_exact(exact, file.exact.as_ref(), seed)?;
            let haar = haar_samples.or(file.exact.as_ref().and_then(|e| e.haar_samples));
            let settings = json!({"source": src, "exact": exact, "haar_samples": haar});
            let mut run = Run::new(common)?;
            let (mats, _) = src.load()?;
            if mats.n > exact.max_n {
                return Err(Error::InvalidInput(format!(
                    "{} emitters exceed the exact limit of {}",
                    mats.n, exact.max_n
                )));
            }
            let result = corrdecay::exact::exact_rstar(&mats, &exact.options())?;
            let haar = haar
                .map(|s| corrdecay::exact::haar_rate_samples(&mats, s, seed))
                .transpose()?;
            run.json(
                "exact.json",
                &json!({"exact": result, "haar": haar, "typical_rate": corrdecay::bounds::typical_rate(mats.n, mats.gamma0)}),
            )?;
            run.manifest("exact", &settings, started)
        }
        Command::Kspace { kspace } => {
            let k = resolve_kspace(kspace, file.kspace.as_ref())?;
            let settings = to_value(&k);
            let mut run = Run::new(common)?;
            cmd_kspace(&mut run, &k)?;
            run.manifest("kspace", &settings, started)
        }
        Command::Rydberg { rydberg } => {
            let input = resolve_rydberg(rydberg, file.rydberg.as_ref())?;
            let report = corrdecay::rydberg::rydberg_report(&input)?;
            let settings = to_value(&input);
            let mut run = Run::new(common)?;
            run.json("rydberg.json", &report)?;
            run.manifest("rydberg", &settings, started)
        }
    }
}

/// Writes the matrices and the PSD diagnostic. The inner error reports a failed
/// diagnostic after everything has been written.
fn cmd_gamma(run: &mut Run, spec: &corrdecay::lattice::LatticeSpec, binary: bool) -> Result<Option<Error>> {
    let array = corrdecay::lattice::build_array(spec)?;
    let mats = corrdecay::green::build_coupling_matrices(&array, &spec.polarization)?;
    let psd = corrdecay::green::validate_psd(&mats)?;
    run.file("gamma.csv", |w| mats.write_csv(w))?;
    if binary {
        run.file("gamma.bin", |w| mats.write_binary(w))?;
    }
    run.json("psd.json", &psd)?;
    Ok((!psd.pass).then(|| {
        Error::Validation(format!(
            "decay matrix has eigenvalue {:e} below tolerance {:e}",
            psd.min_eigenvalue, psd.tolerance
        ))
    }))
}

fn cmd_scan(run: &mut Run, plan: &corrdecay::scaling::SweepPlan, sdp: &SdpSettings) -> Result<()> {
    use corrdecay::scaling::{fit_sweep, run_sweep_with, write_sweep_csv};
    let rows = run_sweep_with(plan, &sdp.options(), |row| match (&row.value, &row.error) {
        (Some(v), _) => eprintln!("n_atoms={} value={v:e}", row.n_atoms),
        (None, Some(e)) => eprintln!("n_atoms={} failed: {e}", row.n_atoms),
        (None, None) => {}
    })?;
    run.file("scan.csv", |w| write_sweep_csv(&rows, w))?;
    let failures: Vec<Value> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| json!({"n_atoms": r.n_atoms, "error": e})))
        .collect();
    match fit_sweep(&rows) {
        Ok(fit) => run.json("fit.json", &json!({
            "alpha": fit.alpha,
            "beta": fit.beta,
            "alpha_ci": fit.alpha_ci,
            "beta_ci": fit.beta_ci,
            "r_squared": fit.r_squared,
            "accepted": fit.accepted,
            "degenerate": fit.degenerate,
            "failures": failures,
        })),
        Err(e) => {
            run.json("fit.json", &json!({"error": e.to_string(), "failures": failures}))?;
            Err(Error::Validation(format!("no fit: {e}")))
        }
    }
}

fn cmd_sdp(run: &mut Run, src: &Source, sdp: &SdpSettings) -> Result<()> {
    use corrdecay::sdp::*;
    let (mats, _) = src.load()?;
    let problem = SdpProblem::from_couplings(&mats);
    let opts = SdpOptions {
        gamma0: mats.gamma0,
        ..sdp.options()
    };
    let solution = match sdp.solver {
        SolverTag::Lowrank => solve_low_rank(&problem, &opts)?,
        SolverTag::Projection => solve_projection(&problem, &opts)?,
    };
    if !solution.converged {
        eprintln!("warning: relaxation stopped at the iteration limit");
    }
    let gmax = corrdecay::spectral::gamma_max(&mats)?;
    let certificate = sdp_certificates(&problem, &solution, gmax, mats.gamma0)?;
    let rounded = round_to_product_state(&problem, &solution)?;
    run.json(
        "sdp.json",
        &json!({"solution": solution, "certificate": certificate, "rounded": rounded}),
    )
}

fn cmd_kspace(run: &mut Run, k: &KSpaceSettings) -> Result<()> {
    use corrdecay::kspace::*;
    let opts = GridOptions {
        estimator: k.estimator,
        reg_scale: k.reg_scale,
    };
    let gmax = gamma_max_finite_grid(k.dimension, k.spacing, k.polarization, k.n_per_axis, &opts)?;
    let rates = kspace_rates(k.dimension, k.spacing, k.polarization, k.n_per_axis, k.reg_scale)?;
    let prefactors = asymptotic_prefactors(k.dimension, k.spacing)?;
    run.file("kspace.csv", |mut w| {
        use std::io::Write;
        let axes = ["k1", "k2", "k3"];
        writeln!(w, "{},rate", axes[..usize::from(k.dimension)].join(","))?;
        for (q, r) in rates.grid.iter().zip(&rates.rates) {
            let cols: Vec<String> = q.iter().map(|c| format!("{c:e}")).collect();
            writeln!(w, "{},{r:e}", cols.join(","))?;
        }
        w.flush()?;
        Ok(())
    })?;
    run.json(
        "kspace.json",
        &json!({
            "gamma_max_grid": gmax,
            "n_atoms": k.n_per_axis.pow(u32::from(k.dimension)),
            "reg_delta": rates.reg_delta,
            "prefactors": prefactors,
        }),
    )
}

