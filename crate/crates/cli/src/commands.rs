//! Subcommand implementations. Each writes its artifacts into the output
//! directory and the run finishes with a manifest over them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use deadoil_core::adjoint::{kkt_residual, reduced_gradient, solve_adjoint_paper};
use deadoil_core::coefficients::verify_hypotheses;
use deadoil_core::io::{level_path, save_field, saved_levels, write_levels, write_trajectory};
use deadoil_core::objective::evaluate_cost;
use deadoil_core::oracle::{fd_directional, standard_mms_studies, ConvergenceReport};
use deadoil_core::{minimize, solve_forward, ControlTrajectory, Error as CoreError, ScalarField};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Scenario, ScenarioConfig};
use crate::manifest::{self, ManifestInput};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Forward,
    Adjoint,
    Gradcheck,
    Optimize,
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Adjoint => "adjoint",
            Command::Gradcheck => "gradcheck",
            Command::Optimize => "optimize",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub command: Command,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub stride: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: PathBuf,
    pub status: String,
}

/// What a subcommand produced; `failure` is reported after the manifest is
/// written so failed verifications still leave their evidence behind.
struct Outcome {
    artifacts: Vec<PathBuf>,
    status: String,
    failure: Option<CliError>,
}

impl Outcome {
    fn ok(artifacts: Vec<PathBuf>, status: impl Into<String>) -> Self {
        Self {
            artifacts,
            status: status.into(),
            failure: None,
        }
    }
}

pub fn run(args: &RunArgs) -> Result<RunSummary, CliError> {
    let (mut cfg, base) = ScenarioConfig::load(&args.config)?;
    let out_dir = match &args.out {
        Some(o) => o.clone(),
        None => base.join(&cfg.output.dir),
    };
    if let Some(o) = &args.out {
        cfg.output.dir = o.clone();
    }
    if let Some(s) = args.stride {
        cfg.output.stride = s;
    }
    if let Some(s) = args.seed {
        cfg.gradcheck.seed = s;
    }
    let scenario = cfg.resolve(&base)?;
    std::fs::create_dir_all(&out_dir)?;

    let outcome = match args.command {
        Command::Forward => forward(&cfg, &scenario, &out_dir)?,
        Command::Adjoint => adjoint(&cfg, &scenario, &out_dir)?,
        Command::Gradcheck => gradcheck(&cfg, &scenario, &out_dir)?,
        Command::Optimize => optimize(&scenario, &out_dir)?,
        Command::Verify => verify(&cfg, &scenario, &out_dir)?,
    };

    let manifest = manifest::write(&ManifestInput {
        subcommand: args.command.name(),
        seed: cfg.gradcheck.seed,
        status: &outcome.status,
        config: &cfg,
        scenario: &scenario,
        out_dir: &out_dir,
        artifacts: &outcome.artifacts,
    })?;
    if let Some(f) = outcome.failure {
        return Err(f);
    }
    Ok(RunSummary {
        out_dir,
        manifest,
        status: outcome.status,
    })
}

fn csv_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn forward(cfg: &ScenarioConfig, s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let traj =
        solve_forward(&s.u0, &s.p0, &s.control, &s.coef, &s.tg).map_err(CliError::Numeric)?;
    let artifacts = write_trajectory(&traj, out, cfg.output.stride)?;
    let j = evaluate_cost(&traj, &s.control, &s.params, &s.tg)?;
    info!("forward solve done, J = {j:.6e}");
    Ok(Outcome::ok(artifacts, "ok"))
}

fn adjoint(cfg: &ScenarioConfig, s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let eval = reduced_gradient(&s.u0, &s.p0, &s.control, &s.params, &s.coef, &s.tg)
        .map_err(CliError::Numeric)?;
    let mut artifacts = Vec::new();
    for n in saved_levels(s.tg.steps, cfg.output.stride) {
        for (prefix, field) in [
            ("lamu", &eval.adjoint.lam_u[n]),
            ("lamp", &eval.adjoint.lam_p[n]),
        ] {
            let path = level_path(out, prefix, n);
            save_field(field, &path)?;
            artifacts.push(path);
        }
    }

    let report_path = out.join("kkt.csv");
    let mut w = csv_file(&report_path)?;
    writeln!(
        w,
        "linearization,converged,iterations,residual,kkt_residual,grad_norm"
    )?;
    let lin = match s.linearization {
        deadoil_core::Linearization::Terminal => "terminal",
        deadoil_core::Linearization::TimeAverage => "time-average",
    };
    let grad_norm = eval.gradient.norm();
    let solved = solve_adjoint_paper(
        &eval.trajectory,
        &s.params,
        &s.coef,
        &s.tg,
        s.linearization,
        &s.solver,
    );
    let outcome = match solved {
        Ok(sol) => {
            let kkt = kkt_residual(&s.control, &sol.adjoint, &s.params, &s.tg)?;
            writeln!(
                w,
                "{lin},true,{},{:.16e},{kkt:.16e},{grad_norm:.16e}",
                sol.iterations, sol.residual
            )?;
            for (name, field) in [("e1.csv", &sol.adjoint.e1), ("p1.csv", &sol.adjoint.p1)] {
                let path = out.join(name);
                save_field(field, &path)?;
                artifacts.push(path);
            }
            info!(
                "aggregate system solved in {} iterations, KKT residual {kkt:.6e}",
                sol.iterations
            );
            Outcome::ok(Vec::new(), "ok")
        }
        Err(CoreError::NotConverged {
            iterations,
            residual,
        }) => {
            writeln!(
                w,
                "{lin},false,{iterations},{residual:.16e},NaN,{grad_norm:.16e}"
            )?;
            warn!("aggregate system did not converge: residual {residual:.3e} after {iterations} iterations");
            Outcome {
                artifacts: Vec::new(),
                status: "aggregate-not-converged".into(),
                failure: Some(CliError::Numeric(CoreError::NotConverged {
                    iterations,
                    residual,
                })),
            }
        }
        Err(e) => return Err(CliError::Numeric(e)),
    };
    w.flush()?;
    drop(w);
    artifacts.push(report_path);
    Ok(Outcome {
        artifacts,
        ..outcome
    })
}

fn random_control(s: &Scenario, rng: &mut ChaCha8Rng) -> ControlTrajectory {
    ControlTrajectory {
        f: (0..s.tg.steps)
            .map(|_| ScalarField::from_fn(&s.grid, |_, _| rng.random_range(-1.0..1.0)))
            .collect(),
    }
}

fn gradcheck(cfg: &ScenarioConfig, s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let gc = &cfg.gradcheck;
    let eval = reduced_gradient(&s.u0, &s.p0, &s.control, &s.params, &s.coef, &s.tg)
        .map_err(CliError::Numeric)?;
    let mut rng = ChaCha8Rng::seed_from_u64(gc.seed);
    let path = out.join("gradcheck.csv");
    let mut w = csv_file(&path)?;
    writeln!(w, "direction,fd,adjoint,rel_error")?;
    let mut worst: f64 = 0.0;
    for k in 0..gc.directions {
        let dir = random_control(s, &mut rng);
        let fd = fd_directional(
            |c| {
                let traj = solve_forward(&s.u0, &s.p0, c, &s.coef, &s.tg)?;
                evaluate_cost(&traj, c, &s.params, &s.tg)
            },
            &s.control,
            &dir,
            gc.step,
        )
        .map_err(CliError::Numeric)?;
        let exact = eval.gradient.inner(&dir);
        let rel = (fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        writeln!(w, "{k},{fd:.16e},{exact:.16e},{rel:.6e}")?;
    }
    w.flush()?;
    drop(w);
    info!(
        "gradient check: max relative error {worst:.3e} (tolerance {:.1e})",
        gc.tol
    );
    let failure = (worst > gc.tol).then(|| {
        CliError::Verification(format!(
            "gradient check max relative error {worst:.3e} exceeds {:.1e}",
            gc.tol
        ))
    });
    Ok(Outcome {
        artifacts: vec![path],
        status: if failure.is_some() {
            "failed"
        } else {
            "passed"
        }
        .into(),
        failure,
    })
}

fn optimize(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let result = minimize(
        &s.control,
        &s.u0,
        &s.p0,
        &s.params,
        &s.coef,
        &s.tg,
        &s.optimizer,
    )
    .map_err(CliError::Numeric)?;
    let path = out.join("convergence.csv");
    let mut w = csv_file(&path)?;
    result.write_convergence_csv(&mut w)?;
    w.flush()?;
    drop(w);
    let mut artifacts = vec![path];
    artifacts.extend(write_levels(&result.best_control.f, out, "f")?);
    let last = result.j_history.len() - 1;
    info!(
        "optimizer {} after {} iterations: J = {:.6e}, |grad| = {:.3e}",
        result.status.as_str(),
        result.iterations(),
        result.j_history[last],
        result.grad_norm_history[last]
    );
    if result.status != deadoil_core::OptimizationStatus::Converged {
        warn!("optimizer stopped with status {}", result.status.as_str());
    }
    Ok(Outcome::ok(artifacts, result.status.as_str()))
}

const SPATIAL_ORDER: (f64, f64) = (1.8, 2.2);
const TEMPORAL_ORDER: (f64, f64) = (0.8, 1.2);

fn orders_within(report: &ConvergenceReport, band: (f64, f64)) -> bool {
    let orders = report.orders();
    !orders.is_empty() && orders.iter().all(|o| (band.0..=band.1).contains(o))
}

fn verify(cfg: &ScenarioConfig, s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let v = &cfg.verify;
    let mut problems = Vec::new();
    let mut artifacts = Vec::new();

    let report = verify_hypotheses(&s.coef, v.r_min, v.r_max, v.samples);
    let path = out.join("hypotheses.csv");
    let mut w = csv_file(&path)?;
    writeln!(w, "check,passed,worst_r,worst_value")?;
    for c in &report.checks {
        writeln!(
            w,
            "\"{}\",{},{:.16e},{:.16e}",
            c.name, c.passed, c.worst_r, c.worst_value
        )?;
        if !c.passed {
            problems.push(format!(
                "hypothesis `{}` fails at r = {}",
                c.name, c.worst_r
            ));
        }
    }
    w.flush()?;
    drop(w);
    artifacts.push(path);

    if v.mms {
        let (spatial, temporal) =
            standard_mms_studies(&s.coef, v.mms_t_final).map_err(CliError::Numeric)?;
        for (name, rep, band) in [
            ("mms_spatial.csv", &spatial, SPATIAL_ORDER),
            ("mms_temporal.csv", &temporal, TEMPORAL_ORDER),
        ] {
            let path = out.join(name);
            let mut w = csv_file(&path)?;
            rep.write_csv(&mut w)?;
            w.flush()?;
            drop(w);
            artifacts.push(path);
            if !orders_within(rep, band) {
                problems.push(format!(
                    "{name}: observed orders {:?} outside [{}, {}]",
                    rep.orders(),
                    band.0,
                    band.1
                ));
            }
        }
    }

    let failure = (!problems.is_empty()).then(|| CliError::Verification(problems.join("; ")));
    Ok(Outcome {
        artifacts,
        status: if failure.is_some() {
            "failed"
        } else {
            "passed"
        }
        .into(),
        failure,
    })
}
