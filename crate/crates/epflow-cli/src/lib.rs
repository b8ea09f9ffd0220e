//! Library surface of the experiment runner: the CLI definition, the config
//! plumbing and the per-experiment entry points, exposed so integration tests
//! can drive runs in-process.

pub mod audit;
pub mod config;
pub mod experiments;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use epflow_core::{CoreError, FluidMetric};
use thiserror::Error;

use config::{
    AuditParams, ConfigFile, GeneratorCheckParams, RigidBodyParams, TorusIdentityParams,
    TorusRunParams, VariationalParams,
};
use experiments::Verdict;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Single-line machine-parsable form for stderr.
    pub fn to_json_line(&self) -> String {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
        };
        format!(
            "{{\"error\":{},\"kind\":\"{kind}\"}}",
            serde_json::to_string(&self.to_string()).unwrap_or_else(|_| "\"?\"".into())
        )
    }
}

/// Reproducible experiment runner for the group-variational numerical suite.
#[derive(Parser, Debug)]
#[command(name = "epflow", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// RNG seed recorded in the manifest.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for manifest, data files and verdict.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate the dissipative rigid-body reduction and check its energy law.
    RigidBody {
        #[command(flatten)]
        common: CommonArgs,
        /// Inertia triple, e.g. --inertia 1,2,3
        #[arg(long, value_parser = parse_triple)]
        inertia: Option<[f64; 3]>,
        /// Initial state coordinates.
        #[arg(long, value_parser = parse_triple)]
        u0: Option<[f64; 3]>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        noise_scale: Option<f64>,
    },
    /// Verify criticality of integrated drifts against the ten-curve dictionary.
    VariationalCheck {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_parser = parse_triple)]
        inertia: Option<[f64; 3]>,
        #[arg(long, value_parser = parse_triple)]
        u0: Option<[f64; 3]>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Monte Carlo consistency of sampled paths with the analytic generator.
    SdeGeneratorCheck {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Run the full invariant battery and print a pass/fail table.
    AlgebraAudit {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n_random: Option<usize>,
    },
    /// Exactness of the summed-derivative identity over truncations.
    TorusIdentity {
        #[command(flatten)]
        common: CommonArgs,
        /// Truncation radii, e.g. --m-list 1,2,4,6
        #[arg(long, value_delimiter = ',')]
        m_list: Option<Vec<u32>>,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Reduced incompressible flow under the L2 pairing.
    TorusNs {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Zero out all noise amplitudes.
        #[arg(long)]
        inviscid: bool,
    },
    /// Reduced flow under the H1 pairing.
    TorusCh {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        inviscid: bool,
    },
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("expected three comma-separated numbers: {e}"))?;
    if parts.len() != 3 {
        return Err(format!("expected three components, got {}", parts.len()));
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn load_config(common: &CommonArgs, experiment: &str) -> Result<ConfigFile, CliError> {
    match &common.config {
        Some(path) => {
            let file = ConfigFile::load(path)?;
            file.check_experiment(experiment)?;
            Ok(file)
        }
        None => Ok(ConfigFile::default()),
    }
}

fn resolve_out(common: &CommonArgs, file: &ConfigFile, experiment: &str) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(experiment))
}

fn resolve_seed(common: &CommonArgs, file: &ConfigFile) -> u64 {
    common.seed.or(file.seed).unwrap_or(42)
}

/// Run the selected experiment; returns its verdict.
pub fn run(cli: Cli) -> Result<Verdict, CliError> {
    match cli.command {
        Command::RigidBody {
            common,
            inertia,
            u0,
            dt,
            t_end,
            noise_scale,
        } => {
            let file = load_config(&common, "rigid-body")?;
            let mut params: RigidBodyParams = file.params_as()?;
            if let Some(v) = inertia {
                params.inertia = v;
            }
            if let Some(v) = u0 {
                params.u0 = v;
            }
            if let Some(v) = dt {
                params.dt = v;
            }
            if let Some(v) = t_end {
                params.t_end = v;
            }
            if let Some(v) = noise_scale {
                params.noise_scale = v;
            }
            let out = resolve_out(&common, &file, "rigid-body");
            experiments::run_rigid_body(&params, resolve_seed(&common, &file), &out)
        }
        Command::VariationalCheck {
            common,
            inertia,
            u0,
            dt,
            eps,
        } => {
            let file = load_config(&common, "variational-check")?;
            let mut params: VariationalParams = file.params_as()?;
            if let Some(v) = inertia {
                params.inertia = v;
            }
            if let Some(v) = u0 {
                params.u0 = v;
            }
            if let Some(v) = dt {
                params.dt = v;
            }
            if let Some(v) = eps {
                params.eps = v;
            }
            let out = resolve_out(&common, &file, "variational-check");
            experiments::run_variational_check(&params, resolve_seed(&common, &file), &out)
        }
        Command::SdeGeneratorCheck {
            common,
            n_samples,
            h,
            t_end,
        } => {
            let file = load_config(&common, "sde-generator-check")?;
            let mut params: GeneratorCheckParams = file.params_as()?;
            if let Some(v) = n_samples {
                params.n_samples = v;
            }
            if let Some(v) = h {
                params.h = v;
            }
            if let Some(v) = t_end {
                params.t_end = v;
            }
            let out = resolve_out(&common, &file, "sde-generator-check");
            experiments::run_generator_check(&params, resolve_seed(&common, &file), &out)
        }
        Command::AlgebraAudit { common, n_random } => {
            let file = load_config(&common, "algebra-audit")?;
            let mut params: AuditParams = file.params_as()?;
            if let Some(v) = n_random {
                params.n_random = v;
            }
            let out = resolve_out(&common, &file, "algebra-audit");
            let seed = resolve_seed(&common, &file);
            let checks = audit::run_audit(&params, seed)?;
            print!("{}", audit::format_table(&checks));
            let verdict = Verdict::new("algebra-audit", checks);
            experiments::write_audit_artifacts(&params, seed, &out, &verdict)?;
            Ok(verdict)
        }
        Command::TorusIdentity {
            common,
            m_list,
            gamma,
        } => {
            let file = load_config(&common, "torus-identity")?;
            let mut params: TorusIdentityParams = file.params_as()?;
            if let Some(v) = m_list {
                params.m_list = v;
            }
            if let Some(v) = gamma {
                params.gamma = v;
            }
            let out = resolve_out(&common, &file, "torus-identity");
            experiments::run_torus_identity(&params, resolve_seed(&common, &file), &out)
        }
        Command::TorusNs {
            common,
            m,
            gamma,
            dt,
            t_end,
            inviscid,
        } => {
            let file = load_config(&common, "torus-ns")?;
            let mut params: TorusRunParams = file.params_as()?;
            apply_torus_overrides(&mut params, m, gamma, dt, t_end, inviscid);
            let out = resolve_out(&common, &file, "torus-ns");
            experiments::run_torus_fluid(
                &params,
                FluidMetric::L2,
                resolve_seed(&common, &file),
                &out,
            )
        }
        Command::TorusCh {
            common,
            m,
            gamma,
            dt,
            t_end,
            inviscid,
        } => {
            let file = load_config(&common, "torus-ch")?;
            let mut params: TorusRunParams = file.params_as()?;
            apply_torus_overrides(&mut params, m, gamma, dt, t_end, inviscid);
            let out = resolve_out(&common, &file, "torus-ch");
            experiments::run_torus_fluid(
                &params,
                FluidMetric::H1,
                resolve_seed(&common, &file),
                &out,
            )
        }
    }
}

fn apply_torus_overrides(
    params: &mut TorusRunParams,
    m: Option<u32>,
    gamma: Option<f64>,
    dt: Option<f64>,
    t_end: Option<f64>,
    inviscid: bool,
) {
    if let Some(v) = m {
        params.m = v;
    }
    if let Some(v) = gamma {
        params.gamma = v;
    }
    if let Some(v) = dt {
        params.dt = v;
    }
    if let Some(v) = t_end {
        params.t_end = v;
    }
    if inviscid {
        params.inviscid = true;
    }
}
