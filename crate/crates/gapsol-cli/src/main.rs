//! `gapsol` — command-line front end of the three-stage gap-soliton proof.
//!
//! Every command takes the run configuration from `--config <file>` (JSON)
//! or from the main-theorem defaults, with per-field flag overrides. Exit
//! status is 0 only when the requested work fully succeeded (for `prove`,
//! only when all three stages are proved).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gapsol::pipeline::{self, ProofBundle, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "gapsol", version, about = "Computer-assisted existence proofs of gap solitons")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all three stages and write certificates and the sampled profile.
    Prove {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Stage 1: Floquet exponent and stable bundle.
    ProveBundle {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Stage 2: stable-manifold parameterization (needs stage 1 in the directory).
    ProveManifold {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Stage 3: boundary-value problem (needs stages 1–2 in the directory).
    ProveSoliton {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Newton re-polish of a stored candidate, with a residual report.
    Refine {
        #[arg(long, value_enum)]
        stage: StageArg,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Re-validate stored candidates and sample the certified profile as CSV.
    Sample {
        #[arg(long, default_value_t = 20.0)]
        xmax: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        /// Output CSV (default `<dir>/profile.csv`; `-` for stdout).
        #[arg(long)]
        csv: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Recompute every stored certificate and compare it field by field.
    VerifyCertificate {
        /// Directory holding config.json, proof.json and the candidates.
        #[arg(long, default_value = "out")]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Bundle,
    Manifold,
    Soliton,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Bundle => Stage::Bundle,
            StageArg::Manifold => Stage::Manifold,
            StageArg::Soliton => Stage::Soliton,
        }
    }
}

#[derive(Args)]
struct OutDir {
    /// Working directory for candidates and certificates.
    #[arg(long, default_value = "out")]
    dir: PathBuf,
}

/// Configuration source plus per-field overrides (decimal strings).
#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration file; defaults to the main-theorem parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    /// Bundle normalisation l.
    #[arg(long = "l")]
    l: Option<String>,
    #[arg(long = "m-f")]
    m_f: Option<usize>,
    #[arg(long = "n-t")]
    n_t: Option<usize>,
    #[arg(long = "m-c")]
    m_c: Option<usize>,
    /// Operator truncation of the stage-3 approximate inverse.
    #[arg(long = "k-c")]
    k_c: Option<usize>,
    #[arg(long)]
    theta: Option<String>,
    /// Domain length, e.g. `1+2pi`.
    #[arg(long = "length")]
    length: Option<String>,
    #[arg(long = "r-star-tf")]
    r_star_tf: Option<String>,
    #[arg(long = "r-star-c")]
    r_star_c: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> gapsol::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::main_theorem(),
        };
        let set = |dst: &mut String, v: &Option<String>| {
            if let Some(v) = v {
                dst.clone_from(v);
            }
        };
        set(&mut cfg.a, &self.a);
        set(&mut cfg.b, &self.b);
        set(&mut cfg.c, &self.c);
        set(&mut cfg.nu, &self.nu);
        set(&mut cfg.omega, &self.omega);
        set(&mut cfg.l, &self.l);
        set(&mut cfg.theta, &self.theta);
        set(&mut cfg.length, &self.length);
        set(&mut cfg.r_star_tf, &self.r_star_tf);
        set(&mut cfg.r_star_c, &self.r_star_c);
        cfg.m_f = self.m_f.unwrap_or(cfg.m_f);
        cfg.n_t = self.n_t.unwrap_or(cfg.n_t);
        cfg.m_c = self.m_c.unwrap_or(cfg.m_c);
        if self.k_c.is_some() {
            cfg.k_c = self.k_c;
        }
        cfg.parse()?;
        Ok(cfg)
    }
}

fn report(proof: &ProofBundle) {
    if let Some(c) = &proof.bundle {
        println!("bundle:   {}  λ̄ = {:.15e}  r_F = {:e}", c.verdict, c.lambda_bar, c.r);
    }
    if let Some(c) = &proof.manifold {
        println!("manifold: {}  r_TF = {:e}", c.verdict, c.r);
    }
    if let Some(c) = &proof.soliton {
        println!("soliton:  {}  σ̄ = {:.15}  r_C = {:e}", c.verdict, c.sigma_bar, c.r);
    }
    if let Some(h) = &proof.hint {
        println!("hint: {h}");
    }
    println!("config hash: {}", proof.config_hash);
}

fn run(cli: Cli) -> gapsol::Result<bool> {
    match cli.cmd {
        Command::Prove { cfg, out } => {
            let proof = pipeline::run_all(&cfg.resolve()?, &out.dir)?;
            report(&proof);
            if let Some(p) = &proof.profile {
                println!("profile: {} points on [−{}, {}], max error bound {:e}", p.points, p.xmax, p.xmax, p.max_err_bound);
            }
            println!("{}", if proof.proved { "PROVED" } else { "NOT PROVED" });
            Ok(proof.proved)
        }
        Command::ProveBundle { cfg, out } => stage(cfg, out, Stage::Bundle),
        Command::ProveManifold { cfg, out } => stage(cfg, out, Stage::Manifold),
        Command::ProveSoliton { cfg, out } => stage(cfg, out, Stage::Soliton),
        Command::Refine { stage, cfg, out } => {
            let rep = pipeline::refine_stage(&cfg.resolve()?, &out.dir, stage.into())?;
            for (i, r) in rep.residuals.iter().enumerate() {
                println!("iteration {i}: residual {r:e}");
            }
            println!("converged: {} (final residual {:e})", rep.converged, rep.final_residual());
            Ok(rep.converged)
        }
        Command::Sample { xmax, points, csv, cfg, out } => {
            let profile = pipeline::sample_dir(&cfg.resolve()?, &out.dir, xmax, points)?;
            match csv.as_deref() {
                Some("-") => pipeline::write_profile_csv(std::io::stdout().lock(), &profile)?,
                Some(path) => pipeline::write_profile_csv(std::fs::File::create(path)?, &profile)?,
                None => pipeline::write_profile_csv(std::fs::File::create(out.dir.join(pipeline::PROFILE_CSV))?, &profile)?,
            }
            let worst = profile.iter().map(|s| s.err_bound).fold(0.0, f64::max);
            eprintln!("{} samples, max error bound {worst:e}", profile.len());
            Ok(true)
        }
        Command::VerifyCertificate { dir } => {
            let rep = pipeline::verify_dir(&dir)?;
            for l in &rep.lines {
                println!("{l}");
            }
            for m in &rep.mismatches {
                println!("MISMATCH {m}");
            }
            let verdict = match (rep.ok(), rep.complete) {
                (false, _) => "VERIFICATION FAILED",
                (true, true) => "VERIFIED",
                (true, false) => "VERIFIED (stored stages only; the proof is incomplete)",
            };
            println!("{verdict}");
            Ok(rep.ok())
        }
    }
}

fn stage(cfg: ConfigArgs, out: OutDir, st: Stage) -> gapsol::Result<bool> {
    let proof = pipeline::run_stage(&cfg.resolve()?, &out.dir, st)?;
    report(&proof);
    Ok(proof.failed_stage.is_none())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
