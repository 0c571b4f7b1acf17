use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use onsketch::harness::{
    self, emit_qq, mean_functional, parse_config, run_experiment, ExperimentConfig,
};
use onsketch::oracle::{limiting_covariance, OracleOptions};

#[derive(Parser)]
#[command(
    name = "onsketch",
    version,
    about = "Online sketched Newton experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicated trajectories and write trials.csv and summary.json.
    Run(RunArgs),
    /// Run the replications and compare terminal iterates with the oracle Σ*.
    Qq(RunArgs),
    /// Print K*, Γ*, and Σ* for a configuration.
    Oracle(ConfigArgs),
    /// Run the fast invariant checks.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Worker threads for replications.
    #[arg(long, env = "ONSKETCH_JOBS", default_value_t = 1)]
    jobs: usize,
}

/// Every config key as an optional `--key` flag. Flags override the file.
#[derive(Args)]
struct ConfigArgs {
    /// `key = value` file; `#` starts a comment.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, alias = "d")]
    dim: Option<String>,
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    sigma2: Option<String>,
    #[arg(long)]
    sketch: Option<String>,
    #[arg(long)]
    columns: Option<String>,
    /// Inner steps, or `exact` for a direct solve.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    gamma_mode: Option<String>,
    #[arg(long)]
    mu_nu: Option<String>,
    #[arg(long)]
    mc_samples_mu_nu: Option<String>,
    #[arg(long)]
    refresh_every: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    c_phi: Option<String>,
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    q: Option<String>,
    /// Comma list of steps, or `geom:<levels>`.
    #[arg(long)]
    checkpoints: Option<String>,
    /// Steps kept out of the covariance estimator.
    #[arg(long)]
    warmup: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let pairs = [
            ("model", &self.model),
            ("dim", &self.dim),
            ("design", &self.design),
            ("r", &self.r),
            ("sigma2", &self.sigma2),
            ("sketch", &self.sketch),
            ("columns", &self.columns),
            ("tau", &self.tau),
            ("gamma_mode", &self.gamma_mode),
            ("mu_nu", &self.mu_nu),
            ("mc_samples_mu_nu", &self.mc_samples_mu_nu),
            ("refresh_every", &self.refresh_every),
            ("steps", &self.steps),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("c_phi", &self.c_phi),
            ("phi", &self.phi),
            ("q", &self.q),
            ("checkpoints", &self.checkpoints),
            ("warmup", &self.warmup),
            ("out", &self.out),
        ];
        let overrides: Vec<(String, String)> = pairs
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        Ok(parse_config(self.config.as_deref(), &overrides)?)
    }
}

fn print_matrix(name: &str, m: &onsketch::Mat) {
    println!("{name} =");
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:>12.6}")).collect();
        println!("  [{}]", row.join(" "));
    }
}

fn oracle_sigma(cfg: &ExperimentConfig) -> Result<onsketch::oracle::LimitingCovariance<f64>> {
    let gt = onsketch::models::GroundTruth::linspace(&cfg.design_spec(), cfg.sigma2)?;
    Ok(limiting_covariance(
        cfg.model,
        &gt,
        &cfg.sketch_config()?,
        &cfg.schedule()?,
        &OracleOptions::default(),
    )?)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    if cfg.out.is_none() {
        bail!("`run` needs --out <dir>");
    }
    let exp = run_experiment(&cfg, args.jobs)?;
    println!("{:>10} {:>12} {:>10} {:>12}", "t", "mae", "cov %", "ci_len");
    for c in &exp.summary.checkpoints {
        println!(
            "{:>10} {:>12.4e} {:>10.2} {:>12.4e}",
            c.t, c.mae_mean, c.coverage_pct, c.ci_len_mean
        );
    }
    Ok(())
}

fn cmd_qq(args: &RunArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let oracle = oracle_sigma(&cfg).context("building the oracle Σ*")?;
    let exp = run_experiment(&cfg, args.jobs)?;
    let phi_t = cfg.schedule()?.at(cfg.steps);
    let report = emit_qq(
        Some(&oracle.sigma_star),
        &mean_functional(cfg.dim),
        exp.ground_truth.x_star(),
        phi_t,
        &exp.terminals(),
        cfg.out.as_deref(),
    )?;
    println!(
        "reps {}  KS {:.4}  (5% critical value {:.4})",
        report.len(),
        report.ks,
        1.36 / (report.len() as f64).sqrt()
    );
    Ok(())
}

fn cmd_oracle(args: &ConfigArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let lc = oracle_sigma(&cfg)?;
    if let Some(mn) = lc.mu_nu {
        println!("mu = {:.6e}, nu = {:.6}", mn.mu, mn.nu);
    }
    println!(
        "alpha = {:.6}, beta = {:.6}, gamma = {:.6}, tau = {}",
        lc.params.alpha, lc.params.beta, lc.params.gamma, lc.params.tau
    );
    print_matrix("K*", &lc.k_star);
    print_matrix("Gamma*", lc.gamma_star.value.as_matrix());
    if let Some(se) = lc.gamma_star.std_error {
        println!("  (Monte-Carlo, max entry standard error {se:.2e})");
    }
    print_matrix("Sigma*", lc.sigma_star.as_matrix());
    println!("Lyapunov residual {:.2e}", lc.residual);
    Ok(())
}

fn cmd_selftest(seed: u64) -> Result<()> {
    let checks = harness::run_selftest(seed)?;
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", checks.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Qq(a) => cmd_qq(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Selftest { seed } => cmd_selftest(*seed),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
