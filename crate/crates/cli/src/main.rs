//! `csgd-lab`: run experiment configs, print theory constants, run the invariant suite.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 run-time failure,
//! 3 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csgd_core::harness::{
    load_variants, run_variant, summary, sweep_variants, verify, write_variant, ConfigError, ExperimentError,
    Variant, VariantResult, VerifyOptions,
};
use csgd_core::harness::experiment::variant_dir;
use csgd_core::harness::output::real;
use csgd_core::theory::{
    a1_tilde, pr_slack, report, solve_sz_program, sz_grid_search, zeta, Beta2Form, TheoryInputs, TheoryReport,
};
use csgd_core::ArmijoConfig;

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "csgd-lab", version, about = "Compressed SGD with Armijo step-size search: experiments and constants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every variant of a config over its seeds and write CSV traces.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's `output`, then `runs/<config stem>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// Dotted parameter name, e.g. `armijo.scale_a`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the closed-form convergence constants.
    Theory(TheoryArgs),
    /// Run the invariant suite.
    Verify {
        /// Smaller sample counts and seed lists.
        #[arg(long)]
        quick: bool,
        /// Fault injection: force the scaling factor to 1 in every check.
        #[arg(long, hide = true)]
        disable_scaling: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Beta2Arg {
    Appendix,
    MainText,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    rho: Option<f64>,
    /// Defaults to zeta/10.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Defaults to 0.9 (zeta - epsilon).
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    l_max: Option<f64>,
    #[arg(long)]
    mu_bar: Option<f64>,
    #[arg(long)]
    mu_max: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    l_mean: Option<f64>,
    #[arg(long)]
    eps_nc: Option<f64>,
    #[arg(long, value_enum)]
    beta2_form: Option<Beta2Arg>,
    /// Also run the (s, z) grid oracle and the (p, r) predicate checks.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run { config, out } => {
            let variants = match load_variants(&config) {
                Ok(v) => v,
                Err(e) => return config_failure(&e),
            };
            execute(&config, variants, out, true)
        }
        Command::Sweep { config, param, values, out } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(source) => return config_failure(&ConfigError::Io { path: config.clone(), source }),
            };
            match sweep_variants(&text, &config.display().to_string(), &param, &values) {
                Ok(v) => execute(&config, v, out, false),
                Err(e) => config_failure(&e),
            }
        }
        Command::Theory(args) => theory(&args),
        Command::Verify { quick, disable_scaling } => run_verify(VerifyOptions { quick, disable_scaling }),
    }
}

fn config_failure(e: &ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_USAGE)
}

fn default_out(config: &Path, variants: &[Variant]) -> PathBuf {
    if let Some(out) = variants.first().and_then(|v| v.config.output.clone()) {
        return out;
    }
    let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    Path::new("runs").join(stem)
}

/// Runs and writes every variant; a failed seed still has its partial trace written.
fn execute(config: &Path, variants: Vec<Variant>, out: Option<PathBuf>, allow_flat: bool) -> ExitCode {
    let out = out.unwrap_or_else(|| default_out(config, &variants));
    let single = allow_flat && variants.len() == 1;
    let mut results: Vec<VariantResult> = Vec::new();
    let mut runtime_failure = false;
    for v in &variants {
        let result = match run_variant(v) {
            Ok(r) => r,
            Err(e @ ExperimentError::Setup { .. }) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_RUNTIME);
            }
        };
        let dir = variant_dir(&out, &result, single);
        if let Err(e) = write_variant(&dir, &result) {
            eprintln!("error: {e}");
            runtime_failure = true;
        }
        print!("{}", summary(&result));
        println!("{}: wrote {}", result.name, dir.display());
        for s in result.failed() {
            eprintln!("error: {} seed {}: {}", result.name, s.seed, s.error.as_deref().unwrap_or("run failed"));
            runtime_failure = true;
        }
        results.push(result);
    }
    print_ratios(&results);
    if runtime_failure {
        ExitCode::from(EXIT_RUNTIME)
    } else {
        ExitCode::SUCCESS
    }
}

fn mean_final_loss(r: &VariantResult) -> f64 {
    r.seeds.iter().map(|s| s.trace.final_loss).sum::<f64>() / r.seeds.len() as f64
}

/// Mean final loss of every variant relative to the first one.
fn print_ratios(results: &[VariantResult]) {
    if results.len() < 2 {
        return;
    }
    let base = &results[0];
    let base_loss = mean_final_loss(base);
    for r in results {
        println!("mean_final_loss[{}] = {}", r.name, real(mean_final_loss(r)));
    }
    for r in &results[1..] {
        println!("loss_ratio[{}/{}] = {}", r.name, base.name, real(mean_final_loss(r) / base_loss));
    }
}

fn theory_inputs(args: &TheoryArgs) -> Result<TheoryInputs, String> {
    let rho = args.rho.unwrap_or(ArmijoConfig::default().rho);
    let mut inputs = TheoryInputs::new(args.sigma, args.gamma, rho).map_err(|e| e.to_string())?;
    if let Some(eps) = args.epsilon {
        inputs.epsilon = eps;
        inputs.a = 0.9 * (zeta(args.sigma, args.gamma).map_err(|e| e.to_string())? - eps);
    }
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut inputs.a, args.a);
    set(&mut inputs.alpha_max, args.alpha_max);
    set(&mut inputs.l_max, args.l_max);
    set(&mut inputs.mu_bar, args.mu_bar);
    set(&mut inputs.nu, args.nu);
    set(&mut inputs.theta, args.theta);
    inputs.mu_max = args.mu_max;
    inputs.p = args.p;
    inputs.r = args.r;
    inputs.l_mean = args.l_mean;
    inputs.eps_nc = args.eps_nc;
    inputs.beta2_form = match args.beta2_form {
        Some(Beta2Arg::MainText) => Beta2Form::MainText,
        _ => Beta2Form::Appendix,
    };
    inputs.validate().map_err(|e| e.to_string())?;
    Ok(inputs)
}

fn input_rows(i: &TheoryInputs) -> Vec<(&'static str, f64)> {
    vec![
        ("sigma", i.sigma),
        ("gamma", i.gamma),
        ("rho", i.rho),
        ("epsilon", i.epsilon),
        ("a", i.a),
        ("alpha_max", i.alpha_max),
        ("l_max", i.l_max),
        ("mu_bar", i.mu_bar),
        ("nu", i.nu),
        ("theta", i.theta),
    ]
}

fn print_report(rep: &TheoryReport) {
    let inputs = input_rows(&rep.inputs);
    let rows = rep.rows();
    println!("{:<20} {:>24}", "constant", "value");
    for (k, v) in inputs.iter().chain(&rows) {
        println!("{k:<20} {v:>24.12e}");
    }
    let flags: Vec<String> = rep.flags.iter().map(ToString::to_string).collect();
    println!("{:<20} {}", "flags", if flags.is_empty() { "none".to_string() } else { flags.join(", ") });
    println!();
    for (k, v) in inputs.iter().chain(&rows) {
        println!("{k}={}", real(*v));
    }
    println!("flags={}", flags.join(","));
}

/// `(name, passed, detail)` for every predicate behind the reported constants.
fn theory_checks(rep: &TheoryReport) -> Vec<(&'static str, bool, String)> {
    let i = &rep.inputs;
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    let mut grid_ok = true;
    let psis = (0..10).map(|k| k as f64 / 10.0).chain([1.0 - i.gamma]);
    for psi in psis.filter(|p| *p < 1.0) {
        match (solve_sz_program(psi), sz_grid_search(psi)) {
            (Ok((_, _, closed)), Ok((_, _, grid))) => worst = worst.max((grid - closed).abs() / closed),
            _ => grid_ok = false,
        }
    }
    out.push(("sz_grid_oracle", grid_ok && worst <= 1e-4, format!("max relative gap {worst:.3e}")));
    let a1 = a1_tilde(i.sigma, i.gamma, rep.p_star, rep.r_star);
    let gap = (a1 - rep.zeta).abs() / rep.zeta;
    out.push(("a1_at_optimum_is_zeta", gap <= 1e-12, format!("relative gap {gap:.3e}")));
    let slack = pr_slack(i.gamma, rep.convex.p, rep.convex.r);
    out.push(("pr_eps_feasible", slack > 0.0, format!("slack {slack:.6e}")));
    let margin = rep.convex.a1_tilde - rep.convex.a_hat;
    out.push(("pr_eps_above_a_hat", margin > 0.0, format!("a1_tilde - a_hat = {margin:.6e}")));
    if i.a <= rep.convex.a_hat {
        out.push(("delta1_positive", rep.convex.delta1 > 0.0, format!("delta1 = {:.6e}", rep.convex.delta1)));
    }
    out
}

fn theory(args: &TheoryArgs) -> ExitCode {
    let rep = match theory_inputs(args).and_then(|i| report(&i).map_err(|e| e.to_string())) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    print_report(&rep);
    if !args.check {
        return ExitCode::SUCCESS;
    }
    println!();
    let checks = theory_checks(&rep);
    for (name, ok, detail) in &checks {
        println!("[{}] {name:<24} {detail}", if *ok { "PASS" } else { "FAIL" });
    }
    if checks.iter().all(|c| c.1) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    }
}

fn run_verify(opts: VerifyOptions) -> ExitCode {
    let items = verify(&opts);
    for item in &items {
        println!("{item}");
    }
    let failed: Vec<&str> = items.iter().filter(|i| !i.passed).map(|i| i.name).collect();
    println!("{}/{} checks passed", items.len() - failed.len(), items.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed: {}", failed.join(", "));
        ExitCode::from(EXIT_VERIFY)
    }
}
