use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hjlab::config::ScenarioConfig;
use hjlab::conditions::CertificationReport;
use hjlab::scenario::{self, with_workers};
use hjlab::verify::{EstimateReport, Status};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hjlab", version, about = "Structure certification, solving and estimate checks for u_t + H(x,t,Du) = 0")]
struct Cli {
    /// Cap on worker threads
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Scenario {
    /// Scenario file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed
    #[arg(long)]
    seed: Option<u64>,
}

impl Scenario {
    fn load(&self) -> Result<(ScenarioConfig, PathBuf)> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        let out = cfg.output.dir.clone();
        Ok((cfg, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the structure hypotheses and write certification.json
    Certify {
        #[command(flatten)]
        scenario: Scenario,
        /// Exit with status 1 when anything is violated
        #[arg(long)]
        strict: bool,
    },
    /// Solve and check the estimates; certifies first unless --skip-cert
    Solve {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        skip_cert: bool,
    },
    /// Check the estimates on a stored trace
    Verify {
        #[command(flatten)]
        scenario: Scenario,
        /// Trace directory; defaults to <out>/trace
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Certify, solve and verify
    Run {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        skip_cert: bool,
    },
    /// List the built-in Hamiltonian families
    ListModels,
    /// Write phi, F samples, c* and t* as JSON
    DumpProfile {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_certification(r: &CertificationReport) {
    println!("model {} (dim {}), phi = {}, c* = {}", r.model, r.dim, r.phi, r.c_star);
    if let Some(v) = &r.integrability {
        println!("  integrability: {}", if v.is_integrable() { "certified" } else { "failed" });
    }
    for h in &r.results {
        println!(
            "  {}: {:?} ({} of {} resolved, {} violations){}",
            h.hypothesis,
            h.verdict,
            h.samples_resolved,
            h.samples_requested,
            h.violations,
            h.note.as_deref().map(|n| format!(" [{n}]")).unwrap_or_default()
        );
    }
    if let Some(g) = &r.g_lemma {
        for h in &g.results {
            println!("  {}: {:?} ({} violations)", h.hypothesis, h.verdict, h.violations);
        }
    }
}

fn print_estimates(r: &EstimateReport) {
    println!(
        "grid n = {}, dx = {:.3e}, dt = {:.3e}, t* = {}",
        r.grid.n,
        r.grid.dx,
        r.grid.dt,
        r.t_star.map_or("inf".to_string(), |t| t.to_string())
    );
    for e in &r.entries {
        let worst = e.worst_residual.map_or("-".to_string(), |w| format!("{w:.4e}"));
        println!("  {}: {:?} (worst {worst}, tol {:.3e})", e.check, e.status, e.tolerance);
    }
}

fn run(cli: Cli) -> Result<bool> {
    let workers = cli.workers;
    match cli.command {
        Command::Certify { scenario, strict } => {
            let (cfg, out) = scenario.load()?;
            let r = with_workers(workers, || scenario::run_certify(&cfg, &out))??;
            print_certification(&r);
            println!("wrote {}", out.display());
            Ok(!(strict && r.any_violation()))
        }
        Command::Solve {
            scenario,
            strict,
            skip_cert,
        } => {
            let (cfg, out) = scenario.load()?;
            if !skip_cert {
                let r = with_workers(workers, || scenario::run_certify(&cfg, &out))??;
                print_certification(&r);
                if r.any_violation() {
                    bail!("model not certified (see {}); pass --skip-cert to solve anyway", out.display());
                }
            }
            let r = with_workers(workers, || scenario::run_solve_verify(&cfg, &out))??;
            print_estimates(&r);
            println!("wrote {}", out.display());
            Ok(!(strict && !r.all_passed()))
        }
        Command::Verify {
            scenario,
            trace,
            strict,
        } => {
            let (cfg, out) = scenario.load()?;
            let trace = trace.unwrap_or_else(|| out.join("trace"));
            let r = with_workers(workers, || scenario::run_verify(&cfg, &trace, &out))??;
            print_estimates(&r);
            Ok(!(strict && r.entries.iter().any(|e| e.status == Status::Fail)))
        }
        Command::Run {
            scenario,
            strict,
            skip_cert,
        } => {
            let (cfg, out) = scenario.load()?;
            let s = with_workers(workers, || scenario::run_all(&cfg, &out, skip_cert))??;
            if let Some(c) = &s.certification {
                print_certification(c);
            }
            match &s.estimates {
                Some(e) => print_estimates(e),
                None => println!("solve skipped: model not certified; pass --skip-cert to solve anyway"),
            }
            println!("wrote {}", out.display());
            Ok(!(strict && s.any_failure()))
        }
        Command::ListModels => {
            for m in scenario::catalog() {
                println!("{:<20} H = {:<42} phi: {}", m.family, m.hamiltonian, m.phi);
                println!("{:<20} parameters: {}", "", m.parameters);
            }
            Ok(true)
        }
        Command::DumpProfile { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let dump = with_workers(workers, || -> hjlab::Result<_> {
                let model = cfg.build_model()?;
                Ok(scenario::build_structure(&model, &cfg)?.dump())
            })??;
            let text = serde_json::to_string_pretty(&dump)? + "\n";
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
