use anyhow::Result;
use bsgrowth::bsmap::OrientationChoice;
use bsgrowth::builtins::BUILTIN_NAMES;
use bsgrowth::thermo::rate;
use bsgrowth_cli::config::{load_spec, RunConfig};
use bsgrowth_cli::pipeline::{self, Session};
use bsgrowth_cli::{exit_code, parse_grid, parse_interval};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bsgrowth", version, about = "Bowen-Series maps, pressure and growth-rate spectra of Fuchsian groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Built-in catalogue and group validation.
    Group {
        #[command(subcommand)]
        action: GroupAction,
    },
    /// The boundary map: f-expansions and geodesic coding.
    Bs {
        #[command(subcommand)]
        action: BsAction,
    },
    /// The Markov partition.
    Markov {
        #[command(subcommand)]
        action: MarkovAction,
    },
    /// Pressure, spectrum and rate function.
    Thermo {
        #[command(subcommand)]
        action: ThermoAction,
    },
    /// Monte Carlo large-deviation experiment.
    Ldp {
        #[command(subcommand)]
        action: LdpAction,
    },
    /// Full pipeline with the invariant suite; exits 3 if an acceptance check fails.
    Report(Common),
}

#[derive(Subcommand)]
enum GroupAction {
    List,
    Validate(Common),
    /// Print the JSON spec.
    Show(Common),
}

#[derive(Subcommand)]
enum BsAction {
    /// f-expansion of a boundary point.
    Expand {
        #[command(flatten)]
        common: Common,
        /// Boundary angle in radians.
        #[arg(long)]
        point: f64,
    },
    /// Cutting sequences of random geodesics with the parallel check; writes trace.csv.
    Trace(Common),
}

#[derive(Subcommand)]
enum MarkovAction {
    /// Writes markov.csv.
    Dump(Common),
}

#[derive(Subcommand)]
enum ThermoAction {
    /// Writes pressure.csv.
    Pressure(Common),
    /// Writes pressure.csv and spectrum.csv.
    Spectrum(Common),
    /// Writes pressure.csv, spectrum.csv and rate.csv.
    Rate(Common),
}

#[derive(Subcommand)]
enum LdpAction {
    /// Writes ldp.csv along with the curves it is compared against.
    Run(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum OrientationArg {
    Auto,
    Cw,
    Ccw,
}

#[derive(Args, Clone)]
struct Common {
    /// Built-in name or path to a JSON group spec.
    #[arg(long, default_value = "schottky-rank2")]
    group: String,
    /// Transfer-matrix depth, or trace/expansion length for the bs commands.
    #[arg(long, default_value_t = 12)]
    depth: usize,
    /// Word length of the Poincaré series check in a report.
    #[arg(long, default_value_t = 10)]
    poincare_depth: usize,
    /// Beta grid: `a,b,c` or `lo:hi:n`.
    #[arg(long, value_parser = parse_grid)]
    beta: Option<Vec<f64>>,
    /// Alpha grid: `a,b,c` or `lo:hi:n`.
    #[arg(long, value_parser = parse_grid)]
    alpha_grid: Option<Vec<f64>>,
    /// Deviation interval `a,b`.
    #[arg(long, value_parser = parse_interval)]
    interval: Option<(f64, f64)>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Random geodesics for trace and the report's parallel check.
    #[arg(long, default_value_t = 200)]
    geodesics: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    orientation: OrientationArg,
    #[arg(long)]
    skip_even_corner_gate: bool,
}

impl Common {
    fn config(&self) -> RunConfig {
        RunConfig {
            group: self.group.clone(),
            depth: self.depth,
            poincare_depth: self.poincare_depth,
            betas: self.beta.clone(),
            alphas: self.alpha_grid.clone(),
            interval: self.interval,
            samples: self.samples,
            geodesics: self.geodesics,
            seed: self.seed,
            out: self.out.clone(),
            orientation: match self.orientation {
                OrientationArg::Auto => OrientationChoice::Auto,
                OrientationArg::Cw => OrientationChoice::Cw,
                OrientationArg::Ccw => OrientationChoice::Ccw,
            },
            skip_even_corner_gate: self.skip_even_corner_gate,
        }
    }
}

fn thermo(c: &Common, stage: u8) -> Result<()> {
    let s = Session::open(c.config())?;
    let th = s.thermo()?;
    let grid = pipeline::beta_grid(&s, &th)?;
    let curve = th.pressure_curve(&grid)?;
    pipeline::write_pressure(&s, &th, &curve)?;
    println!("δ bracket [{:.6}, {:.6}]", curve.delta.0, curve.delta.1);
    if stage == 0 {
        return Ok(());
    }
    let sp = th.spectrum(&curve, s.config.alphas.as_deref().unwrap_or(&[]))?;
    pipeline::write_spectrum(&s, &sp)?;
    println!("α⁻ = {:.6}, α⁺ = {:.6}, α_G = {:.6}", sp.alpha_minus, sp.alpha_plus, sp.alpha_g);
    for w in &sp.warnings {
        eprintln!("warning: {w}");
    }
    if stage == 1 {
        return Ok(());
    }
    let rc = rate(&sp);
    pipeline::write_rate(&s, &rc)?;
    println!("I slopes: left {:.6}, right {:.6}", rc.left_slope, rc.right_slope);
    if stage == 2 {
        return Ok(());
    }
    let ex = pipeline::run_ldp(&s, &sp, &rc)?;
    pipeline::write_ldp(&s, &ex)?;
    for r in &ex.rows {
        println!("n = {:>2}: {} hits, fraction {:.6e}{}", r.n, r.hits, r.fraction, if r.flagged { " (flagged)" } else { "" });
    }
    println!(
        "fitted rate {:.5}, predicted {}",
        ex.fitted_rate,
        ex.predicted_rate.map(|x| format!("{x:.5}")).unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Group { action } => match action {
            GroupAction::List => {
                for n in BUILTIN_NAMES {
                    println!("{n}");
                }
            }
            GroupAction::Validate(c) => {
                for line in pipeline::validate_group(&c.config())? {
                    println!("{line}");
                }
            }
            GroupAction::Show(c) => println!("{}", load_spec(&c.group)?.to_json()),
        },
        Command::Bs { action } => match action {
            BsAction::Expand { common, point } => {
                let s = Session::open(common.config())?;
                let e = s.bs.f_expand(point, common.depth);
                let letters: Vec<String> = e.word.iter().map(|l| (l + 1).to_string()).collect();
                println!("{}", letters.join(" "));
                if let Some(k) = e.escaped_at {
                    println!("left the domain at step {k}");
                }
            }
            BsAction::Trace(c) => {
                let s = Session::open(c.config())?;
                let t = pipeline::run_trace(&s, c.geodesics, c.depth)?;
                println!(
                    "{}/{} geodesics pass the parallel check ({} vertex frames)",
                    t.passed, t.geodesics, t.vertex_frames
                );
                for f in &t.failures {
                    println!("{f}");
                }
            }
        },
        Command::Markov { action: MarkovAction::Dump(c) } => {
            let s = Session::open(c.config())?;
            pipeline::write_markov(&s)?;
            println!(
                "{} cells, cusp level {}, W' residual {:.2e}, (M2) residual {:.2e}",
                s.partition.len(),
                s.partition.level(),
                s.partition.w_prime.invariance_residual,
                s.partition.m2_residual
            );
        }
        Command::Thermo { action } => match action {
            ThermoAction::Pressure(c) => thermo(&c, 0)?,
            ThermoAction::Spectrum(c) => thermo(&c, 1)?,
            ThermoAction::Rate(c) => thermo(&c, 2)?,
        },
        Command::Ldp { action: LdpAction::Run(c) } => thermo(&c, 3)?,
        Command::Report(c) => {
            let r = pipeline::run_report(c.config())?;
            for l in &r.summary {
                println!("{l}");
            }
            for ch in &r.checks {
                println!(
                    "[{}] {}{}: {}",
                    if ch.passed { "pass" } else { "FAIL" },
                    ch.name,
                    if ch.acceptance { "" } else { " (informational)" },
                    ch.detail
                );
            }
            let failed: Vec<String> = r.failures().iter().map(|c| c.name.to_string()).collect();
            if !failed.is_empty() {
                return Err(bsgrowth_cli::AcceptanceFailure(failed).into());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
