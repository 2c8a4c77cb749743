//! `escapedim`: dimension estimates for escaping sets of pole-data fields.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numeric
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use escapedim_cli::commands::{self, RenderSpec};
use escapedim_cli::config::RunConfig;
use escapedim_cli::verify;

#[derive(Parser)]
#[command(name = "escapedim", version, about = "Escaping-set dimension toolkit")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Family tag: lattice_power | lattice_exp | log_poles | gamma | custom.
    #[arg(long, global = true)]
    family: Option<String>,
    /// Coefficient exponent of the power lattice.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Pole multiplicity of the lattice families; also the restriction cap
    /// for `delta`.
    #[arg(long = "max-mult", global = true)]
    max_mult: Option<u32>,
    /// Shift of the translated Gamma family.
    #[arg(long, global = true)]
    shift: Option<f64>,
    /// CSV pole list for the custom family.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Radius ladder for the cover upper bounds, comma separated.
    #[arg(long = "radius-ladder", global = true, value_delimiter = ',')]
    radius_ladder: Option<Vec<f64>>,
    /// Bisection tolerance for delta.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Override for the cover constant C (default 2KM).
    #[arg(long = "constant-C", global = true)]
    constant_c: Option<f64>,
    /// Distortion constant K for formula instantiation.
    #[arg(long = "koebe-K", global = true)]
    koebe_k: Option<f64>,
    /// Orbit horizon.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Seed for every sampled computation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for generated files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Critical exponent of the configured family.
    Delta {
        /// Emit the bisection trace CSV.
        #[arg(long)]
        trace: bool,
    },
    /// Order of the function and the bound 2Mρ/(2+Mρ).
    Order,
    /// Lower-pressure curves over a parameter grid.
    Pressure {
        /// Parameters t, comma separated.
        #[arg(long = "t-grid", value_delimiter = ',')]
        t_grid: Vec<f64>,
    },
    /// Combined dimension bracket (cover ladder + pressure lower bound).
    Bracket,
    /// Escape-time image over a window.
    Render {
        /// Window as re0,re1,im0,im1.
        #[arg(long, value_delimiter = ',', num_args = 4)]
        window: Vec<f64>,
        /// Grid as WIDTHxHEIGHT.
        #[arg(long, default_value = "256x256")]
        grid: String,
        /// Escape radius.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Run the acceptance suite and report PASS/FAIL per criterion.
    Verify,
}

fn load_config(ov: &Overrides) -> Result<RunConfig, String> {
    let mut config = match &ov.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(f) = &ov.family {
        config.family.tag = f.clone();
    }
    if let Some(a) = ov.alpha {
        config.family.alpha = a;
    }
    if let Some(m) = ov.max_mult {
        config.family.mult = m;
    }
    if let Some(s) = ov.shift {
        config.family.shift = s;
    }
    if let Some(p) = &ov.csv {
        config.family.csv = Some(p.clone());
    }
    if let Some(l) = &ov.radius_ladder {
        config.pipeline.ladder = l.clone();
    }
    if let Some(t) = ov.tol {
        config.tolerances.delta = t;
    }
    if let Some(c) = ov.constant_c {
        config.constants.cover_c = c;
    }
    if let Some(k) = ov.koebe_k {
        config.constants.koebe_k = k;
        config.pipeline.koebe_k = k;
    }
    if let Some(h) = ov.horizon {
        config.run.horizon = h;
    }
    if let Some(s) = ov.seed {
        config.run.seed = s;
    }
    if let Some(o) = &ov.out {
        config.run.out = Some(o.clone());
    }
    Ok(config)
}

fn write_files(
    config: &RunConfig,
    files: &[(PathBuf, Vec<u8>)],
) -> Result<(), String> {
    let Some(dir) = &config.run.out else {
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Delta { trace } => {
            commands::cmd_delta(&config, cli.overrides.max_mult, *trace)
        }
        Command::Order => commands::cmd_order(&config),
        Command::Pressure { t_grid } => {
            let grid = if t_grid.is_empty() {
                vec![0.25, 0.3, 0.35]
            } else {
                t_grid.clone()
            };
            commands::cmd_pressure(&config, &grid)
        }
        Command::Bracket => commands::cmd_bracket(&config),
        Command::Render {
            window,
            grid,
            radius,
        } => {
            let mut config = config.clone();
            if let Some(r) = radius {
                config.run.radius = *r;
            }
            let (w, h) = match grid.split_once('x') {
                Some((a, b)) => match (a.parse(), b.parse()) {
                    (Ok(w), Ok(h)) => (w, h),
                    _ => {
                        eprintln!("error: bad grid `{grid}`");
                        return ExitCode::from(2);
                    }
                },
                None => {
                    eprintln!("error: bad grid `{grid}`");
                    return ExitCode::from(2);
                }
            };
            let spec = RenderSpec {
                re0: window[0],
                re1: window[1],
                im0: window[2],
                im1: window[3],
                width: w,
                height: h,
            };
            commands::cmd_render(&config, &spec)
        }
        Command::Verify => match verify::run_verify(&config) {
            Ok(report) => {
                print!("{}", report.render());
                eprint!("{}", report.timings());
                let code = if report.all_pass() { 0 } else { 1 };
                if let Some(dir) = &config.run.out {
                    if let Err(e) = std::fs::create_dir_all(dir)
                        .map_err(|e| e.to_string())
                        .and_then(|_| {
                            std::fs::write(dir.join("verify.txt"), report.render())
                                .map_err(|e| e.to_string())
                        })
                    {
                        eprintln!("error: {e}");
                        return ExitCode::from(3);
                    }
                }
                return ExitCode::from(code);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
        },
    };
    match result {
        Ok(out) => {
            println!("{}", out.stdout);
            if let Err(e) = write_files(&config, &out.files) {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
