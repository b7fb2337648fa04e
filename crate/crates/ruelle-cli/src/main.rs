use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ruelle_cli::commands::run_command;
use ruelle_cli::config::parse_config;

/// Transfer-operator laboratory for subshifts of finite type.
#[derive(Parser)]
#[command(name = "ruelle", version, about)]
struct Cli {
    /// Path to the run configuration (TOML).
    #[arg(short, long, global = true, default_value = "ruelle.toml")]
    config: PathBuf,

    /// Output directory override (also RUELLE_OUTDIR).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Leading eigenvalue, pressure, and the zero-pressure shift P_f.
    Pressure,
    /// Gibbs cylinder measures as CSV (word, nu).
    Gibbs {
        /// Cylinder depth to report.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// The normalized potential f^(a) and the stochasticity check.
    Normalize {
        #[arg(long)]
        a: Option<f64>,
    },
    /// Contraction estimates rho_hat(b) over a b-grid.
    #[command(name = "scan-b")]
    ScanB {
        #[arg(long)]
        bmin: Option<f64>,
        #[arg(long)]
        bmax: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Iterates per b.
        #[arg(short, long)]
        m: Option<usize>,
    },
    /// Per-iterate norm profile of L_ab at one frequency.
    Contraction {
        #[arg(long)]
        b: Option<f64>,
        #[arg(short, long)]
        m: Option<usize>,
    },
    /// Cylinder family, branch separations and J-selection diagnostics.
    #[command(name = "dolgopyat-check")]
    DolgopyatCheck {
        #[arg(long)]
        b: Option<f64>,
    },
    /// Dominated iteration trajectory.
    Iterate {
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Correlation function of the suspension flow on a t-grid.
    Correlate {
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        t_steps: Option<usize>,
    },
    /// Correlations plus a fitted exponential decay rate.
    Decay {
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        t_steps: Option<usize>,
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Primitive periodic orbits (length, period, word).
    Orbits {
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Truncated zeta function in both modes at one s.
    Zeta {
        #[arg(long)]
        s_re: Option<f64>,
        #[arg(long)]
        s_im: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Prime orbit counts against li(e^{h_T lambda}).
    Poc {
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        lambda_steps: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("RUELLE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let mut cfg = match parse_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(out) = cli.out {
        cfg.outdir = out;
    }

    // Flag overrides onto the resolved config (the hash is recomputed so the
    // summary reflects what actually ran).
    let name = {
        let raw = &mut cfg.raw;
        match &cli.command {
            Command::Pressure => "pressure",
            Command::Gibbs { depth } => {
                if let Some(d) = depth {
                    raw.params.gibbs_depth = *d;
                }
                "gibbs"
            }
            Command::Normalize { a } => {
                if let Some(a) = a {
                    raw.params.a = *a;
                }
                "normalize"
            }
            Command::ScanB { bmin, bmax, steps, m } => {
                if let Some(v) = bmin {
                    raw.grids.b_min = *v;
                }
                if let Some(v) = bmax {
                    raw.grids.b_max = *v;
                }
                if let Some(v) = steps {
                    raw.grids.b_steps = *v;
                }
                if let Some(v) = m {
                    raw.grids.m_max = *v;
                }
                "scan-b"
            }
            Command::Contraction { b, m } => {
                if let Some(v) = b {
                    raw.params.b = *v;
                }
                if let Some(v) = m {
                    raw.grids.m_max = *v;
                }
                "contraction"
            }
            Command::DolgopyatCheck { b } => {
                if let Some(v) = b {
                    raw.params.b = *v;
                }
                "dolgopyat-check"
            }
            Command::Iterate { b, steps } => {
                if let Some(v) = b {
                    raw.params.b = *v;
                }
                if let Some(v) = steps {
                    raw.grids.iterate_steps = *v;
                }
                "iterate"
            }
            Command::Correlate { t_max, t_steps } => {
                if let Some(v) = t_max {
                    raw.grids.t_max = *v;
                }
                if let Some(v) = t_steps {
                    raw.grids.t_steps = *v;
                }
                "correlate"
            }
            Command::Decay { t_max, t_steps, floor } => {
                if let Some(v) = t_max {
                    raw.grids.t_max = *v;
                }
                if let Some(v) = t_steps {
                    raw.grids.t_steps = *v;
                }
                if let Some(v) = floor {
                    raw.grids.floor = *v;
                }
                "decay"
            }
            Command::Orbits { n_max } => {
                if let Some(v) = n_max {
                    raw.params.n_max = *v;
                }
                "orbits"
            }
            Command::Zeta { s_re, s_im, n_max } => {
                if let Some(v) = s_re {
                    raw.grids.s_re = *v;
                }
                if let Some(v) = s_im {
                    raw.grids.s_im = *v;
                }
                if let Some(v) = n_max {
                    raw.params.n_max = *v;
                }
                "zeta"
            }
            Command::Poc { lambda_max, lambda_steps } => {
                if let Some(v) = lambda_max {
                    raw.grids.lambda_max = *v;
                }
                if let Some(v) = lambda_steps {
                    raw.grids.lambda_steps = *v;
                }
                "poc"
            }
        }
    };
    match ruelle_cli::config::config_hash(&cfg.raw) {
        Ok(h) => cfg.hash = h,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    }

    match run_command(&cfg, name) {
        Ok(rec) => {
            println!("{} done (config {})", rec.command, &rec.config_hash[..12]);
            for (k, v) in &rec.metrics {
                println!("  {k} = {v}");
            }
            for a in &rec.artifacts {
                println!("  wrote {}", a.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
