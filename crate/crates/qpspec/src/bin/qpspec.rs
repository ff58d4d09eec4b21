use clap::{Args, Parser, Subcommand};
use qpspec::cocycle::{self, SchrodingerCocycle};
use qpspec::format::{f17, to_json17};
use qpspec::holder::{holder_scan, ScanConfig};
use qpspec::kam::{kam_iterate, schrodinger_input, KamConfig};
use qpspec::torus::{check_diophantine, FrequencyVector, TorusSeries};
use qpspec::weyl::accumulate_pk;
use qpspec::{Error, Result};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qpspec", about = "Quasi-periodic Schrodinger operator numerics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Model {
    /// Fourier-series JSON of the potential (default: sum of cos 2 pi theta_i)
    #[arg(long)]
    potential: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Comma-separated frequency vector (default: golden mean)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Option<Vec<f64>>,
}

impl Model {
    fn cocycle(&self, energy: f64) -> Result<SchrodingerCocycle> {
        let alpha = match &self.alpha {
            Some(a) => FrequencyVector::new(a.clone())?,
            None => FrequencyVector::golden(),
        };
        let v = match &self.potential {
            Some(p) => TorusSeries::from_json(&std::fs::read_to_string(p)?)?,
            None => TorusSeries::cos_sum(alpha.d()),
        };
        SchrodingerCocycle::new(alpha, v, self.lambda, energy)
    }
}

#[derive(Args, Clone)]
struct Sweep {
    #[command(flatten)]
    model: Model,
    /// Energy grid a:b:n
    #[arg(long = "E", allow_hyphen_values = true)]
    energies: String,
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random phases averaged (Lyapunov exponent only)
    #[arg(long, default_value_t = 8)]
    samples: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Lyapunov exponent over an energy grid (CSV: E, LE)
    Lyapunov(Sweep),
    /// Fibered rotation number over an energy grid (CSV: E, rho)
    Rotation(Sweep),
    /// Integrated density of states N = 1 - 2 rho (CSV: E, N)
    Ids(Sweep),
    /// P_k(E) accumulator as JSON
    Weyl {
        #[command(flatten)]
        model: Model,
        #[arg(long = "E", allow_hyphen_values = true)]
        energy: f64,
        #[arg(long, value_delimiter = ',')]
        theta: Option<Vec<f64>>,
        #[arg(long)]
        k: usize,
    },
    /// KAM iteration ledger as JSON lines
    KamTrace {
        #[command(flatten)]
        model: Model,
        #[arg(long = "E", allow_hyphen_values = true)]
        energy: f64,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Square-root modulus scan from a JSON config (CSV rows on stdout)
    HolderScan {
        #[arg(long)]
        config: PathBuf,
        /// Where to write the JSON summary (default: stderr)
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Diophantine certificate as JSON
    Diophantine {
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long = "N")]
        n: u32,
    },
}

fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Invalid(format!("energy grid must be a:b:n, got {spec}"));
    match parts.as_slice() {
        [x] => Ok(vec![x.parse().map_err(|_| bad())?]),
        [a, b, n] => {
            let a: f64 = a.parse().map_err(|_| bad())?;
            let b: f64 = b.parse().map_err(|_| bad())?;
            let n: usize = n.parse().map_err(|_| bad())?;
            if n == 1 {
                return Ok(vec![a]);
            }
            Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
        }
        _ => Err(bad()),
    }
}

fn sweep(args: &Sweep, header: &str, value: impl Fn(&SchrodingerCocycle, &[f64]) -> f64) -> Result<()> {
    let base = args.model.cocycle(0.0)?;
    let theta = cocycle::random_phases(base.alpha.d(), 1, args.seed).remove(0);
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(["E", header])?;
    for e in parse_range(&args.energies)? {
        let sc = base.at_energy(e);
        w.write_record([f17(e), f17(value(&sc, &theta))])?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lyapunov(args) => {
            let (n, samples, seed) = (args.iters, args.samples, args.seed);
            sweep(&args, "LE", |sc, _| cocycle::lyapunov_exponent(sc, n, samples, seed))
        }
        Command::Rotation(args) => {
            let n = args.iters;
            sweep(&args, "rho", |sc, th| cocycle::rotation_number(sc, n, th).rho)
        }
        Command::Ids(args) => {
            let n = args.iters;
            sweep(&args, "N", |sc, th| cocycle::ids(sc, n, th))
        }
        Command::Weyl { model, energy, theta, k } => {
            let sc = model.cocycle(energy)?;
            let theta = theta.unwrap_or_else(|| vec![0.0; sc.alpha.d()]);
            let acc = accumulate_pk(&sc, &theta, k)?;
            println!("{}", to_json17(&acc)?);
            Ok(())
        }
        Command::KamTrace { model, energy, max_steps, floor } => {
            let sc = model.cocycle(energy)?;
            let mut cfg = KamConfig::default();
            if let Some(m) = max_steps {
                cfg.max_steps = m;
            }
            if let Some(f) = floor {
                cfg.floor = f;
            }
            let (a0, f0) = schrodinger_input(&sc);
            let mut out = std::io::stdout().lock();
            match kam_iterate(&a0, &f0, &sc.alpha, &cfg) {
                Ok(state) => {
                    for rec in &state.ledger {
                        writeln!(out, "{}", rec.trace_line()?)?;
                    }
                    Ok(())
                }
                Err(Error::KamAbort { step, reason, ledger }) => {
                    for rec in &ledger {
                        writeln!(out, "{}", rec.trace_line()?)?;
                    }
                    Err(Error::KamAbort { step, reason, ledger })
                }
                Err(e) => Err(e),
            }
        }
        Command::HolderScan { config, summary } => {
            let cfg = ScanConfig::load(&config)?;
            let report = holder_scan(&cfg)?;
            report.write_csv(std::io::stdout().lock())?;
            let json = to_json17(&report.summary)?;
            match summary {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => eprintln!("{json}"),
            }
            Ok(())
        }
        Command::Diophantine { alpha, kappa, tau, n } => {
            let alpha = FrequencyVector::new(alpha)?;
            let cert = check_diophantine(&alpha, kappa, tau, n)?;
            println!("{}", to_json17(&cert)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
