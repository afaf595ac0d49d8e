mod error;
mod io;
mod study;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use circmtd::inference::{self, Criterion, FitOptions, FitResult, OrderSelection};
use circmtd::model::{signs_from_ints, DEFAULT_BURN_IN};
use circmtd::spectrum::{self, LagWindow, ResidueSpectrum};
use circmtd::{correlation, partial, Family};
use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult};
use io::{num, read_model, read_series, write_csv, write_json, Unit};

/// Simulation, correlation analysis, spectra and likelihood fitting for
/// MTD-AR(p) processes on the circle.
#[derive(Parser)]
#[command(name = "circmtd", version)]
struct Cli {
    /// Seed for simulation, optimizer starts and studies.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Unit of angles in input series files.
    #[arg(long, global = true, value_enum, default_value_t = Unit::Rad)]
    unit: Unit,
    /// Output file (directory for `study`); standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Input {
    /// Model JSON (theoretical quantities).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Series file, one angle per line (sample quantities).
    #[arg(long)]
    series: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectrumMethod {
    Residue,
    Convolution,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a series (radians) from a model JSON.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: usize,
    },
    /// Circular autocorrelation function.
    Acf {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
        /// Emit the lag covariance matrices instead.
        #[arg(long)]
        gamma: bool,
    },
    /// Circular partial autocorrelation function.
    Pacf {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
    },
    /// Spectral density (model) or circular periodogram (series).
    Spectrum {
        #[command(flatten)]
        input: Input,
        /// Number of frequencies on [-pi, pi).
        #[arg(long, default_value_t = 512)]
        grid: usize,
        /// Bartlett lag window truncation for the periodogram.
        #[arg(long)]
        bartlett: Option<usize>,
        #[arg(long, value_enum, default_value_t = SpectrumMethod::Residue)]
        method: SpectrumMethod,
        /// Also write an SVG plot here.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Maximum-likelihood fit at a fixed order, or order selection.
    Fit {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, conflicts_with = "p_max")]
        p: Option<usize>,
        #[arg(long)]
        p_max: Option<usize>,
        /// Fixed sign vector such as `1,-1` (with --p); enumerated otherwise.
        #[arg(long, requires = "p", allow_hyphen_values = true)]
        signs: Option<String>,
        #[arg(long, default_value = "wrapped_cauchy")]
        family: Family,
        #[arg(long, default_value = "bic")]
        criterion: Criterion,
    },
    /// Run a Monte Carlo study described by a JSON config.
    Study {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let out = cli.out.as_ref();
    match cli.command {
        Command::Simulate { model, n, burn_in } => {
            let m = read_model(&model)?;
            let s = m.simulate(n as usize, burn_in, cli.seed)?;
            write_csv(out, &["theta"], s.radians().iter().map(|x| vec![num(*x)]))
        }
        Command::Acf { input, max_lag, gamma } => {
            let seq = match (&input.model, &input.series) {
                (Some(m), _) => correlation::gamma_sequence(&read_model(m)?, max_lag)?,
                (_, Some(s)) => correlation::sample_gamma(&read_series(s, cli.unit)?, max_lag)?,
                _ => unreachable!("clap enforces one input"),
            };
            if gamma {
                write_csv(
                    out,
                    &["lag", "g11", "g12", "g21", "g22"],
                    seq.matrices.iter().enumerate().map(|(k, g)| {
                        vec![k.to_string(), num(g[(0, 0)]), num(g[(0, 1)]), num(g[(1, 0)]), num(g[(1, 1)])]
                    }),
                )
            } else {
                if seq.matrices[0].determinant() == 0.0 {
                    return Err(CliError::Numeric("lag-0 covariance is singular".into()));
                }
                write_csv(
                    out,
                    &["lag", "value"],
                    seq.cacf().iter().enumerate().map(|(k, v)| vec![k.to_string(), num(*v)]),
                )
            }
        }
        Command::Pacf { input, max_lag } => {
            let r = match (&input.model, &input.series) {
                (Some(m), _) => partial::cpacf(&read_model(m)?, max_lag)?,
                (_, Some(s)) => partial::sample_cpacf(&read_series(s, cli.unit)?, max_lag)?,
                _ => unreachable!("clap enforces one input"),
            };
            write_csv(
                out,
                &["lag", "value"],
                r.values.iter().enumerate().map(|(k, v)| vec![(k + 1).to_string(), num(*v)]),
            )
        }
        Command::Spectrum {
            input,
            grid,
            bartlett,
            method,
            svg,
        } => {
            if grid < 8 {
                return Err(CliError::Usage("grid needs at least 8 points".into()));
            }
            let points: Vec<(f64, f64)>;
            if let Some(m) = &input.model {
                let model = read_model(m)?;
                let omegas = spectrum::frequency_grid(grid);
                match method {
                    SpectrumMethod::Residue => {
                        let rs = ResidueSpectrum::new(&model)?;
                        let vals: Vec<_> = omegas.iter().map(|&w| (w, rs.evaluate(w))).collect();
                        write_csv(
                            out,
                            &["omega", "density", "merged_poles"],
                            vals.iter().map(|(w, v)| vec![num(*w), num(v.density), u8::from(v.merged).to_string()]),
                        )?;
                        points = vals.iter().map(|(w, v)| (*w, v.density)).collect();
                    }
                    SpectrumMethod::Convolution => {
                        let cs = spectrum::ConvolutionSpectrum::new(&model)?;
                        points = omegas
                            .iter()
                            .map(|&w| cs.density(w).map(|d| (w, d)))
                            .collect::<Result<_, _>>()?;
                        write_csv(out, &["omega", "density"], points.iter().map(|(w, d)| vec![num(*w), num(*d)]))?;
                    }
                }
            } else {
                let s = read_series(input.series.as_ref().expect("clap enforces one input"), cli.unit)?;
                let window = bartlett.map_or(LagWindow::None, LagWindow::Bartlett);
                points = spectrum::periodogram(&s, grid, window)?;
                write_csv(out, &["omega", "density"], points.iter().map(|(w, d)| vec![num(*w), num(*d)]))?;
            }
            if let Some(path) = svg {
                std::fs::write(&path, svg::line_plot(&points, "ω ∈ [−π, π)", "density"))
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
            Ok(())
        }
        Command::Fit {
            series,
            p,
            p_max,
            signs,
            family,
            criterion,
        } => {
            let s = read_series(&series, cli.unit)?;
            let opts = FitOptions {
                seed: cli.seed,
                ..FitOptions::default()
            };
            match (p, p_max) {
                (Some(p), _) => {
                    let r = match signs {
                        Some(q) => {
                            let ints = q
                                .split(',')
                                .map(|t| t.trim().parse::<i64>())
                                .collect::<Result<Vec<_>, _>>()
                                .map_err(|e| CliError::Usage(format!("bad --signs `{q}`: {e}")))?;
                            inference::fit_given_q_with(&s, p, &signs_from_ints(&ints)?, family, &opts)
                        }
                        None => inference::fit_with(&s, p, family, &opts),
                    };
                    emit_fit(out, r)
                }
                (None, Some(pm)) => {
                    let sel = inference::select_order_with(&s, pm, family, criterion, &opts)?;
                    print_table(&sel);
                    write_json(out, &sel)
                }
                (None, None) => Err(CliError::Usage("fit needs --p or --p-max".into())),
            }
        }
        Command::Study { config } => study::run(&config, out, cli.seed),
    }
}

/// Writes the fit; a non-converged best point is still written before the
/// numeric failure is reported.
fn emit_fit(out: Option<&PathBuf>, r: circmtd::Result<FitResult>) -> CliResult<()> {
    match r {
        Ok(f) => write_json(out, &f),
        Err(circmtd::Error::Optimization { best: Some(b), signs, best_loglik }) => {
            write_json(out, &b)?;
            Err(CliError::Numeric(format!(
                "optimizer did not converge for signs {signs:?} (best log-likelihood {best_loglik})"
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn print_table(sel: &OrderSelection) {
    eprintln!("{:>3}  {:<24} {:>10} {:>14} {:>12} {:>12}", "p", "q", "conc", "loglik", "AIC", "BIC");
    for f in &sel.table {
        let q: Vec<String> = f.signs.iter().map(|s| s.as_i8().to_string()).collect();
        let mark = if f.order == sel.selected { " *" } else { "" };
        eprintln!(
            "{:>3}  {:<24} {:>10.4} {:>14.4} {:>12.4} {:>12.4}{mark}",
            f.order,
            format!("({})", q.join(",")),
            f.concentration(),
            f.loglik,
            f.aic,
            f.bic
        );
    }
}
