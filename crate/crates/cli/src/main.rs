// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod parse;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ncd_core::depth::{self, MinSearchConfig};
use ncd_core::entanglement::{self, NcdeConfig};
use ncd_core::scaling::{self, DetectConfig, WitnessSpec, INFLATION_LIMIT};
use ncd_core::{io, BosonicState, CoherentPoint, Error, FockOperator, Regularize};
use serde_json::json;

use parse::Source;

#[derive(Parser)]
#[command(
    name = "ncd",
    version,
    about = "Non-classicality depth, scaling maps and entanglement depth for bosonic states"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Global {
    /// Fock cutoffs, one per mode or one for all (e.g. 24 or 12,12)
    #[arg(long, global = true, value_parser = parse::dims)]
    dims: Option<parse::Dims>,
    /// Bisection tolerance on tau
    #[arg(long, global = true, value_parser = parse::positive)]
    tol: Option<f64>,
    /// Positivity tolerance on the normalised distribution minimum
    #[arg(long, global = true, value_parser = parse::nonnegative)]
    abs_tol: Option<f64>,
    /// Upper end of the depth search
    #[arg(long, global = true, value_parser = parse::positive)]
    tau_max: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the result here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the regularised distribution's coefficients here
    #[arg(long, global = true)]
    dump_poly: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Non-classicality depth
    Depth(StateArg),
    /// Apply the scaling map and write the mapped operator
    Scale {
        #[command(flatten)]
        state: StateArg,
        #[arg(short, value_parser = parse::positive)]
        a: f64,
    },
    /// Search for a scaling parameter and coherent point exposing non-classicality
    Detect {
        #[command(flatten)]
        state: StateArg,
        /// Evaluate this scaling parameter only
        #[arg(short, value_parser = parse::positive)]
        a: Option<f64>,
    },
    /// Materialise the witness operator for (a, beta)
    Witness {
        #[arg(short, value_parser = parse::positive)]
        a: f64,
        /// Coherent amplitude per mode, comma separated
        #[arg(long, value_parser = parse::point, allow_hyphen_values = true)]
        beta: CoherentPoint,
        /// Also evaluate the witness on this state
        #[arg(long, value_parser = parse::source)]
        state: Option<Source>,
    },
    /// Entanglement depth of a two-mode state
    Ncde {
        #[command(flatten)]
        state: StateArg,
        /// Werner weight for the closed-form comparison (inferred for builtin:werner)
        #[arg(long, value_parser = parse::nonnegative)]
        p: Option<f64>,
        #[arg(long, value_parser = parse::grid)]
        tau_sigma: Option<parse::Grid>,
    },
    /// Entanglement depth over a grid of Werner weights, as CSV
    NcdeSweep {
        #[arg(long, value_parser = parse::grid, default_value = "0:1:0.05")]
        p: parse::Grid,
        #[arg(long, value_parser = parse::grid, default_value = "0.5:1:0.05")]
        tau_sigma: parse::Grid,
    },
    /// Partial-transpose negativity of a two-mode state
    Negativity(StateArg),
    /// Husimi function at a coherent point
    Qfunc {
        #[command(flatten)]
        state: StateArg,
        #[arg(long, value_parser = parse::point, allow_hyphen_values = true)]
        z: CoherentPoint,
    },
}

#[derive(Args)]
struct StateArg {
    /// `builtin:<name>[:<arg>]` or an operator JSON file
    #[arg(long, value_parser = parse::source)]
    state: Source,
}

/// Exit code 2 for bad input, 3 for numerical failure.
enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Json(_)
            | Error::Format(_)
            | Error::Io(_)
            | Error::InvalidParameter(_)
            | Error::DimensionMismatch(_)
            | Error::ModeMismatch { .. }
            | Error::NotHermitian(_)
            | Error::NotUnitTrace(_) => Failure::Input(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("ncd: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("ncd: {msg}");
            ExitCode::from(3)
        }
    }
}

impl Global {
    fn search(&self) -> Outcome<MinSearchConfig> {
        let mut cfg = MinSearchConfig::default();
        if let Some(t) = self.tol {
            cfg.bisection_tol = t;
        }
        if let Some(t) = self.abs_tol {
            cfg.abs_tol = t;
        }
        if let Some(t) = self.tau_max {
            cfg.tau_max = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn dims_for(&self, modes: usize) -> Outcome<Option<Vec<usize>>> {
        match self.dims.as_ref().map(|d| &d.0) {
            None => Ok(None),
            Some(d) if d.len() == modes => Ok(Some(d.clone())),
            Some(d) if d.len() == 1 => Ok(Some(vec![d[0]; modes])),
            Some(d) => Err(Failure::Input(format!("{} cutoffs given for a {modes}-mode state", d.len()))),
        }
    }

    fn emit(&self, text: &str) -> Outcome<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
            None => {
                println!("{}", text.trim_end());
                Ok(())
            }
        }
    }

    fn dump(&self, state: &dyn Regularize, tau: f64) -> Outcome<()> {
        let Some(path) = &self.dump_poly else { return Ok(()) };
        let text = state.regularize(tau)?.dump();
        std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
    }

    /// The state with `--dims` applied: Fock parts are padded, analytic parts
    /// are materialised under the tail gate.
    fn state(&self, arg: &StateArg) -> Outcome<BosonicState> {
        let state = parse::load(&arg.state).map_err(Failure::Input)?;
        Ok(match self.dims_for(state.modes())? {
            None => state,
            Some(d) => BosonicState::from_fock(self.fock(&state, Some(&d))?),
        })
    }

    fn fock(&self, state: &BosonicState, dims: Option<&[usize]>) -> Outcome<FockOperator> {
        Ok(match (state.fock_part(), dims) {
            (Some(op), None) if state.is_pure_fock() => op.clone(),
            (Some(op), Some(d)) if state.is_pure_fock() => op.embed(d)?,
            (_, None) => state.to_fock_auto()?.operator,
            (_, Some(d)) => state.to_fock(d)?.operator,
        })
    }
}

fn json_text(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("plain data serialises")
}

fn run(cli: &Cli) -> Outcome<()> {
    let g = &cli.global;
    let search = g.search()?;
    match &cli.verb {
        Verb::Depth(arg) => {
            let state = g.state(arg)?;
            let result = depth::depth(&state, &search)?;
            let hi = result.bracket.1;
            g.dump(&state, if hi.is_finite() { hi } else { search.tau_max })?;
            g.emit(&json_text(&result))
        }
        Verb::Scale { state, a } => {
            let state = g.state(state)?;
            let rho = g.fock(&state, None)?;
            let inflation = scaling::tail_inflation(&rho, *a)?;
            if inflation > INFLATION_LIMIT {
                return Err(Failure::Numerical(format!(
                    "scaling by a = {a} amplifies the truncation edge by {inflation:e}; raise --dims"
                )));
            }
            let mapped = scaling::lambda_map(&rho, *a)?;
            g.dump(&mapped, 1.0)?;
            g.emit(&io::operator_to_json(&mapped))
        }
        Verb::Detect { state, a } => {
            let state = g.state(state)?;
            let report = match a {
                Some(a) => scaling::detect_at(&state, *a, &search)?,
                None => scaling::detect(&state, &DetectConfig { search, ..DetectConfig::default() })?,
            };
            if !report.reliable {
                eprintln!("ncd: warning: tail inflation {:e} exceeds {INFLATION_LIMIT:e}", report.tail_inflation);
            }
            g.emit(&json_text(&report))
        }
        Verb::Witness { a, beta, state } => {
            let state = state.as_ref().map(|s| g.state(&StateArg { state: s.clone() })).transpose()?;
            let spec = match (g.dims_for(beta.modes())?, &state) {
                (Some(d), _) => WitnessSpec::new(*a, beta.clone(), d)?,
                (None, Some(s)) => WitnessSpec::for_state(s, *a, beta.clone())?,
                (None, None) => WitnessSpec::new(*a, beta.clone(), vec![14; beta.modes()])?,
            };
            let w = scaling::witness(&spec)?;
            let value = state.as_ref().map(|s| scaling::witness_expectation(s, &spec)).transpose()?;
            match &g.out {
                // operator to the file, evaluation summary to stdout
                Some(_) => {
                    g.emit(&io::operator_to_json(&w))?;
                    println!("{}", json_text(&json!({ "dims": spec.dims, "expectation": value })));
                    Ok(())
                }
                None => {
                    if let Some(v) = value {
                        eprintln!("ncd: Tr[rho W] = {v}");
                    }
                    g.emit(&io::operator_to_json(&w))
                }
            }
        }
        Verb::Ncde { state, p, tau_sigma } => {
            let loaded = g.state(state)?;
            let rho = g.fock(&loaded, None)?;
            let p = p.or(match &state.state {
                Source::Builtin { name, arg: Some(v) } if name == "werner" => v.parse().ok(),
                _ => None,
            });
            let mut cfg = NcdeConfig { search, ..NcdeConfig::default() };
            if let Some(grid) = tau_sigma {
                cfg.tau_sigma_grid = grid.0.clone();
            }
            let result = entanglement::ncde(&rho, p, &cfg)?;
            g.emit(&json_text(&result))
        }
        Verb::NcdeSweep { p, tau_sigma } => {
            let (p, tau_sigma) = (&p.0, &tau_sigma.0);
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) || tau_sigma.iter().any(|t| *t <= 0.0) {
                return Err(Failure::Input("p must lie in [0, 1] and tau-sigma must be positive".into()));
            }
            let cfg = NcdeConfig { search, tau_sigma_grid: tau_sigma.clone(), ..NcdeConfig::default() };
            let rows = entanglement::ncde_sweep(p, &cfg)?;
            let mut buf = Vec::new();
            entanglement::write_csv(&rows, &mut buf)?;
            g.emit(&String::from_utf8(buf).expect("ascii csv"))
        }
        Verb::Negativity(arg) => {
            let state = g.state(arg)?;
            let rho = g.fock(&state, None)?;
            let result = json!({
                "negativity": entanglement::negativity(&rho)?,
                "min_pt_eigenvalue": entanglement::min_pt_eigenvalue(&rho)?,
            });
            g.emit(&json_text(&result))
        }
        Verb::Qfunc { state, z } => {
            let state = g.state(state)?;
            let q = state.coherent_expectation(z)? / PI.powi(state.modes() as i32);
            g.dump(&state, 1.0)?;
            g.emit(&json_text(&json!({ "z": z.to_re_im(), "q": q })))
        }
    }
}
