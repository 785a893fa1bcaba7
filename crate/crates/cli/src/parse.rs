//! Flag value parsers: complex numbers, grids, cutoffs and state sources.

use std::path::Path;

use ncd_core::entanglement::{sigma_state, WernerParams};
use ncd_core::state::library;
use ncd_core::{io, BosonicState, CoherentPoint, C64};

/// `re+imi`, `re-imi`, `re`, `imi`, `i`, `-i`; no spaces.
pub fn complex(s: &str) -> Result<C64, String> {
    let bad = || format!("cannot parse complex number '{s}' (expected re+imi)");
    if s.is_empty() || s.contains(char::is_whitespace) {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().filter(|v| v.is_finite()).map(|re| C64::new(re, 0.0)).ok_or_else(bad);
    };
    // split at the last sign that is not a leading sign or an exponent sign
    let bytes = body.as_bytes();
    let split =
        (1..bytes.len()).rev().find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        other => other,
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.parse().map_err(|_| bad())?;
    if !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(C64::new(re, im))
}

/// Comma-separated coherent amplitudes, one per mode.
pub fn point(s: &str) -> Result<CoherentPoint, String> {
    s.split(',').map(complex).collect::<Result<Vec<_>, _>>().map(CoherentPoint)
}

/// Parameter grid parsed from a flag.
#[derive(Debug, Clone)]
pub struct Grid(pub Vec<f64>);

/// `start:stop:step`, or a single value.
pub fn grid(s: &str) -> Result<Grid, String> {
    values(s).map(Grid)
}

fn values(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad number '{t}' in grid '{s}'"));
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, b, c] => ncd_core::entanglement::grid(num(a)?, num(b)?, num(c)?).map_err(|e| e.to_string()),
        _ => Err(format!("grid '{s}' must be start:stop:step")),
    }
}

/// Per-mode Fock cutoffs parsed from a flag.
#[derive(Debug, Clone)]
pub struct Dims(pub Vec<usize>);

pub fn dims(s: &str) -> Result<Dims, String> {
    let v = s
        .split(',')
        .map(|t| t.parse::<usize>().map_err(|_| format!("bad cutoff '{t}'")))
        .collect::<Result<Vec<_>, _>>()?;
    if v.iter().any(|&d| d < 1) {
        return Err("cutoffs must be >= 1".into());
    }
    Ok(Dims(v))
}

pub fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' must be a positive number")),
    }
}

pub fn nonnegative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' must be a non-negative number")),
    }
}

/// Where a state comes from: a `builtin:` name or an operator JSON file.
#[derive(Debug, Clone)]
pub enum Source {
    Builtin { name: String, arg: Option<String> },
    File(String),
}

pub fn source(s: &str) -> Result<Source, String> {
    let Some(rest) = s.strip_prefix("builtin:") else {
        return Ok(Source::File(s.to_string()));
    };
    let (name, arg) = match rest.split_once(':') {
        Some((n, a)) => (n, Some(a.to_string())),
        None => (rest, None),
    };
    // `fock3` is shorthand for `fock:3`
    if let Some(n) = name.strip_prefix("fock").filter(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit())) {
        return Ok(Source::Builtin { name: "fock".into(), arg: Some(n.to_string()) });
    }
    Ok(Source::Builtin { name: name.to_string(), arg })
}

/// Failure to turn a source into a state; all of these are input errors.
pub fn load(src: &Source) -> Result<BosonicState, String> {
    match src {
        Source::File(path) => {
            io::read_operator(Path::new(path)).map(BosonicState::from_fock).map_err(|e| format!("{path}: {e}"))
        }
        Source::Builtin { name, arg } => builtin(name, arg.as_deref()).map_err(|e| format!("builtin:{name}: {e}")),
    }
}

fn builtin(name: &str, arg: Option<&str>) -> Result<BosonicState, String> {
    let need = || arg.ok_or_else(|| format!("builtin '{name}' needs an argument"));
    let real = |t: &str| t.parse::<f64>().map_err(|_| format!("bad number '{t}'"));
    let no_arg = |s: BosonicState| match arg {
        Some(_) => Err(format!("builtin '{name}' takes no argument")),
        None => Ok(s),
    };
    let state = match name {
        "vacuum" => no_arg(library::vacuum())?,
        "diosi" => no_arg(library::diosi())?,
        "fock" => {
            let n: usize = need()?.parse().map_err(|_| "photon number must be a non-negative integer".to_string())?;
            library::fock(n).map_err(|e| e.to_string())?
        }
        "coherent" => library::coherent(complex(need()?)?),
        "thermal" => library::thermal(real(need()?)?).map_err(|e| e.to_string())?,
        "fock-mix" => {
            let w = need()?.split(',').map(real).collect::<Result<Vec<_>, _>>()?;
            library::fock_mix(&w).map_err(|e| e.to_string())?
        }
        // one empty level per mode keeps the scaling tail gate exact
        "werner" => {
            BosonicState::from_fock(WernerParams::with_dims(real(need()?)?, 3).map_err(|e| e.to_string())?.state())
        }
        "sigma" => {
            let t = real(need()?)?;
            if !(t > 0.0) {
                return Err("ansatz parameter must be positive".into());
            }
            sigma_state(t).map_err(|e| e.to_string())?
        }
        "operator-A" => library::operator_a(complex(need()?)?).map_err(|e| e.to_string())?,
        other => return Err(format!("unknown builtin '{other}'")),
    };
    Ok(state)
}
