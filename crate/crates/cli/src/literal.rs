//! Text literals for kernels, measures and max-stable models.
//!
//! Kernels:
//! - `power:C=1,delta=1.2[,a=1][,symmetric]`
//! - `series:c=0.0019,delta=1.0474`
//! - `exp:c=1,rate=1`
//! - `indicator[:width=1]`, the indicator of `[0, width)`
//! - `steps:@coeffs.csv[,first=1][,width=1]`, first column holds `a_j`
//! - `table:@kernel.csv[,tail=compact|power:q[:beta]]`, columns `x, m`
//!
//! Measures: `dirac:u` and `mix:u1:w1,u2:w2,...`.
//!
//! Models (`|t|` may also be written `t`):
//! - `eg:rho=exp(-|t|/L)`, `eg:rho=exp(-(t/L)^2)`, `eg:rho=cos(2*pi*t/P)`
//! - `br:gamma=c*log1p(|t|)`, `br:gamma=c*|t|^e` (`e = 2H`), `br:gamma=b*(1-exp(-|t|))`
//! - `theta:const=1.3`, `theta:@theta.csv[,tail=independent|plateau|power:q[:beta]]`

use std::collections::BTreeMap;
use std::path::Path;

use htm_core::maxstable::{Correlation, Dependence, ThetaTail, Variogram};
use htm_core::memory::DiscreteMeasure;
use htm_core::{Kernel, TabulatedKernel, TailModel};

use crate::CliError;

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn number(s: &str, what: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| config(format!("{what}: cannot read '{s}' as a number")))
}

/// Splits `kind:body` and lower-cases the kind.
fn head(lit: &str) -> Result<(String, &str), CliError> {
    let (kind, body) = match lit.split_once(':') {
        Some(kb) => kb,
        None if lit.trim().eq_ignore_ascii_case("indicator") => (lit, ""),
        None => return Err(config(format!("literal '{lit}' lacks a 'kind:' prefix"))),
    };
    Ok((kind.trim().to_ascii_lowercase(), body.trim()))
}

/// `key=value` pairs plus bare flags.
struct Options<'a> {
    values: BTreeMap<String, &'a str>,
    flags: Vec<String>,
    file: Option<&'a str>,
}

impl<'a> Options<'a> {
    fn parse(body: &'a str) -> Self {
        let mut values = BTreeMap::new();
        let mut flags = Vec::new();
        let mut file = None;
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some(path) = part.strip_prefix('@') {
                file = Some(path);
            } else if let Some((k, v)) = part.split_once('=') {
                values.insert(k.trim().to_string(), v.trim());
            } else {
                flags.push(part.to_ascii_lowercase());
            }
        }
        Self { values, flags, file }
    }

    fn get(&self, keys: &[&str]) -> Option<&'a str> {
        keys.iter().find_map(|k| self.values.get(*k).copied())
    }

    fn num(&self, keys: &[&str], what: &str) -> Result<f64, CliError> {
        let v = self
            .get(keys)
            .ok_or_else(|| config(format!("{what}: missing '{}='", keys[0])))?;
        number(v, what)
    }

    fn num_or(&self, keys: &[&str], default: f64, what: &str) -> Result<f64, CliError> {
        match self.get(keys) {
            Some(v) => number(v, what),
            None => Ok(default),
        }
    }

    fn file(&self, what: &str) -> Result<&'a str, CliError> {
        self.file
            .ok_or_else(|| config(format!("{what}: expected a file reference '@path'")))
    }
}

/// Numeric columns of a headed CSV file.
fn read_columns(path: &str, n: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::Reader::from_path(Path::new(path))
        .map_err(|e| CliError::Data(format!("{path}: {e}")))?;
    let mut cols = vec![Vec::new(); n];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{path}: {e}")))?;
        if rec.len() < n {
            return Err(CliError::Data(format!("{path}: row {} has fewer than {n} columns", i + 1)));
        }
        for (j, col) in cols.iter_mut().enumerate() {
            let v = rec[j].trim().parse::<f64>().map_err(|_| {
                CliError::Data(format!("{path}: row {} column {} is not a number: '{}'", i + 1, j + 1, &rec[j]))
            })?;
            col.push(v);
        }
    }
    Ok(cols)
}

fn tail_model(s: Option<&str>) -> Result<TailModel, CliError> {
    match s.map(|v| v.to_ascii_lowercase()) {
        None => Ok(TailModel::Compact),
        Some(v) if v == "compact" => Ok(TailModel::Compact),
        Some(v) => {
            let parts: Vec<&str> = v.split(':').collect();
            if parts[0] != "power" || parts.len() < 2 || parts.len() > 3 {
                return Err(config(format!("tail '{v}': expected compact or power:q[:beta]")));
            }
            Ok(TailModel::Power {
                exponent: number(parts[1], "tail exponent")?,
                log_exponent: parts.get(2).map(|p| number(p, "tail log exponent")).transpose()?.unwrap_or(0.0),
            })
        }
    }
}

pub fn parse_kernel(lit: &str) -> Result<Kernel, CliError> {
    let (kind, body) = head(lit)?;
    let o = Options::parse(body);
    let k = match kind.as_str() {
        "power" => Kernel::power_law(
            o.num(&["C", "c"], "power kernel")?,
            o.num(&["delta"], "power kernel")?,
            o.num_or(&["a", "cutoff"], 1.0, "power kernel")?,
            o.flags.iter().any(|f| f == "symmetric" || f == "sym"),
        ),
        "series" => Kernel::causal_series(o.num(&["c", "C"], "series kernel")?, o.num(&["delta"], "series kernel")?),
        "exp" => Kernel::exponential(o.num_or(&["c", "C"], 1.0, "exp kernel")?, o.num_or(&["rate"], 1.0, "exp kernel")?),
        "indicator" => Kernel::steps(vec![1.0], 1, o.num_or(&["width"], 1.0, "indicator kernel")?),
        "steps" => {
            let coeffs = read_columns(o.file("steps kernel")?, 1)?.remove(0);
            let first = o.num_or(&["first"], 1.0, "steps kernel")?;
            if first.fract() != 0.0 {
                return Err(config("steps kernel: 'first' must be an integer"));
            }
            Kernel::steps(coeffs, first as i64, o.num_or(&["width"], 1.0, "steps kernel")?)
        }
        "table" => {
            let mut cols = read_columns(o.file("table kernel")?, 2)?;
            let m = cols.remove(1);
            let x = cols.remove(0);
            TabulatedKernel::new(x, m, tail_model(o.get(&["tail"]))?).map(Kernel::Tabulated)
        }
        other => return Err(config(format!("unknown kernel kind '{other}'"))),
    };
    k.map_err(|e| config(format!("kernel '{lit}': {e}")))
}

pub fn parse_measure(lit: &str) -> Result<DiscreteMeasure, CliError> {
    let (kind, body) = head(lit)?;
    match kind.as_str() {
        "dirac" => Ok(DiscreteMeasure::dirac(number(body, "dirac level")?)),
        "mix" => {
            let atoms = body
                .split(',')
                .map(|p| {
                    let (u, w) = p
                        .split_once(':')
                        .ok_or_else(|| config(format!("mixture atom '{p}': expected u:w")))?;
                    Ok((number(u, "mixture level")?, number(w, "mixture weight")?))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            DiscreteMeasure::new(atoms).map_err(|e| config(e.to_string()))
        }
        other => Err(config(format!("unknown measure kind '{other}'"))),
    }
}

/// Strips `prefix`, a number, then `suffix` from `s`.
fn between(s: &str, prefix: &str, suffix: &str) -> Option<f64> {
    s.strip_prefix(prefix)?.strip_suffix(suffix)?.parse().ok()
}

pub fn parse_model(lit: &str) -> Result<Dependence, CliError> {
    let (kind, body) = head(lit)?;
    let compact: String = body.chars().filter(|c| !c.is_whitespace()).collect();
    let expr = compact.replace("|t|", "t");
    let bad = || config(format!("model '{lit}' is not one of the supported forms"));
    match kind.as_str() {
        "eg" => {
            let rhs = expr.strip_prefix("rho=").ok_or_else(bad)?;
            let correlation = if let Some(l) = between(rhs, "exp(-t/", ")") {
                Correlation::Exponential { scale: l }
            } else if let Some(l) = between(rhs, "exp(-(t/", ")^2)") {
                Correlation::Gaussian { scale: l }
            } else if let Some(p) = between(rhs, "cos(2*pi*t/", ")") {
                Correlation::Cosine { period: p }
            } else {
                return Err(bad());
            };
            Ok(Dependence::ExtremalGaussian { correlation })
        }
        "br" => {
            let rhs = expr.strip_prefix("gamma=").ok_or_else(bad)?;
            let (coef, shape) = rhs.split_once('*').ok_or_else(bad)?;
            let coef = number(coef, "variogram coefficient")?;
            let variogram = if shape == "log1p(t)" {
                Variogram::Logarithmic { c: coef }
            } else if let Some(e) = shape.strip_prefix("t^") {
                let e = number(e.trim_start_matches('(').trim_end_matches(')'), "variogram exponent")?;
                Variogram::Fractional { c: coef, hurst: e / 2.0 }
            } else if shape == "(1-exp(-t))" {
                Variogram::Bounded { b: coef }
            } else {
                return Err(bad());
            };
            Ok(Dependence::BrownResnick { variogram })
        }
        "theta" => {
            let o = Options::parse(body);
            if let Some(v) = o.get(&["const"]) {
                return Ok(Dependence::ConstantTheta {
                    theta: number(v, "constant theta")?,
                });
            }
            let mut cols = read_columns(o.file("tabulated theta")?, 2)?;
            let theta = cols.remove(1);
            let lags = cols.remove(0);
            let tail = match o.get(&["tail"]).map(|t| t.to_ascii_lowercase()) {
                None => ThetaTail::Independent,
                Some(t) if t == "independent" => ThetaTail::Independent,
                Some(t) if t == "plateau" => ThetaTail::Plateau,
                Some(t) => match tail_model(Some(&t))? {
                    TailModel::Power {
                        exponent,
                        log_exponent,
                    } => ThetaTail::Power {
                        exponent,
                        log_exponent,
                    },
                    TailModel::Compact => ThetaTail::Independent,
                },
            };
            Ok(Dependence::TabulatedTheta { lags, theta, tail })
        }
        other => Err(config(format!("unknown model kind '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels() {
        assert_eq!(
            parse_kernel("power:C=1,delta=1.0,a=1").unwrap(),
            Kernel::power_law(1.0, 1.0, 1.0, false).unwrap()
        );
        assert_eq!(
            parse_kernel("series:c=0.0019,delta=1.0474").unwrap(),
            Kernel::causal_series(0.0019, 1.0474).unwrap()
        );
        assert!(matches!(parse_kernel("exp:rate=2").unwrap(), Kernel::Exponential { rate, .. } if rate == 2.0));
        assert!(matches!(parse_kernel("power:delta=1"), Err(CliError::Config(_))));
        assert_eq!(parse_kernel("indicator").unwrap(), Kernel::indicator_unit());
        assert!(matches!(parse_kernel("wave:x=1"), Err(CliError::Config(_))));
    }

    #[test]
    fn measures() {
        assert_eq!(parse_measure("dirac:0.5").unwrap(), DiscreteMeasure::dirac(0.5));
        assert_eq!(parse_measure("mix:0:0.5,1:0.5").unwrap().atoms(), &[(0.0, 0.5), (1.0, 0.5)]);
        assert!(parse_measure("mix:0").is_err());
    }

    #[test]
    fn models() {
        assert_eq!(
            parse_model("br:gamma=12*log1p(|t|)").unwrap(),
            Dependence::BrownResnick {
                variogram: Variogram::Logarithmic { c: 12.0 }
            }
        );
        assert_eq!(
            parse_model("br:gamma=0.5*|t|^(1.4)").unwrap(),
            Dependence::BrownResnick {
                variogram: Variogram::Fractional { c: 0.5, hurst: 0.7 }
            }
        );
        assert_eq!(
            parse_model("br:gamma=3*(1-exp(-|t|))").unwrap(),
            Dependence::BrownResnick {
                variogram: Variogram::Bounded { b: 3.0 }
            }
        );
        assert_eq!(
            parse_model("eg:rho=exp(-|t|/2)").unwrap(),
            Dependence::ExtremalGaussian {
                correlation: Correlation::Exponential { scale: 2.0 }
            }
        );
        assert_eq!(parse_model("theta:const=1.5").unwrap(), Dependence::ConstantTheta { theta: 1.5 });
        assert!(parse_model("br:gamma=t^2").is_err());
    }
}
