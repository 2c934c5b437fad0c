//! Compact command-line forms of the JSON specs, e.g. `small_world:0.1,0.25`
//! or `von_mises:2,3.14`. Anything starting with `{` is parsed as JSON.

use gkm_core::graphon::GraphonSpec;
use gkm_core::measure::InitialDensity;

use crate::config::CouplingSpec;

fn split(s: &str) -> Result<(&str, Vec<f64>), String> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let args = rest
        .split(',')
        .filter(|a| !a.trim().is_empty())
        .map(|a| a.trim().parse::<f64>().map_err(|e| format!("'{a}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((kind.trim(), args))
}

fn arity(kind: &str, args: &[f64], want: &[usize]) -> Result<(), String> {
    if want.contains(&args.len()) {
        Ok(())
    } else {
        Err(format!("'{kind}' takes {want:?} arguments, got {}", args.len()))
    }
}

fn json<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

pub fn parse_graphon(s: &str) -> Result<GraphonSpec, String> {
    if s.trim_start().starts_with('{') {
        return json(s);
    }
    let (kind, a) = split(s)?;
    match kind {
        "constant" | "er" => {
            arity(kind, &a, &[1])?;
            Ok(GraphonSpec::Constant { p: a[0] })
        }
        "small_world" | "sw" => {
            arity(kind, &a, &[2])?;
            Ok(GraphonSpec::SmallWorld { p: a[0], h: a[1] })
        }
        "nearest_neighbor" | "nn" => {
            arity(kind, &a, &[1])?;
            Ok(GraphonSpec::NearestNeighbor { h: a[0] })
        }
        _ => Err(format!("unknown graphon '{kind}'")),
    }
}

pub fn parse_initial(s: &str) -> Result<InitialDensity, String> {
    if s.trim_start().starts_with('{') {
        return json(s);
    }
    let (kind, a) = split(s)?;
    match kind {
        "uniform" => {
            arity(kind, &a, &[0])?;
            Ok(InitialDensity::Uniform)
        }
        "von_mises" => {
            arity(kind, &a, &[2])?;
            Ok(InitialDensity::VonMises { kappa: a[0], mean: a[1] })
        }
        "two_cluster" => {
            arity(kind, &a, &[3, 4])?;
            Ok(InitialDensity::TwoCluster {
                theta1: a[0],
                theta2: a[1],
                weight: a[2],
                kappa: a.get(3).copied().unwrap_or(10.0),
            })
        }
        "twisted_von_mises" => {
            arity(kind, &a, &[3])?;
            Ok(InitialDensity::TwistedVonMises { kappa: a[0], mean: a[1], twist: a[2] })
        }
        _ => Err(format!("unknown initial density '{kind}'")),
    }
}

pub fn parse_coupling(s: &str) -> Result<CouplingSpec, String> {
    if s.trim_start().starts_with('{') {
        return json(s);
    }
    let (kind, a) = split(s)?;
    match kind {
        "sine" => {
            arity(kind, &a, &[0])?;
            Ok(CouplingSpec::Sine)
        }
        "sine_shift" => {
            arity(kind, &a, &[1])?;
            Ok(CouplingSpec::SineShift { alpha: a[0] })
        }
        _ => Err(format!("unknown coupling '{kind}'")),
    }
}
