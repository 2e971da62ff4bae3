//! Inline density specifications.
//!
//! ```text
//! atoms:a=0,0,0:w=0.5;b=2,0,0:w=0.5     named or bare points, optional weights
//! ball:center=0,0:radius=0.8
//! gaussian:center=0,0:sigma=0.3
//! file:measure.txt                       a measure file
//! ```

use std::path::PathBuf;

use mmot_core::Density;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    Preset(Density),
    File(PathBuf),
}

impl DensitySpec {
    pub fn is_atomic(&self) -> bool {
        matches!(self, DensitySpec::Preset(d) if d.is_atomic())
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(format!("density: {}", msg.into()))
}

fn parse_vector(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("bad coordinate `{t}`")))
        })
        .collect()
}

fn parse_scalar(text: &str, what: &str) -> Result<f64, CliError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(format!("bad {what} `{text}`")))
}

/// `key=value` fields separated by `:`.
fn fields(body: &str) -> Result<Vec<(&str, &str)>, CliError> {
    body.split(':')
        .map(|f| f.split_once('=').ok_or_else(|| bad(format!("expected key=value, found `{f}`"))))
        .collect()
}

fn preset(body: &str, kind: &str, scale_key: &str) -> Result<(Vec<f64>, f64), CliError> {
    let mut center = None;
    let mut scale = None;
    for (k, v) in fields(body)? {
        match k {
            "center" => center = Some(parse_vector(v)?),
            k if k == scale_key => scale = Some(parse_scalar(v, scale_key)?),
            other => return Err(bad(format!("unknown {kind} field `{other}`"))),
        }
    }
    let center = center.ok_or_else(|| bad(format!("{kind} needs center=")))?;
    let scale = scale.ok_or_else(|| bad(format!("{kind} needs {scale_key}=")))?;
    if !(scale > 0.0) {
        return Err(bad(format!("{scale_key} must be positive")));
    }
    Ok((center, scale))
}

fn atoms(body: &str) -> Result<Density, CliError> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for item in body.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let mut parts = item.split(':');
        let head = parts.next().unwrap_or_default();
        let coords = head.split_once('=').map_or(head, |(_, c)| c);
        points.push(parse_vector(coords)?);
        let mut w = 1.0;
        for part in parts {
            match part.split_once('=') {
                Some(("w", v)) => w = parse_scalar(v, "weight")?,
                _ => return Err(bad(format!("unknown atom field `{part}`"))),
            }
        }
        if !(w > 0.0) {
            return Err(bad(format!("atom weight {w} must be positive")));
        }
        weights.push(w);
    }
    if points.is_empty() {
        return Err(bad("no atoms given"));
    }
    if points.iter().any(|p| p.len() != points[0].len()) {
        return Err(bad("atoms have different dimensions"));
    }
    Ok(Density::Atomic { points, weights })
}

pub fn parse_density(spec: &str) -> Result<DensitySpec, CliError> {
    let (kind, body) = spec
        .split_once(':')
        .ok_or_else(|| bad(format!("expected <kind>:<fields>, found `{spec}`")))?;
    let density = match kind {
        "atoms" => atoms(body)?,
        "ball" => {
            let (center, radius) = preset(body, "ball", "radius")?;
            Density::UniformBall { center, radius }
        }
        "gaussian" => {
            let (center, sigma) = preset(body, "gaussian", "sigma")?;
            Density::TruncatedGaussian { center, sigma }
        }
        "file" => return Ok(DensitySpec::File(PathBuf::from(body))),
        other => return Err(bad(format!("unknown kind `{other}`"))),
    };
    if density.dim() == 0 || density.dim() > 3 {
        return Err(bad(format!("dimension {} is not 1, 2 or 3", density.dim())));
    }
    Ok(DensitySpec::Preset(density))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_spec() {
        let d = parse_density("atoms:a=0,0,0:w=0.5;b=2,0,0:w=0.5").unwrap();
        assert_eq!(
            d,
            DensitySpec::Preset(Density::Atomic {
                points: vec![vec![0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]],
                weights: vec![0.5, 0.5],
            })
        );
        assert!(d.is_atomic());
        let bare = parse_density("atoms:0.1;0.7").unwrap();
        assert!(matches!(bare, DensitySpec::Preset(Density::Atomic { ref weights, .. }) if weights == &[1.0, 1.0]));
    }

    #[test]
    fn smooth_and_file_specs() {
        assert_eq!(
            parse_density("ball:center=0,0:radius=0.8").unwrap(),
            DensitySpec::Preset(Density::UniformBall {
                center: vec![0.0, 0.0],
                radius: 0.8
            })
        );
        assert!(matches!(
            parse_density("gaussian:sigma=0.3:center=1").unwrap(),
            DensitySpec::Preset(Density::TruncatedGaussian { .. })
        ));
        assert_eq!(parse_density("file:m.txt").unwrap(), DensitySpec::File("m.txt".into()));
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "ball",
            "ball:center=0",
            "ball:center=0:radius=-1",
            "cube:center=0:radius=1",
            "atoms:",
            "atoms:0,0;1",
            "atoms:0:w=0",
            "atoms:0:q=1",
            "atoms:0,0,0,0",
            "gaussian:center=x:sigma=1",
        ] {
            assert!(parse_density(bad).is_err(), "{bad}");
        }
    }
}
