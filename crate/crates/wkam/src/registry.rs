//! Built-in model registry, addressable by name from CLI configs.
//!
//! Recognized specs:
//!   quadratic                 H = p^2/2                     (1D)
//!   quadratic2d               H = |p|^2/2                   (2D)
//!   pendulum(a)               H = p^2/2 + a cos(2 pi x)
//!   pendulum(a,k)             H = p^2/2 + a cos(2 pi k x)
//!   quartic-p                 H = p^4/4 + p^2/2             (1D, momentum-only)
//!   quartic-p2d               H = sum_a p_a^4/4 + p_a^2/2   (2D, momentum-only)
//!   pendulum2d(a,b)           H = |p|^2/2 + a cos(2 pi x1) + b cos(2 pi x2)
//!   composed(inner, phi)      G = phi o inner, phi one of:
//!                               identity | affine:a,b (a h + b) | quad:s (h + (h+s)^2/2)

use crate::error::{Error, Result};
use crate::model::{self, HamiltonianModel};

/// Representative parameterizations of every registry family; used by the
/// cross-algorithm critical-value checks.
pub fn builtin_examples() -> Vec<&'static str> {
    vec![
        "quadratic",
        "quadratic2d",
        "pendulum(1)",
        "pendulum(0.5,2)",
        "quartic-p",
        "quartic-p2d",
        "pendulum2d(0.5,0.7)",
        "composed(pendulum(1), affine:2,1)",
        "composed(pendulum(1), quad:2)",
    ]
}

/// Build a model from its registry spec.
pub fn builtin(spec: &str) -> Result<HamiltonianModel> {
    let spec = spec.trim();
    if spec == "quadratic" {
        return model::make_momentum_only(1, |p: &[f64]| p[0] * p[0] / 2.0, "quadratic");
    }
    if spec == "quadratic2d" {
        return model::make_momentum_only(
            2,
            |p: &[f64]| p.iter().map(|v| v * v).sum::<f64>() / 2.0,
            "quadratic2d",
        );
    }
    if spec == "quartic-p" {
        return model::make_momentum_only(
            1,
            |p: &[f64]| p[0].powi(4) / 4.0 + p[0] * p[0] / 2.0,
            "quartic-p",
        );
    }
    if spec == "quartic-p2d" {
        return model::make_momentum_only(
            2,
            |p: &[f64]| p.iter().map(|v| v.powi(4) / 4.0 + v * v / 2.0).sum::<f64>(),
            "quartic-p2d",
        );
    }
    if let Some(args) = strip_call(spec, "pendulum") {
        let parts = split_args(args)?;
        let (a, k) = match parts.as_slice() {
            [a] => (parse_f64(a)?, 1.0),
            [a, k] => (parse_f64(a)?, parse_f64(k)?),
            _ => return Err(Error::InvalidInput(format!("bad pendulum spec '{spec}'"))),
        };
        if k <= 0.0 || k.fract() != 0.0 {
            return Err(Error::InvalidInput("pendulum frequency must be a positive integer".into()));
        }
        let omega = std::f64::consts::TAU * k;
        return model::make_mechanical(
            1,
            move |x: &[f64]| a * (omega * x[0]).cos(),
            1.0,
            canon_label("pendulum", &[a, k], k != 1.0),
        );
    }
    if let Some(args) = strip_call(spec, "pendulum2d") {
        let parts = split_args(args)?;
        let [a, b] = match parts.as_slice() {
            [a, b] => [parse_f64(a)?, parse_f64(b)?],
            _ => return Err(Error::InvalidInput(format!("bad pendulum2d spec '{spec}'"))),
        };
        let tau = std::f64::consts::TAU;
        return model::make_mechanical(
            2,
            move |x: &[f64]| a * (tau * x[0]).cos() + b * (tau * x[1]).cos(),
            1.0,
            format!("pendulum2d({a},{b})"),
        );
    }
    if let Some(args) = strip_call(spec, "composed") {
        let (inner_spec, phi_spec) = split_composed(args)?;
        let inner = builtin(inner_spec)?;
        let label = format!("composed({}, {})", inner.label(), phi_spec);
        return match parse_phi(phi_spec)? {
            Phi::Identity => model::compose_convex(&inner, |h| h, label),
            Phi::Affine(a, b) => model::compose_convex(&inner, move |h| a * h + b, label),
            Phi::Quad(s) => {
                model::compose_convex(&inner, move |h| h + (h + s) * (h + s) / 2.0, label)
            }
        };
    }
    Err(Error::InvalidInput(format!("unknown model spec '{spec}'")))
}

enum Phi {
    Identity,
    Affine(f64, f64),
    Quad(f64),
}

fn parse_phi(spec: &str) -> Result<Phi> {
    let spec = spec.trim();
    if spec == "identity" {
        return Ok(Phi::Identity);
    }
    if let Some(rest) = spec.strip_prefix("affine:") {
        let parts = split_args(rest)?;
        if let [a, b] = parts.as_slice() {
            return Ok(Phi::Affine(parse_f64(a)?, parse_f64(b)?));
        }
    }
    if let Some(rest) = spec.strip_prefix("quad:") {
        let parts = split_args(rest)?;
        if let [s] = parts.as_slice() {
            return Ok(Phi::Quad(parse_f64(s)?));
        }
    }
    Err(Error::InvalidInput(format!("unknown phi spec '{spec}'")))
}

fn strip_call<'a>(spec: &'a str, name: &str) -> Option<&'a str> {
    spec.strip_prefix(name)
        .and_then(|rest| rest.trim_start().strip_prefix('('))
        .and_then(|rest| rest.strip_suffix(')'))
}

/// Split "composed(inner(...), phi)" arguments at the top-level comma.
fn split_composed(args: &str) -> Result<(&str, &str)> {
    let mut depth = 0usize;
    for (i, ch) in args.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => return Ok((args[..i].trim(), args[i + 1..].trim())),
            _ => {}
        }
    }
    Err(Error::InvalidInput(format!("bad composed spec '{args}'")))
}

fn split_args(args: &str) -> Result<Vec<&str>> {
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidInput(format!("empty argument in '{args}'")));
    }
    Ok(parts)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("bad number '{s}'")))
}

fn canon_label(name: &str, params: &[f64], with_second: bool) -> String {
    if with_second {
        format!("{name}({},{})", params[0], params[1])
    } else {
        format!("{name}({})", params[0])
    }
}
