//! Parsers for compound flag values.

use palmpat::{Point, Window};

use crate::error::{usage, Result};

const RANGE_TOLERANCE: f64 = 1e-9;

fn decimals(text: &str) -> usize {
    let mantissa = text.split(['e', 'E']).next().unwrap_or(text);
    mantissa.split_once('.').map_or(0, |(_, frac)| frac.len())
}

fn number(text: &str, flag: &str) -> Result<f64> {
    match text.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => usage(format!("{flag}: '{text}' is not a finite number")),
    }
}

/// Candidate list from `start:stop:step` (both ends inclusive within 1e-9),
/// a comma-separated list, or a single value. Range members are rounded to
/// the decimal places written in the flag so `0.3:0.7:0.05` yields 0.45,
/// not 0.45000000000000007.
pub fn parse_candidates(text: &str, flag: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, s) = (
                number(start, flag)?,
                number(stop, flag)?,
                number(step, flag)?,
            );
            if s <= 0.0 {
                return usage(format!("{flag}: step must be positive"));
            }
            if b < a {
                return usage(format!("{flag}: range end {b} is below its start {a}"));
            }
            let places = decimals(start).max(decimals(step)).max(decimals(stop));
            let count = ((b - a) / s + RANGE_TOLERANCE).floor() as usize + 1;
            Ok((0..count)
                .map(|i| {
                    let v = a + s * i as f64;
                    format!("{v:.places$}").parse().unwrap_or(v)
                })
                .collect())
        }
        [_] => text.split(',').map(|t| number(t, flag)).collect(),
        _ => usage(format!("{flag}: expected start:stop:step or a comma list")),
    }
}

/// `x_min,y_min,x_max,y_max`.
pub fn parse_window(text: &str) -> Result<Window> {
    let v: Vec<f64> = text
        .split(',')
        .map(|t| number(t, "--window"))
        .collect::<Result<_>>()?;
    let [x0, y0, x1, y1] = v.as_slice() else {
        return usage("--window expects x_min,y_min,x_max,y_max");
    };
    Window::new(*x0, *y0, *x1, *y1).or_else(|e| usage(format!("--window: {e}")))
}

/// `x,y`.
pub fn parse_point(text: &str, flag: &str) -> Result<Point> {
    let v: Vec<f64> = text
        .split(',')
        .map(|t| number(t, flag))
        .collect::<Result<_>>()?;
    match v.as_slice() {
        [x, y] => Ok(Point::new(*x, *y)),
        _ => usage(format!("{flag} expects x,y")),
    }
}
