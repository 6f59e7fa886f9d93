//! Parameter grids from command-line text.
//!
//! Integer grids: `7`, `3..8` (inclusive), `3,5,8`. Float grids: `0.6`,
//! `0.1,0.2`, `a..b` (five evenly spaced values, ends included) or
//! `a..b:count`.

use crate::error::{Error, Result};

const DEFAULT_FLOAT_COUNT: usize = 5;
/// Upper bound on grid length, to reject runaway ranges.
pub const MAX_GRID_LEN: usize = 10_000;

fn parse_err(text: &str, why: &str) -> Error {
    Error::Parse(format!("grid {text:?}: {why}"))
}

pub fn parse_int_grid(text: &str) -> Result<Vec<usize>> {
    let t = text.trim();
    if t.is_empty() {
        return Err(parse_err(text, "empty"));
    }
    let int = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| parse_err(text, "expected a non-negative integer"))
    };
    let out = if let Some((a, b)) = t.split_once("..") {
        let (a, b) = (int(a)?, int(b)?);
        if b < a {
            return Err(parse_err(text, "range end below start"));
        }
        if b - a >= MAX_GRID_LEN {
            return Err(parse_err(text, "too many values"));
        }
        (a..=b).collect()
    } else {
        t.split(',').map(int).collect::<Result<Vec<_>>>()?
    };
    if out.len() > MAX_GRID_LEN {
        return Err(parse_err(text, "too many values"));
    }
    Ok(out)
}

pub fn parse_float_grid(text: &str) -> Result<Vec<f64>> {
    let t = text.trim();
    if t.is_empty() {
        return Err(parse_err(text, "empty"));
    }
    let float = |v: &str| {
        let x = v
            .trim()
            .parse::<f64>()
            .map_err(|_| parse_err(text, "expected a number"))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(parse_err(text, "values must be finite"))
        }
    };
    let out = if let Some((a, rest)) = t.split_once("..") {
        let (b, count) = match rest.split_once(':') {
            Some((b, c)) => (b, c.trim().parse::<usize>().map_err(|_| parse_err(text, "bad count"))?),
            None => (rest, DEFAULT_FLOAT_COUNT),
        };
        let (a, b) = (float(a)?, float(b)?);
        if b < a {
            return Err(parse_err(text, "range end below start"));
        }
        if count == 0 || count > MAX_GRID_LEN {
            return Err(parse_err(text, "count must be in 1..=10000"));
        }
        if count == 1 {
            if a != b {
                return Err(parse_err(text, "a single value needs equal ends"));
            }
            vec![a]
        } else {
            let step = (b - a) / (count - 1) as f64;
            (0..count)
                .map(|s| if s + 1 == count { b } else { a + step * s as f64 })
                .collect()
        }
    } else {
        let v = t.split(',').map(float).collect::<Result<Vec<_>>>()?;
        if v.len() > MAX_GRID_LEN {
            return Err(parse_err(text, "too many values"));
        }
        v
    };
    Ok(out)
}
