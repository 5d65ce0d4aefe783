//! Conversions between seconds and simulation ticks.

use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-9;

/// Number of ticks in `seconds`, requiring an integral multiple of `tick_s`.
pub fn ticks_exact(seconds: f64, tick_s: f64, what: &str) -> Result<u64> {
    if !(tick_s > 0.0) || !tick_s.is_finite() {
        return Err(Error::Config(format!(
            "tick must be positive, got {tick_s}"
        )));
    }
    if !(seconds >= 0.0) || !seconds.is_finite() {
        return Err(Error::Config(format!(
            "{what} must be non-negative, got {seconds}"
        )));
    }
    let ratio = seconds / tick_s;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > REL_TOL * ratio.max(1.0) {
        return Err(Error::Alignment(format!(
            "{what} of {seconds} s is not a multiple of the {tick_s} s tick"
        )));
    }
    Ok(rounded as u64)
}

/// Integer ratio `a / b`, requiring `a` to be an integral multiple of `b`.
pub fn integral_ratio(a: f64, b: f64, what: &str) -> Result<u64> {
    let ratio = a / b;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > REL_TOL * ratio.max(1.0) {
        return Err(Error::Alignment(format!(
            "{what}: {a} is not an integral multiple of {b}"
        )));
    }
    Ok(rounded as u64)
}

/// Ticks in one period of a `rate_hz` process; periods shorter than a tick
/// collapse to a single tick.
pub fn period_ticks(rate_hz: f64, tick_s: f64, what: &str) -> Result<u64> {
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(Error::Config(format!(
            "{what} must be positive, got {rate_hz}"
        )));
    }
    let period = 1.0 / rate_hz;
    if period <= tick_s * (1.0 + REL_TOL) {
        return Ok(1);
    }
    ticks_exact(period, tick_s, what)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_multiples() {
        assert_eq!(ticks_exact(0.01, 0.001, "x").unwrap(), 10);
        assert_eq!(ticks_exact(1.6, 0.001, "x").unwrap(), 1600);
        assert!(ticks_exact(0.0105, 0.001, "x").is_err());
        assert_eq!(period_ticks(250.0, 0.001, "x").unwrap(), 4);
        assert_eq!(period_ticks(1e6, 0.001, "x").unwrap(), 1);
        assert!(period_ticks(300.0, 0.001, "x").is_err());
        assert_eq!(integral_ratio(100.0, 2.0, "x").unwrap(), 50);
        assert!(integral_ratio(1.0, 2.0, "x").is_err());
    }
}
