//! Clock-time parsing and printing (`HH:MM:SS`).

use crate::error::{Error, Result};

/// Parses `H:MM:SS`, `MM:SS` or plain seconds (fractions allowed in the last
/// field).
pub fn parse_clock(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Domain(format!("cannot parse `{s}` as a time"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() > 3 || parts.iter().any(|p| p.is_empty()) {
        return Err(bad());
    }
    let (last, leading) = parts.split_last().ok_or_else(bad)?;
    let secs: f64 = last.parse().map_err(|_| bad())?;
    if !secs.is_finite() || secs < 0.0 || (!leading.is_empty() && secs >= 60.0) {
        return Err(bad());
    }
    let mut total = 0.0;
    for (i, p) in leading.iter().enumerate() {
        let v: u32 = p.parse().map_err(|_| bad())?;
        // minutes are bounded only when hours precede them
        if i > 0 && v >= 60 {
            return Err(bad());
        }
        total = total * 60.0 + f64::from(v);
    }
    Ok(total * 60.0 + secs)
}

/// Formats positive seconds as `HH:MM:SS`, rounding to the nearest second.
pub fn format_clock(seconds: f64) -> String {
    let total = seconds.round().max(0.0) as u64;
    format!(
        "{:02}:{:02}:{:02}",
        total / 3600,
        (total % 3600) / 60,
        total % 60
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!(parse_clock("2:01:39").unwrap(), 7299.0);
        assert_eq!(parse_clock("02:00:00").unwrap(), 7200.0);
        assert_eq!(parse_clock("29:38").unwrap(), 1778.0);
        assert_eq!(parse_clock("1778.5").unwrap(), 1778.5);
        assert!(parse_clock("abc").is_err());
        assert!(parse_clock("1:61:00").is_err());
        assert!(parse_clock("1::00").is_err());
    }

    #[test]
    fn formats() {
        assert_eq!(format_clock(7183.6), "01:59:44");
        assert_eq!(format_clock(1778.0), "00:29:38");
    }

    proptest! {
        #[test]
        fn whole_seconds_round_trip(s in 0u32..360_000) {
            let text = format_clock(f64::from(s));
            prop_assert_eq!(parse_clock(&text).unwrap(), f64::from(s));
        }
    }
}
