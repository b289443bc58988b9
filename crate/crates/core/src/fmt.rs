//! Float formatting for machine-readable output.
//!
//! CSV files are a reproducibility contract: reruns with the same seed must
//! be byte-identical, and parsing a written value back must recover the exact
//! f64. 17 significant digits guarantee round-trip exactness.

/// Format with 17 significant digits (scientific form), round-trip exact.
pub fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column label for a moment order: `m2` for 2.0, `m2.5` for 2.5.
pub fn order_label(r: f64) -> String {
    if r == r.trunc() && r.abs() < 1e15 {
        format!("m{}", r as i64)
    } else {
        format!("m{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float17_round_trips() {
        for &x in &[
            0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1e-300,
            -3.333333333333333e5,
            f64::MIN_POSITIVE,
        ] {
            let s = float17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn order_labels() {
        assert_eq!(order_label(2.0), "m2");
        assert_eq!(order_label(4.0), "m4");
        assert_eq!(order_label(2.5), "m2.5");
    }
}
