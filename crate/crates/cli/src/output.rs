/// Fixed notation with seven decimals, widened so at least seven significant
/// digits survive, for exponents in `[-4, 7)`; scientific with seven
/// significant digits otherwise. Trailing zeros are kept so columns line up.
pub fn sig7(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0.0000000".to_string();
    }
    let sci = format!("{v:.6e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if (-4..7).contains(&exp) {
        format!("{:.*}", (6 - exp).max(7) as usize, v)
    } else {
        sci
    }
}

/// Prints aligned `label value` lines.
pub fn print_table(rows: &[(&str, String)]) {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        println!("{k:<width$}  {v}");
    }
}

#[cfg(test)]
mod tests {
    use super::sig7;

    #[test]
    fn seven_significant_digits() {
        assert_eq!(sig7(1.0 / 3.0), "0.3333333");
        assert_eq!(sig7(1.0416666666666667), "1.0416667");
        assert_eq!(sig7(10.0 / 9.0), "1.1111111");
        assert_eq!(sig7(1.0), "1.0000000");
        assert_eq!(sig7(-0.041666666), "-0.04166667");
        assert_eq!(sig7(0.000123456789), "0.0001234568");
        assert_eq!(sig7(60000.5), "60000.5000000");
        assert_eq!(sig7(123456789.0), "1.234568e8");
        assert_eq!(sig7(1.5e-7), "1.500000e-7");
        assert_eq!(sig7(0.0), "0.0000000");
    }
}
