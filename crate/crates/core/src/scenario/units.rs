//! Quantity parsing for config values written with units ("40 km/h", "-68.5 dB").
//!
//! Everything is converted to SI on the way in. A bare number is taken to be
//! in SI already (a linear ratio for dimensionless gains).

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Speed,
    Frequency,
    Time,
    Power,
    PowerSpectralDensity,
    Bits,
    /// Linear power ratio; accepts `dB`.
    Ratio,
    Dimensionless,
}

/// Parse `text` as a number followed by an optional unit of dimension `dim`.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(text.len());
    // "e" is ambiguous between an exponent and a unit prefix; no unit we accept starts with it.
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{text}` is not a number with a unit"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    let db = |v: f64| 10f64.powf(v / 10.0);
    let converted = match (dim, unit) {
        (Dimension::Length, "m") => value,
        (Dimension::Length, "km") => value * 1e3,
        (Dimension::Speed, "m/s") => value,
        (Dimension::Speed, "km/h") => value * 1000.0 / 3600.0,
        (Dimension::Frequency, "Hz") => value,
        (Dimension::Frequency, "kHz") => value * 1e3,
        (Dimension::Frequency, "MHz") => value * 1e6,
        (Dimension::Frequency, "GHz") => value * 1e9,
        (Dimension::Time, "s") => value,
        (Dimension::Time, "ms") => value * 1e-3,
        (Dimension::Time, "us") => value * 1e-6,
        (Dimension::Power, "W") => value,
        (Dimension::Power, "mW") => value * 1e-3,
        (Dimension::Power, "dBW") => db(value),
        (Dimension::Power, "dBm") => db(value) * 1e-3,
        (Dimension::PowerSpectralDensity, "W/Hz") => value,
        (Dimension::PowerSpectralDensity, "dBm/Hz") => db(value) * 1e-3,
        (Dimension::Bits, "b" | "bit" | "bits") => value,
        (Dimension::Bits, "kb") => value * 1e3,
        (Dimension::Bits, "Mb") => value * 1e6,
        (Dimension::Ratio, "dB") => db(value),
        _ => return Err(format!("unit `{unit}` not accepted here")),
    };
    Ok(converted)
}
