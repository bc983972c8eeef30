//! JSON output with every float written to 17 significant digits, enough to
//! round-trip any `f64` exactly.

use std::io::{self, Write};

use serde::Serialize;

struct SigFigs;

impl serde_json::ser::Formatter for SigFigs {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON; non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFigs);
    value
        .serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_seventeen_digits() {
        let xs = vec![0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0];
        let text = to_json(&xs);
        assert!(text.starts_with("[1.0000000000000001e-1,"));
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, xs);
    }

    #[test]
    fn non_finite_is_null() {
        assert_eq!(to_json(&[f64::NAN, f64::INFINITY]), "[null,null]");
    }
}
