//! Canonical JSON emission: struct fields in declaration order and floats at
//! 17 significant digits, so emitted documents are byte-stable and parsing
//! then re-emitting reproduces them exactly.

use serde::Serialize;
use serde_json::ser::Formatter;
use std::io;

#[derive(Default)]
struct SigFig17;

impl Formatter for SigFig17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if value.is_finite() {
            // 17 significant digits round-trip every f64 exactly.
            write!(writer, "{:.16e}", value)
        } else {
            write!(writer, "null")
        }
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, value as f64)
    }
}

/// Serialize with canonical float formatting.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFig17);
    value
        .serialize(&mut ser)
        .expect("serialization to a buffer cannot fail");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}
