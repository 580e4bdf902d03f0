//! Artifact writing: JSON with fixed float formatting, CSV for arrays.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::ser::Formatter;

/// Pretty JSON formatter printing every float with 17 significant digits.
struct Fixed17 {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl Formatter for Fixed17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serialize to JSON text with 17-significant-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17 { inner: serde_json::ser::PrettyFormatter::new() });
    value.serialize(&mut ser).expect("artifact serializes");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Provenance embedded in every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
}

impl Meta {
    pub fn new(command: &str, config_hash: String) -> Self {
        Self { tool: "glvortex", version: glvortex::VERSION, command: command.to_string(), config_hash }
    }
}

/// Artifact wrapper: `{"meta": …, "result": …}`.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub meta: &'a Meta,
    pub result: &'a T,
}

/// A file produced by a command.
#[derive(Clone, Debug)]
pub enum Artifact {
    Json { name: String, text: String },
    Csv { name: String, header: Vec<String>, rows: Vec<Vec<f64>> },
    Text { name: String, text: String },
}

impl Artifact {
    pub fn json<T: Serialize>(name: &str, meta: &Meta, result: &T) -> Self {
        Artifact::Json { name: name.to_string(), text: to_json(&Envelope { meta, result }) }
    }

    pub fn name(&self) -> &str {
        match self {
            Artifact::Json { name, .. } | Artifact::Csv { name, .. } | Artifact::Text { name, .. } => name,
        }
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join(self.name());
        match self {
            Artifact::Json { text, .. } | Artifact::Text { text, .. } => {
                std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            Artifact::Csv { header, rows, .. } => {
                let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
                w.write_record(header)?;
                for row in rows {
                    w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
                }
                w.flush()?;
            }
        }
        Ok(path)
    }
}

/// File-name friendly form of an equilibrium label (`0+` → `0p`).
pub fn label_slug(label: &str) -> String {
    label.replace('+', "p").replace('-', "m")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let text = to_json(&serde_json::json!({"x": 0.1, "y": [2.0], "z": null}));
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("2.0000000000000000e0"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn non_finite_becomes_null() {
        assert!(to_json(&vec![f64::NAN]).contains("null"));
    }
}
