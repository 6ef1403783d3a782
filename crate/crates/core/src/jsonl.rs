//! JSON-lines helpers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

/// Writes one compact JSON object per line.
pub fn write_to<W: Write, T: Serialize>(mut out: W, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_file<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    write_to(BufWriter::new(File::create(path)?), items)
}
