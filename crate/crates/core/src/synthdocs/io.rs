use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Document;
use crate::error::{Error, Result};
use crate::json;

/// Writes one JSON document per line.
pub fn write_corpus_to<W: Write>(mut w: W, docs: &[Document]) -> Result<()> {
    for d in docs {
        json::to_writer(&mut w, d)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    write_corpus_to(BufWriter::new(File::create(path)?), docs)
}

/// Reads a JSON Lines corpus, validating every document. Blank lines are
/// skipped; unknown labels are an error.
pub fn read_corpus_from<R: Read>(r: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::Annotation(format!("corpus line {}: {e}", i + 1)))?;
        doc.validate()?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    read_corpus_from(File::open(path)?)
}
