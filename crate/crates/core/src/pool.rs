//! JSON-lines persistence for instance pools, gzip-compressed when the path
//! ends in `.gz`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gen::InstanceRecord;

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn to_jsonl(records: &[InstanceRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_jsonl(reader: impl BufRead) -> Result<Vec<InstanceRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<pool>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: InstanceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::MalformedFormula(format!("pool line {}: {e}", i + 1)))?;
        record.formula()?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_pool(path: &Path, records: &[InstanceRecord]) -> Result<()> {
    let text = to_jsonl(records)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let res = if is_gz(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        enc.write_all(text.as_bytes()).and_then(|_| enc.finish()?.flush())
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(text.as_bytes()).and_then(|_| w.flush())
    };
    res.map_err(|e| Error::io(path, e))
}

pub fn read_pool(path: &Path) -> Result<Vec<InstanceRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn Read> = if is_gz(path) {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    from_jsonl(BufReader::new(reader))
}

/// SHA-256 of the uncompressed JSON-lines serialization.
pub fn digest(records: &[InstanceRecord]) -> Result<String> {
    Ok(hex::encode(Sha256::digest(to_jsonl(records)?.as_bytes())))
}
