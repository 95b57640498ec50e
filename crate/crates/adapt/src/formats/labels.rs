use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use adapt_core::annotate::{ColorEntry, ColorTable, Transition};
use serde::{Deserialize, Serialize};

use super::FormatError;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonColor {
    id: u8,
    rgb: [u8; 3],
}

/// `{ "class_name": {"id": n, "rgb": [r, g, b]} }`.
pub fn read_color_table(r: impl Read) -> Result<ColorTable, FormatError> {
    let raw: BTreeMap<String, JsonColor> = serde_json::from_reader(r)?;
    let entries = raw.into_iter().map(|(name, c)| ColorEntry { name, id: c.id, rgb: c.rgb }).collect();
    ColorTable::new(entries).map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn write_color_table(w: &mut dyn Write, table: &ColorTable) -> Result<(), FormatError> {
    let raw: BTreeMap<&str, JsonColor> = table.entries().iter().map(|e| (e.name.as_str(), JsonColor { id: e.id, rgb: e.rgb })).collect();
    serde_json::to_writer_pretty(&mut *w, &raw)?;
    writeln!(w)?;
    Ok(())
}

/// Reads a JSON-lines triage ledger. Blank lines are skipped.
pub fn read_ledger(r: impl Read) -> Result<Vec<Transition>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| FormatError::Parse { line: i as u64 + 1, msg: e.to_string() })?);
    }
    Ok(out)
}

/// Appends transitions to a ledger file, one line each, flushed per write.
#[derive(Debug)]
pub struct LedgerWriter {
    file: File,
}

impl LedgerWriter {
    pub fn open(path: &Path) -> Result<Self, FormatError> {
        Ok(Self { file: OpenOptions::new().create(true).append(true).open(path)? })
    }

    pub fn append(&mut self, t: &Transition) -> Result<(), FormatError> {
        let mut line = serde_json::to_vec(t)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use adapt_core::annotate::{TriageLedger, TriageState};

    #[test]
    fn color_table_json_shape() {
        let json = r#"{ "frozen_water": {"id": 1, "rgb": [128, 0, 128]}, "background": {"id": 0, "rgb": [0, 128, 0]} }"#;
        let t = read_color_table(json.as_bytes()).unwrap();
        assert_eq!(t.lookup([128, 0, 128]), Some(1));
        assert_eq!(t.lookup([0, 128, 0]), Some(0));
        let mut buf = Vec::new();
        write_color_table(&mut buf, &t).unwrap();
        assert_eq!(read_color_table(&buf[..]).unwrap().class_ids(), vec![0, 1]);
    }

    #[test]
    fn black_in_color_table_is_rejected() {
        let json = r#"{ "ice": {"id": 1, "rgb": [0, 0, 0]} }"#;
        assert!(matches!(read_color_table(json.as_bytes()), Err(FormatError::Invalid(_))));
    }

    #[test]
    fn ledger_appends_and_replays() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let mut ledger = TriageLedger::new();
        ledger.add_image("a").unwrap();
        let mut w = LedgerWriter::open(&path).unwrap();
        w.append(ledger.transition("a", TriageState::GroundTruthReady, 1.0, 0.5).unwrap()).unwrap();
        w.append(ledger.transition("a", TriageState::Accepted, 2.0, 3.0).unwrap()).unwrap();
        drop(w);
        let log = read_ledger(File::open(&path).unwrap()).unwrap();
        assert_eq!(log, ledger.log());
        assert_eq!(TriageLedger::replay(log).unwrap().state("a"), Some(TriageState::Accepted));
    }

    #[test]
    fn malformed_ledger_line_is_numbered() {
        let err = read_ledger("\n{\"image_id\": 3}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 2, .. }), "{err}");
    }
}
