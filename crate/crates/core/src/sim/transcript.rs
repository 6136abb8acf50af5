//! Line-delimited JSON transcripts: a header holding the [`RunSpec`], one
//! line per send / receive / deliver record, and a closing line holding the
//! report.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run, Record, RunReport, RunSpec, SimError, FORMAT_VERSION};

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename = "header")]
struct Header {
    format: u32,
    spec: RunSpec,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename = "report")]
struct Footer {
    report: RunReport,
}

/// A parsed transcript file.
#[derive(Clone, Debug)]
pub struct Transcript {
    pub spec: RunSpec,
    /// Raw record lines, as written.
    pub lines: Vec<String>,
    /// Raw report line.
    pub report_line: String,
}

fn to_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("transcript values serialize")
}

fn lines_of(spec: &RunSpec, report: &RunReport) -> (String, Vec<String>, String) {
    let header = to_line(&Header { format: FORMAT_VERSION, spec: spec.clone() });
    let records = report.transcript.iter().map(to_line).collect();
    let mut bare = report.clone();
    bare.transcript.clear();
    (header, records, to_line(&Footer { report: bare }))
}

/// Writes `report` (which must carry its transcript) for the given spec.
pub fn write_transcript(path: &Path, spec: &RunSpec, report: &RunReport) -> Result<(), SimError> {
    let (header, records, footer) = lines_of(spec, report);
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for line in records {
        writeln!(w, "{line}")?;
    }
    writeln!(w, "{footer}")?;
    w.flush()?;
    Ok(())
}

pub fn read_transcript(path: &Path) -> Result<Transcript, SimError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.len() < 2 {
        return Err(SimError::Transcript("a transcript needs a header and a report line".into()));
    }
    let head: serde_json::Value =
        serde_json::from_str(&lines[0]).map_err(|e| SimError::Transcript(format!("header: {e}")))?;
    let found = head.get("format").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
    if found != FORMAT_VERSION {
        return Err(SimError::Version { found, expected: FORMAT_VERSION });
    }
    let header: Header = serde_json::from_value(head).map_err(|e| SimError::Transcript(format!("header: {e}")))?;
    let report_line = lines.pop().expect("checked length");
    lines.remove(0);
    Ok(Transcript { spec: header.spec, lines, report_line })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplayOutcome {
    Match,
    /// First differing line, counted from 1 over the whole file.
    Diverged {
        line: usize,
        expected: String,
        actual: String,
    },
}

/// Re-executes the spec and compares every line of the transcript.
pub fn replay(path: &Path) -> Result<ReplayOutcome, SimError> {
    let recorded = read_transcript(path)?;
    let mut spec = recorded.spec.clone();
    spec.record_transcript = true;
    let report = run(&spec)?;
    let (_, records, footer) = lines_of(&spec, &report);
    let actual = records.into_iter().chain(std::iter::once(footer));
    let expected = recorded.lines.into_iter().chain(std::iter::once(recorded.report_line));
    let (mut expected, mut actual) = (expected.fuse(), actual.fuse());
    let mut line = 1;
    loop {
        line += 1;
        match (expected.next(), actual.next()) {
            (None, None) => return Ok(ReplayOutcome::Match),
            (e, a) if e == a => continue,
            (e, a) => {
                return Ok(ReplayOutcome::Diverged {
                    line,
                    expected: e.unwrap_or_else(|| "<end of file>".into()),
                    actual: a.unwrap_or_else(|| "<end of run>".into()),
                })
            }
        }
    }
}

/// Parses a record line; used by tools that post-process transcripts.
pub fn parse_record(line: &str) -> Result<Record, SimError> {
    serde_json::from_str(line).map_err(|e| SimError::Transcript(format!("record {line:?}: {e}")))
}
