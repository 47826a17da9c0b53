//! Dataset CSV parsing: header `id,arm,time,status`, arm labels T/C, status
//! codes 0 (censored), 1 (favourable), 2 (competing). Parse errors carry the
//! offending line number; duplicate subject ids are rejected.

use std::collections::HashSet;
use std::path::Path;

use favtrial::{Arm, EventRecord, Status};

use crate::error::{CliError, CliResult};

const EXPECTED_HEADER: [&str; 4] = ["id", "arm", "time", "status"];

pub fn parse_dataset(path: &Path) -> CliResult<Vec<EventRecord>> {
    let display = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Run(format!("{display}: {e}")))?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::Run(format!("{display}: {e}")))?;
    let got: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if got != EXPECTED_HEADER {
        return Err(CliError::Run(format!(
            "{display}: expected header id,arm,time,status, got {}",
            got.join(",")
        )));
    }

    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| CliError::Run(format!("{display}: {e}")))?;
        let line = row.position().map_or(0, |p| p.line());
        let fail = |msg: String| CliError::Run(format!("{display}: line {line}: {msg}"));

        if row.len() != 4 {
            return Err(fail(format!("expected 4 fields, got {}", row.len())));
        }
        let id = row[0].to_string();
        if !seen_ids.insert(id.clone()) {
            return Err(fail(format!("duplicate id {id:?}")));
        }
        let arm = Arm::from_label(&row[1])
            .ok_or_else(|| fail(format!("unknown arm label {:?} (expected T or C)", &row[1])))?;
        let time: f64 = row[2]
            .parse()
            .map_err(|_| fail(format!("invalid time {:?}", &row[2])))?;
        let code: u8 = row[3]
            .parse()
            .map_err(|_| fail(format!("invalid status {:?}", &row[3])))?;
        let status = Status::from_code(code)
            .ok_or_else(|| fail(format!("status {code} not in {{0,1,2}}")))?;

        let record = EventRecord::new(records.len() as u64, arm, time, status)
            .map_err(|e| fail(e.to_string()))?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(CliError::Run(format!("{display}: dataset has no rows")));
    }
    Ok(records)
}
