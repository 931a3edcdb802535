//! Line-delimited episode trace export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::GridError;

/// One emitted line per step: `{"step":..,"action":..,"reward":..,"done":..,"completed":..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u32,
    pub action: u8,
    pub reward: f64,
    pub done: bool,
    pub completed: usize,
}

pub fn write_jsonl(steps: &[StepLog], out: &mut impl Write) -> Result<(), GridError> {
    for s in steps {
        let line = serde_json::to_string(s).map_err(|e| GridError::Table(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_lines_parse_back() {
        let steps = vec![
            StepLog { step: 0, action: 3, reward: -0.1, done: false, completed: 0 },
            StepLog { step: 1, action: 7, reward: 0.9, done: true, completed: 1 },
        ];
        let mut buf = Vec::new();
        write_jsonl(&steps, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed: Vec<StepLog> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(parsed, steps);
    }
}
