//! Append-only event log with CSV output `(slot, node_id, event, value)`.

use std::fmt::Display;
use std::fs;
use std::io;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub slot: u64,
    pub node_id: u32,
    pub event: String,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    rows: Vec<EventRow>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, slot: u64, node_id: u32, event: &str, value: impl Display) {
        self.rows.push(EventRow {
            slot,
            node_id,
            event: event.to_string(),
            value: value.to_string(),
        });
    }

    pub fn rows(&self) -> &[EventRow] {
        &self.rows
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("slot,node_id,event,value\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.slot, row.node_id, row.event, row.value
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_csv_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shape() {
        let mut log = EventLog::new();
        log.record(0, 1, "arrival", 1000);
        log.record(1, 1, "serve", 500.5);
        let csv = log.to_csv_string();
        assert_eq!(
            csv,
            "slot,node_id,event,value\n0,1,arrival,1000\n1,1,serve,500.5\n"
        );
    }
}
