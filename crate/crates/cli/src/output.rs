//! Buffered NDJSON / CSV output. Nothing reaches stdout until a command
//! has finished without error.

use std::fmt::Write as _;

use holonomy::operators::CMatrix;
use holonomy::Complex64;
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Record<'a, T: Serialize> {
    record: &'a str,
    #[serde(flatten)]
    body: &'a T,
    scenario_hash: &'a str,
    version: &'a str,
}

pub struct Emitter {
    hash: String,
    csv: bool,
    buffer: String,
}

impl Emitter {
    pub fn new(hash: &str, csv: bool) -> Self {
        Emitter {
            hash: hash.to_string(),
            csv,
            buffer: String::new(),
        }
    }

    /// One NDJSON line; ignored in CSV mode.
    pub fn record<T: Serialize>(&mut self, kind: &str, body: &T) {
        if self.csv {
            return;
        }
        let line = serde_json::to_string(&Record {
            record: kind,
            body,
            scenario_hash: &self.hash,
            version: VERSION,
        })
        .expect("records serialize");
        self.buffer.push_str(&line);
        self.buffer.push('\n');
    }

    /// CSV header; provenance columns are appended.
    pub fn header(&mut self, columns: &[&str]) {
        if self.csv {
            let _ = writeln!(self.buffer, "{},scenario_hash,version", columns.join(","));
        }
    }

    /// CSV row; ignored in NDJSON mode.
    pub fn row(&mut self, cells: &[String]) {
        if self.csv {
            let _ = writeln!(self.buffer, "{},{},{}", cells.join(","), self.hash, VERSION);
        }
    }

    pub fn finish(self) -> String {
        self.buffer
    }
}

pub fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn matrix_pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| pair(m[(i, j)])).collect())
        .collect()
}

/// CSV cell for a number or word, formatted as in the JSON records.
pub fn cell<T: Serialize>(value: T) -> String {
    let text = serde_json::to_string(&value).expect("plain values serialize");
    text.trim_matches('"').to_string()
}

pub fn opt_cell<T: Serialize>(value: Option<T>) -> String {
    value.map(cell).unwrap_or_default()
}
