//! Flight log: one comma-separated line per control tick, no header.
//!
//! Columns: `t`, setpoint position (3), setpoint velocity (3), true
//! position (3), true velocity (3), true yaw, estimated position (3),
//! estimated velocity (3), estimated yaw, command (`-` if none), speed,
//! confidence, airborne (`0`/`1`), status. Reals are written with 17
//! significant digits so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::control::CommandKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    /// flying a planned segment
    Active,
    /// holding position between segments
    Hover,
    /// a gesture was refused this tick
    Rejected,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Active => "active",
            RowStatus::Hover => "hover",
            RowStatus::Rejected => "rejected",
        }
    }
}

impl FromStr for RowStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(RowStatus::Active),
            "hover" => Ok(RowStatus::Hover),
            "rejected" => Ok(RowStatus::Rejected),
            _ => Err(Error::invalid("status", format!("unknown status `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub setpoint_p: [f64; 3],
    pub setpoint_v: [f64; 3],
    pub true_p: [f64; 3],
    pub true_v: [f64; 3],
    pub true_yaw: f64,
    pub est_p: [f64; 3],
    pub est_v: [f64; 3],
    pub est_yaw: f64,
    pub command: Option<CommandKind>,
    pub speed: f64,
    pub confidence: f64,
    pub airborne: bool,
    pub status: RowStatus,
}

const FIELDS: usize = 26;

impl LogRow {
    pub fn write_line(&self, out: &mut String) {
        let mut reals = vec![self.t];
        for v in [self.setpoint_p, self.setpoint_v, self.true_p, self.true_v] {
            reals.extend(v);
        }
        reals.push(self.true_yaw);
        reals.extend(self.est_p);
        reals.extend(self.est_v);
        reals.push(self.est_yaw);
        for r in reals {
            write!(out, "{r:.16e},").expect("string write");
        }
        let cmd = self.command.map_or("-", CommandKind::as_str);
        writeln!(
            out,
            "{cmd},{:.16e},{:.16e},{},{}",
            self.speed,
            self.confidence,
            u8::from(self.airborne),
            self.status.as_str()
        )
        .expect("string write");
    }

    fn parse(line: &str, lineno: usize) -> Result<Self> {
        let err = |reason: String| Error::LogFormat { line: lineno, reason };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != FIELDS {
            return Err(err(format!("expected {FIELDS} fields, found {}", f.len())));
        }
        let real = |i: usize| -> Result<f64> {
            f[i].parse::<f64>()
                .map_err(|_| err(format!("field {} is not a number: `{}`", i + 1, f[i])))
        };
        let v3 = |i: usize| -> Result<[f64; 3]> { Ok([real(i)?, real(i + 1)?, real(i + 2)?]) };
        let command = match f[21] {
            "-" => None,
            s => Some(s.parse().map_err(|_| err(format!("unknown command `{s}`")))?),
        };
        let airborne = match f[24] {
            "0" => false,
            "1" => true,
            s => return Err(err(format!("airborne flag must be 0 or 1, got `{s}`"))),
        };
        Ok(LogRow {
            t: real(0)?,
            setpoint_p: v3(1)?,
            setpoint_v: v3(4)?,
            true_p: v3(7)?,
            true_v: v3(10)?,
            true_yaw: real(13)?,
            est_p: v3(14)?,
            est_v: v3(17)?,
            est_yaw: real(20)?,
            command,
            speed: real(22)?,
            confidence: real(23)?,
            airborne,
            status: f[25].parse().map_err(|_| err(format!("unknown status `{}`", f[25])))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlightLog {
    pub rows: Vec<LogRow>,
}

impl FlightLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: LogRow) {
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 500);
        for r in &self.rows {
            r.write_line(&mut s);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<LogRow> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let row = LogRow::parse(line, i + 1)?;
            if let Some(prev) = rows.last() {
                if row.t <= prev.t {
                    return Err(Error::LogFormat {
                        line: i + 1,
                        reason: format!("time {} does not increase", row.t),
                    });
                }
            }
            rows.push(row);
        }
        Ok(FlightLog { rows })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::LogFormat {
            line: 0,
            reason: format!("not UTF-8: {e}"),
        })?;
        Self::parse(&text)
    }

    pub fn true_positions(&self) -> Vec<[f64; 3]> {
        self.rows.iter().map(|r| r.true_p).collect()
    }
}
