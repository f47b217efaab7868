//! Probe reports: one JSON document per run plus an optional CSV of samples.
//! Reports never contain timings so identical inputs give identical bytes.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ProbeParams {
    pub dim: usize,
    pub rank: Option<usize>,
    pub order: Option<usize>,
    pub weight: Option<f64>,
    pub tau: Option<f64>,
    pub grid: usize,
    pub refined_grid: Option<usize>,
    pub half_length: f64,
    pub ensemble: Option<usize>,
    pub seed: u64,
    pub media: Option<String>,
}

/// Norms of one ensemble member on the base grid and after one doubling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub refined_ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Aggregates {
    pub sup_ratio: f64,
    pub mean_ratio: f64,
    pub refined_sup_ratio: f64,
    /// `|sup' - sup| / sup` between the base and the doubled grid.
    pub drift: f64,
}

/// Outcome of one checked property. Informational flags never fail a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Flag {
    pub name: String,
    pub passed: bool,
    pub asserted: bool,
    pub worst: f64,
    pub tolerance: f64,
    pub note: Option<String>,
}

impl Flag {
    /// Asserted check `worst ≤ tolerance`; NaN fails.
    pub fn at_most(name: impl Into<String>, worst: f64, tolerance: f64) -> Self {
        Flag {
            name: name.into(),
            passed: worst <= tolerance,
            asserted: true,
            worst,
            tolerance,
            note: None,
        }
    }

    /// Asserted check `worst ≥ tolerance`.
    pub fn at_least(name: impl Into<String>, worst: f64, tolerance: f64) -> Self {
        Flag {
            passed: worst >= tolerance,
            ..Self::at_most(name, worst, tolerance)
        }
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Flag {
            name: name.into(),
            passed: true,
            asserted: false,
            worst: value,
            tolerance: f64::NAN,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// A named scalar recorded for inspection only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub probe: String,
    pub params: ProbeParams,
    pub samples: Vec<Sample>,
    pub aggregates: Option<Aggregates>,
    pub diagnostics: Vec<Diagnostic>,
    pub flags: Vec<Flag>,
}

impl ProbeReport {
    pub fn new(probe: impl Into<String>, params: ProbeParams) -> Self {
        ProbeReport {
            probe: probe.into(),
            params,
            samples: Vec::new(),
            aggregates: None,
            diagnostics: Vec::new(),
            flags: Vec::new(),
        }
    }

    /// True iff every asserted flag passed.
    pub fn passed(&self) -> bool {
        self.flags.iter().all(|f| !f.asserted || f.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Flag> {
        self.flags.iter().filter(|f| f.asserted && !f.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.samples {
            out.serialize(s).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Format(format!("csv: {e}"))
}

/// `num / den`, with `0` when the denominator vanishes.
pub fn safe_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Aggregates over paired base/refined ratios.
pub fn aggregate(samples: &[Sample]) -> Aggregates {
    if samples.is_empty() {
        return Aggregates::default();
    }
    let sup = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let refined = samples.iter().map(|s| s.refined_ratio).fold(0.0, f64::max);
    Aggregates {
        sup_ratio: sup,
        mean_ratio: samples.iter().map(|s| s.ratio).sum::<f64>() / samples.len() as f64,
        refined_sup_ratio: refined,
        drift: safe_ratio((refined - sup).abs(), sup),
    }
}
