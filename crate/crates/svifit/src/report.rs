//! Structured fit reports with deterministic JSON serialization.
//!
//! Reports keep a fixed key order (struct order) and print every float with
//! 17 significant digits in scientific notation, enough to round-trip any
//! double exactly, so two runs over the same inputs produce byte-identical
//! JSON apart from the measured wall time.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

use crate::diagnostics::CertificateSummary;
use crate::error::{Error, Result};
use crate::fpi::{Anchor, ClampCounts, FitTrace};
use crate::model::{MinPoint, Smile, SviParams};

/// Anchor description embedded in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorInfo {
    /// "min-point" or "slope".
    pub kind: String,
    /// How the anchor was estimated.
    pub provenance: String,
    pub x: f64,
    pub v: f64,
    pub slope: Option<f64>,
    /// Whether the estimate fell back to a boundary argmin.
    pub boundary: bool,
}

impl AnchorInfo {
    pub fn from_min_point(mp: &MinPoint) -> Self {
        Self {
            kind: "min-point".to_string(),
            provenance: mp.source.to_string(),
            x: mp.x,
            v: mp.v,
            slope: None,
            boundary: mp.boundary,
        }
    }

    pub fn min_point(mp: &MinPoint, provenance: impl Into<String>) -> Self {
        Self {
            provenance: provenance.into(),
            ..Self::from_min_point(mp)
        }
    }

    pub fn slope(x: f64, v: f64, slope: f64, provenance: impl Into<String>) -> Self {
        Self {
            kind: "slope".to_string(),
            provenance: provenance.into(),
            x,
            v,
            slope: Some(slope),
            boundary: false,
        }
    }

    /// The anchor this description denotes.
    pub fn to_anchor(&self) -> Anchor {
        match self.slope {
            Some(slope) => Anchor::Slope {
                x: self.x,
                v: self.v,
                slope,
            },
            None => Anchor::MinPoint {
                x: self.x,
                v: self.v,
            },
        }
    }
}

/// Raw observation arrays stored alongside a trace so certification can be
/// re-run from the report alone. For rotated fits these are the rotated
/// observations the trace's design matrices actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileData {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl SmileData {
    pub fn from_smile(s: &Smile) -> Self {
        Self {
            x: s.xs().to_vec(),
            v: s.vs().to_vec(),
        }
    }

    pub fn from_points(points: &[(f64, f64)]) -> Self {
        Self {
            x: points.iter().map(|p| p.0).collect(),
            v: points.iter().map(|p| p.1).collect(),
        }
    }

    pub fn to_smile(&self) -> Result<Smile> {
        Smile::new(self.x.iter().copied().zip(self.v.iter().copied()).collect())
    }
}

/// Result of a single calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// "fpi", "fpi-uniform", "fpi-rotated", or "qe".
    pub method: String,
    pub anchor: AnchorInfo,
    /// Final parameters. For rotated fits these are the rotated-frame
    /// parameters (the original frame has no finite-parameter form; use the
    /// curve output for original-frame values).
    pub params: SviParams,
    pub rase: f64,
    pub rmse: f64,
    /// Refinement steps after the initial solve.
    pub iterations: usize,
    /// Wall time of the solver loop only, excluding I/O.
    pub wall_time_ns: u64,
    pub clamp_events: ClampCounts,
    pub certificate: Option<CertificateSummary>,
    /// Rotation angle, for rotated fits.
    pub theta: Option<f64>,
    /// Whether the data was mirrored before rotating.
    pub mirrored: Option<bool>,
    /// Post-fit admissibility of the rotation angle.
    pub theta_consistent: Option<bool>,
    pub trace: Option<FitTrace>,
    pub smile: Option<SmileData>,
}

impl FitReport {
    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("bad report JSON: {e}")))
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }

    /// Copy with the wall time zeroed, the one field that varies between
    /// identical runs; used when comparing reports byte for byte.
    pub fn with_zero_wall_time(&self) -> Self {
        Self {
            wall_time_ns: 0,
            ..self.clone()
        }
    }
}

/// Side-by-side comparison of the fixed-point and quasi-explicit runs on the
/// same input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub input: String,
    pub fpi: FitReport,
    pub qe: FitReport,
    /// `qe.rase / fpi.rase`.
    pub rase_ratio: f64,
    /// Mean wall time per quasi-explicit outer step over mean wall time per
    /// fixed-point step.
    pub step_time_ratio: f64,
}

impl CompareReport {
    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }
}

/// Serializes any value to pretty JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, ReportFormatter::new());
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    String::from_utf8(out).map_err(|e| Error::InvalidInput(format!("non-utf8 JSON: {e}")))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = to_json_string(value)?;
    std::fs::write(path, json.as_bytes()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Pretty formatter printing every f64 with 17 significant digits.
struct ReportFormatter<'a> {
    pretty: PrettyFormatter<'a>,
}

impl ReportFormatter<'_> {
    fn new() -> Self {
        Self {
            pretty: PrettyFormatter::new(),
        }
    }
}

impl Formatter for ReportFormatter<'_> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.pretty.begin_array(writer)
    }

    fn end_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.pretty.begin_object(writer)
    }

    fn end_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.pretty.begin_object_key(writer, first)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.pretty.end_object_value(writer)
    }
}
