//! CSV emission with all-or-nothing semantics: files appear in the output
//! directory only if every writer finishes, and any failure removes the
//! files written so far. Numbers are formatted with Rust's locale-independent
//! float display; angles are written in degrees to match the config boundary.

use std::f64::consts::PI;
use std::fmt;
use std::fs::{self, File};
use std::io;
use std::mem;
use std::path::{Path, PathBuf};

use bistatic_cmkf::{
    BiasCampaignResult, ConversionMethod, NeesSweepResult, TrackingCampaignResult,
};

const DEG: f64 = PI / 180.0;

#[derive(Debug)]
pub enum OutputError {
    Io { path: PathBuf, source: io::Error },
    Csv(csv::Error),
}

impl fmt::Display for OutputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputError::Io { path, source } => {
                write!(f, "cannot write {}: {source}", path.display())
            }
            OutputError::Csv(err) => write!(f, "csv error: {err}"),
        }
    }
}

impl std::error::Error for OutputError {}

impl From<csv::Error> for OutputError {
    fn from(err: csv::Error) -> Self {
        OutputError::Csv(err)
    }
}

/// Tracks the files written into one output directory. Dropping the set
/// without [`OutputSet::commit`] deletes everything it created.
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self, OutputError> {
        fs::create_dir_all(dir).map_err(|source| OutputError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            committed: false,
        })
    }

    fn start(&mut self, name: &str) -> Result<csv::Writer<File>, OutputError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|source| OutputError::Io {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(csv::Writer::from_writer(file))
    }

    /// Keeps the files and returns their paths.
    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.written {
                let _ = fs::remove_file(path);
            }
        }
    }
}

fn num(value: f64) -> String {
    format!("{value}")
}

/// Radians back to degrees, rounded to a nanodegree so grid values written
/// in the config reappear verbatim in the output.
fn degrees(radians: f64) -> f64 {
    (radians / DEG * 1e9).round() / 1e9
}

/// Degree value as a file-name fragment: integral values lose the trailing
/// ".0", everything else keeps Rust's float display.
fn degree_label(radians: f64) -> String {
    let deg = degrees(radians);
    if deg.fract() == 0.0 {
        format!("{deg:.0}")
    } else {
        format!("{deg}")
    }
}

pub fn write_bias(set: &mut OutputSet, result: &BiasCampaignResult) -> Result<(), OutputError> {
    let mut summary = set.start("bias_summary.csv")?;
    summary.write_record([
        "bearing_deg",
        "method",
        "mean_x",
        "mean_y",
        "truth_x",
        "truth_y",
        "se_x",
        "se_y",
        "n",
    ])?;
    for point in &result.points {
        for method in ConversionMethod::ALL {
            let stats = point.methods.get(method);
            summary.write_record([
                num(degrees(point.bearing)),
                method.label().to_string(),
                num(stats.mean.x),
                num(stats.mean.y),
                num(point.truth.x),
                num(point.truth.y),
                num(stats.standard_error.x),
                num(stats.standard_error.y),
                point.runs.to_string(),
            ])?;
        }
    }
    summary.flush().map_err(csv::Error::from)?;

    for hist in &result.histograms {
        let name = format!("bias_hist_{}.csv", degree_label(hist.bearing));
        let mut writer = set.start(&name)?;
        writer.write_record(["bin_center_x", "bin_center_y", "count"])?;
        let nx = hist.x_centers.len();
        for (iy, &center_y) in hist.y_centers.iter().enumerate() {
            for (ix, &center_x) in hist.x_centers.iter().enumerate() {
                writer.write_record([
                    num(center_x),
                    num(center_y),
                    hist.counts[iy * nx + ix].to_string(),
                ])?;
            }
        }
        writer.flush().map_err(csv::Error::from)?;
    }
    Ok(())
}

pub fn write_nees(
    set: &mut OutputSet,
    file_stem: &str,
    angle_axis: bool,
    result: &NeesSweepResult,
) -> Result<(), OutputError> {
    let mut writer = set.start(&format!("nees_{file_stem}.csv"))?;
    writer.write_record([
        "swept_value",
        "method",
        "nees",
        "bound_low",
        "bound_high",
        "n",
    ])?;
    for point in &result.points {
        let value = if angle_axis {
            degrees(point.swept_value)
        } else {
            point.swept_value
        };
        for method in ConversionMethod::ALL {
            writer.write_record([
                num(value),
                method.label().to_string(),
                num(*point.nees.get(method)),
                num(result.bounds.0),
                num(result.bounds.1),
                point.runs.to_string(),
            ])?;
        }
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_track(
    set: &mut OutputSet,
    result: &TrackingCampaignResult,
) -> Result<(), OutputError> {
    let mut rmse = set.start("track_rmse.csv")?;
    rmse.write_record(["scan", "method", "rmse_pos", "rmse_vel"])?;
    for series in &result.series {
        for scan in 0..result.scan_count {
            rmse.write_record([
                (scan + 1).to_string(),
                series.method.label().to_string(),
                num(series.position_rmse[scan]),
                num(series.velocity_rmse[scan]),
            ])?;
        }
    }
    rmse.flush().map_err(csv::Error::from)?;

    let mut nees = set.start("track_nees.csv")?;
    nees.write_record(["scan", "method", "nees", "bound_low", "bound_high"])?;
    for series in &result.series {
        for scan in 0..result.scan_count {
            nees.write_record([
                (scan + 1).to_string(),
                series.method.label().to_string(),
                num(series.nees[scan]),
                num(result.bounds.0),
                num(result.bounds.1),
            ])?;
        }
    }
    nees.flush().map_err(csv::Error::from)?;
    Ok(())
}
