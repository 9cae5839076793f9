//! Matrix-valued series, panel datasets, and their on-disk containers.

use crate::{Error, Mat, Result};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Which synthetic data model produced a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseId {
    /// Lag-1 linear recursion.
    Linear1,
    /// Lag-1 nonlinear recursion.
    Nonlinear1,
    /// Lag-3 nonlinear recursion.
    Nonlinear3,
}

impl CaseId {
    /// Markov order of the case's recursion.
    pub fn lag(self) -> usize {
        match self {
            CaseId::Linear1 | CaseId::Nonlinear1 => 1,
            CaseId::Nonlinear3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseId::Linear1 => "case1",
            CaseId::Nonlinear1 => "case2",
            CaseId::Nonlinear3 => "case3",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "case1" => Ok(CaseId::Linear1),
            "case2" => Ok(CaseId::Nonlinear1),
            "case3" => Ok(CaseId::Nonlinear3),
            other => Err(Error::Config(format!(
                "unknown case {other:?}, expected case1|case2|case3"
            ))),
        }
    }

    fn code(self) -> u8 {
        match self {
            CaseId::Linear1 => 1,
            CaseId::Nonlinear1 => 2,
            CaseId::Nonlinear3 => 3,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(CaseId::Linear1),
            2 => Ok(CaseId::Nonlinear1),
            3 => Ok(CaseId::Nonlinear3),
            other => Err(Error::Checkpoint(format!("unknown case code {other}"))),
        }
    }
}

/// An observed sequence of frames `X_0 … X_T`, all of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSeries {
    frames: Vec<Mat>,
    lag: usize,
}

impl MatrixSeries {
    /// Needs at least `lag + 1` frames of a uniform shape.
    pub fn new(frames: Vec<Mat>, lag: usize) -> Result<Self> {
        if lag == 0 {
            return Err(Error::Config("lag must be at least 1".into()));
        }
        if frames.len() < lag + 1 {
            return Err(Error::Config(format!(
                "series needs at least lag+1 = {} frames, got {}",
                lag + 1,
                frames.len()
            )));
        }
        let shape = frames[0].shape();
        if frames.iter().any(|f| f.shape() != shape) {
            return Err(Error::shape(
                format!("uniform frames {}x{}", shape.0, shape.1),
                "mixed shapes",
            ));
        }
        Ok(MatrixSeries { frames, lag })
    }

    pub fn frames(&self) -> &[Mat] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &Mat {
        &self.frames[t]
    }

    /// Number of frames (`T + 1` for a series `X_0 … X_T`).
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Index of the last frame, i.e. `T`.
    pub fn last_index(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn p1(&self) -> usize {
        self.frames[0].nrows()
    }

    pub fn p2(&self) -> usize {
        self.frames[0].ncols()
    }

    /// The `lag` frames ending at index `t` (inclusive), oldest first.
    pub fn history_ending_at(&self, t: usize) -> Result<&[Mat]> {
        if t + 1 < self.lag || t >= self.frames.len() {
            return Err(Error::Domain(format!(
                "history ending at {t} needs indices {}..={t} inside 0..{}",
                t as i64 - self.lag as i64 + 1,
                self.frames.len()
            )));
        }
        Ok(&self.frames[t + 1 - self.lag..=t])
    }

    /// A new series over frames `0..=t_cut` with the same lag.
    pub fn truncated(&self, t_cut: usize) -> Result<MatrixSeries> {
        if t_cut >= self.frames.len() {
            return Err(Error::Domain(format!(
                "cut {t_cut} out of range for {} frames",
                self.frames.len()
            )));
        }
        MatrixSeries::new(self.frames[..=t_cut].to_vec(), self.lag)
    }

    /// Mutable access for tests that need to tamper with frames.
    pub fn frame_mut(&mut self, t: usize) -> &mut Mat {
        &mut self.frames[t]
    }
}

/// Multiple subjects sharing one transition law.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    subjects: Vec<MatrixSeries>,
}

impl PanelDataset {
    /// Needs at least one subject; shapes must be uniform across subjects.
    pub fn new(subjects: Vec<MatrixSeries>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::Config("panel needs at least one subject".into()));
        }
        let (p1, p2, lag) = (subjects[0].p1(), subjects[0].p2(), subjects[0].lag());
        for s in &subjects {
            if s.p1() != p1 || s.p2() != p2 || s.lag() != lag {
                return Err(Error::shape(
                    format!("uniform subjects {p1}x{p2} lag {lag}"),
                    format!("{}x{} lag {}", s.p1(), s.p2(), s.lag()),
                ));
            }
        }
        Ok(PanelDataset { subjects })
    }

    pub fn subjects(&self) -> &[MatrixSeries] {
        &self.subjects
    }

    pub fn num_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.subjects.iter().map(|s| s.len()).collect()
    }
}

// ---- binary container -------------------------------------------------------

const SERIES_MAGIC: &[u8; 8] = b"GTSSER\0\0";
const SERIES_VERSION: u32 = 1;

/// Write a series with its provenance header
/// `(p1, p2, n_frames, lag, case, seed)`; frame data is little-endian f64,
/// row-major per frame.
pub fn export_series(path: &Path, series: &MatrixSeries, case: CaseId, seed: u64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SERIES_MAGIC)?;
    w.write_all(&SERIES_VERSION.to_le_bytes())?;
    w.write_all(&(series.p1() as u32).to_le_bytes())?;
    w.write_all(&(series.p2() as u32).to_le_bytes())?;
    w.write_all(&(series.len() as u64).to_le_bytes())?;
    w.write_all(&(series.lag() as u32).to_le_bytes())?;
    w.write_all(&[case.code()])?;
    w.write_all(&seed.to_le_bytes())?;
    for frame in series.frames() {
        for i in 0..frame.nrows() {
            for j in 0..frame.ncols() {
                w.write_all(&frame[(i, j)].to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a series container written by [`export_series`].
pub fn import_series(path: &Path) -> Result<(MatrixSeries, CaseId, u64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SERIES_MAGIC {
        return Err(Error::Checkpoint(format!("bad series magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != SERIES_VERSION {
        return Err(Error::Checkpoint(format!("unsupported series version {version}")));
    }
    let p1 = read_u32(&mut r)? as usize;
    let p2 = read_u32(&mut r)? as usize;
    let n_frames = read_u64(&mut r)? as usize;
    let lag = read_u32(&mut r)? as usize;
    let mut case_byte = [0u8; 1];
    r.read_exact(&mut case_byte)?;
    let case = CaseId::from_code(case_byte[0])?;
    let seed = read_u64(&mut r)?;
    let mut frames = Vec::with_capacity(n_frames);
    let mut buf = [0u8; 8];
    for _ in 0..n_frames {
        let mut frame = Mat::zeros(p1, p2);
        for i in 0..p1 {
            for j in 0..p2 {
                r.read_exact(&mut buf)?;
                frame[(i, j)] = f64::from_le_bytes(buf);
            }
        }
        frames.push(frame);
    }
    Ok((MatrixSeries::new(frames, lag)?, case, seed))
}

/// Debug-oriented CSV export: one row per frame, flattened row-major.
pub fn export_series_csv(path: &Path, series: &MatrixSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for frame in series.frames() {
        let mut first = true;
        for i in 0..frame.nrows() {
            for j in 0..frame.ncols() {
                if !first {
                    write!(w, ",")?;
                }
                write!(w, "{}", frame[(i, j)])?;
                first = false;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_series() -> MatrixSeries {
        let frames = (0..5)
            .map(|t| Mat::from_fn(2, 3, |i, j| (t * 100 + i * 10 + j) as f64 + 0.5))
            .collect();
        MatrixSeries::new(frames, 1).unwrap()
    }

    #[test]
    fn series_validation() {
        assert!(MatrixSeries::new(vec![Mat::zeros(2, 2)], 1).is_err());
        let mixed = vec![Mat::zeros(2, 2), Mat::zeros(3, 2)];
        assert!(MatrixSeries::new(mixed, 1).is_err());
        let ok = vec![Mat::zeros(2, 2); 4];
        assert!(MatrixSeries::new(ok, 3).is_ok());
    }

    #[test]
    fn history_windows() {
        let s = toy_series();
        let h = s.history_ending_at(2).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0], *s.frame(2));
        assert!(s.history_ending_at(9).is_err());

        let frames = vec![Mat::zeros(2, 2); 6];
        let s3 = MatrixSeries::new(frames, 3).unwrap();
        assert_eq!(s3.history_ending_at(4).unwrap().len(), 3);
        assert!(s3.history_ending_at(1).is_err());
    }

    #[test]
    fn container_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.bin");
        let series = toy_series();
        export_series(&path, &series, CaseId::Nonlinear1, 99).unwrap();
        let (back, case, seed) = import_series(&path).unwrap();
        assert_eq!(case, CaseId::Nonlinear1);
        assert_eq!(seed, 99);
        assert_eq!(back.lag(), series.lag());
        for (a, b) in back.frames().iter().zip(series.frames()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn csv_export_one_row_per_frame() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        export_series_csv(&path, &toy_series()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0].split(',').count(), 6);
        // row-major: first row of frame 0 comes first
        assert!(lines[0].starts_with("0.5,1.5,2.5,10.5"));
    }

    #[test]
    fn case_names_round_trip() {
        for case in [CaseId::Linear1, CaseId::Nonlinear1, CaseId::Nonlinear3] {
            assert_eq!(CaseId::from_name(case.name()).unwrap(), case);
        }
        assert!(CaseId::from_name("case4").is_err());
    }
}
