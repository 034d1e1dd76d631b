//! Dataset files.
//!
//! A dataset is JSON Lines, one sequence per line:
//!
//! ```json
//! {"meta": {"movement": "translation", "compression_mm": 1.2, "drive_speed": 8.0,
//!           "contact_mask": [true, ...]},
//!  "frames": [[t, fx0, fy0, fz0, ..., fz8], ...]}
//! ```
//!
//! Annotations live in a sidecar JSON Lines file with one record per
//! sequence, in the same order. Floats are written in shortest round-trip
//! form, so a save/load cycle is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationRecord, SlipAnnotation};
use crate::error::{CoreError, Result};
use crate::frame::{PillarFrame, SequenceMeta, TactileSequence, FRAME_WIDTH};

/// A sequence with its ground-truth annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub sequence: TactileSequence,
    pub annotation: SlipAnnotation,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    meta: &'a SequenceMeta,
    frames: Vec<[f64; FRAME_WIDTH]>,
}

#[derive(Deserialize)]
struct RecordIn {
    meta: SequenceMeta,
    frames: Vec<Vec<f64>>,
}

pub fn write_sequence_line<W: Write>(mut out: W, seq: &TactileSequence) -> Result<()> {
    let record = RecordOut { meta: &seq.meta, frames: seq.frames.iter().map(PillarFrame::to_row).collect() };
    serde_json::to_writer(&mut out, &record).map_err(|e| CoreError::Io(e.into()))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Parses one dataset line; `line` is 1-based and only used in errors.
pub fn parse_sequence_line(text: &str, line: usize) -> Result<TactileSequence> {
    let record: RecordIn = serde_json::from_str(text)
        .map_err(|e| CoreError::Parse { line, message: e.to_string() })?;
    let frames = record
        .frames
        .iter()
        .enumerate()
        .map(|(i, row)| {
            PillarFrame::from_row(row).ok_or(CoreError::FrameArity {
                line,
                frame: i,
                found: row.len(),
                expected: FRAME_WIDTH,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TactileSequence::new(record.meta, frames))
}

pub fn write_dataset<W: Write>(mut out: W, dataset: &[TactileSequence]) -> Result<()> {
    for seq in dataset {
        write_sequence_line(&mut out, seq)?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<TactileSequence>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_text = line?;
        if line_text.trim().is_empty() {
            continue;
        }
        out.push(parse_sequence_line(&line_text, i + 1)?);
    }
    Ok(out)
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &[TactileSequence]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, dataset)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<TactileSequence>> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn write_annotations<W: Write>(mut out: W, annotations: &[SlipAnnotation]) -> Result<()> {
    for a in annotations {
        serde_json::to_writer(&mut out, &AnnotationRecord::from(a)).map_err(|e| CoreError::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_annotations<R: BufRead>(input: R) -> Result<Vec<SlipAnnotation>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord = serde_json::from_str(&text)
            .map_err(|e| CoreError::Parse { line: i + 1, message: e.to_string() })?;
        out.push(record.into());
    }
    Ok(out)
}

/// Sidecar path for a dataset: `corpus.jsonl` → `corpus.labels.jsonl`.
pub fn annotation_path(dataset: &Path) -> PathBuf {
    let stem = dataset.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    dataset.with_file_name(format!("{stem}.labels.jsonl"))
}

/// Serializes a labeled corpus to dataset and sidecar writers.
pub fn write_labeled<W1: Write, W2: Write>(
    mut data: W1,
    mut labels: W2,
    corpus: &[LabeledSequence],
) -> Result<()> {
    for item in corpus {
        write_sequence_line(&mut data, &item.sequence)?;
        write_annotations(&mut labels, std::slice::from_ref(&item.annotation))?;
    }
    Ok(())
}

pub fn save_labeled(path: impl AsRef<Path>, corpus: &[LabeledSequence]) -> Result<()> {
    let path = path.as_ref();
    let mut data = BufWriter::new(File::create(path)?);
    let mut labels = BufWriter::new(File::create(annotation_path(path))?);
    write_labeled(&mut data, &mut labels, corpus)?;
    data.flush()?;
    labels.flush()?;
    Ok(())
}

pub fn load_labeled(path: impl AsRef<Path>) -> Result<Vec<LabeledSequence>> {
    let path = path.as_ref();
    let sequences = load_dataset(path)?;
    let annotations = read_annotations(BufReader::new(File::open(annotation_path(path))?))?;
    if sequences.len() != annotations.len() {
        return Err(CoreError::InvalidParameter(format!(
            "{} sequences but {} annotations",
            sequences.len(),
            annotations.len()
        )));
    }
    Ok(sequences
        .into_iter()
        .zip(annotations)
        .map(|(sequence, annotation)| LabeledSequence { sequence, annotation })
        .collect())
}

/// Writes one CSV row per frame: `sequence, t, fx0, fy0, fz0, ..., fz8`.
pub fn export_csv<W: Write>(out: W, dataset: &[TactileSequence]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sequence".to_string(), "t".to_string()];
    for p in 0..crate::frame::PILLAR_COUNT {
        for axis in ["fx", "fy", "fz"] {
            header.push(format!("{axis}{p}"));
        }
    }
    w.write_record(&header)?;
    for (i, seq) in dataset.iter().enumerate() {
        for f in &seq.frames {
            let mut rec = vec![i.to_string()];
            rec.extend(f.to_row().iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
