use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::geometry::BBox;
use crate::records::{Detection, GroundTruth, ProposalRecord};

/// One line of a detection file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionLine {
    pub image_id: u64,
    #[serde(alias = "category_id")]
    pub class_id: u32,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<BBox>,
}

impl DetectionLine {
    /// Record for post-processing; without a proposal the box stands in
    /// for it.
    pub fn to_record(&self) -> ProposalRecord {
        ProposalRecord {
            proposal: self.proposal.unwrap_or(self.bbox),
            regressed: self.bbox,
            score: self.score,
            class_id: self.class_id,
            image_id: self.image_id,
        }
    }

    pub fn to_detection(&self, source: usize) -> Detection {
        Detection {
            bbox: self.bbox,
            score: self.score,
            class_id: self.class_id,
            image_id: self.image_id,
            source,
        }
    }
}

impl From<&Detection> for DetectionLine {
    fn from(d: &Detection) -> Self {
        Self { image_id: d.image_id, class_id: d.class_id, score: d.score, bbox: d.bbox, proposal: None }
    }
}

/// One line of a ground-truth file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthLine {
    pub image_id: u64,
    pub instance_id: u64,
    #[serde(alias = "category_id")]
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

impl From<GroundTruthLine> for GroundTruth {
    fn from(g: GroundTruthLine) -> Self {
        GroundTruth { bbox: g.bbox, class_id: g.class_id, image_id: g.image_id, instance_id: g.instance_id }
    }
}

/// Parses non-blank lines; `f` sees each value with its 1-based line number.
fn parse_lines<T, R, F>(reader: R, mut f: F) -> Result<Vec<T>, IoError>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
    F: FnMut(&T, usize) -> Result<(), IoError>,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T =
            serde_json::from_str(&line).map_err(|e| IoError::Parse { line: i + 1, msg: e.to_string() })?;
        f(&value, i + 1)?;
        out.push(value);
    }
    Ok(out)
}

/// Reads a detection file. Scores must lie in `[0, 1]`; with
/// `require_proposal` every line needs a `proposal` field.
pub fn read_detections<R: BufRead>(reader: R, require_proposal: bool) -> Result<Vec<DetectionLine>, IoError> {
    parse_lines(reader, |d: &DetectionLine, line| {
        if !(0.0..=1.0).contains(&d.score) {
            return Err(IoError::Parse { line, msg: format!("score {} outside [0, 1]", d.score) });
        }
        if require_proposal && d.proposal.is_none() {
            return Err(IoError::MissingProposal { line });
        }
        Ok(())
    })
}

/// Reads a ground-truth file, rejecting repeated `(image_id, instance_id)`.
pub fn read_ground_truths<R: BufRead>(reader: R) -> Result<Vec<GroundTruthLine>, IoError> {
    let mut seen = HashSet::new();
    parse_lines(reader, |g: &GroundTruthLine, line| {
        if seen.insert((g.image_id, g.instance_id)) {
            Ok(())
        } else {
            Err(IoError::DuplicateInstance { image_id: g.image_id, instance_id: g.instance_id, line })
        }
    })
}

/// One JSON object per line. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_lines<W: Write, T: Serialize>(mut w: W, items: &[T]) -> Result<(), IoError> {
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_detections<W: Write>(w: W, dets: &[Detection]) -> Result<(), IoError> {
    let lines: Vec<DetectionLine> = dets.iter().map(DetectionLine::from).collect();
    write_lines(w, &lines)
}
