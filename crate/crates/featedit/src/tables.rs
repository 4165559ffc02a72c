//! CSV files: detections, ground truth and the exported statistics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use featedit_core::{
    BBox, ChannelStatsMatrix, DetectionRecord, EditMask, GroundTruth, PcaResult, PrCurve,
};

use crate::error::{Error, Result};

pub const DETECTION_HEADER: &str = "image_id,class_id,score,x1,y1,x2,y2";
pub const GROUND_TRUTH_HEADER: &str = "image_id,class_id,x1,y1,x2,y2,difficult";
pub const STATS_HEADER: &str = "sample_index,channel,kurtosis";
pub const PCA_HEADER: &str = "sample_index,pc1,pc2,class_id";
pub const MASK_HEADER: &str = "class_id,channel,keep,reason";
pub const EVAL_HEADER: &str = "class_id,ap,num_gt,num_tp,num_fp";
pub const PR_HEADER: &str = "recall,precision";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_lines<I>(path: &Path, header: &str, lines: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for line in lines {
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a headed CSV, checking the header and handing each record with
/// its 1-based line number to `parse_row`.
fn read_rows<T, F>(path: &Path, header: &str, mut parse_row: F) -> Result<Vec<T>>
where
    F: FnMut(&csv::StringRecord) -> std::result::Result<T, String>,
{
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, path, header, &mut parse_row)
}

fn parse_table<T, F>(text: &str, path: &Path, header: &str, parse_row: &mut F) -> Result<Vec<T>>
where
    F: FnMut(&csv::StringRecord) -> std::result::Result<T, String>,
{
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(parse_err(1, format!("expected header `{header}`, found `{found}`")));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(parse_row(&rec).map_err(|m| parse_err(line, m))?);
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> std::result::Result<T, String> {
    let raw = rec.get(i).ok_or_else(|| format!("missing column `{name}`"))?;
    raw.parse()
        .map_err(|_| format!("invalid `{name}` value `{raw}`"))
}

fn bbox_at(rec: &csv::StringRecord, start: usize) -> std::result::Result<BBox, String> {
    let x1 = field(rec, start, "x1")?;
    let y1 = field(rec, start + 1, "y1")?;
    let x2 = field(rec, start + 2, "x2")?;
    let y2 = field(rec, start + 3, "y2")?;
    BBox::new(x1, y1, x2, y2).map_err(|e| e.to_string())
}

fn expect_len(rec: &csv::StringRecord, n: usize) -> std::result::Result<(), String> {
    if rec.len() == n {
        Ok(())
    } else {
        Err(format!("expected {n} columns, found {}", rec.len()))
    }
}

pub fn parse_detections(text: &str, path: &Path) -> Result<Vec<DetectionRecord>> {
    parse_table(text, path, DETECTION_HEADER, &mut parse_detection_row)
}

fn parse_detection_row(rec: &csv::StringRecord) -> std::result::Result<DetectionRecord, String> {
    expect_len(rec, 7)?;
    let image_id = field(rec, 0, "image_id")?;
    let class_id = field(rec, 1, "class_id")?;
    let score = field(rec, 2, "score")?;
    DetectionRecord::new(image_id, class_id, score, bbox_at(rec, 3)?).map_err(|e| e.to_string())
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionRecord>> {
    read_rows(path.as_ref(), DETECTION_HEADER, parse_detection_row)
}

pub fn format_detection(d: &DetectionRecord) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        d.image_id,
        d.class_id,
        full_precision(d.score),
        d.bbox.x1,
        d.bbox.y1,
        d.bbox.x2,
        d.bbox.y2
    )
}

pub fn write_detections(dets: &[DetectionRecord], path: impl AsRef<Path>) -> Result<()> {
    write_lines(path.as_ref(), DETECTION_HEADER, dets.iter().map(format_detection))
}

fn parse_gt_row(rec: &csv::StringRecord) -> std::result::Result<GroundTruth, String> {
    expect_len(rec, 7)?;
    let difficult = match rec.get(6).unwrap_or("") {
        "0" => false,
        "1" => true,
        other => return Err(format!("invalid `difficult` value `{other}`")),
    };
    Ok(GroundTruth {
        image_id: field(rec, 0, "image_id")?,
        class_id: field(rec, 1, "class_id")?,
        bbox: bbox_at(rec, 2)?,
        difficult,
    })
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruth>> {
    read_rows(path.as_ref(), GROUND_TRUTH_HEADER, parse_gt_row)
}

pub fn write_ground_truth(gts: &[GroundTruth], path: impl AsRef<Path>) -> Result<()> {
    write_lines(
        path.as_ref(),
        GROUND_TRUTH_HEADER,
        gts.iter().map(|g| {
            format!(
                "{},{},{},{},{},{},{}",
                g.image_id, g.class_id, g.bbox.x1, g.bbox.y1, g.bbox.x2, g.bbox.y2, g.difficult as u8
            )
        }),
    )
}

pub fn write_stats(stats: &ChannelStatsMatrix, path: impl AsRef<Path>) -> Result<()> {
    let lines = (0..stats.rows()).flat_map(|j| {
        (0..stats.cols()).map(move |i| format!("{j},{i},{}", full_precision(stats.get(j, i))))
    });
    write_lines(path.as_ref(), STATS_HEADER, lines)
}

pub fn write_pca(pca: &PcaResult, class_ids: &[u32], path: impl AsRef<Path>) -> Result<()> {
    let p = &pca.projections;
    let lines = (0..p.rows()).map(|j| {
        let pc2 = if p.cols() > 1 { p.get(j, 1) } else { 0.0 };
        format!(
            "{j},{},{},{}",
            full_precision(p.get(j, 0)),
            full_precision(pc2),
            class_ids[j]
        )
    });
    write_lines(path.as_ref(), PCA_HEADER, lines)
}

pub fn write_masks(masks: &[EditMask], path: impl AsRef<Path>) -> Result<()> {
    let lines = masks.iter().flat_map(|m| {
        (0..m.channels()).map(move |i| {
            format!("{},{i},{},{}", m.class_id, m.keep[i] as u8, m.reason(i).as_str())
        })
    });
    write_lines(path.as_ref(), MASK_HEADER, lines)
}

/// Reads masks back from the mask export; classes appear in file order.
pub fn read_masks(path: impl AsRef<Path>) -> Result<Vec<EditMask>> {
    let rows = read_rows(path.as_ref(), MASK_HEADER, |rec| {
        expect_len(rec, 4)?;
        let class_id: u32 = field(rec, 0, "class_id")?;
        let channel: usize = field(rec, 1, "channel")?;
        let keep = match rec.get(2).unwrap_or("") {
            "0" => false,
            "1" => true,
            other => return Err(format!("invalid `keep` value `{other}`")),
        };
        let reason = rec.get(3).unwrap_or("").to_string();
        if !matches!(reason.as_str(), "kept" | "intra" | "inter" | "both") {
            return Err(format!("invalid `reason` value `{reason}`"));
        }
        if keep != (reason == "kept") {
            return Err("keep flag disagrees with reason".to_string());
        }
        Ok((class_id, channel, reason))
    })?;
    let mut masks: Vec<EditMask> = Vec::new();
    for (class_id, channel, reason) in rows {
        if masks.last().map_or(true, |m| m.class_id != class_id) {
            masks.push(EditMask::keep_all(class_id, 0));
        }
        let m = masks.last_mut().unwrap();
        if channel != m.keep.len() {
            return Err(Error::Config(format!(
                "mask file: class {class_id} channels out of order at {channel}"
            )));
        }
        m.keep.push(reason == "kept");
        if reason == "intra" || reason == "both" {
            m.dropped_intra.push(channel);
        }
        if reason == "inter" || reason == "both" {
            m.dropped_inter.push(channel);
        }
    }
    Ok(masks)
}

pub fn write_eval(curves: &[PrCurve], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    write_lines(
        &dir.join("eval.csv"),
        EVAL_HEADER,
        curves.iter().map(|c| {
            format!(
                "{},{},{},{},{}",
                c.class_id,
                full_precision(c.ap),
                c.num_gt,
                c.num_tp,
                c.num_fp
            )
        }),
    )?;
    for c in curves {
        write_lines(
            &dir.join(format!("pr_class{}.csv", c.class_id)),
            PR_HEADER,
            c.points
                .iter()
                .map(|(r, p)| format!("{},{}", full_precision(*r), full_precision(*p))),
        )?;
    }
    Ok(())
}
