//! Bounding boxes, annotation sets, and the 2D plumbing around detections:
//! annotation I/O with a configurable schema, IoU, non-maximum suppression,
//! tile coordinate transforms, and score/top-k filtering.
//!
//! Boxes live in continuous pixel coordinates with y pointing down and are
//! stored corner-form (top-left, bottom-right).

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in image pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox2D {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confidence: Option<f64>,
    /// Identifier shared by corresponding lesions across scans.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub track_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub annotator: Option<String>,
}

impl BoundingBox2D {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BoundingBox2D {
            x1,
            y1,
            x2,
            y2,
            confidence: None,
            track_id: None,
            annotator: None,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }

    pub fn with_track_id(mut self, track_id: impl Into<String>) -> Self {
        self.track_id = Some(track_id.into());
        self
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Box centroid `((x1+x2)/2, (y1+y2)/2)`.
    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Point containment with inclusive bounds.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }

    /// Coordinate tuple used for deterministic tie-breaking.
    fn lex_key(&self) -> (f64, f64, f64, f64) {
        (self.x1, self.y1, self.x2, self.y2)
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
///
/// Symmetric; exactly 1 on identical boxes and 0 on disjoint ones.
pub fn iou(a: &BoundingBox2D, b: &BoundingBox2D) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter / union
}

/// All lesion boxes of one texture image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub boxes: Vec<BoundingBox2D>,
}

impl AnnotationSet {
    /// Build a set, validating every box against the image dimensions.
    pub fn new(
        image: impl Into<String>,
        width: u32,
        height: u32,
        boxes: Vec<BoundingBox2D>,
    ) -> Result<Self> {
        let set = AnnotationSet {
            image: image.into(),
            width,
            height,
            boxes,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        for (index, b) in self.boxes.iter().enumerate() {
            let fail = |message: String| Error::Range {
                image: self.image.clone(),
                index,
                message,
            };
            if !(b.x1 < b.x2 && b.y1 < b.y2) {
                return Err(fail(format!(
                    "degenerate box ({}, {}, {}, {})",
                    b.x1, b.y1, b.x2, b.y2
                )));
            }
            if b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > self.width as f64 || b.y2 > self.height as f64 {
                return Err(fail(format!(
                    "box ({}, {}, {}, {}) outside {}x{} image",
                    b.x1, b.y1, b.x2, b.y2, self.width, self.height
                )));
            }
            if let Some(c) = b.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(fail(format!("confidence {c} outside [0,1]")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Same image metadata, different boxes.
    pub fn with_boxes(&self, boxes: Vec<BoundingBox2D>) -> AnnotationSet {
        AnnotationSet {
            image: self.image.clone(),
            width: self.width,
            height: self.height,
            boxes,
        }
    }

    /// Write canonical JSON: `{image, width, height, boxes: [...]}`.
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Load and validate canonical JSON.
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: AnnotationSet = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        set.validate()?;
        Ok(set)
    }
}

fn require_confidences(boxes: &[BoundingBox2D], what: &str) -> Result<()> {
    for (i, b) in boxes.iter().enumerate() {
        if b.confidence.is_none() {
            return Err(Error::MissingConfidence {
                context: format!("box {i} in {what}"),
            });
        }
    }
    Ok(())
}

/// Sort key: descending confidence, then lexicographic coordinates. Makes
/// downstream greedy passes independent of input order. Boxes without a
/// confidence (manual annotations) rank as 1.0.
pub(crate) fn confidence_order(a: &BoundingBox2D, b: &BoundingBox2D) -> std::cmp::Ordering {
    b.confidence
        .unwrap_or(1.0)
        .total_cmp(&a.confidence.unwrap_or(1.0))
        .then_with(|| {
            let (ax1, ay1, ax2, ay2) = a.lex_key();
            let (bx1, by1, bx2, by2) = b.lex_key();
            ax1.total_cmp(&bx1)
                .then(ay1.total_cmp(&by1))
                .then(ax2.total_cmp(&bx2))
                .then(ay2.total_cmp(&by2))
        })
}

/// Greedy non-maximum suppression.
///
/// Keeps the highest-confidence box of every overlapping cluster; a retained
/// pair never has IoU above `iou_threshold`. Output is sorted by descending
/// confidence.
pub fn nms(boxes: &[BoundingBox2D], iou_threshold: f64) -> Result<Vec<BoundingBox2D>> {
    require_confidences(boxes, "nms input")?;
    let mut sorted: Vec<BoundingBox2D> = boxes.to_vec();
    sorted.sort_by(confidence_order);
    let mut kept: Vec<BoundingBox2D> = Vec::new();
    for candidate in sorted {
        if kept.iter().all(|k| iou(k, &candidate) <= iou_threshold) {
            kept.push(candidate);
        }
    }
    Ok(kept)
}

/// One tile of a regular image tiling, in global pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

/// Partition a `width x height` image into row-major tiles of `tile_size`.
/// When the size does not divide the image, edge tiles are truncated.
pub fn tile_split(width: u32, height: u32, tile_size: u32) -> Vec<TileRect> {
    assert!(tile_size > 0, "tile size must be positive");
    let mut tiles = Vec::new();
    let mut y = 0;
    while y < height {
        let th = tile_size.min(height - y);
        let mut x = 0;
        while x < width {
            let tw = tile_size.min(width - x);
            tiles.push(TileRect {
                x,
                y,
                width: tw,
                height: th,
            });
            x += tw;
        }
        y += th;
    }
    tiles
}

/// Translate a tile-local box into global image coordinates.
pub fn tile_to_global(tile: TileRect, local: &BoundingBox2D) -> BoundingBox2D {
    let mut b = local.clone();
    b.x1 += tile.x as f64;
    b.x2 += tile.x as f64;
    b.y1 += tile.y as f64;
    b.y2 += tile.y as f64;
    b
}

/// Inverse of [`tile_to_global`].
pub fn global_to_tile(tile: TileRect, global: &BoundingBox2D) -> BoundingBox2D {
    let mut b = global.clone();
    b.x1 -= tile.x as f64;
    b.x2 -= tile.x as f64;
    b.y1 -= tile.y as f64;
    b.y2 -= tile.y as f64;
    b
}

/// Split an annotation set into per-tile sets. A box belongs to the tile
/// containing its center and is clipped to that tile; coordinates become
/// tile-local.
pub fn split_annotations(set: &AnnotationSet, tile_size: u32) -> Vec<AnnotationSet> {
    let tiles = tile_split(set.width, set.height, tile_size);
    let cols = set.width.div_ceil(tile_size) as usize;
    let mut per_tile: Vec<Vec<BoundingBox2D>> = vec![Vec::new(); tiles.len()];
    for b in &set.boxes {
        let (cx, cy) = b.center();
        let col = ((cx / tile_size as f64) as usize).min(cols - 1);
        let row = ((cy / tile_size as f64) as usize).min(per_tile.len() / cols - 1);
        let t = tiles[row * cols + col];
        let mut clipped = b.clone();
        clipped.x1 = clipped.x1.max(t.x as f64);
        clipped.y1 = clipped.y1.max(t.y as f64);
        clipped.x2 = clipped.x2.min((t.x + t.width) as f64);
        clipped.y2 = clipped.y2.min((t.y + t.height) as f64);
        if clipped.x1 < clipped.x2 && clipped.y1 < clipped.y2 {
            per_tile[row * cols + col].push(global_to_tile(t, &clipped));
        }
    }
    tiles
        .iter()
        .zip(per_tile)
        .map(|(t, boxes)| AnnotationSet {
            image: format!("{}@{},{}", set.image, t.x, t.y),
            width: t.width,
            height: t.height,
            boxes,
        })
        .collect()
}

/// Keep the `k` best detections of each set, where `k` is the smaller
/// surviving count capped at `k_cap`, after dropping boxes with confidence
/// not above `score_threshold`.
pub fn filter_topk(
    a: &AnnotationSet,
    b: &AnnotationSet,
    score_threshold: f64,
    k_cap: usize,
) -> Result<(AnnotationSet, AnnotationSet)> {
    require_confidences(&a.boxes, &format!("set {:?}", a.image))?;
    require_confidences(&b.boxes, &format!("set {:?}", b.image))?;
    let survivors = |set: &AnnotationSet| -> Vec<BoundingBox2D> {
        let mut kept: Vec<BoundingBox2D> = set
            .boxes
            .iter()
            .filter(|bx| bx.confidence.unwrap() > score_threshold)
            .cloned()
            .collect();
        kept.sort_by(confidence_order);
        kept
    };
    let mut kept_a = survivors(a);
    let mut kept_b = survivors(b);
    let k = kept_a.len().min(kept_b.len()).min(k_cap);
    kept_a.truncate(k);
    kept_b.truncate(k);
    Ok((a.with_boxes(kept_a), b.with_boxes(kept_b)))
}

/// Which columns of a delimited annotation file carry the box geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum BoxColumns {
    /// Top-left corner plus width and height.
    Xywh {
        x: String,
        y: String,
        width: String,
        height: String,
    },
    /// Two corners.
    Corners {
        x1: String,
        y1: String,
        x2: String,
        y2: String,
    },
}

/// Maps the columns of a delimited annotation file onto box fields.
///
/// With `has_headers`, selectors are header names; otherwise they are
/// 0-based column indices in string form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaMapping {
    pub has_headers: bool,
    /// Column holding the image/scan identifier; `None` means the whole file
    /// belongs to one image named by the file stem.
    pub image: Option<String>,
    #[serde(flatten)]
    pub columns: BoxColumns,
    pub confidence: Option<String>,
    pub track_id: Option<String>,
    pub annotator: Option<String>,
    /// Dimensions of the texture images the boxes refer to.
    pub image_width: u32,
    pub image_height: u32,
}

impl SchemaMapping {
    /// Headerless `image,x,y,width,height` layout.
    pub fn headerless_xywh(image_width: u32, image_height: u32) -> Self {
        SchemaMapping {
            has_headers: false,
            image: Some("0".into()),
            columns: BoxColumns::Xywh {
                x: "1".into(),
                y: "2".into(),
                width: "3".into(),
                height: "4".into(),
            },
            confidence: None,
            track_id: None,
            annotator: None,
            image_width,
            image_height,
        }
    }

    /// Read a mapping from a JSON file.
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })
    }
}

struct ResolvedColumn(usize);

fn resolve_column(
    selector: &str,
    headers: Option<&csv::StringRecord>,
    path: &Path,
) -> Result<ResolvedColumn> {
    if let Some(headers) = headers {
        if let Some(pos) = headers.iter().position(|h| h == selector) {
            return Ok(ResolvedColumn(pos));
        }
        return Err(Error::Schema {
            path: path.into(),
            message: format!("column {selector:?} not found in header"),
        });
    }
    selector
        .parse::<usize>()
        .map(ResolvedColumn)
        .map_err(|_| Error::Schema {
            path: path.into(),
            message: format!("headerless file needs numeric column selectors, got {selector:?}"),
        })
}

fn field<'r>(record: &'r csv::StringRecord, col: &ResolvedColumn, path: &Path) -> Result<&'r str> {
    record.get(col.0).map(str::trim).ok_or_else(|| Error::Schema {
        path: path.into(),
        message: format!("row has no column {}", col.0),
    })
}

fn numeric(value: &str, path: &Path, line: usize) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("invalid number {value:?}")))
}

/// Load a delimited annotation file into per-image sets, grouped by the
/// image column and ordered by first appearance. Box count is preserved.
pub fn load_annotation_table(
    path: impl AsRef<Path>,
    mapping: &SchemaMapping,
) -> Result<Vec<AnnotationSet>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(mapping.has_headers)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Schema {
            path: path.into(),
            message: e.to_string(),
        })?;

    let headers = if mapping.has_headers {
        Some(reader.headers().map_err(|e| Error::Schema {
            path: path.into(),
            message: e.to_string(),
        })?.clone())
    } else {
        None
    };
    let headers = headers.as_ref();

    let image_col = mapping
        .image
        .as_deref()
        .map(|s| resolve_column(s, headers, path))
        .transpose()?;
    let geometry = match &mapping.columns {
        BoxColumns::Xywh { x, y, width, height } => (
            resolve_column(x, headers, path)?,
            resolve_column(y, headers, path)?,
            resolve_column(width, headers, path)?,
            resolve_column(height, headers, path)?,
            true,
        ),
        BoxColumns::Corners { x1, y1, x2, y2 } => (
            resolve_column(x1, headers, path)?,
            resolve_column(y1, headers, path)?,
            resolve_column(x2, headers, path)?,
            resolve_column(y2, headers, path)?,
            false,
        ),
    };
    let confidence_col = mapping
        .confidence
        .as_deref()
        .map(|s| resolve_column(s, headers, path))
        .transpose()?;
    let track_col = mapping
        .track_id
        .as_deref()
        .map(|s| resolve_column(s, headers, path))
        .transpose()?;
    let annotator_col = mapping
        .annotator
        .as_deref()
        .map(|s| resolve_column(s, headers, path))
        .transpose()?;

    let default_image = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());

    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<BoundingBox2D>> = HashMap::new();
    let header_lines = usize::from(mapping.has_headers);
    for (i, record) in reader.records().enumerate() {
        let line = i + 1 + header_lines;
        let record = record.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let image = match &image_col {
            Some(col) => field(&record, col, path)?.to_string(),
            None => default_image.clone(),
        };
        let (c0, c1, c2, c3, is_xywh) = &geometry;
        let a = numeric(field(&record, c0, path)?, path, line)?;
        let b = numeric(field(&record, c1, path)?, path, line)?;
        let c = numeric(field(&record, c2, path)?, path, line)?;
        let d = numeric(field(&record, c3, path)?, path, line)?;
        let mut bx = if *is_xywh {
            BoundingBox2D::new(a, b, a + c, b + d)
        } else {
            BoundingBox2D::new(a, b, c, d)
        };
        if let Some(col) = &confidence_col {
            let raw = field(&record, col, path)?;
            if !raw.is_empty() {
                bx.confidence = Some(numeric(raw, path, line)?);
            }
        }
        if let Some(col) = &track_col {
            let raw = field(&record, col, path)?;
            if !raw.is_empty() {
                bx.track_id = Some(raw.to_string());
            }
        }
        if let Some(col) = &annotator_col {
            let raw = field(&record, col, path)?;
            if !raw.is_empty() {
                bx.annotator = Some(raw.to_string());
            }
        }
        if !grouped.contains_key(&image) {
            order.push(image.clone());
        }
        grouped.entry(image).or_default().push(bx);
    }

    order
        .into_iter()
        .map(|image| {
            let boxes = grouped.remove(&image).unwrap();
            AnnotationSet::new(image, mapping.image_width, mapping.image_height, boxes)
        })
        .collect()
}

/// Load a delimited file that holds annotations for a single image.
pub fn load_annotations(path: impl AsRef<Path>, mapping: &SchemaMapping) -> Result<AnnotationSet> {
    let path = path.as_ref();
    let mut sets = load_annotation_table(path, mapping)?;
    match sets.len() {
        1 => Ok(sets.pop().unwrap()),
        n => Err(Error::Schema {
            path: path.into(),
            message: format!("expected one image in file, found {n}; use the table loader"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox2D {
        BoundingBox2D::new(x1, y1, x2, y2)
    }

    #[test]
    fn iou_identity_disjoint_and_closed_form() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        let b = bx(1.0, 0.0, 3.0, 2.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(iou(&a, &b), iou(&b, &a));
        let c = bx(5.0, 5.0, 6.0, 6.0);
        assert_eq!(iou(&a, &c), 0.0);
    }

    #[test]
    fn nms_keeps_highest_of_overlapping_cluster() {
        let boxes = vec![
            bx(0.0, 0.0, 10.0, 10.0).with_confidence(0.9),
            bx(1.0, 1.0, 11.0, 11.0).with_confidence(0.8),
        ];
        let kept = nms(&boxes, 0.01).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].confidence, Some(0.9));
    }

    #[test]
    fn nms_keeps_disjoint_boxes() {
        let boxes = vec![
            bx(0.0, 0.0, 10.0, 10.0).with_confidence(0.5),
            bx(20.0, 20.0, 30.0, 30.0).with_confidence(0.4),
        ];
        assert_eq!(nms(&boxes, 0.01).unwrap().len(), 2);
    }

    #[test]
    fn nms_requires_confidence() {
        let boxes = vec![bx(0.0, 0.0, 1.0, 1.0)];
        assert!(matches!(
            nms(&boxes, 0.5),
            Err(Error::MissingConfidence { .. })
        ));
    }

    /// Alternative formulation: repeatedly pick the global best unsuppressed
    /// box and erase its overlaps.
    fn nms_reference(boxes: &[BoundingBox2D], threshold: f64) -> Vec<BoundingBox2D> {
        let mut pool: Vec<BoundingBox2D> = boxes.to_vec();
        let mut kept = Vec::new();
        while !pool.is_empty() {
            let best = pool
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| confidence_order(a, b))
                .map(|(i, _)| i)
                .unwrap();
            let chosen = pool.swap_remove(best);
            pool.retain(|b| iou(&chosen, b) <= threshold);
            kept.push(chosen);
        }
        kept
    }

    #[test]
    fn nms_matches_reference_on_random_boxes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(21);
        for _ in 0..20 {
            let boxes: Vec<BoundingBox2D> = (0..50)
                .map(|_| {
                    let x = rng.gen_range(0.0..90.0);
                    let y = rng.gen_range(0.0..90.0);
                    let w = rng.gen_range(1.0..10.0);
                    let h = rng.gen_range(1.0..10.0);
                    bx(x, y, x + w, y + h).with_confidence(rng.gen())
                })
                .collect();
            for threshold in [0.01, 0.3, 0.6] {
                let got = nms(&boxes, threshold).unwrap();
                let expect = nms_reference(&boxes, threshold);
                assert_eq!(got, expect);
            }
        }
    }

    #[test]
    fn tiling_partitions_4096_into_16() {
        let tiles = tile_split(4096, 4096, 1024);
        assert_eq!(tiles.len(), 16);
        let area: u64 = tiles.iter().map(|t| t.width as u64 * t.height as u64).sum();
        assert_eq!(area, 4096 * 4096);
    }

    #[test]
    fn tiling_truncates_edge_tiles() {
        let tiles = tile_split(100, 70, 32);
        assert_eq!(tiles.len(), 4 * 3);
        assert_eq!(tiles.last().unwrap().width, 100 - 3 * 32);
        assert_eq!(tiles.last().unwrap().height, 70 - 2 * 32);
    }

    #[test]
    fn tile_translation_example() {
        let tile = TileRect {
            x: 1024,
            y: 0,
            width: 1024,
            height: 1024,
        };
        let local = bx(6.0, 10.0, 26.0, 30.0);
        let global = tile_to_global(tile, &local);
        assert_eq!((global.x1, global.y1, global.x2, global.y2), (1030.0, 10.0, 1050.0, 30.0));
        assert_eq!(global_to_tile(tile, &global), local);
    }

    #[test]
    fn split_assigns_by_center_and_clips() {
        let set = AnnotationSet::new(
            "img",
            64,
            64,
            vec![
                bx(2.0, 2.0, 10.0, 10.0),
                // Straddles the vertical boundary at 32 with center in tile 1.
                bx(28.0, 4.0, 44.0, 12.0),
            ],
        )
        .unwrap();
        let tiles = split_annotations(&set, 32);
        assert_eq!(tiles.len(), 4);
        assert_eq!(tiles[0].boxes.len(), 1);
        assert_eq!(tiles[1].boxes.len(), 1);
        let clipped = &tiles[1].boxes[0];
        assert_eq!((clipped.x1, clipped.x2), (0.0, 44.0 - 32.0));
    }

    #[test]
    fn filter_topk_examples() {
        let a = AnnotationSet::new(
            "a",
            100,
            100,
            vec![
                bx(0.0, 0.0, 1.0, 1.0).with_confidence(0.9),
                bx(2.0, 0.0, 3.0, 1.0).with_confidence(0.6),
                bx(4.0, 0.0, 5.0, 1.0).with_confidence(0.4),
            ],
        )
        .unwrap();
        let b = AnnotationSet::new(
            "b",
            100,
            100,
            vec![
                bx(0.0, 0.0, 1.0, 1.0).with_confidence(0.8),
                bx(2.0, 0.0, 3.0, 1.0).with_confidence(0.7),
            ],
        )
        .unwrap();
        let (fa, fb) = filter_topk(&a, &b, 0.5, 100).unwrap();
        assert_eq!((fa.len(), fb.len()), (2, 2));

        let empty = AnnotationSet::new("e", 100, 100, vec![]).unwrap();
        let (fa, fe) = filter_topk(&a, &empty, 0.5, 100).unwrap();
        assert!(fa.is_empty() && fe.is_empty());
    }

    #[test]
    fn filter_topk_caps_at_k() {
        let many = |n: usize, image: &str| {
            AnnotationSet::new(
                image,
                10_000,
                10_000,
                (0..n)
                    .map(|i| {
                        bx(i as f64, 0.0, i as f64 + 1.0, 1.0).with_confidence(0.6 + 0.3 * (i as f64 / n as f64))
                    })
                    .collect(),
            )
            .unwrap()
        };
        let (fa, fb) = filter_topk(&many(150, "a"), &many(120, "b"), 0.5, 100).unwrap();
        assert_eq!((fa.len(), fb.len()), (100, 100));
    }

    #[test]
    fn csv_row_with_xywh_mapping() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "img1,10,20,5,8").unwrap();
        let mapping = SchemaMapping::headerless_xywh(4096, 4096);
        let set = load_annotations(f.path(), &mapping).unwrap();
        assert_eq!(set.image, "img1");
        assert_eq!(set.boxes.len(), 1);
        let b = &set.boxes[0];
        assert_eq!((b.x1, b.y1, b.x2, b.y2), (10.0, 20.0, 15.0, 28.0));
    }

    #[test]
    fn zero_width_row_is_range_error() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "img1,10,20,0,8").unwrap();
        let mapping = SchemaMapping::headerless_xywh(4096, 4096);
        assert!(matches!(
            load_annotations(f.path(), &mapping),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn missing_header_column_is_schema_error() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "scan,x,y").unwrap();
        writeln!(f, "img1,1,2").unwrap();
        let mapping = SchemaMapping {
            has_headers: true,
            image: Some("scan".into()),
            columns: BoxColumns::Xywh {
                x: "x".into(),
                y: "y".into(),
                width: "w".into(),
                height: "h".into(),
            },
            confidence: None,
            track_id: None,
            annotator: None,
            image_width: 100,
            image_height: 100,
        };
        assert!(matches!(
            load_annotation_table(f.path(), &mapping),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn canonical_json_round_trip() {
        let set = AnnotationSet::new(
            "scan_01",
            128,
            128,
            vec![
                bx(1.0, 2.0, 3.0, 4.0).with_confidence(0.75).with_track_id("L3"),
                bx(5.0, 6.0, 9.0, 10.0),
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.json");
        set.save_json(&path).unwrap();
        let back = AnnotationSet::load_json(&path).unwrap();
        assert_eq!(set, back);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("annotator"));
    }
}
