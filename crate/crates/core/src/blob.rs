//! Classical multi-scale blob detector for dark lesions on light skin.
//!
//! A desk-scale stand-in for a learned detector: center-surround
//! (difference-of-box-means) responses on a darkness map, local maxima per
//! scale, confidence normalized per image, then NMS at IoU 0.01. External
//! detector output enters the pipeline through annotation files instead.

use image::RgbImage;

use crate::bbox::{nms, AnnotationSet, BoundingBox2D};

/// IoU threshold used to deduplicate detections across scales.
pub const DETECTION_NMS_IOU: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct BlobConfig {
    /// Blob radii in pixels to probe.
    pub scales: Vec<u32>,
    /// Minimum raw center-surround contrast (darkness units in [0,1]).
    pub response_threshold: f64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        // Radii spanning the typical annotated lesion size (~22 px boxes).
        BlobConfig {
            scales: vec![2, 4, 8, 16],
            response_threshold: 0.08,
        }
    }
}

/// Rec. 601 luma in [0,1].
pub fn luminance(pixel: &image::Rgb<u8>) -> f64 {
    let [r, g, b] = pixel.0;
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
}

/// Summed-area table over a scalar map, with clamped rectangle queries.
struct Integral {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Integral {
    fn new(map: &[f64], width: usize, height: usize) -> Self {
        let mut data = vec![0.0; (width + 1) * (height + 1)];
        for y in 0..height {
            let mut row = 0.0;
            for x in 0..width {
                row += map[y * width + x];
                data[(y + 1) * (width + 1) + (x + 1)] = data[y * (width + 1) + (x + 1)] + row;
            }
        }
        Integral {
            width,
            height,
            data,
        }
    }

    /// Sum over `[x0, x1) x [y0, y1)`, clamped to the map.
    fn sum(&self, x0: i64, y0: i64, x1: i64, y1: i64) -> (f64, f64) {
        let x0 = x0.clamp(0, self.width as i64) as usize;
        let y0 = y0.clamp(0, self.height as i64) as usize;
        let x1 = x1.clamp(0, self.width as i64) as usize;
        let y1 = y1.clamp(0, self.height as i64) as usize;
        if x0 >= x1 || y0 >= y1 {
            return (0.0, 0.0);
        }
        let w = self.width + 1;
        let s = self.data[y1 * w + x1] - self.data[y0 * w + x1] - self.data[y1 * w + x0]
            + self.data[y0 * w + x0];
        (s, ((x1 - x0) * (y1 - y0)) as f64)
    }
}

/// Detect dark blobs in a texture image.
///
/// Returns one box per response maximum that survives suppression; an empty
/// set is a valid outcome.
pub fn detect_blobs(texture: &RgbImage, image_id: &str, config: &BlobConfig) -> AnnotationSet {
    let (width, height) = (texture.width() as usize, texture.height() as usize);
    let empty = AnnotationSet {
        image: image_id.to_string(),
        width: width as u32,
        height: height as u32,
        boxes: Vec::new(),
    };
    if width == 0 || height == 0 || config.scales.is_empty() {
        return empty;
    }

    let darkness: Vec<f64> = texture.pixels().map(|p| 1.0 - luminance(p)).collect();
    let integral = Integral::new(&darkness, width, height);

    // (response, x, y, radius) per surviving local maximum.
    let mut candidates: Vec<(f64, usize, usize, u32)> = Vec::new();
    for &radius in &config.scales {
        let r = radius as i64;
        let mut response = vec![0.0_f64; width * height];
        for y in 0..height {
            for x in 0..width {
                let (cx, cy) = (x as i64, y as i64);
                let (inner_sum, inner_area) = integral.sum(cx - r, cy - r, cx + r + 1, cy + r + 1);
                let (outer_sum, outer_area) =
                    integral.sum(cx - 3 * r, cy - 3 * r, cx + 3 * r + 1, cy + 3 * r + 1);
                let ring_sum = outer_sum - inner_sum;
                let ring_area = outer_area - inner_area;
                if inner_area > 0.0 && ring_area > 0.0 {
                    response[y * width + x] = inner_sum / inner_area - ring_sum / ring_area;
                }
            }
        }
        for y in 0..height {
            for x in 0..width {
                let v = response[y * width + x];
                if v < config.response_threshold {
                    continue;
                }
                let mut is_max = true;
                'scan: for dy in -1_i64..=1 {
                    for dx in -1_i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                            continue;
                        }
                        if response[ny as usize * width + nx as usize] > v {
                            is_max = false;
                            break 'scan;
                        }
                    }
                }
                if is_max {
                    candidates.push((v, x, y, radius));
                }
            }
        }
    }

    if candidates.is_empty() {
        return empty;
    }
    let max_response = candidates
        .iter()
        .map(|c| c.0)
        .fold(f64::NEG_INFINITY, f64::max);

    let boxes: Vec<BoundingBox2D> = candidates
        .into_iter()
        .map(|(resp, x, y, radius)| {
            let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
            let s = radius as f64;
            BoundingBox2D::new(
                (cx - s).max(0.0),
                (cy - s).max(0.0),
                (cx + s).min(width as f64),
                (cy + s).min(height as f64),
            )
            .with_confidence(resp / max_response)
        })
        .collect();

    let kept = nms(&boxes, DETECTION_NMS_IOU).expect("detector boxes carry confidence");
    AnnotationSet {
        image: image_id.to_string(),
        width: width as u32,
        height: height as u32,
        boxes: kept,
    }
}
