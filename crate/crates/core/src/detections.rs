//! Detector post-processing: tile-to-mosaic coordinates, duplicate
//! suppression across overlapping tiles, box centres, and counting accuracy
//! against labelled centres.
//!
//! Tiles are indexed so that x grows with the column and y with the row.

use crate::error::{invalid, Result};
use crate::geometry::{euclidean_distance, iou, BBox, Point};
use crate::ripley::{mean, median, sample_std};

pub const DEFAULT_PATCH_SIZE: u32 = 800;
pub const DEFAULT_STRIDE: u32 = 400;
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
/// Matching radius in meters.
pub const DEFAULT_MATCH_RADIUS: f64 = 5.0;

/// Square tiling of a large image into overlapping patches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileLayout {
    patch_size: u32,
    stride: u32,
    origin: Point,
}

impl TileLayout {
    pub fn new(patch_size: u32, stride: u32, origin: Point) -> Result<Self> {
        if patch_size == 0 || stride == 0 {
            return invalid("patch size and stride must be positive");
        }
        if stride > patch_size {
            return invalid(format!(
                "stride {stride} exceeds patch size {patch_size}, tiles would leave gaps"
            ));
        }
        if !origin.is_finite() {
            return invalid("tile origin must be finite");
        }
        Ok(Self {
            patch_size,
            stride,
            origin,
        })
    }

    pub fn patch_size(&self) -> u32 {
        self.patch_size
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    fn offset(&self, tile_row: u32, tile_col: u32) -> (f64, f64) {
        (
            self.origin.x + f64::from(tile_col) * f64::from(self.stride),
            self.origin.y + f64::from(tile_row) * f64::from(self.stride),
        )
    }
}

impl Default for TileLayout {
    fn default() -> Self {
        Self {
            patch_size: DEFAULT_PATCH_SIZE,
            stride: DEFAULT_STRIDE,
            origin: Point::new(0.0, 0.0),
        }
    }
}

/// Moves a patch-local box into global image coordinates.
pub fn to_global(layout: &TileLayout, tile_row: u32, tile_col: u32, bbox: &BBox) -> BBox {
    let (dx, dy) = layout.offset(tile_row, tile_col);
    bbox.translate(dx, dy)
}

/// Inverse of [`to_global`].
pub fn to_local(layout: &TileLayout, tile_row: u32, tile_col: u32, bbox: &BBox) -> BBox {
    let (dx, dy) = layout.offset(tile_row, tile_col);
    bbox.translate(-dx, -dy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileBox {
    pub tile_row: u32,
    pub tile_col: u32,
    pub bbox: BBox,
}

/// Detector output, either per tile or already in global coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    layout: Option<TileLayout>,
    boxes: Vec<TileBox>,
}

impl DetectionSet {
    /// Tiled detections. Each box must fit inside its patch.
    pub fn tiled(layout: TileLayout, boxes: Vec<TileBox>) -> Result<Self> {
        let size = f64::from(layout.patch_size);
        for (i, b) in boxes.iter().enumerate() {
            let bb = &b.bbox;
            if bb.x_min < 0.0 || bb.y_min < 0.0 || bb.x_max > size || bb.y_max > size {
                return invalid(format!(
                    "detection {i} does not fit in its {size}x{size} patch"
                ));
            }
        }
        Ok(Self {
            layout: Some(layout),
            boxes,
        })
    }

    pub fn global(boxes: Vec<BBox>) -> Self {
        Self {
            layout: None,
            boxes: boxes
                .into_iter()
                .map(|bbox| TileBox {
                    tile_row: 0,
                    tile_col: 0,
                    bbox,
                })
                .collect(),
        }
    }

    pub fn layout(&self) -> Option<&TileLayout> {
        self.layout.as_ref()
    }

    pub fn boxes(&self) -> &[TileBox] {
        &self.boxes
    }

    /// Every box in global coordinates, input order preserved.
    pub fn to_global_boxes(&self) -> Vec<BBox> {
        match &self.layout {
            Some(layout) => self
                .boxes
                .iter()
                .map(|b| to_global(layout, b.tile_row, b.tile_col, &b.bbox))
                .collect(),
            None => self.boxes.iter().map(|b| b.bbox).collect(),
        }
    }
}

/// Greedy non-maximum suppression.
///
/// Boxes are visited by descending confidence (input order breaks ties);
/// a box is kept when its IoU with every box kept so far is below
/// `iou_threshold`. Kept boxes are returned in visiting order.
pub fn merge_nms(boxes: &[BBox], iou_threshold: f64) -> Result<Vec<BBox>> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return invalid(format!(
            "IoU threshold must lie in (0, 1], got {iou_threshold}"
        ));
    }
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    // stable sort keeps input order among equal confidences
    order.sort_by(|&a, &b| boxes[b].confidence.total_cmp(&boxes[a].confidence));
    let mut kept: Vec<BBox> = Vec::new();
    for i in order {
        let candidate = &boxes[i];
        if kept.iter().all(|k| iou(k, candidate) < iou_threshold) {
            kept.push(*candidate);
        }
    }
    Ok(kept)
}

pub fn centers(boxes: &[BBox]) -> Vec<Point> {
    boxes.iter().map(BBox::center).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub detected_index: usize,
    pub labeled_index: usize,
    pub detected: Point,
    pub labeled: Point,
    pub distance: f64,
}

/// One-to-one matching of detected to labelled centres.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    pub radius: f64,
    /// In matching order (ascending distance).
    pub matched: Vec<Match>,
    pub n_labeled: usize,
    pub n_detected: usize,
    /// matched / labelled; `None` without labels.
    pub accuracy: Option<f64>,
    /// matched / detected; `None` without detections.
    pub detected_rate: Option<f64>,
    pub shift_mean: Option<f64>,
    pub shift_median: Option<f64>,
    /// Sample standard deviation; needs at least two matches.
    pub shift_std: Option<f64>,
}

/// Greedy nearest-first matching within `radius`.
///
/// All pairs no farther apart than `radius` are ranked by distance, then by
/// labelled index, then by detected index, and accepted while neither end
/// is already used.
pub fn match_counts(detected: &[Point], labeled: &[Point], radius: f64) -> Result<MatchReport> {
    if !(radius.is_finite() && radius > 0.0) {
        return invalid(format!("matching radius must be positive, got {radius}"));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (li, &l) in labeled.iter().enumerate() {
        for (di, &d) in detected.iter().enumerate() {
            let dist = euclidean_distance(d, l);
            if dist <= radius {
                pairs.push((dist, li, di));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut labeled_used = vec![false; labeled.len()];
    let mut detected_used = vec![false; detected.len()];
    let mut matched = Vec::new();
    for (distance, li, di) in pairs {
        if labeled_used[li] || detected_used[di] {
            continue;
        }
        labeled_used[li] = true;
        detected_used[di] = true;
        matched.push(Match {
            detected_index: di,
            labeled_index: li,
            detected: detected[di],
            labeled: labeled[li],
            distance,
        });
    }

    let shifts: Vec<f64> = matched.iter().map(|m| m.distance).collect();
    let ratio = |den: usize| (den > 0).then(|| matched.len() as f64 / den as f64);
    Ok(MatchReport {
        radius,
        n_labeled: labeled.len(),
        n_detected: detected.len(),
        accuracy: ratio(labeled.len()),
        detected_rate: ratio(detected.len()),
        shift_mean: (!shifts.is_empty()).then(|| mean(&shifts)),
        shift_median: (!shifts.is_empty()).then(|| median(&shifts)),
        shift_std: (shifts.len() >= 2).then(|| sample_std(&shifts)),
        matched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64, c: f64) -> BBox {
        BBox::new(x0, y0, x1, y1, c).unwrap()
    }

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn layout_validation() {
        let o = Point::new(0.0, 0.0);
        assert!(TileLayout::new(800, 0, o).is_err());
        assert!(TileLayout::new(400, 800, o).is_err());
        assert!(TileLayout::new(800, 800, o).is_ok());
        let d = TileLayout::default();
        assert_eq!((d.patch_size(), d.stride()), (800, 400));
    }

    #[test]
    fn global_offsets() {
        let layout = TileLayout::default();
        let local = b(10.0, 20.0, 100.0, 120.0, 0.7);
        assert_eq!(to_global(&layout, 0, 0, &local), local);
        let g = to_global(&layout, 2, 1, &local);
        assert_eq!(g, b(410.0, 820.0, 500.0, 920.0, 0.7));
        assert_eq!(to_local(&layout, 2, 1, &g), local);

        let shifted = TileLayout::new(800, 400, Point::new(-5.0, 7.0)).unwrap();
        assert_eq!(
            to_global(&shifted, 0, 0, &local),
            b(5.0, 27.0, 95.0, 127.0, 0.7)
        );
    }

    #[test]
    fn detection_set_checks_patch_extent() {
        let layout = TileLayout::default();
        let ok = TileBox {
            tile_row: 1,
            tile_col: 0,
            bbox: b(700.0, 0.0, 800.0, 50.0, 0.9),
        };
        let bad = TileBox {
            tile_row: 0,
            tile_col: 0,
            bbox: b(700.0, 0.0, 801.0, 50.0, 0.9),
        };
        let set = DetectionSet::tiled(layout, vec![ok]).unwrap();
        assert_eq!(
            set.to_global_boxes(),
            vec![b(700.0, 400.0, 800.0, 450.0, 0.9)]
        );
        assert!(DetectionSet::tiled(layout, vec![ok, bad]).is_err());
        let global = DetectionSet::global(vec![ok.bbox]);
        assert!(global.layout().is_none());
        assert_eq!(global.to_global_boxes(), vec![ok.bbox]);
    }

    #[test]
    fn nms_examples() {
        let kept = merge_nms(
            &[b(0.0, 0.0, 1.0, 1.0, 0.8), b(0.0, 0.0, 1.0, 1.0, 0.9)],
            0.5,
        )
        .unwrap();
        assert_eq!(kept, vec![b(0.0, 0.0, 1.0, 1.0, 0.9)]);
        let two = [b(0.0, 0.0, 2.0, 2.0, 0.5), b(1.0, 1.0, 3.0, 3.0, 0.6)];
        let kept = merge_nms(&two, 0.5).unwrap();
        assert_eq!(kept, vec![two[1], two[0]]);
        // 1/7 is not below a 1/7 threshold
        assert_eq!(merge_nms(&two, 1.0 / 7.0).unwrap(), vec![two[1]]);
        assert!(merge_nms(&two, 0.0).is_err());
        assert!(merge_nms(&[], 0.5).unwrap().is_empty());
    }

    #[test]
    fn nms_ties_keep_earlier_box() {
        let a = b(0.0, 0.0, 1.0, 1.0, 0.9);
        let c = b(0.05, 0.0, 1.05, 1.0, 0.9);
        assert_eq!(merge_nms(&[a, c], 0.5).unwrap(), vec![a]);
        assert_eq!(merge_nms(&[c, a], 0.5).unwrap(), vec![c]);
    }

    #[test]
    fn center_examples() {
        let c = centers(&[
            b(0.0, 0.0, 2.0, 2.0, 0.1),
            b(-1.0, -1.0, 1.0, 1.0, 0.1),
            b(410.0, 820.0, 500.0, 920.0, 0.1),
        ]);
        assert_eq!(c, pts(&[(1.0, 1.0), (0.0, 0.0), (455.0, 870.0)]));
    }

    #[test]
    fn perfect_detection() {
        let l = pts(&[(0.0, 0.0), (10.0, 10.0), (20.0, 0.0)]);
        let r = match_counts(&l, &l, 5.0).unwrap();
        assert_eq!(r.accuracy, Some(1.0));
        assert_eq!(
            (r.shift_mean, r.shift_median, r.shift_std),
            (Some(0.0), Some(0.0), Some(0.0))
        );
    }

    #[test]
    fn partial_detection() {
        let l = pts(&[(0.0, 0.0), (10.0, 10.0)]);
        let d = pts(&[(1.0, 0.0), (50.0, 50.0)]);
        let r = match_counts(&d, &l, 5.0).unwrap();
        assert_eq!(r.accuracy, Some(0.5));
        assert_eq!(r.detected_rate, Some(0.5));
        assert_eq!(r.shift_mean, Some(1.0));
        assert_eq!(r.shift_std, None);
    }

    #[test]
    fn equidistant_tie_goes_to_lower_labeled_index() {
        let l = pts(&[(0.0, 0.0), (6.0, 0.0)]);
        let r = match_counts(&pts(&[(3.0, 0.0)]), &l, 5.0).unwrap();
        assert_eq!(r.matched.len(), 1);
        assert_eq!(r.matched[0].labeled_index, 0);
        assert_eq!(r.accuracy, Some(0.5));
    }

    #[test]
    fn no_labels_flags_accuracy() {
        let r = match_counts(&pts(&[(0.0, 0.0)]), &[], 5.0).unwrap();
        assert_eq!(r.accuracy, None);
        assert_eq!(r.n_detected, 1);
        assert!(match_counts(&[], &[], -1.0).is_err());
    }

    #[test]
    fn radius_is_inclusive() {
        let r = match_counts(&pts(&[(5.0, 0.0)]), &pts(&[(0.0, 0.0)]), 5.0).unwrap();
        assert_eq!(r.accuracy, Some(1.0));
    }

    fn arb_pts() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..40.0, 0.0f64..40.0), 0..30)
    }

    proptest! {
        #[test]
        fn matching_invariants(d in arb_pts(), l in arb_pts(), radius in 0.5f64..10.0) {
            let (d, l) = (pts(&d), pts(&l));
            let r = match_counts(&d, &l, radius).unwrap();
            let mut seen_d = std::collections::HashSet::new();
            let mut seen_l = std::collections::HashSet::new();
            for m in &r.matched {
                prop_assert!(m.distance <= radius);
                prop_assert!(seen_d.insert(m.detected_index));
                prop_assert!(seen_l.insert(m.labeled_index));
            }
            if let Some(acc) = r.accuracy {
                prop_assert_eq!(acc, r.matched.len() as f64 / l.len() as f64);
                prop_assert!(acc <= d.len().min(l.len()) as f64 / l.len() as f64);
            }
            if let Some(m) = r.shift_mean {
                prop_assert!((0.0..=radius).contains(&m));
            }
        }

        #[test]
        fn matching_total_ignores_input_order(d in arb_pts(), l in arb_pts(), rot in 0usize..30) {
            // Distinct random reals make distance ties vanishingly unlikely,
            // so the greedy matching is a function of the point sets.
            let (d, l) = (pts(&d), pts(&l));
            let total = |r: &MatchReport| r.matched.iter().map(|m| m.distance).sum::<f64>();
            let base = match_counts(&d, &l, 5.0).unwrap();
            let mut d2 = d.clone();
            let mut l2 = l.clone();
            d2.reverse();
            if !l2.is_empty() {
                let k = rot % l2.len();
                l2.rotate_left(k);
            }
            let other = match_counts(&d2, &l2, 5.0).unwrap();
            prop_assert_eq!(base.matched.len(), other.matched.len());
            prop_assert!((total(&base) - total(&other)).abs() <= 1e-9);
        }

        #[test]
        fn nms_output_is_subset_without_overlaps(
            raw in prop::collection::vec((0.0f64..50.0, 0.0f64..50.0, 1.0f64..15.0, 1.0f64..15.0, 0.0f64..=1.0), 0..40),
            thr in 0.05f64..=1.0,
        ) {
            let boxes: Vec<BBox> = raw.iter().map(|&(x, y, w, h, c)| b(x, y, x + w, y + h, c)).collect();
            let kept = merge_nms(&boxes, thr).unwrap();
            for k in &kept {
                prop_assert!(boxes.contains(k));
            }
            for i in 0..kept.len() {
                for j in (i + 1)..kept.len() {
                    prop_assert!(iou(&kept[i], &kept[j]) < thr);
                }
            }
        }
    }
}
