//! Points, windows, boxes and exact nearest-neighbour queries.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};

/// A 2-D location in working units (meters once scaled).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Euclidean distance. Every distance in the crate goes through this
/// expression so brute-force checks reproduce indexed results bit for bit.
#[inline]
pub fn euclidean_distance(a: Point, b: Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Axis-aligned rectangular observation window with positive area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl Window {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return invalid("window bounds must be finite");
        }
        if !(x_min < x_max && y_min < y_max) {
            return invalid(format!(
                "window [{x_min}, {x_max}] x [{y_min}, {y_max}] has no area"
            ));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Smallest window containing every point. Fails when the points are
    /// collinear along an axis (zero area) or the slice is empty.
    pub fn bounding(points: &[Point]) -> Result<Self> {
        let Some(first) = points.first() else {
            return invalid("cannot bound an empty point set");
        };
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Self::new(x0, y0, x1, y1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Closed containment: boundary points are inside.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// One uniform draw over the window.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        Point::new(
            self.x_min + u * self.width(),
            self.y_min + v * self.height(),
        )
    }
}

/// A finite set of events observed inside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    window: Window,
    points: Vec<Point>,
}

impl PointPattern {
    pub fn new(window: Window, points: Vec<Point>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return invalid(format!("point {i} has a non-finite coordinate"));
            }
            if !window.contains(*p) {
                return invalid(format!(
                    "point {i} ({}, {}) lies outside the window",
                    p.x, p.y
                ));
            }
        }
        Ok(Self { window, points })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Axis-aligned bounding box with a detector confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub confidence: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, confidence: f64) -> Result<Self> {
        if ![x_min, y_min, x_max, y_max, confidence]
            .iter()
            .all(|v| v.is_finite())
        {
            return invalid("box coordinates and confidence must be finite");
        }
        if !(x_min < x_max && y_min < y_max) {
            return invalid(format!(
                "box [{x_min}, {y_min}, {x_max}, {y_max}] is degenerate"
            ));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return invalid(format!("confidence {confidence} outside [0, 1]"));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
            confidence,
        })
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn center(&self) -> Point {
        Point::new(
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
            confidence: self.confidence,
        }
    }
}

/// Intersection over union. Symmetric in its arguments.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let w = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let h = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    // The union is at least as large as either box, so it is never zero.
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Uniform bucket grid over a point set, answering exact k-nearest
/// queries by scanning square rings of cells outward from the query.
#[derive(Debug, Clone)]
pub struct GridIndex<'a> {
    points: &'a [Point],
    x0: f64,
    y0: f64,
    cell: f64,
    cols: usize,
    rows: usize,
    starts: Vec<usize>,
    slots: Vec<usize>,
}

const TARGET_PER_CELL: f64 = 2.0;

impl<'a> GridIndex<'a> {
    /// Builds the index. `points` must be non-empty and finite.
    pub fn new(points: &'a [Point]) -> Self {
        assert!(!points.is_empty(), "GridIndex needs at least one point");
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let span = (x1 - x0).max(y1 - y0);
        let extent_area = ((x1 - x0).max(span * 1e-3)) * ((y1 - y0).max(span * 1e-3));
        let mut cell = (extent_area * TARGET_PER_CELL / points.len() as f64).sqrt();
        if !(cell.is_finite() && cell > 0.0) {
            cell = 1.0;
        }
        let max_cells_per_axis = 4096.0;
        cell = cell
            .max((x1 - x0) / max_cells_per_axis)
            .max((y1 - y0) / max_cells_per_axis);
        let cols = ((x1 - x0) / cell).floor() as usize + 1;
        let rows = ((y1 - y0) / cell).floor() as usize + 1;

        let mut counts = vec![0usize; cols * rows + 1];
        let cell_of: Vec<usize> = points
            .iter()
            .map(|p| {
                let c = (((p.x - x0) / cell) as usize).min(cols - 1);
                let r = (((p.y - y0) / cell) as usize).min(rows - 1);
                r * cols + c
            })
            .collect();
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut slots = vec![0usize; points.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            slots[fill[c]] = i;
            fill[c] += 1;
        }
        Self {
            points,
            x0,
            y0,
            cell,
            cols,
            rows,
            starts,
            slots,
        }
    }

    fn cell_coord(&self, v: f64, origin: f64, n: usize) -> isize {
        let c = ((v - origin) / self.cell).floor();
        c.clamp(-1.0, n as f64) as isize
    }

    /// The `k` smallest distances from `query` to indexed points, ascending,
    /// skipping the point at index `exclude` if given. Returns fewer than
    /// `k` values only when the index holds fewer candidates.
    pub fn k_nearest(&self, query: Point, k: usize, exclude: Option<usize>) -> Vec<f64> {
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        if k == 0 {
            return best;
        }
        let qc = self.cell_coord(query.x, self.x0, self.cols);
        let qr = self.cell_coord(query.y, self.y0, self.rows);
        let max_ring = {
            let dc = qc.max(self.cols as isize - 1 - qc).max(0);
            let dr = qr.max(self.rows as isize - 1 - qr).max(0);
            dc.max(dr) as usize
        };
        for ring in 0..=max_ring {
            let ring_i = ring as isize;
            for r in (qr - ring_i)..=(qr + ring_i) {
                if r < 0 || r >= self.rows as isize {
                    continue;
                }
                let on_edge_row = r == qr - ring_i || r == qr + ring_i;
                let step = if on_edge_row || ring == 0 {
                    1
                } else {
                    2 * ring_i
                };
                let mut c = qc - ring_i;
                while c <= qc + ring_i {
                    if c >= 0 && c < self.cols as isize {
                        let cell = r as usize * self.cols + c as usize;
                        for &idx in &self.slots[self.starts[cell]..self.starts[cell + 1]] {
                            if Some(idx) == exclude {
                                continue;
                            }
                            let d = euclidean_distance(query, self.points[idx]);
                            if best.len() < k || d < best[k - 1] {
                                let pos = best.partition_point(|&b| b <= d);
                                best.insert(pos, d);
                                best.truncate(k);
                            }
                        }
                    }
                    c += step;
                }
            }
            if best.len() == k {
                // Lower bound on the distance to any cell outside the rings
                // scanned so far.
                let bx0 = self.x0 + (qc - ring_i) as f64 * self.cell;
                let bx1 = self.x0 + (qc + ring_i + 1) as f64 * self.cell;
                let by0 = self.y0 + (qr - ring_i) as f64 * self.cell;
                let by1 = self.y0 + (qr + ring_i + 1) as f64 * self.cell;
                let bound = (query.x - bx0)
                    .min(bx1 - query.x)
                    .min(query.y - by0)
                    .min(by1 - query.y)
                    - self.cell * 1e-9;
                if best[k - 1] <= bound {
                    break;
                }
            }
        }
        best
    }

    /// Distance from `query` to the closest indexed point.
    pub fn nearest(&self, query: Point) -> f64 {
        self.k_nearest(query, 1, None)[0]
    }
}

/// For every point, its `k` smallest distances to the other points,
/// ascending. Exact; coincident points contribute zero distances.
pub fn nearest_neighbor_distances(pattern: &PointPattern, k: usize) -> Result<Vec<Vec<f64>>> {
    let n = pattern.len();
    if n < 2 {
        return invalid(format!(
            "nearest neighbours need at least 2 points, got {n}"
        ));
    }
    if k == 0 || k > n - 1 {
        return invalid(format!("k must be in 1..={}, got {k}", n - 1));
    }
    let pts = pattern.points();
    let index = GridIndex::new(pts);
    Ok(pts
        .par_iter()
        .enumerate()
        .map(|(i, &p)| index.k_nearest(p, k, Some(i)))
        .collect())
}
