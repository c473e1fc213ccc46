//! Planar geometry and the lattice that every grid in the system is cut from.
//!
//! All grids (the partitioner's split lattice, the dispatcher's grid, the
//! workers' per-cell index) are derived from one [`SpaceFrame`]. Coordinates
//! are first normalised into `[0, 1]` and then scaled by a power of two, which
//! is exact in floating point. A point therefore lands in the same cell at
//! every level, and a coarse cell is always the union of its finer children.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        GeoPoint { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle. Containment is boundary-inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rect {
    pub min: GeoPoint,
    pub max: GeoPoint,
}

impl Rect {
    /// Builds a rectangle, swapping coordinates so that `min <= max` holds.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect {
            min: GeoPoint::new(x0.min(x1), y0.min(y1)),
            max: GeoPoint::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn square(center: GeoPoint, side: f64) -> Self {
        let h = side / 2.0;
        Rect::new(center.x - h, center.y - h, center.x + h, center.y + h)
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min.x <= self.max.x && self.min.y <= self.max.y
    }

    pub fn expand_to(&mut self, p: &GeoPoint) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, other: &Rect) -> Rect {
        let mut r = *self;
        r.expand_to(&other.min);
        r.expand_to(&other.max);
        r
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.min.x, self.min.y, self.max.x, self.max.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

/// Half-open range of lattice cells `[x0, x1) x [y0, y1)` at some level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellRange {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl CellRange {
    pub fn full(level: u32) -> Self {
        let n = 1u32 << level;
        CellRange { x0: 0, y0: 0, x1: n, y1: n }
    }

    pub fn lo(&self, axis: Axis) -> u32 {
        match axis {
            Axis::X => self.x0,
            Axis::Y => self.y0,
        }
    }

    pub fn hi(&self, axis: Axis) -> u32 {
        match axis {
            Axis::X => self.x1,
            Axis::Y => self.y1,
        }
    }

    pub fn extent(&self, axis: Axis) -> u32 {
        self.hi(axis) - self.lo(axis)
    }

    pub fn cell_count(&self) -> u64 {
        self.extent(Axis::X) as u64 * self.extent(Axis::Y) as u64
    }

    /// Splits at lattice index `at` along `axis`; `at` must lie strictly inside.
    pub fn split(&self, axis: Axis, at: u32) -> (CellRange, CellRange) {
        debug_assert!(at > self.lo(axis) && at < self.hi(axis));
        let mut left = *self;
        let mut right = *self;
        match axis {
            Axis::X => {
                left.x1 = at;
                right.x0 = at;
            }
            Axis::Y => {
                left.y1 = at;
                right.y0 = at;
            }
        }
        (left, right)
    }

    pub fn contains_cell(&self, ix: u32, iy: u32) -> bool {
        ix >= self.x0 && ix < self.x1 && iy >= self.y0 && iy < self.y1
    }

    /// Inclusive cell bounds (as returned by [`SpaceFrame::cells_of_rect`]) overlap this range.
    pub fn overlaps_inclusive(&self, span: &CellSpan) -> bool {
        span.x0 < self.x1 && span.x1 >= self.x0 && span.y0 < self.y1 && span.y1 >= self.y0
    }
}

/// Inclusive range of cells `[x0, x1] x [y0, y1]` touched by a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellSpan {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl CellSpan {
    pub fn lo(&self, axis: Axis) -> u32 {
        match axis {
            Axis::X => self.x0,
            Axis::Y => self.y0,
        }
    }

    pub fn hi(&self, axis: Axis) -> u32 {
        match axis {
            Axis::X => self.x1,
            Axis::Y => self.y1,
        }
    }

    pub fn cell_count(&self) -> u64 {
        (self.x1 - self.x0 + 1) as u64 * (self.y1 - self.y0 + 1) as u64
    }

    pub fn cells(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| (x, y)))
    }

    /// Coarsens a span from `from` level down to `to` level (`to <= from`).
    pub fn coarsen(&self, from: u32, to: u32) -> CellSpan {
        let s = from - to;
        CellSpan { x0: self.x0 >> s, y0: self.y0 >> s, x1: self.x1 >> s, y1: self.y1 >> s }
    }
}

/// The reference extent of a run. Points outside it are clamped to the border cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceFrame {
    pub bounds: Rect,
}

pub const MAX_LEVEL: u32 = 10;

impl SpaceFrame {
    pub fn new(bounds: Rect) -> Self {
        let mut bounds = bounds;
        // a degenerate extent would divide by zero when normalising
        if bounds.width() <= 0.0 {
            bounds.max.x = bounds.min.x + 1.0;
        }
        if bounds.height() <= 0.0 {
            bounds.max.y = bounds.min.y + 1.0;
        }
        SpaceFrame { bounds }
    }

    fn norm(v: f64, lo: f64, hi: f64) -> f64 {
        let u = (v - lo) / (hi - lo);
        if u.is_nan() {
            0.0
        } else {
            u
        }
    }

    fn index(u: f64, level: u32) -> u32 {
        let n = 1u32 << level;
        let scaled = (u * n as f64).floor();
        if scaled < 0.0 {
            0
        } else if scaled >= n as f64 {
            n - 1
        } else {
            scaled as u32
        }
    }

    pub fn cell_index(&self, axis: Axis, v: f64, level: u32) -> u32 {
        let u = match axis {
            Axis::X => Self::norm(v, self.bounds.min.x, self.bounds.max.x),
            Axis::Y => Self::norm(v, self.bounds.min.y, self.bounds.max.y),
        };
        Self::index(u, level)
    }

    pub fn cell_of(&self, p: &GeoPoint, level: u32) -> (u32, u32) {
        (self.cell_index(Axis::X, p.x, level), self.cell_index(Axis::Y, p.y, level))
    }

    pub fn cells_of_rect(&self, r: &Rect, level: u32) -> CellSpan {
        let (x0, y0) = self.cell_of(&r.min, level);
        let (x1, y1) = self.cell_of(&r.max, level);
        CellSpan { x0, y0, x1, y1 }
    }

    /// Coordinate of lattice line `i` along `axis` at `level`.
    pub fn line(&self, axis: Axis, i: u32, level: u32) -> f64 {
        let frac = i as f64 / (1u64 << level) as f64;
        match axis {
            Axis::X => self.bounds.min.x + frac * self.bounds.width(),
            Axis::Y => self.bounds.min.y + frac * self.bounds.height(),
        }
    }

    pub fn range_rect(&self, r: &CellRange, level: u32) -> Rect {
        Rect::new(
            self.line(Axis::X, r.x0, level),
            self.line(Axis::Y, r.y0, level),
            self.line(Axis::X, r.x1, level),
            self.line(Axis::Y, r.y1, level),
        )
    }
}
