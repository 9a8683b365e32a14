//! Axis-aligned rectangle placements and their verification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A rectangle to be placed; `id` is caller-defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub id: u64,
    pub w: i64,
    pub h: i64,
}

impl Rect {
    pub fn new(id: u64, w: i64, h: i64) -> Self {
        Rect { id, w, h }
    }

    pub fn area(&self) -> i64 {
        self.w * self.h
    }
}

/// Bottom-left corners of rectangles inside a `box_w × box_h` box.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeomPlacement {
    pub box_w: i64,
    pub box_h: i64,
    pub positions: BTreeMap<u64, (i64, i64)>,
}

impl GeomPlacement {
    pub fn new(box_w: i64, box_h: i64) -> Self {
        GeomPlacement { box_w, box_h, positions: BTreeMap::new() }
    }

    /// Height actually used: the highest top edge among placed rectangles.
    pub fn used_height(&self, rects: &[Rect]) -> i64 {
        rects.iter().filter_map(|r| self.positions.get(&r.id).map(|&(_, y)| y + r.h)).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeomViolation {
    Missing(u64),
    OutsideBox(u64),
    Overlap(u64, u64),
}

/// Pairwise `O(n²)` check: every rectangle placed, inside the box, and no two
/// with intersecting interiors. Zero-area rectangles never overlap anything.
pub fn verify_placement(rects: &[Rect], placement: &GeomPlacement) -> Result<(), GeomViolation> {
    let mut placed = Vec::with_capacity(rects.len());
    for r in rects {
        let &(x, y) = placement.positions.get(&r.id).ok_or(GeomViolation::Missing(r.id))?;
        if x < 0 || y < 0 || x + r.w > placement.box_w || y + r.h > placement.box_h {
            return Err(GeomViolation::OutsideBox(r.id));
        }
        placed.push((r, x, y));
    }
    for i in 0..placed.len() {
        for j in i + 1..placed.len() {
            let (a, ax, ay) = placed[i];
            let (b, bx, by) = placed[j];
            if ax < bx + b.w && bx < ax + a.w && ay < by + b.h && by < ay + a.h {
                return Err(GeomViolation::Overlap(a.id, b.id));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn touching_is_not_overlap() {
        let rects = [Rect::new(0, 2, 2), Rect::new(1, 2, 2)];
        let mut p = GeomPlacement::new(4, 2);
        p.positions.insert(0, (0, 0));
        p.positions.insert(1, (2, 0));
        assert_eq!(verify_placement(&rects, &p), Ok(()));
        p.positions.insert(1, (1, 1));
        p.box_h = 3;
        assert_eq!(verify_placement(&rects, &p), Err(GeomViolation::Overlap(0, 1)));
    }

    #[test]
    fn containment_is_checked() {
        let rects = [Rect::new(0, 3, 1)];
        let mut p = GeomPlacement::new(2, 5);
        p.positions.insert(0, (0, 0));
        assert_eq!(verify_placement(&rects, &p), Err(GeomViolation::OutsideBox(0)));
        assert_eq!(verify_placement(&rects, &GeomPlacement::new(9, 9)), Err(GeomViolation::Missing(0)));
    }
}
