//! Power cells as convex polygons, clipped to a rectangular frame.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{squared_distance, CenterSet, Point2, PowerWeights};

/// Relative tolerance (against the frame diameter) for degenerate edges.
const LENGTH_EPS: f64 = 1e-9;
const FRAME_MARGIN: f64 = 0.05;

/// `{p : normal · (p - anchor) <= offset}`, or one of the degenerate cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Halfplane {
    Le {
        normal: Point2,
        offset: f64,
        anchor: Point2,
    },
    All,
    Empty,
}

impl Halfplane {
    /// Signed slack; nonpositive inside.
    fn slack(&self, p: Point2) -> f64 {
        match *self {
            Halfplane::Le {
                normal,
                offset,
                anchor,
            } => normal.dot(&(p - anchor)) - offset,
            Halfplane::All => f64::NEG_INFINITY,
            Halfplane::Empty => f64::INFINITY,
        }
    }

    pub fn contains(&self, p: Point2, tolerance: f64) -> bool {
        self.slack(p) <= tolerance
    }

    /// The inequality as `a · p <= b`.
    pub fn absolute(&self) -> Option<(Point2, f64)> {
        match *self {
            Halfplane::Le {
                normal,
                offset,
                anchor,
            } => Some((normal, offset + normal.dot(&anchor))),
            _ => None,
        }
    }
}

/// Points weighted-closer to center `i` than to center `j`:
/// `2 (x_j - x_i) · p <= |x_j|² - |x_i|² - w_j + w_i`.
///
/// Coincident centers: the heavier one gets the whole plane and the lighter
/// one nothing; with equal weights the lower index keeps the plane.
pub fn bisector_halfplane(
    i: usize,
    center_i: Point2,
    weight_i: f64,
    j: usize,
    center_j: Point2,
    weight_j: f64,
) -> Halfplane {
    let d = center_j - center_i;
    if d.x == 0.0 && d.y == 0.0 {
        return if weight_i > weight_j || (weight_i == weight_j && i < j) {
            Halfplane::All
        } else {
            Halfplane::Empty
        };
    }
    Halfplane::Le {
        normal: d * 2.0,
        offset: d.norm_squared() - weight_j + weight_i,
        anchor: center_i,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub min: Point2,
    pub max: Point2,
}

impl Frame {
    pub fn new(min: Point2, max: Point2) -> Self {
        Frame { min, max }
    }

    /// Bounding box of `points` grown by 5% of its extent on every side.
    pub fn around(points: impl IntoIterator<Item = Point2>) -> Option<Frame> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let (lo, hi) = iter.fold((first, first), |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        });
        let span = (hi.x - lo.x).max(hi.y - lo.y);
        let pad = if span > 0.0 { span * FRAME_MARGIN } else { 1.0 };
        let pad_x = if hi.x > lo.x { (hi.x - lo.x) * FRAME_MARGIN } else { pad };
        let pad_y = if hi.y > lo.y { (hi.y - lo.y) * FRAME_MARGIN } else { pad };
        Some(Frame {
            min: Point2::new(lo.x - pad_x, lo.y - pad_y),
            max: Point2::new(hi.x + pad_x, hi.y + pad_y),
        })
    }

    pub fn diameter(&self) -> f64 {
        squared_distance(self.min, self.max).sqrt()
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    fn ring(&self) -> Vec<Point2> {
        vec![
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }
}

/// What produced a polygon edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    Frame,
    /// Shared with the cell of this center.
    Bisector(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexCell {
    pub center: usize,
    /// Counterclockwise, first vertex not repeated. Empty for an empty cell.
    pub vertices: Vec<Point2>,
    /// `edges[i]` runs from `vertices[i]` to `vertices[i + 1]` (cyclically).
    pub edges: Vec<EdgeKind>,
    pub clipped: bool,
}

impl ConvexCell {
    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let o = self.vertices[0];
        (1..n - 1)
            .map(|i| cross(self.vertices[i] - o, self.vertices[i + 1] - o))
            .sum::<f64>()
            / 2.0
    }

    /// Closed ring (first vertex repeated at the end).
    pub fn ring(&self) -> Vec<Point2> {
        let mut ring = self.vertices.clone();
        if let Some(&first) = self.vertices.first() {
            ring.push(first);
        }
        ring
    }

    /// Whether `p` lies in the polygon, allowing `tolerance` distance outside.
    pub fn contains(&self, p: Point2, tolerance: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            let len = e.norm_squared().sqrt();
            len == 0.0 || cross(e, p - a) >= -tolerance * len
        })
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return true;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            cross(b - a, c - b) >= -1e-12 * (b - a).norm_squared().max((c - b).norm_squared())
        })
    }

    fn edge_length(&self, i: usize) -> f64 {
        let n = self.vertices.len();
        squared_distance(self.vertices[i], self.vertices[(i + 1) % n]).sqrt()
    }
}

fn cross(a: Point2, b: Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Clips a convex ring against one halfplane, labelling new edges `label`.
fn clip(
    vertices: &[Point2],
    edges: &[EdgeKind],
    half: &Halfplane,
    label: EdgeKind,
    eps: f64,
) -> (Vec<Point2>, Vec<EdgeKind>) {
    match half {
        Halfplane::All => return (vertices.to_vec(), edges.to_vec()),
        Halfplane::Empty => return (Vec::new(), Vec::new()),
        Halfplane::Le { .. } => {}
    }
    let n = vertices.len();
    let mut out_v = Vec::with_capacity(n + 1);
    let mut out_e = Vec::with_capacity(n + 1);
    for i in 0..n {
        let cur = vertices[i];
        let nxt = vertices[(i + 1) % n];
        let sc = half.slack(cur);
        let sn = half.slack(nxt);
        let cur_in = sc <= 0.0;
        let nxt_in = sn <= 0.0;
        if cur_in {
            out_v.push(cur);
            out_e.push(edges[i]);
        }
        if cur_in != nxt_in {
            let t = sc / (sc - sn);
            let hit = cur + (nxt - cur) * t;
            out_v.push(hit);
            out_e.push(if cur_in { label } else { edges[i] });
        }
    }
    dedup_ring(&mut out_v, &mut out_e, eps);
    (out_v, out_e)
}

/// Drops zero-length edges; the surviving vertex keeps the next edge's label.
fn dedup_ring(vertices: &mut Vec<Point2>, edges: &mut Vec<EdgeKind>, eps: f64) {
    let mut i = 0;
    while vertices.len() >= 2 && i < vertices.len() {
        let j = (i + 1) % vertices.len();
        if squared_distance(vertices[i], vertices[j]).sqrt() <= eps {
            edges[i] = edges[j];
            vertices.remove(j);
            edges.remove(j);
            if j < i {
                i -= 1;
            }
        } else {
            i += 1;
        }
    }
    if vertices.len() < 3 {
        vertices.clear();
        edges.clear();
    }
}

/// The power cell of every center inside `frame`.
pub fn compute_cells(centers: &CenterSet, weights: &PowerWeights, frame: &Frame) -> Vec<ConvexCell> {
    let k = centers.k();
    let eps = LENGTH_EPS * frame.diameter();
    let pts = centers.centers();
    (0..k)
        .into_par_iter()
        .map(|i| {
            let mut vertices = frame.ring();
            let mut edges = vec![EdgeKind::Frame; 4];
            for j in (0..k).filter(|&j| j != i) {
                if vertices.is_empty() {
                    break;
                }
                let half = bisector_halfplane(i, pts[i], weights.w[i], j, pts[j], weights.w[j]);
                (vertices, edges) = clip(&vertices, &edges, &half, EdgeKind::Bisector(j), eps);
            }
            let clipped = edges.contains(&EdgeKind::Frame);
            ConvexCell {
                center: i,
                vertices,
                edges,
                clipped,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramStats {
    /// Internal (bisector) sides per cell; 0 for empty cells.
    pub side_counts: Vec<usize>,
    /// Unordered pairs `(i, j)`, `i < j`, sharing an edge of positive length.
    pub adjacency: Vec<(usize, usize)>,
    pub nonempty_cells: usize,
    /// Mean internal side count over nonempty cells.
    pub average_sides: f64,
}

pub fn diagram_stats(cells: &[ConvexCell]) -> DiagramStats {
    let diameter = cells
        .iter()
        .flat_map(|c| c.vertices.iter())
        .fold(None::<(Point2, Point2)>, |acc, &p| {
            Some(match acc {
                None => (p, p),
                Some((lo, hi)) => (
                    Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                    Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
                ),
            })
        })
        .map_or(0.0, |(lo, hi)| squared_distance(lo, hi).sqrt());
    let eps = LENGTH_EPS * diameter;
    let mut adjacency = BTreeSet::new();
    let mut side_counts = Vec::with_capacity(cells.len());
    for cell in cells {
        let mut sides = 0;
        if !cell.is_empty() {
            for (i, edge) in cell.edges.iter().enumerate() {
                if let EdgeKind::Bisector(j) = *edge {
                    if cell.edge_length(i) > eps {
                        sides += 1;
                        adjacency.insert((cell.center.min(j), cell.center.max(j)));
                    }
                }
            }
        }
        side_counts.push(sides);
    }
    let nonempty: Vec<usize> = cells
        .iter()
        .zip(&side_counts)
        .filter(|(c, _)| !c.is_empty())
        .map(|(_, &s)| s)
        .collect();
    let average_sides = if nonempty.is_empty() {
        0.0
    } else {
        nonempty.iter().sum::<usize>() as f64 / nonempty.len() as f64
    };
    DiagramStats {
        side_counts,
        adjacency: adjacency.into_iter().collect(),
        nonempty_cells: nonempty.len(),
        average_sides,
    }
}

/// `d²(p, x_i) - w_i <= d²(p, x_j) - w_j + tolerance` for every `j`.
pub fn point_in_cell(
    p: Point2,
    cell: usize,
    centers: &CenterSet,
    weights: &PowerWeights,
    tolerance: f64,
) -> bool {
    let pts = centers.centers();
    let own = squared_distance(p, pts[cell]) - weights.w[cell];
    pts.iter()
        .zip(&weights.w)
        .all(|(&c, &w)| own <= squared_distance(p, c) - w + tolerance)
}
