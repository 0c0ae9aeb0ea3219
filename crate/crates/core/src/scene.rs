//! Synthetic stroke scenes: outline rasterization, random contour ablation
//! and filled ground truth.

use std::f64::consts::TAU;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::point_in_polygon;
use crate::grid::{Grid, Pixel};
use crate::stroke::SubStroke;

/// Largest fraction of an outline that may be removed.
pub const MAX_ABLATION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Circle { cx: f64, cy: f64, r: f64 },
    /// Axis-aligned rectangle between two corners.
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Closed polygon.
    Polygon(Vec<(f64, f64)>),
    /// Radially modulated circle `r (1 + amp cos(lobes t + phase))`.
    Blob {
        cx: f64,
        cy: f64,
        r: f64,
        amp: f64,
        lobes: u32,
        phase: f64,
    },
}

impl Shape {
    /// Closed outline as polygon vertices.
    pub fn outline(&self) -> Vec<(f64, f64)> {
        match *self {
            Shape::Circle { cx, cy, r } => {
                let n = ((TAU * r) as usize).max(16);
                (0..n)
                    .map(|i| {
                        let t = TAU * i as f64 / n as f64;
                        (cx + r * t.cos(), cy + r * t.sin())
                    })
                    .collect()
            }
            Shape::Rect { x0, y0, x1, y1 } => vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
            Shape::Polygon(ref pts) => pts.clone(),
            Shape::Blob {
                cx,
                cy,
                r,
                amp,
                lobes,
                phase,
            } => {
                let n = ((TAU * r * (1.0 + amp.abs())) as usize).max(16);
                (0..n)
                    .map(|i| {
                        let t = TAU * i as f64 / n as f64;
                        let rr = r * (1.0 + amp * (lobes as f64 * t + phase).cos());
                        (cx + rr * t.cos(), cy + rr * t.sin())
                    })
                    .collect()
            }
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        point_in_polygon(&self.outline(), (x, y))
    }
}

fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {t:?} in shape")))
        })
        .collect()
}

impl FromStr for Shape {
    type Err = Error;

    /// `circle:cx,cy,r`, `rect:x0,y0,x1,y1`, `poly:x,y,x,y,...` or
    /// `blob:cx,cy,r,amp,lobes[,phase]`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("shape {s:?} lacks a kind prefix")))?;
        let v = parse_numbers(args)?;
        let bad = || Error::Config(format!("wrong argument count for {kind}: {s:?}"));
        match kind.trim() {
            "circle" => match v[..] {
                [cx, cy, r] => Ok(Shape::Circle { cx, cy, r }),
                _ => Err(bad()),
            },
            "rect" => match v[..] {
                [x0, y0, x1, y1] => Ok(Shape::Rect { x0, y0, x1, y1 }),
                _ => Err(bad()),
            },
            "poly" if v.len() >= 6 && v.len() % 2 == 0 => {
                Ok(Shape::Polygon(v.chunks(2).map(|c| (c[0], c[1])).collect()))
            }
            "blob" => match v[..] {
                [cx, cy, r, amp, lobes] | [cx, cy, r, amp, lobes, _] => Ok(Shape::Blob {
                    cx,
                    cy,
                    r,
                    amp,
                    lobes: lobes as u32,
                    phase: v.get(5).copied().unwrap_or(0.0),
                }),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

/// Integer line from `a` to `b` inclusive, 8-connected.
pub fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == b {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Thin 8-connected pixel chain through the rounded vertices.
///
/// Consecutive duplicates and redundant corner pixels (whose neighbours along
/// the chain already touch diagonally) are removed.
pub fn trace_polyline(points: &[(f64, f64)], closed: bool) -> Vec<(i64, i64)> {
    let rounded: Vec<(i64, i64)> = points
        .iter()
        .map(|&(x, y)| (x.round() as i64, y.round() as i64))
        .collect();
    let mut chain: Vec<(i64, i64)> = Vec::new();
    let n = rounded.len();
    let segs = if closed { n } else { n.saturating_sub(1) };
    for i in 0..segs {
        for p in bresenham(rounded[i], rounded[(i + 1) % n]) {
            if chain.last() != Some(&p) {
                chain.push(p);
            }
        }
    }
    if n == 1 {
        chain.push(rounded[0]);
    }
    if closed && chain.len() > 1 && chain.first() == chain.last() {
        chain.pop();
    }
    let touching = |a: (i64, i64), b: (i64, i64)| (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1;
    loop {
        let len = chain.len();
        if len < 4 {
            break;
        }
        let mut removed = false;
        let mut i = if closed { 0 } else { 1 };
        while i < chain.len() && (closed || i + 1 < chain.len()) {
            let m = chain.len();
            let prev = chain[(i + m - 1) % m];
            let next = chain[(i + 1) % m];
            if touching(prev, next) && m > 4 {
                chain.remove(i);
                removed = true;
            } else {
                i += 1;
            }
        }
        if !removed {
            break;
        }
    }
    // revisited pixels (self-touching outlines) collapse to one
    let mut seen = std::collections::HashSet::new();
    chain.retain(|p| seen.insert(*p));
    chain
}

fn stamp(width: usize, height: usize, chain: &[(i64, i64)]) -> Grid<f64> {
    let mut g = Grid::filled(width, height, 0.0);
    for &(x, y) in chain {
        if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
            *g.get_mut(x as usize, y as usize) = 1.0;
        }
    }
    g
}

pub fn rasterize_polyline(width: usize, height: usize, points: &[(f64, f64)], closed: bool) -> Grid<f64> {
    stamp(width, height, &trace_polyline(points, closed))
}

pub fn rasterize_circle(width: usize, height: usize, cx: f64, cy: f64, r: f64) -> Grid<f64> {
    rasterize_polyline(width, height, &Shape::Circle { cx, cy, r }.outline(), true)
}

/// Points along a circular arc from angle `t0` to `t1` (radians).
pub fn arc_points(cx: f64, cy: f64, r: f64, t0: f64, t1: f64) -> Vec<(f64, f64)> {
    let n = (((t1 - t0).abs() * r) as usize).max(8);
    (0..=n)
        .map(|i| {
            let t = t0 + (t1 - t0) * i as f64 / n as f64;
            (cx + r * t.cos(), cy + r * t.sin())
        })
        .collect()
}

/// A generated scene: the edge raster and what it was drawn from.
#[derive(Debug, Clone)]
pub struct GeneratedScene {
    /// Outline pixels that survived ablation, value 1.
    pub edges: Grid<f64>,
    /// 1 inside any shape, 0 elsewhere.
    pub truth: Grid<f64>,
    /// Retained outline pixels shared by two or more shapes.
    pub double_boundary: Grid<bool>,
    /// Outline pixel count before ablation (union over shapes).
    pub outline_pixels: usize,
}

impl GeneratedScene {
    pub fn retained_pixels(&self) -> usize {
        self.edges.data().iter().filter(|&&v| v > 0.0).count()
    }
}

/// Splits `total` into `parts` positive integers at random.
fn random_composition(rng: &mut ChaCha8Rng, total: usize, parts: usize) -> Vec<usize> {
    debug_assert!(parts >= 1 && total >= parts);
    let mut cuts: Vec<usize> = (1..total).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(parts - 1).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(total)) {
        out.push(c - prev);
        prev = c;
    }
    out
}

/// Removes exactly `round(fraction * len)` pixels of a closed chain in a few
/// contiguous gaps placed at random.
fn ablate(chain: &[(i64, i64)], fraction: f64, rng: &mut ChaCha8Rng) -> Vec<(i64, i64)> {
    let len = chain.len();
    let remove = (fraction * len as f64).round() as usize;
    if remove == 0 || len == 0 {
        return chain.to_vec();
    }
    let keep = len - remove;
    if keep == 0 {
        return Vec::new();
    }
    let max_gaps = remove.min(keep).min(4);
    let gaps = rng.gen_range(1..=max_gaps);
    let gap_lens = random_composition(rng, remove, gaps);
    let keep_lens = random_composition(rng, keep, gaps);
    let offset = rng.gen_range(0..len);
    let mut out = Vec::with_capacity(keep);
    let mut pos = offset;
    for (g, k) in gap_lens.into_iter().zip(keep_lens) {
        pos += g;
        for i in 0..k {
            out.push(chain[(pos + i) % len]);
        }
        pos += k;
    }
    out
}

/// Rasterizes shape outlines with random gaps removing `ablation` of each
/// outline, plus the filled ground truth.
pub fn generate_scene(
    width: usize,
    height: usize,
    shapes: &[Shape],
    ablation: f64,
    seed: u64,
) -> Result<GeneratedScene> {
    if !(0.0..=MAX_ABLATION).contains(&ablation) {
        return Err(Error::Config(format!(
            "ablation fraction {ablation} outside [0, {MAX_ABLATION}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut owners = Grid::filled(width, height, 0u32);
    let mut edges = Grid::filled(width, height, 0.0);
    for shape in shapes {
        let outline = shape.outline();
        if outline.iter().any(|&(x, y)| {
            x.round() < 0.0 || y.round() < 0.0 || x.round() > (width - 1) as f64 || y.round() > (height - 1) as f64
        }) {
            return Err(Error::Config(format!("shape {shape:?} leaves the canvas")));
        }
        let chain = trace_polyline(&outline, true);
        for &(x, y) in &chain {
            *owners.get_mut(x as usize, y as usize) += 1;
        }
        for (x, y) in ablate(&chain, ablation, &mut rng) {
            *edges.get_mut(x as usize, y as usize) = 1.0;
        }
    }
    let truth = Grid::from_fn(width, height, |x, y| {
        let inside = shapes.iter().any(|s| s.contains(x as f64, y as f64));
        if inside { 1.0 } else { 0.0 }
    });
    let double_boundary = Grid::from_fn(width, height, |x, y| {
        *owners.get(x, y) >= 2 && *edges.get(x, y) > 0.0
    });
    let outline_pixels = owners.data().iter().filter(|&&o| o > 0).count();
    Ok(GeneratedScene {
        edges,
        truth,
        double_boundary,
        outline_pixels,
    })
}

/// Ids of sub-strokes with more than half of their pixels in `mask`.
pub fn double_boundary_ids(substrokes: &[SubStroke], mask: &Grid<bool>) -> Vec<u32> {
    substrokes
        .iter()
        .filter(|s| {
            let inside = s.pixels.iter().filter(|&&p| mask[p]).count();
            2 * inside > s.len()
        })
        .map(|s| s.id)
        .collect()
}

/// Euclidean distance from every pixel to the nearest pixel with `v > 0`
/// (brute force over the stroke pixels, exact).
pub fn distance_to_strokes(edges: &Grid<f64>) -> Grid<f64> {
    let strokes: Vec<Pixel> = edges
        .iter_pixels()
        .filter(|(_, _, &v)| v > 0.0)
        .map(|(x, y, _)| Pixel::new(x, y))
        .collect();
    Grid::from_fn(edges.width(), edges.height(), |x, y| {
        strokes
            .iter()
            .map(|p| {
                let (dx, dy) = (p.x as f64 - x as f64, p.y as f64 - y as f64);
                dx * dx + dy * dy
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    })
}

/// Named synthetic scenes used by the CLI and the test suites.
pub fn preset(name: &str, size: usize) -> Result<Vec<Shape>> {
    let s = size as f64 / 256.0;
    let shapes = match name {
        "circle" => vec![Shape::Circle {
            cx: 128.0 * s,
            cy: 128.0 * s,
            r: 60.0 * s,
        }],
        // several nearby shapes
        "multi" => vec![
            Shape::Circle { cx: 70.0 * s, cy: 70.0 * s, r: 40.0 * s },
            Shape::Rect { x0: 135.0 * s, y0: 30.0 * s, x1: 225.0 * s, y1: 105.0 * s },
            Shape::Polygon(vec![(40.0 * s, 225.0 * s), (115.0 * s, 140.0 * s), (125.0 * s, 230.0 * s)]),
            Shape::Blob { cx: 185.0 * s, cy: 180.0 * s, r: 42.0 * s, amp: 0.18, lobes: 3, phase: 0.4 },
        ],
        // two rectangles sharing an edge
        "adjacent" => vec![
            Shape::Rect { x0: 40.0 * s, y0: 60.0 * s, x1: 128.0 * s, y1: 196.0 * s },
            Shape::Rect { x0: 128.0 * s, y0: 60.0 * s, x1: 216.0 * s, y1: 196.0 * s },
        ],
        "shapes3" => vec![
            Shape::Circle { cx: 75.0 * s, cy: 80.0 * s, r: 45.0 * s },
            Shape::Rect { x0: 140.0 * s, y0: 140.0 * s, x1: 225.0 * s, y1: 220.0 * s },
            Shape::Polygon(vec![(150.0 * s, 30.0 * s), (230.0 * s, 40.0 * s), (190.0 * s, 110.0 * s)]),
        ],
        _ => return Err(Error::Config(format!("unknown preset {name:?}"))),
    };
    Ok(shapes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bresenham_endpoints_and_connectivity() {
        let line = bresenham((0, 0), (7, 3));
        assert_eq!(line.first(), Some(&(0, 0)));
        assert_eq!(line.last(), Some(&(7, 3)));
        assert_eq!(line.len(), 8);
        for w in line.windows(2) {
            assert!((w[0].0 - w[1].0).abs() <= 1 && (w[0].1 - w[1].1).abs() <= 1);
        }
    }

    #[test]
    fn traced_circle_is_thin() {
        let chain = trace_polyline(&Shape::Circle { cx: 50.0, cy: 50.0, r: 30.0 }.outline(), true);
        let n = chain.len();
        for i in 0..n {
            let (a, b) = (chain[i], chain[(i + 1) % n]);
            assert!((a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1);
            let c = chain[(i + 2) % n];
            // no redundant corners
            assert!(!((a.0 - c.0).abs() <= 1 && (a.1 - c.1).abs() <= 1));
        }
    }

    #[test]
    fn circle_without_ablation_is_closed_and_filled() {
        let shapes = [Shape::Circle { cx: 64.0, cy: 64.0, r: 30.0 }];
        let sc = generate_scene(128, 128, &shapes, 0.0, 1).unwrap();
        assert_eq!(sc.retained_pixels(), sc.outline_pixels);
        let subs = crate::stroke::extract_substrokes(&sc.edges, 0.5).unwrap();
        assert_eq!(subs.len(), 1);
        assert!(subs[0].closed);
        assert_eq!(*sc.truth.get(64, 64), 1.0);
        assert_eq!(*sc.truth.get(5, 5), 0.0);
        let area = sc.truth.data().iter().sum::<f64>();
        let disc = std::f64::consts::PI * 30.0 * 30.0;
        assert!((area - disc).abs() / disc < 0.03);
    }

    #[test]
    fn ablation_retains_expected_fraction() {
        let shapes = [Shape::Circle { cx: 64.0, cy: 64.0, r: 30.0 }];
        for seed in 0..5 {
            let sc = generate_scene(128, 128, &shapes, 0.25, seed).unwrap();
            let expected = sc.outline_pixels - (0.25 * sc.outline_pixels as f64).round() as usize;
            assert_eq!(sc.retained_pixels(), expected);
        }
    }

    #[test]
    fn ablation_range_is_checked() {
        let shapes = [Shape::Circle { cx: 64.0, cy: 64.0, r: 30.0 }];
        assert!(generate_scene(128, 128, &shapes, 0.95, 0).is_err());
        assert!(generate_scene(128, 128, &shapes, -0.1, 0).is_err());
        let off = [Shape::Circle { cx: 10.0, cy: 64.0, r: 30.0 }];
        assert!(generate_scene(128, 128, &off, 0.0, 0).is_err());
    }

    #[test]
    fn same_seed_same_scene() {
        let shapes = preset("multi", 256).unwrap();
        let a = generate_scene(256, 256, &shapes, 0.2, 9).unwrap();
        let b = generate_scene(256, 256, &shapes, 0.2, 9).unwrap();
        assert_eq!(a.edges, b.edges);
    }

    #[test]
    fn adjacent_rectangles_flag_the_shared_edge() {
        let shapes = preset("adjacent", 256).unwrap();
        let sc = generate_scene(256, 256, &shapes, 0.0, 0).unwrap();
        let subs = crate::stroke::extract_substrokes(&sc.edges, 0.5).unwrap();
        let ids = double_boundary_ids(&subs, &sc.double_boundary);
        assert_eq!(ids.len(), 1);
        let shared = &subs[ids[0] as usize - 1];
        assert!(shared.pixels.iter().filter(|p| p.x == 128).count() * 10 >= shared.len() * 9);
    }

    #[test]
    fn shape_parsing() {
        assert_eq!(
            "circle:1,2,3".parse::<Shape>().unwrap(),
            Shape::Circle { cx: 1.0, cy: 2.0, r: 3.0 }
        );
        assert!(matches!("poly:0,0,4,0,0,4".parse::<Shape>().unwrap(), Shape::Polygon(p) if p.len() == 3));
        assert!("rect:1,2,3".parse::<Shape>().is_err());
        assert!("hexagon:1".parse::<Shape>().is_err());
    }
}
