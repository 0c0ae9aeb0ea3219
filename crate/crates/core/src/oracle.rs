//! Geometric inclusion probability from nested circular closing paths.
//!
//! Work happens in the stroke-aligned frame: the first endpoint maps to
//! `(-x0, 0)`, the last to `(x0, 0)`, and `+y` is the chord direction rotated
//! by +90°. With a chain ordered the same way, this `+y` side is the side the
//! dipole normals point to.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, segments_intersect, Point};
use crate::grid::Grid;

/// Default number of β samples in a sweep.
pub const DEFAULT_SAMPLES: usize = 1024;
/// Smallest allowed sweep.
pub const MIN_SAMPLES: usize = 64;

const NUDGE: f64 = 1e-9;

/// Circle through `(±x0, 0)` leaving the endpoints at angle `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleArc {
    pub x0: f64,
    pub beta: f64,
    /// Centre `(0, x0 cot β)`; infinite at β = π.
    pub center: Point,
    /// `x0 csc β` (negative for β > π).
    pub rho: f64,
    /// Signed apex height `x0 cot(β/2)`.
    pub y_max: f64,
    pub arc_length: f64,
    /// Signed area between the arc and the chord.
    pub area: f64,
}

impl CircleArc {
    /// β = π: the arc is the chord itself.
    pub fn is_chord(&self) -> bool {
        self.beta == PI
    }

    pub fn radius(&self) -> f64 {
        self.rho.abs()
    }

    /// Points of the arc from `(-x0, 0)` to `(x0, 0)` through the apex.
    pub fn sample(&self, n: usize) -> Vec<Point> {
        if self.is_chord() {
            return (0..=n)
                .map(|i| (-self.x0 + 2.0 * self.x0 * i as f64 / n as f64, 0.0))
                .collect();
        }
        let (cx, cy) = self.center;
        let start = (0.0 - cy).atan2(-self.x0 - cx);
        let end = (0.0 - cy).atan2(self.x0 - cx);
        // go through the apex side: clockwise in y-up terms for β < π
        let mut sweep = end - start;
        if self.beta < PI {
            if sweep > 0.0 {
                sweep -= TAU;
            }
        } else if sweep < 0.0 {
            sweep += TAU;
        }
        (0..=n)
            .map(|i| {
                let t = start + sweep * i as f64 / n as f64;
                (cx + self.radius() * t.cos(), cy + self.radius() * t.sin())
            })
            .collect()
    }

    /// Number of arc crossings of the `+x` ray from `p`.
    fn ray_crossings(&self, p: Point) -> usize {
        if self.is_chord() {
            return 0;
        }
        // the arc lies in y >= 0 for β < π and y <= 0 for β > π
        let upper = self.beta < PI;
        if (p.1 > 0.0) != upper {
            return 0;
        }
        let (cx, cy) = self.center;
        let r = self.radius();
        let dy = p.1 - cy;
        let disc = r * r - dy * dy;
        if disc <= 0.0 {
            return 0;
        }
        let s = disc.sqrt();
        [cx - s, cx + s].iter().filter(|&&x| x > p.0).count()
    }

    /// Side of the extended arc (arc plus the chord line outside the
    /// endpoints) the point lies on; `true` is the `+y` side at infinity.
    pub fn in_positive_side(&self, p: Point) -> bool {
        (p.1 > 0.0) ^ (self.ray_crossings(p) % 2 == 1)
    }
}

/// `(π - β) / sin²β + cot β`, using `(u - sin u) / (2 sin²ε)` with `u = 2ε`
/// and its series for small `ε`.
fn lens_factor(eps: f64, s: f64, c: f64) -> f64 {
    if eps.abs() < 1e-3 {
        let u = 2.0 * eps;
        let u3 = u * u * u;
        let num = u3 / 6.0 - u3 * u * u / 120.0 + u3 * u3 * u / 5040.0;
        num / (2.0 * s * s)
    } else {
        eps / (s * s) + c / s
    }
}

pub fn circle_from_angle(x0: f64, beta: f64) -> Result<CircleArc> {
    if !(x0 > 0.0) || !(beta > 0.0 && beta < TAU) {
        return Err(Error::Config(format!(
            "circle needs x0 > 0 and beta in (0, 2pi), got x0 = {x0}, beta = {beta}"
        )));
    }
    if beta == PI {
        return Ok(CircleArc {
            x0,
            beta,
            center: (0.0, f64::INFINITY),
            rho: f64::INFINITY,
            y_max: 0.0,
            arc_length: 2.0 * x0,
            area: 0.0,
        });
    }
    // near the chord, work with ε = π - β to avoid cancellation
    let eps = PI - beta;
    let (s, c) = if eps.abs() < 1.0 {
        let (se, ce) = eps.sin_cos();
        (se, -ce)
    } else {
        beta.sin_cos()
    };
    Ok(CircleArc {
        x0,
        beta,
        center: (0.0, x0 * c / s),
        rho: x0 / s,
        y_max: x0 / (beta / 2.0).tan(),
        arc_length: 2.0 * x0 * (PI - beta) / s,
        area: x0 * x0 * lens_factor(eps, s, c),
    })
}

/// An open polyline stroke and its extension by the chord line beyond the
/// endpoints. A stroke whose endpoints coincide is treated as closed.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyStroke {
    points: Vec<Point>,
    frame: Vec<Point>,
    origin: Point,
    axis: Point,
    x0: f64,
    closed: bool,
}

impl PolyStroke {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config("stroke needs at least two points".into()));
        }
        let (a, b) = (points[0], *points.last().unwrap());
        let closed = a == b;
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = dx.hypot(dy);
        let (origin, axis, x0) = if closed {
            (a, (1.0, 0.0), 0.0)
        } else {
            (((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0), (dx / len, dy / len), len / 2.0)
        };
        let mut out = Self {
            frame: Vec::new(),
            points,
            origin,
            axis,
            x0,
            closed,
        };
        out.frame = out.points.iter().map(|&p| out.to_frame(p)).collect();
        if out.self_intersects() {
            return Err(Error::SelfIntersecting);
        }
        Ok(out)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Vertices in the stroke-aligned frame.
    pub fn frame_points(&self) -> &[Point] {
        &self.frame
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn to_frame(&self, p: Point) -> Point {
        let (dx, dy) = (p.0 - self.origin.0, p.1 - self.origin.1);
        let (ux, uy) = self.axis;
        (dx * ux + dy * uy, -dx * uy + dy * ux)
    }

    pub fn from_frame(&self, q: Point) -> Point {
        let (ux, uy) = self.axis;
        (
            self.origin.0 + q.0 * ux - q.1 * uy,
            self.origin.1 + q.0 * uy + q.1 * ux,
        )
    }

    fn self_intersects(&self) -> bool {
        let f = &self.frame;
        let n = f.len();
        let segs = n - 1;
        let last = if self.closed { segs - 1 } else { usize::MAX };
        for i in 0..segs {
            for j in i + 2..segs {
                if i == 0 && j == last {
                    continue;
                }
                if segments_intersect(f[i], f[i + 1], f[j], f[j + 1]) {
                    return true;
                }
            }
        }
        if self.closed {
            return false;
        }
        let reach = 1e6 * f.iter().fold(self.x0, |m, p| m.max(p.0.abs()).max(p.1.abs()));
        let right = ((self.x0, 0.0), (self.x0 + reach, 0.0));
        let left = ((-self.x0, 0.0), (-self.x0 - reach, 0.0));
        for i in 0..segs {
            // skip the segment that ends where the ray starts
            if i != segs - 1 && segments_intersect(f[i], f[i + 1], right.0, right.1) {
                return true;
            }
            if i != 0 && segments_intersect(f[i], f[i + 1], left.0, left.1) {
                return true;
            }
        }
        false
    }

    fn nudge(&self, q: Point) -> Point {
        let on_vertex_row = q.1 == 0.0 || self.frame.iter().any(|v| v.1 == q.1);
        if on_vertex_row {
            (q.0, q.1 + NUDGE)
        } else {
            q
        }
    }

    fn crossings(&self, q: Point) -> usize {
        let f = &self.frame;
        (0..f.len() - 1)
            .filter(|&i| {
                let (a, b) = (f[i], f[i + 1]);
                (a.1 > q.1) != (b.1 > q.1) && a.0 + (q.1 - a.1) * (b.0 - a.0) / (b.1 - a.1) > q.0
            })
            .count()
    }

    /// Side of the extended stroke `q` (frame coordinates) lies on.
    fn frame_positive(&self, q: Point) -> bool {
        let q = self.nudge(q);
        (q.1 > 0.0) ^ (self.crossings(q) % 2 == 1)
    }

    /// Whether an image-space point lies in the `+` half-space of the
    /// extended stroke.
    pub fn in_positive_halfspace(&self, p: Point) -> bool {
        self.frame_positive(self.to_frame(p))
    }
}

/// Whether `point` (image space) lies in the region closed by `stroke` and
/// `arc`: inside the `+` side of the stroke and the `-` side of the arc, or
/// the other way round.
pub fn region_membership(stroke: &PolyStroke, arc: &CircleArc, point: Point) -> bool {
    let q = stroke.nudge(stroke.to_frame(point));
    let plus = stroke.frame_positive(q);
    let arc_plus = arc.in_positive_side(q);
    (plus && !arc_plus) || (!plus && arc_plus)
}

/// Which half-space of the stroke a probe fell in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub probability: f64,
    /// Largest member angle `β_γ`, measured on the point's own side.
    pub beta: f64,
    pub side: Side,
    /// Number of non-member to member transitions after the first
    /// non-member sample; zero when nesting holds.
    pub prefix_violations: usize,
}

/// Sweeps β over a uniform grid and reports the largest member angle.
///
/// Points on the `+` side are tested against `arc(β)` and points on the `-`
/// side against `arc(2π - β)`, so membership is a prefix of the sweep on
/// both sides. The result is within `1 / (2 samples)` of the exact value.
pub fn oracle_probability(stroke: &PolyStroke, point: Point, samples: usize) -> Result<OracleSample> {
    if samples < MIN_SAMPLES {
        return Err(Error::Config(format!("at least {MIN_SAMPLES} samples needed, got {samples}")));
    }
    if stroke.is_closed() {
        let inside = point_in_polygon(stroke.points(), point);
        return Ok(OracleSample {
            probability: if inside { 1.0 } else { 0.0 },
            beta: if inside { TAU } else { 0.0 },
            side: if inside { Side::Plus } else { Side::Minus },
            prefix_violations: 0,
        });
    }
    let q = stroke.nudge(stroke.to_frame(point));
    let plus = stroke.frame_positive(q);
    let step = TAU / samples as f64;
    let mut largest = 0usize;
    let mut violations = 0usize;
    let mut previous = true;
    for k in 1..=samples {
        let b = (k as f64 - 0.5) * step;
        let beta = if plus { b } else { TAU - b };
        let arc = circle_from_angle(stroke.x0(), beta)?;
        let arc_plus = arc.in_positive_side(q);
        let member = if plus { !arc_plus } else { arc_plus };
        if member {
            if !previous {
                violations += 1;
            }
            largest = k;
        }
        previous = member;
    }
    let beta = largest as f64 * step;
    Ok(OracleSample {
        probability: beta / TAU,
        beta,
        side: if plus { Side::Plus } else { Side::Minus },
        prefix_violations: violations,
    })
}

/// Oracle probability at every pixel centre.
pub fn oracle_map(stroke: &PolyStroke, width: usize, height: usize, samples: usize) -> Result<Grid<f64>> {
    let rows: Vec<Vec<f64>> = (0..height)
        .into_par_iter()
        .map(|y| {
            (0..width)
                .map(|x| oracle_probability(stroke, (x as f64, y as f64), samples).map(|s| s.probability))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Grid::from_vec(width, height, rows.into_iter().flatten().collect())
}

/// Ratio of regions containing the point to the number of equiprobable regions.
pub fn finite_probability(n_gamma: usize, n_regions: usize) -> Result<f64> {
    if n_regions == 0 {
        return Err(Error::Config("number of regions must be at least 1".into()));
    }
    if n_gamma > n_regions {
        return Err(Error::Config(format!("{n_gamma} regions out of {n_regions}")));
    }
    Ok(n_gamma as f64 / n_regions as f64)
}
