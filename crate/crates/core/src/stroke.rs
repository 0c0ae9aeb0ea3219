//! Stroke rasters: thinning, decomposition into sub-strokes, per-pixel
//! normal orientation and the pixel density correction factor.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{Grid, Pixel, RING};

/// Default orientation window radius in pixels.
pub const DEFAULT_WINDOW: usize = 2;
/// Largest reach along the chain the orientation window may grow to.
pub const MAX_REACH: usize = 32;
/// Tolerated distance of chain pixels from the window chord, in pixels.
const STRAIGHTNESS: f64 = 1.0;

/// Orientation flip state of a sub-stroke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// One junction-free connected piece of the stroke raster.
#[derive(Debug, Clone, PartialEq)]
pub struct SubStroke {
    /// Label in `1..=n`; 0 is reserved for background.
    pub id: u32,
    /// Pixels ordered from one endpoint to the other.
    pub pixels: Vec<Pixel>,
    /// Extremity pixels; identical for a closed sub-stroke.
    pub endpoints: (Pixel, Pixel),
    pub closed: bool,
    pub sign: Sign,
    pub double_boundary: bool,
    /// Mean stroke intensity, in `(0, 1]`.
    pub weight: f64,
}

impl SubStroke {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    fn from_chain(id: u32, pixels: Vec<Pixel>, closed: bool, raster: &Grid<f64>) -> SubStroke {
        let first = pixels[0];
        let last = *pixels.last().unwrap();
        let mean = pixels.iter().map(|&p| raster[p]).sum::<f64>() / pixels.len() as f64;
        SubStroke {
            id,
            endpoints: if closed { (first, first) } else { (first, last) },
            pixels,
            closed,
            sign: Sign::Plus,
            double_boundary: false,
            weight: mean.clamp(f64::MIN_POSITIVE, 1.0),
        }
    }
}

/// Pixel density correction `F = 1 / max(|cos θ|, |sin θ|)`, in `[1, √2]`.
pub fn density_factor(theta: f64) -> f64 {
    1.0 / theta.cos().abs().max(theta.sin().abs())
}

fn neighbor_count(mask: &Grid<bool>, x: usize, y: usize) -> usize {
    RING.iter()
        .filter(|(dx, dy)| {
            mask.get_signed(x as isize + dx, y as isize + dy)
                .copied()
                .unwrap_or(false)
        })
        .count()
}

/// Yokoi connectivity number for 8-connected foreground.
fn yokoi8(mask: &Grid<bool>, x: usize, y: usize) -> u32 {
    // counter-clockwise from east: E, NE, N, NW, W, SW, S, SE
    const CCW: [(isize, isize); 8] = [
        (1, 0),
        (1, -1),
        (0, -1),
        (-1, -1),
        (-1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
    ];
    let bg = |k: usize| -> u32 {
        let (dx, dy) = CCW[k % 8];
        let fg = mask
            .get_signed(x as isize + dx, y as isize + dy)
            .copied()
            .unwrap_or(false);
        u32::from(!fg)
    };
    [0, 2, 4, 6]
        .iter()
        .map(|&k| bg(k) - bg(k) * bg(k + 1) * bg(k + 2))
        .sum()
}

/// Removes simple, non-endpoint pixels until the mask is one pixel wide.
///
/// Passes scan in raster order and remove in place, so the result is
/// deterministic. Topology and endpoints are preserved.
pub fn thin(mask: &Grid<bool>) -> Grid<bool> {
    let mut out = mask.clone();
    loop {
        let mut changed = false;
        for y in 0..out.height() {
            for x in 0..out.width() {
                if *out.get(x, y) && neighbor_count(&out, x, y) >= 2 && yokoi8(&out, x, y) == 1 {
                    *out.get_mut(x, y) = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return out;
        }
    }
}

fn neighbors_in<'a>(
    mask: &'a Grid<bool>,
    p: Pixel,
) -> impl Iterator<Item = Pixel> + 'a {
    // 4-neighbours first so staircase walks never skip a pixel
    const ORDER: [usize; 8] = [0, 2, 4, 6, 1, 3, 5, 7];
    ORDER.iter().filter_map(move |&k| {
        let (dx, dy) = RING[k];
        let (nx, ny) = (p.x as isize + dx, p.y as isize + dy);
        match mask.get_signed(nx, ny) {
            Some(true) => Some(Pixel::new(nx as usize, ny as usize)),
            _ => None,
        }
    })
}

/// Walks an 8-connected set of pixels with at most two neighbours each,
/// starting at `start`. Returns the ordered chain.
fn walk(set: &Grid<bool>, visited: &mut Grid<bool>, start: Pixel) -> Vec<Pixel> {
    let mut chain = vec![start];
    visited[start] = true;
    let mut cur = start;
    while let Some(next) = neighbors_in(set, cur).find(|&n| !visited[n]) {
        visited[next] = true;
        chain.push(next);
        cur = next;
    }
    chain
}

/// Decomposes a thin edge raster into sub-strokes.
///
/// Pixels with value `>= threshold` form the stroke mask, which is thinned;
/// pixels with three or more stroke neighbours are junctions. Junction-free
/// runs become sub-strokes and each junction pixel is attached to the end of
/// an adjacent run, so every pixel of the thinned mask belongs to exactly one
/// sub-stroke.
pub fn extract_substrokes(raster: &Grid<f64>, threshold: f64) -> Result<Vec<SubStroke>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("threshold {threshold} outside (0, 1]")));
    }
    let (w, h) = raster.dims();
    let mask = thin(&raster.map(|&v| v >= threshold));

    let mut junction = Grid::filled(w, h, false);
    let mut plain = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            if !*mask.get(x, y) {
                continue;
            }
            let n = neighbor_count(&mask, x, y);
            if n >= 5 {
                return Err(Error::NotThinned { x, y, neighbors: n });
            }
            if n >= 3 {
                *junction.get_mut(x, y) = true;
            } else {
                *plain.get_mut(x, y) = true;
            }
        }
    }

    // junction-free runs
    let mut chains: Vec<(Vec<Pixel>, bool)> = Vec::new();
    let mut seen = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let p = Pixel::new(x, y);
            if !plain[p] || seen[p] {
                continue;
            }
            // collect the component, then walk it from its smallest endpoint
            let mut component = vec![p];
            let mut stack = vec![p];
            seen[p] = true;
            while let Some(q) = stack.pop() {
                for n in neighbors_in(&plain, q) {
                    if !seen[n] {
                        seen[n] = true;
                        component.push(n);
                        stack.push(n);
                    }
                }
            }
            component.sort_by_key(|p| (p.y, p.x));
            let endpoints: Vec<Pixel> = component
                .iter()
                .copied()
                .filter(|&q| neighbors_in(&plain, q).count() <= 1)
                .collect();
            let cyclic = endpoints.is_empty();
            let mut walked = Grid::filled(w, h, false);
            let mut remaining: BTreeSet<(usize, usize)> =
                component.iter().map(|p| (p.y, p.x)).collect();
            let mut start = endpoints.first().copied().unwrap_or(component[0]);
            loop {
                let chain = walk(&plain, &mut walked, start);
                for q in &chain {
                    remaining.remove(&(q.y, q.x));
                }
                let closed = cyclic
                    && chain.len() >= 3
                    && chain[0].is_adjacent(*chain.last().unwrap())
                    && remaining.is_empty();
                chains.push((chain, closed));
                match remaining.iter().next() {
                    Some(&(y, x)) => start = Pixel::new(x, y),
                    None => break,
                }
            }
        }
    }

    // attach junction pixels to adjacent open chain ends, one pixel per
    // chain end per round so no chain runs through a whole junction
    let mut pending: Vec<Pixel> = junction
        .iter_pixels()
        .filter(|(_, _, &j)| j)
        .map(|(x, y, _)| Pixel::new(x, y))
        .collect();
    loop {
        let mut progressed = false;
        for (chain, closed) in chains.iter_mut() {
            if *closed {
                continue;
            }
            let tail = *chain.last().unwrap();
            if let Some(k) = pending.iter().position(|&j| tail.is_adjacent(j)) {
                chain.push(pending.remove(k));
                progressed = true;
            }
            let head = chain[0];
            if let Some(k) = pending.iter().position(|&j| head.is_adjacent(j)) {
                chain.insert(0, pending.remove(k));
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }

    // junction clusters touching no run become sub-strokes of their own
    let mut leftover = Grid::filled(w, h, false);
    for &p in &pending {
        leftover[p] = true;
    }
    let mut walked = Grid::filled(w, h, false);
    for &p in &pending {
        if !walked[p] {
            chains.push((walk(&leftover, &mut walked, p), false));
        }
    }

    Ok(chains
        .into_iter()
        .enumerate()
        .map(|(i, (pixels, closed))| SubStroke::from_chain(i as u32 + 1, pixels, closed, raster))
        .collect())
}

/// A stroke raster decomposed into labelled, oriented sub-strokes.
#[derive(Debug, Clone, PartialEq)]
pub struct StrokeScene {
    intensity: Grid<f64>,
    normal_angle: Grid<f64>,
    density: Grid<f64>,
    labels: Grid<u32>,
    substrokes: Vec<SubStroke>,
    degenerate: Vec<Pixel>,
}

impl StrokeScene {
    /// Builds a scene from sub-strokes. Intensities come from `raster`
    /// (clamped to `[0, 1]`); orientation is left undefined.
    pub fn from_substrokes(raster: &Grid<f64>, substrokes: Vec<SubStroke>) -> Result<Self> {
        let (w, h) = raster.dims();
        let mut labels = Grid::filled(w, h, 0u32);
        let mut intensity = Grid::filled(w, h, 0.0);
        for (i, s) in substrokes.iter().enumerate() {
            if s.id as usize != i + 1 {
                return Err(Error::Invariant(format!(
                    "sub-stroke ids must be 1..=n in order, found {} at position {}",
                    s.id,
                    i + 1
                )));
            }
            for &p in &s.pixels {
                if labels[p] != 0 {
                    return Err(Error::Invariant(format!(
                        "pixel ({}, {}) belongs to sub-strokes {} and {}",
                        p.x, p.y, labels[p], s.id
                    )));
                }
                labels[p] = s.id;
                intensity[p] = raster[p].clamp(0.0, 1.0);
            }
        }
        Ok(Self {
            intensity,
            normal_angle: Grid::filled(w, h, f64::NAN),
            density: Grid::filled(w, h, 0.0),
            labels,
            substrokes,
            degenerate: Vec::new(),
        })
    }

    /// Extracts sub-strokes from an edge raster and estimates their orientation.
    pub fn from_raster(raster: &Grid<f64>, threshold: f64, window: usize) -> Result<Self> {
        let subs = extract_substrokes(raster, threshold)?;
        Ok(estimate_orientation(&Self::from_substrokes(raster, subs)?, window))
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.labels.dims()
    }

    pub fn intensity(&self) -> &Grid<f64> {
        &self.intensity
    }

    /// Normal direction in radians, NaN off-stroke or before estimation.
    ///
    /// Angles are consistent along each sub-stroke: the normal is the chain
    /// tangent (first pixel towards last) rotated by +90°.
    pub fn normal_angle(&self) -> &Grid<f64> {
        &self.normal_angle
    }

    pub fn density(&self) -> &Grid<f64> {
        &self.density
    }

    pub fn labels(&self) -> &Grid<u32> {
        &self.labels
    }

    pub fn substrokes(&self) -> &[SubStroke] {
        &self.substrokes
    }

    pub fn substroke(&self, id: u32) -> Option<&SubStroke> {
        id.checked_sub(1).and_then(|i| self.substrokes.get(i as usize))
    }

    pub fn len(&self) -> usize {
        self.substrokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.substrokes.is_empty()
    }

    /// Stroke pixels whose orientation could not be estimated (isolated pixels).
    pub fn degenerate_pixels(&self) -> &[Pixel] {
        &self.degenerate
    }

    pub fn stroke_pixel_count(&self) -> usize {
        self.substrokes.iter().map(SubStroke::len).sum()
    }

    /// Current orientation signs, indexed by `id - 1`.
    pub fn signs(&self) -> Vec<Sign> {
        self.substrokes.iter().map(|s| s.sign).collect()
    }

    pub fn with_signs(&self, signs: &[Sign]) -> Result<Self> {
        if signs.len() != self.substrokes.len() {
            return Err(Error::Config(format!(
                "{} signs for {} sub-strokes",
                signs.len(),
                self.substrokes.len()
            )));
        }
        let mut out = self.clone();
        for (s, &sign) in out.substrokes.iter_mut().zip(signs) {
            s.sign = sign;
        }
        Ok(out)
    }

    /// Overrides stored normals with externally supplied angles, re-aligning
    /// each to the chain direction of its sub-stroke.
    pub fn with_orientation_override(&self, angles: &Grid<f64>) -> Result<Self> {
        self.labels.ensure_same_dims(angles)?;
        let mut out = self.clone();
        for s in &self.substrokes {
            for (k, &p) in s.pixels.iter().enumerate() {
                let theta = angles[p];
                let (tx, ty) = (theta.sin(), -theta.cos());
                let (px, py) = progression(s, k, 1);
                let theta = if tx * px + ty * py < 0.0 { theta + PI } else { theta };
                let theta = theta.rem_euclid(TAU);
                out.normal_angle[p] = theta;
                out.density[p] = density_factor(theta) * if s.double_boundary { 2.0 } else { 1.0 };
            }
        }
        out.degenerate.clear();
        Ok(out)
    }

    /// The scene restricted to the given sub-strokes, relabelled `1..=k` in
    /// the order given. Orientation and density are carried over.
    pub fn subset(&self, ids: &[u32]) -> Result<Self> {
        let (w, h) = self.dims();
        let mut out = StrokeScene {
            intensity: Grid::filled(w, h, 0.0),
            normal_angle: Grid::filled(w, h, f64::NAN),
            density: Grid::filled(w, h, 0.0),
            labels: Grid::filled(w, h, 0),
            substrokes: Vec::with_capacity(ids.len()),
            degenerate: Vec::new(),
        };
        for (i, &id) in ids.iter().enumerate() {
            let s = self.substroke(id).ok_or(Error::UnknownSubstroke(id))?;
            let new_id = i as u32 + 1;
            for &p in &s.pixels {
                if out.labels[p] != 0 {
                    return Err(Error::Config(format!("sub-stroke {id} listed twice")));
                }
                out.labels[p] = new_id;
                out.intensity[p] = self.intensity[p];
                out.normal_angle[p] = self.normal_angle[p];
                out.density[p] = self.density[p];
                if self.degenerate.contains(&p) {
                    out.degenerate.push(p);
                }
            }
            out.substrokes.push(SubStroke {
                id: new_id,
                ..s.clone()
            });
        }
        Ok(out)
    }
}

/// Direction of travel along the chain at index `k`, spanning `reach` pixels each way.
fn progression(s: &SubStroke, k: usize, reach: usize) -> (f64, f64) {
    let n = s.pixels.len();
    let (a, b) = if s.closed {
        (s.pixels[(k + n - reach % n) % n], s.pixels[(k + reach) % n])
    } else {
        (s.pixels[k.saturating_sub(reach)], s.pixels[(k + reach).min(n - 1)])
    };
    (b.x as f64 - a.x as f64, b.y as f64 - a.y as f64)
}

fn chain_index(s: &SubStroke, i: isize) -> Pixel {
    let n = s.pixels.len() as isize;
    s.pixels[i.rem_euclid(n) as usize]
}

/// Whether chain pixels `a..=b` stay within [`STRAIGHTNESS`] of their chord.
fn is_straight(s: &SubStroke, a: isize, b: isize) -> bool {
    let (p, q) = (chain_index(s, a).as_point(), chain_index(s, b).as_point());
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return false;
    }
    (a + 1..b).all(|i| {
        let r = chain_index(s, i).as_point();
        ((r.0 - p.0) * dy - (r.1 - p.1) * dx).abs() / len <= STRAIGHTNESS
    })
}

/// Chain index range `(k - l, k + r)` used to estimate the tangent at `k`:
/// at least `min_reach` each way where the chain allows, then grown while
/// the pixels stay digitally straight, up to [`MAX_REACH`].
fn orientation_extent(s: &SubStroke, k: usize, min_reach: usize) -> (isize, isize) {
    let n = s.pixels.len();
    let (lo_lim, hi_lim) = if s.closed {
        let half = (n - 1) / 2;
        (half, n - 1 - half)
    } else {
        (k, n - 1 - k)
    };
    let (lo_lim, hi_lim) = (lo_lim.min(MAX_REACH), hi_lim.min(MAX_REACH));
    let mut l = min_reach.min(lo_lim);
    let mut r = min_reach.min(hi_lim);
    let k = k as isize;
    loop {
        let nl = if l < lo_lim { l + 1 } else { l };
        let nr = if r < hi_lim { r + 1 } else { r };
        if (nl, nr) == (l, r) || !is_straight(s, k - nl as isize, k + nr as isize) {
            return (k - l as isize, k + r as isize);
        }
        l = nl;
        r = nr;
    }
}

/// Estimates the stroke normal at every stroke pixel.
///
/// The tangent is the principal axis of the second moments of a run of
/// chain pixels around the pixel: at least `window` pixels each way, grown
/// while the run stays digitally straight. It is oriented along the chain
/// and rotated by +90° to give the normal. Isolated pixels get θ = 0 and are
/// reported by [`StrokeScene::degenerate_pixels`]. The density factor is
/// recomputed (doubled on double-boundary sub-strokes).
pub fn estimate_orientation(scene: &StrokeScene, window: usize) -> StrokeScene {
    let mut out = scene.clone();
    out.degenerate.clear();
    for s in &scene.substrokes {
        let scale = if s.double_boundary { 2.0 } else { 1.0 };
        for (k, &p) in s.pixels.iter().enumerate() {
            let (a, b) = orientation_extent(s, k, window);
            if a == b {
                out.normal_angle[p] = 0.0;
                out.density[p] = density_factor(0.0) * scale;
                out.degenerate.push(p);
                continue;
            }
            let pts: Vec<(f64, f64)> = (a..=b).map(|i| chain_index(s, i).as_point()).collect();
            let n = pts.len() as f64;
            let mx = pts.iter().map(|q| q.0).sum::<f64>() / n;
            let my = pts.iter().map(|q| q.1).sum::<f64>() / n;
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for (x, y) in pts {
                sxx += (x - mx) * (x - mx);
                sxy += (x - mx) * (y - my);
                syy += (y - my) * (y - my);
            }
            let phi = 0.5 * (2.0 * sxy).atan2(sxx - syy);
            let (mut tx, mut ty) = (phi.cos(), phi.sin());
            let (first, last) = (chain_index(s, a), chain_index(s, b));
            let (px, py) = (last.x as f64 - first.x as f64, last.y as f64 - first.y as f64);
            if tx * px + ty * py < 0.0 {
                tx = -tx;
                ty = -ty;
            }
            let theta = tx.atan2(-ty).rem_euclid(TAU);
            out.normal_angle[p] = theta;
            out.density[p] = density_factor(theta) * scale;
        }
    }
    out
}

/// Doubles the density factor on every pixel of the flagged sub-strokes.
pub fn apply_double_boundary(scene: &StrokeScene, flags: &[u32]) -> Result<StrokeScene> {
    let mut out = scene.clone();
    for &id in flags {
        let idx = id
            .checked_sub(1)
            .filter(|&i| (i as usize) < scene.substrokes.len())
            .ok_or(Error::UnknownSubstroke(id))? as usize;
        if out.substrokes[idx].double_boundary {
            continue;
        }
        out.substrokes[idx].double_boundary = true;
        for &p in &scene.substrokes[idx].pixels {
            out.density[p] *= 2.0;
        }
    }
    Ok(out)
}

/// Parses a double-boundary sidecar: one sub-stroke id per line, blank
/// lines and `#` comments ignored.
pub fn parse_double_boundary_flags(text: &str) -> Result<Vec<u32>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<u32>()
                .map_err(|_| Error::Format(format!("bad sub-stroke id {l:?}")))
        })
        .collect()
}
