//! Dipole kernel, magnetic potential by convolution, the analytic line
//! potential and the electric field `E = ∇V`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Grid, Pixel};
use crate::oracle::PolyStroke;
use crate::stroke::{Sign, StrokeScene};

/// Documented overshoot allowed beyond `|V| = 2π`.
pub const OVERSHOOT: f64 = 0.15 * TAU;

/// How the phase `e^{iθ}` of a dipole is paired with the kernel parts.
///
/// With `K = Kx + i Ky` and `C = A e^{iθ}`:
/// `ReConj` gives `Re(conj(C) K)`, `ReDirect` gives `Re(C K)`,
/// `ImConj` gives `Im(conj(C) K)` and `ImDirect` gives `Im(C K)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseConvention {
    ReConj,
    ReDirect,
    ImConj,
    ImDirect,
}

impl PhaseConvention {
    pub const ALL: [PhaseConvention; 4] = [
        PhaseConvention::ReConj,
        PhaseConvention::ReDirect,
        PhaseConvention::ImConj,
        PhaseConvention::ImDirect,
    ];

    /// Multipliers `(wx, wy)` so that the contribution is `wx Kx + wy Ky`.
    pub fn weights(self, theta: f64) -> (f64, f64) {
        let (s, c) = theta.sin_cos();
        match self {
            PhaseConvention::ReConj => (c, s),
            PhaseConvention::ReDirect => (c, -s),
            PhaseConvention::ImConj => (-s, c),
            PhaseConvention::ImDirect => (s, c),
        }
    }
}

/// The convention in use. A normal pointing towards increasing row
/// (θ = π/2) yields positive potential on that side of a segment.
pub const PHASE: PhaseConvention = PhaseConvention::ReConj;

/// Sampled `∇ ln r = (x, y) / (x² + y²)` with the centre set to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleKernel {
    half_extent: usize,
    values: Vec<Complex64>,
}

impl DipoleKernel {
    pub fn new(half_extent: usize) -> Result<Self> {
        if half_extent == 0 {
            return Err(Error::Config("kernel half extent must be at least 1".into()));
        }
        let h = half_extent as isize;
        let side = 2 * half_extent + 1;
        let mut values = Vec::with_capacity(side * side);
        for dy in -h..=h {
            for dx in -h..=h {
                values.push(kernel_value(dx, dy));
            }
        }
        Ok(Self { half_extent, values })
    }

    /// Kernel just large enough for a `width × height` field of view.
    pub fn covering(width: usize, height: usize) -> Result<Self> {
        Self::new(width.max(height).saturating_sub(1).max(1))
    }

    pub fn half_extent(&self) -> usize {
        self.half_extent
    }

    pub fn side(&self) -> usize {
        2 * self.half_extent + 1
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Value at offset `(dx, dy)`; zero outside the support.
    pub fn at(&self, dx: isize, dy: isize) -> Complex64 {
        let h = self.half_extent as isize;
        if dx.abs() > h || dy.abs() > h {
            return Complex64::new(0.0, 0.0);
        }
        self.values[((dy + h) as usize) * self.side() + (dx + h) as usize]
    }

    pub fn covers(&self, width: usize, height: usize) -> bool {
        self.half_extent + 1 >= width.max(height)
    }
}

fn kernel_value(dx: isize, dy: isize) -> Complex64 {
    if dx == 0 && dy == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let (x, y) = (dx as f64, dy as f64);
    let r2 = x * x + y * y;
    Complex64::new(x / r2, y / r2)
}

pub fn dipole_kernel(half_extent: usize) -> Result<DipoleKernel> {
    DipoleKernel::new(half_extent)
}

/// Spatial direct sum or zero-padded FFT convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelMode {
    Spatial,
    #[default]
    Frequency,
}

impl std::str::FromStr for KernelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(KernelMode::Spatial),
            "frequency" => Ok(KernelMode::Frequency),
            _ => Err(Error::Config(format!("unknown kernel mode {s:?}"))),
        }
    }
}

/// A magnetic potential raster and the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub values: Grid<f64>,
    /// Sub-stroke ids summed into this field.
    pub members: Vec<u32>,
    /// Signs used, parallel to `members`.
    pub signs: Vec<Sign>,
}

impl PotentialField {
    /// Fraction of pixels with `|V| > 2π + OVERSHOOT`.
    pub fn overshoot_fraction(&self) -> f64 {
        let n = self.values.len().max(1);
        self.values.data().iter().filter(|v| v.abs() > TAU + OVERSHOOT).count() as f64 / n as f64
    }
}

/// Dipole weights of every stroke pixel of one sub-stroke (sign +1).
fn dipole_sources(scene: &StrokeScene, id: u32) -> Result<Vec<(Pixel, f64, f64)>> {
    let s = scene.substroke(id).ok_or(Error::UnknownSubstroke(id))?;
    s.pixels
        .iter()
        .map(|&p| {
            let theta = scene.normal_angle()[p];
            if !theta.is_finite() {
                return Err(Error::MissingOrientation { x: p.x, y: p.y });
            }
            let amp = scene.intensity()[p] * scene.density()[p];
            let (wx, wy) = PHASE.weights(theta);
            Ok((p, amp * wx, amp * wy))
        })
        .collect()
}

fn spatial_field(width: usize, height: usize, sources: &[(Pixel, f64, f64)], kernel: &DipoleKernel) -> Grid<f64> {
    let side = kernel.side();
    let h = kernel.half_extent();
    let mut out = vec![0.0; width * height];
    for &(q, wx, wy) in sources {
        if wx == 0.0 && wy == 0.0 {
            continue;
        }
        for y in 0..height {
            // row of kernel offsets dy = y - q.y
            let base = (y + h - q.y) * side + h - q.x;
            let krow = &kernel.values[base..base + width];
            let orow = &mut out[y * width..(y + 1) * width];
            for (o, k) in orow.iter_mut().zip(krow) {
                *o += wx * k.re + wy * k.im;
            }
        }
    }
    Grid::from_vec(width, height, out).expect("sized above")
}

/// Zero-padded FFT convolution with a fixed kernel spectrum.
struct FrequencyConvolver {
    width: usize,
    height: usize,
    mx: usize,
    my: usize,
    spectrum: Vec<Complex64>,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl FrequencyConvolver {
    fn new(width: usize, height: usize, kernel: &DipoleKernel) -> Self {
        let (mx, my) = (2 * width, 2 * height);
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(mx);
        let col_fwd = planner.plan_fft_forward(my);
        let row_inv = planner.plan_fft_inverse(mx);
        let col_inv = planner.plan_fft_inverse(my);
        // circular kernel: offset d stored at d mod M; the spatial
        // kernel is the conjugate pairing Kx + i Ky applied to wx - i wy
        let mut spectrum = vec![Complex64::new(0.0, 0.0); mx * my];
        let (w, hgt) = (width as isize, height as isize);
        for dy in -(hgt - 1)..hgt {
            for dx in -(w - 1)..w {
                let ix = dx.rem_euclid(mx as isize) as usize;
                let iy = dy.rem_euclid(my as isize) as usize;
                spectrum[iy * mx + ix] = kernel.at(dx, dy);
            }
        }
        let mut conv = Self {
            width,
            height,
            mx,
            my,
            spectrum: Vec::new(),
            row_fwd,
            col_fwd,
            row_inv,
            col_inv,
        };
        conv.forward(&mut spectrum, my);
        conv.spectrum = spectrum;
        conv
    }

    /// Forward 2D transform; only the first `rows` rows may be non-zero.
    fn forward(&self, buf: &mut [Complex64], rows: usize) {
        for row in buf.chunks_mut(self.mx).take(rows) {
            if row.iter().any(|c| c.re != 0.0 || c.im != 0.0) {
                self.row_fwd.process(row);
            }
        }
        let mut col = vec![Complex64::new(0.0, 0.0); self.my];
        for x in 0..self.mx {
            for y in 0..self.my {
                col[y] = buf[y * self.mx + x];
            }
            self.col_fwd.process(&mut col);
            for y in 0..self.my {
                buf[y * self.mx + x] = col[y];
            }
        }
    }

    fn convolve(&self, sources: &[(Pixel, f64, f64)]) -> Grid<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.mx * self.my];
        for &(p, wx, wy) in sources {
            buf[p.y * self.mx + p.x] += Complex64::new(wx, -wy);
        }
        self.forward(&mut buf, self.height);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        let mut col = vec![Complex64::new(0.0, 0.0); self.my];
        for x in 0..self.mx {
            for y in 0..self.my {
                col[y] = buf[y * self.mx + x];
            }
            self.col_inv.process(&mut col);
            for y in 0..self.height {
                buf[y * self.mx + x] = col[y];
            }
        }
        let scale = 1.0 / (self.mx * self.my) as f64;
        let mut out = Vec::with_capacity(self.width * self.height);
        for row in buf.chunks_mut(self.mx).take(self.height) {
            self.row_inv.process(row);
            out.extend(row[..self.width].iter().map(|c| c.re * scale));
        }
        Grid::from_vec(self.width, self.height, out).expect("sized above")
    }
}

/// Unit-sign potential of every sub-stroke, cached so that any sign
/// configuration is a signed sum rather than a new convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstrokeFields {
    width: usize,
    height: usize,
    fields: Vec<Grid<f64>>,
}

impl SubstrokeFields {
    pub fn compute(scene: &StrokeScene, kernel: &DipoleKernel, mode: KernelMode) -> Result<Self> {
        let (width, height) = scene.dims();
        if !kernel.covers(width, height) {
            return Err(Error::KernelTooSmall {
                half_extent: kernel.half_extent(),
                width,
                height,
            });
        }
        let sources = scene
            .substrokes()
            .iter()
            .map(|s| dipole_sources(scene, s.id))
            .collect::<Result<Vec<_>>>()?;
        let fields = match mode {
            KernelMode::Spatial => sources
                .par_iter()
                .map(|src| spatial_field(width, height, src, kernel))
                .collect(),
            KernelMode::Frequency => {
                if sources.is_empty() {
                    Vec::new()
                } else {
                    let conv = FrequencyConvolver::new(width, height, kernel);
                    sources.par_iter().map(|src| conv.convolve(src)).collect()
                }
            }
        };
        Ok(Self { width, height, fields })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Unit-sign field of sub-stroke `id`.
    pub fn field(&self, id: u32) -> Result<&Grid<f64>> {
        id.checked_sub(1)
            .and_then(|i| self.fields.get(i as usize))
            .ok_or(Error::UnknownSubstroke(id))
    }

    /// `Σ sign_i V_i` over all sub-strokes, in id order.
    pub fn combine(&self, signs: &[Sign]) -> Result<Grid<f64>> {
        if signs.len() != self.fields.len() {
            return Err(Error::Config(format!(
                "{} signs for {} sub-strokes",
                signs.len(),
                self.fields.len()
            )));
        }
        let mut out = Grid::filled(self.width, self.height, 0.0);
        for (f, s) in self.fields.iter().zip(signs) {
            out.add_scaled(f, s.value());
        }
        Ok(out)
    }

    /// Signed sum over the listed sub-strokes (ascending id order).
    pub fn combine_subset(&self, ids: &[u32], signs: &[Sign]) -> Result<PotentialField> {
        let mut members = ids.to_vec();
        members.sort_unstable();
        members.dedup();
        let mut out = Grid::filled(self.width, self.height, 0.0);
        let mut used = Vec::with_capacity(members.len());
        for &id in &members {
            let sign = *signs
                .get(id as usize - 1)
                .ok_or(Error::UnknownSubstroke(id))?;
            out.add_scaled(self.field(id)?, sign.value());
            used.push(sign);
        }
        Ok(PotentialField {
            values: out,
            members,
            signs: used,
        })
    }

    pub fn potential(&self, signs: &[Sign]) -> Result<PotentialField> {
        Ok(PotentialField {
            values: self.combine(signs)?,
            members: (1..=self.fields.len() as u32).collect(),
            signs: signs.to_vec(),
        })
    }
}

/// Magnetic potential of the scene with the given per-sub-stroke signs.
pub fn convolve_magnetic(
    scene: &StrokeScene,
    signs: &[Sign],
    kernel: &DipoleKernel,
    mode: KernelMode,
) -> Result<PotentialField> {
    SubstrokeFields::compute(scene, kernel, mode)?.potential(signs)
}

/// Potential of the straight segment from `(-x0, 0)` to `(x0, 0)` with
/// normals towards `+y`: `atan((x+x0)/y) - atan((x-x0)/y)`.
pub fn analytic_line_potential(x: f64, y: f64, x0: f64) -> f64 {
    if y == 0.0 {
        let ax = x.abs();
        return if ax < x0 {
            PI
        } else if ax > x0 {
            0.0
        } else {
            FRAC_PI_2
        };
    }
    ((x + x0) / y).atan() - ((x - x0) / y).atan()
}

/// Which reading of the half-space sign fix to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignFixReading {
    /// `V - 2π` for negative and `2π - V` for positive values inside `V⁺`,
    /// identity elsewhere.
    Literal,
    /// Maps into `[0, 2π)` inside `V⁺` and `(-2π, 0]` outside.
    Corrected,
}

pub fn sign_fix_line(v: f64, in_positive_halfspace: bool, reading: SignFixReading) -> f64 {
    match reading {
        SignFixReading::Literal => {
            if in_positive_halfspace && v < 0.0 {
                v - TAU
            } else if in_positive_halfspace && v > 0.0 {
                TAU - v
            } else {
                v
            }
        }
        SignFixReading::Corrected => {
            if in_positive_halfspace && v < 0.0 {
                v + TAU
            } else if !in_positive_halfspace && v > 0.0 {
                v - TAU
            } else {
                v
            }
        }
    }
}

/// Potential of a polyline stroke approximated by its chord, with the sign
/// fixed by the side of the extended stroke the point lies on.
pub fn chord_potential(stroke: &PolyStroke, point: (f64, f64), reading: SignFixReading) -> f64 {
    let (x, y) = stroke.to_frame(point);
    let v = analytic_line_potential(x, y, stroke.x0());
    sign_fix_line(v, stroke.in_positive_halfspace(point), reading)
}

/// Gradient of a potential raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectricField {
    pub ex: Grid<f64>,
    pub ey: Grid<f64>,
}

impl ElectricField {
    pub fn magnitude_sq(&self) -> Grid<f64> {
        Grid::from_fn(self.ex.width(), self.ex.height(), |x, y| {
            let (a, b) = (*self.ex.get(x, y), *self.ey.get(x, y));
            a * a + b * b
        })
    }
}

fn derivative(values: &[f64], i: usize, stride: usize, n: usize) -> f64 {
    // i is the index along the axis, stride the step between samples
    let at = |k: usize| values[k * stride];
    if i == 0 {
        at(1) - at(0)
    } else if i == n - 1 {
        at(n - 1) - at(n - 2)
    } else {
        (at(i + 1) - at(i - 1)) / 2.0
    }
}

/// Central differences inside, one-sided differences on the border.
pub fn electric_field(field: &Grid<f64>) -> Result<ElectricField> {
    let (w, h) = field.dims();
    if w < 3 || h < 3 {
        return Err(Error::Config(format!("field {w}x{h} smaller than 3x3")));
    }
    let data = field.data();
    let ex = Grid::from_fn(w, h, |x, y| derivative(&data[y * w..], x, 1, w));
    let ey = Grid::from_fn(w, h, |x, y| derivative(&data[x..], y, w, h));
    Ok(ElectricField { ex, ey })
}

/// Maximum absolute error against the analytic line of a calibration segment,
/// evaluated with the given convention.
fn calibration_error(convention: PhaseConvention) -> f64 {
    const N: usize = 48;
    let y0 = 24usize;
    let x0 = 10.0;
    let sources: Vec<(Pixel, f64, f64)> = (14..34)
        .map(|x| {
            let (wx, wy) = convention.weights(FRAC_PI_2);
            (Pixel::new(x, y0), wx, wy)
        })
        .collect();
    let kernel = DipoleKernel::covering(N, N).expect("non-zero extent");
    let v = spatial_field(N, N, &sources, &kernel);
    let cx = 23.5;
    let mut err: f64 = 0.0;
    for y in [y0 - 6, y0 - 3, y0 + 3, y0 + 6] {
        for x in [16usize, 20, 24, 28, 31] {
            let a = analytic_line_potential(x as f64 - cx, y as f64 - y0 as f64, x0);
            err = err.max((v.get(x, y) - a).abs());
        }
    }
    err
}

/// The convention that reproduces the analytic line potential.
pub fn calibrate_phase() -> PhaseConvention {
    *PhaseConvention::ALL
        .iter()
        .min_by(|a, b| calibration_error(**a).total_cmp(&calibration_error(**b)))
        .expect("non-empty")
}

/// Confirms that [`PHASE`] is the calibrated convention.
pub fn self_test() -> Result<()> {
    let found = calibrate_phase();
    if found != PHASE || calibration_error(PHASE) > 0.15 {
        return Err(Error::Invariant(format!(
            "phase convention {PHASE:?} does not reproduce the line potential (calibrated {found:?})"
        )));
    }
    Ok(())
}
