//! End-to-end driver from an edge raster to probability maps and a
//! reconstruction.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{self, DipoleKernel, KernelMode, PotentialField, SubstrokeFields};
use crate::grid::Grid;
use crate::io;
use crate::probability::{
    combine_subimages, potential_to_probability, sanitize, weight_field, ProbabilityField, SanitizeReport,
    DEFAULT_K,
};
use crate::repulsion::{build_groups, optimize_flips, FlipEvaluator, OptimizeOutcome, DEFAULT_RESTARTS, DEFAULT_VTH1, DEFAULT_VTH2};
use crate::split::{split_by_attraction, SubImageSet, DEFAULT_NEGLIGIBLE};
use crate::stroke::{apply_double_boundary, parse_double_boundary_flags, Sign, StrokeScene, DEFAULT_WINDOW};

/// Gray level of stroke pixels drawn over the reconstruction.
pub const STROKE_OVERLAY: u16 = 128;
/// Largest smoothstep order accepted.
pub const MAX_SMOOTH_K: u32 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub threshold: f64,
    pub window: usize,
    pub double_boundaries: Option<PathBuf>,
    pub orientation: Option<PathBuf>,
    pub kernel: KernelMode,
    pub optimize: bool,
    pub restarts: usize,
    pub vth1: f64,
    pub vth2: f64,
    pub split: bool,
    pub negligible: f64,
    pub smooth_k: u32,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            threshold: 0.5,
            window: DEFAULT_WINDOW,
            double_boundaries: None,
            orientation: None,
            kernel: KernelMode::Frequency,
            optimize: true,
            restarts: DEFAULT_RESTARTS,
            vth1: DEFAULT_VTH1,
            vth2: DEFAULT_VTH2,
            split: false,
            negligible: DEFAULT_NEGLIGIBLE,
            smooth_k: DEFAULT_K,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad(format!("threshold {} outside (0, 1]", self.threshold));
        }
        if self.window == 0 {
            return bad("orientation window must be at least 1".into());
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if !(self.vth1 > 0.0 && self.vth2 > 0.0 && self.vth1.is_finite() && self.vth2.is_finite()) {
            return bad(format!("thresholds must be positive, got {} and {}", self.vth1, self.vth2));
        }
        if !(self.negligible >= 0.0 && self.negligible.is_finite()) {
            return bad(format!("negligible threshold {} must be non-negative", self.negligible));
        }
        if self.smooth_k > MAX_SMOOTH_K {
            return bad(format!("smoothstep order {} above {MAX_SMOOTH_K}", self.smooth_k));
        }
        Ok(())
    }
}

/// Everything computed from one edge raster.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub scene: StrokeScene,
    pub fields: SubstrokeFields,
    pub optimization: Option<OptimizeOutcome>,
    pub signs: Vec<Sign>,
    pub potential: PotentialField,
    pub subimages: SubImageSet,
    /// Sanitized `P_S` of the whole scene.
    pub probability: ProbabilityField,
    pub sanitize_report: SanitizeReport,
    /// One weight per sub-image.
    pub weights: Vec<ProbabilityField>,
    pub combined: ProbabilityField,
}

/// Runs every stage on an in-memory raster. `flags` are double-boundary
/// sub-stroke ids; `orientation` overrides the estimated normals.
pub fn analyze(
    raster: &Grid<f64>,
    flags: &[u32],
    orientation: Option<&Grid<f64>>,
    cfg: &PipelineConfig,
) -> Result<Analysis> {
    cfg.validate()?;
    field::self_test()?;
    let mut scene = StrokeScene::from_raster(raster, cfg.threshold, cfg.window)?;
    if let Some(angles) = orientation {
        scene = scene.with_orientation_override(angles)?;
    }
    let scene = apply_double_boundary(&scene, flags)?;
    let (w, h) = scene.dims();
    let kernel = DipoleKernel::covering(w, h)?;
    let fields = SubstrokeFields::compute(&scene, &kernel, cfg.kernel)?;

    let initial = scene.signs();
    let optimization = if cfg.optimize && !scene.is_empty() && w >= 3 && h >= 3 {
        let groups = build_groups(&scene, &fields, cfg.vth1, cfg.vth2)?;
        let eval = FlipEvaluator::new(&fields, None)?;
        Some(optimize_flips(&eval, &groups, &initial, cfg.restarts, cfg.seed)?)
    } else {
        None
    };
    let signs = optimization
        .as_ref()
        .map_or_else(|| initial.clone(), |o| o.best.signs.clone());
    let potential = fields.potential(&signs)?;

    let subimages = if cfg.split {
        split_by_attraction(&scene, &fields, &signs, cfg.negligible)?
    } else {
        SubImageSet {
            members: vec![potential.members.clone()],
            fields: vec![potential.clone()],
        }
    };

    let (probability, sanitize_report) = sanitize(&potential_to_probability(&potential.values));
    let weights = subimages
        .fields
        .iter()
        .map(|f| weight_field(&sanitize(&potential_to_probability(&f.values)).0, cfg.smooth_k))
        .collect::<Result<Vec<_>>>()?;
    let combined = combine_subimages(&weights)?;
    if combined.values.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Invariant("combined weight outside [0, 1]".into()));
    }
    Ok(Analysis {
        scene: scene.with_signs(&signs)?,
        fields,
        optimization,
        signs,
        potential,
        subimages,
        probability,
        sanitize_report,
        weights,
        combined,
    })
}

/// 8-bit weight map with stroke pixels drawn at [`STROKE_OVERLAY`].
pub fn reconstruction(analysis: &Analysis) -> Grid<u16> {
    let labels = analysis.scene.labels();
    Grid::from_fn(labels.width(), labels.height(), |x, y| {
        if *labels.get(x, y) != 0 {
            STROKE_OVERLAY
        } else {
            (analysis.combined.values.get(x, y) * 255.0).round() as u16
        }
    })
}

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

/// Plain `key: value` metadata for a run.
pub fn sidecar(cfg: &PipelineConfig, flags: &[u32], analysis: &Analysis) -> String {
    let mut s = String::new();
    let (w, h) = analysis.scene.dims();
    let kernel = match cfg.kernel {
        KernelMode::Spatial => "spatial",
        KernelMode::Frequency => "frequency",
    };
    let _ = writeln!(s, "input: {}", cfg.input.display());
    let _ = writeln!(s, "width: {w}");
    let _ = writeln!(s, "height: {h}");
    let _ = writeln!(s, "threshold: {}", cfg.threshold);
    let _ = writeln!(s, "window: {}", cfg.window);
    let _ = writeln!(s, "kernel: {kernel}");
    let _ = writeln!(s, "optimize: {}", cfg.optimize);
    let _ = writeln!(s, "restarts: {}", cfg.restarts);
    let _ = writeln!(s, "vth1: {}", cfg.vth1);
    let _ = writeln!(s, "vth2: {}", cfg.vth2);
    let _ = writeln!(s, "split: {}", cfg.split);
    let _ = writeln!(s, "negligible: {}", cfg.negligible);
    let _ = writeln!(s, "smooth_k: {}", cfg.smooth_k);
    let _ = writeln!(s, "seed: {}", cfg.seed);
    let _ = writeln!(s, "orientation_override: {}", cfg.orientation.is_some());
    let _ = writeln!(s, "double_boundaries: {}", join(flags, ", "));
    let _ = writeln!(s, "substrokes: {}", analysis.scene.len());
    let _ = writeln!(s, "stroke_pixels: {}", analysis.scene.stroke_pixel_count());
    let _ = writeln!(s, "degenerate_pixels: {}", analysis.scene.degenerate_pixels().len());
    let _ = writeln!(s, "signs: {}", join(&analysis.signs, " "));
    if let Some(o) = &analysis.optimization {
        let _ = writeln!(s, "omega: {}", o.best.objective);
        let _ = writeln!(s, "omega_runs: {}", join(&o.runs, ", "));
        let accepted: Vec<String> = o
            .trace
            .iter()
            .filter(|r| r.accepted)
            .map(|r| format!("{}->{}", r.before, r.after))
            .collect();
        let _ = writeln!(s, "omega_trace: {}", accepted.join(", "));
    }
    s.push_str(&analysis.subimages.describe());
    let r = &analysis.sanitize_report;
    let _ = writeln!(s, "sanitize_above_one: {}", r.above_one);
    let _ = writeln!(s, "sanitize_above_1_10: {}", r.above_noise_limit);
    let _ = writeln!(s, "sanitize_repaired: {}", r.repaired);
    let _ = writeln!(s, "sanitize_clamped: {}", r.clamped);
    let _ = writeln!(s, "overshoot_fraction: {}", analysis.potential.overshoot_fraction());
    s
}

/// Files written by [`run_pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub potential: PathBuf,
    pub potential_preview: PathBuf,
    pub probability: PathBuf,
    pub probability_pgm: PathBuf,
    pub weight: PathBuf,
    pub weight_pgm: PathBuf,
    pub reconstruction: PathBuf,
    pub sidecar: PathBuf,
    pub optimizer_log: PathBuf,
}

impl Artifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            potential: dir.join("vm.raw"),
            potential_preview: dir.join("vm_preview.pgm"),
            probability: dir.join("ps.raw"),
            probability_pgm: dir.join("ps.pgm"),
            weight: dir.join("ws.raw"),
            weight_pgm: dir.join("ws.pgm"),
            reconstruction: dir.join("reconstruction.pgm"),
            sidecar: dir.join("sidecar.txt"),
            optimizer_log: dir.join("optimizer.log"),
        }
    }
}

/// Reads the configured inputs, runs [`analyze`] and writes every output.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(Analysis, Artifacts)> {
    cfg.validate()?;
    let raster = io::read_edge_raster(&cfg.input)?;
    let flags = match &cfg.double_boundaries {
        Some(p) => parse_double_boundary_flags(&fs::read_to_string(p)?)?,
        None => Vec::new(),
    };
    let orientation = cfg.orientation.as_ref().map(io::read_orientation_override).transpose()?;
    let analysis = analyze(&raster, &flags, orientation.as_ref(), cfg)?;

    fs::create_dir_all(&cfg.out_dir)?;
    let art = Artifacts::in_dir(&cfg.out_dir);
    io::write_f32_raster(&art.potential, &analysis.potential.values)?;
    io::write_pgm(&art.potential_preview, &io::potential_preview(&analysis.potential.values), 255)?;
    io::write_f32_raster(&art.probability, &analysis.probability.values)?;
    io::write_pgm(&art.probability_pgm, &io::probability_to_u16(&analysis.probability.values), 65535)?;
    io::write_f32_raster(&art.weight, &analysis.combined.values)?;
    io::write_pgm(&art.weight_pgm, &io::probability_to_u16(&analysis.combined.values), 65535)?;
    io::write_pgm(&art.reconstruction, &reconstruction(&analysis), 255)?;
    fs::write(&art.sidecar, sidecar(cfg, &flags, &analysis))?;
    let log = analysis
        .optimization
        .as_ref()
        .map_or_else(|| "optimization disabled\n".to_string(), OptimizeOutcome::log);
    fs::write(&art.optimizer_log, log)?;
    Ok((analysis, art))
}

/// Process exit status for an error: 2 bad input, 3 bad configuration,
/// 4 internal invariant breach.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Format(_) | Error::NotThinned { .. } | Error::Dimensions { .. } | Error::SelfIntersecting => 2,
        Error::Config(_) | Error::UnknownSubstroke(_) | Error::TooManySubstrokes(_) => 3,
        Error::MissingOrientation { .. }
        | Error::KernelTooSmall { .. }
        | Error::EmptyMask
        | Error::ProbabilityOutOfRange(_)
        | Error::Invariant(_) => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = [
            PipelineConfig { threshold: 0.0, ..Default::default() },
            PipelineConfig { window: 0, ..Default::default() },
            PipelineConfig { restarts: 0, ..Default::default() },
            PipelineConfig { vth1: -1.0, ..Default::default() },
            PipelineConfig { smooth_k: 99, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn empty_raster_gives_zero_fields() {
        let a = analyze(&Grid::filled(32, 24, 0.0), &[], None, &PipelineConfig::default()).unwrap();
        assert!(a.potential.values.data().iter().all(|&v| v == 0.0));
        assert!(a.combined.values.data().iter().all(|&v| v == 0.0));
        assert_eq!(a.subimages.members, vec![Vec::<u32>::new()]);
        assert!(a.optimization.is_none());
    }

    #[test]
    fn exit_codes_are_distinct_by_class() {
        assert_eq!(exit_code(&Error::Format("x".into())), 2);
        assert_eq!(exit_code(&Error::NotThinned { x: 0, y: 0, neighbors: 6 }), 2);
        assert_eq!(exit_code(&Error::Config("x".into())), 3);
        assert_eq!(exit_code(&Error::Invariant("x".into())), 4);
    }

    #[test]
    fn disabling_optimization_keeps_extracted_signs() {
        let raster = crate::scene::rasterize_circle(48, 48, 24.0, 24.0, 12.0);
        let cfg = PipelineConfig { optimize: false, ..Default::default() };
        let a = analyze(&raster, &[], None, &cfg).unwrap();
        assert!(a.signs.iter().all(|&s| s == Sign::Plus));
        assert!(a.optimization.is_none());
    }
}
