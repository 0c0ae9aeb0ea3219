//! Inclusion probability of pixels inside partial contours.
//!
//! Stroke pixels carry dipoles perpendicular to the stroke. Their convolved
//! potential `V` measures the angle of the circular paths that close the
//! stroke through a point, so `|V| / 2π` is the probability of lying inside
//! the implied region. Sub-stroke orientations are chosen by maximizing the
//! variance of `|∇V|²`, and a circle-geometry oracle provides an independent
//! reference for the probabilities.
//!
//! ```
//! use strokefield_core::{analyze, scene, PipelineConfig};
//!
//! let edges = scene::rasterize_circle(64, 64, 32.0, 32.0, 20.0);
//! let out = analyze(&edges, &[], None, &PipelineConfig::default()).unwrap();
//! assert!(out.probability.values.get(32, 32) > &0.95);
//! ```

pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod pipeline;
pub mod probability;
pub mod repulsion;
pub mod scene;
pub mod split;
pub mod stroke;

pub use error::{Error, Result};
pub use field::{
    analytic_line_potential, chord_potential, convolve_magnetic, dipole_kernel, electric_field, sign_fix_line,
    DipoleKernel, ElectricField, KernelMode, PhaseConvention, PotentialField, SignFixReading, SubstrokeFields,
};
pub use grid::{Grid, Pixel};
pub use oracle::{circle_from_angle, finite_probability, oracle_probability, region_membership, CircleArc, PolyStroke};
pub use pipeline::{analyze, run_pipeline, Analysis, PipelineConfig};
pub use probability::{
    combine_subimages, potential_to_probability, sanitize, smoothstep_weight, ProbabilityField, ProbabilityKind,
};
pub use repulsion::{
    brute_force_flips, build_groups, optimize_flips, variance_objective, FlipEvaluator, FlipGroupList,
    SignConfiguration,
};
pub use split::{interaction_sign, split_by_attraction, Interaction, SubImageSet};
pub use stroke::{
    apply_double_boundary, density_factor, estimate_orientation, extract_substrokes, Sign, StrokeScene, SubStroke,
};
