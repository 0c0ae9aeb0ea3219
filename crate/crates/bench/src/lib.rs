//! Shared fixtures for the benchmarks.

use strokefield_core::field::{DipoleKernel, KernelMode, SubstrokeFields};
use strokefield_core::scene::{generate_scene, preset};
use strokefield_core::StrokeScene;

/// The "multi" preset at `size`², a quarter of each outline removed.
pub fn multi_scene(size: usize) -> StrokeScene {
    let sc = generate_scene(size, size, &preset("multi", size).expect("known preset"), 0.25, 1).expect("valid scene");
    StrokeScene::from_raster(&sc.edges, 0.5, strokefield_core::stroke::DEFAULT_WINDOW).expect("thin strokes")
}

pub fn fields(scene: &StrokeScene, mode: KernelMode) -> SubstrokeFields {
    let (w, h) = scene.dims();
    let kernel = DipoleKernel::covering(w, h).expect("non-empty scene");
    SubstrokeFields::compute(scene, &kernel, mode).expect("kernel covers scene")
}
