use std::fs;

use strokefield_core::io::{self, read_f32_raster, read_pgm, write_f32_raster, write_pgm};
use strokefield_core::pipeline::exit_code;
use strokefield_core::scene::{generate_scene, preset};
use strokefield_core::{run_pipeline, Error, Grid, PipelineConfig};

fn write_edges(dir: &std::path::Path, ablation: f64) -> std::path::PathBuf {
    let sc = generate_scene(96, 96, &preset("shapes3", 96).unwrap(), ablation, 3).unwrap();
    let path = dir.join("edges.pgm");
    write_pgm(&path, &sc.edges.map(|&v| (v * 255.0) as u16), 255).unwrap();
    path
}

#[test]
fn float_raster_round_trips_through_f32() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::from_fn(7, 5, |x, y| x as f64 * 0.25 - y as f64);
    let p = dir.path().join("g.raw");
    write_f32_raster(&p, &g).unwrap();
    assert_eq!(fs::read_to_string(io::header_path(&p)).unwrap(), "7 5\n");
    assert_eq!(read_f32_raster(&p).unwrap(), g);
}

#[test]
fn truncated_float_raster_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.raw");
    write_f32_raster(&p, &Grid::filled(4, 4, 1.0)).unwrap();
    fs::write(&p, [0u8; 10]).unwrap();
    assert!(matches!(read_f32_raster(&p), Err(Error::Format(_))));
}

#[test]
fn pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_edges(dir.path(), 0.2);
    let cfg = PipelineConfig {
        input,
        out_dir: dir.path().join("out"),
        split: true,
        ..PipelineConfig::default()
    };
    let (analysis, art) = run_pipeline(&cfg).unwrap();
    let v = read_f32_raster(&art.potential).unwrap();
    assert_eq!(v.dims(), (96, 96));
    for (a, b) in v.data().iter().zip(analysis.potential.values.data()) {
        assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0));
    }
    let ps = read_pgm(&art.probability_pgm).unwrap();
    assert_eq!(ps.maxval, 65535);
    assert_eq!(read_pgm(&art.potential_preview).unwrap().maxval, 255);
    let recon = read_pgm(&art.reconstruction).unwrap();
    assert_eq!(recon.samples.dims(), (96, 96));
    let ws = read_f32_raster(&art.weight).unwrap();
    assert!(ws.data().iter().all(|w| (0.0..=1.0).contains(w)));
    let sidecar = fs::read_to_string(&art.sidecar).unwrap();
    for key in ["substrokes:", "signs:", "omega:", "subimage 0:", "sanitize_clamped:"] {
        assert!(sidecar.contains(key), "sidecar lacks {key}");
    }
    let log = fs::read_to_string(&art.optimizer_log).unwrap();
    assert!(log.starts_with("run\tsweep\tgroup"));
}

#[test]
fn double_boundary_file_with_unknown_id_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_edges(dir.path(), 0.0);
    let flags = dir.path().join("db.txt");
    fs::write(&flags, "999\n").unwrap();
    let cfg = PipelineConfig {
        input,
        double_boundaries: Some(flags),
        out_dir: dir.path().join("out"),
        ..PipelineConfig::default()
    };
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(exit_code(&err), 3, "{err}");
}

#[test]
fn missing_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        input: dir.path().join("nope.pgm"),
        out_dir: dir.path().join("out"),
        ..PipelineConfig::default()
    };
    assert_eq!(exit_code(&run_pipeline(&cfg).unwrap_err()), 2);
}
