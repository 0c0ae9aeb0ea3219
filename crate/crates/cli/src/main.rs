use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use strokefield_core::field::KernelMode;
use strokefield_core::oracle::{oracle_map, PolyStroke, DEFAULT_SAMPLES};
use strokefield_core::pipeline::{exit_code, run_pipeline, PipelineConfig};
use strokefield_core::scene::{double_boundary_ids, generate_scene, preset, Shape};
use strokefield_core::{io, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "strokefield", version, about = "Inclusion probability maps from partial contours")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute potential, probability and reconstruction for an edge raster.
    Run(RunArgs),
    /// Generate a synthetic edge raster with ground truth.
    Gen(GenArgs),
    /// Rasterize the circle-oracle probability of a polyline stroke.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Orientation window radius in pixels.
    #[arg(long, default_value_t = strokefield_core::stroke::DEFAULT_WINDOW)]
    window: usize,
    /// File with one double-boundary sub-stroke id per line.
    #[arg(long)]
    double_boundaries: Option<PathBuf>,
    /// 16-bit graymap of normal angles in radians × 1000.
    #[arg(long)]
    orientation: Option<PathBuf>,
    #[arg(long, default_value = "frequency")]
    kernel: KernelMode,
    #[arg(long, default_value_t = strokefield_core::repulsion::DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = strokefield_core::repulsion::DEFAULT_VTH1)]
    vth1: f64,
    #[arg(long, default_value_t = strokefield_core::repulsion::DEFAULT_VTH2)]
    vth2: f64,
    /// Split into sub-images without attractive pairs.
    #[arg(long)]
    split: bool,
    /// Keep the extracted orientation signs.
    #[arg(long)]
    no_optimize: bool,
    #[arg(long, default_value_t = strokefield_core::probability::DEFAULT_K)]
    smooth_k: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Shape such as `circle:cx,cy,r`, `rect:x0,y0,x1,y1`, `poly:x,y,...` or
    /// `blob:cx,cy,r,amp,lobes`. Repeatable.
    #[arg(long = "shape")]
    shapes: Vec<Shape>,
    /// Named scene: circle, multi, adjacent or shapes3.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    /// Fraction of each outline removed, in [0, 0.9].
    #[arg(long, default_value_t = 0.0)]
    ablation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge raster output (8-bit graymap).
    #[arg(long)]
    out: PathBuf,
    /// Filled ground truth output (8-bit graymap).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Ids of sub-strokes on shared outlines, one per line.
    #[arg(long)]
    double_boundaries: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Polyline vertex `x,y` in pixel units. Repeat in stroke order, at
    /// least twice.
    #[arg(long = "point", required = true)]
    points: Vec<String>,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Float raster output; a `.hdr` companion is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Optional 16-bit graymap of the same map.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

fn parse_point(s: &str) -> Result<(f64, f64)> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| Error::Config(format!("point {s:?} is not x,y")))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad coordinate {t:?}")))
    };
    Ok((num(x)?, num(y)?))
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = PipelineConfig {
        input: args.input,
        threshold: args.threshold,
        window: args.window,
        double_boundaries: args.double_boundaries,
        orientation: args.orientation,
        kernel: args.kernel,
        optimize: !args.no_optimize,
        restarts: args.restarts,
        vth1: args.vth1,
        vth2: args.vth2,
        split: args.split,
        smooth_k: args.smooth_k,
        out_dir: args.out,
        seed: args.seed,
        ..PipelineConfig::default()
    };
    let (analysis, art) = run_pipeline(&cfg)?;
    println!(
        "{} sub-strokes, {} sub-images, outputs in {}",
        analysis.scene.len(),
        analysis.subimages.members.len(),
        cfg.out_dir.display()
    );
    println!("sidecar: {}", art.sidecar.display());
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let mut shapes = args.shapes;
    if let Some(name) = &args.preset {
        shapes.extend(preset(name, args.width.min(args.height))?);
    }
    if shapes.is_empty() {
        return Err(Error::Config("no shapes given; use --shape or --preset".into()));
    }
    let sc = generate_scene(args.width, args.height, &shapes, args.ablation, args.seed)?;
    let to_u8 = |g: &strokefield_core::Grid<f64>| g.map(|&v| if v > 0.0 { 255u16 } else { 0 });
    io::write_pgm(&args.out, &to_u8(&sc.edges), 255)?;
    if let Some(p) = &args.truth {
        io::write_pgm(p, &to_u8(&sc.truth), 255)?;
    }
    if let Some(p) = &args.double_boundaries {
        let subs = strokefield_core::extract_substrokes(&sc.edges, 0.5)?;
        let ids = double_boundary_ids(&subs, &sc.double_boundary);
        let text: String = ids.iter().map(|id| format!("{id}\n")).collect();
        fs::write(p, text)?;
    }
    println!(
        "{} of {} outline pixels kept",
        sc.retained_pixels(),
        sc.outline_pixels
    );
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let points = args.points.iter().map(|s| parse_point(s)).collect::<Result<Vec<_>>>()?;
    if points.len() < 2 {
        return Err(Error::Config("a stroke needs at least two --point vertices".into()));
    }
    let stroke = PolyStroke::new(points)?;
    let map = oracle_map(&stroke, args.width, args.height, args.samples)?;
    io::write_f32_raster(&args.out, &map)?;
    if let Some(p) = &args.pgm {
        io::write_pgm(p, &io::probability_to_u16(&map), 65535)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Gen(a) => gen(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("strokefield: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
