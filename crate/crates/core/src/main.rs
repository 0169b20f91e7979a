use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use dualmesh::field_spec::FieldSpec;
use dualmesh::metrics::{self, DEFAULT_SAMPLES, DEFAULT_THRESHOLD};
use dualmesh::octree::{write_leaves_jsonl, DEFAULT_EPSILON, DEFAULT_MAX_DEPTH};
use dualmesh::vertexer::{
    write_vertices_jsonl, FilterParams, DEFAULT_DELTA1, DEFAULT_DELTA2, DEFAULT_FALLBACK_DELTA1, DEFAULT_SIGMA_RATIO,
};
use dualmesh::mesher::DEFAULT_NORMAL_TOLERANCE_DEG;
use dualmesh::{io, shapes, ExtractConfig, Point3, Vector3};

#[derive(Parser)]
#[command(name = "dualmesh", version, about = "Extract triangle meshes from unsigned distance fields")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a mesh and write it with a JSON report.
    Extract(ExtractArgs),
    /// Compare two meshes: Chamfer distance, F-score, Hausdorff distance.
    Eval(EvalArgs),
    /// Print distance and gradient at points as CSV.
    Probe(ProbeArgs),
    /// Write a parametric reference mesh.
    Shape(ShapeArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Field spec, e.g. analytic:sphere:0.5, mesh:in.obj, mlp:w.udfw, noisy:1:analytic:box:0.5
    #[arg(long)]
    field: String,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    max_depth: u32,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA1)]
    delta1: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA2)]
    delta2: f64,
    #[arg(long, default_value_t = DEFAULT_FALLBACK_DELTA1)]
    fallback_delta1: f64,
    /// Keep every sample with a usable gradient.
    #[arg(long)]
    no_filter: bool,
    #[arg(long, default_value_t = DEFAULT_SIGMA_RATIO)]
    sigma_ratio: f64,
    /// Degrees.
    #[arg(long, default_value_t = DEFAULT_NORMAL_TOLERANCE_DEG)]
    normal_tolerance: f64,
    /// Restrict connectivity to the outer envelope of the blocky model.
    #[arg(long)]
    manifold: bool,
    /// 125 samples per cell instead of 27.
    #[arg(long)]
    dense_sampling: bool,
    /// Output mesh, .obj or .ply.
    #[arg(long)]
    out: PathBuf,
    /// JSON report; defaults to the mesh path with a .json extension.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    dump_leaves: Option<PathBuf>,
    #[arg(long)]
    dump_vertices: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
    Both,
}

#[derive(Args)]
struct EvalArgs {
    candidate: PathBuf,
    reference: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Both)]
    format: ReportFormat,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    field: String,
    /// One point per line, `x y z` or `x,y,z`; `-` reads stdin.
    #[arg(long)]
    points: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeKind {
    Sphere,
    Box,
    Disk,
    Mobius,
    Torus,
}

#[derive(Args)]
struct ShapeArgs {
    #[arg(value_enum)]
    kind: ShapeKind,
    #[arg(long)]
    out: PathBuf,
    /// Sphere, disk and torus radius, box half extent, strip centerline radius.
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
    /// Strip half-width or torus tube radius.
    #[arg(long, default_value_t = 0.2)]
    width: f64,
    /// Tessellation level.
    #[arg(long, default_value_t = 64)]
    detail: u32,
}

/// Files created by a command, removed again if it fails.
#[derive(Default)]
struct Outputs(Vec<PathBuf>);

impl Outputs {
    fn create(&mut self, path: &Path) -> Result<BufWriter<File>> {
        let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        self.0.push(path.to_path_buf());
        Ok(BufWriter::new(f))
    }

    fn claim(&mut self, path: &Path) {
        self.0.push(path.to_path_buf());
    }

    fn discard(&self) {
        for p in &self.0 {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn extract(args: &ExtractArgs, outputs: &mut Outputs) -> Result<()> {
    let spec: FieldSpec = args.field.parse()?;
    dualmesh::io::MeshFormat::from_path(&args.out)?;
    let field = spec.build()?;
    let filter = if args.no_filter {
        FilterParams::disabled()
    } else {
        FilterParams {
            delta1: args.delta1,
            delta2: args.delta2,
            fallback_delta1: args.fallback_delta1,
        }
    };
    let config = ExtractConfig {
        max_depth: args.max_depth,
        epsilon: args.epsilon,
        filter,
        sigma_ratio: args.sigma_ratio,
        normal_tolerance_deg: args.normal_tolerance,
        samples_per_axis: if args.dense_sampling { 5 } else { 3 },
        manifold: args.manifold,
    };
    let start = Instant::now();
    let run = dualmesh::extract(&field, &config)?;
    info!("extracted in {:.2?}", start.elapsed());

    outputs.claim(&args.out);
    dualmesh::mesher::emit(&run.mesh, &args.out)?;
    let report_path = args.report.clone().unwrap_or_else(|| args.out.with_extension("json"));
    let mut w = outputs.create(&report_path)?;
    serde_json::to_writer_pretty(&mut w, &run.report)?;
    writeln!(w)?;
    w.flush()?;
    if let Some(path) = &args.dump_leaves {
        let mut w = outputs.create(path)?;
        write_leaves_jsonl(&run.leaves, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.dump_vertices {
        let mut w = outputs.create(path)?;
        write_vertices_jsonl(run.vertices.values(), &mut w)?;
        w.flush()?;
    }
    let r = &run.report;
    println!(
        "{}: {} vertices, {} triangles, {} boundary edges, {} components",
        args.out.display(),
        r.vertices,
        r.triangles,
        r.boundary_edges,
        r.components
    );
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let candidate = io::read_mesh(&args.candidate)?;
    let reference = io::read_mesh(&args.reference)?;
    let report = metrics::evaluate(&candidate, &reference, args.samples, args.threshold, args.seed)?;
    if matches!(args.format, ReportFormat::Table | ReportFormat::Both) {
        print!("{report}");
    }
    if matches!(args.format, ReportFormat::Json | ReportFormat::Both) {
        println!("{}", serde_json::to_string(&report)?);
    }
    Ok(())
}

fn read_points(path: &Path) -> Result<Vec<Point3>> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(BufReader::new(std::io::stdin()))
    } else {
        Box::new(BufReader::new(
            File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
        ))
    };
    let mut points = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let c: Vec<f64> = t
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}:{}: bad number", path.display(), n + 1))?;
        if c.len() != 3 {
            bail!("{}:{}: expected three coordinates", path.display(), n + 1);
        }
        points.push(Point3::new(c[0], c[1], c[2]));
    }
    Ok(points)
}

fn probe(args: &ProbeArgs, outputs: &mut Outputs) -> Result<()> {
    let field = args.field.parse::<FieldSpec>()?.build()?;
    let points = read_points(&args.points)?;
    if points.is_empty() {
        bail!("{}: no points", args.points.display());
    }
    let r = dualmesh::field::eval_parallel(&field, &points)?;
    let mut w: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(outputs.create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(w, "x,y,z,d,gx,gy,gz")?;
    for ((p, d), g) in points.iter().zip(&r.distances).zip(&r.gradients) {
        writeln!(w, "{},{},{},{},{},{},{}", p.x, p.y, p.z, d, g.x, g.y, g.z)?;
    }
    w.flush()?;
    Ok(())
}

fn shape(args: &ShapeArgs, outputs: &mut Outputs) -> Result<()> {
    let n = args.detail.max(3);
    let o = Point3::origin();
    let mesh = match args.kind {
        ShapeKind::Sphere => shapes::uv_sphere(o, args.radius, 2 * n, n),
        ShapeKind::Box => shapes::cuboid(o, Vector3::repeat(args.radius), n.div_ceil(4)),
        ShapeKind::Disk => shapes::disk(o, args.radius, n.div_ceil(4), 4 * n),
        ShapeKind::Mobius => shapes::mobius_strip(args.radius, args.width, 4 * n, n.div_ceil(4)),
        ShapeKind::Torus => torus_mesh(args.radius, args.width, 2 * n, n),
    };
    outputs.claim(&args.out);
    io::write_mesh(&mesh, &args.out)?;
    println!("{}: {} vertices, {} triangles", args.out.display(), mesh.vertices.len(), mesh.triangles.len());
    Ok(())
}

fn torus_mesh(major: f64, minor: f64, around: u32, tube: u32) -> dualmesh::IndexedMesh {
    use std::f64::consts::TAU;
    let mut vertices = Vec::new();
    for i in 0..around {
        let u = TAU * i as f64 / around as f64;
        for j in 0..tube {
            let v = TAU * j as f64 / tube as f64;
            let r = major + minor * v.cos();
            vertices.push(Point3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: u32, j: u32| (i % around) * tube + (j % tube);
    let mut triangles = Vec::new();
    for i in 0..around {
        for j in 0..tube {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    dualmesh::IndexedMesh::new(vertices, triangles)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start thread pool: {e}");
        return ExitCode::FAILURE;
    }
    let mut outputs = Outputs::default();
    let result = match &cli.command {
        Command::Extract(a) => extract(a, &mut outputs),
        Command::Eval(a) => eval(a),
        Command::Probe(a) => probe(a, &mut outputs),
        Command::Shape(a) => shape(a, &mut outputs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            outputs.discard();
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
