use std::fs;
use std::path::{Path, PathBuf};

use ndf::data::{
    make_curve_dataset, make_sample_set, read_dataset, write_dataset, Curve2DSpec, CurveKind, SampleSet,
    SamplingPolicy, ShapeMeta,
};
use ndf::extract::{extract_dense, extract_with_normals};
use ndf::geom::io::{read_cloud, write_cloud};
use ndf::geom::{chamfer_l2, sample_surface, unit_box, PointCloud, Surface};
use ndf::neural::{load_checkpoint, save_checkpoint, train as fit, Conditioning, NeuralModel, ShapeInput};
use ndf::trace::{encode_depth_pgm, encode_normal_ppm, encode_shaded_ppm, regress as regress_roots, render as trace_image, Camera};
use ndf::{exact_field, DistanceField};
use serde_json::{json, Value};

use crate::shapes::{shape_or_file, ShapeSpec};
use crate::{
    io_err, require, CliError, EvalArgs, ExtractArgs, FieldArgs, MakeDataArgs, RegressArgs, RenderArgs, TrainArgs,
    SURFACE_SAMPLES, SURFACE_SPARSE_K,
};

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes") + "\n"
}

/// Fails early when the output directory does not exist.
fn check_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(CliError::Usage(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn check_cloud_ext(path: &Path) -> Result<(), CliError> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ply" | "xyz") => Ok(()),
        _ => Err(CliError::Usage(format!("{}: clouds are written as .ply or .xyz", path.display()))),
    }
}

fn check_in_box<const D: usize>(spec: &str, s: &dyn Surface<D>) -> Result<(), CliError> {
    let b = s.bounds();
    let bx = unit_box::<D>();
    if !(bx.contains(&b.min) && bx.contains(&b.max)) {
        return Err(CliError::Shape {
            spec: spec.into(),
            message: "shape leaves the [-0.5, 0.5] box; scale it or use a mesh file (normalized on load)".into(),
        });
    }
    Ok(())
}

// make-data

pub fn make_data(a: &MakeDataArgs) -> Result<String, CliError> {
    let out = require(a.out.as_deref(), "out")?;
    let policy = SamplingPolicy {
        surface_fraction: a.surface_fraction,
        sigmas: a.sigmas.clone(),
    };
    policy.validate()?;
    match (&a.curves, a.shape.is_empty()) {
        (Some(_), false) => Err(CliError::Usage("--shape and --curves are exclusive".into())),
        (None, true) => Err(CliError::Usage("give --shape (repeatable) or --curves".into())),
        (Some(kind), true) => make_curves(a, kind, out, policy),
        (None, false) => {
            let specs: Vec<ShapeSpec> = a.shape.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            let dim = specs[0].dim()?;
            if specs.iter().any(|s| s.dim().ok() != Some(dim)) {
                return Err(CliError::Usage("all shapes of a dataset need the same dimension".into()));
            }
            if dim == 2 {
                make_shapes::<2>(a, &specs, out, &policy, |s| s.surface2())
            } else {
                make_shapes::<3>(a, &specs, out, &policy, |s| s.surface3())
            }
        }
    }
}

fn make_shapes<const D: usize>(
    a: &MakeDataArgs,
    specs: &[ShapeSpec],
    out: &Path,
    policy: &SamplingPolicy,
    build: impl Fn(&ShapeSpec) -> Result<Box<dyn Surface<D>>, CliError>,
) -> Result<String, CliError> {
    let surfaces: Vec<Box<dyn Surface<D>>> = specs
        .iter()
        .map(|s| {
            let surface = build(s)?;
            check_in_box(&s.to_string(), surface.as_ref())?;
            Ok(surface)
        })
        .collect::<Result<_, CliError>>()?;
    let samples = a.samples.unwrap_or(SURFACE_SAMPLES);
    let sparse_k = a.sparse_k.unwrap_or(SURFACE_SPARSE_K);
    let mut sets = Vec::with_capacity(specs.len());
    for (i, (spec, surface)) in specs.iter().zip(&surfaces).enumerate() {
        let seed = a.seed.wrapping_add(i as u64);
        let id = format!("shape_{i:03}");
        let set = make_sample_set(id.clone(), surface, samples, sparse_k, policy, seed)?;
        let meta = ShapeMeta {
            id,
            dim: D,
            seed,
            split: "train".into(),
            spec: spec.to_json(),
        };
        sets.push((set, meta));
    }
    write_dataset(out, &sets)?;
    Ok(format!(
        "wrote {} shape(s), {samples} samples and {sparse_k} input points each, to {}\n",
        sets.len(),
        out.display()
    ))
}

fn make_curves(a: &MakeDataArgs, kind: &str, out: &Path, policy: SamplingPolicy) -> Result<String, CliError> {
    let kinds: Vec<CurveKind> = match kind {
        "all" => CurveKind::ALL.to_vec(),
        k => vec![CurveKind::ALL
            .into_iter()
            .find(|c| c.name() == k)
            .ok_or_else(|| CliError::Usage(format!("unknown curve family `{k}`")))?],
    };
    let mut sets = vec![];
    let (mut train, mut test) = (0, 0);
    for kind in kinds {
        let base = Curve2DSpec::new(kind);
        let spec = Curve2DSpec {
            samples_per_curve: a.samples.unwrap_or(base.samples_per_curve),
            sparse_k: a.sparse_k.unwrap_or(base.sparse_k),
            policy: policy.clone(),
            test_fraction: a.test_fraction,
            ..base
        };
        // each family keeps its seed whether built alone or with the others
        let seed = a.seed.wrapping_add(CurveKind::ALL.iter().position(|k| *k == kind).unwrap() as u64);
        let ds = make_curve_dataset(&spec, a.count, seed)?;
        train += ds.train.len();
        test += ds.test.len();
        for (split, part) in [("train", ds.train), ("test", ds.test)] {
            for cs in part {
                let meta = ShapeMeta {
                    id: cs.set.id.clone(),
                    dim: 2,
                    seed,
                    split: split.into(),
                    spec: json!({ "curve": cs.curve.shape }),
                };
                sets.push((cs.set, meta));
            }
        }
    }
    write_dataset(out, &sets)?;
    Ok(format!("wrote {} curves ({train} train, {test} test) to {}\n", sets.len(), out.display()))
}

// train

fn dataset_dim(dir: &Path) -> Result<usize, CliError> {
    let mut subs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("meta.json"))
        .filter(|p| p.is_file())
        .collect();
    subs.sort();
    let first = subs
        .first()
        .ok_or_else(|| CliError::Usage(format!("{} holds no shapes", dir.display())))?;
    let text = fs::read_to_string(first).map_err(io_err(first))?;
    let meta: ShapeMeta =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", first.display())))?;
    match meta.dim {
        2 | 3 => Ok(meta.dim),
        d => Err(CliError::Config(format!("{}: unsupported dimension {d}", first.display()))),
    }
}

pub fn train(a: &TrainArgs) -> Result<String, CliError> {
    let data = require(a.data.as_deref(), "data")?;
    let out = require(a.out.as_deref(), "out")?;
    let cfg = a.train_config();
    cfg.validate()?;
    check_parent(out)?;
    let metrics = a
        .metrics
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.metrics.json", out.display())));
    check_parent(&metrics)?;
    let dim = dataset_dim(data)?;
    let mut arch = a.arch(dim);
    if dim == 2 {
        train_dim::<2>(a, data, out, &metrics, &mut arch)
    } else {
        train_dim::<3>(a, data, out, &metrics, &mut arch)
    }
}

fn train_dim<const D: usize>(
    a: &TrainArgs,
    data: &Path,
    out: &Path,
    metrics: &Path,
    arch: &mut ndf::neural::Arch,
) -> Result<String, CliError> {
    let sets: Vec<SampleSet<D>> = read_dataset::<D>(data)?
        .into_iter()
        .filter(|(_, m)| m.split == a.split)
        .map(|(s, _)| s)
        .collect();
    if sets.is_empty() {
        return Err(CliError::Usage(format!("no `{}` shapes in {}", a.split, data.display())));
    }
    if let Conditioning::AutoDecoder { shapes } = &mut arch.conditioning {
        *shapes = sets.len();
    }
    arch.validate()?;
    let cfg = a.train_config();
    let (model, log) = fit::<D, f32>(arch.clone(), &sets, &cfg)?;
    save_checkpoint(&model, out)?;
    let last = log.epochs.last();
    let report = json!({
        "dim": D,
        "shapes": sets.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(),
        "parameters": model.params().len(),
        "arch": model.arch(),
        "config": cfg,
        "final_train_loss": last.map(|e| e.train_loss),
        "final_val_loss": log.last_val(),
        "epochs": log.epochs,
    });
    write_file(metrics, pretty(&report))?;
    Ok(format!(
        "trained on {} shape(s) for {} epochs: train loss {:.6}, val loss {}; wrote {}\n",
        sets.len(),
        cfg.epochs,
        last.map_or(f64::NAN, |e| e.train_loss),
        log.last_val().map_or("n/a".into(), |v| format!("{v:.6}")),
        out.display()
    ))
}

// field sources

enum Source {
    Analytic(ShapeSpec),
    Model {
        model: NeuralModel<f32>,
        input: Option<PathBuf>,
        index: Option<usize>,
    },
}

impl Source {
    fn open(a: &FieldArgs) -> Result<Self, CliError> {
        match (&a.ckpt, &a.analytic) {
            (Some(_), Some(_)) => Err(CliError::Usage("--ckpt and --analytic are exclusive".into())),
            (None, None) => Err(CliError::Usage("give --ckpt or --analytic".into())),
            (None, Some(spec)) => Ok(Self::Analytic(shape_or_file(spec)?)),
            (Some(path), None) => {
                let model = load_checkpoint(path)?;
                match model.arch().conditioning {
                    Conditioning::Encoder if a.input.is_none() => {
                        return Err(CliError::Usage("--input is required for encoder checkpoints".into()))
                    }
                    Conditioning::AutoDecoder { shapes } => match a.shape_index {
                        None => return Err(CliError::Usage("--shape-index is required for auto-decoder checkpoints".into())),
                        Some(i) if i >= shapes => {
                            return Err(CliError::Usage(format!("--shape-index {i} out of range (model has {shapes} shapes)")))
                        }
                        _ => {}
                    },
                    _ => {}
                }
                Ok(Self::Model {
                    model,
                    input: a.input.clone(),
                    index: a.shape_index,
                })
            }
        }
    }

    fn dim(&self) -> Result<usize, CliError> {
        match self {
            Self::Analytic(s) => s.dim(),
            Self::Model { model, .. } => Ok(model.arch().dim),
        }
    }

    fn field<const D: usize>(
        &self,
        build: impl Fn(&ShapeSpec) -> Result<Box<dyn Surface<D>>, CliError>,
    ) -> Result<Box<dyn DistanceField<D>>, CliError> {
        Ok(match self {
            Self::Analytic(s) => Box::new(exact_field(build(s)?)?),
            Self::Model { model, input, index } => match (input, index) {
                (_, Some(i)) if matches!(model.arch().conditioning, Conditioning::AutoDecoder { .. }) => {
                    Box::new(model.field::<D>(ShapeInput::Index(*i))?)
                }
                (Some(path), _) => {
                    let pc: PointCloud<D> = read_cloud(path)?;
                    Box::new(model.condition(&pc)?)
                }
                _ => unreachable!("checked in open"),
            },
        })
    }
}

// extract

pub fn extract(a: &ExtractArgs) -> Result<String, CliError> {
    let out = require(a.out.as_deref(), "out")?;
    check_cloud_ext(out)?;
    check_parent(out)?;
    let cfg = a.extract_config();
    cfg.validate()?;
    let src = Source::open(&a.field)?;
    match src.dim()? {
        2 => {
            let f = src.field::<2>(|s| s.surface2())?;
            let e = if a.normals { extract_with_normals(&*f, &cfg)? } else { extract_dense(&*f, &cfg)? };
            write_cloud(out, &e.cloud)?;
            Ok(extract_summary(e.cloud.len(), e.rounds, e.dropped, out))
        }
        _ => {
            let f = src.field::<3>(|s| s.surface3())?;
            let e = if a.normals { extract_with_normals(&*f, &cfg)? } else { extract_dense(&*f, &cfg)? };
            write_cloud(out, &e.cloud)?;
            Ok(extract_summary(e.cloud.len(), e.rounds, e.dropped, out))
        }
    }
}

fn extract_summary(n: usize, rounds: usize, dropped: usize, out: &Path) -> String {
    format!(
        "extracted {n} points ({rounds} seeding round(s), {dropped} dropped) to {}\n",
        out.display()
    )
}

// render

pub fn render(a: &RenderArgs) -> Result<String, CliError> {
    let prefix = require(a.out.as_deref(), "out")?;
    check_parent(prefix)?;
    let cfg = a.trace.trace_config();
    cfg.validate()?;
    let file = match &a.camera {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            Some(serde_json::from_str::<Camera>(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let cam = a.camera(file)?;
    let src = Source::open(&a.field)?;
    if src.dim()? != 3 {
        return Err(CliError::Usage("render needs a 3D field".into()));
    }
    let f = src.field::<3>(|s| s.surface3())?;
    let img = trace_image(&*f, &cam, &cfg)?;
    let path = |ext: &str| PathBuf::from(format!("{}.{ext}", prefix.display()));
    write_file(&path("depth.pgm"), encode_depth_pgm(&img))?;
    write_file(&path("normals.ppm"), encode_normal_ppm(&img))?;
    write_file(&path("shaded.ppm"), encode_shaded_ppm(&img))?;
    let stats = json!({ "camera": cam, "trace": cfg, "stats": img.stats });
    write_file(&path("stats.json"), pretty(&stats))?;
    Ok(format!(
        "rendered {}x{}: {} hits, {} undefined normals; wrote {}.*\n",
        cam.width,
        cam.height,
        img.stats.hits,
        img.stats.undefined_normals,
        prefix.display()
    ))
}

// regress

pub fn regress(a: &RegressArgs) -> Result<String, CliError> {
    let cfg = a.trace.trace_config();
    cfg.validate()?;
    let mut xs = a.x.clone().unwrap_or_default();
    if let Some(p) = &a.x_file {
        let text = fs::read_to_string(p).map_err(io_err(p))?;
        for tok in text.split_whitespace() {
            xs.push(
                tok.parse()
                    .map_err(|_| CliError::Config(format!("{}: `{tok}` is not a number", p.display())))?,
            );
        }
    }
    if xs.is_empty() {
        return Err(CliError::Usage("give --x or --x-file".into()));
    }
    let skip = a.root_skip.unwrap_or(cfg.root_skip());
    if !(skip > 0.0) {
        return Err(CliError::Config("root-skip must be positive".into()));
    }
    if let Some(out) = &a.out {
        check_parent(out)?;
    }
    let src = Source::open(&a.field)?;
    if src.dim()? != 2 {
        return Err(CliError::Usage("regress needs a 2D field".into()));
    }
    let f = src.field::<2>(|s| s.surface2())?;
    let mut lines = String::new();
    for x in xs {
        let ys = regress_roots(&*f, &[x], &cfg, skip)?;
        lines += &json!({ "x": x, "y": ys }).to_string();
        lines.push('\n');
    }
    match &a.out {
        Some(out) => {
            write_file(out, &lines)?;
            Ok(String::new())
        }
        None => Ok(lines),
    }
}

// eval

pub fn eval(a: &EvalArgs) -> Result<String, CliError> {
    let pred_path = require(a.pred.as_deref(), "pred")?;
    let gt_arg = require(a.gt.as_deref(), "gt")?;
    if a.samples == 0 {
        return Err(CliError::Config("samples must be at least 1".into()));
    }
    if let Some(out) = &a.out {
        check_parent(out)?;
    }
    let gt = shape_or_file(gt_arg)?;
    let report = if gt.dim()? == 2 {
        eval_dim::<2>(a, pred_path, &gt, |s| s.surface2())?
    } else {
        eval_dim::<3>(a, pred_path, &gt, |s| s.surface3())?
    };
    let text = report.to_string() + "\n";
    if let Some(out) = &a.out {
        write_file(out, &text)?;
    }
    Ok(text)
}

fn eval_dim<const D: usize>(
    a: &EvalArgs,
    pred_path: &Path,
    gt: &ShapeSpec,
    build: impl Fn(&ShapeSpec) -> Result<Box<dyn Surface<D>>, CliError>,
) -> Result<Value, CliError> {
    let pred: PointCloud<D> = read_cloud(pred_path)?;
    let gt_points = if gt.kind == "cloud" {
        read_cloud::<D>(Path::new(&gt.params["path"]))?.points
    } else {
        sample_surface(&build(gt)?, a.samples, a.seed)?.points
    };
    let cd = chamfer_l2(&pred.points, &gt_points)?;
    Ok(json!({
        "chamfer_l2": cd,
        "chamfer_l2_x1e4": cd * 1e4,
        "pred_points": pred.len(),
        "gt_points": gt_points.len(),
    }))
}
