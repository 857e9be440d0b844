use std::path::PathBuf;

use circdet_core::geometry::{circle_to_bbox, Circle, Shape, Transform};
use circdet_core::synth::{
    generate_scene_at, simulate_box_detections, simulate_detections, view_dims, JitterConfig, SceneConfig,
};
use circdet_core::targets::{render_targets, PredictionMaps, TargetConfig};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{read_json, Outcome, ShapeArg};
use crate::circleann::{Annotation, Document, Image, ScoredAnnotation};
use crate::error::{CliError, Result};
use crate::{fsio, gridfile};

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct SynthArgs {
    /// Seed for scene layout and simulated detections.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub images: u64,
    /// JSON file with optional `scene`, `jitter` and `targets` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CircleAnn output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for per-image target maps (`image-<id>.<head>.grid`).
    #[arg(long)]
    pub grids: Option<PathBuf>,
    /// Shape written for annotations and detections.
    #[arg(long, value_enum, default_value_t = ShapeArg::Circle)]
    pub shape: ShapeArg,
    /// Describe every image as seen after this many counter-clockwise quarter turns.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u32).range(0..4))]
    pub view_turns: u32,
}

/// Contents of `--config`. The scene and jitter seeds always come from `--seed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub scene: SceneConfig,
    /// Simulated detector; omit for annotations only.
    pub jitter: Option<JitterConfig>,
    /// Used for `--grids`; image size is taken from the scene.
    pub targets: TargetConfig,
}

/// Jitter seed of image `image` under run seed `seed`.
pub fn jitter_seed(seed: u64, image: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((1 << 63) | image);
    rng.next_u64()
}

pub fn synth(args: &SynthArgs) -> Result<Outcome<Document>> {
    let mut cfg = match &args.config {
        Some(path) => read_json::<SynthConfig>(path)?,
        None => SynthConfig::default(),
    };
    cfg.scene.rng_seed = args.seed;
    cfg.scene.validate()?;
    if let Some(j) = &cfg.jitter {
        j.validate()?;
    }
    let turns = args.view_turns;
    let (w, h) = (cfg.scene.image_w as f64, cfg.scene.image_h as f64);
    let (vw, vh) = view_dims(cfg.scene.image_w, cfg.scene.image_h, turns);
    let targets = TargetConfig {
        image_w: vw,
        image_h: vh,
        ..cfg.targets.clone()
    };
    if let Some(dir) = &args.grids {
        targets.validate()?;
        fsio::ensure_dir(dir)?;
    }

    let mut doc = Document {
        detections: cfg.jitter.as_ref().map(|_| Vec::new()),
        ..Document::default()
    };
    for image_id in 0..args.images {
        let scene = generate_scene_at(&cfg.scene, image_id)
            .map_err(|e| CliError::Data(format!("image {image_id}: {e}")))?;
        let view: Vec<Circle> = scene.iter().map(|c| c.rotate90(w, h, turns)).collect();
        doc.images.push(Image {
            id: image_id,
            width: vw as u32,
            height: vh as u32,
        });
        for c in &view {
            doc.annotations.push(Annotation {
                image_id,
                category: 0,
                shape: match args.shape {
                    ShapeArg::Circle => Shape::Circle(*c),
                    ShapeArg::Box => Shape::Box(circle_to_bbox(c)),
                },
            });
        }
        if let (Some(jitter), Some(dets)) = (&cfg.jitter, doc.detections.as_mut()) {
            let j = JitterConfig {
                rng_seed: jitter_seed(args.seed, image_id),
                ..jitter.clone()
            };
            match args.shape {
                ShapeArg::Circle => {
                    for d in simulate_detections(&scene, w, h, turns, &j)? {
                        dets.push(ScoredAnnotation {
                            image_id,
                            category: d.class_id,
                            shape: Shape::Circle(d.circle),
                            score: d.score,
                        });
                    }
                }
                ShapeArg::Box => {
                    for (b, score) in simulate_box_detections(&scene, w, h, turns, &j)? {
                        dets.push(ScoredAnnotation {
                            image_id,
                            category: 0,
                            shape: Shape::Box(b),
                            score,
                        });
                    }
                }
            }
        }
        if let Some(dir) = &args.grids {
            let annotated: Vec<(Circle, usize)> = view.iter().map(|&c| (c, 0)).collect();
            let t = render_targets(&annotated, &targets)?;
            gridfile::write_maps(dir, image_id, &PredictionMaps::from_targets(&t), targets.downsample)?;
        }
    }
    doc.write(&args.out)?;
    let mut summary = format!(
        "wrote {} images, {} annotations",
        doc.images.len(),
        doc.annotations.len()
    );
    if let Some(d) = &doc.detections {
        summary.push_str(&format!(", {} detections", d.len()));
    }
    summary.push_str(&format!(" to {}", args.out.display()));
    Ok(Outcome { result: doc, summary })
}
