use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gdcnn::analysis::{attention_regions, report_table, AttentionHistogram, RegionSet};
use gdcnn::cam::{cam_from_trace, normalize_heatmap, render_overlay, upsample, Heatmap, ScoreIdentity};
use gdcnn::data::{generate_synthetic_dataset, load_manifest, load_samples, split, DatasetManifest, Sample};
use gdcnn::model::{
    evaluate, forward, history_csv, load_checkpoint, save_checkpoint, train_with_callback, Head,
    ModelConfig, Mode, Parameters,
};
use gdcnn::Label;

use crate::config::RunConfig;
use crate::error::{usage, CliError, CliResult};

pub const CHECKPOINT_FILE: &str = "model.gdcn";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CAM_LOG_FILE: &str = "cam.csv";
pub const ATTENTION_FILE: &str = "attention.csv";
pub const ATTENTION_IMAGES_FILE: &str = "attention_per_image.csv";
pub const SPLIT_FILES: [&str; 3] = ["train.csv", "val.csv", "test.csv"];

fn create_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn manifest_path(cfg: &RunConfig) -> CliResult<&Path> {
    let path = cfg.manifest.as_deref().ok_or_else(|| usage("no manifest given (--manifest or `manifest =`)"))?;
    if !path.is_file() {
        return Err(usage(format!("manifest not found: {}", path.display())));
    }
    Ok(path)
}

fn read_manifest(cfg: &RunConfig) -> CliResult<DatasetManifest> {
    Ok(load_manifest(manifest_path(cfg)?)?)
}

fn read_checkpoint(cfg: &RunConfig) -> CliResult<(Parameters, ModelConfig)> {
    let path =
        cfg.checkpoint.as_deref().ok_or_else(|| usage("no checkpoint given (--checkpoint or `checkpoint =`)"))?;
    if !path.is_file() {
        return Err(usage(format!("checkpoint not found: {}", path.display())));
    }
    Ok(load_checkpoint(path)?)
}

pub fn parse_class(value: &str) -> CliResult<Label> {
    match value.to_ascii_lowercase().as_str() {
        "0" | "male" => Ok(Label::Male),
        "1" | "female" => Ok(Label::Female),
        _ => Err(usage(format!("unknown class `{value}` (expected 0, 1, male or female)"))),
    }
}

pub fn synth(cfg: &RunConfig, n_per_class: usize) -> CliResult<()> {
    if n_per_class == 0 {
        return Err(usage("--n must be at least 1"));
    }
    create_out(&cfg.out)?;
    let manifest = generate_synthetic_dataset(n_per_class, cfg.hyper.seed, &cfg.out)?;
    let [m, f] = manifest.class_counts();
    println!("{}", cfg.out.join(gdcnn::data::MANIFEST_FILE).display());
    println!("{} images: {m} {}, {f} {}", manifest.len(), Label::Male, Label::Female);
    Ok(())
}

pub fn train(cfg: &RunConfig) -> CliResult<()> {
    let manifest = read_manifest(cfg)?;
    if manifest.is_empty() {
        return Err(usage("manifest has no rows"));
    }
    let parts = split(&manifest, cfg.split_fractions()?, cfg.hyper.seed)?;
    create_out(&cfg.out)?;
    for (name, part) in SPLIT_FILES.iter().zip([&parts.train, &parts.val, &parts.test]) {
        part.write(cfg.out.join(name))?;
    }
    let size = cfg.model.input_size;
    let train_set = load_samples(&parts.train, size)?;
    let val_set = load_samples(&parts.val, size)?;
    println!("train {} / val {} / test {}", parts.train.len(), parts.val.len(), parts.test.len());

    let epochs = cfg.hyper.epochs;
    let (params, history) = train_with_callback(&cfg.model, &train_set, &val_set, &cfg.hyper, |r| {
        let mut line = format!("epoch {}/{epochs} train_loss {:.3} train_acc {:.3}", r.epoch, r.train_loss, r.train_acc);
        if let (Some(l), Some(a)) = (r.val_loss, r.val_acc) {
            write!(line, " val_loss {l:.3} val_acc {a:.3}").unwrap();
        }
        println!("{line}");
    })?;
    let ckpt = cfg.out.join(CHECKPOINT_FILE);
    save_checkpoint(&params, &cfg.model, &ckpt)?;
    write_text(&cfg.out.join(HISTORY_FILE), &history_csv(&history))?;
    println!("checkpoint {}", ckpt.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> CliResult<()> {
    let (params, model) = read_checkpoint(cfg)?;
    let manifest = read_manifest(cfg)?;
    if manifest.is_empty() {
        return Err(usage("manifest has no rows"));
    }
    let samples = load_samples(&manifest, model.input_size)?;
    let e = evaluate(&params, &model, &samples)?;
    let rows: Vec<(String, _)> =
        Label::ALL.iter().map(|l| (l.name().to_string(), e.counts[l.index()])).collect();
    let table = report_table(&rows)?;
    create_out(&cfg.out)?;
    write_text(&cfg.out.join(METRICS_FILE), &table)?;
    print!("{table}");
    println!("accuracy {:.3} over {} images", e.accuracy(), samples.len());
    Ok(())
}

struct Attended {
    predicted: Label,
    class: Label,
    identity: ScoreIdentity,
    heatmap: Heatmap,
}

fn gap_checkpoint(cfg: &RunConfig) -> CliResult<(Parameters, ModelConfig)> {
    let (params, model) = read_checkpoint(cfg)?;
    if model.head != Head::Gap {
        return Err(CliError::Runtime("CAM requires gap head".into()));
    }
    Ok((params, model))
}

fn attend(
    params: &Parameters,
    model: &ModelConfig,
    sample: &Sample,
    forced: Option<Label>,
    cfg: &RunConfig,
) -> CliResult<Attended> {
    let (pred, trace) = forward(params, model, &sample.image, Mode::Eval)?;
    let predicted = pred.class();
    let class = forced.unwrap_or(predicted);
    let (raw, identity) = cam_from_trace(params, &trace, class.index())?;
    let size = model.input_size;
    let heatmap = normalize_heatmap(&upsample(&raw, size, size, cfg.upsample)?)?;
    Ok(Attended { predicted, class, identity, heatmap })
}

fn samples_for_cam(cfg: &RunConfig, model: &ModelConfig) -> CliResult<Vec<Sample>> {
    let manifest = read_manifest(cfg)?;
    if manifest.is_empty() {
        return Err(usage("manifest has no rows"));
    }
    Ok(load_samples(&manifest, model.input_size)?)
}

pub fn cam(cfg: &RunConfig, forced: Option<Label>) -> CliResult<()> {
    let (params, model) = gap_checkpoint(cfg)?;
    let samples = samples_for_cam(cfg, &model)?;
    create_out(&cfg.out)?;
    let mut log = String::from("id,label,predicted,class,score,cam_sum,abs_error,identity\n");
    let mut failures: Vec<String> = Vec::new();
    for s in &samples {
        let a = attend(&params, &model, s, forced, cfg)?;
        render_overlay(&s.image, &a.heatmap, &cfg.out, &s.id)?;
        let ok = a.identity.holds();
        if !ok {
            failures.push(s.id.clone());
        }
        writeln!(
            log,
            "{},{},{},{},{:.6},{:.6},{:.3e},{}",
            s.id,
            s.label.index(),
            a.predicted.index(),
            a.class.index(),
            a.identity.score,
            a.identity.cam_sum,
            a.identity.error(),
            if ok { "ok" } else { "FAIL" }
        )
        .unwrap();
        println!("{} predicted {} cam {}", s.id, a.predicted, a.class);
    }
    write_text(&cfg.out.join(CAM_LOG_FILE), &log)?;
    if !failures.is_empty() {
        return Err(CliError::Runtime(format!("score identity violated for {}", failures.join(", "))));
    }
    Ok(())
}

fn region_list(regions: &RegionSet) -> String {
    regions.iter().map(|r| r.name()).collect::<Vec<_>>().join("|")
}

pub fn attention(cfg: &RunConfig, forced: Option<Label>) -> CliResult<()> {
    let (params, model) = gap_checkpoint(cfg)?;
    let samples = samples_for_cam(cfg, &model)?;
    let mut hist = AttentionHistogram::default();
    let mut per_image = String::from("id,label,predicted,regions\n");
    for s in &samples {
        let a = attend(&params, &model, s, forced, cfg)?;
        let regions = attention_regions(&a.heatmap, &cfg.bands)?;
        hist.record(&regions);
        writeln!(per_image, "{},{},{},{}", s.id, s.label.index(), a.predicted.index(), region_list(&regions)).unwrap();
    }
    create_out(&cfg.out)?;
    let report = hist.to_csv();
    write_text(&cfg.out.join(ATTENTION_FILE), &report)?;
    write_text(&cfg.out.join(ATTENTION_IMAGES_FILE), &per_image)?;
    print!("{report}");
    Ok(())
}
