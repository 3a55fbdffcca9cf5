use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use stepgrid::baseline::SvmConfig;
use stepgrid::embed::{embed_step, load_embedder, EmbedderKind, EmbedderSpec};
use stepgrid::formats::{read_psq, write_pgm};
use stepgrid::harness::{
    compare_strategies, format_comparison, run_baseline, run_experiment, Grouping, RunConfig,
};
use stepgrid::heads::{train_head, write_checkpoint, Arch, Checkpoint, Optimizer, Sample};
use stepgrid::manifest::{
    descriptor_file_name, load_descriptors, load_images, load_sequences, load_steps, save_descriptors, save_images,
    save_sequences, save_steps, DescriptorRecord, DescriptorSet,
};
use stepgrid::preproc::{preprocess_sequence, PreprocConfig};
use stepgrid::report::{read_report_csv, write_report_csv};
use stepgrid::synth::{generate_dataset, generate_temporal_twin_dataset, GenConfig};
use stepgrid::transform::{average_frames, render_gray, resize_bilinear, select_max_frame, transform_step, RenderConfig};
use stepgrid::{Error, EvalReport, Result, StepSequence, Strategy};

use crate::{
    ArchArg, BaselineArgs, Cli, Command, CvFlags, EmbedArgs, EmbedderArg, EmbedderArgs, EvalArgs, GenArgs, GroupingArg,
    OptimizerArg, PreprocessArgs, RenderArgs, ReportArgs, TrainArgs, TrainFlags, TransformArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => gen(cli, a),
        Command::Preprocess(a) => preprocess(cli, a),
        Command::Transform(a) => transform(cli, a),
        Command::Embed(a) => embed(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Baseline(a) => baseline(cli, a),
        Command::Report(a) => report(cli, a),
        Command::Render(a) => render(cli, a),
    }
}

fn out_path(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required for this command".into()))
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let Some(path) = &cli.config else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn gen(cli: &Cli, a: &GenArgs) -> Result<()> {
    let out = out_path(cli)?;
    let cfg = GenConfig {
        num_subjects: a.subjects,
        sequences_per_subject: a.seqs,
        steps_per_sequence: a.steps,
        rows: a.rows,
        cols: a.cols,
        noise_sigma: a.noise,
        seed: cli.seed.unwrap_or(0),
        ..GenConfig::default()
    };
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    let seqs = if a.twins {
        generate_temporal_twin_dataset(&cfg)?
    } else {
        generate_dataset(&cfg)?
    };
    save_sequences(out, &seqs)?;
    println!("wrote {} recordings to {}", seqs.len(), out.display());
    Ok(())
}

fn preprocess(cli: &Cli, a: &PreprocessArgs) -> Result<()> {
    let out = out_path(cli)?;
    let cfg = PreprocConfig {
        min_active_pixels: a.min_pixels,
        max_gap_frames: a.max_gap,
        noise_floor: a.noise_floor,
        despeckle: !a.keep_specks,
        canvas: (!a.no_canvas).then_some(a.canvas),
    };
    let seqs = load_sequences(&a.input)?;
    let mut steps = Vec::new();
    for seq in &seqs {
        steps.extend(preprocess_sequence(seq, &cfg)?);
    }
    save_steps(out, &steps)?;
    println!("wrote {} steps from {} recordings to {}", steps.len(), seqs.len(), out.display());
    Ok(())
}

fn transform(cli: &Cli, a: &TransformArgs) -> Result<()> {
    let out = out_path(cli)?;
    let cfg = RenderConfig { size: a.size };
    let outputs = load_steps(&a.input)?
        .iter()
        .map(|s| Ok(transform_step(s, a.strategy, &cfg)?))
        .collect::<Result<Vec<_>>>()?;
    save_images(out, &outputs)?;
    let images: usize = outputs.iter().map(|o| o.images.len()).sum();
    println!("wrote {images} images for {} steps to {}", outputs.len(), out.display());
    Ok(())
}

fn apply_embedder(spec: &mut EmbedderSpec, a: &EmbedderArgs, seed: Option<u64>) {
    match a.embedder {
        Some(EmbedderArg::Mock) => spec.kind = EmbedderKind::MockProjection,
        Some(EmbedderArg::Model) => spec.kind = EmbedderKind::ExternalModel,
        None => {}
    }
    if let Some(p) = &a.model {
        spec.model_path = Some(p.clone());
        if a.embedder.is_none() {
            spec.kind = EmbedderKind::ExternalModel;
        }
    }
    if let Some(d) = a.dim {
        spec.output_dim = d;
    }
    if let Some(s) = a.size {
        spec.input_size = s;
    }
    if let Some(n) = &a.output_node {
        spec.output_node = Some(n.clone());
    }
    if spec.kind == EmbedderKind::MockProjection {
        if let Some(s) = seed {
            spec.seed = Some(s);
        }
    }
}

fn embed(cli: &Cli, a: &EmbedArgs) -> Result<()> {
    let out = out_path(cli)?;
    let mut spec = load_config(cli)?.embedder;
    apply_embedder(&mut spec, &a.embedder, cli.seed);
    let outputs = load_images(&a.input)?;
    if a.embedder.size.is_none() {
        if let Some(img) = outputs.first().and_then(|o| o.images.first()) {
            spec.input_size = img.width();
        }
    }
    let embedder = load_embedder(&spec)?;
    let sets = outputs
        .iter()
        .map(|o| {
            let e = embed_step(embedder.as_ref(), o)?;
            Ok(DescriptorSet {
                record: DescriptorRecord {
                    path: descriptor_file_name(&e.step_id, e.strategy),
                    step_id: e.step_id,
                    strategy: e.strategy,
                    subject_id: e.subject_id,
                    sequence_id: e.sequence_id,
                },
                descriptors: e.descriptors,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    save_descriptors(out, &sets)?;
    println!(
        "wrote {} descriptor sets (dim {}) to {}",
        sets.len(),
        embedder.output_dim(),
        out.display()
    );
    Ok(())
}

fn apply_train(cfg: &mut RunConfig, t: &TrainFlags, seed: Option<u64>) {
    if let Some(h) = t.hidden {
        cfg.gru_hidden = h;
    }
    match t.arch {
        Some(ArchArg::Softmax) => cfg.head = Some(Arch::Softmax),
        Some(ArchArg::Gru) => cfg.head = Some(Arch::Gru { hidden: cfg.gru_hidden }),
        None => {
            if let (Some(Arch::Gru { hidden }), Some(h)) = (&mut cfg.head, t.hidden) {
                *hidden = h;
            }
        }
    }
    let tc = &mut cfg.train;
    if let Some(e) = t.epochs {
        tc.epochs = e;
    }
    if let Some(b) = t.batch {
        tc.batch_size = b;
    }
    if let Some(lr) = t.lr {
        tc.learning_rate = lr;
    }
    if let Some(l2) = t.l2 {
        tc.l2 = l2;
    }
    match t.optimizer {
        Some(OptimizerArg::Adam) => tc.optimizer = Optimizer::adam(),
        Some(OptimizerArg::Sgd) => tc.optimizer = Optimizer::Sgd,
        None => {}
    }
    if let Some(s) = seed {
        tc.seed = s;
    }
}

fn apply_cv(cfg: &mut RunConfig, c: &CvFlags, seed: Option<u64>) {
    if let Some(f) = c.folds {
        cfg.cv.folds = f;
    }
    if let Some(r) = c.repeats {
        cfg.cv.repeats = r;
    }
    match c.grouping {
        Some(GroupingArg::Step) => cfg.cv.grouping = Grouping::ByStep,
        Some(GroupingArg::Sequence) => cfg.cv.grouping = Grouping::BySequence,
        None => {}
    }
    if let Some(s) = seed {
        cfg.cv.seed = s;
    }
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let out = out_path(cli)?;
    let mut cfg = load_config(cli)?;
    apply_train(&mut cfg, &a.train, cli.seed);
    cfg.train.validate().map_err(Error::Config)?;
    let sets = load_descriptors(&a.input)?;
    let strategy = sets
        .first()
        .map(|s| s.record.strategy)
        .ok_or_else(|| Error::Config(format!("{} holds no descriptors", a.input.display())))?;
    let arch = cfg.arch_for(strategy);
    let index = stepgrid::harness::ClassIndex::from_ids(sets.iter().map(|s| s.record.subject_id.as_str()));
    let data: Vec<Sample> = sets
        .iter()
        .map(|s| Sample {
            inputs: s.descriptors.iter().map(|d| d.to_f64()).collect(),
            label: index.of(&s.record.subject_id).expect("indexed"),
        })
        .collect();
    let outcome = train_head(&data, index.len(), arch, &cfg.train)?;
    let accuracy = outcome.model.accuracy(&data)?;
    let (initial, last) = (outcome.initial_loss, outcome.final_loss());
    let ck = Checkpoint::new(outcome.model, cfg.train.clone(), index.labels().to_vec());
    let mut w = create_file(out)?;
    write_checkpoint(&mut w, &ck)?;
    w.flush()?;
    println!(
        "{} head on {} steps ({} classes): loss {:.4} -> {:.4}, training accuracy {:.4}; wrote {}",
        arch.name(),
        data.len(),
        index.len(),
        initial,
        last,
        accuracy,
        out.display()
    );
    Ok(())
}

fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = create_file(path)?;
    write_report_csv(report, &mut w)?;
    w.flush()?;
    Ok(())
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let mut cfg = load_config(cli)?;
    if !a.strategies.is_empty() {
        cfg.strategies = a.strategies.clone();
    }
    apply_embedder(&mut cfg.embedder, &a.embedder, cli.seed);
    apply_train(&mut cfg, &a.train, cli.seed);
    apply_cv(&mut cfg, &a.cv, cli.seed);
    cfg.force |= a.force;
    let out: Option<PathBuf> = cli.out.clone();
    if cfg.output.report.is_none() {
        let dir = out
            .as_ref()
            .ok_or_else(|| Error::Config("--out is required unless the config names a report path".into()))?;
        cfg.output.report = Some(dir.join("report.csv"));
    }
    if a.save_models && cfg.output.models.is_none() {
        let base = out.clone().unwrap_or_else(|| PathBuf::from("."));
        cfg.output.models = Some(base.join("models"));
    }
    cfg.validate()?;

    let steps = load_steps(&a.input)?;
    let report = run_experiment(&cfg, &steps)?;
    let report_path = cfg.output.report.clone().expect("set above");
    write_report(&report_path, &report)?;
    if let Some(dir) = &out {
        let mut w = create_file(&dir.join("config.json"))?;
        serde_json::to_writer_pretty(&mut w, &cfg)?;
        writeln!(w)?;
        w.flush()?;
    }
    print!("{}", format_comparison(&compare_strategies(&report)));
    println!("wrote {}", report_path.display());
    Ok(())
}

fn baseline(cli: &Cli, a: &BaselineArgs) -> Result<()> {
    let out = out_path(cli)?;
    let mut cfg = load_config(cli)?;
    apply_cv(&mut cfg, &a.cv, cli.seed);
    let svm = SvmConfig {
        c_reg: a.c_reg,
        ..SvmConfig::default()
    };
    if !(svm.c_reg > 0.0) {
        return Err(Error::Config(format!("--c must be positive, got {}", svm.c_reg)));
    }
    let steps = load_steps(&a.input)?;
    let report = run_baseline(&steps, &cfg.cv, &svm)?;
    write_report(out, &report)?;
    print!("{}", format_comparison(&compare_strategies(&report)));
    println!("wrote {}", out.display());
    Ok(())
}

fn report(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let mut merged = EvalReport::default();
    for path in &a.input {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        merged = merged.merge(read_report_csv(&mut BufReader::new(file))?)?;
    }
    print!("{}", format_comparison(&compare_strategies(&merged)));
    if let Some(out) = &cli.out {
        write_report(out, &merged)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn render(cli: &Cli, a: &RenderArgs) -> Result<()> {
    let out = out_path(cli)?;
    let file = File::open(&a.input).map_err(|e| Error::io(a.input.display().to_string(), e))?;
    let seq = read_psq(&mut BufReader::new(file))?;
    let (rows, cols) = (seq.rows(), seq.cols());
    let step = StepSequence::new(
        seq.frames().to_vec(),
        stepgrid::data::BoundingBox::new(0, 0, rows, cols),
        "",
        "",
        "",
    )?;
    let frame = match (a.frame, a.strategy) {
        (Some(i), _) => step
            .frames()
            .get(i)
            .cloned()
            .ok_or_else(|| Error::Config(format!("frame {i} out of range (0..{})", step.len())))?,
        (None, Some(Strategy::AverageFrame)) => average_frames(&step),
        (None, Some(Strategy::FullSequence)) => {
            return Err(Error::Config("render writes one image; use `transform --strategy seq`".into()))
        }
        (None, _) => step.frames()[select_max_frame(&step)].clone(),
    };
    let vmax = step.max_value() as f64;
    let vmax = if vmax > 0.0 { vmax } else { 1.0 };
    let mut img = render_gray(&frame, 0.0, vmax)?;
    if let Some(s) = a.size {
        img = resize_bilinear(&img, s, s)?;
    }
    let mut w = create_file(out)?;
    write_pgm(&img, &mut w)?;
    w.flush()?;
    println!("wrote {}x{} image to {}", img.width(), img.height(), out.display());
    Ok(())
}
