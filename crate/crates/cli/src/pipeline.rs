//! Pipeline stages. Each stage reads artifacts from the work directory,
//! refuses inputs whose content no longer matches the manifest, skips work
//! whose inputs and settings are unchanged, and records output hashes.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cfproc_core::counterfactual::{
    generate_all, read_results, select_factuals, write_results, Algorithm, CfResult,
};
use cfproc_core::declare::{derive_tdc_ldc, hard_violations, read_constraint_set, write_constraint_set, ConstraintSet};
use cfproc_core::event_log::{
    append_eos, cut_at_quantile, parse_csv, read_log, temporal_split, truncate_outcome_activity, write_log, EncodedTrace,
    EventLog, Trace,
};
use cfproc_core::metrics::{
    render_candidates_csv, render_csv, render_text, summary_rows, EvalContext, MetricRow, NeighbourIndex,
};
use cfproc_core::neural::{train_classifier, train_vae, ClassifierModel, VaeLoss, VaeModel};
use cfproc_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::manifest::{derive_seed, hash_file, sha256_hex, RunManifest};

pub const TRAIN_LOG: &str = "train.log.json";
pub const TEST_LOG: &str = "test.log.json";
pub const CONSTRAINTS: &str = "constraints.txt";
pub const VAE_MODEL: &str = "vae.model";
pub const VAE_PLAIN_MODEL: &str = "vae_plain.model";
pub const CLF_MODEL: &str = "clf.model";
pub const CLF_EVAL: &str = "clf.eval.json";
pub const METRICS: &str = "metrics.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";

pub fn results_file(a: Algorithm) -> String {
    format!("results.{}.jsonl", a.name().replace('+', "_plus"))
}

pub fn candidates_file(a: Algorithm) -> String {
    format!("candidates.{}.csv", a.name().replace('+', "_plus"))
}

fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    std::fs::write(path, bytes).map_err(|e| io_at(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>, Error> {
    std::fs::read(path).map_err(|e| io_at(path, e))
}

/// Shared state for stages of one work directory.
pub struct Pipeline {
    pub config: RunConfig,
    pub work_dir: PathBuf,
    manifest: RunManifest,
    /// Recompute even when the cache key matches.
    pub force: bool,
}

enum Input<'a> {
    /// Artifact in the work directory, produced by an earlier stage.
    Artifact(&'a str),
    /// File outside the work directory.
    External(&'a Path),
}

struct Stage<'a> {
    name: String,
    settings: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<Input<'a>>,
    outputs: Vec<String>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self, Error> {
        let work_dir = config.paths.work_dir.clone();
        std::fs::create_dir_all(&work_dir).map_err(|e| io_at(&work_dir, e))?;
        let mut manifest = RunManifest::load_or_new(&work_dir)?;
        manifest.tool_version = env!("CARGO_PKG_VERSION").into();
        manifest.config = serde_json::to_value(&config).map_err(|e| Error::Format(e.to_string()))?;
        Ok(Pipeline { config, work_dir, manifest, force: false })
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn path(&self, artifact: &str) -> PathBuf {
        self.work_dir.join(artifact)
    }

    fn check_artifact(&self, name: &str) -> Result<String, Error> {
        let path = self.path(name);
        if !path.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{}: missing artifact, run the producing stage first", path.display()),
            )));
        }
        let hash = hash_file(&path)?;
        match self.manifest.producer(name) {
            Some((_, recorded)) if recorded == hash => Ok(hash),
            Some((stage, _)) => Err(Error::ArtifactMismatch(format!(
                "{} changed since stage '{stage}' wrote it; rerun '{stage}'",
                path.display()
            ))),
            None => Err(Error::ArtifactMismatch(format!("{} is not recorded in the manifest", path.display()))),
        }
    }

    /// Runs `body` unless a cached result with the same key is present.
    /// Returns whether the body ran.
    fn run<F>(&mut self, stage: Stage<'_>, body: F) -> Result<bool, Error>
    where
        F: FnOnce(&Self) -> Result<(), Error>,
    {
        let mut inputs = std::collections::BTreeMap::new();
        for i in &stage.inputs {
            match i {
                Input::Artifact(n) => {
                    inputs.insert(n.to_string(), self.check_artifact(n)?);
                }
                Input::External(p) => {
                    inputs.insert(p.display().to_string(), hash_file(p)?);
                }
            }
        }
        let key_src = serde_json::json!({
            "stage": stage.name,
            "settings": stage.settings,
            "seed": stage.seed,
            "inputs": inputs,
        });
        let key = sha256_hex(key_src.to_string().as_bytes());
        if !self.force {
            if let Some(rec) = self.manifest.stages.get(&stage.name) {
                let fresh = rec.key == key
                    && stage.outputs.iter().all(|o| {
                        rec.outputs.get(o).is_some_and(|h| hash_file(&self.path(o)).is_ok_and(|cur| &cur == h))
                    });
                if fresh {
                    log::info!("{}: inputs unchanged, outputs cached", stage.name);
                    return Ok(false);
                }
            }
        }
        let started = Instant::now();
        body(self)?;
        let mut outputs = std::collections::BTreeMap::new();
        for o in &stage.outputs {
            outputs.insert(o.clone(), hash_file(&self.path(o))?);
        }
        let rec = crate::manifest::StageRecord {
            key,
            seed: stage.seed,
            inputs,
            outputs,
            seconds: started.elapsed().as_secs_f64(),
        };
        self.manifest.stages.insert(stage.name.clone(), rec);
        self.manifest.save(&self.work_dir)?;
        log::info!("{}: done in {:.1}s", stage.name, started.elapsed().as_secs_f64());
        Ok(true)
    }

    fn settings<T: Serialize>(v: &T) -> serde_json::Value {
        serde_json::to_value(v).expect("config sections serialise")
    }

    pub fn load_log(&self, name: &str) -> Result<EventLog, Error> {
        read_log(read_file(&self.path(name))?.as_slice())
    }

    pub fn load_constraints(&self, log: &EventLog) -> Result<ConstraintSet, Error> {
        read_constraint_set(read_file(&self.path(CONSTRAINTS))?.as_slice(), &log.vocabulary)
    }

    pub fn load_vae(&self, name: &str, log: &EventLog) -> Result<VaeModel, Error> {
        VaeModel::from_bytes(&read_file(&self.path(name))?, Some(&log.vocabulary.content_hash()))
    }

    pub fn load_classifier(&self, log: &EventLog) -> Result<ClassifierModel, Error> {
        ClassifierModel::from_bytes(&read_file(&self.path(CLF_MODEL))?, Some(&log.vocabulary.content_hash()))
    }

    pub fn load_results(&self, a: Algorithm, log: &EventLog) -> Result<Vec<CfResult>, Error> {
        let path = self.path(&results_file(a));
        let f = File::open(&path).map_err(|e| io_at(&path, e))?;
        read_results(BufReader::new(f), &log.vocabulary)
    }

    pub fn ingest(&mut self) -> Result<bool, Error> {
        let log_path = self.config.paths.log.clone();
        if !log_path.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{}: input log not found", log_path.display()),
            )));
        }
        self.manifest.input_hash = Some(hash_file(&log_path)?);
        let stage = Stage {
            name: "ingest".into(),
            settings: Self::settings(&self.config.preprocess),
            seed: None,
            inputs: vec![Input::External(&log_path)],
            outputs: vec![TRAIN_LOG.into(), TEST_LOG.into()],
        };
        self.run(stage, |p| {
            let cfg = &p.config.preprocess;
            let f = File::open(&log_path).map_err(|e| io_at(&log_path, e))?;
            let raw = parse_csv(BufReader::new(f), &cfg.columns).map_err(|e| with_file(e, &log_path))?;
            let mut log = raw;
            if let Some(name) = &cfg.outcome_activity {
                let id = log
                    .vocabulary
                    .id(name)
                    .ok_or_else(|| Error::Argument(format!("outcome activity '{name}' does not occur in the log")))?;
                let (cut, dropped) = truncate_outcome_activity(&log, id)?;
                if dropped > 0 {
                    log::warn!("dropped {dropped} traces that start with the outcome activity");
                }
                log = cut;
            }
            let log = append_eos(&cut_at_quantile(&log, cfg.quantile)?)?;
            let split = temporal_split(&log, cfg.train_fraction)?;
            if split.dropped > 0 {
                log::warn!("dropped {} training traces overlapping the test period", split.dropped);
            }
            log::info!(
                "ingest: {} traces, max_len {}, {} train / {} test",
                log.traces.len(),
                log.max_len,
                split.train.traces.len(),
                split.test.traces.len()
            );
            let mut buf = Vec::new();
            write_log(&split.train, &mut buf)?;
            write_file(&p.path(TRAIN_LOG), &buf)?;
            buf.clear();
            write_log(&split.test, &mut buf)?;
            write_file(&p.path(TEST_LOG), &buf)
        })
    }

    pub fn mine(&mut self, support: Option<f64>) -> Result<bool, Error> {
        let mut mining = self.config.mining.clone();
        if let Some(s) = support {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::Argument(format!("support must lie in (0, 1], got {s}")));
            }
            mining.support = s;
        }
        let stage = Stage {
            name: "mine".into(),
            settings: Self::settings(&mining),
            seed: None,
            inputs: vec![Input::Artifact(TRAIN_LOG)],
            outputs: vec![CONSTRAINTS.into()],
        };
        self.run(stage, |p| {
            let log = p.load_log(TRAIN_LOG)?;
            let all: Vec<&Trace> = log.traces.iter().collect();
            let desired: Vec<&Trace> = log.traces_with_label(mining.desired_label).collect();
            if desired.is_empty() {
                return Err(Error::data(format!(
                    "no training trace has the desired label {}",
                    mining.desired_label
                )));
            }
            let set = derive_tdc_ldc(&all, &desired, mining.support, mining.max_card)?;
            log::info!("mine: {} TDC, {} LDC", set.tdc.len(), set.ldc.len());
            let mut buf = Vec::new();
            write_constraint_set(&set, &log.vocabulary, &mut buf)?;
            write_file(&p.path(CONSTRAINTS), &buf)
        })
    }

    /// Trains the constraint-penalised VAE, or with `plain` the same model
    /// with the trace-constraint weight forced to zero.
    pub fn train_vae(&mut self, plain: bool) -> Result<bool, Error> {
        let (name, model_file) = if plain { ("train-vae-plain", VAE_PLAIN_MODEL) } else { ("train-vae", VAE_MODEL) };
        let seed = derive_seed(self.config.seed, "vae");
        let cfg = self.config.vae_train(seed, !plain);
        let loss_file = model_file.replace(".model", ".loss.csv");
        let stage = Stage {
            name: name.into(),
            settings: serde_json::json!({ "train": Self::settings(&cfg), "hidden": self.config.vae.hidden, "latent": self.config.vae.latent }),
            seed: Some(seed),
            inputs: vec![Input::Artifact(TRAIN_LOG), Input::Artifact(CONSTRAINTS)],
            outputs: vec![model_file.into(), loss_file.clone()],
        };
        self.run(stage, |p| {
            let log = p.load_log(TRAIN_LOG)?;
            let cs = p.load_constraints(&log)?;
            let (model, report) = train_vae(&log, &cs.tdc, p.config.vae.hidden, p.config.vae.latent, &cfg)?;
            write_file(&p.path(model_file), &model.to_bytes()?)?;
            write_file(&p.path(&loss_file), vae_loss_csv(&report.epochs).as_bytes())
        })
    }

    pub fn train_classifier(&mut self) -> Result<bool, Error> {
        let seed = derive_seed(self.config.seed, "classifier");
        let cfg = self.config.classifier_train(seed);
        let stage = Stage {
            name: "train-clf".into(),
            settings: serde_json::json!({ "train": Self::settings(&cfg), "hidden": self.config.classifier.hidden }),
            seed: Some(seed),
            inputs: vec![Input::Artifact(TRAIN_LOG), Input::Artifact(TEST_LOG)],
            outputs: vec![CLF_MODEL.into(), "clf.loss.csv".into(), CLF_EVAL.into()],
        };
        self.run(stage, |p| {
            let train = p.load_log(TRAIN_LOG)?;
            let test = p.load_log(TEST_LOG)?;
            let (model, report) = train_classifier(&train, p.config.classifier.hidden, &cfg)?;
            let eval = ClassifierEval {
                train_auc: report.train_auc,
                train_accuracy: model.accuracy(&train)?,
                test_auc: model.auc(&test).ok(),
                test_accuracy: if test.traces.is_empty() { None } else { Some(model.accuracy(&test)?) },
            };
            log::info!("train-clf: {eval:?}");
            let mut curve = String::from("epoch,loss\n");
            for (i, l) in report.epoch_losses.iter().enumerate() {
                let _ = writeln!(curve, "{},{l}", i + 1);
            }
            write_file(&p.path(CLF_MODEL), &model.to_bytes()?)?;
            write_file(&p.path("clf.loss.csv"), curve.as_bytes())?;
            let json = serde_json::to_string_pretty(&eval).map_err(|e| Error::Format(e.to_string()))?;
            write_file(&p.path(CLF_EVAL), (json + "\n").as_bytes())
        })
    }

    /// Generates counterfactuals for every negatively predicted test trace.
    /// `lambda_dlc` overrides the configured weight and must be zero (or
    /// absent) for REVISE+.
    pub fn generate(&mut self, algorithm: Algorithm, lambda_dlc: Option<f64>) -> Result<bool, Error> {
        let mut cf = self.config.cf_config();
        match (algorithm, lambda_dlc) {
            (Algorithm::RevisePlus, Some(l)) if l != 0.0 => {
                return Err(Error::Argument(format!(
                    "revise+ has no label-constraint term, but lambda_dlc = {l} was given"
                )))
            }
            (Algorithm::RevisedPlus, Some(l)) => cf.lambda_dlc = l,
            _ => {}
        }
        if algorithm == Algorithm::RevisePlus {
            cf.lambda_dlc = 0.0;
        }
        cf.validate()?;
        let vae_file = if algorithm == Algorithm::RevisedPlus { VAE_MODEL } else { VAE_PLAIN_MODEL };
        let out = results_file(algorithm);
        let stage = Stage {
            name: format!("generate-{}", algorithm.name()),
            settings: Self::settings(&cf),
            seed: None,
            inputs: vec![
                Input::Artifact(TRAIN_LOG),
                Input::Artifact(TEST_LOG),
                Input::Artifact(CONSTRAINTS),
                Input::Artifact(CLF_MODEL),
                Input::Artifact(vae_file),
            ],
            outputs: vec![out.clone()],
        };
        self.run(stage, |p| {
            let test = p.load_log(TEST_LOG)?;
            let cs = p.load_constraints(&test)?;
            let clf = p.load_classifier(&test)?;
            let vae = p.load_vae(vae_file, &test)?;
            let factuals = select_factuals(&test, &clf, &cf)?;
            if factuals.is_empty() {
                log::warn!("no test trace is predicted with the undesired outcome; writing empty results");
            }
            let results = generate_all(algorithm, &factuals, &test.vocabulary, &vae, &clf, &cs.ldc, &cf)?;
            if algorithm == Algorithm::RevisedPlus {
                verify_viability(&results, &clf, &cs, &cf)?;
            }
            let found = results.iter().filter(|r| !r.candidates.is_empty()).count();
            log::info!("{algorithm}: counterfactuals for {found} of {} factuals", results.len());
            let mut buf = Vec::new();
            write_results(&mut buf, &results, &test.vocabulary)?;
            write_file(&p.path(&out), &buf)
        })
    }

    /// Scores every algorithm whose results exist and writes the report.
    pub fn evaluate(&mut self, only: Option<Algorithm>) -> Result<Vec<MetricRow>, Error> {
        let algorithms: Vec<Algorithm> = [Algorithm::RevisePlus, Algorithm::RevisedPlus]
            .into_iter()
            .filter(|a| only.is_none_or(|o| o == *a))
            .filter(|a| self.path(&results_file(*a)).exists())
            .collect();
        if algorithms.is_empty() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no results in {}; run generate first", self.work_dir.display()),
            )));
        }
        let result_files: Vec<String> = algorithms.iter().map(|a| results_file(*a)).collect();
        let mut inputs = vec![
            Input::Artifact(TRAIN_LOG),
            Input::Artifact(TEST_LOG),
            Input::Artifact(CONSTRAINTS),
            Input::Artifact(CLF_MODEL),
        ];
        inputs.extend(result_files.iter().map(|f| Input::Artifact(f)));
        let mut outputs = vec![METRICS.to_string(), REPORT_CSV.into(), REPORT_TXT.into()];
        outputs.extend(algorithms.iter().map(|a| candidates_file(*a)));
        let stage = Stage {
            name: "evaluate".into(),
            settings: serde_json::json!({ "evaluate": Self::settings(&self.config.evaluate), "log_name": self.config.log_name() }),
            seed: None,
            inputs,
            outputs,
        };
        self.run(stage, |p| {
            let train = p.load_log(TRAIN_LOG)?;
            let test = p.load_log(TEST_LOG)?;
            let cs = p.load_constraints(&test)?;
            let clf = p.load_classifier(&test)?;
            let neighbours = NeighbourIndex::new(&train, &clf)?;
            let ctx = EvalContext {
                vocabulary: &test.vocabulary,
                max_len: test.max_len,
                classifier: &clf,
                neighbours: &neighbours,
                k: p.config.evaluate.k,
                tdc: &cs.tdc,
                ldc: &cs.ldc,
            };
            let mut rows = Vec::new();
            for &a in &algorithms {
                let results = p.load_results(a, &test)?;
                let cands = ctx.all_candidate_metrics(&results)?;
                write_file(&p.path(&candidates_file(a)), render_candidates_csv(&cands).as_bytes())?;
                rows.push(ctx.summarize(a.display_name(), &p.config.log_name(), &results)?);
            }
            let rows = summary_rows(&rows);
            let json = serde_json::to_string_pretty(&rows).map_err(|e| Error::Format(e.to_string()))?;
            write_file(&p.path(METRICS), (json + "\n").as_bytes())?;
            write_file(&p.path(REPORT_CSV), render_csv(&rows).as_bytes())?;
            write_file(&p.path(REPORT_TXT), render_text(&rows).as_bytes())
        })?;
        self.report_rows()
    }

    /// Rows of the last evaluation.
    pub fn report_rows(&self) -> Result<Vec<MetricRow>, Error> {
        self.check_artifact(METRICS)?;
        serde_json::from_slice(&read_file(&self.path(METRICS))?).map_err(|e| Error::Format(format!("{METRICS}: {e}")))
    }

    /// Every stage in order, both algorithms.
    pub fn run_all(&mut self) -> Result<Vec<MetricRow>, Error> {
        self.ingest()?;
        self.mine(None)?;
        self.train_classifier()?;
        self.train_vae(false)?;
        self.train_vae(true)?;
        self.generate(Algorithm::RevisedPlus, None)?;
        self.generate(Algorithm::RevisePlus, None)?;
        self.evaluate(None)
    }
}

fn with_file(e: Error, path: &Path) -> Error {
    match e {
        Error::Data { row, msg } => Error::Data { row, msg: format!("{}: {msg}", path.display()) },
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEval {
    pub train_auc: f64,
    pub train_accuracy: f64,
    pub test_auc: Option<f64>,
    pub test_accuracy: Option<f64>,
}

pub fn vae_loss_csv(epochs: &[VaeLoss]) -> String {
    let mut s = String::from("epoch,total,nll,kl,dtc\n");
    for (i, l) in epochs.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{},{}", i + 1, l.total, l.nll, l.kl, l.dtc);
    }
    s
}

/// Independent re-check of every accepted REVISED+ candidate: the
/// classifier on the hard one-hot must exceed `p` for the desired label and
/// the candidate must satisfy every label-specific constraint.
pub fn verify_viability(
    results: &[CfResult],
    clf: &ClassifierModel,
    cs: &ConstraintSet,
    cf: &cfproc_core::counterfactual::CfConfig,
) -> Result<(), Error> {
    for r in results {
        for c in &r.candidates {
            let enc = EncodedTrace::from_activities(&c.activities, clf.dims.vocab_size, clf.dims.max_len)?;
            let (_, prob) = clf.predict(&enc.matrix)?;
            if cf.desired_probability(prob) <= cf.p || hard_violations(&cs.ldc, &c.activities) != 0 {
                return Err(Error::State(format!(
                    "candidate for case '{}' at iteration {} is not viable",
                    r.factual.case_id, c.iteration
                )));
            }
        }
    }
    Ok(())
}
