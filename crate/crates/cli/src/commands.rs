//! The subcommands. Every directory they write into also receives `config.json`, the
//! resolved configuration that produced its contents.

use std::fs;
use std::path::{Path, PathBuf};

use climfs::baselines::{method_parts, FitPart, MethodRun, VariantKind};
use climfs::dataset::{
    apply_missing, load_manifest_with_masks, save_dataset, MaskMatrix, MultiViewDataset,
};
use climfs::eval::{evaluate_selection, theorem_report, EvalReport, TheoremReport};
use climfs::model::{
    fit, fit_from, load_checkpoint, save_checkpoint, FitConfig, FitFailure, FitTrace, ModelState,
};
use climfs::ClimError;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, ExperimentConfig};
use crate::CliError;

pub const SNAPSHOT: &str = "config.json";

/// A loaded configuration bound to an output root.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions {
    /// Fail with [`CliError::NotConverged`] when a fit hits the iteration cap.
    pub strict: bool,
    /// Continue from existing checkpoints instead of starting over.
    pub resume: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub spectral_fallback: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: VariantKind,
    pub parts: Vec<PartSummary>,
}

impl MethodSummary {
    pub fn converged(&self) -> bool {
        self.parts.iter().all(|p| p.converged)
    }
}

/// One evaluation result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub method: VariantKind,
    pub converged: bool,
    pub selected: Vec<Vec<usize>>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseRecord {
    pub method: VariantKind,
    pub converged: bool,
    /// One report per fitted part.
    pub reports: Vec<TheoremReport>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("result types serialize");
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn file_name(method: VariantKind, ratio: f64) -> String {
    format!("{method}_ratio_{ratio}.json")
}

impl Experiment {
    pub fn new(mut config: ExperimentConfig, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self, CliError> {
        if let Some(s) = seed {
            config.override_seed(s);
        }
        config.validate()?;
        let out = out.unwrap_or_else(|| config.out_dir());
        Ok(Self { config, out })
    }

    pub fn load(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self, CliError> {
        Self::new(ExperimentConfig::load(path)?, out, seed)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }

    pub fn fit_root(&self) -> PathBuf {
        self.out.join("fit")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.out.join("eval")
    }

    pub fn diagnose_dir(&self) -> PathBuf {
        self.out.join("diagnose")
    }

    pub fn method_dir(&self, fit_root: &Path, method: VariantKind) -> PathBuf {
        fit_root.join(method.name())
    }

    /// Creates `dir` and writes the configuration snapshot into it.
    fn emit_dir(&self, dir: &Path, config: &ExperimentConfig) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        write_json(&dir.join(SNAPSHOT), config)
    }

    /// The configuration with the cluster count settled from the labels when it was left out.
    fn resolved(&self, ds: &MultiViewDataset) -> Result<ExperimentConfig, CliError> {
        let mut cfg = self.config.clone();
        if cfg.fit.infer_clusters {
            cfg.fit.config.n_clusters = ds.n_classes().ok_or_else(|| {
                CliError::Config("fit.n_clusters is not set and the dataset has no labels to infer it from".into())
            })?;
            cfg.fit.infer_clusters = false;
        }
        cfg.fit
            .config
            .validate(ds.n_samples())
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Whether the snapshot in `dir` agrees with `current` on `key`.
    fn snapshot_matches(
        dir: &Path,
        current: &ExperimentConfig,
        key: impl Fn(&ExperimentConfig) -> serde_json::Value,
    ) -> bool {
        let Ok(text) = fs::read_to_string(dir.join(SNAPSHOT)) else {
            return false;
        };
        ExperimentConfig::from_json(&text).is_ok_and(|old| key(&old) == key(current))
    }

    /// Generates (or loads) the dataset, applies the missing-data scenario, and writes
    /// the masked data, masks and labels.
    pub fn simulate(&self) -> Result<PathBuf, CliError> {
        let raw = match &self.config.data {
            DataSource::Synthetic(g) => (g.generate()?, None),
            DataSource::Manifest(p) => load_manifest_with_masks(p)?,
        };
        let (mut ds, given) = raw;
        if self.config.normalize {
            ds = ds.normalize_columns();
        }
        let (masked, masks) = match (&self.config.scenario, given) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "the manifest already carries masks; drop the scenario or the masks".into(),
                ))
            }
            (Some(sc), None) => apply_missing(&ds, sc)?,
            (None, Some(m)) => (climfs::dataset::apply_mask(&ds, &m)?, m),
            (None, None) => {
                let m = MaskMatrix::all_observed(&ds);
                (ds, m)
            }
        };
        let resolved = self.resolved(&masked)?;
        let dir = self.data_dir();
        self.emit_dir(&dir, &resolved)?;
        let manifest = save_dataset(&masked, Some(&masks), &dir)?;
        info!("wrote masked dataset to {}", dir.display());
        Ok(manifest)
    }

    /// Loads the simulated dataset, regenerating it when missing or produced by other settings.
    fn dataset(&self) -> Result<(MultiViewDataset, MaskMatrix), CliError> {
        let dir = self.data_dir();
        let manifest = dir.join("manifest.json");
        if !manifest.is_file() || !Self::snapshot_matches(&dir, &self.config, |c| c.data_key()) {
            info!("dataset in {} is missing or stale; simulating", dir.display());
            self.simulate()?;
        }
        let (ds, masks) = load_manifest_with_masks(&manifest)?;
        let masks = masks.ok_or_else(|| CliError::Io(format!("{} lists no masks", manifest.display())))?;
        Ok((ds, masks))
    }

    /// Fits every configured method into `fit/<method>/part_<p>/`.
    pub fn fit(&self, opts: FitOptions) -> Result<Vec<MethodSummary>, CliError> {
        self.fit_methods(&self.fit_root(), &self.config.methods, opts)
    }

    fn fit_methods(
        &self,
        root: &Path,
        methods: &[VariantKind],
        opts: FitOptions,
    ) -> Result<Vec<MethodSummary>, CliError> {
        let (ds, masks) = self.dataset()?;
        let mut resolved = self.resolved(&ds)?;
        resolved.methods = methods.to_vec();
        let cfg = resolved.fit.config.clone();
        let mut summaries = Vec::new();
        for &method in methods {
            let dir = self.method_dir(root, method);
            self.emit_dir(&dir, &resolved)?;
            let parts = method_parts(method, &ds, &masks)?;
            let mut summary = MethodSummary { method, parts: Vec::new() };
            for (p, part) in parts.iter().enumerate() {
                let part_dir = dir.join(format!("part_{p}"));
                self.emit_dir(&part_dir, &resolved)?;
                let trace = self.fit_part(&part_dir, method, part, &resolved, opts.resume)?;
                summary.parts.push(PartSummary {
                    iterations: trace.iterations(),
                    converged: trace.converged,
                    final_objective: trace.final_objective(),
                    spectral_fallback: trace.spectral_fallback,
                    seconds: trace.rows.last().map_or(0.0, |r| r.seconds),
                });
            }
            write_json(&dir.join("summary.json"), &summary)?;
            info!(
                "{method}: {} (iterations {:?})",
                if summary.converged() { "converged" } else { "not converged" },
                summary.parts.iter().map(|p| p.iterations).collect::<Vec<_>>()
            );
            summaries.push(summary);
        }
        if opts.strict {
            let unconverged: Vec<String> = summaries
                .iter()
                .filter(|s| !s.converged())
                .map(|s| s.method.to_string())
                .collect();
            if !unconverged.is_empty() {
                return Err(CliError::NotConverged(format!(
                    "{} did not converge within {} iterations",
                    unconverged.join(", "),
                    cfg.max_iter
                )));
            }
        }
        Ok(summaries)
    }

    fn fit_part(
        &self,
        dir: &Path,
        method: VariantKind,
        part: &FitPart,
        resolved: &ExperimentConfig,
        resume: bool,
    ) -> Result<FitTrace, CliError> {
        let cfg = &resolved.fit.config;
        let ck_dir = dir.join("checkpoint");
        let trace_path = dir.join("trace.json");
        let outcome = if resume && ck_dir.join("header.json").is_file() && trace_path.is_file() {
            let ck = load_checkpoint(&ck_dir)?;
            let same_settings = {
                let strip = |c: &FitConfig| FitConfig { max_iter: 0, ..c.clone() };
                strip(&ck.header.config) == strip(cfg)
            };
            if !same_settings || ck.header.components != part.components || ck.masks != part.masks {
                return Err(CliError::Config(format!(
                    "checkpoint in {} was produced by different settings; rerun without --resume",
                    ck_dir.display()
                )));
            }
            let previous: FitTrace = read_json(&trace_path)?;
            let mut state = ck.state;
            if ck.header.converged || state.iteration >= cfg.max_iter {
                info!("{method}: checkpoint at iteration {} needs no further work", state.iteration);
                Ok((state, previous))
            } else {
                let remaining = FitConfig { max_iter: cfg.max_iter - state.iteration, ..cfg.clone() };
                info!("{method}: resuming at iteration {}", state.iteration);
                fit_from(&mut state, &part.data, &part.masks, &remaining, &part.components, &mut |_, _| {})
                    .map(|more| (state, join_traces(previous.clone(), more)))
                    .map_err(|f| FitFailure {
                        trace: join_traces(previous, f.trace),
                        source: f.source,
                    })
            }
        } else {
            fit(&part.data, &part.masks, cfg, &part.components)
        };
        match outcome {
            Ok((state, trace)) => {
                save_checkpoint(&ck_dir, method.name(), &state, &part.masks, cfg, &part.components, trace.converged)?;
                self.emit_dir(&ck_dir, resolved)?;
                write_json(&trace_path, &trace)?;
                trace.write_csv(&dir.join("trace.csv"))?;
                Ok(trace)
            }
            Err(failure) => {
                write_json(&dir.join("failed_trace.json"), &failure.trace)?;
                failure.trace.write_csv(&dir.join("failed_trace.csv"))?;
                Err(failure.source.into())
            }
        }
    }

    /// Reloads a fitted method from its checkpoints.
    fn load_method(&self, root: &Path, method: VariantKind, resolved: &ExperimentConfig) -> Result<MethodRun, CliError> {
        let dir = self.method_dir(root, method);
        if !dir.join("summary.json").is_file() || !Self::snapshot_matches(&dir, resolved, |c| c.fit_key()) {
            return Err(CliError::Config(format!(
                "no fit of {method} for this configuration in {}; run `climfs fit` first",
                dir.display()
            )));
        }
        let summary: MethodSummary = read_json(&dir.join("summary.json"))?;
        let mut states: Vec<ModelState> = Vec::new();
        let mut traces = Vec::new();
        for p in 0..summary.parts.len() {
            let part_dir = dir.join(format!("part_{p}"));
            states.push(load_checkpoint(&part_dir.join("checkpoint"))?.state);
            traces.push(read_json(&part_dir.join("trace.json"))?);
        }
        Ok(MethodRun::from_parts(method, states, traces))
    }

    /// Writes one report per (method, feature ratio) plus `summary.csv`.
    pub fn evaluate(&self) -> Result<Vec<EvalRecord>, CliError> {
        self.evaluate_methods(&self.fit_root(), &self.eval_dir(), &self.config.methods)
    }

    fn evaluate_methods(&self, root: &Path, out: &Path, methods: &[VariantKind]) -> Result<Vec<EvalRecord>, CliError> {
        let (ds, _) = self.dataset()?;
        let labels = ds.labels().ok_or(ClimError::MissingLabels)?;
        let mut resolved = self.resolved(&ds)?;
        resolved.methods = methods.to_vec();
        self.emit_dir(out, &resolved)?;
        let c = resolved.fit.config.n_clusters;
        let mut records = Vec::new();
        for &method in methods {
            let run = self.load_method(root, method, &resolved)?;
            for &ratio in &self.config.feature_ratios {
                let sel = run.select(ratio)?;
                let report =
                    evaluate_selection(&run.imputed, Some(labels), &sel, c, self.config.eval.runs, self.config.eval.seed)?;
                let record = EvalRecord {
                    method,
                    converged: run.converged(),
                    selected: sel.selected,
                    report,
                };
                write_json(&out.join(file_name(method, ratio)), &record)?;
                records.push(record);
            }
        }
        write_summary(&out.join("summary.csv"), &records)?;
        Ok(records)
    }

    /// Writes the structural-bound diagnostics of every configured method.
    pub fn diagnose(&self) -> Result<Vec<DiagnoseRecord>, CliError> {
        let (ds, _) = self.dataset()?;
        let resolved = self.resolved(&ds)?;
        let out = self.diagnose_dir();
        self.emit_dir(&out, &resolved)?;
        let mut records = Vec::new();
        for &method in &self.config.methods {
            let dir = self.method_dir(&self.fit_root(), method);
            let run = self.load_method(&self.fit_root(), method, &resolved)?;
            let mut reports = Vec::new();
            for (p, trace) in run.traces.iter().enumerate() {
                let ck = load_checkpoint(&dir.join(format!("part_{p}")).join("checkpoint"))?;
                if !trace.converged {
                    warn!("{method} part {p} did not converge; bounds assume a converged state");
                }
                reports.push(theorem_report(&ck.state, &ck.masks, &ck.header.config, trace.converged));
            }
            let record = DiagnoseRecord {
                method,
                converged: run.converged(),
                reports,
            };
            write_json(&out.join(format!("{method}.json")), &record)?;
            records.push(record);
        }
        Ok(records)
    }

    /// Fits and evaluates the full model and its three ablations under `ablate/`.
    pub fn ablate(&self) -> Result<Vec<EvalRecord>, CliError> {
        let root = self.out.join("ablate");
        self.fit_methods(&root.join("fit"), &VariantKind::ABLATIONS, FitOptions::default())?;
        self.evaluate_methods(&root.join("fit"), &root.join("eval"), &VariantKind::ABLATIONS)
    }
}

fn join_traces(mut first: FitTrace, more: FitTrace) -> FitTrace {
    first.rows.extend(more.rows);
    first.converged = more.converged;
    first
}

fn write_summary(path: &Path, records: &[EvalRecord]) -> Result<(), CliError> {
    let mut text = String::from("method,feature_ratio,n_features,acc_mean,acc_std,nmi_mean,nmi_std,converged\n");
    for r in records {
        let e = &r.report;
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method, e.feature_ratio, e.n_features, e.acc_mean, e.acc_std, e.nmi_mean, e.nmi_std, r.converged
        ));
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}
