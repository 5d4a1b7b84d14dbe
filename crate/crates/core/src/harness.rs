//! End-to-end pipeline runs and the evaluation scorers.
//!
//! `run_pipeline` reads annotation files named by a [`PipelineConfig`],
//! builds and structures events, synthesizes one action per event, adds
//! negations and assembles the domain. Documents are processed in
//! parallel; output order always follows the configured document order.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{load_document, AnnotatedDocument, AnnotationError, Span};
use crate::events::{build_events, resolve_entities, Event, PhrasalLexicon};
use crate::knowledge::{
    FixtureCommonsense, FixtureNli, FixtureSimilarity, HttpProvider, MissPolicy, ProviderError, Providers, Relation,
    ThresholdPolicy,
};
use crate::pddl::{assemble, emit_pddl, PlanningDomain};
use crate::structuring::{structure_document, SignalSet, StructuredDocument, StructuredEvent, StructuringError};
use crate::synthesis::{generate_negations, select_parameters, synthesize, ActionModel, ActionTrace, NegationStrategy, PredicateSig};

/// Environment variable holding the model server URL for `http` mode.
pub const PROVIDER_URL_ENV: &str = "STORY2PDDL_PROVIDER_URL";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Annotation { path: PathBuf, source: AnnotationError },
    #[error("{path}: {source}")]
    Structuring { path: PathBuf, source: StructuringError },
    #[error("{context}: {source}")]
    Provider { context: String, source: ProviderError },
    #[error("{} document(s) failed:\n{}", .0.len(), .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Documents(Vec<HarnessError>),
    #[error("id mismatch: {0}")]
    IdMismatch(String),
    #[error("input: {0}")]
    Input(String),
}

impl HarnessError {
    /// Process exit code: 2 for provider failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Provider { .. } => 2,
            HarnessError::Documents(errs) if errs.iter().any(|e| e.exit_code() == 2) => 2,
            _ => 1,
        }
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    fs::write(path, text).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    #[default]
    Fixture,
    Http,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    #[serde(default)]
    pub mode: ProviderMode,
    pub predictions: Option<PathBuf>,
    pub similarity: Option<PathBuf>,
    pub nli: Option<PathBuf>,
    #[serde(default)]
    pub on_miss: MissPolicy,
    pub base_url: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub k: Option<usize>,
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
}

impl PolicyConfig {
    pub fn to_policy(&self) -> Result<ThresholdPolicy, HarnessError> {
        let mut policy = ThresholdPolicy::default();
        if let Some(k) = self.k {
            policy.k = k;
        }
        for (name, theta) in &self.thresholds {
            let relation: Relation = name.parse().map_err(|e| HarnessError::Config(format!("{e}")))?;
            policy.theta.insert(relation, *theta);
        }
        policy.validate().map_err(HarnessError::Config)?;
        Ok(policy)
    }
}

fn default_domain_name() -> String {
    "story".into()
}

fn default_negation() -> String {
    "local".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Annotation files, or directories whose `*.json` files are read in
    /// name order.
    #[serde(default)]
    pub documents: Vec<PathBuf>,
    pub lexicon: Option<PathBuf>,
    #[serde(default = "default_domain_name")]
    pub domain_name: String,
    #[serde(default = "default_negation")]
    pub negation: String,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub signals: Option<Vec<String>>,
    #[serde(default)]
    pub providers: ProviderConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            documents: Vec::new(),
            lexicon: None,
            domain_name: default_domain_name(),
            negation: default_negation(),
            output: None,
            trace: None,
            signals: None,
            providers: ProviderConfig::default(),
            policy: PolicyConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parse TOML; relative paths are taken relative to `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut config: PipelineConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        config.documents.iter_mut().for_each(rebase);
        for p in [
            &mut config.lexicon,
            &mut config.output,
            &mut config.trace,
            &mut config.providers.predictions,
            &mut config.providers.similarity,
            &mut config.providers.nli,
        ]
        .into_iter()
        .flatten()
        {
            rebase(p);
        }
        config.negation_strategy()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = read(path)?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn negation_strategy(&self) -> Result<NegationStrategy, HarnessError> {
        self.negation.parse().map_err(HarnessError::Config)
    }

    /// Trace path: configured, or next to the PDDL output.
    pub fn trace_path(&self) -> Option<PathBuf> {
        self.trace
            .clone()
            .or_else(|| self.output.as_ref().map(|o| o.with_extension("trace.json")))
    }

    fn document_paths(&self) -> Result<Vec<PathBuf>, HarnessError> {
        let mut out = Vec::new();
        for p in &self.documents {
            if p.is_dir() {
                let entries = fs::read_dir(p).map_err(|e| HarnessError::Io {
                    path: p.clone(),
                    message: e.to_string(),
                })?;
                let mut files: Vec<PathBuf> = entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|f| f.extension().is_some_and(|x| x == "json"))
                    .collect();
                files.sort();
                out.extend(files);
            } else {
                out.push(p.clone());
            }
        }
        Ok(out)
    }
}

pub fn build_providers(config: &ProviderConfig) -> Result<Providers, HarnessError> {
    match config.mode {
        ProviderMode::Fixture => {
            let load = |p: &Option<PathBuf>| -> Result<String, HarnessError> {
                match p {
                    Some(path) => read(path),
                    None => Ok(String::new()),
                }
            };
            let wrap = |what: &str, path: &Option<PathBuf>| {
                let context = path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| what.to_string());
                move |source| HarnessError::Provider { context, source }
            };
            Ok(Providers {
                commonsense: Box::new(
                    FixtureCommonsense::from_jsonl(&load(&config.predictions)?)
                        .map_err(wrap("predictions", &config.predictions))?,
                ),
                similarity: Box::new(
                    FixtureSimilarity::from_jsonl(&load(&config.similarity)?, config.on_miss)
                        .map_err(wrap("similarity", &config.similarity))?,
                ),
                nli: Box::new(FixtureNli::from_jsonl(&load(&config.nli)?, config.on_miss).map_err(wrap("nli", &config.nli))?),
            })
        }
        ProviderMode::Http => {
            let url = config
                .base_url
                .clone()
                .or_else(|| std::env::var(PROVIDER_URL_ENV).ok())
                .ok_or_else(|| HarnessError::Config(format!("http mode needs providers.base_url or {PROVIDER_URL_ENV}")))?;
            let client = HttpProvider::new(url);
            Ok(Providers {
                commonsense: Box::new(client.clone()),
                similarity: Box::new(client.clone()),
                nli: Box::new(client),
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DocumentTrace {
    pub path: String,
    pub doc_id: String,
    pub structure: StructuredDocument,
    pub actions: Vec<ActionTrace>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineTrace {
    pub domain: String,
    pub negation: NegationStrategy,
    pub documents: Vec<DocumentTrace>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub domain: PlanningDomain,
    pub pddl: String,
    pub trace: PipelineTrace,
}

impl PipelineOutput {
    pub fn trace_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.trace).expect("trace serializes");
        text.push('\n');
        text
    }
}

struct DocumentRun {
    trace: DocumentTrace,
    /// (index into trace.actions, model)
    models: Vec<(usize, ActionModel)>,
}

/// Load, resolve, build and structure one annotation file.
pub fn structure_file(
    path: &Path,
    lexicon: &PhrasalLexicon,
    signals: &SignalSet,
) -> Result<(AnnotatedDocument, Vec<Event>, StructuredDocument), HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let doc = load_document(&bytes).map_err(|source| HarnessError::Annotation {
        path: path.to_path_buf(),
        source,
    })?;
    let resolved = resolve_entities(doc.clone());
    let events = build_events(&resolved, lexicon);
    let structured = structure_document(&resolved, &events, signals).map_err(|source| HarnessError::Structuring {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((doc, events, structured))
}

fn run_document(
    path: &Path,
    lexicon: &PhrasalLexicon,
    signals: &SignalSet,
    providers: &Providers,
    policy: &ThresholdPolicy,
) -> Result<DocumentRun, HarnessError> {
    let (doc, _, structured) = structure_file(path, lexicon, signals)?;
    let mut actions = Vec::new();
    let mut models = Vec::new();
    for event in &structured.events {
        let sentence = &doc.sentences[event.base.sentence_index];
        let (model, trace) = synthesize(event, sentence, providers, policy).map_err(|source| HarnessError::Provider {
            context: format!("{} {}", path.display(), event.id()),
            source,
        })?;
        if let Some(m) = model {
            models.push((actions.len(), m));
        }
        actions.push(trace);
    }
    Ok(DocumentRun {
        trace: DocumentTrace {
            path: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            doc_id: structured.doc_id.clone(),
            structure: structured,
            actions,
        },
        models,
    })
}

/// Run the whole pipeline. Nothing is written to disk; see [`write_outputs`].
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput, HarnessError> {
    let providers = build_providers(&config.providers)?;
    run_pipeline_with(config, &providers)
}

pub fn run_pipeline_with(config: &PipelineConfig, providers: &Providers) -> Result<PipelineOutput, HarnessError> {
    let strategy = config.negation_strategy()?;
    let policy = config.policy.to_policy()?;
    let lexicon = match &config.lexicon {
        Some(p) => PhrasalLexicon::from_text(&read(p)?),
        None => PhrasalLexicon::builtin(),
    };
    let signals = match &config.signals {
        Some(s) => SignalSet::new(s),
        None => SignalSet::default(),
    };
    let paths = config.document_paths()?;

    let results: Vec<Result<DocumentRun, HarnessError>> = paths
        .par_iter()
        .map(|p| run_document(p, &lexicon, &signals, providers, &policy))
        .collect();
    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => {
                log::error!("{e}");
                errors.push(e);
            }
        }
    }
    if !errors.is_empty() {
        return Err(HarnessError::Documents(errors));
    }

    let mut domain_predicates: BTreeSet<PredicateSig> = BTreeSet::new();
    for run in &runs {
        for (_, m) in &run.models {
            for l in m.preconditions.iter().chain(&m.effects) {
                domain_predicates.insert((l.predicate.clone(), l.args.len()));
            }
        }
    }

    let mut slots: Vec<(usize, usize, ActionModel)> = Vec::new();
    for (d, run) in runs.iter().enumerate() {
        for (t, m) in &run.models {
            slots.push((d, *t, m.clone()));
        }
    }
    let negated: Vec<Result<(usize, usize, ActionModel, _), HarnessError>> = slots
        .into_par_iter()
        .map(|(d, t, m)| {
            let (model, records) =
                generate_negations(&m, &domain_predicates, strategy, providers).map_err(|source| HarnessError::Provider {
                    context: format!("negation for {}", m.name),
                    source,
                })?;
            Ok((d, t, model, records))
        })
        .collect();
    let mut models = Vec::new();
    let mut origin = Vec::new();
    for r in negated {
        let (d, t, model, records) = r?;
        runs[d].trace.actions[t].negations = records;
        models.push(model);
        origin.push((d, t));
    }

    let domain = assemble(models, &config.domain_name);
    for (a, (d, t)) in domain.actions.iter().zip(origin) {
        runs[d].trace.actions[t].action = Some(a.name.clone());
    }
    let pddl = emit_pddl(&domain);
    let trace = PipelineTrace {
        domain: domain.name.clone(),
        negation: strategy,
        documents: runs.into_iter().map(|r| r.trace).collect(),
    };
    Ok(PipelineOutput { domain, pddl, trace })
}

/// Write the PDDL file and its trace where the config says.
pub fn write_outputs(config: &PipelineConfig, output: &PipelineOutput) -> Result<(), HarnessError> {
    if let Some(path) = &config.output {
        write(path, &output.pddl)?;
    }
    if let Some(path) = config.trace_path() {
        write(&path, &output.trace_json())?;
    }
    Ok(())
}

// ---- scoring ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    /// Set when TP + FP = 0; precision is then reported as 0.
    pub precision_undefined: bool,
    /// Set when TP + FN = 0; recall is then reported as 0.
    pub recall_undefined: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_matches: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

impl ScoreReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let (precision, precision_undefined) = ratio(tp, tp + fp);
        let (recall, recall_undefined) = ratio(tp, tp + fn_);
        ScoreReport {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            precision_undefined,
            recall_undefined,
            exact_matches: None,
            em_rate: None,
            accuracy: None,
        }
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let flag = |v: f64, undefined: bool| {
            if undefined {
                "undefined".to_string()
            } else {
                format!("{v:.2}")
            }
        };
        let mut s = format!(
            "TP={} FP={} FN={} precision={} recall={}",
            self.true_positives,
            self.false_positives,
            self.false_negatives,
            flag(self.precision, self.precision_undefined),
            flag(self.recall, self.recall_undefined)
        );
        if let Some(em) = self.em_rate {
            s.push_str(&format!(" em_rate={em:.2}"));
        }
        if let Some(acc) = self.accuracy {
            s.push_str(&format!(" accuracy={:.1}%", acc * 100.0));
        }
        s
    }
}

/// Token span `[start, end)` as a two-element array.
pub type SpanPair = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionalPair {
    pub condition: SpanPair,
    pub consequence: SpanPair,
}

/// Gold or predicted conditionals of one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldConditional {
    pub sentence_id: String,
    pub has_conditional: bool,
    #[serde(default)]
    pub pairs: Vec<ConditionalPair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldContainmentPair {
    pub sentence_id: String,
    pub container: usize,
    pub contained: usize,
    pub is_argument: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldParameters {
    pub event_id: String,
    pub subject: Option<String>,
    pub object: Option<String>,
}

/// Parse JSON Lines; blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, HarnessError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| HarnessError::Input(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

pub fn check_conditionals(records: &[GoldConditional]) -> Result<(), HarnessError> {
    for r in records {
        if r.has_conditional == r.pairs.is_empty() {
            return Err(HarnessError::Input(format!(
                "{}: pairs must be non-empty exactly when has_conditional is true",
                r.sentence_id
            )));
        }
    }
    Ok(())
}

fn index_unique<'a, T>(
    records: &'a [T],
    key: impl Fn(&T) -> &str,
    side: &str,
) -> Result<HashMap<&'a str, &'a T>, HarnessError> {
    let mut map = HashMap::new();
    for r in records {
        if map.insert(key(r), r).is_some() {
            return Err(HarnessError::IdMismatch(format!("duplicate {side} id {}", key(r))));
        }
    }
    Ok(map)
}

fn same_ids<A, B>(pred: &HashMap<&str, A>, gold: &HashMap<&str, B>) -> Result<(), HarnessError> {
    let mut missing: Vec<&str> = gold.keys().filter(|k| !pred.contains_key(*k)).copied().collect();
    let mut extra: Vec<&str> = pred.keys().filter(|k| !gold.contains_key(*k)).copied().collect();
    if missing.is_empty() && extra.is_empty() {
        return Ok(());
    }
    missing.sort();
    extra.sort();
    Err(HarnessError::IdMismatch(format!(
        "missing predictions for {missing:?}; predictions without gold {extra:?}"
    )))
}

/// Sentence-level detection scores; EM-rate over true positives counts
/// sentences whose predicted (condition, consequence) span pairs equal gold.
pub fn score_conditionals(predictions: &[GoldConditional], gold: &[GoldConditional]) -> Result<ScoreReport, HarnessError> {
    let pred = index_unique(predictions, |r| &r.sentence_id, "prediction")?;
    let gold_idx = index_unique(gold, |r| &r.sentence_id, "gold")?;
    same_ids(&pred, &gold_idx)?;
    let (mut tp, mut fp, mut fn_, mut em) = (0, 0, 0, 0);
    for (id, g) in &gold_idx {
        let p = pred[id];
        match (p.has_conditional, g.has_conditional) {
            (true, true) => {
                tp += 1;
                let a: BTreeSet<_> = p.pairs.iter().collect();
                let b: BTreeSet<_> = g.pairs.iter().collect();
                if a == b {
                    em += 1;
                }
            }
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let mut report = ScoreReport::from_counts(tp, fp, fn_);
    report.exact_matches = Some(em);
    report.em_rate = Some(ratio(em, tp).0);
    Ok(report)
}

/// Pair-level scores for argument-event decisions. Gold pairs without a
/// prediction count as predicted negative; predicted pairs unknown to the
/// gold file are an id mismatch.
pub fn score_argument_pairs(
    predictions: &[GoldContainmentPair],
    gold: &[GoldContainmentPair],
) -> Result<ScoreReport, HarnessError> {
    let key = |r: &GoldContainmentPair| (r.sentence_id.clone(), r.container, r.contained);
    let mut gold_map = HashMap::new();
    for g in gold {
        if g.container == g.contained {
            return Err(HarnessError::Input(format!("{}: container equals contained", g.sentence_id)));
        }
        if gold_map.insert(key(g), g.is_argument).is_some() {
            return Err(HarnessError::IdMismatch(format!("duplicate gold pair {:?}", key(g))));
        }
    }
    let mut predicted_positive = HashSet::new();
    let mut seen = HashSet::new();
    for p in predictions {
        let k = key(p);
        if !gold_map.contains_key(&k) {
            return Err(HarnessError::IdMismatch(format!("prediction {k:?} has no gold pair")));
        }
        if !seen.insert(k.clone()) {
            return Err(HarnessError::IdMismatch(format!("duplicate prediction {k:?}")));
        }
        if p.is_argument {
            predicted_positive.insert(k);
        }
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (k, &is_arg) in &gold_map {
        match (predicted_positive.contains(k), is_arg) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(ScoreReport::from_counts(tp, fp, fn_))
}

fn same_text(a: &Option<String>, b: &Option<String>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => x.trim() == y.trim(),
        _ => false,
    }
}

/// Accuracy of (subject, object) pairs. A wrong pair is both a false
/// positive and a false negative, so precision and recall equal accuracy.
pub fn score_parameters(predictions: &[GoldParameters], gold: &[GoldParameters]) -> Result<ScoreReport, HarnessError> {
    let pred = index_unique(predictions, |r| &r.event_id, "prediction")?;
    let gold_idx = index_unique(gold, |r| &r.event_id, "gold")?;
    same_ids(&pred, &gold_idx)?;
    let correct = gold_idx
        .iter()
        .filter(|(id, g)| {
            let p = pred[*id];
            same_text(&p.subject, &g.subject) && same_text(&p.object, &g.object)
        })
        .count();
    let wrong = gold.len() - correct;
    let mut report = ScoreReport::from_counts(correct, wrong, wrong);
    report.accuracy = Some(ratio(correct, gold.len()).0);
    Ok(report)
}

// ---- predictions from documents ----

pub fn sentence_id(doc_id: &str, sentence: usize) -> String {
    format!("{doc_id}#{sentence}")
}

/// Token extent of an event: its verb span plus all argument spans.
pub fn event_extent(event: &StructuredEvent) -> SpanPair {
    let spans = std::iter::once(event.base.verb_span).chain(event.base.arguments.iter().map(|a| a.span));
    let (start, end) = spans.fold((usize::MAX, 0), |(s, e), sp: Span| (s.min(sp.start), e.max(sp.end)));
    (start, end)
}

/// One prediction record per sentence.
pub fn conditional_predictions(doc: &AnnotatedDocument, structured: &StructuredDocument) -> Vec<GoldConditional> {
    let by_id: HashMap<_, _> = structured.events.iter().map(|e| (e.id(), e)).collect();
    let mut per_sentence: Vec<Vec<ConditionalPair>> = vec![Vec::new(); doc.sentences.len()];
    for link in &structured.condition_links {
        let (Some(cond), Some(cons)) = (by_id.get(&link.condition), by_id.get(&link.consequence)) else {
            continue;
        };
        per_sentence[cond.base.sentence_index].push(ConditionalPair {
            condition: event_extent(cond),
            consequence: event_extent(cons),
        });
    }
    per_sentence
        .into_iter()
        .enumerate()
        .map(|(i, pairs)| GoldConditional {
            sentence_id: sentence_id(&doc.doc_id, i),
            has_conditional: !pairs.is_empty(),
            pairs,
        })
        .collect()
}

/// One record per containment pair, keyed by verb indices.
pub fn argument_pair_predictions(doc_id: &str, events: &[Event], structured: &StructuredDocument) -> Vec<GoldContainmentPair> {
    let by_id: HashMap<_, _> = events.iter().map(|e| (e.id, e)).collect();
    let links: HashSet<_> = structured.argument_links.iter().collect();
    structured
        .containment
        .iter()
        .map(|pair| {
            let (a, b) = (by_id[&pair.0], by_id[&pair.1]);
            GoldContainmentPair {
                sentence_id: sentence_id(doc_id, a.sentence_index),
                container: a.head_index,
                contained: b.head_index,
                is_argument: links.contains(pair),
            }
        })
        .collect()
}

pub fn parameter_predictions(structured: &StructuredDocument) -> Vec<GoldParameters> {
    structured
        .events
        .iter()
        .map(|e| {
            let (x, o) = select_parameters(e);
            GoldParameters {
                event_id: format!("{}#{}", structured.doc_id, e.id()),
                subject: x.map(|a| a.resolved_text.clone()),
                object: o.map(|a| a.resolved_text.clone()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cond(id: &str, has: bool, pairs: &[(SpanPair, SpanPair)]) -> GoldConditional {
        GoldConditional {
            sentence_id: id.into(),
            has_conditional: has,
            pairs: pairs
                .iter()
                .map(|&(condition, consequence)| ConditionalPair { condition, consequence })
                .collect(),
        }
    }

    #[test]
    fn conditional_counts() {
        let gold = vec![
            cond("a", true, &[((4, 8), (0, 3))]),
            cond("b", true, &[((4, 8), (0, 3))]),
            cond("c", false, &[]),
            cond("d", true, &[((1, 2), (3, 4))]),
        ];
        let pred = vec![
            cond("a", true, &[((4, 8), (0, 3))]),
            cond("b", true, &[((4, 7), (0, 3))]),
            cond("c", true, &[((0, 1), (2, 3))]),
            cond("d", false, &[]),
        ];
        let r = score_conditionals(&pred, &gold).unwrap();
        assert_eq!((r.true_positives, r.false_positives, r.false_negatives), (2, 1, 1));
        assert_eq!(r.exact_matches, Some(1));
        assert_eq!(r.em_rate, Some(0.5));
    }

    #[test]
    fn no_predictions_flags_precision() {
        let gold = vec![cond("a", true, &[((0, 1), (2, 3))])];
        let pred = vec![cond("a", false, &[])];
        let r = score_conditionals(&pred, &gold).unwrap();
        assert!(r.precision_undefined);
        assert_eq!((r.precision, r.recall), (0.0, 0.0));
        assert!(r.summary().contains("precision=undefined"));
    }

    #[test]
    fn id_mismatch() {
        let gold = vec![cond("a", false, &[])];
        let pred = vec![cond("b", false, &[])];
        assert!(matches!(score_conditionals(&pred, &gold), Err(HarnessError::IdMismatch(_))));
    }

    #[test]
    fn gold_invariant_checked() {
        assert!(check_conditionals(&[cond("a", true, &[])]).is_err());
        assert!(check_conditionals(&[cond("a", false, &[((0, 1), (1, 2))])]).is_err());
    }

    #[test]
    fn argument_pairs_identity() {
        let gold: Vec<_> = (0..4)
            .map(|i| GoldContainmentPair {
                sentence_id: "s".into(),
                container: 10,
                contained: i,
                is_argument: i % 2 == 0,
            })
            .collect();
        let r = score_argument_pairs(&gold, &gold).unwrap();
        assert_eq!((r.precision, r.recall), (1.0, 1.0));
        let r = score_argument_pairs(&[], &gold).unwrap();
        assert!(r.precision_undefined);
        assert_eq!(r.recall, 0.0);
    }

    #[test]
    fn parameters_all_null() {
        let gold: Vec<_> = (0..3)
            .map(|i| GoldParameters {
                event_id: format!("e{i}"),
                subject: None,
                object: None,
            })
            .collect();
        let r = score_parameters(&gold, &gold).unwrap();
        assert_eq!(r.accuracy, Some(1.0));
    }

    #[test]
    fn config_paths_rebased() {
        let c = PipelineConfig::from_toml(
            "documents = [\"a.json\"]\noutput = \"out/d.pddl\"\n[providers]\npredictions = \"p.jsonl\"\non_miss = \"neutral\"\n[policy]\nk = 4\n[policy.thresholds]\nxNeed = 0.6\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(c.documents[0], Path::new("/base/a.json"));
        assert_eq!(c.trace_path().unwrap(), Path::new("/base/out/d.trace.json"));
        assert_eq!(c.providers.on_miss, MissPolicy::Neutral);
        let p = c.policy.to_policy().unwrap();
        assert_eq!((p.k, p.threshold(Relation::XNeed)), (4, 0.6));
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(PipelineConfig::from_toml("negation = \"sideways\"", Path::new(".")).is_err());
        assert!(PipelineConfig::from_toml("colour = 1", Path::new(".")).is_err());
        let c = PipelineConfig::from_toml("[policy.thresholds]\nxWant = 0.3", Path::new(".")).unwrap();
        assert!(c.policy.to_policy().is_err());
    }

    #[test]
    fn empty_corpus_gives_empty_domain() {
        let out = run_pipeline(&PipelineConfig::default()).unwrap();
        assert!(out.domain.actions.is_empty());
        assert!(crate::pddl::validate_syntax(&out.pddl).is_empty());
    }

    #[test]
    fn exit_codes() {
        let p = HarnessError::Provider {
            context: "x".into(),
            source: ProviderError::Unavailable("down".into()),
        };
        assert_eq!(p.exit_code(), 2);
        assert_eq!(HarnessError::Documents(vec![p]).exit_code(), 2);
        assert_eq!(HarnessError::Config("bad".into()).exit_code(), 1);
    }
}
