//! Interfaces to the learned predictors: commonsense relation generation,
//! phrase similarity and natural-language inference.
//!
//! Two backends implement each interface. The fixture backend reads
//! JSON-Lines files and is fully deterministic; the HTTP backend talks to
//! the model server (`POST /generate`, `/similarity`, `/nli`).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("no fixture entry for {0}")]
    FixtureMiss(String),
    #[error("malformed provider data: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "xNeed")]
    XNeed,
    #[serde(rename = "xEffect")]
    XEffect,
    #[serde(rename = "oEffect")]
    OEffect,
    #[serde(rename = "xReact")]
    XReact,
    #[serde(rename = "oReact")]
    OReact,
}

impl Relation {
    /// Canonical order, also used to break probability ties.
    pub const ALL: [Relation; 5] = [
        Relation::XNeed,
        Relation::XEffect,
        Relation::OEffect,
        Relation::XReact,
        Relation::OReact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::XNeed => "xNeed",
            Relation::XEffect => "xEffect",
            Relation::OEffect => "oEffect",
            Relation::XReact => "xReact",
            Relation::OReact => "oReact",
        }
    }

    /// Relations about the event's object rather than its subject.
    pub fn is_object_side(self) -> bool {
        matches!(self, Relation::OEffect | Relation::OReact)
    }

    pub fn is_precondition(self) -> bool {
        self == Relation::XNeed
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = ProviderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ProviderError::Malformed(format!("unknown relation {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationPrediction {
    pub event_text: String,
    pub relation: Relation,
    pub phrase: String,
    pub probability: f64,
}

/// How many candidates to request and which survive, per relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub k: usize,
    pub theta: HashMap<Relation, f64>,
}

impl ThresholdPolicy {
    pub fn threshold(&self, relation: Relation) -> f64 {
        self.theta.get(&relation).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        for (r, t) in &self.theta {
            if !(0.0..=1.0).contains(t) {
                return Err(format!("threshold for {r} is {t}, outside [0, 1]"));
            }
        }
        Ok(())
    }
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy {
            k: 6,
            theta: HashMap::from([
                (Relation::XNeed, 0.7),
                (Relation::XEffect, 0.5),
                (Relation::OEffect, 0.5),
                (Relation::XReact, 0.2),
                (Relation::OReact, 0.2),
            ]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl FromStr for NliLabel {
    type Err = ProviderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "entailment" => Ok(NliLabel::Entailment),
            "neutral" => Ok(NliLabel::Neutral),
            "contradiction" => Ok(NliLabel::Contradiction),
            other => Err(ProviderError::Malformed(format!("unknown NLI label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NliVerdict {
    pub label: NliLabel,
    pub score: f64,
}

pub trait CommonsenseProvider: Send + Sync {
    /// Up to `k` candidates, most probable first.
    fn generate(&self, event_text: &str, relation: Relation, k: usize) -> Result<Vec<RelationPrediction>, ProviderError>;
}

pub trait SimilarityProvider: Send + Sync {
    fn similarity(&self, a: &str, b: &str) -> Result<f64, ProviderError>;
}

pub trait NliProvider: Send + Sync {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, ProviderError>;
}

/// The three predictors the synthesis stage needs.
pub struct Providers {
    pub commonsense: Box<dyn CommonsenseProvider>,
    pub similarity: Box<dyn SimilarityProvider>,
    pub nli: Box<dyn NliProvider>,
}

/// Lowercase with collapsed whitespace; the fixture lookup key.
pub fn normalize_key(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Query `provider` and enforce the output contract: at most `k`
/// candidates in non-increasing probability order.
pub fn generate(
    provider: &dyn CommonsenseProvider,
    event_text: &str,
    relation: Relation,
    k: usize,
) -> Result<Vec<RelationPrediction>, ProviderError> {
    let mut preds = provider.generate(event_text, relation, k)?;
    for p in &preds {
        if !(0.0..=1.0).contains(&p.probability) || p.phrase.trim().is_empty() {
            return Err(ProviderError::Malformed(format!("bad prediction {p:?}")));
        }
    }
    preds.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    preds.truncate(k);
    Ok(preds)
}

pub fn is_none_phrase(phrase: &str) -> bool {
    phrase.trim().eq_ignore_ascii_case("none")
}

/// Keep the prefix at or above the relation's threshold, then cut at the
/// first "none" phrase (exclusive). Input must be sorted most probable first.
pub fn apply_thresholds(preds: &[RelationPrediction], policy: &ThresholdPolicy) -> Vec<RelationPrediction> {
    preds
        .iter()
        .take_while(|p| p.probability >= policy.threshold(p.relation))
        .take_while(|p| !is_none_phrase(&p.phrase))
        .cloned()
        .collect()
}

/// What a fixture-backed similarity/NLI provider does on a missing pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissPolicy {
    #[default]
    Error,
    /// Similarity 0 and a neutral NLI verdict.
    Neutral,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionRecord {
    event: String,
    relation: String,
    #[serde(default)]
    phrase: Option<String>,
    #[serde(default)]
    p: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimilarityRecord {
    a: String,
    b: String,
    score: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NliRecord {
    a: String,
    b: String,
    label: String,
    score: f64,
}

fn json_lines<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<Vec<T>, ProviderError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| ProviderError::Malformed(format!("{what} line {}: {e}", n + 1)))
        })
        .collect()
}

/// Commonsense predictions from a JSON-Lines fixture, one candidate per
/// line. A record without `phrase`/`p` registers the key with no candidates.
#[derive(Debug, Clone, Default)]
pub struct FixtureCommonsense {
    entries: HashMap<(String, Relation), Vec<(String, f64)>>,
}

impl FixtureCommonsense {
    pub fn from_jsonl(text: &str) -> Result<Self, ProviderError> {
        let mut entries: HashMap<(String, Relation), Vec<(String, f64)>> = HashMap::new();
        for rec in json_lines::<PredictionRecord>(text, "prediction fixture")? {
            let relation: Relation = rec.relation.parse()?;
            let slot = entries.entry((normalize_key(&rec.event), relation)).or_default();
            match (rec.phrase, rec.p) {
                (Some(phrase), Some(p)) => {
                    if !(0.0..=1.0).contains(&p) || phrase.trim().is_empty() {
                        return Err(ProviderError::Malformed(format!("bad candidate {phrase:?} with p={p}")));
                    }
                    slot.push((phrase, p));
                }
                (None, None) => {}
                _ => return Err(ProviderError::Malformed("phrase and p must appear together".into())),
            }
        }
        for slot in entries.values_mut() {
            // stable: equal probabilities keep file order
            slot.sort_by(|a, b| b.1.total_cmp(&a.1));
        }
        Ok(FixtureCommonsense { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl CommonsenseProvider for FixtureCommonsense {
    fn generate(&self, event_text: &str, relation: Relation, k: usize) -> Result<Vec<RelationPrediction>, ProviderError> {
        let key = (normalize_key(event_text), relation);
        let slot = self
            .entries
            .get(&key)
            .ok_or_else(|| ProviderError::FixtureMiss(format!("({:?}, {relation})", key.0)))?;
        Ok(slot
            .iter()
            .take(k)
            .map(|(phrase, p)| RelationPrediction {
                event_text: event_text.to_string(),
                relation,
                phrase: phrase.clone(),
                probability: *p,
            })
            .collect())
    }
}

fn unordered(a: &str, b: &str) -> (String, String) {
    let (a, b) = (normalize_key(a), normalize_key(b));
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Default)]
pub struct FixtureSimilarity {
    scores: HashMap<(String, String), f64>,
    on_miss: MissPolicy,
}

impl FixtureSimilarity {
    pub fn from_jsonl(text: &str, on_miss: MissPolicy) -> Result<Self, ProviderError> {
        let mut scores = HashMap::new();
        for rec in json_lines::<SimilarityRecord>(text, "similarity fixture")? {
            if !(-1.0..=1.0).contains(&rec.score) {
                return Err(ProviderError::Malformed(format!("similarity {} outside [-1, 1]", rec.score)));
            }
            scores.insert(unordered(&rec.a, &rec.b), rec.score);
        }
        Ok(FixtureSimilarity { scores, on_miss })
    }
}

impl SimilarityProvider for FixtureSimilarity {
    fn similarity(&self, a: &str, b: &str) -> Result<f64, ProviderError> {
        let key = unordered(a, b);
        if key.0 == key.1 {
            return Ok(1.0);
        }
        match (self.scores.get(&key), self.on_miss) {
            (Some(s), _) => Ok(*s),
            (None, MissPolicy::Neutral) => Ok(0.0),
            (None, MissPolicy::Error) => Err(ProviderError::FixtureMiss(format!("similarity({a:?}, {b:?})"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FixtureNli {
    verdicts: HashMap<(String, String), NliVerdict>,
    on_miss: MissPolicy,
}

impl FixtureNli {
    pub fn from_jsonl(text: &str, on_miss: MissPolicy) -> Result<Self, ProviderError> {
        let mut verdicts = HashMap::new();
        for rec in json_lines::<NliRecord>(text, "nli fixture")? {
            let label = rec.label.parse()?;
            verdicts.insert(
                (normalize_key(&rec.a), normalize_key(&rec.b)),
                NliVerdict { label, score: rec.score },
            );
        }
        Ok(FixtureNli { verdicts, on_miss })
    }
}

impl NliProvider for FixtureNli {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, ProviderError> {
        let key = (normalize_key(premise), normalize_key(hypothesis));
        if let Some(v) = self.verdicts.get(&key) {
            return Ok(*v);
        }
        if key.0 == key.1 {
            return Ok(NliVerdict {
                label: NliLabel::Entailment,
                score: 1.0,
            });
        }
        match self.on_miss {
            MissPolicy::Neutral => Ok(NliVerdict {
                label: NliLabel::Neutral,
                score: 0.0,
            }),
            MissPolicy::Error => Err(ProviderError::FixtureMiss(format!("nli({premise:?}, {hypothesis:?})"))),
        }
    }
}

/// Client for the model server. Each request is retried once before the
/// error surfaces; an empty body is never treated as an empty answer.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    base_url: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    event: &'a str,
    relation: Relation,
    k: usize,
}

#[derive(Deserialize)]
struct GenerateItem {
    phrase: String,
    p: f64,
}

#[derive(Serialize)]
struct PairRequest<'a> {
    a: &'a str,
    b: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: f64,
}

#[derive(Deserialize)]
struct NliResponse {
    label: String,
    score: f64,
}

impl HttpProvider {
    pub fn new(base_url: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build();
        HttpProvider {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent: config.into(),
        }
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(&self, path: &str, body: &Req) -> Result<Resp, ProviderError> {
        let url = format!("{}{}", self.base_url, path);
        let attempt = || -> Result<Resp, ProviderError> {
            let mut response = self
                .agent
                .post(&url)
                .send_json(body)
                .map_err(|e| ProviderError::Unavailable(format!("POST {url}: {e}")))?;
            response
                .body_mut()
                .read_json::<Resp>()
                .map_err(|e| ProviderError::Malformed(format!("POST {url}: {e}")))
        };
        attempt().or_else(|first| {
            log::warn!("retrying after provider error: {first}");
            attempt()
        })
    }
}

impl CommonsenseProvider for HttpProvider {
    fn generate(&self, event_text: &str, relation: Relation, k: usize) -> Result<Vec<RelationPrediction>, ProviderError> {
        let items: Vec<GenerateItem> = self.post(
            "/generate",
            &GenerateRequest {
                event: event_text,
                relation,
                k,
            },
        )?;
        Ok(items
            .into_iter()
            .map(|i| RelationPrediction {
                event_text: event_text.to_string(),
                relation,
                phrase: i.phrase,
                probability: i.p,
            })
            .collect())
    }
}

impl SimilarityProvider for HttpProvider {
    fn similarity(&self, a: &str, b: &str) -> Result<f64, ProviderError> {
        let r: ScoreResponse = self.post("/similarity", &PairRequest { a, b })?;
        Ok(r.score)
    }
}

impl NliProvider for HttpProvider {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, ProviderError> {
        let r: NliResponse = self.post(
            "/nli",
            &PairRequest {
                a: premise,
                b: hypothesis,
            },
        )?;
        Ok(NliVerdict {
            label: r.label.parse()?,
            score: r.score,
        })
    }
}
