//! Structured event + predictor outputs -> action model.
//!
//! The event's numbered SRL arguments give the action's subject `?x` and
//! optional object `?o`. Commonsense predictions become candidate literals
//! (`xNeed` -> preconditions, the rest -> effects), redundant or
//! contradictory candidates are filtered greedily by probability, and
//! negated literals are added where an NLI model finds a contradiction.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::annotation::{numbered_label, Sentence};
use crate::events::{EventArgument, EventId};
use crate::knowledge::{
    apply_thresholds, generate, is_none_phrase, NliLabel, Providers, ProviderError, Relation, ThresholdPolicy,
};
use crate::structuring::StructuredEvent;

/// Similarity at or above this marks two candidates as redundant.
pub const SIMILARITY_BAR: f64 = 0.5;

const LIGHT_VERBS: &[&str] = &["be", "to", "get"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Param {
    #[serde(rename = "x")]
    X,
    #[serde(rename = "o")]
    O,
}

impl Param {
    pub fn variable(self) -> &'static str {
        match self {
            Param::X => "?x",
            Param::O => "?o",
        }
    }

    pub fn type_name(self) -> &'static str {
        match self {
            Param::X => "subject",
            Param::O => "object",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.variable())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Literal {
    pub predicate: String,
    pub args: Vec<Param>,
    pub negated: bool,
    pub source_relation: Relation,
    pub probability: f64,
    /// Natural-language phrase the literal came from.
    pub phrase: String,
}

impl Literal {
    /// Identity used for duplicate and clash checks.
    pub fn key(&self) -> (&str, &[Param], bool) {
        (&self.predicate, &self.args, self.negated)
    }

    pub fn same_atom(&self, other: &Literal) -> bool {
        self.predicate == other.predicate && self.args == other.args
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<&str> = self.args.iter().map(|a| a.variable()).collect();
        let atom = format!("({} {})", self.predicate, args.join(" "));
        if self.negated {
            write!(f, "(not {atom})")
        } else {
            f.write_str(&atom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionModel {
    pub name: String,
    pub has_object: bool,
    pub subject_text: String,
    pub object_text: Option<String>,
    pub preconditions: Vec<Literal>,
    pub effects: Vec<Literal>,
}

impl ActionModel {
    pub fn parameters(&self) -> Vec<Param> {
        if self.has_object {
            vec![Param::X, Param::O]
        } else {
            vec![Param::X]
        }
    }

    /// Problems with the model's invariants; empty when well-formed.
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let params = self.parameters();
        for (pool, lits) in [("precondition", &self.preconditions), ("effect", &self.effects)] {
            let mut seen = BTreeSet::new();
            for l in lits.iter() {
                if l.args.iter().any(|a| !params.contains(a)) {
                    problems.push(format!("{pool} {l} uses an undeclared parameter"));
                }
                if !seen.insert(l.key()) {
                    problems.push(format!("duplicate {pool} {l}"));
                }
                if l.negated && lits.iter().any(|m| !m.negated && m.same_atom(l)) {
                    problems.push(format!("{pool} {l} clashes with its positive form"));
                }
            }
        }
        problems
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NegationStrategy {
    Global,
    Local,
}

impl std::str::FromStr for NegationStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "global" => Ok(NegationStrategy::Global),
            "local" => Ok(NegationStrategy::Local),
            other => Err(format!("unknown negation strategy {other:?}")),
        }
    }
}

/// Subject and object arguments: subject is ARG0, else ARG1; the object
/// is the first numbered argument after the subject's number.
pub fn select_parameters(event: &StructuredEvent) -> (Option<&EventArgument>, Option<&EventArgument>) {
    select_from(&event.base.arguments)
}

pub(crate) fn select_from(arguments: &[EventArgument]) -> (Option<&EventArgument>, Option<&EventArgument>) {
    let numbered = |n: u8| arguments.iter().find(|a| numbered_label(&a.label) == Some(n));
    let Some((subject, s)) = numbered(0).map(|a| (a, 0)).or_else(|| numbered(1).map(|a| (a, 1))) else {
        return (None, None);
    };
    let object = (s + 1..=5).find_map(numbered);
    (Some(subject), object)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("phrase {0:?} reduces to an empty predicate")]
pub struct EmptyPredicate(pub String);

fn is_word_boundary(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].chars().next_back();
    let after = text[end..].chars().next();
    !before.is_some_and(|c| c.is_alphanumeric()) && !after.is_some_and(|c| c.is_alphanumeric() || c == '\'')
}

/// Byte ranges where `needle` occurs in `text` on word boundaries.
/// Single-letter placeholders ("X", "Y") match case-sensitively.
fn find_mentions(text: &str, needle: &str) -> Vec<(usize, usize)> {
    let needle = needle.trim();
    if needle.is_empty() {
        return vec![];
    }
    let (hay, pat) = if needle.chars().count() == 1 {
        (text.to_string(), needle.to_string())
    } else {
        (text.to_lowercase(), needle.to_lowercase())
    };
    // lowercasing can change byte lengths for non-ASCII input
    if hay.len() != text.len() {
        return vec![];
    }
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = hay[from..].find(&pat) {
        let start = from + pos;
        let end = start + pat.len();
        if is_word_boundary(text, start, end) {
            out.push((start, end));
        }
        from = start + pat.len().max(1);
    }
    out
}

fn placeholders(param: Param) -> [&'static str; 2] {
    match param {
        Param::X => ["PersonX", "X"],
        Param::O => ["PersonY", "Y"],
    }
}

/// Turn a predicted phrase into a literal over `?x`/`?o`.
///
/// The relation's own participant (x for x-relations, o for o-relations)
/// is always the first argument. A mention of the other participant is cut
/// from the phrase and added as the second argument. Leading mentions of
/// the participant itself and leading light verbs are dropped, and the
/// rest is lowercased and hyphenated.
pub fn normalize_literal(
    phrase: &str,
    relation: Relation,
    probability: f64,
    x_text: &str,
    o_text: Option<&str>,
) -> Result<Literal, EmptyPredicate> {
    let (own, other) = if relation.is_object_side() {
        (Param::O, Param::X)
    } else {
        (Param::X, Param::O)
    };
    let text_of = |p: Param| match p {
        Param::X => Some(x_text),
        Param::O => o_text,
    };

    let mut text = phrase.trim().to_string();
    let mut args = vec![own];
    // The other participant only exists as a parameter when the event has it.
    if let Some(other_text) = text_of(other) {
        let mut needles: Vec<&str> = vec![other_text];
        needles.extend(placeholders(other));
        let mut found = false;
        for needle in needles {
            let hits = find_mentions(&text, needle);
            if hits.is_empty() {
                continue;
            }
            found = true;
            for &(start, end) in hits.iter().rev() {
                let head = text[..start].trim_end();
                // comitative "with" only marks the pairing that the argument list now carries
                let head = match head.rsplit_once(char::is_whitespace) {
                    Some((rest, w)) if w.eq_ignore_ascii_case("with") => rest,
                    None if head.eq_ignore_ascii_case("with") => "",
                    _ => head,
                };
                text = format!("{} {}", head, &text[end..]);
            }
        }
        if found {
            args.push(other);
        }
    }

    let mut own_needles: Vec<&str> = text_of(own).into_iter().collect();
    own_needles.extend(placeholders(own));
    loop {
        let trimmed = text.trim_start();
        let hit = own_needles.iter().find_map(|n| {
            find_mentions(trimmed, n)
                .first()
                .filter(|(s, _)| *s == 0)
                .map(|&(_, e)| e)
        });
        match hit {
            Some(end) => text = trimmed[end..].to_string(),
            None => break,
        }
    }

    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| *c != '\'' && *c != '\u{2019}')
        .map(|c| if c.is_ascii_alphanumeric() || c.is_whitespace() || c == '-' { c } else { ' ' })
        .collect();
    let mut words: Vec<&str> = cleaned
        .split(|c: char| c.is_whitespace() || c == '-')
        .filter(|w| !w.is_empty())
        .collect();
    while words.len() > 1 && LIGHT_VERBS.contains(&words[0]) {
        words.remove(0);
    }
    let predicate: String = words
        .iter()
        .map(|w| w.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join("-");
    if predicate.is_empty() {
        return Err(EmptyPredicate(phrase.to_string()));
    }
    Ok(Literal {
        predicate,
        args,
        negated: false,
        source_relation: relation,
        probability,
        phrase: phrase.to_string(),
    })
}

/// Identifier form of a verb phrase: lowercase, hyphen-separated.
pub fn normalize_identifier(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .filter(|c| *c != '\'' && *c != '\u{2019}')
        .map(|c| if c.is_ascii_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("-")
}

/// Why a predicted phrase did or did not end up in the action.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Kept,
    BelowThreshold,
    /// The sentinel itself, or anything ranked after it.
    NoneTruncated,
    EmptyPredicate,
    Similar { to: String, score: f64 },
    Contradicts { kept: String, score: f64 },
    Duplicate { of: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateRecord {
    pub relation: Relation,
    pub phrase: String,
    pub probability: f64,
    pub literal: Option<String>,
    #[serde(flatten)]
    pub decision: Decision,
}

/// Precondition pool, effect pool and one record per prediction.
pub type CandidatePools = (Vec<Literal>, Vec<Literal>, Vec<CandidateRecord>);

/// Threshold and normalize every relation's predictions. Returns the
/// precondition and effect pools plus one record per prediction; records
/// for pooled candidates are finalized later by [`filter_candidates`].
pub fn predict_candidates(
    event_text: &str,
    x_text: &str,
    o_text: Option<&str>,
    providers: &Providers,
    policy: &ThresholdPolicy,
) -> Result<CandidatePools, ProviderError> {
    let mut preconditions = Vec::new();
    let mut effects = Vec::new();
    let mut records = Vec::new();
    for relation in Relation::ALL {
        if relation.is_object_side() && o_text.is_none() {
            continue;
        }
        let preds = generate(providers.commonsense.as_ref(), event_text, relation, policy.k)?;
        let kept = apply_thresholds(&preds, policy);
        for (i, p) in preds.iter().enumerate() {
            if i >= kept.len() {
                let below = p.probability < policy.threshold(relation);
                let cut_by_none = preds[..=i].iter().any(|q| is_none_phrase(&q.phrase));
                let decision = if cut_by_none && !(below && preds[..i].iter().all(|q| !is_none_phrase(&q.phrase))) {
                    Decision::NoneTruncated
                } else {
                    Decision::BelowThreshold
                };
                records.push(CandidateRecord {
                    relation,
                    phrase: p.phrase.clone(),
                    probability: p.probability,
                    literal: None,
                    decision,
                });
                continue;
            }
            match normalize_literal(&p.phrase, relation, p.probability, x_text, o_text) {
                Ok(lit) => {
                    if relation.is_precondition() {
                        preconditions.push(lit);
                    } else {
                        effects.push(lit);
                    }
                }
                Err(e) => {
                    log::warn!("{e}; candidate discarded");
                    records.push(CandidateRecord {
                        relation,
                        phrase: p.phrase.clone(),
                        probability: p.probability,
                        literal: None,
                        decision: Decision::EmptyPredicate,
                    });
                }
            }
        }
    }
    Ok((preconditions, effects, records))
}

/// Probability descending, then relation order, then phrase.
pub fn candidate_order(a: &Literal, b: &Literal) -> Ordering {
    b.probability
        .total_cmp(&a.probability)
        .then(a.source_relation.cmp(&b.source_relation))
        .then_with(|| a.phrase.cmp(&b.phrase))
}

/// Greedy redundancy/contradiction filter over one pool.
///
/// Candidates are visited most probable first; one is dropped when it is
/// similar to (score >= 0.5) or contradicted by an already kept candidate.
/// Candidates normalizing to an already kept literal are dropped as well.
pub fn filter_candidates(
    candidates: &[Literal],
    providers: &Providers,
) -> Result<(Vec<Literal>, Vec<CandidateRecord>), ProviderError> {
    let mut ordered = candidates.to_vec();
    ordered.sort_by(candidate_order);
    let mut kept: Vec<Literal> = Vec::new();
    let mut records = Vec::with_capacity(ordered.len());
    'next: for cand in ordered {
        let record = |decision: Decision| CandidateRecord {
            relation: cand.source_relation,
            phrase: cand.phrase.clone(),
            probability: cand.probability,
            literal: Some(cand.to_string()),
            decision,
        };
        for k in &kept {
            if k.key() == cand.key() {
                records.push(record(Decision::Duplicate { of: k.phrase.clone() }));
                continue 'next;
            }
            let score = providers.similarity.similarity(&k.phrase, &cand.phrase)?;
            if score >= SIMILARITY_BAR {
                records.push(record(Decision::Similar {
                    to: k.phrase.clone(),
                    score,
                }));
                continue 'next;
            }
            let verdict = providers.nli.nli(&k.phrase, &cand.phrase)?;
            if verdict.label == NliLabel::Contradiction {
                records.push(record(Decision::Contradicts {
                    kept: k.phrase.clone(),
                    score: verdict.score,
                }));
                continue 'next;
            }
        }
        records.push(record(Decision::Kept));
        kept.push(cand);
    }
    Ok((kept, records))
}

/// Natural-language rendering of a literal for NLI: the argument texts
/// around the predicate words, e.g. `Bryan close to Jack`.
pub fn literal_phrase(predicate: &str, args: &[Param], x_text: &str, o_text: Option<&str>) -> String {
    let text = |p: Param| match p {
        Param::X => x_text.to_string(),
        Param::O => o_text.unwrap_or("?o").to_string(),
    };
    let words = predicate.replace('-', " ");
    match args {
        [] => words,
        [a] => format!("{} {}", text(*a), words),
        [a, b, ..] => format!("{} {} {}", text(*a), words, text(*b)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegationRecord {
    pub pool: &'static str,
    pub literal: String,
    pub contradicted_by: String,
    pub score: f64,
    pub added: bool,
}

/// Domain predicate signature: name and arity.
pub type PredicateSig = (String, usize);

fn instantiations(arity: usize, has_object: bool) -> Vec<Vec<Param>> {
    match (arity, has_object) {
        (1, false) => vec![vec![Param::X]],
        (1, true) => vec![vec![Param::X], vec![Param::O]],
        (2, true) => vec![vec![Param::X, Param::O], vec![Param::O, Param::X]],
        _ => vec![],
    }
}

/// Add negated literals contradicted by the action's positive literals.
///
/// `Local` only negates the action's own preconditions, as effects.
/// `Global` tests every domain predicate, yielding negated effects and
/// negated preconditions. A negation that clashes with a positive literal
/// of the same pool is not added.
pub fn generate_negations(
    action: &ActionModel,
    domain_predicates: &BTreeSet<PredicateSig>,
    strategy: NegationStrategy,
    providers: &Providers,
) -> Result<(ActionModel, Vec<NegationRecord>), ProviderError> {
    let x = action.subject_text.as_str();
    let o = action.object_text.as_deref();
    let phrase_of = |predicate: &str, args: &[Param]| literal_phrase(predicate, args, x, o);

    let positives = |lits: &[Literal]| lits.iter().filter(|l| !l.negated).cloned().collect::<Vec<_>>();
    let pos_pre = positives(&action.preconditions);
    let pos_eff = positives(&action.effects);

    // (pool, candidate atom) pairs to test, in deterministic order
    let mut targets: Vec<(&'static str, String, Vec<Param>)> = Vec::new();
    match strategy {
        NegationStrategy::Local => {
            for p in &pos_pre {
                targets.push(("effect", p.predicate.clone(), p.args.clone()));
            }
        }
        NegationStrategy::Global => {
            let mut sigs = domain_predicates.clone();
            for l in pos_pre.iter().chain(&pos_eff) {
                sigs.insert((l.predicate.clone(), l.args.len()));
            }
            for pool in ["effect", "precondition"] {
                for (name, arity) in &sigs {
                    for args in instantiations(*arity, action.has_object) {
                        targets.push((pool, name.clone(), args));
                    }
                }
            }
        }
    }

    let mut model = action.clone();
    let mut records = Vec::new();
    for (pool, predicate, args) in targets {
        let sources = if pool == "effect" { &pos_eff } else { &pos_pre };
        let target_phrase = phrase_of(&predicate, &args);
        for src in sources {
            if src.predicate == predicate && src.args == args {
                continue;
            }
            let verdict = providers.nli.nli(&phrase_of(&src.predicate, &src.args), &target_phrase)?;
            if verdict.label != NliLabel::Contradiction {
                continue;
            }
            let negation = Literal {
                predicate: predicate.clone(),
                args: args.clone(),
                negated: true,
                source_relation: src.source_relation,
                probability: verdict.score,
                phrase: target_phrase.clone(),
            };
            let lits = if pool == "effect" { &mut model.effects } else { &mut model.preconditions };
            let added = !lits.iter().any(|l| l.same_atom(&negation));
            records.push(NegationRecord {
                pool,
                literal: negation.to_string(),
                contradicted_by: src.to_string(),
                score: verdict.score,
                added,
            });
            if added {
                lits.push(negation);
            }
            break;
        }
    }
    Ok((model, records))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionStatus {
    Emitted,
    /// Plain statements without an argument event describe no action.
    SkippedStatement,
    SkippedNoSubject,
    SkippedNoLiterals,
}

/// Everything decided while turning one event into an action.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionTrace {
    pub event: EventId,
    pub event_text: String,
    pub subject: Option<String>,
    pub object: Option<String>,
    pub status: ActionStatus,
    /// Final name in the domain, filled in after assembly.
    pub action: Option<String>,
    pub candidates: Vec<CandidateRecord>,
    pub negations: Vec<NegationRecord>,
}

/// Positive action model for one event (negations come later, once the
/// whole domain is known).
pub fn synthesize(
    event: &StructuredEvent,
    sentence: &Sentence,
    providers: &Providers,
    policy: &ThresholdPolicy,
) -> Result<(Option<ActionModel>, ActionTrace), ProviderError> {
    let event_text = event.event_text(sentence);
    let (subject, object) = select_parameters(event);
    let mut trace = ActionTrace {
        event: event.id(),
        event_text: event_text.clone(),
        subject: subject.map(|a| a.resolved_text.clone()),
        object: object.map(|a| a.resolved_text.clone()),
        status: ActionStatus::Emitted,
        action: None,
        candidates: Vec::new(),
        negations: Vec::new(),
    };
    if event.base.is_statement && event.argument_children.is_empty() {
        trace.status = ActionStatus::SkippedStatement;
        return Ok((None, trace));
    }
    let Some(subject) = subject else {
        trace.status = ActionStatus::SkippedNoSubject;
        return Ok((None, trace));
    };
    let x_text = subject.resolved_text.as_str();
    let o_text = object.map(|a| a.resolved_text.as_str());

    let (pre_pool, eff_pool, mut records) = predict_candidates(&event_text, x_text, o_text, providers, policy)?;
    let (preconditions, pre_records) = filter_candidates(&pre_pool, providers)?;
    let (effects, eff_records) = filter_candidates(&eff_pool, providers)?;
    records.extend(pre_records);
    records.extend(eff_records);
    trace.candidates = records;

    if preconditions.is_empty() && effects.is_empty() {
        trace.status = ActionStatus::SkippedNoLiterals;
        return Ok((None, trace));
    }
    let model = ActionModel {
        name: normalize_identifier(&event.base.verb_text),
        has_object: object.is_some(),
        subject_text: x_text.to_string(),
        object_text: o_text.map(str::to_string),
        preconditions,
        effects,
    };
    Ok((Some(model), trace))
}
