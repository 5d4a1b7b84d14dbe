//! Argument-event merging and condition-event splitting.
//!
//! Events whose verb sits inside another event's argument are *contained*.
//! A contained event that is really an argument (clausal complement,
//! passive/copula auxiliary, or purpose clause) is folded into its
//! container, widening the container's verb into a verb phrase. Events
//! introduced by a conditional signal phrase are linked to the event they
//! condition and cut out of that event's arguments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::annotation::{join_tokens, Sentence, Span};
use crate::events::{Event, EventArgument, EventId, ResolvedDocument};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructuringError {
    #[error("argument-event relation contains a cycle through {0}")]
    Cycle(EventId),
}

const CLAUSAL_COMPLEMENTS: &[&str] = &["ccomp", "xcomp", "csubj"];
const AUXILIARY_LINKS: &[&str] = &["cop", "aux:pass"];
const PURPOSE_LABELS: &[&str] = &["ARGM-PRP", "ARGM-PNC"];

pub const DEFAULT_SIGNALS: &[&str] = &[
    "if",
    "whenever",
    "as long as",
    "on condition that",
    "on the condition that",
    "provided that",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuredEvent {
    /// Root event; after merging its span/text/arguments describe the whole group.
    pub base: Event,
    pub merged_verb_phrase: String,
    pub argument_children: Vec<EventId>,
    pub condition_of: Option<EventId>,
    pub conditions: Vec<EventId>,
}

impl StructuredEvent {
    pub fn id(&self) -> EventId {
        self.base.id
    }

    /// Text handed to the commonsense predictor: verb phrase and resolved
    /// arguments in sentence order.
    pub fn event_text(&self, sentence: &Sentence) -> String {
        let mut pieces: Vec<(usize, String)> = self
            .base
            .arguments
            .iter()
            .map(|a| (a.span.start, a.resolved_text.clone()))
            .collect();
        pieces.push((self.base.verb_span.start, sentence.span_text(self.base.verb_span)));
        pieces.sort_by_key(|(start, _)| *start);
        join_tokens(pieces.iter().map(|(_, t)| t.as_str()))
    }
}

/// Pairs `(container, contained)` where the contained event's verb lies in
/// one of the container's argument spans.
pub fn contained_events(events: &[Event]) -> Vec<(EventId, EventId)> {
    let mut pairs = Vec::new();
    for outer in events {
        for inner in events {
            if outer.id == inner.id || outer.sentence_index != inner.sentence_index {
                continue;
            }
            if outer.arguments.iter().any(|a| a.span.contains(inner.head_index)) {
                pairs.push((outer.id, inner.id));
            }
        }
    }
    pairs
}

/// Whether a contained event is an argument of its container.
pub fn is_argument_event(container: &Event, contained: &Event, sentence: &Sentence) -> bool {
    let complement = sentence
        .relations_between(container.head_index, contained.head_index)
        .any(|r| CLAUSAL_COMPLEMENTS.contains(&r));
    let auxiliary = sentence
        .relations_between(contained.head_index, container.head_index)
        .any(|r| AUXILIARY_LINKS.contains(&r));
    let purpose = container
        .arguments
        .iter()
        .filter(|a| PURPOSE_LABELS.contains(&a.label.as_str()))
        .any(|a| a.span.covers(&contained.verb_span) && contained.arguments.iter().all(|c| a.span.covers(&c.span)));
    complement || auxiliary || purpose
}

fn find_cycle(pairs: &[(EventId, EventId)]) -> Option<EventId> {
    let mut children: BTreeMap<EventId, Vec<EventId>> = BTreeMap::new();
    for &(p, c) in pairs {
        children.entry(p).or_default().push(c);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<EventId, u8> = BTreeMap::new();
    fn visit(
        node: EventId,
        children: &BTreeMap<EventId, Vec<EventId>>,
        state: &mut BTreeMap<EventId, u8>,
    ) -> Option<EventId> {
        match state.get(&node) {
            Some(1) => return Some(node),
            Some(2) => return None,
            _ => {}
        }
        state.insert(node, 1);
        for &c in children.get(&node).into_iter().flatten() {
            if let Some(hit) = visit(c, children, state) {
                return Some(hit);
            }
        }
        state.insert(node, 2);
        None
    }
    let nodes: BTreeSet<EventId> = pairs.iter().flat_map(|&(p, c)| [p, c]).collect();
    nodes.into_iter().find_map(|n| visit(n, &children, &mut state))
}

fn subtract(span: Span, cut: Span) -> Option<Span> {
    if !span.overlaps(&cut) {
        Some(span)
    } else if cut.covers(&span) {
        None
    } else if span.start < cut.start {
        Some(Span::new(span.start, cut.start))
    } else {
        Some(Span::new(cut.end, span.end))
    }
}

/// Fold argument events into their containers.
///
/// When an event is the argument of several containers, the container whose
/// enclosing argument span is tightest wins. Roots absorb every descendant.
pub fn merge_argument_events(
    events: &[Event],
    argument_pairs: &[(EventId, EventId)],
    doc: &ResolvedDocument,
) -> Result<Vec<StructuredEvent>, StructuringError> {
    if let Some(id) = find_cycle(argument_pairs) {
        return Err(StructuringError::Cycle(id));
    }
    let by_id: BTreeMap<EventId, &Event> = events.iter().map(|e| (e.id, e)).collect();

    let mut parent: BTreeMap<EventId, EventId> = BTreeMap::new();
    for &(p, c) in argument_pairs {
        let (Some(pe), Some(ce)) = (by_id.get(&p), by_id.get(&c)) else {
            continue;
        };
        let tightness = |container: &Event| {
            let width = container
                .arguments
                .iter()
                .filter(|a| a.span.contains(ce.head_index))
                .map(|a| a.span.len())
                .min()
                .unwrap_or(usize::MAX);
            (width, container.head_index.abs_diff(ce.head_index), container.id)
        };
        match parent.get(&c) {
            Some(existing) if tightness(by_id[existing]) <= tightness(pe) => {}
            _ => {
                parent.insert(c, p);
            }
        }
    }
    let mut children: BTreeMap<EventId, Vec<EventId>> = BTreeMap::new();
    for (&c, &p) in &parent {
        children.entry(p).or_default().push(c);
    }

    let mut out = Vec::new();
    for event in events {
        if parent.contains_key(&event.id) {
            continue;
        }
        let mut group = Vec::new();
        let mut stack = vec![event.id];
        while let Some(id) = stack.pop() {
            group.push(id);
            if let Some(cs) = children.get(&id) {
                stack.extend(cs.iter().rev());
            }
        }
        let descendants: Vec<EventId> = {
            let mut d: Vec<EventId> = group[1..].to_vec();
            d.sort();
            d
        };
        if descendants.is_empty() {
            out.push(StructuredEvent {
                base: event.clone(),
                merged_verb_phrase: event.verb_text.clone(),
                argument_children: vec![],
                condition_of: None,
                conditions: vec![],
            });
            continue;
        }

        let members: Vec<&Event> = group.iter().map(|id| by_id[id]).collect();
        let merged = Span::new(
            members.iter().map(|e| e.verb_span.start).min().unwrap(),
            members.iter().map(|e| e.verb_span.end).max().unwrap(),
        );
        let sentence = &doc.doc.sentences[event.sentence_index];
        let mut words = Vec::new();
        let mut i = merged.start;
        while i < merged.end {
            if event.verb_span.contains(i) {
                words.push(event.verb_text.clone());
                i = event.verb_span.end;
            } else {
                words.push(sentence.tokens[i].text.clone());
                i += 1;
            }
        }
        let phrase = words.join(" ");

        let mut spans = group_arguments(event.id, &by_id, &children, merged);
        // Keep every token of the absorbed events covered.
        for id in &descendants {
            for arg in &by_id[id].arguments {
                for piece in uncovered_pieces(arg.span, merged, &spans) {
                    spans.push((arg.label.clone(), piece));
                }
            }
        }
        spans.sort_by_key(|(_, s)| (s.start, s.end));
        let arguments = spans
            .into_iter()
            .map(|(label, span)| EventArgument {
                label,
                span,
                resolved_text: doc.resolved_text(event.sentence_index, span),
            })
            .collect();

        let mut base = event.clone();
        base.verb_span = merged;
        base.verb_text = phrase.clone();
        base.arguments = arguments;
        out.push(StructuredEvent {
            base,
            merged_verb_phrase: phrase,
            argument_children: descendants,
            condition_of: None,
            conditions: vec![],
        });
    }
    Ok(out)
}

/// Arguments of `id` after merging: spans swallowed by the merged verb
/// phrase are dropped, and an argument holding a child event is replaced by
/// the child's own arguments found inside it.
fn group_arguments(
    id: EventId,
    by_id: &BTreeMap<EventId, &Event>,
    children: &BTreeMap<EventId, Vec<EventId>>,
    merged: Span,
) -> Vec<(String, Span)> {
    let event = by_id[&id];
    let kids = children.get(&id).map(Vec::as_slice).unwrap_or(&[]);
    let mut out: Vec<(String, Span)> = Vec::new();
    for arg in &event.arguments {
        let holders: Vec<EventId> = kids
            .iter()
            .copied()
            .filter(|k| arg.span.contains(by_id[k].head_index))
            .collect();
        if holders.is_empty() {
            if let Some(span) = subtract(arg.span, merged) {
                out.push((arg.label.clone(), span));
            }
            continue;
        }
        for k in holders {
            for (label, span) in group_arguments(k, by_id, children, merged) {
                if arg.span.covers(&span) && !out.iter().any(|(_, s)| s.overlaps(&span)) {
                    out.push((label, span));
                }
            }
        }
    }
    out
}

fn uncovered_pieces(span: Span, merged: Span, kept: &[(String, Span)]) -> Vec<Span> {
    let covered = |i: usize| merged.contains(i) || kept.iter().any(|(_, s)| s.contains(i));
    let mut pieces = Vec::new();
    let mut start = None;
    for i in span.indices() {
        match (covered(i), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                pieces.push(Span::new(s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        pieces.push(Span::new(s, span.end));
    }
    pieces
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Tense {
    FutureSimple,
    PresentSimple,
    PastSimple,
    Infinitive,
    PastParticiple,
    Gerund,
    PastContinuous,
    PastPerfect,
    PastPerfectContinuous,
    PerfectConditional,
    PerfectConditionalContinuous,
    Unknown,
}

fn is_negation(token: &crate::annotation::Token) -> bool {
    token.pos == "RB" && matches!(token.text.to_lowercase().as_str(), "not" | "n't" | "never")
}

fn is_auxiliary(token: &crate::annotation::Token) -> bool {
    let lemma = token.lemma.to_lowercase();
    token.pos == "MD" || token.pos == "TO" || (token.pos.starts_with("VB") && matches!(lemma.as_str(), "be" | "have" | "do"))
}

/// Auxiliary words (lowercased surface forms) directly preceding the verb,
/// left to right. Negation adverbs inside the group are skipped.
pub fn auxiliary_chain(sentence: &Sentence, verb_index: usize) -> Vec<String> {
    let mut chain = Vec::new();
    let mut i = verb_index;
    while i > 0 {
        i -= 1;
        let token = &sentence.tokens[i];
        if is_negation(token) {
            continue;
        }
        if !is_auxiliary(token) {
            break;
        }
        chain.push(normalize_aux(&token.text));
    }
    chain.reverse();
    chain
}

fn normalize_aux(word: &str) -> String {
    match word.to_lowercase().as_str() {
        "'ll" => "will".into(),
        "'d" => "would".into(),
        "'ve" => "have".into(),
        "wo" => "will".into(),
        "ca" => "can".into(),
        other => other.to_string(),
    }
}

fn ends_with(chain: &[String], tail: &[&str]) -> bool {
    chain.len() >= tail.len() && chain[chain.len() - tail.len()..].iter().zip(tail).all(|(a, b)| a == b)
}

fn last_in(chain: &[String], words: &[&str]) -> bool {
    chain.last().is_some_and(|w| words.contains(&w.as_str()))
}

/// Tense of the verb at `verb_index` from its POS tag and auxiliaries.
pub fn classify_tense(sentence: &Sentence, verb_index: usize) -> Tense {
    let chain = auxiliary_chain(sentence, verb_index);
    let pos = sentence.tokens[verb_index].pos.as_str();
    let modal_have = |c: &[String], modals: &[&str]| {
        c.len() >= 2 && c[c.len() - 1] == "have" && modals.contains(&c[c.len() - 2].as_str())
    };
    match pos {
        "VBG" => {
            if chain.len() >= 3 && ends_with(&chain, &["have", "been"]) && chain[chain.len() - 3] == "would" {
                Tense::PerfectConditionalContinuous
            } else if ends_with(&chain, &["had", "been"]) {
                Tense::PastPerfectContinuous
            } else if last_in(&chain, &["was", "were"]) {
                Tense::PastContinuous
            } else {
                Tense::Gerund
            }
        }
        "VBN" => {
            if modal_have(&chain, &["would", "might", "could"]) {
                Tense::PerfectConditional
            } else if last_in(&chain, &["had"]) {
                Tense::PastPerfect
            } else {
                Tense::PastParticiple
            }
        }
        "VB" => {
            if last_in(&chain, &["will", "shall"]) {
                Tense::FutureSimple
            } else if last_in(&chain, &["do", "does"]) {
                Tense::PresentSimple
            } else if last_in(&chain, &["did"]) {
                Tense::PastSimple
            } else if chain.last().is_some_and(|w| w == "to")
                || sentence.tokens[..verb_index]
                    .iter()
                    .rev()
                    .find(|t| !is_negation(t))
                    .is_some_and(|t| t.pos == "MD")
            {
                Tense::Infinitive
            } else {
                Tense::Unknown
            }
        }
        "VBZ" | "VBP" if chain.is_empty() => Tense::PresentSimple,
        "VBD" if chain.is_empty() => Tense::PastSimple,
        _ => Tense::Unknown,
    }
}

/// Tense-pattern rules for a (consequence, condition) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ConditionPattern {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    S8,
    S9,
    S10,
}

impl fmt::Display for ConditionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// First pattern satisfied by the consequence verb (tense plus adjacent
/// auxiliaries) and the condition verb tense.
pub fn match_pattern(consequence_chain: &[String], consequence: Tense, condition: Tense) -> Option<ConditionPattern> {
    use ConditionPattern::*;
    use Tense::*;
    let c = consequence_chain;
    let rules: [(ConditionPattern, bool); 10] = [
        (S1, consequence == FutureSimple && condition == PresentSimple),
        (S2, consequence == PresentSimple && condition == FutureSimple),
        (S3, last_in(c, &["must", "should", "may", "might"]) && condition == PresentSimple),
        (S4, last_in(c, &["would"]) && consequence == Infinitive && condition == PastSimple),
        (S5, last_in(c, &["could", "might"]) && condition == PastSimple),
        (
            S6,
            last_in(c, &["could"]) && consequence == Infinitive && matches!(condition, PastContinuous | PastPerfect),
        ),
        (
            S7,
            (ends_with(c, &["would", "have"]) || ends_with(c, &["might", "have"]) || ends_with(c, &["could", "have"]))
                && consequence == PerfectConditional
                && condition == PastPerfect,
        ),
        (S8, consequence == PerfectConditionalContinuous && condition == PastPerfect),
        (S9, consequence == PerfectConditional && condition == PastPerfectContinuous),
        (S10, ends_with(c, &["would", "be"]) && consequence == Gerund && condition == PastPerfect),
    ];
    rules.into_iter().find(|(_, hit)| *hit).map(|(p, _)| p)
}

/// Signal phrases that introduce a condition, as lowercase word sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalSet {
    phrases: Vec<Vec<String>>,
}

impl SignalSet {
    pub fn new<S: AsRef<str>>(phrases: &[S]) -> Self {
        SignalSet {
            phrases: phrases
                .iter()
                .map(|p| p.as_ref().split_whitespace().map(str::to_lowercase).collect::<Vec<_>>())
                .filter(|p| !p.is_empty())
                .collect(),
        }
    }

    /// Every occurrence in the sentence, left to right.
    pub fn occurrences(&self, sentence: &Sentence) -> Vec<Span> {
        let words: Vec<String> = sentence.tokens.iter().map(|t| t.text.to_lowercase()).collect();
        let mut found = BTreeSet::new();
        for phrase in &self.phrases {
            for start in 0..words.len() {
                if words[start..].starts_with(phrase) {
                    found.insert(Span::new(start, start + phrase.len()));
                }
            }
        }
        // "on the condition that" also contains no shorter signal, but
        // "as long as" style overlaps keep only the longest match.
        let spans: Vec<Span> = found.into_iter().collect();
        spans
            .iter()
            .copied()
            .filter(|s| !spans.iter().any(|o| o != s && o.covers(s)))
            .collect()
    }
}

impl Default for SignalSet {
    fn default() -> Self {
        SignalSet::new(DEFAULT_SIGNALS)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionLink {
    pub condition: EventId,
    pub consequence: EventId,
    pub pattern: ConditionPattern,
    pub signal: Span,
}

/// Link condition events to their consequences and cut the condition out
/// of the consequence's arguments. Events must belong to one sentence.
pub fn detect_conditions(
    events: &mut [StructuredEvent],
    doc: &ResolvedDocument,
    sentence_index: usize,
    signals: &SignalSet,
) -> Vec<ConditionLink> {
    let sentence = &doc.doc.sentences[sentence_index];
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by_key(|&i| events[i].base.verb_span.start);

    let mut links = Vec::new();
    for signal in signals.occurrences(sentence) {
        let first_after = |from: usize| {
            order
                .iter()
                .copied()
                .find(|&i| events[i].base.verb_span.start >= from)
        };
        let last_before = order
            .iter()
            .copied()
            .rev()
            .find(|&i| events[i].base.verb_span.end <= signal.start);

        // (consequence, condition) in the two admissible orders
        let forward = last_before.zip(first_after(signal.end));
        let backward = first_after(signal.end).and_then(|j| first_after(events[j].base.verb_span.end).map(|i| (i, j)));

        let judge = |(i, j): (usize, usize)| {
            let ci = &events[i].base;
            let cj = &events[j].base;
            let chain = auxiliary_chain(sentence, ci.head_index);
            match_pattern(
                &chain,
                classify_tense(sentence, ci.head_index),
                classify_tense(sentence, cj.head_index),
            )
            .map(|p| (i, j, p))
        };
        let chosen = forward.and_then(judge).or_else(|| backward.and_then(judge));
        let Some((i, j, pattern)) = chosen else {
            continue;
        };
        // an event conditions at most one consequence
        if events[j].condition_of.is_some() {
            continue;
        }

        let condition_end = events[j]
            .base
            .arguments
            .iter()
            .map(|a| a.span.end)
            .chain([events[j].base.verb_span.end])
            .max()
            .unwrap();
        let cut = Span::new(signal.start, condition_end.max(signal.end));
        let consequence = &mut events[i].base;
        consequence.arguments = consequence
            .arguments
            .iter()
            .filter_map(|a| {
                subtract(a.span, cut).map(|span| EventArgument {
                    label: a.label.clone(),
                    span,
                    resolved_text: doc.resolved_text(sentence_index, span),
                })
            })
            .collect();

        let (condition_id, consequence_id) = (events[j].id(), events[i].id());
        events[j].condition_of = Some(consequence_id);
        events[i].conditions.push(condition_id);
        links.push(ConditionLink {
            condition: condition_id,
            consequence: consequence_id,
            pattern,
            signal,
        });
    }
    links
}

/// All structure found in one document.
#[derive(Debug, Clone, Serialize)]
pub struct StructuredDocument {
    pub doc_id: String,
    pub events: Vec<StructuredEvent>,
    pub containment: Vec<(EventId, EventId)>,
    pub argument_links: Vec<(EventId, EventId)>,
    pub condition_links: Vec<ConditionLink>,
}

/// Run containment, argument merging and condition detection sentence by sentence.
pub fn structure_document(
    doc: &ResolvedDocument,
    events: &[Event],
    signals: &SignalSet,
) -> Result<StructuredDocument, StructuringError> {
    let mut out = StructuredDocument {
        doc_id: doc.doc.doc_id.clone(),
        events: vec![],
        containment: vec![],
        argument_links: vec![],
        condition_links: vec![],
    };
    for (si, sentence) in doc.doc.sentences.iter().enumerate() {
        let sentence_events: Vec<Event> = events.iter().filter(|e| e.sentence_index == si).cloned().collect();
        if sentence_events.is_empty() {
            continue;
        }
        let by_id: BTreeMap<EventId, &Event> = sentence_events.iter().map(|e| (e.id, e)).collect();
        let contained = contained_events(&sentence_events);
        let arguments: Vec<(EventId, EventId)> = contained
            .iter()
            .copied()
            .filter(|(p, c)| is_argument_event(by_id[p], by_id[c], sentence))
            .collect();
        let mut structured = merge_argument_events(&sentence_events, &arguments, doc)?;
        let links = detect_conditions(&mut structured, doc, si, signals);
        out.containment.extend(contained);
        out.argument_links.extend(arguments);
        out.condition_links.extend(links);
        out.events.extend(structured);
    }
    Ok(out)
}
