#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{Hash, Hasher};

use proptest::prelude::*;
use story2pddl::annotation::{
    load_document, serialize_document, AnnotatedDocument, CorefChain, DependencyEdge, Head, Mention, Sentence, Span,
    SrlArgument, SrlFrame, Token,
};
use story2pddl::events::{
    build_events, detect_phrasal_verb, resolve_entities, EventArgument, EventId, Event, PhrasalLexicon,
};
use story2pddl::knowledge::{
    apply_thresholds, CommonsenseProvider, NliLabel, NliProvider, NliVerdict, ProviderError, Providers, Relation,
    RelationPrediction, SimilarityProvider, ThresholdPolicy,
};
use story2pddl::pddl::{assemble, emit_pddl, read_actions, validate_syntax};
use story2pddl::structuring::{structure_document, SignalSet, StructuredEvent};
use story2pddl::synthesis::{
    candidate_order, filter_candidates, generate_negations, select_parameters, ActionModel, Literal,
    NegationStrategy, Param,
};

// ---- random annotations ----

pub const WORDS: &[(&str, &str, &str)] = &[
    ("made", "make", "VBD"),
    ("up", "up", "RP"),
    ("is", "be", "VBZ"),
    ("had", "have", "VBD"),
    ("fell", "fall", "VBD"),
    ("in", "in", "IN"),
    ("ran", "run", "VBD"),
    ("away", "away", "RB"),
    ("Jack", "Jack", "NNP"),
    ("he", "he", "PRP"),
    ("the", "the", "DT"),
    ("lamp", "lamp", "NN"),
    ("if", "if", "IN"),
    ("will", "will", "MD"),
    ("to", "to", "TO"),
    ("gave", "give", "VBD"),
];
pub const RELS: &[&str] = &["nsubj", "obj", "compound:prt", "case", "mark", "ccomp", "xcomp", "aux", "advcl", "det"];
pub const LABELS: &[&str] = &["ARG0", "ARG1", "ARG2", "ARG3", "ARGM-LOC", "ARGM-PRP", "ARGM-ADV", "R-ARG0", "C-ARG1"];

type RawFrame = (usize, Vec<(usize, usize, usize)>);

pub fn sentence_strategy() -> impl Strategy<Value = Sentence> {
    (1usize..9).prop_flat_map(|n| {
        (
            prop::collection::vec(0..WORDS.len(), n),
            prop::collection::vec(any::<prop::sample::Index>(), n),
            prop::collection::vec(0..RELS.len(), n),
            0..n,
            prop::collection::vec((0..n, prop::collection::vec((0..LABELS.len(), 0..n, 1..=n), 0..5)), 0..3),
        )
            .prop_map(move |(words, heads, rels, rot, frames)| build_sentence(n, &words, &heads, &rels, rot, &frames))
    })
}

pub fn build_sentence(
    n: usize,
    words: &[usize],
    heads: &[prop::sample::Index],
    rels: &[usize],
    rot: usize,
    frames: &[RawFrame],
) -> Sentence {
    let tokens = words
        .iter()
        .enumerate()
        .map(|(index, &w)| Token {
            index,
            text: WORDS[w].0.into(),
            lemma: WORDS[w].1.into(),
            pos: WORDS[w].2.into(),
        })
        .collect();
    // a tree over positions 0..n rooted at 0, relabelled by a rotation
    let at = |i: usize| (i + rot) % n;
    let deps = (0..n)
        .map(|i| DependencyEdge {
            head: if i == 0 { Head::Root } else { Head::Token(at(heads[i].index(i))) },
            dependent: at(i),
            relation: if i == 0 { "root".into() } else { RELS[rels[i]].into() },
        })
        .collect();
    let frames = frames
        .iter()
        .map(|(verb, args)| {
            let mut seen = BTreeSet::new();
            let arguments = args
                .iter()
                .filter_map(|&(l, a, b)| {
                    let span = Span::new(a.min(b), a.max(b).max(a.min(b) + 1).min(n));
                    let label = LABELS[l];
                    (span.start < span.end && !span.contains(*verb) && (!label.starts_with("ARG") || label.starts_with("ARGM") || seen.insert(label)))
                        .then(|| SrlArgument { label: label.into(), span })
                })
                .collect();
            SrlFrame { verb_index: *verb, arguments }
        })
        .collect();
    Sentence { tokens, deps, frames }
}

pub fn document_strategy() -> impl Strategy<Value = AnnotatedDocument> {
    (prop::collection::vec(sentence_strategy(), 1..4), prop::collection::vec(prop::collection::vec(any::<(prop::sample::Index, prop::sample::Index, prop::sample::Index)>(), 2..4), 0..3))
        .prop_map(|(sentences, chains)| {
            let coref_chains = chains
                .iter()
                .map(|picks| {
                    let mut mentions: Vec<Mention> = picks
                        .iter()
                        .map(|(s, a, b)| {
                            let sentence = s.index(sentences.len());
                            let len = sentences[sentence].len();
                            let (x, y) = (a.index(len), b.index(len));
                            Mention { sentence, span: Span::new(x.min(y), x.max(y) + 1) }
                        })
                        .collect();
                    mentions.sort();
                    CorefChain { mentions }
                })
                .collect();
            AnnotatedDocument { doc_id: "random".into(), sentences, coref_chains }
        })
}

// ---- deterministic pseudo-random providers ----

pub fn unit(parts: &[&str]) -> f64 {
    let mut h = DefaultHasher::new();
    parts.hash(&mut h);
    (h.finish() % 10_000) as f64 / 10_000.0
}

pub struct HashProviders {
    salt: String,
}

impl SimilarityProvider for HashProviders {
    fn similarity(&self, a: &str, b: &str) -> Result<f64, ProviderError> {
        Ok(unit(&[&self.salt, "sim", a, b]))
    }
}

impl NliProvider for HashProviders {
    fn nli(&self, a: &str, b: &str) -> Result<NliVerdict, ProviderError> {
        let u = unit(&[&self.salt, "nli", a, b]);
        let label = if u < 0.3 {
            NliLabel::Contradiction
        } else if u < 0.5 {
            NliLabel::Entailment
        } else {
            NliLabel::Neutral
        };
        Ok(NliVerdict { label, score: u })
    }
}

impl CommonsenseProvider for HashProviders {
    fn generate(&self, _: &str, _: Relation, _: usize) -> Result<Vec<RelationPrediction>, ProviderError> {
        Ok(vec![])
    }
}

pub fn providers(salt: u64) -> Providers {
    let p = || HashProviders { salt: salt.to_string() };
    Providers { commonsense: Box::new(p()), similarity: Box::new(p()), nli: Box::new(p()) }
}

// ---- literals and actions ----

pub const PREDICATES: &[&str] = &["close-to", "angry-at", "injured", "rich", "yell-at", "have-money", "tired", "free"];

pub fn literal(pred: usize, args: Vec<Param>, negated: bool, rel: usize, prob: f64) -> Literal {
    let predicate = PREDICATES[pred].to_string();
    Literal {
        phrase: predicate.replace('-', " "),
        predicate,
        args,
        negated,
        source_relation: Relation::ALL[rel],
        probability: prob,
    }
}

pub fn args_strategy(has_object: bool) -> BoxedStrategy<Vec<Param>> {
    if has_object {
        prop_oneof![
            Just(vec![Param::X]),
            Just(vec![Param::O]),
            Just(vec![Param::X, Param::O]),
            Just(vec![Param::O, Param::X]),
        ]
        .boxed()
    } else {
        Just(vec![Param::X]).boxed()
    }
}

pub fn literals_strategy(has_object: bool, negations: bool) -> impl Strategy<Value = Vec<Literal>> {
    prop::collection::vec(
        (0..PREDICATES.len(), args_strategy(has_object), prop::bool::weighted(if negations { 0.2 } else { 0.0 }), 0..5usize, 0.0f64..1.0),
        0..6,
    )
    .prop_map(|raw| {
        let mut out: Vec<Literal> = Vec::new();
        for (p, a, n, r, prob) in raw {
            let l = literal(p, a, n, r, prob);
            if !out.iter().any(|m| m.same_atom(&l)) {
                out.push(l);
            }
        }
        out
    })
}

pub fn action_strategy() -> impl Strategy<Value = ActionModel> {
    (any::<bool>(), prop::sample::select(vec!["hit", "heal", "fall-in", "x", "be-not-confined", "intend-to-shoot"]))
        .prop_flat_map(|(has_object, name)| {
            (literals_strategy(has_object, true), literals_strategy(has_object, true)).prop_map(move |(pre, eff)| {
                ActionModel {
                    name: name.to_string(),
                    has_object,
                    subject_text: "Bryan".into(),
                    object_text: has_object.then(|| "Jack".into()),
                    preconditions: pre,
                    effects: eff,
                }
            })
        })
}

pub fn predictions_strategy() -> impl Strategy<Value = Vec<RelationPrediction>> {
    (0..5usize, prop::collection::vec((0.0f64..=1.0, prop::sample::select(vec!["none", "be strong", "hurt", "NONE", "sad"])), 0..8))
        .prop_map(|(r, mut items)| {
            items.sort_by(|a, b| b.0.total_cmp(&a.0));
            items
                .into_iter()
                .map(|(p, phrase)| RelationPrediction {
                    event_text: "e".into(),
                    relation: Relation::ALL[r],
                    phrase: phrase.into(),
                    probability: p,
                })
                .collect()
        })
}

pub fn policy_strategy() -> impl Strategy<Value = ThresholdPolicy> {
    prop::collection::vec(0.0f64..=1.0, 5).prop_map(|t| ThresholdPolicy {
        k: 6,
        theta: Relation::ALL.iter().copied().zip(t).collect::<HashMap<_, _>>(),
    })
}

// ---- parameter selection oracle ----

/// Subject/object argument numbers for a presence mask over ARG0..ARG5.
pub fn oracle(mask: u8) -> (Option<u8>, Option<u8>) {
    let s = if mask & 1 != 0 {
        0
    } else if mask & 2 != 0 {
        1
    } else {
        return (None, None);
    };
    let above = mask & !((1u8 << (s + 1)) - 1) & 0b11_1111;
    (Some(s), (above != 0).then(|| above.trailing_zeros() as u8))
}

pub fn event_with(arguments: Vec<EventArgument>) -> StructuredEvent {
    StructuredEvent {
        base: Event {
            id: EventId(0),
            sentence_index: 0,
            head_index: 0,
            verb_span: Span::single(0),
            verb_text: "hit".into(),
            arguments,
            is_statement: false,
        },
        merged_verb_phrase: "hit".into(),
        argument_children: vec![],
        condition_of: None,
        conditions: vec![],
    }
}

/// Parameter selection over every ARG0..ARG5 presence pattern, with modifiers
/// mixed in and every rotation of the argument order.
pub fn check_all_masks() -> Result<(), String> {
    for mask in 0u8..64 {
        let mut args: Vec<EventArgument> = (0..6u8)
            .filter(|n| mask & (1 << n) != 0)
            .map(|n| EventArgument {
                label: format!("ARG{n}"),
                span: Span::single(n as usize + 1),
                resolved_text: format!("a{n}"),
            })
            .collect();
        // modifiers and reference labels never count
        args.push(EventArgument { label: "ARGM-LOC".into(), span: Span::single(9), resolved_text: "m".into() });
        args.push(EventArgument { label: "R-ARG0".into(), span: Span::single(10), resolved_text: "r".into() });
        for rotation in 0..args.len() {
            let mut shuffled = args.clone();
            shuffled.rotate_left(rotation);
            let event = event_with(shuffled);
            let (x, o) = select_parameters(&event);
            let got = (
                x.map(|a| a.label[3..].parse::<u8>().unwrap()),
                o.map(|a| a.label[3..].parse::<u8>().unwrap()),
            );
            if got != oracle(mask) {
                return Err(format!("mask {mask:06b}: got {got:?}, expected {:?}", oracle(mask)));
            }
        }
    }
    Ok(())
}

// ---- property bodies shared by the property and acceptance targets ----

pub type Outcome = Result<(), TestCaseError>;

pub fn annotation_round_trip(doc: &AnnotatedDocument) -> Outcome {
    let text = serialize_document(doc);
    let back = load_document(text.as_bytes()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(serialize_document(&back), text);
    prop_assert_eq!(&back, doc);
    Ok(())
}

pub fn stages_consistent(doc: &AnnotatedDocument) -> Outcome {
    let lexicon = PhrasalLexicon::builtin();
    for sentence in &doc.sentences {
        for v in 0..sentence.len() {
            if let Some(span) = detect_phrasal_verb(sentence, v, &lexicon) {
                let particle = if span.start == v { span.end - 1 } else { span.start };
                let phrase = format!(
                    "{} {}",
                    sentence.tokens[v].lemma.to_lowercase(),
                    sentence.tokens[particle].lemma.to_lowercase()
                );
                prop_assert!(lexicon.contains(&phrase));
            }
        }
    }
    let resolved = resolve_entities(doc.clone());
    let events = build_events(&resolved, &lexicon);
    for e in &events {
        let lemma = doc.sentences[e.sentence_index].tokens[e.head_index].lemma.to_lowercase();
        prop_assert_eq!(e.is_statement, lemma == "be" || lemma == "have");
    }
    // structuring may reject malformed structure, but must not panic
    if let Ok(s) = structure_document(&resolved, &events, &SignalSet::default()) {
        let ids: BTreeSet<EventId> = s.events.iter().map(|e| e.id()).collect();
        for e in &s.events {
            if let Some(c) = e.condition_of {
                prop_assert!(ids.contains(&c));
            }
        }
    }
    Ok(())
}

pub fn thresholds_prefix(preds: &[RelationPrediction], policy: &ThresholdPolicy) -> Outcome {
    let kept = apply_thresholds(preds, policy);
    prop_assert!(kept.len() <= preds.len());
    prop_assert_eq!(&kept[..], &preds[..kept.len()]);
    prop_assert!(kept
        .iter()
        .all(|p| p.probability >= policy.threshold(p.relation) && !p.phrase.eq_ignore_ascii_case("none")));
    prop_assert_eq!(apply_thresholds(&kept, policy), kept.clone());
    Ok(())
}

pub fn thresholds_monotone(preds: &[RelationPrediction], policy: &ThresholdPolicy, bump: &[f64]) -> Outcome {
    let mut stricter = policy.clone();
    for (r, b) in Relation::ALL.iter().zip(bump) {
        let t = stricter.theta.get_mut(r).unwrap();
        *t = (*t + b).min(1.0);
    }
    let loose = apply_thresholds(preds, policy);
    let strict = apply_thresholds(preds, &stricter);
    prop_assert!(strict.len() <= loose.len());
    prop_assert_eq!(&strict[..], &loose[..strict.len()]);
    Ok(())
}

pub fn filter_subsequence(cands: &[Literal], salt: u64) -> Outcome {
    let p = providers(salt);
    let (kept, records) = filter_candidates(cands, &p).unwrap();
    prop_assert_eq!(records.len(), cands.len());
    let mut ordered = cands.to_vec();
    ordered.sort_by(candidate_order);
    let mut rest = ordered.iter();
    for k in &kept {
        prop_assert!(rest.any(|c| c == k));
    }
    let (again, _) = filter_candidates(&kept, &p).unwrap();
    prop_assert_eq!(again, kept);
    Ok(())
}

pub fn local_within_global(action: &ActionModel, extra: &BTreeSet<(usize, usize)>, salt: u64) -> Outcome {
    let mut action = action.clone();
    // negation generation runs on freshly synthesized, positive-only models
    action.preconditions.retain(|l| !l.negated);
    action.effects.retain(|l| !l.negated);
    let p = providers(salt);
    let domain: BTreeSet<(String, usize)> = extra.iter().map(|(i, a)| (PREDICATES[*i].to_string(), *a)).collect();
    let (local, _) = generate_negations(&action, &domain, NegationStrategy::Local, &p).unwrap();
    let (global, _) = generate_negations(&action, &domain, NegationStrategy::Global, &p).unwrap();
    prop_assert!(local.check().is_empty(), "{:?}", local.check());
    prop_assert!(global.check().is_empty(), "{:?}", global.check());
    prop_assert!(local.preconditions.iter().all(|l| !l.negated));
    for l in local.effects.iter().filter(|l| l.negated) {
        prop_assert!(global.effects.iter().any(|g| g.key() == l.key()), "{}", l);
    }
    Ok(())
}

pub fn emit_validate(actions: Vec<ActionModel>) -> Outcome {
    let domain = assemble(actions, "random");
    let text = emit_pddl(&domain);
    let diagnostics = validate_syntax(&text);
    prop_assert!(diagnostics.is_empty(), "{:?}\n{}", diagnostics, text);
    prop_assert_eq!(emit_pddl(&domain), text.clone());
    let read = read_actions(&text).unwrap();
    prop_assert_eq!(read.len(), domain.actions.len());
    let render = |ls: &[Literal]| ls.iter().map(|l| l.to_string()).collect::<BTreeSet<_>>();
    for ((name, pre, eff), action) in read.iter().zip(&domain.actions) {
        prop_assert_eq!(name, &action.name);
        prop_assert_eq!(pre, &render(&action.preconditions));
        prop_assert_eq!(eff, &render(&action.effects));
    }
    let names: BTreeSet<&String> = domain.actions.iter().map(|a| &a.name).collect();
    prop_assert_eq!(names.len(), domain.actions.len());
    let mut arity: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &domain.actions {
        for l in a.preconditions.iter().chain(&a.effects) {
            let seen = *arity.entry(&l.predicate).or_insert(l.args.len());
            prop_assert_eq!(seen, l.args.len());
        }
    }
    Ok(())
}

pub fn domains_strategy() -> impl Strategy<Value = Vec<ActionModel>> {
    prop::collection::vec(action_strategy(), 0..6)
}

pub fn extra_predicates_strategy() -> impl Strategy<Value = BTreeSet<(usize, usize)>> {
    prop::collection::btree_set((0..PREDICATES.len(), 1usize..3), 0..5)
}

pub fn bump_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..0.5, 5)
}
