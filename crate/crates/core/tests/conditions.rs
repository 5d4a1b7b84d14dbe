mod common;

use std::collections::BTreeMap;

use common::fixture;
use serde::Deserialize;
use story2pddl::events::PhrasalLexicon;
use story2pddl::harness::structure_file;
use story2pddl::structuring::SignalSet;

#[derive(Deserialize)]
struct Expected {
    sentence: usize,
    text: String,
    condition: Option<usize>,
    consequence: Option<usize>,
    pattern: Option<String>,
}

fn words(s: &story2pddl::annotation::Sentence) -> String {
    s.tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
}

fn expected() -> Vec<Expected> {
    std::fs::read_to_string(fixture("conditions/expected.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn suite_matches_rule_table() {
    let (doc, _, structured) =
        structure_file(&fixture("conditions/suite.json"), &PhrasalLexicon::builtin(), &SignalSet::default()).unwrap();
    let verb_of: BTreeMap<_, _> = structured
        .events
        .iter()
        .map(|e| (e.id(), (e.base.sentence_index, e.base.head_index)))
        .collect();
    let mut found: BTreeMap<usize, Vec<(usize, usize, String)>> = BTreeMap::new();
    for link in &structured.condition_links {
        let (s, cond) = verb_of[&link.condition];
        let (_, cons) = verb_of[&link.consequence];
        found.entry(s).or_default().push((cond, cons, link.pattern.to_string()));
    }
    let cases = expected();
    assert!(cases.len() >= 20);
    assert_eq!(cases.len(), doc.sentences.len());
    for case in &cases {
        assert_eq!(words(&doc.sentences[case.sentence]), case.text);
        let got = found.remove(&case.sentence).unwrap_or_default();
        match (case.condition, case.consequence, &case.pattern) {
            (Some(c), Some(q), Some(p)) => assert_eq!(got, vec![(c, q, p.clone())], "{}", case.text),
            _ => assert!(got.is_empty(), "{}: {got:?}", case.text),
        }
    }
    for pattern in ["S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9", "S10"] {
        assert!(cases.iter().any(|c| c.pattern.as_deref() == Some(pattern)), "{pattern}");
    }
}

#[test]
fn tell_is_the_condition_of_hate() {
    let (doc, _, structured) =
        structure_file(&fixture("conditions/suite.json"), &PhrasalLexicon::builtin(), &SignalSet::default()).unwrap();
    let sentence = &doc.sentences[0];
    assert_eq!(words(sentence), "She will hate me if I tell the truth .");
    let link = structured
        .condition_links
        .iter()
        .find(|l| structured.events.iter().any(|e| e.id() == l.consequence && e.base.sentence_index == 0))
        .unwrap();
    let verb = |id| structured.events.iter().find(|e| e.id() == id).unwrap().base.verb_text.clone();
    assert_eq!(verb(link.condition), "tell");
    assert_eq!(verb(link.consequence), "hate");
    assert_eq!(link.pattern.to_string(), "S1");
    // the consequence no longer carries the condition clause as an argument
    let hate = structured.events.iter().find(|e| e.id() == link.consequence).unwrap();
    assert_eq!(hate.event_text(sentence), "She will hate me");
}

#[test]
fn simon_structure() {
    let (doc, _, structured) =
        structure_file(&fixture("simon/annotation.json"), &PhrasalLexicon::builtin(), &SignalSet::default()).unwrap();
    let sentence = &doc.sentences[0];
    let texts: Vec<String> = structured.events.iter().map(|e| e.event_text(sentence)).collect();
    assert_eq!(
        texts,
        [
            "Simon's parents take great pains to accept Simon's homosexuality",
            "Simon's uncle will pay Simon a fortune",
            "Simon marries a woman",
        ]
    );
    let accept = &structured.events[0];
    assert_eq!(accept.merged_verb_phrase, "take great pains to accept");
    assert_eq!(accept.argument_children.len(), 1);
    assert_eq!(structured.events[2].condition_of, Some(structured.events[1].id()));
    assert!(structured.events[1].base.arguments.iter().all(|a| a.label != "ARGM-ADV"));
    assert_eq!(structured.condition_links.len(), 1);
    assert_eq!(structured.condition_links[0].pattern.to_string(), "S1");
}
