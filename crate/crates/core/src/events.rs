//! SRL frames to events: coreference substitution, phrasal verbs and
//! statement classification.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::annotation::{join_tokens, AnnotatedDocument, Sentence, Span};

/// Snapshot of common English phrasal verbs, one per line.
pub const BUILTIN_LEXICON: &str = include_str!("../data/phrasal_verbs.txt");

const POSSESSIVE_PRONOUNS: &[&str] = &["his", "her", "their", "its", "my", "your", "our"];
const PRONOUN_TAGS: &[&str] = &["PRP", "PRP$", "WP", "WP$"];

/// Known phrasal verbs ("make up", "fall in", ...), lowercase.
#[derive(Debug, Clone, Default)]
pub struct PhrasalLexicon {
    entries: HashSet<String>,
}

impl PhrasalLexicon {
    /// Newline-delimited list; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
            .collect();
        PhrasalLexicon { entries }
    }

    pub fn builtin() -> Self {
        Self::from_text(BUILTIN_LEXICON)
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.entries.contains(phrase)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for PhrasalLexicon {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        PhrasalLexicon {
            entries: iter.into_iter().map(|s| s.into().to_lowercase()).collect(),
        }
    }
}

/// A later coreference mention rewritten to its representative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Substitution {
    pub sentence: usize,
    pub span: Span,
    pub text: String,
}

/// A document plus its coreference overlay. Tokens and dependencies are
/// untouched; substitutions only change the text reported for spans.
#[derive(Debug, Clone)]
pub struct ResolvedDocument {
    pub doc: AnnotatedDocument,
    pub substitutions: Vec<Substitution>,
}

impl ResolvedDocument {
    /// Text of `span` with every substitution lying fully inside it applied.
    pub fn resolved_text(&self, sentence: usize, span: Span) -> String {
        let tokens = &self.doc.sentences[sentence].tokens;
        let mut out: Vec<&str> = Vec::with_capacity(span.len());
        let mut i = span.start;
        while i < span.end {
            let sub = self
                .substitutions
                .iter()
                .filter(|s| s.sentence == sentence && s.span.start == i && span.covers(&s.span))
                .max_by_key(|s| s.span.end);
            match sub {
                Some(s) => {
                    out.push(&s.text);
                    i = s.span.end;
                }
                None => {
                    out.push(&tokens[i].text);
                    i += 1;
                }
            }
        }
        join_tokens(out.into_iter())
    }
}

fn is_pronoun_mention(sentence: &Sentence, span: Span) -> bool {
    sentence.tokens[span.start..span.end]
        .iter()
        .all(|t| PRONOUN_TAGS.contains(&t.pos.as_str()))
}

fn is_possessive_mention(sentence: &Sentence, span: Span) -> bool {
    let last = &sentence.tokens[span.end - 1];
    last.pos == "PRP$" || last.pos == "POS" || POSSESSIVE_PRONOUNS.contains(&last.text.to_lowercase().as_str()) && span.len() == 1
}

/// Substitute each chain's representative (first) mention for its later
/// mentions. Possessive pronouns become "<representative>'s"; chains whose
/// representative is itself a pronoun are left alone.
pub fn resolve_entities(doc: AnnotatedDocument) -> ResolvedDocument {
    let mut substitutions = Vec::new();
    for chain in &doc.coref_chains {
        let rep = chain.representative();
        let rep_sentence = &doc.sentences[rep.sentence];
        if is_pronoun_mention(rep_sentence, rep.span) {
            continue;
        }
        let rep_text = rep_sentence.span_text(rep.span);
        let rep_possessive = is_possessive_mention(rep_sentence, rep.span);
        for m in &chain.mentions[1..] {
            let sentence = &doc.sentences[m.sentence];
            let text = if is_possessive_mention(sentence, m.span) && !rep_possessive {
                format!("{rep_text}'s")
            } else {
                rep_text.clone()
            };
            if text.eq_ignore_ascii_case(&sentence.span_text(m.span)) {
                continue;
            }
            substitutions.push(Substitution {
                sentence: m.sentence,
                span: m.span,
                text,
            });
        }
    }
    substitutions.sort_by_key(|s| (s.sentence, s.span.start, s.span.end));
    ResolvedDocument { doc, substitutions }
}

/// Span covering verb and particle when a particle candidate forms a known
/// phrasal verb: either a `compound:prt` dependent of the verb, or the
/// token right after the verb attached to it by `case` or `mark`.
pub fn detect_phrasal_verb(sentence: &Sentence, verb_index: usize, lexicon: &PhrasalLexicon) -> Option<Span> {
    let verb_lemma = sentence.tokens[verb_index].lemma.to_lowercase();
    let mut candidates: Vec<usize> = sentence
        .dependents_of(verb_index)
        .filter(|e| match e.relation.as_str() {
            "compound:prt" => true,
            "case" | "mark" => e.dependent == verb_index + 1,
            _ => false,
        })
        .map(|e| e.dependent)
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    candidates.into_iter().find_map(|p| {
        let phrase = format!("{} {}", verb_lemma, sentence.tokens[p].lemma.to_lowercase());
        lexicon
            .contains(&phrase)
            .then(|| Span::new(verb_index.min(p), verb_index.max(p) + 1))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct EventId(pub usize);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventArgument {
    pub label: String,
    pub span: Span,
    pub resolved_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub id: EventId,
    pub sentence_index: usize,
    /// The frame's verb token.
    pub head_index: usize,
    pub verb_span: Span,
    pub verb_text: String,
    pub arguments: Vec<EventArgument>,
    pub is_statement: bool,
}

impl Event {
    pub fn argument(&self, label: &str) -> Option<&EventArgument> {
        self.arguments.iter().find(|a| a.label == label)
    }
}

pub fn is_statement_lemma(lemma: &str) -> bool {
    matches!(lemma.to_lowercase().as_str(), "be" | "have")
}

/// One event per SRL frame, ordered by (sentence, verb position).
pub fn build_events(doc: &ResolvedDocument, lexicon: &PhrasalLexicon) -> Vec<Event> {
    let mut events = Vec::new();
    for (si, sentence) in doc.doc.sentences.iter().enumerate() {
        let mut frames: Vec<_> = sentence.frames.iter().collect();
        frames.sort_by_key(|f| f.verb_index);
        for frame in frames {
            let head = &sentence.tokens[frame.verb_index];
            let (verb_span, verb_text) = match detect_phrasal_verb(sentence, frame.verb_index, lexicon) {
                Some(span) => {
                    let particle = if span.start == frame.verb_index { span.end - 1 } else { span.start };
                    let text = format!(
                        "{} {}",
                        head.lemma.to_lowercase(),
                        sentence.tokens[particle].lemma.to_lowercase()
                    );
                    (span, text)
                }
                None => (Span::single(frame.verb_index), head.lemma.to_lowercase()),
            };
            let mut arguments: Vec<EventArgument> = frame
                .arguments
                .iter()
                .map(|a| EventArgument {
                    label: a.label.clone(),
                    span: a.span,
                    resolved_text: doc.resolved_text(si, a.span),
                })
                .collect();
            arguments.sort_by_key(|a| (a.span.start, a.span.end));
            events.push(Event {
                id: EventId(events.len()),
                sentence_index: si,
                head_index: frame.verb_index,
                verb_span,
                verb_text,
                arguments,
                is_statement: is_statement_lemma(&head.lemma),
            });
        }
    }
    events
}
