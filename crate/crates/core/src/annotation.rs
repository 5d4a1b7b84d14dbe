//! Linguistic annotation interchange format.
//!
//! A document is a list of sentences, each carrying tokens (text, lemma,
//! Penn POS tag), a dependency tree over those tokens and any number of
//! PropBank-style SRL frames. Coreference chains are document-scoped.
//!
//! Everything is validated on load: once an [`AnnotatedDocument`] exists,
//! every index and span inside it resolves within its sentence.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error in sentence {sentence}: {message}")]
    Validation { sentence: usize, message: String },
    #[error("validation error in coreference chain {chain}: {message}")]
    Coref { chain: usize, message: String },
    #[error("sentence index {index} out of range ({len} sentences)")]
    Index { index: usize, len: usize },
}

/// Half-open token interval `[start, end)` within one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn single(index: usize) -> Self {
        Span { start: index, end: index + 1 }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index < self.end
    }

    pub fn covers(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub index: usize,
    pub text: String,
    pub lemma: String,
    pub pos: String,
}

/// Head of a dependency edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Head {
    Root,
    Token(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyEdge {
    pub head: Head,
    pub dependent: usize,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrlArgument {
    pub label: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrlFrame {
    pub verb_index: usize,
    pub arguments: Vec<SrlArgument>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Mention {
    pub sentence: usize,
    pub span: Span,
}

/// Mentions of one entity; the first is the representative mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorefChain {
    pub mentions: Vec<Mention>,
}

impl CorefChain {
    pub fn representative(&self) -> &Mention {
        &self.mentions[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub deps: Vec<DependencyEdge>,
    pub frames: Vec<SrlFrame>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Surface text of `span`, tokens joined by single spaces.
    pub fn span_text(&self, span: Span) -> String {
        join_tokens(self.tokens[span.start..span.end].iter().map(|t| t.text.as_str()))
    }

    /// The edge whose dependent is `index`; there is exactly one.
    pub fn head_edge(&self, index: usize) -> Option<&DependencyEdge> {
        self.deps.iter().find(|e| e.dependent == index)
    }

    /// Relation labels of edges `head -> dependent`.
    pub fn relations_between(&self, head: usize, dependent: usize) -> impl Iterator<Item = &str> {
        self.deps
            .iter()
            .filter(move |e| e.head == Head::Token(head) && e.dependent == dependent)
            .map(|e| e.relation.as_str())
    }

    pub fn dependents_of(&self, head: usize) -> impl Iterator<Item = &DependencyEdge> {
        self.deps.iter().filter(move |e| e.head == Head::Token(head))
    }
}

/// Tokens that attach to the previous token without a space.
fn attaches_left(token: &str) -> bool {
    let lower = token.to_lowercase();
    matches!(lower.as_str(), "n't" | "'s" | "'re" | "'ll" | "'d" | "'ve" | "'m" | "'")
        || (!token.is_empty() && token.chars().all(|c| matches!(c, '.' | ',' | '!' | '?' | ';' | ':' | ')' | '%')))
}

pub(crate) fn join_tokens<'a>(tokens: impl Iterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for t in tokens {
        if !out.is_empty() && !attaches_left(t) {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
    pub coref_chains: Vec<CorefChain>,
}

impl AnnotatedDocument {
    pub fn sentence(&self, index: usize) -> Result<&Sentence, AnnotationError> {
        self.sentences.get(index).ok_or(AnnotationError::Index {
            index,
            len: self.sentences.len(),
        })
    }
}

/// Tokens of sentence `sentence_index` joined by single spaces.
pub fn sentence_text(doc: &AnnotatedDocument, sentence_index: usize) -> Result<String, AnnotationError> {
    let sentence = doc.sentence(sentence_index)?;
    Ok(join_tokens(sentence.tokens.iter().map(|t| t.text.as_str())))
}

// Wire format. Field names follow the JSON schema exactly.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    doc_id: String,
    sentences: Vec<RawSentence>,
    coref: Vec<Vec<RawMention>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSentence {
    tokens: Vec<RawToken>,
    deps: Vec<RawDep>,
    frames: Vec<RawFrame>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawToken {
    text: String,
    lemma: String,
    pos: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDep {
    head: i64,
    dep: i64,
    rel: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    verb: i64,
    args: Vec<RawArg>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArg {
    label: String,
    start: i64,
    end: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMention {
    sent: i64,
    start: i64,
    end: i64,
}

/// Parse and validate one annotation document.
pub fn load_document(bytes: &[u8]) -> Result<AnnotatedDocument, AnnotationError> {
    let raw: RawDocument =
        serde_json::from_slice(bytes).map_err(|e| AnnotationError::Schema(e.to_string()))?;
    let mut sentences = Vec::with_capacity(raw.sentences.len());
    for (si, rs) in raw.sentences.into_iter().enumerate() {
        sentences.push(convert_sentence(si, rs)?);
    }
    let mut coref_chains = Vec::with_capacity(raw.coref.len());
    for (ci, chain) in raw.coref.into_iter().enumerate() {
        coref_chains.push(convert_chain(ci, chain, &sentences)?);
    }
    Ok(AnnotatedDocument {
        doc_id: raw.doc_id,
        sentences,
        coref_chains,
    })
}

/// Serialize back to the interchange JSON.
pub fn serialize_document(doc: &AnnotatedDocument) -> String {
    let raw = RawDocument {
        doc_id: doc.doc_id.clone(),
        sentences: doc
            .sentences
            .iter()
            .map(|s| RawSentence {
                tokens: s
                    .tokens
                    .iter()
                    .map(|t| RawToken {
                        text: t.text.clone(),
                        lemma: t.lemma.clone(),
                        pos: t.pos.clone(),
                    })
                    .collect(),
                deps: s
                    .deps
                    .iter()
                    .map(|e| RawDep {
                        head: match e.head {
                            Head::Root => -1,
                            Head::Token(h) => h as i64,
                        },
                        dep: e.dependent as i64,
                        rel: e.relation.clone(),
                    })
                    .collect(),
                frames: s
                    .frames
                    .iter()
                    .map(|f| RawFrame {
                        verb: f.verb_index as i64,
                        args: f
                            .arguments
                            .iter()
                            .map(|a| RawArg {
                                label: a.label.clone(),
                                start: a.span.start as i64,
                                end: a.span.end as i64,
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
        coref: doc
            .coref_chains
            .iter()
            .map(|c| {
                c.mentions
                    .iter()
                    .map(|m| RawMention {
                        sent: m.sentence as i64,
                        start: m.span.start as i64,
                        end: m.span.end as i64,
                    })
                    .collect()
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("annotation serialization cannot fail")
}

fn invalid(sentence: usize, message: impl Into<String>) -> AnnotationError {
    AnnotationError::Validation {
        sentence,
        message: message.into(),
    }
}

fn index_in(si: usize, value: i64, len: usize, what: &str) -> Result<usize, AnnotationError> {
    if value < 0 || value as usize >= len {
        return Err(invalid(si, format!("{what} {value} out of range (sentence length {len})")));
    }
    Ok(value as usize)
}

fn span_in(si: usize, start: i64, end: i64, len: usize, what: &str) -> Result<Span, AnnotationError> {
    if start < 0 || end <= start || end as usize > len {
        return Err(invalid(
            si,
            format!("{what} span [{start}, {end}) invalid for sentence length {len}"),
        ));
    }
    Ok(Span::new(start as usize, end as usize))
}

/// `ARG0`..`ARG5`, `ARGM-*`, optionally prefixed with `R-`/`C-`.
pub fn is_valid_label(label: &str) -> bool {
    let base = label
        .strip_prefix("R-")
        .or_else(|| label.strip_prefix("C-"))
        .unwrap_or(label);
    if let Some(rest) = base.strip_prefix("ARGM-") {
        return !rest.is_empty() && rest.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
    }
    numbered_label(base).is_some()
}

/// Core argument number for `ARG0`..`ARG5`; `None` for modifiers and
/// reference/continuation labels.
pub fn numbered_label(label: &str) -> Option<u8> {
    let digit = label.strip_prefix("ARG")?;
    match digit.as_bytes() {
        [d @ b'0'..=b'5'] => Some(d - b'0'),
        _ => None,
    }
}

fn convert_sentence(si: usize, raw: RawSentence) -> Result<Sentence, AnnotationError> {
    let len = raw.tokens.len();
    let mut tokens = Vec::with_capacity(len);
    for (index, t) in raw.tokens.into_iter().enumerate() {
        if t.text.is_empty() {
            return Err(invalid(si, format!("token {index} has empty text")));
        }
        if t.lemma.is_empty() {
            return Err(invalid(si, format!("token {index} has empty lemma")));
        }
        tokens.push(Token {
            index,
            text: t.text,
            lemma: t.lemma,
            pos: t.pos,
        });
    }

    let mut deps = Vec::with_capacity(raw.deps.len());
    let mut heads: Vec<Option<Head>> = vec![None; len];
    for d in raw.deps {
        let dependent = index_in(si, d.dep, len, "dependency dependent")?;
        let head = if d.head == -1 {
            Head::Root
        } else {
            Head::Token(index_in(si, d.head, len, "dependency head")?)
        };
        if head == Head::Token(dependent) {
            return Err(invalid(si, format!("token {dependent} is its own head")));
        }
        if heads[dependent].is_some() {
            return Err(invalid(si, format!("token {dependent} has more than one head")));
        }
        heads[dependent] = Some(head);
        deps.push(DependencyEdge {
            head,
            dependent,
            relation: d.rel,
        });
    }
    if let Some(orphan) = heads.iter().position(Option::is_none) {
        return Err(invalid(si, format!("token {orphan} has no head")));
    }
    let roots = heads.iter().filter(|h| matches!(h, Some(Head::Root))).count();
    if len > 0 && roots != 1 {
        return Err(invalid(si, format!("dependency tree has {roots} roots, expected 1")));
    }
    // Every token must reach ROOT; a walk longer than `len` means a cycle.
    for start in 0..len {
        let mut cur = start;
        let mut steps = 0;
        while let Some(Head::Token(h)) = heads[cur] {
            cur = h;
            steps += 1;
            if steps > len {
                return Err(invalid(si, format!("dependency cycle through token {start}")));
            }
        }
    }

    let mut frames = Vec::with_capacity(raw.frames.len());
    for (fi, f) in raw.frames.into_iter().enumerate() {
        let verb_index = index_in(si, f.verb, len, &format!("frame {fi} verb"))?;
        let mut arguments = Vec::with_capacity(f.args.len());
        let mut seen = [false; 6];
        for a in f.args {
            if !is_valid_label(&a.label) {
                return Err(invalid(si, format!("frame {fi} has unknown label {:?}", a.label)));
            }
            let span = span_in(si, a.start, a.end, len, &format!("frame {fi} {}", a.label))?;
            if span.contains(verb_index) {
                return Err(invalid(
                    si,
                    format!("frame {fi} argument {} {span} contains its own verb", a.label),
                ));
            }
            if let Some(n) = numbered_label(&a.label) {
                if std::mem::replace(&mut seen[n as usize], true) {
                    return Err(invalid(si, format!("frame {fi} has duplicate label {}", a.label)));
                }
            }
            arguments.push(SrlArgument { label: a.label, span });
        }
        frames.push(SrlFrame { verb_index, arguments });
    }

    Ok(Sentence { tokens, deps, frames })
}

fn convert_chain(
    ci: usize,
    raw: Vec<RawMention>,
    sentences: &[Sentence],
) -> Result<CorefChain, AnnotationError> {
    let bad = |message: String| AnnotationError::Coref { chain: ci, message };
    if raw.len() < 2 {
        return Err(bad(format!("chain has {} mention(s), expected at least 2", raw.len())));
    }
    let mut mentions = Vec::with_capacity(raw.len());
    for m in raw {
        if m.sent < 0 || m.sent as usize >= sentences.len() {
            return Err(bad(format!("mention sentence {} out of range", m.sent)));
        }
        let sentence = m.sent as usize;
        let span = span_in(sentence, m.start, m.end, sentences[sentence].len(), "mention")
            .map_err(|e| bad(e.to_string()))?;
        mentions.push(Mention { sentence, span });
    }
    if mentions.windows(2).any(|w| (w[0].sentence, w[0].span.start) > (w[1].sentence, w[1].span.start)) {
        return Err(bad("mentions not ordered by (sentence, start)".into()));
    }
    Ok(CorefChain { mentions })
}
