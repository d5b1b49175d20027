//! Three fact-tampering transforms over articles: in-place distortion of
//! entities, numbers, and verb severity; passive-frame role swaps; and
//! two-article splices joined by a fabricated causal bridge sentence.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Article;
use crate::textkit::{
    find_passive_frames, first_noun_phrase, split_sentences, Lexicons, Sentence, Token, TokenKind,
};

/// Which transform produced an attack result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackKind {
    #[serde(rename = "distortion")]
    FactDistortion,
    #[serde(rename = "swap")]
    SubjectObjectSwap,
    #[serde(rename = "confound")]
    CauseConfound,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::FactDistortion => "distortion",
            AttackKind::SubjectObjectSwap => "swap",
            AttackKind::CauseConfound => "confound",
        }
    }
}

/// The rule that produced one edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditRule {
    EntitySub,
    NumberScale,
    SeveritySwap,
    RoleSwap,
    Bridge,
}

/// One recorded change. `char_span` is a byte range into the source text;
/// for Bridge edits it is the zero-width insertion point at the end of the
/// first parent's text and `original` is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub sentence_index: usize,
    #[serde(rename = "span")]
    pub char_span: (usize, usize),
    pub original: String,
    pub replacement: String,
    pub rule: EditRule,
}

/// Knobs shared by the attack transforms.
#[derive(Debug, Clone)]
pub struct AttackConfig<'a> {
    pub lexicons: &'a Lexicons,
    /// Multiplier applied to integer tokens; must be positive and not 1.
    pub numeric_factor: f64,
    /// Stop after this many edits; `None` means unlimited.
    pub max_edits: Option<usize>,
    pub seed: u64,
}

impl<'a> AttackConfig<'a> {
    pub fn new(lexicons: &'a Lexicons) -> AttackConfig<'a> {
        AttackConfig { lexicons, numeric_factor: 2.0, max_edits: None, seed: 0 }
    }

    fn validate(&self) -> Result<(), AttackError> {
        if !self.numeric_factor.is_finite() || self.numeric_factor <= 0.0 {
            return Err(AttackError::InvalidConfig("numeric factor must be positive".into()));
        }
        if self.numeric_factor == 1.0 {
            return Err(AttackError::InvalidConfig(
                "numeric factor 1 leaves numbers unchanged".into(),
            ));
        }
        Ok(())
    }
}

/// An attacked article plus the audit trail that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackResult {
    /// The tampered article; its label is always cleared.
    pub article: Article,
    pub edits: Vec<Edit>,
    pub kind: AttackKind,
    pub parent_ids: Vec<String>,
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("no applicable edit in this article")]
    NoEditApplicable,
    #[error("template index {index} out of range, {available} templates available")]
    TemplateOutOfRange { index: usize, available: usize },
    #[error("invalid attack config: {0}")]
    InvalidConfig(String),
}

fn attack_id(kind: AttackKind, parent_ids: &[String], seed: u64) -> String {
    format!("{}:{}:{}", kind.as_str(), parent_ids.join("+"), seed)
}

/// Replaces each edit's span with its replacement text, left to right.
pub(crate) fn apply_edits(text: &str, edits: &[Edit]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for edit in edits {
        debug_assert!(cursor <= edit.char_span.0, "edits must be ordered and non-overlapping");
        debug_assert_eq!(&text[edit.char_span.0..edit.char_span.1], edit.original);
        out.push_str(&text[cursor..edit.char_span.0]);
        out.push_str(&edit.replacement);
        cursor = edit.char_span.1;
    }
    out.push_str(&text[cursor..]);
    out
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Copies the first letter's case from `original` onto `replacement`.
fn match_case(original: &str, replacement: &str) -> String {
    match original.chars().next() {
        Some(c) if c.is_uppercase() => capitalize_first(replacement),
        Some(c) if c.is_lowercase() => lowercase_first(replacement),
        _ => replacement.to_string(),
    }
}

/// Lowercased words that appear capitalized somewhere other than a sentence
/// start; treated as proper nouns when deciding whether to demote a token.
fn midsentence_capitalized(sentences: &[Sentence]) -> BTreeSet<String> {
    let mut caps = BTreeSet::new();
    for sentence in sentences {
        for token in sentence.tokens.iter().skip(1) {
            if token.kind == TokenKind::Word
                && token.surface.chars().next().is_some_and(char::is_uppercase)
            {
                caps.insert(token.lower.clone());
            }
        }
    }
    caps
}

/// Lowercases the first letter unless the leading word looks like a proper
/// noun in its source text.
fn demote_first(s: &str, proper: &BTreeSet<String>) -> String {
    let first_word: String = s.chars().take_while(|c| c.is_alphabetic() || *c == '\'').collect();
    if proper.contains(&first_word.to_lowercase()) {
        s.to_string()
    } else {
        lowercase_first(s)
    }
}

fn scale_number(surface: &str, factor: f64) -> Option<String> {
    if surface.contains('.') {
        return None;
    }
    let digits: String = surface.chars().filter(|c| *c != ',').collect();
    let value: u64 = digits.parse().ok()?;
    let scaled = (value as f64 * factor).round();
    if !scaled.is_finite() || scaled < 0.0 || scaled > u64::MAX as f64 {
        return None;
    }
    Some(format!("{}", scaled as u64))
}

/// Applies entity substitution, integer scaling, and severity swaps in
/// document order, stopping at `max_edits`.
pub fn distort_facts(
    article: &Article,
    config: &AttackConfig,
) -> Result<AttackResult, AttackError> {
    config.validate()?;
    let lex = config.lexicons;
    let mut edits = Vec::new();
    'sentences: for (si, sentence) in split_sentences(&article.text).iter().enumerate() {
        for token in &sentence.tokens {
            if config.max_edits.is_some_and(|m| edits.len() >= m) {
                break 'sentences;
            }
            let replacement = match token.kind {
                TokenKind::Word => {
                    if let Some(target) = lex.gazetteer.get(&token.lower) {
                        Some((match_case(&token.surface, target), EditRule::EntitySub))
                    } else {
                        lex.severity_pairs.get(&token.lower).map(|stronger| {
                            (match_case(&token.surface, stronger), EditRule::SeveritySwap)
                        })
                    }
                }
                TokenKind::Number => scale_number(&token.surface, config.numeric_factor)
                    .map(|scaled| (scaled, EditRule::NumberScale)),
                TokenKind::Punct => None,
            };
            if let Some((replacement, rule)) = replacement {
                if replacement != token.surface {
                    edits.push(Edit {
                        sentence_index: si,
                        char_span: token.span,
                        original: token.surface.clone(),
                        replacement,
                        rule,
                    });
                }
            }
        }
    }
    if edits.is_empty() {
        return Err(AttackError::NoEditApplicable);
    }
    let parent_ids = vec![article.id.clone()];
    Ok(AttackResult {
        article: Article {
            id: attack_id(AttackKind::FactDistortion, &parent_ids, config.seed),
            title: article.title.clone(),
            text: apply_edits(&article.text, &edits),
            url: article.url.clone(),
            label: None,
        },
        edits,
        kind: AttackKind::FactDistortion,
        parent_ids,
    })
}

fn token_span_bytes(tokens: &[Token], span: (usize, usize)) -> (usize, usize) {
    (tokens[span.0].span.0, tokens[span.1 - 1].span.1)
}

/// Exchanges the patient and agent noun phrases of every passive frame,
/// repairing only sentence-initial capitalization. The lowercased token
/// multiset of the article is preserved exactly.
pub fn swap_subject_object(
    article: &Article,
    lexicons: &Lexicons,
) -> Result<AttackResult, AttackError> {
    let text = &article.text;
    let sentences = split_sentences(text);
    let proper = midsentence_capitalized(&sentences);
    let mut edits = Vec::new();
    for (si, sentence) in sentences.iter().enumerate() {
        for frame in find_passive_frames(sentence, lexicons) {
            let patient_span = token_span_bytes(&sentence.tokens, frame.patient_span);
            let agent_span = token_span_bytes(&sentence.tokens, frame.agent_span);
            let patient = &text[patient_span.0..patient_span.1];
            let agent = &text[agent_span.0..agent_span.1];
            let sentence_initial = frame.patient_span.0 == 0;
            let into_patient_slot =
                if sentence_initial { capitalize_first(agent) } else { agent.to_string() };
            let into_agent_slot =
                if sentence_initial { demote_first(patient, &proper) } else { patient.to_string() };
            if into_patient_slot != patient {
                edits.push(Edit {
                    sentence_index: si,
                    char_span: patient_span,
                    original: patient.to_string(),
                    replacement: into_patient_slot,
                    rule: EditRule::RoleSwap,
                });
            }
            if into_agent_slot != agent {
                edits.push(Edit {
                    sentence_index: si,
                    char_span: agent_span,
                    original: agent.to_string(),
                    replacement: into_agent_slot,
                    rule: EditRule::RoleSwap,
                });
            }
        }
    }
    if edits.is_empty() {
        return Err(AttackError::NoEditApplicable);
    }
    let parent_ids = vec![article.id.clone()];
    Ok(AttackResult {
        article: Article {
            id: attack_id(AttackKind::SubjectObjectSwap, &parent_ids, 0),
            title: article.title.clone(),
            text: apply_edits(text, &edits),
            url: article.url.clone(),
            label: None,
        },
        edits,
        kind: AttackKind::SubjectObjectSwap,
        parent_ids,
    })
}

/// First noun phrase of the first sentence, falling back to the first word.
fn leading_noun_phrase(text: &str, lexicons: &Lexicons) -> String {
    let sentences = split_sentences(text);
    let Some(first) = sentences.first() else {
        return "it".to_string();
    };
    if let Some(span) = first_noun_phrase(&first.tokens, lexicons) {
        let (start, end) = token_span_bytes(&first.tokens, span);
        text[start..end].to_string()
    } else if let Some(word) = first.tokens.iter().find(|t| t.kind == TokenKind::Word) {
        word.surface.clone()
    } else {
        "it".to_string()
    }
}

fn fill_template(
    template: &str,
    np_a: &str,
    proper_a: &BTreeSet<String>,
    np_b: &str,
    proper_b: &BTreeSet<String>,
) -> String {
    let mut out = String::new();
    let mut cursor = 0;
    while cursor < template.len() {
        let next_a = template[cursor..].find("{a}").map(|i| i + cursor);
        let next_b = template[cursor..].find("{b}").map(|i| i + cursor);
        let (pos, is_a) = match (next_a, next_b) {
            (Some(a), Some(b)) if a <= b => (a, true),
            (Some(a), None) => (a, true),
            (None, Some(b)) => (b, false),
            (Some(_), Some(b)) => (b, false),
            (None, None) => break,
        };
        out.push_str(&template[cursor..pos]);
        let (filler, proper) = if is_a { (np_a, proper_a) } else { (np_b, proper_b) };
        let cased = if pos == 0 { capitalize_first(filler) } else { demote_first(filler, proper) };
        out.push_str(&cased);
        cursor = pos + 3;
    }
    out.push_str(&template[cursor..]);
    out
}

/// Splices two articles around a bridge sentence built from a connective
/// template and the leading noun phrases of both parents.
pub fn confound_causes(
    article_a: &Article,
    article_b: &Article,
    lexicons: &Lexicons,
    template_index: usize,
) -> Result<AttackResult, AttackError> {
    let template =
        lexicons.causal_connectives.get(template_index).ok_or(AttackError::TemplateOutOfRange {
            index: template_index,
            available: lexicons.causal_connectives.len(),
        })?;
    let sentences_a = split_sentences(&article_a.text);
    let proper_a = midsentence_capitalized(&sentences_a);
    let proper_b = midsentence_capitalized(&split_sentences(&article_b.text));
    let np_a = leading_noun_phrase(&article_a.text, lexicons);
    let np_b = leading_noun_phrase(&article_b.text, lexicons);
    let bridge = fill_template(template, &np_a, &proper_a, &np_b, &proper_b);
    let text = format!("{} {} {}", article_a.text, bridge, article_b.text);
    let edits = vec![Edit {
        sentence_index: sentences_a.len(),
        char_span: (article_a.text.len(), article_a.text.len()),
        original: String::new(),
        replacement: bridge,
        rule: EditRule::Bridge,
    }];
    let parent_ids = vec![article_a.id.clone(), article_b.id.clone()];
    Ok(AttackResult {
        article: Article {
            id: attack_id(AttackKind::CauseConfound, &parent_ids, 0),
            title: article_a.title.clone(),
            text,
            url: article_a.url.clone(),
            label: None,
        },
        edits,
        kind: AttackKind::CauseConfound,
        parent_ids,
    })
}

/// One sidecar edit-log record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditLogEntry {
    pub article_id: String,
    pub kind: AttackKind,
    pub parent_ids: Vec<String>,
    pub edits: Vec<Edit>,
}

impl EditLogEntry {
    pub fn from_result(result: &AttackResult) -> EditLogEntry {
        EditLogEntry {
            article_id: result.article.id.clone(),
            kind: result.kind,
            parent_ids: result.parent_ids.clone(),
            edits: result.edits.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EditLogError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Writes an edit log as a JSON array.
pub fn save_edit_log(path: &Path, entries: &[EditLogEntry]) -> Result<(), EditLogError> {
    let display = path.display().to_string();
    let file =
        File::create(path).map_err(|source| EditLogError::Io { path: display.clone(), source })?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, entries)
        .map_err(|source| EditLogError::Json { path: display.clone(), source })?;
    writer
        .write_all(b"\n")
        .and_then(|()| writer.flush())
        .map_err(|source| EditLogError::Io { path: display, source })
}

/// Reads an edit log written by [`save_edit_log`].
pub fn load_edit_log(path: &Path) -> Result<Vec<EditLogEntry>, EditLogError> {
    let display = path.display().to_string();
    let file =
        File::open(path).map_err(|source| EditLogError::Io { path: display.clone(), source })?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|source| EditLogError::Json { path: display, source })
}
