//! Rule-based text handling: tokenizer, sentence splitter, passive-frame
//! matcher, term counts, and the lexicon bundle shared by attacks, detectors,
//! and the fact checker.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

/// Coarse token class assigned by [`tokenize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Number,
    Punct,
}

/// One token with its verbatim surface, lowercased form, and byte span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lower: String,
    pub kind: TokenKind,
    /// Half-open byte range into the source text.
    pub span: (usize, usize),
}

impl Token {
    fn new(text: &str, start: usize, end: usize, kind: TokenKind) -> Token {
        let surface = text[start..end].to_string();
        let lower = surface.to_lowercase();
        Token { surface, lower, kind, span: (start, end) }
    }
}

/// Splits text into Word, Number, and Punct tokens; whitespace is dropped.
///
/// Words are maximal runs of letters and apostrophes. Numbers are digit runs
/// that may contain `,` or `.` between digits. Any other non-whitespace
/// character becomes a single Punct token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let byte_at = |i: usize| if i < n { chars[i].0 } else { text.len() };
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < n {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphabetic() || c == '\'' {
            let mut j = i + 1;
            while j < n && (chars[j].1.is_alphabetic() || chars[j].1 == '\'') {
                j += 1;
            }
            tokens.push(Token::new(text, start, byte_at(j), TokenKind::Word));
            i = j;
        } else if c.is_ascii_digit() {
            let mut j = i + 1;
            while j < n {
                let cj = chars[j].1;
                let separator =
                    (cj == ',' || cj == '.') && j + 1 < n && chars[j + 1].1.is_ascii_digit();
                if cj.is_ascii_digit() || separator {
                    j += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token::new(text, start, byte_at(j), TokenKind::Number));
            i = j;
        } else {
            tokens.push(Token::new(text, start, start + c.len_utf8(), TokenKind::Punct));
            i += 1;
        }
    }
    tokens
}

/// A sentence: a run of tokens plus its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    /// Byte range from the first token's start to the last token's end.
    pub span: (usize, usize),
}

impl Sentence {
    /// The sentence as a slice of the text it was split from.
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.span.0..self.span.1]
    }
}

/// Splits text into sentences after `.`, `!`, or `?` tokens that are followed
/// by whitespace or the end of the text. A trailing fragment without a
/// terminator forms its own sentence.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let flush = |current: &mut Vec<Token>, sentences: &mut Vec<Sentence>| {
        if !current.is_empty() {
            let span = (current[0].span.0, current[current.len() - 1].span.1);
            sentences.push(Sentence { tokens: std::mem::take(current), span });
        }
    };
    for token in tokenize(text) {
        let terminator =
            token.kind == TokenKind::Punct && matches!(token.surface.as_str(), "." | "!" | "?");
        let end = token.span.1;
        current.push(token);
        if terminator && text[end..].chars().next().is_none_or(char::is_whitespace) {
            flush(&mut current, &mut sentences);
        }
    }
    flush(&mut current, &mut sentences);
    sentences
}

/// A passive-voice pattern `[patient NP] [aux] [participle] by [agent NP]`
/// located inside one sentence. Spans are half-open token index ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassiveFrame {
    pub patient_span: (usize, usize),
    pub aux_index: usize,
    pub participle_index: usize,
    pub agent_span: (usize, usize),
}

const PASSIVE_AUX: &[&str] = &["was", "were", "is", "are", "been"];

const AUX_WORDS: &[&str] = &[
    "am", "are", "be", "been", "being", "can", "could", "did", "do", "does", "had", "has", "have",
    "is", "may", "might", "must", "shall", "should", "was", "were", "will", "would",
];

const CONJUNCTIONS: &[&str] = &["and", "but", "nor", "or"];

const PREPOSITIONS: &[&str] = &[
    "about", "after", "against", "as", "at", "before", "between", "by", "during", "for", "from",
    "in", "into", "of", "off", "on", "over", "through", "to", "under", "until", "with", "without",
];

pub(crate) fn is_passive_aux(lower: &str) -> bool {
    PASSIVE_AUX.contains(&lower)
}

fn blocks_noun_phrase(lower: &str, lexicons: &Lexicons) -> bool {
    AUX_WORDS.contains(&lower)
        || CONJUNCTIONS.contains(&lower)
        || PREPOSITIONS.contains(&lower)
        || lexicons.participles.contains(lower)
}

/// Maximal run of noun-phrase words starting at `start`.
pub(crate) fn noun_phrase_forward(
    tokens: &[Token],
    start: usize,
    lexicons: &Lexicons,
) -> Option<(usize, usize)> {
    let mut end = start;
    while end < tokens.len()
        && tokens[end].kind == TokenKind::Word
        && !blocks_noun_phrase(&tokens[end].lower, lexicons)
    {
        end += 1;
    }
    (end > start).then_some((start, end))
}

/// Maximal run of noun-phrase words ending just before `stop`.
pub(crate) fn noun_phrase_backward(
    tokens: &[Token],
    stop: usize,
    lexicons: &Lexicons,
) -> Option<(usize, usize)> {
    let mut start = stop;
    while start > 0
        && tokens[start - 1].kind == TokenKind::Word
        && !blocks_noun_phrase(&tokens[start - 1].lower, lexicons)
    {
        start -= 1;
    }
    (start < stop).then_some((start, stop))
}

/// First noun phrase of a token sequence, if any.
pub(crate) fn first_noun_phrase(tokens: &[Token], lexicons: &Lexicons) -> Option<(usize, usize)> {
    for i in 0..tokens.len() {
        if tokens[i].kind == TokenKind::Word && !blocks_noun_phrase(&tokens[i].lower, lexicons) {
            return noun_phrase_forward(tokens, i, lexicons);
        }
    }
    None
}

/// Finds non-overlapping passive frames in one sentence, left to right.
///
/// A frame needs a participle from the lexicon, one of was/were/is/are/been
/// directly before it, the word "by" directly after it, and noun phrases on
/// both sides. A candidate whose patient overlaps an accepted frame is
/// dropped.
pub fn find_passive_frames(sentence: &Sentence, lexicons: &Lexicons) -> Vec<PassiveFrame> {
    let tokens = &sentence.tokens;
    let mut frames: Vec<PassiveFrame> = Vec::new();
    let mut next_free = 0usize;
    for p in 1..tokens.len() {
        if tokens[p].kind != TokenKind::Word || !lexicons.participles.contains(&tokens[p].lower) {
            continue;
        }
        let a = p - 1;
        if tokens[a].kind != TokenKind::Word || !is_passive_aux(&tokens[a].lower) {
            continue;
        }
        let by = p + 1;
        if by >= tokens.len() || tokens[by].kind != TokenKind::Word || tokens[by].lower != "by" {
            continue;
        }
        let Some(agent_span) = noun_phrase_forward(tokens, by + 1, lexicons) else {
            continue;
        };
        let Some(patient_span) = noun_phrase_backward(tokens, a, lexicons) else {
            continue;
        };
        if patient_span.0 < next_free {
            continue;
        }
        frames.push(PassiveFrame { patient_span, aux_index: a, participle_index: p, agent_span });
        next_free = agent_span.1;
    }
    frames
}

/// Counts Word and Number tokens by lowercased surface; Punct is ignored.
pub fn term_frequencies(tokens: &[Token]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for token in tokens {
        if matches!(token.kind, TokenKind::Word | TokenKind::Number) {
            *counts.entry(token.lower.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Word lists and tables driving attacks and detectors. Keys are lowercased.
#[derive(Debug, Clone)]
pub struct Lexicons {
    /// Loaded term to weight in (0, 1].
    pub bias_terms: BTreeMap<String, f64>,
    /// Lowercased substrings matched against titles.
    pub clickbait_patterns: Vec<String>,
    /// Verb to harsher verb.
    pub severity_pairs: BTreeMap<String, String>,
    /// Bridge templates containing `{a}` and `{b}` placeholders.
    pub causal_connectives: Vec<String>,
    pub participles: BTreeSet<String>,
    /// Entity to substitute entity.
    pub gazetteer: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
}

const FILE_BIAS: &str = "bias_terms.tsv";
const FILE_CLICKBAIT: &str = "clickbait.txt";
const FILE_SEVERITY: &str = "severity.tsv";
const FILE_CONNECTIVES: &str = "connectives.txt";
const FILE_PARTICIPLES: &str = "participles.txt";
const FILE_GAZETTEER: &str = "gazetteer.tsv";

fn content_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with('#'))
}

fn parse_error(file: &str, line: usize, message: impl Into<String>) -> LexiconError {
    LexiconError::Parse { file: file.to_string(), line, message: message.into() }
}

fn split_tab<'a>(
    file: &str,
    line_no: usize,
    line: &'a str,
) -> Result<(&'a str, &'a str), LexiconError> {
    line.split_once('\t')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| parse_error(file, line_no, "expected two TAB-separated fields"))
}

fn parse_bias_terms(content: &str) -> Result<BTreeMap<String, f64>, LexiconError> {
    let mut terms = BTreeMap::new();
    for (line_no, line) in content_lines(content) {
        let (term, weight) = split_tab(FILE_BIAS, line_no, line)?;
        let weight: f64 = weight
            .parse()
            .map_err(|_| parse_error(FILE_BIAS, line_no, format!("bad weight {weight:?}")))?;
        if !weight.is_finite() || weight <= 0.0 || weight > 1.0 {
            return Err(parse_error(FILE_BIAS, line_no, "weight must be in (0, 1]"));
        }
        terms.insert(term.to_lowercase(), weight);
    }
    Ok(terms)
}

fn parse_clickbait(content: &str) -> Vec<String> {
    content_lines(content).map(|(_, line)| line.to_lowercase()).collect()
}

fn parse_severity(content: &str) -> Result<BTreeMap<String, String>, LexiconError> {
    let mut pairs = BTreeMap::new();
    for (line_no, line) in content_lines(content) {
        let (weak, strong) = split_tab(FILE_SEVERITY, line_no, line)?;
        let weak = weak.to_lowercase();
        let strong = strong.to_lowercase();
        if weak == strong {
            return Err(parse_error(FILE_SEVERITY, line_no, "pair maps a word to itself"));
        }
        pairs.insert(weak, strong);
    }
    Ok(pairs)
}

fn parse_connectives(content: &str) -> Result<Vec<String>, LexiconError> {
    let mut templates = Vec::new();
    for (line_no, line) in content_lines(content) {
        if !line.contains("{a}") || !line.contains("{b}") {
            return Err(parse_error(FILE_CONNECTIVES, line_no, "template needs {a} and {b}"));
        }
        templates.push(line.to_string());
    }
    Ok(templates)
}

fn parse_participles(content: &str) -> BTreeSet<String> {
    content_lines(content).map(|(_, line)| line.to_lowercase()).collect()
}

fn parse_gazetteer(content: &str) -> Result<BTreeMap<String, String>, LexiconError> {
    let mut entries = BTreeMap::new();
    for (line_no, line) in content_lines(content) {
        let (entity, substitute) = split_tab(FILE_GAZETTEER, line_no, line)?;
        let entity = entity.to_lowercase();
        if entity == substitute.to_lowercase() {
            return Err(parse_error(FILE_GAZETTEER, line_no, "entry maps an entity to itself"));
        }
        entries.insert(entity, substitute.to_string());
    }
    Ok(entries)
}

impl Lexicons {
    /// The lexicons compiled into the library.
    pub fn builtin() -> Lexicons {
        Lexicons {
            bias_terms: parse_bias_terms(include_str!("../resources/bias_terms.tsv"))
                .expect("builtin bias terms"),
            clickbait_patterns: parse_clickbait(include_str!("../resources/clickbait.txt")),
            severity_pairs: parse_severity(include_str!("../resources/severity.tsv"))
                .expect("builtin severity pairs"),
            causal_connectives: parse_connectives(include_str!("../resources/connectives.txt"))
                .expect("builtin connectives"),
            participles: parse_participles(include_str!("../resources/participles.txt")),
            gazetteer: parse_gazetteer(include_str!("../resources/gazetteer.tsv"))
                .expect("builtin gazetteer"),
        }
    }

    /// Loads all six lexicon files from a directory. Every file is required.
    pub fn load_dir(dir: &Path) -> Result<Lexicons, LexiconError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path)
                .map_err(|source| LexiconError::Io { path: path.display().to_string(), source })
        };
        Ok(Lexicons {
            bias_terms: parse_bias_terms(&read(FILE_BIAS)?)?,
            clickbait_patterns: parse_clickbait(&read(FILE_CLICKBAIT)?),
            severity_pairs: parse_severity(&read(FILE_SEVERITY)?)?,
            causal_connectives: parse_connectives(&read(FILE_CONNECTIVES)?)?,
            participles: parse_participles(&read(FILE_PARTICIPLES)?),
            gazetteer: parse_gazetteer(&read(FILE_GAZETTEER)?)?,
        })
    }
}

impl Default for Lexicons {
    fn default() -> Lexicons {
        Lexicons::builtin()
    }
}
