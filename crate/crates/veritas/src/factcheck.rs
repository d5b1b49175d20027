//! Fact triples, a small in-memory knowledge graph with contradiction
//! detection, and a verdict override that folds fact checks into a
//! detector's band.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Article;
use crate::detectors::{Band, Detector, DetectorError, Verdict};
use crate::textkit::{
    is_passive_aux, noun_phrase_backward, noun_phrase_forward, split_sentences, Lexicons, Sentence,
    Token, TokenKind,
};

/// Numeric attachment of a triple: a value and the noun it counts.
#[derive(Debug, Clone, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub unit_noun: String,
}

impl PartialEq for Quantity {
    fn eq(&self, other: &Quantity) -> bool {
        self.value == other.value && self.unit_noun == other.unit_noun
    }
}

/// A (subject, action, object) claim with optional time, location, and
/// quantity. Text slots are stored lowercased with leading determiners
/// stripped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactTriple {
    pub subject: String,
    pub action: String,
    pub object: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity: Option<Quantity>,
}

#[derive(Debug, Error)]
pub enum FactError {
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    ParseError { path: String, line: usize, message: String },
}

fn normalize_slot(text: &str) -> String {
    let lower = text.trim().to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let keep = words.iter().position(|w| !matches!(*w, "a" | "an" | "the")).unwrap_or(words.len());
    words[keep..].join(" ")
}

fn normalized(mut triple: FactTriple) -> Result<FactTriple, FactError> {
    triple.subject = normalize_slot(&triple.subject);
    triple.action = normalize_slot(&triple.action);
    triple.object = normalize_slot(&triple.object);
    if triple.subject.is_empty() || triple.action.is_empty() || triple.object.is_empty() {
        return Err(FactError::InvalidTriple(
            "subject, action, and object must be non-empty".into(),
        ));
    }
    let clean =
        |slot: Option<String>| slot.map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty());
    triple.time = clean(triple.time);
    triple.location = clean(triple.location);
    if let Some(quantity) = &mut triple.quantity {
        if !quantity.value.is_finite() {
            return Err(FactError::InvalidTriple("quantity value must be finite".into()));
        }
        quantity.unit_noun = quantity.unit_noun.trim().to_lowercase();
        if quantity.unit_noun.is_empty() {
            return Err(FactError::InvalidTriple("quantity unit noun must be non-empty".into()));
        }
    }
    Ok(triple)
}

impl FactTriple {
    pub fn new(subject: &str, action: &str, object: &str) -> Result<FactTriple, FactError> {
        normalized(FactTriple {
            subject: subject.into(),
            action: action.into(),
            object: object.into(),
            time: None,
            location: None,
            quantity: None,
        })
    }

    pub fn with_time(mut self, time: &str) -> FactTriple {
        self.time = Some(time.trim().to_lowercase()).filter(|t| !t.is_empty());
        self
    }

    pub fn with_location(mut self, location: &str) -> FactTriple {
        self.location = Some(location.trim().to_lowercase()).filter(|l| !l.is_empty());
        self
    }

    pub fn with_quantity(mut self, value: f64, unit_noun: &str) -> Result<FactTriple, FactError> {
        self.quantity = Some(Quantity { value, unit_noun: unit_noun.into() });
        normalized(self)
    }
}

/// Outcome of checking one triple against the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckOutcome {
    Supported,
    ContradictedRoleReversal,
    ContradictedQuantity,
    Unknown,
}

impl CheckOutcome {
    pub fn is_contradiction(self) -> bool {
        matches!(self, CheckOutcome::ContradictedRoleReversal | CheckOutcome::ContradictedQuantity)
    }
}

/// Deduplicated triple store with (subject, action) and (action, object)
/// indexes.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    triples: Vec<FactTriple>,
    index_sa: BTreeMap<(String, String), Vec<usize>>,
    index_ao: BTreeMap<(String, String), Vec<usize>>,
}

impl KnowledgeGraph {
    pub fn new() -> KnowledgeGraph {
        KnowledgeGraph::default()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[FactTriple] {
        &self.triples
    }

    fn lookup_sa(&self, subject: &str, action: &str) -> impl Iterator<Item = &FactTriple> {
        self.index_sa
            .get(&(subject.to_string(), action.to_string()))
            .into_iter()
            .flatten()
            .map(|&i| &self.triples[i])
    }

    /// Inserts a triple after normalizing it; exact duplicates are dropped.
    pub fn add_fact(&mut self, triple: FactTriple) -> Result<(), FactError> {
        let triple = normalized(triple)?;
        if self.lookup_sa(&triple.subject, &triple.action).any(|known| *known == triple) {
            return Ok(());
        }
        let index = self.triples.len();
        self.index_sa
            .entry((triple.subject.clone(), triple.action.clone()))
            .or_default()
            .push(index);
        self.index_ao
            .entry((triple.action.clone(), triple.object.clone()))
            .or_default()
            .push(index);
        self.triples.push(triple);
        Ok(())
    }

    /// Loads tab-separated triples; returns how many were new.
    ///
    /// Each line holds subject, action, object, then any of `time=`,
    /// `location=`, and `quantity=<value> <unit noun>`. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn import_facts(&mut self, path: &Path) -> Result<usize, FactError> {
        let display = path.display().to_string();
        let content = std::fs::read_to_string(path)
            .map_err(|source| FactError::Io { path: display.clone(), source })?;
        let mut added = 0;
        for (i, raw) in content.lines().enumerate() {
            let line = i + 1;
            let fail =
                |message: String| FactError::ParseError { path: display.clone(), line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() < 3 {
                return Err(fail("expected subject, action, and object".into()));
            }
            let mut triple = FactTriple::new(fields[0], fields[1], fields[2])
                .map_err(|e| fail(e.to_string()))?;
            for extra in &fields[3..] {
                if let Some(value) = extra.strip_prefix("time=") {
                    if triple.time.is_some() {
                        return Err(fail("duplicate time field".into()));
                    }
                    triple = triple.with_time(value);
                    if triple.time.is_none() {
                        return Err(fail("empty time field".into()));
                    }
                } else if let Some(value) = extra.strip_prefix("location=") {
                    if triple.location.is_some() {
                        return Err(fail("duplicate location field".into()));
                    }
                    triple = triple.with_location(value);
                    if triple.location.is_none() {
                        return Err(fail("empty location field".into()));
                    }
                } else if let Some(value) = extra.strip_prefix("quantity=") {
                    if triple.quantity.is_some() {
                        return Err(fail("duplicate quantity field".into()));
                    }
                    let (value, unit_noun) = value
                        .trim()
                        .split_once(' ')
                        .ok_or_else(|| fail("quantity needs a value and a unit noun".into()))?;
                    let value: f64 =
                        value.parse().map_err(|_| fail(format!("bad quantity value {value:?}")))?;
                    triple =
                        triple.with_quantity(value, unit_noun).map_err(|e| fail(e.to_string()))?;
                } else {
                    return Err(fail(format!("unrecognized field {extra:?}")));
                }
            }
            let before = self.triples.len();
            self.add_fact(triple).map_err(|e| fail(e.to_string()))?;
            if self.triples.len() > before {
                added += 1;
            }
        }
        Ok(added)
    }

    /// True when both indexes agree exactly with the triple store.
    pub fn check_indices(&self) -> bool {
        let mut seen_sa = 0;
        for ((subject, action), indices) in &self.index_sa {
            for &i in indices {
                let Some(t) = self.triples.get(i) else { return false };
                if t.subject != *subject || t.action != *action {
                    return false;
                }
                seen_sa += 1;
            }
        }
        let mut seen_ao = 0;
        for ((action, object), indices) in &self.index_ao {
            for &i in indices {
                let Some(t) = self.triples.get(i) else { return false };
                if t.action != *action || t.object != *object {
                    return false;
                }
                seen_ao += 1;
            }
        }
        seen_sa == self.triples.len() && seen_ao == self.triples.len()
    }
}

struct Candidate {
    start: usize,
    end: usize,
    subject_span: (usize, usize),
    object_span: (usize, usize),
}

fn passive_candidate(tokens: &[Token], p: usize, lexicons: &Lexicons) -> Option<Candidate> {
    let a = p.checked_sub(1)?;
    if tokens[a].kind != TokenKind::Word || !is_passive_aux(&tokens[a].lower) {
        return None;
    }
    let by = p + 1;
    if by >= tokens.len() || tokens[by].kind != TokenKind::Word || tokens[by].lower != "by" {
        return None;
    }
    let agent = noun_phrase_forward(tokens, by + 1, lexicons)?;
    let patient = noun_phrase_backward(tokens, a, lexicons)?;
    Some(Candidate { start: patient.0, end: agent.1, subject_span: agent, object_span: patient })
}

fn container_candidate(tokens: &[Token], p: usize, lexicons: &Lexicons) -> Option<Candidate> {
    let a = p.checked_sub(1)?;
    if tokens[a].kind != TokenKind::Word || !is_passive_aux(&tokens[a].lower) {
        return None;
    }
    let i = p + 1;
    if i + 1 >= tokens.len()
        || tokens[i].kind != TokenKind::Word
        || tokens[i].lower != "in"
        || tokens[i + 1].kind != TokenKind::Word
        || tokens[i + 1].lower != "the"
    {
        return None;
    }
    let container = noun_phrase_forward(tokens, i + 1, lexicons)?;
    let patient = noun_phrase_backward(tokens, a, lexicons)?;
    Some(Candidate {
        start: patient.0,
        end: container.1,
        subject_span: container,
        object_span: patient,
    })
}

fn active_candidate(tokens: &[Token], p: usize, lexicons: &Lexicons) -> Option<Candidate> {
    let subject = noun_phrase_backward(tokens, p, lexicons)?;
    let object = noun_phrase_forward(tokens, p + 1, lexicons)?;
    Some(Candidate { start: subject.0, end: object.1, subject_span: subject, object_span: object })
}

fn build_triple(tokens: &[Token], p: usize, candidate: &Candidate) -> Option<FactTriple> {
    let subject = &tokens[candidate.subject_span.1 - 1].lower;
    let object_head = candidate.object_span.1 - 1;
    let object = &tokens[object_head].lower;
    let mut triple = FactTriple::new(subject, &tokens[p].lower, object).ok()?;
    if object_head > 0 && tokens[object_head - 1].kind == TokenKind::Number {
        let digits: String =
            tokens[object_head - 1].surface.chars().filter(|c| *c != ',').collect();
        if let Ok(value) = digits.parse::<f64>() {
            triple = triple.with_quantity(value, object).ok()?;
        }
    }
    Some(triple)
}

fn extract_from_sentence(sentence: &Sentence, lexicons: &Lexicons, out: &mut Vec<FactTriple>) {
    let tokens = &sentence.tokens;
    let mut next_free = 0usize;
    for p in 0..tokens.len() {
        if tokens[p].kind != TokenKind::Word || !lexicons.participles.contains(&tokens[p].lower) {
            continue;
        }
        let candidate = passive_candidate(tokens, p, lexicons)
            .or_else(|| container_candidate(tokens, p, lexicons))
            .or_else(|| active_candidate(tokens, p, lexicons));
        let Some(candidate) = candidate else { continue };
        if candidate.start < next_free {
            continue;
        }
        if let Some(triple) = build_triple(tokens, p, &candidate) {
            out.push(triple);
            next_free = candidate.end;
        }
    }
}

/// Extracts claims from an article's text, sentence by sentence.
///
/// Three patterns anchor on a participle from the lexicon: a passive frame
/// (agent becomes subject), a passive whose agent appears as "in the X"
/// (the container becomes subject), and an adjacent active clause. The
/// subject and object slots keep only the noun phrase's head word; a Number
/// token directly before the object head attaches as a quantity.
pub fn extract_triples(article: &Article, lexicons: &Lexicons) -> Vec<FactTriple> {
    let mut triples = Vec::new();
    for sentence in split_sentences(&article.text) {
        extract_from_sentence(&sentence, lexicons, &mut triples);
    }
    triples
}

fn context_compatible(known: &FactTriple, claim: &FactTriple) -> bool {
    let slot = |a: &Option<String>, b: &Option<String>| match (a, b) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    };
    slot(&known.time, &claim.time) && slot(&known.location, &claim.location)
}

/// Checks one claim against the graph.
///
/// Precedence: a context-compatible exact match with agreeing quantities is
/// Supported; an exact match with differing quantity values is
/// ContradictedQuantity; a triple with the same action and the subject and
/// object exchanged is ContradictedRoleReversal; anything else is Unknown.
pub fn verify_triple(graph: &KnowledgeGraph, claim: &FactTriple) -> CheckOutcome {
    let exact: Vec<&FactTriple> = graph
        .lookup_sa(&claim.subject, &claim.action)
        .filter(|known| known.object == claim.object && context_compatible(known, claim))
        .collect();
    for known in &exact {
        match (&known.quantity, &claim.quantity) {
            (None, None) => return CheckOutcome::Supported,
            (Some(a), Some(b)) if a.value == b.value => return CheckOutcome::Supported,
            _ => {}
        }
    }
    if exact
        .iter()
        .any(|known| matches!((&known.quantity, &claim.quantity), (Some(a), Some(b)) if a.value != b.value))
    {
        return CheckOutcome::ContradictedQuantity;
    }
    let reversed =
        graph.lookup_sa(&claim.object, &claim.action).any(|known| known.object == claim.subject);
    if reversed {
        return CheckOutcome::ContradictedRoleReversal;
    }
    CheckOutcome::Unknown
}

/// One extracted triple together with its check outcome.
#[derive(Debug, Clone, Serialize)]
pub struct TripleOutcome {
    pub triple: FactTriple,
    pub outcome: CheckOutcome,
}

/// Per-article fact-check summary. `consistency` is supported over
/// supported plus contradicted, and 1.0 when nothing decisive was found.
#[derive(Debug, Clone, Serialize)]
pub struct FactReport {
    pub outcomes: Vec<TripleOutcome>,
    pub supported: usize,
    pub contradicted: usize,
    pub unknown: usize,
    pub consistency: f64,
}

/// Extracts and checks every claim in the article.
pub fn verify_article(
    graph: &KnowledgeGraph,
    article: &Article,
    lexicons: &Lexicons,
) -> FactReport {
    let mut outcomes = Vec::new();
    let (mut supported, mut contradicted, mut unknown) = (0usize, 0usize, 0usize);
    for triple in extract_triples(article, lexicons) {
        let outcome = verify_triple(graph, &triple);
        match outcome {
            CheckOutcome::Supported => supported += 1,
            CheckOutcome::Unknown => unknown += 1,
            _ => contradicted += 1,
        }
        outcomes.push(TripleOutcome { triple, outcome });
    }
    let decisive = supported + contradicted;
    let consistency = if decisive > 0 { supported as f64 / decisive as f64 } else { 1.0 };
    FactReport { outcomes, supported, contradicted, unknown, consistency }
}

/// Folds a fact-check report into a detector verdict.
///
/// Any contradiction forces Biased with the content score capped at 40; at
/// least one supported claim lifts an Unsure verdict to Impartial with the
/// content score raised to 60; otherwise the verdict passes through. The
/// detector name gains a "+factcheck" suffix either way.
pub fn combined_verdict(base: &Verdict, report: &FactReport) -> Verdict {
    let detector_name = format!("{}+factcheck", base.detector_name);
    if report.contradicted >= 1 {
        let content_score = base.content_score.min(40.0);
        Verdict {
            band: Band::Biased,
            score: content_score,
            title_score: base.title_score,
            content_score,
            detector_name,
        }
    } else if report.supported >= 1 && base.band == Band::Unsure {
        let content_score = base.content_score.max(60.0);
        Verdict {
            band: Band::Impartial,
            score: content_score,
            title_score: base.title_score,
            content_score,
            detector_name,
        }
    } else {
        Verdict { detector_name, ..base.clone() }
    }
}

/// Wraps a detector so every check passes through [`combined_verdict`].
pub struct FactCheckedDetector<D> {
    inner: D,
    graph: KnowledgeGraph,
    lexicons: Lexicons,
    name: String,
}

impl<D: Detector> FactCheckedDetector<D> {
    pub fn new(inner: D, graph: KnowledgeGraph, lexicons: Lexicons) -> FactCheckedDetector<D> {
        let name = format!("{}+factcheck", inner.name());
        FactCheckedDetector { inner, graph, lexicons, name }
    }
}

impl<D: Detector> Detector for FactCheckedDetector<D> {
    fn name(&self) -> &str {
        &self.name
    }

    fn check(&self, article: &Article) -> Result<Verdict, DetectorError> {
        let base = self.inner.check(article)?;
        let report = verify_article(&self.graph, article, &self.lexicons);
        Ok(combined_verdict(&base, &report))
    }
}
