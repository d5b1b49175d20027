//! Detector interface with three implementations: a transparent linguistic
//! scorer, a trainable multinomial naive-Bayes classifier, and a blocking
//! client for a remote scoring service.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Article, Corpus, TruthLabel};
use crate::textkit::{split_sentences, term_frequencies, tokenize, Lexicons, TokenKind};

/// Verdict category. Scores of 60 and above are Impartial, 40 and below are
/// Biased, anything between is Unsure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Impartial,
    Biased,
    Unsure,
}

/// One detector's judgment of one article. `score` mirrors `content_score`;
/// the band always derives from the content score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub band: Band,
    pub score: f64,
    pub title_score: f64,
    pub content_score: f64,
    pub detector_name: String,
}

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("score {0} outside [0, 100]")]
    OutOfRange(f64),
    #[error("corpus has no {} articles", .0.as_csv())]
    MissingClass(TruthLabel),
    #[error("training corpus has no countable terms")]
    EmptyVocabulary,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("request timed out")]
    Timeout,
    #[error("server returned HTTP status {0}")]
    HttpStatus(u16),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("bad model file: {0}")]
    BadModel(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Maps a score in [0, 100] to its band; boundaries are inclusive toward the
/// decisive bands.
pub fn band_of_score(score: f64) -> Result<Band, DetectorError> {
    if !score.is_finite() || !(0.0..=100.0).contains(&score) {
        return Err(DetectorError::OutOfRange(score));
    }
    Ok(if score >= 60.0 {
        Band::Impartial
    } else if score <= 40.0 {
        Band::Biased
    } else {
        Band::Unsure
    })
}

/// Common interface over the style, naive-Bayes, and remote detectors.
pub trait Detector: Send + Sync {
    fn name(&self) -> &str;
    fn check(&self, article: &Article) -> Result<Verdict, DetectorError>;
}

impl Detector for Box<dyn Detector> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn check(&self, article: &Article) -> Result<Verdict, DetectorError> {
        (**self).check(article)
    }
}

/// Linguistic scorer: per-sentence bias density drives the content score,
/// clickbait patterns in the title drive the title score.
#[derive(Debug, Clone)]
pub struct StyleModel {
    pub lexicons: Lexicons,
    pub bias_gain: f64,
    pub clickbait_penalty: f64,
}

impl StyleModel {
    pub fn new(lexicons: Lexicons) -> StyleModel {
        StyleModel { lexicons, bias_gain: 4.0, clickbait_penalty: 15.0 }
    }

    pub fn with_params(
        lexicons: Lexicons,
        bias_gain: f64,
        clickbait_penalty: f64,
    ) -> Result<StyleModel, DetectorError> {
        if !bias_gain.is_finite() || bias_gain <= 0.0 {
            return Err(DetectorError::InvalidParameter("bias gain must be positive".into()));
        }
        if !clickbait_penalty.is_finite() || !(0.0..=100.0).contains(&clickbait_penalty) {
            return Err(DetectorError::InvalidParameter(
                "clickbait penalty must be in [0, 100]".into(),
            ));
        }
        Ok(StyleModel { lexicons, bias_gain, clickbait_penalty })
    }
}

/// Scores an article with the linguistic model.
///
/// Each sentence scores `100 * max(0, 1 - gain * bias_weight / token_count)`;
/// the content score is the token-length-weighted mean over sentences.
pub fn style_check(article: &Article, model: &StyleModel) -> Verdict {
    let mut weighted_sum = 0.0;
    let mut total_tokens = 0.0;
    for sentence in split_sentences(&article.text) {
        let len = sentence.tokens.len() as f64;
        if len == 0.0 {
            continue;
        }
        let bias: f64 =
            sentence.tokens.iter().filter_map(|t| model.lexicons.bias_terms.get(&t.lower)).sum();
        let sentence_score = 100.0 * (1.0 - model.bias_gain * bias / len).max(0.0);
        weighted_sum += sentence_score * len;
        total_tokens += len;
    }
    let content_score =
        if total_tokens > 0.0 { (weighted_sum / total_tokens).clamp(0.0, 100.0) } else { 100.0 };
    let title = article.title.to_lowercase();
    let matches =
        model.lexicons.clickbait_patterns.iter().filter(|p| title.contains(p.as_str())).count();
    let title_score = (100.0 - model.clickbait_penalty * matches as f64).clamp(0.0, 100.0);
    let band = band_of_score(content_score).expect("content score stays in [0, 100]");
    Verdict {
        band,
        score: content_score,
        title_score,
        content_score,
        detector_name: "style".into(),
    }
}

impl Detector for StyleModel {
    fn name(&self) -> &str {
        "style"
    }

    fn check(&self, article: &Article) -> Result<Verdict, DetectorError> {
        Ok(style_check(article, self))
    }
}

/// Multinomial naive-Bayes model over lowercased Word and Number tokens.
///
/// Likelihoods use Laplace smoothing with denominator `total + alpha * |V|`,
/// so they sum to 1 over the vocabulary; unseen terms score as a zero-count
/// term through the per-class out-of-vocabulary value.
#[derive(Debug, Clone, PartialEq)]
pub struct NBModel {
    pub alpha: f64,
    pub class_log_priors: BTreeMap<TruthLabel, f64>,
    pub term_log_likelihoods: BTreeMap<TruthLabel, BTreeMap<String, f64>>,
    pub oov_log_likelihoods: BTreeMap<TruthLabel, f64>,
    pub vocabulary: BTreeSet<String>,
}

fn countable(kind: TokenKind) -> bool {
    matches!(kind, TokenKind::Word | TokenKind::Number)
}

/// Trains the naive-Bayes model. The seed is reserved for future sampling
/// extensions and does not affect the base trainer.
pub fn train_nb(corpus: &Corpus, alpha: f64, _seed: u64) -> Result<NBModel, DetectorError> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(DetectorError::InvalidParameter("alpha must be positive".into()));
    }
    let mut doc_counts: BTreeMap<TruthLabel, usize> = BTreeMap::new();
    let mut term_counts: BTreeMap<TruthLabel, BTreeMap<String, usize>> = BTreeMap::new();
    for article in &corpus.articles {
        let Some(label) = article.label else { continue };
        *doc_counts.entry(label).or_insert(0) += 1;
        let counts = term_counts.entry(label).or_default();
        for token in tokenize(&article.title).iter().chain(tokenize(&article.text).iter()) {
            if countable(token.kind) {
                *counts.entry(token.lower.clone()).or_insert(0) += 1;
            }
        }
    }
    for label in [TruthLabel::Real, TruthLabel::Fake] {
        if doc_counts.get(&label).copied().unwrap_or(0) == 0 {
            return Err(DetectorError::MissingClass(label));
        }
    }
    let vocabulary: BTreeSet<String> =
        term_counts.values().flat_map(|counts| counts.keys().cloned()).collect();
    if vocabulary.is_empty() {
        return Err(DetectorError::EmptyVocabulary);
    }
    let total_docs: usize = doc_counts.values().sum();
    let vocab_size = vocabulary.len() as f64;
    let mut class_log_priors = BTreeMap::new();
    let mut term_log_likelihoods = BTreeMap::new();
    let mut oov_log_likelihoods = BTreeMap::new();
    for (&label, counts) in &term_counts {
        class_log_priors.insert(label, (doc_counts[&label] as f64 / total_docs as f64).ln());
        let class_total: usize = counts.values().sum();
        let denominator = class_total as f64 + alpha * vocab_size;
        let likelihoods: BTreeMap<String, f64> = vocabulary
            .iter()
            .map(|term| {
                let count = counts.get(term).copied().unwrap_or(0) as f64;
                (term.clone(), ((count + alpha) / denominator).ln())
            })
            .collect();
        term_log_likelihoods.insert(label, likelihoods);
        oov_log_likelihoods.insert(label, (alpha / denominator).ln());
    }
    Ok(NBModel { alpha, class_log_priors, term_log_likelihoods, oov_log_likelihoods, vocabulary })
}

/// Scores an article with a trained model. The score depends only on the
/// article's lowercased term-frequency mapping; an exact posterior tie
/// resolves to Biased at score 40.
pub fn nb_check(article: &Article, model: &NBModel) -> Verdict {
    let mut tokens = tokenize(&article.title);
    tokens.extend(tokenize(&article.text));
    let frequencies = term_frequencies(&tokens);
    let log_posterior = |label: TruthLabel| {
        let likelihoods = &model.term_log_likelihoods[&label];
        let oov = model.oov_log_likelihoods[&label];
        let mut log_posterior = model.class_log_priors[&label];
        for (term, &count) in &frequencies {
            let ll = likelihoods.get(term).copied().unwrap_or(oov);
            log_posterior += count as f64 * ll;
        }
        log_posterior
    };
    let log_real = log_posterior(TruthLabel::Real);
    let log_fake = log_posterior(TruthLabel::Fake);
    let content_score = if log_real == log_fake {
        40.0
    } else {
        (100.0 / (1.0 + (log_fake - log_real).exp())).clamp(0.0, 100.0)
    };
    let band = band_of_score(content_score).expect("nb score stays in [0, 100]");
    Verdict {
        band,
        score: content_score,
        title_score: content_score,
        content_score,
        detector_name: "nb".into(),
    }
}

impl Detector for NBModel {
    fn name(&self) -> &str {
        "nb"
    }

    fn check(&self, article: &Article) -> Result<Verdict, DetectorError> {
        Ok(nb_check(article, self))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    alpha: f64,
    priors: BTreeMap<String, f64>,
    vocabulary: Vec<String>,
    log_likelihoods: BTreeMap<String, BTreeMap<String, f64>>,
    oov_log_likelihoods: BTreeMap<String, f64>,
}

fn label_from_key(key: &str) -> Result<TruthLabel, DetectorError> {
    key.parse().map_err(|()| DetectorError::BadModel(format!("unknown class key {key:?}")))
}

impl NBModel {
    /// Writes the model as JSON. Identical models produce identical bytes.
    pub fn save(&self, path: &Path) -> Result<(), DetectorError> {
        let display = path.display().to_string();
        let io_err = |source| DetectorError::Io { path: display.clone(), source };
        let file = ModelFile {
            alpha: self.alpha,
            priors: self.class_log_priors.iter().map(|(l, &v)| (l.key().to_string(), v)).collect(),
            vocabulary: self.vocabulary.iter().cloned().collect(),
            log_likelihoods: self
                .term_log_likelihoods
                .iter()
                .map(|(l, m)| (l.key().to_string(), m.clone()))
                .collect(),
            oov_log_likelihoods: self
                .oov_log_likelihoods
                .iter()
                .map(|(l, &v)| (l.key().to_string(), v))
                .collect(),
        };
        let out = File::create(path).map_err(&io_err)?;
        let mut writer = BufWriter::new(out);
        serde_json::to_writer_pretty(&mut writer, &file)
            .map_err(|e| DetectorError::BadModel(e.to_string()))?;
        writer.write_all(b"\n").and_then(|()| writer.flush()).map_err(io_err)
    }

    /// Reads a model written by [`NBModel::save`].
    pub fn load(path: &Path) -> Result<NBModel, DetectorError> {
        let display = path.display().to_string();
        let file = File::open(path)
            .map_err(|source| DetectorError::Io { path: display.clone(), source })?;
        let parsed: ModelFile = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| DetectorError::BadModel(format!("{display}: {e}")))?;
        if !parsed.alpha.is_finite() || parsed.alpha <= 0.0 {
            return Err(DetectorError::BadModel("alpha must be positive".into()));
        }
        let mut class_log_priors = BTreeMap::new();
        for (key, value) in &parsed.priors {
            class_log_priors.insert(label_from_key(key)?, *value);
        }
        let mut term_log_likelihoods = BTreeMap::new();
        for (key, value) in parsed.log_likelihoods {
            term_log_likelihoods.insert(label_from_key(&key)?, value);
        }
        let mut oov_log_likelihoods = BTreeMap::new();
        for (key, value) in &parsed.oov_log_likelihoods {
            oov_log_likelihoods.insert(label_from_key(key)?, *value);
        }
        for label in [TruthLabel::Real, TruthLabel::Fake] {
            if !class_log_priors.contains_key(&label)
                || !term_log_likelihoods.contains_key(&label)
                || !oov_log_likelihoods.contains_key(&label)
            {
                return Err(DetectorError::BadModel(format!("missing class {}", label.key())));
            }
        }
        let vocabulary: BTreeSet<String> = parsed.vocabulary.into_iter().collect();
        for likelihoods in term_log_likelihoods.values() {
            if likelihoods.len() != vocabulary.len()
                || !likelihoods.keys().all(|t| vocabulary.contains(t))
            {
                return Err(DetectorError::BadModel(
                    "likelihood table does not cover the vocabulary".into(),
                ));
            }
        }
        Ok(NBModel {
            alpha: parsed.alpha,
            class_log_priors,
            term_log_likelihoods,
            oov_log_likelihoods,
            vocabulary,
        })
    }
}

/// Where and how to reach the remote scoring service.
#[derive(Debug, Clone)]
pub struct RemoteEndpoint {
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
}

#[derive(Deserialize)]
struct RemotePart {
    decision: String,
    score: f64,
}

#[derive(Deserialize)]
struct RemoteReply {
    content: Option<RemotePart>,
    title: Option<RemotePart>,
}

/// Client for the remote service; holds a connection pool.
pub struct RemoteDetector {
    endpoint: RemoteEndpoint,
    client: reqwest::blocking::Client,
}

impl RemoteDetector {
    pub fn new(endpoint: RemoteEndpoint) -> Result<RemoteDetector, DetectorError> {
        if endpoint.base_url.is_empty() {
            return Err(DetectorError::InvalidParameter("base_url must be non-empty".into()));
        }
        if endpoint.timeout_ms == 0 {
            return Err(DetectorError::InvalidParameter("timeout_ms must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(endpoint.timeout_ms))
            .build()
            .map_err(|e| DetectorError::Transport(e.to_string()))?;
        Ok(RemoteDetector { endpoint, client })
    }

    fn validate_part(part: &RemotePart) -> Result<f64, DetectorError> {
        if !matches!(part.decision.as_str(), "impartial" | "biased" | "unsure") {
            return Err(DetectorError::MalformedResponse(format!(
                "unknown decision {:?}",
                part.decision
            )));
        }
        if !part.score.is_finite() || !(0.0..=1.0).contains(&part.score) {
            return Err(DetectorError::MalformedResponse(format!(
                "score {} outside [0, 1]",
                part.score
            )));
        }
        Ok(part.score * 100.0)
    }

    fn request(&self, article: &Article) -> Result<Verdict, DetectorError> {
        let url = format!("{}/check", self.endpoint.base_url.trim_end_matches('/'));
        let body = serde_json::json!({
            "title": article.title,
            "content": article.text,
            "url": article.url.clone().unwrap_or_default(),
        });
        let map_send_error = |e: reqwest::Error| {
            if e.is_timeout() {
                DetectorError::Timeout
            } else {
                DetectorError::Transport(e.to_string())
            }
        };
        let response = self.client.post(&url).json(&body).send().map_err(map_send_error)?;
        let status = response.status();
        if !status.is_success() {
            return Err(DetectorError::HttpStatus(status.as_u16()));
        }
        let text = response.text().map_err(map_send_error)?;
        let reply: RemoteReply = serde_json::from_str(&text)
            .map_err(|e| DetectorError::MalformedResponse(e.to_string()))?;
        let content = reply
            .content
            .as_ref()
            .ok_or_else(|| DetectorError::MalformedResponse("missing content part".into()))?;
        let content_score = Self::validate_part(content)?;
        let title_score = match &reply.title {
            Some(part) => Self::validate_part(part)?,
            None => content_score,
        };
        let band = band_of_score(content_score).expect("validated score stays in range");
        Ok(Verdict {
            band,
            score: content_score,
            title_score,
            content_score,
            detector_name: "remote".into(),
        })
    }
}

/// One-shot request against an endpoint.
pub fn remote_check(
    article: &Article,
    endpoint: &RemoteEndpoint,
) -> Result<Verdict, DetectorError> {
    RemoteDetector::new(endpoint.clone())?.request(article)
}

impl Detector for RemoteDetector {
    fn name(&self) -> &str {
        "remote"
    }

    fn check(&self, article: &Article) -> Result<Verdict, DetectorError> {
        self.request(article)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Read;
    use std::net::{TcpListener, TcpStream};

    #[test]
    fn bands_have_inclusive_decisive_boundaries() {
        assert_eq!(band_of_score(75.0).unwrap(), Band::Impartial);
        assert_eq!(band_of_score(20.0).unwrap(), Band::Biased);
        assert_eq!(band_of_score(50.0).unwrap(), Band::Unsure);
        assert_eq!(band_of_score(60.0).unwrap(), Band::Impartial);
        assert_eq!(band_of_score(40.0).unwrap(), Band::Biased);
        assert_eq!(band_of_score(59.999).unwrap(), Band::Unsure);
        assert_eq!(band_of_score(40.001).unwrap(), Band::Unsure);
        assert_eq!(band_of_score(0.0).unwrap(), Band::Biased);
        assert_eq!(band_of_score(100.0).unwrap(), Band::Impartial);
        for bad in [-0.5, 100.5, f64::NAN, f64::INFINITY] {
            assert!(matches!(band_of_score(bad), Err(DetectorError::OutOfRange(_))), "{bad}");
        }
    }

    #[test]
    fn style_gives_clean_articles_full_marks() {
        let model = StyleModel::new(Lexicons::builtin());
        let article = Article::new(
            "a",
            "Quiet day in the park",
            "People walked dogs. Children played games.",
        );
        let verdict = style_check(&article, &model);
        assert_eq!(verdict.content_score, 100.0);
        assert_eq!(verdict.title_score, 100.0);
        assert_eq!(verdict.band, Band::Impartial);
        assert_eq!(verdict.detector_name, "style");
        assert_eq!(verdict.score, verdict.content_score);
    }

    #[test]
    fn style_scores_one_bias_term_in_ten_tokens_at_sixty() {
        let model = StyleModel::new(Lexicons::builtin());
        let article =
            Article::new("a", "Plain", "terror alpha beta gamma delta epsilon zeta eta theta iota");
        let verdict = style_check(&article, &model);
        assert!((verdict.content_score - 60.0).abs() < 1e-12);
        assert_eq!(verdict.band, Band::Impartial);
    }

    #[test]
    fn style_clamps_dense_bias_to_zero() {
        let model = StyleModel::new(Lexicons::builtin());
        let article = Article::new("a", "Plain", "terror alpha beta gamma");
        let verdict = style_check(&article, &model);
        assert_eq!(verdict.content_score, 0.0);
        assert_eq!(verdict.band, Band::Biased);
    }

    #[test]
    fn style_weights_sentences_by_token_count() {
        let model = StyleModel::new(Lexicons::builtin());
        let article =
            Article::new("a", "Plain", "terror alpha beta gamma. alpha beta gamma delta epsilon.");
        let verdict = style_check(&article, &model);
        let expected = (20.0 * 5.0 + 100.0 * 6.0) / 11.0;
        assert!((verdict.content_score - expected).abs() < 1e-12);
    }

    #[test]
    fn style_counts_clickbait_patterns_in_titles() {
        let model = StyleModel::new(Lexicons::builtin());
        let article =
            Article::new("a", "You Won't Believe What Happens Next", "People walked dogs.");
        let verdict = style_check(&article, &model);
        assert_eq!(verdict.title_score, 70.0);
        assert_eq!(verdict.content_score, 100.0);
    }

    #[test]
    fn style_rejects_bad_parameters() {
        assert!(StyleModel::with_params(Lexicons::builtin(), 0.0, 15.0).is_err());
        assert!(StyleModel::with_params(Lexicons::builtin(), 4.0, 150.0).is_err());
        assert!(StyleModel::with_params(Lexicons::builtin(), 4.0, 15.0).is_ok());
    }

    fn toy_corpus() -> Corpus {
        let mut fake = Article::new("f", "-", "shocking shocking miracle");
        fake.label = Some(TruthLabel::Fake);
        let mut real = Article::new("r", "-", "senate votes bill");
        real.label = Some(TruthLabel::Real);
        Corpus { articles: vec![fake, real], source: "toy".into() }
    }

    #[test]
    fn training_matches_hand_computed_likelihoods() {
        let model = train_nb(&toy_corpus(), 1.0, 0).unwrap();
        assert_eq!(model.vocabulary.len(), 5);
        let p_shocking_fake = model.term_log_likelihoods[&TruthLabel::Fake]["shocking"].exp();
        let p_shocking_real = model.term_log_likelihoods[&TruthLabel::Real]["shocking"].exp();
        assert!((p_shocking_fake - 3.0 / 8.0).abs() < 1e-12);
        assert!((p_shocking_real - 1.0 / 8.0).abs() < 1e-12);
        assert!((model.oov_log_likelihoods[&TruthLabel::Fake].exp() - 1.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn training_normalizes_likelihoods_per_class() {
        let model = train_nb(&toy_corpus(), 1.0, 0).unwrap();
        for likelihoods in model.term_log_likelihoods.values() {
            let sum: f64 = likelihoods.values().map(|ll| ll.exp()).sum();
            assert!((sum - 1.0).abs() < 1e-9, "sum {sum}");
        }
    }

    #[test]
    fn training_requires_both_classes_and_terms() {
        let mut corpus = toy_corpus();
        corpus.articles[1].label = Some(TruthLabel::Fake);
        assert!(matches!(
            train_nb(&corpus, 1.0, 0),
            Err(DetectorError::MissingClass(TruthLabel::Real))
        ));
        assert!(matches!(train_nb(&toy_corpus(), 0.0, 0), Err(DetectorError::InvalidParameter(_))));
    }

    #[test]
    fn training_is_deterministic() {
        assert_eq!(
            train_nb(&toy_corpus(), 1.0, 0).unwrap(),
            train_nb(&toy_corpus(), 1.0, 7).unwrap()
        );
    }

    #[test]
    fn nb_scores_the_toy_article_at_one_seventh() {
        let model = train_nb(&toy_corpus(), 1.0, 0).unwrap();
        let verdict = nb_check(&Article::new("q", "-", "shocking miracle"), &model);
        assert!((verdict.content_score - 100.0 / 7.0).abs() < 1e-9);
        assert_eq!(verdict.band, Band::Biased);
        assert_eq!(verdict.title_score, verdict.content_score);
    }

    #[test]
    fn nb_resolves_exact_ties_to_biased_forty() {
        let model = train_nb(&toy_corpus(), 1.0, 0).unwrap();
        let verdict = nb_check(&Article::new("q", "-", "!!!"), &model);
        assert_eq!(verdict.content_score, 40.0);
        assert_eq!(verdict.band, Band::Biased);
    }

    #[test]
    fn nb_ignores_token_order() {
        let model = train_nb(&toy_corpus(), 1.0, 0).unwrap();
        let a = nb_check(&Article::new("q", "-", "senate votes bill miracle"), &model);
        let b = nb_check(&Article::new("q", "-", "miracle bill senate votes"), &model);
        assert_eq!(a.content_score, b.content_score);
    }

    #[test]
    fn model_files_round_trip_and_stay_stable() {
        let model = train_nb(&toy_corpus(), 1.0, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path_a = dir.path().join("model_a.json");
        let path_b = dir.path().join("model_b.json");
        model.save(&path_a).unwrap();
        model.save(&path_b).unwrap();
        assert_eq!(std::fs::read(&path_a).unwrap(), std::fs::read(&path_b).unwrap());
        assert_eq!(NBModel::load(&path_a).unwrap(), model);
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path_a).unwrap()).unwrap();
        for field in ["alpha", "priors", "vocabulary", "log_likelihoods", "oov_log_likelihoods"] {
            assert!(value.get(field).is_some(), "missing {field}");
        }
        assert!(value["priors"].get("real").is_some());
        assert!(value["priors"].get("fake").is_some());
    }

    #[test]
    fn model_load_rejects_missing_classes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(
            &path,
            r#"{"alpha":1.0,"priors":{"real":-0.5},"vocabulary":[],"log_likelihoods":{"real":{}},"oov_log_likelihoods":{"real":-1.0}}"#,
        )
        .unwrap();
        assert!(matches!(NBModel::load(&path), Err(DetectorError::BadModel(_))));
    }

    fn read_http_request(stream: &mut TcpStream) -> String {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 1024];
        let header_end = loop {
            let n = stream.read(&mut chunk).unwrap();
            buf.extend_from_slice(&chunk[..n]);
            if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                break pos + 4;
            }
            if n == 0 {
                break buf.len();
            }
        };
        let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
        let content_length = headers
            .lines()
            .find_map(|line| {
                let (name, value) = line.split_once(':')?;
                if name.eq_ignore_ascii_case("content-length") {
                    value.trim().parse::<usize>().ok()
                } else {
                    None
                }
            })
            .unwrap_or(0);
        while buf.len() < header_end + content_length {
            let n = stream.read(&mut chunk).unwrap();
            if n == 0 {
                break;
            }
            buf.extend_from_slice(&chunk[..n]);
        }
        String::from_utf8_lossy(&buf).to_string()
    }

    fn serve_once(
        status_line: &'static str,
        body: &'static str,
    ) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let request = read_http_request(&mut stream);
            let response = format!(
                "{status_line}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len(),
            );
            std::io::Write::write_all(&mut stream, response.as_bytes()).unwrap();
            request
        });
        (format!("http://{addr}"), handle)
    }

    fn endpoint(base_url: String) -> RemoteEndpoint {
        RemoteEndpoint { base_url, timeout_ms: 2000, max_in_flight: 1 }
    }

    #[test]
    fn remote_parses_scores_and_posts_the_wire_fields() {
        let (url, handle) =
            serve_once("HTTP/1.1 200 OK", r#"{"content":{"decision":"impartial","score":0.7151}}"#);
        let mut article =
            Article::new("a", "Is the GOP losing ground?", "Store closures continued.");
        article.url = Some("http://example.com/story".into());
        let verdict = remote_check(&article, &endpoint(url)).unwrap();
        assert!((verdict.content_score - 71.51).abs() < 1e-9);
        assert_eq!(verdict.band, Band::Impartial);
        assert_eq!(verdict.title_score, verdict.content_score);
        assert_eq!(verdict.detector_name, "remote");
        let request = handle.join().unwrap();
        assert!(request.starts_with("POST /check "), "{request}");
        let body_start = request.find("\r\n\r\n").unwrap() + 4;
        let body: serde_json::Value = serde_json::from_str(&request[body_start..]).unwrap();
        assert_eq!(body["title"], "Is the GOP losing ground?");
        assert_eq!(body["content"], "Store closures continued.");
        assert_eq!(body["url"], "http://example.com/story");
    }

    #[test]
    fn remote_reports_title_scores_separately() {
        let (url, handle) = serve_once(
            "HTTP/1.1 200 OK",
            r#"{"title":{"decision":"biased","score":0.2},"content":{"decision":"unsure","score":0.5}}"#,
        );
        let verdict = remote_check(&Article::new("a", "T", "B"), &endpoint(url)).unwrap();
        assert!((verdict.title_score - 20.0).abs() < 1e-9);
        assert!((verdict.content_score - 50.0).abs() < 1e-9);
        assert_eq!(verdict.band, Band::Unsure);
        handle.join().unwrap();
    }

    #[test]
    fn remote_flags_malformed_replies() {
        for body in [
            r#"{"title":{"decision":"impartial","score":0.9}}"#,
            r#"{"content":{"decision":"sideways","score":0.9}}"#,
            r#"{"content":{"decision":"impartial","score":1.5}}"#,
            "not json",
        ] {
            let (url, handle) = serve_once("HTTP/1.1 200 OK", body);
            let err = remote_check(&Article::new("a", "T", "B"), &endpoint(url)).unwrap_err();
            assert!(matches!(err, DetectorError::MalformedResponse(_)), "{body}: {err}");
            handle.join().unwrap();
        }
    }

    #[test]
    fn remote_surfaces_http_status_codes() {
        let (url, handle) = serve_once("HTTP/1.1 503 Service Unavailable", "{}");
        let err = remote_check(&Article::new("a", "T", "B"), &endpoint(url)).unwrap_err();
        assert!(matches!(err, DetectorError::HttpStatus(503)));
        handle.join().unwrap();
    }

    #[test]
    fn remote_times_out_on_a_silent_server() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let _request = read_http_request(&mut stream);
            std::thread::sleep(Duration::from_millis(800));
        });
        let mut ep = endpoint(format!("http://{addr}"));
        ep.timeout_ms = 80;
        let err = remote_check(&Article::new("a", "T", "B"), &ep).unwrap_err();
        assert!(matches!(err, DetectorError::Timeout), "{err}");
    }

    #[test]
    fn remote_reports_refused_connections_as_transport() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let err = remote_check(&Article::new("a", "T", "B"), &endpoint(format!("http://{addr}")))
            .unwrap_err();
        assert!(matches!(err, DetectorError::Transport(_)), "{err}");
    }

    #[test]
    fn remote_validates_endpoints() {
        assert!(RemoteDetector::new(RemoteEndpoint {
            base_url: String::new(),
            timeout_ms: 100,
            max_in_flight: 1
        })
        .is_err());
        assert!(RemoteDetector::new(RemoteEndpoint {
            base_url: "http://localhost:1".into(),
            timeout_ms: 0,
            max_in_flight: 1
        })
        .is_err());
    }
}
