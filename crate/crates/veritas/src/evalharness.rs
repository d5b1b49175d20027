//! Confusion tallies, derived rates, attack score-delta reports, and
//! rendering to JSON or fixed text tables.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::attacks::{AttackKind, AttackResult};
use crate::corpus::{Article, Corpus, TruthLabel};
use crate::detectors::{Band, Detector, DetectorError, Verdict};

/// Verdict-versus-label tallies. Fake counts as the positive class; Unsure
/// verdicts are tracked per truth label instead of being forced into a cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub unsure_real: u64,
    pub unsure_fake: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_ + self.unsure_real + self.unsure_fake
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {labels} labels against {verdicts} verdicts")]
    LengthMismatch { labels: usize, verdicts: usize },
    #[error("attacked article's parent {0:?} not found among the originals")]
    MissingParent(String),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

/// Pairs each truth label with a verdict and counts the cells by band.
pub fn tally(truth: &[TruthLabel], verdicts: &[Verdict]) -> Result<ConfusionCounts, EvalError> {
    if truth.len() != verdicts.len() {
        return Err(EvalError::LengthMismatch { labels: truth.len(), verdicts: verdicts.len() });
    }
    let mut counts = ConfusionCounts::default();
    for (label, verdict) in truth.iter().zip(verdicts) {
        match (label, verdict.band) {
            (TruthLabel::Fake, Band::Biased) => counts.tp += 1,
            (TruthLabel::Real, Band::Impartial) => counts.tn += 1,
            (TruthLabel::Real, Band::Biased) => counts.fp += 1,
            (TruthLabel::Fake, Band::Impartial) => counts.fn_ += 1,
            (TruthLabel::Real, Band::Unsure) => counts.unsure_real += 1,
            (TruthLabel::Fake, Band::Unsure) => counts.unsure_fake += 1,
        }
    }
    Ok(counts)
}

/// Rates derived from a confusion tally. A rate whose denominator is zero
/// is absent rather than zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_all: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_excl_unsure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub false_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unsure_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub real_accuracy_excl_unsure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fake_accuracy_excl_unsure: Option<f64>,
}

pub fn compute_metrics(counts: &ConfusionCounts) -> MetricsReport {
    let ratio = |numerator: u64, denominator: u64| {
        (denominator > 0).then(|| numerator as f64 / denominator as f64)
    };
    let total = counts.total();
    let decisive = counts.tp + counts.tn + counts.fp + counts.fn_;
    MetricsReport {
        fpr: ratio(counts.fp, counts.fp + counts.tn),
        fnr: ratio(counts.fn_, counts.fn_ + counts.tp),
        accuracy_all: ratio(counts.tp + counts.tn, total),
        accuracy_excl_unsure: ratio(counts.tp + counts.tn, decisive),
        false_rate: ratio(counts.fp + counts.fn_, total),
        unsure_rate: ratio(counts.unsure_real + counts.unsure_fake, total),
        real_accuracy_excl_unsure: ratio(counts.tn, counts.tn + counts.fp),
        fake_accuracy_excl_unsure: ratio(counts.tp, counts.tp + counts.fn_),
    }
}

/// Before-and-after scores for one attacked article.
#[derive(Debug, Clone, Serialize)]
pub struct AttackRow {
    pub article_id: String,
    pub kind: AttackKind,
    pub score_before: f64,
    pub score_after: f64,
    pub delta: f64,
    pub band_before: Band,
    pub band_after: Band,
    pub flipped: bool,
}

/// Score deltas for a batch of attacks; the aggregates are absent when the
/// batch is empty.
#[derive(Debug, Clone, Serialize)]
pub struct AttackReport {
    pub rows: Vec<AttackRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_abs_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_rate: Option<f64>,
}

/// Scores every attacked article against its first parent and reports the
/// per-article score movement.
pub fn attack_delta_report(
    detector: &dyn Detector,
    originals: &Corpus,
    attacked: &[AttackResult],
) -> Result<AttackReport, EvalError> {
    let by_id: BTreeMap<&str, &Article> =
        originals.articles.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut rows = Vec::with_capacity(attacked.len());
    for result in attacked {
        let parent_id =
            result.parent_ids.first().ok_or_else(|| EvalError::MissingParent(String::new()))?;
        let parent = by_id
            .get(parent_id.as_str())
            .ok_or_else(|| EvalError::MissingParent(parent_id.clone()))?;
        let before = detector.check(parent)?;
        let after = detector.check(&result.article)?;
        rows.push(AttackRow {
            article_id: result.article.id.clone(),
            kind: result.kind,
            score_before: before.score,
            score_after: after.score,
            delta: after.score - before.score,
            band_before: before.band,
            band_after: after.band,
            flipped: before.band != after.band,
        });
    }
    let mean_abs_delta = (!rows.is_empty())
        .then(|| rows.iter().map(|r| r.delta.abs()).sum::<f64>() / rows.len() as f64);
    let flip_rate = (!rows.is_empty())
        .then(|| rows.iter().filter(|r| r.flipped).count() as f64 / rows.len() as f64);
    Ok(AttackReport { rows, mean_abs_delta, flip_rate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

/// Formats a ratio as a percentage with two decimals, rounding half up.
fn percent(ratio: Option<f64>) -> String {
    match ratio {
        None => "n/a".into(),
        Some(r) => {
            let scaled = (r * 10000.0 + 0.5).floor() as i64;
            format!("{}.{:02}%", scaled / 100, scaled.rem_euclid(100))
        }
    }
}

#[derive(Serialize)]
struct FullReport<'a> {
    counts: &'a ConfusionCounts,
    metrics: &'a MetricsReport,
}

/// Renders a tally and its metrics either as pretty JSON or as fixed text
/// tables. Identical inputs produce identical bytes.
pub fn render_report(
    metrics: &MetricsReport,
    counts: &ConfusionCounts,
    format: ReportFormat,
) -> String {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(&FullReport { counts, metrics })
                .expect("report serialization cannot fail");
            out.push('\n');
            out
        }
        ReportFormat::Text => {
            let real_total = counts.tn + counts.fp;
            let fake_total = counts.tp + counts.fn_;
            let decisive = counts.tp + counts.tn + counts.fp + counts.fn_;
            let mut out = String::new();
            out.push_str("confusion counts (rows truth, columns verdict)\n");
            out.push_str("             impartial / biased / unsure\n");
            out.push_str(&format!(
                "  real news  {} / {} / {}\n",
                counts.tn, counts.fp, counts.unsure_real
            ));
            out.push_str(&format!(
                "  fake news  {} / {} / {}\n",
                counts.fn_, counts.tp, counts.unsure_fake
            ));
            out.push('\n');
            out.push_str("accuracy excluding unsure verdicts\n");
            out.push_str(&format!(
                "  real news  {} scored, {} correct, {}\n",
                real_total,
                counts.tn,
                percent(metrics.real_accuracy_excl_unsure)
            ));
            out.push_str(&format!(
                "  fake news  {} scored, {} correct, {}\n",
                fake_total,
                counts.tp,
                percent(metrics.fake_accuracy_excl_unsure)
            ));
            out.push_str(&format!(
                "  overall    {} scored, {} correct, {}\n",
                decisive,
                counts.tp + counts.tn,
                percent(metrics.accuracy_excl_unsure)
            ));
            out.push('\n');
            out.push_str("rates over all articles\n");
            out.push_str(&format!("  false positive rate  {}\n", percent(metrics.fpr)));
            out.push_str(&format!("  false negative rate  {}\n", percent(metrics.fnr)));
            out.push_str(&format!("  accuracy             {}\n", percent(metrics.accuracy_all)));
            out.push_str(&format!("  false rate           {}\n", percent(metrics.false_rate)));
            out.push_str(&format!("  unsure rate          {}\n", percent(metrics.unsure_rate)));
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::swap_subject_object;
    use crate::detectors::{train_nb, Verdict};
    use crate::textkit::Lexicons;

    fn reference_counts() -> ConfusionCounts {
        ConfusionCounts {
            tp: 2184,
            tn: 1159,
            fp: 1477,
            fn_: 537,
            unsure_real: 535,
            unsure_fake: 443,
        }
    }

    fn verdict_in(band: Band) -> Verdict {
        let score = match band {
            Band::Impartial => 80.0,
            Band::Biased => 20.0,
            Band::Unsure => 50.0,
        };
        Verdict {
            band,
            score,
            title_score: score,
            content_score: score,
            detector_name: "style".into(),
        }
    }

    #[test]
    fn tally_routes_each_label_band_pair_to_its_cell() {
        let cells = [
            (TruthLabel::Fake, Band::Biased),
            (TruthLabel::Real, Band::Impartial),
            (TruthLabel::Real, Band::Biased),
            (TruthLabel::Fake, Band::Impartial),
            (TruthLabel::Real, Band::Unsure),
            (TruthLabel::Fake, Band::Unsure),
        ];
        let labels: Vec<TruthLabel> = cells.iter().map(|c| c.0).collect();
        let verdicts: Vec<Verdict> = cells.iter().map(|c| verdict_in(c.1)).collect();
        let counts = tally(&labels, &verdicts).unwrap();
        assert_eq!(
            counts,
            ConfusionCounts { tp: 1, tn: 1, fp: 1, fn_: 1, unsure_real: 1, unsure_fake: 1 }
        );
        assert_eq!(counts.total(), 6);
        assert_eq!(tally(&[], &[]).unwrap(), ConfusionCounts::default());
        assert!(matches!(
            tally(&labels, &verdicts[..5]),
            Err(EvalError::LengthMismatch { labels: 6, verdicts: 5 })
        ));
    }

    #[test]
    fn metrics_match_hand_checked_four_place_values() {
        let metrics = compute_metrics(&reference_counts());
        let rounded = |r: Option<f64>| (r.unwrap() * 10000.0).round() as i64;
        assert_eq!(rounded(metrics.fpr), 5603);
        assert_eq!(rounded(metrics.fnr), 1974);
        assert_eq!(rounded(metrics.accuracy_all), 5277);
        assert_eq!(rounded(metrics.accuracy_excl_unsure), 6240);
        assert_eq!(rounded(metrics.false_rate), 3179);
        assert_eq!(rounded(metrics.unsure_rate), 1544);
        assert_eq!(rounded(metrics.real_accuracy_excl_unsure), 4397);
        assert_eq!(rounded(metrics.fake_accuracy_excl_unsure), 8026);
    }

    #[test]
    fn metrics_are_perfect_for_a_perfect_detector() {
        let counts = ConfusionCounts { tp: 3, tn: 4, ..ConfusionCounts::default() };
        let metrics = compute_metrics(&counts);
        assert_eq!(metrics.fpr, Some(0.0));
        assert_eq!(metrics.fnr, Some(0.0));
        assert_eq!(metrics.accuracy_all, Some(1.0));
        assert_eq!(metrics.accuracy_excl_unsure, Some(1.0));
        assert_eq!(metrics.false_rate, Some(0.0));
        assert_eq!(metrics.unsure_rate, Some(0.0));
    }

    #[test]
    fn zero_denominators_leave_rates_absent() {
        let counts =
            ConfusionCounts { unsure_real: 5, unsure_fake: 5, ..ConfusionCounts::default() };
        let metrics = compute_metrics(&counts);
        assert_eq!(metrics.fpr, None);
        assert_eq!(metrics.fnr, None);
        assert_eq!(metrics.accuracy_excl_unsure, None);
        assert_eq!(metrics.accuracy_all, Some(0.0));
        assert_eq!(metrics.unsure_rate, Some(1.0));
        let empty = compute_metrics(&ConfusionCounts::default());
        assert_eq!(empty.unsure_rate, None);
        assert_eq!(empty.accuracy_all, None);
    }

    #[test]
    fn text_reports_show_rows_and_half_up_percentages() {
        let counts = reference_counts();
        let text = render_report(&compute_metrics(&counts), &counts, ReportFormat::Text);
        assert!(text.contains("1159 / 1477 / 535"), "{text}");
        assert!(text.contains("537 / 2184 / 443"), "{text}");
        assert!(text.contains("62.40%"), "{text}");
        assert!(text.contains("56.03%"), "{text}");
        assert!(text.contains("19.74%"), "{text}");
    }

    #[test]
    fn percentages_round_half_up() {
        let counts = ConfusionCounts { tp: 1, fn_: 31, ..ConfusionCounts::default() };
        let text = render_report(&compute_metrics(&counts), &counts, ReportFormat::Text);
        assert!(text.contains("3.13%"), "{text}");
        let empty = render_report(
            &compute_metrics(&ConfusionCounts::default()),
            &ConfusionCounts::default(),
            ReportFormat::Text,
        );
        assert!(empty.contains("n/a"), "{empty}");
    }

    #[test]
    fn json_reports_round_trip_and_skip_absent_rates() {
        let counts = reference_counts();
        let json = render_report(&compute_metrics(&counts), &counts, ReportFormat::Json);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["counts"]["fn"], 537);
        assert_eq!(value["counts"]["tp"], 2184);
        assert!((value["metrics"]["fpr"].as_f64().unwrap() - 1477.0 / 2636.0).abs() < 1e-12);
        let empty = render_report(
            &compute_metrics(&ConfusionCounts::default()),
            &ConfusionCounts::default(),
            ReportFormat::Json,
        );
        let value: serde_json::Value = serde_json::from_str(&empty).unwrap();
        assert!(value["metrics"].as_object().unwrap().is_empty());
        assert!(empty.ends_with('\n'));
    }

    #[test]
    fn rendering_is_deterministic() {
        let counts = reference_counts();
        let metrics = compute_metrics(&counts);
        for format in [ReportFormat::Json, ReportFormat::Text] {
            assert_eq!(
                render_report(&metrics, &counts, format),
                render_report(&metrics, &counts, format)
            );
        }
    }

    fn labeled(id: &str, title: &str, text: &str, label: TruthLabel) -> Article {
        let mut article = Article::new(id, title, text);
        article.label = Some(label);
        article
    }

    #[test]
    fn role_swaps_leave_bag_of_words_scores_unchanged() {
        let lexicons = Lexicons::builtin();
        let originals = Corpus {
            articles: vec![
                labeled("r", "-", "senate votes bill", TruthLabel::Real),
                labeled("f", "-", "shocking shocking miracle", TruthLabel::Fake),
                Article::new("s", "Plain", "A gangster was shot by the police."),
            ],
            source: "test".into(),
        };
        let model = train_nb(&originals, 1.0, 0).unwrap();
        let attacked = vec![swap_subject_object(&originals.articles[2], &lexicons).unwrap()];
        let report = attack_delta_report(&model, &originals, &attacked).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].delta, 0.0);
        assert!(!report.rows[0].flipped);
        assert_eq!(report.mean_abs_delta, Some(0.0));
        assert_eq!(report.flip_rate, Some(0.0));
        assert_eq!(report.rows[0].kind, AttackKind::SubjectObjectSwap);
    }

    #[test]
    fn missing_parents_are_reported_by_id() {
        let lexicons = Lexicons::builtin();
        let article = Article::new("s", "Plain", "A gangster was shot by the police.");
        let attacked = vec![swap_subject_object(&article, &lexicons).unwrap()];
        let originals = Corpus {
            articles: vec![labeled("r", "-", "senate votes bill", TruthLabel::Real)],
            source: "test".into(),
        };
        let model = train_nb(
            &Corpus {
                articles: vec![
                    labeled("r", "-", "senate votes bill", TruthLabel::Real),
                    labeled("f", "-", "shocking miracle", TruthLabel::Fake),
                ],
                source: "test".into(),
            },
            1.0,
            0,
        )
        .unwrap();
        let err = attack_delta_report(&model, &originals, &attacked).unwrap_err();
        assert!(matches!(err, EvalError::MissingParent(id) if id == "s"));
    }

    #[test]
    fn empty_batches_have_no_aggregates() {
        let model = train_nb(
            &Corpus {
                articles: vec![
                    labeled("r", "-", "senate votes bill", TruthLabel::Real),
                    labeled("f", "-", "shocking miracle", TruthLabel::Fake),
                ],
                source: "test".into(),
            },
            1.0,
            0,
        )
        .unwrap();
        let originals = Corpus { articles: Vec::new(), source: "test".into() };
        let report = attack_delta_report(&model, &originals, &[]).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.mean_abs_delta, None);
        assert_eq!(report.flip_rate, None);
    }
}
