//! News article corpora: CSV loading and saving, label statistics, and
//! seeded train/test splits.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// Ground-truth label carried by a corpus row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TruthLabel {
    Real,
    Fake,
}

impl TruthLabel {
    /// Uppercase form used in CSV files.
    pub fn as_csv(self) -> &'static str {
        match self {
            TruthLabel::Real => "REAL",
            TruthLabel::Fake => "FAKE",
        }
    }

    /// Lowercase form used as a JSON map key.
    pub fn key(self) -> &'static str {
        match self {
            TruthLabel::Real => "real",
            TruthLabel::Fake => "fake",
        }
    }
}

impl fmt::Display for TruthLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_csv())
    }
}

impl FromStr for TruthLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<TruthLabel, ()> {
        if s.eq_ignore_ascii_case("real") {
            Ok(TruthLabel::Real)
        } else if s.eq_ignore_ascii_case("fake") {
            Ok(TruthLabel::Fake)
        } else {
            Err(())
        }
    }
}

/// One news article. Attack outputs leave `label` unset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub id: String,
    pub title: String,
    pub text: String,
    pub url: Option<String>,
    pub label: Option<TruthLabel>,
}

impl Article {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        text: impl Into<String>,
    ) -> Article {
        Article { id: id.into(), title: title.into(), text: text.into(), url: None, label: None }
    }
}

/// An ordered collection of articles with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub articles: Vec<Article>,
    /// Where the articles came from, for report headers.
    pub source: String,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn by_id(&self, id: &str) -> Option<&Article> {
        self.articles.iter().find(|a| a.id == id)
    }
}

/// Supported on-disk corpus layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// Comma-separated values with a header row naming at least title and text.
    CsvWithHeader,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("row {row}: unrecognized label {value:?}")]
    BadLabel { row: usize, value: String },
    #[error("row {row}: empty {field}")]
    EmptyField { row: usize, field: &'static str },
    #[error("row {row}: duplicate id {id:?}")]
    DuplicateId { row: usize, id: String },
    #[error("need at least two labeled articles, found {labeled}")]
    CorpusTooSmall { labeled: usize },
    #[error("train fraction must be inside (0, 1), got {0}")]
    BadFraction(f64),
}

/// Reads a corpus file. Rows are numbered from 1 in errors; ids come from an
/// `id` column when present and from the row position otherwise. A missing
/// `label` column or an empty label cell leaves the article unlabeled.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let CorpusFormat::CsvWithHeader = format;
    let display = path.display().to_string();
    let io_err = |source| CorpusError::Io { path: display.clone(), source };
    let csv_err = |source| CorpusError::Csv { path: display.clone(), source };
    let file = File::open(path).map_err(io_err)?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let title_col = find("title").ok_or(CorpusError::MissingColumn("title"))?;
    let text_col = find("text").ok_or(CorpusError::MissingColumn("text"))?;
    let id_col = find("id");
    let label_col = find("label");

    let mut articles = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (index, record) in reader.records().enumerate() {
        let row = index + 1;
        let record = record.map_err(csv_err)?;
        let cell = |col: usize| record.get(col).unwrap_or("").trim();
        let title = cell(title_col);
        if title.is_empty() {
            return Err(CorpusError::EmptyField { row, field: "title" });
        }
        let text = cell(text_col);
        if text.is_empty() {
            return Err(CorpusError::EmptyField { row, field: "text" });
        }
        let label = match label_col.map(cell).filter(|v| !v.is_empty()) {
            Some(value) => Some(
                value
                    .parse::<TruthLabel>()
                    .map_err(|()| CorpusError::BadLabel { row, value: value.to_string() })?,
            ),
            None => None,
        };
        let id = match id_col.map(cell) {
            Some(value) if !value.is_empty() => value.to_string(),
            _ => index.to_string(),
        };
        if !seen_ids.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { row, id });
        }
        articles.push(Article {
            id,
            title: title.to_string(),
            text: text.to_string(),
            url: None,
            label,
        });
    }
    Ok(Corpus { articles, source: display })
}

/// Writes a corpus as CSV with columns id, title, text, label.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let display = path.display().to_string();
    let file =
        File::create(path).map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |source| CorpusError::Csv { path: display.clone(), source };
    writer.write_record(["id", "title", "text", "label"]).map_err(csv_err)?;
    for article in &corpus.articles {
        let label = article.label.map_or("", TruthLabel::as_csv);
        writer
            .write_record([article.id.as_str(), &article.title, &article.text, label])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    Ok(())
}

/// Label tallies for one corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub total: usize,
    pub real: usize,
    pub fake: usize,
    pub unlabeled: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats { total: corpus.len(), real: 0, fake: 0, unlabeled: 0 };
    for article in &corpus.articles {
        match article.label {
            Some(TruthLabel::Real) => stats.real += 1,
            Some(TruthLabel::Fake) => stats.fake += 1,
            None => stats.unlabeled += 1,
        }
    }
    stats
}

/// Seeded shuffle split. The train side receives `round(fraction * n)`
/// articles; the same seed always produces the same partition.
pub fn split_corpus(
    corpus: &Corpus,
    train_fraction: f64,
    seed: u64,
) -> Result<(Corpus, Corpus), CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::BadFraction(train_fraction));
    }
    let labeled = corpus.articles.iter().filter(|a| a.label.is_some()).count();
    if labeled < 2 {
        return Err(CorpusError::CorpusTooSmall { labeled });
    }
    let mut order: Vec<usize> = (0..corpus.articles.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let train_len = (train_fraction * order.len() as f64).round() as usize;
    let pick = |indices: &[usize]| indices.iter().map(|&i| corpus.articles[i].clone()).collect();
    let train =
        Corpus { articles: pick(&order[..train_len]), source: format!("{}#train", corpus.source) };
    let test =
        Corpus { articles: pick(&order[train_len..]), source: format!("{}#test", corpus.source) };
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file
    }

    fn load(content: &str) -> Result<Corpus, CorpusError> {
        let file = write_csv(content);
        load_corpus(file.path(), CorpusFormat::CsvWithHeader)
    }

    #[test]
    fn load_assigns_row_ids_and_parses_labels() {
        let corpus = load(
            "title,text,label\n\
             A,first body,REAL\n\
             B,second body,fake\n\
             C,third body,\n",
        )
        .unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.articles[0].id, "0");
        assert_eq!(corpus.articles[0].label, Some(TruthLabel::Real));
        assert_eq!(corpus.articles[1].label, Some(TruthLabel::Fake));
        assert_eq!(corpus.articles[2].label, None);
        assert!(corpus.articles.iter().all(|a| a.url.is_none()));
    }

    #[test]
    fn load_trims_fields_and_keeps_quoted_commas() {
        let corpus = load("title,text,label\n\" A title \",\"one, two\",REAL\n").unwrap();
        assert_eq!(corpus.articles[0].title, "A title");
        assert_eq!(corpus.articles[0].text, "one, two");
    }

    #[test]
    fn load_requires_title_and_text_columns() {
        assert!(matches!(load("title,label\nA,REAL\n"), Err(CorpusError::MissingColumn("text"))));
        assert!(matches!(
            load("text,label\nbody,REAL\n"),
            Err(CorpusError::MissingColumn("title"))
        ));
    }

    #[test]
    fn load_accepts_header_only_file() {
        let corpus = load("title,text,label\n").unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn load_rejects_bad_rows() {
        assert!(matches!(
            load("title,text,label\nA,body,maybe\n"),
            Err(CorpusError::BadLabel { row: 1, .. })
        ));
        assert!(matches!(
            load("title,text,label\nA,  ,REAL\n"),
            Err(CorpusError::EmptyField { row: 1, field: "text" })
        ));
        assert!(matches!(
            load("id,title,text\nx,A,body\nx,B,body\n"),
            Err(CorpusError::DuplicateId { row: 2, .. })
        ));
    }

    #[test]
    fn save_then_load_reproduces_the_corpus() {
        let corpus = Corpus {
            articles: vec![
                Article {
                    id: "a1".into(),
                    title: "First, quoted".into(),
                    text: "Line one.\nLine two.".into(),
                    url: None,
                    label: Some(TruthLabel::Real),
                },
                Article {
                    id: "a2".into(),
                    title: "Second".into(),
                    text: "Body".into(),
                    url: None,
                    label: None,
                },
            ],
            source: "memory".into(),
        };
        let file = tempfile::NamedTempFile::new().unwrap();
        save_corpus(&corpus, file.path()).unwrap();
        let loaded = load_corpus(file.path(), CorpusFormat::CsvWithHeader).unwrap();
        assert_eq!(loaded.articles, corpus.articles);
    }

    #[test]
    fn stats_count_each_label_class() {
        let corpus = load(
            "title,text,label\n\
             A,x y,REAL\nB,x y,REAL\nC,x y,REAL\n\
             D,x y,FAKE\nE,x y,FAKE\nF,x y,FAKE\n",
        )
        .unwrap();
        let stats = corpus_stats(&corpus);
        assert_eq!(stats, CorpusStats { total: 6, real: 3, fake: 3, unlabeled: 0 });
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let corpus = load(
            "title,text,label\nA,x,REAL\nB,x,FAKE\nC,x,REAL\nD,x,FAKE\nE,x,REAL\nF,x,FAKE\nG,x,REAL\nH,x,FAKE\nI,x,REAL\nJ,x,FAKE\n",
        )
        .unwrap();
        let (train_a, test_a) = split_corpus(&corpus, 0.8, 42).unwrap();
        let (train_b, test_b) = split_corpus(&corpus, 0.8, 42).unwrap();
        assert_eq!(train_a.articles, train_b.articles);
        assert_eq!(test_a.articles, test_b.articles);
        assert_eq!(train_a.len(), 8);
        assert_eq!(test_a.len(), 2);
        let mut ids: Vec<&str> =
            train_a.articles.iter().chain(&test_a.articles).map(|a| a.id.as_str()).collect();
        ids.sort_unstable();
        assert_eq!(ids, vec!["0", "1", "2", "3", "4", "5", "6", "7", "8", "9"]);
        let (train_c, _) = split_corpus(&corpus, 0.8, 43).unwrap();
        assert_ne!(train_a.articles, train_c.articles);
    }

    #[test]
    fn split_validates_inputs() {
        let corpus = load("title,text,label\nA,x,REAL\nB,x,\n").unwrap();
        assert!(matches!(
            split_corpus(&corpus, 0.8, 1),
            Err(CorpusError::CorpusTooSmall { labeled: 1 })
        ));
        let corpus = load("title,text,label\nA,x,REAL\nB,x,FAKE\n").unwrap();
        assert!(matches!(split_corpus(&corpus, 1.0, 1), Err(CorpusError::BadFraction(_))));
        assert!(matches!(split_corpus(&corpus, 0.0, 1), Err(CorpusError::BadFraction(_))));
    }
}
