//! Fixation logs, word layouts and test scores.
//!
//! Fixations and word boxes share one coordinate frame: page coordinates,
//! i.e. scroll-compensated. A fixation file recorded in viewport coordinates
//! carries a `scroll_y_px` column which is added to `y_px` while parsing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: u64, message: String },
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}, column `{column}`: {message}")]
    Field {
        line: u64,
        column: String,
        message: String,
    },
    #[error("layout document: {0}")]
    Layout(#[from] serde_json::Error),
    #[error("page `{page}`: duplicate word index {index}")]
    DuplicateIndex { page: String, index: u32 },
    #[error("page `{page}`: word indices not contiguous, expected {expected} but found {found}")]
    NonContiguous { page: String, expected: u32, found: u32 },
    #[error("page `{page}`, word {index}: bounding box is empty or inverted")]
    InvertedBox { page: String, index: u32 },
    #[error("page `{0}` appears twice in the layout document")]
    DuplicatePage(String),
    #[error("participant `{participant}` has fixations on unknown page `{page}`")]
    UnknownPage { participant: String, page: String },
    #[error("participant `{0}` appears twice in the scores file")]
    DuplicateParticipant(String),
}

/// A single fixation event in page coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixation {
    pub participant_id: String,
    pub page_id: String,
    pub t_start_ms: f64,
    pub duration_ms: f64,
    pub x: f64,
    pub y: f64,
}

impl Fixation {
    pub fn end_ms(&self) -> f64 {
        self.t_start_ms + self.duration_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordBox {
    pub page_id: String,
    /// Continuous index across the whole page, crossing paragraph boundaries.
    pub word_index: u32,
    pub text: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PageKind {
    Content,
    Serp,
    Video,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageLayout {
    pub page_id: String,
    pub page_kind: PageKind,
    /// Sorted by `word_index`.
    pub words: Vec<WordBox>,
}

impl PageLayout {
    /// Validates and sorts raw words into a layout.
    pub fn new(page_id: String, page_kind: PageKind, mut words: Vec<WordBox>) -> Result<Self, IngestError> {
        words.sort_by_key(|w| w.word_index);
        for w in &words {
            if !w.bbox.is_valid() {
                return Err(IngestError::InvertedBox {
                    page: page_id,
                    index: w.word_index,
                });
            }
        }
        for pair in words.windows(2) {
            let (a, b) = (pair[0].word_index, pair[1].word_index);
            if a == b {
                return Err(IngestError::DuplicateIndex { page: page_id, index: a });
            }
            if b != a + 1 {
                return Err(IngestError::NonContiguous {
                    page: page_id,
                    expected: a + 1,
                    found: b,
                });
            }
        }
        Ok(Self {
            page_id,
            page_kind,
            words,
        })
    }

    pub fn word(&self, word_index: u32) -> Option<&WordBox> {
        let first = self.words.first()?.word_index;
        self.words.get(word_index.checked_sub(first)? as usize)
    }
}

/// Pre/post test scores of one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub participant_id: String,
    pub mcq_pre: f64,
    pub mcq_post: f64,
    pub essay_pre: f64,
    pub essay_post: f64,
}

/// The fixations one participant made on one page.
#[derive(Debug, Clone, PartialEq)]
pub struct PageVisit {
    pub layout: Arc<PageLayout>,
    /// Sorted by `t_start_ms`.
    pub fixations: Vec<Fixation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub participant_id: String,
    pub pages: Vec<PageVisit>,
    pub scores: Option<Scores>,
}

impl Session {
    pub fn fixation_count(&self) -> usize {
        self.pages.iter().map(|p| p.fixations.len()).sum()
    }
}

fn detect_delimiter(bytes: &[u8]) -> u8 {
    let header = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    if header.contains(&b'\t') {
        b'\t'
    } else {
        b','
    }
}

/// Column lookup over a parsed header row.
struct Columns {
    by_name: HashMap<String, usize>,
}

impl Columns {
    fn new(headers: &csv::StringRecord) -> Self {
        let by_name = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().trim_start_matches('\u{feff}').to_owned(), i))
            .collect();
        Self { by_name }
    }

    fn required(&self, name: &'static str) -> Result<usize, IngestError> {
        self.by_name.get(name).copied().ok_or(IngestError::MissingColumn(name))
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn field_str<'r>(record: &'r csv::StringRecord, col: usize, name: &str) -> Result<&'r str, IngestError> {
    match record.get(col) {
        Some(v) if !v.trim().is_empty() => Ok(v.trim()),
        _ => Err(IngestError::Field {
            line: record_line(record),
            column: name.to_owned(),
            message: "value is missing".into(),
        }),
    }
}

fn field_f64(record: &csv::StringRecord, col: usize, name: &str) -> Result<f64, IngestError> {
    let raw = field_str(record, col, name)?;
    let value: f64 = raw.parse().map_err(|_| IngestError::Field {
        line: record_line(record),
        column: name.to_owned(),
        message: format!("`{raw}` is not a decimal number"),
    })?;
    if !value.is_finite() {
        return Err(IngestError::Field {
            line: record_line(record),
            column: name.to_owned(),
            message: format!("`{raw}` is not finite"),
        });
    }
    Ok(value)
}

fn reader_for(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(bytes))
        .trim(csv::Trim::All)
        .from_reader(bytes)
}

fn malformed(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::Malformed {
        line,
        message: e.to_string(),
    }
}

/// Parses a comma- or tab-delimited fixation log.
///
/// Output is grouped by `(participant_id, page_id)` and ordered by start time
/// within each group; ties keep file order.
pub fn parse_fixations<R: Read>(mut source: R) -> Result<Vec<Fixation>, IngestError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut reader = reader_for(&bytes);
    let cols = Columns::new(reader.headers().map_err(malformed)?);
    let participant = cols.required("participant_id")?;
    let page = cols.required("page_id")?;
    let t_start = cols.required("t_start_ms")?;
    let duration = cols.required("duration_ms")?;
    let x = cols.required("x_px")?;
    let y = cols.required("y_px")?;
    let scroll = cols.optional("scroll_y_px");

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(malformed)?;
        let duration_ms = field_f64(&record, duration, "duration_ms")?;
        if duration_ms < 0.0 {
            return Err(IngestError::Field {
                line: record_line(&record),
                column: "duration_ms".into(),
                message: format!("duration must be non-negative, got {duration_ms}"),
            });
        }
        let scroll_y = match scroll {
            Some(col) if record.get(col).is_some_and(|v| !v.trim().is_empty()) => {
                field_f64(&record, col, "scroll_y_px")?
            }
            _ => 0.0,
        };
        out.push(Fixation {
            participant_id: field_str(&record, participant, "participant_id")?.to_owned(),
            page_id: field_str(&record, page, "page_id")?.to_owned(),
            t_start_ms: field_f64(&record, t_start, "t_start_ms")?,
            duration_ms,
            x: field_f64(&record, x, "x_px")?,
            y: field_f64(&record, y, "y_px")? + scroll_y,
        });
    }
    out.sort_by(|a, b| {
        (&a.participant_id, &a.page_id)
            .cmp(&(&b.participant_id, &b.page_id))
            .then(a.t_start_ms.total_cmp(&b.t_start_ms))
    });
    Ok(out)
}

/// Writes fixations in page coordinates (no scroll column).
pub fn write_fixations<W: Write>(sink: W, fixations: &[Fixation]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["participant_id", "page_id", "t_start_ms", "duration_ms", "x_px", "y_px"])
        .map_err(malformed)?;
    for f in fixations {
        w.write_record([
            f.participant_id.clone(),
            f.page_id.clone(),
            f.t_start_ms.to_string(),
            f.duration_ms.to_string(),
            f.x.to_string(),
            f.y.to_string(),
        ])
        .map_err(malformed)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct LayoutDoc {
    pages: Vec<PageDoc>,
}

#[derive(Serialize, Deserialize)]
struct PageDoc {
    page_id: String,
    page_kind: PageKind,
    words: Vec<WordDoc>,
}

#[derive(Serialize, Deserialize)]
struct WordDoc {
    index: u32,
    text: String,
    bbox: [f64; 4],
}

/// Parses a JSON layout document (`pages → page_id, page_kind, words[]`).
pub fn parse_layout<R: Read>(source: R) -> Result<Vec<PageLayout>, IngestError> {
    let doc: LayoutDoc = serde_json::from_reader(source)?;
    let mut seen = BTreeSet::new();
    doc.pages
        .into_iter()
        .map(|page| {
            if !seen.insert(page.page_id.clone()) {
                return Err(IngestError::DuplicatePage(page.page_id));
            }
            let words = page
                .words
                .into_iter()
                .map(|w| WordBox {
                    page_id: page.page_id.clone(),
                    word_index: w.index,
                    text: w.text,
                    bbox: BBox::new(w.bbox[0], w.bbox[1], w.bbox[2], w.bbox[3]),
                })
                .collect();
            PageLayout::new(page.page_id, page.page_kind, words)
        })
        .collect()
}

pub fn write_layout<W: Write>(sink: W, layouts: &[PageLayout]) -> Result<(), IngestError> {
    let doc = LayoutDoc {
        pages: layouts
            .iter()
            .map(|l| PageDoc {
                page_id: l.page_id.clone(),
                page_kind: l.page_kind,
                words: l
                    .words
                    .iter()
                    .map(|w| WordDoc {
                        index: w.word_index,
                        text: w.text.clone(),
                        bbox: [w.bbox.x_min, w.bbox.y_min, w.bbox.x_max, w.bbox.y_max],
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(sink, &doc)?;
    Ok(())
}

pub fn parse_scores<R: Read>(mut source: R) -> Result<Vec<Scores>, IngestError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut reader = reader_for(&bytes);
    let cols = Columns::new(reader.headers().map_err(malformed)?);
    let participant = cols.required("participant_id")?;
    let mcq_pre = cols.required("mcq_pre")?;
    let mcq_post = cols.required("mcq_post")?;
    let essay_pre = cols.required("essay_pre")?;
    let essay_post = cols.required("essay_post")?;

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(malformed)?;
        let id = field_str(&record, participant, "participant_id")?.to_owned();
        if !seen.insert(id.clone()) {
            return Err(IngestError::DuplicateParticipant(id));
        }
        let score = |col, name: &str| -> Result<f64, IngestError> {
            let v = field_f64(&record, col, name)?;
            if v < 0.0 {
                return Err(IngestError::Field {
                    line: record_line(&record),
                    column: name.to_owned(),
                    message: format!("score must be non-negative, got {v}"),
                });
            }
            Ok(v)
        };
        out.push(Scores {
            mcq_pre: score(mcq_pre, "mcq_pre")?,
            mcq_post: score(mcq_post, "mcq_post")?,
            essay_pre: score(essay_pre, "essay_pre")?,
            essay_post: score(essay_post, "essay_post")?,
            participant_id: id,
        });
    }
    Ok(out)
}

pub fn write_scores<W: Write>(sink: W, scores: &[Scores]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    for s in scores {
        w.serialize(s).map_err(malformed)?;
    }
    w.flush()?;
    Ok(())
}

/// Groups fixations into one [`Session`] per participant.
///
/// Participants that only appear in `scores` get a session without pages.
/// Sessions are ordered by participant id, pages by page id.
pub fn assemble_sessions(
    fixations: Vec<Fixation>,
    layouts: &[PageLayout],
    scores: &[Scores],
) -> Result<Vec<Session>, IngestError> {
    let layouts: HashMap<&str, Arc<PageLayout>> = layouts
        .iter()
        .map(|l| (l.page_id.as_str(), Arc::new(l.clone())))
        .collect();
    let mut grouped: BTreeMap<String, BTreeMap<String, Vec<Fixation>>> = BTreeMap::new();
    for f in fixations {
        if !layouts.contains_key(f.page_id.as_str()) {
            return Err(IngestError::UnknownPage {
                participant: f.participant_id,
                page: f.page_id,
            });
        }
        grouped
            .entry(f.participant_id.clone())
            .or_default()
            .entry(f.page_id.clone())
            .or_default()
            .push(f);
    }
    for s in scores {
        grouped.entry(s.participant_id.clone()).or_default();
    }
    let scores: HashMap<&str, &Scores> = scores.iter().map(|s| (s.participant_id.as_str(), s)).collect();

    Ok(grouped
        .into_iter()
        .map(|(participant_id, pages)| {
            let pages = pages
                .into_iter()
                .map(|(page_id, mut fixations)| {
                    fixations.sort_by(|a, b| a.t_start_ms.total_cmp(&b.t_start_ms));
                    PageVisit {
                        layout: Arc::clone(&layouts[page_id.as_str()]),
                        fixations,
                    }
                })
                .collect();
            Session {
                scores: scores.get(participant_id.as_str()).map(|s| (*s).clone()),
                participant_id,
                pages,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub session: Session,
    pub dropped_pages: usize,
    pub dropped_fixations: usize,
}

/// Keeps only the page visits whose layout is a content page.
pub fn filter_content_pages(session: Session) -> FilterOutcome {
    let Session {
        participant_id,
        pages,
        scores,
    } = session;
    let (kept, dropped): (Vec<_>, Vec<_>) = pages
        .into_iter()
        .partition(|p| p.layout.page_kind == PageKind::Content);
    let dropped_fixations = dropped.iter().map(|p| p.fixations.len()).sum();
    if kept.is_empty() && !dropped.is_empty() {
        log::warn!("participant {participant_id}: no content pages left after filtering");
    }
    FilterOutcome {
        dropped_pages: dropped.len(),
        dropped_fixations,
        session: Session {
            participant_id,
            pages: kept,
            scores,
        },
    }
}
