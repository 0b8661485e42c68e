//! Fixation-to-word alignment.
//!
//! A page's fixation stream is processed in three steps:
//!
//! 1. every fixation gets a ranked [`CandidateSet`] of words whose bounding
//!    box lies within `2 · r_foveal` of the fixation point;
//! 2. consecutive candidate-bearing fixations are grouped into
//!    [`ReadingLine`]s while each one falls inside the asymmetric
//!    parafoveal region of its predecessor;
//! 3. a Viterbi pass over each line picks one candidate per fixation,
//!    trading candidate rank against the word-index step between fixations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RegionRadii;
use crate::ingest::{BBox, Fixation, PageLayout};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignError {
    #[error("reading line {0} is empty")]
    EmptyLine(usize),
    #[error("fixation {0} in reading line {1} has no candidate words")]
    NoCandidates(usize, usize),
    #[error("fixation position {0} is out of range")]
    BadFixation(usize),
}

/// Euclidean distance from a point to the nearest point of `bbox`; zero inside.
pub fn word_distance(x: f64, y: f64, bbox: &BBox) -> f64 {
    let dx = (bbox.x_min - x).max(0.0).max(x - bbox.x_max);
    let dy = (bbox.y_min - y).max(0.0).max(y - bbox.y_max);
    dx.hypot(dy)
}

/// Rectangle around a fixation that the next fixation must land in to stay
/// on the same reading line. Wide to the right, foveal elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParafovealRegion {
    pub center: (f64, f64),
    pub extent_right: f64,
    pub extent_left: f64,
    pub extent_up: f64,
    pub extent_down: f64,
}

impl ParafovealRegion {
    pub fn around(x: f64, y: f64, radii: &RegionRadii) -> Self {
        Self {
            center: (x, y),
            extent_right: radii.r_parafoveal_px,
            extent_left: radii.r_foveal_px,
            extent_up: radii.r_foveal_px,
            extent_down: radii.r_foveal_px,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (cx, cy) = self.center;
        x >= cx - self.extent_left
            && x <= cx + self.extent_right
            && y >= cy - self.extent_up
            && y <= cy + self.extent_down
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub word_index: u32,
    pub distance_px: f64,
}

/// Words near one fixation; the position in `candidates` is the rank.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// Position of the fixation in its page stream.
    pub fixation: usize,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Uniform grid over word boxes, used to prune the candidate search.
#[derive(Debug)]
pub struct PageIndex<'a> {
    layout: &'a PageLayout,
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> PageIndex<'a> {
    pub fn new(layout: &'a PageLayout, cell_size: f64) -> Self {
        let cell = if cell_size.is_finite() && cell_size >= 1.0 {
            cell_size
        } else {
            1.0
        };
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (pos, w) in layout.words.iter().enumerate() {
            let (cx0, cy0) = cell_of(w.bbox.x_min, w.bbox.y_min, cell);
            let (cx1, cy1) = cell_of(w.bbox.x_max, w.bbox.y_max, cell);
            for cx in cx0..=cx1 {
                for cy in cy0..=cy1 {
                    cells.entry((cx, cy)).or_default().push(pos);
                }
            }
        }
        Self { layout, cell, cells }
    }

    pub fn layout(&self) -> &PageLayout {
        self.layout
    }

    /// All words within `radius` of `(x, y)`, ascending by distance, ties
    /// by word index.
    pub fn within(&self, x: f64, y: f64, radius: f64) -> Vec<Candidate> {
        let (cx0, cy0) = cell_of(x - radius, y - radius, self.cell);
        let (cx1, cy1) = cell_of(x + radius, y + radius, self.cell);
        let mut positions = Vec::new();
        // Queries far larger than the grid fall back to a full scan.
        let span = (cx1 - cx0 + 1).saturating_mul(cy1 - cy0 + 1);
        if span as usize > self.cells.len() {
            positions.extend(0..self.layout.words.len());
        } else {
            for cx in cx0..=cx1 {
                for cy in cy0..=cy1 {
                    if let Some(ps) = self.cells.get(&(cx, cy)) {
                        positions.extend_from_slice(ps);
                    }
                }
            }
            positions.sort_unstable();
            positions.dedup();
        }
        let mut out: Vec<Candidate> = positions
            .into_iter()
            .filter_map(|pos| {
                let w = &self.layout.words[pos];
                let d = word_distance(x, y, &w.bbox);
                (d <= radius).then_some(Candidate {
                    word_index: w.word_index,
                    distance_px: d,
                })
            })
            .collect();
        out.sort_by(|a, b| {
            a.distance_px
                .total_cmp(&b.distance_px)
                .then(a.word_index.cmp(&b.word_index))
        });
        out
    }
}

fn cell_of(x: f64, y: f64, cell: f64) -> (i64, i64) {
    ((x / cell).floor() as i64, (y / cell).floor() as i64)
}

/// Ranked candidate words for the fixation at `position` of its page stream.
pub fn candidates(position: usize, fixation: &Fixation, index: &PageIndex<'_>, radii: &RegionRadii) -> CandidateSet {
    CandidateSet {
        fixation: position,
        candidates: index.within(fixation.x, fixation.y, radii.candidate_radius_px),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadingLine {
    pub line_id: usize,
    pub members: Vec<CandidateSet>,
}

/// Greedy line segmentation of one page's time-ordered fixations.
///
/// `sets[i]` must be the candidate set of `fixations[i]`. A fixation without
/// candidates closes the open line and belongs to none.
pub fn segment_lines(fixations: &[Fixation], sets: &[CandidateSet], radii: &RegionRadii) -> Vec<ReadingLine> {
    debug_assert_eq!(fixations.len(), sets.len());
    let mut lines: Vec<ReadingLine> = Vec::new();
    let mut open: Option<ReadingLine> = None;
    for set in sets {
        if set.is_empty() {
            lines.extend(open.take());
            continue;
        }
        let f = &fixations[set.fixation];
        let continues = open.as_ref().is_some_and(|line| {
            let prev = &fixations[line.members.last().expect("lines are non-empty").fixation];
            ParafovealRegion::around(prev.x, prev.y, radii).contains(f.x, f.y)
        });
        if continues {
            if let Some(line) = open.as_mut() {
                line.members.push(set.clone());
            }
        } else {
            lines.extend(open.take());
            open = Some(ReadingLine {
                line_id: lines.len(),
                members: vec![set.clone()],
            });
        }
    }
    lines.extend(open);
    lines
}

/// Form of the word-spacing term of the path cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionForm {
    /// `(1 − (next − prev))²`: zero when the gaze advances exactly one word.
    #[default]
    Difference,
    /// `(1 − next − prev)²`: grows with the absolute position on the page.
    Sum,
}

impl std::fmt::Display for TransitionForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransitionForm::Difference => "difference",
            TransitionForm::Sum => "sum",
        })
    }
}

impl TransitionForm {
    pub fn cost(self, prev: u32, next: u32) -> u64 {
        let (prev, next) = (i64::from(prev), i64::from(next));
        let d = match self {
            TransitionForm::Difference => 1 - (next - prev),
            TransitionForm::Sum => 1 - next - prev,
        };
        d.unsigned_abs().saturating_mul(d.unsigned_abs())
    }
}

fn rank_cost(rank: usize) -> u64 {
    (rank as u64).saturating_mul(rank as u64)
}

/// Minimum-cost choice of one candidate per step.
///
/// Returns the chosen rank per step and the total cost. Every step is charged
/// `rank²`, every consecutive pair the transition cost. Among equal-cost
/// paths the one preferring smaller ranks (backwards from the end) wins.
pub fn viterbi_path(steps: &[&[Candidate]], form: TransitionForm) -> Option<(Vec<usize>, u64)> {
    let first = steps.first()?;
    if steps.iter().any(|s| s.is_empty()) {
        return None;
    }
    let mut cost: Vec<u64> = (0..first.len()).map(rank_cost).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(steps.len());
    back.push(Vec::new());
    for pair in steps.windows(2) {
        let (prev, cur) = (pair[0], pair[1]);
        let mut next_cost = Vec::with_capacity(cur.len());
        let mut next_back = Vec::with_capacity(cur.len());
        for (k, c) in cur.iter().enumerate() {
            let mut best = (u64::MAX, 0);
            for (j, p) in prev.iter().enumerate() {
                let total = cost[j].saturating_add(form.cost(p.word_index, c.word_index));
                if total < best.0 {
                    best = (total, j);
                }
            }
            next_cost.push(best.0.saturating_add(rank_cost(k)));
            next_back.push(best.1);
        }
        cost = next_cost;
        back.push(next_back);
    }
    let (mut state, total) = cost
        .iter()
        .enumerate()
        .fold((0, u64::MAX), |best, (k, &c)| if c < best.1 { (k, c) } else { best });
    let mut path = vec![0; steps.len()];
    for t in (0..steps.len()).rev() {
        path[t] = state;
        if t > 0 {
            state = back[t][state];
        }
    }
    Some((path, total))
}

/// A fixation with its assigned word.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFixation {
    /// Position in the page's fixation stream.
    pub fixation: usize,
    pub t_start_ms: f64,
    pub duration_ms: f64,
    pub x: f64,
    pub y: f64,
    pub word_index: u32,
    pub rank: usize,
    pub line_id: usize,
    /// `rank²` plus the transition from the previous fixation of the line.
    pub cost: u64,
}

impl AlignedFixation {
    pub fn end_ms(&self) -> f64 {
        self.t_start_ms + self.duration_ms
    }
}

pub fn viterbi_assign(
    line: &ReadingLine,
    fixations: &[Fixation],
    form: TransitionForm,
) -> Result<Vec<AlignedFixation>, AlignError> {
    if line.members.is_empty() {
        return Err(AlignError::EmptyLine(line.line_id));
    }
    if let Some(m) = line.members.iter().find(|m| m.is_empty()) {
        return Err(AlignError::NoCandidates(m.fixation, line.line_id));
    }
    let steps: Vec<&[Candidate]> = line.members.iter().map(|m| m.candidates.as_slice()).collect();
    let (path, _) = viterbi_path(&steps, form).ok_or(AlignError::EmptyLine(line.line_id))?;

    let mut out = Vec::with_capacity(path.len());
    let mut prev_word: Option<u32> = None;
    for (member, &rank) in line.members.iter().zip(&path) {
        let f = fixations
            .get(member.fixation)
            .ok_or(AlignError::BadFixation(member.fixation))?;
        let word_index = member.candidates[rank].word_index;
        let cost = rank_cost(rank) + prev_word.map_or(0, |p| form.cost(p, word_index));
        prev_word = Some(word_index);
        out.push(AlignedFixation {
            fixation: member.fixation,
            t_start_ms: f.t_start_ms,
            duration_ms: f.duration_ms,
            x: f.x,
            y: f.y,
            word_index,
            rank,
            line_id: line.line_id,
            cost,
        });
    }
    Ok(out)
}

/// Everything alignment produces for one page visit.
#[derive(Debug, Clone, PartialEq)]
pub struct PageAlignment {
    /// One entry per fixation, in stream order.
    pub candidate_sets: Vec<CandidateSet>,
    pub lines: Vec<ReadingLine>,
    /// Aligned fixations in temporal order.
    pub aligned: Vec<AlignedFixation>,
}

pub fn align_page(
    fixations: &[Fixation],
    layout: &PageLayout,
    radii: &RegionRadii,
    form: TransitionForm,
) -> PageAlignment {
    let index = PageIndex::new(layout, radii.candidate_radius_px);
    let candidate_sets: Vec<CandidateSet> = fixations
        .iter()
        .enumerate()
        .map(|(i, f)| candidates(i, f, &index, radii))
        .collect();
    let lines = segment_lines(fixations, &candidate_sets, radii);
    let aligned = lines
        .iter()
        .flat_map(|line| viterbi_assign(line, fixations, form).expect("segmented lines are non-empty with candidates"))
        .collect();
    PageAlignment {
        candidate_sets,
        lines,
        aligned,
    }
}
