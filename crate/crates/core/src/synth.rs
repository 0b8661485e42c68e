//! Synthetic reading data with known word assignments.
//!
//! A page of equally sized words is laid out on a regular grid and a reader
//! walks through it according to a [`ReadingPlan`]: forward steps of one to
//! four words, regressions within the current text line, skips from the
//! rightmost word read so far that start a new reading sequence, and
//! fixations that land away from the text. Every
//! fixation is placed on the center of its target word plus isotropic
//! Gaussian jitter.
//!
//! Plan decisions, jitter and durations come from three independent ChaCha
//! streams of the same seed, so changing `noise_sigma_px` moves fixations
//! without changing what the reader intended.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::AlignedFixation;
use crate::ingest::{BBox, Fixation, PageKind, PageLayout, Scores, WordBox};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("{0} must be a probability in [0, 1]")]
    Probability(&'static str),
    #[error("regression, skip and off-text probabilities sum to {0} > 1")]
    BranchSum(f64),
    #[error("forward step weights must be non-negative with a positive sum")]
    Weights,
    #[error("{0} must be finite and non-negative")]
    Negative(&'static str),
    #[error("layout needs at least one line and one word per line")]
    EmptyLayout,
    #[error("skip range {0}..={1} must start at 5 or more and be non-empty")]
    SkipRange(u32, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutSpec {
    pub lines: u32,
    pub words_per_line: u32,
    pub word_width_px: f64,
    pub word_height_px: f64,
    pub word_gap_px: f64,
    /// Distance between the tops of consecutive lines.
    pub line_spacing_px: f64,
    pub left_margin_px: f64,
    pub top_margin_px: f64,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self {
            lines: 100,
            words_per_line: 12,
            word_width_px: 60.0,
            word_height_px: 20.0,
            word_gap_px: 12.0,
            line_spacing_px: 32.0,
            left_margin_px: 100.0,
            top_margin_px: 150.0,
        }
    }
}

impl LayoutSpec {
    pub fn word_count(&self) -> u32 {
        self.lines * self.words_per_line
    }

    fn bbox(&self, index: u32) -> BBox {
        let line = index / self.words_per_line;
        let col = index % self.words_per_line;
        let x = self.left_margin_px + f64::from(col) * (self.word_width_px + self.word_gap_px);
        let y = self.top_margin_px + f64::from(line) * self.line_spacing_px;
        BBox::new(x, y, x + self.word_width_px, y + self.word_height_px)
    }

    fn text_right_edge(&self) -> f64 {
        self.bbox(self.words_per_line - 1).x_max
    }

    pub fn build(&self, page_id: &str) -> PageLayout {
        let words = (0..self.word_count())
            .map(|i| WordBox {
                page_id: page_id.to_owned(),
                word_index: i,
                text: format!("w{i}"),
                bbox: self.bbox(i),
            })
            .collect();
        PageLayout::new(page_id.to_owned(), PageKind::Content, words).expect("grid layouts are contiguous")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReadingPlan {
    /// Relative weights of forward steps of 1, 2, 3 and 4 words.
    pub forward_weights: [f64; 4],
    /// Chance of jumping back to an earlier word of the current text line.
    pub regression_prob: f64,
    /// Chance of jumping past the read span, starting a new sequence.
    pub skip_prob: f64,
    /// Chance of a fixation away from the text.
    pub off_text_prob: f64,
    /// Skip distance range, in words past the furthest word read.
    pub skip_min: u32,
    pub skip_max: u32,
    /// Horizontal distance of off-text fixations from the right text edge.
    pub off_text_offset_px: f64,
}

impl Default for ReadingPlan {
    fn default() -> Self {
        Self {
            forward_weights: [0.6, 0.25, 0.1, 0.05],
            regression_prob: 0.1,
            skip_prob: 0.05,
            off_text_prob: 0.05,
            skip_min: 5,
            skip_max: 10,
            off_text_offset_px: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub participant_id: String,
    pub page_id: String,
    pub layout: LayoutSpec,
    pub plan: ReadingPlan,
    pub noise_sigma_px: f64,
    pub duration_mean_ms: f64,
    pub duration_sd_ms: f64,
    pub min_duration_ms: f64,
    /// Gap between the end of one fixation and the start of the next.
    pub saccade_ms: f64,
    /// Upper bound; generation stops early when the reader runs out of text.
    pub n_fixations: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            participant_id: "s000".into(),
            page_id: "synth-page".into(),
            layout: LayoutSpec::default(),
            plan: ReadingPlan::default(),
            noise_sigma_px: 0.0,
            duration_mean_ms: 230.0,
            duration_sd_ms: 60.0,
            min_duration_ms: 60.0,
            saccade_ms: 30.0,
            n_fixations: 500,
            seed: 0,
        }
    }
}

fn probability(name: &'static str, p: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SynthError::Probability(name))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<(), SynthError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(SynthError::Negative(name))
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let plan = &self.plan;
        probability("regression_prob", plan.regression_prob)?;
        probability("skip_prob", plan.skip_prob)?;
        probability("off_text_prob", plan.off_text_prob)?;
        let sum = plan.regression_prob + plan.skip_prob + plan.off_text_prob;
        if sum > 1.0 {
            return Err(SynthError::BranchSum(sum));
        }
        if plan.forward_weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || plan.forward_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(SynthError::Weights);
        }
        if plan.skip_min < 5 || plan.skip_max < plan.skip_min {
            return Err(SynthError::SkipRange(plan.skip_min, plan.skip_max));
        }
        non_negative("noise_sigma_px", self.noise_sigma_px)?;
        non_negative("duration_mean_ms", self.duration_mean_ms)?;
        non_negative("duration_sd_ms", self.duration_sd_ms)?;
        non_negative("min_duration_ms", self.min_duration_ms)?;
        non_negative("saccade_ms", self.saccade_ms)?;
        non_negative("off_text_offset_px", plan.off_text_offset_px)?;
        let l = &self.layout;
        if l.lines == 0 || l.words_per_line == 0 {
            return Err(SynthError::EmptyLayout);
        }
        for (name, v) in [
            ("word_width_px", l.word_width_px),
            ("word_height_px", l.word_height_px),
            ("word_gap_px", l.word_gap_px),
            ("line_spacing_px", l.line_spacing_px),
        ] {
            non_negative(name, v)?;
        }
        if l.word_width_px == 0.0 || l.word_height_px == 0.0 {
            return Err(SynthError::Negative("word size"));
        }
        Ok(())
    }
}

/// What the simulated reader intended with one fixation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub fixation: usize,
    /// `None` for off-text fixations.
    pub word_index: Option<u32>,
    /// Intended sequence; `None` off text or for single-fixation runs.
    pub sequence: Option<usize>,
    pub regression: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub layout: PageLayout,
    pub fixations: Vec<Fixation>,
    pub truth: Vec<GroundTruth>,
}

impl SynthOutput {
    pub fn regression_count(&self) -> usize {
        self.truth.iter().filter(|t| t.regression).count()
    }
}

enum Target {
    Word { index: u32, new_sequence: bool, regression: bool },
    OffText,
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    let spec = &config.layout;
    let plan = &config.plan;
    let n_words = spec.word_count();

    let mut plan_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
    noise_rng.set_stream(1);
    let mut time_rng = ChaCha8Rng::seed_from_u64(config.seed);
    time_rng.set_stream(2);

    let steps = WeightedIndex::new(plan.forward_weights).map_err(|_| SynthError::Weights)?;
    let durations = Normal::new(config.duration_mean_ms, config.duration_sd_ms).expect("validated sd");

    let text_top = spec.top_margin_px;
    let text_bottom = spec.bbox(n_words - 1).y_max;
    let off_text_x = spec.text_right_edge() + plan.off_text_offset_px;

    let mut fixations = Vec::new();
    let mut truth = Vec::new();
    let mut t = 0.0;
    let mut cursor = 0u32;
    let (mut hull_min, mut hull_max) = (0u32, 0u32);
    let mut seq_id = 0usize;
    let mut seq_sizes: Vec<usize> = vec![0];
    let mut target = Some(Target::Word {
        index: 0,
        new_sequence: false,
        regression: false,
    });

    while let Some(next) = target.take() {
        let (cx, cy, word_index, regression) = match next {
            Target::Word {
                index,
                new_sequence,
                regression,
            } => {
                if new_sequence {
                    seq_id += 1;
                    seq_sizes.push(0);
                    hull_min = index;
                    hull_max = index;
                }
                hull_min = hull_min.min(index);
                hull_max = hull_max.max(index);
                cursor = index;
                seq_sizes[seq_id] += 1;
                let (x, y) = spec.bbox(index).center();
                (x, y, Some(index), regression)
            }
            Target::OffText => {
                let y = plan_rng.random_range(text_top..=text_bottom);
                (off_text_x, y, None, false)
            }
        };
        let jx: f64 = noise_rng.sample(StandardNormal);
        let jy: f64 = noise_rng.sample(StandardNormal);
        let duration = durations.sample(&mut time_rng).max(config.min_duration_ms);
        fixations.push(Fixation {
            participant_id: config.participant_id.clone(),
            page_id: config.page_id.clone(),
            t_start_ms: t,
            duration_ms: duration,
            x: cx + config.noise_sigma_px * jx,
            y: cy + config.noise_sigma_px * jy,
        });
        truth.push(GroundTruth {
            fixation: truth.len(),
            word_index,
            sequence: word_index.map(|_| seq_id),
            regression,
        });
        t += duration + config.saccade_ms;

        if fixations.len() >= config.n_fixations {
            break;
        }

        let u: f64 = plan_rng.random();
        let line_start = cursor - cursor % spec.words_per_line;
        let regress_floor = line_start.max(hull_min);
        target = if u < plan.off_text_prob {
            Some(Target::OffText)
        } else if u < plan.off_text_prob + plan.regression_prob && cursor > regress_floor {
            Some(Target::Word {
                index: plan_rng.random_range(regress_floor..cursor),
                new_sequence: false,
                regression: true,
            })
        } else if u < plan.off_text_prob + plan.regression_prob + plan.skip_prob && cursor == hull_max {
            // from behind the hull edge a skip could land one text line down within the region
            let index = cursor + plan_rng.random_range(plan.skip_min..=plan.skip_max);
            (index < n_words).then_some(Target::Word {
                index,
                new_sequence: true,
                regression: false,
            })
        } else {
            let index = cursor + steps.sample(&mut plan_rng) as u32 + 1;
            (index < n_words).then_some(Target::Word {
                index,
                new_sequence: false,
                regression: false,
            })
        };
    }

    for t in &mut truth {
        if t.sequence.is_some_and(|s| seq_sizes[s] < 2) {
            t.sequence = None;
        }
    }
    Ok(SynthOutput {
        layout: spec.build(&config.page_id),
        fixations,
        truth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recovery {
    pub correct: usize,
    pub total: usize,
}

impl Recovery {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Fraction of fixations whose alignment matches the intent: on-text
/// fixations must get their target word, off-text ones no word at all.
pub fn score_alignment(truth: &[GroundTruth], aligned: &[AlignedFixation]) -> Recovery {
    let mut assigned: Vec<Option<u32>> = vec![None; truth.len()];
    for a in aligned {
        if let Some(slot) = assigned.get_mut(a.fixation) {
            *slot = Some(a.word_index);
        }
    }
    let correct = truth
        .iter()
        .filter(|t| assigned.get(t.fixation).copied().flatten() == t.word_index)
        .count();
    Recovery {
        correct,
        total: truth.len(),
    }
}

/// Several simulated participants reading the same page, plus random scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthStudy {
    pub layout: PageLayout,
    pub fixations: Vec<Fixation>,
    pub truth: Vec<(String, GroundTruth)>,
    pub scores: Vec<Scores>,
}

pub fn generate_study(base: &SynthConfig, participants: usize) -> Result<SynthStudy, SynthError> {
    let mut fixations = Vec::new();
    let mut truth = Vec::new();
    let mut layout = None;
    for i in 0..participants {
        let config = SynthConfig {
            participant_id: format!("s{i:03}"),
            seed: base.seed.wrapping_add(i as u64),
            ..base.clone()
        };
        let out = generate(&config)?;
        truth.extend(out.truth.into_iter().map(|t| (config.participant_id.clone(), t)));
        fixations.extend(out.fixations);
        layout.get_or_insert(out.layout);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
    rng.set_stream(3);
    let scores = (0..participants)
        .map(|i| {
            let mut score = || f64::from(rng.random_range(0u32..=10));
            Scores {
                participant_id: format!("s{i:03}"),
                mcq_pre: score(),
                mcq_post: score(),
                essay_pre: score(),
                essay_post: score(),
            }
        })
        .collect();
    Ok(SynthStudy {
        layout: layout.unwrap_or_else(|| base.layout.build(&base.page_id)),
        fixations,
        truth,
        scores,
    })
}
