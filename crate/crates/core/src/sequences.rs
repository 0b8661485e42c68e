//! Reading sequences from word-assigned fixations.
//!
//! A fixation extends the open sequence when it lands at most
//! [`MAX_FORWARD_STEP`] words after the previously admitted fixation, or
//! anywhere inside the span of words the sequence has already covered.
//! Landing inside the span *before* the previous word is a regression.

use serde::{Deserialize, Serialize};

use crate::alignment::AlignedFixation;

/// Largest forward jump, in words, that keeps a sequence going.
pub const MAX_FORWARD_STEP: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceConfig {
    /// Sequences with fewer member fixations are discarded.
    pub min_fixations: usize,
    /// Sequences covering fewer distinct words are discarded.
    pub min_distinct_words: usize,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            min_fixations: 2,
            min_distinct_words: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regression {
    /// Position of the regressing fixation in the page stream.
    pub fixation: usize,
    pub from_index: u32,
    pub to_index: u32,
}

/// Why a fixation was let into a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    /// At most four words past the previous admitted fixation.
    Forward,
    /// Inside the covered span, at or after the previous word.
    Reread,
    /// Inside the covered span, before the previous word.
    Regression,
}

/// Applies the admission rules to a candidate word given the previous
/// admitted word and the covered span `[min, max]`.
pub fn admit(prev: u32, min: u32, max: u32, next: u32) -> Option<Admission> {
    if next >= prev && next - prev <= MAX_FORWARD_STEP {
        Some(Admission::Forward)
    } else if (min..=max).contains(&next) {
        Some(if next < prev {
            Admission::Regression
        } else {
            Admission::Reread
        })
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadingSequence {
    pub members: Vec<AlignedFixation>,
    pub min_index: u32,
    pub max_index: u32,
    pub regressions: Vec<Regression>,
    pub start_ms: f64,
    pub end_ms: f64,
}

impl ReadingSequence {
    fn open(first: AlignedFixation) -> Self {
        Self {
            min_index: first.word_index,
            max_index: first.word_index,
            start_ms: first.t_start_ms,
            end_ms: first.end_ms(),
            regressions: Vec::new(),
            members: vec![first],
        }
    }

    fn last_word(&self) -> u32 {
        self.members.last().expect("sequences are never empty").word_index
    }

    fn try_extend(&mut self, f: &AlignedFixation) -> bool {
        let prev = self.last_word();
        let Some(admission) = admit(prev, self.min_index, self.max_index, f.word_index) else {
            return false;
        };
        if admission == Admission::Regression {
            self.regressions.push(Regression {
                fixation: f.fixation,
                from_index: prev,
                to_index: f.word_index,
            });
        }
        self.min_index = self.min_index.min(f.word_index);
        self.max_index = self.max_index.max(f.word_index);
        self.end_ms = self.end_ms.max(f.end_ms());
        self.members.push(f.clone());
        true
    }

    pub fn duration_ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }

    pub fn distinct_words(&self) -> usize {
        let mut words: Vec<u32> = self.members.iter().map(|m| m.word_index).collect();
        words.sort_unstable();
        words.dedup();
        words.len()
    }

    fn long_enough(&self, config: &SequenceConfig) -> bool {
        self.members.len() >= config.min_fixations && self.distinct_words() >= config.min_distinct_words
    }
}

/// Greedy temporal scan over one page's aligned fixations.
pub fn build_sequences(aligned: &[AlignedFixation], config: &SequenceConfig) -> Vec<ReadingSequence> {
    let mut out = Vec::new();
    let mut open: Option<ReadingSequence> = None;
    for f in aligned {
        if let Some(seq) = open.as_mut() {
            if seq.try_extend(f) {
                continue;
            }
        }
        if let Some(done) = open.replace(ReadingSequence::open(f.clone())) {
            if done.long_enough(config) {
                out.push(done);
            }
        }
    }
    if let Some(done) = open {
        if done.long_enough(config) {
            out.push(done);
        }
    }
    out
}

pub fn count_regressions(seqs: &[ReadingSequence]) -> usize {
    seqs.iter().map(|s| s.regressions.len()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn stream(words: &[u32]) -> Vec<AlignedFixation> {
        words
            .iter()
            .enumerate()
            .map(|(i, &w)| AlignedFixation {
                fixation: i,
                t_start_ms: i as f64 * 250.0,
                duration_ms: 200.0,
                x: 0.0,
                y: 0.0,
                word_index: w,
                rank: 0,
                line_id: 0,
                cost: 0,
            })
            .collect()
    }

    fn indices(seq: &ReadingSequence) -> Vec<u32> {
        seq.members.iter().map(|m| m.word_index).collect()
    }

    #[test]
    fn monotone_run_is_one_sequence() {
        let seqs = build_sequences(&stream(&[10, 11, 12, 13]), &SequenceConfig::default());
        assert_eq!(seqs.len(), 1);
        assert_eq!(count_regressions(&seqs), 0);
        assert_eq!((seqs[0].min_index, seqs[0].max_index), (10, 13));
        assert_eq!(seqs[0].start_ms, 0.0);
        assert_eq!(seqs[0].end_ms, 950.0);
    }

    #[test]
    fn gap_of_five_breaks() {
        let config = SequenceConfig {
            min_fixations: 1,
            min_distinct_words: 1,
        };
        let seqs = build_sequences(&stream(&[10, 14, 19]), &config);
        assert_eq!(seqs.len(), 2);
        assert_eq!(indices(&seqs[0]), vec![10, 14]);
        assert_eq!(indices(&seqs[1]), vec![19]);
        // with defaults the singleton is dropped
        assert_eq!(build_sequences(&stream(&[10, 14, 19]), &SequenceConfig::default()).len(), 1);
    }

    #[test]
    fn regression_inside_span() {
        let seqs = build_sequences(&stream(&[10, 12, 15, 11]), &SequenceConfig::default());
        assert_eq!(seqs.len(), 1);
        assert_eq!(
            seqs[0].regressions,
            vec![Regression {
                fixation: 3,
                from_index: 15,
                to_index: 11
            }]
        );
    }

    #[test]
    fn regression_counting() {
        assert_eq!(count_regressions(&[]), 0);
        let seqs = build_sequences(&stream(&[5, 6, 7, 6, 8, 7]), &SequenceConfig::default());
        assert_eq!(count_regressions(&seqs), 2);
        let froms: Vec<(u32, u32)> = seqs[0].regressions.iter().map(|r| (r.from_index, r.to_index)).collect();
        assert_eq!(froms, vec![(7, 6), (8, 7)]);
    }

    #[test]
    fn forward_reread_is_not_a_regression() {
        // 20 -> 12 regresses, 12 -> 18 is a forward move inside the span (gap 6)
        let seqs = build_sequences(&stream(&[10, 14, 18, 20, 12, 18]), &SequenceConfig::default());
        assert_eq!(seqs.len(), 1);
        assert_eq!(count_regressions(&seqs), 1);
        assert_eq!(admit(12, 10, 20, 18), Some(Admission::Reread));
    }

    #[test]
    fn refixating_one_word_is_not_enough() {
        let seqs = build_sequences(&stream(&[7, 7, 7]), &SequenceConfig::default());
        assert!(seqs.is_empty());
        let lenient = SequenceConfig {
            min_fixations: 2,
            min_distinct_words: 1,
        };
        assert_eq!(build_sequences(&stream(&[7, 7, 7]), &lenient).len(), 1);
    }

    #[test]
    fn backwards_outside_span_starts_new_sequence() {
        let seqs = build_sequences(&stream(&[10, 11, 12, 3, 4, 5]), &SequenceConfig::default());
        assert_eq!(seqs.len(), 2);
        assert_eq!(count_regressions(&seqs), 0);
    }
}
