//! Per-participant reading features over content pages.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::alignment::AlignedFixation;
use crate::ingest::Fixation;
use crate::sequences::{count_regressions, ReadingSequence};

/// How fixations inside a sequence count toward words read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordCountPolicy {
    /// A forward step of `k` words counts `k` (skipped words were covered);
    /// every other admitted fixation counts 1.
    #[default]
    Traversed,
    /// Every reading fixation counts its own word once.
    Fixated,
}

/// Denominator of the per-second rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeBase {
    /// Summed duration of reading fixations.
    #[default]
    Reading,
    /// Summed span from first fixation start to last fixation end per page.
    Wallclock,
}

impl std::fmt::Display for WordCountPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WordCountPolicy::Traversed => "traversed",
            WordCountPolicy::Fixated => "fixated",
        })
    }
}

impl std::fmt::Display for TimeBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TimeBase::Reading => "reading",
            TimeBase::Wallclock => "wallclock",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub word_count: WordCountPolicy,
    pub time_base: TimeBase,
}

/// Fixations and reading sequences of one content page visit.
#[derive(Debug, Clone, Copy)]
pub struct PageReading<'a> {
    pub page_id: &'a str,
    pub fixations: &'a [Fixation],
    pub sequences: &'a [ReadingSequence],
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFeatures {
    pub participant_id: String,
    pub sum_RFix_dur: f64,
    pub avg_RFix_dur_per_page: f64,
    pub avg_n_RFix: f64,
    pub n_CP_visited: f64,
    pub avg_Fix_dur: f64,
    pub dur_per_RSeq: f64,
    pub n_RSeq: f64,
    pub avg_RFix_dur: f64,
    pub n_RFix: f64,
    pub n_Reg: f64,
    pub n_Reg_per_sec: f64,
    pub n_unique_word: f64,
    pub n_words: f64,
    pub words_per_sec: f64,
    pub max_y_of_RFix: f64,
    pub avg_y_of_RFix: f64,
    /// False when the time base was zero and the per-second rates were set to 0.
    #[serde(skip)]
    pub rates_defined: bool,
}

impl SessionFeatures {
    /// Feature column names, in report order.
    pub const NAMES: [&'static str; 16] = [
        "sum_RFix_dur",
        "avg_RFix_dur_per_page",
        "avg_n_RFix",
        "n_CP_visited",
        "avg_Fix_dur",
        "dur_per_RSeq",
        "n_RSeq",
        "avg_RFix_dur",
        "n_RFix",
        "n_Reg",
        "n_Reg_per_sec",
        "n_unique_word",
        "n_words",
        "words_per_sec",
        "max_y_of_RFix",
        "avg_y_of_RFix",
    ];

    pub fn values(&self) -> [f64; 16] {
        [
            self.sum_RFix_dur,
            self.avg_RFix_dur_per_page,
            self.avg_n_RFix,
            self.n_CP_visited,
            self.avg_Fix_dur,
            self.dur_per_RSeq,
            self.n_RSeq,
            self.avg_RFix_dur,
            self.n_RFix,
            self.n_Reg,
            self.n_Reg_per_sec,
            self.n_unique_word,
            self.n_words,
            self.words_per_sec,
            self.max_y_of_RFix,
            self.avg_y_of_RFix,
        ]
    }
}

/// All sequence members in temporal order.
pub fn reading_fixations(seqs: &[ReadingSequence]) -> Vec<AlignedFixation> {
    let mut out: Vec<AlignedFixation> = seqs.iter().flat_map(|s| s.members.iter().cloned()).collect();
    out.sort_by(|a, b| a.t_start_ms.total_cmp(&b.t_start_ms));
    out
}

/// Words read in one sequence: the count (duplicates included) and the
/// distinct word indices covered.
pub fn words_read(seq: &ReadingSequence, policy: WordCountPolicy) -> (usize, BTreeSet<u32>) {
    let mut count = 0;
    let mut covered = BTreeSet::new();
    let mut prev: Option<u32> = None;
    for m in &seq.members {
        let w = m.word_index;
        match (policy, prev) {
            (WordCountPolicy::Traversed, Some(p)) if w > p => {
                count += (w - p) as usize;
                covered.extend(p + 1..=w);
            }
            _ => {
                count += 1;
                covered.insert(w);
            }
        }
        prev = Some(w);
    }
    (count, covered)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn compute_features(participant_id: &str, pages: &[PageReading<'_>], config: &FeatureConfig) -> SessionFeatures {
    let visited: Vec<&PageReading<'_>> = pages.iter().filter(|p| !p.fixations.is_empty()).collect();
    let n_pages = visited.len() as f64;

    let all_fix: Vec<&Fixation> = visited.iter().flat_map(|p| p.fixations.iter()).collect();
    let avg_fix_dur = ratio(all_fix.iter().map(|f| f.duration_ms).sum(), all_fix.len() as f64);

    let mut n_rfix = 0usize;
    let mut sum_rfix_dur = 0.0;
    let mut n_seq = 0usize;
    let mut seq_dur = 0.0;
    let mut n_reg = 0usize;
    let mut n_words = 0usize;
    let mut unique = BTreeSet::new();
    let mut y_sum = 0.0;
    let mut y_max = f64::NEG_INFINITY;
    let mut wallclock_ms = 0.0;

    for page in &visited {
        for seq in page.sequences {
            n_seq += 1;
            seq_dur += seq.duration_ms();
            let (count, covered) = words_read(seq, config.word_count);
            n_words += count;
            unique.extend(covered.into_iter().map(|w| (page.page_id, w)));
            for m in &seq.members {
                n_rfix += 1;
                sum_rfix_dur += m.duration_ms;
                y_sum += m.y;
                y_max = y_max.max(m.y);
            }
        }
        n_reg += count_regressions(page.sequences);
        let start = page.fixations.iter().map(|f| f.t_start_ms).fold(f64::INFINITY, f64::min);
        let end = page.fixations.iter().map(Fixation::end_ms).fold(f64::NEG_INFINITY, f64::max);
        wallclock_ms += end - start;
    }

    let time_s = match config.time_base {
        TimeBase::Reading => sum_rfix_dur,
        TimeBase::Wallclock => wallclock_ms,
    } / 1000.0;
    let rates_defined = time_s > 0.0;
    if !rates_defined && n_rfix > 0 {
        log::warn!("participant {participant_id}: zero reading time, per-second rates set to 0");
    }

    SessionFeatures {
        participant_id: participant_id.to_owned(),
        sum_RFix_dur: sum_rfix_dur,
        avg_RFix_dur_per_page: ratio(sum_rfix_dur, n_pages),
        avg_n_RFix: ratio(n_rfix as f64, n_pages),
        n_CP_visited: n_pages,
        avg_Fix_dur: avg_fix_dur,
        dur_per_RSeq: ratio(seq_dur, n_seq as f64),
        n_RSeq: n_seq as f64,
        avg_RFix_dur: ratio(sum_rfix_dur, n_rfix as f64),
        n_RFix: n_rfix as f64,
        n_Reg: n_reg as f64,
        n_Reg_per_sec: ratio(n_reg as f64, time_s),
        n_unique_word: unique.len() as f64,
        n_words: n_words as f64,
        words_per_sec: ratio(n_words as f64, time_s),
        max_y_of_RFix: if n_rfix > 0 { y_max } else { 0.0 },
        avg_y_of_RFix: ratio(y_sum, n_rfix as f64),
        rates_defined,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{build_sequences, SequenceConfig};

    fn page_fixations(words: &[u32]) -> (Vec<Fixation>, Vec<AlignedFixation>) {
        let fx: Vec<Fixation> = words
            .iter()
            .enumerate()
            .map(|(i, _)| Fixation {
                participant_id: "p".into(),
                page_id: "a".into(),
                t_start_ms: i as f64 * 200.0,
                duration_ms: 200.0,
                x: 0.0,
                y: 100.0 + i as f64,
            })
            .collect();
        let aligned = words
            .iter()
            .enumerate()
            .map(|(i, &w)| AlignedFixation {
                fixation: i,
                t_start_ms: fx[i].t_start_ms,
                duration_ms: 200.0,
                x: 0.0,
                y: fx[i].y,
                word_index: w,
                rank: 0,
                line_id: 0,
                cost: 0,
            })
            .collect();
        (fx, aligned)
    }

    fn features_for(words: &[u32], config: FeatureConfig) -> SessionFeatures {
        let (fx, aligned) = page_fixations(words);
        let seqs = build_sequences(&aligned, &SequenceConfig::default());
        compute_features(
            "p",
            &[PageReading {
                page_id: "a",
                fixations: &fx,
                sequences: &seqs,
            }],
            &config,
        )
    }

    #[test]
    fn three_word_sequence() {
        let f = features_for(&[10, 11, 12], FeatureConfig::default());
        assert_eq!(f.n_RFix, 3.0);
        assert_eq!(f.n_words, 3.0);
        assert_eq!(f.n_unique_word, 3.0);
        assert_eq!(f.sum_RFix_dur, 600.0);
        assert_eq!(f.words_per_sec, 5.0);
        assert_eq!(f.n_RSeq, 1.0);
        assert_eq!(f.dur_per_RSeq, 600.0);
        assert_eq!(f.max_y_of_RFix, 102.0);
        assert_eq!(f.avg_y_of_RFix, 101.0);
        assert!(f.rates_defined);
    }

    #[test]
    fn regression_counts_duplicate_word() {
        let f = features_for(&[10, 11, 12, 11], FeatureConfig::default());
        assert_eq!(f.n_words, 4.0);
        assert_eq!(f.n_unique_word, 3.0);
        assert_eq!(f.n_Reg, 1.0);
        assert_eq!(f.n_Reg_per_sec, 1.0 / 0.8);
    }

    #[test]
    fn skipped_words_depend_on_policy() {
        let traversed = features_for(&[10, 13, 14], FeatureConfig::default());
        assert_eq!(traversed.n_words, 5.0);
        assert_eq!(traversed.n_unique_word, 5.0);
        let fixated = features_for(
            &[10, 13, 14],
            FeatureConfig {
                word_count: WordCountPolicy::Fixated,
                ..FeatureConfig::default()
            },
        );
        assert_eq!(fixated.n_words, 3.0);
        assert_eq!(fixated.n_unique_word, 3.0);
    }

    #[test]
    fn no_sequences_keeps_page_count() {
        // 10 then 30: no sequence survives min length
        let f = features_for(&[10, 30], FeatureConfig::default());
        assert_eq!(f.n_RSeq, 0.0);
        assert_eq!(f.n_RFix, 0.0);
        assert_eq!(f.n_words, 0.0);
        assert_eq!(f.words_per_sec, 0.0);
        assert_eq!(f.max_y_of_RFix, 0.0);
        assert_eq!(f.n_CP_visited, 1.0);
        assert_eq!(f.avg_Fix_dur, 200.0);
        assert!(!f.rates_defined);
    }

    #[test]
    fn empty_pages_are_not_visited() {
        let f = compute_features(
            "p",
            &[PageReading {
                page_id: "a",
                fixations: &[],
                sequences: &[],
            }],
            &FeatureConfig::default(),
        );
        assert_eq!(f.n_CP_visited, 0.0);
        assert!(f.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn wallclock_time_base() {
        // 4 fixations spanning 0..800 ms, but only 3 are reading fixations
        let f = features_for(
            &[10, 11, 12, 40],
            FeatureConfig {
                time_base: TimeBase::Wallclock,
                ..FeatureConfig::default()
            },
        );
        assert_eq!(f.words_per_sec, 3.0 / 0.8);
    }

    #[test]
    fn reading_fixations_in_time_order() {
        assert!(reading_fixations(&[]).is_empty());
        let (_, aligned) = page_fixations(&[1, 2, 3, 20, 21, 22, 23]);
        let seqs = build_sequences(&aligned, &SequenceConfig::default());
        assert_eq!(seqs.len(), 2);
        let r = reading_fixations(&seqs);
        assert_eq!(r.len(), 7);
        assert!(r.windows(2).all(|w| w[0].t_start_ms <= w[1].t_start_ms));
    }

    #[test]
    fn page_sums_are_additive() {
        let (fa, aa) = page_fixations(&[1, 2, 3, 2, 4]);
        let (fb, ab) = page_fixations(&[7, 9, 10, 30, 31]);
        let sa = build_sequences(&aa, &SequenceConfig::default());
        let sb = build_sequences(&ab, &SequenceConfig::default());
        let a = PageReading {
            page_id: "a",
            fixations: &fa,
            sequences: &sa,
        };
        let b = PageReading {
            page_id: "b",
            fixations: &fb,
            sequences: &sb,
        };
        let cfg = FeatureConfig::default();
        let fa_ = compute_features("p", &[a], &cfg);
        let fb_ = compute_features("p", &[b], &cfg);
        let both = compute_features("p", &[a, b], &cfg);
        for (name, (x, (y, z))) in SessionFeatures::NAMES
            .iter()
            .zip(fa_.values().iter().zip(fb_.values().iter().zip(both.values())))
        {
            if ["sum_RFix_dur", "n_RSeq", "n_RFix", "n_Reg", "n_unique_word", "n_words", "n_CP_visited"].contains(name) {
                assert_eq!(x + y, z, "{name}");
            }
        }
        let weighted = (fa_.avg_RFix_dur * fa_.n_RFix + fb_.avg_RFix_dur * fb_.n_RFix) / (fa_.n_RFix + fb_.n_RFix);
        assert!((weighted - both.avg_RFix_dur).abs() < 1e-9);
    }
}
