//! Brute-force oracles shared by the integration tests. None of these call
//! into the code paths they check.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use readseq::alignment::{AlignedFixation, Candidate, CandidateSet, ReadingLine};
use readseq::ingest::{Fixation, PageLayout};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Point-to-rectangle distance, written out per case.
pub fn box_distance(x: f64, y: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let dx = if x < x0 {
        x0 - x
    } else if x > x1 {
        x - x1
    } else {
        0.0
    };
    let dy = if y < y0 {
        y0 - y
    } else if y > y1 {
        y - y1
    } else {
        0.0
    };
    (dx * dx + dy * dy).sqrt()
}

/// Linear scan over every word of the page.
pub fn brute_candidates(x: f64, y: f64, layout: &PageLayout, radius: f64) -> Vec<(u32, f64)> {
    let mut out: Vec<(u32, f64)> = layout
        .words
        .iter()
        .map(|w| {
            (
                w.word_index,
                box_distance(x, y, w.bbox.x_min, w.bbox.y_min, w.bbox.x_max, w.bbox.y_max),
            )
        })
        .filter(|&(_, d)| d <= radius)
        .collect();
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

/// Path cost with the difference-form transition term.
pub fn path_cost(words: &[u32], ranks: &[usize]) -> i128 {
    let emission: i128 = ranks.iter().map(|&r| (r * r) as i128).sum();
    let transition: i128 = words
        .windows(2)
        .map(|w| {
            let d = 1 - (i128::from(w[1]) - i128::from(w[0]));
            d * d
        })
        .sum();
    emission + transition
}

/// Every path through the candidate lists; returns the minimum cost and all
/// rank vectors achieving it.
pub fn brute_viterbi(steps: &[Vec<u32>]) -> (i128, Vec<Vec<usize>>) {
    let mut best = i128::MAX;
    let mut argmin = Vec::new();
    let mut ranks = vec![0usize; steps.len()];
    loop {
        let words: Vec<u32> = ranks.iter().zip(steps).map(|(&r, s)| s[r]).collect();
        let c = path_cost(&words, &ranks);
        if c < best {
            best = c;
            argmin.clear();
        }
        if c == best {
            argmin.push(ranks.clone());
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == steps.len() {
                return (best, argmin);
            }
            ranks[i] += 1;
            if ranks[i] < steps[i].len() {
                break;
            }
            ranks[i] = 0;
            i += 1;
        }
    }
}

/// A random reading line: up to `max_len` fixations, each with 1..=`max_cands`
/// distinct candidate words drawn around a drifting position.
pub fn random_line(rng: &mut ChaCha8Rng, max_len: usize, max_cands: usize) -> Vec<Vec<u32>> {
    let len = rng.random_range(1..=max_len);
    let mut base: i64 = rng.random_range(0..200);
    (0..len)
        .map(|_| {
            base += rng.random_range(-2..=4);
            base = base.max(5);
            let n = rng.random_range(1..=max_cands);
            let mut words: Vec<u32> = Vec::new();
            while words.len() < n {
                let w = (base + rng.random_range(-5..=5)) as u32;
                if !words.contains(&w) {
                    words.push(w);
                }
            }
            words
        })
        .collect()
}

/// Wraps candidate lists as a reading line with matching dummy fixations.
pub fn as_reading_line(steps: &[Vec<u32>]) -> (ReadingLine, Vec<Fixation>) {
    let fixations = (0..steps.len())
        .map(|i| Fixation {
            participant_id: "p".into(),
            page_id: "page".into(),
            t_start_ms: i as f64 * 250.0,
            duration_ms: 200.0,
            x: 100.0 + i as f64 * 40.0,
            y: 100.0,
        })
        .collect();
    let members = steps
        .iter()
        .enumerate()
        .map(|(i, words)| CandidateSet {
            fixation: i,
            candidates: words
                .iter()
                .enumerate()
                .map(|(r, &w)| Candidate {
                    word_index: w,
                    distance_px: r as f64,
                })
                .collect(),
        })
        .collect();
    (ReadingLine { line_id: 0, members }, fixations)
}

/// Aligned fixations with the given word indices, 250 ms apart.
pub fn aligned_stream(words: &[u32]) -> Vec<AlignedFixation> {
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

/// Random walk over word indices with forward steps, regressions and jumps.
pub fn random_word_walk(rng: &mut ChaCha8Rng, len: usize) -> Vec<u32> {
    let mut w: i64 = rng.random_range(0..50);
    (0..len)
        .map(|_| {
            let step = match rng.random_range(0..10) {
                0..=5 => rng.random_range(0..=4),
                6..=7 => rng.random_range(-8..=-1),
                8 => rng.random_range(5..=12),
                _ => rng.random_range(-30..=30),
            };
            w = (w + step).max(0);
            w as u32
        })
        .collect()
}

/// Independent greedy re-scan of the sequence rules: (start, end) positions
/// of maximal runs in `words`, before any length filter.
pub fn rescan_runs(words: &[u32]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    if words.is_empty() {
        return runs;
    }
    let (mut start, mut lo, mut hi) = (0, words[0], words[0]);
    for i in 1..words.len() {
        let (prev, cur) = (words[i - 1], words[i]);
        let forward = prev <= cur && cur <= prev + 4;
        let inside = lo <= cur && cur <= hi;
        if forward || inside {
            lo = lo.min(cur);
            hi = hi.max(cur);
        } else {
            runs.push((start, i));
            start = i;
            lo = cur;
            hi = cur;
        }
    }
    runs.push((start, words.len()));
    runs
}

/// Midrank of each value by counting, O(n²).
pub fn count_midranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let less = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided permutation p-value of the Mann-Whitney statistic, by visiting
/// every assignment of `a.len()` pooled observations to the first group.
pub fn brute_mwu_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let doubled: Vec<i64> = count_midranks(&pooled).iter().map(|r| (r * 2.0) as i64).collect();
    let n = pooled.len() as i64;
    let k = a.len();
    let center = k as i64 * (n + 1);
    let observed: i64 = doubled[..k].iter().sum();
    let dev = (observed - center).abs();

    // histogram of the rank sum over every subset of size k
    fn visit(doubled: &[i64], k: usize, start: usize, sum: i64, counts: &mut HashMap<i64, u64>) {
        if k == 0 {
            *counts.entry(sum).or_default() += 1;
            return;
        }
        for i in start..=doubled.len() - k {
            visit(doubled, k - 1, i + 1, sum + doubled[i], counts);
        }
    }
    let mut counts = HashMap::new();
    visit(&doubled, k, 0, 0, &mut counts);
    let total: u64 = counts.values().sum();
    let hits: u64 = counts.iter().filter(|(s, _)| (**s - center).abs() >= dev).map(|(_, c)| c).sum();
    hits as f64 / total as f64
}

/// Mann-Whitney U of `a` by pair counting.
pub fn pair_count_u(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| (x, y)))
        .map(|(x, y)| {
            if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            }
        })
        .sum()
}

/// Random sample, continuous or with many ties.
pub fn random_sample(rng: &mut ChaCha8Rng, n: usize, tied: bool, shift: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if tied {
                f64::from(rng.random_range(0..6u32)) + shift.round()
            } else {
                rng.random::<f64>() * 10.0 + shift
            }
        })
        .collect()
}
