//! Per-session analysis: content filter, alignment, sequences, features.

use rayon::prelude::*;
use serde::Serialize;

use crate::alignment::{align_page, PageAlignment, TransitionForm};
use crate::features::{compute_features, FeatureConfig, PageReading, SessionFeatures};
use crate::geometry::RegionRadii;
use crate::ingest::{filter_content_pages, PageVisit, Session};
use crate::sequences::{build_sequences, ReadingSequence, SequenceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub radii: RegionRadii,
    pub transition: TransitionForm,
    pub sequences: SequenceConfig,
    pub features: FeatureConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageAnalysis {
    pub visit: PageVisit,
    pub alignment: PageAlignment,
    pub sequences: Vec<ReadingSequence>,
}

impl PageAnalysis {
    pub fn page_id(&self) -> &str {
        &self.visit.layout.page_id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionAnalysis {
    pub participant_id: String,
    pub pages: Vec<PageAnalysis>,
    pub features: SessionFeatures,
    pub dropped_pages: usize,
    pub dropped_fixations: usize,
}

pub fn analyze_page(visit: PageVisit, config: &AnalysisConfig) -> PageAnalysis {
    let alignment = align_page(&visit.fixations, &visit.layout, &config.radii, config.transition);
    let sequences = build_sequences(&alignment.aligned, &config.sequences);
    PageAnalysis {
        visit,
        alignment,
        sequences,
    }
}

pub fn analyze_session(session: Session, config: &AnalysisConfig) -> SessionAnalysis {
    let filtered = filter_content_pages(session);
    let participant_id = filtered.session.participant_id;
    let pages: Vec<PageAnalysis> = filtered
        .session
        .pages
        .into_iter()
        .map(|visit| analyze_page(visit, config))
        .collect();
    let readings: Vec<PageReading<'_>> = pages
        .iter()
        .map(|p| PageReading {
            page_id: p.page_id(),
            fixations: &p.visit.fixations,
            sequences: &p.sequences,
        })
        .collect();
    let features = compute_features(&participant_id, &readings, &config.features);
    SessionAnalysis {
        participant_id,
        pages,
        features,
        dropped_pages: filtered.dropped_pages,
        dropped_fixations: filtered.dropped_fixations,
    }
}

/// Analyzes sessions in parallel on at most `threads` workers (0 = rayon's
/// default). Output order matches input order.
pub fn analyze_sessions(sessions: Vec<Session>, config: &AnalysisConfig, threads: usize) -> Vec<SessionAnalysis> {
    let run = || {
        sessions
            .into_par_iter()
            .map(|s| analyze_session(s, config))
            .collect::<Vec<_>>()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(run),
        Err(e) => {
            log::warn!("could not build thread pool ({e}), using the global pool");
            run()
        }
    }
}
