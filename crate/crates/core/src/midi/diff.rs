//! Comparison of a candidate transcription against a reference performance
//! using timing and dynamic-variation thresholds.

use super::NoteEvent;
use crate::real::{real, Real};
use serde::{Deserialize, Serialize};

/// A matched candidate/reference note pair (indices into the input lists).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedNote<S> {
    pub reference: usize,
    pub candidate: usize,
    /// Candidate onset minus reference onset, milliseconds.
    pub onset_delta_ms: S,
    /// Candidate velocity divided by reference velocity.
    pub velocity_ratio: S,
}

/// Outcome of comparing two note lists. Every note lands in exactly one
/// category: matched (possibly violating a threshold) or unmatched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptionDiff<S> {
    pub matched: Vec<MatchedNote<S>>,
    pub unmatched_candidate: Vec<usize>,
    pub unmatched_reference: Vec<usize>,
    /// Matched pairs with |onset delta| strictly above the timing tolerance.
    pub timing_violations: usize,
    /// Matched pairs with |velocity ratio − 1| strictly above the dynamic tolerance.
    pub dynamic_violations: usize,
    /// Notes with no same-pitch partner on the other side.
    pub pitch_mismatches: usize,
}

/// Greedily matches candidate notes to reference notes of the same pitch by
/// nearest onset, then counts threshold violations.
///
/// Both inputs must be sorted by onset. Defaults follow the validation
/// thresholds: 30 ms timing tolerance and 10% dynamic tolerance, both
/// exclusive (a delta of exactly 30 ms is not a violation).
pub fn diff_transcription<S: Real>(
    candidate: &[NoteEvent<S>],
    reference: &[NoteEvent<S>],
    timing_tol_ms: S,
    dynamic_tol: S,
) -> TranscriptionDiff<S> {
    let ms = real::<S>(1000.0);

    // Candidate/reference indices per pitch.
    let mut cand_by_pitch: Vec<Vec<usize>> = vec![Vec::new(); 128];
    let mut ref_by_pitch: Vec<Vec<usize>> = vec![Vec::new(); 128];
    for (i, n) in candidate.iter().enumerate() {
        cand_by_pitch[n.pitch as usize].push(i);
    }
    for (i, n) in reference.iter().enumerate() {
        ref_by_pitch[n.pitch as usize].push(i);
    }

    let mut matched = Vec::new();
    let mut cand_used = vec![false; candidate.len()];
    let mut ref_used = vec![false; reference.len()];

    for pitch in 0..128 {
        let cands = &cand_by_pitch[pitch];
        let refs = &ref_by_pitch[pitch];
        if cands.is_empty() || refs.is_empty() {
            continue;
        }
        // All pairs ordered by |onset delta|, ties broken by indices so the
        // result is deterministic.
        let mut pairs: Vec<(S, usize, usize)> = Vec::with_capacity(cands.len() * refs.len());
        for &r in refs {
            for &c in cands {
                let delta = (candidate[c].onset - reference[r].onset).abs();
                pairs.push((delta, r, c));
            }
        }
        pairs.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        for (_, r, c) in pairs {
            if ref_used[r] || cand_used[c] {
                continue;
            }
            ref_used[r] = true;
            cand_used[c] = true;
            matched.push(MatchedNote {
                reference: r,
                candidate: c,
                onset_delta_ms: (candidate[c].onset - reference[r].onset) * ms,
                velocity_ratio: real::<S>(f64::from(candidate[c].velocity))
                    / real::<S>(f64::from(reference[r].velocity)),
            });
        }
    }

    matched.sort_by(|a, b| a.reference.cmp(&b.reference));
    let timing_violations = matched
        .iter()
        .filter(|m| m.onset_delta_ms.abs() > timing_tol_ms)
        .count();
    // Velocities are small integers, so `|c − r| > tol·r` keeps the
    // boundary exact where the ratio form would pick up rounding noise.
    let dynamic_violations = matched
        .iter()
        .filter(|m| {
            let r = real::<S>(f64::from(reference[m.reference].velocity));
            let c = real::<S>(f64::from(candidate[m.candidate].velocity));
            (c - r).abs() > dynamic_tol * r
        })
        .count();

    let unmatched_candidate: Vec<usize> =
        (0..candidate.len()).filter(|&i| !cand_used[i]).collect();
    let unmatched_reference: Vec<usize> =
        (0..reference.len()).filter(|&i| !ref_used[i]).collect();
    let pitch_mismatches = unmatched_candidate.len() + unmatched_reference.len();

    TranscriptionDiff {
        matched,
        unmatched_candidate,
        unmatched_reference,
        timing_violations,
        dynamic_violations,
        pitch_mismatches,
    }
}
