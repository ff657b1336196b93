//! Note-event extraction with piecewise tempo integration, plus pitch and
//! velocity histograms over note corpora.

use super::{EventKind, MidiError, MidiFile, NoteEvent};
use crate::real::{real, Real};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Default tempo when a file declares none: 500 000 µs per quarter note.
pub const DEFAULT_TEMPO_USPQ: u32 = 500_000;

/// Ordered tempo changes as (absolute tick, microseconds per quarter note).
///
/// Ticks are strictly increasing and an entry at tick 0 is always present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TempoMap {
    pub division: u16,
    pub changes: Vec<(u64, u32)>,
}

impl TempoMap {
    pub fn new(division: u16, mut changes: Vec<(u64, u32)>) -> Self {
        changes.retain(|&(_, uspq)| uspq > 0);
        changes.sort_by_key(|&(tick, _)| tick);
        changes.dedup_by_key(|&mut (tick, _)| tick);
        if changes.first().map(|&(t, _)| t) != Some(0) {
            changes.insert(0, (0, DEFAULT_TEMPO_USPQ));
        }
        TempoMap { division, changes }
    }

    /// Converts an absolute tick to seconds by integrating the tempo
    /// segments. Integration runs at f64 and is narrowed at the end.
    pub fn tick_to_seconds<S: Real>(&self, tick: u64) -> S {
        let div = f64::from(self.division);
        let mut seconds = 0.0f64;
        for (i, &(start, uspq)) in self.changes.iter().enumerate() {
            if start >= tick {
                break;
            }
            let end = self
                .changes
                .get(i + 1)
                .map(|&(t, _)| t.min(tick))
                .unwrap_or(tick);
            let ticks = (end - start) as f64;
            seconds += ticks * f64::from(uspq) / (div * 1e6);
        }
        real(seconds)
    }
}

/// Non-fatal conditions found while pairing note-on/note-off events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoteWarning {
    /// Note-off without a sounding note; the event was dropped.
    UnmatchedNoteOff { track: usize, tick: u64, channel: u8, pitch: u8 },
    /// Note-on still sounding at end of track; closed at the track end.
    DanglingNoteOn { track: usize, tick: u64, channel: u8, pitch: u8 },
    /// On/off pair at the same tick; the zero-length note was dropped.
    ZeroLengthNote { track: usize, tick: u64, channel: u8, pitch: u8 },
}

/// Result of [`to_note_events`]: notes sorted by onset, the tempo map used
/// for conversion, and any pairing warnings.
#[derive(Debug, Clone)]
pub struct NoteExtraction<S> {
    pub notes: Vec<NoteEvent<S>>,
    pub tempo_map: TempoMap,
    pub warnings: Vec<NoteWarning>,
}

/// Extracts timed note events from a parsed file.
///
/// Note-on with velocity 0 closes the matching sounding note. A second
/// note-on for an already-sounding pitch closes the previous note at the
/// new onset (keys cannot re-strike while held). Onsets and offsets are
/// converted through the piecewise tempo integral independently.
pub fn to_note_events<S: Real>(file: &MidiFile) -> Result<NoteExtraction<S>, MidiError> {
    if file.division == 0 {
        return Err(MidiError::MalformedHeader("division must be positive".into()));
    }

    // Tempo events from all tracks contribute to one global map.
    let mut tempo_changes = Vec::new();
    for track in &file.tracks {
        let mut tick = 0u64;
        for ev in track {
            tick += u64::from(ev.delta);
            if let EventKind::Meta { meta_type: 0x51, data } = &ev.kind {
                if data.len() == 3 {
                    let uspq =
                        u32::from(data[0]) << 16 | u32::from(data[1]) << 8 | u32::from(data[2]);
                    tempo_changes.push((tick, uspq));
                }
            }
        }
    }
    let tempo_map = TempoMap::new(file.division, tempo_changes);

    let mut warnings = Vec::new();
    let mut raw_notes: Vec<(u64, u64, u8, u8, u8)> = Vec::new(); // (on, off, pitch, vel, ch)

    for (track_idx, track) in file.tracks.iter().enumerate() {
        let mut tick = 0u64;
        let mut sounding: HashMap<(u8, u8), (u64, u8)> = HashMap::new();
        for ev in track {
            tick += u64::from(ev.delta);
            match ev.kind {
                EventKind::NoteOn { channel, pitch, velocity } if velocity > 0 => {
                    if let Some((onset, vel)) = sounding.insert((channel, pitch), (tick, velocity))
                    {
                        // Monophonic-per-pitch: close the old note here.
                        push_note(
                            &mut raw_notes,
                            &mut warnings,
                            track_idx,
                            onset,
                            tick,
                            pitch,
                            vel,
                            channel,
                        );
                    }
                }
                EventKind::NoteOn { channel, pitch, .. }
                | EventKind::NoteOff { channel, pitch, .. } => {
                    match sounding.remove(&(channel, pitch)) {
                        Some((onset, vel)) => push_note(
                            &mut raw_notes,
                            &mut warnings,
                            track_idx,
                            onset,
                            tick,
                            pitch,
                            vel,
                            channel,
                        ),
                        None => warnings.push(NoteWarning::UnmatchedNoteOff {
                            track: track_idx,
                            tick,
                            channel,
                            pitch,
                        }),
                    }
                }
                _ => {}
            }
        }
        // Close anything still sounding at the end-of-track tick.
        let mut dangling: Vec<((u8, u8), (u64, u8))> = sounding.into_iter().collect();
        dangling.sort();
        for ((channel, pitch), (onset, vel)) in dangling {
            warnings.push(NoteWarning::DanglingNoteOn {
                track: track_idx,
                tick: onset,
                channel,
                pitch,
            });
            push_note(
                &mut raw_notes,
                &mut warnings,
                track_idx,
                onset,
                tick,
                pitch,
                vel,
                channel,
            );
        }
    }

    let mut notes: Vec<NoteEvent<S>> = raw_notes
        .into_iter()
        .map(|(on, off, pitch, velocity, channel)| NoteEvent {
            pitch,
            velocity,
            onset: tempo_map.tick_to_seconds(on),
            offset: tempo_map.tick_to_seconds(off),
            channel,
        })
        .collect();
    notes.sort_by(|a, b| {
        a.onset
            .partial_cmp(&b.onset)
            .unwrap()
            .then(a.pitch.cmp(&b.pitch))
            .then(a.channel.cmp(&b.channel))
            .then(a.offset.partial_cmp(&b.offset).unwrap())
    });

    Ok(NoteExtraction {
        notes,
        tempo_map,
        warnings,
    })
}

#[allow(clippy::too_many_arguments)]
fn push_note(
    notes: &mut Vec<(u64, u64, u8, u8, u8)>,
    warnings: &mut Vec<NoteWarning>,
    track: usize,
    onset: u64,
    offset: u64,
    pitch: u8,
    velocity: u8,
    channel: u8,
) {
    if offset <= onset {
        warnings.push(NoteWarning::ZeroLengthNote {
            track,
            tick: onset,
            channel,
            pitch,
        });
        return;
    }
    notes.push((onset, offset, pitch, velocity, channel));
}

/// Pitch and velocity histograms over a note corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histograms {
    pub pitch_counts: Vec<u64>,
    pub velocity_bins: Vec<u64>,
    pub bin_width: u8,
}

/// Counts notes per pitch (128 slots) and per velocity bin.
///
/// Velocity bins have width `bin_width` and cover 0–127 inclusive; bin `b`
/// spans `[b·w, (b+1)·w)`.
///
/// Panics if `bin_width` is zero or does not divide 128.
pub fn histograms<S>(notes: &[NoteEvent<S>], bin_width: u8) -> Histograms {
    assert!(
        bin_width > 0 && 128 % u32::from(bin_width) == 0,
        "velocity bin width must divide 128"
    );
    let mut pitch_counts = vec![0u64; 128];
    let mut velocity_bins = vec![0u64; 128 / bin_width as usize];
    for note in notes {
        pitch_counts[note.pitch as usize] += 1;
        velocity_bins[note.velocity as usize / bin_width as usize] += 1;
    }
    Histograms {
        pitch_counts,
        velocity_bins,
        bin_width,
    }
}
