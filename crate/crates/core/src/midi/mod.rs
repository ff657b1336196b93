//! Standard MIDI File handling: chunk parsing, note-event extraction with
//! tempo integration, corpus histograms, and transcription comparison
//! against reference performances.

mod diff;
mod events;
mod parse;

pub use diff::{diff_transcription, MatchedNote, TranscriptionDiff};
pub use events::{
    histograms, to_note_events, Histograms, NoteExtraction, NoteWarning, TempoMap,
    DEFAULT_TEMPO_USPQ,
};
pub use parse::{decode_vlq, encode_vlq, parse_smf, serialize_smf};

use crate::real::Real;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while decoding or interpreting Standard MIDI Files.
#[derive(Debug, Error)]
pub enum MidiError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated chunk: {0}")]
    TruncatedChunk(String),
    #[error("variable-length quantity longer than 4 bytes")]
    InvalidVlq,
    #[error("invalid event: {0}")]
    InvalidEvent(String),
}

/// A decoded Standard MIDI File.
///
/// `division` is ticks per quarter note and is always positive; SMPTE
/// divisions are rejected at parse time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidiFile {
    pub format: u16,
    pub division: u16,
    pub tracks: Vec<Vec<TrackEvent>>,
}

/// One track event: a delta time in ticks plus the event payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackEvent {
    pub delta: u32,
    pub kind: EventKind,
}

/// Decoded event payloads. Meta and SysEx bodies are preserved opaquely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    NoteOff { channel: u8, pitch: u8, velocity: u8 },
    NoteOn { channel: u8, pitch: u8, velocity: u8 },
    PolyAftertouch { channel: u8, pitch: u8, pressure: u8 },
    Controller { channel: u8, controller: u8, value: u8 },
    ProgramChange { channel: u8, program: u8 },
    ChannelAftertouch { channel: u8, pressure: u8 },
    PitchBend { channel: u8, value: u16 },
    Meta { meta_type: u8, data: Vec<u8> },
    SysEx { status: u8, data: Vec<u8> },
}

impl EventKind {
    pub fn is_end_of_track(&self) -> bool {
        matches!(self, EventKind::Meta { meta_type: 0x2F, .. })
    }

    /// A set-tempo meta event in microseconds per quarter note.
    pub fn set_tempo(uspq: u32) -> Self {
        EventKind::Meta {
            meta_type: 0x51,
            data: vec![(uspq >> 16) as u8, (uspq >> 8) as u8, uspq as u8],
        }
    }

    pub fn end_of_track() -> Self {
        EventKind::Meta {
            meta_type: 0x2F,
            data: Vec::new(),
        }
    }
}

/// A timed, pitched note with velocity: the atomic unit of MIDI content.
/// Onset and offset are in seconds; `offset > onset` always holds for
/// notes produced by [`to_note_events`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent<S> {
    pub pitch: u8,
    pub velocity: u8,
    pub onset: S,
    pub offset: S,
    pub channel: u8,
}

impl<S: Real> NoteEvent<S> {
    pub fn duration(&self) -> S {
        self.offset - self.onset
    }
}
