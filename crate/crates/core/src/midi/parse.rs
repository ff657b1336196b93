//! Chunk-level SMF decoding and encoding.
//!
//! Parsing accepts running status; serialization always emits explicit
//! status bytes so output is deterministic.

use super::{EventKind, MidiError, MidiFile, TrackEvent};

const MAX_VLQ: u32 = 0x0FFF_FFFF;

/// Decodes a variable-length quantity starting at `pos`, advancing it.
pub fn decode_vlq(bytes: &[u8], pos: &mut usize) -> Result<u32, MidiError> {
    let mut value: u32 = 0;
    for i in 0..4 {
        let b = *bytes
            .get(*pos)
            .ok_or_else(|| MidiError::TruncatedChunk("VLQ ran past end of data".into()))?;
        *pos += 1;
        value = (value << 7) | u32::from(b & 0x7F);
        if b & 0x80 == 0 {
            return Ok(value);
        }
        if i == 3 {
            break;
        }
    }
    Err(MidiError::InvalidVlq)
}

/// Encodes a value below 2^28 as a variable-length quantity.
pub fn encode_vlq(value: u32) -> Vec<u8> {
    assert!(value <= MAX_VLQ, "VLQ value out of range");
    let mut groups = [0u8; 4];
    let mut n = 0;
    let mut v = value;
    loop {
        groups[n] = (v & 0x7F) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    let mut out = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let mut b = groups[i];
        if i != 0 {
            b |= 0x80;
        }
        out.push(b);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], MidiError> {
        if self.pos + n > self.bytes.len() {
            return Err(MidiError::TruncatedChunk(format!(
                "{what}: needed {n} bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16, MidiError> {
        let s = self.take(2, what)?;
        Ok(u16::from_be_bytes([s[0], s[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32, MidiError> {
        let s = self.take(4, what)?;
        Ok(u32::from_be_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

/// Parses a Standard MIDI File from raw bytes.
pub fn parse_smf(bytes: &[u8]) -> Result<MidiFile, MidiError> {
    let mut r = Reader { bytes, pos: 0 };

    let magic = r
        .take(4, "header tag")
        .map_err(|_| MidiError::MalformedHeader("file shorter than header tag".into()))?;
    if magic != b"MThd" {
        return Err(MidiError::MalformedHeader(format!(
            "expected MThd, found {:02X?}",
            magic
        )));
    }
    let header_len = r
        .u32("header length")
        .map_err(|_| MidiError::MalformedHeader("header length missing".into()))?;
    if header_len != 6 {
        return Err(MidiError::MalformedHeader(format!(
            "header length {header_len}, expected 6"
        )));
    }
    let format = r
        .u16("format")
        .map_err(|_| MidiError::MalformedHeader("format field missing".into()))?;
    if format > 2 {
        return Err(MidiError::MalformedHeader(format!("format {format}")));
    }
    let declared_tracks = r
        .u16("track count")
        .map_err(|_| MidiError::MalformedHeader("track count missing".into()))?;
    let division_raw = r
        .u16("division")
        .map_err(|_| MidiError::MalformedHeader("division missing".into()))?;
    if division_raw & 0x8000 != 0 {
        return Err(MidiError::MalformedHeader(
            "SMPTE division is not supported".into(),
        ));
    }
    if division_raw == 0 {
        return Err(MidiError::MalformedHeader("division must be positive".into()));
    }

    let mut tracks = Vec::with_capacity(declared_tracks as usize);
    while tracks.len() < declared_tracks as usize {
        if r.remaining() == 0 {
            return Err(MidiError::TruncatedChunk(format!(
                "header declares {declared_tracks} tracks, found {}",
                tracks.len()
            )));
        }
        let tag = r.take(4, "chunk tag")?.to_vec();
        let len = r.u32("chunk length")? as usize;
        let body = r.take(len, "chunk body")?;
        if &tag == b"MTrk" {
            tracks.push(parse_track(body)?);
        }
        // Unknown chunk types are skipped per the SMF spec.
    }

    Ok(MidiFile {
        format,
        division: division_raw,
        tracks,
    })
}

fn parse_track(body: &[u8]) -> Result<Vec<TrackEvent>, MidiError> {
    let mut events = Vec::new();
    let mut pos = 0usize;
    let mut running_status: Option<u8> = None;
    let mut saw_eot = false;

    while pos < body.len() {
        if saw_eot {
            return Err(MidiError::InvalidEvent(
                "data after end-of-track event".into(),
            ));
        }
        let delta = decode_vlq(body, &mut pos)?;
        let first = *body
            .get(pos)
            .ok_or_else(|| MidiError::TruncatedChunk("event status missing".into()))?;

        let status = if first & 0x80 != 0 {
            pos += 1;
            if first < 0xF0 {
                running_status = Some(first);
            } else {
                // System messages clear running status.
                running_status = None;
            }
            first
        } else {
            running_status.ok_or_else(|| {
                MidiError::InvalidEvent("running status used before any status byte".into())
            })?
        };

        let kind = match status {
            0xFF => {
                let meta_type = get_data_byte_raw(body, &mut pos, "meta type")?;
                let len = decode_vlq(body, &mut pos)? as usize;
                if pos + len > body.len() {
                    return Err(MidiError::TruncatedChunk("meta event body".into()));
                }
                let data = body[pos..pos + len].to_vec();
                pos += len;
                let kind = EventKind::Meta { meta_type, data };
                if kind.is_end_of_track() {
                    saw_eot = true;
                }
                kind
            }
            0xF0 | 0xF7 => {
                let len = decode_vlq(body, &mut pos)? as usize;
                if pos + len > body.len() {
                    return Err(MidiError::TruncatedChunk("sysex body".into()));
                }
                let data = body[pos..pos + len].to_vec();
                pos += len;
                EventKind::SysEx { status, data }
            }
            s if (0x80..0xF0).contains(&s) => {
                let channel = s & 0x0F;
                match s & 0xF0 {
                    0x80 => EventKind::NoteOff {
                        channel,
                        pitch: get_data_byte(body, &mut pos, "note-off pitch")?,
                        velocity: get_data_byte(body, &mut pos, "note-off velocity")?,
                    },
                    0x90 => EventKind::NoteOn {
                        channel,
                        pitch: get_data_byte(body, &mut pos, "note-on pitch")?,
                        velocity: get_data_byte(body, &mut pos, "note-on velocity")?,
                    },
                    0xA0 => EventKind::PolyAftertouch {
                        channel,
                        pitch: get_data_byte(body, &mut pos, "aftertouch pitch")?,
                        pressure: get_data_byte(body, &mut pos, "aftertouch pressure")?,
                    },
                    0xB0 => EventKind::Controller {
                        channel,
                        controller: get_data_byte(body, &mut pos, "controller number")?,
                        value: get_data_byte(body, &mut pos, "controller value")?,
                    },
                    0xC0 => EventKind::ProgramChange {
                        channel,
                        program: get_data_byte(body, &mut pos, "program number")?,
                    },
                    0xD0 => EventKind::ChannelAftertouch {
                        channel,
                        pressure: get_data_byte(body, &mut pos, "channel pressure")?,
                    },
                    0xE0 => {
                        let lsb = get_data_byte(body, &mut pos, "pitch bend lsb")?;
                        let msb = get_data_byte(body, &mut pos, "pitch bend msb")?;
                        EventKind::PitchBend {
                            channel,
                            value: u16::from(msb) << 7 | u16::from(lsb),
                        }
                    }
                    _ => unreachable!(),
                }
            }
            other => {
                return Err(MidiError::InvalidEvent(format!(
                    "unsupported status byte {other:#04X}"
                )))
            }
        };

        events.push(TrackEvent { delta, kind });
    }

    if !saw_eot {
        return Err(MidiError::TruncatedChunk(
            "track ended without end-of-track meta event".into(),
        ));
    }
    Ok(events)
}

fn get_data_byte(body: &[u8], pos: &mut usize, what: &str) -> Result<u8, MidiError> {
    let b = get_data_byte_raw(body, pos, what)?;
    if b & 0x80 != 0 {
        return Err(MidiError::InvalidEvent(format!(
            "{what}: data byte {b:#04X} has high bit set"
        )));
    }
    Ok(b)
}

fn get_data_byte_raw(body: &[u8], pos: &mut usize, what: &str) -> Result<u8, MidiError> {
    let b = *body
        .get(*pos)
        .ok_or_else(|| MidiError::TruncatedChunk(format!("{what} missing")))?;
    *pos += 1;
    Ok(b)
}

/// Serializes a [`MidiFile`] back to bytes.
///
/// Running status is never emitted. A missing end-of-track event is
/// appended so the output always satisfies the file invariants.
pub fn serialize_smf(file: &MidiFile) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&file.format.to_be_bytes());
    out.extend_from_slice(&(file.tracks.len() as u16).to_be_bytes());
    out.extend_from_slice(&file.division.to_be_bytes());

    for track in &file.tracks {
        let mut body = Vec::new();
        let mut has_eot = false;
        for ev in track {
            body.extend_from_slice(&encode_vlq(ev.delta));
            write_event(&mut body, &ev.kind);
            if ev.kind.is_end_of_track() {
                has_eot = true;
                break;
            }
        }
        if !has_eot {
            body.extend_from_slice(&encode_vlq(0));
            write_event(&mut body, &EventKind::end_of_track());
        }
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
    }
    out
}

fn write_event(out: &mut Vec<u8>, kind: &EventKind) {
    match kind {
        EventKind::NoteOff {
            channel,
            pitch,
            velocity,
        } => out.extend_from_slice(&[0x80 | channel, *pitch, *velocity]),
        EventKind::NoteOn {
            channel,
            pitch,
            velocity,
        } => out.extend_from_slice(&[0x90 | channel, *pitch, *velocity]),
        EventKind::PolyAftertouch {
            channel,
            pitch,
            pressure,
        } => out.extend_from_slice(&[0xA0 | channel, *pitch, *pressure]),
        EventKind::Controller {
            channel,
            controller,
            value,
        } => out.extend_from_slice(&[0xB0 | channel, *controller, *value]),
        EventKind::ProgramChange { channel, program } => {
            out.extend_from_slice(&[0xC0 | channel, *program])
        }
        EventKind::ChannelAftertouch { channel, pressure } => {
            out.extend_from_slice(&[0xD0 | channel, *pressure])
        }
        EventKind::PitchBend { channel, value } => out.extend_from_slice(&[
            0xE0 | channel,
            (value & 0x7F) as u8,
            (value >> 7) as u8,
        ]),
        EventKind::Meta { meta_type, data } => {
            out.push(0xFF);
            out.push(*meta_type);
            out.extend_from_slice(&encode_vlq(data.len() as u32));
            out.extend_from_slice(data);
        }
        EventKind::SysEx { status, data } => {
            out.push(*status);
            out.extend_from_slice(&encode_vlq(data.len() as u32));
            out.extend_from_slice(data);
        }
    }
}
