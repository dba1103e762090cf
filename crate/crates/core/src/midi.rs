//! Standard MIDI File codec: just enough of SMF 1.0 to ingest melody files
//! and export generated sequences.
//!
//! Parsing extracts paired note events per track (note-on velocity 0 counts
//! as note-off, running status honored, unknown meta/sysex skipped) and never
//! reads past a declared chunk length. Writing emits a minimal format-0 file
//! at division 480 with one tempo event.

use thiserror::Error;

use crate::encoding::{GridNote, NoteSequence, HOLD_SYMBOL, PITCH_LO};

/// Ticks per quarter note in files we write.
pub const WRITE_DIVISION: u16 = 480;

#[derive(Debug, Error, PartialEq)]
pub enum MidiError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("chunk length exceeds remaining bytes")]
    TruncatedChunk,
    #[error("SMPTE or zero division {0:#06x} not supported")]
    UnsupportedDivision(u16),
    #[error("SMF format {0} not supported (only 0 and 1)")]
    UnsupportedFormat(u16),
    #[error("track {index} out of range ({count} tracks)")]
    TrackOutOfRange { index: usize, count: usize },
    #[error("malformed track data: {0}")]
    MalformedTrack(String),
}

/// One note with tick-resolution timing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoteEvent {
    pub onset_tick: u64,
    pub duration_ticks: u64,
    pub pitch: u8,
    pub velocity: u8,
}

/// Parsed file: format, ticks-per-quarter division, and note events per track.
#[derive(Debug, Clone, PartialEq)]
pub struct SmfDocument {
    pub format: u16,
    pub division: u16,
    pub tracks: Vec<Vec<NoteEvent>>,
    pub warnings: Vec<String>,
}

/// Encodes a variable-length quantity (at most 28 bits).
pub fn encode_vlq(value: u32, out: &mut Vec<u8>) {
    debug_assert!(value <= 0x0FFF_FFFF);
    let mut buf = [0u8; 4];
    let mut n = value;
    let mut i = 3;
    buf[3] = (n & 0x7F) as u8;
    n >>= 7;
    while n > 0 {
        i -= 1;
        buf[i] = (n & 0x7F) as u8 | 0x80;
        n >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}

/// Decodes a variable-length quantity at `pos`, advancing it.
pub fn decode_vlq(bytes: &[u8], pos: &mut usize) -> Result<u32, MidiError> {
    let mut value: u32 = 0;
    for _ in 0..4 {
        let b = *bytes
            .get(*pos)
            .ok_or_else(|| MidiError::MalformedTrack("truncated delta time".into()))?;
        *pos += 1;
        value = (value << 7) | (b & 0x7F) as u32;
        if b & 0x80 == 0 {
            return Ok(value);
        }
    }
    Err(MidiError::MalformedTrack(
        "variable-length quantity longer than 4 bytes".into(),
    ))
}

fn read_u32_be(bytes: &[u8], pos: usize) -> Option<u32> {
    bytes
        .get(pos..pos + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn read_u16_be(bytes: &[u8], pos: usize) -> Option<u16> {
    bytes.get(pos..pos + 2).map(|b| u16::from_be_bytes([b[0], b[1]]))
}

/// Parses an SMF byte buffer into per-track note events.
pub fn parse_smf(bytes: &[u8]) -> Result<SmfDocument, MidiError> {
    if bytes.len() < 14 || &bytes[0..4] != b"MThd" {
        return Err(MidiError::MalformedHeader("missing MThd magic".into()));
    }
    let header_len = read_u32_be(bytes, 4).ok_or(MidiError::TruncatedChunk)?;
    if header_len != 6 {
        return Err(MidiError::MalformedHeader(format!(
            "header length {} (expected 6)",
            header_len
        )));
    }
    let format = read_u16_be(bytes, 8).ok_or(MidiError::TruncatedChunk)?;
    if format > 1 {
        return Err(MidiError::UnsupportedFormat(format));
    }
    let declared_tracks = read_u16_be(bytes, 10).ok_or(MidiError::TruncatedChunk)?;
    let division = read_u16_be(bytes, 12).ok_or(MidiError::TruncatedChunk)?;
    if division == 0 || division & 0x8000 != 0 {
        return Err(MidiError::UnsupportedDivision(division));
    }

    let mut tracks = Vec::new();
    let mut warnings = Vec::new();
    let mut pos = 14usize;
    while pos + 8 <= bytes.len() {
        let chunk_type = &bytes[pos..pos + 4];
        let chunk_len = read_u32_be(bytes, pos + 4).unwrap() as usize;
        pos += 8;
        if chunk_len > bytes.len() - pos {
            return Err(MidiError::TruncatedChunk);
        }
        let chunk = &bytes[pos..pos + chunk_len];
        pos += chunk_len;
        if chunk_type == b"MTrk" {
            let (events, mut track_warnings) = parse_track(chunk)?;
            tracks.push(events);
            warnings.append(&mut track_warnings);
        }
        // Alien chunk types are skipped.
    }
    if pos < bytes.len() {
        return Err(MidiError::TruncatedChunk);
    }
    if tracks.len() != declared_tracks as usize {
        warnings.push(format!(
            "header declares {} tracks, found {}",
            declared_tracks,
            tracks.len()
        ));
    }
    Ok(SmfDocument {
        format,
        division,
        tracks,
        warnings,
    })
}

fn parse_track(chunk: &[u8]) -> Result<(Vec<NoteEvent>, Vec<String>), MidiError> {
    let mut events = Vec::new();
    let mut warnings = Vec::new();
    // (channel, key) -> (onset_tick, velocity)
    let mut open: [Option<(u64, u8)>; 2048] = [None; 2048];
    let mut tick: u64 = 0;
    let mut running_status: Option<u8> = None;
    let mut pos = 0usize;

    let data_byte = |pos: &mut usize| -> Result<u8, MidiError> {
        let b = *chunk
            .get(*pos)
            .ok_or_else(|| MidiError::MalformedTrack("truncated event data".into()))?;
        *pos += 1;
        if b & 0x80 != 0 {
            return Err(MidiError::MalformedTrack(format!(
                "expected data byte, found {:#04x}",
                b
            )));
        }
        Ok(b)
    };

    let close_note = |events: &mut Vec<NoteEvent>,
                          open: &mut [Option<(u64, u8)>],
                          channel: u8,
                          key: u8,
                          end_tick: u64| {
        let slot = channel as usize * 128 + key as usize;
        if let Some((onset, velocity)) = open[slot].take() {
            if end_tick > onset {
                events.push(NoteEvent {
                    onset_tick: onset,
                    duration_ticks: end_tick - onset,
                    pitch: key,
                    velocity,
                });
            }
        }
    };

    while pos < chunk.len() {
        tick += decode_vlq(chunk, &mut pos)? as u64;
        let first = *chunk
            .get(pos)
            .ok_or_else(|| MidiError::MalformedTrack("truncated event".into()))?;
        let status = if first & 0x80 != 0 {
            pos += 1;
            first
        } else {
            running_status.ok_or_else(|| {
                MidiError::MalformedTrack("data byte with no running status".into())
            })?
        };

        match status & 0xF0 {
            0x80 => {
                running_status = Some(status);
                let key = data_byte(&mut pos)?;
                let _vel = data_byte(&mut pos)?;
                close_note(&mut events, &mut open, status & 0x0F, key, tick);
            }
            0x90 => {
                running_status = Some(status);
                let key = data_byte(&mut pos)?;
                let vel = data_byte(&mut pos)?;
                let channel = status & 0x0F;
                if vel == 0 {
                    close_note(&mut events, &mut open, channel, key, tick);
                } else {
                    let slot = channel as usize * 128 + key as usize;
                    if open[slot].is_some() {
                        // Re-attack: close the sounding note at this tick.
                        close_note(&mut events, &mut open, channel, key, tick);
                    }
                    open[slot] = Some((tick, vel));
                }
            }
            0xA0 | 0xB0 | 0xE0 => {
                running_status = Some(status);
                data_byte(&mut pos)?;
                data_byte(&mut pos)?;
            }
            0xC0 | 0xD0 => {
                running_status = Some(status);
                data_byte(&mut pos)?;
            }
            0xF0 => {
                running_status = None;
                match status {
                    0xFF => {
                        let meta_type = *chunk.get(pos).ok_or_else(|| {
                            MidiError::MalformedTrack("truncated meta event".into())
                        })?;
                        pos += 1;
                        let len = decode_vlq(chunk, &mut pos)? as usize;
                        if len > chunk.len() - pos {
                            return Err(MidiError::MalformedTrack(
                                "meta event length past end of track".into(),
                            ));
                        }
                        pos += len;
                        if meta_type == 0x2F {
                            break; // end of track
                        }
                    }
                    0xF0 | 0xF7 => {
                        let len = decode_vlq(chunk, &mut pos)? as usize;
                        if len > chunk.len() - pos {
                            return Err(MidiError::MalformedTrack(
                                "sysex length past end of track".into(),
                            ));
                        }
                        pos += len;
                    }
                    other => {
                        return Err(MidiError::MalformedTrack(format!(
                            "unexpected status byte {:#04x}",
                            other
                        )));
                    }
                }
            }
            _ => unreachable!("status byte has high bit set"),
        }
    }

    for (slot, entry) in open.iter().enumerate() {
        if let Some((onset, velocity)) = entry {
            let key = (slot % 128) as u8;
            warnings.push(format!(
                "dangling note-on (pitch {}) clipped at track end",
                key
            ));
            if tick > *onset {
                events.push(NoteEvent {
                    onset_tick: *onset,
                    duration_ticks: tick - onset,
                    pitch: key,
                    velocity: *velocity,
                });
            }
        }
    }

    events.sort_by_key(|e| (e.onset_tick, e.pitch));
    Ok((events, warnings))
}

/// Index of the first track containing note events.
pub fn first_note_track(doc: &SmfDocument) -> Option<usize> {
    doc.tracks.iter().position(|t| !t.is_empty())
}

/// Rounds `numer/denom` to the nearest integer, ties toward the smaller.
fn round_half_down(numer: u64, denom: u64) -> u64 {
    (2 * numer + denom - 1) / (2 * denom)
}

/// Maps a track's note events onto the 16th-note grid by rounding onsets and
/// offsets to the nearest multiple of `division / 4`. Zero-length results are
/// dropped.
pub fn events_to_grid(doc: &SmfDocument, track_index: usize) -> Result<Vec<GridNote>, MidiError> {
    let track = doc.tracks.get(track_index).ok_or(MidiError::TrackOutOfRange {
        index: track_index,
        count: doc.tracks.len(),
    })?;
    let division = doc.division as u64;
    let mut notes = Vec::new();
    for ev in track {
        let onset = round_half_down(ev.onset_tick * 4, division);
        let offset = round_half_down((ev.onset_tick + ev.duration_ticks) * 4, division);
        if offset > onset {
            notes.push(GridNote {
                onset_step: onset as usize,
                duration_steps: (offset - onset) as usize,
                pitch: ev.pitch,
            });
        }
    }
    Ok(notes)
}

/// Serializes a sequence as a format-0 SMF at 120-ticks-per-16th (division
/// 480). Each pitch symbol becomes a note spanning its hold run.
pub fn write_smf(seq: &NoteSequence, tempo_bpm: f64) -> Vec<u8> {
    let ticks_per_step = (WRITE_DIVISION / 4) as u64 * 4 / seq.steps_per_quarter.max(1) as u64;
    // (tick, off-before-on ordering key, note-on?, pitch)
    let mut note_edges: Vec<(u64, u8, u8)> = Vec::new();
    let symbols = &seq.symbols;
    let mut i = 0usize;
    while i < symbols.len() {
        let sym = symbols[i];
        if sym == HOLD_SYMBOL {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < symbols.len() && symbols[j] == HOLD_SYMBOL {
            j += 1;
        }
        let pitch = PITCH_LO + (sym as u8 - 1);
        note_edges.push((i as u64 * ticks_per_step, 1, pitch));
        note_edges.push((j as u64 * ticks_per_step, 0, pitch));
        i = j;
    }
    note_edges.sort_by_key(|&(tick, kind, _)| (tick, kind));

    let mut track = Vec::new();
    // Tempo meta event at tick 0.
    let usec_per_quarter = (60_000_000f64 / tempo_bpm).round() as u32;
    encode_vlq(0, &mut track);
    track.extend_from_slice(&[0xFF, 0x51, 0x03]);
    track.extend_from_slice(&usec_per_quarter.to_be_bytes()[1..4]);

    let mut last_tick = 0u64;
    for (tick, kind, pitch) in &note_edges {
        encode_vlq((*tick - last_tick) as u32, &mut track);
        last_tick = *tick;
        match kind {
            1 => track.extend_from_slice(&[0x90, *pitch, 90]),
            _ => track.extend_from_slice(&[0x80, *pitch, 0]),
        }
    }
    encode_vlq(0, &mut track);
    track.extend_from_slice(&[0xFF, 0x2F, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&WRITE_DIVISION.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::quantize_events;

    fn header(format: u16, ntrks: u16, division: u16) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"MThd");
        b.extend_from_slice(&6u32.to_be_bytes());
        b.extend_from_slice(&format.to_be_bytes());
        b.extend_from_slice(&ntrks.to_be_bytes());
        b.extend_from_slice(&division.to_be_bytes());
        b
    }

    fn with_track(mut file: Vec<u8>, track: &[u8]) -> Vec<u8> {
        file.extend_from_slice(b"MTrk");
        file.extend_from_slice(&(track.len() as u32).to_be_bytes());
        file.extend_from_slice(track);
        file
    }

    #[test]
    fn vlq_known_encodings() {
        let cases: [(u32, &[u8]); 5] = [
            (0, &[0x00]),
            (0x7F, &[0x7F]),
            (0x80, &[0x81, 0x00]),
            (0x4000, &[0x81, 0x80, 0x00]),
            (0x0FFF_FFFF, &[0xFF, 0xFF, 0xFF, 0x7F]),
        ];
        for (value, bytes) in cases {
            let mut out = Vec::new();
            encode_vlq(value, &mut out);
            assert_eq!(out, bytes, "encoding of {}", value);
            let mut pos = 0;
            assert_eq!(decode_vlq(bytes, &mut pos).unwrap(), value);
            assert_eq!(pos, bytes.len());
        }
    }

    #[test]
    fn header_only_file_has_no_events() {
        let file = with_track(header(0, 1, 480), &[0x00, 0xFF, 0x2F, 0x00]);
        let doc = parse_smf(&file).unwrap();
        assert_eq!(doc.format, 0);
        assert_eq!(doc.division, 480);
        assert_eq!(doc.tracks.len(), 1);
        assert!(doc.tracks[0].is_empty());
    }

    #[test]
    fn hand_built_note_pair() {
        // delta 0, 0x90 0x3C 0x40; delta 480, 0x80 0x3C 0x00
        let track = [
            0x00, 0x90, 0x3C, 0x40, 0x83, 0x60, 0x80, 0x3C, 0x00, 0x00, 0xFF, 0x2F, 0x00,
        ];
        let doc = parse_smf(&with_track(header(0, 1, 480), &track)).unwrap();
        assert_eq!(
            doc.tracks[0],
            vec![NoteEvent { onset_tick: 0, duration_ticks: 480, pitch: 0x3C, velocity: 0x40 }]
        );
    }

    #[test]
    fn bad_magic_is_malformed_header() {
        let mut file = header(0, 1, 480);
        file[3] = b'X';
        assert!(matches!(parse_smf(&file), Err(MidiError::MalformedHeader(_))));
    }

    #[test]
    fn smpte_division_rejected() {
        let file = header(0, 0, 0xE728);
        assert_eq!(parse_smf(&file), Err(MidiError::UnsupportedDivision(0xE728)));
    }

    #[test]
    fn format_two_rejected() {
        let file = header(2, 0, 480);
        assert_eq!(parse_smf(&file), Err(MidiError::UnsupportedFormat(2)));
    }

    #[test]
    fn truncated_chunk_detected() {
        let mut file = header(0, 1, 480);
        file.extend_from_slice(b"MTrk");
        file.extend_from_slice(&100u32.to_be_bytes());
        file.push(0x00);
        assert_eq!(parse_smf(&file), Err(MidiError::TruncatedChunk));
    }

    #[test]
    fn running_status_and_velocity_zero_off() {
        // note-on 60, then (running status) note-on 60 vel 0 = off, note-on 64 / off 64
        let track = [
            0x00, 0x90, 60, 90, //
            0x60, 60, 0, // running status, vel 0 -> off after 96 ticks
            0x00, 64, 80, //
            0x60, 64, 0, //
            0x00, 0xFF, 0x2F, 0x00,
        ];
        let doc = parse_smf(&with_track(header(0, 1, 480), &track)).unwrap();
        assert_eq!(
            doc.tracks[0],
            vec![
                NoteEvent { onset_tick: 0, duration_ticks: 96, pitch: 60, velocity: 90 },
                NoteEvent { onset_tick: 96, duration_ticks: 96, pitch: 64, velocity: 80 },
            ]
        );
    }

    #[test]
    fn dangling_note_on_clipped_with_warning() {
        let track = [
            0x00, 0x90, 60, 90, //
            0x82, 0x68, 0xFF, 0x2F, 0x00, // end of track at tick 360
        ];
        let doc = parse_smf(&with_track(header(0, 1, 480), &track)).unwrap();
        assert_eq!(doc.tracks[0].len(), 1);
        assert_eq!(doc.tracks[0][0].duration_ticks, 360);
        assert!(doc.warnings.iter().any(|w| w.contains("dangling")));
    }

    #[test]
    fn grid_rounding_follows_nearest_multiple() {
        let doc = SmfDocument {
            format: 0,
            division: 480,
            tracks: vec![vec![
                NoteEvent { onset_tick: 0, duration_ticks: 480, pitch: 60, velocity: 90 },
                NoteEvent { onset_tick: 115 + 480, duration_ticks: 120, pitch: 62, velocity: 90 },
            ]],
            warnings: vec![],
        };
        let grid = events_to_grid(&doc, 0).unwrap();
        assert_eq!(grid[0], GridNote { onset_step: 0, duration_steps: 4, pitch: 60 });
        // 595/120 = 4.958… rounds to 5; ties round toward the earlier step.
        assert_eq!(grid[1].onset_step, 5);
        assert_eq!(round_half_down(1, 2), 0);
        assert_eq!(round_half_down(3, 2), 1);
    }

    #[test]
    fn empty_track_gives_empty_grid() {
        let doc = SmfDocument { format: 0, division: 480, tracks: vec![vec![]], warnings: vec![] };
        assert!(events_to_grid(&doc, 0).unwrap().is_empty());
        assert_eq!(
            events_to_grid(&doc, 3),
            Err(MidiError::TrackOutOfRange { index: 3, count: 1 })
        );
    }

    #[test]
    fn write_quarter_note_and_reparse() {
        let seq = NoteSequence::new(vec![6, 0, 0, 0]);
        let bytes = write_smf(&seq, 120.0);
        let doc = parse_smf(&bytes).unwrap();
        assert_eq!(doc.division, 480);
        assert_eq!(
            doc.tracks[0],
            vec![NoteEvent { onset_tick: 0, duration_ticks: 480, pitch: 60, velocity: 90 }]
        );
        let grid = events_to_grid(&doc, 0).unwrap();
        assert_eq!(quantize_events(&grid).unwrap().symbols, seq.symbols);
    }

    #[test]
    fn write_single_step_note() {
        let seq = NoteSequence::new(vec![1]);
        let doc = parse_smf(&write_smf(&seq, 120.0)).unwrap();
        assert_eq!(
            doc.tracks[0],
            vec![NoteEvent { onset_tick: 0, duration_ticks: 120, pitch: 55, velocity: 90 }]
        );
    }
}
