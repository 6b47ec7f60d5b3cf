//! Pose and voice-activity files.
//!
//! Pose file, one record per line, `#` starts a comment:
//!
//! ```text
//! <time_s> <speaker_id> <azimuth_deg> <active_flag>   # speaker pose, flag 0 or 1
//! <time_s> array <yaw_deg>                            # array yaw
//! end <time_s>                                        # session length (optional)
//! ```
//!
//! Timestamps must be non-decreasing through the file and strictly increasing
//! per speaker. Azimuths are interpolated linearly between records. Activity
//! flags hold until the next record of the same speaker; the last flag holds
//! until the session end, which defaults to the last timestamp.
//!
//! An optional VAD file with `<speaker_id> <start_s> <end_s>` lines replaces
//! the flags of every speaker. Overlapping spans are merged.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::timeline::{merge_spans, ActivitySpan, SessionMeta, SpeakerTrack, Trajectory};

/// Spacing between consecutive records of one stream above which a warning is logged.
pub const GAP_WARN_S: f64 = 1.0;

const ARRAY_ID: &str = "array";

#[derive(Default)]
struct Stream {
    keyframes: Vec<(f64, f64)>,
    flags: Vec<bool>,
}

fn field<T: std::str::FromStr>(tok: &str, what: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::format(format!("pose line {line}: bad {what} {tok:?}")))
}

fn finite(v: f64, what: &str, line: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::format(format!("pose line {line}: {what} is not finite")))
    }
}

/// Parses a pose file and an optional VAD file into session ground truth.
pub fn parse_pose_vad(pose: &str, vad: Option<&str>) -> Result<SessionMeta> {
    let mut speakers: BTreeMap<String, Stream> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut yaw: Vec<(f64, f64)> = Vec::new();
    let mut end: Option<f64> = None;
    let mut last_t = f64::NEG_INFINITY;

    for (i, raw) in pose.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok[0] == "end" {
            if tok.len() != 2 {
                return Err(Error::format(format!("pose line {n}: expected `end <time_s>`")));
            }
            end = Some(finite(field(tok[1], "time", n)?, "time", n)?);
            continue;
        }
        let t = finite(field(tok[0], "time", n)?, "time", n)?;
        if t < last_t {
            return Err(Error::format(format!(
                "pose line {n}: timestamp {t} is earlier than the previous record ({last_t})"
            )));
        }
        last_t = t;
        let (stream, az, flag) = match tok.len() {
            3 if tok[1] == ARRAY_ID => (None, finite(field(tok[2], "yaw", n)?, "yaw", n)?, None),
            4 => {
                let flag = match tok[3] {
                    "0" => false,
                    "1" => true,
                    other => return Err(Error::format(format!("pose line {n}: bad active flag {other:?}"))),
                };
                (Some(tok[1]), finite(field(tok[2], "azimuth", n)?, "azimuth", n)?, Some(flag))
            }
            _ => return Err(Error::format(format!("pose line {n}: unrecognized record {line:?}"))),
        };
        let (label, keyframes) = match stream {
            None => (ARRAY_ID.to_owned(), &mut yaw),
            Some(id) => {
                if !speakers.contains_key(id) {
                    order.push(id.to_owned());
                }
                let s = speakers.entry(id.to_owned()).or_default();
                s.flags.push(flag.unwrap_or(false));
                (id.to_owned(), &mut s.keyframes)
            }
        };
        if let Some(&(prev, _)) = keyframes.last() {
            if t <= prev {
                return Err(Error::format(format!(
                    "pose line {n}: repeated timestamp {t} for {label}"
                )));
            }
            if t - prev > GAP_WARN_S {
                log::warn!("pose gap of {:.3} s for {label} before t = {t}; interpolating", t - prev);
            }
        }
        keyframes.push((t, az));
    }

    let last = if last_t.is_finite() { last_t } else { 0.0 };
    let duration = end.unwrap_or(last).max(last);

    let vad_spans = vad.map(parse_vad).transpose()?;
    let mut tracks = Vec::with_capacity(order.len());
    for id in order {
        let s = &speakers[&id];
        let spans = match &vad_spans {
            Some(map) => map.get(&id).cloned().unwrap_or_default(),
            None => spans_from_flags(&s.keyframes, &s.flags, duration),
        };
        tracks.push(SpeakerTrack {
            trajectory: Trajectory::from_keyframes(s.keyframes.clone(), duration)?,
            spans: merge_spans(spans),
            id,
        });
    }
    if let Some(map) = &vad_spans {
        for id in map.keys() {
            if !tracks.iter().any(|t| &t.id == id) {
                log::warn!("VAD speaker {id:?} has no pose records; ignored");
            }
        }
    }
    let array_yaw = if yaw.is_empty() {
        Trajectory::constant(0.0, duration)
    } else {
        Trajectory::from_keyframes(yaw, duration)?
    };
    Ok(SessionMeta {
        speakers: tracks,
        array_yaw,
        duration_s: duration,
    })
}

fn spans_from_flags(keyframes: &[(f64, f64)], flags: &[bool], end: f64) -> Vec<ActivitySpan> {
    let mut spans = Vec::new();
    let mut start: Option<f64> = None;
    for (&(t, _), &on) in keyframes.iter().zip(flags) {
        match (on, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                spans.push(ActivitySpan::new(s, t));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(ActivitySpan::new(s, end));
    }
    spans
}

/// `<speaker_id> <start_s> <end_s>` lines, grouped by speaker.
pub fn parse_vad(text: &str) -> Result<BTreeMap<String, Vec<ActivitySpan>>> {
    let mut out: BTreeMap<String, Vec<ActivitySpan>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(Error::format(format!("VAD line {n}: expected `<speaker> <start_s> <end_s>`")));
        }
        let start: f64 = tok[1]
            .parse()
            .map_err(|_| Error::format(format!("VAD line {n}: bad start {:?}", tok[1])))?;
        let stop: f64 = tok[2]
            .parse()
            .map_err(|_| Error::format(format!("VAD line {n}: bad end {:?}", tok[2])))?;
        if !(start.is_finite() && stop.is_finite() && start <= stop) {
            return Err(Error::format(format!("VAD line {n}: span [{start}, {stop}] is invalid")));
        }
        out.entry(tok[0].to_owned())
            .or_default()
            .push(ActivitySpan::new(start, stop));
    }
    Ok(out)
}

pub fn load_pose_vad(pose: impl AsRef<Path>, vad: Option<&Path>) -> Result<SessionMeta> {
    let pose = std::fs::read_to_string(pose)?;
    let vad = vad.map(std::fs::read_to_string).transpose()?;
    parse_pose_vad(&pose, vad.as_deref())
}

/// Record spacing used by [`format_pose`] between keyframes and activity edges.
pub const FORMAT_STEP_S: f64 = 0.1;

/// Writes `meta` in the pose grammar: a record every [`FORMAT_STEP_S`] plus one
/// at every keyframe and activity edge.
pub fn format_pose(meta: &SessionMeta) -> String {
    use std::fmt::Write as _;
    let mut records: Vec<(f64, usize, String)> = Vec::new();
    let steps = (meta.duration_s / FORMAT_STEP_S).floor() as usize;
    let lattice = || (0..=steps).map(|i| i as f64 * FORMAT_STEP_S).chain([meta.duration_s]);
    let mut yaw_times: Vec<f64> = meta.array_yaw.keyframes().iter().map(|k| k.0).collect();
    yaw_times.retain(|t| *t >= 0.0 && *t <= meta.duration_s);
    yaw_times.extend(lattice());
    yaw_times.sort_by(f64::total_cmp);
    yaw_times.dedup();
    for t in yaw_times {
        let a = meta.array_yaw.sample_clamped(t);
        records.push((t, 0, format!("{t} {ARRAY_ID} {a}")));
    }
    for (si, s) in meta.speakers.iter().enumerate() {
        let mut times: Vec<f64> = s.trajectory.keyframes().iter().map(|k| k.0).collect();
        for span in &s.spans {
            times.push(span.start_s);
            times.push(span.end_s);
        }
        times.retain(|t| *t >= 0.0 && *t <= meta.duration_s);
        times.extend(lattice());
        times.sort_by(f64::total_cmp);
        times.dedup();
        for t in times {
            let on = s.spans.iter().any(|sp| sp.start_s <= t && t < sp.end_s);
            let az = s.trajectory.sample_clamped(t);
            records.push((t, si + 1, format!("{t} {} {az} {}", s.id, on as u8)));
        }
    }
    records.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = String::from("# time_s speaker_id azimuth_deg active_flag | time_s array yaw_deg\n");
    for (_, _, line) in records {
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "end {}", meta.duration_s);
    out
}

/// Writes the activity spans of `meta` in the VAD grammar.
pub fn format_vad(meta: &SessionMeta) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for s in &meta.speakers {
        for span in &s.spans {
            let _ = writeln!(out, "{} {} {}", s.id, span.start_s, span.end_s);
        }
    }
    out
}
