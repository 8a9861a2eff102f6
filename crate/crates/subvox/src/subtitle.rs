//! Subtitle emission: SRT and WebVTT writers plus an SRT reader.
//!
//! Both formats are produced from the same cue model — a sorted,
//! non-overlapping list of [`TimedSegment`]s in stream time — and
//! differ only in header and millisecond separator. Output is
//! byte-stable: LF line endings, indices counted from 1,
//! zero-padded `HH:MM:SS` and milliseconds. The reader exists so
//! round-trips can be tested without trusting the writer twice.

use std::fmt::Write as _;

use subvox_core::timestamp::TimedSegment;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SubtitleError {
    #[error("cue {index}: start {start} s is not before end {end} s")]
    EmptyCue { index: usize, start: f64, end: f64 },
    #[error("cue {index} starts at {start} s, before the previous cue ended ({prev_end} s)")]
    Unsorted { index: usize, start: f64, prev_end: f64 },
    #[error("cue {index}: negative start {start} s")]
    NegativeTime { index: usize, start: f64 },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Whole milliseconds, round-to-nearest. Cue times live on a 20 ms
/// grid, so this is exact for well-formed input.
fn millis(seconds: f64) -> u64 {
    (seconds * 1000.0).round() as u64
}

fn timestamp(seconds: f64, separator: char) -> String {
    let ms = millis(seconds);
    format!(
        "{:02}:{:02}:{:02}{}{:03}",
        ms / 3_600_000,
        ms / 60_000 % 60,
        ms / 1000 % 60,
        separator,
        ms % 1000
    )
}

/// Reject cues a subtitle file cannot represent: unsorted, overlapping,
/// empty, or starting before zero. Comparisons happen at millisecond
/// resolution, the precision both formats actually carry.
fn validate(segments: &[TimedSegment]) -> Result<(), SubtitleError> {
    let mut prev_end = 0;
    for (i, seg) in segments.iter().enumerate() {
        if seg.start < 0.0 {
            return Err(SubtitleError::NegativeTime { index: i + 1, start: seg.start });
        }
        if millis(seg.end) <= millis(seg.start) {
            return Err(SubtitleError::EmptyCue { index: i + 1, start: seg.start, end: seg.end });
        }
        if millis(seg.start) < prev_end {
            return Err(SubtitleError::Unsorted {
                index: i + 1,
                start: seg.start,
                prev_end: prev_end as f64 / 1000.0,
            });
        }
        prev_end = millis(seg.end);
    }
    Ok(())
}

/// Render segments as an SRT document. Empty input is an empty file.
pub fn to_srt(segments: &[TimedSegment]) -> Result<String, SubtitleError> {
    validate(segments)?;
    let mut out = String::new();
    for (i, seg) in segments.iter().enumerate() {
        let _ = write!(
            out,
            "{}\n{} --> {}\n{}\n\n",
            i + 1,
            timestamp(seg.start, ','),
            timestamp(seg.end, ','),
            seg.text
        );
    }
    Ok(out)
}

/// Render segments as a WebVTT document (dot millisecond separator,
/// `WEBVTT` header). Cue payloads are identical to the SRT output.
pub fn to_vtt(segments: &[TimedSegment]) -> Result<String, SubtitleError> {
    validate(segments)?;
    let mut out = String::from("WEBVTT\n\n");
    for (i, seg) in segments.iter().enumerate() {
        let _ = write!(
            out,
            "{}\n{} --> {}\n{}\n\n",
            i + 1,
            timestamp(seg.start, '.'),
            timestamp(seg.end, '.'),
            seg.text
        );
    }
    Ok(out)
}

fn parse_srt_time(s: &str, line: usize) -> Result<f64, SubtitleError> {
    let bad = |message: &str| SubtitleError::Malformed { line, message: message.into() };
    let (hms, ms) = s.split_once(',').ok_or_else(|| bad("missing ',' in timestamp"))?;
    let mut parts = hms.split(':');
    let mut take = |what: &str| {
        parts
            .next()
            .and_then(|p| p.parse::<u64>().ok())
            .ok_or_else(|| bad(&format!("bad {what}")))
    };
    let (h, m, sec) = (take("hours")?, take("minutes")?, take("seconds")?);
    if parts.next().is_some() {
        return Err(bad("too many ':' groups"));
    }
    let ms: u64 = ms.parse().map_err(|_| bad("bad milliseconds"))?;
    Ok((h * 3_600_000 + m * 60_000 + sec * 1000 + ms) as f64 / 1000.0)
}

/// Parse an SRT document back into segments. Indices are checked to be
/// consecutive from 1 so writer bugs cannot hide behind the reader.
pub fn from_srt(text: &str) -> Result<Vec<TimedSegment>, SubtitleError> {
    let mut segments = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((n, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let index: usize = line.trim().parse().map_err(|_| SubtitleError::Malformed {
            line: n + 1,
            message: format!("expected cue index, got {line:?}"),
        })?;
        if index != segments.len() + 1 {
            return Err(SubtitleError::Malformed {
                line: n + 1,
                message: format!("cue index {index} out of order"),
            });
        }
        let (tn, times) = lines.next().ok_or(SubtitleError::Malformed {
            line: n + 2,
            message: "missing timing line".into(),
        })?;
        let (start, end) = times.split_once(" --> ").ok_or(SubtitleError::Malformed {
            line: tn + 1,
            message: "missing ' --> '".into(),
        })?;
        let start = parse_srt_time(start.trim(), tn + 1)?;
        let end = parse_srt_time(end.trim(), tn + 1)?;
        let mut body = Vec::new();
        while let Some((_, l)) = lines.peek() {
            if l.trim().is_empty() {
                lines.next();
                break;
            }
            body.push(lines.next().expect("peeked").1);
        }
        segments.push(TimedSegment::new(start, end, body.join("\n")));
    }
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(start: f64, end: f64, text: &str) -> TimedSegment {
        TimedSegment::new(start, end, text)
    }

    #[test]
    fn srt_format_is_exact() {
        let srt = to_srt(&[seg(0.0, 1.24, "hi")]).unwrap();
        assert_eq!(srt, "1\n00:00:00,000 --> 00:00:01,240\nhi\n\n");
    }

    #[test]
    fn empty_input_is_empty_file() {
        assert_eq!(to_srt(&[]).unwrap(), "");
        assert_eq!(to_vtt(&[]).unwrap(), "WEBVTT\n\n");
    }

    #[test]
    fn hours_roll_over() {
        let srt = to_srt(&[seg(3661.5, 3662.0, "late")]).unwrap();
        assert!(srt.contains("01:01:01,500 --> 01:01:02,000"), "{srt}");
    }

    #[test]
    fn vtt_uses_dot_separator_and_header() {
        let vtt = to_vtt(&[seg(0.0, 1.24, "hi"), seg(2.0, 3.5, "there")]).unwrap();
        assert_eq!(
            vtt,
            "WEBVTT\n\n1\n00:00:00.000 --> 00:00:01.240\nhi\n\n\
             2\n00:00:02.000 --> 00:00:03.500\nthere\n\n"
        );
    }

    #[test]
    fn unsorted_and_overlapping_rejected() {
        let err = to_srt(&[seg(2.0, 3.0, "b"), seg(0.0, 1.0, "a")]).unwrap_err();
        assert!(matches!(err, SubtitleError::Unsorted { index: 2, .. }));
        let err = to_srt(&[seg(0.0, 2.0, "a"), seg(1.0, 3.0, "b")]).unwrap_err();
        assert!(matches!(err, SubtitleError::Unsorted { index: 2, .. }));
        let err = to_srt(&[seg(1.0, 1.0, "empty")]).unwrap_err();
        assert!(matches!(err, SubtitleError::EmptyCue { index: 1, .. }));
        let err = to_srt(&[seg(-0.5, 1.0, "early")]).unwrap_err();
        assert!(matches!(err, SubtitleError::NegativeTime { index: 1, .. }));
    }

    #[test]
    fn touching_cues_are_fine() {
        assert!(to_srt(&[seg(0.0, 1.0, "a"), seg(1.0, 2.0, "b")]).is_ok());
    }

    #[test]
    fn round_trip_at_millisecond_resolution() {
        let cues = vec![
            seg(0.02, 1.24, "kato bemi"),
            seg(1.30, 2.00, "otak"),
            seg(70.5, 3661.501, "long tail"),
        ];
        let back = from_srt(&to_srt(&cues).unwrap()).unwrap();
        assert_eq!(back.len(), cues.len());
        for (b, c) in back.iter().zip(&cues) {
            assert_eq!(b.text, c.text);
            assert!((b.start - c.start).abs() < 5e-4, "{} vs {}", b.start, c.start);
            assert!((b.end - c.end).abs() < 5e-4);
        }
    }

    #[test]
    fn multi_line_cue_text_survives() {
        let srt = "1\n00:00:00,000 --> 00:00:01,000\nline one\nline two\n\n";
        let back = from_srt(srt).unwrap();
        assert_eq!(back[0].text, "line one\nline two");
    }

    #[test]
    fn reader_rejects_garbage() {
        assert!(from_srt("not a subtitle").is_err());
        assert!(from_srt("1\n00:00:00,000 -> 00:00:01,000\nx\n").is_err());
        assert!(from_srt("2\n00:00:00,000 --> 00:00:01,000\nx\n").is_err());
        assert!(from_srt("1\n00:00:aa,000 --> 00:00:01,000\nx\n").is_err());
        assert!(from_srt("1\n").is_err());
    }
}
