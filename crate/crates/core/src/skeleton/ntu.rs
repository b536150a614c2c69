//! Reader for the NTU RGB+D `.skeleton` text format.
//!
//! ```text
//! <frame count>
//! per frame:
//!   <body count>
//!   per body:
//!     <body id> <9 tracking fields…>
//!     <joint count = 25>
//!     25 × <x> <y> <z> <depth/color/orientation fields…>
//! ```
//!
//! Only the first three fields of a joint line are read. When several bodies
//! appear, the one with the largest motion energy (sum of squared
//! frame-to-frame joint displacements) is kept.

use super::{DataError, Frame, SkeletonSequence, JOINTS};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-blank line with its 1-based number.
    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str), DataError> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            if !line.trim().is_empty() {
                return Ok((i + 1, line));
            }
        }
        Err(DataError::Parse {
            line: self.last + 1,
            message: format!("unexpected end of input, expected {what}"),
        })
    }

    fn next_count(&mut self, what: &str) -> Result<(usize, usize), DataError> {
        let (line, text) = self.next_line(what)?;
        let value = text.trim().parse::<usize>().map_err(|_| DataError::Parse {
            line,
            message: format!("expected {what}, found {:?}", text.trim()),
        })?;
        Ok((line, value))
    }
}

struct BodyTrack {
    id: String,
    frames: Vec<Frame>,
}

impl BodyTrack {
    fn motion_energy(&self) -> f64 {
        self.frames
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .flat_map(|(a, b)| (0..3).map(move |c| (b[c] - a[c]).powi(2)))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Parses one `.skeleton` file. Metadata (label, subject, view) is left at
/// zero; see [`parse_ntu_file_name`].
pub fn parse_ntu_skeleton(text: &str) -> Result<SkeletonSequence, DataError> {
    let mut lines = Lines::new(text);
    let (_, frame_count) = lines.next_count("frame count")?;
    let mut tracks: Vec<BodyTrack> = Vec::new();

    for _ in 0..frame_count {
        let (_, bodies) = lines.next_count("body count")?;
        for _ in 0..bodies {
            let (_, info) = lines.next_line("body info line")?;
            let id = info.split_whitespace().next().unwrap_or_default().to_string();
            let (line, joints) = lines.next_count("joint count")?;
            if joints != JOINTS {
                return Err(DataError::Parse {
                    line,
                    message: format!("expected {JOINTS} joints, found {joints}"),
                });
            }
            let mut frame = [[0.0; 3]; JOINTS];
            for joint in frame.iter_mut() {
                let (line, text) = lines.next_line("joint line")?;
                let mut fields = text.split_whitespace();
                for c in joint.iter_mut() {
                    let field = fields.next().ok_or_else(|| DataError::Parse {
                        line,
                        message: "joint line has fewer than 3 coordinates".into(),
                    })?;
                    *c = field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        DataError::Parse {
                            line,
                            message: format!("non-numeric coordinate {field:?}"),
                        }
                    })?;
                }
            }
            match tracks.iter_mut().find(|t| t.id == id) {
                Some(track) => track.frames.push(frame),
                None => tracks.push(BodyTrack {
                    id,
                    frames: vec![frame],
                }),
            }
        }
    }

    // ties keep the body that appeared first
    let mut best: Option<(f64, BodyTrack)> = None;
    for track in tracks {
        let energy = track.motion_energy();
        if best.as_ref().is_none_or(|(e, _)| energy > *e) {
            best = Some((energy, track));
        }
    }
    let (_, track) = best.ok_or(DataError::EmptySample)?;
    Ok(SkeletonSequence::new(track.frames, 0))
}

/// Fields of an NTU file name such as `S001C002P003R002A013.skeleton`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NtuFileName {
    pub setup: u32,
    pub camera: u32,
    pub performer: u32,
    pub replication: u32,
    /// 1-based action class.
    pub action: u32,
}

pub fn parse_ntu_file_name(name: &str) -> Option<NtuFileName> {
    let stem = name.strip_suffix(".skeleton").unwrap_or(name);
    let bytes = stem.as_bytes();
    if bytes.len() != 20 {
        return None;
    }
    let field = |tag: u8, at: usize| -> Option<u32> {
        if bytes[at] != tag {
            return None;
        }
        stem.get(at + 1..at + 4)?.parse().ok()
    };
    Some(NtuFileName {
        setup: field(b'S', 0)?,
        camera: field(b'C', 4)?,
        performer: field(b'P', 8)?,
        replication: field(b'R', 12)?,
        action: field(b'A', 16)?,
    })
}
