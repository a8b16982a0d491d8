//! Switchboard transcripts as tab-separated utterances:
//!
//! ```text
//! <transcript id> <speaker> <act tag> <text>
//! ```
//!
//! Utterances of one transcript are consecutive lines. `#` starts a comment
//! line. The text field is taken verbatim up to the end of the line.

use std::path::Path;

use midas_core::swda::{SwdaTranscript, SwdaUtterance};

use super::{content_lines, read_text, FileError};

pub fn parse_transcripts(src: &str, origin: &str) -> Result<Vec<SwdaTranscript>, FileError> {
    let mut out: Vec<SwdaTranscript> = Vec::new();
    for (n, line) in content_lines(src) {
        if line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.splitn(4, '\t').collect();
        if f.len() != 4 {
            return Err(FileError::parse(origin, n, format!("expected 4 tab-separated fields, found {}", f.len())));
        }
        let (id, speaker, act_tag) = (f[0].trim(), f[1].trim(), f[2].trim());
        if id.is_empty() || speaker.is_empty() || act_tag.is_empty() {
            return Err(FileError::parse(origin, n, "transcript, speaker and act tag must be non-empty"));
        }
        let utt = SwdaUtterance { speaker: speaker.into(), act_tag: act_tag.into(), text: f[3].into() };
        match out.last_mut() {
            Some(t) if t.id == id => t.utterances.push(utt),
            _ => {
                if out.iter().any(|t| t.id == id) {
                    return Err(FileError::parse(origin, n, format!("transcript `{id}` is not contiguous")));
                }
                out.push(SwdaTranscript { id: id.into(), utterances: vec![utt] });
            }
        }
    }
    Ok(out)
}

pub fn read_transcripts(path: &Path) -> Result<Vec<SwdaTranscript>, FileError> {
    parse_transcripts(&read_text(path)?, &path.display().to_string())
}
