//! Asking for the class a flagged gesture was meant to be.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::types::{GestureClass, RecordingMeta};
use crate::{HgrError, Result};

pub const MAX_ATTEMPTS: usize = 3;

/// Where the intended class comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PromptMode {
    /// Take the class recorded in the metadata.
    Batch,
    /// Look the recording id up in a TOML table `id = "class"`, falling back
    /// to the metadata for ids it does not list.
    AnswerFile(BTreeMap<String, GestureClass>),
    /// Ask on the terminal with a numbered menu.
    Interactive,
}

impl PromptMode {
    pub fn answer_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HgrError::io(path, e))?;
        let raw: BTreeMap<String, String> =
            toml::from_str(&text).map_err(|e| HgrError::Config(format!("{}: {e}", path.display())))?;
        let map = raw
            .into_iter()
            .map(|(k, v)| Ok((k, v.parse::<GestureClass>()?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(PromptMode::AnswerFile(map))
    }
}

fn menu(candidates: &[GestureClass]) -> String {
    candidates.iter().enumerate().map(|(i, c)| format!("  {}) {}\n", i + 1, c.name())).collect()
}

/// Reads a 1-based menu choice (or a class name) from `input`, reprompting
/// up to [`MAX_ATTEMPTS`] times.
pub fn ask<R: BufRead, W: Write>(
    recording_id: &str,
    candidates: &[GestureClass],
    input: &mut R,
    output: &mut W,
) -> Result<GestureClass> {
    let w = |e: std::io::Error| HgrError::Input(format!("terminal: {e}"));
    for attempt in 1..=MAX_ATTEMPTS {
        write!(output, "Recording {recording_id} looked unusual. Which gesture did you intend?\n{}> ", menu(candidates)).map_err(w)?;
        output.flush().map_err(w)?;
        let mut line = String::new();
        if input.read_line(&mut line).map_err(w)? == 0 {
            break;
        }
        let answer = line.trim();
        let chosen = match answer.parse::<usize>() {
            Ok(k) if (1..=candidates.len()).contains(&k) => Some(candidates[k - 1]),
            Ok(_) => None,
            Err(_) => answer.parse::<GestureClass>().ok().filter(|c| candidates.contains(c)),
        };
        match chosen {
            Some(c) => return Ok(c),
            None => writeln!(output, "invalid selection `{answer}` ({attempt}/{MAX_ATTEMPTS})").map_err(w)?,
        }
    }
    Err(HgrError::Input(format!("no valid class selected for {recording_id} after {MAX_ATTEMPTS} attempts")))
}

/// Intended class of a recording under `mode`.
pub fn prompt_intended_class<R: BufRead, W: Write>(
    meta: &RecordingMeta,
    candidates: &[GestureClass],
    mode: &PromptMode,
    input: &mut R,
    output: &mut W,
) -> Result<GestureClass> {
    match mode {
        PromptMode::Batch => Ok(meta.class),
        PromptMode::AnswerFile(map) => Ok(map.get(&meta.id).copied().unwrap_or(meta.class)),
        PromptMode::Interactive => ask(&meta.id, candidates, input, output),
    }
}
