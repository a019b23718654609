//! Raw meeting records and the grammars they obey.
//!
//! These are the typed outputs of ingestion: one [`RawSession`] per working
//! group session and one [`RawAttendanceRow`] per sign-in line. Loaders in
//! the companion crate produce them from the datatracker API or a mirrored
//! directory tree; everything here is plain string processing.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// A single working-group session of one meeting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSession {
    /// Lowercase WG token, e.g. `6lo`. Must match [`is_valid_acronym`].
    pub wg_acronym: String,
    pub wg_name: String,
    pub meeting_number: u32,
    /// May be empty when no agenda was published.
    pub agenda_text: String,
    /// May be empty when no minutes were published.
    pub minutes_text: String,
    /// Version-stripped draft identifiers associated with the session.
    pub draft_names: Vec<String>,
}

/// Where an attendance row was recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttendanceScope {
    /// Meeting-wide registration list.
    MeetingWide,
    /// Per-session sign-in for the named WG.
    Session(String),
}

/// One attendance line, exactly as found in the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAttendanceRow {
    pub raw_name: String,
    /// May be empty; resolution maps it to the reserved "unaffiliated" entity.
    pub raw_affiliation: String,
    pub scope: AttendanceScope,
}

/// WG acronyms are lowercase tokens: `[a-z0-9-]+`.
pub fn is_valid_acronym(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

/// Internet-Draft identifiers: `draft-[a-z0-9.-]+`, version suffix stripped.
pub fn is_valid_draft_name(s: &str) -> bool {
    match s.strip_prefix("draft-") {
        Some(rest) => {
            !rest.is_empty()
                && rest
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '.' || c == '-')
        }
        None => false,
    }
}

fn is_draft_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '.' || c == '-'
}

/// Drops a trailing `-NN` two-digit revision from a draft identifier.
///
/// `draft-ietf-6lo-schc-15dot4-05` becomes `draft-ietf-6lo-schc-15dot4`;
/// names without a revision pass through unchanged.
pub fn strip_draft_version(name: &str) -> &str {
    let bytes = name.as_bytes();
    if bytes.len() > "draft-".len() + 3
        && bytes[bytes.len() - 3] == b'-'
        && bytes[bytes.len() - 2].is_ascii_digit()
        && bytes[bytes.len() - 1].is_ascii_digit()
    {
        &name[..bytes.len() - 3]
    } else {
        name
    }
}

/// Extracts every draft identifier mentioned in free text.
///
/// Matches each substring of the form `draft-[a-z0-9.-]+`, strips the
/// version suffix, and deduplicates keeping first-occurrence order.
pub fn extract_draft_names(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while let Some(rel) = text[i..].find("draft-") {
        let start = i + rel;
        let mut end = start + "draft-".len();
        while end < bytes.len() && is_draft_char(bytes[end] as char) {
            end += 1;
        }
        if end > start + "draft-".len() {
            // A trailing '.' or '-' is sentence punctuation, not part of
            // the name.
            let name = text[start..end].trim_end_matches(['.', '-']);
            let name = strip_draft_version(name);
            if is_valid_draft_name(name) && seen.insert(name.to_string()) {
                out.push(name.to_string());
            }
            i = end;
        } else {
            i = start + "draft-".len();
        }
    }
    out
}

/// Parsed attendance CSV: `(name, affiliation)` pairs in file order plus the
/// count of rows skipped for having an empty name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttendanceCsv {
    pub rows: Vec<(String, String)>,
    pub skipped: u32,
}

/// A CSV violation, with the 1-based physical line the record started on.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct CsvError {
    pub line: usize,
    pub message: String,
}

fn csv_error(line: usize, message: &str) -> CsvError {
    CsvError {
        line,
        message: message.to_string(),
    }
}

/// Strict RFC-4180 parser for attendance files.
///
/// The header must be exactly `name,affiliation`. Records must have two
/// fields; quoted fields may contain commas, quotes (doubled) and newlines.
/// Stray or unterminated quotes are errors rather than being passed through,
/// so malformed exports fail loudly with a line number. Records whose name is
/// blank after trimming are skipped and counted, not errors.
pub fn parse_attendance_csv(text: &str) -> Result<AttendanceCsv, CsvError> {
    let mut rows = Vec::new();
    let mut skipped: u32 = 0;
    let mut header_seen = false;

    let mut chars = text.chars().peekable();
    let mut line = 1usize;

    'records: loop {
        if chars.peek().is_none() {
            break;
        }
        let record_line = line;
        let mut fields: Vec<String> = Vec::new();
        let mut field = String::new();

        'fields: loop {
            match chars.peek().copied() {
                Some('"') => {
                    chars.next();
                    loop {
                        match chars.next() {
                            None => return Err(csv_error(record_line, "unterminated quoted field")),
                            Some('"') => {
                                if chars.peek() == Some(&'"') {
                                    chars.next();
                                    field.push('"');
                                } else {
                                    break;
                                }
                            }
                            Some('\n') => {
                                line += 1;
                                field.push('\n');
                            }
                            Some(c) => field.push(c),
                        }
                    }
                    // After the closing quote only a separator or record end may follow.
                    match chars.peek().copied() {
                        None | Some(',') | Some('\r') | Some('\n') => {}
                        Some(c) => {
                            return Err(csv_error(
                                record_line,
                                &alloc::format!("unexpected '{c}' after closing quote"),
                            ))
                        }
                    }
                }
                _ => loop {
                    match chars.peek().copied() {
                        None | Some(',') | Some('\r') | Some('\n') => break,
                        Some('"') => {
                            return Err(csv_error(record_line, "quote inside unquoted field"))
                        }
                        Some(c) => {
                            chars.next();
                            field.push(c);
                        }
                    }
                },
            }

            match chars.next() {
                Some(',') => {
                    fields.push(core::mem::take(&mut field));
                    continue 'fields;
                }
                Some('\r') => {
                    if chars.next() != Some('\n') {
                        return Err(csv_error(record_line, "carriage return without line feed"));
                    }
                    line += 1;
                    fields.push(core::mem::take(&mut field));
                    break 'fields;
                }
                Some('\n') => {
                    line += 1;
                    fields.push(core::mem::take(&mut field));
                    break 'fields;
                }
                None => {
                    fields.push(core::mem::take(&mut field));
                    break 'fields;
                }
                Some(_) => unreachable!("separator peeked above"),
            }
        }

        if !header_seen {
            if fields != ["name", "affiliation"] {
                return Err(csv_error(
                    record_line,
                    "header must be exactly `name,affiliation`",
                ));
            }
            header_seen = true;
            continue 'records;
        }

        match fields.len() {
            2 => {
                let name = fields.remove(0);
                let affiliation = fields.remove(0);
                if name.trim().is_empty() {
                    skipped += 1;
                } else {
                    rows.push((name, affiliation));
                }
            }
            // A blank line decodes as one empty field; treat it as an
            // empty-name row so record accounting stays exact.
            1 if fields[0].is_empty() => skipped += 1,
            n => {
                return Err(csv_error(
                    record_line,
                    &alloc::format!("expected 2 fields, got {n}"),
                ))
            }
        }
    }

    if !header_seen {
        return Err(csv_error(1, "missing header `name,affiliation`"));
    }

    Ok(AttendanceCsv { rows, skipped })
}
