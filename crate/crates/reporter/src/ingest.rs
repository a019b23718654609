//! Loading raw meeting records from the datatracker API or a local mirror.
//!
//! The mirror is a directory tree produced by an external `rsync` step:
//!
//! ```text
//! <mirror_root>/<meeting>/registrants.csv
//! <mirror_root>/<meeting>/<wg>/minutes.md
//! <mirror_root>/<meeting>/<wg>/agenda.md
//! <mirror_root>/<meeting>/<wg>/attendees.csv
//! ```
//!
//! The API alternative is `GET <api_base_url>/meeting/<n>/sessions`
//! returning a JSON array of `{acronym, name, minutes_url, agenda_url,
//! drafts}`; referenced URLs are fetched as plain text. When both sources
//! are configured the mirror wins. All file and body text is decoded as
//! UTF-8 with invalid sequences replaced.

use std::fs;
use std::path::{Path, PathBuf};

use ietf_reporter_core::records::{
    extract_draft_names, is_valid_acronym, is_valid_draft_name, parse_attendance_csv,
    strip_draft_version, AttendanceScope, RawAttendanceRow, RawSession,
};
use serde::Deserialize;

use crate::http::{HttpClient, HttpError, RetrySettings};
use crate::util::parallel_map;

/// How many session material fetches run at once.
pub const DEFAULT_FETCH_PARALLELISM: usize = 4;

/// Where raw records come from.
#[derive(Debug, Clone)]
pub struct SourceConfig {
    pub api_base_url: Option<String>,
    pub mirror_root: Option<PathBuf>,
    pub meeting_number: u32,
    pub timeout_ms: u64,
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.meeting_number == 0 {
            return Err(IngestError::InvalidConfig(
                "meeting number must be positive".into(),
            ));
        }
        if self.api_base_url.is_none() && self.mirror_root.is_none() {
            return Err(IngestError::InvalidConfig(
                "configure at least one of --api-base / --mirror".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("network failure: {0}")]
    Network(String),
    #[error("parse failure in {file}{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Parse {
        file: String,
        line: Option<usize>,
        message: String,
    },
}

impl From<HttpError> for IngestError {
    fn from(err: HttpError) -> Self {
        match err {
            HttpError::NotFound(url) => IngestError::NotFound(url),
            other => IngestError::Network(other.to_string()),
        }
    }
}

/// Loads every WG session of the configured meeting, ascending by acronym.
pub fn fetch_sessions(cfg: &SourceConfig) -> Result<Vec<RawSession>, IngestError> {
    cfg.validate()?;
    match (&cfg.mirror_root, &cfg.api_base_url) {
        (Some(root), _) => fetch_sessions_mirror(root, cfg.meeting_number),
        (None, Some(base)) => fetch_sessions_api(base, cfg),
        (None, None) => unreachable!("validate checked source presence"),
    }
}

fn read_text_lossy(path: &Path) -> Option<String> {
    fs::read(path)
        .ok()
        .map(|bytes| String::from_utf8_lossy(&bytes).into_owned())
}

fn fetch_sessions_mirror(root: &Path, meeting: u32) -> Result<Vec<RawSession>, IngestError> {
    let meeting_dir = root.join(meeting.to_string());
    if !meeting_dir.is_dir() {
        return Err(IngestError::NotFound(format!(
            "mirror has no directory for meeting {meeting} under {}",
            root.display()
        )));
    }

    let mut sessions = Vec::new();
    let entries = fs::read_dir(&meeting_dir).map_err(|e| IngestError::Parse {
        file: meeting_dir.display().to_string(),
        line: None,
        message: e.to_string(),
    })?;
    for entry in entries {
        let entry = entry.map_err(|e| IngestError::Parse {
            file: meeting_dir.display().to_string(),
            line: None,
            message: e.to_string(),
        })?;
        if !entry.path().is_dir() {
            continue;
        }
        let acronym = entry.file_name().to_string_lossy().into_owned();
        if !is_valid_acronym(&acronym) {
            return Err(IngestError::Parse {
                file: entry.path().display().to_string(),
                line: None,
                message: format!("directory name {acronym:?} is not a WG acronym"),
            });
        }
        let minutes_text = read_text_lossy(&entry.path().join("minutes.md")).unwrap_or_default();
        let agenda_text = read_text_lossy(&entry.path().join("agenda.md")).unwrap_or_default();
        let mut draft_names = extract_draft_names(&minutes_text);
        for draft in extract_draft_names(&agenda_text) {
            if !draft_names.contains(&draft) {
                draft_names.push(draft);
            }
        }
        sessions.push(RawSession {
            wg_name: acronym.clone(),
            wg_acronym: acronym,
            meeting_number: meeting,
            agenda_text,
            minutes_text,
            draft_names,
        });
    }
    sessions.sort_by(|a, b| a.wg_acronym.cmp(&b.wg_acronym));
    Ok(sessions)
}

#[derive(Debug, Deserialize)]
struct ApiSession {
    acronym: String,
    name: String,
    #[serde(default)]
    minutes_url: Option<String>,
    #[serde(default)]
    agenda_url: Option<String>,
    #[serde(default)]
    drafts: Vec<String>,
}

fn fetch_sessions_api(base: &str, cfg: &SourceConfig) -> Result<Vec<RawSession>, IngestError> {
    let client = HttpClient::new(cfg.timeout_ms, RetrySettings::default());
    let listing_url = format!(
        "{}/meeting/{}/sessions",
        base.trim_end_matches('/'),
        cfg.meeting_number
    );
    let body = client.get_text(&listing_url).map_err(|e| match e {
        HttpError::NotFound(_) => {
            IngestError::NotFound(format!("meeting {} not on {base}", cfg.meeting_number))
        }
        other => IngestError::from(other),
    })?;

    let listed: Vec<ApiSession> = serde_json::from_str(&body).map_err(|e| IngestError::Parse {
        file: listing_url.clone(),
        line: Some(e.line()),
        message: e.to_string(),
    })?;

    let mut prepared = Vec::new();
    for api in listed {
        let acronym = api.acronym.to_lowercase();
        if !is_valid_acronym(&acronym) {
            return Err(IngestError::Parse {
                file: listing_url.clone(),
                line: None,
                message: format!("acronym {:?} is not a WG acronym", api.acronym),
            });
        }
        let mut draft_names = Vec::new();
        for raw in &api.drafts {
            let stripped = strip_draft_version(raw).to_string();
            if !is_valid_draft_name(&stripped) {
                return Err(IngestError::Parse {
                    file: listing_url.clone(),
                    line: None,
                    message: format!("draft name {raw:?} does not match the draft grammar"),
                });
            }
            if !draft_names.contains(&stripped) {
                draft_names.push(stripped);
            }
        }
        prepared.push((acronym, api, draft_names));
    }

    // Material fetches dominate sync time; run them concurrently. Order is
    // restored afterwards: the stable sort keeps listing order among
    // repeated sessions of one WG.
    let fetched: Vec<Result<RawSession, IngestError>> = parallel_map(
        prepared,
        DEFAULT_FETCH_PARALLELISM,
        |(acronym, api, draft_names)| {
            let fetch = |url: &Option<String>| -> Result<String, IngestError> {
                match url.as_deref() {
                    None | Some("") => Ok(String::new()),
                    Some(url) => match client.get_text(url) {
                        Ok(text) => Ok(text),
                        // Absent material is an empty document, not a failure.
                        Err(HttpError::NotFound(_)) => Ok(String::new()),
                        Err(other) => Err(other.into()),
                    },
                }
            };
            Ok(RawSession {
                minutes_text: fetch(&api.minutes_url)?,
                agenda_text: fetch(&api.agenda_url)?,
                wg_acronym: acronym,
                wg_name: api.name,
                meeting_number: cfg.meeting_number,
                draft_names,
            })
        },
    );

    let mut sessions = fetched.into_iter().collect::<Result<Vec<_>, _>>()?;
    sessions.sort_by(|a, b| a.wg_acronym.cmp(&b.wg_acronym));
    Ok(sessions)
}

/// Parsed attendance rows plus the skipped-row counter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttendanceLoad {
    pub rows: Vec<RawAttendanceRow>,
    pub skipped: u32,
}

/// Loads meeting-wide registration and per-session sign-in sheets from the
/// mirror, in file order: registrants first, then WG directories ascending.
///
/// Without a mirror there is nothing to read and the load is empty. Missing
/// files are empty sheets; malformed CSV fails with file and line.
pub fn load_attendance(cfg: &SourceConfig) -> Result<AttendanceLoad, IngestError> {
    cfg.validate()?;
    let Some(root) = &cfg.mirror_root else {
        return Ok(AttendanceLoad::default());
    };
    let meeting_dir = root.join(cfg.meeting_number.to_string());
    if !meeting_dir.is_dir() {
        return Err(IngestError::NotFound(format!(
            "mirror has no directory for meeting {} under {}",
            cfg.meeting_number,
            root.display()
        )));
    }

    let mut load = AttendanceLoad::default();
    read_sheet(
        &meeting_dir.join("registrants.csv"),
        AttendanceScope::MeetingWide,
        &mut load,
    )?;

    let mut wg_dirs: Vec<PathBuf> = fs::read_dir(&meeting_dir)
        .map_err(|e| IngestError::Parse {
            file: meeting_dir.display().to_string(),
            line: None,
            message: e.to_string(),
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| path.is_dir())
        .collect();
    wg_dirs.sort();

    for dir in wg_dirs {
        let acronym = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        read_sheet(
            &dir.join("attendees.csv"),
            AttendanceScope::Session(acronym),
            &mut load,
        )?;
    }
    Ok(load)
}

fn read_sheet(
    path: &Path,
    scope: AttendanceScope,
    load: &mut AttendanceLoad,
) -> Result<(), IngestError> {
    let Some(text) = read_text_lossy(path) else {
        return Ok(());
    };
    let parsed = parse_attendance_csv(&text).map_err(|e| IngestError::Parse {
        file: path.display().to_string(),
        line: Some(e.line),
        message: e.message,
    })?;
    load.skipped += parsed.skipped;
    load.rows
        .extend(parsed.rows.into_iter().map(|(raw_name, raw_affiliation)| {
            RawAttendanceRow {
                raw_name,
                raw_affiliation,
                scope: scope.clone(),
            }
        }));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(path: &Path, content: &str) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, content).unwrap();
    }

    fn mirror_config(root: &Path) -> SourceConfig {
        SourceConfig {
            api_base_url: None,
            mirror_root: Some(root.to_path_buf()),
            meeting_number: 119,
            timeout_ms: 1000,
        }
    }

    #[test]
    fn mirror_sessions_sorted_by_acronym() {
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join("119/6man/minutes.md"), "later group");
        write(&dir.path().join("119/6lo/minutes.md"), "first group");
        let sessions = fetch_sessions(&mirror_config(dir.path())).unwrap();
        assert_eq!(sessions.len(), 2);
        assert_eq!(sessions[0].wg_acronym, "6lo");
        assert_eq!(sessions[1].wg_acronym, "6man");
    }

    #[test]
    fn empty_meeting_dir_is_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("119")).unwrap();
        let sessions = fetch_sessions(&mirror_config(dir.path())).unwrap();
        assert!(sessions.is_empty());
    }

    #[test]
    fn missing_meeting_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let err = fetch_sessions(&mirror_config(dir.path())).unwrap_err();
        assert!(matches!(err, IngestError::NotFound(_)));
    }

    #[test]
    fn mirror_fetch_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join("119/anima/minutes.md"), "m");
        write(&dir.path().join("119/anima/agenda.md"), "a");
        write(&dir.path().join("119/bier/minutes.md"), "m2");
        let cfg = mirror_config(dir.path());
        assert_eq!(fetch_sessions(&cfg).unwrap(), fetch_sessions(&cfg).unwrap());
    }

    #[test]
    fn mirror_collects_drafts_from_texts() {
        let dir = tempfile::tempdir().unwrap();
        write(
            &dir.path().join("119/6lo/minutes.md"),
            "covered draft-ietf-6lo-schc-15dot4-05",
        );
        write(&dir.path().join("119/6lo/agenda.md"), "plan draft-choi-6lo-owc-02");
        let sessions = fetch_sessions(&mirror_config(dir.path())).unwrap();
        assert_eq!(
            sessions[0].draft_names,
            ["draft-ietf-6lo-schc-15dot4", "draft-choi-6lo-owc"]
        );
    }

    #[test]
    fn invalid_wg_directory_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join("119/6LO/minutes.md"), "x");
        let err = fetch_sessions(&mirror_config(dir.path())).unwrap_err();
        assert!(matches!(err, IngestError::Parse { .. }));
    }

    #[test]
    fn attendance_rows_are_scoped_and_ordered() {
        let dir = tempfile::tempdir().unwrap();
        write(
            &dir.path().join("119/registrants.csv"),
            "name,affiliation\nAda Total,Org\n",
        );
        write(
            &dir.path().join("119/6lo/attendees.csv"),
            "name,affiliation\n\"Stuart Cheshire\",Apple\n",
        );
        let load = load_attendance(&mirror_config(dir.path())).unwrap();
        assert_eq!(load.rows.len(), 2);
        assert_eq!(load.rows[0].scope, AttendanceScope::MeetingWide);
        assert_eq!(load.rows[1].raw_name, "Stuart Cheshire");
        assert_eq!(load.rows[1].raw_affiliation, "Apple");
        assert_eq!(load.rows[1].scope, AttendanceScope::Session("6lo".into()));
    }

    #[test]
    fn attendance_counts_skipped_rows() {
        let dir = tempfile::tempdir().unwrap();
        write(
            &dir.path().join("119/6lo/attendees.csv"),
            "name,affiliation\n,\"Cisco\"\nReal Person,Org\n",
        );
        let load = load_attendance(&mirror_config(dir.path())).unwrap();
        assert_eq!(load.rows.len(), 1);
        assert_eq!(load.skipped, 1);
    }

    #[test]
    fn attendance_error_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        write(
            &dir.path().join("119/6lo/attendees.csv"),
            "name,affiliation\n\"broken,Org\n",
        );
        let err = load_attendance(&mirror_config(dir.path())).unwrap_err();
        match err {
            IngestError::Parse { file, line, .. } => {
                assert!(file.contains("attendees.csv"));
                assert_eq!(line, Some(2));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn config_requires_a_source() {
        let cfg = SourceConfig {
            api_base_url: None,
            mirror_root: None,
            meeting_number: 119,
            timeout_ms: 1000,
        };
        assert!(matches!(
            cfg.validate(),
            Err(IngestError::InvalidConfig(_))
        ));
    }
}
