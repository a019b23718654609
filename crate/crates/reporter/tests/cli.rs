//! End-to-end CLI behavior: exit codes, JSON summaries, output layout,
//! config-file precedence and format validity.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use common::spawn_server;
use ietf_reporter::cli::run;
use ietf_reporter_core::report::check;

fn fixture_mirror() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mirror")
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ietf-reporter"))
}

fn sync_and_build(out: &Path) {
    assert_eq!(
        run([
            "ietf-reporter",
            "sync",
            "--meeting",
            "119",
            "--mirror",
            fixture_mirror().to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        0
    );
    assert_eq!(
        run([
            "ietf-reporter",
            "build",
            "--meeting",
            "119",
            "--out",
            out.to_str().unwrap(),
            "--timestamp",
            "2024-03-26T00:00:00Z",
        ]),
        0
    );
}

#[test]
fn sync_with_missing_mirror_meeting_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let empty = tempfile::tempdir().unwrap();
    let code = run([
        "ietf-reporter",
        "sync",
        "--meeting",
        "119",
        "--mirror",
        empty.path().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn sync_without_any_source_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let code = run([
        "ietf-reporter",
        "sync",
        "--meeting",
        "119",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn unreachable_api_exits_3() {
    // Bind then drop a listener so the port is almost surely refused.
    let port = {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let out = tempfile::tempdir().unwrap();
    let code = run([
        "ietf-reporter",
        "sync",
        "--meeting",
        "119",
        "--api-base",
        &format!("http://127.0.0.1:{port}"),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 3);
}

#[test]
fn build_without_snapshot_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let code = run([
        "ietf-reporter",
        "build",
        "--meeting",
        "119",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn corrupt_snapshot_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().join("119");
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("snapshot.json"), "{not json").unwrap();
    let code = run([
        "ietf-reporter",
        "build",
        "--meeting",
        "119",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn report_unknown_wg_exits_2_and_lists_it() {
    let out = tempfile::tempdir().unwrap();
    sync_and_build(out.path());
    let output = binary()
        .args([
            "report",
            "--meeting",
            "119",
            "--out",
            out.path().to_str().unwrap(),
            "--backend",
            "mock",
            "--wg",
            "nosuchwg,6lo",
            "--json",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let summary: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&output.stdout).trim()).unwrap();
    assert_eq!(summary["ok"], false);
    assert!(summary["errors"][0].as_str().unwrap().contains("nosuchwg"));
}

#[test]
fn report_json_summary_lists_outputs() {
    let out = tempfile::tempdir().unwrap();
    sync_and_build(out.path());
    let output = binary()
        .args([
            "report",
            "--meeting",
            "119",
            "--out",
            out.path().to_str().unwrap(),
            "--backend",
            "mock",
            "--format",
            "md",
            "--json",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    let lines: Vec<&str> = stdout.trim().lines().collect();
    assert_eq!(lines.len(), 1, "--json must emit exactly one line");
    let summary: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(summary["command"], "report");
    assert_eq!(summary["ok"], true);
    assert_eq!(summary["errors"].as_array().unwrap().len(), 0);
    let outputs: Vec<String> = summary["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert!(outputs.iter().any(|p| p.ends_with("6lo.md")));
    assert!(outputs.iter().any(|p| p.ends_with("6man.md")));
    assert!(outputs.iter().any(|p| p.ends_with("report.md")));
}

#[test]
fn report_wg_selection_limits_outputs() {
    let out = tempfile::tempdir().unwrap();
    sync_and_build(out.path());
    assert_eq!(
        run([
            "ietf-reporter",
            "report",
            "--meeting",
            "119",
            "--out",
            out.path().to_str().unwrap(),
            "--backend",
            "mock",
            "--wg",
            "6lo",
        ]),
        0
    );
    assert!(out.path().join("119/6lo.md").exists());
    assert!(!out.path().join("119/6man.md").exists());
    let master = fs::read_to_string(out.path().join("119/report.md")).unwrap();
    assert!(!master.contains("6man"));
}

#[test]
fn tex_output_is_balanced_and_titled() {
    let out = tempfile::tempdir().unwrap();
    sync_and_build(out.path());
    assert_eq!(
        run([
            "ietf-reporter",
            "report",
            "--meeting",
            "119",
            "--out",
            out.path().to_str().unwrap(),
            "--backend",
            "mock",
            "--format",
            "tex",
        ]),
        0
    );
    let master = fs::read_to_string(out.path().join("119/report.tex")).unwrap();
    assert!(master.contains("\\title{IETF119 Meeting Report}"));
    assert!(master.contains("Generated by IETF Reporter"));
    check::latex_balanced(&master).unwrap();
    let wg = fs::read_to_string(out.path().join("119/6lo.tex")).unwrap();
    check::latex_balanced(&wg).unwrap();
}

#[test]
fn rerunning_report_overwrites_with_identical_bytes() {
    let out = tempfile::tempdir().unwrap();
    sync_and_build(out.path());
    let args = [
        "ietf-reporter",
        "report",
        "--meeting",
        "119",
        "--out",
        out.path().to_str().unwrap(),
        "--backend",
        "mock",
    ];
    assert_eq!(run(args), 0);
    let first = fs::read(out.path().join("119/report.md")).unwrap();
    assert_eq!(run(args), 0);
    let second = fs::read(out.path().join("119/report.md")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let workdir = tempfile::tempdir().unwrap();
    let out = workdir.path().join("runs");
    fs::write(
        workdir.path().join("insights.toml"),
        format!(
            "meeting = 118\nmirror = {:?}\nout = {:?}\n",
            fixture_mirror().to_str().unwrap(),
            out.to_str().unwrap(),
        ),
    )
    .unwrap();

    // Config alone points at meeting 118, which the mirror does not have.
    let status = binary()
        .current_dir(workdir.path())
        .args(["sync"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));

    // The flag overrides the config file value.
    let status = binary()
        .current_dir(workdir.path())
        .args(["sync", "--meeting", "119"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(out.join("119/snapshot.json").exists());
}

#[test]
fn env_api_base_feeds_sync_when_flags_absent() {
    let (base, log) = spawn_server(|req, _| {
        assert_eq!(req.path, "/meeting/119/sessions");
        (200, "[]".to_string())
    });
    let workdir = tempfile::tempdir().unwrap();
    let out = workdir.path().join("runs");
    let status = binary()
        .current_dir(workdir.path())
        .env("INSIGHTS_API_BASE", &base)
        .args(["sync", "--meeting", "119", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert_eq!(log.lock().unwrap().len(), 1);
    assert!(out.join("119/snapshot.json").exists());
}

#[test]
fn snapshot_counts_skipped_rows_from_fixture() {
    let out = tempfile::tempdir().unwrap();
    sync_and_build(out.path());
    let snapshot = ietf_reporter::store::load_snapshot(&out.path().join("119")).unwrap();
    // registrants.csv: 31 data rows, one with an empty name is kept (none
    // are empty there), sessions add 22 + 5 rows.
    assert_eq!(snapshot.attendance.len(), 31 + 22 + 5);
    assert_eq!(snapshot.skipped_rows, 0);
    assert_eq!(snapshot.sessions.len(), 2);
}

#[test]
fn built_corpus_reflects_fixture_attendance() {
    let out = tempfile::tempdir().unwrap();
    sync_and_build(out.path());
    let corpus = ietf_reporter::store::load_corpus(&out.path().join("119")).unwrap();
    let session = &corpus.sessions["6lo"];
    assert_eq!(session.attendee_count, 22);
    assert_eq!(
        session.top_affiliations,
        vec![
            ("Apple".to_string(), 7),
            ("Cisco".to_string(), 6),
            ("Huawei Technologies".to_string(), 5),
            ("ETRI".to_string(), 4),
        ]
    );
    // J. Smith / J Smith registered twice but count once meeting-wide.
    assert_eq!(corpus.ledger.meeting_attendees, 30);
    assert_eq!(
        session.draft_names,
        vec![
            "draft-ietf-6lo-path-aware-semantic-addressing",
            "draft-iannone-6lo-nd-gaao",
            "draft-li-6lo-pasa-reliability",
            "draft-ietf-6lo-schc-15dot4",
            "draft-choi-6lo-owc",
        ]
    );
}
