//! Report composition and rendering.
//!
//! A [`WgReport`] pairs the generated summary with the corpus facts for one
//! working group: an attendees overview followed by the meeting
//! discussions, always in that order. Reports render to Markdown or LaTeX
//! deterministically, and [`assemble_master`] concatenates them into the
//! single meeting document with a title block and table of contents.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::SessionRecord;
use crate::llm::summarize::WgSummary;
use crate::records::strip_draft_version;

/// Attribution line placed under the master title.
pub const DEFAULT_ATTRIBUTION: &str = "Generated by IETF Reporter";

/// Draft hyperlinks point here, suffixed with the version-free draft name.
pub const DRAFT_URL_BASE: &str = "https://datatracker.ietf.org/doc/";

/// At most this many affiliations are named in the overview.
pub const MAX_PROMINENT_AFFILIATIONS: usize = 5;

/// Fixed sub-heading under "Attendees Overview".
const ATTENDANCE_SUBHEADING: &str = "Representation and Attendance";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttendeesOverview {
    pub count: u32,
    pub prominent_affiliations: Vec<String>,
    pub narrative: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discussion {
    pub title: String,
    pub body: String,
    pub draft_links: Vec<String>,
}

/// One working group's report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WgReport {
    pub wg_name: String,
    pub wg_acronym: String,
    pub attendees_overview: AttendeesOverview,
    pub discussions: Vec<Discussion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    Markdown,
    Latex,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Markdown => "md",
            OutputFormat::Latex => "tex",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedDocument {
    pub format: OutputFormat,
    pub body: String,
    pub wg_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("consistency: {0}")]
    Consistency(String),
    #[error("duplicate working group: {0}")]
    DuplicateWg(String),
}

/// Combines a grounded summary with its session record.
pub fn compose(summary: &WgSummary, session: &SessionRecord) -> Result<WgReport, ReportError> {
    if summary.wg_acronym != session.wg_acronym {
        return Err(ReportError::Consistency(alloc::format!(
            "summary is for {} but session record is for {}",
            summary.wg_acronym,
            session.wg_acronym
        )));
    }

    let discussions = summary
        .topics
        .iter()
        .map(|topic| {
            let mut body = topic.body.clone();
            if !topic.presenters.is_empty() {
                if !body.is_empty() {
                    body.push(' ');
                }
                body.push_str("Presented by ");
                body.push_str(&topic.presenters.join(", "));
                body.push('.');
            }
            Discussion {
                title: topic.title.clone(),
                body,
                draft_links: topic
                    .draft_links
                    .iter()
                    .map(|d| strip_draft_version(d).to_string())
                    .collect(),
            }
        })
        .collect();

    Ok(WgReport {
        wg_name: session.wg_name.clone(),
        wg_acronym: session.wg_acronym.clone(),
        attendees_overview: AttendeesOverview {
            count: session.attendee_count,
            prominent_affiliations: session
                .top_affiliations
                .iter()
                .take(MAX_PROMINENT_AFFILIATIONS)
                .map(|(label, _)| label.clone())
                .collect(),
            narrative: summary.overview.clone(),
        },
        discussions,
    })
}

/// Escapes the LaTeX special characters in data-derived text.
pub fn latex_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '#' => out.push_str("\\#"),
            '$' => out.push_str("\\$"),
            '%' => out.push_str("\\%"),
            '&' => out.push_str("\\&"),
            '_' => out.push_str("\\_"),
            '{' => out.push_str("\\{"),
            '}' => out.push_str("\\}"),
            '~' => out.push_str("\\textasciitilde{}"),
            '^' => out.push_str("\\textasciicircum{}"),
            '\\' => out.push_str("\\textbackslash{}"),
            _ => out.push(c),
        }
    }
    out
}

/// Flattens text for use inside a heading.
fn inline(text: &str) -> String {
    text.replace(['\n', '\r'], " ")
}

/// Escapes Markdown structure hazards in data-derived text: a line-leading
/// `#` would otherwise become a heading and break the hierarchy.
fn markdown_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for (i, line) in text.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if line.starts_with('#') {
            out.push('\\');
        }
        out.push_str(line);
    }
    out
}

fn heading_label(report: &WgReport) -> String {
    if report.wg_name == report.wg_acronym {
        inline(&report.wg_name)
    } else {
        alloc::format!("{} ({})", inline(&report.wg_name), report.wg_acronym)
    }
}

fn markdown_heading(out: &mut String, level: usize, text: &str) {
    out.push_str(&"#".repeat(level));
    out.push(' ');
    out.push_str(&inline(text));
    out.push_str("\n\n");
}

fn render_markdown_into(out: &mut String, report: &WgReport, base_level: usize) {
    markdown_heading(out, base_level, &heading_label(report));

    markdown_heading(out, base_level + 1, "Attendees Overview");
    markdown_heading(out, base_level + 2, ATTENDANCE_SUBHEADING);
    let overview = &report.attendees_overview;
    if !overview.narrative.is_empty() {
        out.push_str(&markdown_escape(&overview.narrative));
        out.push_str("\n\n");
    }
    out.push_str(&alloc::format!(
        "**Attendance:** {} participants.\n\n",
        overview.count
    ));
    let prominent = if overview.prominent_affiliations.is_empty() {
        "none".to_string()
    } else {
        overview
            .prominent_affiliations
            .iter()
            .map(|label| markdown_escape(&inline(label)))
            .collect::<Vec<_>>()
            .join(", ")
    };
    out.push_str(&alloc::format!("**Prominent affiliations:** {prominent}.\n\n"));

    markdown_heading(out, base_level + 1, "Meeting Discussions");
    if report.discussions.is_empty() {
        out.push_str("No minuted discussions were recorded.\n\n");
    }
    for discussion in &report.discussions {
        markdown_heading(out, base_level + 2, &discussion.title);
        if !discussion.body.is_empty() {
            out.push_str(&markdown_escape(&discussion.body));
            out.push_str("\n\n");
        }
        if !discussion.draft_links.is_empty() {
            let links = discussion
                .draft_links
                .iter()
                .map(|d| alloc::format!("[{d}]({DRAFT_URL_BASE}{d})"))
                .collect::<Vec<_>>()
                .join(", ");
            out.push_str(&alloc::format!("Drafts: {links}\n\n"));
        }
    }
}

const LATEX_LEVELS: [&str; 3] = ["section", "subsection", "subsubsection"];

fn latex_heading(out: &mut String, depth: usize, text: &str) {
    let level = LATEX_LEVELS[depth.min(LATEX_LEVELS.len() - 1)];
    out.push_str(&alloc::format!("\\{level}{{{}}}\n\n", latex_escape(&inline(text))));
}

fn render_latex_into(out: &mut String, report: &WgReport) {
    latex_heading(out, 0, &heading_label(report));

    latex_heading(out, 1, "Attendees Overview");
    latex_heading(out, 2, ATTENDANCE_SUBHEADING);
    let overview = &report.attendees_overview;
    if !overview.narrative.is_empty() {
        out.push_str(&latex_escape(&overview.narrative));
        out.push_str("\n\n");
    }
    out.push_str(&alloc::format!(
        "\\textbf{{Attendance:}} {} participants.\n\n",
        overview.count
    ));
    let prominent = if overview.prominent_affiliations.is_empty() {
        "none".to_string()
    } else {
        overview
            .prominent_affiliations
            .iter()
            .map(|label| latex_escape(&inline(label)))
            .collect::<Vec<_>>()
            .join(", ")
    };
    out.push_str(&alloc::format!(
        "\\textbf{{Prominent affiliations:}} {prominent}.\n\n"
    ));

    latex_heading(out, 1, "Meeting Discussions");
    if report.discussions.is_empty() {
        out.push_str("No minuted discussions were recorded.\n\n");
    }
    for discussion in &report.discussions {
        latex_heading(out, 2, &discussion.title);
        if !discussion.body.is_empty() {
            out.push_str(&latex_escape(&discussion.body));
            out.push_str("\n\n");
        }
        if !discussion.draft_links.is_empty() {
            let links = discussion
                .draft_links
                .iter()
                .map(|d| alloc::format!("\\href{{{DRAFT_URL_BASE}{d}}}{{{}}}", latex_escape(d)))
                .collect::<Vec<_>>()
                .join(", ");
            out.push_str(&alloc::format!("Drafts: {links}\n\n"));
        }
    }
}

/// Renders one report as a standalone document (Markdown) or an includable
/// fragment (LaTeX; the master supplies the preamble).
pub fn render(report: &WgReport, format: OutputFormat) -> RenderedDocument {
    let mut body = String::new();
    match format {
        OutputFormat::Markdown => render_markdown_into(&mut body, report, 1),
        OutputFormat::Latex => render_latex_into(&mut body, report),
    }
    RenderedDocument {
        format,
        body,
        wg_count: 1,
    }
}

/// GitHub-style anchor for a Markdown heading.
fn slug(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            out.push(c);
        } else if c == ' ' || c == '-' {
            out.push('-');
        }
    }
    out
}

/// Assembles the single meeting document: title block, attribution, table
/// of contents, then one chapter per WG in ascending acronym order.
pub fn assemble_master(
    reports: &[WgReport],
    meeting_number: u32,
    format: OutputFormat,
    attribution: &str,
) -> Result<RenderedDocument, ReportError> {
    let mut ordered: Vec<&WgReport> = reports.iter().collect();
    ordered.sort_by(|a, b| a.wg_acronym.cmp(&b.wg_acronym));
    for pair in ordered.windows(2) {
        if pair[0].wg_acronym == pair[1].wg_acronym {
            return Err(ReportError::DuplicateWg(pair[0].wg_acronym.clone()));
        }
    }

    let title = alloc::format!("IETF{meeting_number} Meeting Report");
    let mut body = String::new();
    match format {
        OutputFormat::Markdown => {
            markdown_heading(&mut body, 1, &title);
            body.push_str(&markdown_escape(&inline(attribution)));
            body.push_str("\n\n");
            markdown_heading(&mut body, 2, "Contents");
            for report in &ordered {
                let label = heading_label(report);
                body.push_str(&alloc::format!("- [{label}](#{})\n", slug(&label)));
            }
            body.push('\n');
            for report in &ordered {
                render_markdown_into(&mut body, report, 2);
            }
        }
        OutputFormat::Latex => {
            body.push_str("\\documentclass{article}\n");
            body.push_str("\\usepackage[utf8]{inputenc}\n");
            body.push_str("\\usepackage{hyperref}\n");
            body.push_str(&alloc::format!("\\title{{{}}}\n", latex_escape(&title)));
            body.push_str(&alloc::format!(
                "\\author{{{}}}\n",
                latex_escape(&inline(attribution))
            ));
            body.push_str("\\date{}\n");
            body.push_str("\\begin{document}\n");
            body.push_str("\\maketitle\n");
            body.push_str("\\tableofcontents\n\n");
            for report in &ordered {
                render_latex_into(&mut body, report);
            }
            body.push_str("\\end{document}\n");
        }
    }

    Ok(RenderedDocument {
        format,
        body,
        wg_count: ordered.len() as u32,
    })
}

/// Structural validity checks for rendered documents. These parse the
/// output independently of the renderer, so tests can hold generated
/// documents against them.
pub mod check {
    use alloc::string::{String, ToString};
    use alloc::vec::Vec;

    /// Verifies that unescaped braces balance and every `\begin{env}` has a
    /// matching `\end{env}`.
    pub fn latex_balanced(text: &str) -> Result<(), String> {
        let mut depth: i64 = 0;
        let mut environments: Vec<String> = Vec::new();
        let mut chars = text.chars().peekable();

        while let Some(c) = chars.next() {
            match c {
                '\\' => match chars.peek().copied() {
                    None => return Err("dangling backslash at end of input".to_string()),
                    Some(next) if next.is_ascii_alphabetic() => {
                        let mut word = String::new();
                        while let Some(&w) = chars.peek() {
                            if w.is_ascii_alphabetic() {
                                word.push(w);
                                chars.next();
                            } else {
                                break;
                            }
                        }
                        if word == "begin" || word == "end" {
                            if chars.next() != Some('{') {
                                return Err(alloc::format!("\\{word} without environment name"));
                            }
                            let mut env = String::new();
                            loop {
                                match chars.next() {
                                    Some('}') => break,
                                    Some(e) => env.push(e),
                                    None => {
                                        return Err(alloc::format!(
                                            "unterminated \\{word}{{{env}"
                                        ))
                                    }
                                }
                            }
                            if word == "begin" {
                                environments.push(env);
                            } else {
                                match environments.pop() {
                                    Some(open) if open == env => {}
                                    Some(open) => {
                                        return Err(alloc::format!(
                                            "\\end{{{env}}} closes \\begin{{{open}}}"
                                        ))
                                    }
                                    None => {
                                        return Err(alloc::format!("\\end{{{env}}} without begin"))
                                    }
                                }
                            }
                        }
                    }
                    // Escaped character such as \{, \}, \%, \\ — skip it.
                    Some(_) => {
                        chars.next();
                    }
                },
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth < 0 {
                        return Err("unmatched closing brace".to_string());
                    }
                }
                _ => {}
            }
        }

        if depth != 0 {
            return Err(alloc::format!("{depth} unclosed braces"));
        }
        if let Some(env) = environments.pop() {
            return Err(alloc::format!("\\begin{{{env}}} never closed"));
        }
        Ok(())
    }

    /// Verifies that ATX heading levels never jump by more than one.
    pub fn markdown_headings_contiguous(text: &str) -> Result<(), String> {
        let mut previous = 0usize;
        for (number, line) in text.lines().enumerate() {
            let hashes = line.chars().take_while(|&c| c == '#').count();
            if hashes == 0 || hashes > 6 {
                continue;
            }
            if !matches!(line.as_bytes().get(hashes), None | Some(b' ')) {
                continue;
            }
            if previous != 0 && hashes > previous + 1 {
                return Err(alloc::format!(
                    "line {}: heading level jumps from {previous} to {hashes}",
                    number + 1
                ));
            }
            previous = hashes;
        }
        Ok(())
    }
}
