//! Participant and affiliation identity resolution.
//!
//! Attendance exports spell the same people and organizations many ways
//! ("Ericsson" / "Ericsson AB", "J. Smith" / "J Smith"). This module
//! normalizes surface strings, scores them with Levenshtein-based ratios,
//! and greedily clusters them into [`CanonicalEntity`] values, then tallies
//! per-session attendance over the resolved identities.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::records::{AttendanceScope, RawAttendanceRow};

/// Reserved affiliation for rows with an empty affiliation field.
pub const UNAFFILIATED_LABEL: &str = "unaffiliated";

/// Default score an affiliation form must reach to join a cluster.
pub const DEFAULT_AFFILIATION_THRESHOLD: f64 = 85.0;
/// Default score a person form must reach to join a cluster. Person merges
/// are conservative: a one-letter difference in a short name must not merge.
pub const DEFAULT_PERSON_THRESHOLD: f64 = 92.0;

/// A surface string together with its canonical comparison form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedString {
    pub original: String,
    pub normalized: String,
}

/// How a [`MatchScore`] was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchMethod {
    LevRatio,
    TokenSort,
    TokenSet,
}

/// A similarity score in `[0, 100]`, two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub value: f64,
    pub method: MatchMethod,
}

/// What kind of identity an entity names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    Person,
    Affiliation,
}

impl EntityKind {
    fn id_prefix(self) -> &'static str {
        match self {
            EntityKind::Person => "person",
            EntityKind::Affiliation => "affiliation",
        }
    }
}

/// A resolved identity: one cluster of surface forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalEntity {
    /// Stable opaque identifier, derived from the founding normalized form.
    pub id: String,
    pub kind: EntityKind,
    /// Display form: the most frequent original spelling of the founder.
    pub label: String,
    /// Every observed spelling, raw and normalized. Empty only for the
    /// reserved "unaffiliated" entity.
    pub surface_forms: BTreeSet<String>,
    /// Number of rows resolved to this entity.
    pub frequency: u32,
}

/// Clustering thresholds; both scores live on the 0–100 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub affiliation: f64,
    pub person: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            affiliation: DEFAULT_AFFILIATION_THRESHOLD,
            person: DEFAULT_PERSON_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("threshold {0} out of range (0, 100]")]
    InvalidThreshold(String),
}

fn canon_pass(s: &str) -> String {
    let folded: String = s.nfkc().collect();
    let lowered: String = folded.chars().flat_map(char::to_lowercase).collect();
    let mut out = String::with_capacity(lowered.len());
    let mut pending_space = false;
    for c in lowered.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            // Punctuation and whitespace both collapse to a single separator.
            pending_space = true;
        }
    }
    out
}

/// Canonicalizes a surface string for comparison.
///
/// NFKC fold, lowercase, every non-alphanumeric run replaced by a single
/// space, trimmed. Idempotent: the pass is iterated to a fixpoint, which in
/// practice is reached after one round.
pub fn normalize(s: &str) -> NormalizedString {
    let mut current = canon_pass(s);
    for _ in 0..4 {
        let next = canon_pass(&current);
        if next == current {
            break;
        }
        current = next;
    }
    NormalizedString {
        original: s.to_string(),
        normalized: current,
    }
}

/// Levenshtein distance in Unicode scalar values, unit edit costs.
/// Two-row iteration; the tests check it against a full-matrix oracle.
fn edit_distance(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr: Vec<usize> = Vec::new();
    curr.resize(b.len() + 1, 0);
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            curr[j + 1] = substitute.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        core::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Rounds `100 * (max_len - distance) / max_len` half-up to two decimals,
/// returned as centi-points. Unequal inputs are capped at 99.99 so that a
/// perfect 100.00 always means the strings were equal.
fn ratio_centi(distance: usize, max_len: usize) -> u32 {
    if max_len == 0 {
        return 10_000;
    }
    if distance == 0 {
        return 10_000;
    }
    let kept = (max_len - distance.min(max_len)) as u64;
    let numer = kept * 10_000;
    let denom = max_len as u64;
    let mut rounded = numer / denom;
    if (numer % denom) * 2 >= denom {
        rounded += 1;
    }
    rounded.min(9_999) as u32
}

fn lev_ratio_value(a: &str, b: &str) -> f64 {
    let ac: Vec<char> = a.chars().collect();
    let bc: Vec<char> = b.chars().collect();
    let distance = edit_distance(&ac, &bc);
    f64::from(ratio_centi(distance, ac.len().max(bc.len()))) / 100.0
}

/// Plain Levenshtein ratio over already-normalized strings.
///
/// `100 * (1 - distance / max_len)`, 100.00 when both are empty, rounded
/// half-up to two decimals.
pub fn lev_ratio(a: &str, b: &str) -> MatchScore {
    MatchScore {
        value: lev_ratio_value(a, b),
        method: MatchMethod::LevRatio,
    }
}

fn sorted_tokens(s: &str) -> Vec<&str> {
    let mut tokens: Vec<&str> = s.split(' ').filter(|t| !t.is_empty()).collect();
    tokens.sort_unstable();
    tokens
}

/// Levenshtein ratio over space-joined sorted tokens; word order insensitive.
pub fn token_sort_ratio(a: &str, b: &str) -> MatchScore {
    MatchScore {
        value: lev_ratio_value(&sorted_tokens(a).join(" "), &sorted_tokens(b).join(" ")),
        method: MatchMethod::TokenSort,
    }
}

/// Token-set ratio: compares the sorted token intersection against each
/// side's remainder and takes the best of the three pairings. Robust to
/// suffixes like "AB" or "Inc" on one side.
pub fn token_set_ratio(a: &str, b: &str) -> MatchScore {
    let set_a: BTreeSet<&str> = a.split(' ').filter(|t| !t.is_empty()).collect();
    let set_b: BTreeSet<&str> = b.split(' ').filter(|t| !t.is_empty()).collect();

    let intersection: Vec<&str> = set_a.intersection(&set_b).copied().collect();
    let only_a: Vec<&str> = set_a.difference(&set_b).copied().collect();
    let only_b: Vec<&str> = set_b.difference(&set_a).copied().collect();

    let join = |parts: &[&[&str]]| -> String {
        let mut words: Vec<&str> = Vec::new();
        for part in parts {
            words.extend_from_slice(part);
        }
        words.join(" ")
    };

    let t0 = join(&[&intersection]);
    let t1 = join(&[&intersection, &only_a]);
    let t2 = join(&[&intersection, &only_b]);

    let best = lev_ratio_value(&t0, &t1)
        .max(lev_ratio_value(&t0, &t2))
        .max(lev_ratio_value(&t1, &t2));
    MatchScore {
        value: best,
        method: MatchMethod::TokenSet,
    }
}

fn score_for_kind(kind: EntityKind, a: &str, b: &str) -> f64 {
    match kind {
        EntityKind::Person => token_sort_ratio(a, b).value,
        EntityKind::Affiliation => token_set_ratio(a, b).value,
    }
}

struct FormStats {
    normalized: String,
    count: u32,
    originals: BTreeMap<String, u32>,
}

impl FormStats {
    fn label(&self) -> String {
        self.originals
            .iter()
            .max_by(|(la, ca), (lb, cb)| ca.cmp(cb).then(lb.cmp(la)))
            .map(|(l, _)| l.clone())
            .unwrap_or_default()
    }
}

struct Cluster {
    founder: String,
    label: String,
    surface_forms: BTreeSet<String>,
    frequency: u32,
}

/// Greedy frequency-first clustering of normalized surface forms.
///
/// Distinct normalized forms are visited by descending frequency (ties
/// broken lexicographically); each either joins the first existing cluster
/// whose founding form scores at or above `threshold`, or founds a new one.
/// Deterministic for a fixed input multiset, so shuffling the rows can not
/// change the outcome.
pub fn cluster(
    rows: &[NormalizedString],
    kind: EntityKind,
    threshold: f64,
) -> Result<Vec<CanonicalEntity>, ResolveError> {
    if !(threshold > 0.0 && threshold <= 100.0) {
        return Err(ResolveError::InvalidThreshold(format_f64(threshold)));
    }

    let mut stats: BTreeMap<String, FormStats> = BTreeMap::new();
    for row in rows {
        let entry = stats
            .entry(row.normalized.clone())
            .or_insert_with(|| FormStats {
                normalized: row.normalized.clone(),
                count: 0,
                originals: BTreeMap::new(),
            });
        entry.count += 1;
        *entry.originals.entry(row.original.clone()).or_insert(0) += 1;
    }

    let mut order: Vec<&FormStats> = stats.values().collect();
    order.sort_by(|a, b| b.count.cmp(&a.count).then(a.normalized.cmp(&b.normalized)));

    let mut clusters: Vec<Cluster> = Vec::new();
    for form in order {
        let target = clusters
            .iter_mut()
            .find(|c| score_for_kind(kind, &form.normalized, &c.founder) >= threshold);
        match target {
            Some(c) => {
                c.surface_forms.insert(form.normalized.clone());
                c.surface_forms.extend(form.originals.keys().cloned());
                c.frequency += form.count;
            }
            None => {
                let mut surface_forms: BTreeSet<String> =
                    form.originals.keys().cloned().collect();
                surface_forms.insert(form.normalized.clone());
                clusters.push(Cluster {
                    founder: form.normalized.clone(),
                    label: form.label(),
                    surface_forms,
                    frequency: form.count,
                });
            }
        }
    }

    Ok(clusters
        .into_iter()
        .map(|c| CanonicalEntity {
            id: alloc::format!("{}:{}", kind.id_prefix(), c.founder),
            kind,
            label: c.label,
            surface_forms: c.surface_forms,
            frequency: c.frequency,
        })
        .collect())
}

fn format_f64(v: f64) -> String {
    alloc::format!("{v}")
}

/// Attendance tallies for one WG session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTally {
    /// Unique resolved persons who signed in.
    pub attendee_count: u32,
    /// Affiliation ranking: (label, unique persons), descending count,
    /// ties lexicographic by label.
    pub affiliations: Vec<(String, u32)>,
}

/// Per-scope attendance counts over resolved entities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttendanceLedger {
    /// Unique persons on the meeting-wide registration list.
    pub meeting_attendees: u32,
    pub sessions: BTreeMap<String, SessionTally>,
}

/// Resolved entities plus the ledger computed over them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub entities: Vec<CanonicalEntity>,
    pub ledger: AttendanceLedger,
}

/// Resolves raw attendance rows into canonical identities and tallies them.
///
/// Names and affiliations are clustered independently over the whole input
/// so an identity stays consistent across sessions. Empty affiliations map
/// to the reserved [`UNAFFILIATED_LABEL`] entity.
pub fn resolve_attendance(
    rows: &[RawAttendanceRow],
    thresholds: &Thresholds,
) -> Result<Resolution, ResolveError> {
    let person_forms: Vec<NormalizedString> =
        rows.iter().map(|r| normalize(&r.raw_name)).collect();
    let persons = cluster(&person_forms, EntityKind::Person, thresholds.person)?;

    let affiliation_forms: Vec<NormalizedString> = rows
        .iter()
        .filter(|r| !r.raw_affiliation.trim().is_empty())
        .map(|r| normalize(&r.raw_affiliation))
        .collect();
    let mut affiliations = cluster(
        &affiliation_forms,
        EntityKind::Affiliation,
        thresholds.affiliation,
    )?;

    let unaffiliated_rows = rows.len() - affiliation_forms.len();
    let unaffiliated_id = alloc::format!("affiliation:{UNAFFILIATED_LABEL}");
    if unaffiliated_rows > 0 {
        // A literal "unaffiliated" surface form founds the same id; fold the
        // reserved rows into it instead of duplicating the identifier.
        match affiliations.iter_mut().find(|e| e.id == unaffiliated_id) {
            Some(existing) => existing.frequency += unaffiliated_rows as u32,
            None => affiliations.push(CanonicalEntity {
                id: unaffiliated_id.clone(),
                kind: EntityKind::Affiliation,
                label: UNAFFILIATED_LABEL.to_string(),
                surface_forms: BTreeSet::new(),
                frequency: unaffiliated_rows as u32,
            }),
        }
    }

    let person_of: BTreeMap<&str, &CanonicalEntity> = persons
        .iter()
        .flat_map(|e| e.surface_forms.iter().map(move |f| (f.as_str(), e)))
        .collect();
    let affiliation_of: BTreeMap<&str, &CanonicalEntity> = affiliations
        .iter()
        .flat_map(|e| e.surface_forms.iter().map(move |f| (f.as_str(), e)))
        .collect();

    let mut meeting_persons: BTreeSet<&str> = BTreeSet::new();
    let mut session_persons: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    // Unique (person, affiliation) pairs per session, keyed by label for the
    // final ranking.
    let mut session_pairs: BTreeMap<&str, BTreeSet<(&str, &str)>> = BTreeMap::new();
    let mut affiliation_labels: BTreeMap<&str, &str> = BTreeMap::new();

    for row in rows {
        let person_id = person_of
            .get(normalize(&row.raw_name).normalized.as_str())
            .map(|e| e.id.as_str())
            .unwrap_or_default();
        let affiliation = if row.raw_affiliation.trim().is_empty() {
            None
        } else {
            affiliation_of
                .get(normalize(&row.raw_affiliation).normalized.as_str())
                .copied()
        };
        let (affiliation_id, affiliation_label) = match affiliation {
            Some(e) => (e.id.as_str(), e.label.as_str()),
            None => (unaffiliated_id.as_str(), UNAFFILIATED_LABEL),
        };
        affiliation_labels.insert(affiliation_id, affiliation_label);

        match &row.scope {
            AttendanceScope::MeetingWide => {
                meeting_persons.insert(person_id);
            }
            AttendanceScope::Session(wg) => {
                session_persons.entry(wg).or_default().insert(person_id);
                session_pairs
                    .entry(wg)
                    .or_default()
                    .insert((person_id, affiliation_id));
            }
        }
    }

    let mut sessions = BTreeMap::new();
    for (wg, persons_in_session) in &session_persons {
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        if let Some(pairs) = session_pairs.get(wg) {
            for (_, affiliation_id) in pairs {
                *counts.entry(affiliation_id).or_insert(0) += 1;
            }
        }
        let mut ranking: Vec<(String, u32)> = counts
            .into_iter()
            .map(|(id, n)| (affiliation_labels[id].to_string(), n))
            .collect();
        ranking.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        sessions.insert(
            wg.to_string(),
            SessionTally {
                attendee_count: persons_in_session.len() as u32,
                affiliations: ranking,
            },
        );
    }

    let ledger = AttendanceLedger {
        meeting_attendees: meeting_persons.len() as u32,
        sessions,
    };

    let mut entities = persons;
    entities.extend(affiliations);
    Ok(Resolution { entities, ledger })
}
