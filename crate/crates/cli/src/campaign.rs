//! Campaign files.
//!
//! ```text
//! # shared settings, inherited by every job
//! out = reports
//! seed = 7
//!
//! [job embed]
//! kind = check
//! inequality = embed_p
//! field = power(-0.3)
//! domain = kind=halfplane omega=0
//! ```
//!
//! Keys before the first `[job <id>]` header are shared defaults. Values run
//! to the end of the line; `#` starts a comment.

use std::collections::BTreeSet;

use logtrace::testbed;
use logtrace::verify::InequalityId;
use logtrace::weighted_pde::Weighting;
use logtrace::Domain;

use crate::jobs::{JobKind, JobSpec};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct Campaign {
    pub out: Option<String>,
    pub seed: u64,
    pub jobs: Vec<JobSpec>,
}

const JOB_KEYS: [&str; 15] = [
    "kind", "inequality", "problem", "domain", "field", "p", "lambda", "beta", "grid", "h", "k", "weighting", "levels", "tol", "subspace",
];

fn err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse { line, message: message.into() }
}

/// Raw `key = value` pairs of one section, with their line numbers.
#[derive(Debug, Clone, Default)]
struct Section {
    id: String,
    line: usize,
    pairs: Vec<(usize, String, String)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.pairs.iter().rev().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()))
    }
}

pub fn parse(text: &str) -> Result<Campaign, CliError> {
    let mut shared = Section::default();
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let inner = header.strip_suffix(']').ok_or_else(|| err(line, "unterminated section header"))?;
            let mut words = inner.split_whitespace();
            match (words.next(), words.next(), words.next()) {
                (Some("job"), Some(id), None) => {
                    if sections.iter().any(|s| s.id == id) {
                        return Err(err(line, format!("duplicate job id `{id}`")));
                    }
                    sections.push(Section { id: id.to_string(), line, pairs: Vec::new() });
                }
                _ => return Err(err(line, format!("expected `[job <id>]`, got `[{inner}]`"))),
            }
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let known = JOB_KEYS.contains(&k.as_str()) || (sections.is_empty() && (k == "out" || k == "seed"));
        if !known {
            return Err(err(line, format!("unknown key `{k}`")));
        }
        match sections.last_mut() {
            Some(s) => s.pairs.push((line, k, v)),
            None => shared.pairs.push((line, k, v)),
        }
    }
    let out = shared.get("out").map(|(_, v)| v.to_string());
    let seed = match shared.get("seed") {
        Some((l, v)) => v.parse().map_err(|_| err(l, format!("seed must be an unsigned integer, got `{v}`")))?,
        None => 0,
    };
    let mut jobs = Vec::with_capacity(sections.len());
    for s in &sections {
        let mut merged = shared.clone();
        merged.pairs.retain(|(_, k, _)| k != "out" && k != "seed");
        merged.pairs.extend(s.pairs.iter().cloned());
        merged.id = s.id.clone();
        merged.line = s.line;
        jobs.push(job_from(&merged)?);
    }
    let ids: BTreeSet<&str> = jobs.iter().map(|j| j.id.as_str()).collect();
    debug_assert_eq!(ids.len(), jobs.len());
    Ok(Campaign { out, seed, jobs })
}

fn num(s: &Section, key: &str) -> Result<Option<f64>, CliError> {
    match s.get(key) {
        Some((l, v)) => v.parse::<f64>().map(Some).map_err(|_| err(l, format!("`{key}` is not a number: `{v}`"))),
        None => Ok(None),
    }
}

pub fn parse_grid(v: &str) -> Option<Vec<f64>> {
    let g: Option<Vec<f64>> = v.split(',').map(|t| t.trim().parse().ok()).collect();
    g.filter(|g| !g.is_empty())
}

fn job_from(s: &Section) -> Result<JobSpec, CliError> {
    let (kl, kind) = s.get("kind").ok_or_else(|| err(s.line, format!("job `{}` has no `kind`", s.id)))?;
    let target_key = if matches!(kind, "check" | "scan") { "inequality" } else { "problem" };
    let (tl, target) = s
        .get(target_key)
        .ok_or_else(|| err(s.line, format!("job `{}` needs `{target_key}`", s.id)))?;
    let kind = match kind {
        "check" => JobKind::Check,
        "scan" => JobKind::Scan,
        "spectrum" => JobKind::Spectrum,
        "solve" => JobKind::Solve,
        other => return Err(err(kl, format!("unknown job kind `{other}`"))),
    };
    let mut job = JobSpec::new(&s.id, kind, target);
    match kind {
        JobKind::Check | JobKind::Scan => {
            if InequalityId::parse(target).is_none() {
                return Err(err(tl, format!("unknown inequality `{target}`")));
            }
        }
        JobKind::Spectrum | JobKind::Solve => {
            if !crate::jobs::known_problem(kind, target) {
                return Err(err(tl, format!("unknown {} problem `{target}`", if kind == JobKind::Spectrum { "spectrum" } else { "solve" })));
            }
        }
    }
    if let Some((l, f)) = s.get("field") {
        if testbed::entry(f).is_none() {
            return Err(err(l, format!("unknown field `{f}` (see `logtrace list-catalog`)")));
        }
        job.field = Some(f.to_string());
    }
    if let Some((l, d)) = s.get("domain") {
        job.domain = Some(Domain::parse(d).map_err(|e| err(l, e.to_string()))?);
    }
    if let Some((l, w)) = s.get("weighting") {
        job.weighting = Weighting::parse(w).ok_or_else(|| err(l, format!("unknown weighting `{w}`")))?;
    }
    if let Some((l, g)) = s.get("grid") {
        job.grid = Some(parse_grid(g).ok_or_else(|| err(l, format!("grid must be a comma-separated list of numbers, got `{g}`")))?);
    }
    if let Some((l, sub)) = s.get("subspace") {
        job.boundary_subspace = match sub {
            "mean" | "mean_zero" => false,
            "boundary" | "boundary_mean_zero" => true,
            other => return Err(err(l, format!("unknown subspace `{other}`"))),
        };
    }
    job.p = num(s, "p")?.unwrap_or(job.p);
    job.lambda = num(s, "lambda")?.unwrap_or(job.lambda);
    job.beta = num(s, "beta")?;
    job.h = num(s, "h")?;
    job.tol = num(s, "tol")?;
    if let Some((l, v)) = s.get("k") {
        job.k = v.parse().map_err(|_| err(l, format!("`k` must be a positive integer, got `{v}`")))?;
    }
    if let Some((l, v)) = s.get("levels") {
        job.levels = Some(v.parse().map_err(|_| err(l, format!("`levels` must be a positive integer, got `{v}`")))?);
    }
    job.validate().map_err(|m| err(s.line, m))?;
    Ok(job)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_campaign() {
        let c = parse("# nothing\n\nout = x\n").unwrap();
        assert!(c.jobs.is_empty());
        assert_eq!(c.out.as_deref(), Some("x"));
    }

    #[test]
    fn shared_defaults_and_jobs() {
        let c = parse("p = 4\n[job a]\nkind = check\ninequality = embed_p\nfield = power(-0.2)\n[job b]\nkind = scan\ninequality = embed_inf\np = 2\n").unwrap();
        assert_eq!(c.jobs.len(), 2);
        assert_eq!(c.jobs[0].p, 4.0);
        assert_eq!(c.jobs[1].p, 2.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse("[job a]\nkind = check\ninequality = embed_p\nfield = nope\n").unwrap_err();
        assert!(matches!(e, CliError::Parse { line: 4, .. }), "{e}");
        let e = parse("[job a]\nkind = check\n[job a]\n").unwrap_err();
        assert!(matches!(e, CliError::Parse { line: 3, .. }), "{e}");
        let e = parse("colour = red\n").unwrap_err();
        assert!(matches!(e, CliError::Parse { line: 1, .. }));
        let e = parse("[job a]\nkind = check\ninequality = embed_p\nfield = x\np = two\n").unwrap_err();
        assert!(matches!(e, CliError::Parse { line: 5, .. }));
    }
}
