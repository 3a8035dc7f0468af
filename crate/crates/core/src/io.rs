//! File formats: CSV loaders/writers for content, responses, item
//! parameters, prerequisites, and learners; JSON reports; config hashing.
//!
//! Skill and form columns are 1-indexed in files (`skill_1..skill_K`,
//! `rep_1..rep_R`) and 0-indexed internally. Loaders reject malformed cells
//! with line numbers instead of coercing.

use std::collections::HashSet;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ContentItem, Difficulty, LearnerState, PrereqGraph, QMatrix, SkillSet};
use crate::psychometrics::{ItemParams3PL, ItemParamsDINA};

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

fn parse_flag(cell: &str, path: &Path, line: usize, column: &str) -> Result<bool> {
    match cell.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(parse_err(
            path,
            line,
            format!("column `{column}`: expected 0 or 1, got `{other}`"),
        )),
    }
}

/// Indices of `prefix_1..prefix_n` columns in a header, validated to be
/// contiguous and 1-based.
fn indexed_columns(header: &[String], prefix: &str) -> Vec<usize> {
    let mut cols = Vec::new();
    for (i, name) in header.iter().enumerate() {
        if let Some(nstr) = name.strip_prefix(prefix) {
            if nstr.parse::<usize>().map(|n| n == cols.len() + 1).unwrap_or(false) {
                cols.push(i);
            }
        }
    }
    cols
}

/// Content CSV: `content_id,duration_min,level,skill_1..skill_K[,rep_1..rep_R]`.
pub fn load_content_csv(path: &Path) -> Result<Vec<ContentItem>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> =
        reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    for (want, got) in ["content_id", "duration_min", "level"].iter().zip(&header) {
        if want != got {
            return Err(parse_err(path, 1, format!("expected column `{want}`, got `{got}`")));
        }
    }
    let skill_cols = indexed_columns(&header, "skill_");
    let rep_cols = indexed_columns(&header, "rep_");
    if skill_cols.is_empty() {
        return Err(parse_err(path, 1, "no skill_1..skill_K columns found"));
    }

    let mut items = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        if record.len() != header.len() {
            return Err(parse_err(
                path,
                line,
                format!("ragged row: {} cells, expected {}", record.len(), header.len()),
            ));
        }
        let id = record[0].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(parse_err(path, line, format!("duplicate content_id `{id}`")));
        }
        let duration: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad duration `{}`", &record[1])))?;
        if !(duration > 0.0) {
            return Err(parse_err(path, line, format!("nonpositive duration {duration}")));
        }
        let level = Difficulty::parse(record[2].trim())
            .ok_or_else(|| parse_err(path, line, format!("bad level `{}`", &record[2])))?;
        let mut coverage = SkillSet::empty();
        for (k, &col) in skill_cols.iter().enumerate() {
            if parse_flag(&record[col], path, line, &header[col])? {
                coverage.insert(k);
            }
        }
        if coverage.is_empty() {
            return Err(parse_err(path, line, "content covers no skill"));
        }
        let mut item = ContentItem::new(id, coverage, duration, level)
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        if !rep_cols.is_empty() {
            let mut tags = Vec::with_capacity(rep_cols.len());
            for &col in &rep_cols {
                tags.push(parse_flag(&record[col], path, line, &header[col])?);
            }
            item = item.with_tags(tags);
        }
        items.push(item);
    }
    Ok(items)
}

pub fn write_content_csv(path: &Path, items: &[ContentItem], n_skills: usize) -> Result<()> {
    let n_forms = items.iter().map(|c| c.representation_tags.len()).max().unwrap_or(0);
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["content_id".to_string(), "duration_min".into(), "level".into()];
    header.extend((1..=n_skills).map(|k| format!("skill_{k}")));
    header.extend((1..=n_forms).map(|r| format!("rep_{r}")));
    writer.write_record(&header)?;
    for item in items {
        let mut row = vec![
            item.id.clone(),
            format!("{}", item.duration_minutes),
            item.level.as_str().to_string(),
        ];
        for k in 0..n_skills {
            row.push(if item.coverage.contains(k) { "1" } else { "0" }.into());
        }
        for r in 0..n_forms {
            let tagged = item.representation_tags.get(r).copied().unwrap_or(false);
            row.push(if tagged { "1" } else { "0" }.into());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Responses CSV: `learner_id,item_1..item_I` with binary cells. Returns
/// (learner ids, item column names, matrix).
pub fn load_responses_csv(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Vec<u8>>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> =
        reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.first().map(String::as_str) != Some("learner_id") {
        return Err(parse_err(path, 1, "first column must be learner_id"));
    }
    let item_ids: Vec<String> = header[1..].to_vec();
    let mut learner_ids = Vec::new();
    let mut matrix = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        if record.len() != header.len() {
            return Err(parse_err(
                path,
                line,
                format!("ragged row: {} cells, expected {}", record.len(), header.len()),
            ));
        }
        learner_ids.push(record[0].trim().to_string());
        let mut row = Vec::with_capacity(item_ids.len());
        for (j, cell) in record.iter().skip(1).enumerate() {
            match cell.trim() {
                "0" => row.push(0u8),
                "1" => row.push(1u8),
                other => {
                    return Err(parse_err(
                        path,
                        line,
                        format!("non-binary cell `{other}` at item column {}", j + 1),
                    ))
                }
            }
        }
        matrix.push(row);
    }
    Ok((learner_ids, item_ids, matrix))
}

pub fn write_responses_csv(
    path: &Path,
    learner_ids: &[String],
    item_ids: &[String],
    matrix: &[Vec<u8>],
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["learner_id".to_string()];
    header.extend(item_ids.iter().cloned());
    writer.write_record(&header)?;
    for (id, row) in learner_ids.iter().zip(matrix) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

/// One row of the item-parameter file. 3PL fields use the slope-intercept
/// form (a, d); c defaults to 0 when the column is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemParamsRecord {
    pub item_id: String,
    pub irt: Option<ItemParams3PL>,
    pub dina: Option<ItemParamsDINA>,
}

/// Item parameters CSV: `item_id[,a,d][,c][,guess,slip]`.
pub fn load_item_params_csv(path: &Path) -> Result<Vec<ItemParamsRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> =
        reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.first().map(String::as_str) != Some("item_id") {
        return Err(parse_err(path, 1, "first column must be item_id"));
    }
    let col = |name: &str| header.iter().position(|h| h == name);
    let (ca, cd, cc) = (col("a"), col("d"), col("c"));
    let (cg, cs) = (col("guess"), col("slip"));
    if ca.is_some() != cd.is_some() {
        return Err(parse_err(path, 1, "columns a and d must appear together"));
    }
    if cg.is_some() != cs.is_some() {
        return Err(parse_err(path, 1, "columns guess and slip must appear together"));
    }

    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        let cell = |c: Option<usize>| -> Option<&str> {
            c.map(|i| record.get(i).unwrap_or("").trim()).filter(|s| !s.is_empty())
        };
        let num = |c: Option<usize>, name: &str| -> Result<Option<f64>> {
            cell(c)
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| parse_err(path, line, format!("bad `{name}` value `{s}`")))
                })
                .transpose()
        };
        let irt = match (num(ca, "a")?, num(cd, "d")?) {
            (Some(a), Some(d)) => {
                let c = num(cc, "c")?.unwrap_or(0.0);
                Some(
                    ItemParams3PL::from_slope_intercept(a, d, c)
                        .map_err(|e| parse_err(path, line, e.to_string()))?,
                )
            }
            (None, None) => None,
            _ => return Err(parse_err(path, line, "a and d must both be present or empty")),
        };
        let dina = match (num(cg, "guess")?, num(cs, "slip")?) {
            (Some(guess), Some(slip)) => Some(
                ItemParamsDINA::new(slip, guess)
                    .map_err(|e| parse_err(path, line, e.to_string()))?,
            ),
            (None, None) => None,
            _ => {
                return Err(parse_err(path, line, "guess and slip must both be present or empty"))
            }
        };
        out.push(ItemParamsRecord {
            item_id: record.get(0).unwrap_or("").trim().to_string(),
            irt,
            dina,
        });
    }
    Ok(out)
}

pub fn write_item_params_csv(path: &Path, records: &[ItemParamsRecord]) -> Result<()> {
    let any_irt = records.iter().any(|r| r.irt.is_some());
    let any_dina = records.iter().any(|r| r.dina.is_some());
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["item_id".to_string()];
    if any_irt {
        header.extend(["a".into(), "d".into(), "c".into()]);
    }
    if any_dina {
        header.extend(["guess".into(), "slip".into()]);
    }
    writer.write_record(&header)?;
    for r in records {
        let mut row = vec![r.item_id.clone()];
        if any_irt {
            match &r.irt {
                Some(p) => {
                    // Back to slope-intercept: d = -a*b.
                    row.push(format!("{}", p.a));
                    row.push(format!("{}", -p.a * p.b));
                    row.push(format!("{}", p.c));
                }
                None => row.extend(["".into(), "".into(), "".into()]),
            }
        }
        if any_dina {
            match &r.dina {
                Some(p) => {
                    row.push(format!("{}", p.guess));
                    row.push(format!("{}", p.slip));
                }
                None => row.extend(["".into(), "".into()]),
            }
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Q-matrix CSV: `item_id,skill_1..skill_K`.
pub fn load_qmatrix_csv(path: &Path) -> Result<(Vec<String>, QMatrix)> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> =
        reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.first().map(String::as_str) != Some("item_id") {
        return Err(parse_err(path, 1, "first column must be item_id"));
    }
    let skill_cols = indexed_columns(&header, "skill_");
    if skill_cols.is_empty() {
        return Err(parse_err(path, 1, "no skill_1..skill_K columns found"));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        ids.push(record.get(0).unwrap_or("").trim().to_string());
        let mut row = SkillSet::empty();
        for (k, &col) in skill_cols.iter().enumerate() {
            let cell = record
                .get(col)
                .ok_or_else(|| parse_err(path, line, "ragged row"))?;
            if parse_flag(cell, path, line, &header[col])? {
                row.insert(k);
            }
        }
        rows.push(row);
    }
    let q = QMatrix::new(skill_cols.len(), rows)
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    Ok((ids, q))
}

pub fn write_qmatrix_csv(path: &Path, ids: &[String], q: &QMatrix) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["item_id".to_string()];
    header.extend((1..=q.n_skills()).map(|k| format!("skill_{k}")));
    writer.write_record(&header)?;
    for (id, row) in ids.iter().zip(q.rows()) {
        let mut rec = vec![id.clone()];
        for k in 0..q.n_skills() {
            rec.push(if row.contains(k) { "1" } else { "0" }.into());
        }
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

/// Prerequisite edges CSV: `from_skill,to_skill`, 0-indexed. A missing file
/// yields the empty graph.
pub fn load_prereqs_csv(path: &Path) -> Result<PrereqGraph> {
    if !path.exists() {
        return Ok(PrereqGraph::empty());
    }
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> =
        reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header != ["from_skill", "to_skill"] {
        return Err(parse_err(path, 1, "expected header `from_skill,to_skill`"));
    }
    let mut edges = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        let parse = |cell: &str| -> Result<usize> {
            cell.trim()
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad skill index `{cell}`")))
        };
        edges.push((parse(&record[0])?, parse(&record[1])?));
    }
    PrereqGraph::new(edges)
}

/// Learner CSV: `learner_id,theta,skill_1..skill_K` (mastery flags).
/// Budgets and windows are filled in by the caller from policy.
pub fn load_learners_csv(path: &Path) -> Result<Vec<(String, f64, SkillSet, usize)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> =
        reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.first().map(String::as_str) != Some("learner_id")
        || header.get(1).map(String::as_str) != Some("theta")
    {
        return Err(parse_err(path, 1, "expected columns `learner_id,theta,skill_1..`"));
    }
    let skill_cols = indexed_columns(&header, "skill_");
    if skill_cols.is_empty() {
        return Err(parse_err(path, 1, "no skill_1..skill_K columns found"));
    }
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        let theta: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad theta `{}`", &record[1])))?;
        let mut mastery = SkillSet::empty();
        for (k, &col) in skill_cols.iter().enumerate() {
            let cell = record
                .get(col)
                .ok_or_else(|| parse_err(path, line, "ragged row"))?;
            if parse_flag(cell, path, line, &header[col])? {
                mastery.insert(k);
            }
        }
        out.push((record[0].trim().to_string(), theta, mastery, skill_cols.len()));
    }
    Ok(out)
}

pub fn write_learners_csv(path: &Path, learners: &[LearnerState]) -> Result<()> {
    let n_skills = learners.first().map(|l| l.n_skills).unwrap_or(0);
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["learner_id".to_string(), "theta".into()];
    header.extend((1..=n_skills).map(|k| format!("skill_{k}")));
    writer.write_record(&header)?;
    for l in learners {
        let mut row = vec![l.id.clone(), format!("{}", l.theta)];
        for k in 0..n_skills {
            row.push(if l.mastery.contains(k) { "1" } else { "0" }.into());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Stable hex digest of any serializable config, embedded in outputs for
/// replay.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let canonical = serde_json::to_vec(config)?;
    let mut hasher = Sha256::new();
    hasher.update(&canonical);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Write a JSON value (pretty) atomically enough for our purposes.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let data = serde_json::to_vec_pretty(value)?;
    std::fs::write(path, data)?;
    Ok(())
}
