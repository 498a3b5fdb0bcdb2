//! Text formats for point clouds, trees, distributions and run reports.
//!
//! Point cloud: a header line holding the dimension `d`, then one point per
//! line, `id x_1 ... x_d`. Fields may be separated by whitespace or commas.
//!
//! Tree (an ensemble file is several records back to back):
//!
//! ```text
//! tree <n_internal> <n_leaf>
//! <index> <parent> <weight> [<support id>]
//! ```
//!
//! Indices are 1-based with the root at 1 and parent 0; lines come in
//! topological order, leaves carry their support id, and weights use 17
//! significant digits.
//!
//! Distributions: either a headerless list of `id mass` lines (one sparse
//! distribution), or any number of records `dense <n>` followed by `n`
//! masses in support order, or `sparse <k>` followed by `k` `id mass` lines.
//!
//! Lines starting with `#` are comments everywhere.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::build::EmbeddedTree;
use crate::error::{Error, Result};
use crate::points::PointCloud;
use crate::tree::Tree;

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty())
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| parse_err(line, format!("invalid {what} {s:?}")))
}

pub fn read_points(text: &str) -> Result<PointCloud> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing dimension header"))?;
    let dim: usize = parse_num(hl, header, "dimension")?;
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for (ln, line) in lines {
        let mut it = fields(line);
        let id = it.next().expect("content lines are non-empty");
        let before = coords.len();
        for tok in it {
            coords.push(parse_num::<f64>(ln, tok, "coordinate")?);
        }
        if coords.len() - before != dim {
            return Err(parse_err(ln, format!("expected {dim} coordinates, found {}", coords.len() - before)));
        }
        ids.push(id.to_string());
    }
    PointCloud::from_flat(coords, dim, ids)
}

pub fn write_points(pc: &PointCloud) -> String {
    let mut out = format!("{}\n", pc.dim());
    for (i, id) in pc.ids().iter().enumerate() {
        out.push_str(id);
        for x in pc.point(i) {
            write!(out, " {x}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// A parsed tree record with the support id of each leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeRecord {
    pub tree: Tree,
    pub leaf_ids: Vec<String>,
}

pub fn write_tree_record(out: &mut String, et: &EmbeddedTree, ids: &[String]) {
    let t = &et.tree;
    writeln!(out, "tree {} {}", t.n_internal(), t.n_leaf()).unwrap();
    for v in 0..t.n_nodes() {
        let parent = t.parent(v).map_or(0, |p| p + 1);
        write!(out, "{} {} {:.16e}", v + 1, parent, t.weight(v)).unwrap();
        if t.is_leaf(v) {
            write!(out, " {}", ids[et.leaf_points[v - t.n_internal()]]).unwrap();
        }
        out.push('\n');
    }
}

pub fn write_trees(trees: &[EmbeddedTree], ids: &[String]) -> String {
    let mut out = String::new();
    for et in trees {
        write_tree_record(&mut out, et, ids);
    }
    out
}

pub fn read_trees(text: &str) -> Result<Vec<TreeRecord>> {
    let mut records = Vec::new();
    let mut lines = content_lines(text).peekable();
    while let Some((hl, header)) = lines.next() {
        let toks: Vec<&str> = fields(header).collect();
        if toks.len() != 3 || toks[0] != "tree" {
            return Err(parse_err(hl, "expected `tree <n_internal> <n_leaf>`"));
        }
        let n_internal: usize = parse_num(hl, toks[1], "internal count")?;
        let n_leaf: usize = parse_num(hl, toks[2], "leaf count")?;
        let n = n_internal + n_leaf;
        let mut parent = Vec::with_capacity(n);
        let mut weight = Vec::with_capacity(n);
        let mut leaf_ids = Vec::with_capacity(n_leaf);
        for v in 0..n {
            let (ln, line) = lines.next().ok_or_else(|| parse_err(hl, format!("record ends before node {}", v + 1)))?;
            let toks: Vec<&str> = fields(line).collect();
            let is_leaf = v >= n_internal;
            if toks.len() != if is_leaf { 4 } else { 3 } {
                return Err(parse_err(ln, "expected `index parent weight` (plus id for leaves)"));
            }
            let index: usize = parse_num(ln, toks[0], "index")?;
            if index != v + 1 {
                return Err(parse_err(ln, format!("expected node {}, found {index}", v + 1)));
            }
            let p: usize = parse_num(ln, toks[1], "parent")?;
            parent.push(p.checked_sub(1));
            weight.push(parse_num(ln, toks[2], "weight")?);
            if is_leaf {
                leaf_ids.push(toks[3].to_string());
            }
        }
        let tree = Tree::new(parent, weight, n_internal)?;
        records.push(TreeRecord { tree, leaf_ids });
    }
    if records.is_empty() {
        return Err(parse_err(1, "no tree records"));
    }
    Ok(records)
}

/// Resolves leaf ids against `ids` (support order).
pub fn embed_records(records: Vec<TreeRecord>, ids: &[String]) -> Result<Vec<EmbeddedTree>> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    records
        .into_iter()
        .map(|r| {
            let leaf_points = r
                .leaf_ids
                .iter()
                .map(|id| index.get(id.as_str()).copied().ok_or_else(|| Error::UnknownId(id.clone())))
                .collect::<Result<Vec<_>>>()?;
            let et = EmbeddedTree::new(r.tree, leaf_points)?;
            et.check_coverage(ids.len())?;
            Ok(et)
        })
        .collect()
}

/// Distributions plus any renormalization warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDistributions {
    pub distributions: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

fn finish_distribution(mut d: Vec<f64>, line: usize, warnings: &mut Vec<String>) -> Result<Vec<f64>> {
    let total: f64 = d.iter().sum();
    if !(total > 0.0) {
        return Err(parse_err(line, "distribution has no mass"));
    }
    if (total - 1.0).abs() > 1e-12 {
        warnings.push(format!("distribution starting at line {line} has mass {total}; renormalized"));
        d.iter_mut().for_each(|x| *x /= total);
    }
    Ok(d)
}

fn sparse_entry(
    ln: usize,
    line: &str,
    ids: &HashMap<&str, usize>,
    d: &mut [f64],
) -> Result<()> {
    let toks: Vec<&str> = fields(line).collect();
    if toks.len() != 2 {
        return Err(parse_err(ln, "expected `id mass`"));
    }
    let idx = *ids.get(toks[0]).ok_or_else(|| Error::UnknownId(toks[0].to_string()))?;
    let mass: f64 = parse_num(ln, toks[1], "mass")?;
    if !mass.is_finite() {
        return Err(parse_err(ln, "nonfinite mass"));
    }
    if mass < 0.0 {
        return Err(Error::NegativeMass { id: toks[0].to_string(), mass });
    }
    d[idx] += mass;
    Ok(())
}

pub fn read_distributions(text: &str, ids: &[String]) -> Result<LoadedDistributions> {
    let n = ids.len();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let lines: Vec<(usize, &str)> = content_lines(text).collect();
    let mut warnings = Vec::new();
    let mut distributions = Vec::new();
    let Some(&(_, first)) = lines.first() else {
        return Err(parse_err(1, "no distributions"));
    };
    let first_tok = fields(first).next().unwrap_or("");
    if first_tok != "dense" && first_tok != "sparse" {
        let mut d = vec![0.0; n];
        for &(ln, line) in &lines {
            sparse_entry(ln, line, &index, &mut d)?;
        }
        distributions.push(finish_distribution(d, lines[0].0, &mut warnings)?);
        return Ok(LoadedDistributions { distributions, warnings });
    }

    let mut pos = 0;
    while pos < lines.len() {
        let (hl, header) = lines[pos];
        pos += 1;
        let toks: Vec<&str> = fields(header).collect();
        if toks.len() != 2 {
            return Err(parse_err(hl, "expected `dense <n>` or `sparse <k>`"));
        }
        let count: usize = parse_num(hl, toks[1], "count")?;
        let mut d = vec![0.0; n];
        match toks[0] {
            "dense" => {
                if count != n {
                    return Err(parse_err(hl, format!("dense record of length {count} for {n} supports")));
                }
                let mut filled = 0;
                while filled < n {
                    let (ln, line) = *lines.get(pos).ok_or_else(|| parse_err(hl, "dense record truncated"))?;
                    pos += 1;
                    for tok in fields(line) {
                        if filled == n {
                            return Err(parse_err(ln, "too many masses in dense record"));
                        }
                        let mass: f64 = parse_num(ln, tok, "mass")?;
                        if !mass.is_finite() {
                            return Err(parse_err(ln, "nonfinite mass"));
                        }
                        if mass < 0.0 {
                            return Err(Error::NegativeMass { id: ids[filled].clone(), mass });
                        }
                        d[filled] = mass;
                        filled += 1;
                    }
                }
            }
            "sparse" => {
                for _ in 0..count {
                    let (ln, line) = *lines.get(pos).ok_or_else(|| parse_err(hl, "sparse record truncated"))?;
                    pos += 1;
                    sparse_entry(ln, line, &index, &mut d)?;
                }
            }
            other => return Err(parse_err(hl, format!("unknown record kind {other:?}"))),
        }
        distributions.push(finish_distribution(d, hl, &mut warnings)?);
    }
    Ok(LoadedDistributions { distributions, warnings })
}

pub fn write_dense(distributions: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for d in distributions {
        writeln!(out, "dense {}", d.len()).unwrap();
        for x in d {
            writeln!(out, "{x}").unwrap();
        }
    }
    out
}

/// `iter value` lines.
pub fn write_trajectory(values: &[f64]) -> String {
    let mut out = String::new();
    for (k, v) in values.iter().enumerate() {
        writeln!(out, "{k} {v}").unwrap();
    }
    out
}

/// Line-oriented `key=value` report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    entries: Vec<(String, String)>,
}

impl RunReport {
    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut report = Self::default();
        for (ln, line) in content_lines(text) {
            let (k, v) = line.split_once('=').ok_or_else(|| parse_err(ln, "expected key=value"))?;
            report.push(k, v);
        }
        Ok(report)
    }
}

/// Peak resident set size in kilobytes, when the platform exposes it.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find(|l| l.starts_with("VmHWM:"))
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|v| v.parse().ok())
}
