//! Plain-text file formats: scored datasets, graphs, confusion matrices,
//! score vectors and long-format result records.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! write followed by a read reproduces every `f64` exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hardness::Graph;
use crate::types::{validate_confusion, ConfusionMatrix, Dataset, InstanceRecord, LabelId, ProbVector, INGEST_TOL};

const FIXED_COLUMNS: [&str; 4] = ["id", "true_label", "human_pred", "noise_tag"];

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Reads `id,true_label,human_pred,noise_tag,f_0,...,f_{L-1}`.
///
/// `human_pred` and `noise_tag` may be empty. Rows whose scores sum to within
/// 0.02 of one are renormalized. Row numbers in errors are file line numbers
/// (the header is line 1).
pub fn load_scored_dataset(path: &Path) -> Result<Dataset> {
    let text = read_text(path)?;
    parse_scored_dataset(&text, path)
}

pub fn parse_scored_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let malformed = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };
    if header.len() < FIXED_COLUMNS.len() + 2 {
        return Err(malformed(format!(
            "expected {} fixed columns and at least two score columns, found {} columns",
            FIXED_COLUMNS.len(),
            header.len()
        )));
    }
    for (i, expected) in FIXED_COLUMNS.iter().enumerate() {
        if &header[i] != *expected {
            return Err(malformed(format!("column {} is {:?}, expected {:?}", i + 1, &header[i], expected)));
        }
    }
    let label_count = header.len() - FIXED_COLUMNS.len();
    for j in 0..label_count {
        let name = &header[FIXED_COLUMNS.len() + j];
        if name != format!("f_{j}") {
            return Err(malformed(format!("score column {j} is {name:?}, expected \"f_{j}\"")));
        }
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let line = i + 2;
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        if row.len() != header.len() {
            return Err(Error::ArityMismatch {
                path: path.to_path_buf(),
                row: line,
                expected: header.len(),
                found: row.len(),
            });
        }
        let label = |field: &str, name: &str| -> Result<LabelId> {
            let v: usize = field
                .parse()
                .map_err(|_| parse_err(format!("{name} {field:?} is not a label index")))?;
            if v >= label_count {
                return Err(parse_err(format!("{name} {v} out of bounds for {label_count} labels")));
            }
            Ok(LabelId(v))
        };
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(parse_err("empty id".into()));
        }
        let true_label = label(&row[1], "true_label")?;
        let human_pred = match &row[2] {
            "" => None,
            s => Some(label(s, "human_pred")?),
        };
        let noise_tag = match &row[3] {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("noise_tag {s:?} is not a finite number")))?,
            ),
        };
        let mut scores = Vec::with_capacity(label_count);
        for j in 0..label_count {
            let s = &row[FIXED_COLUMNS.len() + j];
            let v: f64 = s
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| parse_err(format!("f_{j} {s:?} is not a nonnegative number")))?;
            scores.push(v);
        }
        let sum: f64 = scores.iter().sum();
        if (sum - 1.0).abs() > INGEST_TOL {
            return Err(Error::ScoreSumOutOfTolerance {
                path: path.to_path_buf(),
                row: line,
                sum,
            });
        }
        let scores = ProbVector::with_tolerance(scores, INGEST_TOL).map_err(|e| parse_err(e.to_string()))?;
        records.push(InstanceRecord {
            id,
            scores,
            true_label,
            human_pred,
            noise_tag,
        });
    }
    Dataset::new(label_count, records)
}

pub fn format_scored_dataset(ds: &Dataset) -> String {
    let mut out = FIXED_COLUMNS.join(",");
    for j in 0..ds.label_count() {
        out.push_str(&format!(",f_{j}"));
    }
    out.push('\n');
    for r in ds.records() {
        let human = r.human_pred.map(|h| h.0.to_string()).unwrap_or_default();
        let tag = r.noise_tag.map(|t| t.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}", quote(&r.id), r.true_label.0, human, tag));
        for v in r.scores.as_slice() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn save_scored_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    write_text(path, &format_scored_dataset(ds))
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) || field.trim() != field {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// First line `n`, then one zero-based `u v` pair per line. Blank lines are
/// ignored.
pub fn parse_graph(text: &str, path: &Path) -> Result<Graph> {
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (first_idx, first) = lines.next().ok_or_else(|| parse_err(1, "missing vertex count".into()))?;
    let n: usize = first
        .trim()
        .parse()
        .map_err(|_| parse_err(first_idx + 1, format!("vertex count {:?} is not an integer", first.trim())))?;
    let mut g = Graph::empty(n);
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(idx + 1, format!("expected `u v`, found {:?}", line.trim())));
        }
        let vertex = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| parse_err(idx + 1, format!("vertex {s:?} is not an integer")))
        };
        g.add_edge(vertex(fields[0])?, vertex(fields[1])?)?;
    }
    Ok(g)
}

pub fn load_graph(path: &Path) -> Result<Graph> {
    parse_graph(&read_text(path)?, path)
}

pub fn write_graph(path: &Path, g: &Graph) -> Result<()> {
    let mut out = format!("{}\n", g.vertex_count());
    for (u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    write_text(path, &out)
}

fn parse_number_rows(text: &str, path: &Path) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, line)| {
            line.split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| Error::Parse {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        reason: format!("{:?} is not a number", s.trim()),
                    })
                })
                .collect()
        })
        .collect()
}

fn format_row(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(f64::to_string).collect();
    cells.join(",")
}

/// One row per predicted label, one column per true label.
pub fn load_confusion(path: &Path) -> Result<ConfusionMatrix> {
    validate_confusion(parse_number_rows(&read_text(path)?, path)?, INGEST_TOL)
}

pub fn write_confusion(path: &Path, c: &ConfusionMatrix) -> Result<()> {
    let mut out = String::new();
    for row in c.rows() {
        out.push_str(&format_row(&row));
        out.push('\n');
    }
    write_text(path, &out)
}

/// A single comma-separated row.
pub fn load_prob_vector(path: &Path) -> Result<ProbVector> {
    let rows = parse_number_rows(&read_text(path)?, path)?;
    if rows.len() != 1 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected exactly one row, found {}", rows.len()),
        });
    }
    ProbVector::with_tolerance(rows.into_iter().next().expect("one row"), INGEST_TOL)
}

pub fn write_prob_vector(path: &Path, f: &ProbVector) -> Result<()> {
    write_text(path, &format!("{}\n", format_row(f.as_slice())))
}

/// One row of the long-format results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub method: String,
    pub config_hash: String,
    /// Run index, or an aggregate name such as `mean`.
    pub run: String,
    pub metric: String,
    pub value: f64,
}

impl ResultRecord {
    pub fn new(
        method: impl Into<String>,
        config_hash: impl Into<String>,
        run: impl ToString,
        metric: impl Into<String>,
        value: f64,
    ) -> Self {
        ResultRecord {
            method: method.into(),
            config_hash: config_hash.into(),
            run: run.to_string(),
            metric: metric.into(),
            value,
        }
    }
}

/// Numeric runs in numeric order, then named aggregates alphabetically.
fn run_key(run: &str) -> (bool, usize, &str) {
    match run.parse::<usize>() {
        Ok(i) => (false, i, run),
        Err(_) => (true, 0, run),
    }
}

pub fn sort_results(records: &mut [ResultRecord]) {
    records.sort_by(|a, b| {
        (a.method.as_str(), run_key(&a.run), a.metric.as_str(), a.config_hash.as_str()).cmp(&(
            b.method.as_str(),
            run_key(&b.run),
            b.metric.as_str(),
            b.config_hash.as_str(),
        ))
    });
}

pub fn format_results(records: &[ResultRecord]) -> String {
    let mut sorted = records.to_vec();
    sort_results(&mut sorted);
    let mut out = String::from("method,config_hash,run,metric,value\n");
    for r in &sorted {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            quote(&r.method),
            quote(&r.config_hash),
            quote(&r.run),
            quote(&r.metric),
            r.value
        ));
    }
    out
}

pub fn write_results(path: &Path, records: &[ResultRecord]) -> Result<()> {
    write_text(path, &format_results(records))
}

/// Writes any table given as a header and preformatted rows.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| quote(c)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}
