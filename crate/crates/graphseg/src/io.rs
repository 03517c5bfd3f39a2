//! Series records and graph edge lists on disk.
//!
//! A series record is three lines: the dataset name, the comma-separated
//! change points (possibly empty) and the comma-separated values. An edge
//! list starts with a `N directed weighting` header followed by one
//! `src dst weight` line per edge.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use graphseg_core::data::{format_record, parse_record, LabeledSeries};
use graphseg_core::graph::{Edge, TsGraph, Weighting};

use crate::error::{Error, Result};

pub fn load_tssb(path: &Path) -> Result<LabeledSeries> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    parse_record(&text).map_err(|source| match source {
        graphseg_core::Error::Parse { line, message } => Error::Format { path: path.to_owned(), line, message },
        source => Error::Core { path: path.to_owned(), source },
    })
}

/// Regular, non-hidden files of `dir` in name order.
pub fn list_records(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(Error::io(dir))? {
        let entry = entry.map_err(Error::io(dir))?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if !hidden && entry.file_type().map_err(Error::io(entry.path()))?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// Loads one record file, or every record in a directory.
pub fn load_input(path: &Path) -> Result<Vec<LabeledSeries>> {
    let meta = fs::metadata(path).map_err(Error::io(path))?;
    let series = if meta.is_dir() {
        list_records(path)?.iter().map(|p| load_tssb(p)).collect::<Result<Vec<_>>>()?
    } else {
        vec![load_tssb(path)?]
    };
    if series.is_empty() {
        return Err(Error::NoInput(path.to_owned()));
    }
    Ok(series)
}

pub fn save_tssb(path: &Path, series: &LabeledSeries) -> Result<()> {
    fs::write(path, format_record(series)).map_err(Error::io(path))
}

pub fn write_edgelist<W: Write>(mut out: W, g: &TsGraph) -> std::io::Result<()> {
    writeln!(out, "{} {} {}", g.num_nodes, g.directed, g.weighting.name())?;
    for e in &g.edges {
        writeln!(out, "{} {} {}", e.src, e.dst, e.weight)?;
    }
    out.flush()
}

pub fn save_edgelist(path: &Path, g: &TsGraph) -> Result<()> {
    let file = fs::File::create(path).map_err(Error::io(path))?;
    write_edgelist(std::io::BufWriter::new(file), g).map_err(Error::io(path))
}

/// Parses an edge list and checks the graph invariants. `path` only labels
/// errors.
pub fn read_edgelist<R: BufRead>(input: R, path: &Path) -> Result<TsGraph> {
    let bad = |line: usize, message: String| Error::Format { path: path.to_owned(), line, message };
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
    let header = header.map_err(Error::io(path))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [n, directed, weighting] = fields[..] else {
        return Err(bad(1, format!("expected `N directed weighting`, got {header:?}")));
    };
    let num_nodes = n.parse().map_err(|_| bad(1, format!("bad node count {n:?}")))?;
    let directed = match directed {
        "true" | "1" => true,
        "false" | "0" => false,
        other => return Err(bad(1, format!("bad directed flag {other:?}"))),
    };
    let weighting = Weighting::from_name(weighting).ok_or_else(|| bad(1, format!("unknown weighting {weighting:?}")))?;
    let mut edges = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let parsed = match f[..] {
            [s, d, w] => s.parse().ok().zip(d.parse().ok()).zip(w.parse::<f64>().ok()),
            _ => None,
        };
        let ((src, dst), weight) = parsed.ok_or_else(|| bad(i + 1, format!("expected `src dst weight`, got {line:?}")))?;
        edges.push(Edge::new(src, dst, weight));
    }
    TsGraph::from_edges(num_nodes, edges, directed, weighting)
        .map_err(|v| bad(0, format!("invalid graph: {:?}", v.first().expect("violations are non-empty"))))
}

pub fn load_edgelist(path: &Path) -> Result<TsGraph> {
    let file = fs::File::open(path).map_err(Error::io(path))?;
    read_edgelist(std::io::BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use graphseg_core::transforms::Transform;

    #[test]
    fn edgelist_round_trip() {
        let values = [3.0, 1.0, 2.0, 5.0, 0.5, 4.0];
        let g = Transform::default().apply(&values).unwrap();
        let mut buf = Vec::new();
        write_edgelist(&mut buf, &g).unwrap();
        assert!(buf.starts_with(b"6 false euclidean\n"));
        assert_eq!(read_edgelist(&buf[..], Path::new("mem")).unwrap(), g);
    }

    #[test]
    fn edgelist_errors_name_the_line() {
        let err = read_edgelist(&b"3 false none\n0 1 1\n1 x 1\n"[..], Path::new("g.txt")).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(read_edgelist(&b"3 maybe none\n"[..], Path::new("g")).is_err());
        assert!(read_edgelist(&b"2 false none\n0 5 1\n"[..], Path::new("g")).is_err());
    }
}
