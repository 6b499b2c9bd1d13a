//! Text formats shared with the CLI and external tools.
//!
//! * edge list: header `n m`, then one `u v` line per edge (`u < v`)
//! * labels: one integer per line
//! * corpus: one sentence per line, space-separated node ids
//! * embeddings: header `n dim`, then `node_id x1 ... xdim` per trained node

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{Graph, LabelVector};
use crate::walks::WalkCorpus;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn numbers<T: std::str::FromStr>(path: &Path, lineno: usize, line: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| parse_err(path, lineno, format!("cannot parse `{tok}`")))
        })
        .collect()
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(path: &Path, reader: impl Read) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((i + 1, trimmed.to_string()));
    }
    let _ = path;
    Ok(out)
}

pub fn write_edge_list(g: &Graph, mut w: impl Write) -> Result<()> {
    writeln!(w, "{} {}", g.n(), g.m())?;
    for (u, v) in g.edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

pub fn read_edge_list(path: &Path, reader: impl Read) -> Result<Graph> {
    let lines = content_lines(path, reader)?;
    let Some((hl, header)) = lines.first() else {
        return Err(parse_err(path, 1, "missing `n m` header"));
    };
    let head: Vec<usize> = numbers(path, *hl, header)?;
    let [n, m] = head[..] else {
        return Err(parse_err(path, *hl, "header must be `n m`"));
    };
    let mut edges = Vec::with_capacity(m);
    for (lineno, line) in &lines[1..] {
        let pair: Vec<usize> = numbers(path, *lineno, line)?;
        let [u, v] = pair[..] else {
            return Err(parse_err(path, *lineno, "expected `u v`"));
        };
        if u >= n || v >= n {
            return Err(parse_err(path, *lineno, format!("node id out of range for n = {n}")));
        }
        if u == v {
            return Err(parse_err(path, *lineno, "self-loop"));
        }
        edges.push((u, v));
    }
    let g = Graph::from_edges(n, edges)?;
    if g.m() != m {
        return Err(parse_err(
            path,
            *hl,
            format!("header declares {m} edges but {} distinct edges were read", g.m()),
        ));
    }
    Ok(g)
}

pub fn write_labels(labels: &LabelVector, mut w: impl Write) -> Result<()> {
    for l in &labels.0 {
        writeln!(w, "{l}")?;
    }
    Ok(())
}

pub fn read_labels(path: &Path, reader: impl Read) -> Result<LabelVector> {
    content_lines(path, reader)?
        .into_iter()
        .map(|(lineno, line)| {
            line.parse()
                .map_err(|_| parse_err(path, lineno, format!("cannot parse label `{line}`")))
        })
        .collect::<Result<Vec<usize>>>()
        .map(LabelVector)
}

pub fn write_corpus(corpus: &WalkCorpus, mut w: impl Write) -> Result<()> {
    for s in &corpus.sentences {
        let mut first = true;
        for t in s {
            if !first {
                w.write_all(b" ")?;
            }
            write!(w, "{t}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus(path: &Path, reader: impl Read) -> Result<WalkCorpus> {
    let mut sentences = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        sentences.push(numbers(path, i + 1, &line)?);
    }
    Ok(WalkCorpus::new(sentences))
}

/// Writes the header and one row per trained node.
pub fn write_embeddings(emb: &EmbeddingMatrix, mut w: impl Write) -> Result<()> {
    writeln!(w, "{} {}", emb.n(), emb.dim())?;
    for i in (0..emb.n()).filter(|&i| emb.is_trained(i)) {
        write!(w, "{i}")?;
        for x in emb.row(i) {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Nodes without a row are left untrained.
pub fn read_embeddings(path: &Path, reader: impl Read) -> Result<EmbeddingMatrix> {
    let lines = content_lines(path, reader)?;
    let Some((hl, header)) = lines.first() else {
        return Err(parse_err(path, 1, "missing `n dim` header"));
    };
    let head: Vec<usize> = numbers(path, *hl, header)?;
    let [n, dim] = head[..] else {
        return Err(parse_err(path, *hl, "header must be `n dim`"));
    };
    let mut emb = EmbeddingMatrix::new(n, dim);
    let mut row = Vec::with_capacity(dim);
    for (lineno, line) in &lines[1..] {
        let mut toks = line.split_whitespace();
        let id: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(path, *lineno, "missing node id"))?;
        if id >= n {
            return Err(parse_err(path, *lineno, format!("node id {id} out of range for n = {n}")));
        }
        row.clear();
        for t in toks {
            let x: f32 = t
                .parse()
                .map_err(|_| parse_err(path, *lineno, format!("cannot parse `{t}`")))?;
            row.push(x);
        }
        if row.len() != dim {
            return Err(parse_err(path, *lineno, format!("expected {dim} values, found {}", row.len())));
        }
        emb.set_row(id, &row);
    }
    Ok(emb)
}

fn open(path: &Path) -> Result<File> {
    Ok(File::open(path)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn load_graph(path: &Path) -> Result<Graph> {
    read_edge_list(path, open(path)?)
}

pub fn save_graph(path: &Path, g: &Graph) -> Result<()> {
    let mut w = create(path)?;
    write_edge_list(g, &mut w)?;
    Ok(w.flush()?)
}

pub fn load_labels(path: &Path) -> Result<LabelVector> {
    read_labels(path, open(path)?)
}

pub fn save_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    let mut w = create(path)?;
    write_labels(labels, &mut w)?;
    Ok(w.flush()?)
}

pub fn load_corpus(path: &Path) -> Result<WalkCorpus> {
    read_corpus(path, open(path)?)
}

pub fn save_corpus(path: &Path, corpus: &WalkCorpus) -> Result<()> {
    let mut w = create(path)?;
    write_corpus(corpus, &mut w)?;
    Ok(w.flush()?)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    read_embeddings(path, open(path)?)
}

pub fn save_embeddings(path: &Path, emb: &EmbeddingMatrix) -> Result<()> {
    let mut w = create(path)?;
    write_embeddings(emb, &mut w)?;
    Ok(w.flush()?)
}
