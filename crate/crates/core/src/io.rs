//! Plain-text formats: edge lists, vectors and prize-collecting instances.
//!
//! Edge list: a header `p <node_count>`, then one `u v cost` line per edge.
//! Vector: one value per line. Instance: an edge list followed by a line
//! `prizes:` and one prize per node. Blank lines and `#` comments are ignored.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{DenseVector, Edge, Graph};

struct Lines<'a> {
    source: PathBuf,
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, source: &Path) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Self { source: source.to_path_buf(), inner: it.peekable() }
    }

    fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Format { path: self.source.clone(), line, message: message.into() }
    }

    fn parse<T: std::str::FromStr>(&self, line: usize, field: &str, what: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        field
            .parse()
            .map_err(|e| self.error(line, format!("bad {what} {field:?}: {e}")))
    }
}

fn parse_graph_part(lines: &mut Lines<'_>) -> Result<Graph> {
    let (n, header) = lines
        .inner
        .next()
        .ok_or_else(|| lines.error(0, "missing `p <node_count>` header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let p: usize = match fields.as_slice() {
        ["p", count] => lines.parse(n, count, "node count")?,
        _ => return Err(lines.error(n, format!("expected `p <node_count>`, got {header:?}"))),
    };
    let mut edges = Vec::new();
    while let Some(&(n, line)) = lines.inner.peek() {
        if line == "prizes:" {
            break;
        }
        lines.inner.next();
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [u, v, c] = fields.as_slice() else {
            return Err(lines.error(n, format!("expected `u v cost`, got {line:?}")));
        };
        edges.push(Edge {
            u: lines.parse(n, u, "node")?,
            v: lines.parse(n, v, "node")?,
            cost: lines.parse(n, c, "cost")?,
        });
    }
    let last = lines.inner.peek().map_or(n, |&(n, _)| n);
    Graph::new(p, edges).map_err(|e| lines.error(last, e.to_string()))
}

pub fn parse_edge_list(text: &str, source: &Path) -> Result<Graph> {
    let mut lines = Lines::new(text, source);
    let graph = parse_graph_part(&mut lines)?;
    if let Some((n, l)) = lines.inner.next() {
        return Err(lines.error(n, format!("unexpected line {l:?}")));
    }
    Ok(graph)
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    parse_edge_list(&std::fs::read_to_string(path)?, path)
}

pub fn write_edge_list(mut out: impl Write, graph: &Graph) -> Result<()> {
    writeln!(out, "p {}", graph.node_count())?;
    for e in graph.edges() {
        writeln!(out, "{} {} {:?}", e.u, e.v, e.cost)?;
    }
    Ok(())
}

fn parse_values(lines: &mut Lines<'_>) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    while let Some((n, line)) = lines.inner.next() {
        values.push(lines.parse(n, line, "value")?);
    }
    Ok(values)
}

pub fn parse_vector(text: &str, source: &Path) -> Result<DenseVector> {
    Ok(parse_values(&mut Lines::new(text, source))?.into())
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<DenseVector> {
    let path = path.as_ref();
    parse_vector(&std::fs::read_to_string(path)?, path)
}

pub fn write_vector(mut out: impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        writeln!(out, "{v:?}")?;
    }
    Ok(())
}

/// Edge list followed by a `prizes:` block.
pub fn parse_pcst_instance(text: &str, source: &Path) -> Result<(Graph, Vec<f64>)> {
    let mut lines = Lines::new(text, source);
    let graph = parse_graph_part(&mut lines)?;
    match lines.inner.next() {
        Some((_, "prizes:")) => {}
        _ => return Err(lines.error(0, "missing `prizes:` block")),
    }
    let prizes = parse_values(&mut lines)?;
    if prizes.len() != graph.node_count() {
        return Err(lines.error(
            0,
            format!("{} prizes for {} nodes", prizes.len(), graph.node_count()),
        ));
    }
    Ok((graph, prizes))
}

pub fn read_pcst_instance(path: impl AsRef<Path>) -> Result<(Graph, Vec<f64>)> {
    let path = path.as_ref();
    parse_pcst_instance(&std::fs::read_to_string(path)?, path)
}

pub fn write_pcst_instance(mut out: impl Write, graph: &Graph, prizes: &[f64]) -> Result<()> {
    write_edge_list(&mut out, graph)?;
    writeln!(out, "prizes:")?;
    write_vector(out, prizes)
}
