use std::fmt;
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::{Graph, GraphError};

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Syntax(String),
    MissingField(&'static str),
    SelfLoop(usize),
    InvalidEdge(usize, usize),
    BadValue(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(m) => write!(f, "syntax: {m}"),
            ParseErrorKind::MissingField(name) => write!(f, "missing field \"{name}\""),
            ParseErrorKind::SelfLoop(u) => write!(f, "self-loop on node {u}"),
            ParseErrorKind::InvalidEdge(u, v) => write!(f, "edge [{u}, {v}] out of range"),
            ParseErrorKind::BadValue(m) => write!(f, "bad value: {m}"),
        }
    }
}

/// A graph with its regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub graph: Graph,
    pub y: Vec<f64>,
}

fn perr(line: usize, kind: ParseErrorKind) -> GraphError {
    GraphError::ParseError { line, kind }
}

fn bad(line: usize, m: &str) -> GraphError {
    perr(line, ParseErrorKind::BadValue(m.to_string()))
}

fn as_index(v: &Value, line: usize) -> Result<usize, GraphError> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| bad(line, "expected a non-negative integer"))
}

fn graph_from_object(obj: &Map<String, Value>, line: usize) -> Result<Graph, GraphError> {
    let n = as_index(obj.get("n").ok_or(perr(line, ParseErrorKind::MissingField("n")))?, line)?;
    let edges_v = obj
        .get("edges")
        .ok_or(perr(line, ParseErrorKind::MissingField("edges")))?
        .as_array()
        .ok_or_else(|| bad(line, "\"edges\" must be an array"))?;
    let mut edges = Vec::with_capacity(edges_v.len());
    for e in edges_v {
        let pair = e.as_array().filter(|p| p.len() == 2).ok_or_else(|| bad(line, "edge must be [u, v]"))?;
        let (u, v) = (as_index(&pair[0], line)?, as_index(&pair[1], line)?);
        if u == v {
            return Err(perr(line, ParseErrorKind::SelfLoop(u)));
        }
        if u >= n || v >= n {
            return Err(perr(line, ParseErrorKind::InvalidEdge(u, v)));
        }
        edges.push((u, v));
    }
    let features = match obj.get("features") {
        None => vec![vec![1.0]; n],
        Some(f) => {
            let rows = f.as_array().ok_or_else(|| bad(line, "\"features\" must be an array"))?;
            rows.iter()
                .map(|r| {
                    r.as_array()
                        .ok_or_else(|| bad(line, "feature row must be an array"))?
                        .iter()
                        .map(|x| x.as_f64().ok_or_else(|| bad(line, "feature must be a number")))
                        .collect::<Result<Vec<f64>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    Graph::new(n, &edges, &features).map_err(|e| bad(line, &e.to_string()))
}

fn parse_value(text: &str, line_offset: usize) -> Result<Value, GraphError> {
    serde_json::from_str(text).map_err(|e| perr(line_offset + e.line(), ParseErrorKind::Syntax(e.to_string())))
}

/// Parses one graph document.
pub fn graph_from_json(text: &str) -> Result<Graph, GraphError> {
    let v = parse_value(text, 0)?;
    let obj = v.as_object().ok_or_else(|| bad(1, "expected an object"))?;
    graph_from_object(obj, 1)
}

fn graph_object(g: &Graph) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("n".into(), json!(g.n()));
    m.insert("edges".into(), json!(g.edges().iter().map(|&(u, v)| [u, v]).collect::<Vec<_>>()));
    let feats: Vec<Vec<f64>> = (0..g.n()).map(|v| g.feature_row(v).to_vec()).collect();
    m.insert("features".into(), json!(feats));
    m
}

pub fn graph_to_json(g: &Graph) -> String {
    Value::Object(graph_object(g)).to_string()
}

pub fn read_graph_json(path: &Path) -> Result<Graph, GraphError> {
    let text = fs::read_to_string(path).map_err(|e| GraphError::IoError(e.to_string()))?;
    graph_from_json(&text)
}

pub fn write_graph_json(path: &Path, g: &Graph) -> Result<(), GraphError> {
    fs::write(path, graph_to_json(g) + "\n").map_err(|e| GraphError::IoError(e.to_string()))
}

/// JSONL dataset, one graph per line with a `"y"` target. A scalar target
/// is written as a number, anything else as an array.
pub fn write_dataset(path: &Path, samples: &[Sample]) -> Result<(), GraphError> {
    let mut out = String::new();
    for s in samples {
        let mut m = graph_object(&s.graph);
        m.insert("y".into(), if s.y.len() == 1 { json!(s.y[0]) } else { json!(s.y) });
        out.push_str(&Value::Object(m).to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| GraphError::IoError(e.to_string()))
}

pub fn read_dataset(path: &Path) -> Result<Vec<Sample>, GraphError> {
    let text = fs::read_to_string(path).map_err(|e| GraphError::IoError(e.to_string()))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let v = parse_value(raw, i)?;
        let obj = v.as_object().ok_or_else(|| bad(line, "expected an object"))?;
        let graph = graph_from_object(obj, line)?;
        let y = match obj.get("y").ok_or(perr(line, ParseErrorKind::MissingField("y")))? {
            Value::Number(x) => vec![x.as_f64().unwrap_or(f64::NAN)],
            Value::Array(xs) => xs
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| bad(line, "target must be numeric")))
                .collect::<Result<_, _>>()?,
            _ => return Err(bad(line, "target must be a number or an array")),
        };
        out.push(Sample { graph, y });
    }
    Ok(out)
}
