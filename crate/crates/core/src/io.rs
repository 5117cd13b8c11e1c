//! File formats: edge lists, feature/kernel matrices (CSV or `GPGCMAT1`
//! binary), label CSVs, split JSON and prediction CSVs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GpPosterior, LabeledSplit};
use crate::graph::Graph;
use crate::matrix::{FeatureMatrix, KernelMatrix};

pub const MATRIX_MAGIC: &[u8; 8] = b"GPGCMAT1";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Content lines with their 1-based line numbers; skips blanks and `#` comments.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses a whitespace-separated edge list. Duplicates are merged; a
/// self-loop is a format error.
pub fn parse_edge_list(text: &str, n_nodes: usize, path: &Path) -> Result<Graph> {
    let mut edges = Vec::new();
    for (line, content) in content_lines(text) {
        let mut fields = content.split_whitespace();
        let mut node = || -> Result<usize> {
            let field = fields
                .next()
                .ok_or_else(|| parse_err(path, line, "expected two node indices"))?;
            field
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid node index {field:?}")))
        };
        let (i, j) = (node()?, node()?);
        if fields.next().is_some() {
            return Err(parse_err(path, line, "expected exactly two node indices"));
        }
        if i == j {
            return Err(parse_err(path, line, format!("self-loop on node {i}")));
        }
        if i >= n_nodes || j >= n_nodes {
            return Err(parse_err(
                path,
                line,
                format!("edge ({i}, {j}) exceeds node count {n_nodes}"),
            ));
        }
        edges.push((i, j));
    }
    Graph::new(n_nodes, edges)
}

pub fn read_edge_list(path: &Path, n_nodes: usize) -> Result<Graph> {
    parse_edge_list(&read_text(path)?, n_nodes, path)
}

pub fn write_edge_list(path: &Path, g: &Graph) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# {} nodes, {} edges\n", g.n_nodes(), g.n_edges()));
    for (i, j) in g.edges() {
        out.push_str(&format!("{i} {j}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Largest node index mentioned in an edge list, if any.
pub fn max_node_index(path: &Path) -> Result<Option<usize>> {
    let text = read_text(path)?;
    let mut max = None;
    for (line, content) in content_lines(&text) {
        for field in content.split_whitespace() {
            let v: usize = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid node index {field:?}")))?;
            max = max.max(Some(v));
        }
    }
    Ok(max)
}

/// Comma-separated reals, one row per node. An optional non-numeric header
/// line is skipped.
pub fn parse_features_csv(text: &str, path: &Path) -> Result<FeatureMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, (line, content)) in content_lines(text).enumerate() {
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(parse_err(
                            path,
                            line,
                            format!("expected {} columns, found {}", first.len(), row.len()),
                        ));
                    }
                }
                if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
                    return Err(parse_err(
                        path,
                        line,
                        format!("non-finite value in column {bad}"),
                    ));
                }
                rows.push(row);
            }
            Err(_) if idx == 0 && fields.iter().all(|f| f.parse::<f64>().is_err()) => continue,
            Err(e) => return Err(parse_err(path, line, format!("invalid number: {e}"))),
        }
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no feature rows"));
    }
    FeatureMatrix::from_rows(&rows)
}

/// Encodes a row-major matrix in the `GPGCMAT1` layout.
pub fn encode_matrix(rows: usize, cols: usize, values: &[f64]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(24 + values.len() * 8);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Decodes a `GPGCMAT1` buffer into `(rows, cols, values)`.
pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 24 || &bytes[..8] != MATRIX_MAGIC {
        return Err(parse_err(path, 0, "missing GPGCMAT1 header"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (rows, cols) = (word(8), word(16));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(24));
    if expected != Some(bytes.len() as u64) {
        return Err(parse_err(
            path,
            0,
            format!(
                "{rows}x{cols} matrix needs {} bytes, file has {}",
                24 + rows * cols * 8,
                bytes.len()
            ),
        ));
    }
    let values = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows as usize, cols as usize, values))
}

/// Reads features from `GPGCMAT1` binary (detected by magic) or CSV.
pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MATRIX_MAGIC) {
        let (rows, cols, values) = decode_matrix(&bytes, path)?;
        return FeatureMatrix::new(rows, cols, values);
    }
    let text =
        String::from_utf8(bytes).map_err(|_| parse_err(path, 0, "not UTF-8 text or GPGCMAT1"))?;
    parse_features_csv(&text, path)
}

pub fn write_features_csv(path: &Path, x: &FeatureMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..x.rows() {
        let row: Vec<String> = x.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_features_bin(path: &Path, x: &FeatureMatrix) -> Result<()> {
    fs::write(path, encode_matrix(x.rows(), x.cols(), x.as_slice())).map_err(|e| Error::io(path, e))
}

pub fn write_kernel(path: &Path, k: &KernelMatrix) -> Result<()> {
    fs::write(path, encode_matrix(k.n(), k.n(), k.as_slice())).map_err(|e| Error::io(path, e))
}

pub fn read_kernel(path: &Path) -> Result<KernelMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (rows, cols, values) = decode_matrix(&bytes, path)?;
    if rows != cols {
        return Err(parse_err(
            path,
            0,
            format!("kernel must be square, got {rows}x{cols}"),
        ));
    }
    KernelMatrix::new(rows, values)
}

/// `node_id,label` CSV with a header line.
pub fn parse_labels(text: &str, path: &Path) -> Result<BTreeMap<usize, usize>> {
    let mut labels = BTreeMap::new();
    for (idx, (line, content)) in content_lines(text).enumerate() {
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(parse_err(path, line, "expected node_id,label"));
        }
        match (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
            (Ok(node), Ok(label)) => {
                if labels.insert(node, label).is_some() {
                    return Err(parse_err(path, line, format!("node {node} labelled twice")));
                }
            }
            _ if idx == 0 => continue,
            _ => {
                return Err(parse_err(
                    path,
                    line,
                    format!("invalid label row {content:?}"),
                ))
            }
        }
    }
    Ok(labels)
}

pub fn read_labels(path: &Path) -> Result<BTreeMap<usize, usize>> {
    parse_labels(&read_text(path)?, path)
}

pub fn write_labels(path: &Path, labels: &BTreeMap<usize, usize>) -> Result<()> {
    let mut out = String::from("node_id,label\n");
    for (node, label) in labels {
        out.push_str(&format!("{node},{label}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// On-disk split file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<usize>,
    #[serde(default)]
    pub val: Vec<usize>,
    #[serde(default)]
    pub test: Vec<usize>,
    pub n_classes: usize,
}

impl SplitFile {
    pub fn with_labels(self, labels: BTreeMap<usize, usize>) -> LabeledSplit {
        LabeledSplit {
            train: self.train,
            val: self.val,
            test: self.test,
            labels,
            n_classes: self.n_classes,
        }
    }

    pub fn from_split(split: &LabeledSplit) -> Self {
        Self {
            train: split.train.clone(),
            val: split.val.clone(),
            test: split.test.clone(),
            n_classes: split.n_classes,
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Prediction CSV: `node_id,predicted_class[,mean_0..mean_{C-1}]`, floats
/// with 17 significant digits.
pub fn write_predictions(
    out: &mut impl Write,
    post: &GpPosterior,
    predicted: &BTreeMap<usize, usize>,
    with_mean: bool,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    write!(w, "node_id,predicted_class")?;
    if with_mean {
        for c in 0..post.mean.ncols() {
            write!(w, ",mean_{c}")?;
        }
    }
    writeln!(w)?;
    for (row, id) in post.unlabeled_ids.iter().enumerate() {
        write!(w, "{id},{}", predicted[id])?;
        if with_mean {
            for v in post.mean.row(row).iter() {
                write!(w, ",{v:.16e}")?;
            }
        }
        writeln!(w)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("test.txt")
    }

    #[test]
    fn edge_list_parsing() {
        let g = parse_edge_list("# header\n0 1\n\n1 0\n2\t1\n", 4, p()).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(g.n_nodes(), 4);
    }

    #[test]
    fn edge_list_errors_name_the_line() {
        let err = parse_edge_list("0 1\n2 2\n", 3, p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("test.txt:2"));
        assert!(matches!(
            parse_edge_list("0 x\n", 3, p()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_edge_list("0 1 2\n", 3, p()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_edge_list("0 5\n", 3, p()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn csv_features() {
        let x = parse_features_csv("a,b\n1.0, 2\n-3e-1,4\n", p()).unwrap();
        assert_eq!((x.rows(), x.cols()), (2, 2));
        assert_eq!(x.row(1), &[-0.3, 4.0]);
        assert!(parse_features_csv("1,2\n3\n", p()).is_err());
        assert!(parse_features_csv("1,2\n3,zz\n", p()).is_err());
        assert!(parse_features_csv("1,nan\n", p()).is_err());
    }

    #[test]
    fn matrix_header_layout() {
        let bytes = encode_matrix(1, 2, &[1.0, -2.5]);
        assert_eq!(&bytes[..8], b"GPGCMAT1");
        assert_eq!(&bytes[8..16], &1u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &2u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 40);
        assert!(decode_matrix(&bytes[..39], p()).is_err());
        assert!(decode_matrix(b"GPGCMAT0xxxxxxxxxxxxxxxx", p()).is_err());
    }

    #[test]
    fn labels_csv() {
        let labels = parse_labels("node_id,label\n0,1\n5,0\n", p()).unwrap();
        assert_eq!(labels, BTreeMap::from([(0, 1), (5, 0)]));
        assert!(parse_labels("node_id,label\n0,1\n0,2\n", p()).is_err());
        assert!(parse_labels("node_id,label\n0,x\n", p()).is_err());
    }

    #[test]
    fn split_json() {
        let s: SplitFile =
            serde_json::from_str(r#"{"train":[0,1],"val":[2],"test":[3],"n_classes":2}"#).unwrap();
        assert_eq!(s.val, vec![2]);
        let s: SplitFile = serde_json::from_str(r#"{"train":[0],"n_classes":1}"#).unwrap();
        assert!(s.test.is_empty());
    }

    #[test]
    fn prediction_csv_format() {
        let post = GpPosterior {
            mean: nalgebra::DMatrix::from_row_slice(1, 2, &[0.25, 1.0 / 3.0]),
            predictive_cov: None,
            unlabeled_ids: vec![7],
            jitter: 0.0,
        };
        let predicted = BTreeMap::from([(7, 1)]);
        let mut buf = Vec::new();
        write_predictions(&mut buf, &post, &predicted, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "node_id,predicted_class,mean_0,mean_1\n7,1,2.5000000000000000e-1,3.3333333333333331e-1\n"
        );
        let mut buf = Vec::new();
        write_predictions(&mut buf, &post, &predicted, false).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "node_id,predicted_class\n7,1\n"
        );
    }

    proptest! {
        #[test]
        fn matrix_codec_round_trips(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() * 1e6 - 5e5).collect();
            let (r, c, v) = decode_matrix(&encode_matrix(rows, cols, &values), p()).unwrap();
            prop_assert_eq!((r, c), (rows, cols));
            prop_assert_eq!(v, values);
        }
    }
}
