//! Matrix Market reading and writing, and problem manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{LyapunovProblem, SpdSparseMatrix};
use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Layout {
    Coordinate,
    Array,
}

struct MtxFile {
    nrows: usize,
    ncols: usize,
    symmetric: bool,
    /// 0-based `(row, col, value, line)`, as stored in the file.
    entries: Vec<(usize, usize, f64, usize)>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_mtx(path: &Path) -> Result<MtxFile> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (ln, banner) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let fields: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(path, ln, "expected `%%MatrixMarket matrix <layout> <field> <symmetry>`"));
    }
    let layout = match fields[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(path, ln, format!("unsupported layout `{other}`"))),
    };
    match fields[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(parse_err(path, ln, format!("unsupported field `{other}`"))),
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(path, ln, format!("unsupported symmetry `{other}`"))),
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (ln, size) = data
        .next()
        .ok_or_else(|| parse_err(path, ln + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(path, ln, format!("bad integer `{t}`"))))
        .collect::<Result<_>>()?;
    let expected_len = if layout == Layout::Coordinate { 3 } else { 2 };
    if dims.len() != expected_len {
        return Err(parse_err(path, ln, format!("size line needs {expected_len} integers")));
    }
    let (nrows, ncols) = (dims[0], dims[1]);
    if symmetric && nrows != ncols {
        return Err(parse_err(path, ln, "symmetric matrix must be square"));
    }

    let mut entries = Vec::new();
    match layout {
        Layout::Coordinate => {
            let nnz = dims[2];
            for (ln, line) in data.by_ref().take(nnz) {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(parse_err(path, ln, "expected `row col value`"));
                }
                let idx = |t: &str, bound: usize| -> Result<usize> {
                    let v: usize = t
                        .parse()
                        .map_err(|_| parse_err(path, ln, format!("bad index `{t}`")))?;
                    if v == 0 || v > bound {
                        return Err(parse_err(path, ln, format!("index {v} out of range 1..={bound}")));
                    }
                    Ok(v - 1)
                };
                let (i, j) = (idx(toks[0], nrows)?, idx(toks[1], ncols)?);
                let v: f64 = toks[2]
                    .parse()
                    .map_err(|_| parse_err(path, ln, format!("bad value `{}`", toks[2])))?;
                entries.push((i, j, v, ln));
            }
            if entries.len() != nnz {
                return Err(parse_err(path, ln, format!("expected {nnz} entries, found {}", entries.len())));
            }
        }
        Layout::Array => {
            let mut k = 0usize;
            let total = nrows * ncols;
            for (ln, line) in data.by_ref() {
                for tok in line.split_whitespace() {
                    if k >= total {
                        return Err(parse_err(path, ln, "too many array values"));
                    }
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| parse_err(path, ln, format!("bad value `{tok}`")))?;
                    entries.push((k % nrows, k / nrows, v, ln));
                    k += 1;
                }
            }
            if k != total {
                return Err(parse_err(path, ln, format!("expected {total} array values, found {k}")));
            }
        }
    }
    if let Some((ln, _)) = data.next() {
        return Err(parse_err(path, ln, "unexpected data after the last entry"));
    }
    Ok(MtxFile {
        nrows,
        ncols,
        symmetric,
        entries,
    })
}

/// Reads a square symmetric positive definite matrix.
///
/// Symmetric files are mirrored; general files must contain both triangles
/// with equal values.
pub fn load_spd(path: impl AsRef<Path>, name: &str) -> Result<SpdSparseMatrix> {
    let path = path.as_ref();
    let f = parse_mtx(path)?;
    if f.nrows != f.ncols {
        return Err(parse_err(path, 2, format!("`{name}` must be square, got {}×{}", f.nrows, f.ncols)));
    }
    let mut acc: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for &(i, j, v, ln) in &f.entries {
        let e = acc.entry((i, j)).or_insert((0.0, ln));
        e.0 += v;
        if f.symmetric && i != j {
            let e = acc.entry((j, i)).or_insert((0.0, ln));
            e.0 += v;
        }
    }
    if !f.symmetric {
        for (&(i, j), &(v, ln)) in &acc {
            if i != j && acc.get(&(j, i)).map(|e| e.0) != Some(v) {
                return Err(parse_err(
                    path,
                    ln,
                    format!(
                        "`{name}` is not symmetric: entry ({}, {}) has no matching ({}, {})",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    ),
                ));
            }
        }
    }
    let triplets: Vec<_> = acc.into_iter().map(|((i, j), (v, _))| (i, j, v)).collect();
    SpdSparseMatrix::from_triplets(name, f.nrows, &triplets)
}

/// Reads a dense matrix stored in array or general coordinate format.
pub fn load_dense(path: impl AsRef<Path>) -> Result<Mat> {
    let f = parse_mtx(path.as_ref())?;
    let mut out = Mat::zeros(f.nrows, f.ncols);
    for &(i, j, v, _) in &f.entries {
        out[(i, j)] += v;
        if f.symmetric && i != j {
            out[(j, i)] += v;
        }
    }
    Ok(out)
}

pub fn load_matrix_market(
    path_a: impl AsRef<Path>,
    path_m: impl AsRef<Path>,
    path_b: impl AsRef<Path>,
) -> Result<LyapunovProblem> {
    let a = load_spd(path_a, "A")?;
    let m = load_spd(path_m, "M")?;
    let b = load_dense(path_b)?;
    LyapunovProblem::new(a, m, b)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the lower triangle in `coordinate real symmetric` format.
pub fn write_symmetric(path: impl AsRef<Path>, mat: &SpdSparseMatrix) -> Result<()> {
    let lower: Vec<_> = mat.csr().iter().filter(|(_, (i, j))| j <= i).collect();
    let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(s, "{} {} {}", mat.n(), mat.n(), lower.len());
    for (v, (i, j)) in lower {
        let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
    }
    write_file(path.as_ref(), &s)
}

/// Writes a dense matrix in `array real general` format.
pub fn write_dense(path: impl AsRef<Path>, mat: &Mat) -> Result<()> {
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", mat.nrows(), mat.ncols());
    for v in mat.iter() {
        let _ = writeln!(s, "{v:e}");
    }
    write_file(path.as_ref(), &s)
}

/// Loads a problem from a `key=value` manifest naming the files `a`, `m`, `b`.
/// Relative paths are resolved against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<LyapunovProblem> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut files: BTreeMap<String, PathBuf> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| parse_err(path, i + 1, "expected `key=value`"))?;
        let k = k.trim().to_ascii_lowercase();
        if !matches!(k.as_str(), "a" | "m" | "b") {
            return Err(parse_err(path, i + 1, format!("unknown key `{k}`")));
        }
        files.insert(k, base.join(v.trim()));
    }
    let last = text.lines().count();
    let get = |k: &str| {
        files
            .get(k)
            .cloned()
            .ok_or_else(|| parse_err(path, last, format!("missing key `{k}`")))
    };
    load_matrix_market(get("a")?, get("m")?, get("b")?)
}

pub fn write_manifest(path: impl AsRef<Path>, a: &Path, m: &Path, b: &Path) -> Result<()> {
    let body = format!("a={}\nm={}\nb={}\n", a.display(), m.display(), b.display());
    write_file(path.as_ref(), &body)
}
