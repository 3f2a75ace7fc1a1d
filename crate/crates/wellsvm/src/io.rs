//! LIBSVM-style text files and the bag format.
//!
//! Dataset lines read `<label> <idx>:<val> ...` with 1-based indices, where
//! the label `?` marks an unlabeled row. Bag lines read
//! `<bag_id> <bag_label> <idx>:<val> ...`, one instance per line, with all
//! lines of a bag contiguous. Blank lines and `#` comments are skipped; CRLF
//! line endings are accepted.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use thiserror::Error;
use wellsvm_core::{BagDataset, Dataset, Label, SparseVector};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Invalid(#[from] wellsvm_core::Error),
    #[error("cannot access {path}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("input is not valid UTF-8")]
    Utf8,
}

pub type IoResult<T> = Result<T, IoError>;

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { line, msg: msg.into() }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim_end_matches('\r');
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_label(tok: &str, line: usize) -> IoResult<Label> {
    let v: f64 = tok.parse().map_err(|_| parse_err(line, format!("bad label `{tok}`")))?;
    if v == 1.0 {
        Ok(1)
    } else if v == -1.0 {
        Ok(-1)
    } else {
        Err(parse_err(line, format!("label `{tok}` is not +1 or -1")))
    }
}

fn parse_features<'a>(toks: impl Iterator<Item = &'a str>, line: usize) -> IoResult<SparseVector> {
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for tok in toks {
        let (i, v) = tok
            .split_once(':')
            .ok_or_else(|| parse_err(line, format!("expected idx:val, got `{tok}`")))?;
        let i: usize = i
            .parse()
            .map_err(|_| parse_err(line, format!("bad feature index `{i}`")))?;
        if i == 0 {
            return Err(parse_err(line, "feature indices are 1-based"));
        }
        let v: f64 = v
            .parse()
            .map_err(|_| parse_err(line, format!("bad feature value `{v}`")))?;
        indices.push(i - 1);
        values.push(v);
    }
    SparseVector::new(indices, values).map_err(|e| parse_err(line, e.to_string()))
}

fn n_features_of(rows: &[SparseVector]) -> usize {
    rows.iter().map(SparseVector::dim_hint).max().unwrap_or(0)
}

pub fn parse_libsvm(bytes: &[u8]) -> IoResult<Dataset> {
    let text = std::str::from_utf8(bytes).map_err(|_| IoError::Utf8)?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (no, l) in lines(text) {
        let mut toks = l.split_whitespace();
        let lab = toks.next().expect("nonblank line");
        labels.push(if lab == "?" { None } else { Some(parse_label(lab, no)?) });
        rows.push(parse_features(toks, no)?);
    }
    let n = n_features_of(&rows);
    Ok(Dataset::new(rows, labels, n)?)
}

fn write_features(out: &mut String, x: &SparseVector) {
    for (i, v) in x.entries() {
        // `{:?}` prints the shortest representation that parses back exactly.
        let _ = write!(out, " {}:{:?}", i + 1, v);
    }
}

pub fn write_libsvm(d: &Dataset) -> String {
    let mut out = String::new();
    for (x, y) in d.rows().iter().zip(d.labels()) {
        match y {
            Some(1) => out.push_str("+1"),
            Some(_) => out.push_str("-1"),
            None => out.push('?'),
        }
        write_features(&mut out, x);
        out.push('\n');
    }
    out
}

/// Bags in order of first appearance; [`BagDataset::new`] moves positive bags first.
pub fn parse_bags(bytes: &[u8]) -> IoResult<BagDataset> {
    let text = std::str::from_utf8(bytes).map_err(|_| IoError::Utf8)?;
    let mut bags: Vec<(String, Vec<SparseVector>, Label)> = Vec::new();
    let mut closed = std::collections::HashSet::new();
    for (no, l) in lines(text) {
        let mut toks = l.split_whitespace();
        let id = toks.next().expect("nonblank line");
        let lab = toks.next().ok_or_else(|| parse_err(no, "missing bag label"))?;
        let lab = parse_label(lab, no)?;
        let x = parse_features(toks, no)?;
        match bags.last_mut() {
            Some((last, xs, y)) if last == id => {
                if *y != lab {
                    return Err(parse_err(no, format!("bag `{id}` has inconsistent labels")));
                }
                xs.push(x);
            }
            _ => {
                if !closed.insert(id.to_string()) {
                    return Err(parse_err(no, format!("lines of bag `{id}` are not contiguous")));
                }
                bags.push((id.to_string(), vec![x], lab));
            }
        }
    }
    let n = bags.iter().map(|(_, xs, _)| n_features_of(xs)).max().unwrap_or(0);
    Ok(BagDataset::new(bags, n)?)
}

/// Bags in their original input order.
pub fn write_bags(b: &BagDataset) -> String {
    let mut order: Vec<usize> = (0..b.bags().len()).collect();
    order.sort_by_key(|&i| b.original_order()[i]);
    let mut out = String::new();
    for i in order {
        let bag = &b.bags()[i];
        for x in &b.rows()[bag.range()] {
            let _ = write!(out, "{} {}", bag.id, if bag.label == 1 { "+1" } else { "-1" });
            write_features(&mut out, x);
            out.push('\n');
        }
    }
    out
}

pub fn read_bytes(path: &Path) -> IoResult<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|source| IoError::File {
            path: path.display().to_string(),
            source,
        })?;
    Ok(buf)
}

pub fn write_text(path: &Path, text: &str) -> IoResult<()> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_libsvm(path: &Path) -> IoResult<Dataset> {
    parse_libsvm(&read_bytes(path)?)
}

pub fn read_bags(path: &Path) -> IoResult<BagDataset> {
    parse_bags(&read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn libsvm_examples() {
        let d = parse_libsvm(b"+1 1:0.5 3:2.0\n? 2:1.0\r\n\n-1 1:-1\n").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.n_features(), 3);
        assert_eq!(d.rows()[0].indices(), &[0, 2]);
        assert_eq!(d.rows()[0].values(), &[0.5, 2.0]);
        assert_eq!(d.labels(), &[Some(1), None, Some(-1)]);
        assert_eq!(d.rows()[1].indices(), &[1]);
    }

    #[test]
    fn libsvm_errors_carry_line() {
        let e = parse_libsvm(b"+1 1:1\n+1 3:1 1:1\n").unwrap_err();
        assert!(matches!(e, IoError::Parse { line: 2, .. }), "{e}");
        assert!(matches!(
            parse_libsvm(b"2 1:1").unwrap_err(),
            IoError::Parse { line: 1, .. }
        ));
        assert!(parse_libsvm(b"+1 0:1").is_err());
        assert!(parse_libsvm(b"+1 1-1").is_err());
        assert!(parse_libsvm(b"+1 1:nan").is_err());
    }

    #[test]
    fn bag_examples() {
        let b = parse_bags(b"7 +1 1:1\n7 +1 1:2\n").unwrap();
        assert_eq!(b.bags().len(), 1);
        assert_eq!(b.bags()[0].len(), 2);

        let b = parse_bags(b"n -1 1:0\np +1 1:1\np +1 1:3\n").unwrap();
        assert_eq!(b.bags()[0].id, "p");
        assert_eq!(b.bags()[0].label, 1);
        assert_eq!(b.original_order(), &[1, 0]);
        assert_eq!(b.rows()[0].values(), &[1.0]);

        assert!(parse_bags(b"3 +1 1:1\n3 -1 1:1\n").is_err());
        assert!(parse_bags(b"a +1 1:1\nb -1 1:1\na +1 1:1\n").is_err());
        assert!(parse_bags(b"a\n").is_err());
    }

    #[test]
    fn round_trips() {
        let text = "+1 1:0.1 4:-2.5e-7\n?\n-1 2:3\n";
        let d = parse_libsvm(text.as_bytes()).unwrap();
        assert_eq!(parse_libsvm(write_libsvm(&d).as_bytes()).unwrap(), d);
        let b = parse_bags(b"n -1 1:0\np +1 1:1\np +1 2:0.3\n").unwrap();
        let again = parse_bags(write_bags(&b).as_bytes()).unwrap();
        assert_eq!(again, b);
    }
}
