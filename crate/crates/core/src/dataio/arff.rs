//! ARFF reader/writer for MULAN-style multi-label files.
//!
//! Label attributes are identified either by count (the last `K` attributes)
//! or by name, e.g. from the XML sidecar MULAN ships next to each file.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

/// Which attributes of an ARFF file are labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelSpec {
    /// The last `K` declared attributes.
    LastK(usize),
    /// Attributes with exactly these names, in this order.
    Names(Vec<String>),
}

impl LabelSpec {
    /// Extracts `<label name="...">` entries from a MULAN XML label file.
    pub fn from_mulan_xml(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse_mulan_xml(&text)
    }

    pub fn parse_mulan_xml(text: &str) -> Result<Self> {
        let mut names = Vec::new();
        let mut rest = text;
        while let Some(pos) = rest.find("<label") {
            rest = &rest[pos + "<label".len()..];
            let end = rest.find('>').unwrap_or(rest.len());
            let tag = &rest[..end];
            let Some(npos) = tag.find("name=") else {
                continue;
            };
            let value = &tag[npos + "name=".len()..];
            let quote = value.chars().next().filter(|c| *c == '"' || *c == '\'');
            let name = match quote {
                Some(q) => value[1..].split(q).next().unwrap_or(""),
                None => value.split_whitespace().next().unwrap_or(""),
            };
            names.push(xml_unescape(name));
        }
        if names.is_empty() {
            return Err(Error::parse(0, "no <label name=...> entries in label file"));
        }
        Ok(LabelSpec::Names(names))
    }
}

impl FromStr for LabelSpec {
    type Err = Error;

    /// An integer selects the last `K` attributes; anything else is a
    /// comma-separated list of label names.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(k) = s.parse::<usize>() {
            return Ok(LabelSpec::LastK(k));
        }
        let names: Vec<String> = s.split(',').map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect();
        if names.is_empty() {
            return Err(Error::InvalidInput("empty label specification".into()));
        }
        Ok(LabelSpec::Names(names))
    }
}

fn xml_unescape(s: &str) -> String {
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&quot;", "\"").replace("&apos;", "'").replace("&amp;", "&")
}

#[derive(Clone, Debug)]
enum AttrType {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Clone, Debug)]
struct Attribute {
    name: String,
    kind: AttrType,
}

/// How one attribute's raw value becomes a number.
#[derive(Clone, Debug)]
enum Column {
    Feature(usize),
    Label(usize),
}

pub fn load_arff(path: impl AsRef<Path>, labels: &LabelSpec) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_arff(&text, labels)
}

pub fn parse_arff(text: &str, labels: &LabelSpec) -> Result<Dataset> {
    let mut attrs: Vec<Attribute> = Vec::new();
    let mut lines = text.lines().enumerate();
    let mut data_line = None;

    for (idx, raw) in lines.by_ref() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            continue;
        } else if lower.starts_with("@attribute") {
            attrs.push(parse_attribute(&line["@attribute".len()..], lineno)?);
        } else if lower.starts_with("@data") {
            data_line = Some(lineno);
            break;
        } else {
            return Err(Error::parse(lineno, format!("unexpected header line '{line}'")));
        }
    }
    let data_line = data_line.ok_or_else(|| Error::parse(0, "missing @data section"))?;
    if attrs.is_empty() {
        return Err(Error::parse(data_line, "no attributes declared"));
    }

    let label_idx = resolve_labels(&attrs, labels, data_line)?;
    let mut columns = Vec::with_capacity(attrs.len());
    let (mut n_feat, mut n_lab) = (0, 0);
    for (a, attr) in attrs.iter().enumerate() {
        if let Some(pos) = label_idx.iter().position(|&li| li == a) {
            if let AttrType::Nominal(values) = &attr.kind {
                if let Some(bad) = values.iter().find(|v| parse_label_value(v).is_none()) {
                    return Err(Error::parse(data_line, format!("label attribute '{}' declares non-binary value '{bad}'", attr.name)));
                }
            }
            columns.push(Column::Label(pos));
            n_lab += 1;
        } else {
            columns.push(Column::Feature(n_feat));
            n_feat += 1;
        }
    }
    let feature_names: Vec<String> =
        attrs.iter().zip(&columns).filter(|(_, c)| matches!(c, Column::Feature(_))).map(|(a, _)| a.name.clone()).collect();
    let label_names: Vec<String> = label_idx.iter().map(|&i| attrs[i].name.clone()).collect();

    let mut feat_rows: Vec<f64> = Vec::new();
    let mut label_rows: Vec<i8> = Vec::new();
    let mut n = 0usize;
    for (idx, raw) in lines {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let values = if line.starts_with('{') {
            parse_sparse(line, &attrs, lineno)?
        } else {
            let values = split_values(line, lineno)?;
            if values.len() != attrs.len() {
                return Err(Error::parse(lineno, format!("expected {} values, found {}", attrs.len(), values.len())));
            }
            values
        };
        let mut frow = vec![0.0; n_feat];
        let mut lrow = vec![0i8; n_lab];
        for ((value, attr), col) in values.iter().zip(&attrs).zip(&columns) {
            match col {
                Column::Feature(j) => frow[*j] = feature_value(value, attr, lineno)?,
                Column::Label(j) => {
                    lrow[*j] = parse_label_value(value)
                        .ok_or_else(|| Error::parse(lineno, format!("label '{}' has non-binary value '{value}'", attr.name)))?
                }
            }
        }
        feat_rows.extend(frow);
        label_rows.extend(lrow);
        n += 1;
    }

    let features = Array2::from_shape_vec((n, n_feat), feat_rows).map_err(|e| Error::parse(0, e.to_string()))?;
    let labels = Array2::from_shape_vec((n, n_lab), label_rows).map_err(|e| Error::parse(0, e.to_string()))?;
    Dataset::new(features, labels, feature_names, label_names)
}

fn resolve_labels(attrs: &[Attribute], spec: &LabelSpec, line: usize) -> Result<Vec<usize>> {
    match spec {
        LabelSpec::LastK(k) => {
            if *k == 0 || *k >= attrs.len() {
                return Err(Error::parse(line, format!("cannot take the last {k} of {} attributes as labels", attrs.len())));
            }
            Ok((attrs.len() - k..attrs.len()).collect())
        }
        LabelSpec::Names(names) => names
            .iter()
            .map(|name| {
                attrs
                    .iter()
                    .position(|a| &a.name == name)
                    .ok_or_else(|| Error::parse(line, format!("label attribute '{name}' not declared")))
            })
            .collect(),
    }
}

/// `0`/`-1` map to −1 and `1`/`+1` to +1.
fn parse_label_value(v: &str) -> Option<i8> {
    match v.trim() {
        "1" | "+1" | "1.0" => Some(1),
        "0" | "-1" | "0.0" | "-1.0" => Some(-1),
        _ => None,
    }
}

/// Numeric values parse directly; nominal values use their own numeric
/// reading when every declared value is numeric, else their declared index.
fn feature_value(value: &str, attr: &Attribute, line: usize) -> Result<f64> {
    if value == "?" {
        return Err(Error::parse(line, format!("missing value for '{}'", attr.name)));
    }
    match &attr.kind {
        AttrType::Numeric => value.parse::<f64>().map_err(|_| Error::parse(line, format!("'{value}' is not numeric ({})", attr.name))),
        AttrType::Nominal(values) => {
            let pos = values
                .iter()
                .position(|v| v == value)
                .ok_or_else(|| Error::parse(line, format!("'{value}' is not a declared value of '{}'", attr.name)))?;
            if values.iter().all(|v| v.parse::<f64>().is_ok()) {
                Ok(value.parse::<f64>().expect("checked"))
            } else {
                Ok(pos as f64)
            }
        }
    }
}

fn parse_attribute(rest: &str, line: usize) -> Result<Attribute> {
    let rest = rest.trim_start();
    let (name, tail) = take_token(rest, line)?;
    let ty = tail.trim();
    let lower = ty.to_ascii_lowercase();
    let kind = if matches!(lower.as_str(), "numeric" | "real" | "integer") {
        AttrType::Numeric
    } else if ty.starts_with('{') && ty.ends_with('}') {
        let inner = &ty[1..ty.len() - 1];
        let values = split_values(inner, line)?;
        if values.is_empty() {
            return Err(Error::parse(line, format!("nominal attribute '{name}' has no values")));
        }
        AttrType::Nominal(values)
    } else {
        return Err(Error::parse(line, format!("unknown attribute type '{ty}' for '{name}'")));
    };
    Ok(Attribute { name, kind })
}

/// Reads one possibly-quoted token; returns it and the remainder.
fn take_token(s: &str, line: usize) -> Result<(String, &str)> {
    let mut chars = s.char_indices();
    match chars.next() {
        None => Err(Error::parse(line, "missing attribute name")),
        Some((_, q)) if q == '\'' || q == '"' => {
            let mut out = String::new();
            let mut escaped = false;
            for (i, c) in chars {
                if escaped {
                    out.push(c);
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    return Ok((out, &s[i + 1..]));
                } else {
                    out.push(c);
                }
            }
            Err(Error::parse(line, "unterminated quoted name"))
        }
        Some(_) => {
            let end = s.find(char::is_whitespace).unwrap_or(s.len());
            Ok((s[..end].to_string(), &s[end..]))
        }
    }
}

/// Comma-separated values with optional single/double quoting.
fn split_values(s: &str, line: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut was_quoted = false;
    for c in s.chars() {
        if escaped {
            cur.push(c);
            escaped = false;
            continue;
        }
        match quote {
            Some(q) => {
                if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                } else {
                    cur.push(c);
                }
            }
            None => match c {
                '\'' | '"' => {
                    quote = Some(c);
                    was_quoted = true;
                }
                ',' => {
                    out.push(finish_value(&cur, was_quoted));
                    cur.clear();
                    was_quoted = false;
                }
                _ => cur.push(c),
            },
        }
    }
    if quote.is_some() {
        return Err(Error::parse(line, "unterminated quote"));
    }
    if !cur.trim().is_empty() || was_quoted || !out.is_empty() {
        out.push(finish_value(&cur, was_quoted));
    }
    Ok(out)
}

fn finish_value(v: &str, quoted: bool) -> String {
    if quoted {
        v.to_string()
    } else {
        v.trim().to_string()
    }
}

/// `{index value, ...}`; omitted attributes take numeric 0 or, for nominal
/// attributes, their first declared value.
fn parse_sparse(line: &str, attrs: &[Attribute], lineno: usize) -> Result<Vec<String>> {
    let inner =
        line.strip_prefix('{').and_then(|l| l.strip_suffix('}')).ok_or_else(|| Error::parse(lineno, "malformed sparse instance"))?;
    let mut values: Vec<String> = attrs
        .iter()
        .map(|a| match &a.kind {
            AttrType::Numeric => "0".to_string(),
            AttrType::Nominal(v) => v[0].clone(),
        })
        .collect();
    for entry in split_values(inner, lineno)? {
        let entry = entry.trim();
        if entry.is_empty() {
            continue;
        }
        let (idx, value) =
            entry.split_once(char::is_whitespace).ok_or_else(|| Error::parse(lineno, format!("malformed sparse entry '{entry}'")))?;
        let idx: usize = idx.parse().map_err(|_| Error::parse(lineno, format!("bad sparse index '{idx}'")))?;
        if idx >= attrs.len() {
            return Err(Error::parse(lineno, format!("sparse index {idx} out of range")));
        }
        values[idx] = value.trim().trim_matches(|c| c == '\'' || c == '"').to_string();
    }
    Ok(values)
}

fn quote_name(name: &str) -> String {
    format!("'{}'", name.replace('\\', "\\\\").replace('\'', "\\'"))
}

/// Writes a dense ARFF file: numeric features followed by `{0,1}` labels.
pub fn write_arff<W: Write>(ds: &Dataset, relation: &str, out: &mut W) -> Result<()> {
    writeln!(out, "@relation {}", quote_name(relation))?;
    writeln!(out)?;
    for name in ds.feature_names() {
        writeln!(out, "@attribute {} numeric", quote_name(name))?;
    }
    for name in ds.label_names() {
        writeln!(out, "@attribute {} {{0,1}}", quote_name(name))?;
    }
    writeln!(out)?;
    writeln!(out, "@data")?;
    for (x, y) in ds.features().rows().into_iter().zip(ds.labels().rows()) {
        let mut fields: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        fields.extend(y.iter().map(|&l| if l > 0 { "1" } else { "0" }.to_string()));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const INLINE: &str = "% toy
@relation toy

@attribute f1 numeric
@attribute 'feature two' REAL
@attribute lab1 {0,1}
@attribute lab2 {0,1}

@data
1.5,2,1,0
-3,0.25,0,0
{0 7, 2 1, 3 1}
";

    #[test]
    fn parses_dense_and_sparse_rows() {
        let ds = parse_arff(INLINE, &LabelSpec::LastK(2)).unwrap();
        assert_eq!(ds.features().dim(), (3, 2));
        assert_eq!(ds.labels().dim(), (3, 2));
        assert_eq!(ds.feature_names(), &["f1".to_string(), "feature two".to_string()]);
        assert_eq!(ds.features()[[2, 0]], 7.0);
        assert_eq!(ds.features()[[2, 1]], 0.0);
        assert_eq!(ds.labels().row(0).to_vec(), vec![1, -1]);
        assert_eq!(ds.labels().row(1).to_vec(), vec![-1, -1]);
        assert_eq!(ds.labels().row(2).to_vec(), vec![1, 1]);
    }

    #[test]
    fn labels_by_name() {
        let spec = LabelSpec::Names(vec!["lab2".into(), "lab1".into()]);
        let ds = parse_arff(INLINE, &spec).unwrap();
        assert_eq!(ds.label_names(), &["lab2".to_string(), "lab1".to_string()]);
        assert_eq!(ds.labels().row(0).to_vec(), vec![-1, 1]);
        let missing = LabelSpec::Names(vec!["nope".into()]);
        assert!(parse_arff(INLINE, &missing).is_err());
    }

    #[test]
    fn reports_line_numbers() {
        let bad_arity = INLINE.replace("-3,0.25,0,0", "-3,0.25,0");
        match parse_arff(&bad_arity, &LabelSpec::LastK(2)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("unexpected {other:?}"),
        }
        let bad_label = INLINE.replace("1.5,2,1,0", "1.5,2,2,0");
        assert!(matches!(parse_arff(&bad_label, &LabelSpec::LastK(2)), Err(Error::Parse { line: 10, .. })));
        let bad_type = INLINE.replace("REAL", "string");
        assert!(matches!(parse_arff(&bad_type, &LabelSpec::LastK(2)), Err(Error::Parse { line: 5, .. })));
        let nonbinary_decl = INLINE.replace("lab1 {0,1}", "lab1 {0,1,2}");
        assert!(parse_arff(&nonbinary_decl, &LabelSpec::LastK(2)).is_err());
        assert!(parse_arff("@relation x\n@attribute a numeric\n", &LabelSpec::LastK(1)).is_err());
    }

    #[test]
    fn minus_one_labels_and_nominal_features() {
        let text = "@relation r
@attribute colour {red,green}
@attribute size {1,2,3}
@attribute a {-1,1}
@attribute b {-1,1}
@data
green,3,-1,1
red,1,1,-1
";
        let ds = parse_arff(text, &LabelSpec::LastK(2)).unwrap();
        assert_eq!(ds.features().row(0).to_vec(), vec![1.0, 3.0]);
        assert_eq!(ds.labels().row(1).to_vec(), vec![1, -1]);
    }

    #[test]
    fn label_spec_parsing() {
        assert_eq!("6".parse::<LabelSpec>().unwrap(), LabelSpec::LastK(6));
        assert_eq!("a, b".parse::<LabelSpec>().unwrap(), LabelSpec::Names(vec!["a".into(), "b".into()]));
        let xml = r#"<?xml version="1.0" encoding="utf-8"?>
<labels xmlns="http://mulan.sourceforge.net/labels">
<label name="amazed-suprised"></label>
<label name="happy-pleased"></label>
</labels>"#;
        assert_eq!(LabelSpec::parse_mulan_xml(xml).unwrap(), LabelSpec::Names(vec!["amazed-suprised".into(), "happy-pleased".into()]));
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(
            n in 1usize..12,
            d in 1usize..5,
            l in 2usize..5,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1e3..1e3));
            let y = Array2::from_shape_fn((n, l), |_| if rng.random_bool(0.5) { 1i8 } else { -1 });
            let names: Vec<String> = (0..d).map(|j| format!("feat '{j}'")).collect();
            let lnames: Vec<String> = (0..l).map(|j| format!("label{j}")).collect();
            let ds = Dataset::new(x, y, names, lnames).unwrap();
            let mut buf = Vec::new();
            write_arff(&ds, "round trip", &mut buf).unwrap();
            let back = parse_arff(std::str::from_utf8(&buf).unwrap(), &LabelSpec::LastK(l)).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
