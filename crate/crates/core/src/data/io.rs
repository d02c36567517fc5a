//! CSV ingestion and coreset persistence.
//!
//! Point files carry one header line `x1,...,xd,y,w` followed by one row per
//! point. Floats are written in shortest round-trip form, so reading a file
//! back reproduces every value bit for bit. Coreset files prepend `#` comment
//! lines with construction metadata:
//!
//! ```text
//! # method=g-aggregate gamma=2
//! # source=5c0d...  n=6
//! x1,y,w
//! 1.5,70,2
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDateTime;

use super::Dataset;
use crate::coreset::{Coreset, Method, Params};
use crate::error::{Error, Result};

/// A column addressed by header name or by 0-based position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Column {
    Name(String),
    Index(usize),
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Schema("empty column name".into()));
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

impl std::fmt::Display for Column {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Column::Name(n) => f.write_str(n),
            Column::Index(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeightSource {
    /// Every point gets weight 1.
    Unit,
    /// Weights come from this column; it must exist.
    Column(Column),
    /// Use the named column when the header has it, unit weights otherwise.
    IfPresent(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnSchema {
    pub x_cols: Vec<Column>,
    pub y_col: Column,
    pub weight: WeightSource,
    pub delimiter: u8,
    /// Field value treated as missing. Empty fields are always missing.
    pub missing_token: String,
    /// Date (`d/m/yyyy`) and time (`hh:mm:ss`) columns combined into
    /// minutes since the first retained record. Becomes the first coordinate.
    pub date_time_cols: Option<(Column, Column)>,
    pub has_header: bool,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self::points(1)
    }
}

impl ColumnSchema {
    /// The layout written by [`write_dataset`]: `x1..xd,y[,w]`.
    pub fn points(d: usize) -> Self {
        Self {
            x_cols: (1..=d).map(|j| Column::Name(format!("x{j}"))).collect(),
            y_col: Column::Name("y".into()),
            weight: WeightSource::IfPresent("w".into()),
            delimiter: b',',
            missing_token: "?".into(),
            date_time_cols: None,
            has_header: true,
        }
    }

    /// UCI household power consumption layout.
    pub fn household() -> Self {
        Self {
            x_cols: Vec::new(),
            y_col: Column::Name("Global_active_power".into()),
            weight: WeightSource::Unit,
            delimiter: b';',
            missing_token: "?".into(),
            date_time_cols: Some((Column::Name("Date".into()), Column::Name("Time".into()))),
            has_header: true,
        }
    }

    fn dim(&self) -> usize {
        self.x_cols.len() + usize::from(self.date_time_cols.is_some())
    }
}

/// A parsed dataset together with the number of rows that were dropped.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub dataset: Dataset,
    pub skipped: usize,
}

struct Resolved {
    x: Vec<usize>,
    y: usize,
    w: Option<usize>,
    date_time: Option<(usize, usize)>,
}

fn resolve(col: &Column, header: Option<&csv::ByteRecord>) -> Result<usize> {
    match (col, header) {
        (Column::Index(i), Some(h)) if *i >= h.len() => Err(Error::Schema(format!(
            "column index {i} out of range ({} columns)",
            h.len()
        ))),
        (Column::Index(i), _) => Ok(*i),
        (Column::Name(name), Some(h)) => h
            .iter()
            .position(|f| std::str::from_utf8(f).map(str::trim) == Ok(name.as_str()))
            .ok_or_else(|| Error::Schema(format!("no column named `{name}`"))),
        (Column::Name(name), None) => Err(Error::Schema(format!(
            "column `{name}` addressed by name but the input has no header"
        ))),
    }
}

impl Resolved {
    fn new(schema: &ColumnSchema, header: Option<&csv::ByteRecord>) -> Result<Self> {
        if schema.dim() == 0 {
            return Err(Error::Schema("no explanatory columns configured".into()));
        }
        let x = schema
            .x_cols
            .iter()
            .map(|c| resolve(c, header))
            .collect::<Result<Vec<_>>>()?;
        let y = resolve(&schema.y_col, header)?;
        let w = match &schema.weight {
            WeightSource::Unit => None,
            WeightSource::Column(c) => Some(resolve(c, header)?),
            WeightSource::IfPresent(name) => resolve(&Column::Name(name.clone()), header).ok(),
        };
        let date_time = match &schema.date_time_cols {
            Some((d, t)) => Some((resolve(d, header)?, resolve(t, header)?)),
            None => None,
        };
        Ok(Self { x, y, w, date_time })
    }
}

fn field<'r>(rec: &'r csv::ByteRecord, i: usize, missing: &str) -> Option<&'r str> {
    let s = std::str::from_utf8(rec.get(i)?).ok()?.trim();
    if s.is_empty() || s == missing {
        None
    } else {
        Some(s)
    }
}

fn number(rec: &csv::ByteRecord, i: usize, missing: &str) -> Option<f64> {
    field(rec, i, missing)?
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
}

fn date_time(
    rec: &csv::ByteRecord,
    (d, t): (usize, usize),
    missing: &str,
) -> Option<NaiveDateTime> {
    let date = field(rec, d, missing)?;
    let time = field(rec, t, missing)?;
    NaiveDateTime::parse_from_str(&format!("{date} {time}"), "%d/%m/%Y %H:%M:%S").ok()
}

/// Parses delimited text into a dataset.
///
/// Rows whose mapped fields are missing, unparseable or non-finite, or whose
/// weight is not positive, are skipped and counted. Lines starting with `#`
/// are ignored.
pub fn parse_csv<R: Read>(reader: R, schema: &ColumnSchema) -> Result<Loaded> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(schema.has_header)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = if schema.has_header {
        Some(rdr.byte_headers()?.clone())
    } else {
        None
    };
    let cols = Resolved::new(schema, header.as_ref())?;
    let dim = schema.dim();
    let missing = schema.missing_token.as_str();

    let mut coords = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut skipped = 0usize;
    let mut t0: Option<NaiveDateTime> = None;
    let mut row = Vec::with_capacity(dim);
    let mut rec = csv::ByteRecord::new();

    while rdr.read_byte_record(&mut rec)? {
        row.clear();
        let parsed = (|| {
            if let Some(dt_cols) = cols.date_time {
                let dt = date_time(&rec, dt_cols, missing)?;
                let origin = *t0.get_or_insert(dt);
                row.push((dt - origin).num_seconds() as f64 / 60.0);
            }
            for &c in &cols.x {
                row.push(number(&rec, c, missing)?);
            }
            let y = number(&rec, cols.y, missing)?;
            let w = match cols.w {
                Some(c) => number(&rec, c, missing).filter(|w| *w > 0.0)?,
                None => 1.0,
            };
            Some((y, w))
        })();
        match parsed {
            Some((y, w)) => {
                coords.extend_from_slice(&row);
                ys.push(y);
                ws.push(w);
            }
            None => skipped += 1,
        }
    }
    if ys.is_empty() {
        return Err(Error::NoValidRows { skipped });
    }
    Ok(Loaded {
        dataset: Dataset::from_columns(dim, coords, ys, ws)?,
        skipped,
    })
}

pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Loaded> {
    let file = fs::File::open(path)?;
    parse_csv(BufReader::with_capacity(1 << 20, file), schema)
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Writes `x1..xd,y,w` header and rows.
pub fn write_dataset<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    let mut line = String::with_capacity(64);
    for j in 1..=ds.dim() {
        let _ = write!(line, "x{j},");
    }
    line.push_str("y,w\n");
    out.write_all(line.as_bytes())?;
    for p in ds.iter() {
        line.clear();
        for &v in p.x {
            line.push_str(&format_f64(v));
            line.push(',');
        }
        line.push_str(&format_f64(p.y));
        line.push(',');
        line.push_str(&format_f64(p.w));
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_coreset<W: Write>(cs: &Coreset, mut out: W) -> Result<()> {
    writeln!(out, "# method={} {}", cs.method(), cs.params())?;
    if let Some(seed) = cs.seed() {
        writeln!(out, "# seed={seed}")?;
    }
    writeln!(out, "# source={} n={}", cs.source_hash(), cs.source_len())?;
    write_dataset(cs.data(), out)
}

/// Writes a coreset file. Nothing is written if serialization fails.
pub fn save_coreset(cs: &Coreset, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(cs.data().len() * 32);
    write_coreset(cs, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Reads a file produced by [`write_coreset`].
pub fn read_coreset<R: Read>(reader: R) -> Result<Coreset> {
    let mut reader = BufReader::new(reader);
    let mut meta = BTreeMap::new();
    let mut line = String::new();
    let mut line_no = 0u64;
    let mut rest = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        let Some(body) = line.trim_start().strip_prefix('#') else {
            rest.extend_from_slice(line.as_bytes());
            break;
        };
        for tok in body.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                reason: format!("expected key=value, got `{tok}`"),
            })?;
            meta.insert(k.to_string(), v.to_string());
        }
    }
    reader.read_to_end(&mut rest)?;

    let header = rest.split(|&b| b == b'\n').next().unwrap_or_default();
    let dim = std::str::from_utf8(header)
        .unwrap_or_default()
        .split(',')
        .filter(|c| c.trim().starts_with('x'))
        .count();
    if dim == 0 {
        return Err(Error::Schema("coreset header has no x columns".into()));
    }
    let mut schema = ColumnSchema::points(dim);
    schema.weight = WeightSource::Column(Column::Name("w".into()));
    let loaded = parse_csv(rest.as_slice(), &schema)?;
    if loaded.skipped > 0 {
        return Err(Error::Parse {
            line: line_no,
            reason: format!("{} malformed point rows", loaded.skipped),
        });
    }

    let bad = |reason: String| Error::Parse { line: 1, reason };
    let method: Method = meta
        .get("method")
        .ok_or_else(|| bad("missing `method` metadata".into()))?
        .parse()?;
    let params = Params::from_metadata(method, &meta)?;
    let seed = match meta.get("seed") {
        Some(s) => Some(s.parse::<u64>().map_err(|e| bad(format!("seed: {e}")))?),
        None => None,
    };
    let source_hash = meta.get("source").cloned().unwrap_or_default();
    let source_len = match meta.get("n") {
        Some(s) => s.parse::<usize>().map_err(|e| bad(format!("n: {e}")))?,
        None => 0,
    };
    Ok(Coreset::from_parts(
        loaded.dataset,
        method,
        params,
        seed,
        source_hash,
        source_len,
    ))
}

pub fn read_coreset_file(path: impl AsRef<Path>) -> Result<Coreset> {
    read_coreset(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coreset::g_aggregate;
    use crate::data::WeightedPoint;
    use crate::test_support::six_points;
    use proptest::prelude::*;

    #[test]
    fn semicolon_file_with_missing_value() {
        let text = "Date;Time;Global_active_power\n\
                    16/12/2006;17:24:00;4.216\n\
                    16/12/2006;17:25:00;?\n\
                    16/12/2006;17:26:00;5.360\n";
        let loaded = parse_csv(text.as_bytes(), &ColumnSchema::household()).unwrap();
        assert_eq!(loaded.skipped, 1);
        let ds = loaded.dataset;
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.coords(), &[0.0, 2.0]);
        assert_eq!(ds.ys(), &[4.216, 5.360]);
    }

    #[test]
    fn date_rollover_counts_minutes() {
        let text = "Date;Time;Global_active_power\n\
                    31/12/2006;23:59:00;1\n\
                    1/1/2007;00:01:30;2\n";
        let ds = parse_csv(text.as_bytes(), &ColumnSchema::household())
            .unwrap()
            .dataset;
        assert_eq!(ds.coords(), &[0.0, 2.5]);
    }

    #[test]
    fn two_dimensional_schema() {
        let text = "lon,lat,timestamp\n-93.6,41.6,1500000000\n-93.5,41.7,1500000100\n";
        let schema = ColumnSchema {
            x_cols: vec!["lon".parse().unwrap(), "lat".parse().unwrap()],
            y_col: "timestamp".parse().unwrap(),
            weight: WeightSource::Unit,
            ..ColumnSchema::default()
        };
        let ds = parse_csv(text.as_bytes(), &schema).unwrap().dataset;
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.x(1), &[-93.5, 41.7]);
        assert_eq!(ds.y(0), 1.5e9);
    }

    #[test]
    fn headerless_positional_columns() {
        let schema = ColumnSchema {
            x_cols: vec![Column::Index(0)],
            y_col: Column::Index(2),
            weight: WeightSource::Unit,
            has_header: false,
            ..ColumnSchema::default()
        };
        let ds = parse_csv("1,skip,3\n4,skip,6\n7\n".as_bytes(), &schema).unwrap();
        assert_eq!(ds.dataset.ys(), &[3.0, 6.0]);
        assert_eq!(ds.skipped, 1);
    }

    #[test]
    fn schema_and_row_errors() {
        let missing = parse_csv("a,b\n1,2\n".as_bytes(), &ColumnSchema::default());
        assert!(matches!(missing, Err(Error::Schema(_))));
        let none_valid = parse_csv("x1,y\n1,?\nx,2\n".as_bytes(), &ColumnSchema::default());
        assert!(matches!(none_valid, Err(Error::NoValidRows { skipped: 2 })));
        let named_without_header = ColumnSchema {
            has_header: false,
            ..ColumnSchema::default()
        };
        assert!(parse_csv("1,2\n".as_bytes(), &named_without_header).is_err());
        assert!(load_csv("/nonexistent/points.csv", &ColumnSchema::default()).is_err());
    }

    #[test]
    fn non_positive_weights_and_nan_are_skipped() {
        let text = "x1,y,w\n0,1,1\n1,2,0\n2,NaN,1\n3,inf,1\n4,5,2\n";
        let loaded = parse_csv(text.as_bytes(), &ColumnSchema::default()).unwrap();
        assert_eq!(loaded.skipped, 3);
        assert_eq!(loaded.dataset.ws(), &[1.0, 2.0]);
    }

    #[test]
    fn coreset_file_layout() {
        let cs = g_aggregate(&six_points(), 2.0).unwrap();
        let mut buf = Vec::new();
        write_coreset(&cs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# method=g-aggregate gamma=2"));
        assert!(lines.next().unwrap().starts_with("# source="));
        let rows: Vec<_> = lines.collect();
        assert_eq!(
            rows,
            ["x1,y,w", "1.5,70,2", "3,0,1", "15.5,50,2", "17,50,1"]
        );
    }

    #[test]
    fn coreset_round_trip_through_file() {
        let cs = g_aggregate(&six_points(), 2.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        save_coreset(&cs, &path).unwrap();
        let back = read_coreset_file(&path).unwrap();
        assert_eq!(back.data(), cs.data());
        assert_eq!(back.method(), cs.method());
        assert_eq!(back.params(), cs.params());
        assert_eq!(back.source_hash(), cs.source_hash());
        let plain = load_csv(&path, &ColumnSchema::default()).unwrap();
        assert_eq!(&plain.dataset, cs.data());
    }

    #[test]
    fn unwritable_path_fails() {
        let cs = g_aggregate(&six_points(), 2.0).unwrap();
        assert!(save_coreset(&cs, "/nonexistent-dir/q.csv").is_err());
    }

    #[test]
    fn coreset_reader_rejects_garbage() {
        assert!(read_coreset("x1,y,w\n1,2,1\n".as_bytes()).is_err());
        assert!(read_coreset("# method=bogus\nx1,y,w\n1,2,1\n".as_bytes()).is_err());
        assert!(read_coreset("# method=grid gamma=1\nx1,y,w\n1,2\n".as_bytes()).is_err());
        assert!(read_coreset("# method=grid\nx1,y,w\n1,2,1\n".as_bytes()).is_err());
        assert!(read_coreset("".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn dataset_text_round_trip(
            raw in prop::collection::vec(
                (prop::collection::vec(-1e300f64..1e300, 2), -1e-300f64..1e300, 1e-12f64..1e12),
                1..30,
            )
        ) {
            let pts: Vec<_> = raw.into_iter()
                .map(|(x, y, w)| WeightedPoint::weighted(x, y, w))
                .collect();
            let ds = Dataset::new(pts).unwrap();
            let mut buf = Vec::new();
            write_dataset(&ds, &mut buf).unwrap();
            let back = parse_csv(buf.as_slice(), &ColumnSchema::points(2)).unwrap();
            prop_assert_eq!(back.skipped, 0);
            prop_assert_eq!(back.dataset, ds);
        }
    }
}
