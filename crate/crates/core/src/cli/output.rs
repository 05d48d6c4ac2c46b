//! CSV emission with `#` metadata headers, and reading results back.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use super::CliError;

/// Shortest round-trip text for a float; scientific outside `[1e−3, 1e6)`.
pub fn num(v: f64) -> String {
    if v != 0.0 && v.is_finite() && (v.abs() < 1e-3 || v.abs() >= 1e6) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn num_list(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

/// A CSV table: header comments, column names, and already formatted rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            comments: Vec::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Body text: the column line and the rows, without comments.
    pub fn body(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(CliError::csv)?;
        for r in &self.rows {
            w.write_record(r).map_err(CliError::csv)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Output(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut f =
            File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut text = String::new();
        for c in &self.comments {
            text.push_str(&format!("# {c}\n"));
        }
        text.push_str(&format!("# generated_unix_s = {stamp}\n"));
        text.push_str(&self.body()?);
        f.write_all(text.as_bytes())
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
    }
}

/// Reads a table written by [`Table::write`] as column names and string rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let f = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let text: String = BufReader::new(f)
        .lines()
        .map_while(Result::ok)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l + "\n")
        .collect();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let columns = r
        .headers()
        .map_err(CliError::csv)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(
            rec.map_err(CliError::csv)?
                .iter()
                .map(str::to_string)
                .collect(),
        );
    }
    Ok((columns, rows))
}

/// Column lookup over rows returned by [`read_table`].
pub fn column<'a>(
    columns: &[String],
    rows: &'a [Vec<String>],
    name: &str,
) -> Result<Vec<&'a str>, CliError> {
    let i = columns
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| CliError::Input(format!("missing column `{name}`")))?;
    Ok(rows.iter().map(|r| r[i].as_str()).collect())
}

pub fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.parse()
        .map_err(|_| CliError::Input(format!("not a number: `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [
            0.0,
            1.0,
            -0.2928932188134525,
            2.5e-3,
            1e-10,
            3.0e7,
            f64::NAN,
        ] {
            let back: f64 = num(v).parse().unwrap();
            assert!(back == v || (v.is_nan() && back.is_nan()), "{v}");
        }
        assert_eq!(num(2.5e-3), "0.0025");
        assert_eq!(num(5e-4), "5e-4");
        assert_eq!(num_list(&[0.5, 0.25]), "0.5;0.25");
    }

    #[test]
    fn tables_round_trip_through_files() {
        let dir = std::env::temp_dir().join(format!("gapfield-table-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.comment("scenario = x");
        t.push(vec!["1".into(), "0.5;0.25".into()]);
        let p = dir.join("t.csv");
        t.write(&p).unwrap();
        let (cols, rows) = read_table(&p).unwrap();
        assert_eq!(cols, ["a", "b"]);
        assert_eq!(column(&cols, &rows, "b").unwrap(), ["0.5;0.25"]);
        assert!(column(&cols, &rows, "c").is_err());
        std::fs::remove_dir_all(dir).unwrap();
    }
}
