//! Self-describing CSV tables: `#` comment lines, one header row, then data.
//! Numbers are written with 9 significant digits; missing values are empty.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn num(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_sig(*x),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn parse(s: &str) -> Cell {
        let t = s.trim();
        if t.is_empty() {
            Cell::Empty
        } else {
            match t.parse::<f64>() {
                Ok(x)
                    if t.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b)) || t == "-inf" || t == "inf" =>
                {
                    Cell::Num(x)
                }
                _ => Cell::Text(t.to_string()),
            }
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        if s.is_empty() {
            Cell::Empty
        } else {
            Cell::Text(s.to_string())
        }
    }
}

/// Formats with 9 significant digits, in plain notation for moderate
/// magnitudes and scientific notation otherwise; trailing zeros dropped.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    /// Comment lines without the leading `# `.
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::invalid(
                "row",
                format!("expected {} cells, got {}", self.columns.len(), row.len()),
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column, `None` where a cell is empty or text.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k].num()).collect())
    }

    pub fn text_column(&self, name: &str) -> Option<Vec<Option<&str>>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k].text()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            for line in c.lines() {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
        }
        out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("utf-8 input"));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut comments = Vec::new();
        let mut body_start = 0;
        let mut line_no = 0;
        for line in text.split_inclusive('\n') {
            if let Some(c) = line.strip_prefix('#') {
                let c = c.trim_end_matches(['\n', '\r']);
                comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
                body_start += line.len();
                line_no += 1;
            } else {
                break;
            }
        }
        // Comments are only recognised above the header.
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(&text.as_bytes()[body_start..]);
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse(line_no + 1, e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if columns.is_empty() || columns.iter().any(String::is_empty) {
            return Err(Error::parse(line_no + 1, "empty column name in header"));
        }
        if columns[0].starts_with('#') {
            return Err(Error::parse(line_no + 1, "first column name starts with `#`"));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| line_no + p.line() as usize);
                Error::parse(line, e.to_string())
            })?;
            rows.push(rec.iter().map(Cell::parse).collect());
        }
        Ok(Self {
            comments,
            columns,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig(0.1), "0.1");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig(123456789.4), "123456789");
        assert_eq!(format_sig(1234567890.0), "1.23456789e9");
        assert_eq!(format_sig(-2.5e-7), "-2.5e-7");
        assert_eq!(format_sig(0.094), "0.094");
        assert_eq!(format_sig(99999.99999), "100000");
        assert_eq!(format_sig(1e-5), "0.00001");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn round_trip_with_comments_and_gaps() {
        let mut t = ResultTable::new(&["sweep_value", "status", "pc", "sim_pc"]);
        t.comments = vec!["latcr 0.1.0".into(), "param mu = 0.002".into()];
        t.push(vec![1.5.into(), "ok".into(), 0.1.into(), Cell::Empty]).unwrap();
        t.push(vec![2.0.into(), "infeasible".into(), Cell::Empty, Cell::Empty])
            .unwrap();
        let s = t.to_csv();
        assert!(s.starts_with("# latcr 0.1.0\n# param mu = 0.002\nsweep_value,status,pc,sim_pc\n1.5,ok,0.1,\n"));
        let back = ResultTable::from_csv(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("pc").unwrap(), vec![Some(0.1), None]);
        assert_eq!(
            back.text_column("status").unwrap(),
            vec![Some("ok"), Some("infeasible")]
        );
    }

    #[test]
    fn hash_in_a_cell_survives() {
        let t = ResultTable::from_csv("a,b\n\"#x\",1\n").unwrap();
        assert_eq!(t.rows[0][0], Cell::Text("#x".into()));
        assert_eq!(ResultTable::from_csv(&t.to_csv()).unwrap(), t);
        assert!(ResultTable::from_csv("\"#a\",b\n").is_err());
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(ResultTable::from_csv("a,b\n1,2\n3\n").is_err());
        let mut t = ResultTable::new(&["a"]);
        assert!(t.push(vec![Cell::Empty, Cell::Empty]).is_err());
    }

    proptest! {
        #[test]
        fn formatting_keeps_nine_digits(x in proptest::num::f64::NORMAL) {
            let back: f64 = format_sig(x).parse().unwrap();
            prop_assert!(((back - x) / x).abs() <= 5e-9);
        }

        #[test]
        fn reader_never_panics(s in ".{0,300}") {
            let _ = ResultTable::from_csv(&s);
        }

        #[test]
        fn rewriting_is_stable(s in "(#[ -~]{0,10}\n){0,2}[a-c#\\\", ]{1,6}\n([-a-c0-9.e#\", \n]{0,20})") {
            if let Ok(t) = ResultTable::from_csv(&s) {
                let once = ResultTable::from_csv(&t.to_csv()).unwrap();
                let twice = ResultTable::from_csv(&once.to_csv()).unwrap();
                prop_assert_eq!(&once.to_csv(), &twice.to_csv());
                prop_assert_eq!(once, twice);
            }
        }
    }
}
