use std::fmt;

/// One machine-readable metric, printed as `path = value`.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub path: String,
    pub value: f64,
}

impl Record {
    pub fn new(path: impl Into<String>, value: f64) -> Self {
        Record { path: path.into(), value }
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.path, self.value)
    }
}

pub fn render_records(records: &[Record]) -> String {
    records.iter().map(|r| format!("{r}\n")).collect()
}

/// Parses `path = value` lines back into records.
pub fn parse_records(text: &str) -> Vec<Record> {
    text.lines()
        .filter_map(|l| {
            let (p, v) = l.split_once(" = ")?;
            Some(Record::new(p.trim(), v.trim().parse().ok()?))
        })
        .collect()
}

pub fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

/// Plain-text table with left-aligned first column.
#[derive(Clone, Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let cols = self.header.len();
        let mut width = vec![0; cols];
        for r in std::iter::once(&self.header).chain(&self.rows) {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |r: &[String]| -> String {
            let cells: Vec<String> = (0..cols)
                .map(|i| {
                    let c = r.get(i).map_or("", String::as_str);
                    if i == 0 {
                        format!("{c:<w$}", w = width[i])
                    } else {
                        format!("{c:>w$}", w = width[i])
                    }
                })
                .collect();
            cells.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip() {
        let r = vec![Record::new("a.b", 0.25), Record::new("c", -3.0)];
        assert_eq!(parse_records(&render_records(&r)), r);
    }

    #[test]
    fn table_aligns_columns() {
        let mut t = Table::new(&["model", "acc"]);
        t.row(vec!["vae".into(), "50.00%".into()]);
        t.row(vec!["csvae".into(), "9.00%".into()]);
        let s = t.render();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "model     acc");
        assert_eq!(lines[2], "vae    50.00%");
        assert_eq!(lines[3], "csvae   9.00%");
    }
}
