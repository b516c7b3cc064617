//! Tables with a provenance header, rendered as CSV or JSON.

use std::fmt::Write as _;

use bslab_core::field::fmt17;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => fmt17(*v),
            Cell::Num(v) => json_string(&num(*v)),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => json_string(s),
            Cell::Missing => "null".into(),
        }
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        fmt17(v)
    }
}

pub fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    pub command: String,
    /// Measure descriptor as compact JSON.
    pub measure: String,
    pub mu_total: f64,
    /// The relation the table realizes, in words.
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    /// Scalar results reported alongside the rows.
    pub notes: Vec<(String, Cell)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Raw CSV body replacing the rows (eigenfunction grids).
    pub body: Option<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    pub fn note(&mut self, key: &str, value: Cell) {
        self.notes.push((key.to_string(), value));
    }

    pub fn to_csv(&self, p: &Provenance) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# bslab {}", p.version);
        let _ = writeln!(out, "# config_sha256: {}", p.config_hash);
        let _ = writeln!(out, "# command: {}", p.command);
        let _ = writeln!(out, "# measure: {}", p.measure);
        let _ = writeln!(out, "# mu_total: {}", num(p.mu_total));
        let _ = writeln!(out, "# relation: {}", p.relation);
        for (k, v) in &self.notes {
            let _ = writeln!(out, "# {k}: {}", v.csv());
        }
        if let Some(body) = &self.body {
            out.push_str(body);
            return out;
        }
        if !self.columns.is_empty() {
            out.push_str(&self.columns.join(","));
            out.push('\n');
        }
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, p: &Provenance) -> String {
        let mut out = String::from("{\n");
        let _ = writeln!(out, "  \"provenance\": {{");
        let _ = writeln!(out, "    \"tool\": \"bslab\",");
        let _ = writeln!(out, "    \"version\": {},", json_string(&p.version));
        let _ = writeln!(out, "    \"config_sha256\": {},", json_string(&p.config_hash));
        let _ = writeln!(out, "    \"command\": {},", json_string(&p.command));
        let _ = writeln!(out, "    \"measure\": {},", p.measure);
        let _ = writeln!(out, "    \"relation\": {}", json_string(&p.relation));
        out.push_str("  },\n");
        let mut fields: Vec<String> = vec![format!("  \"mu_total\": {}", Cell::Num(p.mu_total).json())];
        for (k, v) in &self.notes {
            fields.push(format!("  {}: {}", json_string(k), v.json()));
        }
        if !self.columns.is_empty() {
            let cols: Vec<String> = self.columns.iter().map(|c| json_string(c)).collect();
            fields.push(format!("  \"columns\": [{}]", cols.join(", ")));
            let rows: Vec<String> = self
                .rows
                .iter()
                .map(|r| format!("    [{}]", r.iter().map(Cell::json).collect::<Vec<_>>().join(", ")))
                .collect();
            if rows.is_empty() {
                fields.push("  \"rows\": []".into());
            } else {
                fields.push(format!("  \"rows\": [\n{}\n  ]", rows.join(",\n")));
            }
        }
        out.push_str(&fields.join(",\n"));
        out.push_str("\n}\n");
        out
    }
}
