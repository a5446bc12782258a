//! Tabular command output: deterministic CSV/TSV emission plus a plain
//! aligned rendering for the terminal.

/// One output cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    /// Floats are emitted with 17 significant digits.
    Num(f64),
    Int(i64),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Num(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Str(s) => Some(s),
            _ => None,
        }
    }
}

/// 17-significant-digit float formatting (round-trips any f64).
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A fixed-schema result table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Delimited rendering with `\n` line endings.
    pub fn delimited(&self, sep: char) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(&sep.to_string()));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(&sep.to_string()));
            out.push('\n');
        }
        out
    }

    /// Space-aligned rendering for terminals, with shorter numbers.
    pub fn pretty(&self) -> String {
        let fmt_cell = |c: &Cell| match c {
            Cell::Num(x) => format!("{x:.6}"),
            other => other.render(),
        };
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        let rendered: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(fmt_cell).collect())
            .collect();
        for row in &rendered {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        for (i, h) in self.header.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(&format!("{h:>width$}", width = widths[i]));
        }
        out.push('\n');
        for row in &rendered {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push_str("  ");
                }
                out.push_str(&format!("{cell:>width$}", width = widths[i]));
            }
            out.push('\n');
        }
        out
    }
}
