//! Fixed-width text tables with a CSV twin. Text rounds numbers for
//! reading; CSV keeps them round-trip exact.

pub enum Cell {
    Text(String),
    Num(Option<f64>),
    /// Rendered in scientific notation in the text table.
    Sci(f64),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Self::Text(s) => s.clone(),
            Self::Num(Some(v)) => format!("{v:.6}"),
            Self::Num(None) => "n/a".into(),
            Self::Sci(v) => format!("{v:.6e}"),
        }
    }

    fn csv(&self) -> String {
        match self {
            Self::Text(s) => s.clone(),
            Self::Num(Some(v)) | Self::Sci(v) => format!("{v:?}"),
            Self::Num(None) => String::new(),
        }
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Self::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Self::Text(s.to_string())
    }
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::text).collect())
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].len())
                    .chain(std::iter::once(self.header[c].len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(&self.header);
        out.push('\n');
        out.push_str(&"-".repeat(out.len() - 1));
        out.push('\n');
        for r in &rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// Numeric cell; `n/a` (empty in CSV) when undefined.
pub fn num(v: Option<f64>) -> Cell {
    Cell::Num(v)
}
