/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    /// A parameter value, printed with shortest digits in both renderings.
    Key(f64),
    Number(f64),
    /// A value the method failed to produce.
    Failed,
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Failed, Cell::Number)
    }

    fn render(&self, raw: bool) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Number(x) if x.is_nan() => "NaN".into(),
            Cell::Key(x) => format!("{x}"),
            Cell::Number(x) if raw => format!("{x}"),
            Cell::Number(x) => {
                let s = format!("{x:.4}");
                // Values that round to zero print unsigned.
                if s == "-0.0000" {
                    "0.0000".into()
                } else {
                    s
                }
            }
            Cell::Failed => "ERR".into(),
            Cell::Empty => String::new(),
        }
    }
}

/// Comma-separated table with a header row, '.' decimals, `\n` line ends.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Four decimals, or shortest round-trip digits when `raw`.
    pub fn render(&self, raw: bool) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.render(raw)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}
