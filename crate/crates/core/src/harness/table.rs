use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::metrics::{Aggregate, Direction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub metric: String,
    pub direction: Direction,
    /// One cell per column; `None` when a method produced no values.
    pub cells: Vec<Option<Aggregate>>,
}

/// Rows are metrics, columns are methods, cells are mean (SD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

fn cell_text(c: &Option<Aggregate>) -> String {
    match c {
        Some(a) => format!("{:.2} ({:.2})", a.mean, a.sd),
        None => "n/a".into(),
    }
}

pub fn emit_table(table: &BenchmarkTable, format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            let _ = writeln!(out, "| Metric | {} |", table.columns.join(" | "));
            let _ = writeln!(out, "|---|{}", "---|".repeat(table.columns.len()));
            for r in &table.rows {
                let cells: Vec<String> = r.cells.iter().map(cell_text).collect();
                let _ = writeln!(out, "| {} {} | {} |", r.metric, r.direction.arrow(), cells.join(" | "));
            }
        }
        TableFormat::Csv => {
            let mut header = vec!["metric".to_string(), "direction".to_string()];
            for c in &table.columns {
                header.push(format!("{c}_mean"));
                header.push(format!("{c}_sd"));
            }
            let _ = writeln!(out, "{}", header.join(","));
            for r in &table.rows {
                let mut fields = vec![r.metric.clone(), r.direction.arrow().to_string()];
                for c in &r.cells {
                    match c {
                        Some(a) => {
                            fields.push(format!("{:.2}", a.mean));
                            fields.push(format!("{:.2}", a.sd));
                        }
                        None => fields.extend(["n/a".to_string(), "n/a".to_string()]),
                    }
                }
                let _ = writeln!(out, "{}", fields.join(","));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> BenchmarkTable {
        BenchmarkTable {
            columns: vec!["latent".into(), "nn-l1".into()],
            rows: vec![TableRow {
                metric: "L1".into(),
                direction: Direction::LowerBetter,
                cells: vec![
                    Some(Aggregate {
                        mean: 3.412,
                        sd: 1.068,
                        n: 10,
                    }),
                    Some(Aggregate {
                        mean: 5.43,
                        sd: 0.5,
                        n: 10,
                    }),
                ],
            }],
        }
    }

    #[test]
    fn cell_rounding() {
        let md = emit_table(&table(), TableFormat::Markdown);
        assert!(md.contains("| L1 ↓ | 3.41 (1.07) | 5.43 (0.50) |"), "{md}");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = BenchmarkTable {
            columns: vec!["a".into()],
            rows: vec![],
        };
        assert_eq!(emit_table(&t, TableFormat::Markdown), "| Metric | a |\n|---|---|\n");
        assert_eq!(emit_table(&t, TableFormat::Csv), "metric,direction,a_mean,a_sd\n");
    }

    #[test]
    fn csv_and_markdown_share_numbers() {
        let csv = emit_table(&table(), TableFormat::Csv);
        assert_eq!(csv.lines().nth(1).unwrap(), "L1,↓,3.41,1.07,5.43,0.50");
    }
}
