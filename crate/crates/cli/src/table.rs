//! Strategy comparison table: one column per strategy, rows grouped as
//! final objective, optimal base stock, optimal reorder point and other
//! diagnostics.

use std::fmt::Write as _;

use echelon_core::model::{FacilityId, FacilityPolicy};

/// One strategy's column.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyColumn {
    pub label: String,
    pub best_z: f64,
    pub reduction_percent: f64,
    pub policy: Vec<FacilityPolicy>,
    pub evaluations: usize,
    pub minutes: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub title: String,
    pub facilities: Vec<FacilityId>,
    pub columns: Vec<StrategyColumn>,
}

/// A row is either a group heading (no cells) or a labelled value row.
type Row = (String, Option<Vec<String>>);

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

impl ComparisonTable {
    pub fn rows(&self) -> Vec<Row> {
        let cells = |f: &dyn Fn(&StrategyColumn) -> String| Some(self.columns.iter().map(f).collect());
        let mut rows: Vec<Row> = vec![
            ("Final objective".into(), None),
            ("Optimal objective".into(), cells(&|c| format!("{:.0}", c.best_z))),
            (
                "% reduction from the initial guess".into(),
                cells(&|c| format!("{:.0}%", c.reduction_percent)),
            ),
            ("Optimal Base stock".into(), None),
        ];
        for (i, id) in self.facilities.iter().enumerate() {
            rows.push((format!("Facility {id}"), cells(&|c| c.policy[i].base_stock.to_string())));
        }
        rows.push(("Optimal ROP".into(), None));
        for (i, id) in self.facilities.iter().enumerate() {
            rows.push((format!("Facility {id}"), cells(&|c| c.policy[i].reorder_point.to_string())));
        }
        rows.push(("Other diagnostics".into(), None));
        rows.push(("Total iterations".into(), cells(&|c| thousands(c.evaluations))));
        rows.push(("CPU time (minutes)".into(), cells(&|c| format!("{:.2}", c.minutes))));
        rows
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.columns.iter().map(|c| c.label.clone()));
        w.write_record(&header)?;
        for (label, cells) in self.rows() {
            let mut record = vec![label];
            record.extend(cells.unwrap_or_else(|| vec![String::new(); self.columns.len()]));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let indent = "   ";
        let label_width = rows
            .iter()
            .map(|(l, c)| l.chars().count() + if c.is_some() { indent.len() } else { 0 })
            .max()
            .unwrap_or(0);
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                rows.iter()
                    .filter_map(|(_, cells)| cells.as_ref().map(|v| v[j].len()))
                    .chain([c.label.len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let total = label_width + widths.iter().map(|w| w + 3).sum::<usize>();
        let rule = "-".repeat(total);
        let mut s = String::new();
        writeln!(s, "{}", self.title).unwrap();
        writeln!(s, "{rule}").unwrap();
        write!(s, "{:label_width$}", "").unwrap();
        for (c, w) in self.columns.iter().zip(&widths) {
            write!(s, " | {:>w$}", c.label).unwrap();
        }
        writeln!(s).unwrap();
        for (label, cells) in rows {
            match cells {
                None => {
                    writeln!(s, "{rule}").unwrap();
                    writeln!(s, "{label}").unwrap();
                }
                Some(cells) => {
                    write!(s, "{:label_width$}", format!("{indent}{label}")).unwrap();
                    for (v, w) in cells.iter().zip(&widths) {
                        write!(s, " | {v:>w$}").unwrap();
                    }
                    writeln!(s).unwrap();
                }
            }
        }
        writeln!(s, "{rule}").unwrap();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n: usize) -> ComparisonTable {
        let column = |label: &str| StrategyColumn {
            label: label.into(),
            best_z: 951.4,
            reduction_percent: 64.8,
            policy: vec![
                FacilityPolicy {
                    reorder_point: 835,
                    base_stock: 835,
                },
                FacilityPolicy {
                    reorder_point: 196,
                    base_stock: 254,
                },
            ],
            evaluations: 20_000,
            minutes: 1.5,
        };
        ComparisonTable {
            title: "t".into(),
            facilities: vec![FacilityId(1), FacilityId(2)],
            columns: ["a", "b", "c"][..n].iter().map(|l| column(l)).collect(),
        }
    }

    #[test]
    fn row_layout() {
        let labels: Vec<String> = table(3).rows().into_iter().map(|r| r.0).collect();
        assert_eq!(
            labels,
            [
                "Final objective",
                "Optimal objective",
                "% reduction from the initial guess",
                "Optimal Base stock",
                "Facility 1",
                "Facility 2",
                "Optimal ROP",
                "Facility 1",
                "Facility 2",
                "Other diagnostics",
                "Total iterations",
                "CPU time (minutes)",
            ]
        );
    }

    #[test]
    fn csv_and_text_forms() {
        let mut buf = Vec::new();
        table(1).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(",a\n"));
        assert!(text.contains("Optimal objective,951\n"));
        assert!(text.contains("% reduction from the initial guess,65%\n"));
        assert!(text.contains("Total iterations,\"20,000\"\n"));
        let t = table(3).to_text();
        assert!(t.contains("   Facility 1"));
        assert_eq!(t.lines().filter(|l| l.contains("835")).count(), 2);
    }
}
