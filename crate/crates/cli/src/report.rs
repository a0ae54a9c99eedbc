//! Markdown and CSV accuracy tables: one row per distinct objective pair.

use cnnmil::Objectives;

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    /// Accuracy on negative bags.
    pub class0: f64,
    /// Accuracy on positive bags.
    pub class1: f64,
    pub models: usize,
}

/// Groups solutions sharing an objective pair, best Class 0 accuracy first.
pub fn table_rows(points: &[Objectives]) -> Vec<TableRow> {
    let mut rows: Vec<TableRow> = Vec::new();
    for p in points {
        match rows.iter_mut().find(|r| r.class0 == p.acc_neg && r.class1 == p.acc_pos) {
            Some(row) => row.models += 1,
            None => rows.push(TableRow { class0: p.acc_neg, class1: p.acc_pos, models: 1 }),
        }
    }
    rows.sort_by(|a, b| b.class0.total_cmp(&a.class0).then(b.class1.total_cmp(&a.class1)));
    rows
}

pub fn percent(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

pub fn markdown(title: &str, rows: &[TableRow]) -> String {
    let mut out = format!("{title}\n\n| Class 0 accuracy | Class 1 accuracy | # Models |\n|---:|---:|---:|\n");
    for r in rows {
        out.push_str(&format!("| {} | {} | {} |\n", percent(r.class0), percent(r.class1), r.models));
    }
    out
}

pub fn csv(rows: &[TableRow]) -> String {
    let mut out = String::from("Class 0 accuracy,Class 1 accuracy,# Models\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", percent(r.class0), percent(r.class1), r.models));
    }
    out
}
