use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::Value;

use super::ReportTable;
use crate::error::{Error, Result};

const CELL: f64 = 64.0;
const MARGIN: f64 = 90.0;

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn sort_values(values: &mut [Value]) {
    values.sort_by(|a, b| match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => label(a).cmp(&label(b)),
    });
}

/// Write a standalone SVG heatmap of `metric` over two grid axes. Cells
/// sharing the same axis values are averaged; empty positions stay blank.
pub fn emit_heatmap(table: &ReportTable, metric: &str, axes: (&str, &str), out: &Path) -> Result<()> {
    let rows: Vec<_> = table.rows.iter().filter(|r| r.metric == metric).collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!("no rows for metric {metric}")));
    }
    let mut xs: Vec<Value> = Vec::new();
    let mut ys: Vec<Value> = Vec::new();
    for r in &rows {
        let x = r.cell.get(axes.0).ok_or_else(|| Error::InvalidArgument(format!("axis {} missing", axes.0)))?;
        let y = r.cell.get(axes.1).ok_or_else(|| Error::InvalidArgument(format!("axis {} missing", axes.1)))?;
        if !xs.contains(x) {
            xs.push(x.clone());
        }
        if !ys.contains(y) {
            ys.push(y.clone());
        }
    }
    sort_values(&mut xs);
    sort_values(&mut ys);
    let width = MARGIN + CELL * xs.len() as f64 + 20.0;
    let height = MARGIN + CELL * ys.len() as f64 + 40.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{metric}</text>"#, width / 2.0);
    for (j, y) in ys.iter().enumerate() {
        for (i, x) in xs.iter().enumerate() {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.cell.get(axes.0) == Some(x) && r.cell.get(axes.1) == Some(y))
                .map(|r| r.mean)
                .filter(|v| v.is_finite())
                .collect();
            let (px, py) = (MARGIN + CELL * i as f64, 30.0 + CELL * j as f64);
            if vals.is_empty() {
                let _ = writeln!(svg, r##"<rect x="{px}" y="{py}" width="{CELL}" height="{CELL}" fill="#eeeeee" stroke="#ffffff"/>"##);
                continue;
            }
            let v = vals.iter().sum::<f64>() / vals.len() as f64;
            let t = v.clamp(0.0, 1.0);
            let (r, g, b) = ((255.0 * (1.0 - t)) as u8, (90.0 + 120.0 * t) as u8, (200.0 * t) as u8);
            let ink = if t > 0.6 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                svg,
                r##"<rect x="{px}" y="{py}" width="{CELL}" height="{CELL}" fill="rgb({r},{g},{b})" stroke="#ffffff"/>"##
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{v:.3}</text>"#,
                px + CELL / 2.0,
                py + CELL / 2.0 + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            30.0 + CELL * j as f64 + CELL / 2.0 + 4.0,
            label(y)
        );
    }
    let base = 30.0 + CELL * ys.len() as f64 + 16.0;
    for (i, x) in xs.iter().enumerate() {
        let _ = writeln!(svg, r#"<text x="{}" y="{base}" text-anchor="middle">{}</text>"#, MARGIN + CELL * i as f64 + CELL / 2.0, label(x));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, MARGIN + CELL * xs.len() as f64 / 2.0, base + 18.0, axes.0);
    let _ = writeln!(svg, r#"<text x="12" y="{}" transform="rotate(-90 12 {0})" text-anchor="middle">{}</text>"#, 30.0 + CELL * ys.len() as f64 / 2.0, axes.1);
    svg.push_str("</svg>\n");
    fs::write(out, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{Cell, ReportRow};
    use super::*;
    use serde_json::json;

    fn row(x: f64, y: i64, mean: f64) -> ReportRow {
        ReportRow {
            cell: Cell::from([("x".to_string(), json!(x)), ("y".to_string(), json!(y))]),
            metric: "acc".into(),
            mean,
            std: 0.0,
            n: 1,
            failed: false,
        }
    }

    #[test]
    fn one_cell() {
        let dir = tempfile::tempdir().unwrap();
        let t = ReportTable { format: super::super::REPORT_FORMAT.into(), rows: vec![row(0.1, 2, 0.5)] };
        let path = dir.path().join("h.svg");
        emit_heatmap(&t, "acc", ("x", "y"), &path).unwrap();
        let svg = fs::read_to_string(path).unwrap();
        assert_eq!(svg.matches("<rect").count(), 1);
        assert!(svg.contains("0.500"));
    }

    #[test]
    fn grid_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row(0.1, 2, 0.5), row(0.2, 2, 0.6), row(0.1, 3, 0.7), row(0.2, 3, 0.8)];
        let t = ReportTable { format: super::super::REPORT_FORMAT.into(), rows };
        let path = dir.path().join("h.svg");
        emit_heatmap(&t, "acc", ("x", "y"), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().matches("<rect").count(), 4);
        assert!(emit_heatmap(&t, "acc", ("x", "z"), &path).is_err());
        assert!(emit_heatmap(&ReportTable::default(), "acc", ("x", "y"), &path).is_err());
    }
}
