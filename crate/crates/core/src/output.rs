//! CSV tables and SVG line plots. Output is a pure function of its input:
//! fixed column order, shortest round-trip float formatting, no timestamps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::verify::ScanReport;

pub const SCAN_SCHEMA: &str = "# infinitas scan v1 theta-normalization=ball";
pub const JUMP_SCHEMA: &str = "# infinitas jumps v1";
pub const SVG_SCHEMA: &str = "infinitas plot v1";
pub const ACV_SCHEMA: &str = "# infinitas acv v1";
pub const DENSITY_SCHEMA: &str = "# infinitas density v1 theta-normalization=ball";
pub const LINKS_SCHEMA: &str = "# infinitas links v1";
pub const CHI_SCHEMA: &str = "# infinitas chi v1";
pub const GB_SCHEMA: &str = "# infinitas gb-check v1";

/// A CSV table with a schema comment line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub schema: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &str, header: &[&str]) -> Self {
        Self {
            schema: schema.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        // writing to a Vec cannot fail
        w.write_record(&self.header).expect("in-memory csv");
        for r in &self.rows {
            w.write_record(r).expect("in-memory csv");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 fields");
        format!("{}\n{body}", self.schema)
    }
}

pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into() // folds -0
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn fmt_y(y: &[f64]) -> String {
    y.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(";")
}

/// One row per grid node and quantity: `y, quantity, component, value,
/// error, status`. Nodes next to the estimated `K` get status `near-K`.
pub fn scan_table(report: &ScanReport) -> Table {
    let mut t = Table::new(SCAN_SCHEMA, &["y", "quantity", "component", "value", "error", "status"]);
    for v in &report.nodes {
        for (q, c, e) in v.entries() {
            let status = if v.near_k {
                "near-K".to_string()
            } else {
                e.status.clone()
            };
            t.push(vec![fmt_y(&v.y), q, c, fmt_opt(e.value), fmt_opt(e.error), status]);
        }
    }
    t
}

pub fn jump_table(report: &ScanReport) -> Table {
    let mut t = Table::new(
        JUMP_SCHEMA,
        &[
            "from",
            "to",
            "quantity",
            "component",
            "delta",
            "threshold",
            "contains_k",
        ],
    );
    for j in &report.jumps {
        t.push(vec![
            fmt_y(&j.from),
            fmt_y(&j.to),
            j.quantity.clone(),
            j.component.clone(),
            fmt_num(j.delta),
            fmt_num(j.threshold),
            j.contains_k.to_string(),
        ]);
    }
    t
}

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

/// Line plot of one aggregate quantity over a one-parameter scan, with jump
/// cells shaded and `K` entries as dashed vertical markers.
pub fn scan_svg(report: &ScanReport, quantity: &str) -> String {
    let pts: Vec<(f64, Option<f64>)> = report
        .nodes
        .iter()
        .filter(|v| v.y.len() == 1)
        .map(|v| (v.y[0], v.get(quantity).and_then(|e| e.value)))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, "<!-- {SVG_SCHEMA}: {quantity} -->");
    let _ = writeln!(s, r##"<rect width="{W}" height="{H}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{quantity}</text>"##,
        W / 2.0
    );
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let vs: Vec<f64> = pts.iter().filter_map(|p| p.1).collect();
    if xs.is_empty() {
        let _ = writeln!(s, "</svg>");
        return s;
    }
    let (x0, x1) = span(&xs, 0.5);
    let (v0, v1) = if vs.is_empty() { (-1.0, 1.0) } else { span(&vs, 1.0) };
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (v - v0) / (v1 - v0) * (H - 2.0 * PAD);
    let _ = writeln!(
        s,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#888888"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for j in report
        .jumps
        .iter()
        .filter(|j| j.quantity == quantity && j.component == "all")
    {
        let (a, b) = (px(j.from[0].min(j.to[0])), px(j.from[0].max(j.to[0])));
        let _ = writeln!(
            s,
            r##"<rect x="{a:.2}" y="{PAD}" width="{:.2}" height="{}" fill="#f4b0a0" fill-opacity="0.5"/>"##,
            b - a,
            H - 2.0 * PAD
        );
    }
    for k in &report.acv.k {
        if k.lo.len() == 1 && k.hi[0] >= x0 && k.lo[0] <= x1 {
            let x = px(0.5 * (k.lo[0] + k.hi[0]));
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{PAD}" x2="{x:.2}" y2="{}" stroke="#c03020" stroke-dasharray="4 3"/>"##,
                H - PAD
            );
        }
    }
    // one polyline per run of present values
    let mut run: Vec<String> = Vec::new();
    let flush = |run: &mut Vec<String>, s: &mut String| {
        if !run.is_empty() {
            let _ = writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="#1f4e9a" stroke-width="1.5"/>"##,
                run.join(" ")
            );
            run.clear();
        }
    };
    for &(x, v) in &pts {
        match v {
            Some(v) => run.push(format!("{:.2},{:.2}", px(x), py(v))),
            None => flush(&mut run, &mut s),
        }
    }
    flush(&mut run, &mut s);
    for (x, v) in pts.iter().filter_map(|&(x, v)| v.map(|v| (x, v))) {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#1f4e9a"/>"##,
            px(x),
            py(v)
        );
    }
    for (x, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{}</text>"##,
            px(x),
            H - PAD + 16.0,
            fmt_tick(x)
        );
    }
    for v in [v0, v1] {
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"##,
            PAD - 4.0,
            py(v) + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}

fn fmt_tick(v: f64) -> String {
    let t = format!("{v:.3}");
    if t == "-0.000" {
        "0.000".into()
    } else {
        t
    }
}

/// `[min, max]` widened by 5%, or `mid ± flat` when the spread is below the
/// jump floor (so noise on a constant trace does not fill the plot).
fn span(v: &[f64], flat: f64) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < crate::verify::JUMP_FLOOR {
        let mid = 0.5 * (lo + hi);
        (mid - flat, mid + flat)
    } else {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    write_file(path, &table.to_csv())
}

/// Writes `scan.csv`, `jumps.csv` and one `<quantity>.svg` per aggregate
/// quantity into `dir`; returns the paths in write order.
pub fn emit_outputs(report: &ScanReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    let scan = dir.join("scan.csv");
    write_table(&scan, &scan_table(report))?;
    out.push(scan);
    let jumps = dir.join("jumps.csv");
    write_table(&jumps, &jump_table(report))?;
    out.push(jumps);
    let quantities: Vec<String> = match report.nodes.first() {
        Some(v) => v
            .entries()
            .into_iter()
            .filter(|(_, c, _)| c == "all")
            .map(|(q, _, _)| q)
            .collect(),
        None => vec!["empty".into()],
    };
    for q in quantities {
        let p = dir.join(format!("{q}.svg"));
        write_file(&p, &scan_svg(report, &q))?;
        out.push(p);
    }
    Ok(out)
}
