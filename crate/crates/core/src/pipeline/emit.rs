//! Writes reports as JSON, CSV tables and SVG figures. Output contains no
//! timestamps, so identical runs give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::report::{LosSummary, Provenance, RepeatReport, RunReport, SexReport};
use crate::error::{Error, Result};
use crate::metrics::{GroupMetricTable, RangeMetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitOptions {
    pub svg: bool,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions { svg: true }
    }
}

/// Three decimals, or `NA` for undefined values.
pub fn fmt3(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.3}")
    } else {
        "NA".into()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt3).unwrap_or_else(|| "NA".into())
}

fn sex_stem(s: &SexReport) -> String {
    s.sex.label().to_ascii_lowercase()
}

/// CSV text headed by a `# <provenance>` comment line.
pub fn csv_table(provenance: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let body = w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    Ok(format!("# {}\n{}", provenance.tag(), String::from_utf8_lossy(&body)))
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn performance_rows(report: &RunReport) -> Vec<Vec<String>> {
    report
        .sexes
        .iter()
        .map(|s| {
            let m = &s.model.metrics;
            vec![
                s.sex.label().into(),
                s.model.learner.label().into(),
                s.psi.to_string(),
                fmt_opt(m.auc),
                fmt3(m.fnr),
                fmt3(m.fpr),
                fmt3(m.balanced_accuracy),
            ]
        })
        .collect()
}

/// One row per group plus a trailing `range` row.
pub fn group_rows(table: &GroupMetricTable) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let m = r.metrics.as_ref();
            vec![
                r.group.clone(),
                r.n.to_string(),
                fmt_opt(m.and_then(|m| m.auc)),
                fmt_opt(m.map(|m| m.fnr)),
                fmt_opt(m.map(|m| m.fpr)),
                fmt_opt(m.map(|m| m.balanced_accuracy)),
                r.excluded_reason.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let r = &table.ranges;
    rows.push(vec![
        "range".into(),
        String::new(),
        fmt_opt(r.auc),
        fmt3(r.fnr),
        fmt3(r.fpr),
        fmt3(r.balanced_accuracy),
        String::new(),
    ]);
    rows
}

pub const GROUP_HEADER: [&str; 7] = ["group", "n", "auc", "fnr", "fpr", "balanced_accuracy", "note"];

/// Writes `report.json` and every table and figure; returns the paths written.
pub fn emit_report(report: &RunReport, out: &Path, options: &EmitOptions) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let p = &report.provenance;
    let mut written = vec![write(out.join("report.json"), &report.to_json()?)?];
    written.push(write(
        out.join("performance.csv"),
        &csv_table(
            p,
            &["sex", "learner", "psi", "auc", "fnr", "fpr", "balanced_accuracy"],
            &performance_rows(report),
        )?,
    )?);
    let reference: Vec<Vec<String>> = report
        .external_reference
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.sex.label().into(),
                fmt3(r.auc),
                fmt3(r.fnr),
                fmt3(r.fpr),
                fmt3(r.balanced_accuracy),
            ]
        })
        .collect();
    written.push(write(
        out.join("reference.csv"),
        &csv_table(
            p,
            &["model", "sex", "auc", "fnr", "fpr", "balanced_accuracy"],
            &reference,
        )?,
    )?);

    for s in &report.sexes {
        let stem = sex_stem(s);
        written.push(write(
            out.join(format!("groups_{stem}.csv")),
            &csv_table(p, &GROUP_HEADER, &group_rows(&s.model.groups))?,
        )?);
        let demographics: Vec<Vec<String>> = s
            .dataset
            .categories
            .iter()
            .map(|c| {
                vec![
                    c.variable.clone(),
                    c.category.clone(),
                    c.admissions.to_string(),
                    fmt3(c.share),
                    c.long_stays.to_string(),
                    fmt3(c.long_stay_rate),
                ]
            })
            .collect();
        written.push(write(
            out.join(format!("demographics_{stem}.csv")),
            &csv_table(
                p,
                &[
                    "variable",
                    "category",
                    "admissions",
                    "share",
                    "long_stays",
                    "long_stay_rate",
                ],
                &demographics,
            )?,
        )?);
        if let Some(m) = &s.mitigation {
            let mut rows: Vec<Vec<String>> = m
                .comparison
                .ranges
                .iter()
                .map(|r| {
                    vec![
                        r.metric.label().into(),
                        fmt3(r.unmitigated),
                        fmt3(r.exponentiated_gradient),
                        fmt3(r.threshold_optimizer),
                        fmt3(r.delta_eg),
                        fmt3(r.delta_threshold),
                        r.minimizing.iter().map(|m| m.label()).collect::<Vec<_>>().join("; "),
                    ]
                })
                .collect();
            rows.sort_by_key(|r| RangeMetric::ALL.iter().position(|m| m.label() == r[0]));
            written.push(write(
                out.join(format!("mitigation_{stem}.csv")),
                &csv_table(
                    p,
                    &[
                        "metric",
                        "unmitigated",
                        "exponentiated_gradient",
                        "threshold_optimizer",
                        "delta_eg",
                        "delta_threshold",
                        "minimizing",
                    ],
                    &rows,
                )?,
            )?);
        }
        if options.svg {
            written.push(write(out.join(format!("roc_{stem}.svg")), &roc_svg(s, p))?);
            written.push(write(
                out.join(format!("los_boxplot_{stem}.svg")),
                &los_boxplot_svg(&s.los, s, p),
            )?);
        }
    }
    Ok(written)
}

/// Writes `repeat.json` and `repeat.csv`.
pub fn emit_repeat(report: &RepeatReport, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut rows = Vec::new();
    for s in &report.sexes {
        for m in &s.summary {
            rows.push(vec![
                s.sex.label().into(),
                m.metric.clone(),
                fmt3(m.mean),
                fmt_opt(m.std),
                s.splits.len().to_string(),
            ]);
        }
    }
    Ok(vec![
        write(out.join("repeat.json"), &report.to_json()?)?,
        write(
            out.join("repeat.csv"),
            &csv_table(&report.provenance, &["sex", "metric", "mean", "std", "k"], &rows)?,
        )?,
    ])
}

const SIZE: f64 = 400.0;
const PAD: f64 = 50.0;

fn svg_open(title: &str, provenance: &Provenance, width: f64, height: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = width,
        h = height
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<desc>{}</desc>", escape(&provenance.tag()));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// ROC curve with the Youden-optimal point marked.
pub fn roc_svg(s: &SexReport, provenance: &Provenance) -> String {
    let side = SIZE + 2.0 * PAD;
    let x = |fpr: f64| PAD + fpr * SIZE;
    let y = |tpr: f64| PAD + (1.0 - tpr) * SIZE;
    let title = format!(
        "ROC {} {} (AUC {})",
        s.model.learner.label(),
        s.sex.label(),
        fmt_opt(s.model.metrics.auc)
    );
    let mut out = svg_open(&title, provenance, side, side);
    let _ = writeln!(
        out,
        r##"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#aaa" stroke-dasharray="4 4"/>"##,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    let points: Vec<String> = s
        .model
        .roc
        .iter()
        .map(|p| format!("{:.2},{:.2}", x(p[0]), y(p[1])))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline id="roc" fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##,
        points.join(" ")
    );
    let o = &s.model.optimal_point;
    let _ = writeln!(
        out,
        r##"<circle id="optimal-point" cx="{:.2}" cy="{:.2}" r="5" fill="#d62728"><title>threshold {} fpr {} tpr {}</title></circle>"##,
        x(o.fpr),
        y(o.tpr),
        fmt3(o.threshold),
        fmt3(o.fpr),
        fmt3(o.tpr)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        side / 2.0,
        PAD * 0.6,
        escape(&title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#,
        side / 2.0,
        side - PAD * 0.3
    );
    let _ = writeln!(
        out,
        r#"<text x="{x}" y="{y}" text-anchor="middle" transform="rotate(-90 {x} {y})">True positive rate</text>"#,
        x = PAD * 0.4,
        y = side / 2.0
    );
    out.push_str("</svg>\n");
    out
}

/// Horizontal box plot of LOS with outliers drawn at each distinct value.
pub fn los_boxplot_svg(los: &LosSummary, s: &SexReport, provenance: &Provenance) -> String {
    let width = SIZE + 2.0 * PAD;
    let height = 200.0;
    let max = los.histogram.keys().next_back().copied().unwrap_or(1).max(1) as f64;
    let x = |v: f64| PAD + v / max * SIZE;
    let mid = height / 2.0;
    let title = format!("LOS {} (psi = {} days)", s.sex.label(), s.psi);
    let mut out = svg_open(&title, provenance, width, height);
    let _ = writeln!(
        out,
        r##"<line id="whiskers" x1="{:.2}" y1="{mid}" x2="{:.2}" y2="{mid}" stroke="#444"/>"##,
        x(los.lower_whisker),
        x(los.upper_whisker)
    );
    let _ = writeln!(
        out,
        r##"<rect id="box" x="{:.2}" y="{}" width="{:.2}" height="40" fill="#9ecae1" stroke="#444"/>"##,
        x(los.q1),
        mid - 20.0,
        x(los.q3) - x(los.q1)
    );
    let _ = writeln!(
        out,
        r##"<line id="median" x1="{m:.2}" y1="{}" x2="{m:.2}" y2="{}" stroke="#000" stroke-width="2"/>"##,
        mid - 20.0,
        mid + 20.0,
        m = x(los.median)
    );
    for (&day, &count) in &los.histogram {
        if f64::from(day) > los.upper_whisker || f64::from(day) < los.lower_whisker {
            let _ = writeln!(
                out,
                r##"<circle class="outlier" cx="{:.2}" cy="{mid}" r="2" fill="none" stroke="#d62728"><title>{day} days: {count}</title></circle>"##,
                x(f64::from(day))
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="25" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(&title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">Length of stay (days)</text>"#,
        width / 2.0,
        height - 15.0
    );
    out.push_str("</svg>\n");
    out
}
