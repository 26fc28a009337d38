//! Batch outputs: portrait SVGs and JSON, ranking and MDC tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use epiportrait_core::analytics::{Metric, SpanWindow};
use epiportrait_core::geometry::{CountMode, PortraitGeometry, ProteinGlyph, RnaColor};
use epiportrait_core::json::{self, format_f64};
use epiportrait_core::temporal::Granularity;

use crate::engine::Engine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ExportKind {
    PortraitsSvg,
    PortraitsJson,
    RankingsCsv,
    MdcCsv,
}

pub struct ExportRequest {
    pub granularity: Granularity,
    pub mode: CountMode,
    pub window: SpanWindow,
}

/// Writes one export into `out`, returning the files written.
pub fn export(engine: &Engine, kind: ExportKind, req: &ExportRequest, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    let mut write = |name: String, bytes: Vec<u8>| -> anyhow::Result<()> {
        let path = out.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    match kind {
        ExportKind::PortraitsSvg => {
            for p in engine.portraits(req.granularity, req.mode, req.window)? {
                write(format!("portrait_{}.svg", p.code), portrait_svg(&p).into_bytes())?;
            }
        }
        ExportKind::PortraitsJson => {
            let portraits = engine.portraits(req.granularity, req.mode, req.window)?;
            write("portraits.json".into(), json::to_vec_pretty(&portraits)?)?;
        }
        ExportKind::RankingsCsv => write("rankings.csv".into(), rankings_csv(engine, req)?)?,
        ExportKind::MdcCsv => write("mdc.csv".into(), mdc_csv(engine, req)?)?,
    }
    Ok(written)
}

/// Every metric's ranking in long form: `metric,rank,code,name,value`.
pub fn rankings_csv(engine: &Engine, req: &ExportRequest) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "rank", "code", "name", "value"])?;
    let names = engine.dataset().communities();
    for metric in Metric::all() {
        let list = engine.rankings(metric, req.granularity, req.window);
        for e in &list.entries {
            w.write_record([
                metric.name(),
                &e.rank.to_string(),
                &e.code,
                &names[&e.code].name,
                &format_f64(e.value),
            ])?;
        }
    }
    Ok(w.into_inner()?)
}

/// Raw MDC values: `code` plus one column per axis.
pub fn mdc_csv(engine: &Engine, req: &ExportRequest) -> anyhow::Result<Vec<u8>> {
    let mdc = engine.mdc(req.granularity, req.window);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["code".to_string()];
    header.extend(mdc.axes.iter().cloned());
    w.write_record(&header)?;
    for row in &mdc.rows {
        let mut rec = vec![row.code.clone()];
        rec.extend(row.raw.iter().map(|&v| format_f64(v)));
        w.write_record(&rec)?;
    }
    Ok(w.into_inner()?)
}

fn color(c: RnaColor) -> &'static str {
    match c {
        RnaColor::AzureBlue => "#3b8fd9",
        RnaColor::MintPink => "#f2a7c3",
        RnaColor::GoldYellow => "#e8b931",
        RnaColor::PalePurple => "#b9a3e3",
    }
}

fn protein_fill(p: &ProteinGlyph) -> &'static str {
    match p.color_class() {
        "bright_red" => "#e0312b",
        "light_grey" => "#d9d9d9",
        "silver_gray" => "#b8b8b8",
        "dark_gray" => "#4d4d4d",
        _ => "#8c8c8c",
    }
}

/// Clockwise from twelve o'clock, SVG y pointing down.
fn polar(theta: f64, r: f64) -> (f64, f64) {
    (r * theta.sin(), -r * theta.cos())
}

fn num(v: f64) -> String {
    format!("{:.3}", v + 0.0)
}

fn sector(r0: f64, r1: f64, t0: f64, t1: f64) -> String {
    let large = if t1 - t0 > std::f64::consts::PI { 1 } else { 0 };
    let (ax, ay) = polar(t0, r0);
    let (bx, by) = polar(t0, r1);
    let (cx, cy) = polar(t1, r1);
    let (dx, dy) = polar(t1, r0);
    format!(
        "M{} {} L{} {} A{} {} 0 {large} 1 {} {} L{} {} A{} {} 0 {large} 0 {} {} Z",
        num(ax),
        num(ay),
        num(bx),
        num(by),
        num(r1),
        num(r1),
        num(cx),
        num(cy),
        num(dx),
        num(dy),
        num(r0),
        num(r0),
        num(ax),
        num(ay)
    )
}

/// A standalone SVG: one path per bar and per strand.
pub fn portrait_svg(p: &PortraitGeometry) -> String {
    let extent = (p.outer_radius() + 2.0).ceil();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" data-code="{}">"#,
        -extent,
        -extent,
        2.0 * extent,
        2.0 * extent,
        xml_escape(&p.code)
    );
    let _ = writeln!(s, "<title>{}</title>", xml_escape(&p.label));
    let _ = writeln!(
        s,
        r##"<circle class="crown" r="{}" fill="none" stroke="#999" stroke-width="0.5"/>"##,
        num(p.crown.rc_prime)
    );
    let _ = writeln!(s, r##"<circle class="core" r="{}" fill="#f5f5f5"/>"##, num(p.crown.rc));
    let rc = p.crown.rc_prime;
    for b in &p.proteins {
        let _ = writeln!(
            s,
            r#"<path class="protein" data-x="{}" data-kind="{:?}" d="{}" fill="{}"/>"#,
            b.x,
            b.kind,
            sector(rc, rc + b.height, b.theta0, b.theta1),
            protein_fill(b)
        );
    }
    for r in &p.rnas {
        let mut d = String::new();
        for (k, [theta, radius]) in r.path.iter().enumerate() {
            let (x, y) = polar(*theta, *radius);
            let _ = write!(d, "{}{} {}", if k == 0 { "M" } else { " L" }, num(x), num(y));
        }
        let _ = writeln!(
            s,
            r#"<path class="rna" data-category="{}" d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            r.category,
            d,
            color(r.color)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
