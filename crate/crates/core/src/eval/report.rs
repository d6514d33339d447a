//! CSV and SVG renderings of evaluation results.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use super::{ClusterReport, CoverageReport, KnnResult, TripletAuroc};

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

fn matrix_csv(names: &[&str], m: &[Vec<Option<f64>>]) -> String {
    let mut out = format!("indicator,{}\n", names.join(","));
    for (name, row) in names.iter().zip(m) {
        let cells: Vec<String> = row.iter().map(|v| cell(*v)).collect();
        let _ = writeln!(out, "{name},{}", cells.join(","));
    }
    out
}

/// `sc.csv` and `tc.csv`; undefined cells are written as `NA`.
pub fn write_coverage(dir: &Path, r: &CoverageReport) -> io::Result<()> {
    let names: Vec<&str> = r.indicators.iter().map(|f| f.name()).collect();
    fs::write(dir.join("sc.csv"), matrix_csv(&names, &r.sc))?;
    fs::write(dir.join("tc.csv"), matrix_csv(&names, &r.tc))?;
    fs::write(dir.join("sc.svg"), heatmap_svg("source coverage", &names, &r.sc))?;
    fs::write(dir.join("tc.svg"), heatmap_svg("triplet coverage", &names, &r.tc))
}

pub fn auroc_csv(r: &TripletAuroc) -> String {
    let mut out = String::from("indicator,auroc_p,auroc_n,auroc_f,triplets,sources\n");
    let rows = r.per_indicator.iter().map(|(f, row)| (f.name(), row)).chain([("overall", &r.overall)]);
    for (name, row) in rows {
        let _ = writeln!(out, "{name},{},{},{},{},{}", cell(row.p), cell(row.n), cell(row.f), row.triplets, row.sources);
    }
    out
}

pub fn knn_csv(results: &[KnnResult]) -> String {
    let mut out = String::from("k,mean_f1\n");
    for r in results {
        let _ = writeln!(out, "{},{:.6}", r.k, r.mean_f1);
    }
    out
}

pub fn curve_csv(points: &[(f64, Option<f64>)]) -> String {
    let mut out = String::from("fraction,f1\n");
    for (x, y) in points {
        let _ = writeln!(out, "{x},{}", cell(*y));
    }
    out
}

/// One row per cluster, then one row per source with its cluster and
/// projection.
pub fn write_clusters(dir: &Path, r: &ClusterReport) -> io::Result<()> {
    let mut table = String::from("cluster,size,labeled,unreliable,unreliability_density,mean_leaning,partisanship\n");
    for c in &r.clusters {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{}",
            c.id,
            c.members.len(),
            c.labeled,
            c.unreliable,
            cell(c.unreliability_density),
            cell(c.mean_leaning),
            cell(c.partisanship)
        );
    }
    fs::write(dir.join("clusters.csv"), table)?;
    let mut members = String::from("source,cluster,pc1,pc2\n");
    for (s, [x, y]) in &r.projection.coords {
        let id = r.cluster_of(s).map_or_else(|| "noise".to_string(), |c| c.to_string());
        let _ = writeln!(members, "{s},{id},{x:.6},{y:.6}");
    }
    fs::write(dir.join("cluster_members.csv"), members)?;
    fs::write(dir.join("clusters.svg"), scatter_svg(r))
}

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn scatter_svg(r: &ClusterReport) -> String {
    let (w, h, pad) = (480.0, 480.0, 30.0);
    let pts: Vec<[f64; 2]> = r.projection.coords.values().copied().collect();
    let span = |k: usize| {
        let lo = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let ((x0, xs), (y0, ys)) = (span(0), span(1));
    let [e1, e2] = r.projection.explained_variance_ratio;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n<text x=\"{pad}\" y=\"18\" font-size=\"12\">PC1 {:.1}% / PC2 {:.1}%</text>\n",
        e1 * 100.0,
        e2 * 100.0
    );
    for (s, [x, y]) in &r.projection.coords {
        let colour = r.cluster_of(s).map_or("#000000", |c| PALETTE[c % PALETTE.len()]);
        let cx = pad + (x - x0) / xs * (w - 2.0 * pad);
        let cy = h - pad - (y - y0) / ys * (h - 2.0 * pad);
        let _ = writeln!(svg, "<circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"4\" fill=\"{colour}\"><title>{s}</title></circle>");
    }
    svg.push_str("</svg>\n");
    svg
}

fn heatmap_svg(title: &str, names: &[&str], m: &[Vec<Option<f64>>]) -> String {
    let (size, left, top) = (60.0, 70.0, 40.0);
    let n = names.len() as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n<text x=\"{left}\" y=\"16\" font-size=\"12\">{title}</text>\n",
        left + n * size + 10.0,
        top + n * size + 10.0
    );
    for (i, row) in m.iter().enumerate() {
        let _ = writeln!(svg, "<text x=\"4\" y=\"{:.1}\" font-size=\"11\">{}</text>", top + (i as f64 + 0.55) * size, names[i]);
        for (j, v) in row.iter().enumerate() {
            let (x, y) = (left + j as f64 * size, top + i as f64 * size);
            let shade = v.map_or_else(|| "#dddddd".to_string(), |v| {
                let c = (255.0 * (1.0 - v)).round() as u8;
                format!("rgb({c},{c},255)")
            });
            let _ = writeln!(
                svg,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{size}\" height=\"{size}\" fill=\"{shade}\"/><text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{}</text>",
                x + 8.0,
                y + size / 2.0,
                v.map_or("NA".to_string(), |v| format!("{v:.2}"))
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Polyline of (x, y) points, undefined y skipped.
pub fn line_svg(title: &str, points: &[(f64, Option<f64>)]) -> String {
    let (w, h, pad) = (480.0, 320.0, 30.0);
    let coords: Vec<String> = points
        .iter()
        .filter_map(|(x, y)| y.map(|y| format!("{:.1},{:.1}", pad + x * (w - 2.0 * pad), h - pad - y * (h - 2.0 * pad))))
        .collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n<text x=\"{pad}\" y=\"18\" font-size=\"12\">{title}</text>\n\
         <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>\n</svg>\n",
        coords.join(" ")
    )
}
