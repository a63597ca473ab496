//! CSV tables and SVG log-log plots of convergence studies.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::{pairwise_rates, ConvergenceStudy, RateAxis};
use crate::Result;

#[derive(Serialize)]
struct Row {
    m: usize,
    #[serde(rename = "h_or_N")]
    h_or_n: f64,
    l2_error: f64,
    energy_error: f64,
    l2_rate: Option<f64>,
    energy_rate: Option<f64>,
}

/// One row per (order, mesh); rates are relative to the previous, coarser row
/// and empty on the first row of each order.
pub fn write_study_csv(studies: &[ConvergenceStudy], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in studies {
        let x: Vec<f64> = s.reports.iter().map(|r| s.axis.abscissa(r)).collect();
        let l2: Vec<f64> = s.reports.iter().map(|r| r.l2_error).collect();
        let en: Vec<f64> = s.reports.iter().map(|r| r.energy_error).collect();
        let l2_rates = pairwise_rates(&x, &l2);
        let en_rates = pairwise_rates(&x, &en);
        for (i, r) in s.reports.iter().enumerate() {
            out.serialize(Row {
                m: s.m,
                h_or_n: s.axis.label_value(r),
                l2_error: r.l2_error,
                energy_error: r.energy_error,
                l2_rate: l2_rates[i],
                energy_rate: en_rates[i],
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotNorm {
    L2,
    Energy,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Log-log plot of error against the refinement parameter, one series per order.
pub fn write_svg_plot(studies: &[ConvergenceStudy], norm: PlotNorm, mut w: impl Write) -> Result<()> {
    let err = |r: &super::ErrorReport| match norm {
        PlotNorm::L2 => r.l2_error,
        PlotNorm::Energy => r.energy_error,
    };
    let pts: Vec<(f64, f64)> = studies
        .iter()
        .flat_map(|s| s.reports.iter().map(move |r| (s.axis.abscissa(r), err(r))))
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let decades = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if lo.is_finite() {
            let (lo, hi) = (lo.log10().floor(), hi.log10().ceil());
            (lo, if hi > lo { hi } else { lo + 1.0 })
        } else {
            (-1.0, 0.0)
        }
    };
    let (x0, x1) = decades(&mut pts.iter().map(|p| p.0));
    let (y0, y1) = decades(&mut pts.iter().map(|p| p.1));
    let px = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y.log10() - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let axis = studies.first().map_or(RateAxis::MeshSize, |s| s.axis);
    let title = match norm {
        PlotNorm::L2 => "L2 error",
        PlotNorm::Energy => "Energy error",
    };
    let xlabel = axis_label(axis);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, (W - RIGHT + LEFT) / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for d in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{}" stroke="#ddd"/>"##, H - BOTTOM);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">1e{d}</text>"#, H - BOTTOM + 18.0);
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##, W - RIGHT);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, (W - RIGHT + LEFT) / 2.0, H - 18.0);
    for (k, st) in studies.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let series: Vec<(f64, f64)> = st
            .reports
            .iter()
            .map(|r| (st.axis.abscissa(r), err(r)))
            .filter(|(x, y)| *x > 0.0 && *y > 0.0)
            .map(|(x, y)| (px(x), py(y)))
            .collect();
        let path: Vec<String> = series.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        for (x, y) in &series {
            let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3.5" fill="{color}"/>"#);
        }
        let ly = TOP + 20.0 + 20.0 * k as f64;
        let lx = W - RIGHT + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 25.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">m = {}</text>"#, lx + 32.0, ly + 4.0, st.m);
    }
    s.push_str("</svg>\n");
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn axis_label(axis: RateAxis) -> &'static str {
    match axis {
        RateAxis::MeshSize => "h",
        RateAxis::Dofs => "N^(-1/2)",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyze::ErrorReport;

    fn study() -> ConvergenceStudy {
        let reports = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| ErrorReport {
                m: 1,
                h,
                n: 0,
                l2_error: h * h,
                energy_error: h,
            })
            .collect();
        ConvergenceStudy::from_reports(1, RateAxis::MeshSize, reports)
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_study_csv(&[study()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "m,h_or_N,l2_error,energy_error,l2_rate,energy_rate");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].ends_with(",,"));
        let f: Vec<f64> = lines[3].split(',').map(|v| v.parse().unwrap()).collect();
        assert!((f[4] - 2.0).abs() < 1e-12 && (f[5] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svg_is_well_formed() {
        let mut buf = Vec::new();
        write_svg_plot(&[study()], PlotNorm::L2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
        assert_eq!(text.matches("<circle").count(), 3);
        assert!(text.contains("m = 1"));
        // Empty input still yields a valid frame.
        let mut buf = Vec::new();
        write_svg_plot(&[], PlotNorm::Energy, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("Energy error"));
    }
}
