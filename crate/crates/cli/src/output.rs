//! CSV and SVG writers. Floats are printed with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    w.write_record(header).map_err(std::io::Error::from)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| format_float(x))).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Ground state energy samples along a field sweep.
#[derive(Clone, Debug, Default, Serialize)]
pub struct CurveData {
    pub b: Vec<f64>,
    pub lambda0_numeric: Vec<f64>,
    pub lambda0_closed_form: Vec<f64>,
    /// Closed-form point eigenvalues per sample.
    pub branches: Vec<Vec<f64>>,
    /// Bottom of the continuous spectrum per sample, when known.
    pub thresholds: Vec<Option<f64>>,
}

impl CurveData {
    pub fn max_abs_error(&self) -> f64 {
        self.lambda0_numeric
            .iter()
            .zip(&self.lambda0_closed_form)
            .filter(|(_, c)| c.is_finite())
            .map(|(n, c)| (n - c).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = (0..self.b.len())
            .map(|i| {
                let (n, c) = (self.lambda0_numeric[i], self.lambda0_closed_form[i]);
                vec![self.b[i], n, c, (n - c).abs()]
            })
            .collect();
        write_csv(path, &["B", "lambda0_numeric", "lambda0_closed_form", "abs_error"], &rows)
    }

    /// Static plot: shaded continuum, closed-form point branches, numeric and closed-form curves.
    pub fn to_svg(&self, title: &str) -> String {
        let (w, h, pad) = (720.0, 480.0, 50.0);
        let (x0, x1) = (self.b.first().copied().unwrap_or(0.0), self.b.last().copied().unwrap_or(1.0));
        let finite = self
            .lambda0_numeric
            .iter()
            .chain(&self.lambda0_closed_form)
            .chain(self.branches.iter().flatten())
            .chain(self.thresholds.iter().flatten())
            .copied()
            .filter(|y| y.is_finite());
        let (mut y0, mut y1) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
        if !y0.is_finite() {
            (y0, y1) = (0.0, 1.0);
        }
        let top = self.lambda0_numeric.iter().copied().filter(|y| y.is_finite()).fold(y0, f64::max);
        y1 = y1.min(top + 0.5 * (top - y0).max(0.5));
        let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y.clamp(y0, y1) - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * pad);
        let polyline = |pts: Vec<(f64, f64)>, style: &str| {
            let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            format!("<polyline fill=\"none\" {style} points=\"{}\"/>\n", coords.join(" "))
        };
        let mut s = String::new();
        let _ = writeln!(s, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">");
        let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
        // Continuum region between the threshold and the top of the frame.
        let thr: Vec<(f64, f64)> =
            self.b.iter().zip(&self.thresholds).filter_map(|(&b, t)| t.map(|t| (b, t))).collect();
        if !thr.is_empty() {
            let mut pts: Vec<String> = thr.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            pts.push(format!("{:.2},{:.2}", sx(thr[thr.len() - 1].0), sy(y1)));
            pts.push(format!("{:.2},{:.2}", sx(thr[0].0), sy(y1)));
            let _ = writeln!(s, "<polygon fill=\"#d0d8f0\" stroke=\"none\" points=\"{}\"/>", pts.join(" "));
        }
        let depth = self.branches.iter().map(Vec::len).max().unwrap_or(0);
        for j in 0..depth {
            let pts: Vec<(f64, f64)> =
                self.b.iter().zip(&self.branches).filter_map(|(&b, br)| br.get(j).map(|&y| (b, y))).collect();
            s += &polyline(pts, "stroke=\"#555\" stroke-width=\"1\"");
        }
        let cf: Vec<(f64, f64)> =
            self.b.iter().zip(&self.lambda0_closed_form).filter(|(_, y)| y.is_finite()).map(|(&b, &y)| (b, y)).collect();
        s += &polyline(cf, "stroke=\"#1f4fbf\" stroke-width=\"2\" stroke-dasharray=\"6 4\"");
        let num: Vec<(f64, f64)> = self.b.iter().copied().zip(self.lambda0_numeric.iter().copied()).collect();
        s += &polyline(num, "stroke=\"#c0392b\" stroke-width=\"1.5\"");
        let _ = writeln!(
            s,
            "<line x1=\"{pad}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/><line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{0}\" stroke=\"black\"/>",
            h - pad,
            w - pad
        );
        let _ = writeln!(s, "<text x=\"{pad}\" y=\"30\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>");
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">B from {x0} to {x1}; λ₀ from {y0:.3} to {y1:.3}</text>",
            pad,
            h - 15.0
        );
        s += "</svg>\n";
        s
    }
}
