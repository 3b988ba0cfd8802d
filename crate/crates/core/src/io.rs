//! CSV trajectories, sorted-key JSON reports and plain SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::discretization::{Field, SpaceTimeField, SpatialGrid};
use crate::error::{Error, Result};

/// `{:.16e}` with an exact zero rendered as `0`.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn coord_header(grid: SpatialGrid) -> &'static str {
    if grid.dim() == 1 {
        "x"
    } else {
        "x,y"
    }
}

fn push_coords(line: &mut String, grid: SpatialGrid, k: usize) {
    let p = grid.coord(k);
    line.push_str(&fmt_num(p[0]));
    if grid.dim() == 2 {
        line.push(',');
        line.push_str(&fmt_num(p[1]));
    }
}

/// Time-major rows `t,x[,y],value`.
pub fn trajectory_csv(field: &SpaceTimeField) -> String {
    let grid = field.grid();
    let time = field.time();
    let mut out = format!("t,{},value\n", coord_header(grid));
    for m in 0..time.slices() {
        let t = fmt_num(time.t(m));
        for (k, v) in field.slice(m).iter().enumerate() {
            out.push_str(&t);
            out.push(',');
            push_coords(&mut out, grid, k);
            out.push(',');
            out.push_str(&fmt_num(*v));
            out.push('\n');
        }
    }
    out
}

pub fn write_csv_trajectory(path: impl AsRef<Path>, field: &SpaceTimeField) -> Result<()> {
    write_text(path.as_ref(), &trajectory_csv(field))
}

/// Rows `x[,y],value` for a single spatial field.
pub fn write_csv_field(path: impl AsRef<Path>, field: &Field) -> Result<()> {
    let grid = field.grid();
    let mut out = format!("{},value\n", coord_header(grid));
    for (k, v) in field.values().iter().enumerate() {
        push_coords(&mut out, grid, k);
        out.push(',');
        out.push_str(&fmt_num(*v));
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

/// Generic CSV table; rows must match the header width.
pub fn write_csv_table(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

/// Reads a trajectory written by [`write_csv_trajectory`] (or a single field written by
/// [`write_csv_field`]) back into per-slice fields on `grid`.
pub fn read_csv_trajectory(path: &Path, grid: SpatialGrid) -> Result<Vec<Field>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let coords = grid.dim();
    let timed = match header.first() {
        Some(&"t") => true,
        Some(&"x") => false,
        _ => return Err(Error::Config(format!("{}: unrecognised CSV header", path.display()))),
    };
    let width = coords + 1 + usize::from(timed);
    if header.len() != width {
        return Err(Error::Config(format!(
            "{}: expected {width} columns for a {coords}D grid",
            path.display()
        )));
    }
    let n = grid.node_count();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != width {
            return Err(Error::Config(format!("{}: line {} has {} columns", path.display(), i + 2, cols.len())));
        }
        let v: f64 = cols[width - 1]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{}: line {}: bad number", path.display(), i + 2)))?;
        values.push(v);
    }
    if values.is_empty() || values.len() % n != 0 {
        return Err(Error::Config(format!(
            "{}: {} values do not fill whole slices of {n} nodes",
            path.display(),
            values.len()
        )));
    }
    values
        .chunks(n)
        .map(|c| {
            let f = Field::from_values(grid, c.to_vec())?;
            f.require_dirichlet(&path.display().to_string())?;
            Ok(f)
        })
        .collect()
}

/// Pretty JSON with object keys sorted.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's Map is ordered by key unless `preserve_order` is enabled
    let v = serde_json::to_value(value).map_err(|e| Error::Config(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_text(path.as_ref(), &to_sorted_json(value)?)
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line plot in an 800×500 viewBox. With `log_y` the ordinate is `log10`, non-positive
/// values are dropped.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let tr = |y: f64| if log_y { y.log10() } else { y };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
                .map(|&(x, y)| (x, tr(y)))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (left, right, top, bottom) = (80.0, 780.0, 40.0, 440.0);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * (bottom - top);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 800 500" width="800" height="500" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="800" height="500" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="400" y="22" text-anchor="middle" font-size="15">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let ylab = if log_y { format!("1e{fy:.1}") } else { format!("{fy:.3e}") };
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.3}</text>"#,
            sx(fx),
            bottom + 18.0,
            fx
        );
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, sy(fy) + 4.0, ylab);
    }
    let _ = writeln!(s, r#"<text x="430" y="480" text-anchor="middle">{}</text>"#, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="240" text-anchor="middle" transform="rotate(-90 18 240)">{}</text>"#,
        escape(y_label)
    );
    for (i, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !p.is_empty() {
            let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
                coords.join(" ")
            );
        }
        let ly = top + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="600" y1="{ly}" x2="625" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="632" y="{}">{}</text>"#,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: impl AsRef<Path>, svg: &str) -> Result<()> {
    write_text(path.as_ref(), svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_grid, TimeGrid};

    #[test]
    fn numbers_and_zero() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn trajectory_round_trip() {
        let grid = build_grid(1, 8).unwrap();
        let time = TimeGrid::new(1.0, 16).unwrap();
        let f = SpaceTimeField::from_fn(grid, time, |p, t| (1.0 + t) * p[0] * (1.0 - p[0]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_csv_trajectory(&path, &f).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,x,value\n0,0,0\n"));
        let back = read_csv_trajectory(&path, grid).unwrap();
        assert_eq!(back.len(), 17);
        for (m, s) in back.iter().enumerate() {
            assert_eq!(s.values(), f.slice(m));
        }
    }

    #[test]
    fn json_keys_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: f64,
            alpha: u32,
        }
        let s = to_sorted_json(&S { zeta: 1.0, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }

    #[test]
    fn svg_has_viewbox() {
        let s = svg_plot(
            "t",
            "x",
            "y",
            &[Series {
                label: "a".into(),
                points: vec![(0.0, 1.0), (1.0, 0.1)],
            }],
            true,
        );
        assert!(s.contains(r#"viewBox="0 0 800 500""#));
        assert!(s.contains("<polyline"));
    }
}
