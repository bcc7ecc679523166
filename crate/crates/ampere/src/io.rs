//! CSV tables and static SVG pictures. Output depends only on the data: floats carry 17
//! significant digits, lines end in LF, and nothing time-dependent is written.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid::{GridFunction, NodeKind};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!("row of width {} for {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|x| x == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).map_err(io_err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|&x| fmt_float(x))).map_err(io_err)?;
        }
        String::from_utf8(w.into_inner().map_err(io_err)?).map_err(io_err)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(io_err)
    }
}

impl From<&GridFunction> for Table {
    fn from(u: &GridFunction) -> Self {
        let mut t = Table::new(&["x", "y", "value", "kind"]);
        for k in 0..u.len() {
            let kind = match u.mask[k] {
                NodeKind::Interior => 0.0,
                NodeKind::Boundary => 1.0,
                NodeKind::Exterior => continue,
            };
            let p = u.point(k);
            t.rows.push(vec![p[0], p[1], u.values[k], kind]);
        }
        t
    }
}

const SIZE: f64 = 400.0;
const PAD: f64 = 20.0;

struct Frame {
    lo: Point,
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = Point>) -> Result<Self> {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if !(lo[0].is_finite() && hi[0].is_finite() && lo[1].is_finite() && hi[1].is_finite()) {
            return Err(Error::InvalidArgument("empty artifact".into()));
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300);
        let scale = (SIZE - 2.0 * PAD) / span;
        Ok(Frame { lo, scale, height: hi[1] - lo[1] })
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (PAD + (p[0] - self.lo[0]) * self.scale, PAD + (self.height - (p[1] - self.lo[1])) * self.scale)
    }
}

fn header() -> String {
    format!("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SIZE} {SIZE}\" width=\"{SIZE}\" height=\"{SIZE}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n")
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Level lines of a grid function by marching squares over cells with no exterior corner.
pub fn contour_svg(u: &GridFunction, levels: usize) -> Result<String> {
    let live: Vec<usize> = (0..u.len()).filter(|&k| u.mask[k] != NodeKind::Exterior).collect();
    if live.is_empty() || levels == 0 {
        return Err(Error::InvalidArgument("empty artifact".into()));
    }
    let frame = Frame::fit(live.iter().map(|&k| u.point(k)))?;
    let (vmin, vmax) = live.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &k| (a.min(u.values[k]), b.max(u.values[k])));
    let mut out = header();
    for l in 1..=levels {
        let c = vmin + (vmax - vmin) * l as f64 / (levels + 1) as f64;
        let mut d = String::new();
        for j in 0..u.dims[1] - 1 {
            for i in 0..u.dims[0] - 1 {
                let ks = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)].map(|(a, b)| b * u.dims[0] + a);
                if ks.iter().any(|&k| u.mask[k] == NodeKind::Exterior) {
                    continue;
                }
                let mut hits = Vec::with_capacity(4);
                for e in 0..4 {
                    let (a, b) = (ks[e], ks[(e + 1) % 4]);
                    let (fa, fb) = (u.values[a] - c, u.values[b] - c);
                    if (fa < 0.0) != (fb < 0.0) {
                        let s = fa / (fa - fb);
                        let (pa, pb) = (u.point(a), u.point(b));
                        hits.push([pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]);
                    }
                }
                for pair in hits.chunks_exact(2) {
                    let (x0, y0) = frame.map(pair[0]);
                    let (x1, y1) = frame.map(pair[1]);
                    let _ = write!(d, "M{x0:.3} {y0:.3}L{x1:.3} {y1:.3}");
                }
            }
        }
        let _ = writeln!(out, "<path d=\"{d}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\"/>", PALETTE[l % PALETTE.len()]);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Filled polygons, drawn in order.
pub fn polygons_svg(polys: &[Vec<Point>]) -> Result<String> {
    let frame = Frame::fit(polys.iter().flatten().copied())?;
    let mut out = header();
    for (n, poly) in polys.iter().enumerate() {
        let pts: Vec<String> = poly
            .iter()
            .map(|&p| {
                let (x, y) = frame.map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let col = PALETTE[n % PALETTE.len()];
        let _ = writeln!(out, "<polygon points=\"{}\" fill=\"{col}\" fill-opacity=\"0.15\" stroke=\"{col}\" stroke-width=\"1\"/>", pts.join(" "));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Polylines in log-log coordinates; nonpositive samples are dropped.
pub fn loglog_svg(series: &[(String, Vec<(f64, f64)>)]) -> Result<String> {
    let logged: Vec<Vec<Point>> = series
        .iter()
        .map(|(_, s)| s.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| [x.log10(), y.log10()]).collect())
        .collect();
    let frame = Frame::fit(logged.iter().flatten().copied())?;
    let mut out = header();
    for (n, (line, (name, _))) in logged.iter().zip(series).enumerate() {
        let pts: Vec<String> = line
            .iter()
            .map(|&p| {
                let (x, y) = frame.map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let col = PALETTE[n % PALETTE.len()];
        let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"{col}\" stroke-width=\"1.5\"><title>{name}</title></polyline>", pts.join(" "));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Boundary of `c + B(disk)` as a polygon.
pub fn ellipse_polygon(center: Point, root: [[f64; 2]; 2], samples: usize) -> Vec<Point> {
    (0..samples)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / samples as f64;
            let (s, c) = a.sin_cos();
            [center[0] + root[0][0] * c + root[0][1] * s, center[1] + root[1][0] * c + root[1][1] * s]
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_floats() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![0.1, 1.0 / 3.0]).unwrap();
        t.push(vec![f64::INFINITY, -2.5e-300]).unwrap();
        assert!(t.push(vec![1.0]).is_err());
        let s = t.to_csv().unwrap();
        assert!(!s.contains('\r'));
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "a,b");
        let back: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(back, vec![0.1, 1.0 / 3.0]);
        assert_eq!(lines[2].split(',').next(), Some("inf"));
    }

    #[test]
    fn quadratic_contours_are_circles() {
        let u = GridFunction::square(40, -1.0, 1.0, |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        let a = contour_svg(&u, 4).unwrap();
        assert_eq!(a, contour_svg(&u, 4).unwrap());
        // every vertex on the first level line sits at one radius from the picture center
        let first = a.lines().find(|l| l.starts_with("<path")).unwrap();
        let d = &first[first.find("d=\"").unwrap() + 3..];
        let d = &d[..d.find('"').unwrap()];
        let radii: Vec<f64> = d
            .split(['M', 'L'])
            .filter(|s| !s.is_empty())
            .map(|s| {
                let v: Vec<f64> = s.split(' ').map(|x| x.parse().unwrap()).collect();
                ((v[0] - SIZE / 2.0).powi(2) + (v[1] - SIZE / 2.0).powi(2)).sqrt()
            })
            .collect();
        let (lo, hi) = radii.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi - lo < 0.02 * hi, "{lo} {hi}");
    }

    #[test]
    fn empty_artifacts_are_rejected() {
        assert!(polygons_svg(&[]).is_err());
        assert!(loglog_svg(&[("a".into(), vec![(0.0, 1.0)])]).is_err());
        let s = polygons_svg(&[ellipse_polygon([0.0, 0.0], [[1.0, 0.0], [0.0, 0.5]], 64)]).unwrap();
        assert!(s.contains("<polygon"));
    }
}
