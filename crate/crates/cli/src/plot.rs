//! Line plots of emitted CSV curves as 8-bit PGM rasters.

use std::path::Path;

use crate::error::CliError;

pub const WIDTH: usize = 640;
pub const HEIGHT: usize = 400;
const MARGIN: usize = 20;

/// `(x, y)` pairs read from `path`: x is the `time` column (the first column
/// when there is none), y the last column.
pub fn read_curve(path: &Path) -> Result<(String, Vec<(f64, f64)>), CliError> {
    let input = |message: String| CliError::Input { path: path.to_path_buf(), message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| input(e.to_string()))?;
    let headers = reader.headers().map_err(|e| input(e.to_string()))?.clone();
    if headers.len() < 2 {
        return Err(input("need at least two columns".into()));
    }
    let x_col = headers.iter().position(|h| h == "time").unwrap_or(0);
    let y_col = headers.len() - 1;
    let mut points = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| input(e.to_string()))?;
        let parse = |col: usize| -> Result<f64, CliError> {
            record
                .get(col)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| input(format!("row {}: column {col} is not a number", line + 1)))
        };
        points.push((parse(x_col)?, parse(y_col)?));
    }
    if points.is_empty() {
        return Err(input("no data rows".into()));
    }
    Ok((headers[y_col].to_string(), points))
}

fn draw_line(img: &mut [u8], (x0, y0): (i64, i64), (x1, y1): (i64, i64)) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if (0..WIDTH as i64).contains(&x) && (0..HEIGHT as i64).contains(&y) {
            img[y as usize * WIDTH + x as usize] = 0;
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Renders the polyline through `points` inside a framed, auto-scaled box.
pub fn render(points: &[(f64, f64)]) -> Vec<u8> {
    let mut img = vec![255u8; WIDTH * HEIGHT];
    let (x_lo, x_hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y_lo, y_hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let (sx, sy) = (span(x_lo, x_hi), span(y_lo, y_hi));
    let inner_w = (WIDTH - 2 * MARGIN - 1) as f64;
    let inner_h = (HEIGHT - 2 * MARGIN - 1) as f64;
    let to_px = |(x, y): (f64, f64)| {
        let px = MARGIN as f64 + (x - x_lo) / sx * inner_w;
        let py = (HEIGHT - MARGIN - 1) as f64 - (y - y_lo) / sy * inner_h;
        (px.round() as i64, py.round() as i64)
    };

    let (l, r) = (MARGIN as i64 - 1, (WIDTH - MARGIN) as i64);
    let (t, b) = (MARGIN as i64 - 1, (HEIGHT - MARGIN) as i64);
    for (p, q) in [((l, t), (r, t)), ((r, t), (r, b)), ((r, b), (l, b)), ((l, b), (l, t))] {
        draw_line(&mut img, p, q);
    }
    let mut prev = to_px(points[0]);
    draw_line(&mut img, prev, prev);
    for &p in &points[1..] {
        let cur = to_px(p);
        draw_line(&mut img, prev, cur);
        prev = cur;
    }

    let mut out = format!("P5\n{WIDTH} {HEIGHT}\n255\n").into_bytes();
    out.extend_from_slice(&img);
    out
}

/// Reads `csv_path` and writes the plot to `out`.
pub fn plot(csv_path: &Path, out: &Path) -> Result<(), CliError> {
    let (_, points) = read_curve(csv_path)?;
    std::fs::write(out, render(&points)).map_err(|e| CliError::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_a_framed_raster_of_fixed_size() {
        let img = render(&[(0.0, 1.0), (1.0, 0.0)]);
        let header = format!("P5\n{WIDTH} {HEIGHT}\n255\n");
        assert_eq!(img.len(), header.len() + WIDTH * HEIGHT);
        let px = &img[header.len()..];
        // the descending diagonal starts top left and ends bottom right
        assert_eq!(px[MARGIN * WIDTH + MARGIN], 0);
        assert_eq!(px[(HEIGHT - MARGIN - 1) * WIDTH + WIDTH - MARGIN - 1], 0);
        assert_eq!(px[(HEIGHT - MARGIN - 1) * WIDTH + MARGIN + 5], 255);
    }

    #[test]
    fn constant_curve_does_not_divide_by_zero() {
        let img = render(&[(0.0, 2.0), (0.0, 2.0)]);
        assert!(img.len() > WIDTH * HEIGHT);
    }
}
