//! Grid and point-range specifications.

use specrkhs::c64;
use specrkhs::spectra::default_grid;

use crate::error::CliError;

const MAX_POINTS: usize = 4_000_000;

/// Parsed grid with the cell size used for heat maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub points: Vec<c64>,
    pub cell: (f64, f64),
}

/// `re_min:re_max:step[,im_min:im_max:step]` or `lattice:N`.
pub fn parse_grid(spec: &str) -> Result<Grid, CliError> {
    let spec = spec.trim();
    if let Some(n) = spec.strip_prefix("lattice:") {
        let n: usize = n.trim().parse().map_err(|_| usage(format!("bad lattice size in '{spec}'")))?;
        if n == 0 || 4 * n.pow(4) > MAX_POINTS {
            return Err(usage(format!("lattice size {n} out of range")));
        }
        let points = default_grid(n).map_err(|e| usage(e.to_string()))?;
        let h = 1.0 / n as f64;
        return Ok(Grid { points, cell: (h, h) });
    }
    let (re, im) = match spec.split_once(',') {
        Some((a, b)) => (a, Some(b)),
        None => (spec, None),
    };
    let (re, dx) = axis(re, spec)?;
    let (im, dy) = match im {
        Some(b) => axis(b, spec)?,
        None => (vec![0.0], dx),
    };
    if re.len().saturating_mul(im.len()) > MAX_POINTS {
        return Err(usage(format!("grid '{spec}' has more than {MAX_POINTS} points")));
    }
    let points = im.iter().flat_map(|&y| re.iter().map(move |&x| c64::new(x, y))).collect();
    Ok(Grid { points, cell: (dx, dy) })
}

fn axis(part: &str, spec: &str) -> Result<(Vec<f64>, f64), CliError> {
    let f: Vec<f64> = part
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad grid axis '{part}' in '{spec}'")))?;
    let [lo, hi, step] = f[..] else {
        return Err(usage(format!("grid axis '{part}' needs min:max:step")));
    };
    if !(lo.is_finite() && hi.is_finite() && step > 0.0 && hi >= lo) {
        return Err(usage(format!("grid axis '{part}' needs finite min <= max and step > 0")));
    }
    let count = ((hi - lo) / step * (1.0 + 1e-12)).floor() as usize + 1;
    if count > MAX_POINTS {
        return Err(usage(format!("grid axis '{part}' is too fine")));
    }
    Ok(((0..count).map(|k| lo + k as f64 * step).collect(), step))
}

/// `lo:hi:count`, endpoints included; numbers may be multiples of `pi`.
pub fn parse_points(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let [lo, hi, count] = parts[..] else {
        return Err(usage(format!("points '{spec}' needs lo:hi:count")));
    };
    let (lo, hi) = (pi_number(lo)?, pi_number(hi)?);
    let count: usize = count.parse().map_err(|_| usage(format!("bad point count in '{spec}'")))?;
    if count == 0 || count > MAX_POINTS || !(hi >= lo) {
        return Err(usage(format!("points '{spec}' need lo <= hi and 1 <= count <= {MAX_POINTS}")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect())
}

/// `x`, `pi`, `-pi`, `2pi`, `0.5*pi`.
fn pi_number(s: &str) -> Result<f64, CliError> {
    let err = || usage(format!("bad number '{s}'"));
    let lower = s.to_ascii_lowercase();
    match lower.strip_suffix("pi") {
        Some(m) => {
            let m = m.trim_end_matches('*');
            let factor = match m {
                "" | "+" => 1.0,
                "-" => -1.0,
                _ => m.parse::<f64>().map_err(|_| err())?,
            };
            Ok(factor * std::f64::consts::PI)
        }
        None => lower.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(err),
    }
}

fn usage(msg: String) -> CliError {
    CliError::Usage(msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangular_grid_includes_endpoints() {
        let g = parse_grid("-1:1:0.5,0:0.2:0.1").unwrap();
        assert_eq!(g.points.len(), 15);
        assert_eq!(g.points[0], c64::new(-1.0, 0.0));
        assert_eq!(g.points[14].re, 1.0);
        assert!((g.points[14].im - 0.2).abs() < 1e-15);
        assert_eq!(g.cell, (0.5, 0.1));
    }

    #[test]
    fn real_line_grid() {
        let g = parse_grid("0:1:0.25").unwrap();
        assert_eq!(g.points.len(), 5);
        assert!(g.points.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn lattice_matches_default_grid() {
        let g = parse_grid("lattice:2").unwrap();
        assert_eq!(g.points, default_grid(2).unwrap());
        assert_eq!(g.cell, (0.5, 0.5));
    }

    #[test]
    fn malformed_grids_are_usage_errors() {
        for s in ["", "1:0:0.1", "0:1:0", "0:1", "a:b:c", "lattice:0", "lattice:x", "0:1:1e-9,0:1:1e-9"] {
            assert!(matches!(parse_grid(s), Err(CliError::Usage(_))), "{s}");
        }
    }

    #[test]
    fn point_ranges() {
        let p = parse_points("-pi:pi:3").unwrap();
        assert_eq!(p, vec![-std::f64::consts::PI, 0.0, std::f64::consts::PI]);
        assert_eq!(parse_points("0:2*pi:2").unwrap()[1], 2.0 * std::f64::consts::PI);
        assert_eq!(parse_points("0.5:0.5:1").unwrap(), vec![0.5]);
        assert!(parse_points("1:0:3").is_err());
        assert!(parse_points("0:1:0").is_err());
    }
}
