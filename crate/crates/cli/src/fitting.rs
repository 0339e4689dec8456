//! Unweighted least-squares slope fits on log-log data.

use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Fit `ln y = intercept + slope ln x`; refuses with fewer than `min_points`.
pub fn fit_loglog(data: &[(f64, f64)], min_points: usize) -> anyhow::Result<Fit> {
    let pts: Vec<(f64, f64)> = data
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < min_points.max(2) {
        anyhow::bail!(
            "fit refused: {} valid points, need {}",
            pts.len(),
            min_points
        );
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        anyhow::bail!("fit refused: degenerate abscissae");
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let ss_res: f64 = pts
        .iter()
        .map(|&(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let var_x = sxx - sx * sx / n;
    let stderr = if pts.len() > 2 {
        (ss_res / (n - 2.0) / var_x).sqrt()
    } else {
        f64::NAN
    };
    Ok(Fit {
        slope,
        intercept,
        stderr,
        points: pts.len(),
    })
}
