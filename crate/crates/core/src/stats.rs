//! Small fitting and summation helpers shared by the estimators.

/// `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub intercept: f64,
    pub slope: f64,
}

/// Ordinary least squares through `(x, y)` pairs; `None` for fewer than two
/// distinct abscissae.
pub fn least_squares_line(pts: &[(f64, f64)]) -> Option<Line> {
    let w: Vec<(f64, f64, f64)> = pts.iter().map(|&(x, y)| (x, y, 1.0)).collect();
    weighted_line(&w).map(|f| f.line)
}

/// Weighted straight-line fit with parameter covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedFit {
    pub line: Line,
    pub var_intercept: f64,
    pub var_slope: f64,
    /// Weighted residual sum of squares.
    pub chi2: f64,
}

/// Fits `(x, y, weight)` triples; weights are inverse variances.
pub fn weighted_line(pts: &[(f64, f64, f64)]) -> Option<WeightedFit> {
    if pts.len() < 2 {
        return None;
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, w) in pts {
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    if !(det.abs() > 1e-300) {
        return None;
    }
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2 = pts
        .iter()
        .map(|&(x, y, w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    Some(WeightedFit {
        line: Line { intercept, slope },
        var_intercept: sxx / det,
        var_slope: s / det,
        chi2,
    })
}

/// Observed convergence order from three results at steps `h, h/r, h/r²`.
pub fn observed_order(coarse: f64, medium: f64, fine: f64, ratio: f64) -> f64 {
    ((coarse - medium) / (medium - fine)).abs().ln() / ratio.ln()
}

/// Kahan–Babuška–Neumaier accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let l = least_squares_line(&pts).unwrap();
        assert!((l.intercept - 2.0).abs() < 1e-14 && (l.slope + 0.5).abs() < 1e-14);
        assert!(least_squares_line(&pts[..1]).is_none());
    }

    #[test]
    fn order_of_quadratic_error() {
        let f = |h: f64| 1.0 + 3.0 * h * h;
        assert!((observed_order(f(0.1), f(0.05), f(0.025), 2.0) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn compensated_sum_keeps_small_terms() {
        let mut s = NeumaierSum::default();
        for v in [1e16, 1.0, -1e16, 1.0] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }
}
