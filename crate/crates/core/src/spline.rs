//! Natural cubic spline interpolation.

/// Cubic spline through `(t, y)` samples with zero second derivative at
/// both ends.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    /// Second derivative at every knot.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Builds the spline. `t` must be strictly increasing with at least two
    /// samples; callers validate this.
    pub fn natural(t: &[f64], y: &[f64]) -> Self {
        assert_eq!(t.len(), y.len());
        assert!(t.len() >= 2);
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior knots.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                let h0 = t[i + 1] - t[i];
                let h1 = t[i + 2] - t[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = t[i + 1] - t[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Self {
            t: t.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Value and first derivative at `x`. Outside the knot span the end
    /// polynomials are extrapolated.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.t.len();
        let i = match self.t.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let a = (t1 - x) / h;
        let b = (x - t0) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let value = a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope = (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0
            + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        (value, slope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_exactly() {
        let t = [0.0, 1.0, 2.5, 3.0, 4.0];
        let y = [1.0, -2.0, 0.3, 7.0, 7.5];
        let s = CubicSpline::natural(&t, &y);
        for (&tk, &yk) in t.iter().zip(&y) {
            assert_eq!(s.eval(tk).0, yk);
        }
    }

    #[test]
    fn linear_data_is_linear() {
        let t: Vec<f64> = (0..6).map(f64::from).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 + 2.0 * t).collect();
        let s = CubicSpline::natural(&t, &y);
        let (v, d) = s.eval(2.37);
        assert!((v - (3.0 + 2.0 * 2.37)).abs() < 1e-12);
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn natural_end_conditions() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.0, 0.0, 1.0];
        let s = CubicSpline::natural(&t, &y);
        assert_eq!(s.m[0], 0.0);
        assert_eq!(s.m[3], 0.0);
        // Derivative from finite differences.
        let h = 1e-6;
        let fd = (s.eval(1.3 + h).0 - s.eval(1.3 - h).0) / (2.0 * h);
        assert!((fd - s.eval(1.3).1).abs() < 1e-6);
    }
}
