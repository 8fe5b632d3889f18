//! Small-sample moments and univariate least squares.

/// Variance divisor convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Divisor {
    /// Divide by N.
    Population,
    /// Divide by N - 1.
    Sample,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64], divisor: Divisor) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    match divisor {
        Divisor::Population => ss / xs.len() as f64,
        Divisor::Sample => ss / (xs.len() as f64 - 1.0),
    }
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Result of regressing `y` on a constant and one regressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsFit {
    pub alpha: f64,
    pub beta: f64,
    /// Standard error of `beta`; NaN when it is not identified.
    pub se_beta: f64,
    pub n: usize,
    /// True when the regressor had no variation and the fit collapsed to the mean of `y`.
    pub degenerate: bool,
}

impl OlsFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.alpha + self.beta * x
    }
}

/// Relative tolerance below which a regressor is treated as constant.
pub(crate) const DEGENERATE_TOL: f64 = 1e-24;

/// OLS of `y` on `[1, x]`. A constant regressor yields `beta = 0` and `alpha = mean(y)`.
pub fn ols(x: &[f64], y: &[f64]) -> OlsFit {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len();
    let (mx, my) = (mean(x), mean(y));
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mx;
        sxx += dx * dx;
        sxy += dx * (yi - my);
    }
    let scale = x.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if !(sxx > DEGENERATE_TOL * scale) {
        return OlsFit {
            alpha: my,
            beta: 0.0,
            se_beta: f64::NAN,
            n,
            degenerate: true,
        };
    }
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let se_beta = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| {
                let e = yi - alpha - beta * xi;
                e * e
            })
            .sum();
        (rss / (n as f64 - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    OlsFit {
        alpha,
        beta,
        se_beta,
        n,
        degenerate: false,
    }
}
