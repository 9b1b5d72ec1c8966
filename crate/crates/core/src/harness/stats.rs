/// Sample mean and sample standard deviation (zero for fewer than two values).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let (mean, sd) = mean_sd(xs);
    (mean, sd / (xs.len() as f64).sqrt())
}

/// Normal-approximation 95% band `mean ± 1.96·sd/√n`.
pub fn ci95(xs: &[f64]) -> (f64, f64, f64) {
    let (mean, se) = mean_stderr(xs);
    (mean, mean - 1.96 * se, mean + 1.96 * se)
}
