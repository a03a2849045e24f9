fn main() {
    use grf::covariance::CovarianceModel;
    use grf::periodisation::ce_spectrum;
    let n = 1500usize;
    for (label, model) in [
        ("gaussian l=0.2", CovarianceModel::gaussian(0.2).unwrap()),
        ("cauchy   l=0.2", CovarianceModel::cauchy(0.2).unwrap()),
        ("matern8  l=0.2", CovarianceModel::matern(8.0, 0.2).unwrap()),
        ("matern8  l=0.025", CovarianceModel::matern(8.0, 0.025).unwrap()),
        ("matern0.5 l=0.025", CovarianceModel::matern(0.5, 0.025).unwrap()),
    ] {
        for tau in [2usize, 8, 64, 256, 1024] {
            let m = tau * n;
            let spec = ce_spectrum(&model, tau as f64 / 2.0, m, 1).unwrap();
            let max = spec.iter().fold(0.0f64, |a, &b| a.max(b));
            let min = spec.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            println!("{label} tau={tau:5}: min={min:+.3e} max={max:.3e} min/max={:+.2e}", min/max);
            if tau >= 64 && label.starts_with("matern0.5") { break; }
        }
    }
}
