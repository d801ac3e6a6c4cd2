use crate::model::GaussianPrior;

/// Inverts the agent's shrinkage: g(ŷ) = ŷ + (ŷ − μ₀)/(q·σ₀²).
pub fn unshrink(prior: &GaussianPrior, y_hat: f64, q: f64) -> f64 {
    y_hat + (y_hat - prior.mu0) * prior.precision() / q
}

/// Posterior mean built from shrunk reports of the active agents (q > 0).
/// Agents with zero effort are ignored; with none active, returns μ₀.
pub fn predict(prior: &GaussianPrior, reports: &[f64], efforts: &[f64]) -> f64 {
    let a = prior.precision();
    let mut num = 0.0;
    let mut den = a;
    let mut active = 0usize;
    for (&y, &q) in reports.iter().zip(efforts) {
        if q > 0.0 {
            num += (a + q) * y;
            den += q;
            active += 1;
        }
    }
    if active == 0 {
        return prior.mu0;
    }
    (num + (1.0 - active as f64) * prior.mu0 * a) / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::posterior_mean_var;

    #[test]
    fn examples() {
        let p = GaussianPrior::standard();
        assert!((unshrink(&p, 0.5, 1.0) - 1.0).abs() < 1e-15);
        assert!((predict(&p, &[0.5], &[1.0]) - 0.5).abs() < 1e-15);
        let p3 = GaussianPrior::new(3.0, 2.0).unwrap();
        assert_eq!(predict(&p3, &[3.0, 3.0], &[1.0, 2.0]), 3.0);
        assert_eq!(predict(&p3, &[1.0, 2.0], &[0.0, 0.0]), 3.0);
    }

    #[test]
    fn matches_posterior_of_raw_observations() {
        let p = GaussianPrior::new(0.7, 2.5).unwrap();
        let a = p.precision();
        let ys = [1.3, -0.4, 2.2, 9.0];
        let qs = [0.5, 2.0, 0.0, 7.0];
        let shrunk: Vec<f64> =
            ys.iter().zip(&qs).map(|(&y, &q)| if q > 0.0 { (p.mu0 * a + y * q) / (a + q) } else { p.mu0 }).collect();
        let pairs: Vec<(f64, f64)> = ys.iter().copied().zip(qs.iter().copied()).collect();
        let direct = posterior_mean_var(&p, &pairs).0;
        let via = predict(&p, &shrunk, &qs);
        assert!((direct - via).abs() <= 1e-12 * direct.abs().max(1.0));
        let via_g: Vec<(f64, f64)> =
            shrunk.iter().zip(&qs).filter(|(_, &q)| q > 0.0).map(|(&y, &q)| (unshrink(&p, y, q), q)).collect();
        assert!((posterior_mean_var(&p, &via_g).0 - direct).abs() < 1e-12);
    }
}
