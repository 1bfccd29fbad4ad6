use super::PartitionError;

/// Least-squares fit of split-link counts against domain count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFit {
    pub a: f64,
    pub alpha: f64,
    /// `N = A (p^alpha - 1)` rather than `N = A p^alpha`.
    pub offset_form: bool,
    /// Sum of squared residuals of the chosen form.
    pub sse: f64,
}

impl ScalingFit {
    pub fn eval(&self, p: f64) -> f64 {
        let g = p.powf(self.alpha);
        self.a * if self.offset_form { g - 1.0 } else { g }
    }
}

/// Fit both `A p^alpha` and `A (p^alpha - 1)` and return the one with the
/// smaller squared error. For fixed `alpha` the best `A` is closed-form, so
/// only `alpha` is searched.
pub fn fit_split_scaling(samples: &[(f64, f64)]) -> Result<ScalingFit, PartitionError> {
    if samples.len() < 3 {
        return Err(PartitionError::Degenerate(format!("need at least 3 samples, got {}", samples.len())));
    }
    if samples.iter().any(|&(p, n)| !(p >= 1.0 && p.is_finite() && n.is_finite())) {
        return Err(PartitionError::Degenerate("domain counts must be finite and at least 1".into()));
    }
    let p0 = samples[0].0;
    if samples.iter().all(|&(p, _)| p == p0) {
        return Err(PartitionError::Degenerate("all samples share one domain count".into()));
    }
    let plain = fit_form(samples, false);
    let offset = fit_form(samples, true);
    Ok(if offset.sse < plain.sse { offset } else { plain })
}

fn fit_form(samples: &[(f64, f64)], offset_form: bool) -> ScalingFit {
    let eval = |alpha: f64| {
        let g = |p: f64| {
            let x = p.powf(alpha);
            if offset_form {
                x - 1.0
            } else {
                x
            }
        };
        let sgy: f64 = samples.iter().map(|&(p, n)| g(p) * n).sum();
        let sgg: f64 = samples.iter().map(|&(p, _)| g(p) * g(p)).sum();
        let a = if sgg > 0.0 { sgy / sgg } else { 0.0 };
        let sse: f64 = samples.iter().map(|&(p, n)| (a * g(p) - n).powi(2)).sum();
        ScalingFit { a, alpha, offset_form, sse }
    };
    let (lo, hi, steps) = (0.01, 2.0, 1990);
    let mut best = eval(lo);
    let mut best_i = 0;
    for i in 1..=steps {
        let f = eval(lo + (hi - lo) * i as f64 / steps as f64);
        if f.sse < best.sse {
            best = f;
            best_i = i;
        }
    }
    // Golden-section refinement inside the bracketing grid cells.
    let h = (hi - lo) / steps as f64;
    let (mut a, mut b) = (lo + h * (best_i as f64 - 1.0).max(0.0), lo + h * (best_i as f64 + 1.0).min(steps as f64));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if eval(c).sse < eval(d).sse {
            b = d;
        } else {
            a = c;
        }
    }
    let refined = eval((a + b) / 2.0);
    if refined.sse < best.sse {
        refined
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PS: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

    #[test]
    fn recovers_offset_form() {
        let s: Vec<_> = PS.iter().map(|&p| (p, 140.0 * p.powf(0.59) - 140.0)).collect();
        let f = fit_split_scaling(&s).unwrap();
        assert!(f.offset_form);
        assert!((f.a - 140.0).abs() < 0.5, "{f:?}");
        assert!((f.alpha - 0.59).abs() < 1e-3, "{f:?}");
    }

    #[test]
    fn recovers_plain_form() {
        let s: Vec<_> = PS.iter().map(|&p| (p, 250.0 * p.powf(0.59))).collect();
        let f = fit_split_scaling(&s).unwrap();
        assert!(!f.offset_form);
        assert!((f.a - 250.0).abs() < 0.5, "{f:?}");
        assert!((f.alpha - 0.59).abs() < 1e-3, "{f:?}");
    }

    #[test]
    fn square_root_scaling() {
        let s: Vec<_> = PS[1..].iter().map(|&p| (p, 30.0 * p.sqrt())).collect();
        let f = fit_split_scaling(&s).unwrap();
        assert!((f.alpha - 0.5).abs() < 1e-3);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_split_scaling(&[(4.0, 1.0), (4.0, 2.0), (4.0, 3.0)]).is_err());
        assert!(fit_split_scaling(&[(1.0, 0.0), (2.0, 3.0)]).is_err());
        assert!(fit_split_scaling(&[(0.0, 0.0), (2.0, 3.0), (3.0, 1.0)]).is_err());
    }
}
