//! Derivative-free simplex minimization with restarts.

/// Standard coefficients: reflection, expansion, contraction, shrink.
#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub sigma: f64,
    /// Restart from the incumbent when the simplex spread in `f` drops
    /// below this and its diameter below `x_tol`.
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            gamma: 2.0,
            rho: 0.5,
            sigma: 0.5,
            f_tol: 1e-13,
            x_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// Evaluations that returned a non-finite value.
    pub failures: usize,
}

struct Counter<F> {
    f: F,
    evals: usize,
    failures: usize,
    best: Minimum,
}

impl<F: FnMut(&[f64]) -> f64> Counter<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if !v.is_finite() {
            self.failures += 1;
            return f64::INFINITY;
        }
        if v < self.best.f {
            self.best.f = v;
            self.best.x = x.to_vec();
        }
        v
    }
}

impl NelderMead {
    /// Minimizes `f` from `x0` using at most `max_evals` evaluations (at
    /// least one: the start point is always evaluated). `steps` sets the
    /// initial simplex edge along each coordinate.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, f: F, x0: &[f64], steps: &[f64], max_evals: usize) -> Minimum {
        let n = x0.len();
        assert_eq!(steps.len(), n);
        let mut c = Counter {
            f,
            evals: 0,
            failures: 0,
            best: Minimum {
                x: x0.to_vec(),
                f: f64::INFINITY,
                evals: 0,
                failures: 0,
            },
        };
        let budget = max_evals.max(1);
        let mut origin = x0.to_vec();
        let mut scale = 1.0;
        'restart: loop {
            let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
            for k in 0..=n {
                if c.evals >= budget {
                    break 'restart;
                }
                let mut x = origin.clone();
                if k > 0 {
                    x[k - 1] += steps[k - 1] * scale;
                }
                let fx = c.eval(&x);
                simplex.push((x, fx));
            }
            loop {
                simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
                let spread = simplex[n].1 - simplex[0].1;
                let diameter = simplex[1..]
                    .iter()
                    .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                    .fold(0.0, f64::max);
                if (spread.abs() <= self.f_tol || !spread.is_finite()) && diameter <= self.x_tol.max(1e-3 * scale) {
                    origin = simplex[0].0.clone();
                    scale = (scale * 0.5).max(1e-3);
                    continue 'restart;
                }
                if c.evals >= budget {
                    break 'restart;
                }
                let centroid: Vec<f64> = (0..n)
                    .map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64)
                    .collect();
                let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                    centroid.iter().zip(worst).map(|(c, w)| c + t * (c - w)).collect()
                };
                let worst = simplex[n].0.clone();
                let xr = along(self.alpha, &worst);
                let fr = c.eval(&xr);
                if fr < simplex[0].1 {
                    if c.evals >= budget {
                        simplex[n] = (xr, fr);
                        break 'restart;
                    }
                    let xe = along(self.alpha * self.gamma, &worst);
                    let fe = c.eval(&xe);
                    simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                } else if fr < simplex[n - 1].1 {
                    simplex[n] = (xr, fr);
                } else {
                    if c.evals >= budget {
                        break 'restart;
                    }
                    let (xc, fc) = if fr < simplex[n].1 {
                        let x = along(self.alpha * self.rho, &worst);
                        let f = c.eval(&x);
                        (x, f)
                    } else {
                        let x = along(-self.rho, &worst);
                        let f = c.eval(&x);
                        (x, f)
                    };
                    if fc < simplex[n].1.min(fr) {
                        simplex[n] = (xc, fc);
                    } else {
                        let best = simplex[0].0.clone();
                        for item in simplex.iter_mut().skip(1) {
                            if c.evals >= budget {
                                break 'restart;
                            }
                            let x: Vec<f64> = best.iter().zip(&item.0).map(|(b, v)| b + self.sigma * (v - b)).collect();
                            let fx = c.eval(&x);
                            *item = (x, fx);
                        }
                    }
                }
            }
        }
        let mut best = c.best;
        best.evals = c.evals;
        best.failures = c.failures;
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + 0.5 * x[0] * x[1];
        let m = NelderMead::default().minimize(f, &[0.0, 0.0], &[0.5, 0.5], 2000);
        let gx = 2.0 * (m.x[0] - 1.0) + 0.5 * m.x[1];
        let gy = 6.0 * (m.x[1] + 2.0) + 0.5 * m.x[0];
        assert!(gx.abs() < 1e-5 && gy.abs() < 1e-5, "{:?}", m);
        assert!(m.evals <= 2000);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let m = NelderMead::default().minimize(f, &[-1.2, 1.0], &[0.5, 0.5], 5000);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m);
    }

    #[test]
    fn respects_budget_and_evaluates_start() {
        let mut calls = 0;
        let m = NelderMead::default().minimize(
            |x: &[f64]| {
                calls += 1;
                x[0] * x[0]
            },
            &[3.0],
            &[1.0],
            0,
        );
        assert_eq!(m.evals, 1);
        assert_eq!(calls, 1);
        assert_eq!(m.f, 9.0);
    }

    #[test]
    fn non_finite_values_are_counted() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { (x[0] + 1.0).powi(2) };
        let m = NelderMead::default().minimize(f, &[0.0], &[1.0], 200);
        assert!(m.failures > 0);
        assert!((m.x[0] + 1.0).abs() < 1e-4);
    }
}
