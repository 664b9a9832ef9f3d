//! Box-constrained quasi-Newton minimiser.
//!
//! Gradient projection with a BFGS inverse-Hessian on the free variables and
//! an Armijo backtracking search along the projected path. Variables that sit
//! on a bound with the gradient pushing outward are held by a plain projected
//! gradient step. Every accepted iterate strictly decreases the objective.

use nalgebra::{DMatrix, DVector};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
const ACTIVE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxMinimizer {
    /// Converged once the projected gradient step `P(x - g) - x` has infinity
    /// norm below this.
    pub grad_tol: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().zip(lo.iter().zip(hi.iter())).map(|(v, (l, h))| v.clamp(*l, *h)))
}

impl BoxMinimizer {
    pub fn new(grad_tol: f64, max_iterations: usize) -> Self {
        Self { grad_tol, max_iterations }
    }

    /// Minimises `f` (returning value and gradient) over `lo <= x <= hi`,
    /// starting from the projection of `x0`.
    pub fn minimize<F>(&self, mut f: F, x0: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> Minimum
    where
        F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
    {
        let n = x0.len();
        let mut x = project(x0, lo, hi);
        let (mut fx, mut g) = f(&x);
        let mut h_inv = DMatrix::<f64>::identity(n, n);
        let mut fresh_hessian = true;
        let mut iterations = 0;
        let mut converged = false;

        while iterations < self.max_iterations {
            let pg = project(&(&x - &g), lo, hi) - &x;
            let pg_norm = pg.amax();
            if pg_norm < self.grad_tol {
                converged = true;
                break;
            }
            iterations += 1;

            let eps = ACTIVE_EPS.min(pg.norm());
            let active: Vec<bool> =
                (0..n).map(|i| (x[i] <= lo[i] + eps && g[i] > 0.0) || (x[i] >= hi[i] - eps && g[i] < 0.0)).collect();

            let mut d = -&g;
            if active.iter().any(|a| !a) {
                let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
                let mut slope = 0.0;
                let mut d_free = vec![0.0; free.len()];
                for (a, &i) in free.iter().enumerate() {
                    let mut acc = 0.0;
                    for &j in &free {
                        acc -= h_inv[(i, j)] * g[j];
                    }
                    d_free[a] = acc;
                    slope += acc * g[i];
                }
                if slope < 0.0 {
                    for (a, &i) in free.iter().enumerate() {
                        d[i] = d_free[a];
                    }
                } else {
                    h_inv.fill_with_identity();
                    fresh_hessian = true;
                }
            }

            let step = match Self::search(&mut f, &x, fx, &g, &d, lo, hi) {
                Some(s) => Some(s),
                None if d != -&g => {
                    // quasi-Newton direction failed, retry along the projected gradient
                    h_inv.fill_with_identity();
                    fresh_hessian = true;
                    Self::search(&mut f, &x, fx, &g, &(-&g), lo, hi)
                }
                None => None,
            };
            let Some((x_new, f_new, g_new)) = step else {
                // no decrease possible at working precision
                converged = pg_norm < self.grad_tol.sqrt();
                break;
            };

            let s = &x_new - &x;
            let y = &g_new - &g;
            let sy = s.dot(&y);
            if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
                if fresh_hessian {
                    h_inv *= sy / y.dot(&y);
                    fresh_hessian = false;
                }
                let rho = 1.0 / sy;
                let hy = &h_inv * &y;
                let yhy = y.dot(&hy);
                // H+ = H - rho (s hy' + hy s') + (rho^2 yHy + rho) s s'
                h_inv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
                h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho);
            }

            let stalled = (fx - f_new).abs() <= 1e-16 * fx.abs().max(1e-300) && s.amax() <= 1e-15;
            x = x_new;
            fx = f_new;
            g = g_new;
            if stalled {
                let pg = project(&(&x - &g), lo, hi) - &x;
                converged = pg.amax() < self.grad_tol.sqrt();
                break;
            }
        }

        Minimum { x, value: fx, iterations, converged }
    }

    /// Armijo backtracking along `alpha -> P(x + alpha d)`.
    fn search<F>(
        f: &mut F,
        x: &DVector<f64>,
        fx: f64,
        g: &DVector<f64>,
        d: &DVector<f64>,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
    ) -> Option<(DVector<f64>, f64, DVector<f64>)>
    where
        F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
    {
        let mut alpha = 1.0;
        for _ in 0..MAX_BACKTRACKS {
            let trial = project(&(x + d * alpha), lo, hi);
            let predicted = g.dot(&(&trial - x));
            if predicted < 0.0 {
                let (ft, gt) = f(&trial);
                if ft.is_finite() && ft < fx && ft <= fx + ARMIJO * predicted {
                    return Some((trial, ft, gt));
                }
            }
            alpha *= 0.5;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rosenbrock(x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
        (f, g)
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let m = BoxMinimizer::new(1e-10, 500);
        let lo = DVector::from_element(2, -10.0);
        let hi = DVector::from_element(2, 10.0);
        let r = m.minimize(rosenbrock, &DVector::from_vec(vec![-1.2, 1.0]), &lo, &hi);
        assert!(r.converged);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.x[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn rosenbrock_with_active_bound() {
        // minimum on the box edge x1 <= 0.5 is near (0.7071, 0.5)
        let m = BoxMinimizer::new(1e-10, 500);
        let lo = DVector::from_vec(vec![-2.0, -2.0]);
        let hi = DVector::from_vec(vec![2.0, 0.5]);
        let r = m.minimize(rosenbrock, &DVector::from_vec(vec![-1.0, -1.0]), &lo, &hi);
        assert_eq!(r.x[1], 0.5);
        // stationarity along x0 on the edge
        let (_, g) = rosenbrock(&r.x);
        assert!(g[0].abs() < 1e-6);
        assert!(g[1] < 0.0);
    }

    #[test]
    fn separable_quadratic_hits_corners() {
        let target = DVector::from_vec(vec![3.0, -3.0, 0.25]);
        let f = |x: &DVector<f64>| {
            let d = x - &target;
            (d.dot(&d), d * 2.0)
        };
        let lo = DVector::from_element(3, -1.0);
        let hi = DVector::from_element(3, 1.0);
        let r = BoxMinimizer::new(1e-12, 100).minimize(f, &DVector::zeros(3), &lo, &hi);
        assert!(r.converged);
        assert_eq!(r.x[0], 1.0);
        assert_eq!(r.x[1], -1.0);
        assert_abs_diff_eq!(r.x[2], 0.25, epsilon = 1e-10);
    }

    #[test]
    fn never_increases_from_start() {
        let lo = DVector::from_element(2, -1.5);
        let hi = DVector::from_element(2, 1.5);
        for start in [[0.0, 0.0], [1.5, -1.5], [-0.3, 1.2]] {
            let x0 = DVector::from_vec(start.to_vec());
            let f0 = rosenbrock(&x0).0;
            let r = BoxMinimizer::new(1e-9, 5).minimize(rosenbrock, &x0, &lo, &hi);
            assert!(r.value <= f0);
        }
    }
}
