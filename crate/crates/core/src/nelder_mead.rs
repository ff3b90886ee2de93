//! Derivative-free simplex minimization.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMead {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Converged once the simplex diameter is below this...
    pub x_tol: f64,
    /// ...and the vertex values differ by less than this.
    pub f_tol: f64,
    pub max_iterations: usize,
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            x_tol: 1e-7,
            f_tol: 1e-10,
            max_iterations: 2000,
            initial_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<const N: usize> {
    pub x: [f64; N],
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn lerp<const N: usize>(a: &[f64; N], b: &[f64; N], t: f64) -> [f64; N] {
    std::array::from_fn(|i| a[i] + t * (b[i] - a[i]))
}

fn dist<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl NelderMead {
    /// Minimizes `f` from `start`. Non-finite values are treated as `+∞`.
    pub fn minimize<const N: usize, F>(&self, f: F, start: [f64; N]) -> Minimum<N>
    where
        F: Fn(&[f64; N]) -> f64,
    {
        let mut evaluations = 0;
        let mut eval = |x: &[f64; N]| {
            evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
        simplex.push((start, eval(&start)));
        for i in 0..N {
            let mut x = start;
            x[i] += self.initial_step;
            let mut v = eval(&x);
            if !v.is_finite() {
                x[i] = start[i] - self.initial_step;
                v = eval(&x);
            }
            simplex.push((x, v));
        }

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iterations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| cmp_points(&a.0, &b.0)));
            let best = simplex[0];
            let worst = simplex[N];
            let diameter = simplex
                .iter()
                .skip(1)
                .map(|(x, _)| dist(x, &best.0))
                .fold(0.0, f64::max);
            if diameter < self.x_tol && (worst.1 - best.1).abs() < self.f_tol {
                converged = true;
                break;
            }
            iterations += 1;

            let centroid: [f64; N] = std::array::from_fn(|i| {
                simplex[..N].iter().map(|(x, _)| x[i]).sum::<f64>() / N as f64
            });
            let reflected = lerp(&centroid, &worst.0, -self.reflection);
            let fr = eval(&reflected);
            let second_worst = simplex[N - 1].1;

            if fr < best.1 {
                let expanded = lerp(&centroid, &worst.0, -self.reflection * self.expansion);
                let fe = eval(&expanded);
                simplex[N] = if fe < fr {
                    (expanded, fe)
                } else {
                    (reflected, fr)
                };
                continue;
            }
            if fr < second_worst {
                simplex[N] = (reflected, fr);
                continue;
            }
            let (candidate, fc) = if fr < worst.1 {
                let c = lerp(&centroid, &reflected, self.contraction);
                (c, eval(&c))
            } else {
                let c = lerp(&centroid, &worst.0, self.contraction);
                (c, eval(&c))
            };
            if fc < worst.1.min(fr) {
                simplex[N] = (candidate, fc);
                continue;
            }
            for vertex in simplex.iter_mut().skip(1) {
                let x = lerp(&best.0, &vertex.0, self.shrink);
                *vertex = (x, eval(&x));
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| cmp_points(&a.0, &b.0)));
        Minimum {
            x: simplex[0].0,
            value: simplex[0].1,
            iterations,
            evaluations,
            converged,
        }
    }
}

/// Lexicographic order on coordinates.
pub fn cmp_points(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}
