//! Derivative-free quasi-Newton refinement used by the multistart search.

/// Outcome of a local refinement.
#[derive(Debug, Clone)]
pub struct LocalMin {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Central-difference gradient with per-coordinate steps `h * (scale + |x_i|)`.
fn gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], scale: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * (scale + x[i].abs());
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with an Armijo backtracking line search. `scale` sets the length
/// unit for finite differences and the initial step.
pub fn bfgs(f: impl Fn(&[f64]) -> f64, x0: &[f64], scale: f64, max_iter: usize) -> LocalMin {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if n == 0 || !fx.is_finite() {
        return LocalMin { x, value: fx, iterations: 0 };
    }
    let mut g = gradient(&f, &x, scale);
    let mut h = vec![0.0; n * n];
    let gnorm = dot(&g, &g).sqrt();
    let init = if gnorm > 0.0 { scale / gnorm } else { 1.0 };
    for i in 0..n {
        h[i * n + i] = init;
    }
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut d: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>()).collect();
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            // lost descent: reset to steepest descent
            for (i, di) in d.iter_mut().enumerate() {
                *di = -g[i] * init;
            }
            h.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..n {
                h[i * n + i] = init;
            }
            slope = dot(&g, &d);
            if slope >= 0.0 {
                break;
            }
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else { break };
        let g_new = gradient(&f, &x_new, scale);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        let snorm = dot(&s, &s).sqrt();
        let xnorm = dot(&x, &x).sqrt();
        if snorm <= 1e-12 * (scale + xnorm) || improvement <= 1e-15 * fx.abs().max(1e-300) {
            break;
        }
        // runaway towards infinity: the objectives used here approach a
        // limit there, so the current value is representative
        if xnorm > 1e6 * scale {
            break;
        }
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            // H <- (I - r s y^T) H (I - r y s^T) + r s s^T
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
    }
    LocalMin { x, value: fx, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = bfgs(f, &[-1.2, 1.0], 1.0, 500);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn quadratic_with_small_scale() {
        let f = |x: &[f64]| (x[0] - 0.003).powi(2) + 2.0 * (x[1] + 0.001).powi(2);
        let r = bfgs(f, &[0.01, 0.01], 0.01, 200);
        assert!((r.x[0] - 0.003).abs() < 1e-7 && (r.x[1] + 0.001).abs() < 1e-7);
    }
}
