//! Derivative-free simplex minimization (Nelder–Mead) used by the logistic fit.

pub(crate) struct NelderMeadOptions {
    /// Edge length of the initial simplex, in parameter units.
    pub initial_step: f64,
    /// Converged once the simplex diameter falls below this.
    pub diameter_tol: f64,
    pub max_iter: usize,
    /// Fresh simplices built around the current best after convergence; the
    /// classic remedy for premature collapse.
    pub max_restarts: usize,
}

pub(crate) struct NelderMeadOutput {
    pub x: Vec<f64>,
    pub fx: f64,
    pub converged: bool,
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for a in simplex {
        for b in simplex {
            let dist = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            d = d.max(dist);
        }
    }
    d
}

fn run_once<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], opts: &NelderMeadOptions) -> NelderMeadOutput {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for d in 0..n {
        let mut v = start.to_vec();
        v[d] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();

    for _ in 0..opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if diameter(&simplex) < opts.diameter_tol {
            return NelderMeadOutput {
                x: simplex.swap_remove(0),
                fx: values[0],
                converged: true,
            };
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|v| v[d]).sum::<f64>() / n as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + coef * (w - c))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = along(-0.5);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = along(0.5);
            let fc = f(&c);
            (c, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].clone();
        for i in 1..=n {
            for d in 0..n {
                simplex[i][d] = best[d] + 0.5 * (simplex[i][d] - best[d]);
            }
            values[i] = f(&simplex[i]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    NelderMeadOutput {
        x: simplex[best].clone(),
        fx: values[best],
        converged: false,
    }
}

pub(crate) fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], opts: &NelderMeadOptions) -> NelderMeadOutput {
    let mut out = run_once(f, start, opts);
    for _ in 0..opts.max_restarts {
        if !out.converged {
            break;
        }
        let again = run_once(f, &out.x, opts);
        let improved = again.fx < out.fx;
        let moved = again
            .x
            .iter()
            .zip(&out.x)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if again.converged && (improved || again.fx == out.fx) {
            let settled = moved < opts.diameter_tol;
            out = again;
            if settled {
                break;
            }
        } else {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            initial_step: 0.5,
            diameter_tol: 1e-10,
            max_iter: 20_000,
            max_restarts: 4,
        };
        let out = nelder_mead(&f, &[-1.2, 1.0], &opts);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-7 && (out.x[1] - 1.0).abs() < 1e-7, "{:?}", out.x);
    }
}
