//! Derivative-free Nelder-Mead minimization over a fixed-size parameter
//! vector. Deterministic: the result depends only on the objective, the
//! starting point and the initial step sizes.

#[derive(Debug, Clone, Copy)]
pub struct NmResult<const N: usize> {
    pub x: [f64; N],
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with a simplex spanned by `step`.
///
/// Convergence is declared when the simplex function-value spread collapses
/// below `1e-12 * (1 + |f_best|)`; otherwise the iteration budget is spent
/// and `converged` is false.
pub fn nelder_mead<const N: usize>(
    f: impl Fn(&[f64; N]) -> f64,
    x0: [f64; N],
    step: [f64; N],
    max_iter: usize,
) -> NmResult<N> {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let mut simplex: Vec<[f64; N]> = Vec::with_capacity(N + 1);
    simplex.push(x0);
    for i in 0..N {
        let mut v = x0;
        v[i] += if step[i] != 0.0 { step[i] } else { 1e-3 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(&f).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;

        // order by value, stable under ties
        let mut order: Vec<usize> = (0..=N).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let best = order[0];
        let worst = order[N];
        let second_worst = order[N - 1];

        if (values[worst] - values[best]).abs() <= 1e-12 * (1.0 + values[best].abs()) {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = [0.0; N];
        for (idx, v) in simplex.iter().enumerate() {
            if idx != worst {
                for k in 0..N {
                    centroid[k] += v[k] / N as f64;
                }
            }
        }

        let lerp = |from: &[f64; N], towards: &[f64; N], t: f64| {
            let mut out = [0.0; N];
            for k in 0..N {
                out[k] = from[k] + t * (towards[k] - from[k]);
            }
            out
        };

        let reflected = lerp(&centroid, &simplex[worst], -ALPHA);
        let f_reflected = f(&reflected);

        if f_reflected < values[best] {
            let expanded = lerp(&centroid, &simplex[worst], -GAMMA);
            let f_expanded = f(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted = if f_reflected < values[worst] {
                lerp(&centroid, &reflected, RHO)
            } else {
                lerp(&centroid, &simplex[worst], RHO)
            };
            let f_contracted = f(&contracted);
            if f_contracted < values[worst].min(f_reflected) {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // shrink towards the best vertex
                let anchor = simplex[best];
                for idx in 0..=N {
                    if idx == best {
                        continue;
                    }
                    simplex[idx] = lerp(&anchor, &simplex[idx], SIGMA);
                    values[idx] = f(&simplex[idx]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=N {
        if values[i] < values[best] {
            best = i;
        }
    }
    NmResult { x: simplex[best], value: values[best], iterations, converged }
}
