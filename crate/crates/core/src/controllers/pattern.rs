/// Outcome of [`compass_search`].
#[derive(Clone, Debug, PartialEq)]
pub struct PatternSearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Step fell below the tolerance before the iteration cap.
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Derivative-free compass search: poll `x +- step e_i` in a fixed order,
/// move to the first improving point, halve the step after a poll without
/// improvement, stop once the step is below `tol`.
pub fn compass_search<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step0: f64,
    tol: f64,
    max_iters: usize,
) -> PatternSearchResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evaluations = 1;
    let mut step = step0.max(tol);
    let mut trial = x.clone();
    let mut iterations = 0;
    while step >= tol {
        if iterations == max_iters {
            return PatternSearchResult { x, value: fx, converged: false, iterations, evaluations };
        }
        iterations += 1;
        let mut improved = false;
        'poll: for i in 0..n {
            for sign in [1.0, -1.0] {
                trial[i] = x[i] + sign * step;
                let ft = f(&trial);
                evaluations += 1;
                if ft < fx {
                    x[i] = trial[i];
                    fx = ft;
                    improved = true;
                    break 'poll;
                }
                trial[i] = x[i];
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    PatternSearchResult { x, value: fx, converged: true, iterations, evaluations }
}
