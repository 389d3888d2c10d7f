//! Projected Newton ascent on a box, and an active-set variant with
//! linear equality constraints.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Objective value, gradient and curvature `M = -(d^2 L)` at a point.
#[derive(Debug, Clone)]
pub(crate) struct Local {
    pub value: f64,
    pub grad: DVector<f64>,
    pub curv: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AscentSettings {
    pub max_iter: usize,
    pub score_tol: f64,
    pub step_tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Ascent {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 50;
/// Relative gain below which an accepted step counts as no progress.
const STALL: f64 = 1e-13;

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn projected_gradient_norm(x: &[f64], g: &DVector<f64>, lo: &[f64], hi: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| (x[i] - (x[i] + g[i]).clamp(lo[i], hi[i])).abs())
        .fold(0.0, f64::max)
}

/// Newton direction on the free variables; `None` when no ridge makes the
/// reduced curvature positive definite.
fn newton_direction(loc: &Local, x: &[f64], lo: &[f64], hi: &[f64], eps: f64) -> Option<DVector<f64>> {
    let d = x.len();
    let free: Vec<usize> = (0..d)
        .filter(|&i| {
            let at_lo = x[i] - lo[i] <= eps && loc.grad[i] < 0.0;
            let at_hi = hi[i] - x[i] <= eps && loc.grad[i] > 0.0;
            !(at_lo || at_hi)
        })
        .collect();
    let mut dir = DVector::zeros(d);
    if free.is_empty() {
        return Some(dir);
    }
    let k = free.len();
    let m = DMatrix::from_fn(k, k, |a, b| loc.curv[(free[a], free[b])]);
    let g = DVector::from_fn(k, |a, _| loc.grad[free[a]]);
    let scale = (0..k).map(|a| m[(a, a)].abs()).fold(1e-12, f64::max);
    let mut ridge = 0.0;
    for _ in 0..20 {
        let mut mr = m.clone();
        for a in 0..k {
            mr[(a, a)] += ridge;
        }
        if let Some(ch) = mr.cholesky() {
            let step = ch.solve(&g);
            if step.iter().all(|v| v.is_finite()) {
                for a in 0..k {
                    dir[free[a]] = step[a];
                }
                return Some(dir);
            }
        }
        ridge = if ridge == 0.0 { 1e-8 * scale } else { ridge * 10.0 };
    }
    None
}

/// Backtracks along the projected path `P(x + t dir)`.
fn line_search<E>(
    eval: &mut E,
    x: &[f64],
    cur: &Local,
    dir: &DVector<f64>,
    lo: &[f64],
    hi: &[f64],
) -> Option<(Vec<f64>, f64)>
where
    E: FnMut(&[f64], bool) -> Result<Local>,
{
    let mut t = 1.0;
    for _ in 0..MAX_HALVINGS {
        let mut trial: Vec<f64> = (0..x.len()).map(|i| x[i] + t * dir[i]).collect();
        project(&mut trial, lo, hi);
        let gain: f64 = (0..x.len()).map(|i| cur.grad[i] * (trial[i] - x[i])).sum();
        if trial.as_slice() == x {
            return None;
        }
        if let Ok(l) = eval(&trial, false) {
            if l.value.is_finite() && l.value >= cur.value && l.value >= cur.value + ARMIJO * gain {
                return Some((trial, l.value));
            }
        }
        t *= 0.5;
    }
    None
}

/// Maximises the objective behind `eval` over the box `[lo, hi]`.
///
/// `eval(x, true)` must fill gradient and curvature; `eval(x, false)` may
/// leave them empty. Errors from `eval` at trial points count as rejections.
pub(crate) fn ascend<E>(mut eval: E, x0: &[f64], lo: &[f64], hi: &[f64], settings: AscentSettings) -> Result<Ascent>
where
    E: FnMut(&[f64], bool) -> Result<Local>,
{
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut cur = eval(&x, true)?;
    if !cur.value.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut trace = Vec::from([cur.value]);
    let mut converged = false;
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < settings.max_iter {
        let pg = projected_gradient_norm(&x, &cur.grad, lo, hi);
        let score_ok = pg <= settings.score_tol * (1.0 + cur.value.abs());
        let eps = pg.min(1e-6);
        let newton = newton_direction(&cur, &x, lo, hi, eps);
        if let Some(dir) = &newton {
            let len = (0..x.len())
                .map(|i| ((x[i] + dir[i]).clamp(lo[i], hi[i]) - x[i]).abs())
                .fold(0.0, f64::max);
            if score_ok && (len <= settings.step_tol || stalled) {
                converged = true;
                break;
            }
        }
        let mut accepted = newton
            .as_ref()
            .and_then(|dir| line_search(&mut eval, &x, &cur, dir, lo, hi));
        if accepted.is_none() {
            let gmax = cur.grad.amax();
            if gmax > 0.0 {
                let dir = &cur.grad / gmax;
                accepted = line_search(&mut eval, &x, &cur, &dir, lo, hi);
            }
        }
        iterations += 1;
        match accepted {
            Some((next, value)) => {
                debug_assert!(value >= cur.value);
                stalled = value - cur.value <= STALL * (1.0 + cur.value.abs());
                x = next;
                cur = eval(&x, true)?;
                trace.push(cur.value);
            }
            None => {
                // no ascent possible in floating point
                converged = score_ok;
                break;
            }
        }
    }
    Ok(Ascent {
        x,
        value: cur.value,
        converged,
        iterations,
        trace,
    })
}

/// Maximises over `{lo <= x <= hi, R x = r}` from a feasible `x0` by an
/// active-set method: bounds that block a step join the equality set and are
/// released when their multiplier has the wrong sign.
pub(crate) fn ascend_affine<E>(
    mut eval: E,
    x0: &[f64],
    r_mat: &DMatrix<f64>,
    lo: &[f64],
    hi: &[f64],
    settings: AscentSettings,
) -> Result<Ascent>
where
    E: FnMut(&[f64], bool) -> Result<Local>,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut cur = eval(&x, true)?;
    if !cur.value.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut trace = Vec::from([cur.value]);
    let mut working: Vec<usize> = (0..d).filter(|&i| x[i] <= lo[i] || x[i] >= hi[i]).collect();
    for &i in &working {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
    let mut converged = false;
    let mut iterations = 0;
    let mut last_released: Option<usize> = None;
    let mut stalled = false;
    while iterations < settings.max_iter {
        let rows = r_mat.nrows() + working.len();
        let mut a = DMatrix::zeros(rows, d);
        a.rows_mut(0, r_mat.nrows()).copy_from(r_mat);
        for (k, &i) in working.iter().enumerate() {
            a[(r_mat.nrows() + k, i)] = 1.0;
        }
        let null = crate::linalg::null_space(&a);
        let gxi = null.transpose() * &cur.grad;
        let tol = settings.score_tol * (1.0 + cur.value.abs());
        let sub = Local {
            value: cur.value,
            grad: gxi.clone(),
            curv: null.transpose() * &cur.curv * &null,
        };
        let k = null.ncols();
        let free_lo = alloc::vec![f64::NEG_INFINITY; k];
        let free_hi = alloc::vec![f64::INFINITY; k];
        let zero = alloc::vec![0.0; k];
        let newton = newton_direction(&sub, &zero, &free_lo, &free_hi, 0.0).map(|dxi| &null * dxi);
        let step_len = newton.as_ref().map_or(f64::INFINITY, |v| v.amax());
        if gxi.amax() <= tol && (step_len <= settings.step_tol || stalled) {
            // stationary on the current face: check the bound multipliers
            match release_candidate(&cur.grad, r_mat, &working, &x, lo, hi, tol) {
                Some(pos) if last_released != Some(working[pos]) => {
                    last_released = Some(working.remove(pos));
                    continue;
                }
                _ => {
                    converged = true;
                    break;
                }
            }
        }
        let mut accepted = None;
        for dir in newton.into_iter().chain(core::iter::once({
            let m = gxi.amax();
            if m > 0.0 {
                &null * (&gxi / m)
            } else {
                DVector::zeros(d)
            }
        })) {
            if dir.amax() == 0.0 {
                continue;
            }
            // largest feasible multiple of the direction
            let mut t_max = f64::INFINITY;
            let mut blocking = None;
            for i in 0..d {
                if working.contains(&i) {
                    continue;
                }
                let t = if dir[i] < 0.0 {
                    (lo[i] - x[i]) / dir[i]
                } else if dir[i] > 0.0 {
                    (hi[i] - x[i]) / dir[i]
                } else {
                    continue;
                };
                if t < t_max {
                    t_max = t.max(0.0);
                    blocking = Some(i);
                }
            }
            let mut t = t_max.min(1.0);
            for _ in 0..MAX_HALVINGS {
                if t <= 0.0 {
                    break;
                }
                let mut trial: Vec<f64> = (0..d).map(|i| x[i] + t * dir[i]).collect();
                let hits = t == t_max;
                if hits {
                    if let Some(b) = blocking {
                        trial[b] = if dir[b] < 0.0 { lo[b] } else { hi[b] };
                    }
                }
                for i in 0..d {
                    trial[i] = trial[i].clamp(lo[i], hi[i]);
                }
                for &i in &working {
                    trial[i] = x[i];
                }
                let gain: f64 = (0..d).map(|i| cur.grad[i] * (trial[i] - x[i])).sum();
                if let Ok(l) = eval(&trial, false) {
                    if l.value.is_finite() && l.value >= cur.value && l.value >= cur.value + ARMIJO * gain {
                        accepted = Some((trial, if hits { blocking } else { None }));
                        break;
                    }
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        iterations += 1;
        match accepted {
            Some((next, hit)) => {
                x = next;
                let before = cur.value;
                if let Some(b) = hit {
                    working.push(b);
                    working.sort_unstable();
                }
                cur = eval(&x, true)?;
                trace.push(cur.value);
                stalled = hit.is_none() && cur.value - before <= STALL * (1.0 + before.abs());
                last_released = None;
            }
            None => {
                let gxi_ok = gxi.amax() <= tol;
                converged = gxi_ok && release_candidate(&cur.grad, r_mat, &working, &x, lo, hi, tol).is_none();
                break;
            }
        }
    }
    Ok(Ascent {
        x,
        value: cur.value,
        converged,
        iterations,
        trace,
    })
}

/// Position in `working` of the bound whose multiplier most strongly asks
/// to leave it, if any.
fn release_candidate(
    grad: &DVector<f64>,
    r_mat: &DMatrix<f64>,
    working: &[usize],
    x: &[f64],
    lo: &[f64],
    hi: &[f64],
    tol: f64,
) -> Option<usize> {
    if working.is_empty() {
        return None;
    }
    let d = grad.len();
    let q = r_mat.nrows();
    let cols = q + working.len();
    // grad = R' a + sum_k b_k e_{w_k}
    let mut basis = DMatrix::zeros(d, cols);
    basis.columns_mut(0, q).copy_from(&r_mat.transpose());
    for (k, &i) in working.iter().enumerate() {
        basis[(i, q + k)] = 1.0;
    }
    let coef = basis.svd(true, true).solve(grad, 1e-12).ok()?;
    let mut best: Option<(usize, f64)> = None;
    for (k, &i) in working.iter().enumerate() {
        let b = coef[q + k];
        // at a lower bound ascent needs b <= 0, at an upper bound b >= 0
        let at_lower = x[i] - lo[i] <= hi[i] - x[i];
        let wrong = if at_lower { b } else { -b };
        if wrong > tol && best.is_none_or(|(_, w)| wrong > w) {
            best = Some((k, wrong));
        }
    }
    best.map(|(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn quad(center: Vec<f64>, curv: DMatrix<f64>) -> impl FnMut(&[f64], bool) -> Result<Local> {
        move |x: &[f64], _| {
            let dx = DVector::from_fn(x.len(), |i, _| x[i] - center[i]);
            let g = -(&curv * &dx);
            Ok(Local {
                value: -0.5 * dx.dot(&(&curv * &dx)),
                grad: g,
                curv: curv.clone(),
            })
        }
    }

    fn settings() -> AscentSettings {
        AscentSettings {
            max_iter: 100,
            score_tol: 1e-10,
            step_tol: 1e-12,
        }
    }

    #[test]
    fn quadratic_in_one_step() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = ascend(quad(vec![0.3, -0.2], c), &[1.0, 1.0], &[-5.0; 2], &[5.0; 2], settings()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        assert!((r.x[0] - 0.3).abs() < 1e-12 && (r.x[1] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn maximum_outside_box_lands_on_bound() {
        let c = DMatrix::identity(2, 2);
        let r = ascend(quad(vec![3.0, 0.5], c), &[0.0, 0.0], &[0.0; 2], &[1.0; 2], settings()).unwrap();
        assert!(r.converged);
        assert_eq!(r.x[0], 1.0);
        assert!((r.x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn indefinite_curvature_still_ascends() {
        // f = -x^4 + x^2 has a local minimum at 0; start near it
        let eval = |x: &[f64], _| {
            let v = x[0];
            Ok(Local {
                value: -v.powi(4) + v * v,
                grad: DVector::from_vec(vec![-4.0 * v.powi(3) + 2.0 * v]),
                curv: DMatrix::from_element(1, 1, 12.0 * v * v - 2.0),
            })
        };
        let r = ascend(eval, &[0.01], &[-2.0], &[2.0], settings()).unwrap();
        assert!(r.converged);
        assert!((r.x[0].abs() - 0.5f64.sqrt()).abs() < 1e-8);
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn rejected_region_is_avoided() {
        // objective undefined for x < 0.5
        let eval = |x: &[f64], _| {
            if x[0] < 0.5 {
                return Err(Error::NonFiniteObjective);
            }
            Ok(Local {
                value: -(x[0] - 0.4) * (x[0] - 0.4),
                grad: DVector::from_vec(vec![-2.0 * (x[0] - 0.4)]),
                curv: DMatrix::from_element(1, 1, 2.0),
            })
        };
        let r = ascend(eval, &[2.0], &[-5.0], &[5.0], settings()).unwrap();
        assert!(r.x[0] >= 0.5 && r.x[0] < 0.51);
        assert!(!r.converged);
    }
}
