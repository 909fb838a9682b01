//! Derivative-free minimization: Nelder-Mead with dimension-adaptive
//! coefficients, a coordinate-wise golden-section polish, and a safeguarded
//! Newton refinement on finite differences.

use std::cmp::Ordering;
use std::ops::Neg;

use nalgebra::{DMatrix, DVector};

const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop once every vertex lies within this sup-norm distance of the best.
    pub xtol: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn by_value(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> Ordering {
    // NaN sorts last alongside +inf
    match (a.1.is_nan(), b.1.is_nan()) {
        (false, false) => a.1.total_cmp(&b.1),
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (true, true) => Ordering::Equal,
    }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

fn affine(base: &[f64], toward: &[f64], t: f64) -> Vec<f64> {
    base.iter().zip(toward).map(|(b, d)| b + t * (d - b)).collect()
}

/// Minimizes `f` from `x0`, building the initial simplex by stepping
/// `steps[i]` along each axis.
pub fn nelder_mead<F>(f: &mut F, x0: &[f64], steps: &[f64], opts: SimplexOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let nf = n as f64;
    // Gao & Han adaptive parameters.
    let (rho, chi, psi, sigma) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = f(&x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(by_value);
        if diameter(&simplex) < opts.xtol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / nf)
            .collect();
        let (worst_x, worst_f) = simplex[n].clone();
        let best_f = simplex[0].1;
        let second_worst_f = simplex[n - 1].1;

        let reflected = affine(&centroid, &worst_x, -rho);
        let fr = f(&reflected);
        if fr < best_f {
            let expanded = affine(&centroid, &worst_x, -rho * chi);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < second_worst_f {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst_f {
            let x = affine(&centroid, &worst_x, -rho * psi);
            let v = f(&x);
            (x, v)
        } else {
            let x = affine(&centroid, &worst_x, psi);
            let v = f(&x);
            (x, v)
        };
        if fc < fr.min(worst_f) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = affine(&best, &vertex.0, sigma);
            let v = f(&x);
            *vertex = (x, v);
        }
    }
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        iterations,
        converged,
    }
}

/// Golden-section search on `[lo, hi]` for a unimodal `g`; returns the
/// abscissa and value of the best point evaluated.
fn golden_section<G>(g: &mut G, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    G: FnMut(f64) -> f64,
{
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = g(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Line-minimizes along each coordinate in turn, repeating full sweeps while
/// any coordinate still improves. Returns the polished point and value.
pub fn coordinate_polish<F>(f: &mut F, x: &mut [f64], mut value: f64, tol: f64, max_sweeps: usize) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    for _ in 0..max_sweeps {
        let start = value;
        for i in 0..x.len() {
            let origin = x[i];
            let mut line = |t: f64| {
                let mut probe = x.to_vec();
                probe[i] = origin + t;
                f(&probe)
            };
            let step = 1e-3 * origin.abs().max(1.0);
            let (fp, fm) = (line(step), line(-step));
            let (lo, hi) = if fp >= value && fm >= value {
                (-step, step)
            } else {
                // walk downhill until the function turns up again
                let dir = if fp < fm { 1.0 } else { -1.0 };
                let mut prev = 0.0;
                let mut t = step;
                let mut ft = fp.min(fm);
                loop {
                    let next = 2.0 * t;
                    let fnext = line(dir * next);
                    if !(fnext < ft) || next > 1e3 {
                        break;
                    }
                    prev = t;
                    t = next;
                    ft = fnext;
                }
                let far = 2.0 * t;
                if dir > 0.0 {
                    (prev, far)
                } else {
                    (-far, -prev)
                }
            };
            let (t, ft) = golden_section(&mut line, lo, hi, tol);
            if ft < value {
                x[i] = origin + t;
                value = ft;
            }
        }
        if !(value < start) {
            break;
        }
    }
    value
}

fn central_gradient<F>(f: &mut F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn central_hessian<F>(f: &mut F, x: &[f64], h: f64) -> DMatrix<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x.len();
    let mut out = DMatrix::zeros(n, n);
    let mut probe = x.to_vec();
    let mut at = |probe: &mut Vec<f64>, i: usize, si: f64, j: usize, sj: f64| {
        probe[i] += si * h;
        probe[j] += sj * h;
        let v = f(probe);
        probe[i] = x[i];
        probe[j] = x[j];
        v
    };
    for i in 0..n {
        for j in i..n {
            let v =
                (at(&mut probe, i, 1.0, j, 1.0) - at(&mut probe, i, 1.0, j, -1.0) - at(&mut probe, i, -1.0, j, 1.0)
                    + at(&mut probe, i, -1.0, j, -1.0))
                    / (4.0 * h * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(a.abs()))
}

/// Newton steps on finite-difference derivatives. A step is halved until it
/// shrinks the gradient without raising `f` beyond rounding level. Stops when the Hessian is not positive definite,
/// when no halving helps, or when the gradient falls below `gtol`.
pub fn newton_refine<F>(f: &mut F, x: &mut [f64], mut value: f64, gtol: f64, max_steps: usize) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    for _ in 0..max_steps {
        let g = central_gradient(f, x, 1e-5);
        let gnorm = sup_norm(&g);
        if gnorm < gtol {
            break;
        }
        let Some(chol) = central_hessian(f, x, 1e-4).cholesky() else {
            break;
        };
        let step = chol.solve(&DVector::from_vec(g)).neg();
        let slack = 1e-13 * value.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let ft = f(&trial);
            if ft <= value + slack && sup_norm(&central_gradient(f, &trial, 1e-5)) < gnorm {
                x.copy_from_slice(&trial);
                value = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    value
}
