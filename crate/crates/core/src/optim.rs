//! Derivative-free minimizers: Nelder–Mead simplex search and Brent's
//! one-dimensional method with a downhill bracketing phase.
//!
//! Objectives may return `+inf` for infeasible points; both methods treat it
//! as "worse than anything finite" and keep going.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of objective values across the simplex falls
    /// below `ftol * (1 + |f_best|)`.
    pub ftol: f64,
    /// Fresh-simplex restarts after convergence; each must improve by more
    /// than the tolerance to trigger another.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            ftol: 1e-11,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
    /// Best value after each iteration; never increases.
    pub trace: Vec<f64>,
}

/// Minimizes `f` starting from `x0` with an axis-aligned initial simplex of
/// edge lengths `steps`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return Minimum {
            x: vec![],
            f: v,
            evals,
            converged: true,
            trace: vec![v],
        };
    }

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    let mut trace = vec![best_f];
    let mut converged = false;
    let mut scale = 1.0;

    for round in 0..=opts.restarts {
        let start_f = best_f;
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut values = Vec::with_capacity(n + 1);
        simplex.push(best_x.clone());
        values.push(best_f);
        for i in 0..n {
            let mut p = best_x.clone();
            p[i] += steps[i] * scale;
            values.push(eval(&p, &mut evals));
            simplex.push(p);
        }
        converged = false;
        let mut order: Vec<usize> = (0..=n).collect();
        while evals < opts.max_evals {
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let (lo, hi, second) = (order[0], order[n], order[n - 1]);
            trace.push(values[lo]);
            let spread = values[hi] - values[lo];
            if values[lo].is_finite() && spread.is_finite() && spread <= opts.ftol * (1.0 + values[lo].abs()) {
                converged = true;
                break;
            }
            let mut centroid = vec![0.0; n];
            for &i in &order[..n] {
                for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                    *c += v / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[hi])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(1.0);
            let fr = eval(&xr, &mut evals);
            if fr < values[lo] {
                let xe = along(2.0);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    simplex[hi] = xe;
                    values[hi] = fe;
                } else {
                    simplex[hi] = xr;
                    values[hi] = fr;
                }
            } else if fr < values[second] {
                simplex[hi] = xr;
                values[hi] = fr;
            } else {
                let (xc, fc) = if fr < values[hi] {
                    let xc = along(0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(-0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < values[hi].min(fr) {
                    simplex[hi] = xc;
                    values[hi] = fc;
                } else {
                    let anchor = simplex[lo].clone();
                    for i in 0..=n {
                        if i == lo {
                            continue;
                        }
                        for (p, a) in simplex[i].iter_mut().zip(&anchor) {
                            *p = a + 0.5 * (*p - a);
                        }
                        values[i] = eval(&simplex[i], &mut evals);
                    }
                }
            }
        }
        let lo = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        if values[lo] <= best_f {
            best_f = values[lo];
            best_x = simplex[lo].clone();
        }
        trace.push(best_f);
        let improved = start_f - best_f > opts.ftol * (1.0 + best_f.abs());
        if !converged || (round > 0 && !improved) {
            break;
        }
        scale *= 0.25;
    }
    Minimum {
        x: best_x,
        f: best_f,
        evals,
        converged,
        trace,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Minimum1d {
    pub x: f64,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` on the real line: walks downhill from `x0` with growing
/// steps until a bracket is found, then refines with Brent's method.
pub fn minimize_1d<F>(mut f: F, x0: f64, step: f64, xtol: f64, max_evals: usize) -> Minimum1d
where
    F: FnMut(f64) -> f64,
{
    const GOLD: f64 = 1.618_033_988_749_895;
    let mut evals = 0usize;
    let mut g = |x: f64, evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut a = x0;
    let mut fa = g(a, &mut evals);
    let mut b = x0 + step;
    let mut fb = g(b, &mut evals);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLD * (b - a);
    let mut fc = g(c, &mut evals);
    while fc < fb {
        if evals >= max_evals {
            return Minimum1d { x: c, f: fc, evals, converged: false };
        }
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        c = b + GOLD * (b - a);
        fc = g(c, &mut evals);
    }
    let _ = fa;
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };

    // Brent's method on [lo, hi] with interior best point b
    const CGOLD: f64 = 0.381_966_011_250_105;
    let (mut x, mut w, mut v) = (b, b, b);
    let (mut fx, mut fw, mut fv) = (fb, fb, fb);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    while evals < max_evals {
        let xm = 0.5 * (lo + hi);
        let tol1 = xtol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (hi - lo) {
            return Minimum1d { x, f: fx, evals, converged: true };
        }
        let mut golden = true;
        if e.abs() > tol1 && fx.is_finite() && fw.is_finite() && fv.is_finite() {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (lo - x) || p >= q * (hi - x)) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { lo - x } else { hi - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = g(u, &mut evals);
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum1d { x, f: fx, evals, converged: false }
}
