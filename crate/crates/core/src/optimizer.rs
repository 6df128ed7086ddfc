//! Derivative-free Nelder–Mead simplex minimization with restarts.
//!
//! The second-stage objective is piecewise smooth at best (piecewise linear
//! for CLAD), so no gradient information is used anywhere. Each call to
//! [`nelder_mead`] runs one simplex search from the starting point and then up
//! to `n_restarts` further searches around the incumbent with a step shrunk by
//! `0.5^k`; collapsed simplices on kinked objectives are the usual reason a
//! single search stops short.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexConfig<T: Scalar> {
    /// Initial edge along coordinate `j` is `init_scale * max(1, |x0_j|)`.
    pub init_scale: T,
    pub reflection: T,
    pub expansion: T,
    pub contraction: T,
    pub shrink: T,
    /// Relative tolerance on the spread of function values over the simplex.
    pub f_tol: T,
    /// Absolute tolerance on the spread of vertices.
    pub x_tol: T,
    /// Iteration cap per search; `None` means `500 * dim`.
    pub max_iters: Option<usize>,
    pub n_restarts: usize,
}

impl<T: Scalar> Default for SimplexConfig<T> {
    fn default() -> Self {
        Self {
            init_scale: T::lit(0.1),
            reflection: T::one(),
            expansion: T::lit(2.0),
            contraction: T::lit(0.5),
            shrink: T::lit(0.5),
            f_tol: T::lit(1e-10),
            x_tol: T::lit(1e-8),
            max_iters: None,
            n_restarts: 4,
        }
    }
}

impl<T: Scalar> SimplexConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("simplex config: {what}")));
        if !(self.reflection > T::zero()) {
            return bad("reflection must be > 0");
        }
        if !(self.expansion > T::one()) {
            return bad("expansion must be > 1");
        }
        if !(self.contraction > T::zero() && self.contraction < T::one()) {
            return bad("contraction must lie in (0, 1)");
        }
        if !(self.shrink > T::zero() && self.shrink < T::one()) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.init_scale > T::zero()) {
            return bad("init_scale must be > 0");
        }
        if !(self.f_tol >= T::zero()) || !(self.x_tol >= T::zero()) {
            return bad("tolerances must be non-negative");
        }
        if self.max_iters == Some(0) {
            return bad("max_iters must be positive");
        }
        Ok(())
    }

    pub fn iteration_cap(&self, dim: usize) -> usize {
        self.max_iters.unwrap_or(500 * dim.max(1))
    }
}

/// Outcome of one simplex search inside a (multi-start) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartRecord<T: Scalar> {
    /// Index of the starting point this search descends from.
    pub start: usize,
    /// 0 for the initial search, `k` for the k-th restart.
    pub restart: usize,
    pub x: Vec<T>,
    pub f: T,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult<T: Scalar> {
    pub x_min: Vec<T>,
    pub f_min: T,
    pub iters: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub restart_history: Vec<RestartRecord<T>>,
    /// Starts that errored out, with the error.
    pub failed_starts: Vec<(usize, Error)>,
}

struct Search<T: Scalar> {
    x: Vec<T>,
    f: T,
    iters: usize,
    evaluations: usize,
    converged: bool,
}

fn eval<T: Scalar, F: Fn(&[T]) -> T>(f: &F, x: &[T], evals: &mut usize) -> Result<T> {
    *evals += 1;
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteObjective { point: x.iter().map(|v| v.as_f64()).collect() })
    }
}

fn initial_steps<T: Scalar>(x: &[T], scale: T) -> Vec<T> {
    x.iter().map(|v| scale * v.abs().max(T::one())).collect()
}

fn simplex_search<T: Scalar, F: Fn(&[T]) -> T>(
    f: &F,
    x0: &[T],
    steps: &[T],
    cfg: &SimplexConfig<T>,
    observer: &mut dyn FnMut(T),
) -> Result<Search<T>> {
    let n = x0.len();
    let mut evals = 0;
    let mut verts: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    verts.push((x0.to_vec(), eval(f, x0, &mut evals)?));
    for j in 0..n {
        let mut v = x0.to_vec();
        v[j] += steps[j];
        let fv = eval(f, &v, &mut evals)?;
        verts.push((v, fv));
    }
    let cap = cfg.iteration_cap(n);
    let half = T::lit(0.5);
    let mut converged = false;
    let mut iters = 0;
    let mut centroid = vec![T::zero(); n];

    while iters < cap {
        // stable sort keeps the ordering deterministic under ties
        verts.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite objective values"));
        observer(verts[0].1);

        let f_lo = verts[0].1;
        let f_hi = verts[n].1;
        let f_spread = f_hi - f_lo;
        let f_conv = f_spread <= cfg.f_tol * (f_lo.abs() + f_hi.abs()) * half;
        let mut x_spread = T::zero();
        for (v, _) in &verts[1..] {
            for (a, b) in v.iter().zip(&verts[0].0) {
                x_spread = x_spread.max((*a - *b).abs());
            }
        }
        if f_conv || x_spread <= cfg.x_tol {
            converged = true;
            break;
        }
        iters += 1;

        centroid.iter_mut().for_each(|c| *c = T::zero());
        for (v, _) in &verts[..n] {
            for (c, &a) in centroid.iter_mut().zip(v) {
                *c += a;
            }
        }
        let inv = T::one() / T::from_count(n);
        centroid.iter_mut().for_each(|c| *c *= inv);

        let worst = verts[n].0.clone();
        let along = |t: T| -> Vec<T> {
            centroid.iter().zip(&worst).map(|(&c, &w)| c + t * (c - w)).collect()
        };
        let xr = along(cfg.reflection);
        let fr = eval(f, &xr, &mut evals)?;

        if fr < verts[0].1 {
            let xe = along(cfg.reflection * cfg.expansion);
            let fe = eval(f, &xe, &mut evals)?;
            verts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < verts[n - 1].1 {
            verts[n] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < verts[n].1 {
            let xc = along(cfg.reflection * cfg.contraction);
            let fc = eval(f, &xc, &mut evals)?;
            (xc, fc, fc <= fr)
        } else {
            let xc = along(-cfg.contraction);
            let fc = eval(f, &xc, &mut evals)?;
            (xc, fc, fc < verts[n].1)
        };
        if accept {
            verts[n] = (xc, fc);
            continue;
        }
        let best = verts[0].0.clone();
        for (v, fv) in verts.iter_mut().skip(1) {
            for (a, &b) in v.iter_mut().zip(&best) {
                *a = b + cfg.shrink * (*a - b);
            }
            *fv = eval(f, v, &mut evals)?;
        }
    }
    verts.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite objective values"));
    let (x, fx) = verts.swap_remove(0);
    Ok(Search { x, f: fx, iters, evaluations: evals, converged })
}

fn run_with_restarts<T: Scalar, F: Fn(&[T]) -> T>(
    f: &F,
    x0: &[T],
    cfg: &SimplexConfig<T>,
    start: usize,
    observer: &mut dyn FnMut(T),
) -> Result<OptResult<T>> {
    cfg.validate()?;
    if x0.is_empty() {
        return Err(Error::InvalidParameter("starting point is empty".into()));
    }
    let first = simplex_search(f, x0, &initial_steps(x0, cfg.init_scale), cfg, observer)?;
    let mut history = vec![RestartRecord {
        start,
        restart: 0,
        x: first.x.clone(),
        f: first.f,
        iters: first.iters,
        converged: first.converged,
    }];
    let mut iters = first.iters;
    let mut evaluations = first.evaluations;
    let mut converged = first.converged;
    let mut best = (first.x, first.f);
    let mut factor = T::one();
    for k in 1..=cfg.n_restarts {
        factor *= T::lit(0.5);
        let steps = initial_steps(&best.0, cfg.init_scale * factor);
        let run = simplex_search(f, &best.0, &steps, cfg, observer)?;
        iters += run.iters;
        evaluations += run.evaluations;
        converged = run.converged;
        history.push(RestartRecord {
            start,
            restart: k,
            x: run.x.clone(),
            f: run.f,
            iters: run.iters,
            converged: run.converged,
        });
        if run.f < best.1 {
            best = (run.x, run.f);
        } else {
            break;
        }
    }
    Ok(OptResult {
        x_min: best.0,
        f_min: best.1,
        iters,
        evaluations,
        converged,
        restart_history: history,
        failed_starts: Vec::new(),
    })
}

/// Minimizes `f` from `x0`; deterministic given `(f, x0, cfg)`.
pub fn nelder_mead<T: Scalar, F: Fn(&[T]) -> T>(f: F, x0: &[T], cfg: &SimplexConfig<T>) -> Result<OptResult<T>> {
    run_with_restarts(&f, x0, cfg, 0, &mut |_| {})
}

/// Like [`nelder_mead`], calling `observer` with the best simplex value at
/// every iteration.
pub fn nelder_mead_observed<T: Scalar, F: Fn(&[T]) -> T>(
    f: F,
    x0: &[T],
    cfg: &SimplexConfig<T>,
    observer: &mut dyn FnMut(T),
) -> Result<OptResult<T>> {
    run_with_restarts(&f, x0, cfg, 0, observer)
}

fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}

/// Runs [`nelder_mead`] from every start and keeps the best result.
///
/// Results whose value lies within `f_tol * max(1, |f_best|)` of the best are
/// treated as ties and the one with the smallest Euclidean norm wins. A start
/// that errors is recorded in `failed_starts`; the call only fails when every
/// start does.
pub fn multi_start<T: Scalar, F: Fn(&[T]) -> T>(
    f: F,
    starts: &[Vec<T>],
    cfg: &SimplexConfig<T>,
) -> Result<OptResult<T>> {
    if starts.is_empty() {
        return Err(Error::InvalidParameter("multi_start needs at least one start".into()));
    }
    let mut results = Vec::with_capacity(starts.len());
    let mut failed = Vec::new();
    for (i, s) in starts.iter().enumerate() {
        match run_with_restarts(&f, s, cfg, i, &mut |_| {}) {
            Ok(r) => results.push(r),
            Err(e) => failed.push((i, e)),
        }
    }
    if results.is_empty() {
        let (_, last) = failed.pop().expect("at least one start");
        return Err(Error::AllStartsFailed { attempts: starts.len(), last: Box::new(last) });
    }
    let f_best = results.iter().map(|r| r.f_min).fold(results[0].f_min, |a, b| a.min(b));
    let tie = cfg.f_tol * f_best.abs().max(T::one());
    let mut winner = 0;
    for (i, r) in results.iter().enumerate() {
        if r.f_min > f_best + tie {
            continue;
        }
        let w = &results[winner];
        if w.f_min > f_best + tie || norm(&r.x_min) < norm(&w.x_min) {
            winner = i;
        }
    }
    let iters = results.iter().map(|r| r.iters).sum();
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    let history = results.iter().flat_map(|r| r.restart_history.iter().cloned()).collect();
    let best = results.swap_remove(winner);
    Ok(OptResult {
        x_min: best.x_min,
        f_min: best.f_min,
        iters,
        evaluations,
        converged: best.converged,
        restart_history: history,
        failed_starts: failed,
    })
}
