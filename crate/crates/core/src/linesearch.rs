//! Strong-Wolfe line search in the More-Thuente bracket/zoom style, shared
//! by the NCG and PNCG solvers. Cubic interpolation with a bisection
//! safeguard; the bracketing phase doubles the trial step.

use crate::error::{CpdError, Result};

/// Tolerances and budget for one search. Defaults: c1 = 1e-4, c2 = 1e-2,
/// unit initial step, at most 20 evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    pub c1: f64,
    pub c2: f64,
    pub alpha0: f64,
    pub max_iters: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 1e-2,
            alpha0: 1.0,
            max_iters: 20,
        }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(CpdError::InvalidParameter(format!(
                "need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(CpdError::InvalidParameter(format!(
                "initial step must be positive, got {}",
                self.alpha0
            )));
        }
        if self.max_iters == 0 {
            return Err(CpdError::InvalidParameter(
                "line search needs at least one evaluation".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchStatus {
    /// Both strong Wolfe conditions hold at the returned step.
    Success,
    /// Budget ran out; the returned step is the best decrease found.
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub status: LineSearchStatus,
    /// Number of phi evaluations performed.
    pub evals: usize,
    /// phi(alpha) at the returned step.
    pub f: f64,
    /// phi'(alpha) at the returned step.
    pub dphi: f64,
}

#[derive(Clone, Copy)]
struct Trial {
    a: f64,
    f: f64,
    d: f64,
}

/// Finds a step satisfying the strong Wolfe conditions along a ray.
/// `phi` evaluates (value, derivative) at a trial step; `phi0`/`dphi0`
/// are the values at step zero. Requires `dphi0 < 0`.
pub fn strong_wolfe_search<F>(
    mut phi: F,
    phi0: f64,
    dphi0: f64,
    params: &LineSearchParams,
) -> Result<LineSearchResult>
where
    F: FnMut(f64) -> (f64, f64),
{
    params.validate()?;
    if dphi0 >= 0.0 {
        return Err(CpdError::NotDescent(dphi0));
    }

    let mut evals = 0usize;
    let mut best: Option<Trial> = None;
    let mut eval = |a: f64, evals: &mut usize, best: &mut Option<Trial>| -> Trial {
        let (f, d) = phi(a);
        *evals += 1;
        let t = Trial { a, f, d };
        if f < phi0 && best.map_or(true, |b| f < b.f) {
            *best = Some(t);
        }
        t
    };

    let wolfe = |t: &Trial| -> bool {
        t.f <= phi0 + params.c1 * t.a * dphi0 && t.d.abs() <= params.c2 * dphi0.abs()
    };
    let finish = |t: Trial, status: LineSearchStatus, evals: usize| LineSearchResult {
        alpha: t.a,
        status,
        evals,
        f: t.f,
        dphi: t.d,
    };
    let exhausted = |best: Option<Trial>, evals: usize| -> Result<LineSearchResult> {
        match best {
            Some(t) => Ok(finish(t, LineSearchStatus::BudgetExhausted, evals)),
            None => Err(CpdError::NoDecrease),
        }
    };

    // Bracketing phase: expand by factor 2 until the minimizer is bracketed
    // or the curvature condition is met outright.
    let mut prev = Trial {
        a: 0.0,
        f: phi0,
        d: dphi0,
    };
    let mut alpha = params.alpha0;
    let mut bracket: Option<(Trial, Trial)> = None;
    let mut first = true;
    while evals < params.max_iters {
        let cur = eval(alpha, &mut evals, &mut best);
        if !cur.f.is_finite() {
            // Overshot into bad territory; treat as an upper bracket end.
            bracket = Some((prev, cur));
            break;
        }
        if cur.f > phi0 + params.c1 * cur.a * dphi0 || (!first && cur.f >= prev.f) {
            bracket = Some((prev, cur));
            break;
        }
        if cur.d.abs() <= params.c2 * dphi0.abs() {
            return Ok(finish(cur, LineSearchStatus::Success, evals));
        }
        if cur.d >= 0.0 {
            bracket = Some((cur, prev));
            break;
        }
        prev = cur;
        alpha *= 2.0;
        first = false;
    }

    let (mut lo, mut hi) = match bracket {
        Some(b) => b,
        None => return exhausted(best, evals),
    };

    // Zoom phase: lo always satisfies sufficient decrease with the lower
    // function value; the Wolfe point lies between lo and hi.
    while evals < params.max_iters {
        let a_j = interpolate(&lo, &hi);
        let cur = eval(a_j, &mut evals, &mut best);
        if !cur.f.is_finite() || cur.f > phi0 + params.c1 * cur.a * dphi0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if wolfe(&cur) {
                return Ok(finish(cur, LineSearchStatus::Success, evals));
            }
            if cur.d * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
        if (hi.a - lo.a).abs() < 1e-16 * lo.a.abs().max(1.0) {
            break;
        }
    }
    exhausted(best, evals)
}

/// Cubic Hermite minimizer of the bracket, falling back to bisection when
/// the cubic is complex, lands outside, or hugs an endpoint.
fn interpolate(lo: &Trial, hi: &Trial) -> f64 {
    let (a, b) = if lo.a < hi.a { (lo, hi) } else { (hi, lo) };
    let width = b.a - a.a;
    let mid = 0.5 * (a.a + b.a);
    if width <= 0.0 || !width.is_finite() {
        return mid;
    }
    if !a.f.is_finite() || !b.f.is_finite() || !a.d.is_finite() || !b.d.is_finite() {
        return mid;
    }
    let d1 = a.d + b.d - 3.0 * (a.f - b.f) / (a.a - b.a);
    let disc = d1 * d1 - a.d * b.d;
    if disc < 0.0 {
        return mid;
    }
    let d2 = disc.sqrt();
    let cand = b.a - (b.a - a.a) * (b.d + d2 - d1) / (b.d - a.d + 2.0 * d2);
    if !cand.is_finite() {
        return mid;
    }
    let margin = 0.1 * width;
    if cand < a.a + margin || cand > b.a - margin {
        mid
    } else {
        cand
    }
}
