use std::time::Instant;

use nalgebra::DVector;

use super::{grid_between, step_end, Method, SimConfig, StepRecord, Waveform};
use crate::error::{Error, Result};
use crate::krylov::{exact_rho, BlockLuFactors, CInverse, KrylovBasis, Projector, WTilde};
use crate::mna::{dc_analysis, MnaSystem};
use crate::phi::AugmentedSystem;
use crate::tol::MAX_HALVINGS;

/// Adaptive exponential integration.
///
/// One factorization of `C + gamma G` serves every step. Each step grows a
/// rational Krylov basis from `[x; e2]` until the posterior error at
/// `alpha = h / gamma` drops below `(e_tol / t_stop) h`. The basis does not
/// depend on `h`, so when the dimension cap is reached the step is halved
/// and the same basis is re-evaluated. Output instants inside a step reuse
/// the basis with a smaller `alpha`. The elapsed-time state of the
/// augmented system is measured in units of `gamma`, which keeps the
/// bordered operator balanced.
pub fn mexp_transient(sys: &MnaSystem, cfg: &SimConfig) -> Result<Waveform> {
    cfg.validate()?;
    let wall = Instant::now();
    let mut wave = Waveform::new(sys, Method::Mexp);
    let rows = sys.probe_rows().to_vec();
    let n = sys.n();
    let gamma = cfg.gamma;
    let t_stop = cfg.t_stop;

    let clock = Instant::now();
    let mut x = dc_analysis(sys, &sys.eval_u(0.0))?;
    wave.stats.dc_seconds = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mut f = BlockLuFactors::factor(sys, gamma)?;
    wave.stats.factorizations = 1;
    let cinv = if cfg.exact_rho {
        let c = CInverse::new(&sys.c)?;
        wave.stats.factorizations += usize::from(c.is_factored());
        Some(c)
    } else {
        None
    };
    wave.stats.lu_seconds = clock.elapsed().as_secs_f64();

    let budget = cfg.e_tol / t_stop;
    wave.push(&rows, 0.0, &x);
    let mut t = 0.0;
    while t < t_stop {
        let end = step_end(sys.pwl_sources(), t, cfg.h_max, t_stop);
        let mut h = end - t;
        let w = WTilde::from_system(sys, t, h)?.with_time_unit(gamma)?;
        f.set_w(w.clone())?;
        let mut basis = KrylovBasis::new(&AugmentedSystem::start_vector(&x), gamma)?;
        let rho = |b: &KrylovBasis| match &cinv {
            Some(c) => exact_rho(b, sys, c, &w),
            None => Ok(1.0),
        };

        // Best usable projection so far: (projector, rho, error estimate).
        let mut best: Option<(Projector, f64, f64)> = None;
        let mut accepted: Option<Evaluated> = None;
        while basis.m() < cfg.m_max && !basis.is_breakdown() {
            basis.extend(|v| f.solve(sys, v))?;
            wave.stats.substitutions += 1;
            let p = match Projector::new(&basis) {
                Ok(p) => p,
                Err(e) if e.is_projection_failure() => continue,
                Err(e) => return Err(e),
            };
            let r = rho(&basis)?;
            let (e, eval) = step_error(&p, &basis, r, cfg, (t, h), budget * h)?;
            if e.is_finite() && best.as_ref().is_none_or(|b| e <= b.2) {
                best = Some((p, r, e));
            }
            if eval.is_some() {
                accepted = eval;
                break;
            }
        }
        let Some((proj, r, mut err)) = best else {
            return Err(Error::NonConvergence {
                t,
                err: f64::INFINITY,
                m: basis.m(),
            });
        };
        let mut halvings = 0;
        while accepted.is_none() && halvings < MAX_HALVINGS {
            halvings += 1;
            h *= 0.5;
            (err, accepted) = step_error(&proj, &basis, r, cfg, (t, h), budget * h)?;
        }
        let Some(eval) = accepted else {
            return Err(Error::NonConvergence {
                t,
                err,
                m: basis.m(),
            });
        };
        let t_next = if halvings == 0 { end } else { t + h };

        let mut err_interior: f64 = 0.0;
        for (s, y, last) in &eval.inside {
            err_interior = err_interior.max(proj.error_from(*last, r));
            wave.push(&rows, *s, &proj.purified(&basis, y, *last));
        }
        let mut xt = eval.end;
        xt.truncate(n);
        if xt.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        x = xt;
        wave.push(&rows, t_next, &x);

        wave.steps.push(StepRecord {
            t,
            h,
            m: basis.m(),
            m_used: proj.m(),
            err,
            h_next: basis.h_next(),
            halvings,
            err_interior,
        });
        wave.stats.steps += 1;
        wave.stats.record_m(basis.m());
        wave.stats.halvings += halvings;
        wave.stats.err_sum += err;
        t = t_next;
    }
    wave.stats.wall_seconds = wall.elapsed().as_secs_f64();
    Ok(wave)
}

/// Evaluations of an accepted projection: the purified state at the step
/// end and `(s, y, e_m^T H^{-1} y)` at each output instant inside.
struct Evaluated {
    end: Vec<f64>,
    inside: Vec<(f64, DVector<f64>, f64)>,
}

/// Posterior error at the step end (infinity when the projection is
/// unusable), with the evaluations when the step is accepted.
///
/// Once the end estimate is within `limit`, two more checks apply. The
/// elapsed-time tail of the augmented state is known exactly, `(h / gamma,
/// 1)`, and must be reproduced to `e_tol`; this catches a basis so small
/// that all of its Ritz values decay. The estimate is a residual, so at an
/// output instant `t + tau` it is weighted by `tau / h`, the share of the
/// step over which it accumulates. Output samples do not feed later steps
/// and are held to `e_tol` rather than the per-step budget.
fn step_error(
    p: &Projector,
    b: &KrylovBasis,
    rho: f64,
    cfg: &SimConfig,
    (t, h): (f64, f64),
    limit: f64,
) -> Result<(f64, Option<Evaluated>)> {
    let usable = |r: Result<(DVector<f64>, f64)>| match r {
        Ok((y, last)) if last.is_finite() => Ok(Some((y, last))),
        Ok(_) => Ok(None),
        Err(e) if e.is_projection_failure() => Ok(None),
        Err(e) => Err(e),
    };
    let alpha = h / cfg.gamma;
    let Some((y, last)) = usable(p.at(alpha))? else {
        return Ok((f64::INFINITY, None));
    };
    let err = p.error_from(last, rho);
    if !(err <= limit) {
        return Ok((err, None));
    }
    let end = p.purified(b, &y, last);
    let n = end.len() - 2;
    let tail = (end[n] - alpha).abs().max((end[n + 1] - 1.0).abs());
    if !(tail <= cfg.e_tol) {
        return Ok((f64::INFINITY, None));
    }
    let mut inside = Vec::new();
    for s in grid_between(cfg.output_dt, t, t + h) {
        let a = (s - t) / cfg.gamma;
        let Some((y, last)) = usable(p.at(a))? else {
            return Ok((f64::INFINITY, None));
        };
        if !(p.error_from(last, rho) * a / alpha <= cfg.e_tol) {
            return Ok((f64::INFINITY, None));
        }
        inside.push((s, y, last));
    }
    Ok((err, Some(Evaluated { end, inside })))
}
