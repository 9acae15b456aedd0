use std::time::Instant;

use super::{grid_between, step_end, Method, SimConfig, Waveform};
use crate::error::{Error, Result};
use crate::mna::{dc_analysis, MnaSystem};
use crate::phi::DenseStepper;
use crate::sparse::sparse_lu;

/// Fixed-step trapezoidal rule with one factorization of `C/h + G/2`.
pub fn trapezoidal_transient(sys: &MnaSystem, cfg: &SimConfig) -> Result<Waveform> {
    cfg.validate()?;
    let wall = Instant::now();
    let h = cfg.tr_h;
    let steps = (cfg.t_stop / h).round();
    if steps < 1.0 || (steps * h - cfg.t_stop).abs() > 1e-9 * cfg.t_stop {
        return Err(Error::InvalidConfig(format!(
            "stop time {} is not a whole number of trapezoidal steps {h}",
            cfg.t_stop
        )));
    }
    let steps = steps as usize;
    let mut wave = Waveform::new(sys, Method::Tr);
    let rows = sys.probe_rows().to_vec();

    let clock = Instant::now();
    let mut x = dc_analysis(sys, &sys.eval_u(0.0))?;
    wave.stats.dc_seconds = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let lhs = sys.c.add_scaled(1.0 / h, &sys.g, 0.5)?;
    let lu = sparse_lu(&lhs)?;
    wave.stats.factorizations = 1;
    wave.stats.lu_seconds = clock.elapsed().as_secs_f64();
    let rhs_mat = sys.c.add_scaled(1.0 / h, &sys.g, -0.5)?;

    wave.push(&rows, 0.0, &x);
    let mut b_prev = sys.eval_b(0.0);
    for k in 1..=steps {
        let t = if k == steps { cfg.t_stop } else { k as f64 * h };
        let b_next = sys.eval_b(t);
        let mut rhs = rhs_mat.mul_vec(&x)?;
        for ((r, b0), b1) in rhs.iter_mut().zip(&b_prev).zip(&b_next) {
            *r += 0.5 * (b0 + b1);
        }
        x = lu.solve(&rhs)?;
        wave.stats.substitutions += 1;
        wave.stats.steps += 1;
        wave.push(&rows, t, &x);
        b_prev = b_next;
    }
    wave.stats.wall_seconds = wall.elapsed().as_secs_f64();
    Ok(wave)
}

/// Dense exact stepping for small systems. Steps end on every output
/// instant and every source breakpoint, so each step sees an affine input.
pub fn oracle_transient(sys: &MnaSystem, cfg: &SimConfig) -> Result<Waveform> {
    cfg.validate()?;
    let wall = Instant::now();
    let mut stepper = DenseStepper::new(sys)?;
    let mut wave = Waveform::new(sys, Method::Oracle);
    let rows = sys.probe_rows().to_vec();

    let clock = Instant::now();
    let mut x = dc_analysis(sys, &sys.eval_u(0.0))?;
    wave.stats.dc_seconds = clock.elapsed().as_secs_f64();

    let dt = cfg.output_dt.unwrap_or(cfg.h_max).min(cfg.h_max);
    wave.push(&rows, 0.0, &x);
    let mut t = 0.0;
    let mut b_t = sys.eval_b(0.0);
    while t < cfg.t_stop {
        let mut end = step_end(sys.pwl_sources(), t, cfg.h_max, cfg.t_stop);
        if let Some(&s) = grid_between(Some(dt), t, end).first() {
            end = s;
        }
        let b_end = sys.eval_b(end);
        x = stepper.step(&x, &b_t, &b_end, end - t)?;
        wave.stats.steps += 1;
        wave.push(&rows, end, &x);
        t = end;
        b_t = b_end;
    }
    wave.stats.wall_seconds = wall.elapsed().as_secs_f64();
    Ok(wave)
}
