//! Nelder–Mead minimization of the variational energy over (A, D, α).
//!
//! The search runs at reduced precision on a coarser grid; the winner is
//! re-evaluated once at full precision. Objective values are differences
//! from the energy at the seed so that f64 comparisons keep their resolution
//! even when E itself is large.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{default_cutoff, Parity, TrialParams};
use crate::num::{serde_big, BigReal, Precision};
use crate::pt::rayleigh_energy;
use crate::quad::{GridSpec, PanelGrid};
use crate::trial::TrialFunction;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    /// Simplex diameter, relative to max(1, |parameter|), at which to stop.
    pub tol: f64,
    pub max_evals: usize,
    pub search_precision: Precision,
    pub search_grid: GridSpec,
    pub final_precision: Precision,
    pub final_grid: GridSpec,
    /// Restart once from a simplex of 10% steps around the first result.
    pub restart: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            tol: 1e-7,
            max_evals: 2000,
            search_precision: Precision::SEARCH,
            search_grid: GridSpec::SEARCH,
            final_precision: Precision::DEFAULT,
            final_grid: GridSpec::DEFAULT,
            restart: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best: TrialParams,
    /// Variational energy of `best` at the final precision.
    #[serde(with = "serde_big")]
    pub energy: BigReal,
    #[serde(with = "serde_big")]
    pub err_est: BigReal,
    pub iterations: usize,
    pub evaluations: usize,
    pub simplex_diameter: f64,
    pub converged: bool,
    /// Best objective (E − E_seed at search precision) after each iteration.
    pub history: Vec<f64>,
}

/// Outcome of a bare Nelder–Mead run.
#[derive(Clone, Debug)]
pub struct Simplex {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub diameter: f64,
    pub converged: bool,
    pub history: Vec<f64>,
}

fn diameter(pts: &[Vec<f64>]) -> f64 {
    let best = &pts[0];
    pts[1..]
        .iter()
        .flat_map(|p| p.iter().zip(best).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)))
        .fold(0.0, f64::max)
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½, shrink ½).
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], tol: f64, max_evals: usize) -> Result<Simplex>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    if steps.len() != n || n == 0 {
        return Err(Error::InvalidParam("step vector must match the start point".into()));
    }
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        pts.push(p);
    }
    let mut vals = Vec::with_capacity(n + 1);
    for p in &pts {
        vals.push(f(p)?);
    }
    let mut evals = n + 1;
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        history.push(vals[0]);
        let diam = diameter(&pts);
        if diam <= tol || evals >= max_evals {
            return Ok(Simplex {
                x: pts[0].clone(),
                f: vals[0],
                iterations,
                evaluations: evals,
                diameter: diam,
                converged: diam <= tol,
                history,
            });
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|d| pts[..n].iter().map(|p| p[d]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = f(&xr)?;
        evals += 1;
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = f(&xe)?;
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(0.5);
            let fc = f(&xc)?;
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = f(&xc)?;
            (xc, fc)
        };
        evals += 1;
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = pts[i]
                .iter()
                .zip(&pts[0])
                .map(|(p, b)| b + 0.5 * (p - b))
                .collect();
            vals[i] = f(&shrunk)?;
            pts[i] = shrunk;
            evals += 1;
        }
    }
}

/// Default starting point when no neighbouring optimum is known.
pub fn cold_seed(a: f64, parity: Parity) -> TrialParams {
    let depth = (-a).max(0.0);
    TrialParams {
        big_a: -10.0 + 1.6 * a - 0.6 * a * a,
        d: 4.2 + 0.13 * depth,
        alpha: 3.0 + 2.3 * depth,
        parity,
    }
}

fn params_from(x: &[f64], parity: Parity) -> TrialParams {
    TrialParams {
        big_a: x[0],
        d: x[1].abs(),
        alpha: x[2].abs(),
        parity,
    }
}

struct Objective {
    a: f64,
    parity: Parity,
    prec: Precision,
    grid: Arc<PanelGrid>,
    origin: BigReal,
}

impl Objective {
    fn energy(&self, p: TrialParams) -> Result<BigReal> {
        let wrap = |e: Error| Error::Objective {
            a: p.big_a,
            d: p.d,
            alpha: p.alpha,
            source: Box::new(e),
        };
        let tf = TrialFunction::new(self.a, p, self.prec).map_err(wrap)?;
        Ok(rayleigh_energy(&tf, &self.grid).map_err(wrap)?.value)
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        let p = params_from(x, self.parity);
        if p.parity == Parity::Odd && p.alpha == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok((self.energy(p)? - &self.origin).to_f64())
    }
}

fn initial_steps(x: &[f64], frac: f64) -> Vec<f64> {
    x.iter()
        .map(|v| if *v == 0.0 { frac } else { frac * v.abs() })
        .collect()
}

/// Minimizes the variational energy starting from `seed`.
pub fn optimize_with(a: f64, seed: TrialParams, opts: &OptimizeOptions) -> Result<OptimizeResult> {
    seed.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParam(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let sp = opts.search_precision;
    let cutoff = default_cutoff(a, sp);
    let grid = Arc::new(PanelGrid::graded(a, cutoff, opts.search_grid, sp)?);
    let mut obj = Objective {
        a,
        parity: seed.parity,
        prec: sp,
        grid,
        origin: sp.zero(),
    };
    obj.origin = obj.energy(seed)?;

    let x0 = seed.as_vec();
    let mut run = nelder_mead(|x| obj.eval(x), &x0, &initial_steps(&x0, 0.05), opts.tol, opts.max_evals)?;
    if opts.restart {
        let again = nelder_mead(
            |x| obj.eval(x),
            &run.x,
            &initial_steps(&run.x, 0.10),
            opts.tol,
            opts.max_evals,
        )?;
        let mut history = run.history.clone();
        let floor = run.f;
        history.extend(again.history.iter().map(|v| v.min(floor)));
        let evaluations = run.evaluations + again.evaluations;
        let iterations = run.iterations + again.iterations;
        if again.f < run.f {
            run = again;
        }
        run.history = history;
        run.evaluations = evaluations;
        run.iterations = iterations;
    }

    let best = params_from(&run.x, seed.parity);
    let tf = TrialFunction::new(a, best, opts.final_precision)?;
    let fgrid = Arc::new(PanelGrid::graded(
        a,
        default_cutoff(a, opts.final_precision),
        opts.final_grid,
        opts.final_precision,
    )?);
    let q = rayleigh_energy(&tf, &fgrid)?;
    Ok(OptimizeResult {
        best,
        energy: q.value,
        err_est: q.err_est,
        iterations: run.iterations,
        evaluations: run.evaluations,
        simplex_diameter: run.diameter,
        converged: run.converged,
        history: run.history,
    })
}

/// Minimizes with default options and the given simplex tolerance.
pub fn optimize_trial(a: f64, parity: Parity, seed: TrialParams, tol: f64) -> Result<OptimizeResult> {
    if seed.parity != parity {
        return Err(Error::InvalidParam(format!(
            "seed parity {} does not match requested parity {parity}",
            seed.parity
        )));
    }
    let opts = OptimizeOptions {
        tol,
        ..OptimizeOptions::default()
    };
    optimize_with(a, seed, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        let r = nelder_mead(
            |x| Ok((x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2)),
            &[0.0, 0.0],
            &[0.5, 0.5],
            1e-10,
            5000,
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] + 2.0).abs() < 1e-8);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rosenbrock_converges() {
        let r = nelder_mead(
            |x| Ok(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)),
            &[-1.2, 1.0],
            &[0.1, 0.1],
            1e-9,
            10_000,
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn reports_non_convergence() {
        let r = nelder_mead(|x| Ok(x[0] * x[0]), &[5.0], &[1.0], 1e-14, 10).unwrap();
        assert!(!r.converged);
        assert!(r.evaluations >= 10);
    }

    #[test]
    fn objective_errors_propagate() {
        let r = nelder_mead(
            |x| {
                if x[0] > 0.5 {
                    Err(Error::Domain("boom".into()))
                } else {
                    Ok(x[0])
                }
            },
            &[0.0],
            &[1.0],
            1e-6,
            100,
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_parity_mismatch() {
        let seed = cold_seed(1.0, Parity::Even);
        assert!(optimize_trial(1.0, Parity::Odd, seed, 1e-6).is_err());
    }

    #[test]
    fn cold_seed_is_valid() {
        for a in [1.0, -1.0, -20.0] {
            for parity in [Parity::Even, Parity::Odd] {
                cold_seed(a, parity).validate().unwrap();
            }
        }
    }
}
