//! Independent eigenvalue oracle: inward shooting with a Taylor-series
//! integrator in BigReal.
//!
//! The parity-reduced problem lives on [0, X]. At X the solution is seeded
//! from the large-x form of the logarithmic derivative; integrating inward
//! only ever follows the growing (physical) branch, so the spurious branch
//! introduced by the boundary condition dies out. The energy is fixed by the
//! condition at x = 0 (ψ′ = 0 even, ψ = 0 odd), located by bisection on the
//! Prüfer angle and then polished with the Illinois method.
//!
//! The integrator expands ψ about each point in the exact local polynomial
//! form of the potential,
//!
//! ```text
//! (n+2)(n+1) c_{n+2} = Σ_{j=0}^{4} w_j c_{n−j},
//! w₀ = V − E,  w₁ = V′,  w₂ = V″/2,  w₃ = V‴/6,  w₄ = V⁗/24,
//! ```
//!
//! and sums the series until it has converged to the working precision, so
//! there is no truncation order to speak of.

use std::f64::consts::{FRAC_PI_2, LN_10, PI};
use std::sync::Arc;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{default_cutoff, Parity};
use crate::num::{to_sci, BigReal, Precision};
use crate::quad::{CurveTable, GridSpec, PanelGrid};
use crate::trial::TrialFunction;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOptions {
    pub precision: Precision,
    /// Taylor step is `step_factor / k(x)` with k the local wavenumber.
    pub step_factor: f64,
    /// Outer boundary; defaults to where e^{-2φ} has dropped past the precision.
    pub cutoff: Option<f64>,
    pub grid: GridSpec,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            precision: Precision::DEFAULT,
            step_factor: 1.0,
            cutoff: None,
            grid: GridSpec::DEFAULT,
        }
    }
}

impl ReferenceOptions {
    pub fn with_precision(precision: Precision) -> Self {
        ReferenceOptions {
            precision,
            ..Self::default()
        }
    }
}

/// −d²/dx² + m2·x² + g·x⁴.
struct Quartic {
    m2: f64,
    g: f64,
    c2: BigReal,
    c4: BigReal,
    prec: Precision,
}

struct Shot {
    psi: BigReal,
    dpsi: BigReal,
    theta: f64,
    /// Sign changes of ψ strictly inside (0, X).
    nodes: usize,
    /// (ψ normalized, binary exponent) at each requested sample point.
    samples: Vec<(BigReal, i64)>,
}

impl Quartic {
    fn new(m2: f64, g: f64, prec: Precision) -> Result<Self> {
        if !m2.is_finite() {
            return Err(Error::Domain(format!("quadratic coupling must be finite, got {m2}")));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Domain(format!("quartic coupling must be positive, got {g}")));
        }
        Ok(Quartic {
            m2,
            g,
            c2: prec.real(m2),
            c4: prec.real(g),
            prec,
        })
    }

    fn v_f64(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.m2 * x2 + self.g * x2 * x2
    }

    fn v_min(&self) -> f64 {
        if self.m2 >= 0.0 {
            0.0
        } else {
            -self.m2 * self.m2 / (4.0 * self.g)
        }
    }

    fn well(&self) -> f64 {
        (-self.m2 / (2.0 * self.g)).max(0.0).sqrt()
    }

    /// ∫ √(V − V_min) from the well to x, by the midpoint rule.
    fn action(&self, x: f64) -> f64 {
        let start = self.well();
        if x <= start {
            return 0.0;
        }
        let n = 2000;
        let h = (x - start) / n as f64;
        let vmin = self.v_min();
        (0..n)
            .map(|i| (self.v_f64(start + (i as f64 + 0.5) * h) - vmin).max(0.0).sqrt() * h)
            .sum()
    }

    /// Point beyond the well where e^{-2S} has dropped by 10^-decades.
    fn cutoff(&self, decades: f64) -> f64 {
        let target = decades * LN_10 / 2.0;
        let start = self.well();
        let (mut lo, mut hi) = (start, start + 1.0);
        while self.action(hi) < target {
            hi = start + 2.0 * (hi - start);
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.action(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// ψ′/ψ at X from the first two WKB orders, −√(V − E) − V′/(4(V − E)).
    /// In the quartic regime this reproduces the asymptotic expansion of the
    /// logarithmic derivative through the 1/x² term.
    fn boundary_slope(&self, x: &BigReal, e: &BigReal) -> BigReal {
        let p = self.prec.bits();
        let x2 = Float::with_val(p, x.square_ref());
        let v = Float::with_val(p, &self.c2 * &x2) + Float::with_val(p, &self.c4 * Float::with_val(p, x2.square_ref()));
        let dv = (Float::with_val(p, &self.c2 * 2u32) + Float::with_val(p, &self.c4 * &x2) * 4u32) * x;
        let k2 = v - e;
        let k = Float::with_val(p, k2.sqrt_ref());
        -(k + dv / (k2 * 4u32))
    }

    fn wavenumber(&self, x: f64, e: f64) -> f64 {
        let dv = 2.0 * self.m2 * x + 4.0 * self.g * x * x * x;
        (self.v_f64(x) - e).abs().sqrt() + dv.abs().cbrt() + 1.0
    }

    /// One Taylor step of signed length `s` from `x0`.
    fn step(&self, x0: &BigReal, e: &BigReal, s: &BigReal, psi: &mut BigReal, dpsi: &mut BigReal, buf: &mut Vec<BigReal>) {
        let p = self.prec.bits();
        let x2 = Float::with_val(p, x0.square_ref());
        let x3 = Float::with_val(p, &x2 * x0);
        let x4 = Float::with_val(p, x2.square_ref());
        let w = [
            Float::with_val(p, &self.c2 * &x2) + Float::with_val(p, &self.c4 * &x4) - e,
            Float::with_val(p, &self.c2 * x0) * 2u32 + Float::with_val(p, &self.c4 * &x3) * 4u32,
            Float::with_val(p, &self.c4 * &x2) * 6u32 + &self.c2,
            Float::with_val(p, &self.c4 * x0) * 4u32,
            self.c4.clone(),
        ];
        // Scaled coefficients d_n = c_n s^n, weights w_j s^{j+2}.
        let mut sp = Float::with_val(p, s.square_ref());
        let mut ws = Vec::with_capacity(5);
        for wj in w {
            ws.push(wj * &sp);
            sp *= s;
        }
        buf.clear();
        buf.push(psi.clone());
        buf.push(Float::with_val(p, &*dpsi * s));
        let mut sum = Float::with_val(p, &buf[0] + &buf[1]);
        let mut dsum = buf[1].clone();
        let scale = Float::with_val(p, buf[0].abs_ref()) + Float::with_val(p, buf[1].abs_ref());
        let tol = scale >> (p as i32 + 8);
        let mut small = 0;
        let mut n = 0usize;
        while small < 4 && n < 4000 {
            let mut acc = self.prec.zero();
            for (j, wj) in ws.iter().enumerate() {
                if j > n {
                    break;
                }
                acc += Float::with_val(p, wj * &buf[n - j]);
            }
            let next = acc / ((n + 2) * (n + 1)) as u32;
            let term_d = Float::with_val(p, &next * (n + 2) as u32);
            if Float::with_val(p, term_d.abs_ref()) <= tol {
                small += 1;
            } else {
                small = 0;
            }
            sum += &next;
            dsum += term_d;
            buf.push(next);
            n += 1;
        }
        *psi = sum;
        *dpsi = dsum / s;
    }

    /// Integrates from `x_max` to 0 at energy `e`, optionally recording ψ at
    /// the descending sample points `samples`.
    fn shoot(&self, e: &BigReal, x_max: f64, factor: f64, samples: &[BigReal]) -> Shot {
        let p = self.prec.bits();
        let ef = e.to_f64();
        let mut x = self.prec.real(x_max);
        let mut psi = self.prec.one();
        let mut dpsi = self.boundary_slope(&x, e);
        let mut exponent: i64 = 0;
        let mut theta = (1.0f64).atan2(dpsi.to_f64());
        let mut nodes = 0;
        let mut recorded = Vec::with_capacity(samples.len());
        let mut next = 0;
        let mut buf = Vec::new();
        let zero = self.prec.zero();
        while x > 0 {
            let xf = x.to_f64();
            let h = factor / self.wavenumber(xf, ef);
            let mut target = self.prec.real((xf - h).max(0.0));
            let hit = next < samples.len() && samples[next] >= target;
            if hit {
                target = samples[next].clone();
            }
            let s = Float::with_val(p, &target - &x);
            if !s.is_zero() {
                let before = psi.is_sign_negative();
                self.step(&x, e, &s, &mut psi, &mut dpsi, &mut buf);
                if target > zero && !psi.is_zero() && psi.is_sign_negative() != before {
                    nodes += 1;
                }
                let shift = psi.get_exp().unwrap_or(i32::MIN).max(dpsi.get_exp().unwrap_or(i32::MIN));
                if shift != i32::MIN {
                    psi >>= shift;
                    dpsi >>= shift;
                    exponent += shift as i64;
                }
                let t = psi.to_f64().atan2(dpsi.to_f64());
                let mut delta = t - theta.rem_euclid(2.0 * PI);
                delta = (delta + PI).rem_euclid(2.0 * PI) - PI;
                theta += delta;
            }
            x = target;
            if hit {
                recorded.push((psi.clone(), exponent));
                next += 1;
            }
        }
        Shot {
            psi,
            dpsi,
            theta,
            nodes,
            samples: recorded,
        }
    }
}

fn target_angle(parity: Parity, level: usize) -> f64 {
    match parity {
        Parity::Even => FRAC_PI_2 - level as f64 * PI,
        Parity::Odd => -(level as f64) * PI,
    }
}

/// Signed quantity that vanishes at an eigenvalue: ψ′(0) (even) or ψ(0) (odd),
/// on the unit circle of the Prüfer angle.
fn matching(shot: &Shot, parity: Parity, prec: Precision) -> BigReal {
    let p = prec.bits();
    let r = Float::with_val(p, shot.psi.square_ref()) + Float::with_val(p, shot.dpsi.square_ref());
    let r = r.sqrt();
    match parity {
        Parity::Even => Float::with_val(p, &shot.dpsi / &r),
        Parity::Odd => Float::with_val(p, &shot.psi / &r),
    }
}

struct Located {
    energy: BigReal,
    bracket: (f64, f64),
    iterations: usize,
}

fn locate(q: &Quartic, parity: Parity, level: usize, x_max: f64, factor: f64, seed: Option<(f64, f64)>) -> Result<Located> {
    let prec = q.prec;
    let p = prec.bits();
    let target = target_angle(parity, level);
    let theta = |e: f64| q.shoot(&prec.real(e), x_max, factor, &[]).theta;

    let (mut lo, mut hi) = match seed {
        Some(b) => b,
        None => {
            let lo = q.v_min() - 1.0;
            let mut step = 1.0;
            let mut hi = q.v_min() + step;
            while theta(hi) > target {
                step *= 2.0;
                hi = q.v_min() + step;
                if step > 1e12 {
                    return Err(Error::Bracket {
                        lo,
                        hi,
                        hint: "no eigenvalue below the upper search limit; widen the energy bracket".into(),
                    });
                }
            }
            if theta(lo) <= target {
                return Err(Error::Bracket {
                    lo,
                    hi,
                    hint: "phase already past the target at the bottom of the potential; lower the energy bracket".into(),
                });
            }
            (lo, hi)
        }
    };
    // Narrow until the matching function is monotone across the bracket.
    let mut iterations = 0;
    loop {
        let (tl, th) = (theta(lo), theta(hi));
        if (tl - target).abs() < 0.45 * PI && (th - target).abs() < 0.45 * PI && tl > target && th < target {
            break;
        }
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        if theta(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if iterations > 200 {
            return Err(Error::Bracket {
                lo,
                hi,
                hint: "bisection on the phase did not isolate the level".into(),
            });
        }
    }

    // Illinois on the matching function in full precision.
    let f = |e: &BigReal| matching(&q.shoot(e, x_max, factor, &[]), parity, prec);
    let mut a = prec.real(lo);
    let mut b = prec.real(hi);
    let mut fa = f(&a);
    let mut fb = f(&b);
    if fa.is_sign_negative() == fb.is_sign_negative() {
        return Err(Error::Bracket {
            lo,
            hi,
            hint: "matching function does not change sign; widen the energy bracket".into(),
        });
    }
    let stop = Float::with_val(p, 1) >> (p as i32 - 24);
    let mut side = 0i8;
    let mut c = a.clone();
    for _ in 0..200 {
        iterations += 1;
        let num = Float::with_val(p, &fb * &a) - Float::with_val(p, &fa * &b);
        let den = Float::with_val(p, &fb - &fa);
        if den.is_zero() {
            break;
        }
        c = num / den;
        let fc = f(&c);
        if fc.is_zero() {
            break;
        }
        if fc.is_sign_negative() == fb.is_sign_negative() {
            b = c.clone();
            fb = fc;
            if side == 1 {
                fa /= 2u32;
            }
            side = 1;
        } else {
            a = c.clone();
            fa = fc;
            if side == -1 {
                fb /= 2u32;
            }
            side = -1;
        }
        let width = Float::with_val(p, &b - &a).abs();
        let mag = Float::with_val(p, c.abs_ref()).max(&prec.one());
        if width <= Float::with_val(p, &mag * &stop) {
            break;
        }
    }
    Ok(Located {
        energy: c,
        bracket: (lo, hi),
        iterations,
    })
}

/// Level of −d²/dx² + m2·x² + g·x⁴ and the change under a halved step.
pub fn quartic_level(m2: f64, g: f64, parity: Parity, level: usize, opts: &ReferenceOptions) -> Result<(BigReal, f64)> {
    let q = Quartic::new(m2, g, opts.precision)?;
    let x_max = opts
        .cutoff
        .unwrap_or_else(|| q.cutoff(opts.precision.digits() as f64 + 10.0));
    let coarse = locate(&q, parity, level, x_max, opts.step_factor, None)?;
    let fine = locate(&q, parity, level, x_max, opts.step_factor / 2.0, Some(coarse.bracket))?;
    let diff = Float::with_val(opts.precision.bits(), &fine.energy - &coarse.energy);
    Ok((fine.energy, diff.to_f64().abs()))
}

/// Energy of H = −d²/dx² + a x² + 2x⁴ without the eigenfunction table.
pub fn reference_energy(a: f64, parity: Parity, level: usize, opts: &ReferenceOptions) -> Result<(BigReal, f64)> {
    quartic_level(a, 2.0, parity, level, opts)
}

/// Eigenpair of H = −d²/dx² + a x² + 2x⁴.
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub a: f64,
    pub parity: Parity,
    pub level: usize,
    pub energy: BigReal,
    /// ψ on the half line, max |ψ| = 1, positive near the outer boundary.
    pub eigenfunction: CurveTable,
    /// |E(step) − E(step/2)|.
    pub residual: f64,
    pub node_count: usize,
    pub cutoff: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub a: f64,
    pub parity: Parity,
    pub level: usize,
    #[serde(rename = "E")]
    pub energy: String,
    pub err_est: f64,
    pub nodes: usize,
    pub cutoff: f64,
}

impl ReferenceSolution {
    pub fn summary(&self) -> ReferenceSummary {
        ReferenceSummary {
            a: self.a,
            parity: self.parity,
            level: self.level,
            energy: to_sci(&self.energy, self.energy.prec() as usize * 3 / 10),
            err_est: self.residual,
            nodes: self.node_count,
            cutoff: self.cutoff,
        }
    }

    pub fn psi_f64(&self, x: f64) -> Result<f64> {
        self.eigenfunction.eval_f64(x)
    }
}

pub fn reference_eigen(a: f64, parity: Parity, level: usize) -> Result<ReferenceSolution> {
    reference_eigen_with(a, parity, level, &ReferenceOptions::default())
}

pub fn reference_eigen_with(a: f64, parity: Parity, level: usize, opts: &ReferenceOptions) -> Result<ReferenceSolution> {
    let prec = opts.precision;
    let q = Quartic::new(a, 2.0, prec)?;
    let x_max = opts.cutoff.unwrap_or_else(|| default_cutoff(a, prec));
    let coarse = locate(&q, parity, level, x_max, opts.step_factor, None)?;
    let fine = locate(&q, parity, level, x_max, opts.step_factor / 2.0, Some(coarse.bracket))?;
    let p = prec.bits();
    let residual = Float::with_val(p, &fine.energy - &coarse.energy).to_f64().abs();

    let grid = Arc::new(PanelGrid::graded(a, x_max, opts.grid, prec)?);
    let descending: Vec<BigReal> = grid.nodes().iter().rev().cloned().collect();
    let shot = q.shoot(&fine.energy, x_max, opts.step_factor, &descending);
    let top = shot.samples.iter().map(|(_, e)| *e).max().unwrap_or(0);
    let mut values: Vec<BigReal> = shot
        .samples
        .iter()
        .rev()
        .map(|(v, e)| Float::with_val(p, v << ((e - top) as i32)))
        .collect();
    let peak = values
        .iter()
        .map(|v| Float::with_val(p, v.abs_ref()))
        .fold(prec.zero(), |m, v| if v > m { v } else { m });
    if peak.is_zero() {
        return Err(Error::NonFinite {
            x: 0.0,
            what: "reference eigenfunction".into(),
        });
    }
    for v in &mut values {
        *v /= &peak;
    }
    Ok(ReferenceSolution {
        a,
        parity,
        level,
        energy: fine.energy,
        eigenfunction: CurveTable::new(grid, values, parity)?,
        residual,
        node_count: shot.nodes,
        cutoff: x_max,
        iterations: coarse.iterations + fine.iterations,
    })
}

/// Fitted and predicted small-x coefficients of φ = −log ψ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallXReport {
    /// Fitted c₂, c₄, c₆.
    pub fitted: [f64; 3],
    /// E/2, (E² − a)/12, (2E(E² − a) − 6)/90.
    pub predicted: [f64; 3],
    pub relative_error: [f64; 3],
    pub condition: f64,
    pub window: f64,
}

/// Least-squares fit of φ(x) − φ(0) to c₂x² + … + c₁₂x¹² on (0, window].
pub fn small_x_check(sol: &ReferenceSolution) -> Result<SmallXReport> {
    small_x_check_on(sol, 0.4, 24)
}

pub fn small_x_check_on(sol: &ReferenceSolution, window: f64, points: usize) -> Result<SmallXReport> {
    if sol.parity != Parity::Even || sol.level != 0 {
        return Err(Error::InvalidParam("small-x expansion needs the even ground state".into()));
    }
    if sol.a < 0.0 {
        return Err(Error::Domain(format!(
            "small-x expansion is taken about a single-well minimum, got a = {}",
            sol.a
        )));
    }
    const M: usize = 6;
    let prec = sol.eigenfunction.grid().precision();
    let p = prec.bits();
    let phi0 = -sol.eigenfunction.eval(&prec.zero())?.ln();
    // Normal equations in t = x/window; column j is t^{2(j+1)}.
    let mut gram = vec![vec![prec.zero(); M]; M];
    let mut rhs = vec![prec.zero(); M];
    for i in 1..=points {
        let t = prec.real(i as f64 / points as f64);
        let x = Float::with_val(p, &t * window);
        let phi = -sol.eigenfunction.eval(&x)?.ln() - &phi0;
        let t2 = Float::with_val(p, t.square_ref());
        let mut basis = Vec::with_capacity(M);
        let mut pw = t2.clone();
        for _ in 0..M {
            basis.push(pw.clone());
            pw *= &t2;
        }
        for r in 0..M {
            for c in 0..M {
                gram[r][c] += Float::with_val(p, &basis[r] * &basis[c]);
            }
            rhs[r] += Float::with_val(p, &basis[r] * &phi);
        }
    }
    let norm_inf = |m: &[Vec<BigReal>]| {
        m.iter()
            .map(|row| row.iter().map(|v| v.to_f64().abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let g_norm = norm_inf(&gram);
    let inv = invert(gram)?;
    let condition = g_norm * norm_inf(&inv);
    if !(condition < 1e30) {
        return Err(Error::IllConditioned(condition));
    }
    let coeffs: Vec<BigReal> = (0..M)
        .map(|r| {
            inv[r]
                .iter()
                .zip(&rhs)
                .fold(prec.zero(), |acc, (a, b)| acc + Float::with_val(p, a * b))
        })
        .collect();
    let fitted: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c.to_f64() / window.powi(2 * (j as i32 + 1)))
        .collect();
    let e = sol.energy.to_f64();
    let a = sol.a;
    let predicted = [e / 2.0, (e * e - a) / 12.0, (2.0 * e * (e * e - a) - 6.0) / 90.0];
    let fitted = [fitted[0], fitted[1], fitted[2]];
    let mut relative_error = [0.0; 3];
    for k in 0..3 {
        relative_error[k] = ((fitted[k] - predicted[k]) / predicted[k]).abs();
    }
    Ok(SmallXReport {
        fitted,
        predicted,
        relative_error,
        condition,
        window,
    })
}

fn invert(mut m: Vec<Vec<BigReal>>) -> Result<Vec<Vec<BigReal>>> {
    let n = m.len();
    let p = m[0][0].prec();
    let mut inv: Vec<Vec<BigReal>> = (0..n)
        .map(|i| (0..n).map(|j| Float::with_val(p, (i == j) as u32)).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].to_f64().abs().total_cmp(&m[j][col].to_f64().abs()))
            .expect("non-empty range");
        if m[pivot][col].is_zero() {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let d = m[col][col].clone();
        for j in 0..n {
            m[col][j] /= &d;
            inv[col][j] /= &d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r][col].clone();
            if f.is_zero() {
                continue;
            }
            for j in 0..n {
                let t = Float::with_val(p, &f * &m[col][j]);
                m[r][j] -= t;
                let t = Float::with_val(p, &f * &inv[col][j]);
                inv[r][j] -= t;
            }
        }
    }
    Ok(inv)
}

/// Remainder of the large-x phase after the known terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeXReport {
    pub xs: Vec<f64>,
    /// φ(x) − [asymptotic terms] at each x; should be flat.
    pub remainder: Vec<f64>,
    /// max − min of the remainder over the window.
    pub spread: f64,
    /// φ / ((√2/3)x³) at the window end.
    pub leading_ratio: f64,
}

/// Checks φ = −log|ψ| + n·log|x| against
/// (√2/3)x³ + a x/2^{3/2} + log x + (8E + a²)/(2^{9/2} x) + a/(8x²).
///
/// For the states handled here the only node sits at the origin, so the
/// polynomial prefactor is x^n and the node-square-sum term vanishes.
pub fn large_x_check(sol: &ReferenceSolution, window: (f64, f64), samples: usize) -> Result<LargeXReport> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && samples >= 2) {
        return Err(Error::InvalidParam(format!("bad window [{lo}, {hi}]")));
    }
    if sol.level != 0 {
        return Err(Error::InvalidParam("large-x check handles level 0 only".into()));
    }
    // The inward solution carries the boundary error e^{-2(S(X) − S(x))}.
    let trusted = {
        let s_x = crate::model::leading_phase(sol.a, sol.cutoff);
        let s_hi = crate::model::leading_phase(sol.a, hi);
        2.0 * (s_x - s_hi) > 30.0 * LN_10
    };
    if !trusted {
        return Err(Error::Window(format!(
            "window end {hi} is too close to the boundary X = {}; solve with a larger cutoff",
            sol.cutoff
        )));
    }
    let prec = sol.eigenfunction.grid().precision();
    let p = prec.bits();
    let n = sol.parity.nodes() as u32;
    let a = prec.real(sol.a);
    let e = &sol.energy;
    let sqrt2 = Float::with_val(p, 2).sqrt();
    let c_x3 = Float::with_val(p, &sqrt2 / 3u32);
    let c_x1 = Float::with_val(p, &a / &sqrt2) / 2u32;
    let c_m1 = (Float::with_val(p, e * 8u32) + Float::with_val(p, a.square_ref())) / (Float::with_val(p, &sqrt2 * 16u32));
    let c_m2 = Float::with_val(p, &a / 8u32);
    let mut xs = Vec::with_capacity(samples);
    let mut remainder = Vec::with_capacity(samples);
    let mut leading_ratio = 0.0;
    for i in 0..samples {
        let xf = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
        let x = prec.real(xf);
        let psi = sol.eigenfunction.eval(&x)?;
        if !(psi > 0) {
            return Err(Error::NonFinite {
                x: xf,
                what: "log of the reference eigenfunction".into(),
            });
        }
        let lx = Float::with_val(p, x.ln_ref());
        let phi = -psi.ln() + Float::with_val(p, &lx * n);
        let x3 = Float::with_val(p, x.square_ref()) * &x;
        let lead = Float::with_val(p, &c_x3 * &x3);
        let known = lead.clone()
            + Float::with_val(p, &c_x1 * &x)
            + &lx
            + Float::with_val(p, &c_m1 / &x)
            + Float::with_val(p, &c_m2 / Float::with_val(p, x.square_ref()));
        leading_ratio = Float::with_val(p, &phi / &lead).to_f64();
        xs.push(xf);
        remainder.push((phi - known).to_f64());
    }
    let max = remainder.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = remainder.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(LargeXReport {
        xs,
        remainder,
        spread: max - min,
        leading_ratio,
    })
}

/// max |(ψ_trial − ψ_ref)/ψ_trial| over grid nodes where ψ_trial > 10⁻²⁰ of
/// its peak, both functions scaled to unit peak.
pub fn wavefunction_deviation(tf: &TrialFunction, sol: &ReferenceSolution) -> Result<f64> {
    if tf.parity() != sol.parity {
        return Err(Error::ParityMismatch {
            trial: tf.parity().to_string(),
            reference: sol.parity.to_string(),
        });
    }
    if tf.a() != sol.a {
        return Err(Error::InvalidParam(format!(
            "trial is for a = {}, reference for a = {}",
            tf.a(),
            sol.a
        )));
    }
    let table = &sol.eigenfunction;
    let grid = table.grid();
    let prec = grid.precision();
    let p = prec.bits();
    let trial = tf.with_precision(prec)?;
    let trial_psi = |x: &BigReal| trial.psi(x);
    let peak_t = refine_peak(&trial_psi, grid.nodes(), &grid.nodes().iter().map(&trial_psi).collect::<Vec<_>>());
    let ref_psi = |x: &BigReal| table.eval(x).unwrap_or_else(|_| prec.zero());
    let peak_r = refine_peak(&ref_psi, grid.nodes(), table.values());
    let floor = Float::with_val(p, &peak_t * 1e-20);
    let mut delta = 0.0f64;
    for (x, r) in grid.nodes().iter().zip(table.values()) {
        let t = Float::with_val(p, trial_psi(x) / &peak_t);
        if Float::with_val(p, t.abs_ref()) * &peak_t <= floor {
            continue;
        }
        let r = Float::with_val(p, r * table_scale(&peak_r));
        let d = Float::with_val(p, &t - &r) / &t;
        delta = delta.max(d.to_f64().abs());
    }
    Ok(delta)
}

fn table_scale(peak: &BigReal) -> BigReal {
    Float::with_val(peak.prec(), peak.recip_ref())
}

/// Maximum of |f| near the largest tabulated value, by golden-section search.
fn refine_peak<F: Fn(&BigReal) -> BigReal>(f: &F, nodes: &[BigReal], values: &[BigReal]) -> BigReal {
    let p = values[0].prec();
    let i = (0..values.len())
        .max_by(|&i, &j| {
            let (a, b) = (values[i].to_f64().abs(), values[j].to_f64().abs());
            a.total_cmp(&b)
        })
        .expect("non-empty grid");
    let lo = if i > 0 { nodes[i - 1].to_f64() } else { 0.0 };
    let hi = if i + 1 < nodes.len() { nodes[i + 1].to_f64() } else { nodes[i].to_f64() };
    let g = |x: f64| Float::with_val(p, f(&Float::with_val(p, x)).abs_ref());
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc.clone();
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd.clone();
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    let best = if fc > fd { fc } else { fd };
    let at_node = Float::with_val(p, values[i].abs_ref());
    if at_node > best {
        at_node
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(x: &BigReal, want: f64, tol: f64) -> bool {
        (x.to_f64() - want).abs() <= tol
    }

    #[test]
    fn single_well_ground_state() {
        let sol = reference_eigen(1.0, Parity::Even, 0).unwrap();
        assert!(close(&sol.energy, 1.607541302469, 1e-9), "{}", sol.energy);
        assert!(sol.residual < 1e-40, "{}", sol.residual);
        assert_eq!(sol.node_count, 0);
    }

    #[test]
    fn shallow_double_well_ground_state() {
        let sol = reference_eigen(-1.0, Parity::Even, 0).unwrap();
        assert!(close(&sol.energy, 1.029560831054, 1e-9), "{}", sol.energy);
    }

    #[test]
    fn harmonic_limit_levels() {
        // g → small: −d² + x² + 1e-8·x⁴ has levels ≈ 2n + 1.
        let opts = ReferenceOptions::with_precision(Precision::new(128).unwrap());
        for (parity, level, want) in [(Parity::Even, 0, 1.0), (Parity::Odd, 0, 3.0), (Parity::Even, 1, 5.0)] {
            let (e, _) = quartic_level(1.0, 1e-8, parity, level, &opts).unwrap();
            assert!((e.to_f64() - want).abs() < 1e-6, "{parity} {level}: {e}");
        }
    }

    #[test]
    fn odd_ground_state_has_no_interior_nodes() {
        let sol = reference_eigen(1.0, Parity::Odd, 0).unwrap();
        assert_eq!(sol.node_count, 0);
        let e = sol.energy.to_f64();
        assert!(e > 1.6075 && e < 10.0);
        let level1 = reference_eigen(1.0, Parity::Even, 1).unwrap();
        assert_eq!(level1.node_count, 1);
        assert!(level1.energy > sol.energy);
    }

    #[test]
    fn pure_quartic_matches_symanzik_scaling() {
        // E(a = 0) = 2^{1/3} E(−d² + x⁴).
        let opts = ReferenceOptions::default();
        let (e2, _) = quartic_level(0.0, 2.0, Parity::Even, 0, &opts).unwrap();
        let (e1, _) = quartic_level(0.0, 1.0, Parity::Even, 0, &opts).unwrap();
        let ratio = e2.to_f64() / e1.to_f64();
        assert!((ratio - 2f64.cbrt()).abs() < 1e-14, "{ratio}");
        assert!((e1.to_f64() - 1.0603620904841828).abs() < 1e-12, "{e1}");
    }

    #[test]
    fn eigenfunction_is_peak_normalized() {
        let sol = reference_eigen(-1.0, Parity::Even, 0).unwrap();
        let max = sol
            .eigenfunction
            .values()
            .iter()
            .map(|v| v.to_f64().abs())
            .fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-15);
        assert!(sol.psi_f64(0.0).unwrap() > 0.0);
    }

    #[test]
    fn small_x_coefficients() {
        let sol = reference_eigen(1.0, Parity::Even, 0).unwrap();
        let r = small_x_check(&sol).unwrap();
        assert!(r.relative_error[0] < 1e-6, "{r:?}");
        assert!(r.relative_error[1] < 1e-4, "{r:?}");
        let sol0 = reference_eigen(0.0, Parity::Even, 0).unwrap();
        let r0 = small_x_check(&sol0).unwrap();
        assert!(r0.relative_error[2] < 1e-3, "{r0:?}");
        assert!(small_x_check(&reference_eigen(-1.0, Parity::Even, 0).unwrap()).is_err());
    }

    #[test]
    fn large_x_remainder_is_flat() {
        for a in [1.0, -1.0] {
            let opts = ReferenceOptions {
                cutoff: Some(11.0),
                ..ReferenceOptions::default()
            };
            let sol = reference_eigen_with(a, Parity::Even, 0, &opts).unwrap();
            let r = large_x_check(&sol, (6.0, 10.0), 9).unwrap();
            assert!(r.spread <= 1e-3, "a = {a}: {r:?}");
            assert!((r.leading_ratio - 1.0).abs() < 0.05);
        }
        let near = reference_eigen(1.0, Parity::Even, 0).unwrap();
        assert!(matches!(
            large_x_check(&near, (4.0, near.cutoff), 5),
            Err(Error::Window(_))
        ));
    }

    #[test]
    fn deviation_rejects_parity_mismatch() {
        let sol = reference_eigen(1.0, Parity::Even, 0).unwrap();
        let tf = TrialFunction::new(
            1.0,
            crate::model::TrialParams::new(-9.0, 4.0, 3.0, Parity::Odd).unwrap(),
            Precision::DEFAULT,
        )
        .unwrap();
        assert!(matches!(
            wavefunction_deviation(&tf, &sol),
            Err(Error::ParityMismatch { .. })
        ));
    }
}
