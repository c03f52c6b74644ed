//! Logarithmic perturbation theory around a trial function.
//!
//! The trial function ψ₀ is the exact zero-energy ground state of V₀, and
//! V₁ = V − V₀ is treated as the perturbation. Writing y = −(log ψ)′ =
//! y₀ + y₁ + y₂ + … and E = E₁ + E₂ + … in the Riccati equation
//! y² − y′ = V − E gives, order by order,
//!
//! ```text
//! (ψ₀² y_k)′ = (E_k − Q_k) ψ₀²,   Q₁ = V₁,   Q_k = −Σ_{i=1}^{k−1} y_i y_{k−i},
//! E_k = ∫ Q_k ψ₀² / ∫ ψ₀².
//! ```
//!
//! Each y_k is odd and is stored at the quadrature nodes of one shared grid.
//! It is recovered from ψ₀² y_k = ∫₀^x (E_k − Q_k)ψ₀² or, equivalently,
//! from −∫_x^X; at each node the form with the smaller integral is used, so
//! the far tail never divides a cancelled difference by a tiny weight.

use std::sync::Arc;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cutoff_from, default_cutoff, leading_phase, well_position, Parity, TrialParams};
use crate::num::{ensure_finite, to_sci, BigReal, Precision};
use crate::quad::{
    cumulative_at_nodes, integrate_half, tail_at_nodes, CurveTable, GaussLegendre, GridSpec, PanelGrid,
    Quadrature,
};
use crate::trial::TrialFunction;

/// Default number of corrections.
pub const DEFAULT_ORDER: usize = 3;

/// Decades of the weight e^{-2φ} below its value at the cutoff beyond which
/// a tail-form y_k is no longer trusted.
const TRUST_DECADES: f64 = 30.0;

/// Graded grid on [0, X] with the default cutoff for the trial's precision.
pub fn default_grid(tf: &TrialFunction, spec: GridSpec) -> Result<Arc<PanelGrid>> {
    let cutoff = default_cutoff(tf.a(), tf.precision());
    Ok(Arc::new(PanelGrid::graded(tf.a(), cutoff, spec, tf.precision())?))
}

/// Node samples of everything the recursion needs.
#[derive(Debug)]
pub struct Sampled {
    tf: TrialFunction,
    grid: Arc<PanelGrid>,
    /// ψ₀² divided by its largest node value.
    weight: Vec<BigReal>,
    /// y₀ itself (the pole is harmless away from x = 0).
    y0: Vec<BigReal>,
    v0: Vec<BigReal>,
    v1: Vec<BigReal>,
    norm: Quadrature,
    trusted_to: f64,
}

impl Sampled {
    pub fn new(tf: &TrialFunction, grid: Arc<PanelGrid>) -> Result<Self> {
        if grid.precision() != tf.precision() {
            return Err(Error::InvalidParam(format!(
                "grid precision {} differs from trial precision {}",
                grid.precision().bits(),
                tf.precision().bits()
            )));
        }
        let p = tf.precision().bits();
        let n = grid.len();
        let mut log_w = Vec::with_capacity(n);
        let mut y0 = Vec::with_capacity(n);
        let mut v0 = Vec::with_capacity(n);
        let mut v1 = Vec::with_capacity(n);
        for x in grid.nodes() {
            let pt = tf.eval(x);
            let xf = x.to_f64();
            let y = match tf.parity() {
                Parity::Even => pt.y0_reg,
                Parity::Odd => pt.y0_reg - Float::with_val(p, x.recip_ref()),
            };
            let v = tf.potential(x);
            let lw = pt.log_abs_psi * 2u32;
            ensure_finite(&lw, xf, "log ψ₀²")?;
            ensure_finite(&y, xf, "y₀")?;
            ensure_finite(&pt.v0, xf, "V₀")?;
            v1.push(v - &pt.v0);
            v0.push(pt.v0);
            y0.push(y);
            log_w.push(lw);
        }
        let peak = log_w
            .iter()
            .max_by(|a, b| a.partial_cmp(b).expect("finite"))
            .expect("grid is not empty")
            .clone();
        let weight: Vec<BigReal> = log_w.into_iter().map(|l| (l - &peak).exp()).collect();
        let norm = integrate_half(&grid, &weight);
        let x_cut = grid.cutoff();
        let a = tf.a();
        let drop = 2.0 * (leading_phase(a, x_cut) - leading_phase(a, well_position(a)));
        let trusted_to = if drop > 2.0 * TRUST_DECADES * std::f64::consts::LN_10 {
            cutoff_from(a, well_position(a), drop / std::f64::consts::LN_10 - TRUST_DECADES)
        } else {
            x_cut
        };
        Ok(Sampled {
            tf: tf.clone(),
            grid,
            weight,
            y0,
            v0,
            v1,
            norm,
            trusted_to,
        })
    }

    pub fn trial(&self) -> &TrialFunction {
        &self.tf
    }

    pub fn grid(&self) -> &Arc<PanelGrid> {
        &self.grid
    }

    pub fn weight(&self) -> &[BigReal] {
        &self.weight
    }

    pub fn v1(&self) -> &[BigReal] {
        &self.v1
    }

    /// Largest x at which stored y_k values are unaffected by the cutoff.
    pub fn trusted_to(&self) -> f64 {
        self.trusted_to
    }

    /// ⟨f⟩ = ∫ f ψ₀² / ∫ ψ₀² over node values of an even f.
    fn mean(&self, f: &[BigReal]) -> Quadrature {
        let p = self.tf.precision().bits();
        let prod: Vec<BigReal> = f
            .iter()
            .zip(&self.weight)
            .map(|(f, w)| Float::with_val(p, f * w))
            .collect();
        let num = integrate_half(&self.grid, &prod);
        let value = Float::with_val(p, &num.value / &self.norm.value);
        let rel_norm = Float::with_val(p, &self.norm.err_est / &self.norm.value);
        let err_est = Float::with_val(p, &num.err_est / &self.norm.value) + rel_norm * Float::with_val(p, value.abs_ref());
        Quadrature { value, err_est }
    }
}

/// Variational energy ∫(ψ₀′² + Vψ₀²) / ∫ψ₀², from the gradient form.
pub fn rayleigh_energy(tf: &TrialFunction, grid: &Arc<PanelGrid>) -> Result<Quadrature> {
    let s = Sampled::new(tf, grid.clone())?;
    Ok(rayleigh_from(&s))
}

fn rayleigh_from(s: &Sampled) -> Quadrature {
    let p = s.tf.precision().bits();
    let f: Vec<BigReal> = s
        .y0
        .iter()
        .zip(s.grid.nodes())
        .map(|(y, x)| Float::with_val(p, y.square_ref()) + s.tf.potential(x))
        .collect();
    s.mean(&f)
}

/// First correction E₁ = ⟨V₁⟩.
pub fn e1(tf: &TrialFunction, grid: &Arc<PanelGrid>) -> Result<Quadrature> {
    let s = Sampled::new(tf, grid.clone())?;
    Ok(s.mean(&s.v1))
}

/// Corrections E₁…E_K and y₁…y_K computed so far.
#[derive(Clone, Debug)]
pub struct SeriesState {
    sampled: Arc<Sampled>,
    energies: Vec<Quadrature>,
    curves: Vec<CurveTable>,
    /// |∫(E_k − Q_k)ψ₀²| / ∫|E_k − Q_k|ψ₀² for each order.
    balance: Vec<f64>,
}

impl SeriesState {
    pub fn new(tf: &TrialFunction, grid: Arc<PanelGrid>) -> Result<Self> {
        Ok(SeriesState {
            sampled: Arc::new(Sampled::new(tf, grid)?),
            energies: Vec::new(),
            curves: Vec::new(),
            balance: Vec::new(),
        })
    }

    pub fn sampled(&self) -> &Sampled {
        &self.sampled
    }

    pub fn trial(&self) -> &TrialFunction {
        &self.sampled.tf
    }

    pub fn order(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> Vec<BigReal> {
        self.energies.iter().map(|q| q.value.clone()).collect()
    }

    pub fn energy(&self, k: usize) -> Option<&Quadrature> {
        k.checked_sub(1).and_then(|i| self.energies.get(i))
    }

    /// y_k as a table on the grid, k ≥ 1.
    pub fn curve(&self, k: usize) -> Option<&CurveTable> {
        k.checked_sub(1).and_then(|i| self.curves.get(i))
    }

    pub fn balance(&self) -> &[f64] {
        &self.balance
    }

    /// Ẽ^(k) = E₁ + … + E_k for k = 1..K.
    pub fn partial_sums(&self) -> Vec<BigReal> {
        let p = self.trial().precision().bits();
        let mut acc = Float::new(p);
        self.energies
            .iter()
            .map(|q| {
                acc += &q.value;
                acc.clone()
            })
            .collect()
    }

    /// Sum of the quadrature error estimates of E₁…E_k.
    pub fn err_est(&self) -> BigReal {
        let p = self.trial().precision().bits();
        self.energies
            .iter()
            .fold(Float::new(p), |acc, q| acc + &q.err_est)
    }

    /// Variational energy of the same trial function on the same grid.
    pub fn e_var(&self) -> Quadrature {
        rayleigh_from(&self.sampled)
    }
}

/// Appends E_k and y_k for the next order k.
pub fn pt_step(state: &SeriesState) -> Result<SeriesState> {
    let s = &state.sampled;
    let k = state.order() + 1;
    let p = s.tf.precision().bits();
    let nodes = s.grid.nodes();
    let q: Vec<BigReal> = if k == 1 {
        s.v1.clone()
    } else {
        (0..nodes.len())
            .map(|j| {
                let mut acc = Float::new(p);
                for i in 1..k {
                    let yi = &state.curves[i - 1].values()[j];
                    let yk = &state.curves[k - i - 1].values()[j];
                    acc -= Float::with_val(p, yi * yk);
                }
                acc
            })
            .collect()
    };
    if let Some(j) = q.iter().position(|v| !v.is_finite()) {
        return Err(Error::Series {
            k,
            x: nodes[j].to_f64(),
        });
    }
    let ek = s.mean(&q);
    let g: Vec<BigReal> = q
        .iter()
        .zip(&s.weight)
        .map(|(qv, w)| Float::with_val(p, &ek.value - qv) * w)
        .collect();
    let cum = cumulative_at_nodes(&s.grid, &g);
    let tail = tail_at_nodes(&s.grid, &g);
    let mut y = Vec::with_capacity(g.len());
    for ((c, t), w) in cum.iter().zip(&tail).zip(&s.weight) {
        let v = if c.cmp_abs(t) != Some(std::cmp::Ordering::Greater) {
            Float::with_val(p, c / w)
        } else {
            -Float::with_val(p, t / w)
        };
        y.push(v);
    }
    let total = integrate_half(&s.grid, &g).value;
    let abs_g: Vec<BigReal> = g.iter().map(|v| Float::with_val(p, v.abs_ref())).collect();
    let scale = integrate_half(&s.grid, &abs_g).value;
    let balance = if scale.is_zero() {
        0.0
    } else {
        (total.abs() / scale).to_f64()
    };

    let mut next = state.clone();
    next.energies.push(ek);
    next.curves.push(CurveTable::new(s.grid.clone(), y, Parity::Odd)?);
    next.balance.push(balance);
    Ok(next)
}

/// Runs [`pt_step`] until order `order`.
pub fn pt_series(tf: &TrialFunction, order: usize, grid: Arc<PanelGrid>) -> Result<SeriesState> {
    if order == 0 {
        return Err(Error::InvalidParam("perturbation order must be at least 1".into()));
    }
    let mut state = SeriesState::new(tf, grid)?;
    for _ in 0..order {
        state = pt_step(&state)?;
    }
    Ok(state)
}

/// Shape of |y_k| on the trusted part of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveStats {
    pub max_abs: f64,
    pub argmax: f64,
    /// max |y_k| on [0, 1].
    pub plateau: f64,
}

pub fn curve_stats(state: &SeriesState, k: usize) -> Result<CurveStats> {
    let curve = state
        .curve(k)
        .ok_or_else(|| Error::InvalidParam(format!("order {k} has not been computed")))?;
    let limit = state.sampled.trusted_to;
    let mut max_abs = 0.0f64;
    let mut argmax = 0.0;
    let mut plateau = 0.0f64;
    for (x, v) in curve.grid().nodes().iter().zip(curve.values()) {
        let xf = x.to_f64();
        if xf > limit {
            break;
        }
        let av = v.to_f64().abs();
        if av > max_abs {
            max_abs = av;
            argmax = xf;
        }
        if xf <= 1.0 {
            plateau = plateau.max(av);
        }
    }
    Ok(CurveStats {
        max_abs,
        argmax,
        plateau,
    })
}

/// Stats of y₁ over the whole half line: grid values up to the trusted
/// point, then the far-field integral on a 0.1 mesh until |y₁| has fallen
/// below half its running maximum.
pub fn y1_stats(state: &SeriesState) -> Result<CurveStats> {
    let mut st = curve_stats(state, 1)?;
    let start = state.sampled.trusted_to;
    let mut x = start;
    for _ in 0..10_000 {
        x += FAR_STEP;
        let v = y1_far(state, x)?.to_f64().abs();
        if v > st.max_abs {
            st.max_abs = v;
            st.argmax = x;
        } else if v < 0.5 * st.max_abs {
            break;
        }
    }
    Ok(st)
}

const FAR_STEP: f64 = 0.1;

/// y₁(x) = ∫_x^∞ (V₁(t) − E₁) e^{−2(φ(t) − φ(x))} dt for x beyond the grid,
/// integrated on panels sized by the local decay rate 2y₀.
pub fn y1_far(state: &SeriesState, x: f64) -> Result<BigReal> {
    let e1 = state
        .energy(1)
        .ok_or_else(|| Error::InvalidParam("E₁ has not been computed".into()))?
        .value
        .clone();
    let tf = state.trial();
    let prec = tf.precision();
    let p = prec.bits();
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("far-field point must be positive, got {x}")));
    }
    let rule = GaussLegendre::new(20, prec)?;
    let x0 = prec.real(x);
    let phi0 = -tf.log_abs_psi(&x0);
    let target = (prec.digits() as f64 + 10.0) * std::f64::consts::LN_10;
    let mut lo = x0;
    let mut acc = Float::new(p);
    for _ in 0..100_000 {
        let rate = 2.0 * tf.y0(&lo)?.to_f64().abs() + 1.0;
        let h = prec.real(2.0 / rate);
        let hi = Float::with_val(p, &lo + &h);
        let half = Float::with_val(p, &h / 2u32);
        let mid = Float::with_val(p, &lo + &half);
        for (t, w) in rule.nodes().iter().zip(rule.weights()) {
            let xt = Float::with_val(p, &half * t) + &mid;
            let expo = (-tf.log_abs_psi(&xt) - &phi0) * -2i32;
            let f = (tf.v1(&xt) - &e1) * expo.exp();
            ensure_finite(&f, xt.to_f64(), "far-field y₁ integrand")?;
            acc += f * w * &half;
        }
        let decay = Float::with_val(p, -tf.log_abs_psi(&hi) - &phi0) * 2u32;
        lo = hi;
        if decay.to_f64() > target {
            return Ok(acc);
        }
    }
    Err(Error::Window(format!("far-field integral from x = {x} did not reach its decay target")))
}

/// Default start of the region where |V₁/V₀| is monitored.
pub fn default_monitor_start(a: f64) -> f64 {
    3.0f64.max(1.5 * well_position(a) + 1.0)
}

/// sup |V₁/V₀| over grid nodes in [r, trusted_to].
pub fn sup_v1_over_v0(state: &SeriesState, r: f64) -> f64 {
    let s = &state.sampled;
    let p = s.tf.precision().bits();
    s.grid
        .nodes()
        .iter()
        .zip(s.v1.iter().zip(&s.v0))
        .filter(|(x, _)| {
            let xf = x.to_f64();
            xf >= r && xf <= s.trusted_to
        })
        .map(|(_, (v1, v0))| Float::with_val(p, v1 / v0).abs().to_f64())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_abs_y1: f64,
    pub argmax_y1: f64,
    pub plateau_y1: f64,
    pub monitor_start: f64,
    pub sup_v1_over_v0: f64,
    pub trusted_to: f64,
    pub cutoff: f64,
    pub balance: Vec<f64>,
}

/// Serializable result of a series run; numbers are decimal strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub a: f64,
    pub parity: Parity,
    pub params: TrialParams,
    pub precision_bits: u32,
    pub e_var: String,
    #[serde(rename = "E")]
    pub energies: Vec<String>,
    pub partial_sums: Vec<String>,
    pub err_est: String,
    pub diagnostics: Diagnostics,
}

pub fn diagnostics(state: &SeriesState) -> Result<Diagnostics> {
    let st = y1_stats(state)?;
    let r = default_monitor_start(state.trial().a());
    Ok(Diagnostics {
        max_abs_y1: st.max_abs,
        argmax_y1: st.argmax,
        plateau_y1: st.plateau,
        monitor_start: r,
        sup_v1_over_v0: sup_v1_over_v0(state, r),
        trusted_to: state.sampled.trusted_to,
        cutoff: state.sampled.grid.cutoff(),
        balance: state.balance.clone(),
    })
}

pub fn summary(state: &SeriesState) -> Result<SeriesSummary> {
    let tf = state.trial();
    let digits = tf.precision().digits() as usize;
    let sums = state.partial_sums();
    Ok(SeriesSummary {
        a: tf.a(),
        parity: tf.parity(),
        params: *tf.params(),
        precision_bits: tf.precision().bits(),
        e_var: to_sci(&state.e_var().value, digits),
        energies: state.energies.iter().map(|q| to_sci(&q.value, digits)).collect(),
        partial_sums: sums.iter().map(|v| to_sci(v, digits)).collect(),
        err_est: to_sci(&state.err_est(), 3),
        diagnostics: diagnostics(state)?,
    })
}

/// Convenience for callers with plain parameters: default grid at `prec`.
pub fn series_for(a: f64, params: TrialParams, order: usize, prec: Precision) -> Result<SeriesState> {
    let tf = TrialFunction::new(a, params, prec)?;
    let grid = default_grid(&tf, GridSpec::DEFAULT)?;
    pt_series(&tf, order, grid)
}
