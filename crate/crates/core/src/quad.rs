//! Composite Gauss–Legendre quadrature on graded panels of the half line.
//!
//! All integrands in this crate are even or odd, so only [0, X] is ever
//! sampled. Cumulative and tail integrals at the nodes use the exact
//! integrals of the Lagrange basis through each panel's nodes, so a table
//! of values is enough and no re-sampling is needed.

use std::io::{self, Write};
use std::sync::Arc;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{leading_phase, Parity};
use crate::num::{ensure_finite, to_sci, BigReal, Precision};

/// Guard bits used while building a rule.
const RULE_GUARD: u32 = 64;

/// Gauss–Legendre rule on [-1, 1] with its exact interpolatory integration matrices.
#[derive(Debug)]
pub struct GaussLegendre {
    prec: Precision,
    nodes: Vec<BigReal>,
    weights: Vec<BigReal>,
    bary: Vec<BigReal>,
    /// left[i][j] = ∫_{-1}^{t_i} ℓ_j
    left: Vec<Vec<BigReal>>,
    /// right[i][j] = ∫_{t_i}^{1} ℓ_j
    right: Vec<Vec<BigReal>>,
    /// Rows mapping node values to the two highest Legendre coefficients.
    top_coeffs: [Vec<BigReal>; 2],
}

fn legendre_all(t: &BigReal, n: usize) -> Vec<BigReal> {
    let p = t.prec();
    let mut out = Vec::with_capacity(n + 1);
    out.push(Float::with_val(p, 1));
    if n == 0 {
        return out;
    }
    out.push(t.clone());
    for k in 1..n {
        let next = (Float::with_val(p, t * &out[k]) * (2 * k + 1) as u32
            - Float::with_val(p, &out[k - 1] * k as u32))
            / (k + 1) as u32;
        out.push(next);
    }
    out
}

/// Σ_k ½ P_k(t_j)(P_{k+1}(t) − P_{k−1}(t)) for k = 1..n−1, the non-constant
/// part of ∫_{-1}^{t} of the j-th Lagrange basis polynomial divided by w_j.
fn basis_integral_sum(pj: &[BigReal], pt: &[BigReal], n: usize) -> BigReal {
    let p = pj[0].prec();
    let mut acc = Float::new(p);
    for k in 1..n {
        let diff = Float::with_val(p, &pt[k + 1] - &pt[k - 1]);
        acc += Float::with_val(p, &pj[k] * &diff);
    }
    acc / 2u32
}

impl GaussLegendre {
    pub fn new(n: usize, prec: Precision) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParam(format!(
                "Gauss–Legendre rule needs at least 2 nodes, got {n}"
            )));
        }
        let gp = prec.guarded(RULE_GUARD);
        let g = gp.bits();
        let tol = gp.epsilon() << 4;

        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // descending Chebyshev-like guess, refined by Newton
            let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut t = gp.real(-guess);
            for _ in 0..100 {
                let pl = legendre_all(&t, n);
                let t2m1 = Float::with_val(g, t.square_ref()) - 1u32;
                let deriv = (Float::with_val(g, &t * &pl[n]) - &pl[n - 1]) * n as u32 / t2m1;
                let step = Float::with_val(g, &pl[n] / &deriv);
                t -= &step;
                if step.abs() < tol {
                    break;
                }
            }
            let pl = legendre_all(&t, n);
            let t2m1 = Float::with_val(g, t.square_ref()) - 1u32;
            let deriv = (Float::with_val(g, &t * &pl[n]) - &pl[n - 1]) * n as u32 / t2m1;
            let one_minus = Float::with_val(g, 1) - Float::with_val(g, t.square_ref());
            let w = Float::with_val(g, 2) / (one_minus * deriv.square());
            nodes.push(t);
            weights.push(w);
        }

        let pvals: Vec<Vec<BigReal>> = nodes.iter().map(|t| legendre_all(t, n)).collect();
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for i in 0..n {
            let pt = &pvals[i];
            let mut lrow = Vec::with_capacity(n);
            let mut rrow = Vec::with_capacity(n);
            for j in 0..n {
                let sum = basis_integral_sum(&pvals[j], pt, n);
                let lhalf = Float::with_val(g, &nodes[i] + 1u32) / 2u32;
                let rhalf = (Float::with_val(g, 1) - &nodes[i]) / 2u32;
                lrow.push(prec.of(&(Float::with_val(g, lhalf + &sum) * &weights[j])));
                rrow.push(prec.of(&(Float::with_val(g, rhalf - &sum) * &weights[j])));
            }
            left.push(lrow);
            right.push(rrow);
        }

        let top_coeffs = [n - 2, n - 1].map(|k| {
            (0..n)
                .map(|j| {
                    let c = Float::with_val(g, &weights[j] * &pvals[j][k]) * (2 * k + 1) as u32 / 2u32;
                    prec.of(&c)
                })
                .collect()
        });

        let bary = (0..n)
            .map(|j| {
                let one_minus = Float::with_val(g, 1) - Float::with_val(g, nodes[j].square_ref());
                let b = (one_minus * &weights[j]).sqrt();
                prec.of(&if j % 2 == 0 { b } else { -b })
            })
            .collect();

        Ok(GaussLegendre {
            prec,
            nodes: nodes.iter().map(|t| prec.of(t)).collect(),
            weights: weights.iter().map(|w| prec.of(w)).collect(),
            bary,
            left,
            right,
            top_coeffs,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[BigReal] {
        &self.nodes
    }

    pub fn weights(&self) -> &[BigReal] {
        &self.weights
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    /// Barycentric interpolation of node values at t ∈ [-1, 1].
    pub fn interpolate(&self, values: &[BigReal], t: &BigReal) -> BigReal {
        let p = self.prec.bits();
        let mut num = Float::new(p);
        let mut den = Float::new(p);
        for (j, tj) in self.nodes.iter().enumerate() {
            let diff = Float::with_val(p, t - tj);
            if diff.is_zero() {
                return values[j].clone();
            }
            let c = Float::with_val(p, &self.bary[j] / &diff);
            num += Float::with_val(p, &c * &values[j]);
            den += c;
        }
        num / den
    }

    /// ∫_t^1 ℓ_j for each basis polynomial.
    pub fn right_weights(&self, t: &BigReal) -> Vec<BigReal> {
        let n = self.len();
        let p = self.prec.bits();
        let pt = legendre_all(t, n);
        (0..n)
            .map(|j| {
                let pj = legendre_all(&self.nodes[j], n);
                let sum = basis_integral_sum(&pj, &pt, n);
                let half = (Float::with_val(p, 1) - t) / 2u32;
                (half - sum) * &self.weights[j]
            })
            .collect()
    }

    fn tail_estimate(&self, values: &[BigReal]) -> BigReal {
        let p = self.prec.bits();
        let mut est = Float::new(p);
        for row in &self.top_coeffs {
            let mut c = Float::new(p);
            for (w, v) in row.iter().zip(values) {
                c += Float::with_val(p, w * v);
            }
            est += c.abs();
        }
        est
    }
}

/// Controls for [`PanelGrid::graded`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nodes_per_panel: usize,
    /// Panel width where the weight varies slowly.
    pub core_width: f64,
    /// Largest change of the exponent of e^{-2φ} across one panel.
    pub kappa: f64,
}

impl GridSpec {
    pub const DEFAULT: GridSpec = GridSpec {
        nodes_per_panel: 32,
        core_width: 0.25,
        kappa: 3.0,
    };

    /// Coarser grid for repeated objective evaluations.
    pub const SEARCH: GridSpec = GridSpec {
        nodes_per_panel: 20,
        core_width: 0.3,
        kappa: 2.5,
    };

    /// Same panels with twice the nodes, for self-convergence checks.
    pub fn doubled(self) -> GridSpec {
        GridSpec {
            nodes_per_panel: 2 * self.nodes_per_panel,
            ..self
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Panels 0 = x₀ < x₁ < … < x_M = X, each carrying the same Gauss rule.
#[derive(Debug)]
pub struct PanelGrid {
    breaks: Vec<f64>,
    rule: Arc<GaussLegendre>,
    nodes: Vec<BigReal>,
    weights: Vec<BigReal>,
    halves: Vec<BigReal>,
}

impl PanelGrid {
    pub fn new(breaks: Vec<f64>, nodes_per_panel: usize, prec: Precision) -> Result<Self> {
        let rule = Arc::new(GaussLegendre::new(nodes_per_panel, prec)?);
        Self::with_rule(breaks, rule)
    }

    pub fn with_rule(breaks: Vec<f64>, rule: Arc<GaussLegendre>) -> Result<Self> {
        if breaks.len() < 2 || breaks[0] != 0.0 {
            return Err(Error::InvalidParam(
                "panel breakpoints must start at 0 and contain at least one panel".into(),
            ));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidParam(
                "panel breakpoints must be finite and strictly increasing".into(),
            ));
        }
        let prec = rule.precision();
        let p = prec.bits();
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * rule.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        let mut halves = Vec::with_capacity(breaks.len() - 1);
        for w in breaks.windows(2) {
            let lo = prec.real(w[0]);
            let hi = prec.real(w[1]);
            let half = Float::with_val(p, &hi - &lo) / 2u32;
            let mid = Float::with_val(p, &hi + &lo) / 2u32;
            for (t, wt) in rule.nodes().iter().zip(rule.weights()) {
                nodes.push(Float::with_val(p, &half * t) + &mid);
                weights.push(Float::with_val(p, &half * wt));
            }
            halves.push(half);
        }
        Ok(PanelGrid {
            breaks,
            rule,
            nodes,
            weights,
            halves,
        })
    }

    /// Graded panels on [0, cutoff]: `core_width` where the weight e^{-2φ}
    /// is slowly varying (near the origin and the wells), narrowing as
    /// `kappa / (2|φ′| + 1)` in the tail so that each panel resolves a
    /// bounded change of the exponent.
    pub fn graded(a: f64, cutoff: f64, spec: GridSpec, prec: Precision) -> Result<Self> {
        let rule = Arc::new(GaussLegendre::new(spec.nodes_per_panel, prec)?);
        Self::graded_with_rule(a, cutoff, spec, rule)
    }

    pub fn graded_with_rule(a: f64, cutoff: f64, spec: GridSpec, rule: Arc<GaussLegendre>) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::InvalidParam(format!("cutoff must be positive, got {cutoff}")));
        }
        if !(spec.core_width > 0.0 && spec.kappa > 0.0) {
            return Err(Error::InvalidParam(format!("invalid grid spec {spec:?}")));
        }
        let slope = |x: f64| {
            let h = 1e-6 * x.max(1.0);
            ((leading_phase(a, x + h) - leading_phase(a, (x - h).max(0.0))) / (x + h - (x - h).max(0.0))).abs()
        };
        let width = |x: f64| spec.core_width.min(spec.kappa / (2.0 * slope(x) + 1.0));
        let mut breaks = vec![0.0];
        let mut x = 0.0;
        loop {
            let mut w = width(x);
            w = w.min(width(x + w));
            w = w.min(width(x + w));
            if x + 1.5 * w >= cutoff {
                breaks.push(cutoff);
                break;
            }
            x += w;
            breaks.push(x);
        }
        Self::with_rule(breaks, rule)
    }

    pub fn precision(&self) -> Precision {
        self.rule.precision()
    }

    pub fn rule(&self) -> &Arc<GaussLegendre> {
        &self.rule
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn cutoff(&self) -> f64 {
        *self.breaks.last().expect("grid has at least one panel")
    }

    pub fn panel_count(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.rule.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[BigReal] {
        &self.nodes
    }

    pub fn weights(&self) -> &[BigReal] {
        &self.weights
    }

    /// Evaluates `f` at every node, rejecting non-finite values.
    pub fn sample<F>(&self, what: &str, mut f: F) -> Result<Vec<BigReal>>
    where
        F: FnMut(&BigReal) -> Result<BigReal>,
    {
        self.nodes
            .iter()
            .map(|x| {
                let v = f(x)?;
                ensure_finite(&v, x.to_f64(), what)?;
                Ok(v)
            })
            .collect()
    }

    /// Panel index and local coordinate t ∈ [-1, 1] of 0 ≤ x ≤ X.
    pub fn locate(&self, x: &BigReal) -> Option<(usize, BigReal)> {
        let xf = x.to_f64();
        if x.is_sign_negative() && !x.is_zero() || xf > self.cutoff() {
            return None;
        }
        let panel = match self.breaks.partition_point(|b| *b <= xf) {
            0 => 0,
            k => (k - 1).min(self.panel_count() - 1),
        };
        let p = self.precision().bits();
        let mid = (Float::with_val(p, self.breaks[panel]) + self.breaks[panel + 1]) / 2u32;
        let t = Float::with_val(p, x - &mid) / &self.halves[panel];
        Some((panel, t))
    }

    fn panel_values<'a>(&self, values: &'a [BigReal], panel: usize) -> &'a [BigReal] {
        let n = self.nodes_per_panel();
        &values[panel * n..(panel + 1) * n]
    }

    fn panel_total(&self, values: &[BigReal], panel: usize) -> BigReal {
        let p = self.precision().bits();
        let n = self.nodes_per_panel();
        let mut acc = Float::new(p);
        for (v, w) in values[panel * n..(panel + 1) * n]
            .iter()
            .zip(&self.weights[panel * n..(panel + 1) * n])
        {
            acc += Float::with_val(p, v * w);
        }
        acc
    }
}

/// Integral value with an error estimate from the resolution of each panel.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub value: BigReal,
    pub err_est: BigReal,
}

/// Sampled function on the nodes of a grid, extended to x < 0 by parity.
#[derive(Clone, Debug)]
pub struct CurveTable {
    grid: Arc<PanelGrid>,
    values: Vec<BigReal>,
    parity: Parity,
}

impl CurveTable {
    pub fn new(grid: Arc<PanelGrid>, values: Vec<BigReal>, parity: Parity) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParam(format!(
                "table has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(CurveTable {
            grid,
            values,
            parity,
        })
    }

    pub fn from_fn<F>(grid: Arc<PanelGrid>, parity: Parity, what: &str, f: F) -> Result<Self>
    where
        F: FnMut(&BigReal) -> Result<BigReal>,
    {
        let values = grid.sample(what, f)?;
        Ok(CurveTable {
            grid,
            values,
            parity,
        })
    }

    pub fn grid(&self) -> &Arc<PanelGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[BigReal] {
        &self.values
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Value at any |x| ≤ X by per-panel polynomial interpolation.
    pub fn eval(&self, x: &BigReal) -> Result<BigReal> {
        let p = self.grid.precision().bits();
        let ax = Float::with_val(p, x.abs_ref());
        let (panel, t) = self.grid.locate(&ax).ok_or_else(|| {
            Error::Window(format!(
                "x = {} lies outside the table range [−{X}, {X}]",
                x.to_f64(),
                X = self.grid.cutoff()
            ))
        })?;
        let v = self
            .grid
            .rule
            .interpolate(self.grid.panel_values(&self.values, panel), &t);
        if x.is_sign_negative() && self.parity == Parity::Odd {
            Ok(-v)
        } else {
            Ok(v)
        }
    }

    pub fn eval_f64(&self, x: f64) -> Result<f64> {
        Ok(self.eval(&self.grid.precision().real(x))?.to_f64())
    }

    /// Pointwise product on the shared grid.
    pub fn product(&self, other: &CurveTable) -> Result<CurveTable> {
        if !Arc::ptr_eq(&self.grid, &other.grid) {
            return Err(Error::InvalidParam("tables live on different grids".into()));
        }
        let p = self.grid.precision().bits();
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| Float::with_val(p, a * b))
            .collect();
        Ok(CurveTable {
            grid: self.grid.clone(),
            values,
            parity: self.parity.times(other.parity),
        })
    }

    /// CSV of the stored node values, header `x,value`.
    pub fn write_csv<W: Write>(&self, mut out: W, digits: usize) -> io::Result<()> {
        writeln!(out, "x,value")?;
        for (x, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(out, "{},{}", to_sci(x, 20), to_sci(v, digits))?;
        }
        Ok(())
    }

    /// CSV of `count + 1` equally spaced samples on [0, x_max].
    pub fn write_sampled_csv<W: Write>(&self, mut out: W, x_max: f64, count: usize, digits: usize) -> Result<()> {
        let io = |e: io::Error| Error::Domain(format!("write failed: {e}"));
        writeln!(out, "x,value").map_err(io)?;
        let prec = self.grid.precision();
        for i in 0..=count {
            let x = prec.real(x_max * i as f64 / count as f64);
            let v = if x.is_zero() && self.parity == Parity::Odd {
                prec.zero()
            } else {
                self.eval(&x)?
            };
            writeln!(out, "{},{}", to_sci(&x, 17), to_sci(&v, digits)).map_err(io)?;
        }
        Ok(())
    }
}

/// ∫₀^X over node values.
pub fn integrate_half(grid: &PanelGrid, values: &[BigReal]) -> Quadrature {
    let p = grid.precision().bits();
    let mut value = Float::new(p);
    let mut err_est = Float::new(p);
    for panel in 0..grid.panel_count() {
        value += grid.panel_total(values, panel);
        let est = grid.rule.tail_estimate(grid.panel_values(values, panel));
        err_est += est * &grid.halves[panel];
    }
    Quadrature { value, err_est }
}

/// ∫_{-X}^{X} f: twice the half-line integral for even f, exactly 0 for odd f.
pub fn integrate_line(f: &CurveTable) -> Quadrature {
    let prec = f.grid.precision();
    match f.parity {
        Parity::Odd => Quadrature {
            value: prec.zero(),
            err_est: prec.zero(),
        },
        Parity::Even => {
            let q = integrate_half(&f.grid, &f.values);
            Quadrature {
                value: q.value * 2u32,
                err_est: q.err_est * 2u32,
            }
        }
    }
}

/// F(x_i) = ∫₀^{x_i} f at every node.
pub fn cumulative_at_nodes(grid: &PanelGrid, values: &[BigReal]) -> Vec<BigReal> {
    let p = grid.precision().bits();
    let n = grid.nodes_per_panel();
    let mut out = Vec::with_capacity(values.len());
    let mut before = Float::new(p);
    for panel in 0..grid.panel_count() {
        let fv = grid.panel_values(values, panel);
        for row in &grid.rule.left {
            let mut acc = Float::new(p);
            for (w, v) in row.iter().zip(fv) {
                acc += Float::with_val(p, w * v);
            }
            out.push(Float::with_val(p, &acc * &grid.halves[panel]) + &before);
        }
        before += grid.panel_total(values, panel);
        debug_assert_eq!(out.len(), (panel + 1) * n);
    }
    out
}

/// T(x_i) = ∫_{x_i}^{X} f at every node, accumulated from the right so
/// that small tails are never formed as differences of O(1) numbers.
pub fn tail_at_nodes(grid: &PanelGrid, values: &[BigReal]) -> Vec<BigReal> {
    let p = grid.precision().bits();
    let n = grid.nodes_per_panel();
    let mut out = vec![Float::new(p); values.len()];
    let mut after = Float::new(p);
    for panel in (0..grid.panel_count()).rev() {
        let fv = grid.panel_values(values, panel);
        for (i, row) in grid.rule.right.iter().enumerate() {
            let mut acc = Float::new(p);
            for (w, v) in row.iter().zip(fv) {
                acc += Float::with_val(p, w * v);
            }
            out[panel * n + i] = Float::with_val(p, &acc * &grid.halves[panel]) + &after;
        }
        after += grid.panel_total(values, panel);
    }
    out
}

/// Running integral from 0 as a table; its parity is the opposite of f's.
pub fn integrate_cumulative(f: &CurveTable) -> CurveTable {
    CurveTable {
        grid: f.grid.clone(),
        values: cumulative_at_nodes(&f.grid, &f.values),
        parity: f.parity.flip(),
    }
}

/// ∫_x^X f for 0 ≤ x ≤ X.
pub fn integrate_tail(f: &CurveTable, x: &BigReal) -> Result<BigReal> {
    let grid = &f.grid;
    let (panel, t) = grid.locate(x).ok_or_else(|| {
        Error::Window(format!(
            "tail start {} lies outside [0, {}]",
            x.to_f64(),
            grid.cutoff()
        ))
    })?;
    let p = grid.precision().bits();
    let mut acc = Float::new(p);
    for q in (panel + 1..grid.panel_count()).rev() {
        acc += grid.panel_total(&f.values, q);
    }
    let weights = grid.rule.right_weights(&t);
    let mut part = Float::new(p);
    for (w, v) in weights.iter().zip(grid.panel_values(&f.values, panel)) {
        part += Float::with_val(p, w * v);
    }
    Ok(acc + part * &grid.halves[panel])
}
