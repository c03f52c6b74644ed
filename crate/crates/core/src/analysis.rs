//! Composite computations: the level splitting from perturbation theory or
//! the reference solver, the coupling at which the ground energy vanishes,
//! and sampled y_k curves for plotting.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instanton::{self, GapSeries, InstantonRow};
use crate::model::{cutoff_from, default_cutoff, Parity, TrialParams};
use crate::num::{serde_big, to_sci, BigReal, Precision};
use crate::pt::{pt_series, SeriesState};
use crate::quad::{GridSpec, PanelGrid};
use crate::reference::{reference_eigen_with, reference_energy, ReferenceOptions};
use crate::trial::TrialFunction;
use crate::varopt::{cold_seed, optimize_with, OptimizeOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Pt,
    Reference,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Pt => "pt",
            Mode::Reference => "reference",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pt" => Ok(Mode::Pt),
            "reference" | "ref" => Ok(Mode::Reference),
            _ => Err(Error::InvalidParam(format!("mode must be pt or reference, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GapOptions {
    pub precision: Precision,
    /// Fixed (even, odd) parameters; optimized from cold seeds when absent.
    pub params: Option<(TrialParams, TrialParams)>,
    pub optimize: OptimizeOptions,
    pub grid: GridSpec,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            precision: Precision::DEFAULT,
            params: None,
            optimize: OptimizeOptions::default(),
            grid: GridSpec::DEFAULT,
        }
    }
}

/// One parity's contribution to the gap.
#[derive(Clone, Debug)]
pub struct Side {
    pub params: Option<TrialParams>,
    /// PT partial sums Ẽ^(1..=K+1), or the single reference energy.
    pub sums: Vec<BigReal>,
    pub err_est: BigReal,
}

#[derive(Clone, Debug)]
pub struct GapResult {
    pub a: f64,
    pub order: usize,
    pub mode: Mode,
    pub ground: Side,
    pub excited: Side,
    /// ΔE^(k) for k = 0..=K (k = 0 is the variational gap); one entry in
    /// reference mode.
    pub gaps: Vec<BigReal>,
    pub instanton: GapSeries,
}

impl GapResult {
    pub fn delta(&self, k: usize) -> Option<&BigReal> {
        self.gaps.get(k)
    }

    /// The gap the instanton sums are compared with: ΔE^(2) when available,
    /// otherwise the highest computed order.
    pub fn comparison_gap(&self) -> &BigReal {
        self.gaps.get(2).unwrap_or_else(|| self.gaps.last().expect("at least one gap"))
    }

    pub fn instanton_deviations(&self) -> Vec<f64> {
        self.instanton
            .deviations(self.comparison_gap())
            .iter()
            .map(|d| d.to_f64())
            .collect()
    }

    pub fn report(&self) -> GapReport {
        let digits = self.gaps[0].prec() as usize * 3 / 10;
        let strs = |v: &[BigReal]| v.iter().map(|x| to_sci(x, digits)).collect::<Vec<_>>();
        GapReport {
            a: self.a,
            order: self.order,
            mode: self.mode,
            ground_params: self.ground.params,
            excited_params: self.excited.params,
            ground_sums: strs(&self.ground.sums),
            excited_sums: strs(&self.excited.sums),
            gaps: strs(&self.gaps),
            err_est: to_sci(
                &Float::with_val(self.gaps[0].prec(), &self.ground.err_est + &self.excited.err_est),
                3,
            ),
            instanton: instanton::table(&self.instanton, Some(self.comparison_gap()), 6),
        }
    }
}

/// Serializable form of [`GapResult`]; numbers are decimal strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub a: f64,
    pub order: usize,
    pub mode: Mode,
    pub ground_params: Option<TrialParams>,
    pub excited_params: Option<TrialParams>,
    pub ground_sums: Vec<String>,
    pub excited_sums: Vec<String>,
    /// ΔE_var, ΔE^(1), … in order.
    pub gaps: Vec<String>,
    pub err_est: String,
    /// Partial sums with deviations relative to ΔE^(2).
    pub instanton: Vec<InstantonRow>,
}

fn pt_side(a: f64, parity: Parity, order: usize, fixed: Option<TrialParams>, opts: &GapOptions) -> Result<Side> {
    let params = match fixed {
        Some(p) => p,
        None => optimize_with(a, cold_seed(a, parity), &opts.optimize)?.best,
    };
    let tf = TrialFunction::new(a, params, opts.precision)?;
    let grid = Arc::new(PanelGrid::graded(a, default_cutoff(a, opts.precision), opts.grid, opts.precision)?);
    let st = pt_series(&tf, order + 1, grid)?;
    Ok(Side {
        params: Some(params),
        sums: st.partial_sums(),
        err_est: st.err_est(),
    })
}

fn reference_side(a: f64, parity: Parity, prec: Precision) -> Result<Side> {
    let (e, residual) = reference_energy(a, parity, 0, &ReferenceOptions::with_precision(prec))?;
    Ok(Side {
        params: None,
        sums: vec![e],
        err_est: prec.real(residual),
    })
}

/// ΔE = E(odd ground) − E(even ground) at coupling `a` (a < 0).
///
/// In PT mode both series run to order K + 1 so that ΔE^(k) uses
/// E₁ … E_{k+1} on both sides; all subtractions stay in BigReal.
pub fn gap(a: f64, order: usize, mode: Mode, opts: &GapOptions) -> Result<GapResult> {
    if !(a < 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("the gap is computed for double wells (a < 0), got a = {a}")));
    }
    if order == 0 {
        return Err(Error::InvalidParam("gap order K must be at least 1".into()));
    }
    if let Some((even, odd)) = opts.params {
        if even.parity != Parity::Even || odd.parity != Parity::Odd {
            return Err(Error::InvalidParam("gap parameters must be (even, odd)".into()));
        }
    }
    let fixed = |parity: Parity| {
        opts.params.map(|(e, o)| if parity == Parity::Even { e } else { o })
    };
    let run = |parity: Parity| match mode {
        Mode::Pt => pt_side(a, parity, order, fixed(parity), opts),
        Mode::Reference => reference_side(a, parity, opts.precision),
    };
    let (ground, excited) = std::thread::scope(|s| {
        let h = s.spawn(|| run(Parity::Odd));
        let g = run(Parity::Even);
        (g, h.join().unwrap_or_else(|_| Err(Error::Domain("excited-state worker panicked".into()))))
    });
    let (ground, excited) = (ground?, excited?);
    let p = opts.precision.bits();
    let gaps = ground
        .sums
        .iter()
        .zip(&excited.sums)
        .map(|(g, e)| Float::with_val(p, e - g))
        .collect();
    Ok(GapResult {
        a,
        order,
        mode,
        ground,
        excited,
        gaps,
        instanton: GapSeries::new(a, opts.precision)?,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalResult {
    #[serde(with = "serde_big")]
    pub a_crit: BigReal,
    /// a_crit / 2^{2/3}, the same point for −d²/dx² + m²x² + x⁴.
    #[serde(with = "serde_big")]
    pub m2_crit: BigReal,
    /// Final bracket; the ground energy changes sign across it.
    pub bracket: (f64, f64),
    #[serde(with = "serde_big")]
    pub energy_at_root: BigReal,
    pub iterations: usize,
    pub mode: Mode,
}

#[derive(Clone, Debug)]
pub struct CriticalOptions {
    pub mode: Mode,
    pub bracket: (f64, f64),
    pub precision: Precision,
    pub optimize: OptimizeOptions,
    pub max_iterations: usize,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions {
            mode: Mode::Reference,
            bracket: (-5.0, -2.0),
            precision: Precision::DEFAULT,
            optimize: OptimizeOptions::default(),
            max_iterations: 100,
        }
    }
}

/// Ground-state energy as a function of a for the root search.
struct GroundEnergy<'o> {
    opts: &'o CriticalOptions,
    /// Continuation seed: the optimum at the last evaluated coupling.
    seed: Option<TrialParams>,
}

impl GroundEnergy<'_> {
    fn at(&mut self, a: f64) -> Result<BigReal> {
        let prec = self.opts.precision;
        match self.opts.mode {
            Mode::Reference => Ok(reference_energy(a, Parity::Even, 0, &ReferenceOptions::with_precision(prec))?.0),
            Mode::Pt => {
                let seed = self.seed.unwrap_or_else(|| cold_seed(a, Parity::Even));
                let best = optimize_with(a, seed, &self.opts.optimize)?.best;
                self.seed = Some(best);
                let tf = TrialFunction::new(a, best, prec)?;
                let grid = Arc::new(PanelGrid::graded(a, default_cutoff(a, prec), GridSpec::DEFAULT, prec)?);
                let st = pt_series(&tf, 3, grid)?;
                Ok(st.partial_sums().pop().expect("order 3"))
            }
        }
    }
}

/// Root of a ↦ E_ground(a) by the Illinois variant of regula falsi.
pub fn critical_a(tol: f64, opts: &CriticalOptions) -> Result<CriticalResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParam(format!("tolerance must be positive, got {tol}")));
    }
    let (mut lo, mut hi) = opts.bracket;
    let mut f = GroundEnergy { opts, seed: None };
    let mut f_lo = f.at(lo)?.to_f64();
    let mut f_hi = f.at(hi)?.to_f64();
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket {
            lo,
            hi,
            hint: format!("ground energies {f_lo:e} and {f_hi:e} have the same sign; move the bracket"),
        });
    }
    let mut side = 0i8;
    let mut c = lo;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        c = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let fc = f.at(c)?.to_f64();
        if fc == 0.0 {
            lo = c;
            hi = c;
            break;
        }
        if fc.signum() == f_hi.signum() {
            hi = c;
            f_hi = fc;
            if side == 1 {
                f_lo /= 2.0;
            }
            side = 1;
        } else {
            lo = c;
            f_lo = fc;
            if side == -1 {
                f_hi /= 2.0;
            }
            side = -1;
        }
        if (hi - lo).abs() <= tol || fc.abs() <= tol {
            break;
        }
    }
    let prec = opts.precision;
    let p = prec.bits();
    let a_crit = prec.real(c);
    let energy_at_root = f.at(c)?;
    let two23 = Float::with_val(p, 4).cbrt();
    Ok(CriticalResult {
        m2_crit: Float::with_val(p, &a_crit / &two23),
        a_crit,
        bracket: (lo.min(hi), lo.max(hi)),
        energy_at_root,
        iterations,
        mode: opts.mode,
    })
}

/// Whether the reference ground state peaks at the origin.
pub fn ground_peaks_at_origin(a: f64, prec: Precision) -> Result<bool> {
    let sol = reference_eigen_with(a, Parity::Even, 0, &ReferenceOptions::with_precision(prec))?;
    let at0 = sol.eigenfunction.eval(&prec.zero())?;
    // The table is scaled so that its largest node value is 1.
    Ok(at0.to_f64() >= 1.0 - 1e-12)
}

/// One sampled curve, written as CSV with header `x,value`.
#[derive(Clone, Debug)]
pub struct SampledCurve {
    pub name: String,
    pub xs: Vec<f64>,
    pub values: Vec<BigReal>,
}

impl SampledCurve {
    pub fn write_csv<W: Write>(&self, mut out: W, digits: usize) -> io::Result<()> {
        writeln!(out, "x,value")?;
        for (x, v) in self.xs.iter().zip(&self.values) {
            writeln!(out, "{x},{}", to_sci(v, digits))?;
        }
        Ok(())
    }

    pub fn sign_changes_beyond(&self, x0: f64) -> usize {
        let signs: Vec<bool> = self
            .xs
            .iter()
            .zip(&self.values)
            .filter(|(x, v)| **x > x0 && !v.is_zero())
            .map(|(_, v)| v.is_sign_negative())
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

pub const DEFAULT_PLOT_RANGE: f64 = 10.0;

/// y₀ and y₁ … y_K on `count + 1` equally spaced points of [0, x_plot].
///
/// The series runs on a grid extended far enough past `x_plot` that every
/// sample lies in the trusted region. For odd parity y₀ is replaced by its
/// pole-free part y₀ − 1/x.
pub fn curves(a: f64, params: TrialParams, order: usize, x_plot: f64, count: usize, prec: Precision) -> Result<(SeriesState, Vec<SampledCurve>)> {
    params.validate()?;
    if !(x_plot > 0.0 && count >= 1) {
        return Err(Error::InvalidParam(format!("plot range must be positive, got {x_plot}")));
    }
    let tf = TrialFunction::new(a, params, prec)?;
    let cutoff = default_cutoff(a, prec).max(cutoff_from(a, x_plot, 40.0));
    let grid = Arc::new(PanelGrid::graded(a, cutoff, GridSpec::DEFAULT, prec)?);
    let st = pt_series(&tf, order, grid)?;
    let xs: Vec<f64> = (0..=count).map(|i| x_plot * i as f64 / count as f64).collect();
    let mut out = Vec::with_capacity(order + 1);
    let (name, y0) = match params.parity {
        Parity::Even => (
            "y0",
            xs.iter().map(|&x| tf.y0(&prec.real(x))).collect::<Result<Vec<_>>>()?,
        ),
        Parity::Odd => ("y0_reg", xs.iter().map(|&x| tf.y0_reg(&prec.real(x))).collect()),
    };
    out.push(SampledCurve {
        name: name.into(),
        xs: xs.clone(),
        values: y0,
    });
    for k in 1..=order {
        let c = st.curve(k).expect("computed order");
        let values = xs
            .iter()
            .map(|&x| c.eval(&prec.real(x)))
            .collect::<Result<Vec<_>>>()?;
        out.push(SampledCurve {
            name: format!("y{k}"),
            xs: xs.clone(),
            values,
        });
    }
    Ok((st, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a_minus_one() -> TrialParams {
        TrialParams::new(-12.4816, 4.059888, 3.07041, Parity::Even).unwrap()
    }

    #[test]
    fn reference_gap_is_positive_and_near_instanton() {
        let r = gap(-20.0, 1, Mode::Reference, &GapOptions::default()).unwrap();
        let g = r.delta(0).unwrap().to_f64();
        assert!(g > 0.0);
        let inst = r.instanton.value(4).unwrap().to_f64();
        assert!(((g - inst) / g).abs() < 1e-3, "{g:e} vs {inst:e}");
        let json = serde_json::to_string(&r.report()).unwrap();
        let back: GapReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r.report());
    }

    #[test]
    fn gap_rejects_single_well_and_zero_order() {
        assert!(matches!(gap(1.0, 1, Mode::Reference, &GapOptions::default()), Err(Error::Domain(_))));
        assert!(gap(-20.0, 0, Mode::Reference, &GapOptions::default()).is_err());
    }

    #[test]
    fn ground_state_peak_moves_off_origin() {
        assert!(ground_peaks_at_origin(-2.0, Precision::DEFAULT).unwrap());
        assert!(!ground_peaks_at_origin(-5.0, Precision::DEFAULT).unwrap());
    }

    #[test]
    fn critical_coupling_from_reference() {
        let r = critical_a(1e-12, &CriticalOptions::default()).unwrap();
        let a = r.a_crit.to_f64();
        assert!((a - (-3.523390749)).abs() < 1e-5, "{a}");
        assert!(r.energy_at_root.to_f64().abs() <= 1e-11);
        assert!(r.bracket.0 <= a && a <= r.bracket.1);
    }

    #[test]
    fn bracket_without_sign_change_is_an_error() {
        let opts = CriticalOptions {
            bracket: (-2.0, -1.0),
            ..CriticalOptions::default()
        };
        assert!(matches!(critical_a(1e-8, &opts), Err(Error::Bracket { .. })));
    }

    #[test]
    fn curves_start_at_zero_and_y0_keeps_its_sign() {
        let (_, cs) = curves(-1.0, a_minus_one(), 2, DEFAULT_PLOT_RANGE, 200, Precision::DEFAULT).unwrap();
        assert_eq!(cs.len(), 3);
        for c in &cs {
            assert!(c.values[0].to_f64().abs() < 1e-40, "{} starts at {}", c.name, c.values[0]);
        }
        assert_eq!(cs[0].sign_changes_beyond(2.0), 0);
        let mut buf = Vec::new();
        cs[1].write_csv(&mut buf, 10).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,value\n0,"));
        assert_eq!(text.lines().count(), 202);
    }
}
