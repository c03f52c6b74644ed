//! Interpolating trial functions for the two lowest states.
//!
//! With s = D² + 2x² and F = (6A + (D² + 3a)x² + 4x⁴) / (6√s),
//!
//! ```text
//! even:  ψ = s^{-1/2} cosh(αx/√s) e^{-F}
//! odd:   ψ = s^{-1/2} sinh(αx/√s) e^{-F}
//! ```
//!
//! Both decay like |x|^{-1} e^{-(√2/3)|x|³ − a|x|/2^{3/2}}, the behaviour of
//! every exact eigenfunction.
//!
//! The logarithmic derivative is taken with the sign of the phase,
//! y₀ = -(log ψ)′ = φ′, so that V₀ = ψ″/ψ = y₀² − y₀′ and y₀ grows like
//! √2 x² at large x. Every derivative below is a closed form; nothing is
//! differenced numerically.

use rug::{Float, Rational};

use crate::error::{Error, Result};
use crate::model::{check_coupling, Parity, TrialParams};
use crate::num::{BigReal, Precision};

/// Taylor coefficients of coth(u) − 1/u = Σ c_n u^{2n−1}, c_n = 2^{2n} B_{2n} / (2n)!.
const BERNOULLI_EVEN: [(i64, i64); 10] = [
    (1, 6),
    (-1, 30),
    (1, 42),
    (-1, 30),
    (5, 66),
    (-691, 2730),
    (7, 6),
    (-3617, 510),
    (43867, 798),
    (-174611, 330),
];

#[derive(Clone, Debug)]
struct Consts {
    a: BigReal,
    big_a: BigReal,
    d2: BigReal,
    d2_plus_3a: BigReal,
    alpha: BigReal,
    coth_series: Vec<BigReal>,
    series_cut: BigReal,
}

/// Everything that depends on x but not on the parity branch.
struct Kernel {
    x2: BigReal,
    s: BigReal,
    f: BigReal,
    f1: BigReal,
    f2: BigReal,
    u: BigReal,
    u1: BigReal,
    u2: BigReal,
    /// 2x/s and its derivative.
    q: BigReal,
    q1: BigReal,
}

/// All pointwise quantities of a trial function at one x.
#[derive(Clone, Debug)]
pub struct TrialPoint {
    pub log_abs_psi: BigReal,
    /// Sign of ψ: +1, −1, or 0 at the odd node.
    pub sign: i32,
    /// y₀ for even parity, y₀ + 1/x for odd parity.
    pub y0_reg: BigReal,
    pub y0_reg_prime: BigReal,
    pub v0: BigReal,
}

#[derive(Clone, Debug)]
pub struct TrialFunction {
    params: TrialParams,
    a: f64,
    prec: Precision,
    c: Consts,
}

impl TrialFunction {
    pub fn new(a: f64, params: TrialParams, prec: Precision) -> Result<Self> {
        check_coupling(a)?;
        params.validate()?;
        let p = prec.bits();
        let d = prec.real(params.d);
        let d2 = Float::with_val(p, d.square_ref());
        let a_big = prec.real(a);
        let d2_plus_3a = Float::with_val(p, &d2 + Float::with_val(p, &a_big * 3u32));
        let coth_series = BERNOULLI_EVEN
            .iter()
            .enumerate()
            .map(|(i, &(num, den))| {
                let n = (i + 1) as u32;
                let fact: Rational = (1..=2 * n).map(Rational::from).product();
                let c = Rational::from((num, den)) * Rational::from(1u64 << (2 * n)) / fact;
                Float::with_val(p, &c)
            })
            .collect();
        let series_cut = Float::with_val(p, 1) >> (p / 20) as i32;
        let c = Consts {
            a: a_big,
            big_a: prec.real(params.big_a) * 6u32,
            d2,
            d2_plus_3a,
            alpha: prec.real(params.alpha),
            coth_series,
            series_cut,
        };
        Ok(TrialFunction { params, a, prec, c })
    }

    pub fn params(&self) -> &TrialParams {
        &self.params
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn parity(&self) -> Parity {
        self.params.parity
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    /// Same function evaluated at a different precision.
    pub fn with_precision(&self, prec: Precision) -> Result<Self> {
        TrialFunction::new(self.a, self.params, prec)
    }

    fn kernel(&self, x: &BigReal) -> Kernel {
        let p = self.prec.bits();
        let c = &self.c;
        let x = Float::with_val(p, x);
        let x2 = Float::with_val(p, x.square_ref());
        let s = Float::with_val(p, &c.d2 + Float::with_val(p, &x2 * 2u32));
        let r = Float::with_val(p, s.sqrt_ref());
        let sr = Float::with_val(p, &s * &r);
        let ssr = Float::with_val(p, &s * &sr);

        // N = 6A + (D²+3a)x² + 4x⁴ and its first two derivatives
        let big_n = Float::with_val(p, &c.d2_plus_3a * &x2)
            + &c.big_a
            + Float::with_val(p, x2.square_ref()) * 4u32;
        let n1 = Float::with_val(p, &c.d2_plus_3a * &x) * 2u32 + Float::with_val(p, &x * &x2) * 16u32;
        let n2 = Float::with_val(p, &c.d2_plus_3a * 2u32) + Float::with_val(p, &x2 * 48u32);

        let six_r = Float::with_val(p, &r * 6u32);
        let three_sr = Float::with_val(p, &sr * 3u32);
        let f = Float::with_val(p, &big_n / &six_r);
        let nx = Float::with_val(p, &big_n * &x);
        let f1 = Float::with_val(p, &n1 / &six_r) - Float::with_val(p, &nx / &three_sr);
        let f2 = Float::with_val(p, &n2 / &six_r)
            - Float::with_val(p, &n1 * &x) * 2u32 / &three_sr
            - Float::with_val(p, &big_n / &three_sr)
            + Float::with_val(p, &nx * &x) * 2u32 / &ssr;

        let u = Float::with_val(p, &c.alpha * &x) / &r;
        let ad2 = Float::with_val(p, &c.alpha * &c.d2);
        let u1 = Float::with_val(p, &ad2 / &sr);
        let u2 = -(Float::with_val(p, &ad2 * &x) * 6u32 / &ssr);

        let s2 = Float::with_val(p, s.square_ref());
        let q = Float::with_val(p, &x * 2u32) / &s;
        let q1 = (Float::with_val(p, &c.d2 - Float::with_val(p, &x2 * 2u32)) * 2u32) / &s2;

        Kernel {
            x2,
            s,
            f,
            f1,
            f2,
            u,
            u1,
            u2,
            q,
            q1,
        }
    }

    /// (coth u − 1/u, 1/u² − csch² u), both smooth through u = 0.
    fn coth_regular(&self, u: &BigReal) -> (BigReal, BigReal) {
        let p = self.prec.bits();
        let c = &self.c;
        if Float::with_val(p, u.abs_ref()) < c.series_cut {
            let uu = Float::with_val(p, u.square_ref());
            let mut g = self.prec.zero();
            let mut g1 = self.prec.zero();
            for (i, cn) in c.coth_series.iter().enumerate().rev() {
                g = g * &uu + cn;
                g1 = g1 * &uu + Float::with_val(p, cn * (2 * i as u32 + 1));
            }
            (g * u, g1)
        } else {
            let inv = Float::with_val(p, u.recip_ref());
            let g = Float::with_val(p, u.coth_ref()) - &inv;
            let g1 = Float::with_val(p, inv.square_ref()) - Float::with_val(p, u.csch_ref()).square();
            (g, g1)
        }
    }

    /// −log of the prefactor and exponential, φ = F + ½ log s.
    pub fn phase(&self, x: &BigReal) -> BigReal {
        let p = self.prec.bits();
        let k = self.kernel(x);
        k.f + Float::with_val(p, k.s.ln_ref()) / 2u32
    }

    /// log|ψ(x)|, unnormalized.
    pub fn log_abs_psi(&self, x: &BigReal) -> BigReal {
        let k = self.kernel(x);
        self.log_abs_psi_from(&k)
    }

    fn log_abs_psi_from(&self, k: &Kernel) -> BigReal {
        let p = self.prec.bits();
        let prefactor = -(Float::with_val(p, k.s.ln_ref()) / 2u32);
        let au = Float::with_val(p, k.u.abs_ref());
        let hyper = match self.params.parity {
            // ln cosh u = |u| + ln(1 + e^{-2|u|}) − ln 2
            Parity::Even => {
                let t = Float::with_val(p, &au * -2i32).exp().ln_1p();
                au + t - self.prec.ln2()
            }
            Parity::Odd => Float::with_val(p, au.sinh_ref()).ln(),
        };
        prefactor + hyper - &k.f
    }

    fn sign_at(&self, x: &BigReal) -> i32 {
        match self.params.parity {
            Parity::Even => 1,
            Parity::Odd => {
                if x.is_zero() {
                    0
                } else if x.is_sign_negative() {
                    -1
                } else {
                    1
                }
            }
        }
    }

    /// ψ(x), unnormalized.
    pub fn psi(&self, x: &BigReal) -> BigReal {
        let sign = self.sign_at(x);
        if sign == 0 {
            return self.prec.zero();
        }
        let v = self.log_abs_psi(x).exp();
        if sign < 0 {
            -v
        } else {
            v
        }
    }

    /// (y₀_reg, y₀_reg′) from a kernel. For odd parity the 1/x pole is removed.
    fn y0_parts(&self, k: &Kernel) -> (BigReal, BigReal) {
        let p = self.prec.bits();
        let pq = k.q.clone();
        let pq1 = k.q1.clone();
        let u1sq = Float::with_val(p, k.u1.square_ref());
        match self.params.parity {
            Parity::Even => {
                let t = Float::with_val(p, k.u.tanh_ref());
                let sech2 = Float::with_val(p, 1) - Float::with_val(p, t.square_ref());
                let y = pq - Float::with_val(p, &t * &k.u1) + &k.f1;
                let yp = pq1 - (sech2 * &u1sq + Float::with_val(p, &t * &k.u2)) + &k.f2;
                (y, yp)
            }
            Parity::Odd => {
                // coth(u)u′ = (coth u − 1/u)u′ + 1/x − 2x/s
                let (g, g1) = self.coth_regular(&k.u);
                let y = pq - Float::with_val(p, &g * &k.u1) + &k.q + &k.f1;
                let yp = pq1 - (g1 * &u1sq + Float::with_val(p, &g * &k.u2)) + &k.q1 + &k.f2;
                (y, yp)
            }
        }
    }

    fn v0_from(&self, x: &BigReal, y: &BigReal, yp: &BigReal) -> BigReal {
        let p = self.prec.bits();
        let ysq = Float::with_val(p, y.square_ref());
        match self.params.parity {
            Parity::Even => ysq - yp,
            // y₀ = y_reg − 1/x  ⇒  V₀ = y_reg² − 2 y_reg/x − y_reg′
            Parity::Odd => {
                let ratio = if x.is_zero() {
                    yp.clone()
                } else {
                    Float::with_val(p, y / x)
                };
                ysq - ratio * 2u32 - yp
            }
        }
    }

    /// Logarithmic derivative y₀ = −ψ′/ψ.
    pub fn y0(&self, x: &BigReal) -> Result<BigReal> {
        let (y, _) = self.y0_parts(&self.kernel(x));
        match self.params.parity {
            Parity::Even => Ok(y),
            Parity::Odd => {
                if x.is_zero() {
                    return Err(Error::Pole);
                }
                let p = self.prec.bits();
                Ok(y - Float::with_val(p, x.recip_ref()))
            }
        }
    }

    pub fn y0_prime(&self, x: &BigReal) -> Result<BigReal> {
        let (_, yp) = self.y0_parts(&self.kernel(x));
        match self.params.parity {
            Parity::Even => Ok(yp),
            Parity::Odd => {
                if x.is_zero() {
                    return Err(Error::Pole);
                }
                let p = self.prec.bits();
                let inv = Float::with_val(p, x.recip_ref());
                Ok(yp + inv.square())
            }
        }
    }

    /// Pole-subtracted logarithmic derivative: y₀ + 1/x for odd parity,
    /// y₀ itself for even parity. Smooth everywhere.
    pub fn y0_reg(&self, x: &BigReal) -> BigReal {
        self.y0_parts(&self.kernel(x)).0
    }

    pub fn y0_reg_prime(&self, x: &BigReal) -> BigReal {
        self.y0_parts(&self.kernel(x)).1
    }

    /// Potential V₀ = y₀² − y₀′ for which ψ is an exact zero-energy eigenfunction.
    pub fn v0(&self, x: &BigReal) -> BigReal {
        let k = self.kernel(x);
        let (y, yp) = self.y0_parts(&k);
        self.v0_from(x, &y, &yp)
    }

    /// V(x) = a x² + 2x⁴.
    pub fn potential(&self, x: &BigReal) -> BigReal {
        let p = self.prec.bits();
        let x2 = Float::with_val(p, x.square_ref());
        let quartic = Float::with_val(p, x2.square_ref()) * 2u32;
        x2 * &self.c.a + quartic
    }

    /// Perturbation V₁ = V − V₀.
    pub fn v1(&self, x: &BigReal) -> BigReal {
        self.potential(x) - self.v0(x)
    }

    pub fn eval(&self, x: &BigReal) -> TrialPoint {
        let k = self.kernel(x);
        let (y, yp) = self.y0_parts(&k);
        let v0 = self.v0_from(x, &y, &yp);
        TrialPoint {
            log_abs_psi: self.log_abs_psi_from(&k),
            sign: self.sign_at(x),
            y0_reg: y,
            y0_reg_prime: yp,
            v0,
        }
    }

    /// Counts sign changes of ψ on [−X, X] from a symmetric sample that
    /// includes the origin. An exact zero is a node when the signs on either
    /// side of it differ.
    pub fn node_count(&self, cutoff: f64) -> usize {
        const SAMPLES: i64 = 2048;
        let mut nodes = 0;
        let mut last = 0;
        for i in -SAMPLES..=SAMPLES {
            let x = self.prec.real(cutoff * i as f64 / SAMPLES as f64);
            // the sign is exact; the magnitude only needs to be non-zero
            let s = if self.sign_at(&x) == 0 {
                0
            } else if self.log_abs_psi(&x).is_finite() {
                self.sign_at(&x)
            } else {
                0
            };
            if s != 0 {
                if last != 0 && s != last {
                    nodes += 1;
                }
                last = s;
            }
        }
        nodes
    }

    /// Leading growth of V₀ at large x, used by callers as a scale.
    pub fn kernel_x2(&self, x: &BigReal) -> BigReal {
        self.kernel(x).x2
    }
}

/// φ_int(x) = [6A + (D² + 3a)x² + 4x⁴] / [6(D² + 2x²)^{1/2}] + ((n+1)/2)·log(D² + 2x²).
pub fn phase_int(x: &BigReal, a: f64, big_a: f64, d: f64, n: u32, prec: Precision) -> Result<BigReal> {
    let p = prec.bits();
    let x = Float::with_val(p, x);
    let x2 = Float::with_val(p, x.square_ref());
    let d2 = Float::with_val(p, prec.real(d).square_ref());
    let s = Float::with_val(p, &d2 + Float::with_val(p, &x2 * 2u32));
    if s.is_zero() {
        return Err(Error::Singular(format!(
            "D² + 2x² vanishes at x = {}, D = {d}",
            x.to_f64()
        )));
    }
    let num = prec.real(big_a) * 6u32
        + (Float::with_val(p, prec.real(a) * 3u32) + &d2) * &x2
        + Float::with_val(p, x2.square_ref()) * 4u32;
    let r = Float::with_val(p, s.sqrt_ref());
    let log_term = Float::with_val(p, s.ln_ref()) * (n + 1) / 2u32;
    Ok(num / (r * 6u32) + log_term)
}
