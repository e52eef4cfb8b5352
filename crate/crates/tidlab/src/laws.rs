//! Limit laws and deterministic rates predicted by the phase diagram:
//! evaluation (normalizers, CDFs), sampling, blow-up profiles, transient
//! rates and the ballistic linear-case constants.
//!
//! The exponential-weight families are
//!
//! ```text
//! Lambda_{rho,alpha}(dx) ∝ exp(2 rho |x|^{alpha+1}/(alpha+1)) exp(-x^2/2) dx
//! Pi_{rho,alpha}(dx)     ∝ exp(2 rho |x|^{alpha+1}/(alpha+1)) dx
//! ```
//!
//! on E_alpha = R for alpha > -1 and (0, inf) for alpha <= -1 (with the
//! |x|^{alpha+1}/(alpha+1) term read as ln|x| at alpha = -1). Normalizers
//! are computed by adaptive quadrature; Gaussian, half-Gaussian and
//! sqrt-Gamma limits use closed forms.

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaSampler, StandardNormal};
use serde::Serialize;
use statrs::function::erf::erf;
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::model::{Normalization, Params, Recurrence, Regime};
use crate::quad::{self, Quadrature};
use crate::time_change::TimeChange;

/// Descriptor of a concrete limit law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LawDescriptor {
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// |G| with G standard Gaussian; support (0, inf).
    HalfGaussian,
    /// sqrt(Z) with Z ~ Gamma(shape, scale); the SQUARED variable carries
    /// the (shape, scale) parameters.
    SqrtGamma {
        shape: f64,
        scale: f64,
    },
    Lambda {
        rho: f64,
        alpha: f64,
    },
    Pi {
        rho: f64,
        alpha: f64,
    },
    PointMassZero,
    /// Almost-sure constant limit (deterministic transient rate).
    Deterministic {
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    RealLine,
    PositiveHalfLine,
}

impl LawDescriptor {
    pub fn support(&self) -> Support {
        match *self {
            LawDescriptor::Gaussian { .. } => Support::RealLine,
            LawDescriptor::HalfGaussian | LawDescriptor::SqrtGamma { .. } => {
                Support::PositiveHalfLine
            }
            LawDescriptor::Lambda { alpha, .. } => {
                if alpha > -1.0 {
                    Support::RealLine
                } else {
                    Support::PositiveHalfLine
                }
            }
            LawDescriptor::Pi { .. } => Support::RealLine,
            LawDescriptor::PointMassZero | LawDescriptor::Deterministic { .. } => Support::RealLine,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            LawDescriptor::Gaussian { mean, variance } => format!("N({mean},{variance})"),
            LawDescriptor::HalfGaussian => "half-gaussian".into(),
            LawDescriptor::SqrtGamma { shape, scale } => format!("sqrt-gamma({shape},{scale})"),
            LawDescriptor::Lambda { rho, alpha } => format!("lambda({rho},{alpha})"),
            LawDescriptor::Pi { rho, alpha } => format!("pi({rho},{alpha})"),
            LawDescriptor::PointMassZero => "point-mass-0".into(),
            LawDescriptor::Deterministic { value } => format!("const({value})"),
        }
    }
}

/// Which exponential-weight family a normalizer refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpFamily {
    Lambda,
    Pi,
}

/// Exponent of the drift weight e^{2 rho |x|^{alpha+1}/(alpha+1)}
/// (logarithmic branch at alpha = -1).
#[inline]
fn log_weight(rho: f64, alpha: f64, x: f64) -> f64 {
    if alpha == -1.0 {
        2.0 * rho * x.abs().ln()
    } else {
        2.0 * rho * x.abs().powf(alpha + 1.0) / (alpha + 1.0)
    }
}

fn lambda_density(rho: f64, alpha: f64, x: f64) -> f64 {
    (log_weight(rho, alpha, x) - 0.5 * x * x).exp()
}

fn pi_density(rho: f64, alpha: f64, x: f64) -> f64 {
    log_weight(rho, alpha, x).exp()
}

/// Integrability of the family on its support.
fn integrable(rho: f64, alpha: f64, family: ExpFamily) -> bool {
    match family {
        ExpFamily::Pi => rho < 0.0 && alpha > -1.0,
        ExpFamily::Lambda => {
            if alpha > -1.0 {
                // Gaussian factor wins for alpha < 1; ties at alpha = 1;
                // loses for alpha > 1 unless the weight is non-increasing.
                alpha < 1.0 || (alpha == 1.0 && rho < 0.5) || rho <= 0.0
            } else if alpha == -1.0 {
                // |x|^{2 rho} near 0 needs 2 rho > -1.
                rho > -0.5
            } else {
                // x -> 0+ sends the weight to e^{+inf} unless rho >= 0.
                rho >= 0.0
            }
        }
    }
}

/// Normalizing constant of Lambda or Pi by adaptive quadrature.
pub fn normalizer(rho: f64, alpha: f64, family: ExpFamily, q: &Quadrature) -> Result<f64> {
    if !integrable(rho, alpha, family) {
        return Err(Error::NonIntegrable { rho, alpha });
    }
    let density = move |x: f64| match family {
        ExpFamily::Lambda => lambda_density(rho, alpha, x),
        ExpFamily::Pi => pi_density(rho, alpha, x),
    };
    let support = match family {
        ExpFamily::Pi => Support::RealLine,
        ExpFamily::Lambda => {
            if alpha > -1.0 {
                Support::RealLine
            } else {
                Support::PositiveHalfLine
            }
        }
    };
    let half = quad::integrate_to_infinity(density, 0.0, q)?;
    Ok(match support {
        Support::RealLine => 2.0 * half,
        Support::PositiveHalfLine => half,
    })
}

/// Number of knots in the tabulated inverse CDF used for sampling.
const CDF_KNOTS: usize = 1 << 12;

/// A law with its normalizer (and, for the quadrature-backed families,
/// a monotone CDF table) computed once. Immutable afterwards; safe to share.
#[derive(Debug, Clone)]
pub struct CompiledLaw {
    pub law: LawDescriptor,
    quad: Quadrature,
    table: Option<CdfTable>,
}

#[derive(Debug, Clone)]
struct CdfTable {
    z: f64,
    lo: f64,
    hi: f64,
    knots: Vec<f64>,
    cdf: Vec<f64>,
}

impl CompiledLaw {
    pub fn new(law: LawDescriptor, q: &Quadrature) -> Result<Self> {
        let table = match law {
            LawDescriptor::Lambda { rho, alpha } => Some(build_table(
                rho,
                alpha,
                ExpFamily::Lambda,
                law.support(),
                q,
            )?),
            LawDescriptor::Pi { rho, alpha } => {
                Some(build_table(rho, alpha, ExpFamily::Pi, law.support(), q)?)
            }
            LawDescriptor::Gaussian { variance, .. } if variance <= 0.0 => {
                return Err(Error::InvalidParameters(
                    "gaussian variance must be > 0".into(),
                ))
            }
            LawDescriptor::SqrtGamma { shape, scale } if shape <= 0.0 || scale <= 0.0 => {
                return Err(Error::InvalidParameters(
                    "gamma parameters must be > 0".into(),
                ))
            }
            _ => None,
        };
        Ok(Self {
            law,
            quad: *q,
            table,
        })
    }

    /// CDF at x: closed form where one exists, cached-normalizer quadrature
    /// for the exponential-weight families.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.law {
            LawDescriptor::Gaussian { mean, variance } => normal_cdf((x - mean) / variance.sqrt()),
            LawDescriptor::HalfGaussian => {
                if x <= 0.0 {
                    0.0
                } else {
                    erf(x / std::f64::consts::SQRT_2)
                }
            }
            LawDescriptor::SqrtGamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(shape, x * x / scale)
                }
            }
            LawDescriptor::PointMassZero => {
                if x < 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            LawDescriptor::Deterministic { value } => {
                if x < value {
                    0.0
                } else {
                    1.0
                }
            }
            LawDescriptor::Lambda { rho, alpha } => {
                self.quadrature_cdf(x, |y| lambda_density(rho, alpha, y))
            }
            LawDescriptor::Pi { rho, alpha } => {
                self.quadrature_cdf(x, |y| pi_density(rho, alpha, y))
            }
        }
    }

    fn quadrature_cdf<F: Fn(f64) -> f64>(&self, x: f64, density: F) -> f64 {
        let table = self.table.as_ref().expect("quadrature law carries a table");
        if x <= table.lo {
            return 0.0;
        }
        if x >= table.hi {
            return 1.0;
        }
        let v = quad::integrate(density, table.lo, x, &self.quad).unwrap_or(f64::NAN);
        (v / table.z).clamp(0.0, 1.0)
    }

    /// Draws n samples. The quadrature-backed families invert the monotone
    /// CDF table; the rest use closed-form transforms. Deterministic given
    /// the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        match self.law {
            LawDescriptor::Gaussian { mean, variance } => {
                let sd = variance.sqrt();
                for _ in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(mean + sd * z);
                }
            }
            LawDescriptor::HalfGaussian => {
                for _ in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(z.abs());
                }
            }
            LawDescriptor::SqrtGamma { shape, scale } => {
                let g = GammaSampler::new(shape, scale).expect("validated at compile time");
                for _ in 0..n {
                    out.push(g.sample(rng).sqrt());
                }
            }
            LawDescriptor::PointMassZero => out.resize(n, 0.0),
            LawDescriptor::Deterministic { value } => out.resize(n, value),
            LawDescriptor::Lambda { .. } | LawDescriptor::Pi { .. } => {
                let table = self.table.as_ref().expect("quadrature law carries a table");
                for _ in 0..n {
                    let u: f64 = rng.random();
                    out.push(table.quantile(u));
                }
            }
        }
        out
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Knot layout: uniform core, log-spaced tails out to the decay cutoff.
fn build_table(
    rho: f64,
    alpha: f64,
    family: ExpFamily,
    support: Support,
    q: &Quadrature,
) -> Result<CdfTable> {
    if !integrable(rho, alpha, family) {
        return Err(Error::NonIntegrable { rho, alpha });
    }
    let density = move |x: f64| match family {
        ExpFamily::Lambda => lambda_density(rho, alpha, x),
        ExpFamily::Pi => pi_density(rho, alpha, x),
    };
    let hi = quad::upper_cutoff(&density, 0.0, q)?;
    let lo = match support {
        Support::RealLine => -hi,
        Support::PositiveHalfLine => 0.0,
    };
    let core = hi.min(8.0);
    let mut knots = Vec::with_capacity(CDF_KNOTS);
    match support {
        Support::RealLine => {
            let n_tail = if hi > core { CDF_KNOTS / 4 } else { 0 };
            let n_core = CDF_KNOTS - 2 * n_tail;
            for j in 0..n_tail {
                // left tail, log-spaced from -hi towards -core
                let u = j as f64 / n_tail as f64;
                knots.push(-core * (hi / core).powf(1.0 - u));
            }
            for j in 0..n_core {
                knots.push(-core + 2.0 * core * j as f64 / (n_core - 1) as f64);
            }
            for j in 1..=n_tail {
                let u = j as f64 / n_tail as f64;
                knots.push(core * (hi / core).powf(u));
            }
        }
        Support::PositiveHalfLine => {
            let n_tail = if hi > core { CDF_KNOTS / 4 } else { 0 };
            let n_core = CDF_KNOTS - n_tail;
            for j in 0..n_core {
                knots.push(core * j as f64 / (n_core - 1) as f64);
            }
            for j in 1..=n_tail {
                let u = j as f64 / n_tail as f64;
                knots.push(core * (hi / core).powf(u));
            }
        }
    }
    knots.dedup_by(|a, b| a == b);
    let per_interval = Quadrature {
        abs_tol: (q.abs_tol / CDF_KNOTS as f64).max(1e-16),
        rel_tol: 1e-12,
        max_subdivisions: 256,
    };
    let mut cdf = Vec::with_capacity(knots.len());
    cdf.push(0.0);
    let mut acc = 0.0;
    for w in knots.windows(2) {
        acc += quad::integrate(density, w[0], w[1], &per_interval)?;
        cdf.push(acc);
    }
    let z = acc;
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::NonIntegrable { rho, alpha });
    }
    for c in &mut cdf {
        *c /= z;
    }
    Ok(CdfTable {
        z,
        lo,
        hi,
        knots,
        cdf,
    })
}

impl CdfTable {
    /// Monotone inverse by binary search plus linear interpolation.
    fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let mut lo = 0usize;
        let mut hi = self.cdf.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cdf[mid] <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (c0, c1) = (self.cdf[lo], self.cdf[hi]);
        if c1 <= c0 {
            return self.knots[lo];
        }
        let w = (u - c0) / (c1 - c0);
        self.knots[lo] + w * (self.knots[hi] - self.knots[lo])
    }
}

/// Convenience wrappers mirroring the operation surface.
pub fn law_cdf(law: &LawDescriptor, x: f64, q: &Quadrature) -> Result<f64> {
    Ok(CompiledLaw::new(*law, q)?.cdf(x))
}

pub fn law_sample<R: Rng + ?Sized>(
    law: &LawDescriptor,
    rng: &mut R,
    n: usize,
    q: &Quadrature,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    Ok(CompiledLaw::new(*law, q)?.sample(rng, n))
}

/// Extracts the (normalization, law) pair a regime predicts. In the
/// partial-explosion band the pair refers to the surviving paths.
pub fn limit_package(regime: &Regime) -> Result<(Normalization, LawDescriptor)> {
    match regime.recurrence {
        Recurrence::ExplodesAs => Err(Error::NoLimitLaw),
        Recurrence::ExplodesWithPartialProbability => {
            let cond = regime.conditional.as_deref().ok_or(Error::NoLimitLaw)?;
            Ok((cond.normalization, cond.law.ok_or(Error::NoLimitLaw)?))
        }
        _ => Ok((regime.normalization, regime.law.ok_or(Error::NoLimitLaw)?)),
    }
}

/// Deterministic blow-up profile near the explosion time tau_e:
///
/// ```text
/// |X_t| ~ prefactor(tau_e) / (rho (alpha-1) (tau_e - t))^{1/(alpha-1)}
/// ```
///
/// with prefactor tau^{(alpha+1)/(2(alpha-1))} on the balance line and
/// phi^{gamma/(alpha-1)}(phi^{-1}(tau)) tau^{gamma/2} below it (the power
/// change of time supplies phi).
pub fn blowup_profile(p: &Params, tau_e: f64, t: f64) -> Result<f64> {
    if !(p.rho > 0.0 && p.alpha > 1.0 && 2.0 * p.beta <= p.alpha + 1.0) {
        return Err(Error::InvalidParameters(
            "blow-up profile needs rho > 0, alpha > 1, 2 beta <= alpha + 1".into(),
        ));
    }
    if !(t < tau_e) {
        return Err(Error::InvalidParameters(format!(
            "need t < tau_e, got t={t}, tau_e={tau_e}"
        )));
    }
    let denom = (p.rho * (p.alpha - 1.0) * (tau_e - t)).powf(1.0 / (p.alpha - 1.0));
    let numer = if 2.0 * p.beta == p.alpha + 1.0 {
        tau_e.powf((p.alpha + 1.0) / (2.0 * (p.alpha - 1.0)))
    } else {
        let tc = TimeChange::power(p.alpha, p.beta)?;
        let s = tc.inverse(tau_e)?;
        let (phi, _, _) = tc.eval(s)?;
        let gamma = tc.gamma();
        phi.powf(gamma / (p.alpha - 1.0)) * tau_e.powf(gamma / 2.0)
    };
    Ok(numer / denom)
}

/// Ballistic escape: |X_t| / t^nu -> ell almost surely, with
/// ell = (rho (1-alpha)/(1-beta))^{1/(1-alpha)} and nu = (1-beta)/(1-alpha).
pub fn transient_rate(p: &Params) -> Result<(f64, f64)> {
    if !(p.rho > 0.0 && p.alpha < 1.0 && p.beta < 1.0) {
        return Err(Error::InvalidParameters(
            "transient rate needs rho > 0, alpha < 1, beta < 1".into(),
        ));
    }
    let ell = (p.rho * (1.0 - p.alpha) / (1.0 - p.beta)).powf(1.0 / (1.0 - p.alpha));
    let nu = (1.0 - p.beta) / (1.0 - p.alpha);
    Ok((ell, nu))
}

/// Constants of the ballistic linear case (alpha = 1, rho > 0, beta < 1):
/// X_t / exp(rho t^{1-beta}/(1-beta)) -> N(m, sigma^2) a.s., with
/// m = x0 exp(rho/(beta-1)) and sigma^2 = int_1^inf exp(2 rho s^{1-beta}/(beta-1)) ds.
pub fn linear_case_params(p: &Params) -> Result<(f64, f64)> {
    if !(p.alpha == 1.0 && p.rho > 0.0 && p.beta < 1.0) {
        return Err(Error::NonIntegrable {
            rho: p.rho,
            alpha: p.alpha,
        });
    }
    let mean = p.x0 * (p.rho / (p.beta - 1.0)).exp();
    let c = 2.0 * p.rho / (1.0 - p.beta);
    let pw = 1.0 - p.beta;
    let q = Quadrature::default();
    let variance = quad::integrate_to_infinity(move |s: f64| (-c * s.powf(pw)).exp(), 1.0, &q)?;
    Ok((mean, variance))
}
