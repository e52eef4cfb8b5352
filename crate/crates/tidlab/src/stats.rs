//! Ensemble runner and statistical verdicts: empirical functionals over
//! independent per-path streams, Kolmogorov–Smirnov distances, the two
//! explosion-probability estimators, rate checks and envelope diagnostics.
//!
//! Determinism contract: path i always uses the (master_seed, i) stream, so
//! outputs are bitwise identical for a fixed spec regardless of worker count
//! or completion order (results are keyed by path index).

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{
    bridge_functional_path, default_eps_cut, simulate_path, ExplosionReport, SimConfig,
};
use crate::error::{Error, Result};
use crate::laws::CompiledLaw;
use crate::model::{envelope_value, EnvelopeSpec, Normalization, Params};
use crate::quad::Quadrature;
use crate::time_change::{KilledPath, TimeChange};

/// Per-path functional extracted by the ensemble runner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Functional {
    /// X_T / n(T); exploded paths are dropped and counted.
    TerminalNormalized(Normalization),
    /// X_T; exploded paths are dropped and counted.
    TerminalRaw,
    /// 1 if the path exploded by the horizon, else 0.
    ExplosionIndicator,
    /// One pinned-bridge Girsanov weight per path (ignores the horizon).
    GirsanovWeight { eps_cut: f64 },
    /// |X_T| / T^nu (deterministic-rate regimes).
    RateRatio { nu: f64 },
    /// sup over [T/2, T] of |X_t| / envelope(t).
    EnvelopeSup(EnvelopeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub params: Params,
    pub cfg: SimConfig,
    pub n_paths: u64,
    pub horizon: f64,
    pub functional: Functional,
}

/// Ensemble output: samples in path-index order plus per-path bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleOutcome {
    pub samples: Vec<f64>,
    /// Paths contributing a sample.
    pub kept: u64,
    /// Paths that exploded before the horizon.
    pub exploded: u64,
    /// (path_index, error) for paths that failed; the run continues.
    pub failures: Vec<(u64, String)>,
}

enum PathValue {
    Sample(f64),
    ExplodedDropped,
    Failed(String),
}

fn eval_functional(spec: &EnsembleSpec, path: &KilledPath, report: &ExplosionReport) -> PathValue {
    match spec.functional {
        Functional::TerminalNormalized(n) => {
            if report.exploded {
                PathValue::ExplodedDropped
            } else {
                PathValue::Sample(path.last_value() / n.eval(path.last_time()))
            }
        }
        Functional::TerminalRaw => {
            if report.exploded {
                PathValue::ExplodedDropped
            } else {
                PathValue::Sample(path.last_value())
            }
        }
        Functional::ExplosionIndicator => {
            PathValue::Sample(if report.exploded { 1.0 } else { 0.0 })
        }
        Functional::GirsanovWeight { .. } => unreachable!("handled before simulation"),
        Functional::RateRatio { nu } => {
            if report.exploded {
                PathValue::ExplodedDropped
            } else {
                PathValue::Sample(path.last_value().abs() / path.last_time().powf(nu))
            }
        }
        Functional::EnvelopeSup(env) => {
            let lo = spec.horizon / 2.0;
            let mut sup = f64::NEG_INFINITY;
            for (&t, &x) in path.times.iter().zip(&path.values) {
                if t < lo {
                    continue;
                }
                match envelope_value(&env, &spec.params, t) {
                    Ok(e) if e > 0.0 => sup = sup.max(x.abs() / e),
                    _ => {}
                }
            }
            if sup.is_finite() {
                PathValue::Sample(sup)
            } else {
                PathValue::Failed("no grid points in the diagnostic window".into())
            }
        }
    }
}

/// Runs `n_paths` independent simulations and extracts the functional.
/// Exploded paths contribute according to the functional's semantics;
/// per-path errors are recorded without aborting the ensemble.
pub fn run_ensemble(spec: &EnsembleSpec) -> EnsembleOutcome {
    let mut cfg = spec.cfg;
    cfg.store_full_path = matches!(spec.functional, Functional::EnvelopeSup(_));
    let values: Vec<(PathValue, bool)> = (0..spec.n_paths)
        .into_par_iter()
        .map(|i| {
            if let Functional::GirsanovWeight { eps_cut } = spec.functional {
                return match bridge_functional_path(&spec.params, &cfg, eps_cut, i) {
                    Ok(w) => (PathValue::Sample(w), false),
                    Err(e) => (PathValue::Failed(e.to_string()), false),
                };
            }
            match simulate_path(&spec.params, &cfg, spec.horizon, i) {
                Ok((path, report)) => (eval_functional(spec, &path, &report), report.exploded),
                Err(e) => (PathValue::Failed(e.to_string()), false),
            }
        })
        .collect();

    let mut out = EnsembleOutcome {
        samples: Vec::new(),
        kept: 0,
        exploded: 0,
        failures: Vec::new(),
    };
    for (i, (v, exploded)) in values.into_iter().enumerate() {
        if exploded {
            out.exploded += 1;
        }
        match v {
            PathValue::Sample(x) => {
                out.samples.push(x);
                out.kept += 1;
            }
            PathValue::ExplodedDropped => {}
            PathValue::Failed(msg) => out.failures.push((i as u64, msg)),
        }
    }
    out
}

/// Point estimate with a 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCi {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
    pub method: CiMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CiMethod {
    Wilson,
    NormalApprox,
}

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion. At the boundaries
/// (0 or n successes) the interval is widened to the one-sided form so it
/// always contains the point estimate.
pub fn wilson_interval(successes: u64, n: u64) -> EstimateWithCi {
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * ((p * (1.0 - p) + z2 / (4.0 * nf)) / nf).sqrt() / denom;
    let ci_low = if successes == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let ci_high = if successes == n {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    EstimateWithCi {
        value: p,
        ci_low,
        ci_high,
        n,
        method: CiMethod::Wilson,
    }
}

/// Mean with a normal-approximation interval.
pub fn mean_interval(samples: &[f64]) -> Result<EstimateWithCi> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let half = Z95 * (var / n).sqrt();
    Ok(EstimateWithCi {
        value: mean,
        ci_low: mean - half,
        ci_high: mean + half,
        n: samples.len() as u64,
        method: CiMethod::NormalApprox,
    })
}

/// Kolmogorov–Smirnov verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n: u64,
    pub pass: bool,
    pub threshold: f64,
}

/// One-sample KS distance of `samples` against a CDF. The default threshold
/// is the asymptotic 1%-level 1.63/sqrt(n); acceptance suites override it
/// with absolute tolerances that absorb time-discretization bias.
pub fn ks_distance<F: Fn(f64) -> f64>(
    samples: &[f64],
    cdf: F,
    threshold: Option<f64>,
) -> Result<KsReport> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d
            .max(((i + 1) as f64 / n - f).abs())
            .max((f - i as f64 / n).abs());
    }
    let threshold = threshold.unwrap_or(1.63 / n.sqrt());
    Ok(KsReport {
        statistic: d,
        n: xs.len() as u64,
        pass: d < threshold,
        threshold,
    })
}

/// Two-sample KS distance (used for cross-validating two simulation routes).
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|u, v| u.partial_cmp(v).unwrap());
    b.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Direct explosion-probability estimate: exploded fraction by the horizon
/// (a lower bound for P(tau_e < inf)) with a Wilson interval, plus the same
/// fraction at twice the horizon so censoring can be judged. Nested seeds:
/// the doubled run extends the same increment streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectExplosionEstimate {
    pub estimate: EstimateWithCi,
    pub horizon: f64,
    pub fraction_at_double_horizon: f64,
    pub doubling_delta: f64,
}

pub fn explosion_prob_direct(
    p: &Params,
    cfg: &SimConfig,
    n: u64,
    horizon: f64,
) -> Result<DirectExplosionEstimate> {
    if crate::model::validate(p) == crate::model::ValidityClass::Invalid {
        return Err(Error::InvalidParameters(
            "triple outside the validity region".into(),
        ));
    }
    // Meaningful only for rho > 0, alpha > 1; elsewhere the fraction is
    // identically 0 (non-explosive regimes), which the estimator reports.
    let run = |h: f64| -> Result<u64> {
        let spec = EnsembleSpec {
            params: *p,
            cfg: *cfg,
            n_paths: n,
            horizon: h,
            functional: Functional::ExplosionIndicator,
        };
        let out = run_ensemble(&spec);
        if let Some((i, e)) = out.failures.first() {
            return Err(Error::InvalidParameters(format!("path {i} failed: {e}")));
        }
        Ok(out.samples.iter().map(|&v| v as u64).sum())
    };
    let exploded = run(horizon)?;
    let exploded2 = run(2.0 * horizon)?;
    let estimate = wilson_interval(exploded, n);
    let f2 = exploded2 as f64 / n as f64;
    Ok(DirectExplosionEstimate {
        estimate,
        horizon,
        fraction_at_double_horizon: f2,
        doubling_delta: f2 - estimate.value,
    })
}

/// Girsanov estimate of P(tau_e = inf): the mean of the pinned-bridge
/// weights with a normal-approximation interval. Weights are positive and
/// can be heavy-tailed; a sample kurtosis above 100 flags the interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GirsanovExplosionEstimate {
    pub estimate: EstimateWithCi,
    pub kurtosis: f64,
    pub heavy_tail_warning: bool,
}

pub fn explosion_prob_girsanov(
    p: &Params,
    cfg: &SimConfig,
    n: u64,
) -> Result<GirsanovExplosionEstimate> {
    let tc = TimeChange::power(p.alpha, p.beta)?;
    explosion_prob_girsanov_with_eps(p, cfg, n, default_eps_cut(&tc))
}

/// As `explosion_prob_girsanov`, with an explicit bridge tail cut (used by
/// the Richardson consistency check on the default cut).
pub fn explosion_prob_girsanov_with_eps(
    p: &Params,
    cfg: &SimConfig,
    n: u64,
    eps_cut: f64,
) -> Result<GirsanovExplosionEstimate> {
    if !(p.rho > 0.0 && p.alpha > 1.0 && 2.0 * p.beta > p.alpha + 1.0) {
        return Err(Error::InvalidParameters(
            "the Girsanov estimator needs rho > 0, alpha > 1, 2 beta > alpha + 1".into(),
        ));
    }
    let spec = EnsembleSpec {
        params: *p,
        cfg: *cfg,
        n_paths: n,
        horizon: f64::INFINITY,
        functional: Functional::GirsanovWeight { eps_cut },
    };
    let out = run_ensemble(&spec);
    if let Some((i, e)) = out.failures.first() {
        return Err(Error::InvalidParameters(format!("path {i} failed: {e}")));
    }
    debug_assert!(out.samples.iter().all(|&w| w > 0.0));
    let estimate = mean_interval(&out.samples)?;
    let nf = out.samples.len() as f64;
    let mean = estimate.value;
    let m2 = out.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m4 = out.samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) } else { 0.0 };
    Ok(GirsanovExplosionEstimate {
        estimate,
        kurtosis,
        heavy_tail_warning: kurtosis > 100.0,
    })
}

/// Outcome of a rate check, matching the two shapes of prediction.
#[derive(Debug, Clone, Serialize)]
pub enum RateCheck {
    /// Mean of |X_T|/T^nu across paths against the predicted constant.
    DeterministicRatio {
        estimate: EstimateWithCi,
        target: f64,
        nu: f64,
    },
    /// KS of X_T/n(T) against the predicted Gaussian (a.s. Gaussian limits).
    GaussianLimit {
        ks: KsReport,
        mean: f64,
        variance: f64,
    },
}

/// Verifies the transient rate prediction appropriate to the regime.
pub fn rate_check(p: &Params, cfg: &SimConfig, n: u64, horizon: f64) -> Result<RateCheck> {
    if !(p.rho > 0.0) {
        return Err(Error::InvalidParameters(
            "rate checks apply to repulsive regimes".into(),
        ));
    }
    if p.alpha < 1.0 {
        let (ell, nu) = crate::laws::transient_rate(p)?;
        let spec = EnsembleSpec {
            params: *p,
            cfg: *cfg,
            n_paths: n,
            horizon,
            functional: Functional::RateRatio { nu },
        };
        let out = run_ensemble(&spec);
        let estimate = mean_interval(&out.samples)?;
        Ok(RateCheck::DeterministicRatio {
            estimate,
            target: ell,
            nu,
        })
    } else if p.alpha == 1.0 {
        let (norm, mean, variance) = if 2.0 * p.beta == p.alpha + 1.0 {
            if !(p.rho > 0.5) {
                return Err(Error::InvalidParameters(
                    "the linear critical case has an a.s. limit only for rho > 1/2".into(),
                ));
            }
            (
                Normalization::TimePower(p.rho),
                p.x0,
                1.0 / (2.0 * p.rho - 1.0),
            )
        } else if 2.0 * p.beta < p.alpha + 1.0 {
            let (m, v) = crate::laws::linear_case_params(p)?;
            (
                Normalization::ExpPower {
                    rho: p.rho,
                    exponent: 1.0 - p.beta,
                },
                m,
                v,
            )
        } else {
            return Err(Error::InvalidParameters(
                "no deterministic-rate prediction above the balance line".into(),
            ));
        };
        let spec = EnsembleSpec {
            params: *p,
            cfg: *cfg,
            n_paths: n,
            horizon,
            functional: Functional::TerminalNormalized(norm),
        };
        let out = run_ensemble(&spec);
        let law = CompiledLaw::new(
            crate::laws::LawDescriptor::Gaussian { mean, variance },
            &Quadrature::default(),
        )?;
        let threshold = 0.05f64.max(1.63 / (out.samples.len().max(1) as f64).sqrt());
        let ks = ks_distance(&out.samples, |x| law.cdf(x), Some(threshold))?;
        Ok(RateCheck::GaussianLimit { ks, mean, variance })
    } else {
        Err(Error::InvalidParameters(
            "no rate prediction for explosive alpha > 1".into(),
        ))
    }
}

/// Finite-horizon envelope diagnostic: the distribution over paths of
/// sup_{t in [T/2, T]} |X_t| / envelope(t). This is a smoke check, not a
/// test of the almost-sure constant — ratios of order one, slowly
/// concentrating, are the expected behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeSummary {
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub n: u64,
}

pub fn envelope_diagnostic(
    p: &Params,
    cfg: &SimConfig,
    n: u64,
    horizon: f64,
    spec: &EnvelopeSpec,
) -> Result<EnvelopeSummary> {
    if !(horizon / 2.0 > std::f64::consts::E) {
        return Err(Error::InvalidParameters(
            "envelope diagnostics need horizon/2 beyond the envelope domain".into(),
        ));
    }
    let espec = EnsembleSpec {
        params: *p,
        cfg: *cfg,
        n_paths: n,
        horizon,
        functional: Functional::EnvelopeSup(*spec),
    };
    let out = run_ensemble(&espec);
    if out.samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut v = out.samples;
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |q: f64| v[(q * (v.len() - 1) as f64).round() as usize];
    Ok(EnvelopeSummary {
        median: quantile(0.5),
        q10: quantile(0.1),
        q90: quantile(0.9),
        n: v.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EnvelopeKind;

    fn params(rho: f64, alpha: f64, beta: f64, x0: f64) -> Params {
        Params::new(rho, alpha, beta, x0).unwrap()
    }

    #[test]
    fn ks_single_sample_at_median() {
        let r = ks_distance(&[0.0], |_| 0.5, None).unwrap();
        assert_eq!(r.statistic, 0.5);
    }

    #[test]
    fn ks_rejects_wrong_variance() {
        // N(0,1) samples against the N(0,4) CDF: the analytic sup-difference
        // of the two CDFs is about 0.1585, so the statistic must exceed 0.15.
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let law = CompiledLaw::new(
            crate::laws::LawDescriptor::Gaussian {
                mean: 0.0,
                variance: 4.0,
            },
            &Quadrature::default(),
        )
        .unwrap();
        let r = ks_distance(&xs, |x| law.cdf(x), None).unwrap();
        assert!(r.statistic > 0.15, "{}", r.statistic);
        // The analytic sup-difference: the stationarity condition
        // phi(x) = phi(x/2)/2 gives x = sqrt(8 ln 2 / 3) and sup ~ 0.1613.
        let mut sup: f64 = 0.0;
        let g1 = CompiledLaw::new(
            crate::laws::LawDescriptor::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            &Quadrature::default(),
        )
        .unwrap();
        for i in 0..4000 {
            let x = -4.0 + 8.0 * i as f64 / 3999.0;
            sup = sup.max((g1.cdf(x) - law.cdf(x)).abs());
        }
        let x_star = (8.0 * 2.0f64.ln() / 3.0).sqrt();
        let analytic = g1.cdf(x_star) - law.cdf(x_star);
        assert!(
            (sup - analytic).abs() < 1e-6,
            "grid sup {sup} vs analytic {analytic}"
        );
        assert!((analytic - 0.1613).abs() < 5e-4, "analytic sup {analytic}");
    }

    #[test]
    fn ks_null_rate() {
        // Samples drawn from the tested CDF stay below the 1% threshold in
        // the vast majority of repetitions.
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let law = CompiledLaw::new(
            crate::laws::LawDescriptor::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            &Quadrature::default(),
        )
        .unwrap();
        let mut fails = 0;
        for seed in 0..50 {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
            let r = ks_distance(&xs, |x| law.cdf(x), None).unwrap();
            if !r.pass {
                fails += 1;
            }
        }
        assert!(
            fails <= 2,
            "{fails} of 50 null runs rejected at the 1% level"
        );
    }

    #[test]
    fn ks_empty_sample_errors() {
        assert!(matches!(
            ks_distance(&[], |_| 0.5, None),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn ks_bounds_and_own_ecdf_floor() {
        // The statistic is always in [0,1]; against the sample's own
        // right-continuous empirical CDF it attains its 1/n floor (the sup
        // formula compares both one-sided gaps, so it cannot vanish for
        // finite n).
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let n = xs.len() as f64;
        let own = |x: f64| xs.iter().filter(|&&v| v <= x).count() as f64 / n;
        let r = ks_distance(&xs, own, None).unwrap();
        assert!((r.statistic - 1.0 / n).abs() < 1e-15, "{}", r.statistic);
        let r = ks_distance(&xs, |_| 0.0, None).unwrap();
        assert!(r.statistic <= 1.0 && r.statistic >= 0.0);
        assert_eq!(r.statistic, 1.0);
    }

    #[test]
    fn wilson_contains_point_estimate() {
        for (k, n) in [(0u64, 10u64), (5, 10), (10, 10), (999, 1000), (1, 1000)] {
            let e = wilson_interval(k, n);
            assert!(e.ci_low <= e.value && e.value <= e.ci_high, "{k}/{n}");
            assert!(e.ci_low >= 0.0 && e.ci_high <= 1.0);
        }
    }

    #[test]
    fn ensemble_is_deterministic_and_order_keyed() {
        let spec = EnsembleSpec {
            params: params(0.0, 0.0, 0.0, 0.0),
            cfg: SimConfig::with_dt(1e-2).seeded(42),
            n_paths: 64,
            horizon: 2.0,
            functional: Functional::TerminalRaw,
        };
        let a = run_ensemble(&spec);
        let b = run_ensemble(&spec);
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.samples.len(), 64);
    }

    #[test]
    fn explosion_indicator_and_direct_estimator() {
        let p = params(1.0, 3.0, 0.0, 1.0);
        let cfg = SimConfig::with_dt(1e-3).seeded(7);
        let est = explosion_prob_direct(&p, &cfg, 200, 25.0).unwrap();
        assert!(
            est.estimate.value >= 0.99,
            "fraction {}",
            est.estimate.value
        );
        assert!(est.doubling_delta >= 0.0, "monotone in horizon");
        // attractive drift never explodes: the fraction is exactly 0
        let p = params(-1.0, 2.0, 0.0, 1.0);
        let est = explosion_prob_direct(&p, &cfg, 10, 5.0).unwrap();
        assert_eq!(est.estimate.value, 0.0);
        assert_eq!(est.fraction_at_double_horizon, 0.0);
        // outside the validity region it is an error
        let p = params(-1.0, -2.0, 0.0, 1.0);
        assert!(explosion_prob_direct(&p, &cfg, 10, 5.0).is_err());
    }

    #[test]
    fn explosion_monotone_under_nested_horizons() {
        let p = params(1.0, 3.0, 3.0, 1.0);
        let cfg = SimConfig::with_dt(2e-3).seeded(11);
        let frac = |h: f64| {
            let spec = EnsembleSpec {
                params: p,
                cfg,
                n_paths: 300,
                horizon: h,
                functional: Functional::ExplosionIndicator,
            };
            let out = run_ensemble(&spec);
            out.samples.iter().sum::<f64>() / out.samples.len() as f64
        };
        // commensurate horizons (multiples of dt) so the grids nest exactly
        assert!(frac(8.0) <= frac(16.0) + 1e-15);
    }

    #[test]
    fn girsanov_weights_positive_and_near_one_for_tiny_rho() {
        let p = params(1e-6, 3.0, 3.0, 1.0);
        let cfg = SimConfig::with_dt(1e-3).seeded(13);
        let est = explosion_prob_girsanov(&p, &cfg, 200).unwrap();
        assert!(est.estimate.ci_low <= 1.0 && est.estimate.ci_high >= 1.0 - 1e-3);
        assert!(est.estimate.value > 0.99);
    }

    #[test]
    fn envelope_diagnostic_scale_linearity() {
        let p = params(0.0, 0.0, 0.0, 0.0);
        let mut cfg = SimConfig::with_dt(0.25).seeded(3);
        cfg.store_full_path = true;
        let base = EnvelopeSpec::new(EnvelopeKind::IteratedLog, 1.0);
        let doubled = EnvelopeSpec::new(EnvelopeKind::IteratedLog, 2.0);
        let a = envelope_diagnostic(&p, &cfg, 40, 200.0, &base).unwrap();
        let b = envelope_diagnostic(&p, &cfg, 40, 200.0, &doubled).unwrap();
        assert!((a.median / b.median - 2.0).abs() < 1e-12);
        assert!((a.q90 / b.q90 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mean_interval_sanity() {
        let e = mean_interval(&[1.0, 2.0, 3.0]).unwrap();
        assert!((e.value - 2.0).abs() < 1e-15);
        assert!(e.ci_low < 2.0 && e.ci_high > 2.0);
        assert!(mean_interval(&[]).is_err());
    }
}
