//! Path simulation: Euler–Maruyama with singularity-aware scheme dispatch,
//! step refinement and profile-inverted explosion times, the transformed
//! integrator, and the pinned-bridge Girsanov functional.
//!
//! Scheme dispatch (Auto):
//!
//! * alpha >= 0: explicit Euler–Maruyama on the original equation.
//! * -1 < alpha < 0: Euler–Maruyama with the drift clamped to 1/sqrt(dt);
//!   the singularity at 0 is locally integrable and the clamp keeps the
//!   discrete drift increment at the noise scale.
//! * alpha = -1: the squared process dY = 2 sqrt(Y) dW + (2 rho/t^beta + 1) dt
//!   with full truncation, returning X = sqrt(Y).
//! * alpha < -1 (rho > 0): positivity-preserving splitting; the repelling
//!   drift sub-step is solved exactly, then the Gaussian increment is added,
//!   retrying at half step if the result is not positive (0 is an entrance
//!   boundary).
//!
//! Explosion (alpha > 1): steps are refined geometrically once the proposed
//! drift increment exceeds a small fraction of the state, down to
//! `blowup_refine_floor`; when |X| crosses `explosion_threshold` the killing
//! time is estimated by inverting the deterministic blow-up profile
//! |X|^{-(alpha-1)} ~ rho (alpha-1) t^{-beta} (tau - t), which removes the
//! threshold dependence. The raw crossing time is reported alongside.
//!
//! Reproducibility: the Gaussian increments of a path are a pure function of
//! (master_seed, path_index) — one counter-addressed stream per path —
//! regardless of scheduling or worker count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{drift, sgn, validate, Params, ValidityClass};
use crate::time_change::{transformed_drift, KilledPath, TimeChange};

/// Relative growth allowed per step before refinement kicks in.
const GROWTH_CAP: f64 = 0.02;
/// Hard per-path step budget (safety valve, not a tuning knob).
const MAX_STEPS: u64 = 1 << 34;

/// Numerical scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    Auto,
    DirectEm,
    SquaredProcess,
    PositivityPreserving,
    ZeroNoiseOde,
}

/// Simulation configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    /// Base time step.
    pub dt: f64,
    /// Enable step refinement near blow-up.
    pub adapt: bool,
    /// Kill the path once |X| crosses this level (alpha > 1 regimes).
    pub explosion_threshold: f64,
    /// Smallest refined step near blow-up.
    pub blowup_refine_floor: f64,
    pub scheme: Scheme,
    /// Master seed; path i uses the (seed, i) counter stream.
    pub seed: u64,
    /// Keep the whole grid (true) or only the first and last points.
    pub store_full_path: bool,
}

impl SimConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            adapt: true,
            explosion_threshold: 1e8,
            blowup_refine_floor: dt * 1e-6,
            scheme: Scheme::Auto,
            seed: 0,
            store_full_path: true,
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check(&self, p: &Params) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameters("dt must be > 0".into()));
        }
        if !(self.explosion_threshold > p.x0.abs().max(1.0)) {
            return Err(Error::InvalidParameters(
                "explosion_threshold must exceed max(|x0|, 1)".into(),
            ));
        }
        if !(self.blowup_refine_floor > 0.0) {
            return Err(Error::InvalidParameters(
                "blowup_refine_floor must be > 0".into(),
            ));
        }
        Ok(())
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::with_dt(1e-3)
    }
}

/// Identifies one independent increment stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngStreamSpec {
    pub master_seed: u64,
    pub path_index: u64,
}

impl RngStreamSpec {
    pub fn rng(&self) -> ChaCha12Rng {
        let mut r = ChaCha12Rng::seed_from_u64(self.master_seed);
        r.set_stream(self.path_index);
        r
    }
}

/// Outcome of explosion monitoring for one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExplosionReport {
    pub exploded: bool,
    /// Profile-inverted estimate of the killing time.
    pub tau_e_estimate: Option<f64>,
    /// First time |X| crossed the threshold (for comparison with the above).
    pub threshold_crossing: Option<f64>,
    pub last_value: f64,
    /// The simulation horizon the path was censored at.
    pub censored_at: f64,
}

/// Compensated (Kahan) accumulator for time offsets from t_start; long
/// horizons with small steps must not drift.
#[derive(Debug, Clone, Copy)]
struct TimeAccum {
    start: f64,
    sum: f64,
    comp: f64,
}

impl TimeAccum {
    fn new(start: f64) -> Self {
        Self {
            start,
            sum: 0.0,
            comp: 0.0,
        }
    }

    fn add(&mut self, h: f64) {
        let y = h - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    fn now(&self) -> f64 {
        self.start + self.sum
    }
}

/// Grid recorder honouring `store_full_path`.
struct Recorder {
    full: bool,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Recorder {
    fn new(t0: f64, x0: f64, full: bool) -> Self {
        Self {
            full,
            times: vec![t0],
            values: vec![x0],
        }
    }

    fn push(&mut self, t: f64, x: f64) {
        if self.full || self.times.len() < 2 {
            self.times.push(t);
            self.values.push(x);
        } else {
            *self.times.last_mut().unwrap() = t;
            *self.values.last_mut().unwrap() = x;
        }
    }

    fn pop_last(&mut self) {
        if self.times.len() > 1 {
            self.times.pop();
            self.values.pop();
        }
    }

    fn into_path(self, t_start: f64, killing_time: Option<f64>) -> KilledPath {
        KilledPath::new(t_start, self.times, self.values, killing_time)
    }
}

/// Simulates one path of the original equation with the (master_seed,
/// path_index) stream; `simulate` is the path_index = 0 convenience.
pub fn simulate_path(
    p: &Params,
    cfg: &SimConfig,
    horizon: f64,
    path_index: u64,
) -> Result<(KilledPath, ExplosionReport)> {
    if validate(p) == ValidityClass::Invalid {
        return Err(Error::InvalidParameters(
            "triple outside the validity region (attractive with alpha <= -1)".into(),
        ));
    }
    if !(horizon > 1.0) {
        return Err(Error::InvalidParameters(
            "horizon must exceed the initial time 1".into(),
        ));
    }
    cfg.check(p)?;
    let mut rng = RngStreamSpec {
        master_seed: cfg.seed,
        path_index,
    }
    .rng();
    let scheme = effective_scheme(p, cfg)?;
    match scheme {
        Scheme::DirectEm => direct_em(p, cfg, horizon, &mut rng, false),
        Scheme::ZeroNoiseOde => direct_em(p, cfg, horizon, &mut rng, true),
        Scheme::SquaredProcess => squared_process(p, cfg, horizon, &mut rng),
        Scheme::PositivityPreserving => positivity_preserving(p, cfg, horizon, &mut rng),
        Scheme::Auto => unreachable!("resolved above"),
    }
}

pub fn simulate(
    p: &Params,
    cfg: &SimConfig,
    horizon: f64,
) -> Result<(KilledPath, ExplosionReport)> {
    simulate_path(p, cfg, horizon, 0)
}

fn effective_scheme(p: &Params, cfg: &SimConfig) -> Result<Scheme> {
    let auto = if p.alpha > -1.0 {
        // the locally integrable singularity (-1 < alpha < 0) gets the
        // drift clamp inside the stepper
        Scheme::DirectEm
    } else if p.alpha == -1.0 {
        Scheme::SquaredProcess
    } else {
        Scheme::PositivityPreserving
    };
    match cfg.scheme {
        Scheme::Auto => Ok(auto),
        Scheme::SquaredProcess if p.alpha != -1.0 => Err(Error::Unsupported(
            "squared-process scheme requires alpha = -1".into(),
        )),
        Scheme::PositivityPreserving if p.alpha >= -1.0 => Err(Error::Unsupported(
            "positivity-preserving scheme requires alpha < -1".into(),
        )),
        Scheme::DirectEm if p.alpha <= -1.0 => Err(Error::Unsupported(
            "direct scheme would hit the singularity; use Auto".into(),
        )),
        s => Ok(s),
    }
}

/// Clamp cap for the locally integrable singularity (-1 < alpha < 0):
/// keeps the discrete drift increment at the noise scale sqrt(dt).
fn clamp_cap(cfg: &SimConfig) -> f64 {
    1.0 / cfg.dt.sqrt()
}

fn direct_em(
    p: &Params,
    cfg: &SimConfig,
    horizon: f64,
    rng: &mut ChaCha12Rng,
    zero_noise: bool,
) -> Result<(KilledPath, ExplosionReport)> {
    let clamp = if p.alpha < 0.0 {
        Some(clamp_cap(cfg))
    } else {
        None
    };
    let eval_drift = |t: f64, x: f64| -> f64 {
        match clamp {
            None => drift(p, t, x).expect("nonnegative alpha has no singular point"),
            Some(cap) => {
                if x == 0.0 {
                    0.0
                } else {
                    drift(p, t, x).expect("x != 0").clamp(-cap, cap)
                }
            }
        }
    };
    // Finite-time blow-up needs outward drift of super-linear growth.
    let explosive = p.alpha > 1.0 && p.rho > 0.0;
    let mut acc = TimeAccum::new(p.t0);
    let mut rec = Recorder::new(p.t0, p.x0, cfg.store_full_path);
    let mut x = p.x0;
    let mut report = ExplosionReport {
        exploded: false,
        tau_e_estimate: None,
        threshold_crossing: None,
        last_value: p.x0,
        censored_at: horizon,
    };
    let mut steps: u64 = 0;
    loop {
        let t = acc.now();
        let remaining = horizon - t;
        if remaining <= cfg.dt * 1e-12 {
            break;
        }
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::NonConvergentStep { t });
        }
        let d = eval_drift(t, x);
        let mut h = cfg.dt.min(remaining);
        if cfg.adapt {
            while h > cfg.blowup_refine_floor && d.abs() * h > GROWTH_CAP * x.abs().max(1.0) {
                h *= 0.5;
            }
            h = h.max(cfg.blowup_refine_floor.min(remaining));
        }
        let dw = if zero_noise {
            0.0
        } else {
            let z: f64 = rng.sample(StandardNormal);
            h.sqrt() * z
        };
        x += d * h + dw;
        acc.add(h);
        let t_new = acc.now();
        rec.push(t_new, x);
        if explosive && x.abs() >= cfg.explosion_threshold {
            // Invert |X|^{-(alpha-1)} ~ rho (alpha-1) t^{-beta} (tau - t).
            let rem = x.abs().powf(1.0 - p.alpha) * t_new.powf(p.beta) / (p.rho * (p.alpha - 1.0));
            let tau = (t_new + rem).min(horizon);
            report.exploded = true;
            report.threshold_crossing = Some(t_new);
            report.last_value = x;
            report.tau_e_estimate = Some(tau);
            if tau <= t_new {
                // Crossing exactly at the horizon: grid points never sit at
                // or past the killing time.
                rec.pop_last();
            }
            return Ok((rec.into_path(p.t0, Some(tau)), report));
        }
    }
    report.last_value = x;
    Ok((rec.into_path(p.t0, None), report))
}

/// alpha = -1: integrate the squared process with full truncation and take
/// the square root. Never explosive.
fn squared_process(
    p: &Params,
    cfg: &SimConfig,
    horizon: f64,
    rng: &mut ChaCha12Rng,
) -> Result<(KilledPath, ExplosionReport)> {
    let mut acc = TimeAccum::new(p.t0);
    let mut rec = Recorder::new(p.t0, p.x0, cfg.store_full_path);
    let mut y = p.x0 * p.x0;
    let mut steps: u64 = 0;
    loop {
        let t = acc.now();
        let remaining = horizon - t;
        if remaining <= cfg.dt * 1e-12 {
            break;
        }
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::NonConvergentStep { t });
        }
        let d = 2.0 * p.rho / crate::model::fpow(t, p.beta) + 1.0;
        let mut h = cfg.dt.min(remaining);
        if cfg.adapt {
            while h > cfg.blowup_refine_floor && d.abs() * h > GROWTH_CAP * y.max(1.0) {
                h *= 0.5;
            }
        }
        let z: f64 = rng.sample(StandardNormal);
        y += d * h + 2.0 * y.max(0.0).sqrt() * h.sqrt() * z;
        y = y.max(0.0);
        acc.add(h);
        rec.push(acc.now(), y.sqrt());
    }
    let report = ExplosionReport {
        exploded: false,
        tau_e_estimate: None,
        threshold_crossing: None,
        last_value: y.sqrt(),
        censored_at: horizon,
    };
    Ok((rec.into_path(p.t0, None), report))
}

/// alpha < -1, rho > 0: exact drift sub-step (the repulsion ODE has a closed
/// solution with t frozen), then the Gaussian increment; a result <= 0 is
/// rejected and retried at half step.
fn positivity_preserving(
    p: &Params,
    cfg: &SimConfig,
    horizon: f64,
    rng: &mut ChaCha12Rng,
) -> Result<(KilledPath, ExplosionReport)> {
    let one_minus_a = 1.0 - p.alpha; // > 2
    let mut acc = TimeAccum::new(p.t0);
    let mut rec = Recorder::new(p.t0, p.x0, cfg.store_full_path);
    let mut x = p.x0;
    let mut steps: u64 = 0;
    loop {
        let t = acc.now();
        let remaining = horizon - t;
        if remaining <= cfg.dt * 1e-12 {
            break;
        }
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::NonConvergentStep { t });
        }
        let base = cfg.dt.min(remaining);
        let mut consumed = 0.0;
        let mut sub = base;
        while consumed < base * (1.0 - 1e-12) {
            let hs = sub.min(base - consumed);
            let t_now = acc.now();
            let pushed = (crate::model::fpow(x, one_minus_a)
                + one_minus_a * p.rho * hs / crate::model::fpow(t_now, p.beta))
            .powf(1.0 / one_minus_a);
            let z: f64 = rng.sample(StandardNormal);
            let cand = pushed + hs.sqrt() * z;
            if cand > 0.0 {
                x = cand;
                acc.add(hs);
                consumed += hs;
                sub = (sub * 2.0).min(base);
            } else {
                sub = hs * 0.5;
                if sub < cfg.blowup_refine_floor {
                    return Err(Error::NonConvergentStep { t: t_now });
                }
            }
        }
        rec.push(acc.now(), x);
    }
    let report = ExplosionReport {
        exploded: false,
        tau_e_estimate: None,
        threshold_crossing: None,
        last_value: x,
        censored_at: horizon,
    };
    Ok((rec.into_path(p.t0, None), report))
}

/// Euler–Maruyama on the transformed equation dY = dW + b_phi(s, Y) ds from
/// Y_0 = x0 (phi'(0) = 1 for both families), on the transformed clock
/// s in [0, s_horizon]. Long real-time studies run here at uniform step.
pub fn simulate_transformed_path(
    p: &Params,
    tc: &TimeChange,
    cfg: &SimConfig,
    s_horizon: f64,
    path_index: u64,
) -> Result<KilledPath> {
    if validate(p) == ValidityClass::Invalid {
        return Err(Error::InvalidParameters(
            "triple outside the validity region".into(),
        ));
    }
    if p.alpha <= -1.0 {
        return Err(Error::Unsupported(
            "transformed integrator requires alpha > -1; use simulate + scaling_apply".into(),
        ));
    }
    if !(s_horizon > 0.0 && s_horizon < tc.t1()) {
        return Err(Error::OutOfDomain {
            s: s_horizon,
            t1: tc.t1(),
        });
    }
    cfg.check(p)?;
    let mut rng = RngStreamSpec {
        master_seed: cfg.seed,
        path_index,
    }
    .rng();
    let clamp = if p.alpha < 0.0 {
        Some(clamp_cap(cfg))
    } else {
        None
    };
    let explosive = p.alpha > 1.0 && p.rho > 0.0;
    let mut acc = TimeAccum::new(0.0);
    let mut rec = Recorder::new(0.0, p.x0, cfg.store_full_path);
    let mut y = p.x0;
    let mut killing = None;
    let mut steps: u64 = 0;
    loop {
        let s = acc.now();
        let remaining = s_horizon - s;
        if remaining <= cfg.dt * 1e-12 {
            break;
        }
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::NonConvergentStep { t: s });
        }
        let d = if y == 0.0 && p.alpha < 0.0 {
            0.0
        } else {
            let raw = transformed_drift(p, tc, s, y)?;
            match clamp {
                Some(cap) => raw.clamp(-cap, cap),
                None => raw,
            }
        };
        let mut h = cfg.dt.min(remaining);
        if cfg.adapt {
            while h > cfg.blowup_refine_floor && d.abs() * h > GROWTH_CAP * y.abs().max(1.0) {
                h *= 0.5;
            }
        }
        let z: f64 = rng.sample(StandardNormal);
        y += d * h + h.sqrt() * z;
        acc.add(h);
        let s_new = acc.now();
        rec.push(s_new, y);
        if explosive && y.abs() >= cfg.explosion_threshold {
            let (phi, dphi, _) = tc.eval(s_new)?;
            let coeff = p.rho * dphi.powf((p.alpha + 1.0) / 2.0) / phi.powf(p.beta);
            let rem = y.abs().powf(1.0 - p.alpha) / (coeff * (p.alpha - 1.0));
            let tau = (s_new + rem).min(s_horizon);
            if tau <= s_new {
                rec.pop_last();
            }
            killing = Some(tau);
            break;
        }
    }
    Ok(rec.into_path(0.0, killing))
}

pub fn simulate_transformed(
    p: &Params,
    tc: &TimeChange,
    cfg: &SimConfig,
    s_horizon: f64,
) -> Result<KilledPath> {
    simulate_transformed_path(p, tc, cfg, s_horizon, 0)
}

/// One draw of the non-explosion weight (the pinned-bridge Girsanov
/// functional): simulates db = dW - delta b/(t1 - s) ds on [0, t1 - eps_cut]
/// and accumulates exp(sum rho sgn(b)|b|^a dW - 1/2 sum rho^2 |b|^{2a} ds)
/// with the same increments. The neglected tail vanishes with eps_cut since
/// the bridge is pinned at 0.
pub fn simulate_bridge_functional(p: &Params, cfg: &SimConfig, eps_cut: f64) -> Result<f64> {
    bridge_functional_path(p, cfg, eps_cut, 0)
}

pub fn bridge_functional_path(
    p: &Params,
    cfg: &SimConfig,
    eps_cut: f64,
    path_index: u64,
) -> Result<f64> {
    let mut rng = RngStreamSpec {
        master_seed: cfg.seed,
        path_index,
    }
    .rng();
    let mut draw = |_s: f64| -> f64 { rng.sample(StandardNormal) };
    bridge_draw(p, cfg, eps_cut, &mut draw).map(|(w, _)| w)
}

/// Default tail cut for the bridge, relative to t1.
pub fn default_eps_cut(tc: &TimeChange) -> f64 {
    tc.t1() * 1e-4
}

/// Internal bridge driver; `normal` supplies standard Gaussian draws.
/// Returns (weight, bridge endpoint).
pub(crate) fn bridge_draw(
    p: &Params,
    cfg: &SimConfig,
    eps_cut: f64,
    normal: &mut dyn FnMut(f64) -> f64,
) -> Result<(f64, f64)> {
    if !(p.rho > 0.0 && p.alpha > 1.0 && 2.0 * p.beta > p.alpha + 1.0) {
        return Err(Error::InvalidParameters(
            "bridge functional needs rho > 0, alpha > 1, 2 beta > alpha + 1".into(),
        ));
    }
    cfg.check(p)?;
    let tc = TimeChange::power(p.alpha, p.beta)?;
    let t1 = tc.t1();
    let delta = tc.delta().expect("gamma > 1 here");
    if !(eps_cut > 0.0 && eps_cut < t1) {
        return Err(Error::InvalidParameters(format!(
            "eps_cut must lie in (0, t1 = {t1}), got {eps_cut}"
        )));
    }
    let end = t1 - eps_cut;
    let mut acc = TimeAccum::new(0.0);
    let mut b = p.x0;
    let mut log_w = 0.0;
    let mut steps: u64 = 0;
    loop {
        let s = acc.now();
        let remaining = end - s;
        if remaining <= t1 * 1e-15 {
            break;
        }
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::NonConvergentStep { t: s });
        }
        // Geometrically shrinking steps keep the pinning term stable.
        let stab = 0.2 * (t1 - s) / delta;
        let h = cfg.dt.min(remaining).min(stab);
        let dw = h.sqrt() * normal(s);
        let pow = if b == 0.0 {
            0.0
        } else {
            sgn(b) * crate::model::fpow(b.abs(), p.alpha)
        };
        log_w += p.rho * pow * dw - 0.5 * p.rho * p.rho * pow * pow * h;
        b += -delta * b / (t1 - s) * h + dw;
        acc.add(h);
    }
    Ok((log_w.exp(), b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rho: f64, alpha: f64, beta: f64, x0: f64) -> Params {
        Params::new(rho, alpha, beta, x0).unwrap()
    }

    #[test]
    fn zero_noise_blowup_time() {
        // x' = x^3 from x(1) = 1 blows up at t = 1.5 exactly.
        let p = params(1.0, 3.0, 0.0, 1.0);
        let mut cfg = SimConfig::with_dt(1e-4);
        cfg.scheme = Scheme::ZeroNoiseOde;
        cfg.store_full_path = false;
        let (_, rep) = simulate(&p, &cfg, 10.0).unwrap();
        assert!(rep.exploded);
        let tau = rep.tau_e_estimate.unwrap();
        assert!((tau - 1.5).abs() < 1e-3, "tau = {tau}");
        assert!(rep.threshold_crossing.unwrap() <= tau);
    }

    #[test]
    fn explosion_report_coherence() {
        let p = params(1.0, 3.0, 0.0, 1.0);
        let cfg = SimConfig::with_dt(1e-3).seeded(5);
        let (path, rep) = simulate(&p, &cfg, 50.0).unwrap();
        assert!(rep.exploded);
        assert!(rep.last_value.abs() >= cfg.explosion_threshold);
        let tau = rep.tau_e_estimate.unwrap();
        assert!(tau > 1.0 && tau <= rep.censored_at);
        assert!(tau >= path.last_time());
        assert!(path.killing_time.unwrap() > path.last_time() - 1e-12);
    }

    #[test]
    fn brownian_reduction_moment_test() {
        // rho = 0: increments over [1, 2] are N(0, 1).
        let p = params(0.0, 0.0, 0.0, 0.0);
        let mut cfg = SimConfig::with_dt(1e-2).seeded(1);
        cfg.store_full_path = false;
        let n = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n {
            let (path, _) = simulate_path(&p, &cfg, 2.0, i).unwrap();
            let inc = path.last_value();
            sum += inc;
            sumsq += inc * inc;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // z-score < 4 on both moments
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!(
            (var - 1.0).abs() < 4.0 * (2.0f64 / n as f64).sqrt(),
            "var {var}"
        );
    }

    #[test]
    fn bessel_scheme_stays_nonnegative() {
        let p = params(1.0, -1.0, 0.0, 0.0);
        let cfg = SimConfig::with_dt(1e-3).seeded(3);
        let (path, _) = simulate(&p, &cfg, 101.0).unwrap();
        assert!(path.len() > 100_000);
        assert!(path.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn entrance_scheme_stays_positive() {
        let p = params(1.0, -2.0, 0.0, 0.0);
        let cfg = SimConfig::with_dt(1e-3).seeded(4);
        let (path, _) = simulate(&p, &cfg, 30.0).unwrap();
        assert!(path.values[1..].iter().all(|&v| v > 0.0));
        // started at the entrance boundary yet immediately positive
        assert_eq!(path.values[0], 0.0);
    }

    #[test]
    fn reproducible_streams() {
        let p = params(1.0, 2.0, 1.0, 1.0);
        let cfg = SimConfig::with_dt(1e-3).seeded(99);
        let (a, _) = simulate_path(&p, &cfg, 5.0, 7).unwrap();
        let (b, _) = simulate_path(&p, &cfg, 5.0, 7).unwrap();
        assert_eq!(a, b, "identical stream must give bitwise-identical paths");
        let (c, _) = simulate_path(&p, &cfg, 5.0, 8).unwrap();
        assert_ne!(
            a.values, c.values,
            "different path index gives a different path"
        );
    }

    #[test]
    fn zero_noise_attractive_is_monotone() {
        let p = params(-1.0, 1.0, -0.5, 3.0);
        let mut cfg = SimConfig::with_dt(1e-3);
        cfg.scheme = Scheme::ZeroNoiseOde;
        let (path, _) = simulate(&p, &cfg, 10.0).unwrap();
        for w in path.values.windows(2) {
            assert!(w[1].abs() <= w[0].abs() + 1e-15);
        }
    }

    #[test]
    fn transformed_ou_variance() {
        // rho = 0 under the exponential change: dY = dW - Y/2 ds, stationary
        // variance 1.
        let p = params(0.0, 1.0, 0.0, 0.0);
        let mut cfg = SimConfig::with_dt(1e-2);
        cfg.store_full_path = false;
        let n = 4000;
        let mut sumsq = 0.0;
        for i in 0..n {
            let path =
                simulate_transformed_path(&p, &TimeChange::Exponential, &cfg, 12.0, i).unwrap();
            let v = path.last_value();
            sumsq += v * v;
        }
        let var = sumsq / n as f64;
        assert!((var - 1.0).abs() < 0.1, "stationary variance {var}");
    }

    #[test]
    fn bridge_weight_is_one_without_noise_from_origin() {
        let p = params(1.0, 3.0, 3.0, 0.0);
        let cfg = SimConfig::with_dt(1e-3);
        let mut zero = |_s: f64| 0.0;
        let (w, endpoint) = bridge_draw(&p, &cfg, 2e-4, &mut zero).unwrap();
        assert_eq!(w, 1.0);
        assert_eq!(endpoint, 0.0);
    }

    #[test]
    fn bridge_weight_near_one_for_tiny_rho() {
        let p = params(1e-6, 3.0, 3.0, 1.0);
        let cfg = SimConfig::with_dt(1e-3).seeded(17);
        for i in 0..20 {
            let w = bridge_functional_path(&p, &cfg, 2e-4, i).unwrap();
            assert!((w - 1.0).abs() < 1e-3, "weight {w}");
        }
    }

    #[test]
    fn bridge_endpoint_shrinks_with_eps_cut() {
        let p = params(1.0, 3.0, 3.0, 1.0);
        let cfg = SimConfig::with_dt(1e-3).seeded(23);
        let median_abs = |eps: f64| {
            let mut v: Vec<f64> = (0..500)
                .map(|i| {
                    let mut rng = RngStreamSpec {
                        master_seed: cfg.seed,
                        path_index: i,
                    }
                    .rng();
                    let mut draw = |_s: f64| -> f64 { rng.sample(StandardNormal) };
                    bridge_draw(&p, &cfg, eps, &mut draw).unwrap().1.abs()
                })
                .collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[250]
        };
        let coarse = median_abs(1e-2);
        let fine = median_abs(1e-3);
        let finest = median_abs(1e-4);
        assert!(fine < coarse, "{fine} !< {coarse}");
        assert!(finest < fine, "{finest} !< {fine}");
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let p = params(-1.0, -2.0, 0.0, 1.0);
        assert!(simulate(&p, &SimConfig::default(), 5.0).is_err());
        let p = params(1.0, 2.0, 0.0, 1.0);
        assert!(simulate(&p, &SimConfig::default(), 0.5).is_err());
        assert!(simulate_bridge_functional(&p, &SimConfig::default(), 1e-4).is_err());
        let p = params(1.0, 3.0, 3.0, 1.0);
        let tc = TimeChange::power(3.0, 3.0).unwrap();
        assert!(simulate_transformed(&p, &tc, &SimConfig::default(), 5.0).is_err());
    }
}
