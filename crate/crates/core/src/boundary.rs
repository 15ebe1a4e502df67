//! Deterministic boundary quantities.
//!
//! For a step-size schedule `η_1, η_2, …`, PSD mean `Σ` with top eigenvalue
//! `μ`, and an almost-sure deviation bound `‖X_i − Σ‖ ≤ L`:
//!
//! * `m_i = 1 + η_i μ`, `M_n = ∏_{i≤n} m_i`, `V_n = Σ_{i≤n} (η_i L)²`;
//! * the fixed-time threshold `t(δ, n) = e ‖E_n‖ M_n sqrt(2 V_n ln(d/δ))`,
//!   valid when `M_n sqrt(2 V_n ln(d/δ)) ≤ 1`;
//! * the anytime boundary, which evaluates `t(δ/h(k), ⌊η^{k+1}⌋)` on the
//!   geometric epoch `k` containing `n`, with `h(k) = (k+1)^α ζ(α)`;
//! * two smooth variants of the same boundary.
//!
//! Logarithms are natural throughout.

use alloc::vec::Vec;
use core::f64::consts::E;

use crate::error::{Error, Result};

/// Step-size rule `i ↦ η_i` for `i ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `η_i = c`.
    Constant { c: f64 },
    /// `η_i = c / N` for `i ≤ N`; undefined past `N`.
    FixedHorizon { c: f64, horizon: usize },
    /// `η_i = c / i^γ`.
    Polynomial { c: f64, gamma: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Domain {
                    name,
                    value: v,
                    expected: "finite and nonnegative",
                })
            }
        };
        match *self {
            StepSchedule::Constant { c } => nonneg("schedule.c", c),
            StepSchedule::FixedHorizon { c, horizon } => {
                nonneg("schedule.c", c)?;
                if horizon == 0 {
                    return Err(Error::Domain {
                        name: "schedule.horizon",
                        value: 0.0,
                        expected: "at least 1",
                    });
                }
                Ok(())
            }
            StepSchedule::Polynomial { c, gamma } => {
                nonneg("schedule.c", c)?;
                nonneg("schedule.gamma", gamma)
            }
        }
    }

    /// Last step at which the schedule is defined, if finite.
    pub fn horizon(&self) -> Option<usize> {
        match *self {
            StepSchedule::FixedHorizon { horizon, .. } => Some(horizon),
            _ => None,
        }
    }

    /// `η_i` for `i ≥ 1`.
    pub fn eta(&self, i: usize) -> Result<f64> {
        debug_assert!(i >= 1, "steps are 1-based");
        match *self {
            StepSchedule::Constant { c } => Ok(c),
            StepSchedule::FixedHorizon { c, horizon } => {
                if i > horizon {
                    Err(Error::Horizon { step: i, horizon })
                } else {
                    Ok(c / horizon as f64)
                }
            }
            StepSchedule::Polynomial { c, gamma } => Ok(c / libm::pow(i as f64, gamma)),
        }
    }

    /// `η_1, …, η_n`.
    pub fn etas(&self, n: usize) -> Result<Vec<f64>> {
        (1..=n).map(|i| self.eta(i)).collect()
    }

    /// True when every step size is zero.
    pub fn is_zero(&self) -> bool {
        match *self {
            StepSchedule::Constant { c }
            | StepSchedule::FixedHorizon { c, .. }
            | StepSchedule::Polynomial { c, .. } => c == 0.0,
        }
    }
}

/// Parameters shared by every boundary in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    pub delta: f64,
    pub d: usize,
    /// Almost-sure bound `L` on `‖X_i − Σ‖`.
    pub deviation_bound: f64,
    /// Epoch base `η > 1`.
    pub eta_epoch: f64,
    /// Stitching exponent `α > 1`.
    pub alpha: f64,
    /// `μ = λ_max(Σ)`.
    pub lambda_max: f64,
}

impl BoundaryParams {
    pub fn new(
        delta: f64,
        d: usize,
        deviation_bound: f64,
        eta_epoch: f64,
        alpha: f64,
        lambda_max: f64,
    ) -> Result<Self> {
        let p = Self {
            delta,
            d,
            deviation_bound,
            eta_epoch,
            alpha,
            lambda_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name, value, expected| {
            if ok {
                Ok(())
            } else {
                Err(Error::Domain {
                    name,
                    value,
                    expected,
                })
            }
        };
        check(
            self.delta > 0.0 && self.delta < 1.0,
            "delta",
            self.delta,
            "0 < delta < 1",
        )?;
        check(self.d >= 1, "d", self.d as f64, "d >= 1")?;
        check(
            self.deviation_bound >= 0.0 && self.deviation_bound.is_finite(),
            "L",
            self.deviation_bound,
            "L >= 0",
        )?;
        check(
            self.eta_epoch > 1.0 && self.eta_epoch.is_finite(),
            "eta_epoch",
            self.eta_epoch,
            "eta_epoch > 1",
        )?;
        check(
            self.alpha > 1.0 + ZETA_POLE_GUARD && self.alpha.is_finite(),
            "alpha",
            self.alpha,
            "alpha > 1",
        )?;
        check(
            self.lambda_max >= 0.0 && self.lambda_max.is_finite(),
            "lambda_max",
            self.lambda_max,
            "lambda_max >= 0",
        )
    }
}

/// `(n, M_n, V_n, ‖E_n‖)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulativeStats {
    pub n: usize,
    pub growth: f64,
    pub variance: f64,
    pub expected_norm: f64,
}

impl CumulativeStats {
    pub const INITIAL: CumulativeStats = CumulativeStats {
        n: 0,
        growth: 1.0,
        variance: 0.0,
        expected_norm: 1.0,
    };
}

impl Default for CumulativeStats {
    fn default() -> Self {
        Self::INITIAL
    }
}

/// `m_i = ‖I + η_i Σ‖ = 1 + η_i λ_max(Σ)` for PSD `Σ`.
pub fn growth_factor(eta: f64, lambda_max: f64) -> f64 {
    1.0 + eta * lambda_max
}

/// One step of the `M_n`, `V_n` recurrences, with `σ_i = η_i L`.
pub fn accumulate_stats(prev: CumulativeStats, eta: f64, params: &BoundaryParams) -> CumulativeStats {
    let growth = prev.growth * growth_factor(eta, params.lambda_max);
    let sigma = eta * params.deviation_bound;
    CumulativeStats {
        n: prev.n + 1,
        growth,
        variance: prev.variance + sigma * sigma,
        // ‖E_n‖ = M_n for PSD Σ.
        expected_norm: growth,
    }
}

/// Stats after `n` steps of `schedule`.
pub fn stats_at(n: usize, schedule: &StepSchedule, params: &BoundaryParams) -> Result<CumulativeStats> {
    let mut s = CumulativeStats::INITIAL;
    for i in 1..=n {
        s = accumulate_stats(s, schedule.eta(i)?, params);
    }
    Ok(s)
}

/// `M_n sqrt(2 V_n ln(d/δ)) ≤ 1` at an explicit `δ`.
pub fn check_condition_at(stats: &CumulativeStats, delta: f64, d: usize) -> bool {
    condition_lhs(stats, delta, d) <= 1.0
}

/// Step-size condition at the configured `δ`.
pub fn check_condition(stats: &CumulativeStats, params: &BoundaryParams) -> bool {
    check_condition_at(stats, params.delta, params.d)
}

/// Left-hand side `M_n sqrt(2 V_n ln(d/δ))` of the step-size condition.
pub fn condition_lhs(stats: &CumulativeStats, delta: f64, d: usize) -> f64 {
    stats.growth * libm::sqrt(2.0 * stats.variance * libm::log(d as f64 / delta))
}

const EPOCH_GUARD: f64 = 1e-12;

/// Relative guard, capped below half a unit so it never moves `⌈·⌉`/`⌊·⌋`
/// past a neighbouring integer.
fn guard(power: f64) -> f64 {
    (EPOCH_GUARD * power).min(0.25)
}

/// Walks the epochs `[⌈η^k⌉, ⌊η^{k+1}⌋]` for `k = 0, 1, …`.
///
/// Powers are built by repeated multiplication; a relative guard of `1e-12`
/// keeps exact integer powers (e.g. `2^k`) on the right side of `⌈·⌉`/`⌊·⌋`.
#[derive(Debug, Clone)]
struct Epochs {
    base: f64,
    k: usize,
    power: f64,
}

impl Epochs {
    fn new(base: f64) -> Self {
        debug_assert!(base > 1.0);
        Self { base, k: 0, power: 1.0 }
    }
}

impl Iterator for Epochs {
    /// `(k, lower, upper)`; the interval is empty when `lower > upper`.
    type Item = (usize, u64, u64);

    fn next(&mut self) -> Option<Self::Item> {
        let next_power = self.power * self.base;
        let lower = libm::ceil(self.power - guard(self.power));
        let upper = libm::floor(next_power + guard(next_power));
        if !(upper < u64::MAX as f64) {
            return None;
        }
        let item = (self.k, lower as u64, upper as u64);
        self.k += 1;
        self.power = next_power;
        Some(item)
    }
}

/// Minimal `k ≥ 0` with `⌈η^k⌉ ≤ n ≤ ⌊η^{k+1}⌋`.
pub fn epoch_index(n: usize, eta_epoch: f64) -> usize {
    assert!(n >= 1, "epoch_index is defined for n >= 1");
    assert!(eta_epoch > 1.0, "epoch base must exceed 1");
    let n = n as u64;
    for (k, lower, upper) in Epochs::new(eta_epoch) {
        if lower <= n && n <= upper {
            return k;
        }
    }
    unreachable!("consecutive epochs cover every positive integer")
}

/// `(⌈η^k⌉, ⌊η^{k+1}⌋)` for epoch `k`.
pub fn epoch_bounds(k: usize, eta_epoch: f64) -> (usize, usize) {
    let (_, lo, hi) = Epochs::new(eta_epoch)
        .nth(k)
        .expect("epoch power overflowed");
    (lo as usize, hi as usize)
}

/// Right endpoint `⌊η^{k+1}⌋` of epoch `k`.
pub fn epoch_endpoint(k: usize, eta_epoch: f64) -> usize {
    epoch_bounds(k, eta_epoch).1
}

/// `t(δ, n) = e ‖E_n‖ M_n sqrt(2 V_n ln(d/δ))`.
pub fn fixed_time_threshold(stats: &CumulativeStats, delta: f64, d: usize) -> f64 {
    E * stats.expected_norm * stats.growth * libm::sqrt(2.0 * stats.variance * libm::log(d as f64 / delta))
}

/// Smallest accepted distance from the pole of `ζ` at 1.
pub const ZETA_POLE_GUARD: f64 = 1e-9;

// B_{2j} / (2j)! for j = 1..=8.
const EULER_MACLAURIN: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

/// Riemann zeta function for real `α > 1`.
///
/// Direct partial sum to `K - 1`, integral tail `K^{1-α}/(α-1)`, and
/// Euler–Maclaurin corrections for the remainder.
pub fn zeta(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 + ZETA_POLE_GUARD) || alpha.is_nan() {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
            expected: "alpha > 1 (zeta has a pole at 1)",
        });
    }
    if alpha.is_infinite() {
        return Ok(1.0);
    }
    const K: usize = 16;
    let kf = K as f64;
    let mut head = 0.0;
    for k in (1..K).rev() {
        head += libm::pow(k as f64, -alpha);
    }
    let k_pow = libm::pow(kf, -alpha);
    let mut tail = kf * k_pow / (alpha - 1.0) + 0.5 * k_pow;
    // term_j = B_2j/(2j)! · α(α+1)…(α+2j−2) · K^{−α−2j+1}
    let mut rising = alpha;
    let mut power = k_pow / kf;
    for (j, coef) in EULER_MACLAURIN.iter().enumerate() {
        if j > 0 {
            let a = alpha + (2 * j - 1) as f64;
            rising *= a * (a + 1.0);
            power /= kf * kf;
        }
        tail += coef * rising * power;
    }
    Ok(head + tail)
}

/// `h(k) = (k+1)^α ζ(α)`; its reciprocals sum to 1 over `k ≥ 0`.
pub fn stitching_h(k: usize, alpha: f64) -> Result<f64> {
    Ok(libm::pow((k + 1) as f64, alpha) * zeta(alpha)?)
}

/// A boundary value and whether the step-size condition held where it was
/// evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryValue {
    pub value: f64,
    pub condition_ok: bool,
}

/// Evaluation rule for the smooth boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothVariant {
    /// `e ‖E_n‖ M_n sqrt(V_n (ln d + ln(ζ(α)/δ) + α ln(log_η n + 1)))` at `n`.
    Paper,
    /// Factor 2 restored and stats taken at the epoch endpoint, with
    /// `k_n + 1` in place of `log_η n + 1`; never below the anytime boundary.
    Dominating,
}

fn anytime_from(stats: &CumulativeStats, k: usize, params: &BoundaryParams, zeta_alpha: f64) -> BoundaryValue {
    let h = libm::pow((k + 1) as f64, params.alpha) * zeta_alpha;
    BoundaryValue {
        value: fixed_time_threshold(stats, params.delta / h, params.d),
        condition_ok: check_condition(stats, params),
    }
}

fn smooth_from(
    n: usize,
    k: usize,
    at_n: &CumulativeStats,
    at_endpoint: &CumulativeStats,
    params: &BoundaryParams,
    zeta_alpha: f64,
    variant: SmoothVariant,
) -> BoundaryValue {
    let base = libm::log(params.d as f64) + libm::log(zeta_alpha / params.delta);
    match variant {
        SmoothVariant::Paper => {
            let log_eta_n = libm::log(n as f64) / libm::log(params.eta_epoch);
            let bracket = base + params.alpha * libm::log(log_eta_n + 1.0);
            let s = at_n;
            BoundaryValue {
                value: E * s.expected_norm * s.growth * libm::sqrt(s.variance * bracket),
                condition_ok: check_condition(s, params),
            }
        }
        SmoothVariant::Dominating => {
            let bracket = base + params.alpha * libm::log((k + 1) as f64);
            let s = at_endpoint;
            let value = E * s.expected_norm * s.growth * libm::sqrt(2.0 * s.variance * bracket);
            // Equal to the anytime boundary in exact arithmetic; the max keeps
            // domination exact under rounding.
            let anytime = anytime_from(s, k, params, zeta_alpha).value;
            BoundaryValue {
                value: value.max(anytime),
                condition_ok: check_condition(s, params),
            }
        }
    }
}

fn endpoint_stats(n: usize, schedule: &StepSchedule, params: &BoundaryParams) -> Result<(usize, CumulativeStats)> {
    let k = epoch_index(n, params.eta_epoch);
    let end = epoch_endpoint(k, params.eta_epoch);
    if let Some(horizon) = schedule.horizon() {
        if end > horizon {
            return Err(Error::Horizon { step: end, horizon });
        }
    }
    Ok((k, stats_at(end, schedule, params)?))
}

/// Epoch-stitched anytime boundary `t(δ/h(k_n), ⌊η^{k_n+1}⌋)`.
///
/// Piecewise constant on each epoch. The condition flag refers to the epoch
/// endpoint at the original `δ`.
pub fn anytime_boundary(n: usize, schedule: &StepSchedule, params: &BoundaryParams) -> Result<BoundaryValue> {
    let zeta_alpha = zeta(params.alpha)?;
    let (k, stats) = endpoint_stats(n, schedule, params)?;
    Ok(anytime_from(&stats, k, params, zeta_alpha))
}

/// Smooth boundary `f(n)` in either variant.
pub fn smooth_boundary(
    n: usize,
    schedule: &StepSchedule,
    params: &BoundaryParams,
    variant: SmoothVariant,
) -> Result<BoundaryValue> {
    let zeta_alpha = zeta(params.alpha)?;
    let (k, at_endpoint) = match variant {
        SmoothVariant::Dominating => endpoint_stats(n, schedule, params)?,
        SmoothVariant::Paper => (epoch_index(n, params.eta_epoch), CumulativeStats::INITIAL),
    };
    let at_n = stats_at(n, schedule, params)?;
    Ok(smooth_from(n, k, &at_n, &at_endpoint, params, zeta_alpha, variant))
}

/// Tail bound `max(d, e) exp(−u² / (2 e² V_n))`, valid for `u ∈ [0, e]`.
pub fn huang_tail(u: f64, stats: &CumulativeStats, d: usize) -> Result<f64> {
    if !(0.0..=E).contains(&u) {
        return Err(Error::Domain {
            name: "u",
            value: u,
            expected: "the tail bound is valid only for 0 <= u <= e",
        });
    }
    let front = (d as f64).max(E);
    if stats.variance == 0.0 {
        return Ok(if u == 0.0 { front } else { 0.0 });
    }
    Ok(front * libm::exp(-u * u / (2.0 * E * E * stats.variance)))
}

/// Prefix stats and per-epoch quantities, precomputed once so that every
/// boundary in `1..=n_max` is an `O(1)` lookup.
///
/// Values agree bit-for-bit with the free functions in this module.
#[derive(Debug, Clone)]
pub struct BoundaryTable {
    params: BoundaryParams,
    zeta_alpha: f64,
    n_max: usize,
    /// `prefix[i]` holds stats after `i` steps, up to the last epoch endpoint.
    prefix: Vec<CumulativeStats>,
    /// `(k_n, ⌊η^{k_n+1}⌋)` for `n = 1..=n_max` at index `n - 1`.
    epochs: Vec<(usize, usize)>,
}

impl BoundaryTable {
    pub fn new(n_max: usize, schedule: &StepSchedule, params: &BoundaryParams) -> Result<Self> {
        params.validate()?;
        schedule.validate()?;
        if n_max == 0 {
            return Err(Error::Domain {
                name: "n_max",
                value: 0.0,
                expected: "n_max >= 1",
            });
        }
        let zeta_alpha = zeta(params.alpha)?;
        let mut epochs = Vec::with_capacity(n_max);
        let mut walk = Epochs::new(params.eta_epoch);
        let (mut k, mut lo, mut hi) = walk.next().expect("first epoch");
        for n in 1..=n_max as u64 {
            // Minimal k: advance only once n leaves the current epoch.
            while !(lo <= n && n <= hi) {
                (k, lo, hi) = walk.next().expect("epoch power overflowed");
            }
            epochs.push((k, hi as usize));
        }
        let last_end = epochs.last().map(|e| e.1).unwrap_or(0).max(n_max);
        if let Some(horizon) = schedule.horizon() {
            if last_end > horizon {
                return Err(Error::Horizon { step: last_end, horizon });
            }
        }
        let mut prefix = Vec::with_capacity(last_end + 1);
        let mut s = CumulativeStats::INITIAL;
        prefix.push(s);
        for i in 1..=last_end {
            s = accumulate_stats(s, schedule.eta(i)?, params);
            prefix.push(s);
        }
        Ok(Self {
            params: *params,
            zeta_alpha,
            n_max,
            prefix,
            epochs,
        })
    }

    pub fn params(&self) -> &BoundaryParams {
        &self.params
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Stats after `n` steps; `n` may reach the last epoch endpoint.
    pub fn stats(&self, n: usize) -> &CumulativeStats {
        &self.prefix[n]
    }

    /// Last step covered by the prefix table.
    pub fn last_endpoint(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn epoch(&self, n: usize) -> usize {
        self.epochs[n - 1].0
    }

    pub fn endpoint(&self, n: usize) -> usize {
        self.epochs[n - 1].1
    }

    pub fn fixed(&self, n: usize) -> f64 {
        fixed_time_threshold(&self.prefix[n], self.params.delta, self.params.d)
    }

    pub fn condition(&self, n: usize) -> bool {
        check_condition(&self.prefix[n], &self.params)
    }

    pub fn anytime(&self, n: usize) -> BoundaryValue {
        let (k, end) = self.epochs[n - 1];
        anytime_from(&self.prefix[end], k, &self.params, self.zeta_alpha)
    }

    pub fn smooth(&self, n: usize, variant: SmoothVariant) -> BoundaryValue {
        let (k, end) = self.epochs[n - 1];
        smooth_from(
            n,
            k,
            &self.prefix[n],
            &self.prefix[end],
            &self.params,
            self.zeta_alpha,
            variant,
        )
    }

    /// Epochs touched by `1..=n_max`, as `(k, endpoint)`.
    pub fn epoch_endpoints(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &e in &self.epochs {
            if out.last() != Some(&e) {
                out.push(e);
            }
        }
        out
    }

    /// Step-size condition at the last epoch endpoint.
    pub fn condition_at_last_endpoint(&self) -> bool {
        check_condition(&self.prefix[self.last_endpoint()], &self.params)
    }

    /// Step-size condition with `δ/h(k)` in place of `δ` at every touched
    /// epoch endpoint.
    pub fn condition_epochwise(&self) -> bool {
        self.epoch_endpoints().into_iter().all(|(k, end)| {
            let h = libm::pow((k + 1) as f64, self.params.alpha) * self.zeta_alpha;
            check_condition_at(&self.prefix[end], self.params.delta / h, self.params.d)
        })
    }
}
