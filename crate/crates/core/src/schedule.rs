//! Gap-adaptive segmentation: Lipschitz regularization of gap profiles,
//! greedy breakpoint selection, dyadic level-set statistics, the segment-count
//! and harmonic-sum bounds they imply, and the analytic search-problem gap.

use std::sync::Arc;

use crate::error::{QacError, Result};

/// A positive lower-bound profile `s -> gamma(s)` on `[0, 1]` together with
/// the norm scale `alpha` and the scan resolution used for level-set
/// statistics. Regularized profiles satisfy the Lipschitz consistency
/// `gamma(s + d) >= gamma(s) - 4 alpha d`.
#[derive(Clone)]
pub struct GapProfile {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub alpha: f64,
    pub grid_resolution: usize,
}

impl std::fmt::Debug for GapProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GapProfile")
            .field("alpha", &self.alpha)
            .field("grid_resolution", &self.grid_resolution)
            .finish()
    }
}

impl GapProfile {
    pub fn from_fn<F>(eval: F, alpha: f64, grid_resolution: usize) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            alpha,
            grid_resolution: grid_resolution.max(8),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        (self.eval)(s.clamp(0.0, 1.0))
    }

    /// Minimum over the scan grid.
    pub fn min_value(&self) -> f64 {
        let n = self.grid_resolution;
        (0..=n)
            .map(|i| self.value(i as f64 / n as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Largest profile below `raw` satisfying the `4 alpha` slope condition: the
/// two-pass lower cone envelope over the grid, interpolated linearly.
pub fn weyl_regularize<F>(raw: F, alpha: f64, grid: usize) -> Result<GapProfile>
where
    F: Fn(f64) -> f64,
{
    let n = grid.max(8);
    let step = 1.0 / n as f64;
    let mut vals = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let v = raw(i as f64 * step);
        if v.is_nan() || v <= 0.0 {
            return Err(QacError::Validation(format!(
                "profile must be positive, found {v} at s = {}",
                i as f64 * step
            )));
        }
        vals.push(v);
    }
    let slope = 4.0 * alpha * step;
    for i in 1..=n {
        vals[i] = vals[i].min(vals[i - 1] + slope);
    }
    for i in (0..n).rev() {
        vals[i] = vals[i].min(vals[i + 1] + slope);
    }
    let alpha_copy = alpha;
    Ok(GapProfile::from_fn(
        move |s| {
            let x = s * n as f64;
            let i = (x.floor() as usize).min(n - 1);
            let frac = x - i as f64;
            vals[i] * (1.0 - frac) + vals[i + 1] * frac
        },
        alpha_copy,
        n,
    ))
}

/// Ordered breakpoints `0 = s_0 < ... < s_q = 1` with the per-segment gap
/// floors and the step constant `c`.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub points: Vec<f64>,
    /// Analytic per-segment floor `gamma(s_i) / (1 + 4c)`.
    pub gamma_floors: Vec<f64>,
    pub c: f64,
}

impl Schedule {
    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn inverse_gamma_sum(&self) -> f64 {
        self.gamma_floors.iter().map(|g| 1.0 / g).sum()
    }
}

const MAX_SEGMENTS: usize = 10_000_000;

/// Greedy breakpoints: `s_{i+1} = s_i + c gamma(s_i) / (alpha (1 + 4c))`.
/// Lipschitz consistency guarantees the per-segment minimum stays above
/// `gamma(s_i)/(1+4c)`, so each step length lies between `c0 gamma_i/alpha`
/// and `c1 gamma_i/alpha` with `c0 = c/(1+4c)`, `c1 = c`.
pub fn greedy_schedule(profile: &GapProfile, c: f64) -> Result<Schedule> {
    if !(0.0..0.25).contains(&c) || c == 0.0 {
        return Err(QacError::Range("c must lie in (0, 1/4)".into()));
    }
    let mut points = vec![0.0];
    let mut floors = Vec::new();
    let mut s = 0.0f64;
    while s < 1.0 {
        let g = profile.value(s);
        let step = c * g / (profile.alpha * (1.0 + 4.0 * c));
        if step.is_nan() || step <= 1e-12 {
            return Err(QacError::Infeasible(format!(
                "step underflow at s = {s}: gap {g:.3e} effectively vanishes"
            )));
        }
        floors.push(g / (1.0 + 4.0 * c));
        s = (s + step).min(1.0);
        points.push(s);
        if points.len() > MAX_SEGMENTS {
            return Err(QacError::Infeasible(
                "segment count exceeded the 1e7 cap".into(),
            ));
        }
    }
    Ok(Schedule {
        points,
        gamma_floors: floors,
        c,
    })
}

/// Per-level dyadic statistics of a profile.
#[derive(Debug, Clone)]
pub struct LevelSetReport {
    /// `(level, measure, interval count)` for every nonempty level.
    pub levels: Vec<(i32, f64, usize)>,
    /// `max_l 2^l mu(J_l)`.
    pub l_estimate: f64,
    /// Largest interval count over levels.
    pub r_estimate: usize,
    pub resolution: usize,
}

/// Measures the dyadic level sets
/// `J_l = { s : alpha/2^{l+1} < gamma(s) <= alpha/2^l }` on midpoint samples
/// at the profile's resolution.
pub fn level_sets(profile: &GapProfile, alpha: f64) -> LevelSetReport {
    let n = profile.grid_resolution;
    let mut member: Vec<i32> = Vec::with_capacity(n);
    for i in 0..n {
        let s = (i as f64 + 0.5) / n as f64;
        let g = profile.value(s);
        member.push((alpha / g).log2().floor() as i32);
    }
    let lo = *member.iter().min().expect("nonempty grid");
    let hi = *member.iter().max().expect("nonempty grid");
    let mut levels = Vec::new();
    let mut l_estimate = 0.0f64;
    let mut r_estimate = 0usize;
    for level in lo..=hi {
        let mut count = 0usize;
        let mut intervals = 0usize;
        let mut inside = false;
        for &m in &member {
            if m == level {
                count += 1;
                if !inside {
                    intervals += 1;
                    inside = true;
                }
            } else {
                inside = false;
            }
        }
        if count > 0 {
            let measure = count as f64 / n as f64;
            levels.push((level, measure, intervals));
            l_estimate = l_estimate.max(2f64.powi(level) * measure);
            r_estimate = r_estimate.max(intervals);
        }
    }
    LevelSetReport {
        levels,
        l_estimate,
        r_estimate,
        resolution: n,
    }
}

/// Both sides of the segment-count and harmonic-sum inequalities implied by
/// the level-set promises.
#[derive(Debug, Clone)]
pub struct GapTheoremReport {
    pub segment_count: usize,
    pub segment_count_bound: f64,
    pub inverse_gamma_sum: f64,
    pub inverse_gamma_sum_bound: f64,
    pub gamma_min: f64,
    pub pass: bool,
}

/// Checks `q <= (floor(log2(alpha/gamma)) + 2)(2L/c + R)` and
/// `sum 1/gamma_i <= 4/(1-4c) (2L/c + R) / gamma` for a greedy schedule.
pub fn verify_gap_theorem(
    schedule: &Schedule,
    profile: &GapProfile,
    l_promise: f64,
    r_promise: f64,
) -> GapTheoremReport {
    let gamma = profile.min_value();
    let c = schedule.c;
    let factor = 2.0 * l_promise / c + r_promise;
    let q_bound = ((profile.alpha / gamma).log2().floor() + 2.0) * factor;
    let sum_bound = 4.0 / (1.0 - 4.0 * c) * factor / gamma;
    let q = schedule.segment_count();
    let sum = schedule.inverse_gamma_sum();
    GapTheoremReport {
        segment_count: q,
        segment_count_bound: q_bound,
        inverse_gamma_sum: sum,
        inverse_gamma_sum_bound: sum_bound,
        gamma_min: gamma,
        pass: (q as f64) <= q_bound && sum <= sum_bound,
    }
}

/// The analytic gap of the search-problem interpolation on `size` elements:
/// `gamma(s) = sqrt(1 - 4 (K-1)/K s(1-s))`, `alpha = 1`. The matrix-level
/// companion lives in [`crate::models::grover_family`].
pub fn grover_gap(search_size: u64, grid_resolution: usize) -> Result<GapProfile> {
    if search_size < 2 {
        return Err(QacError::Range("search size must be at least 2".into()));
    }
    let frac = (search_size - 1) as f64 / search_size as f64;
    Ok(GapProfile::from_fn(
        move |s| (1.0 - 4.0 * frac * s * (1.0 - s)).max(0.0).sqrt(),
        1.0,
        grid_resolution,
    ))
}
