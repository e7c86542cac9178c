//! Steady-state photon distribution and its moments.
//!
//! The stationary distribution solves `A P = 0` with `sum P = 1`. The last
//! (truncation-corrupted) equation of the banded system is replaced by the
//! normalization row, the bordered system is eliminated column by column,
//! and `n_max` is grown until the moments settle and the tail is empty.

use std::thread;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generator::{assemble, Generator, ModelSpec, ModelVariant};

/// Largest box solved densely when banded elimination meets a zero pivot.
const DENSE_FALLBACK_LIMIT: usize = 2048;
/// Tail window used for the truncation check: `n > 0.9 n_max`.
const TAIL_FRACTION: f64 = 0.9;
pub const TAIL_MASS_LIMIT: f64 = 1e-12;
/// Most negative raw entry accepted before clamping.
pub const NEGATIVITY_LIMIT: f64 = -1e-9;
/// Residual bound relative to the largest generator entry.
pub const RESIDUAL_LIMIT: f64 = 1e-10;

/// Normalized photon-number distribution over `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution {
    p: Vec<f64>,
}

impl PhotonDistribution {
    /// Wraps raw probabilities, rejecting negative or unnormalized input.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Config("empty distribution".into()));
        }
        if p.iter().any(|x| !x.is_finite() || *x < -1e-12) {
            return Err(Error::Config(
                "distribution has negative or non-finite entries".into(),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!("distribution sums to {total}")));
        }
        Ok(Self {
            p: p.into_iter().map(|x| x.max(0.0)).collect(),
        })
    }

    /// Clamps negatives to zero and rescales to unit mass.
    pub fn normalized(mut p: Vec<f64>) -> Result<Self> {
        p.iter_mut().for_each(|x| *x = x.max(0.0));
        let total: f64 = p.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Config(format!("cannot normalize mass {total}")));
        }
        p.iter_mut().for_each(|x| *x /= total);
        Ok(Self { p })
    }

    /// Bose-Einstein distribution with mean `nbar`, truncated and renormalized.
    pub fn thermal(nbar: f64, n_max: usize) -> Self {
        let ratio = nbar / (1.0 + nbar);
        let p = std::iter::successors(Some(1.0), |x| Some(x * ratio))
            .take(n_max + 1)
            .collect();
        Self::normalized(p).expect("geometric series has positive mass")
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.p
    }

    pub fn n_max(&self) -> usize {
        self.p.len() - 1
    }

    /// Probability of `n` photons (zero beyond the box).
    pub fn get(&self, n: usize) -> f64 {
        self.p.get(n).copied().unwrap_or(0.0)
    }

    /// Mass above `0.9 n_max`.
    pub fn tail_mass(&self) -> f64 {
        let start = (TAIL_FRACTION * self.n_max() as f64).floor() as usize + 1;
        self.p.iter().skip(start).sum()
    }

    /// Total variation distance, padding the shorter support with zeros.
    pub fn total_variation(&self, other: &PhotonDistribution) -> f64 {
        let len = self.p.len().max(other.p.len());
        0.5 * (0..len)
            .map(|n| (self.get(n) - other.get(n)).abs())
            .sum::<f64>()
    }
}

/// Mean photon number, normalized variance and solve diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_n: f64,
    /// `sqrt(Var(n) / <n>)`; 1 for Poissonian light, defined as 0 in vacuum.
    pub v: f64,
    pub n_max_used: usize,
    pub residual: f64,
    pub tail_mass: f64,
}

pub fn moments(p: &PhotonDistribution) -> Moments {
    let probs = p.probabilities();
    let mean_n: f64 = probs.iter().enumerate().map(|(n, x)| n as f64 * x).sum();
    let var: f64 = probs
        .iter()
        .enumerate()
        .map(|(n, x)| {
            let d = n as f64 - mean_n;
            d * d * x
        })
        .sum();
    let v = if mean_n > 0.0 {
        (var / mean_n).sqrt()
    } else {
        0.0
    };
    Moments {
        mean_n,
        v,
        n_max_used: p.n_max(),
        residual: 0.0,
        tail_mass: p.tail_mass(),
    }
}

/// Result of one truncated solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub distribution: PhotonDistribution,
    /// `||A P||_inf` for the original generator.
    pub residual: f64,
    /// Most negative entry before clamping (0 if none).
    pub min_raw: f64,
}

/// Solves `A P = 0`, `sum P = 1` on the box of `a`.
pub fn solve_truncated(a: &Generator) -> Result<SteadyState> {
    let n_max = a.n_max();
    let raw = match eliminate_bordered(a) {
        Some(x) => x,
        None if a.dim() <= DENSE_FALLBACK_LIMIT => solve_dense(a)?,
        None => {
            return Err(Error::SolverFailure {
                n_max,
                reason: "vanishing pivot in banded elimination".into(),
            })
        }
    };
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::SolverFailure {
            n_max,
            reason: "non-finite solution".into(),
        });
    }
    let min_raw = raw.iter().cloned().fold(0.0, f64::min);
    let distribution = PhotonDistribution::normalized(raw).map_err(|e| Error::SolverFailure {
        n_max,
        reason: e.to_string(),
    })?;
    let residual = a
        .apply(distribution.probabilities())
        .iter()
        .fold(0.0, |m, x| f64::max(m, x.abs()));
    Ok(SteadyState {
        distribution,
        residual,
        min_raw,
    })
}

/// Elimination of the bordered system in Grassmann-Taksar-Heyman form.
///
/// Only rows `0..n_max` of `A` carry information; the normalization row
/// fixes the scale. Eliminating states upward from the vacuum keeps each
/// Schur complement a generator, so its pivot equals minus the sum of the
/// (non-negative) entries below it plus any truncation leak. Forming the
/// pivot that way avoids the cancellation of `A_jj - l * A_{j-1,j}` and
/// keeps every unknown positive. Returns `None` on a vanishing pivot (a
/// closed leading block).
fn eliminate_bordered(a: &Generator) -> Option<Vec<f64>> {
    let n = a.dim();
    let last = n - 1;
    // Schur-complement entry in row j + 1 of column j; the entries in row
    // j + 2 and the superdiagonal are never modified.
    let mut below = a.sub1.clone();
    let mut pivots = vec![0.0; last];
    let tiny = 1e-300_f64.max(f64::EPSILON * 1e-2 * a.max_abs());

    for j in 0..last {
        // Only the truncated top columns lose probability.
        let leak = if j + 2 >= n {
            (-a.column_sum(j)).max(0.0)
        } else {
            0.0
        };
        let out = below[j] + a.sub2[j] + leak;
        if out <= tiny {
            return None;
        }
        pivots[j] = -out;
        if j + 1 < last {
            // Row j + 2 inherits the mass that row j sent back down.
            below[j + 1] += a.sub2[j] * a.sup1[j] / out;
        }
    }

    // x_last = 1, then x_j = A_{j,j+1} x_{j+1} / |pivot_j|, rescaling
    // whenever the values approach overflow.
    const RESCALE_AT: f64 = 1e200;
    let mut x = vec![0.0; n];
    x[last] = 1.0;
    for j in (0..last).rev() {
        x[j] = a.sup1[j] * x[j + 1] / -pivots[j];
        if x[j] > RESCALE_AT {
            x[j..].iter_mut().for_each(|y| *y /= RESCALE_AT);
        }
    }
    Some(x)
}

fn solve_dense(a: &Generator) -> Result<Vec<f64>> {
    let n = a.dim();
    let mut m = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
    m.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    m.lu()
        .solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or(Error::SolverFailure {
            n_max: a.n_max(),
            reason: "singular normalized generator".into(),
        })
}

/// Knobs of the adaptive truncation loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSettings {
    /// Relative agreement required between successive `(mean_n, v)`.
    pub tol: f64,
    /// Starting box; `None` picks `max(64, ceil(4 N))`.
    pub n_max0: Option<usize>,
    pub n_max_cap: usize,
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            n_max0: None,
            n_max_cap: 20_000,
        }
    }
}

impl AdaptiveSettings {
    pub fn initial_n_max(&self, spec: &ModelSpec) -> usize {
        self.n_max0
            .unwrap_or_else(|| 64.max((4.0 * spec.pump).ceil() as usize))
            .max(4)
    }
}

fn agrees(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Solves on growing boxes (`n_max <- ceil(1.5 n_max)`) until successive
/// moments agree to `tol` and the tail above `0.9 n_max` is negligible.
pub fn solve_adaptive(
    spec: &ModelSpec,
    settings: &AdaptiveSettings,
) -> Result<(PhotonDistribution, Moments)> {
    adaptive(spec, settings).map(|c| (c.distribution, c.moments))
}

struct Converged {
    distribution: PhotonDistribution,
    moments: Moments,
    /// Box of the solve that the final one was compared against.
    previous_n_max: usize,
}

fn adaptive(spec: &ModelSpec, settings: &AdaptiveSettings) -> Result<Converged> {
    spec.validate()?;
    if !(settings.tol > 0.0) {
        return Err(Error::Config(format!(
            "tol must be positive, got {}",
            settings.tol
        )));
    }
    let cap = settings.n_max_cap;
    let mut n_max = settings.initial_n_max(spec);
    if n_max > cap {
        return Err(Error::NonConvergence(format!(
            "initial n_max {n_max} exceeds cap {cap}"
        )));
    }
    let mut previous: Option<Moments> = None;
    let mut previous_n_max = n_max;
    let mut last_failure = None;

    loop {
        let a = assemble(spec, n_max)?;
        match solve_truncated(&a) {
            Ok(state) => {
                let mut m = moments(&state.distribution);
                m.residual = state.residual;
                let settled = previous.is_some_and(|p| {
                    agrees(p.mean_n, m.mean_n, settings.tol) && agrees(p.v, m.v, settings.tol)
                });
                let clean = m.tail_mass < TAIL_MASS_LIMIT
                    && state.min_raw >= NEGATIVITY_LIMIT
                    && state.residual < RESIDUAL_LIMIT * a.max_abs();
                if settled && clean {
                    return Ok(Converged {
                        distribution: state.distribution,
                        moments: m,
                        previous_n_max,
                    });
                }
                previous = Some(m);
                previous_n_max = n_max;
            }
            Err(e @ Error::SolverFailure { .. }) => {
                previous = None;
                last_failure = Some(e);
            }
            Err(e) => return Err(e),
        }
        if n_max >= cap {
            let detail = last_failure.map(|e| format!(": {e}")).unwrap_or_default();
            return Err(Error::NonConvergence(format!(
                "n_max reached cap {cap} without settling{detail}"
            )));
        }
        n_max = ((1.5 * n_max as f64).ceil() as usize).min(cap);
    }
}

/// Everything about a sweep except the pump parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepTemplate {
    pub variant: ModelVariant,
    pub pump: f64,
    pub nbar_th: f64,
    pub delta: f64,
}

impl SweepTemplate {
    pub fn at(&self, d: f64) -> Result<ModelSpec> {
        ModelSpec::at_pump_parameter(self.variant, self.pump, self.nbar_th, d, self.delta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

/// One point of a pump-parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub d: f64,
    pub mean_n: f64,
    pub v: f64,
    pub n_max_used: usize,
    pub residual: f64,
    pub status: RowStatus,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

/// Runs `solve_adaptive` for every `D` (ascending), each chunk of points
/// warm-starting its box from the previous point. With `threads > 1` the
/// grid is split into that many contiguous chunks; rows come back in grid
/// order.
pub fn sweep(
    template: &SweepTemplate,
    d_values: &[f64],
    settings: &AdaptiveSettings,
    threads: usize,
) -> Result<Vec<SweepRow>> {
    if d_values.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Config("D values must be sorted ascending".into()));
    }
    if d_values.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::Config(
            "D values must be finite and non-negative".into(),
        ));
    }
    template.at(0.0)?;

    let threads = threads.max(1).min(d_values.len().max(1));
    let chunk = d_values.len().div_ceil(threads).max(1);
    if threads == 1 {
        return Ok(sweep_chunk(template, d_values, settings));
    }
    let rows = thread::scope(|s| {
        let handles: Vec<_> = d_values
            .chunks(chunk)
            .map(|part| s.spawn(move || sweep_chunk(template, part, settings)))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    Ok(rows)
}

fn sweep_chunk(
    template: &SweepTemplate,
    d_values: &[f64],
    settings: &AdaptiveSettings,
) -> Vec<SweepRow> {
    let mut warm = settings.n_max0;
    d_values
        .iter()
        .map(|&d| {
            let local = AdaptiveSettings {
                n_max0: warm,
                ..*settings
            };
            let result = template.at(d).and_then(|spec| adaptive(&spec, &local));
            match result {
                Ok(c) => {
                    let m = c.moments;
                    // Restart from the box the last comparison began with, so
                    // a flat stretch of the sweep does not keep growing n_max.
                    let floor = settings.initial_n_max(&template.at(d).expect("validated"));
                    warm = Some(c.previous_n_max.max(floor));
                    SweepRow {
                        d,
                        mean_n: m.mean_n,
                        v: m.v,
                        n_max_used: m.n_max_used,
                        residual: m.residual,
                        status: RowStatus::Ok,
                    }
                }
                Err(e) => SweepRow {
                    d,
                    mean_n: f64::NAN,
                    v: f64::NAN,
                    n_max_used: 0,
                    residual: f64::NAN,
                    status: RowStatus::Failed(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dicke(d: f64) -> ModelSpec {
        ModelSpec::at_pump_parameter(ModelVariant::DickePair, 100.0, 0.1, d, 0.0).unwrap()
    }

    /// Dense reference: replace the last row by ones and solve with LU.
    fn dense_reference(a: &Generator) -> Vec<f64> {
        solve_dense(a).unwrap()
    }

    #[test]
    fn moments_of_number_state() {
        let mut p = vec![0.0; 10];
        p[5] = 1.0;
        let m = moments(&PhotonDistribution::new(p).unwrap());
        assert_eq!(m.mean_n, 5.0);
        assert_eq!(m.v, 0.0);
    }

    #[test]
    fn moments_of_two_point_distribution() {
        let m = moments(&PhotonDistribution::new(vec![0.5, 0.5]).unwrap());
        assert_abs_diff_eq!(m.mean_n, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.v, 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn moments_of_thermal_and_vacuum() {
        let m = moments(&PhotonDistribution::thermal(0.1, 200));
        assert_abs_diff_eq!(m.mean_n, 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(m.v, 1.1f64.sqrt(), epsilon = 1e-12);

        let m = moments(&PhotonDistribution::new(vec![1.0, 0.0, 0.0]).unwrap());
        assert_eq!((m.mean_n, m.v), (0.0, 0.0));
    }

    #[test]
    fn moments_of_poisson_is_one() {
        for mean in [0.3, 4.0, 37.5] {
            let n_max = 400;
            let mut p = vec![0.0; n_max + 1];
            let mut log_fact = 0.0;
            for (n, x) in p.iter_mut().enumerate() {
                if n > 0 {
                    log_fact += (n as f64).ln();
                }
                *x = (n as f64 * f64::ln(mean) - mean - log_fact).exp();
            }
            let m = moments(&PhotonDistribution::normalized(p).unwrap());
            assert_abs_diff_eq!(m.v, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(PhotonDistribution::new(vec![]).is_err());
        assert!(PhotonDistribution::new(vec![0.7, 0.7]).is_err());
        assert!(PhotonDistribution::new(vec![1.1, -0.1]).is_err());
        assert!(PhotonDistribution::normalized(vec![0.0, 0.0]).is_err());
        assert_eq!(
            PhotonDistribution::normalized(vec![2.0, -1e-13, 2.0])
                .unwrap()
                .probabilities(),
            &[0.5, 0.0, 0.5]
        );
    }

    #[test]
    fn thermal_limit_solve() {
        let spec = ModelSpec {
            variant: ModelVariant::OneAtom,
            pump: 0.0,
            nbar_th: 0.1,
            gtau: 1.0,
            delta: 0.0,
        };
        let s = solve_truncated(&assemble(&spec, 64).unwrap()).unwrap();
        let p = s.distribution.probabilities();
        assert_abs_diff_eq!(p[0], 1.0 / 1.1, epsilon = 1e-14);
        for n in 1..20 {
            assert_abs_diff_eq!(p[n] / p[n - 1], 1.0 / 11.0, epsilon = 1e-12);
        }
        assert!(
            s.distribution
                .total_variation(&PhotonDistribution::thermal(0.1, 64))
                < 1e-10
        );
    }

    #[test]
    fn banded_matches_dense_solve() {
        for (variant, pump, gtau, delta) in [
            (ModelVariant::DickePair, 100.0, 2.5, 0.0),
            (ModelVariant::TwoPhotonDetuned, 100.0, 0.9, 150.0),
            (ModelVariant::DickePair, 3.0, 40.0, 0.0),
        ] {
            let spec = ModelSpec {
                variant,
                pump,
                nbar_th: 0.1,
                gtau,
                delta,
            };
            let a = assemble(&spec, 300).unwrap();
            let banded = solve_truncated(&a).unwrap();
            let dense = PhotonDistribution::normalized(dense_reference(&a)).unwrap();
            assert!(banded.distribution.total_variation(&dense) < 1e-10);
            assert!(banded.residual < RESIDUAL_LIMIT * a.max_abs());
        }
    }

    #[test]
    fn banded_beats_dense_on_ill_conditioned_chain() {
        // Partial-pivoting LU drifts by ~1e-8 here; the subtraction-free
        // elimination stays at rounding level against the product form.
        let spec = ModelSpec {
            variant: ModelVariant::OneAtom,
            pump: 200.0,
            nbar_th: 0.1,
            gtau: 1.2,
            delta: 0.0,
        };
        let a = assemble(&spec, 300).unwrap();
        let banded = solve_truncated(&a).unwrap().distribution;
        let exact = crate::oracle::one_atom_detailed_balance(&spec, 300).unwrap();
        for n in 0..=300 {
            let e = exact.get(n);
            if e > 1e-14 {
                assert!((banded.get(n) - e).abs() <= 1e-12 * e, "n = {n}");
            }
        }
    }

    #[test]
    fn absorbing_vacuum_falls_back_to_dense() {
        // nbar = 0 and no gain: the vacuum column is all zeros.
        let spec = ModelSpec {
            variant: ModelVariant::DickePair,
            pump: 0.0,
            nbar_th: 0.0,
            gtau: 0.0,
            delta: 0.0,
        };
        let a = assemble(&spec, 10).unwrap();
        assert!(eliminate_bordered(&a).is_none());
        let s = solve_truncated(&a).unwrap();
        assert_abs_diff_eq!(s.distribution.get(0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dicke_reference_value_at_d25() {
        let a = assemble(&dicke(25.0), 600).unwrap();
        let s = solve_truncated(&a).unwrap();
        let m = moments(&s.distribution);
        assert!((m.v - 1.27596).abs() <= 0.02 * 1.27596, "v = {}", m.v);
    }

    #[test]
    fn adaptive_thermal_at_zero_time() {
        let (p, m) = solve_adaptive(&dicke(0.0), &AdaptiveSettings::default()).unwrap();
        assert_abs_diff_eq!(m.mean_n, 0.1, epsilon = 1e-12);
        assert_eq!(m.n_max_used, 600);
        assert!(p.tail_mass() < TAIL_MASS_LIMIT);
    }

    #[test]
    fn adaptive_grows_small_box() {
        let settings = AdaptiveSettings {
            n_max0: Some(8),
            ..Default::default()
        };
        let (_, m) = solve_adaptive(&dicke(25.0), &settings).unwrap();
        assert!(m.n_max_used > 100);
        assert!(m.tail_mass < TAIL_MASS_LIMIT);
        assert!((m.v - 1.27596).abs() <= 0.02 * 1.27596);
    }

    #[test]
    fn adaptive_idempotent_when_doubled() {
        let settings = AdaptiveSettings::default();
        for spec in [dicke(25.0), dicke(400.0)] {
            let (_, m) = solve_adaptive(&spec, &settings).unwrap();
            let a = assemble(&spec, 2 * m.n_max_used).unwrap();
            let m2 = moments(&solve_truncated(&a).unwrap().distribution);
            assert!(agrees(m.mean_n, m2.mean_n, settings.tol));
            assert!(agrees(m.v, m2.v, settings.tol));
        }
    }

    #[test]
    fn adaptive_respects_cap() {
        let settings = AdaptiveSettings {
            n_max0: Some(8),
            n_max_cap: 20,
            ..Default::default()
        };
        let err = solve_adaptive(&dicke(25.0), &settings).unwrap_err();
        assert!(matches!(err, Error::NonConvergence(_)));
        let bad = AdaptiveSettings {
            tol: 0.0,
            ..Default::default()
        };
        assert!(solve_adaptive(&dicke(1.0), &bad).is_err());
    }

    #[test]
    fn sweep_rows_and_ordering() {
        let template = SweepTemplate {
            variant: ModelVariant::DickePair,
            pump: 100.0,
            nbar_th: 0.1,
            delta: 0.0,
        };
        let grid: Vec<f64> = (0..=12).map(|i| i as f64 * 0.5).collect();
        let settings = AdaptiveSettings::default();
        let serial = sweep(&template, &grid, &settings, 1).unwrap();
        let parallel = sweep(&template, &grid, &settings, 4).unwrap();
        assert_eq!(serial.len(), grid.len());
        assert!(serial.iter().all(SweepRow::is_ok));
        assert_abs_diff_eq!(serial[0].mean_n, 0.1, epsilon = 1e-12);
        for (a, b) in serial.iter().zip(&parallel) {
            assert_eq!(a.d, b.d);
            assert!(agrees(a.mean_n, b.mean_n, 1e-7));
            assert!(agrees(a.v, b.v, 1e-7));
        }
        assert!(sweep(&template, &[1.0, 0.5], &settings, 1).is_err());
    }

    #[test]
    fn sweep_records_failures_per_point() {
        let template = SweepTemplate {
            variant: ModelVariant::DickePair,
            pump: 100.0,
            nbar_th: 0.1,
            delta: 0.0,
        };
        let settings = AdaptiveSettings {
            n_max0: Some(8),
            n_max_cap: 40,
            ..Default::default()
        };
        let rows = sweep(&template, &[0.0, 25.0], &settings, 1).unwrap();
        assert!(rows[0].is_ok());
        assert!(matches!(rows[1].status, RowStatus::Failed(_)));
        assert!(rows[1].mean_n.is_nan());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn solve_is_a_distribution_with_small_residual(
            variant in prop::sample::select(vec![
                ModelVariant::DickePair, ModelVariant::OneAtom, ModelVariant::TwoPhotonDetuned,
            ]),
            pump in 1.0f64..150.0,
            nbar in 0.01f64..1.0,
            gtau in 0.0f64..6.0,
        ) {
            let delta = if variant == ModelVariant::TwoPhotonDetuned { 100.0 } else { 0.0 };
            let spec = ModelSpec { variant, pump, nbar_th: nbar, gtau, delta };
            let a = assemble(&spec, 500).unwrap();
            let s = solve_truncated(&a).unwrap();
            let total: f64 = s.distribution.probabilities().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(s.min_raw >= NEGATIVITY_LIMIT);
            prop_assert!(s.residual < RESIDUAL_LIMIT * a.max_abs());
        }
    }
}
