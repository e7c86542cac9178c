//! Independent references for the steady-state solver.
//!
//! * [`one_atom_detailed_balance`]: the one-atom master equation is a pure
//!   birth-death chain, so its stationary state has product form.
//! * [`ode_relax`]: integrates `dP/dt = A P` until it stops moving.
//! * [`integrated_autocorrelation`]: exact correlation time of an
//!   observable, used to size Monte Carlo batches.
//! * [`mean_hitting_time`]: expected time to reach a set of photon numbers,
//!   used to size the Monte Carlo burn-in.
//! * [`monte_carlo`]: simulates the pump and reservoir as a classical jump
//!   process on the photon number and time-averages the occupation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gain::{emission, Emission};
use crate::generator::{Generator, ModelSpec, ModelVariant};
use crate::steady::{moments, PhotonDistribution};

/// Product-form stationary distribution of the one-atom maser.
///
/// Balancing the flux across each edge `n-1 <-> n` gives
/// `P_n / P_{n-1} = [nbar n + N sin^2(gtau sqrt(n))] / [(nbar + 1) n]`,
/// accumulated in log space.
pub fn one_atom_detailed_balance(spec: &ModelSpec, n_max: usize) -> Result<PhotonDistribution> {
    spec.validate()?;
    if spec.variant != ModelVariant::OneAtom {
        return Err(Error::Config(format!(
            "detailed balance only holds for the one-atom model, not {}",
            spec.variant
        )));
    }
    let mut log_p = Vec::with_capacity(n_max + 1);
    log_p.push(0.0);
    for n in 1..=n_max {
        let nf = n as f64;
        let s = (spec.gtau * nf.sqrt()).sin();
        let up = spec.nbar_th * nf + spec.pump * s * s;
        let down = (spec.nbar_th + 1.0) * nf;
        log_p.push(log_p[n - 1] + (up / down).ln());
    }
    let peak = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    PhotonDistribution::normalized(log_p.iter().map(|l| (l - peak).exp()).collect())
}

/// Time stepper used by [`ode_relax`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepper {
    /// Explicit Euler with `dt = 0.9 / max|A_jj|`. No linear algebra at all,
    /// but the number of steps scales with the slowest relaxation time.
    ExplicitEuler,
    /// Backward Euler, `(I - dt A) P' = P`, with `dt` multiplied by `growth`
    /// after every step up to `dt_max`. Unconditionally stable and
    /// positivity preserving; once `dt` is large each step behaves like an
    /// inverse-iteration sweep.
    BackwardEuler { dt0: f64, growth: f64, dt_max: f64 },
}

impl Default for Stepper {
    fn default() -> Self {
        Stepper::BackwardEuler {
            dt0: 0.1,
            growth: 2.0,
            dt_max: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxSettings {
    /// Stop once `||A P||_inf < tol` for the normalized iterate.
    pub tol: f64,
    pub max_steps: usize,
    /// Steps between convergence checks (explicit stepper only).
    pub check_every: usize,
    pub stepper: Stepper,
}

impl Default for RelaxSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_steps: 20_000_000,
            check_every: 200,
            stepper: Stepper::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxed {
    pub distribution: PhotonDistribution,
    pub steps: usize,
    pub time: f64,
    pub residual: f64,
}

/// Integrates `dP/dt = A P` from `start` until the normalized iterate is
/// stationary to `settings.tol`.
///
/// Mass leaking through the truncated top columns is restored by
/// renormalizing at every convergence check.
pub fn ode_relax(
    a: &Generator,
    start: &PhotonDistribution,
    settings: &RelaxSettings,
) -> Result<Relaxed> {
    if start.n_max() != a.n_max() {
        return Err(Error::Config(format!(
            "start distribution has n_max {} but generator has {}",
            start.n_max(),
            a.n_max()
        )));
    }
    let residual = stationarity(a, start.probabilities());
    if residual < settings.tol {
        return Ok(Relaxed {
            distribution: start.clone(),
            steps: 0,
            time: 0.0,
            residual,
        });
    }
    match settings.stepper {
        Stepper::ExplicitEuler => relax_explicit(a, start, settings),
        Stepper::BackwardEuler {
            dt0,
            growth,
            dt_max,
        } => {
            if !(dt0 > 0.0 && growth >= 1.0 && dt_max >= dt0) {
                return Err(Error::Config(format!(
                    "bad backward Euler schedule: dt0 {dt0}, growth {growth}, dt_max {dt_max}"
                )));
            }
            relax_implicit(a, start, settings, dt0, growth, dt_max)
        }
    }
}

fn stationarity(a: &Generator, p: &[f64]) -> f64 {
    a.apply(p).iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

fn renormalize(p: &mut [f64]) {
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
}

fn non_convergence(settings: &RelaxSettings, residual: f64) -> Error {
    Error::NonConvergence(format!(
        "relaxation stalled at residual {residual:e} (target {}) after {} steps",
        settings.tol, settings.max_steps
    ))
}

/// With `dt = 0.9 / max|A_jj|` the matrix `I + dt A` has non-negative
/// entries and column sums at most one, so the scheme is stable for any box.
fn relax_explicit(
    a: &Generator,
    start: &PhotonDistribution,
    settings: &RelaxSettings,
) -> Result<Relaxed> {
    let rate = a.diag.iter().fold(0.0, |m, d| f64::max(m, d.abs()));
    let mut p = start.probabilities().to_vec();
    let mut ap = vec![0.0; p.len()];
    if rate == 0.0 {
        return Err(non_convergence(settings, stationarity(a, &p)));
    }
    let dt = 0.9 / rate;
    let check_every = settings.check_every.max(1);
    let mut steps = 0;
    let mut residual = f64::INFINITY;
    while steps < settings.max_steps {
        for _ in 0..check_every {
            a.apply_into(&p, &mut ap);
            p.iter_mut().zip(&ap).for_each(|(x, d)| *x += dt * d);
        }
        steps += check_every;
        renormalize(&mut p);
        residual = stationarity(a, &p);
        if residual < settings.tol {
            return Ok(Relaxed {
                distribution: PhotonDistribution::normalized(p)?,
                steps,
                time: steps as f64 * dt,
                residual,
            });
        }
    }
    Err(non_convergence(settings, residual))
}

fn relax_implicit(
    a: &Generator,
    start: &PhotonDistribution,
    settings: &RelaxSettings,
    dt0: f64,
    growth: f64,
    dt_max: f64,
) -> Result<Relaxed> {
    let mut p = start.probabilities().to_vec();
    let mut dt = dt0;
    let mut time = 0.0;
    let mut lu = BandLu::shifted(a, dt)?;
    let mut residual = f64::INFINITY;
    for steps in 1..=settings.max_steps {
        lu.solve_in_place(&mut p);
        time += dt;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonConvergence(format!(
                "backward Euler produced non-finite values at dt = {dt:e}"
            )));
        }
        // The inverse of an M-matrix is non-negative; anything below zero
        // here is rounding.
        p.iter_mut().for_each(|x| *x = x.max(0.0));
        renormalize(&mut p);
        residual = stationarity(a, &p);
        if residual < settings.tol {
            return Ok(Relaxed {
                distribution: PhotonDistribution::normalized(p)?,
                steps,
                time,
                residual,
            });
        }
        let next = (dt * growth).min(dt_max);
        if next != dt {
            dt = next;
            lu = BandLu::shifted(a, dt)?;
        }
    }
    Err(non_convergence(settings, residual))
}

const KL: usize = 2;
const KU: usize = 1;
/// Row width of the band storage: `KL` below, `KU + KL` above (pivoting
/// fill-in) and the diagonal.
const WIDTH: usize = 2 * KL + KU + 1;

/// LU factors of `I - dt A` with row partial pivoting, kept in band form.
///
/// Row `i` stores columns `i - KL ..= i + KU + KL`.
struct BandLu {
    rows: Vec<[f64; WIDTH]>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn shifted(a: &Generator, dt: f64) -> Result<Self> {
        let n = a.dim();
        let mut rows = vec![[0.0; WIDTH]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            for j in i.saturating_sub(KL)..=(i + KU).min(n - 1) {
                let identity = if i == j { 1.0 } else { 0.0 };
                row[j + KL - i] = identity - dt * a.get(i, j);
            }
        }
        let mut lu = BandLu {
            rows,
            pivots: vec![0; n],
        };
        lu.factor()?;
        Ok(lu)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j + KL - i]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.rows[i][j + KL - i]
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.rows.len();
        for k in 0..n {
            let last_row = (k + KL).min(n - 1);
            let last_col = (k + KU + KL).min(n - 1);
            let p = (k..=last_row)
                .max_by(|&x, &y| self.at(x, k).abs().total_cmp(&self.at(y, k).abs()))
                .expect("non-empty pivot range");
            self.pivots[k] = p;
            if self.at(p, k) == 0.0 {
                return Err(Error::SolverFailure {
                    n_max: n - 1,
                    reason: format!("zero pivot in column {k} of I - dt A"),
                });
            }
            if p != k {
                for j in k..=last_col {
                    let t = self.at(k, j);
                    *self.at_mut(k, j) = self.at(p, j);
                    *self.at_mut(p, j) = t;
                }
            }
            let pivot = self.at(k, k);
            for i in k + 1..=last_row {
                let l = self.at(i, k) / pivot;
                *self.at_mut(i, k) = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let u = self.at(k, j);
                        *self.at_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(())
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.rows.len();
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            for i in k + 1..=(k + KL).min(n - 1) {
                b[i] -= self.at(i, k) * b[k];
            }
        }
        for k in (0..n).rev() {
            let last = (k + KU + KL).min(n - 1);
            let s: f64 = (k + 1..=last).map(|j| self.at(k, j) * b[j]).sum();
            b[k] = (b[k] - s) / self.at(k, k);
        }
    }
}

/// Integrated autocorrelation time `int_0^inf C(t) dt / C(0)` of the
/// observable `f(n)` in the stationary state `p` of `a`.
///
/// Solves `A y = -(f - <f>) p` on the zero-sum subspace with a dense LU, so
/// it is meant for boxes of a few thousand states at most. The variance of a
/// time average over a window `T` is asymptotically `2 tau C(0) / T`.
pub fn integrated_autocorrelation(
    a: &Generator,
    p: &PhotonDistribution,
    f: impl Fn(usize) -> f64,
) -> Result<f64> {
    let d = a.dim();
    if p.n_max() != a.n_max() {
        return Err(Error::Config(format!(
            "distribution has n_max {} but generator has {}",
            p.n_max(),
            a.n_max()
        )));
    }
    let pi = p.probabilities();
    let mean: f64 = (0..d).map(|n| f(n) * pi[n]).sum();
    let g: Vec<f64> = (0..d).map(|n| f(n) - mean).collect();
    let c0: f64 = (0..d).map(|n| g[n] * g[n] * pi[n]).sum();
    if c0 == 0.0 {
        return Ok(0.0);
    }
    // The first row is redundant (columns of A sum to zero away from the
    // top); it is replaced by the normalization sum(y) = 0.
    let m = DMatrix::from_fn(d, d, |i, j| if i == 0 { 1.0 } else { a.get(i, j) });
    let rhs = DVector::from_fn(d, |i, _| if i == 0 { 0.0 } else { -g[i] * pi[i] });
    let y = m.lu().solve(&rhs).ok_or_else(|| Error::SolverFailure {
        n_max: a.n_max(),
        reason: "singular bordered generator".into(),
    })?;
    Ok((0..d).map(|n| g[n] * y[n]).sum::<f64>() / c0)
}

/// Expected time for the photon number to first enter `target`, starting
/// from `from` (zero if `from` is already inside).
///
/// Solves the backward equation `sum_m A[m][n] h(m) = -1` over the states
/// outside `target` with a dense LU. Mass leaking through the top of the
/// box is treated as never arriving, so the box must contain the target.
pub fn mean_hitting_time(
    a: &Generator,
    from: usize,
    target: std::ops::RangeInclusive<usize>,
) -> Result<f64> {
    if from > a.n_max() || target.is_empty() || *target.end() > a.n_max() {
        return Err(Error::Config(format!(
            "start {from} and target {target:?} must lie inside 0..={}",
            a.n_max()
        )));
    }
    if target.contains(&from) {
        return Ok(0.0);
    }
    let outside: Vec<usize> = (0..a.dim()).filter(|n| !target.contains(n)).collect();
    let slot = |n: usize| outside.binary_search(&n).ok();
    let k = outside.len();
    let mut m = DMatrix::zeros(k, k);
    for (i, &n) in outside.iter().enumerate() {
        for to in n.saturating_sub(1)..=(n + 2).min(a.n_max()) {
            if let Some(j) = slot(to) {
                m[(i, j)] += a.get(to, n);
            }
        }
    }
    let h = m
        .lu()
        .solve(&DVector::from_element(k, -1.0))
        .ok_or_else(|| Error::SolverFailure {
            n_max: a.n_max(),
            reason: format!("target {target:?} is unreachable"),
        })?;
    let t = h[slot(from).expect("start lies outside the target")];
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::SolverFailure {
            n_max: a.n_max(),
            reason: format!("target {target:?} is unreachable"),
        });
    }
    Ok(t)
}

/// Parameters of one Monte Carlo trajectory (times in photon lifetimes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub spec: ModelSpec,
    pub seed: u64,
    pub t_end: f64,
    pub burn_in: f64,
    /// Length of one batch for the batch-means error estimate.
    pub sample_stride: f64,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(self.burn_in > 0.0 && self.t_end > self.burn_in) {
            return Err(Error::Config(format!(
                "need t_end > burn_in > 0 (t_end = {}, burn_in = {})",
                self.t_end, self.burn_in
            )));
        }
        if !(self.sample_stride > 0.0) || self.batches() < 2 {
            return Err(Error::Config(format!(
                "sample_stride {} leaves fewer than two batches",
                self.sample_stride
            )));
        }
        Ok(())
    }

    fn batches(&self) -> usize {
        ((self.t_end - self.burn_in) / self.sample_stride).floor() as usize
    }
}

/// Time-averaged photon statistics from one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub distribution: PhotonDistribution,
    /// Batch-means standard errors; `v_stderr` is propagated from the batch
    /// first and second moments.
    pub p_stderr: Vec<f64>,
    pub mean_n: f64,
    pub mean_n_stderr: f64,
    pub v: f64,
    pub v_stderr: f64,
    pub events: u64,
}

/// Kernel rows computed on demand as the photon number climbs.
struct KernelCache {
    spec: ModelSpec,
    rows: Vec<Emission>,
}

impl KernelCache {
    fn at(&mut self, n: usize) -> Emission {
        while self.rows.len() <= n {
            let k = self.rows.len();
            self.rows.push(emission(&self.spec, k));
        }
        self.rows[n]
    }
}

/// Occupation-time histograms, one per batch.
struct Batches {
    start: f64,
    width: f64,
    hist: Vec<Vec<f64>>,
}

impl Batches {
    /// Adds the time the field spent at `n` during `[from, to)`.
    fn record(&mut self, n: usize, from: f64, to: f64) {
        let end = self.start + self.width * self.hist.len() as f64;
        let mut from = from.max(self.start);
        let to = to.min(end);
        while from < to {
            let b = (((from - self.start) / self.width) as usize).min(self.hist.len() - 1);
            let b_end = (self.start + self.width * (b + 1) as f64).min(to);
            let h = &mut self.hist[b];
            if h.len() <= n {
                h.resize(n + 1, 0.0);
            }
            h[n] += b_end - from;
            if b_end <= from {
                break;
            }
            from = b_end;
        }
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let b = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / b;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (mean, (var / b).sqrt())
}

/// Kick-model simulation: pump events at rate `N` deposit 0, 1 or 2
/// photons drawn from the kernel at the current photon number; the
/// reservoir adds photons at `nbar (n+1)` and removes them at
/// `(nbar+1) n`. The field is diagonal in photon number at every
/// injection, so this jump process has the same stationary law as the
/// coarse-grained master equation.
pub fn monte_carlo(config: &TrajectoryConfig) -> Result<McEstimate> {
    config.validate()?;
    let spec = config.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut kernel = KernelCache {
        spec,
        rows: Vec::new(),
    };
    let n_batches = config.batches();
    let mut batches = Batches {
        start: config.burn_in,
        width: config.sample_stride,
        hist: vec![Vec::new(); n_batches],
    };
    let t_stop = config.burn_in + config.sample_stride * n_batches as f64;

    let mut t = 0.0;
    let mut n = 0usize;
    let mut events = 0u64;
    while t < t_stop {
        let nf = n as f64;
        let down = (spec.nbar_th + 1.0) * nf;
        let up = spec.nbar_th * (nf + 1.0);
        let total = spec.pump + down + up;
        let wait = if total > 0.0 {
            -(1.0 - rng.random::<f64>()).ln() / total
        } else {
            f64::INFINITY
        };
        let t_next = (t + wait).min(t_stop);
        batches.record(n, t, t_next);
        t = t_next;
        if t >= t_stop {
            break;
        }
        events += 1;
        let pick = rng.random::<f64>() * total;
        if pick < spec.pump {
            let e = kernel.at(n);
            let u = rng.random::<f64>();
            if u < e.p1 {
                n += 1;
            } else if u < e.p1 + e.p2 {
                n += 2;
            }
        } else if pick < spec.pump + down {
            n -= 1;
        } else {
            n += 1;
        }
    }

    let width = batches.hist.iter().map(Vec::len).max().unwrap_or(1).max(1);
    let batch_dists: Vec<Vec<f64>> = batches
        .hist
        .into_iter()
        .map(|mut h| {
            h.resize(width, 0.0);
            let total: f64 = h.iter().sum();
            h.iter_mut().for_each(|x| *x /= total);
            h
        })
        .collect();

    let mut pooled = vec![0.0; width];
    let mut p_stderr = vec![0.0; width];
    for k in 0..width {
        let column: Vec<f64> = batch_dists.iter().map(|h| h[k]).collect();
        let (m, se) = mean_and_stderr(&column);
        pooled[k] = m;
        p_stderr[k] = se;
    }
    let distribution = PhotonDistribution::normalized(pooled)?;
    let overall = moments(&distribution);

    // Batch first and second moments; v is a smooth function of both, so
    // its error follows from the linearized per-batch contributions.
    let raw: Vec<(f64, f64)> = batch_dists
        .iter()
        .map(|h| {
            h.iter().enumerate().fold((0.0, 0.0), |(m1, m2), (k, x)| {
                let k = k as f64;
                (m1 + k * x, m2 + k * k * x)
            })
        })
        .collect();
    let (_, mean_n_stderr) = mean_and_stderr(&raw.iter().map(|x| x.0).collect::<Vec<_>>());
    let v_stderr = if overall.v > 0.0 {
        let m1 = overall.mean_n;
        let m2 = raw.iter().map(|x| x.1).sum::<f64>() / raw.len() as f64;
        let var = m2 - m1 * m1;
        let d_m1 = -(2.0 * m1 * m1 + var) / (m1 * m1) / (2.0 * overall.v);
        let d_m2 = 1.0 / m1 / (2.0 * overall.v);
        let linear: Vec<f64> = raw
            .iter()
            .map(|(a, b)| d_m1 * (a - m1) + d_m2 * (b - m2))
            .collect();
        mean_and_stderr(&linear).1
    } else {
        0.0
    };

    Ok(McEstimate {
        distribution,
        p_stderr,
        mean_n: overall.mean_n,
        mean_n_stderr,
        v: overall.v,
        v_stderr,
        events,
    })
}
