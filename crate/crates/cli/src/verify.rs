//! `micromaser verify`: kernel invariants and oracle cross-checks.
//!
//! Every check prints one line
//! `check=<name> status=<pass|fail> value=<x> limit=<y>`; a final
//! `summary` line counts them.

use std::f64::consts::PI;

use micromaser::gain::{kernel_closed_form, kernel_one_atom, kernel_unitary};
use micromaser::oracle::{
    mean_hitting_time, monte_carlo, ode_relax, one_atom_detailed_balance, RelaxSettings,
    TrajectoryConfig,
};
use micromaser::{
    assemble, moments, solve_adaptive, solve_truncated, AdaptiveSettings, ModelSpec, ModelVariant,
    PhotonDistribution, Result,
};

use crate::args::Suite;
use crate::output::float;

use ModelVariant::{DickePair, OneAtom, TwoPhotonDetuned};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
        }
    }

    /// NaN never passes.
    pub fn passed(&self) -> bool {
        self.value <= self.limit
    }

    pub fn line(&self) -> String {
        format!(
            "check={} status={} value={} limit={}",
            self.name,
            if self.passed() { "pass" } else { "fail" },
            float(self.value),
            float(self.limit)
        )
    }
}

pub fn run(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    if matches!(suite, Suite::Kernel | Suite::All) {
        checks.extend(kernel_suite());
    }
    if matches!(suite, Suite::Oracle | Suite::All) {
        checks.extend(oracle_suite()?);
    }
    if matches!(suite, Suite::Mc | Suite::All) {
        checks.extend(mc_suite(seed)?);
    }
    Ok(checks)
}

const DELTAS: [f64; 4] = [0.0, 100.0, 150.0, 300.0];
const K_MAX: usize = 200;

fn kernel_suite() -> Vec<Check> {
    let analytic_gtau = PI / 6f64.sqrt();
    let gtaus = [0.01, 0.1, 0.5, 1.0, analytic_gtau, 2.0, 3.7, 10.0, 40.0];
    let mut conservation: f64 = 0.0;
    let mut negativity: f64 = 0.0;
    let mut closed: f64 = 0.0;
    for &gtau in &gtaus {
        for k in 0..=K_MAX {
            let mut all = vec![kernel_one_atom(k, gtau)];
            all.extend(DELTAS.iter().map(|&d| kernel_unitary(k, gtau, d)));
            for e in &all {
                conservation = conservation.max((e.total() - 1.0).abs());
                negativity = negativity.max(-e.p0.min(e.p1).min(e.p2));
            }
            let a = kernel_closed_form(k, gtau);
            let b = &all[1];
            closed = closed
                .max((a.p0 - b.p0).abs())
                .max((a.p1 - b.p1).abs())
                .max((a.p2 - b.p2).abs());
        }
    }
    let e = kernel_unitary(0, analytic_gtau, 0.0);
    let analytic = (e.p0 - 1.0 / 9.0)
        .abs()
        .max(e.p1.abs())
        .max((e.p2 - 8.0 / 9.0).abs());

    let mut columns: f64 = 0.0;
    for (variant, pump, gtau, delta) in [
        (DickePair, 100.0, 2.5, 0.0),
        (OneAtom, 200.0, 1.7, 0.0),
        (TwoPhotonDetuned, 100.0, 3.0, 150.0),
    ] {
        let spec = ModelSpec {
            variant,
            pump,
            nbar_th: 0.1,
            gtau,
            delta,
        };
        let a = assemble(&spec, 300).expect("valid spec");
        for j in 0..=a.n_max() - 2 {
            columns = columns.max(a.column_sum(j).abs() / pump);
        }
    }

    vec![
        Check::new("kernel.conservation", conservation, 1e-12),
        Check::new("kernel.nonnegative", negativity, 1e-15),
        Check::new("kernel.closed_form_vs_propagation", closed, 1e-10),
        Check::new("kernel.analytic_point", analytic, 1e-12),
        Check::new("generator.column_sums", columns, 1e-12),
    ]
}

fn solved(spec: &ModelSpec) -> Result<(PhotonDistribution, micromaser::Moments)> {
    solve_adaptive(spec, &AdaptiveSettings::default())
}

fn oracle_suite() -> Result<Vec<Check>> {
    let mut balance: f64 = 0.0;
    for (d, nbar) in [
        (1.0, 0.1),
        (10.0, 0.1),
        (25.0, 0.1),
        (50.0, 0.1),
        (400.0, 0.1),
        (30.0, 1.0),
    ] {
        let spec = ModelSpec::at_pump_parameter(OneAtom, 200.0, nbar, d, 0.0)?;
        let (p, m) = solved(&spec)?;
        let exact = one_atom_detailed_balance(&spec, p.n_max())?;
        let me = moments(&exact);
        for (x, y) in p.probabilities().iter().zip(exact.probabilities()) {
            if *y > 1e-14 {
                balance = balance.max((x - y).abs() / y);
            }
        }
        balance = balance
            .max((m.mean_n - me.mean_n).abs() / me.mean_n)
            .max((m.v - me.v).abs() / me.v);
    }

    let mut relax: f64 = 0.0;
    for spec in [
        ModelSpec::at_pump_parameter(DickePair, 100.0, 0.1, 25.0, 0.0)?,
        ModelSpec::at_pump_parameter(DickePair, 100.0, 0.1, 400.0, 0.0)?,
        ModelSpec::at_pump_parameter(OneAtom, 200.0, 0.1, 25.0, 0.0)?,
        ModelSpec::at_pump_parameter(OneAtom, 200.0, 0.1, 50.0, 0.0)?,
        ModelSpec::at_pump_parameter(TwoPhotonDetuned, 100.0, 0.1, 30.0, 150.0)?,
        ModelSpec::at_pump_parameter(DickePair, 10.0, 0.5, 3.0, 0.0)?,
    ] {
        let (p, _) = solved(&spec)?;
        let a = assemble(&spec, p.n_max())?;
        let linear = solve_truncated(&a)?.distribution;
        let start = PhotonDistribution::thermal(spec.nbar_th, p.n_max());
        let r = ode_relax(&a, &start, &RelaxSettings::default())?;
        relax = relax.max(r.distribution.total_variation(&linear));
    }

    let mut thermal: f64 = 0.0;
    for variant in [DickePair, OneAtom, TwoPhotonDetuned] {
        let spec = ModelSpec {
            variant,
            pump: 0.0,
            nbar_th: 0.1,
            gtau: 1.0,
            delta: 0.0,
        };
        let (p, m) = solved(&spec)?;
        thermal = thermal
            .max(p.total_variation(&PhotonDistribution::thermal(0.1, p.n_max())))
            .max((m.mean_n - 0.1).abs())
            .max((m.v - 1.1f64.sqrt()).abs());
    }

    Ok(vec![
        Check::new("oracle.detailed_balance", balance, 1e-8),
        Check::new("oracle.ode_relaxation", relax, 1e-6),
        Check::new("oracle.thermal_limit", thermal, 1e-10),
    ])
}

/// Measured window after burn-in, in photon lifetimes.
const MC_WINDOW: f64 = 50_000.0;
const MC_BATCH: f64 = 500.0;

/// Fast-mixing points; each gets seed `base + index`.
fn mc_specs() -> Result<Vec<ModelSpec>> {
    Ok(vec![
        ModelSpec::at_pump_parameter(DickePair, 100.0, 0.1, 100.0, 0.0)?,
        ModelSpec::at_pump_parameter(OneAtom, 20.0, 0.1, 3.0, 0.0)?,
        ModelSpec::at_pump_parameter(OneAtom, 200.0, 0.1, 400.0, 0.0)?,
        ModelSpec::at_pump_parameter(TwoPhotonDetuned, 100.0, 0.1, 30.0, 150.0)?,
    ])
}

fn mc_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (i, spec) in mc_specs()?.into_iter().enumerate() {
        let (p, m) = solved(&spec)?;
        let a = assemble(&spec, p.n_max())?;
        // Burn in for many mean hitting times of the bulk from vacuum.
        let sd = m.v * m.mean_n.sqrt();
        let bulk = (m.mean_n - sd).ceil() as usize..=(m.mean_n + sd).floor() as usize;
        let burn_in = (20.0 * mean_hitting_time(&a, 0, bulk)?).max(50.0);
        let est = monte_carlo(&TrajectoryConfig {
            spec,
            seed: seed.wrapping_add(i as u64),
            t_end: burn_in + MC_WINDOW,
            burn_in,
            sample_stride: MC_BATCH,
        })?;
        let tag = format!("mc.{}.D{}", spec.variant, spec.pump_parameter());
        checks.push(Check::new(
            format!("{tag}.mean_n_sigma"),
            (est.mean_n - m.mean_n).abs() / est.mean_n_stderr,
            3.0,
        ));
        checks.push(Check::new(
            format!("{tag}.v_sigma"),
            (est.v - m.v).abs() / est.v_stderr,
            3.0,
        ));
    }
    Ok(checks)
}
