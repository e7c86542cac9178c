//! Per-transit emission kernels.
//!
//! An injected, fully excited atomic system meeting `k` photons leaves the
//! cavity having deposited 0, 1 or 2 photons with probabilities
//! `(p0, p1, p2)`. For the three-level models these come from unitary
//! evolution inside sector `k + 2`; the one-atom model uses the
//! Jaynes-Cummings transit probability.

use crate::error::{Error, Result};
use crate::generator::{ModelSpec, ModelVariant};
use crate::sector::{
    build_sector, eigensystem_general, eigensystem_resonant, EigenSystem, SectorIndex,
};

/// Probabilities of depositing 0, 1 or 2 photons in one transit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

impl Emission {
    pub const IDENTITY: Emission = Emission {
        p0: 1.0,
        p1: 0.0,
        p2: 0.0,
    };

    pub fn total(&self) -> f64 {
        self.p0 + self.p1 + self.p2
    }

    /// Expected number of photons deposited per transit.
    pub fn mean_deposit(&self) -> f64 {
        self.p1 + 2.0 * self.p2
    }
}

/// Emission probabilities by propagating `|1, k>` with
/// `U = sum_j exp(-i lambda_j gtau) v_j v_j^T` in sector `k + 2`.
pub fn kernel_unitary(k: usize, gtau: f64, delta: f64) -> Emission {
    if gtau == 0.0 {
        return Emission::IDENTITY;
    }
    let h = build_sector(SectorIndex::for_photons(k), delta)
        .expect("sector k + 2 is always valid; delta validated by caller");
    let eig = eigensystem_general(&h);
    propagate_top(&eig, gtau)
}

fn propagate_top(eig: &EigenSystem, gtau: f64) -> Emission {
    let v = &eig.vectors;
    let mut probs = [0.0; 3];
    for (i, p) in probs.iter_mut().enumerate() {
        let (mut re, mut im) = (0.0, 0.0);
        for j in 0..3 {
            let w = v[(i, j)] * v[(0, j)];
            let phase = eig.values[j] * gtau;
            re += w * phase.cos();
            im -= w * phase.sin();
        }
        *p = re * re + im * im;
    }
    Emission {
        p0: probs[0],
        p1: probs[1],
        p2: probs[2],
    }
}

/// Resonant kernel from the closed-form gain coefficients.
///
/// `theta1(n)`, `theta2(n)` and `theta3(n)` are the coefficients of
/// `P_n`, `P_{n-1}` and `P_{n-2}` in the post-transit distribution, so
/// `p0(k) = theta1(k)`, `p1(k) = theta2(k + 1)`, `p2(k) = theta3(k + 2)`.
pub fn kernel_closed_form(k: usize, gtau: f64) -> Emission {
    Emission {
        p0: theta1(k, gtau),
        p1: theta2(k + 1, gtau),
        p2: theta3(k + 2, gtau),
    }
}

/// Dressed-state weights `(x1, x2, x3)` and `lambda_+` of sector `m`.
fn dressed(m: usize) -> (f64, f64, f64, f64) {
    let e = eigensystem_resonant(SectorIndex::new(m).expect("m >= 2"));
    let v = &e.vectors;
    (v[(0, 0)], v[(0, 1)], v[(0, 2)], e.values[1])
}

/// Probability of no emission for `n` photons (sector `n + 2`).
///
/// The printed `(n+2)/(4n+3)` factors are replaced by `(n+2)/(2n+3)`
/// (= x1^2 of sector n + 2); only then does `theta1(tau = 0) = 1` hold.
fn theta1(n: usize, gtau: f64) -> f64 {
    let (x1, x2, x3, lp) = dressed(n + 2);
    let n = n as f64;
    let lm = -lp;
    let a = (n + 2.0) / (2.0 * n + 3.0);
    let b = (n + 1.0) / (4.0 * n + 6.0);
    a * x1 * x1 + b * (x2 * x2 + x3 * x3)
        - 2.0 * ((n + 2.0) * (n + 1.0)).sqrt() / ((2.0 * n + 3.0) * (4.0 * n + 6.0)).sqrt()
            * (x1 * x2 * (lp * gtau).cos() + x1 * x3 * (lm * gtau).cos())
        + 2.0 * b * x2 * x3 * ((lp - lm) * gtau).cos()
}

/// Probability of reaching `n` photons from `n - 1` (sector `n + 1`).
fn theta2(n: usize, gtau: f64) -> f64 {
    debug_assert!(n >= 1);
    let (_, x2, x3, lp) = dressed(n + 1);
    0.5 * (x2 * x2 + x3 * x3) - x2 * x3 * (2.0 * lp * gtau).cos()
}

/// Probability of reaching `n` photons from `n - 2` (sector `n`).
fn theta3(n: usize, gtau: f64) -> f64 {
    debug_assert!(n >= 2);
    let (x1, x2, x3, lp) = dressed(n);
    let n = n as f64;
    let lm = -lp;
    (n - 1.0) / (2.0 * n - 1.0) * x1 * x1
        + n / (4.0 * n - 2.0) * (x2 * x2 + x3 * x3)
        + (2.0 * n * (n - 1.0)).sqrt() / (2.0 * n - 1.0)
            * (x1 * x2 * (lp * gtau).cos() + x1 * x3 * (lm * gtau).cos())
        + 2.0 * n / (4.0 * n - 2.0) * x2 * x3 * ((lp - lm) * gtau).cos()
}

/// Jaynes-Cummings transit: `p1 = sin^2(gtau sqrt(k + 1))`.
pub fn kernel_one_atom(k: usize, gtau: f64) -> Emission {
    let s = (gtau * ((k + 1) as f64).sqrt()).sin();
    let p1 = s * s;
    Emission {
        p0: 1.0 - p1,
        p1,
        p2: 0.0,
    }
}

/// Emission probabilities of `spec`'s model at photon number `k`.
pub fn emission(spec: &ModelSpec, k: usize) -> Emission {
    match spec.variant {
        ModelVariant::OneAtom => kernel_one_atom(k, spec.gtau),
        ModelVariant::DickePair | ModelVariant::TwoPhotonDetuned => {
            kernel_unitary(k, spec.gtau, spec.delta)
        }
    }
}

/// Kernel tabulated over initial photon numbers `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionKernel {
    pub variant: ModelVariant,
    pub gtau: f64,
    pub delta: f64,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl EmissionKernel {
    pub fn n_max(&self) -> usize {
        self.p0.len() - 1
    }

    pub fn at(&self, k: usize) -> Emission {
        Emission {
            p0: self.p0[k],
            p1: self.p1[k],
            p2: self.p2[k],
        }
    }
}

pub fn build_kernel(spec: &ModelSpec, n_max: usize) -> Result<EmissionKernel> {
    spec.validate()?;
    if n_max < 1 {
        return Err(Error::Config("kernel needs n_max >= 1".into()));
    }
    let len = n_max + 1;
    let mut kernel = EmissionKernel {
        variant: spec.variant,
        gtau: spec.gtau,
        delta: spec.delta,
        p0: Vec::with_capacity(len),
        p1: Vec::with_capacity(len),
        p2: Vec::with_capacity(len),
    };
    for k in 0..len {
        let e = emission(spec, k);
        kernel.p0.push(e.p0);
        kernel.p1.push(e.p1);
        kernel.p2.push(e.p2);
    }
    Ok(kernel)
}
