//! Coarse-grained master equation for the photon-number distribution.
//!
//! `dP/dt = A P` with `A = gain + loss`, rates in units of the photon decay
//! rate (`2κ = 1`). Injection events arrive at rate `N`; each one moves the
//! field from `n` to `n + 1` or `n + 2` with the kernel probabilities. The
//! thermal reservoir contributes the usual birth-death rates.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gain::{build_kernel, EmissionKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    /// Two-level atoms injected in excited pairs (Dicke J = 1 ladder).
    DickePair,
    /// Single two-level atoms (Jaynes-Cummings micromaser).
    OneAtom,
    /// Single three-level atoms with one-photon detuning.
    TwoPhotonDetuned,
}

impl ModelVariant {
    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::DickePair => "dicke",
            ModelVariant::OneAtom => "one-atom",
            ModelVariant::TwoPhotonDetuned => "two-photon",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dicke" | "dicke-pair" => Ok(ModelVariant::DickePair),
            "one-atom" => Ok(ModelVariant::OneAtom),
            "two-photon" | "two-photon-detuned" => Ok(ModelVariant::TwoPhotonDetuned),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

/// Model variant plus physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    /// Injection events per photon lifetime (pairs for the Dicke model).
    pub pump: f64,
    pub nbar_th: f64,
    /// Dimensionless interaction time `g * tau`.
    pub gtau: f64,
    /// One-photon detuning in units of `g`.
    pub delta: f64,
}

impl ModelSpec {
    /// Spec with `gtau = D / sqrt(N)`.
    pub fn at_pump_parameter(
        variant: ModelVariant,
        pump: f64,
        nbar_th: f64,
        d: f64,
        delta: f64,
    ) -> Result<Self> {
        if !(pump > 0.0) {
            return Err(Error::Config(format!(
                "pump parameter D needs N > 0, got N = {pump}"
            )));
        }
        let spec = ModelSpec {
            variant,
            pump,
            nbar_th,
            gtau: d / pump.sqrt(),
            delta,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `D = sqrt(N) * g * tau`.
    pub fn pump_parameter(&self) -> f64 {
        self.pump.sqrt() * self.gtau
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {x}"
                )))
            }
        };
        check("N", self.pump)?;
        check("nbar", self.nbar_th)?;
        check("gtau", self.gtau)?;
        check("delta", self.delta)?;
        if self.delta != 0.0 && self.variant != ModelVariant::TwoPhotonDetuned {
            return Err(Error::Config(format!(
                "detuning only applies to the two-photon model (got delta = {} for {})",
                self.delta, self.variant
            )));
        }
        Ok(())
    }
}

/// Banded rate matrix over photon numbers `0..=n_max`.
///
/// Stored by diagonals: `sub2[j] = A[j+2][j]`, `sub1[j] = A[j+1][j]`,
/// `diag[j] = A[j][j]`, `sup1[j] = A[j][j+1]`. Entries that would fall
/// outside the box are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub sub2: Vec<f64>,
    pub sub1: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup1: Vec<f64>,
}

impl Generator {
    pub fn zeros(n_max: usize) -> Self {
        let len = n_max + 1;
        Generator {
            sub2: vec![0.0; len],
            sub1: vec![0.0; len],
            diag: vec![0.0; len],
            sup1: vec![0.0; len],
        }
    }

    pub fn n_max(&self) -> usize {
        self.diag.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        match row as isize - col as isize {
            2 => self.sub2[col],
            1 => self.sub1[col],
            0 => self.diag[col],
            -1 => self.sup1[row],
            _ => 0.0,
        }
    }

    /// `A p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(p, &mut out);
        out
    }

    pub fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        let n = self.dim();
        assert_eq!(p.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * p[i];
            if i >= 1 {
                acc += self.sub1[i - 1] * p[i - 1];
            }
            if i >= 2 {
                acc += self.sub2[i - 2] * p[i - 2];
            }
            if i + 1 < n {
                acc += self.sup1[i] * p[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        let mut s = self.diag[j] + self.sub1[j] + self.sub2[j];
        if j >= 1 {
            s += self.sup1[j - 1];
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        [&self.sub2, &self.sub1, &self.diag, &self.sup1]
            .iter()
            .flat_map(|d| d.iter())
            .fold(0.0, |m, &x| f64::max(m, x.abs()))
    }

    pub fn add_assign(&mut self, other: &Generator) {
        assert_eq!(self.dim(), other.dim());
        for (a, b) in [
            (&mut self.sub2, &other.sub2),
            (&mut self.sub1, &other.sub1),
            (&mut self.diag, &other.diag),
            (&mut self.sup1, &other.sup1),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

/// Gain part: `dP_n/dt = N [(p0(n) - 1) P_n + p1(n-1) P_{n-1} + p2(n-2) P_{n-2}]`.
///
/// Jumps out of the box are dropped, so the top two columns leak.
pub fn gain_rates(kernel: &EmissionKernel, pump: f64) -> Generator {
    let n_max = kernel.n_max();
    let mut g = Generator::zeros(n_max);
    for j in 0..=n_max {
        g.diag[j] = pump * (kernel.p0[j] - 1.0);
        if j < n_max {
            g.sub1[j] = pump * kernel.p1[j];
        }
        if j + 1 < n_max {
            g.sub2[j] = pump * kernel.p2[j];
        }
    }
    g
}

/// Thermal cavity damping: down `n -> n-1` at `(nbar+1) n`, up `n -> n+1`
/// at `nbar (n+1)`. The up-jump from `n_max` is dropped.
pub fn loss_rates(nbar_th: f64, n_max: usize) -> Generator {
    let mut g = Generator::zeros(n_max);
    for j in 0..=n_max {
        let n = j as f64;
        g.diag[j] = -(n + nbar_th + 2.0 * n * nbar_th);
        if j < n_max {
            g.sub1[j] = nbar_th * (n + 1.0);
            g.sup1[j] = (nbar_th + 1.0) * (n + 1.0);
        }
    }
    g
}

pub fn assemble(spec: &ModelSpec, n_max: usize) -> Result<Generator> {
    spec.validate()?;
    if n_max < 4 {
        return Err(Error::Config(format!("n_max must be >= 4, got {n_max}")));
    }
    let kernel = build_kernel(spec, n_max)?;
    let mut a = gain_rates(&kernel, spec.pump);
    a.add_assign(&loss_rates(spec.nbar_th, n_max));
    Ok(a)
}
