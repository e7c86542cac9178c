//! CSV rendering and run manifests.
//!
//! Floats are written with 17 significant digits so they round-trip
//! exactly; lines end in `\n` regardless of platform.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use micromaser::{Moments, PhotonDistribution, RowStatus, SweepRow};

pub const SWEEP_HEADER: &str = "D,mean_n,v,n_max,residual,status";
pub const PN_HEADER: &str = "n,P";
/// Rows of a distribution stop at the last `P_n` above this.
pub const PN_FLOOR: f64 = 1e-15;

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let status = match r.status {
            RowStatus::Ok => "ok",
            RowStatus::Failed(_) => "failed",
        };
        writeln!(
            out,
            "{},{},{},{},{},{status}",
            float(r.d),
            float(r.mean_n),
            float(r.v),
            r.n_max_used,
            float(r.residual)
        )
        .unwrap();
    }
    out
}

/// `# key=value,...` comment line, then `n,P` rows.
pub fn pn_csv(header: &[(&str, String)], p: &PhotonDistribution) -> String {
    let mut out = String::from("# ");
    let fields: Vec<String> = header.iter().map(|(k, v)| format!("{k}={v}")).collect();
    out.push_str(&fields.join(","));
    out.push('\n');
    out.push_str(PN_HEADER);
    out.push('\n');
    let probs = p.probabilities();
    let last = probs.iter().rposition(|&x| x > PN_FLOOR).unwrap_or(0);
    for (n, x) in probs[..=last].iter().enumerate() {
        writeln!(out, "{n},{}", float(*x)).unwrap();
    }
    out
}

pub fn moments_fields(m: &Moments) -> Vec<(&'static str, String)> {
    vec![
        ("mean_n", float(m.mean_n)),
        ("v", float(m.v)),
        ("n_max", m.n_max_used.to_string()),
        ("residual", float(m.residual)),
        ("tail_mass", float(m.tail_mass)),
    ]
}

/// Exact inputs behind one output file, written next to it.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub parameters: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub artifacts: Vec<PathBuf>,
}

impl RunManifest {
    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.txt");
        PathBuf::from(name)
    }

    /// Everything except the final `timestamp` line is a pure function of
    /// the inputs.
    pub fn render(&self, timestamp: &str) -> String {
        let mut out = String::new();
        let quoted: Vec<String> = self.command_line.iter().map(|a| quote(a)).collect();
        writeln!(out, "command: {}", quoted.join(" ")).unwrap();
        writeln!(out, "version: micromaser {}", env!("CARGO_PKG_VERSION")).unwrap();
        for (k, v) in &self.parameters {
            writeln!(out, "{k}: {v}").unwrap();
        }
        match self.seed {
            Some(s) => writeln!(out, "seed: {s}").unwrap(),
            None => writeln!(out, "seed: none").unwrap(),
        }
        for a in &self.artifacts {
            writeln!(out, "artifact: {}", a.display()).unwrap();
        }
        writeln!(out, "timestamp: {timestamp}").unwrap();
        out
    }
}

fn quote(arg: &str) -> String {
    if !arg.is_empty()
        && arg
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.,/=:+".contains(c))
    {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}
