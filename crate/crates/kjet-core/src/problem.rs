//! Problem files: flat `key = value` text (TOML grammar) with quoted
//! expression strings, describing a Lagrangian or an explicit semispray, the
//! sampling domain, test charts, the seed, and tolerance overrides.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::context::Context;
use crate::error::{Error, Result};
use crate::lagrange::LagrangianSpec;
use crate::parse::{parse_expr, split_top_level};
use crate::phase::ChartMap;
use crate::sample::{sample_points, SampleBox, DEFAULT_MARGIN};
use crate::semispray::KSemispray;

/// Tolerances used by the verification suite; every field can be overridden
/// from the problem file.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Euler homogeneity residual.
    pub euler: f64,
    /// Chart-covariance residuals (transformation laws).
    pub covariance: f64,
    /// Frame duality pairing residual.
    pub pairing: f64,
    /// Cross-residual of trajectories against k-path systems.
    pub kpath_residual: f64,
    /// Maximum state gap for coinciding k-paths.
    pub coincide_gap: f64,
    /// Minimum state gap certifying divergence of the non-spray control.
    pub divergence_gap: f64,
    /// Numeric gap tolerance for sequence constancy.
    pub sequence: f64,
    /// Slit-bundle margin.
    pub margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            euler: 1e-9,
            covariance: 1e-8,
            pairing: 1e-10,
            kpath_residual: 1e-5,
            coincide_gap: 1e-8,
            divergence_gap: 1e-3,
            sequence: 1e-9,
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    n: usize,
    k: usize,
    lagrangian: Option<String>,
    #[serde(default)]
    finsler: bool,
    semispray: Option<String>,
    #[serde(default)]
    charts: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    domain: BTreeMap<String, [f64; 2]>,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    expect: BTreeMap<String, String>,
}

fn default_seed() -> u64 {
    42
}

/// A parsed and validated problem file.
#[derive(Debug, Clone)]
pub struct ProblemSetup {
    pub ctx: Context,
    pub lagrangian: Option<LagrangianSpec>,
    /// Explicit semispray coefficients, when the file bypasses the
    /// Lagrangian.
    pub explicit_semispray: Option<KSemispray>,
    pub charts: Vec<(String, ChartMap)>,
    pub domain: SampleBox,
    pub seed: u64,
    pub tol: Tolerances,
    pub expect: BTreeMap<String, String>,
}

impl ProblemSetup {
    pub fn from_str(text: &str) -> Result<ProblemSetup> {
        let raw: RawProblem =
            toml::from_str(text).map_err(|e| Error::Invalid(format!("problem file: {e}")))?;
        let ctx = Context::new(raw.n, raw.k)?;

        let mut domain = SampleBox::default_for(ctx);
        for (key, [lo, hi]) in &raw.domain {
            if key == "x" {
                domain.x = (*lo, *hi);
            } else if let Some(level) = key.strip_prefix('y').and_then(|s| s.parse::<usize>().ok())
            {
                if level == 0 || level > ctx.k {
                    return Err(Error::InvalidDomain(format!(
                        "domain key '{key}' outside levels 1..={}",
                        ctx.k
                    )));
                }
                domain.y[level - 1] = (*lo, *hi);
            } else {
                return Err(Error::InvalidDomain(format!(
                    "unknown domain key '{key}' (use x, y1..y{})",
                    ctx.k
                )));
            }
        }
        domain.validate(ctx)?;

        let lagrangian = raw
            .lagrangian
            .as_deref()
            .map(|text| {
                let l = parse_expr(text, ctx)?;
                LagrangianSpec::new(ctx, l, raw.finsler, domain.clone())
            })
            .transpose()?;

        let explicit_semispray = raw
            .semispray
            .as_deref()
            .map(|text| {
                let g = split_top_level(text)
                    .iter()
                    .map(|part| parse_expr(part, ctx))
                    .collect::<Result<Vec<_>>>()?;
                KSemispray::new(ctx, g)
            })
            .transpose()?;

        if lagrangian.is_none() && explicit_semispray.is_none() {
            return Err(Error::Invalid(
                "problem file needs a lagrangian or a semispray".to_string(),
            ));
        }

        let mut charts = Vec::new();
        for (name, exprs) in &raw.charts {
            let targets = exprs
                .iter()
                .map(|t| parse_expr(t, ctx))
                .collect::<Result<Vec<_>>>()?;
            charts.push((name.clone(), ChartMap::new(ctx, targets, domain.clone())?));
        }

        Ok(ProblemSetup {
            ctx,
            lagrangian,
            explicit_semispray,
            charts,
            domain,
            seed: raw.seed,
            tol: raw.tolerances,
            expect: raw.expect,
        })
    }

    /// Read a problem file from disk; also returns the raw bytes for
    /// digesting into reports.
    pub fn from_path(path: &Path) -> Result<(ProblemSetup, Vec<u8>)> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Ok((ProblemSetup::from_str(text)?, bytes))
    }

    /// The file's semispray: the explicit one when given, the canonical
    /// semispray of the Lagrangian otherwise.
    pub fn semispray(&self) -> Result<KSemispray> {
        if let Some(s) = &self.explicit_semispray {
            return Ok(s.clone());
        }
        let spec = self
            .lagrangian
            .as_ref()
            .expect("constructor guarantees one source");
        crate::lagrange::canonical_semispray(spec)
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<crate::phase::PhasePoint>> {
        sample_points(&self.domain, self.ctx, count, seed, self.tol.margin)
    }

    /// Expected-fail annotation for a check name, when present in the file.
    pub fn expects_fail(&self, check: &str) -> bool {
        self.expect.get(check).is_some_and(|v| v == "fail")
    }
}
