//! Experiment configuration: a TOML file per study, validated into a
//! fully-populated [`ExperimentConfig`].
//!
//! Validation is collecting: every violated field is reported, not just
//! the first one found.

use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64 as C64;
use serde::Deserialize;
use stokeslip::DomainSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Resolvent,
    Sweep,
    Korn,
    Evolve,
    Maxreg,
    Convergence,
    Interp,
}

impl Study {
    pub fn parse(name: &str) -> Option<Study> {
        Some(match name {
            "resolvent" => Study::Resolvent,
            "sweep" => Study::Sweep,
            "korn" => Study::Korn,
            "evolve" => Study::Evolve,
            "maxreg" => Study::Maxreg,
            "convergence" => Study::Convergence,
            "interp" => Study::Interp,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Study::Resolvent => "resolvent",
            Study::Sweep => "sweep",
            Study::Korn => "korn",
            Study::Evolve => "evolve",
            Study::Maxreg => "maxreg",
            Study::Convergence => "convergence",
            Study::Interp => "interp",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw deserialized form; everything optional so validation can speak to
/// each field individually.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub study: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub domain: Option<DomainSection>,
    pub params: Option<ParamsSection>,
    pub mesh: Option<MeshSection>,
    pub lambda: Option<LambdaSection>,
    pub time: Option<TimeSection>,
    pub ensemble: Option<EnsembleSection>,
    pub convergence: Option<ConvergenceSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: Option<String>,
    pub radius: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub r0: Option<f64>,
    pub cos: Option<Vec<f64>>,
    pub sin: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub q: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub h: Option<f64>,
    pub ladder: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSection {
    pub theta: Option<f64>,
    pub omega: Option<f64>,
    pub per_ray: Option<usize>,
    pub probes: Option<usize>,
    /// Explicit grid as `[re, im]` pairs; overrides the standard grid.
    pub points: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: Option<f64>,
    pub n_steps: Option<usize>,
    /// Step-count ladder for dt refinement.
    pub ladder: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    /// Which solver the ladder refines: `"resolvent"` (in h) or
    /// `"evolve"` (in dt).
    pub target: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvTarget {
    Resolvent,
    Evolve,
}

#[derive(Debug, Clone)]
pub struct LambdaGrid {
    pub theta: f64,
    pub omega: f64,
    pub per_ray: usize,
    pub probes: usize,
    pub points: Option<Vec<C64>>,
}

#[derive(Debug, Clone)]
pub struct TimePlan {
    pub t_end: f64,
    pub n_steps: usize,
    pub ladder: Vec<usize>,
}

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub study: Study,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub domain: DomainSpec,
    pub alpha: f64,
    pub beta: f64,
    pub q_list: Vec<f64>,
    pub h: f64,
    pub ladder: Vec<f64>,
    pub lambda: LambdaGrid,
    pub time: TimePlan,
    pub ensemble: usize,
    pub conv_target: ConvTarget,
}

pub fn parse(text: &str) -> Result<RawConfig, String> {
    toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
}

struct Check {
    violations: Vec<String>,
}

impl Check {
    fn fail(&mut self, field: &str, msg: String) {
        self.violations.push(format!("{field}: {msg}"));
    }

    fn finite_pos(&mut self, field: &str, v: f64) -> bool {
        if v.is_finite() && v > 0.0 {
            true
        } else {
            self.fail(field, format!("must be a finite positive real, got {v}"));
            false
        }
    }
}

fn domain_from(section: Option<&DomainSection>, ck: &mut Check) -> Option<DomainSpec> {
    let Some(d) = section else {
        ck.fail("domain", "section is required".into());
        return None;
    };
    let Some(kind) = d.kind.as_deref() else {
        ck.fail("domain.kind", "must be one of disk, ellipse, fourier".into());
        return None;
    };
    let built = match kind {
        "disk" => DomainSpec::disk(d.radius.unwrap_or(1.0)),
        "ellipse" => DomainSpec::ellipse(d.a.unwrap_or(1.0), d.b.unwrap_or(1.0)),
        "fourier" => DomainSpec::fourier(
            d.r0.unwrap_or(1.0),
            d.cos.clone().unwrap_or_default(),
            d.sin.clone().unwrap_or_default(),
        ),
        other => {
            ck.fail(
                "domain.kind",
                format!("unknown kind {other:?}, expected disk, ellipse or fourier"),
            );
            return None;
        }
    };
    match built {
        Ok(spec) => Some(spec),
        Err(e) => {
            ck.fail("domain", e.to_string());
            None
        }
    }
}

/// Validates `raw` for the study selected on the command line. All
/// violations are returned together.
pub fn validate(raw: &RawConfig, subcommand: Study) -> Result<ExperimentConfig, Vec<String>> {
    let mut ck = Check {
        violations: Vec::new(),
    };

    let study = match raw.study.as_deref() {
        None => {
            ck.fail("study", "field is required".into());
            subcommand
        }
        Some(name) => match Study::parse(name) {
            Some(s) if s == subcommand => s,
            Some(s) => {
                ck.fail(
                    "study",
                    format!("config says {s} but the {subcommand} subcommand was invoked"),
                );
                s
            }
            None => {
                ck.fail("study", format!("unknown study {name:?}"));
                subcommand
            }
        },
    };

    let domain = domain_from(raw.domain.as_ref(), &mut ck);
    if matches!(study, Study::Resolvent)
        || (matches!(study, Study::Convergence)
            && conv_target_of(raw) != Some(ConvTarget::Evolve))
    {
        if let Some(spec) = &domain {
            if !spec.id().starts_with("disk") {
                ck.fail(
                    "domain.kind",
                    format!("the {study} study uses a rigid-rotation oracle and needs a disk"),
                );
            }
        }
    }

    let params = raw.params.as_ref();
    let alpha = params.and_then(|p| p.alpha).unwrap_or(1.0);
    let beta = params.and_then(|p| p.beta).unwrap_or(1.0);
    if !alpha.is_finite() {
        ck.fail("params.alpha", format!("must be a finite real, got {alpha}"));
    }
    ck.finite_pos("params.beta", beta);
    let q_list = params
        .and_then(|p| p.q.clone())
        .unwrap_or_else(|| vec![2.0]);
    if q_list.is_empty() {
        ck.fail("params.q", "list must not be empty".into());
    }
    for &q in &q_list {
        if !(q.is_finite() && q > 1.0) {
            ck.fail("params.q", format!("every exponent must be > 1, got {q}"));
        }
    }

    let mesh = raw.mesh.as_ref();
    let h = match mesh.and_then(|m| m.h) {
        Some(h) => {
            ck.finite_pos("mesh.h", h);
            h
        }
        None => {
            ck.fail("mesh.h", "field is required".into());
            0.3
        }
    };
    let ladder = mesh.and_then(|m| m.ladder.clone()).unwrap_or_default();
    for &lh in &ladder {
        ck.finite_pos("mesh.ladder", lh);
    }

    let lam = raw.lambda.as_ref();
    let theta = lam.and_then(|l| l.theta).unwrap_or(0.55 * std::f64::consts::PI);
    if !(theta > 0.0 && theta < std::f64::consts::PI) {
        ck.fail("lambda.theta", format!("must lie in (0, pi), got {theta}"));
    }
    let omega = lam.and_then(|l| l.omega).unwrap_or(1.0);
    if !omega.is_finite() {
        ck.fail("lambda.omega", format!("must be a finite real, got {omega}"));
    }
    let per_ray = lam.and_then(|l| l.per_ray).unwrap_or(12);
    if per_ray < 2 {
        ck.fail("lambda.per_ray", format!("must be at least 2, got {per_ray}"));
    }
    let probes = lam.and_then(|l| l.probes).unwrap_or(2);
    if probes < 1 {
        ck.fail("lambda.probes", "must be at least 1".into());
    }
    let points: Option<Vec<C64>> = lam.and_then(|l| l.points.as_ref()).map(|pts| {
        pts.iter().map(|&[re, im]| C64::new(re, im)).collect()
    });
    if let Some(pts) = &points {
        if pts.is_empty() {
            ck.fail("lambda.points", "grid must not be empty".into());
        }
        for p in pts {
            if !(p.re.is_finite() && p.im.is_finite()) {
                ck.fail("lambda.points", format!("grid point {p} is not finite"));
            }
        }
    }
    let time = raw.time.as_ref();
    let t_end = time.and_then(|t| t.t_end).unwrap_or(1.0);
    ck.finite_pos("time.t_end", t_end);
    let n_steps = time.and_then(|t| t.n_steps).unwrap_or(32);
    if n_steps < 2 {
        ck.fail("time.n_steps", format!("must be at least 2, got {n_steps}"));
    }
    let step_ladder = time.and_then(|t| t.ladder.clone()).unwrap_or_default();
    for &n in &step_ladder {
        if n < 2 {
            ck.fail("time.ladder", format!("step counts must be at least 2, got {n}"));
        }
    }

    let ensemble = raw.ensemble.as_ref().and_then(|e| e.size).unwrap_or(8);
    if matches!(study, Study::Maxreg) && ensemble < 1 {
        ck.fail("ensemble.size", "must be at least 1".into());
    }

    let conv_target = match conv_target_of(raw) {
        Some(t) => t,
        None => {
            if matches!(study, Study::Convergence) {
                ck.fail(
                    "convergence.target",
                    format!(
                        "unknown target {:?}, expected resolvent or evolve",
                        raw.convergence
                            .as_ref()
                            .and_then(|c| c.target.as_deref())
                            .unwrap_or("")
                    ),
                );
            }
            ConvTarget::Resolvent
        }
    };
    if matches!(study, Study::Convergence) {
        match conv_target {
            ConvTarget::Resolvent => {
                if ladder.len() < 3 {
                    ck.fail(
                        "mesh.ladder",
                        format!(
                            "refinement study needs at least 3 levels, got {}",
                            ladder.len()
                        ),
                    );
                }
            }
            ConvTarget::Evolve => {
                if step_ladder.len() < 3 {
                    ck.fail(
                        "time.ladder",
                        format!(
                            "refinement study needs at least 3 levels, got {}",
                            step_ladder.len()
                        ),
                    );
                }
            }
        }
    }

    if !ck.violations.is_empty() {
        return Err(ck.violations);
    }
    Ok(ExperimentConfig {
        study,
        seed: raw.seed.unwrap_or(0),
        out: raw.out.clone().map(PathBuf::from),
        domain: domain.expect("domain checked above"),
        alpha,
        beta,
        q_list,
        h,
        ladder,
        lambda: LambdaGrid {
            theta,
            omega,
            per_ray,
            probes,
            points,
        },
        time: TimePlan {
            t_end,
            n_steps,
            ladder: step_ladder,
        },
        ensemble,
        conv_target,
    })
}

fn conv_target_of(raw: &RawConfig) -> Option<ConvTarget> {
    match raw
        .convergence
        .as_ref()
        .and_then(|c| c.target.as_deref())
        .unwrap_or("resolvent")
    {
        "resolvent" => Some(ConvTarget::Resolvent),
        "evolve" => Some(ConvTarget::Evolve),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let raw = parse(
            "study = \"sweep\"\n[domain]\nkind = \"disk\"\n[mesh]\nh = 0.3\n",
        )
        .unwrap();
        let cfg = validate(&raw, Study::Sweep).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.lambda.per_ray, 12);
        assert!(cfg.lambda.points.is_none());
    }

    #[test]
    fn all_violations_are_collected() {
        let raw = parse(
            "study = \"nope\"\nseed = 1\n[domain]\nkind = \"disk\"\nradius = -2.0\n\
             [params]\nbeta = -1.0\nq = [0.5]\n[lambda]\npoints = []\n\
             [time]\nn_steps = 1\n",
        )
        .unwrap();
        let err = validate(&raw, Study::Sweep).unwrap_err();
        let text = err.join("\n");
        for needle in [
            "study",
            "domain",
            "params.beta",
            "params.q",
            "mesh.h",
            "lambda.points",
            "time.n_steps",
        ] {
            assert!(text.contains(needle), "missing {needle} in:\n{text}");
        }
    }

    #[test]
    fn study_subcommand_mismatch_is_reported() {
        let raw = parse(
            "study = \"korn\"\n[domain]\nkind = \"disk\"\n[mesh]\nh = 0.3\n",
        )
        .unwrap();
        let err = validate(&raw, Study::Sweep).unwrap_err();
        assert!(err.iter().any(|v| v.contains("subcommand")));
    }

    #[test]
    fn convergence_requires_a_real_ladder() {
        let raw = parse(
            "study = \"convergence\"\n[domain]\nkind = \"disk\"\n\
             [mesh]\nh = 0.3\nladder = [0.3]\n",
        )
        .unwrap();
        let err = validate(&raw, Study::Convergence).unwrap_err();
        assert!(err.iter().any(|v| v.contains("mesh.ladder")));

        let raw = parse(
            "study = \"convergence\"\n[domain]\nkind = \"disk\"\n\
             [mesh]\nh = 0.3\nladder = [0.3, 0.2, 0.15]\n",
        )
        .unwrap();
        assert!(validate(&raw, Study::Convergence).is_ok());
    }
}
