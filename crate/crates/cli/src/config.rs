//! Config documents (TOML) for every subcommand, and conversions into
//! library types.

use std::path::Path;

use serde::Deserialize;

use cracklab::capacity::{CapacityQuery, CapacitySet, Container};
use cracklab::gamma::{annulus_boundary_data, balanced_junction_data, ExperimentConfig};
use cracklab::geometry::{BoundarySpec, CrackSet, Domain, ExampleId, Rect, Segment};
use cracklab::primal::{Affine, BoundaryData};

use crate::CliError;

/// A parsed document plus its source, for line-anchored messages.
pub struct Document<T> {
    pub path: String,
    pub source: String,
    pub value: T,
}

impl<T> Document<T> {
    /// Config error pointing at the first line assigning `key`.
    pub fn error_at(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        match line_of(&self.source, key) {
            Some(line) => CliError::Config(format!("{}:{}: {msg}", self.path, line)),
            None => CliError::Config(format!("{}: {msg}", self.path)),
        }
    }
}

/// 1-based line of the first `key = ...` assignment.
pub fn line_of(source: &str, key: &str) -> Option<usize> {
    source.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    }).map(|i| i + 1)
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Document<T>, CliError> {
    let name = path.display().to_string();
    let source = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
    let value = toml::from_str(&source).map_err(|e| {
        let msg = e.message().to_string();
        // Unknown keys are reported against their table; point at the key.
        let unknown = msg
            .strip_prefix("unknown field `")
            .and_then(|r| r.split('`').next())
            .and_then(|k| line_of(&source, k));
        let line = unknown.or_else(|| e.span().map(|s| source[..s.start].lines().count().max(1)));
        match line {
            Some(l) => CliError::Config(format!("{name}:{l}: {msg}")),
            None => CliError::Config(format!("{name}: {msg}")),
        }
    })?;
    Ok(Document { path: name, source, value })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryFile {
    /// `[a, b, c]` for `a + b·x + c·y`.
    pub affine: Option<[f64; 3]>,
    /// One `[a, b, c]` per Dirichlet arc.
    pub per_arc: Option<Vec<[f64; 3]>>,
}

impl BoundaryFile {
    pub fn to_data(&self) -> Result<BoundaryData, String> {
        let aff = |c: &[f64; 3]| Affine::new(c[0], c[1], c[2]);
        match (&self.affine, &self.per_arc) {
            (Some(c), None) => Ok(BoundaryData::Affine(aff(c))),
            (None, Some(v)) => Ok(BoundaryData::PerArc(v.iter().map(aff).collect())),
            _ => Err("give exactly one of `affine` and `per_arc`".into()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum DirichletFile {
    /// `"all"`.
    Keyword(String),
    Arcs(Vec<[[f64; 2]; 2]>),
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub example: Option<String>,
    /// Family member; the limit crack when absent.
    pub h: Option<u32>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub gap: Option<f64>,
    pub domain: Option<[f64; 4]>,
    pub holes: Option<Vec<[f64; 4]>>,
    pub cracks: Option<Vec<Vec<[f64; 2]>>>,
    pub dirichlet: Option<DirichletFile>,
}

/// Problem file of `solve` and `dual`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub p: f64,
    pub resolution: Option<usize>,
    pub tol: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub geometry: GeometryFile,
    pub boundary: Option<BoundaryFile>,
    /// `dual` only: build the potential from the primal flux instead of
    /// solving the dual problem.
    pub conjugate_from_primal: Option<bool>,
}

/// Explicit geometry pieces.
pub struct Explicit {
    pub domain: Domain,
    pub cracks: CrackSet,
    pub boundary: BoundarySpec,
}

fn rect(r: &[f64; 4]) -> Result<Rect, String> {
    Rect::new(r[0], r[1], r[2], r[3]).map_err(|e| e.to_string())
}

impl GeometryFile {
    pub fn example(&self) -> Result<Option<ExampleId>, String> {
        self.example.as_deref().map(|s| s.parse().map_err(|e: cracklab::Error| e.to_string())).transpose()
    }

    pub fn explicit(&self) -> Result<Explicit, String> {
        let outer = rect(self.domain.as_ref().ok_or("explicit geometry needs `domain`")?)?;
        let holes = self.holes.iter().flatten().map(rect).collect::<Result<Vec<_>, _>>()?;
        let domain = Domain::new(outer, holes).map_err(|e| e.to_string())?;
        let cracks = CrackSet::new(self.cracks.clone().unwrap_or_default()).map_err(|e| e.to_string())?;
        let boundary = match &self.dirichlet {
            None => BoundarySpec::everywhere(&domain),
            Some(DirichletFile::Keyword(k)) if k == "all" => BoundarySpec::everywhere(&domain),
            Some(DirichletFile::Keyword(k)) => return Err(format!("unknown dirichlet keyword `{k}`; use \"all\" or a list of segments")),
            Some(DirichletFile::Arcs(arcs)) => {
                let segs = arcs.iter().map(|s| Segment::new(s[0], s[1])).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
                BoundarySpec::new(segs, &domain).map_err(|e| e.to_string())?
            }
        };
        Ok(Explicit { domain, cracks, boundary })
    }
}

/// Experiment file of `gamma`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaFile {
    pub example: String,
    /// `stability`, `jump`, `annulus` or `junction`; chosen from the
    /// example when absent.
    pub experiment: Option<String>,
    pub p: Option<f64>,
    pub hs: Option<Vec<u32>>,
    pub resolution: Option<usize>,
    pub c: Option<f64>,
    pub channel_scale: Option<f64>,
    pub channels: Option<Vec<[f64; 2]>>,
    pub gap_scale: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub with_dual: Option<bool>,
    pub threads: Option<usize>,
    /// `ex5_7`: use the balanced per-arc data.
    pub balanced: Option<bool>,
    pub boundary: Option<BoundaryFile>,
    pub distance_ratio: Option<f64>,
    pub energy_tol: Option<f64>,
    pub relation_tol: Option<f64>,
    pub el_tol: Option<f64>,
    pub symmetry_tol: Option<f64>,
    pub annulus_margin: Option<f64>,
}

impl Document<GammaFile> {
    pub fn experiment_config(&self) -> Result<(ExperimentConfig, String), CliError> {
        let f = &self.value;
        let example: ExampleId = f.example.parse().map_err(|e: cracklab::Error| self.error_at("example", e))?;
        let mut cfg = ExperimentConfig::new(example);
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = f.$field.clone() { cfg.$field = v; })*};
        }
        set!(p, hs, resolution, c, channel_scale, gap_scale, seed, with_dual, threads);
        set!(distance_ratio, energy_tol, relation_tol, el_tol, symmetry_tol, annulus_margin);
        cfg.tol = f.tol.or(cfg.tol);
        cfg.channels = f.channels.as_ref().map(|v| v.iter().map(|c| (c[0], c[1])).collect());
        if let Some(b) = &f.boundary {
            cfg.boundary = b.to_data().map_err(|e| self.error_at("boundary", e))?;
        }
        if f.balanced == Some(true) {
            if example != ExampleId::Ex57 {
                return Err(self.error_at("balanced", "balanced data exists for ex5_7 only"));
            }
            cfg.boundary = balanced_junction_data();
        }
        let experiment = match f.experiment.as_deref() {
            Some(e @ ("stability" | "jump" | "annulus" | "junction")) => e.to_string(),
            Some(other) => return Err(self.error_at("experiment", format!("unknown experiment `{other}`"))),
            None => match example {
                ExampleId::Ex51 => "stability".into(),
                ExampleId::Ex53 if cfg.c == 0.0 => "stability".into(),
                ExampleId::Ex53 => "jump".into(),
                ExampleId::Ex55 => "annulus".into(),
                ExampleId::Ex57 => "junction".into(),
            },
        };
        Ok((cfg, experiment))
    }
}

/// Default boundary data of a problem: the example's own, else `g = y`.
pub fn default_boundary(example: Option<ExampleId>) -> BoundaryData {
    match example {
        Some(ExampleId::Ex55) => annulus_boundary_data(),
        _ => BoundaryData::Affine(Affine::new(0.0, 0.0, 1.0)),
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SetFile {
    Empty,
    Disk { center: [f64; 2], radius: f64 },
    Points { points: Vec<[f64; 2]> },
    Segments { polylines: Vec<Vec<[f64; 2]>> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ContainerFile {
    Disk { center: [f64; 2], radius: f64 },
    Rect { bounds: [f64; 4] },
}

/// Query file of `capacity`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityFile {
    pub r: f64,
    pub resolutions: Option<Vec<usize>>,
    pub delta: Option<f64>,
    pub tol: Option<f64>,
    pub set: SetFile,
    pub container: Option<ContainerFile>,
}

impl Document<CapacityFile> {
    pub fn query(&self) -> Result<(CapacityQuery, Vec<usize>), CliError> {
        let f = &self.value;
        let set = match &f.set {
            SetFile::Empty => CapacitySet::Empty,
            SetFile::Disk { center, radius } => CapacitySet::Disk { center: *center, radius: *radius },
            SetFile::Points { points } => CapacitySet::Points(points.clone()),
            SetFile::Segments { polylines } => {
                CapacitySet::Segments(CrackSet::new(polylines.clone()).map_err(|e| self.error_at("polylines", e))?)
            }
        };
        let container = match &f.container {
            None => Container::Disk { center: [0.0, 0.0], radius: 1.0 },
            Some(ContainerFile::Disk { center, radius }) => Container::Disk { center: *center, radius: *radius },
            Some(ContainerFile::Rect { bounds }) => Container::Rect(rect(bounds).map_err(|e| self.error_at("bounds", e))?),
        };
        let resolutions = f.resolutions.clone().unwrap_or_else(|| vec![32, 64, 128, 256]);
        if resolutions.is_empty() {
            return Err(self.error_at("resolutions", "the resolution list is empty"));
        }
        let mut q = CapacityQuery::new(set, container, f.r, resolutions[0]);
        q.delta = f.delta;
        q.tol = f.tol;
        Ok((q, resolutions))
    }
}

/// A set file of `hausdorff`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetListFile {
    pub polylines: Vec<Vec<[f64; 2]>>,
    pub domain: Option<[f64; 4]>,
}

impl Document<SetListFile> {
    pub fn crack_set(&self) -> Result<CrackSet, CliError> {
        CrackSet::new(self.value.polylines.clone()).map_err(|e| self.error_at("polylines", e))
    }

    pub fn domain(&self) -> Result<Option<Domain>, CliError> {
        self.value
            .domain
            .as_ref()
            .map(|d| rect(d).map(Domain::rectangle).map_err(|e| self.error_at("domain", e)))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_assignment_lines() {
        let src = "# c\np = 3\n[geometry]\n  example = \"ex5_1\"\nexamples = 1\n";
        assert_eq!(line_of(src, "p"), Some(2));
        assert_eq!(line_of(src, "example"), Some(4));
        assert_eq!(line_of(src, "missing"), None);
    }
}
