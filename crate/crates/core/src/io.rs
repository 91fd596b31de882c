//! JSON manifests naming Matrix Market files, for pencils and composite
//! models. Paths inside a manifest are relative to its directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::composite::{CompositeModel, Interconnection, Subsystem};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CscMatrix, Matrix, mm_read, mm_write};
use crate::pencil::ProjectionPencil;
use crate::problems::{CrossGeometry, SyntheticSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// How a problem was produced, so it can be regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum Source {
    Files,
    Plate { geometry: CrossGeometry },
    Synthetic { spec: SyntheticSpec },
    Random { seed: u64, order: usize, rank: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemFiles {
    pub e: PathBuf,
    pub a: PathBuf,
    pub b: PathBuf,
    pub c: PathBuf,
    pub d: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Body {
    Pencil { e: PathBuf, a: PathBuf },
    Composite { subsystems: Vec<SubsystemFiles>, j11: PathBuf, j12: PathBuf, j21: PathBuf, j22: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub source: Source,
    #[serde(flatten)]
    pub body: Body,
}

/// A loaded problem.
#[derive(Debug, Clone)]
pub enum Problem {
    Pencil(ProjectionPencil),
    Composite(CompositeModel),
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn write_matrix(dir: &Path, name: &str, m: &CMat) -> Result<PathBuf> {
    let file = PathBuf::from(format!("{name}.mtx"));
    mm_write(dir.join(&file), &Matrix::Sparse(CscMatrix::from_dense(m)))?;
    Ok(file)
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join(MANIFEST_NAME);
    std::fs::write(&path, serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(path)
}

/// Writes `E.mtx`, `A.mtx` and the manifest into `dir`.
pub fn write_pencil(dir: &Path, pencil: &ProjectionPencil, source: Source) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let sparse = |m: &Matrix| Matrix::Sparse(m.to_sparse());
    mm_write(dir.join("E.mtx"), &sparse(pencil.e()))?;
    mm_write(dir.join("A.mtx"), &sparse(pencil.a()))?;
    let manifest = Manifest { schema_version: SCHEMA_VERSION, source, body: Body::Pencil { e: "E.mtx".into(), a: "A.mtx".into() } };
    write_manifest(dir, &manifest)
}

/// Writes one file per subsystem block and per coupling block.
pub fn write_composite(dir: &Path, model: &CompositeModel, source: Source) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let subsystems = model
        .subsystems()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            Ok(SubsystemFiles {
                e: write_matrix(dir, &format!("sub{k}_E"), s.e())?,
                a: write_matrix(dir, &format!("sub{k}_A"), s.a())?,
                b: write_matrix(dir, &format!("sub{k}_B"), s.b())?,
                c: write_matrix(dir, &format!("sub{k}_C"), s.c())?,
                d: write_matrix(dir, &format!("sub{k}_D"), s.d())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ic = model.interconnection();
    let body = Body::Composite {
        subsystems,
        j11: write_matrix(dir, "J11", &ic.j11)?,
        j12: write_matrix(dir, "J12", &ic.j12)?,
        j21: write_matrix(dir, "J21", &ic.j21)?,
        j22: write_matrix(dir, "J22", &ic.j22)?,
    };
    write_manifest(dir, &Manifest { schema_version: SCHEMA_VERSION, source, body })
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path)?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::UnsupportedFormat(format!("manifest schema version {}", manifest.schema_version)));
    }
    Ok(manifest)
}

/// Reads a manifest and every file it names. A directory stands for the
/// manifest inside it.
pub fn load(path: &Path) -> Result<(Manifest, Problem)> {
    let joined;
    let path = if path.is_dir() {
        joined = path.join(MANIFEST_NAME);
        joined.as_path()
    } else {
        path
    };
    let manifest = read_manifest(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let read = |p: &PathBuf| mm_read(dir.join(p));
    let dense = |p: &PathBuf| read(p).map(|m| m.to_dense());
    let problem = match &manifest.body {
        Body::Pencil { e, a } => Problem::Pencil(ProjectionPencil::new(read(e)?, read(a)?)?),
        Body::Composite { subsystems, j11, j12, j21, j22 } => {
            let subs = subsystems
                .iter()
                .map(|f| Subsystem::new(dense(&f.e)?, dense(&f.a)?, dense(&f.b)?, dense(&f.c)?, dense(&f.d)?))
                .collect::<Result<Vec<_>>>()?;
            let ic = Interconnection::new(dense(j11)?, dense(j12)?, dense(j21)?, dense(j22)?)?;
            Problem::Composite(CompositeModel::new(subs, ic)?)
        }
    };
    Ok((manifest, problem))
}
