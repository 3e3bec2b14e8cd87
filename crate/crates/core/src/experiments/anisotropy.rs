use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::field::decode;
use crate::multiindex::IndexSet;

use super::{create_dir, write_file, ExperimentConfig, Problem};

/// Variables of `ψ_{0,0}, ψ_{1,0}, ψ_{2,0}, ψ_{3,0}`.
pub const PROBE_POSITIONS: [usize; 4] = [1, 2, 4, 8];

/// Coordinate pairs for 2-D sections: first the same-level pairs, then
/// `ψ_{0,0}` against the first function of each deeper level.
pub const SECTION_PAIRS: [(usize, usize); 6] = [(2, 3), (4, 5), (8, 9), (1, 2), (1, 4), (1, 8)];

/// `{(ν_a, ν_b) : ν ∈ Λ}` for one coordinate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub positions: (usize, usize),
    pub points: Vec<(u32, u32)>,
}

impl Section {
    fn of(set: &IndexSet, a: usize, b: usize) -> Self {
        let points = set.section(&[a, b]).into_iter().map(|p| (p[0], p[1])).collect();
        Self {
            positions: (a, b),
            points,
        }
    }

    /// Both coordinates belong to the same Schauder level.
    pub fn same_level(&self) -> bool {
        decode(self.positions.0).0 == decode(self.positions.1).0
    }

    /// Invariance under exchanging the two coordinates.
    pub fn is_symmetric(&self) -> bool {
        let mut swapped: Vec<(u32, u32)> = self.points.iter().map(|&(x, y)| (y, x)).collect();
        swapped.sort_unstable();
        swapped == self.points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropyRow {
    pub n: usize,
    /// `max_{ν∈Λ_n} ν_j` for each probe position `j <= J`.
    pub maxima: Vec<(usize, u32)>,
    pub sections: Vec<Section>,
}

impl AnisotropyRow {
    pub fn max_at(&self, position: usize) -> Option<u32> {
        self.maxima.iter().find(|(j, _)| *j == position).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropyReport {
    pub rows: Vec<AnisotropyRow>,
}

impl AnisotropyReport {
    /// Every same-level section is symmetric.
    pub fn same_level_symmetric(&self) -> bool {
        self.rows
            .iter()
            .flat_map(|r| &r.sections)
            .filter(|s| s.same_level())
            .all(Section::is_symmetric)
    }

    pub fn maxima_csv(&self) -> String {
        let probes: Vec<usize> = self
            .rows
            .first()
            .map(|r| r.maxima.iter().map(|(j, _)| *j).collect())
            .unwrap_or_default();
        let mut out = String::from("n");
        for j in &probes {
            let (l, k) = decode(*j);
            write!(out, ",max_psi_{l}_{k}").unwrap();
        }
        out.push('\n');
        for r in &self.rows {
            write!(out, "{}", r.n).unwrap();
            for (_, v) in &r.maxima {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn sections_csv(&self) -> String {
        let mut out = String::from("n,a,b,nu_a,nu_b\n");
        for r in &self.rows {
            for s in &r.sections {
                for (x, y) in &s.points {
                    writeln!(out, "{},{},{},{x},{y}", r.n, s.positions.0, s.positions.1).unwrap();
                }
            }
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        create_dir(dir)?;
        let maxima = dir.join("anisotropy.csv");
        let sections = dir.join("sections.csv");
        write_file(&maxima, &self.maxima_csv())?;
        write_file(&sections, &self.sections_csv())?;
        Ok((maxima, sections))
    }
}

/// Degree maxima along the probe variables and 2-D sections of `Λ_n` for
/// each `n` in `sizes`.
pub fn anisotropy_report(cfg: &ExperimentConfig, sizes: &[usize]) -> Result<AnisotropyReport> {
    let problem = Problem::new(cfg)?;
    let vars = problem.num_vars();
    let rows = sizes
        .iter()
        .map(|&n| {
            let set = problem.index_set(n)?;
            let maxima = PROBE_POSITIONS
                .iter()
                .filter(|&&j| j <= vars)
                .map(|&j| (j, set.max_exponent_at(j)))
                .collect();
            let sections = SECTION_PAIRS
                .iter()
                .filter(|&&(a, b)| a.max(b) <= vars)
                .map(|&(a, b)| Section::of(&set, a, b))
                .collect();
            Ok(AnisotropyRow { n, maxima, sections })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnisotropyReport { rows })
}
