use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local level index of a three-level atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Level {
    G0 = 0,
    G1 = 1,
    E = 2,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G0, Level::G1, Level::E];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::G0 => "g0",
            Level::G1 => "g1",
            Level::E => "e",
        }
    }
}

/// One tensor factor of a composite space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Factor {
    /// Three-level atom with levels (g0, g1, e).
    Atom,
    /// Bosonic mode truncated at `cutoff` photons (inclusive).
    Mode { cutoff: usize },
    /// Register of `dim` orthonormal abstract labels.
    Flag { dim: usize },
}

impl Factor {
    pub fn dim(&self) -> usize {
        match *self {
            Factor::Atom => 3,
            Factor::Mode { cutoff } => cutoff + 1,
            Factor::Flag { dim } => dim,
        }
    }

    /// Contribution of local state `local` to the excitation weight.
    pub fn weight(&self, local: u8) -> usize {
        match self {
            Factor::Atom => usize::from(local != Level::G0 as u8),
            Factor::Mode { .. } => local as usize,
            Factor::Flag { .. } => 0,
        }
    }

    fn local_name(&self, local: u8) -> String {
        match self {
            Factor::Atom => Level::ALL[local as usize].name().to_string(),
            Factor::Mode { .. } => local.to_string(),
            Factor::Flag { .. } => format!("f{local}"),
        }
    }

    fn parse_local(&self, tok: &str) -> Option<u8> {
        let idx = match self {
            Factor::Atom => match tok {
                "g0" => 0,
                "g1" => 1,
                "e" => 2,
                _ => return None,
            },
            Factor::Mode { .. } => tok.parse().ok()?,
            Factor::Flag { .. } => tok.strip_prefix('f').unwrap_or(tok).parse().ok()?,
        };
        (idx < self.dim()).then_some(idx as u8)
    }
}

/// Parses `atom`, `mode:<cutoff>` or `flag:<dim>`.
impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s, None),
        };
        let int_arg = || -> Result<i64> {
            arg.ok_or_else(|| Error::BadFactor(s.to_string()))?
                .parse::<i64>()
                .map_err(|_| Error::BadFactor(s.to_string()))
        };
        match kind {
            "atom" if arg.is_none() => Ok(Factor::Atom),
            "mode" => {
                let cutoff = int_arg()?;
                if cutoff < 0 {
                    return Err(Error::NegativeCutoff(cutoff));
                }
                Ok(Factor::Mode {
                    cutoff: cutoff as usize,
                })
            }
            "flag" => {
                let dim = int_arg()?;
                if dim < 1 {
                    return Err(Error::BadFactor(s.to_string()));
                }
                Ok(Factor::Flag { dim: dim as usize })
            }
            _ => Err(Error::BadFactor(s.to_string())),
        }
    }
}

/// Product-basis label: one local index per factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisLabel(pub Vec<u8>);

impl BasisLabel {
    pub fn new(locals: impl Into<Vec<u8>>) -> Self {
        BasisLabel(locals.into())
    }

    pub fn locals(&self) -> &[u8] {
        &self.0
    }
}

/// Composite Hilbert space with a fixed lexicographic basis order.
///
/// Factors are enumerated left to right with the first factor most
/// significant. When `sector_cap` is set, only labels whose excitation weight
/// (atoms in g1 or e, plus photons) does not exceed the cap are kept.
#[derive(Clone, Debug)]
pub struct SpaceDescriptor {
    factors: Vec<Factor>,
    sector_cap: Option<usize>,
    labels: Vec<BasisLabel>,
    index: HashMap<BasisLabel, usize>,
}

impl PartialEq for SpaceDescriptor {
    fn eq(&self, other: &Self) -> bool {
        self.factors == other.factors && self.sector_cap == other.sector_cap
    }
}

impl SpaceDescriptor {
    pub fn new(factors: Vec<Factor>, sector_cap: Option<usize>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::EmptySpace);
        }
        if let Some(f) = factors.iter().find(|f| f.dim() == 0) {
            return Err(Error::BadFactor(format!("{f:?}")));
        }
        let full: usize = factors.iter().map(Factor::dim).product();
        let mut labels = Vec::with_capacity(full);
        let mut cur = vec![0u8; factors.len()];
        for _ in 0..full {
            let lbl = BasisLabel(cur.clone());
            if sector_cap.map_or(true, |cap| weight_of(&factors, &lbl) <= cap) {
                labels.push(lbl);
            }
            // odometer increment, last factor fastest
            for k in (0..factors.len()).rev() {
                cur[k] += 1;
                if (cur[k] as usize) < factors[k].dim() {
                    break;
                }
                cur[k] = 0;
            }
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Ok(SpaceDescriptor {
            factors,
            sector_cap,
            labels,
            index,
        })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn sector_cap(&self) -> Option<usize> {
        self.sector_cap
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn label_of(&self, index: usize) -> &BasisLabel {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &BasisLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn weight(&self, label: &BasisLabel) -> usize {
        weight_of(&self.factors, label)
    }

    /// Positions of factors matching `pred`, in declared order.
    pub fn positions(&self, pred: impl Fn(&Factor) -> bool) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, f)| pred(f))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn atom_positions(&self) -> Vec<usize> {
        self.positions(|f| matches!(f, Factor::Atom))
    }

    pub fn mode_positions(&self) -> Vec<usize> {
        self.positions(|f| matches!(f, Factor::Mode { .. }))
    }

    /// Validates a label against the factor layout and the sector cap.
    pub fn check_label(&self, label: &BasisLabel) -> Result<usize> {
        let shape_ok = label.0.len() == self.factors.len()
            && label
                .0
                .iter()
                .zip(&self.factors)
                .all(|(&l, f)| (l as usize) < f.dim());
        if !shape_ok {
            return Err(Error::UnknownLabel(format!("{:?}", label.0)));
        }
        match self.index_of(label) {
            Some(i) => Ok(i),
            None => Err(Error::SectorViolation {
                label: self.format_label(label),
                weight: self.weight(label),
                cap: self.sector_cap.unwrap_or(usize::MAX),
            }),
        }
    }

    /// Parses a label like `g0,g1,0` (commas or whitespace separate factors).
    pub fn parse_label(&self, text: &str) -> Result<BasisLabel> {
        let toks: Vec<&str> = text
            .split(|c: char| c == ',' || c.is_whitespace() || c == '|')
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() != self.factors.len() {
            return Err(Error::UnknownLabel(text.to_string()));
        }
        let locals = toks
            .iter()
            .zip(&self.factors)
            .map(|(t, f)| f.parse_local(t))
            .collect::<Option<Vec<u8>>>()
            .ok_or_else(|| Error::UnknownLabel(text.to_string()))?;
        Ok(BasisLabel(locals))
    }

    pub fn format_label(&self, label: &BasisLabel) -> String {
        label
            .0
            .iter()
            .zip(&self.factors)
            .map(|(&l, f)| f.local_name(l))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Returns `label` with factor `pos` replaced by `local`, if that label
    /// exists in this space.
    pub fn replaced(&self, label: &BasisLabel, pos: usize, local: u8) -> Option<usize> {
        let mut l = label.clone();
        l.0[pos] = local;
        self.index_of(&l)
    }
}

fn weight_of(factors: &[Factor], label: &BasisLabel) -> usize {
    label
        .0
        .iter()
        .zip(factors)
        .map(|(&l, f)| f.weight(l))
        .sum()
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|fac| match fac {
                Factor::Atom => "atom".to_string(),
                Factor::Mode { cutoff } => format!("mode:{cutoff}"),
                Factor::Flag { dim } => format!("flag:{dim}"),
            })
            .collect();
        write!(f, "[{}]", parts.join(" x "))?;
        if let Some(cap) = self.sector_cap {
            write!(f, " (w <= {cap})")?;
        }
        Ok(())
    }
}

/// Builds a space from textual factor specs.
pub fn build_space<S: AsRef<str>>(
    factor_specs: &[S],
    sector_cap: Option<usize>,
) -> Result<SpaceDescriptor> {
    let factors = factor_specs
        .iter()
        .map(|s| s.as_ref().parse())
        .collect::<Result<Vec<Factor>>>()?;
    SpaceDescriptor::new(factors, sector_cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_count(factors: &[Factor], cap: usize) -> usize {
        // Independent enumeration via mixed-radix decoding of every integer.
        let full: usize = factors.iter().map(Factor::dim).product();
        (0..full)
            .filter(|&i| {
                let mut code = i;
                let mut w = 0;
                for f in factors.iter().rev() {
                    let local = code % f.dim();
                    code /= f.dim();
                    w += f.weight(local as u8);
                }
                w <= cap
            })
            .count()
    }

    #[test]
    fn uncapped_dims() {
        assert_eq!(build_space(&["atom", "atom", "mode:2"], None).unwrap().dim(), 27);
        let s = build_space(&["atom", "atom", "mode:2", "mode:2", "mode:2"], None).unwrap();
        assert_eq!(s.dim(), 243);
    }

    #[test]
    fn capped_dims_match_enumeration() {
        let s = build_space(&["atom", "atom", "mode:2"], Some(2)).unwrap();
        assert_eq!(brute_force_count(s.factors(), 2), 15);
        assert_eq!(s.dim(), 15);
        let s = build_space(&["atom", "atom", "mode:2", "mode:2", "mode:2"], Some(2)).unwrap();
        assert_eq!(brute_force_count(s.factors(), 2), 30);
        assert_eq!(s.dim(), 30);
    }

    #[test]
    fn rejects_bad_factors() {
        assert!(matches!(
            build_space(&["atom", "mode:-1"], None),
            Err(Error::NegativeCutoff(-1))
        ));
        assert!(matches!(
            build_space::<&str>(&[], None),
            Err(Error::EmptySpace)
        ));
        assert!(build_space(&["qutrit"], None).is_err());
    }

    #[test]
    fn lexicographic_order() {
        let s = build_space(&["atom", "atom", "mode:2"], None).unwrap();
        assert_eq!(s.label_of(0), &BasisLabel::new([0, 0, 0]));
        assert_eq!(s.label_of(1), &BasisLabel::new([0, 0, 1]));
        assert_eq!(s.label_of(3), &BasisLabel::new([0, 1, 0]));
        assert_eq!(s.label_of(26), &BasisLabel::new([2, 2, 2]));
    }

    #[test]
    fn label_parsing_and_sector_check() {
        let s = build_space(&["atom", "atom", "mode:2"], Some(2)).unwrap();
        let l = s.parse_label("e,e,2").unwrap();
        assert!(matches!(
            s.check_label(&l),
            Err(Error::SectorViolation { weight: 4, .. })
        ));
        let l = s.parse_label("g1 g0 0").unwrap();
        assert_eq!(s.weight(&l), 1);
        assert_eq!(s.format_label(&l), "g1,g0,0");
        assert!(s.parse_label("g2,g0,0").is_err());
    }
}
