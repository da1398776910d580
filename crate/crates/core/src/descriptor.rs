//! Per-vertex time- or energy-sampled descriptor fields and their on-disk forms.

use std::fmt;
use std::io::{self, Read, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum DescriptorError {
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("descriptor entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("incompatible descriptor fields: {0}")]
    Incompatible(String),
    #[error("malformed descriptor container: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Uniform implicit-Euler grid: `τ = t_max / levels`, samples `t_k = k τ` for `k = 1..=levels`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    levels: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, levels: usize) -> Result<Self, DescriptorError> {
        if levels == 0 {
            return Err(DescriptorError::Grid("at least one time level is required".into()));
        }
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(DescriptorError::Grid(format!("stopping time must be positive, got {t_max}")));
        }
        Ok(Self { t_max, levels })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn step(&self) -> f64 {
        self.t_max / self.levels as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let tau = self.step();
        (1..=self.levels).map(|k| k as f64 * tau).collect()
    }

    /// Same level count over a different horizon.
    pub fn with_t_max(&self, t_max: f64) -> Result<Self, DescriptorError> {
        Self::new(t_max, self.levels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pde {
    Heat,
    Wave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Full,
    Mcr,
    Ksmor,
    Hks,
    Wks,
}

impl fmt::Display for Pde {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pde::Heat => "heat",
            Pde::Wave => "wave",
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Full => "full",
            Method::Mcr => "mcr",
            Method::Ksmor => "ksmor",
            Method::Hks => "hks",
            Method::Wks => "wks",
        })
    }
}

/// What the columns of a field were sampled at.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    Time(TimeGrid),
    HksTimes(Vec<f64>),
    WksEnergies { energies: Vec<f64>, sigma: f64 },
}

impl Sampling {
    pub fn len(&self) -> usize {
        match self {
            Sampling::Time(g) => g.levels(),
            Sampling::HksTimes(t) => t.len(),
            Sampling::WksEnergies { energies, .. } => energies.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn samples(&self) -> Vec<f64> {
        match self {
            Sampling::Time(g) => g.times(),
            Sampling::HksTimes(t) => t.clone(),
            Sampling::WksEnergies { energies, .. } => energies.clone(),
        }
    }
}

/// `N x M` matrix of descriptor values, row `i` belonging to vertex `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorField {
    nrows: usize,
    ncols: usize,
    values: Vec<f64>,
    pde: Option<Pde>,
    method: Method,
    sampling: Sampling,
}

const MAGIC: &[u8; 4] = b"SSDF";
const VERSION: u32 = 1;

impl DescriptorField {
    /// `values` is row-major. Spectral methods carry no PDE tag.
    pub fn new(
        nrows: usize,
        values: Vec<f64>,
        pde: Option<Pde>,
        method: Method,
        sampling: Sampling,
    ) -> Result<Self, DescriptorError> {
        let ncols = sampling.len();
        if ncols == 0 || values.len() != nrows * ncols {
            return Err(DescriptorError::Dimension(format!(
                "{} values for {nrows} rows and {ncols} samples",
                values.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(DescriptorError::NonFinite { row: p / ncols, col: p % ncols });
        }
        let spectral = matches!(method, Method::Hks | Method::Wks);
        if spectral == pde.is_some() {
            return Err(DescriptorError::Incompatible(format!("method {method} with pde tag {pde:?}")));
        }
        Ok(Self { nrows, ncols, values, pde, method, sampling })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.ncols + k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pde(&self) -> Option<Pde> {
        self.pde
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn sampling(&self) -> &Sampling {
        &self.sampling
    }

    /// The time grid, for time-integrated methods.
    pub fn time_grid(&self) -> Option<TimeGrid> {
        match self.sampling {
            Sampling::Time(g) => Some(g),
            _ => None,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Fields can be compared only when produced by the same method on the same samples.
    pub fn check_compatible(&self, other: &Self) -> Result<(), DescriptorError> {
        if self.ncols != other.ncols {
            return Err(DescriptorError::Incompatible(format!(
                "{} samples vs {} samples",
                self.ncols, other.ncols
            )));
        }
        if self.method != other.method || self.pde != other.pde {
            return Err(DescriptorError::Incompatible(format!(
                "{}/{:?} vs {}/{:?}",
                self.method, self.pde, other.method, other.pde
            )));
        }
        if self.sampling != other.sampling {
            return Err(DescriptorError::Incompatible(
                "sampling grids differ; compute the target with the reference shape's grid".into(),
            ));
        }
        Ok(())
    }

    /// One line per vertex, one column per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<String> = self.sampling.samples().iter().map(|s| format!("{s:e}")).collect();
        writeln!(w, "vertex,{}", header.join(","))?;
        for i in 0..self.nrows {
            write!(w, "{i}")?;
            for v in self.row(i) {
                write!(w, ",{v:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * (self.values.len() + self.ncols));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.nrows as u64).to_le_bytes());
        out.extend_from_slice(&(self.ncols as u64).to_le_bytes());
        out.push(match self.pde {
            None => 0,
            Some(Pde::Heat) => 1,
            Some(Pde::Wave) => 2,
        });
        out.push(match self.method {
            Method::Full => 0,
            Method::Mcr => 1,
            Method::Ksmor => 2,
            Method::Hks => 3,
            Method::Wks => 4,
        });
        let (tag, t_max, sigma) = match &self.sampling {
            Sampling::Time(g) => (0u8, g.t_max(), 0.0),
            Sampling::HksTimes(_) => (1, f64::NAN, 0.0),
            Sampling::WksEnergies { sigma, .. } => (2, f64::NAN, *sigma),
        };
        out.push(tag);
        out.extend_from_slice(&t_max.to_le_bytes());
        out.extend_from_slice(&sigma.to_le_bytes());
        if tag != 0 {
            for s in self.sampling.samples() {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DescriptorError> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(DescriptorError::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(DescriptorError::Format(format!("unsupported version {version}")));
        }
        let nrows = r.u64()? as usize;
        let ncols = r.u64()? as usize;
        let pde = match r.u8()? {
            0 => None,
            1 => Some(Pde::Heat),
            2 => Some(Pde::Wave),
            t => return Err(DescriptorError::Format(format!("unknown pde tag {t}"))),
        };
        let method = match r.u8()? {
            0 => Method::Full,
            1 => Method::Mcr,
            2 => Method::Ksmor,
            3 => Method::Hks,
            4 => Method::Wks,
            t => return Err(DescriptorError::Format(format!("unknown method tag {t}"))),
        };
        let tag = r.u8()?;
        let t_max = r.f64()?;
        let sigma = r.f64()?;
        let sampling = match tag {
            0 => Sampling::Time(TimeGrid::new(t_max, ncols)?),
            1 => Sampling::HksTimes(r.f64s(ncols)?),
            2 => Sampling::WksEnergies { energies: r.f64s(ncols)?, sigma },
            t => return Err(DescriptorError::Format(format!("unknown sampling tag {t}"))),
        };
        let count = nrows
            .checked_mul(ncols)
            .ok_or_else(|| DescriptorError::Format("size overflow".into()))?;
        let values = r.f64s(count)?;
        if r.pos != bytes.len() {
            return Err(DescriptorError::Format("trailing bytes".into()));
        }
        Self::new(nrows, values, pde, method, sampling)
    }

    pub fn write_binary(&self, path: &Path) -> Result<(), DescriptorError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self, DescriptorError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) struct ByteReader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], DescriptorError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| DescriptorError::Format("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, DescriptorError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u64(&mut self) -> Result<u64, DescriptorError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, DescriptorError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>, DescriptorError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| DescriptorError::Format("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DescriptorField {
        let g = TimeGrid::new(25.0, 3).unwrap();
        DescriptorField::new(2, vec![1.0, 0.5, 0.25, 2.0, 1.0, 0.5], Some(Pde::Heat), Method::Full, Sampling::Time(g))
            .unwrap()
    }

    #[test]
    fn grid_rules() {
        assert!(TimeGrid::new(25.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 5).is_err());
        let g = TimeGrid::new(25.0, 25).unwrap();
        assert_eq!(g.step(), 1.0);
        assert_eq!(g.times()[0], 1.0);
        assert_eq!(*g.times().last().unwrap(), 25.0);
    }

    #[test]
    fn binary_round_trip() {
        let f = sample();
        assert_eq!(DescriptorField::from_bytes(&f.to_bytes()).unwrap(), f);
        let w = DescriptorField::new(
            1,
            vec![0.1, 0.2],
            None,
            Method::Wks,
            Sampling::WksEnergies { energies: vec![-1.0, 0.5], sigma: 0.3 },
        )
        .unwrap();
        assert_eq!(DescriptorField::from_bytes(&w.to_bytes()).unwrap(), w);
        let mut bad = f.to_bytes();
        bad.pop();
        assert!(DescriptorField::from_bytes(&bad).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut out = Vec::new();
        sample().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,1e0,"));
    }

    #[test]
    fn compatibility() {
        let a = sample();
        let g = TimeGrid::new(50.0, 3).unwrap();
        let b = DescriptorField::new(2, a.values().to_vec(), Some(Pde::Heat), Method::Full, Sampling::Time(g)).unwrap();
        assert!(a.check_compatible(&a).is_ok());
        assert!(a.check_compatible(&b).is_err());
        assert!(DescriptorField::new(1, vec![f64::NAN; 3], Some(Pde::Heat), Method::Full, a.sampling().clone()).is_err());
        assert!(DescriptorField::new(1, vec![0.0; 3], None, Method::Full, a.sampling().clone()).is_err());
    }
}
