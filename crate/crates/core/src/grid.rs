//! Uniform tensor grids and grid-backed functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform axis `lo, lo + h, ..., hi` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points per axis, got {count}")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidGrid(format!("need finite lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi, count })
    }

    /// `[-8, 8]` with 2049 points: the default transform axis in 1D.
    pub fn default_1d() -> Self {
        Self { lo: -8.0, hi: 8.0, count: 2049 }
    }

    /// `[-8, 8]` with 513 points: the default per-axis resolution in 2D.
    pub fn default_2d() -> Self {
        Self { lo: -8.0, hi: 8.0, count: 513 }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    /// Cell index and fractional offset of `x`, or `None` outside `[lo, hi]`.
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let s = (x - self.lo) / self.step();
        let i = (s.floor() as usize).min(self.count - 2);
        Some((i, (s - i as f64).clamp(0.0, 1.0)))
    }
}

/// What the function is worth outside its box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    /// Potentials: `-inf` outside (domain restriction).
    Potential,
    /// Convex conjugates: `+inf` outside.
    Conjugate,
}

impl Polarity {
    pub fn outside(self) -> f64 {
        match self {
            Polarity::Potential => f64::NEG_INFINITY,
            Polarity::Conjugate => f64::INFINITY,
        }
    }
}

/// Values on a 1D or 2D uniform grid. In 2D the layout is row-major with the
/// first axis slowest: `values[i0 * count1 + i1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    axes: Vec<Axis>,
    values: Vec<f64>,
    polarity: Polarity,
}

impl GridFunction {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>, polarity: Polarity) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::UnsupportedDimension { dim: axes.len(), context: "grid functions are 1D or 2D" });
        }
        for a in &axes {
            Axis::new(a.lo, a.hi, a.count)?;
        }
        let expected: usize = axes.iter().map(|a| a.count).product();
        if values.len() != expected {
            return Err(Error::InvalidGrid(format!("expected {expected} values, got {}", values.len())));
        }
        let forbidden = match polarity {
            Polarity::Potential => f64::INFINITY,
            Polarity::Conjugate => f64::NEG_INFINITY,
        };
        if values.iter().any(|v| v.is_nan() || *v == forbidden) {
            return Err(Error::InvalidGrid(format!("values contain NaN or {forbidden}")));
        }
        Ok(Self { axes, values, polarity })
    }

    /// Samples `f` at every grid point.
    pub fn sample(axes: Vec<Axis>, polarity: Polarity, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let values = match axes.as_slice() {
            [a] => a.points().into_iter().map(|x| f(&[x])).collect(),
            [a, b] => {
                let (pa, pb) = (a.points(), b.points());
                let mut v = Vec::with_capacity(pa.len() * pb.len());
                for &x in &pa {
                    for &y in &pb {
                        v.push(f(&[x, y]));
                    }
                }
                v
            }
            _ => {
                return Err(Error::UnsupportedDimension { dim: axes.len(), context: "grid functions are 1D or 2D" })
            }
        };
        Self::new(axes, values, polarity)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        match idx {
            [i] => self.values[*i],
            [i, j] => self.values[i * self.axes[1].count + j],
            _ => panic!("grid index of wrong rank"),
        }
    }

    /// Multilinear interpolation inside the box, the polarity value outside.
    /// Infinite corners with nonzero weight propagate.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let outside = self.polarity.outside();
        match self.axes.as_slice() {
            [a] => {
                let Some((i, t)) = a.locate(x[0]) else { return Ok(outside) };
                Ok(lerp(self.values[i], self.values[i + 1], t))
            }
            [a, b] => {
                let (Some((i, s)), Some((j, t))) = (a.locate(x[0]), b.locate(x[1])) else { return Ok(outside) };
                let n1 = b.count;
                let v = |p: usize, q: usize| self.values[p * n1 + q];
                let lo = lerp(v(i, j), v(i, j + 1), t);
                let hi = lerp(v(i + 1, j), v(i + 1, j + 1), t);
                Ok(lerp(lo, hi, s))
            }
            _ => unreachable!(),
        }
    }

    /// Writes `x, value` (1D) or `x, y, value` (2D) rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.axes.as_slice() {
            [a] => {
                out.push_str("x,value\n");
                for (i, x) in a.points().into_iter().enumerate() {
                    out.push_str(&format!("{x},{}\n", self.values[i]));
                }
            }
            [a, b] => {
                out.push_str("x,y,value\n");
                let pb = b.points();
                for (i, x) in a.points().into_iter().enumerate() {
                    for (j, y) in pb.iter().enumerate() {
                        out.push_str(&format!("{x},{y},{}\n", self.values[i * b.count + j]));
                    }
                }
            }
            _ => unreachable!(),
        }
        out
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else if a.is_infinite() || b.is_infinite() {
        a + b
    } else {
        a + t * (b - a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_validation() {
        assert!(Axis::new(0.0, 1.0, 2).is_err());
        assert!(Axis::new(1.0, 1.0, 5).is_err());
        let a = Axis::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(a.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn bilinear_is_exact_on_affine() {
        let axes = vec![Axis::new(-1.0, 1.0, 5).unwrap(), Axis::new(0.0, 2.0, 3).unwrap()];
        let g = GridFunction::sample(axes, Polarity::Potential, |p| 2.0 * p[0] - p[1] + 1.0).unwrap();
        let v = g.eval(&[0.3, 1.7]).unwrap();
        assert!((v - (0.6 - 1.7 + 1.0)).abs() < 1e-14);
        assert_eq!(g.eval(&[1.5, 1.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn conjugate_polarity_outside() {
        let g = GridFunction::sample(vec![Axis::new(-1.0, 1.0, 3).unwrap()], Polarity::Conjugate, |p| p[0]).unwrap();
        assert_eq!(g.eval(&[2.0]).unwrap(), f64::INFINITY);
        assert!(GridFunction::new(vec![Axis::new(-1.0, 1.0, 3).unwrap()], vec![0.0, f64::NEG_INFINITY, 0.0], Polarity::Conjugate).is_err());
    }

    #[test]
    fn infinite_corner_propagates() {
        let g = GridFunction::new(vec![Axis::new(0.0, 2.0, 3).unwrap()], vec![0.0, f64::NEG_INFINITY, 1.0], Polarity::Potential).unwrap();
        assert_eq!(g.eval(&[0.5]).unwrap(), f64::NEG_INFINITY);
        assert_eq!(g.eval(&[0.0]).unwrap(), 0.0);
    }
}
