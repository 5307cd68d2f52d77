//! Densities of mean-type estimators on uniform grids.
//!
//! For `H(X) = (1/n) Σ h(xᵢ)` with a strictly monotone `h`, the density of
//! `H(X)` is the density of `h(x)` (a change of variables), convolved with
//! itself `n` times and then rescaled from the sum to the mean:
//! `f_H(b) = n · f_sum(n b)`. The factor `n` is the Jacobian of the rescaling
//! and is what keeps the result normalized.
//!
//! Densities are piecewise linear between nodes and integrated with the
//! trapezoid rule, which is exact for that interpolant.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::fabs;

/// Minimum number of intervals a grid must have before convolution.
pub const MIN_INTERVALS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl DensityGrid {
    /// A grid over `[lo, hi]` with `values.len()` equally spaced nodes.
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config("a grid needs lo < hi and at least two nodes".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("grid values must be finite and nonnegative".into()));
        }
        let step = (hi - lo) / (values.len() - 1) as f64;
        Ok(Self { lo, step, values })
    }

    /// Tabulates `f` at `nodes` points over `[lo, hi]`.
    pub fn from_fn(lo: f64, hi: f64, nodes: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::Config("a grid needs at least two nodes".into()));
        }
        let step = (hi - lo) / (nodes - 1) as f64;
        Self::new(lo, hi, (0..nodes).map(|i| f(lo + i as f64 * step)).collect())
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.node(self.values.len() - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.node(i), v))
    }

    fn trapezoid(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let last = self.values.len() - 1;
        let inner: f64 = self.nodes().map(|(x, v)| g(x, v)).sum();
        let ends = 0.5 * (g(self.lo, self.values[0]) + g(self.node(last), self.values[last]));
        (inner - ends) * self.step
    }

    pub fn integral(&self) -> f64 {
        self.trapezoid(|_, v| v)
    }

    pub fn normalized(mut self) -> Result<Self> {
        let mass = self.integral();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Config("grid has no mass".into()));
        }
        self.values.iter_mut().for_each(|v| *v /= mass);
        Ok(self)
    }

    pub fn mean(&self) -> f64 {
        self.trapezoid(|x, v| x * v) / self.integral()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.trapezoid(|x, v| (x - m) * (x - m) * v) / self.integral()
    }

    /// Linear interpolation; zero outside `[lo, hi]`.
    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.step;
        let last = (self.values.len() - 1) as f64;
        // tolerate rounding just outside the end nodes
        if !(t >= -1e-9 && t <= last + 1e-9) {
            return 0.0;
        }
        let t = t.clamp(0.0, last);
        let i = (t as usize).min(self.values.len() - 2);
        let r = t - i as f64;
        self.values[i] * (1.0 - r) + self.values[i + 1] * r
    }

    /// Cumulative trapezoid integral at every node.
    pub fn cdf_nodes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * self.step;
            out.push(acc);
        }
        out
    }

    /// Integral of the interpolant over `(-∞, x]`, given [`Self::cdf_nodes`].
    fn cdf_at(&self, cum: &[f64], x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        let last = self.values.len() - 1;
        if x >= self.node(last) {
            return cum[last];
        }
        let i = (((x - self.lo) / self.step) as usize).min(last - 1);
        let t = x - self.node(i);
        let slope = (self.values[i + 1] - self.values[i]) / self.step;
        cum[i] + self.values[i] * t + 0.5 * slope * t * t
    }

    /// Largest gap between the grid CDF and `cdf` over the nodes.
    pub fn kolmogorov_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let mass = self.integral();
        self.cdf_nodes()
            .iter()
            .enumerate()
            .map(|(i, c)| fabs(c / mass - cdf(self.node(i))))
            .fold(0.0, f64::max)
    }

    /// L1 distance between the grid and the histogram of `samples` over
    /// `bins` equal bins spanning the grid, both reduced to bin masses.
    pub fn l1_to_samples(&self, samples: &[f64], bins: usize) -> f64 {
        let width = (self.hi() - self.lo) / bins as f64;
        let mut counts = alloc::vec![0usize; bins];
        let mut outside = 0usize;
        for &s in samples {
            let b = (s - self.lo) / width;
            if b >= 0.0 && b < bins as f64 {
                counts[b as usize] += 1;
            } else if s == self.hi() {
                counts[bins - 1] += 1;
            } else {
                outside += 1;
            }
        }
        let cum = self.cdf_nodes();
        let mass = cum[cum.len() - 1];
        let total = samples.len() as f64;
        let mut l1 = outside as f64 / total;
        let mut prev = 0.0;
        for (b, &c) in counts.iter().enumerate() {
            let next = self.cdf_at(&cum, self.lo + (b + 1) as f64 * width) / mass;
            l1 += fabs((next - prev) - c as f64 / total);
            prev = next;
        }
        l1
    }
}

/// A strictly monotone map from a data point to its local estimate.
pub trait LocalEstimateMap {
    fn h(&self, x: f64) -> f64;

    fn h_inverse(&self, b: f64) -> f64;

    /// `|d h⁻¹ / db|`. The default is a central difference.
    fn inverse_jacobian(&self, b: f64) -> f64 {
        let e = 1e-6 * (1.0 + fabs(b));
        fabs(self.h_inverse(b + e) - self.h_inverse(b - e)) / (2.0 * e)
    }
}

/// `h(x) = scale · x + shift`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub scale: f64,
    pub shift: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        scale: 1.0,
        shift: 0.0,
    };

    pub fn scale(scale: f64) -> Self {
        Self { scale, shift: 0.0 }
    }
}

impl LocalEstimateMap for Affine {
    fn h(&self, x: f64) -> f64 {
        self.scale * x + self.shift
    }

    fn h_inverse(&self, b: f64) -> f64 {
        (b - self.shift) / self.scale
    }

    fn inverse_jacobian(&self, _: f64) -> f64 {
        1.0 / fabs(self.scale)
    }
}

/// Density of `h(x)` for `x ~ f`, on a grid with the same number of nodes.
pub fn pushforward(f: &DensityGrid, map: &dyn LocalEstimateMap) -> Result<DensityGrid> {
    let images: Vec<f64> = (0..f.len()).map(|i| map.h(f.node(i))).collect();
    let increasing = images[1] > images[0];
    let monotone = images.windows(2).all(|w| {
        if increasing {
            w[1] > w[0]
        } else {
            w[1] < w[0]
        }
    });
    if !monotone || images.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMap("h is not strictly monotone on the grid".into()));
    }
    let (lo, hi) = if increasing {
        (images[0], images[images.len() - 1])
    } else {
        (images[images.len() - 1], images[0])
    };
    let step = (hi - lo) / (f.len() - 1) as f64;
    let mut values = Vec::with_capacity(f.len());
    for j in 0..f.len() {
        let b = lo + j as f64 * step;
        let x = map.h_inverse(b);
        if fabs(map.h(x) - b) > 1e-9 * (1.0 + fabs(b)) {
            return Err(Error::InvalidMap("h(h_inverse(b)) does not return b".into()));
        }
        values.push(f.eval(x) * map.inverse_jacobian(b));
    }
    DensityGrid::new(lo, hi, values)?.normalized()
}

fn check_resolution(f: &DensityGrid) -> Result<()> {
    let limit = (f.hi() - f.lo()) / MIN_INTERVALS as f64;
    if f.len() - 1 < MIN_INTERVALS {
        return Err(Error::Resolution {
            step: f.step(),
            limit,
        });
    }
    Ok(())
}

/// `(f ∗ g)` on the sum grid, assuming both share a step. Each output node
/// integrates over the overlap with trapezoid weights.
fn convolve(f: &DensityGrid, g: &DensityGrid) -> Result<DensityGrid> {
    let (nf, ng) = (f.len(), g.len());
    let mut out = alloc::vec![0.0; nf + ng - 1];
    for (k, o) in out.iter_mut().enumerate() {
        let i0 = k.saturating_sub(ng - 1);
        let i1 = k.min(nf - 1);
        if i0 == i1 {
            continue;
        }
        let mut acc = 0.0;
        for i in i0..=i1 {
            acc += f.values[i] * g.values[k - i];
        }
        acc -= 0.5 * (f.values[i0] * g.values[k - i0] + f.values[i1] * g.values[k - i1]);
        *o = acc * f.step;
    }
    let lo = f.lo + g.lo;
    let hi = lo + (out.len() - 1) as f64 * f.step;
    DensityGrid::new(lo, hi, out)?.normalized()
}

/// Density of the sum of `n` independent draws from `f`.
pub fn self_convolve(f: &DensityGrid, n: usize) -> Result<DensityGrid> {
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    check_resolution(f)?;
    let mut acc = f.clone();
    for _ in 1..n {
        acc = convolve(&acc, f)?;
    }
    Ok(acc)
}

/// Density of `(1/n) Σ h(xᵢ)` for `xᵢ ~ f_x` independent.
pub fn estimator_density(
    f_x: &DensityGrid,
    map: &dyn LocalEstimateMap,
    n: usize,
) -> Result<DensityGrid> {
    let pushed = pushforward(f_x, map)?;
    let sum = self_convolve(&pushed, n)?;
    let k = n as f64;
    let values = sum.values.iter().map(|v| v * k).collect();
    DensityGrid::new(sum.lo / k, sum.hi() / k, values)?.normalized()
}
