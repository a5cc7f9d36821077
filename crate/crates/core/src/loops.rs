//! Mean-zero loops in R^{2n} stored by Fourier coefficients.
//!
//! A loop is `x(t) = Σ_{k≠0} e^{2πktJ₀} x̂(k)`. Per symplectic plane, `x̂(k)`
//! is the complex number `x + iy` and `e^{2πktJ₀}` acts by `e^{2πikt}`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A truncated mean-zero Fourier loop with modes `k ∈ [−l_max, l_max] \ {0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierLoop {
    n: usize,
    l_max: usize,
    /// blocks of 2n reals ordered k = −L..−1, 1..L
    data: Vec<f64>,
}

impl FourierLoop {
    pub fn zeros(n: usize, l_max: usize) -> Self {
        assert!(n >= 1 && l_max >= 1);
        FourierLoop {
            n,
            l_max,
            data: vec![0.0; 2 * l_max * 2 * n],
        }
    }

    /// Builds a loop from its raw coefficient vector (see [`FourierLoop::as_slice`]).
    pub fn from_vec(n: usize, l_max: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), 4 * n * l_max);
        FourierLoop { n, l_max, data }
    }

    /// Loop with a single nonzero mode.
    pub fn single_mode(n: usize, l_max: usize, k: i64, coeff: &[f64]) -> Self {
        let mut x = Self::zeros(n, l_max);
        x.mode_mut(k).copy_from_slice(coeff);
        x
    }

    pub fn dim_n(&self) -> usize {
        self.n
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Raw coefficients: blocks of `2n` reals for `k = −L..−1, 1..L`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Position of mode `k` among the blocks.
    pub fn slot(&self, k: i64) -> usize {
        slot(self.l_max, k)
    }

    /// Mode number of block `s`.
    pub fn mode_of_slot(&self, s: usize) -> i64 {
        mode_of_slot(self.l_max, s)
    }

    pub fn mode(&self, k: i64) -> &[f64] {
        let d = 2 * self.n;
        let s = self.slot(k);
        &self.data[s * d..(s + 1) * d]
    }

    pub fn mode_mut(&mut self, k: i64) -> &mut [f64] {
        let d = 2 * self.n;
        let s = self.slot(k);
        &mut self.data[s * d..(s + 1) * d]
    }

    /// Mode numbers in storage order.
    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let l = self.l_max as i64;
        (-l..=-1).chain(1..=l)
    }

    fn weighted(&self, w: impl Fn(i64) -> f64) -> f64 {
        self.modes()
            .map(|k| w(k) * self.mode(k).iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// `A(x) = π Σ k |x̂(k)|²`.
    pub fn action(&self) -> f64 {
        PI * self.weighted(|k| k as f64)
    }

    /// `∫|x|² = Σ |x̂(k)|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.weighted(|_| 1.0)
    }

    /// `2π Σ |k| |x̂(k)|²`.
    pub fn h12_norm_sq(&self) -> f64 {
        TAU * self.weighted(|k| k.abs() as f64)
    }

    pub fn h12_norm(&self) -> f64 {
        self.h12_norm_sq().sqrt()
    }

    /// `(2π)² Σ k² |x̂(k)|²`.
    pub fn h1_seminorm_sq(&self) -> f64 {
        TAU * TAU * self.weighted(|k| (k * k) as f64)
    }

    /// `ℙ_l`: keeps modes `1..l`.
    pub fn project_modes(&self, l: usize) -> FourierLoop {
        let mut out = FourierLoop::zeros(self.n, self.l_max);
        for k in 1..=(l.min(self.l_max) as i64) {
            out.mode_mut(k).copy_from_slice(self.mode(k));
        }
        out
    }

    /// The S¹ action `x(· − θ)`: multiplies `x̂(k)` by `e^{−2πkθJ₀}`.
    pub fn shift(&self, theta: f64) -> FourierLoop {
        let mut out = self.clone();
        let ks: Vec<i64> = self.modes().collect();
        for k in ks {
            let r = Complex64::from_polar(1.0, -TAU * k as f64 * theta);
            for pair in out.mode_mut(k).chunks_exact_mut(2) {
                let z = r * Complex64::new(pair[0], pair[1]);
                pair[0] = z.re;
                pair[1] = z.im;
            }
        }
        out
    }

    /// Infinitesimal generator of the shift, `d/dθ shift(x,θ)` at θ = 0.
    pub fn shift_generator(&self) -> FourierLoop {
        let mut out = self.clone();
        let ks: Vec<i64> = self.modes().collect();
        for k in ks {
            let f = -TAU * k as f64;
            for pair in out.mode_mut(k).chunks_exact_mut(2) {
                let (a, b) = (pair[0], pair[1]);
                pair[0] = -f * b;
                pair[1] = f * a;
            }
        }
        out
    }

    /// Same loop in a model with a different truncation (zero-padded or cut).
    pub fn resized(&self, l_max: usize) -> FourierLoop {
        let mut out = FourierLoop::zeros(self.n, l_max);
        let l = self.l_max.min(l_max) as i64;
        for k in (-l..=-1).chain(1..=l) {
            out.mode_mut(k).copy_from_slice(self.mode(k));
        }
        out
    }

    pub fn scaled(&self, s: f64) -> FourierLoop {
        FourierLoop {
            n: self.n,
            l_max: self.l_max,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &FourierLoop, s: f64) -> FourierLoop {
        assert_eq!(self.data.len(), other.data.len());
        FourierLoop {
            n: self.n,
            l_max: self.l_max,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    /// `⟨a,b⟩_{1/2} = 2π Σ |k| ⟨x̂(k), ŷ(k)⟩`.
    pub fn h12_inner(&self, other: &FourierLoop) -> f64 {
        let d = 2 * self.n;
        self.data
            .chunks_exact(d)
            .zip(other.data.chunks_exact(d))
            .enumerate()
            .map(|(s, (a, b))| {
                let k = mode_of_slot(self.l_max, s).abs() as f64;
                TAU * k * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
            })
            .sum()
    }

    /// `⟨a,b⟩_{H¹} = (2π)² Σ k² ⟨x̂(k), ŷ(k)⟩`.
    pub fn h1_inner(&self, other: &FourierLoop) -> f64 {
        let d = 2 * self.n;
        self.data
            .chunks_exact(d)
            .zip(other.data.chunks_exact(d))
            .enumerate()
            .map(|(s, (a, b))| {
                let k = mode_of_slot(self.l_max, s) as f64;
                TAU * TAU * k * k * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
            })
            .sum()
    }

    /// Applies a real 2n×2n matrix to every coefficient.
    pub fn map_coeffs(&self, m: &nalgebra::DMatrix<f64>) -> FourierLoop {
        let d = 2 * self.n;
        let mut out = self.clone();
        for block in out.data.chunks_exact_mut(d) {
            let v = m * nalgebra::DVector::from_column_slice(block);
            block.copy_from_slice(v.as_slice());
        }
        out
    }
}

pub(crate) fn slot(l_max: usize, k: i64) -> usize {
    let l = l_max as i64;
    assert!(k != 0 && k.abs() <= l, "mode {k} outside [-{l}, {l}]");
    if k < 0 {
        (k + l) as usize
    } else {
        (k + l - 1) as usize
    }
}

pub(crate) fn mode_of_slot(l_max: usize, s: usize) -> i64 {
    let l = l_max as i64;
    let s = s as i64;
    if s < l {
        s - l
    } else {
        s - l + 1
    }
}

impl Serialize for FourierLoop {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Coeffs<'a>(&'a FourierLoop);
        impl Serialize for Coeffs<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let x = self.0;
                let nz: Vec<i64> = x
                    .modes()
                    .filter(|&k| x.mode(k).iter().any(|&v| v != 0.0))
                    .collect();
                let mut map = s.serialize_map(Some(nz.len()))?;
                for k in nz {
                    map.serialize_entry(&k.to_string(), x.mode(k))?;
                }
                map.end()
            }
        }
        #[derive(Serialize)]
        struct Repr<'a> {
            n: usize,
            l_max: usize,
            coeffs: Coeffs<'a>,
        }
        Repr {
            n: self.n,
            l_max: self.l_max,
            coeffs: Coeffs(self),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FourierLoop {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            n: usize,
            l_max: usize,
            coeffs: BTreeMap<String, Vec<f64>>,
        }
        let r = Repr::deserialize(d)?;
        if r.n == 0 || r.l_max == 0 {
            return Err(D::Error::custom("n and l_max must be positive"));
        }
        let mut x = FourierLoop::zeros(r.n, r.l_max);
        for (key, v) in r.coeffs {
            let k: i64 = key
                .parse()
                .map_err(|_| D::Error::custom(format!("bad mode key {key}")))?;
            if k == 0 {
                return Err(D::Error::custom("mode 0 is not allowed (mean-zero loops)"));
            }
            if k.unsigned_abs() as usize > r.l_max {
                return Err(D::Error::custom(format!("mode {k} exceeds l_max")));
            }
            if v.len() != 2 * r.n {
                return Err(D::Error::custom(format!(
                    "mode {k} needs {} reals",
                    2 * r.n
                )));
            }
            x.mode_mut(k).copy_from_slice(&v);
        }
        Ok(x)
    }
}

/// Uniform time grid with cached FFT plans for synthesis and analysis.
#[derive(Clone)]
pub struct LoopGrid {
    n: usize,
    l_max: usize,
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for LoopGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LoopGrid")
            .field("n", &self.n)
            .field("l_max", &self.l_max)
            .field("size", &self.size)
            .finish()
    }
}

impl LoopGrid {
    pub fn new(n: usize, l_max: usize, size: usize) -> Result<Self> {
        if size < 4 * l_max {
            return Err(Error::GridTooCoarse { grid: size, l_max });
        }
        let mut planner = FftPlanner::new();
        Ok(LoopGrid {
            n,
            l_max,
            size,
            fwd: planner.plan_fft_forward(size),
            inv: planner.plan_fft_inverse(size),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim_n(&self) -> usize {
        self.n
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Samples `Σ_k e^{2πikt_j} f(k)·x̂(k)` (complex factor per mode) at `t_j = j/size`,
    /// returned time-major as `size × 2n` reals.
    pub fn synth_with(&self, x: &FourierLoop, factor: impl Fn(i64) -> Complex64) -> Vec<f64> {
        let g = self.size;
        let d = 2 * self.n;
        let mut out = vec![0.0; g * d];
        let mut buf = vec![Complex64::new(0.0, 0.0); g];
        for p in 0..self.n {
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for k in x.modes() {
                let c = x.mode(k);
                let z = factor(k) * Complex64::new(c[2 * p], c[2 * p + 1]);
                buf[k.rem_euclid(g as i64) as usize] = z;
            }
            self.inv.process(&mut buf);
            for (j, z) in buf.iter().enumerate() {
                out[j * d + 2 * p] = z.re;
                out[j * d + 2 * p + 1] = z.im;
            }
        }
        out
    }

    pub fn positions(&self, x: &FourierLoop) -> Vec<f64> {
        self.synth_with(x, |_| Complex64::new(1.0, 0.0))
    }

    /// `ẋ(t_j)`: mode factor `2πk J₀`, i.e. `2πik` per plane.
    pub fn velocities(&self, x: &FourierLoop) -> Vec<f64> {
        self.synth_with(x, |k| Complex64::new(0.0, TAU * k as f64))
    }

    /// `−J₀ẋ(t_j)`: mode factor `2πk`.
    pub fn neg_j_velocity(&self, x: &FourierLoop) -> Vec<f64> {
        self.synth_with(x, |k| Complex64::new(TAU * k as f64, 0.0))
    }

    /// Fourier coefficients of time-major samples: the mean-zero part as a loop
    /// and the mean separately.
    pub fn analyze(&self, samples: &[f64]) -> (FourierLoop, Vec<f64>) {
        let g = self.size;
        let d = 2 * self.n;
        assert_eq!(samples.len(), g * d);
        let mut out = FourierLoop::zeros(self.n, self.l_max);
        let mut mean = vec![0.0; d];
        let mut buf = vec![Complex64::new(0.0, 0.0); g];
        let inv_g = 1.0 / g as f64;
        let l = self.l_max as i64;
        for p in 0..self.n {
            for (j, c) in buf.iter_mut().enumerate() {
                *c = Complex64::new(samples[j * d + 2 * p], samples[j * d + 2 * p + 1]);
            }
            self.fwd.process(&mut buf);
            mean[2 * p] = buf[0].re * inv_g;
            mean[2 * p + 1] = buf[0].im * inv_g;
            for k in (-l..=-1).chain(1..=l) {
                let z = buf[k.rem_euclid(g as i64) as usize] * inv_g;
                let m = out.mode_mut(k);
                m[2 * p] = z.re;
                m[2 * p + 1] = z.im;
            }
        }
        (out, mean)
    }

    /// Trapezoid mean `(1/size) Σ_j f(t_j)`.
    pub fn mean(&self, values: impl Iterator<Item = f64>) -> f64 {
        values.sum::<f64>() / self.size as f64
    }
}

/// Positions and velocities of a loop at `t_j = j/grid_size`, one point per row.
pub fn synthesize(x: &FourierLoop, grid_size: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let grid = LoopGrid::new(x.n, x.l_max, grid_size)?;
    let d = 2 * x.n;
    let rows = |v: Vec<f64>| v.chunks_exact(d).map(<[f64]>::to_vec).collect::<Vec<_>>();
    Ok((rows(grid.positions(x)), rows(grid.velocities(x))))
}

/// `A(x) = π Σ k |x̂(k)|²`.
pub fn action(x: &FourierLoop) -> f64 {
    x.action()
}

/// `ℙ_l`.
pub fn project_modes(x: &FourierLoop, l: usize) -> FourierLoop {
    x.project_modes(l)
}

/// `x(· − θ)`.
pub fn shift(x: &FourierLoop, theta: f64) -> FourierLoop {
    x.shift(theta)
}

/// `min_θ ‖a − shift(b,θ)‖_{1/2}`, searched on a 720-point grid and refined by Newton.
pub fn circle_distance(a: &FourierLoop, b: &FourierLoop) -> f64 {
    assert_eq!(a.n, b.n);
    assert_eq!(a.l_max, b.l_max);
    // f(θ) = ⟨a, shift(b,θ)⟩_{1/2} = Re Σ_k c_k e^{−2πikθ}
    let cs: Vec<(f64, Complex64)> = a
        .modes()
        .filter_map(|k| {
            let (x, y) = (a.mode(k), b.mode(k));
            let mut c = Complex64::new(0.0, 0.0);
            for p in 0..a.n {
                c += Complex64::new(x[2 * p], -x[2 * p + 1])
                    * Complex64::new(y[2 * p], y[2 * p + 1]);
            }
            (c.norm() > 0.0).then(|| (k as f64, c * TAU * k.abs() as f64))
        })
        .collect();
    let derivs = |th: f64| {
        let (mut f, mut f1, mut f2) = (0.0, 0.0, 0.0);
        for &(k, c) in &cs {
            let w = -TAU * k;
            let z = c * Complex64::from_polar(1.0, w * th);
            f += z.re;
            f1 += (z * Complex64::new(0.0, w)).re;
            f2 -= w * w * z.re;
        }
        (f, f1, f2)
    };
    let grid = 720;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..grid {
        let th = i as f64 / grid as f64;
        let f = derivs(th).0;
        if f > best.1 {
            best = (th, f);
        }
    }
    let h = 1.0 / grid as f64;
    let (lo, hi) = (best.0 - h, best.0 + h);
    let mut th = best.0;
    for _ in 0..60 {
        let (_, f1, f2) = derivs(th);
        if f2 >= 0.0 {
            break;
        }
        let next = (th - f1 / f2).clamp(lo, hi);
        if (next - th).abs() < 1e-17 {
            th = next;
            break;
        }
        th = next;
    }
    let d1 = a.add_scaled(&b.shift(th), -1.0).h12_norm();
    let d0 = a.add_scaled(&b.shift(best.0), -1.0).h12_norm();
    d1.min(d0)
}
