//! Discrete trigonometric transforms (DCT-I / DST-I) and the complex FFT,
//! plus their tensorised d-dimensional application.
//!
//! All forward transforms are unnormalised plain sums,
//!
//! ```text
//! dct1:  y[m] = sum_{k=0}^{n-1} x[k] cos(pi m k / (n-1))      m = 0..n-1
//! dst1:  y[m] = sum_{k=1}^{n}   x[k] sin(pi m k / n)          m = 1..n
//! ```
//!
//! so every sampler scaling is applied by the caller. The `dst1` convention
//! keeps the formal last term `sin(pi m) = 0`: the final input entry is
//! ignored and the final output entry is zero. The fast paths realise both
//! transforms through a symmetric extension and a complex FFT, so arbitrary
//! composite lengths are supported.

use ndarray::{ArrayD, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::error::{GrfError, Result};

/// The 1-D transform applied along one axis of a tensor grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisTransformKind {
    /// DCT-I: cosine basis, homogeneous Neumann boundary behaviour.
    Dct1,
    /// DST-I: sine basis, homogeneous Dirichlet boundary behaviour.
    Dst1,
    /// Complex DFT: periodic boundary behaviour.
    Fft,
}

fn make_fft(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft(len, direction)
}

/// Unnormalised forward DFT of a complex buffer (in place).
pub fn fft_forward(data: &mut [Complex64]) {
    make_fft(data.len(), FftDirection::Forward).process(data);
}

/// Unnormalised inverse DFT of a complex buffer (in place); the caller
/// divides by the length where a true inverse is needed.
pub fn fft_inverse(data: &mut [Complex64]) {
    make_fft(data.len(), FftDirection::Inverse).process(data);
}

/// Reusable DCT-I plan for a fixed length.
pub struct Dct1Plan {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dct1Plan {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(GrfError::Size(format!("DCT-I needs length >= 2, got {len}")));
        }
        Ok(Self { len, fft: make_fft(2 * (len - 1), FftDirection::Forward) })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// y[m] = sum_k x[k] cos(pi m k / (len-1)).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len);
        let n = self.len;
        let ext = 2 * (n - 1);
        let mut buf: Vec<Complex64> = Vec::with_capacity(ext);
        buf.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
        for k in (1..n - 1).rev() {
            buf.push(Complex64::new(x[k], 0.0));
        }
        self.fft.process(&mut buf);
        // FFT of the even extension gives Y[m] = 2 y[m] - x[0] - (-1)^m x[n-1].
        let first = x[0];
        let last = x[n - 1];
        (0..n)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                0.5 * (buf[m].re + first + sign * last)
            })
            .collect()
    }
}

/// Reusable standard DST-I plan (denominator `len + 1`), the self-inverse
/// core used by [`Dst1Plan`].
pub struct Dst1CorePlan {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst1CorePlan {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(GrfError::Size("DST-I needs a nonempty input".into()));
        }
        Ok(Self { len, fft: make_fft(2 * (len + 1), FftDirection::Forward) })
    }

    /// y[m] = sum_k x[k] sin(pi (m+1)(k+1) / (len+1)), 0-based storage.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len);
        let n = self.len;
        let ext = 2 * (n + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); ext];
        for (k, &v) in x.iter().enumerate() {
            buf[k + 1] = Complex64::new(v, 0.0);
            buf[ext - 1 - k] = Complex64::new(-v, 0.0);
        }
        self.fft.process(&mut buf);
        // Odd extension: Y[m] = -2i y[m].
        (1..=n).map(|m| -0.5 * buf[m].im).collect()
    }
}

/// Reusable DST-I plan in the sum convention above (denominator `len`,
/// last output identically zero).
pub struct Dst1Plan {
    len: usize,
    core: Option<Dst1CorePlan>,
}

impl Dst1Plan {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(GrfError::Size("DST-I needs a nonempty input".into()));
        }
        let core = if len >= 2 { Some(Dst1CorePlan::new(len - 1)?) } else { None };
        Ok(Self { len, core })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// y[m] = sum_{k=1}^{len} x[k] sin(pi m k / len), with x, y stored
    /// 0-based; x[len-1] multiplies sin(pi m) and never contributes.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len);
        match &self.core {
            None => vec![0.0],
            Some(core) => {
                let mut out = core.apply(&x[..self.len - 1]);
                out.push(0.0);
                out
            }
        }
    }
}

/// One-shot DCT-I.
pub fn dct1(x: &[f64]) -> Result<Vec<f64>> {
    Ok(Dct1Plan::new(x.len())?.apply(x))
}

/// One-shot DST-I in the paper-sum convention (denominator = length).
pub fn dst1(x: &[f64]) -> Result<Vec<f64>> {
    Ok(Dst1Plan::new(x.len())?.apply(x))
}

/// One-shot standard DST-I (denominator = length + 1).
pub fn dst1_core(x: &[f64]) -> Result<Vec<f64>> {
    Ok(Dst1CorePlan::new(x.len())?.apply(x))
}

/// Per-axis transform plan for a d-dimensional array.
///
/// Transforms along different axes commute, so the apply order is
/// immaterial; axes are processed first to last.
pub struct TensorPlan {
    axes: Vec<(usize, AxisTransformKind)>,
}

impl TensorPlan {
    pub fn new(axes: Vec<(usize, AxisTransformKind)>) -> Result<Self> {
        for &(len, kind) in &axes {
            match kind {
                AxisTransformKind::Dct1 if len < 2 => {
                    return Err(GrfError::Size(format!("DCT-I axis length {len} < 2")));
                }
                AxisTransformKind::Dst1 | AxisTransformKind::Fft if len == 0 => {
                    return Err(GrfError::Size("zero-length axis".into()));
                }
                _ => {}
            }
        }
        Ok(Self { axes })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(|&(len, _)| len).collect()
    }

    fn check_shape(&self, shape: &[usize]) -> Result<()> {
        let expected = self.dims();
        if shape != expected.as_slice() {
            return Err(GrfError::ShapeMismatch { expected, got: shape.to_vec() });
        }
        Ok(())
    }

    /// Apply the per-axis transforms to a real array. FFT axes are not
    /// representable on real data; use [`TensorPlan::apply_complex`].
    pub fn apply_real(&self, data: &mut ArrayD<f64>) -> Result<()> {
        self.check_shape(data.shape())?;
        for (axis, &(len, kind)) in self.axes.iter().enumerate() {
            match kind {
                AxisTransformKind::Dct1 => {
                    let plan = Dct1Plan::new(len)?;
                    for mut lane in data.lanes_mut(Axis(axis)) {
                        let x: Vec<f64> = lane.iter().copied().collect();
                        let y = plan.apply(&x);
                        for (dst, v) in lane.iter_mut().zip(y) {
                            *dst = v;
                        }
                    }
                }
                AxisTransformKind::Dst1 => {
                    let plan = Dst1Plan::new(len)?;
                    for mut lane in data.lanes_mut(Axis(axis)) {
                        let x: Vec<f64> = lane.iter().copied().collect();
                        let y = plan.apply(&x);
                        for (dst, v) in lane.iter_mut().zip(y) {
                            *dst = v;
                        }
                    }
                }
                AxisTransformKind::Fft => {
                    return Err(GrfError::Unsupported(
                        "FFT axis on a real array; use apply_complex".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Apply the per-axis transforms to a complex array; FFT axes use the
    /// unnormalised forward DFT, trigonometric axes act on the real and
    /// imaginary parts independently.
    pub fn apply_complex(&self, data: &mut ArrayD<Complex64>) -> Result<()> {
        self.check_shape(data.shape())?;
        for (axis, &(len, kind)) in self.axes.iter().enumerate() {
            match kind {
                AxisTransformKind::Fft => {
                    let fft = make_fft(len, FftDirection::Forward);
                    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                    for mut lane in data.lanes_mut(Axis(axis)) {
                        let mut x: Vec<Complex64> = lane.iter().copied().collect();
                        fft.process_with_scratch(&mut x, &mut scratch);
                        for (dst, v) in lane.iter_mut().zip(x) {
                            *dst = v;
                        }
                    }
                }
                AxisTransformKind::Dct1 | AxisTransformKind::Dst1 => {
                    let apply: Box<dyn Fn(&[f64]) -> Vec<f64>> = match kind {
                        AxisTransformKind::Dct1 => {
                            let plan = Dct1Plan::new(len)?;
                            Box::new(move |x| plan.apply(x))
                        }
                        _ => {
                            let plan = Dst1Plan::new(len)?;
                            Box::new(move |x| plan.apply(x))
                        }
                    };
                    for mut lane in data.lanes_mut(Axis(axis)) {
                        let re: Vec<f64> = lane.iter().map(|c| c.re).collect();
                        let im: Vec<f64> = lane.iter().map(|c| c.im).collect();
                        let yre = apply(&re);
                        let yim = apply(&im);
                        for (dst, (r, i)) in lane.iter_mut().zip(yre.into_iter().zip(yim)) {
                            *dst = Complex64::new(r, i);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
