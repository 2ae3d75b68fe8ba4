//! Dilated cross-correlation with "same" zero padding.
//!
//! A 1D input `[B, C, W]` is handled as a 2D input of height 1 with a kernel
//! of height 1, so both cases share one im2col layout and one matrix product.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Param, Tensor};

#[derive(Debug, Clone)]
pub struct Conv {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    /// 1 or 2 spatial dimensions.
    pub spatial_dims: usize,
    /// `[out, in, k]` or `[out, in, k, k]`
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

/// Extents of one tap's valid region along an axis: output index `p` reads
/// input index `p + shift` for `p` in `lo..hi`.
#[inline]
fn valid_range(len: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (len as isize - shift).min(len as isize).max(0) as usize;
    (lo.min(hi), hi)
}

impl Conv {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        dilation: usize,
        spatial_dims: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let taps = kernel.pow(spatial_dims as u32);
        let bound = 1.0 / ((in_channels * taps) as f64).sqrt();
        let weight = (0..out_channels * in_channels * taps)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        let bias = (0..out_channels).map(|_| rng.gen_range(-bound..bound)).collect();
        Self::from_params(in_channels, out_channels, kernel, dilation, spatial_dims, weight, bias)
    }

    pub fn from_params(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        dilation: usize,
        spatial_dims: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if kernel % 2 == 0 || dilation == 0 || !(1..=2).contains(&spatial_dims) {
            return Err(Error::Config(format!(
                "convolution needs an odd kernel, positive dilation and 1 or 2 spatial dims; got kernel {kernel}, dilation {dilation}, dims {spatial_dims}"
            )));
        }
        let taps = kernel.pow(spatial_dims as u32);
        if weight.len() != out_channels * in_channels * taps || bias.len() != out_channels {
            return Err(Error::Shape("convolution parameter sizes".into()));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            dilation,
            spatial_dims,
            weight: Param::new(weight),
            bias: Param::new(bias),
            cache: None,
        })
    }

    fn kernel_hw(&self) -> (usize, usize) {
        if self.spatial_dims == 1 {
            (1, self.kernel)
        } else {
            (self.kernel, self.kernel)
        }
    }

    /// `(height, width)` of the input's spatial part.
    fn plane(&self, x: &Tensor) -> Result<(usize, usize)> {
        let s = x.shape();
        if s.len() != 2 + self.spatial_dims || s[1] != self.in_channels {
            return Err(Error::Shape(format!(
                "convolution expects [batch, {}, {}D spatial], got {s:?}",
                self.in_channels, self.spatial_dims
            )));
        }
        Ok(if self.spatial_dims == 1 { (1, s[2]) } else { (s[2], s[3]) })
    }

    /// Iterates over every tap as `(tap index, row shift, column shift)`.
    fn taps(&self) -> impl Iterator<Item = (usize, isize, isize)> {
        let (kh, kw) = self.kernel_hw();
        let d = self.dilation as isize;
        let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
        (0..kh).flat_map(move |ty| {
            (0..kw).map(move |tx| (ty * kw + tx, (ty as isize - ch) * d, (tx as isize - cw) * d))
        })
    }

    fn output_shape(&self, x: &Tensor) -> Vec<usize> {
        let mut shape = x.shape().to_vec();
        shape[1] = self.out_channels;
        shape
    }

    /// Unrolls one batch item into a `[cin · taps, h · w]` matrix whose row
    /// `i · taps + t` holds channel `i` shifted by tap `t`, zero outside.
    fn im2col(&self, item: &[f64], h: usize, w: usize, taps: &[(usize, isize, isize)], cols: &mut [f64]) {
        let plane = h * w;
        cols.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.in_channels {
            let xi = &item[i * plane..(i + 1) * plane];
            for &(t, sy, sx) in taps {
                let dst = &mut cols[(i * taps.len() + t) * plane..][..plane];
                let (y0, y1) = valid_range(h, sy);
                let (x0, x1) = valid_range(w, sx);
                if x0 == x1 {
                    continue;
                }
                for row in y0..y1 {
                    let src = ((row as isize + sy) as usize) * w + (x0 as isize + sx) as usize;
                    dst[row * w + x0..row * w + x1].copy_from_slice(&xi[src..src + (x1 - x0)]);
                }
            }
        }
    }

    /// Adjoint of [`im2col`](Self::im2col): accumulates the columns back
    /// into an input-shaped gradient.
    fn col2im(&self, cols: &[f64], h: usize, w: usize, taps: &[(usize, isize, isize)], item: &mut [f64]) {
        let plane = h * w;
        for i in 0..self.in_channels {
            let xi = &mut item[i * plane..(i + 1) * plane];
            for &(t, sy, sx) in taps {
                let src = &cols[(i * taps.len() + t) * plane..][..plane];
                let (y0, y1) = valid_range(h, sy);
                let (x0, x1) = valid_range(w, sx);
                if x0 == x1 {
                    continue;
                }
                for row in y0..y1 {
                    let dst = ((row as isize + sy) as usize) * w + (x0 as isize + sx) as usize;
                    for (d, s) in xi[dst..dst + (x1 - x0)].iter_mut().zip(&src[row * w + x0..row * w + x1]) {
                        *d += s;
                    }
                }
            }
        }
    }

    /// Every batch item is an independent matrix product
    /// `W [cout, cin · taps] × cols [cin · taps, h · w]`.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let (h, w) = self.plane(x)?;
        let plane = h * w;
        let taps: Vec<_> = self.taps().collect();
        let k = self.in_channels * taps.len();
        let (cin, cout) = (self.in_channels, self.out_channels);
        let mut out = Tensor::zeros(self.output_shape(x));
        let mut cols = vec![0.0; k * plane];
        let out_data = out.data_mut();
        for b in 0..x.batch() {
            self.im2col(&x.data()[b * cin * plane..(b + 1) * cin * plane], h, w, &taps, &mut cols);
            let yb = &mut out_data[b * cout * plane..(b + 1) * cout * plane];
            for (o, row) in yb.chunks_exact_mut(plane).enumerate() {
                row.iter_mut().for_each(|v| *v = self.bias.value[o]);
            }
            // SAFETY: the pointers cover cout × k, k × plane and cout × plane
            // row-major matrices with the strides given.
            unsafe {
                matrixmultiply::dgemm(
                    cout,
                    k,
                    plane,
                    1.0,
                    self.weight.value.as_ptr(),
                    k as isize,
                    1,
                    cols.as_ptr(),
                    plane as isize,
                    1,
                    1.0,
                    yb.as_mut_ptr(),
                    plane as isize,
                    1,
                );
            }
        }
        Ok(out)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let x = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Shape("convolution backward without forward".into()))?;
        let (h, w) = self.plane(x)?;
        if grad.shape() != self.output_shape(x).as_slice() {
            return Err(Error::Shape(format!(
                "convolution upstream gradient {:?}",
                grad.shape()
            )));
        }
        let plane = h * w;
        let taps: Vec<_> = self.taps().collect();
        let k = self.in_channels * taps.len();
        let (cin, cout) = (self.in_channels, self.out_channels);
        let mut dx = Tensor::zeros(x.shape().to_vec());
        let mut cols = vec![0.0; k * plane];
        let mut dcols = vec![0.0; k * plane];
        for b in 0..x.batch() {
            let gb = grad.item(b);
            for (o, row) in gb.chunks_exact(plane).enumerate() {
                self.bias.grad[o] += row.iter().sum::<f64>();
            }
            self.im2col(x.item(b), h, w, &taps, &mut cols);
            // SAFETY: dW [cout, k] += dY [cout, plane] × colsᵀ [plane, k] and
            // dcols [k, plane] = Wᵀ [k, cout] × dY [cout, plane], expressed
            // through strides over row-major buffers of matching size.
            unsafe {
                matrixmultiply::dgemm(
                    cout,
                    plane,
                    k,
                    1.0,
                    gb.as_ptr(),
                    plane as isize,
                    1,
                    cols.as_ptr(),
                    1,
                    plane as isize,
                    1.0,
                    self.weight.grad.as_mut_ptr(),
                    k as isize,
                    1,
                );
                matrixmultiply::dgemm(
                    k,
                    cout,
                    plane,
                    1.0,
                    self.weight.value.as_ptr(),
                    1,
                    k as isize,
                    gb.as_ptr(),
                    plane as isize,
                    1,
                    0.0,
                    dcols.as_mut_ptr(),
                    plane as isize,
                    1,
                );
            }
            self.col2im(&dcols, h, w, &taps, &mut dx.data_mut()[b * cin * plane..(b + 1) * cin * plane]);
        }
        Ok(dx)
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }
}
