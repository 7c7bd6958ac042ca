//! 2-d cross-correlation kernels (im2col + GEMM) used by the tape.

use crate::real::{gemm, MatRef, Real};

use super::AutodiffError;

/// Shape bookkeeping for one convolution call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(
        input: [usize; 4],
        kernel: [usize; 4],
        stride: usize,
        padding: usize,
    ) -> Result<Self, AutodiffError> {
        let [batch, in_channels, height, width] = input;
        let [out_channels, k_in, kernel_h, kernel_w] = kernel;
        let err = |detail: String| AutodiffError::Shape { op: "conv2d", detail };
        if stride == 0 {
            return Err(err("stride must be positive".into()));
        }
        if k_in != in_channels {
            return Err(err(format!(
                "input channel axis (1) is {in_channels} but kernel channel axis (1) is {k_in}"
            )));
        }
        if kernel_h == 0 || kernel_w == 0 {
            return Err(err("kernel spatial axes must be non-empty".into()));
        }
        if kernel_h > height + 2 * padding || kernel_w > width + 2 * padding {
            return Err(err(format!(
                "kernel {kernel_h}x{kernel_w} exceeds padded input {}x{} (axes 2,3)",
                height + 2 * padding,
                width + 2 * padding
            )));
        }
        Ok(ConvGeometry {
            batch,
            in_channels,
            height,
            width,
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
            out_h: (height + 2 * padding - kernel_h) / stride + 1,
            out_w: (width + 2 * padding - kernel_w) / stride + 1,
        })
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.batch, self.out_channels, self.out_h, self.out_w]
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    fn in_image(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    fn out_image(&self) -> usize {
        self.out_channels * self.out_plane()
    }
}

/// Unfolds one `[C, H, W]` image into `[C·kh·kw, Ho·Wo]` columns.
fn im2col<T: Real>(g: &ConvGeometry, image: &[T], cols: &mut [T]) {
    let plane = g.out_plane();
    let pad = g.padding as isize;
    for c in 0..g.in_channels {
        let src = &image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let row = (c * g.kernel_h + ki) * g.kernel_w + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - pad;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.height as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src_row = &src[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - pad;
                        *v = if ix < 0 || ix >= g.width as isize {
                            T::zero()
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters columns back into an image, accumulating.
fn col2im<T: Real>(g: &ConvGeometry, cols: &[T], image: &mut [T]) {
    let plane = g.out_plane();
    let pad = g.padding as isize;
    for c in 0..g.in_channels {
        let dst = &mut image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let row = (c * g.kernel_h + ki) * g.kernel_w + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - pad;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst_row = &mut dst[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kj) as isize - pad;
                        if ix >= 0 && ix < g.width as isize {
                            dst_row[ix as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Narrow stride-1 convolutions are faster as shifted row updates than as a
/// matrix product with only a few rows.
const DIRECT_MAX_OUT_CHANNELS: usize = 4;

fn use_direct(g: &ConvGeometry) -> bool {
    g.stride == 1 && g.out_channels <= DIRECT_MAX_OUT_CHANNELS
}

/// Valid output-column range for kernel column `kj` in a stride-1 convolution,
/// with the matching input column offset.
fn column_span(g: &ConvGeometry, kj: usize) -> (usize, usize, isize) {
    let shift = kj as isize - g.padding as isize;
    let lo = (-shift).max(0) as usize;
    let hi = ((g.width as isize - shift).max(0) as usize).min(g.out_w);
    (lo, hi.max(lo), shift)
}

/// Visits every (output row, input row, kernel entry) triple of a stride-1
/// convolution for one image.
fn for_each_tap(g: &ConvGeometry, mut f: impl FnMut(usize, usize, usize, usize, usize, usize)) {
    for co in 0..g.out_channels {
        for ci in 0..g.in_channels {
            for ki in 0..g.kernel_h {
                for kj in 0..g.kernel_w {
                    let widx = ((co * g.in_channels + ci) * g.kernel_h + ki) * g.kernel_w + kj;
                    for oy in 0..g.out_h {
                        let iy = (oy + ki) as isize - g.padding as isize;
                        if iy >= 0 && (iy as usize) < g.height {
                            f(co, ci, widx, kj, oy, iy as usize);
                        }
                    }
                }
            }
        }
    }
}

fn direct_forward<T: Real>(g: &ConvGeometry, image: &[T], kernel: &[T], out: &mut [T]) {
    let plane = g.out_plane();
    let in_plane = g.height * g.width;
    for_each_tap(g, |co, ci, widx, kj, oy, iy| {
        let w = kernel[widx];
        let (lo, hi, shift) = column_span(g, kj);
        let src = &image[ci * in_plane + iy * g.width..][..g.width];
        let dst = &mut out[co * plane + oy * g.out_w..][..g.out_w];
        let src = &src[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
        for (d, &x) in dst[lo..hi].iter_mut().zip(src) {
            *d += w * x;
        }
    });
}

fn direct_backward<T: Real>(
    g: &ConvGeometry,
    image: &[T],
    kernel: &[T],
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dk: Option<&mut [T]>,
) {
    let plane = g.out_plane();
    let in_plane = g.height * g.width;
    for_each_tap(g, |co, ci, widx, kj, oy, iy| {
        let (lo, hi, shift) = column_span(g, kj);
        let (a, b) = ((lo as isize + shift) as usize, (hi as isize + shift) as usize);
        let dy_row = &dy[co * plane + oy * g.out_w..][lo..hi];
        let row = ci * in_plane + iy * g.width;
        if let Some(dx) = dx.as_deref_mut() {
            let w = kernel[widx];
            for (d, &e) in dx[row + a..row + b].iter_mut().zip(dy_row) {
                *d += w * e;
            }
        }
        if let Some(dk) = dk.as_deref_mut() {
            dk[widx] += image[row + a..row + b].iter().zip(dy_row).map(|(&x, &e)| x * e).sum::<T>();
        }
    });
}

pub fn conv2d_forward<T: Real>(g: &ConvGeometry, input: &[T], kernel: &[T], bias: Option<&[T]>) -> Vec<T> {
    let plane = g.out_plane();
    if use_direct(g) {
        let mut out = vec![T::zero(); g.batch * g.out_image()];
        for n in 0..g.batch {
            let dst = &mut out[n * g.out_image()..(n + 1) * g.out_image()];
            if let Some(b) = bias {
                for (co, chunk) in dst.chunks_mut(plane).enumerate() {
                    chunk.fill(b[co]);
                }
            }
            direct_forward(g, &input[n * g.in_image()..(n + 1) * g.in_image()], kernel, dst);
        }
        return out;
    }
    let mut out = vec![T::zero(); g.batch * g.out_image()];
    let mut cols = vec![T::zero(); g.patch_len() * plane];
    let weights = MatRef::new(kernel, g.out_channels, g.patch_len());
    for n in 0..g.batch {
        let dst = &mut out[n * g.out_image()..(n + 1) * g.out_image()];
        if let Some(b) = bias {
            for (co, chunk) in dst.chunks_mut(plane).enumerate() {
                chunk.fill(b[co]);
            }
        }
        im2col(g, &input[n * g.in_image()..(n + 1) * g.in_image()], &mut cols);
        let beta = if bias.is_some() { T::one() } else { T::zero() };
        gemm(weights, MatRef::new(&cols, g.patch_len(), plane), beta, dst);
    }
    out
}

/// Gradients of a convolution with respect to whichever operands need them.
pub struct ConvGrads<T> {
    pub input: Option<Vec<T>>,
    pub kernel: Option<Vec<T>>,
    pub bias: Option<Vec<T>>,
}

pub fn conv2d_backward<T: Real>(
    g: &ConvGeometry,
    input: &[T],
    kernel: &[T],
    grad_out: &[T],
    need: (bool, bool, bool),
) -> ConvGrads<T> {
    let (need_input, need_kernel, need_bias) = need;
    let plane = g.out_plane();
    let patch = g.patch_len();
    let mut d_input = need_input.then(|| vec![T::zero(); g.batch * g.in_image()]);
    let mut d_kernel = need_kernel.then(|| vec![T::zero(); g.out_channels * patch]);
    let d_bias = need_bias.then(|| {
        let mut db = vec![T::zero(); g.out_channels];
        for n in 0..g.batch {
            let dy = &grad_out[n * g.out_image()..(n + 1) * g.out_image()];
            for (co, chunk) in dy.chunks(plane).enumerate() {
                db[co] += chunk.iter().copied().sum::<T>();
            }
        }
        db
    });
    if !(need_input || need_kernel) {
        return ConvGrads { input: None, kernel: None, bias: d_bias };
    }
    if use_direct(g) {
        for n in 0..g.batch {
            direct_backward(
                g,
                &input[n * g.in_image()..(n + 1) * g.in_image()],
                kernel,
                &grad_out[n * g.out_image()..(n + 1) * g.out_image()],
                d_input.as_mut().map(|dx| &mut dx[n * g.in_image()..(n + 1) * g.in_image()]),
                d_kernel.as_deref_mut(),
            );
        }
        return ConvGrads { input: d_input, kernel: d_kernel, bias: d_bias };
    }
    let mut cols = vec![T::zero(); patch * plane];
    for n in 0..g.batch {
        let dy = MatRef::new(&grad_out[n * g.out_image()..(n + 1) * g.out_image()], g.out_channels, plane);
        if let Some(dk) = d_kernel.as_mut() {
            im2col(g, &input[n * g.in_image()..(n + 1) * g.in_image()], &mut cols);
            gemm(dy, MatRef::new(&cols, patch, plane).t(), T::one(), dk);
        }
        if let Some(dx) = d_input.as_mut() {
            gemm(MatRef::new(kernel, g.out_channels, patch).t(), dy, T::zero(), &mut cols);
            col2im(g, &cols, &mut dx[n * g.in_image()..(n + 1) * g.in_image()]);
        }
    }
    ConvGrads { input: d_input, kernel: d_kernel, bias: d_bias }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_size_formula() {
        let g = ConvGeometry::new([1, 3, 32, 32], [8, 3, 4, 4], 2, 1).unwrap();
        assert_eq!(g.output_shape(), [1, 8, 16, 16]);
        let g = ConvGeometry::new([1, 1, 32, 32], [8, 1, 7, 7], 1, 3).unwrap();
        assert_eq!(g.output_shape(), [1, 8, 32, 32]);
    }

    #[test]
    fn rejects_channel_mismatch_and_oversized_kernel() {
        let e = ConvGeometry::new([1, 2, 4, 4], [1, 3, 3, 3], 1, 0).unwrap_err();
        assert!(e.to_string().contains("axis (1)"), "{e}");
        let e = ConvGeometry::new([1, 1, 2, 2], [1, 1, 5, 5], 1, 1).unwrap_err();
        assert!(e.to_string().contains("axes 2,3"), "{e}");
        assert!(ConvGeometry::new([1, 1, 2, 2], [1, 1, 1, 1], 0, 0).is_err());
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let g = ConvGeometry::new([1, 2, 5, 6], [1, 2, 3, 2], 2, 1).unwrap();
        let x: Vec<f64> = (0..g.in_image()).map(|i| (i as f64 * 0.37).sin()).collect();
        let c: Vec<f64> = (0..g.patch_len() * g.out_plane()).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut cols = vec![0.0; c.len()];
        im2col(&g, &x, &mut cols);
        let lhs: f64 = cols.iter().zip(&c).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; x.len()];
        col2im(&g, &c, &mut back);
        let rhs: f64 = back.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
