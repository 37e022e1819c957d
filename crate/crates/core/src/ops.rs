//! Network kernels with their exact reverse-mode gradients.
//!
//! Convolutions are cross-correlations with stride 1 and zero "same"
//! padding.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{Scalar, Tensor4};
use crate::{Error, Result};

/// Square convolution weights `(out, in, k, k)` with one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T = f32> {
    pub kernel: Tensor4<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn zeros(out_channels: usize, in_channels: usize, k: usize) -> Self {
        assert!(k % 2 == 1, "kernel size must be odd, got {k}");
        Self {
            kernel: Tensor4::zeros([out_channels, in_channels, k, k]),
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn new(kernel: Tensor4<T>, bias: Vec<T>) -> Result<Self> {
        let [out, _, kh, kw] = kernel.dims();
        if kh != kw || kh % 2 == 0 {
            return Err(Error::ShapeMismatch(format!("kernel must be square and odd, got {kh}x{kw}")));
        }
        if bias.len() != out {
            return Err(Error::ShapeMismatch(format!("{} biases for {out} output channels", bias.len())));
        }
        Ok(Self { kernel, bias })
    }

    /// He-normal weights, `std = sqrt(2 / (in * k * k))`, zero biases.
    pub fn he_normal(out_channels: usize, in_channels: usize, k: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(out_channels, in_channels, k);
        let std = (2.0 / p.fan_in() as f64).sqrt();
        let dist = Normal::new(0.0, std).expect("finite std");
        for w in p.kernel.data_mut() {
            *w = T::from_f64(dist.sample(rng));
        }
        p
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.dims()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.dims()[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.dims()[2]
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels() * self.kernel_size() * self.kernel_size()
    }

    pub fn cast<U: Scalar>(&self) -> ConvParams<U> {
        ConvParams {
            kernel: self.kernel.cast(),
            bias: self.bias.iter().map(|b| U::from_f64(b.as_f64())).collect(),
        }
    }
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T = f32> {
    pub input: Option<Tensor4<T>>,
    pub params: ConvParams<T>,
}

/// A `(channels, h, w)` sample copied into zero-bordered planes of
/// `(h + k - 1) x (w + k - 1)`.
///
/// In this layout the input under tap `(ky, kx)` for every output pixel is
/// the contiguous run `plane[ky * wp + kx..][..span]`, where output `(y, x)`
/// sits at `y * wp + x`. The `wp - w` columns between output rows are
/// computed and then discarded.
struct Padded<T> {
    data: Vec<T>,
    wp: usize,
    plane: usize,
    span: usize,
}

impl<T: Scalar> Padded<T> {
    fn new(x: &[T], channels: usize, h: usize, w: usize, k: usize) -> Self {
        let pad = k / 2;
        let wp = w + 2 * pad;
        let plane = (h + 2 * pad) * wp;
        let mut data = vec![T::zero(); channels * plane];
        for c in 0..channels {
            for y in 0..h {
                let dst = c * plane + (y + pad) * wp + pad;
                data[dst..dst + w].copy_from_slice(&x[(c * h + y) * w..][..w]);
            }
        }
        Self {
            data,
            wp,
            plane,
            span: (h - 1) * wp + w,
        }
    }

    fn tap(&self, c: usize, ky: usize, kx: usize) -> &[T] {
        &self.data[c * self.plane + ky * self.wp + kx..][..self.span]
    }
}

/// `y += a x`.
#[inline]
fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (d, &s) in y.iter_mut().zip(x) {
        *d = *d + a * s;
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    // Independent lanes let the compiler vectorise the reduction.
    let mut acc = [T::zero(); 8];
    let (a8, b8) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (a8.remainder(), b8.remainder());
    for (ca, cb) in a8.zip(b8) {
        for l in 0..8 {
            acc[l] = acc[l] + ca[l] * cb[l];
        }
    }
    let tail = ra.iter().zip(rb).fold(T::zero(), |s, (&u, &v)| s + u * v);
    acc.iter().fold(tail, |s, &v| s + v)
}

fn check_conv_input<T: Scalar>(x: &Tensor4<T>, p: &ConvParams<T>) -> Result<()> {
    if x.channels() != p.in_channels() {
        return Err(Error::ShapeMismatch(format!(
            "conv expects {} input channels, got {}",
            p.in_channels(),
            x.channels()
        )));
    }
    Ok(())
}

/// Same-padded stride-1 cross-correlation plus per-channel bias.
pub fn conv2d_forward<T: Scalar>(x: &Tensor4<T>, p: &ConvParams<T>) -> Result<Tensor4<T>> {
    check_conv_input(x, p)?;
    let [n, c, h, w] = x.dims();
    let (out_c, k) = (p.out_channels(), p.kernel_size());
    let weights = p.kernel.data();
    let mut out = Tensor4::zeros([n, out_c, h, w]);
    for b in 0..n {
        let xp = Padded::new(x.sample(b), c, h, w, k);
        let mut acc = vec![T::zero(); out_c * xp.span];
        for ci in 0..c {
            for ky in 0..k {
                for kx in 0..k {
                    let src = xp.tap(ci, ky, kx);
                    for (o, row) in acc.chunks_exact_mut(xp.span).enumerate() {
                        axpy(row, weights[((o * c + ci) * k + ky) * k + kx], src);
                    }
                }
            }
        }
        let y = out.sample_mut(b);
        for o in 0..out_c {
            for r in 0..h {
                let src = &acc[o * xp.span + r * xp.wp..][..w];
                for (d, &s) in y[(o * h + r) * w..][..w].iter_mut().zip(src) {
                    *d = s + p.bias[o];
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`] given the upstream gradient `grad_out`.
pub fn conv2d_backward<T: Scalar>(x: &Tensor4<T>, p: &ConvParams<T>, grad_out: &Tensor4<T>) -> Result<ConvGrads<T>> {
    conv2d_backward_impl(x, p, grad_out, true)
}

pub(crate) fn conv2d_backward_impl<T: Scalar>(
    x: &Tensor4<T>,
    p: &ConvParams<T>,
    grad_out: &Tensor4<T>,
    want_input: bool,
) -> Result<ConvGrads<T>> {
    check_conv_input(x, p)?;
    let [n, c, h, w] = x.dims();
    let (out_c, k) = (p.out_channels(), p.kernel_size());
    if grad_out.dims() != [n, out_c, h, w] {
        return Err(Error::ShapeMismatch(format!(
            "conv gradient {:?}, expected {:?}",
            grad_out.dims(),
            [n, out_c, h, w]
        )));
    }
    let weights = p.kernel.data();
    let mut grads = ConvParams::zeros(out_c, c, k);
    let mut grad_x = want_input.then(|| Tensor4::zeros(x.dims()));
    for b in 0..n {
        let xp = Padded::new(x.sample(b), c, h, w, k);
        let (wp, span) = (xp.wp, xp.span);
        // Upstream gradient in the padded row stride, zero between rows.
        let mut g = vec![T::zero(); out_c * span];
        for o in 0..out_c {
            let plane = grad_out.plane(b, o);
            for r in 0..h {
                g[o * span + r * wp..][..w].copy_from_slice(&plane[r * w..][..w]);
            }
            grads.bias[o] = plane.iter().fold(grads.bias[o], |acc, &v| acc + v);
        }
        let mut gxp = want_input.then(|| vec![T::zero(); c * xp.plane]);
        let gk = grads.kernel.data_mut();
        for ci in 0..c {
            for ky in 0..k {
                for kx in 0..k {
                    let src = xp.tap(ci, ky, kx);
                    for (o, go) in g.chunks_exact(span).enumerate() {
                        let wi = ((o * c + ci) * k + ky) * k + kx;
                        gk[wi] = gk[wi] + dot(go, src);
                    }
                    if let Some(gxp) = gxp.as_mut() {
                        let dst = &mut gxp[ci * xp.plane + ky * wp + kx..][..span];
                        for (o, go) in g.chunks_exact(span).enumerate() {
                            axpy(dst, weights[((o * c + ci) * k + ky) * k + kx], go);
                        }
                    }
                }
            }
        }
        if let (Some(gx), Some(gxp)) = (grad_x.as_mut(), gxp) {
            let pad = k / 2;
            let dst = gx.sample_mut(b);
            for ci in 0..c {
                for r in 0..h {
                    dst[(ci * h + r) * w..][..w].copy_from_slice(&gxp[ci * xp.plane + (r + pad) * wp + pad..][..w]);
                }
            }
        }
    }
    Ok(ConvGrads {
        input: grad_x,
        params: grads,
    })
}

pub fn relu_forward<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = v.max(T::zero());
    }
    out
}

/// Passes `grad_out` where `x > 0`. Also valid with the forward output in
/// place of `x`, since both are positive at the same positions.
pub fn relu_backward<T: Scalar>(x: &Tensor4<T>, grad_out: &Tensor4<T>) -> Result<Tensor4<T>> {
    x.check_same_shape(grad_out, "relu backward")?;
    let mut grad = grad_out.clone();
    for (g, &v) in grad.data_mut().iter_mut().zip(x.data()) {
        if v <= T::zero() {
            *g = T::zero();
        }
    }
    Ok(grad)
}

/// Stacks tensors along the channel axis.
pub fn concat_channels<T: Scalar>(parts: &[&Tensor4<T>]) -> Result<Tensor4<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
    let [n, _, h, w] = first.dims();
    for part in parts {
        let [pn, _, ph, pw] = part.dims();
        if (pn, ph, pw) != (n, h, w) {
            return Err(Error::ShapeMismatch(format!(
                "concat part {:?} does not match {:?}",
                part.dims(),
                first.dims()
            )));
        }
    }
    let channels: usize = parts.iter().map(|p| p.channels()).sum();
    let mut data = Vec::with_capacity(n * channels * h * w);
    for b in 0..n {
        for part in parts {
            data.extend_from_slice(part.sample(b));
        }
    }
    Tensor4::from_vec([n, channels, h, w], data)
}

/// Splits along the channel axis into consecutive groups of the given sizes;
/// the backward pass of [`concat_channels`].
pub fn split_channels<T: Scalar>(x: &Tensor4<T>, sizes: &[usize]) -> Result<Vec<Tensor4<T>>> {
    if sizes.iter().sum::<usize>() != x.channels() || sizes.contains(&0) {
        return Err(Error::ShapeMismatch(format!(
            "cannot split {} channels into {sizes:?}",
            x.channels()
        )));
    }
    let [n, _, h, w] = x.dims();
    let plane = h * w;
    let mut parts: Vec<Vec<T>> = sizes.iter().map(|&s| Vec::with_capacity(n * s * plane)).collect();
    for b in 0..n {
        let mut offset = 0;
        for (part, &s) in parts.iter_mut().zip(sizes) {
            part.extend_from_slice(&x.sample(b)[offset * plane..(offset + s) * plane]);
            offset += s;
        }
    }
    parts
        .into_iter()
        .zip(sizes)
        .map(|(data, &s)| Tensor4::from_vec([n, s, h, w], data))
        .collect()
}

/// `0.5 * sum (pred - target)^2` and its gradient `pred - target`.
pub fn mse<T: Scalar>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<(T, Tensor4<T>)> {
    pred.check_same_shape(target, "mse")?;
    let mut grad = pred.clone();
    let mut sum = 0.0f64;
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        *g = *g - t;
        sum += g.as_f64() * g.as_f64();
    }
    Ok((T::from_f64(0.5 * sum), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::check_gradients;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(dims: [usize; 4], rng: &mut impl Rng) -> Tensor4<f64> {
        Tensor4::from_fn(dims, |_| rng.random_range(-1.0..1.0))
    }

    fn random_conv(out: usize, inp: usize, k: usize, rng: &mut impl Rng) -> ConvParams<f64> {
        ConvParams::new(random([out, inp, k, k], rng), (0..out).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    /// Six nested loops, straight from the definition.
    fn naive_conv(x: &Tensor4<f64>, p: &ConvParams<f64>) -> Tensor4<f64> {
        let [n, c, h, w] = x.dims();
        let (oc, k) = (p.out_channels(), p.kernel_size());
        let pad = (k / 2) as isize;
        Tensor4::from_fn([n, oc, h, w], |[b, o, y, xx]| {
            let mut acc = p.bias[o];
            for i in 0..c {
                for ky in 0..k {
                    for kx in 0..k {
                        let sy = y as isize + ky as isize - pad;
                        let sx = xx as isize + kx as isize - pad;
                        if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                            acc += p.kernel.at([o, i, ky, kx]) * x.at([b, i, sy as usize, sx as usize]);
                        }
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn unit_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random([2, 1, 4, 5], &mut rng);
        let p = ConvParams::new(Tensor4::filled([1, 1, 1, 1], 1.0), vec![0.0]).unwrap();
        assert_eq!(conv2d_forward(&x, &p).unwrap(), x);
        let g = random([2, 1, 4, 5], &mut rng);
        let grads = conv2d_backward(&x, &p, &g).unwrap();
        assert_eq!(grads.input.unwrap(), g);
    }

    #[test]
    fn zero_weights_give_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random([1, 3, 5, 5], &mut rng);
        let mut p = ConvParams::<f64>::zeros(2, 3, 3);
        p.bias = vec![0.25, 0.25];
        assert!(conv2d_forward(&x, &p).unwrap().data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random([2, 3, 6, 6], &mut rng);
        let p = random_conv(4, 3, 3, &mut rng);
        let fast = conv2d_forward(&x, &p).unwrap();
        let slow = naive_conv(&x, &p);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-6);
        }
        for k in [5, 7] {
            let p = random_conv(2, 3, k, &mut rng);
            let x = random([1, 3, 4, 9], &mut rng);
            let fast = conv2d_forward(&x, &p).unwrap();
            assert_eq!(fast.dims(), [1, 2, 4, 9]);
            for (a, b) in fast.data().iter().zip(naive_conv(&x, &p).data()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn thin_and_non_square_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for dims in [[1, 3, 1, 9], [2, 2, 7, 1], [1, 2, 13, 5], [1, 1, 2, 2]] {
            let x = random(dims, &mut rng);
            let p = random_conv(2, dims[1], 7, &mut rng);
            let fast = conv2d_forward(&x, &p).unwrap();
            let slow = naive_conv(&x, &p);
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-9, "{dims:?}");
            }
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let x = Tensor4::<f64>::zeros([1, 2, 3, 3]);
        let p = ConvParams::<f64>::zeros(1, 3, 3);
        assert!(matches!(conv2d_forward(&x, &p), Err(Error::ShapeMismatch(_))));
        let bad_grad = Tensor4::<f64>::zeros([1, 2, 3, 3]);
        let p = ConvParams::<f64>::zeros(1, 2, 3);
        assert!(conv2d_backward(&x, &p, &bad_grad).is_err());
    }

    #[test]
    fn zero_upstream_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random([1, 2, 4, 4], &mut rng);
        let p = random_conv(3, 2, 5, &mut rng);
        let grads = conv2d_backward(&x, &p, &Tensor4::zeros([1, 3, 4, 4])).unwrap();
        assert!(grads.input.unwrap().data().iter().all(|&v| v == 0.0));
        assert!(grads.params.kernel.data().iter().all(|&v| v == 0.0));
        assert!(grads.params.bias.iter().all(|&v| v == 0.0));
    }

    /// Scalar probe `L = sum(r * conv(x))` with a fixed random `r`.
    fn probe(x: &Tensor4<f64>, p: &ConvParams<f64>, r: &Tensor4<f64>) -> f64 {
        conv2d_forward(x, p).unwrap().data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in [1, 3, 5, 7] {
            let x = random([2, 2, 5, 6], &mut rng);
            let p = random_conv(3, 2, k, &mut rng);
            let r = random([2, 3, 5, 6], &mut rng);
            let grads = conv2d_backward(&x, &p, &r).unwrap();

            let report = check_gradients(
                |v| probe(&Tensor4::from_vec(x.dims(), v.to_vec()).unwrap(), &p, &r),
                x.data(),
                grads.input.as_ref().unwrap().data(),
                1e-4,
                1e-4,
            )
            .unwrap();
            assert!(report.passed, "input grad k={k}: {report:?}");

            let report = check_gradients(
                |v| {
                    let q = ConvParams::new(Tensor4::from_vec(p.kernel.dims(), v.to_vec()).unwrap(), p.bias.clone()).unwrap();
                    probe(&x, &q, &r)
                },
                p.kernel.data(),
                grads.params.kernel.data(),
                1e-4,
                1e-4,
            )
            .unwrap();
            assert!(report.passed, "kernel grad k={k}: {report:?}");

            let report = check_gradients(
                |v| probe(&x, &ConvParams::new(p.kernel.clone(), v.to_vec()).unwrap(), &r),
                &p.bias,
                &grads.params.bias,
                1e-4,
                1e-4,
            )
            .unwrap();
            assert!(report.passed, "bias grad k={k}: {report:?}");
        }
    }

    #[test]
    fn conv_is_linear_in_input_and_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (a, b) = (0.7, -1.3);
        for k in [3, 5, 7] {
            let mut p = random_conv(2, 3, k, &mut rng);
            p.bias = vec![0.0; 2];
            let x = random([1, 3, 7, 7], &mut rng);
            let y = random([1, 3, 7, 7], &mut rng);
            let mix = Tensor4::from_vec(x.dims(), x.data().iter().zip(y.data()).map(|(u, v)| a * u + b * v).collect()).unwrap();
            let lhs = conv2d_forward(&mix, &p).unwrap();
            let (cx, cy) = (conv2d_forward(&x, &p).unwrap(), conv2d_forward(&y, &p).unwrap());
            for i in 0..lhs.len() {
                assert!((lhs.data()[i] - (a * cx.data()[i] + b * cy.data()[i])).abs() < 1e-6);
            }

            let q = random_conv(2, 3, k, &mut rng);
            let kmix = ConvParams::new(
                Tensor4::from_vec(p.kernel.dims(), p.kernel.data().iter().zip(q.kernel.data()).map(|(u, v)| a * u + b * v).collect()).unwrap(),
                vec![0.0; 2],
            )
            .unwrap();
            let q0 = ConvParams::new(q.kernel.clone(), vec![0.0; 2]).unwrap();
            let lhs = conv2d_forward(&x, &kmix).unwrap();
            let (cp, cq) = (conv2d_forward(&x, &p).unwrap(), conv2d_forward(&x, &q0).unwrap());
            for i in 0..lhs.len() {
                assert!((lhs.data()[i] - (a * cp.data()[i] + b * cq.data()[i])).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn relu_examples() {
        let pos = Tensor4::<f64>::from_vec([1, 1, 1, 3], vec![0.5, 1.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&pos), pos);
        let neg = Tensor4::<f64>::from_vec([1, 1, 1, 3], vec![-0.5, -1.0, 0.0]).unwrap();
        assert!(relu_forward(&neg).data().iter().all(|&v| v == 0.0));
        let g = Tensor4::filled([1, 1, 1, 3], 1.0);
        assert!(relu_backward(&neg, &g).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_gradient_away_from_kink() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Tensor4::<f64>::from_fn([1, 2, 4, 4], |_| {
            let v: f64 = rng.random_range(1e-3..1.0);
            if rng.random() { v } else { -v }
        });
        let r = random([1, 2, 4, 4], &mut rng);
        let grad = relu_backward(&x, &r).unwrap();
        let report = check_gradients(
            |v| {
                relu_forward(&Tensor4::from_vec(x.dims(), v.to_vec()).unwrap())
                    .data()
                    .iter()
                    .zip(r.data())
                    .map(|(a, b)| a * b)
                    .sum()
            },
            x.data(),
            grad.data(),
            1e-4,
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn concat_and_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random([2, 3, 2, 2], &mut rng);
        let b = random([2, 5, 2, 2], &mut rng);
        assert_eq!(concat_channels(&[&a]).unwrap(), a);
        let ab = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(ab.channels(), 8);
        assert_eq!(ab.at([1, 4, 1, 0]), b.at([1, 1, 1, 0]));
        let parts = split_channels(&ab, &[3, 5]).unwrap();
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
        // backward: splitting a gradient and re-concatenating reproduces it exactly
        let g = random([2, 8, 2, 2], &mut rng);
        let pieces = split_channels(&g, &[3, 5]).unwrap();
        assert_eq!(concat_channels(&[&pieces[0], &pieces[1]]).unwrap(), g);

        let c = random([2, 1, 3, 2], &mut rng);
        assert!(concat_channels(&[&a, &c]).is_err());
        assert!(split_channels(&ab, &[3, 4]).is_err());
    }

    #[test]
    fn mse_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random([1, 1, 2, 2], &mut rng);
        let (v, g) = mse(&p, &p).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.data().iter().all(|&x| x == 0.0));
        let t = Tensor4::from_vec(p.dims(), p.data().iter().map(|v| v - 1.0).collect()).unwrap();
        let (v, g) = mse(&p, &t).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert!(g.data().iter().all(|&x| (x - 1.0).abs() < 1e-12));

        let q = random([2, 2, 3, 3], &mut rng);
        let target = random([2, 2, 3, 3], &mut rng);
        let (_, grad) = mse(&q, &target).unwrap();
        let report = check_gradients(
            |v| mse(&Tensor4::from_vec(q.dims(), v.to_vec()).unwrap(), &target).unwrap().0,
            q.data(),
            grad.data(),
            1e-4,
            1e-6,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
        assert!(mse(&q, &p).is_err());
    }
}
