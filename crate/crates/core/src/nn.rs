//! Neural-net primitives: forward passes and hand-derived reverse-mode
//! backward passes over flat `f64` buffers.
//!
//! Everything is plain scalar code in `f64`. That is deliberate: the
//! model is toy-sized, and double precision makes central finite
//! differences a usable oracle for every backward pass (relative error
//! well below 1e-4), which is how each op in this file is tested.
//!
//! Shape conventions: activations are row-major `[t × d]` (time major),
//! linear weights are `[out × in]`, conv weights `[out × in × k]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// y[t,o] = Σ_i x[t,i]·w[o,i] + b[o]
pub(crate) fn linear_fwd(x: &[f64], t: usize, din: usize, dout: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; t * dout];
    for row in 0..t {
        let xr = &x[row * din..(row + 1) * din];
        let yr = &mut y[row * dout..(row + 1) * dout];
        for o in 0..dout {
            let wr = &w[o * din..(o + 1) * din];
            let mut acc = b[o];
            for i in 0..din {
                acc += xr[i] * wr[i];
            }
            yr[o] = acc;
        }
    }
    y
}

/// Accumulates into `dw`/`db`, returns `dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_bwd(
    x: &[f64],
    t: usize,
    din: usize,
    dout: usize,
    w: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; t * din];
    for row in 0..t {
        let xr = &x[row * din..(row + 1) * din];
        let dyr = &dy[row * dout..(row + 1) * dout];
        let dxr = &mut dx[row * din..(row + 1) * din];
        for o in 0..dout {
            let g = dyr[o];
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            let wr = &w[o * din..(o + 1) * din];
            let dwr = &mut dw[o * din..(o + 1) * din];
            for i in 0..din {
                dxr[i] += g * wr[i];
                dwr[i] += g * xr[i];
            }
        }
    }
    dx
}

pub(crate) const LN_EPS: f64 = 1e-5;

/// Per-row layer norm; returns (y, xhat, rstd) — the latter two feed the
/// backward pass.
pub(crate) fn layernorm_fwd(
    x: &[f64],
    t: usize,
    d: usize,
    gain: &[f64],
    bias: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut y = vec![0.0; t * d];
    let mut xhat = vec![0.0; t * d];
    let mut rstd = vec![0.0; t];
    for row in 0..t {
        let xr = &x[row * d..(row + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let r = 1.0 / math::sqrt(var + LN_EPS);
        rstd[row] = r;
        for i in 0..d {
            let h = (xr[i] - mean) * r;
            xhat[row * d + i] = h;
            y[row * d + i] = gain[i] * h + bias[i];
        }
    }
    (y, xhat, rstd)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn layernorm_bwd(
    t: usize,
    d: usize,
    gain: &[f64],
    xhat: &[f64],
    rstd: &[f64],
    dy: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; t * d];
    for row in 0..t {
        let h = &xhat[row * d..(row + 1) * d];
        let dyr = &dy[row * d..(row + 1) * d];
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_h = 0.0;
        for i in 0..d {
            let dxhat = dyr[i] * gain[i];
            sum_dxhat += dxhat;
            sum_dxhat_h += dxhat * h[i];
            dgain[i] += dyr[i] * h[i];
            dbias[i] += dyr[i];
        }
        let inv_d = 1.0 / d as f64;
        for i in 0..d {
            let dxhat = dyr[i] * gain[i];
            dx[row * d + i] =
                rstd[row] * (dxhat - inv_d * sum_dxhat - h[i] * inv_d * sum_dxhat_h);
        }
    }
    dx
}

/// Exact GELU: x·Φ(x) with the Gaussian CDF, not the tanh approximation.
pub(crate) fn gelu_fwd(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v * math::norm_cdf(v)).collect()
}

pub(crate) fn gelu_bwd(x: &[f64], dy: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(dy)
        .map(|(&v, &g)| g * (math::norm_cdf(v) + v * math::norm_pdf(v)))
        .collect()
}

/// In-place stable softmax of one row.
pub(crate) fn softmax_inplace(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = math::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Multi-head scaled-dot-product attention over already-projected
/// q/k/v, each `[t × width]` with `heads` equal slices. With `causal`,
/// position i attends to j ≤ i only. Returns (ctx, probs); probs is the
/// backward cache, laid out `[head][i][j]` with `j < t` (zeros where
/// masked).
pub(crate) fn attention_fwd(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    t: usize,
    width: usize,
    heads: usize,
    causal: bool,
) -> (Vec<f64>, Vec<f64>) {
    let dh = width / heads;
    let scale = 1.0 / math::sqrt(dh as f64);
    let mut ctx = vec![0.0; t * width];
    let mut probs = vec![0.0; heads * t * t];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..t {
            let limit = if causal { i + 1 } else { t };
            let qrow = &q[i * width + off..i * width + off + dh];
            let prow = &mut probs[(h * t + i) * t..(h * t + i) * t + limit];
            for (j, p) in prow.iter_mut().enumerate() {
                let krow = &k[j * width + off..j * width + off + dh];
                let mut s = 0.0;
                for d in 0..dh {
                    s += qrow[d] * krow[d];
                }
                *p = s * scale;
            }
            softmax_inplace(prow);
            let crow = &mut ctx[i * width + off..i * width + off + dh];
            for (j, p) in prow.iter().enumerate() {
                let vrow = &v[j * width + off..j * width + off + dh];
                for d in 0..dh {
                    crow[d] += p * vrow[d];
                }
            }
        }
    }
    (ctx, probs)
}

/// Backward of [`attention_fwd`]; returns (dq, dk, dv).
#[allow(clippy::too_many_arguments)]
pub(crate) fn attention_bwd(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    t: usize,
    width: usize,
    heads: usize,
    causal: bool,
    probs: &[f64],
    dctx: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dh = width / heads;
    let scale = 1.0 / math::sqrt(dh as f64);
    let mut dq = vec![0.0; t * width];
    let mut dk = vec![0.0; t * width];
    let mut dv = vec![0.0; t * width];
    let mut dscore = vec![0.0; t];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..t {
            let limit = if causal { i + 1 } else { t };
            let prow = &probs[(h * t + i) * t..(h * t + i) * t + limit];
            let dcrow = &dctx[i * width + off..i * width + off + dh];

            // dp[j] = dctx·v[j]; dv[j] += p[j]·dctx
            let mut dot = 0.0;
            for j in 0..limit {
                let vrow = &v[j * width + off..j * width + off + dh];
                let dvrow = &mut dv[j * width + off..j * width + off + dh];
                let mut dp = 0.0;
                for d in 0..dh {
                    dp += dcrow[d] * vrow[d];
                    dvrow[d] += prow[j] * dcrow[d];
                }
                dscore[j] = dp;
                dot += dp * prow[j];
            }
            // softmax jacobian: ds[j] = p[j]·(dp[j] − Σ p·dp)
            let qrow = &q[i * width + off..i * width + off + dh];
            let dqrow_base = i * width + off;
            for j in 0..limit {
                let ds = prow[j] * (dscore[j] - dot) * scale;
                if ds == 0.0 {
                    continue;
                }
                let krow = &k[j * width + off..j * width + off + dh];
                let dkrow = &mut dk[j * width + off..j * width + off + dh];
                for d in 0..dh {
                    dq[dqrow_base + d] += ds * krow[d];
                    dkrow[d] += ds * qrow[d];
                }
            }
        }
    }
    (dq, dk, dv)
}

/// 1-D convolution over the time axis: input `[t × cin]`, weight
/// `[cout × cin × kernel]`, zero padding `kernel/2`, the given stride.
/// Output length is `(t − 1)/stride + 1`.
pub(crate) fn conv1d_out_len(t: usize, stride: usize) -> usize {
    if t == 0 {
        0
    } else {
        (t - 1) / stride + 1
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv1d_fwd(
    x: &[f64],
    t: usize,
    cin: usize,
    cout: usize,
    kernel: usize,
    stride: usize,
    w: &[f64],
    b: &[f64],
) -> Vec<f64> {
    let t_out = conv1d_out_len(t, stride);
    let pad = kernel / 2;
    let mut y = vec![0.0; t_out * cout];
    for to in 0..t_out {
        for co in 0..cout {
            let mut acc = b[co];
            for dk in 0..kernel {
                let ti = (to * stride + dk) as isize - pad as isize;
                if ti < 0 || ti as usize >= t {
                    continue;
                }
                let xr = &x[ti as usize * cin..(ti as usize + 1) * cin];
                let wr = &w[(co * cin * kernel) + dk..];
                for ci in 0..cin {
                    acc += xr[ci] * wr[ci * kernel];
                }
            }
            y[to * cout + co] = acc;
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv1d_bwd(
    x: &[f64],
    t: usize,
    cin: usize,
    cout: usize,
    kernel: usize,
    stride: usize,
    w: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let t_out = conv1d_out_len(t, stride);
    let pad = kernel / 2;
    let mut dx = vec![0.0; t * cin];
    for to in 0..t_out {
        for co in 0..cout {
            let g = dy[to * cout + co];
            if g == 0.0 {
                continue;
            }
            db[co] += g;
            for dk in 0..kernel {
                let ti = (to * stride + dk) as isize - pad as isize;
                if ti < 0 || ti as usize >= t {
                    continue;
                }
                let ti = ti as usize;
                for ci in 0..cin {
                    let widx = (co * cin + ci) * kernel + dk;
                    dx[ti * cin + ci] += g * w[widx];
                    dw[widx] += g * x[ti * cin + ci];
                }
            }
        }
    }
    dx
}

/// Sinusoidal position table `[t × d]`, the transformer standard:
/// pe[t, 2i] = sin(t·ω_i), pe[t, 2i+1] = cos(t·ω_i), ω_i = 10000^(−2i/d).
pub(crate) fn sinusoid_table(t: usize, d: usize) -> Vec<f64> {
    let mut pe = vec![0.0; t * d];
    for pos in 0..t {
        for i in 0..d / 2 {
            let omega = math::pow(10000.0, -((2 * i) as f64) / d as f64);
            let angle = pos as f64 * omega;
            pe[pos * d + 2 * i] = math::sin(angle);
            pe[pos * d + 2 * i + 1] = math::cos(angle);
        }
    }
    pe
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randv(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    /// Generic FD check: `fwd` maps a parameter vector to outputs, `dx`
    /// is the claimed gradient of Σ out∘weights.
    fn check_grad(
        mut fwd: impl FnMut(&[f64]) -> Vec<f64>,
        x: &[f64],
        weights: &[f64],
        dx: &[f64],
    ) {
        let h = 1e-5;
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            xp[i] = x[i] + h;
            let up: f64 = fwd(&xp).iter().zip(weights).map(|(a, b)| a * b).sum();
            xp[i] = x[i] - h;
            let down: f64 = fwd(&xp).iter().zip(weights).map(|(a, b)| a * b).sum();
            xp[i] = x[i];
            let fd = (up - down) / (2.0 * h);
            assert!(
                rel_err(fd, dx[i]) < 1e-6,
                "coord {i}: fd {fd} vs analytic {}",
                dx[i]
            );
        }
    }

    #[test]
    fn linear_gradients() {
        let (t, din, dout) = (3, 4, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = randv(&mut rng, t * din);
        let w = randv(&mut rng, dout * din);
        let b = randv(&mut rng, dout);
        let r = randv(&mut rng, t * dout);

        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; b.len()];
        let dx = linear_bwd(&x, t, din, dout, &w, &r, &mut dw, &mut db);

        check_grad(|x| linear_fwd(x, t, din, dout, &w, &b), &x, &r, &dx);
        check_grad(|w| linear_fwd(&x, t, din, dout, w, &b), &w, &r, &dw);
        check_grad(|b| linear_fwd(&x, t, din, dout, &w, b), &b, &r, &db);
    }

    #[test]
    fn layernorm_gradients() {
        let (t, d) = (3, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = randv(&mut rng, t * d);
        let g = randv(&mut rng, d);
        let b = randv(&mut rng, d);
        let r = randv(&mut rng, t * d);

        let (_, xhat, rstd) = layernorm_fwd(&x, t, d, &g, &b);
        let mut dg = vec![0.0; d];
        let mut db = vec![0.0; d];
        let dx = layernorm_bwd(t, d, &g, &xhat, &rstd, &r, &mut dg, &mut db);

        let fwd_x = |x: &[f64]| layernorm_fwd(x, t, d, &g, &b).0;
        check_grad(fwd_x, &x, &r, &dx);
        check_grad(|g: &[f64]| layernorm_fwd(&x, t, d, g, &b).0, &g, &r, &dg);
        check_grad(|b: &[f64]| layernorm_fwd(&x, t, d, &g, b).0, &b, &r, &db);
    }

    #[test]
    fn layernorm_output_is_normalized() {
        let (t, d) = (2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = randv(&mut rng, t * d);
        let gain = vec![1.0; d];
        let bias = vec![0.0; d];
        let (y, _, _) = layernorm_fwd(&x, t, d, &gain, &bias);
        for row in 0..t {
            let r = &y[row * d..(row + 1) * d];
            let mean: f64 = r.iter().sum::<f64>() / d as f64;
            let var: f64 = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4); // eps-limited
        }
    }

    #[test]
    fn gelu_gradients_and_values() {
        // Φ(0) = 1/2, so gelu(0) = 0 and gelu(x) → x for large x.
        let x = [-3.0, -1.0, 0.0, 0.5, 2.0, 6.0];
        let y = gelu_fwd(&x);
        assert_eq!(y[2], 0.0);
        assert!((y[5] - 6.0).abs() < 1e-8);
        assert!(y[0].abs() < 0.01);
        let r = [0.3, -0.7, 1.1, 0.9, -0.2, 0.4];
        let dx = gelu_bwd(&x, &r);
        check_grad(gelu_fwd, &x, &r, &dx);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let mut row = randv(&mut rng, 9);
            for v in row.iter_mut() {
                *v *= 30.0; // exercise the max-shift stability path
            }
            softmax_inplace(&mut row);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn attention_gradients_causal_and_bidirectional() {
        let (t, width, heads) = (4, 6, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for causal in [true, false] {
            let q = randv(&mut rng, t * width);
            let k = randv(&mut rng, t * width);
            let v = randv(&mut rng, t * width);
            let r = randv(&mut rng, t * width);

            let (_, probs) = attention_fwd(&q, &k, &v, t, width, heads, causal);
            let (dq, dk, dv) =
                attention_bwd(&q, &k, &v, t, width, heads, causal, &probs, &r);

            check_grad(
                |q: &[f64]| attention_fwd(q, &k, &v, t, width, heads, causal).0,
                &q,
                &r,
                &dq,
            );
            check_grad(
                |k: &[f64]| attention_fwd(&q, k, &v, t, width, heads, causal).0,
                &k,
                &r,
                &dk,
            );
            check_grad(
                |v: &[f64]| attention_fwd(&q, &k, v, t, width, heads, causal).0,
                &v,
                &r,
                &dv,
            );
        }
    }

    #[test]
    fn causal_attention_ignores_the_future() {
        let (t, width, heads) = (5, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = randv(&mut rng, t * width);
        let k = randv(&mut rng, t * width);
        let v = randv(&mut rng, t * width);
        let (ctx, _) = attention_fwd(&q, &k, &v, t, width, heads, true);
        // Perturb the last position; earlier rows must not move.
        let mut k2 = k.clone();
        let mut v2 = v.clone();
        for d in 0..width {
            k2[(t - 1) * width + d] += 1.0;
            v2[(t - 1) * width + d] -= 2.0;
        }
        let (ctx2, _) = attention_fwd(&q, &k2, &v2, t, width, heads, true);
        assert_eq!(ctx[..(t - 1) * width], ctx2[..(t - 1) * width]);
        assert_ne!(ctx[(t - 1) * width..], ctx2[(t - 1) * width..]);
    }

    #[test]
    fn conv_gradients() {
        let (t, cin, cout, kernel) = (7, 3, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for stride in [1, 2] {
            let t_out = conv1d_out_len(t, stride);
            let x = randv(&mut rng, t * cin);
            let w = randv(&mut rng, cout * cin * kernel);
            let b = randv(&mut rng, cout);
            let r = randv(&mut rng, t_out * cout);

            let mut dw = vec![0.0; w.len()];
            let mut db = vec![0.0; b.len()];
            let dx = conv1d_bwd(&x, t, cin, cout, kernel, stride, &w, &r, &mut dw, &mut db);

            check_grad(
                |x: &[f64]| conv1d_fwd(x, t, cin, cout, kernel, stride, &w, &b),
                &x,
                &r,
                &dx,
            );
            check_grad(
                |w: &[f64]| conv1d_fwd(&x, t, cin, cout, kernel, stride, w, &b),
                &w,
                &r,
                &dw,
            );
            check_grad(
                |b: &[f64]| conv1d_fwd(&x, t, cin, cout, kernel, stride, &w, b),
                &b,
                &r,
                &db,
            );
        }
    }

    #[test]
    fn conv_length_formula() {
        // stride 2, padding 1, kernel 3 halves the length, rounding up.
        assert_eq!(conv1d_out_len(100, 2), 50);
        assert_eq!(conv1d_out_len(99, 2), 50);
        assert_eq!(conv1d_out_len(1, 2), 1);
        assert_eq!(conv1d_out_len(0, 2), 0);
        assert_eq!(conv1d_out_len(10, 1), 10);
    }

    #[test]
    fn sinusoid_table_shape() {
        let d = 8;
        let pe = sinusoid_table(3, d);
        // Position 0 row: sin(0)=0 at even, cos(0)=1 at odd indices.
        for i in 0..d / 2 {
            assert_eq!(pe[2 * i], 0.0);
            assert_eq!(pe[2 * i + 1], 1.0);
        }
        // Bounded and non-constant elsewhere.
        assert!(pe.iter().all(|v| v.abs() <= 1.0));
        assert_ne!(pe[d], pe[2 * d]);
    }
}
