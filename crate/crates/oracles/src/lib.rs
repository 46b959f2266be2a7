//! Brute-force reference implementations used as test oracles.
//!
//! Everything here is written for clarity over speed and shares no code with
//! the `saltrk` crate.

#![allow(clippy::needless_range_loop)]

/// A layer with its parameters, in the same memory layouts as the real network:
/// conv kernels `[out][ky][kx][in]`, fully-connected weights `[out][in]`,
/// activations HWC row-major.
#[derive(Debug, Clone)]
pub enum OracleLayer {
    Conv {
        kh: usize,
        kw: usize,
        cin: usize,
        cout: usize,
        stride: usize,
        pad: usize,
        kernel: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    MaxPool {
        window: usize,
        stride: usize,
    },
    Fc {
        din: usize,
        dout: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
}

type Volume = Vec<Vec<Vec<f64>>>;

fn to_volume(flat: &[f64], h: usize, w: usize, c: usize) -> Volume {
    let mut v = vec![vec![vec![0.0; c]; w]; h];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                v[y][x][ch] = flat[(y * w + x) * c + ch];
            }
        }
    }
    v
}

fn flatten(v: &Volume) -> Vec<f64> {
    v.iter().flat_map(|row| row.iter().flat_map(|px| px.iter().copied())).collect()
}

/// Straight-loop forward pass.
pub fn naive_forward(input: &[f64], h: usize, w: usize, c: usize, layers: &[OracleLayer]) -> Vec<f64> {
    let mut vol = to_volume(input, h, w, c);
    for layer in layers {
        let (ih, iw, ic) = (vol.len(), vol[0].len(), vol[0][0].len());
        vol = match layer {
            OracleLayer::Conv {
                kh,
                kw,
                cin,
                cout,
                stride,
                pad,
                kernel,
                bias,
            } => {
                assert_eq!(ic, *cin);
                let oh = (ih + 2 * pad - kh) / stride + 1;
                let ow = (iw + 2 * pad - kw) / stride + 1;
                let mut out = vec![vec![vec![0.0; *cout]; ow]; oh];
                for oy in 0..oh {
                    for ox in 0..ow {
                        for o in 0..*cout {
                            let mut acc = bias[o];
                            for ky in 0..*kh {
                                for kx in 0..*kw {
                                    let iy = (oy * stride + ky) as isize - *pad as isize;
                                    let ix = (ox * stride + kx) as isize - *pad as isize;
                                    if iy < 0 || ix < 0 || iy >= ih as isize || ix >= iw as isize {
                                        continue;
                                    }
                                    for i in 0..*cin {
                                        let k = kernel[((o * kh + ky) * kw + kx) * cin + i];
                                        acc += k * vol[iy as usize][ix as usize][i];
                                    }
                                }
                            }
                            out[oy][ox][o] = acc;
                        }
                    }
                }
                out
            }
            OracleLayer::Relu => vol
                .iter()
                .map(|row| row.iter().map(|px| px.iter().map(|v| v.max(0.0)).collect()).collect())
                .collect(),
            OracleLayer::MaxPool { window, stride } => {
                let oh = (ih - window) / stride + 1;
                let ow = (iw - window) / stride + 1;
                let mut out = vec![vec![vec![f64::NEG_INFINITY; ic]; ow]; oh];
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ch in 0..ic {
                            for dy in 0..*window {
                                for dx in 0..*window {
                                    let v = vol[oy * stride + dy][ox * stride + dx][ch];
                                    if v > out[oy][ox][ch] {
                                        out[oy][ox][ch] = v;
                                    }
                                }
                            }
                        }
                    }
                }
                out
            }
            OracleLayer::Fc { din, dout, weights, bias } => {
                let x = flatten(&vol);
                assert_eq!(x.len(), *din);
                let out: Vec<f64> = (0..*dout)
                    .map(|o| bias[o] + (0..*din).map(|i| weights[o * din + i] * x[i]).sum::<f64>())
                    .collect();
                vec![vec![out]]
            }
        };
    }
    flatten(&vol)
}

/// Central difference `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[i] += h;
    m[i] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

/// Batch soft-margin linear SVM solution from SMO.
#[derive(Debug, Clone)]
pub struct BatchSvm {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

/// `1/2 a^T Q a - sum a` with `Q_ij = y_i y_j x_i . x_j`.
pub fn dual_objective(xs: &[Vec<f64>], ys: &[f64], alpha: &[f64]) -> f64 {
    let n = xs.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * ys[i] * ys[j] * dot(&xs[i], &xs[j]);
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sequential minimal optimization with maximal-violating-pair selection,
/// run until the optimality gap is below `tol`.
pub fn smo(xs: &[Vec<f64>], ys: &[f64], c: f64, tol: f64) -> BatchSvm {
    let n = xs.len();
    let k: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dot(&xs[i], &xs[j])).collect()).collect();
    let mut alpha = vec![0.0; n];
    // grad_i = (Q a)_i - 1
    let mut grad = vec![-1.0; n];
    for _ in 0..1_000_000 {
        let up = |i: usize, a: f64| (ys[i] > 0.0 && a < c) || (ys[i] < 0.0 && a > 0.0);
        let low = |i: usize, a: f64| (ys[i] > 0.0 && a > 0.0) || (ys[i] < 0.0 && a < c);
        let mut best_i = None;
        let mut gmax = f64::NEG_INFINITY;
        let mut best_j = None;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if up(t, alpha[t]) && v > gmax {
                gmax = v;
                best_i = Some(t);
            }
            if low(t, alpha[t]) && v < gmin {
                gmin = v;
                best_j = Some(t);
            }
        }
        let (Some(i), Some(j)) = (best_i, best_j) else { break };
        if gmax - gmin < tol {
            break;
        }
        let eta = (k[i][i] + k[j][j] - 2.0 * k[i][j]).max(1e-12);
        // Move along y_i e_i - y_j e_j.
        let mut t = (gmax - gmin) / eta;
        let cap_i = if ys[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let cap_j = if ys[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        t = t.min(cap_i).min(cap_j);
        let di = ys[i] * t;
        let dj = -ys[j] * t;
        alpha[i] = (alpha[i] + di).clamp(0.0, c);
        alpha[j] = (alpha[j] + dj).clamp(0.0, c);
        for s in 0..n {
            grad[s] += ys[s] * (ys[i] * k[s][i] * di + ys[j] * k[s][j] * dj);
        }
    }
    // Bias from free vectors, else the midpoint of the feasible interval.
    let w: Vec<f64> = (0..xs[0].len())
        .map(|d| (0..n).map(|i| alpha[i] * ys[i] * xs[i][d]).sum())
        .collect();
    let free: Vec<usize> = (0..n).filter(|&i| alpha[i] > 1e-9 && alpha[i] < c - 1e-9).collect();
    let bias = if !free.is_empty() {
        free.iter().map(|&i| ys[i] - dot(&w, &xs[i])).sum::<f64>() / free.len() as f64
    } else {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..n {
            let r = ys[i] - dot(&w, &xs[i]);
            let at_zero = alpha[i] <= 1e-9;
            // at zero: y f >= 1; at C: y f <= 1.
            if (ys[i] > 0.0) == at_zero {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            _ => 0.0,
        }
    };
    let objective = dual_objective(xs, ys, &alpha);
    BatchSvm { alpha, bias, objective }
}

/// Minimum s-t cut by enumerating every assignment of the other nodes.
pub fn brute_force_min_cut(nodes: usize, source: usize, sink: usize, edges: &[(usize, usize, f64)]) -> f64 {
    let others: Vec<usize> = (0..nodes).filter(|&v| v != source && v != sink).collect();
    let mut best = f64::INFINITY;
    for mask in 0u64..(1u64 << others.len()) {
        let mut side = vec![false; nodes];
        side[source] = true;
        for (bit, &v) in others.iter().enumerate() {
            side[v] = mask >> bit & 1 == 1;
        }
        let cut: f64 = edges.iter().filter(|(u, v, _)| side[*u] && !side[*v]).map(|e| e.2).sum();
        best = best.min(cut);
    }
    best
}

/// Correlation likelihood by the definition: for each center, sum the filter
/// against the saliency window whose top-left is `center - (fw/2, fh/2)`,
/// zero outside the frame; then shift, floor and normalize.
pub fn naive_likelihood(filter: &[f64], fw: usize, fh: usize, sal: &[f64], w: usize, h: usize, floor: f64) -> Vec<f64> {
    let out = naive_likelihood_raw(filter, fw, fh, sal, w, h);
    let min = out.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    let total: f64 = out.iter().map(|v| v + shift + floor).sum();
    out.iter().map(|v| (v + shift + floor) / total).collect()
}

/// Sum over every `kw x kh` window centered (top-left offset `k/2`) on each pixel.
pub fn window_sum(sal: &[f64], w: usize, h: usize, kw: usize, kh: usize) -> Vec<f64> {
    naive_likelihood_raw(&vec![1.0; kw * kh], kw, kh, sal, w, h)
}

fn naive_likelihood_raw(filter: &[f64], fw: usize, fh: usize, sal: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for cy in 0..h as isize {
        for cx in 0..w as isize {
            for v in 0..fh as isize {
                for u in 0..fw as isize {
                    let (x, y) = (cx - (fw / 2) as isize + u, cy - (fh / 2) as isize + v);
                    if x >= 0 && y >= 0 && x < w as isize && y < h as isize {
                        out[(cy * w as isize + cx) as usize] += filter[(v * fw as isize + u) as usize] * sal[(y * w as isize + x) as usize];
                    }
                }
            }
        }
    }
    out
}

/// Truncated (at `ceil(3 sigma)`) normalized Gaussian taps.
pub fn gaussian_taps(var: f64) -> Vec<f64> {
    if var <= 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * var.sqrt()).ceil() as i64;
    let raw: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * var)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// Torus prediction by direct 2-D placement of each source cell's mass.
pub fn naive_predict_torus(prev: &[f64], w: usize, h: usize, shift: (i64, i64), var: (f64, f64)) -> Vec<f64> {
    let kx = gaussian_taps(var.0);
    let ky = gaussian_taps(var.1);
    let (rx, ry) = ((kx.len() / 2) as i64, (ky.len() / 2) as i64);
    let mut out = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let m = prev[(y * w as i64 + x) as usize];
            if m == 0.0 {
                continue;
            }
            for (j, wy) in ky.iter().enumerate() {
                for (i, wx) in kx.iter().enumerate() {
                    let tx = (x + shift.0 + i as i64 - rx).rem_euclid(w as i64);
                    let ty = (y + shift.1 + j as i64 - ry).rem_euclid(h as i64);
                    out[(ty * w as i64 + tx) as usize] += m * wx * wy;
                }
            }
        }
    }
    let s: f64 = out.iter().sum();
    out.iter().map(|v| v / s).collect()
}

/// Pointwise product renormalized to sum 1.
pub fn multiply_normalize(a: &[f64], b: &[f64]) -> Vec<f64> {
    let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let s: f64 = p.iter().sum();
    p.iter().map(|v| v / s).collect()
}

/// Index of the first maximum.
pub fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Pixelwise maximum of absolute values.
pub fn max_abs_aggregate(grids: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; len];
    for p in 0..len {
        for g in grids {
            if g[p].abs() > out[p] {
                out[p] = g[p].abs();
            }
        }
    }
    out
}

/// Nearest-neighbor placement of a `pw x ph` map onto the integer pixel
/// rectangle `[x0, x0 + sw) x [y0, y0 + sh)` of a zero `w x h` frame.
#[allow(clippy::too_many_arguments)]
pub fn naive_place(map: &[f64], pw: usize, ph: usize, x0: i64, y0: i64, sw: usize, sh: usize, w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for fy in 0..h as i64 {
        for fx in 0..w as i64 {
            let (dx, dy) = (fx - x0, fy - y0);
            if dx < 0 || dy < 0 || dx >= sw as i64 || dy >= sh as i64 {
                continue;
            }
            let px = (((dx as f64 + 0.5) * pw as f64 / sw as f64) as usize).min(pw - 1);
            let py = (((dy as f64 + 0.5) * ph as f64 / sh as f64) as usize).min(ph - 1);
            out[(fy * w as i64 + fx) as usize] = map[py * pw + px];
        }
    }
    out
}

/// Elementwise mean of equally sized buffers.
pub fn mean_of(buffers: &[Vec<f64>]) -> Vec<f64> {
    let n = buffers.len() as f64;
    (0..buffers[0].len()).map(|i| buffers.iter().map(|b| b[i]).sum::<f64>() / n).collect()
}
