//! Straightforward scalar-loop reference implementations used to check the
//! library. Deliberately naive: nested `Vec<Vec<f64>>` grids, a direct 2-D
//! convolution for resampling and per-window SSIM sums. Shares no code with
//! the crate under test.

#![allow(dead_code, clippy::needless_range_loop)]

pub type Grid = Vec<Vec<f64>>;

pub fn grid_from_fn(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Grid {
    (0..h).map(|y| (0..w).map(|x| f(x, y)).collect()).collect()
}

/// Cubic convolution kernel with a = -0.5, written out as polynomials.
pub fn kernel(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        1.5 * t * t * t - 2.5 * t * t + 1.0
    } else if t < 2.0 {
        -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Direct 2-D evaluation of the stretched bicubic kernel at each output
/// site, with edge replication and weight normalization.
pub fn resize(img: &Grid, ow: usize, oh: usize, clamp: bool) -> Grid {
    let ih = img.len();
    let iw = img[0].len();
    let sx = (ow as f64 / iw as f64).min(1.0);
    let sy = (oh as f64 / ih as f64).min(1.0);
    let reach_x = (2.0 / sx).ceil() as isize + 2;
    let reach_y = (2.0 / sy).ceil() as isize + 2;
    let mut out = vec![vec![0.0; ow]; oh];
    for oy in 0..oh {
        let cy = (oy as f64 + 0.5) * ih as f64 / oh as f64 - 0.5;
        for ox in 0..ow {
            let cx = (ox as f64 + 0.5) * iw as f64 / ow as f64 - 0.5;
            let (mut num, mut den) = (0.0, 0.0);
            for j in (cy.floor() as isize - reach_y)..=(cy.ceil() as isize + reach_y) {
                let wy = sy * kernel(sy * (cy - j as f64));
                if wy == 0.0 {
                    continue;
                }
                let jj = j.clamp(0, ih as isize - 1) as usize;
                for i in (cx.floor() as isize - reach_x)..=(cx.ceil() as isize + reach_x) {
                    let wx = sx * kernel(sx * (cx - i as f64));
                    if wx == 0.0 {
                        continue;
                    }
                    let ii = i.clamp(0, iw as isize - 1) as usize;
                    num += wx * wy * img[jj][ii];
                    den += wx * wy;
                }
            }
            let v = num / den;
            out[oy][ox] = if clamp { v.clamp(0.0, 255.0) } else { v };
        }
    }
    out
}

/// RGB as three grids.
pub type Rgb = [Grid; 3];

pub fn luma(img: &Rgb) -> Grid {
    let h = img[0].len();
    let w = img[0][0].len();
    grid_from_fn(w, h, |x, y| {
        16.0 + 219.0 * (0.299 * img[0][y][x] + 0.587 * img[1][y][x] + 0.114 * img[2][y][x])
            / 255.0
    })
}

pub struct OracleFusion {
    pub fused: Rgb,
    pub weights: Vec<Grid>,
    pub areas: Vec<f64>,
    pub global: Vec<f64>,
}

/// Whole two-step fusion pipeline, pixel by pixel.
pub fn fuse(lr: &Rgb, cands: &[Rgb], beta: f64, beta_g: f64, eps: f64, norm: f64) -> OracleFusion {
    let lr_y = luma(lr);
    let (lh, lw) = (lr_y.len(), lr_y[0].len());
    let (hh, hw) = (cands[0][0].len(), cands[0][0][0].len());

    let mut weights = Vec::new();
    for c in cands {
        if beta == 0.0 {
            weights.push(vec![vec![1.0; hw]; hh]);
            continue;
        }
        let down = resize(&luma(c), lw, lh, true);
        let mut field = vec![vec![0.0; lw]; lh];
        for y in 0..lh {
            for x in 0..lw {
                let d = (down[y][x] - lr_y[y][x]) / norm;
                field[y][x] = (-beta * d * d).exp();
            }
        }
        let mut up = resize(&field, hw, hh, true);
        for row in up.iter_mut() {
            for v in row.iter_mut() {
                *v = v.max(eps).min(1.0);
            }
        }
        weights.push(up);
    }

    let n = cands.len();
    let mut areas = vec![0.0; n];
    for y in 0..hh {
        for x in 0..hw {
            let mut best = 0;
            for i in 1..n {
                if weights[i][y][x] > weights[best][y][x] {
                    best = i;
                }
            }
            areas[best] += 1.0;
        }
    }
    let top = areas.iter().cloned().fold(f64::MIN, f64::max);
    let global: Vec<f64> = areas.iter().map(|a| (beta_g * (a - top)).exp()).collect();

    let mut fused: Rgb = [
        vec![vec![0.0; hw]; hh],
        vec![vec![0.0; hw]; hh],
        vec![vec![0.0; hw]; hh],
    ];
    for y in 0..hh {
        for x in 0..hw {
            let mut den = 0.0;
            for i in 0..n {
                den += global[i] * weights[i][y][x];
            }
            for ch in 0..3 {
                let mut num = 0.0;
                for i in 0..n {
                    num += global[i] * weights[i][y][x] * cands[i][ch][y][x];
                }
                fused[ch][y][x] = num / den;
            }
        }
    }
    OracleFusion {
        fused,
        weights,
        areas,
        global,
    }
}

pub fn psnr(a: &Grid, b: &Grid) -> f64 {
    let mut sum = 0.0;
    let mut n = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            sum += (x - y) * (x - y);
            n += 1.0;
        }
    }
    let mse = sum / n;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

/// Mean SSIM over every fully contained 11×11 window, each window
/// evaluated with explicit 2-D Gaussian weighted sums.
pub fn ssim(a: &Grid, b: &Grid) -> f64 {
    let h = a.len();
    let w = a[0].len();
    let mut g = [[0.0; 11]; 11];
    let mut total = 0.0;
    for (j, row) in g.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            let (dx, dy) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut acc = 0.0;
    let mut count = 0.0;
    for y0 in 0..=h - 11 {
        for x0 in 0..=w - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    let k = g[j][i] / total;
                    ma += k * a[y0 + j][x0 + i];
                    mb += k * b[y0 + j][x0 + i];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    let k = g[j][i] / total;
                    let da = a[y0 + j][x0 + i] - ma;
                    let db = b[y0 + j][x0 + i] - mb;
                    va += k * da * da;
                    vb += k * db * db;
                    cov += k * da * db;
                }
            }
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1.0;
        }
    }
    acc / count
}

/// Small deterministic generator so oracle inputs do not depend on the
/// crate's own RNG plumbing.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

pub mod bridge;
