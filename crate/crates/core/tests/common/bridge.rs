//! Conversions between library images and oracle grids, plus random
//! instance builders.

use mrefsr::{ImagePlane, RgbImage};

use super::{grid_from_fn, resize, Grid, Rgb, SplitMix};

pub fn plane_to_grid(p: &ImagePlane) -> Grid {
    grid_from_fn(p.width(), p.height(), |x, y| p.get(x, y))
}

pub fn grid_to_plane(g: &Grid) -> ImagePlane {
    ImagePlane::from_fn(g[0].len(), g.len(), |x, y| g[y][x])
}

pub fn rgb_to_grids(img: &RgbImage) -> Rgb {
    img.planes().map(plane_to_grid)
}

pub fn grids_to_rgb(g: &Rgb) -> RgbImage {
    RgbImage::new(grid_to_plane(&g[0]), grid_to_plane(&g[1]), grid_to_plane(&g[2])).unwrap()
}

pub fn max_abs_diff_grid(a: &Grid, b: &Grid) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &RgbImage, b: &RgbImage) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.planes()
        .iter()
        .zip(b.planes())
        .flat_map(|(p, q)| p.samples().iter().zip(q.samples()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

pub fn random_plane(rng: &mut SplitMix, w: usize, h: usize, lo: f64, hi: f64) -> ImagePlane {
    ImagePlane::from_fn(w, h, |_, _| rng.uniform(lo, hi))
}

pub fn random_rgb(rng: &mut SplitMix, w: usize, h: usize) -> RgbImage {
    let r = random_plane(rng, w, h, 0.0, 255.0);
    let g = random_plane(rng, w, h, 0.0, 255.0);
    let b = random_plane(rng, w, h, 0.0, 255.0);
    RgbImage::new(r, g, b).unwrap()
}

/// Random LR image and `n` candidates: the oracle-upsampled LR plus
/// per-candidate noise of random strength and one random corrupted block.
pub fn random_instance(
    rng: &mut SplitMix,
    lr_w: usize,
    lr_h: usize,
    scale: usize,
    n: usize,
) -> (RgbImage, Vec<RgbImage>) {
    let lr = RgbImage::new(
        random_plane(rng, lr_w, lr_h, 20.0, 235.0),
        random_plane(rng, lr_w, lr_h, 20.0, 235.0),
        random_plane(rng, lr_w, lr_h, 20.0, 235.0),
    )
    .unwrap();
    let (hw, hh) = (lr_w * scale, lr_h * scale);
    let base = rgb_to_grids(&lr).map(|g| resize(&g, hw, hh, true));
    let mut cands = Vec::with_capacity(n);
    for _ in 0..n {
        let amp = rng.uniform(0.0, 40.0);
        let bw = 2 + rng.below(hw / 2);
        let bh = 2 + rng.below(hh / 2);
        let bx = rng.below(hw - bw + 1);
        let by = rng.below(hh - bh + 1);
        let offset = rng.uniform(-90.0, 90.0);
        let mut planes = base.clone();
        for plane in planes.iter_mut() {
            for (y, row) in plane.iter_mut().enumerate() {
                for (x, v) in row.iter_mut().enumerate() {
                    let mut nv = *v + rng.uniform(-amp, amp);
                    if x >= bx && x < bx + bw && y >= by && y < by + bh {
                        nv += offset;
                    }
                    *v = nv.clamp(0.0, 255.0);
                }
            }
        }
        cands.push(grids_to_rgb(&planes));
    }
    (lr, cands)
}
