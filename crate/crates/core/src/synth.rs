//! Deterministic synthetic imagery with natural-image statistics.
//!
//! Scenes combine 1/f fractal noise, a sky-like gradient, soft-edged shapes
//! and a band of fine texture, so blocks carry a realistic mix of smooth and
//! busy content. Used for tests, demos and the acceptance corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frame::{ColorSpace, Frame, Plane, Subsampling};

struct Lattice {
    size: usize,
    values: Vec<f64>,
}

impl Lattice {
    fn new(size: usize, rng: &mut ChaCha8Rng) -> Self {
        Lattice {
            size,
            values: (0..size * size).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    fn sample(&self, u: f64, v: f64) -> f64 {
        let n = self.size;
        let (fu, fv) = (u.floor(), v.floor());
        let (tu, tv) = (u - fu, v - fv);
        let (su, sv) = (tu * tu * (3.0 - 2.0 * tu), tv * tv * (3.0 - 2.0 * tv));
        let at = |i: f64, j: f64| {
            let (i, j) = (i.rem_euclid(n as f64) as usize, j.rem_euclid(n as f64) as usize);
            self.values[j * n + i]
        };
        let a = at(fu, fv) + su * (at(fu + 1.0, fv) - at(fu, fv));
        let b = at(fu, fv + 1.0) + su * (at(fu + 1.0, fv + 1.0) - at(fu, fv + 1.0));
        a + sv * (b - a)
    }
}

/// Sum of octaves with amplitude halving per octave (roughly 1/f).
struct Fractal {
    octaves: Vec<(Lattice, f64, f64)>,
}

impl Fractal {
    fn new(rng: &mut ChaCha8Rng, base_period: f64, octaves: usize) -> Self {
        let mut out = Vec::new();
        let mut period = base_period;
        let mut amp = 1.0;
        for _ in 0..octaves {
            out.push((Lattice::new(64, rng), period, amp));
            period /= 2.0;
            amp *= 0.55;
        }
        Fractal { octaves: out }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        self.octaves
            .iter()
            .map(|(l, period, amp)| amp * l.sample(x / period, y / period))
            .sum()
    }
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// An RGB scene of `width × height` determined entirely by `seed`.
pub fn natural_scene(width: usize, height: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = width.max(height) as f64;
    let terrain = Fractal::new(&mut rng, scale / 2.0, 7);
    let tint = Fractal::new(&mut rng, scale / 3.0, 4);
    let grain = Fractal::new(&mut rng, 6.0, 2);
    let horizon = rng.gen_range(0.3..0.55) * height as f64;
    let sky = [
        rng.gen_range(90.0..150.0),
        rng.gen_range(130.0..180.0),
        rng.gen_range(180.0..235.0),
    ];
    let ground = [
        rng.gen_range(60.0..120.0),
        rng.gen_range(70.0..130.0),
        rng.gen_range(30.0..80.0),
    ];
    let shapes: Vec<(f64, f64, f64, f64, [f64; 3])> = (0..rng.gen_range(3..7))
        .map(|_| {
            (
                rng.gen_range(0.0..width as f64),
                rng.gen_range(horizon * 0.5..height as f64),
                rng.gen_range(0.04..0.18) * scale,
                rng.gen_range(0.04..0.18) * scale,
                [
                    rng.gen_range(20.0..235.0),
                    rng.gen_range(20.0..235.0),
                    rng.gen_range(20.0..235.0),
                ],
            )
        })
        .collect();

    let mut planes = [
        Vec::with_capacity(width * height),
        Vec::with_capacity(width * height),
        Vec::with_capacity(width * height),
    ];
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            let t = terrain.at(fx, fy);
            let edge = horizon + 0.08 * height as f64 * t;
            let ground_w = smoothstep(edge - 2.0, edge + 2.0, fy);
            let depth = (fy / height as f64).clamp(0.0, 1.0);
            let g = grain.at(fx, fy) * 28.0 * ground_w * (0.4 + depth);
            let tt = tint.at(fx, fy);
            let mut rgb = [0.0; 3];
            for c in 0..3 {
                let sky_c = sky[c] * (0.75 + 0.25 * (1.0 - fy / horizon.max(1.0)).clamp(0.0, 1.0)) + 10.0 * tt;
                let ground_c = ground[c] * (1.0 + 0.6 * t) + g + 18.0 * tt * (c as f64 - 1.0);
                rgb[c] = sky_c * (1.0 - ground_w) + ground_c * ground_w;
            }
            for &(cx, cy, rx, ry, col) in &shapes {
                let d = ((fx - cx) / rx).powi(2) + ((fy - cy) / ry).powi(2);
                let a = 1.0 - smoothstep(0.85, 1.0, d);
                if a > 0.0 {
                    let shade = 1.0 + 0.25 * terrain.at(fx * 3.0, fy * 3.0);
                    for c in 0..3 {
                        rgb[c] = rgb[c] * (1.0 - a) + col[c] * shade * a;
                    }
                }
            }
            for (p, v) in planes.iter_mut().zip(rgb) {
                p.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let planes = planes
        .into_iter()
        .map(|d| Plane::new(width, height, d).expect("sized above"))
        .collect();
    Frame::new(planes, ColorSpace::Rgb, Subsampling::S444).expect("valid RGB frame")
}

/// The standard five-scene corpus at the given size.
pub fn corpus(width: usize, height: usize) -> Vec<Frame> {
    (0..5).map(|k| natural_scene(width, height, 0x5eed_0000 + k)).collect()
}

/// A clip of `frames` scenes panning slowly over one large scene.
pub fn panning_clip(width: usize, height: usize, frames: usize, seed: u64) -> Vec<Frame> {
    let big = natural_scene(width + 2 * frames, height + frames, seed);
    (0..frames)
        .map(|i| {
            let planes = big
                .planes()
                .iter()
                .map(|p| p.crop(2 * i, i, width, height).expect("inside the big scene"))
                .collect();
            Frame::new(planes, ColorSpace::Rgb, Subsampling::S444).expect("valid")
        })
        .collect()
}
