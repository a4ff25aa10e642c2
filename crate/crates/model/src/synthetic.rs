//! Seeded synthetic clip sets for exercising the trainer.

use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ClipTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub clip: ClipTensor,
    pub label: usize,
}

/// Class 0: a square translating at constant velocity, bouncing off the edges.
/// Class 1: a square blinking in place on alternate frames.
/// Class 2: a frozen noise texture, no square.
/// Every frame also carries fresh low-amplitude background noise.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSpec {
    pub size: usize,
    pub frames: usize,
    pub square_min: usize,
    pub square_max: usize,
    /// Brightness of the square above the background.
    pub contrast: f64,
    /// Amplitude of the per-frame background noise.
    pub noise: f64,
    /// Amplitude of the frozen texture in class 2.
    pub texture: f64,
}

impl Default for MotionSpec {
    fn default() -> Self {
        MotionSpec {
            size: 32,
            frames: 8,
            square_min: 6,
            square_max: 10,
            contrast: 0.7,
            noise: 0.2,
            texture: 0.6,
        }
    }
}

pub const MOTION_CLASSES: [&str; 3] = ["translating", "blinking", "static"];

fn paint(frames: &mut Array4<f64>, t: usize, y: usize, x: usize, side: usize, color: [f64; 3]) {
    for yy in y..y + side {
        for xx in x..x + side {
            for c in 0..3 {
                frames[[t, yy, xx, c]] = (frames[[t, yy, xx, c]] + color[c]).min(1.0);
            }
        }
    }
}

/// One clip of class `label`; `rng` drives every random choice.
pub fn motion_clip(spec: &MotionSpec, label: usize, rng: &mut ChaCha8Rng) -> ClipTensor {
    let (n, t_len) = (spec.size, spec.frames);
    let mut frames = Array4::from_shape_fn((t_len, n, n, 3), |_| rng.gen::<f64>() * spec.noise);
    let side = rng.gen_range(spec.square_min..=spec.square_max);
    let color = [
        spec.contrast * rng.gen_range(0.8..1.0),
        spec.contrast * rng.gen_range(0.8..1.0),
        spec.contrast * rng.gen_range(0.8..1.0),
    ];
    let room = (n - side) as f64;
    match label {
        0 => {
            let speed = rng.gen_range(2.0..3.5);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let (mut vx, mut vy) = (speed * angle.cos(), speed * angle.sin());
            let (mut x, mut y) = (rng.gen_range(0.0..=room), rng.gen_range(0.0..=room));
            for t in 0..t_len {
                paint(&mut frames, t, y.round() as usize, x.round() as usize, side, color);
                x += vx;
                y += vy;
                if x < 0.0 || x > room {
                    vx = -vx;
                    x = x.clamp(0.0, room);
                }
                if y < 0.0 || y > room {
                    vy = -vy;
                    y = y.clamp(0.0, room);
                }
            }
        }
        1 => {
            let (x, y) = (rng.gen_range(0..=n - side), rng.gen_range(0..=n - side));
            let phase = rng.gen_range(0..2);
            for t in (0..t_len).filter(|t| (t + phase) % 2 == 0) {
                paint(&mut frames, t, y, x, side, color);
            }
        }
        _ => {
            let texture: Vec<f64> = (0..n * n * 3).map(|_| rng.gen::<f64>() * spec.texture).collect();
            for t in 0..t_len {
                for (i, v) in texture.iter().enumerate() {
                    let (yy, rem) = (i / (n * 3), i % (n * 3));
                    let cell = &mut frames[[t, yy, rem / 3, rem % 3]];
                    *cell = (*cell + v).min(1.0);
                }
            }
        }
    }
    ClipTensor { frames }
}

/// `counts[c]` clips of class `c`, interleaved by class and seeded per clip.
pub fn motion_dataset(spec: &MotionSpec, counts: [usize; 3], seed: u64) -> Vec<LabeledClip> {
    let mut out = Vec::with_capacity(counts.iter().sum());
    let mut made = [0usize; 3];
    let mut stream = 0u64;
    while made != counts {
        for label in 0..3 {
            if made[label] < counts[label] {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                stream += 1;
                out.push(LabeledClip {
                    clip: motion_clip(spec, label, &mut rng),
                    label,
                });
                made[label] += 1;
            }
        }
    }
    out
}
