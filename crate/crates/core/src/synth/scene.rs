use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::FrameSequence;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpriteShape {
    Rectangle { width: f64, height: f64 },
    Disc { radius: f64 },
}

impl SpriteShape {
    /// Bounding box `(width, height)`.
    pub fn extent(&self) -> (f64, f64) {
        match *self {
            SpriteShape::Rectangle { width, height } => (width, height),
            SpriteShape::Disc { radius } => (2.0 * radius, 2.0 * radius),
        }
    }
}

/// Position of a sprite's top-left bounding-box corner over time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Trajectory {
    /// Constant velocity, reflecting off the frame edges.
    Bounce { x0: f64, y0: f64, vx: f64, vy: f64 },
    /// `c + a·sin(2π t / period + phase)` on each axis.
    Sinusoidal {
        cx: f64,
        cy: f64,
        ax: f64,
        ay: f64,
        period: f64,
        phase: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sprite {
    pub shape: SpriteShape,
    pub intensity: f64,
    pub trajectory: Trajectory,
}

/// One plane wave of the background texture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wave {
    /// Cycles across the frame width and height.
    pub fx: f64,
    pub fy: f64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Background {
    pub base: f64,
    /// Change in intensity from the left edge to the right edge.
    pub gradient_x: f64,
    pub gradient_y: f64,
    pub waves: Vec<Wave>,
}

impl Background {
    fn at(&self, x: f64, y: f64, w: f64, h: f64) -> f64 {
        let mut v = self.base + self.gradient_x * x / w + self.gradient_y * y / h;
        for wave in &self.waves {
            v += wave.amplitude * (std::f64::consts::TAU * (wave.fx * x / w + wave.fy * y / h) + wave.phase).sin();
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub background: Background,
    pub sprites: Vec<Sprite>,
}

/// Folds `p` into `[0, span]` as if bouncing between two walls.
fn reflect(p: f64, span: f64) -> f64 {
    if span <= 0.0 {
        return 0.0;
    }
    let m = p.rem_euclid(2.0 * span);
    if m > span {
        2.0 * span - m
    } else {
        m
    }
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

const DISC_SUBSAMPLES: usize = 4;

impl SceneSpec {
    /// A randomized dark, textured scene with two or three bright sprites.
    pub fn random(seed: u64, height: usize, width: usize) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (height as f64, width as f64);
        let waves = (0..3)
            .map(|_| Wave {
                fx: rng.random_range(0.5..2.5),
                fy: rng.random_range(0.5..2.5),
                amplitude: rng.random_range(0.02..0.05),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        let background = Background {
            base: rng.random_range(0.2..0.3),
            gradient_x: rng.random_range(-0.08..0.08),
            gradient_y: rng.random_range(-0.08..0.08),
            waves,
        };
        let n_sprites = rng.random_range(2..=3);
        let scale = h.min(w);
        let sprites = (0..n_sprites)
            .map(|_| {
                let shape = if rng.random_bool(0.5) {
                    SpriteShape::Rectangle {
                        width: rng.random_range(0.12..0.25) * scale,
                        height: rng.random_range(0.12..0.25) * scale,
                    }
                } else {
                    SpriteShape::Disc {
                        radius: rng.random_range(0.07..0.13) * scale,
                    }
                };
                let (sw, sh) = shape.extent();
                let trajectory = if rng.random_bool(0.5) {
                    let speed = rng.random_range(0.3..1.0);
                    let angle = rng.random_range(0.0..std::f64::consts::TAU);
                    Trajectory::Bounce {
                        x0: rng.random_range(0.0..(w - sw)),
                        y0: rng.random_range(0.0..(h - sh)),
                        vx: speed * angle.cos(),
                        vy: speed * angle.sin(),
                    }
                } else {
                    let (mx, my) = ((w - sw) / 2.0, (h - sh) / 2.0);
                    Trajectory::Sinusoidal {
                        cx: mx,
                        cy: my,
                        ax: rng.random_range(0.3..0.9) * mx,
                        ay: rng.random_range(0.3..0.9) * my,
                        period: rng.random_range(30.0..80.0),
                        phase: rng.random_range(0.0..std::f64::consts::TAU),
                    }
                };
                Sprite {
                    shape,
                    intensity: rng.random_range(0.7..1.0),
                    trajectory,
                }
            })
            .collect();
        SceneSpec {
            seed,
            height,
            width,
            background,
            sprites,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArgument("scene frame size must be positive".into()));
        }
        for (k, s) in self.sprites.iter().enumerate() {
            let (sw, sh) = s.shape.extent();
            if !(sw > 0.0 && sh > 0.0) {
                return Err(Error::InvalidArgument(format!("sprite {k} has non-positive size")));
            }
            if sw > self.width as f64 || sh > self.height as f64 {
                return Err(Error::InvalidArgument(format!(
                    "sprite {k} is {sw}x{sh} but the frame is only {}x{}",
                    self.width, self.height
                )));
            }
        }
        Ok(())
    }

    fn sprite_origin(&self, sprite: &Sprite, t: f64) -> (f64, f64) {
        let (sw, sh) = sprite.shape.extent();
        let (span_x, span_y) = (self.width as f64 - sw, self.height as f64 - sh);
        match sprite.trajectory {
            Trajectory::Bounce { x0, y0, vx, vy } => (reflect(x0 + vx * t, span_x), reflect(y0 + vy * t, span_y)),
            Trajectory::Sinusoidal {
                cx,
                cy,
                ax,
                ay,
                period,
                phase,
            } => {
                let s = (std::f64::consts::TAU * t / period + phase).sin();
                ((cx + ax * s).clamp(0.0, span_x), (cy + ay * s).clamp(0.0, span_y))
            }
        }
    }

    /// Frame `t` as a `[1, H, W]` tensor. Sprites are composited in order
    /// with area coverage as alpha.
    pub fn render_frame(&self, t: usize) -> Tensor<f32> {
        let (h, w) = (self.height, self.width);
        let (hf, wf) = (h as f64, w as f64);
        let mut img: Vec<f64> = (0..h * w)
            .map(|i| self.background.at((i % w) as f64 + 0.5, (i / w) as f64 + 0.5, wf, hf))
            .collect();
        for sprite in &self.sprites {
            let (ox, oy) = self.sprite_origin(sprite, t as f64);
            let (sw, sh) = sprite.shape.extent();
            let (x0, x1) = (ox.floor().max(0.0) as usize, ((ox + sw).ceil() as usize).min(w));
            let (y0, y1) = (oy.floor().max(0.0) as usize, ((oy + sh).ceil() as usize).min(h));
            for y in y0..y1 {
                for x in x0..x1 {
                    let cover = match sprite.shape {
                        SpriteShape::Rectangle { .. } => {
                            overlap(x as f64, x as f64 + 1.0, ox, ox + sw)
                                * overlap(y as f64, y as f64 + 1.0, oy, oy + sh)
                        }
                        SpriteShape::Disc { radius } => {
                            let (cx, cy) = (ox + radius, oy + radius);
                            let n = DISC_SUBSAMPLES;
                            let mut inside = 0;
                            for sy in 0..n {
                                for sx in 0..n {
                                    let px = x as f64 + (sx as f64 + 0.5) / n as f64;
                                    let py = y as f64 + (sy as f64 + 0.5) / n as f64;
                                    if (px - cx).powi(2) + (py - cy).powi(2) <= radius * radius {
                                        inside += 1;
                                    }
                                }
                            }
                            inside as f64 / (n * n) as f64
                        }
                    };
                    let p = &mut img[y * w + x];
                    *p += cover * (sprite.intensity - *p);
                }
            }
        }
        let data = img.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect();
        Tensor::new(vec![1, h, w], data).expect("positive frame size")
    }
}

/// Renders frames `0..n_frames` of a bug-free recording.
pub fn render_normal(spec: &SceneSpec, n_frames: usize) -> Result<FrameSequence> {
    spec.validate()?;
    if n_frames == 0 {
        return Err(Error::InvalidArgument("n_frames must be >= 1".into()));
    }
    let frames = (0..n_frames).map(|t| spec.render_frame(t)).collect();
    Ok(FrameSequence::new(
        format!("scene_{}", spec.seed),
        spec.height,
        spec.width,
        frames,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_folds() {
        assert_eq!(reflect(3.0, 10.0), 3.0);
        assert_eq!(reflect(12.0, 10.0), 8.0);
        assert_eq!(reflect(-2.0, 10.0), 2.0);
        assert_eq!(reflect(21.0, 10.0), 1.0);
        assert_eq!(reflect(5.0, 0.0), 0.0);
    }

    #[test]
    fn rectangle_coverage_is_area() {
        let spec = SceneSpec {
            seed: 0,
            height: 4,
            width: 4,
            background: Background {
                base: 0.0,
                gradient_x: 0.0,
                gradient_y: 0.0,
                waves: vec![],
            },
            sprites: vec![Sprite {
                shape: SpriteShape::Rectangle {
                    width: 1.0,
                    height: 2.0,
                },
                intensity: 1.0,
                trajectory: Trajectory::Bounce {
                    x0: 1.5,
                    y0: 1.0,
                    vx: 0.0,
                    vy: 0.0,
                },
            }],
        };
        let f = spec.render_frame(0);
        let d = f.data();
        assert_eq!(&d[4..8], &[0.0, 0.5, 0.5, 0.0]);
        assert_eq!(&d[8..12], &[0.0, 0.5, 0.5, 0.0]);
        assert!((f.sum() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn oversized_sprite_rejected() {
        let mut spec = SceneSpec::random(1, 16, 16);
        spec.sprites[0].shape = SpriteShape::Disc { radius: 9.0 };
        assert!(render_normal(&spec, 2).is_err());
        assert!(render_normal(&SceneSpec::random(1, 16, 16), 0).is_err());
    }
}
