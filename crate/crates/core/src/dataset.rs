//! Synthetic prompted-segmentation data.
//!
//! Each sample is a single bright shape (ellipse or wobbly blob) on a dark
//! background, overlaid with a linear intensity ramp in a random direction and
//! Gaussian pixel noise. The ramp is what makes a thresholded flood fill
//! truncate inside the shape.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use baps_zoo::RngStream;

use crate::{BinaryMask, CoreError, Image, PointPrompt};

const FOREGROUND: f64 = 0.85;
const BACKGROUND: f64 = 0.2;
// shape radii as fractions of the shorter image side
const SIZE_MIN: f64 = 0.25;
const SIZE_MAX: f64 = 0.4;
const COLOR_JITTER: f64 = 0.05;
const MIN_FOREGROUND: usize = 16;
const MAX_TRIES: usize = 100;

const FILE_MAGIC: [u8; 4] = *b"BAPD";
const FILE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub noise_std: f64,
    pub ramp_strength: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_val: 50,
            n_test: 100,
            height: 64,
            width: 64,
            channels: 1,
            noise_std: 0.05,
            ramp_strength: 0.3,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return Err(CoreError::Config("split sizes must be positive".into()));
        }
        if self.height == 0 || self.width == 0 {
            return Err(CoreError::Config("image size must be positive".into()));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(CoreError::Config(format!(
                "channels must be 1 or 3, got {}",
                self.channels
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(CoreError::Config(format!("noise_std {} must be >= 0", self.noise_std)));
        }
        if !(0.0..=1.0).contains(&self.ramp_strength) {
            return Err(CoreError::Config(format!(
                "ramp_strength {} not in [0, 1]",
                self.ramp_strength
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationSample {
    pub image: Image,
    pub gt: BinaryMask,
    pub sample_id: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<SegmentationSample>,
    pub val: Vec<SegmentationSample>,
    pub test: Vec<SegmentationSample>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[SegmentationSample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

pub fn generate(spec: &DatasetSpec) -> Result<Dataset, CoreError> {
    spec.validate()?;
    let root = RngStream::new(spec.seed);
    let mut next_id = 0u64;
    let mut make = |split: Split, n: usize| -> Result<Vec<SegmentationSample>, CoreError> {
        let stream = root.split(split as u64 + 1);
        (0..n)
            .map(|i| {
                let id = next_id;
                next_id += 1;
                generate_sample(spec, &mut stream.split(i as u64), id)
            })
            .collect()
    };
    Ok(Dataset {
        train: make(Split::Train, spec.n_train)?,
        val: make(Split::Val, spec.n_val)?,
        test: make(Split::Test, spec.n_test)?,
    })
}

enum Shape {
    Ellipse {
        cy: f64,
        cx: f64,
        a: f64,
        b: f64,
        theta: f64,
    },
    Blob {
        cy: f64,
        cx: f64,
        r0: f64,
        harmonics: [(f64, f64); 3],
    },
}

impl Shape {
    fn random(rng: &mut RngStream, h: usize, w: usize) -> Self {
        let side = h.min(w) as f64;
        let cy = rng.random_range(0.3..=0.7) * (h as f64 - 1.0);
        let cx = rng.random_range(0.3..=0.7) * (w as f64 - 1.0);
        if rng.random_bool(0.5) {
            Shape::Ellipse {
                cy,
                cx,
                a: rng.random_range(SIZE_MIN..=SIZE_MAX) * side,
                b: rng.random_range(SIZE_MIN..=SIZE_MAX) * side,
                theta: rng.random_range(0.0..PI),
            }
        } else {
            let mut harmonics = [(0.0, 0.0); 3];
            for hm in &mut harmonics {
                *hm = (rng.random_range(-0.15..=0.15), rng.random_range(0.0..2.0 * PI));
            }
            Shape::Blob {
                cy,
                cx,
                r0: rng.random_range(SIZE_MIN..=SIZE_MAX) * side,
                harmonics,
            }
        }
    }

    fn contains(&self, y: f64, x: f64) -> bool {
        match *self {
            Shape::Ellipse { cy, cx, a, b, theta } => {
                let (dy, dx) = (y - cy, x - cx);
                let u = dx * theta.cos() + dy * theta.sin();
                let v = -dx * theta.sin() + dy * theta.cos();
                (u / a).powi(2) + (v / b).powi(2) <= 1.0
            }
            Shape::Blob { cy, cx, r0, harmonics } => {
                let (dy, dx) = (y - cy, x - cx);
                let phi = dy.atan2(dx);
                let wobble: f64 = harmonics
                    .iter()
                    .enumerate()
                    .map(|(k, &(amp, phase))| amp * ((k + 2) as f64 * phi + phase).cos())
                    .sum();
                dy.hypot(dx) <= r0 * (1.0 + wobble)
            }
        }
    }
}

fn generate_sample(spec: &DatasetSpec, rng: &mut RngStream, sample_id: u64) -> Result<SegmentationSample, CoreError> {
    let (h, w, c) = (spec.height, spec.width, spec.channels);
    for _ in 0..MAX_TRIES {
        let shape = Shape::random(rng, h, w);
        let gt = BinaryMask::from_fn(h, w, |y, x| shape.contains(y as f64, x as f64));
        if gt.count() < MIN_FOREGROUND {
            continue;
        }

        let (fg, bg): (Vec<f64>, Vec<f64>) = if c == 1 {
            (vec![FOREGROUND], vec![BACKGROUND])
        } else {
            (0..c)
                .map(|_| {
                    (
                        FOREGROUND + rng.random_range(-COLOR_JITTER..=COLOR_JITTER),
                        BACKGROUND + rng.random_range(-COLOR_JITTER..=COLOR_JITTER),
                    )
                })
                .unzip()
        };

        // ramp spans exactly `ramp_strength` between the two extreme corners
        let dir = rng.random_range(0.0..2.0 * PI);
        let (uy, ux) = (dir.sin(), dir.cos());
        let (my, mx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
        let extent = (uy.abs() * (h as f64 - 1.0) + ux.abs() * (w as f64 - 1.0)).max(1.0);

        let noise = Normal::new(0.0, spec.noise_std).expect("validated noise_std");
        let mut data = vec![0.0f32; c * h * w];
        for y in 0..h {
            for x in 0..w {
                let ramp = spec.ramp_strength * ((y as f64 - my) * uy + (x as f64 - mx) * ux) / extent;
                let inside = gt.get(y, x);
                for ch in 0..c {
                    let base = if inside { fg[ch] } else { bg[ch] };
                    let n = if spec.noise_std > 0.0 { noise.sample(rng) } else { 0.0 };
                    data[ch * h * w + y * w + x] = (base + ramp + n).clamp(0.0, 1.0) as f32;
                }
            }
        }
        let image = Image::new(h, w, c, data)?;
        return Ok(SegmentationSample { image, gt, sample_id });
    }
    Err(CoreError::Generation(format!(
        "no shape with at least {MIN_FOREGROUND} foreground pixels after {MAX_TRIES} tries at {h}x{w}"
    )))
}

/// Uniformly random foreground pixel of `gt`.
pub fn sample_point_prompt<R: Rng + ?Sized>(gt: &BinaryMask, rng: &mut R) -> Result<PointPrompt, CoreError> {
    let n = gt.count();
    if n == 0 {
        return Err(CoreError::EmptyMask);
    }
    let k = rng.random_range(0..n);
    let idx = gt
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0)
        .nth(k)
        .map(|(i, _)| i)
        .expect("k < count");
    Ok(PointPrompt::new(idx % gt.width(), idx / gt.width()))
}

/// Concrete augmentation draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Augmentation {
    pub angle_deg: f64,
    pub brightness: f64,
    pub saturation: f64,
}

impl Augmentation {
    pub const IDENTITY: Augmentation = Augmentation {
        angle_deg: 0.0,
        brightness: 1.0,
        saturation: 1.0,
    };

    /// Rotation in `[-10°, 10°]`; brightness and saturation factors in `[1/2, 2]`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            angle_deg: rng.random_range(-10.0..=10.0),
            brightness: rng.random_range(0.5..=2.0),
            saturation: rng.random_range(0.5..=2.0),
        }
    }
}

pub fn augment<R: Rng + ?Sized>(img: &Image, gt: &BinaryMask, rng: &mut R) -> Result<(Image, BinaryMask), CoreError> {
    augment_with(img, gt, Augmentation::sample(rng))
}

pub fn augment_with(img: &Image, gt: &BinaryMask, aug: Augmentation) -> Result<(Image, BinaryMask), CoreError> {
    let (h, w, c) = img.shape();
    if (gt.height(), gt.width()) != (h, w) {
        return Err(CoreError::ShapeMismatch(format!(
            "mask {}x{} vs image {h}x{w}",
            gt.height(),
            gt.width()
        )));
    }
    let rotated = rotate_image(img, aug.angle_deg);
    let mask = rotate_mask(gt, aug.angle_deg);

    let plane = h * w;
    let mut data: Vec<f32> = rotated.iter().map(|v| v * aug.brightness as f32).collect();
    if c == 3 {
        let s = aug.saturation as f32;
        for i in 0..plane {
            let mean = (data[i] + data[plane + i] + data[2 * plane + i]) / 3.0;
            for ch in 0..3 {
                let v = &mut data[ch * plane + i];
                *v = mean + s * (*v - mean);
            }
        }
    }
    Ok((Image::from_clamped(h, w, c, data)?, mask))
}

/// Source coordinate of output pixel `(y, x)` when rotating by `angle_deg`
/// about the image center (positive angles turn +x towards +y, i.e. clockwise
/// on screen).
fn source_coord(y: usize, x: usize, h: usize, w: usize, cos: f64, sin: f64) -> (f64, f64) {
    let (my, mx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (dy, dx) = (y as f64 - my, x as f64 - mx);
    (my - sin * dx + cos * dy, mx + cos * dx + sin * dy)
}

fn rotate_image(img: &Image, angle_deg: f64) -> Vec<f32> {
    let (h, w, c) = img.shape();
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let mut out = vec![0.0f32; c * h * w];
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = source_coord(y, x, h, w, cos, sin);
            let sy = sy.clamp(0.0, (h - 1) as f64);
            let sx = sx.clamp(0.0, (w - 1) as f64);
            let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
            let (fy, fx) = ((sy - y0 as f64) as f32, (sx - x0 as f64) as f32);
            for ch in 0..c {
                let p = img.plane(ch);
                let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
                let bottom = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
                out[ch * h * w + y * w + x] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    out
}

/// Nearest-neighbour rotation; pixels whose source falls outside are background.
pub fn rotate_mask(gt: &BinaryMask, angle_deg: f64) -> BinaryMask {
    let (h, w) = (gt.height(), gt.width());
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    BinaryMask::from_fn(h, w, |y, x| {
        let (sy, sx) = source_coord(y, x, h, w, cos, sin);
        let (ry, rx) = (sy.round(), sx.round());
        ry >= 0.0 && rx >= 0.0 && (ry as usize) < h && (rx as usize) < w && gt.get(ry as usize, rx as usize)
    })
}

/// Writes one split: header (magic, version, count, H, W, C) then, per sample,
/// its id, `H·W·C` f32 pixels and `H·W` mask bytes, all little endian.
pub fn write_split<W: Write>(mut out: W, samples: &[SegmentationSample]) -> Result<(), CoreError> {
    let (h, w, c) = samples.first().map(|s| s.image.shape()).unwrap_or((0, 0, 0));
    let mut buf = Vec::new();
    buf.extend_from_slice(&FILE_MAGIC);
    buf.extend_from_slice(&FILE_VERSION.to_le_bytes());
    for v in [samples.len(), h, w, c] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for s in samples {
        if s.image.shape() != (h, w, c) {
            return Err(CoreError::ShapeMismatch(
                "samples in a split must share one shape".into(),
            ));
        }
        buf.extend_from_slice(&s.sample_id.to_le_bytes());
        for v in s.image.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(s.gt.data());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_split<R: Read>(mut input: R) -> Result<Vec<SegmentationSample>, CoreError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let header = 24;
    if bytes.len() < header || bytes[..4] != FILE_MAGIC {
        return Err(CoreError::Format("not a dataset split file".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    if word(1) != FILE_VERSION as usize {
        return Err(CoreError::Format(format!("unsupported dataset version {}", word(1))));
    }
    let (count, h, w, c) = (word(2), word(3), word(4), word(5));
    let record = 8 + 4 * h * w * c + h * w;
    if bytes.len() != header + count * record {
        return Err(CoreError::Format(format!(
            "expected {} bytes for {count} samples of {h}x{w}x{c}, found {}",
            header + count * record,
            bytes.len()
        )));
    }
    bytes[header..]
        .chunks_exact(record)
        .map(|rec| {
            let sample_id = u64::from_le_bytes(rec[..8].try_into().unwrap());
            let pixels = &rec[8..8 + 4 * h * w * c];
            let data = pixels
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            let image = Image::new(h, w, c, data)?;
            let gt = BinaryMask::new(h, w, rec[8 + 4 * h * w * c..].to_vec())?;
            if gt.count() == 0 {
                return Err(CoreError::EmptyMask);
            }
            Ok(SegmentationSample { image, gt, sample_id })
        })
        .collect()
}

/// SHA-256 over the serialized splits, hex encoded.
pub fn fingerprint(dataset: &Dataset) -> String {
    let mut hasher = Sha256::new();
    for split in Split::ALL {
        let mut buf = Vec::new();
        write_split(&mut buf, dataset.split(split)).expect("in-memory write");
        hasher.update((buf.len() as u64).to_le_bytes());
        hasher.update(&buf);
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
