use super::Sample;
use crate::tensor::{Float, Rng, Tensor};
use crate::{Error, Result};

/// One draw of the geometric augmentation: optional flips, then a
/// counter-clockwise rotation by `quarter_turns · 90°`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Augmentation {
    pub hflip: bool,
    pub vflip: bool,
    pub quarter_turns: u8,
}

impl Augmentation {
    pub fn draw(rng: &mut Rng, rotate: bool) -> Self {
        let hflip = rng.coin();
        let vflip = rng.coin();
        let quarter_turns = if rotate { rng.below(4) as u8 } else { 0 };
        Augmentation { hflip, vflip, quarter_turns }
    }

    pub fn is_identity(&self) -> bool {
        *self == Augmentation::default()
    }

    /// Applies the transform to every channel of a `C×H×W` tensor.
    pub fn apply<T: Float>(&self, t: &Tensor<T>) -> Result<Tensor<T>> {
        let mut out = t.clone();
        if self.hflip {
            out = flip(&out, false)?;
        }
        if self.vflip {
            out = flip(&out, true)?;
        }
        for _ in 0..self.quarter_turns % 4 {
            out = rot90(&out)?;
        }
        Ok(out)
    }

    /// Undoes [`Augmentation::apply`].
    pub fn invert<T: Float>(&self, t: &Tensor<T>) -> Result<Tensor<T>> {
        let mut out = t.clone();
        for _ in 0..(4 - self.quarter_turns % 4) % 4 {
            out = rot90(&out)?;
        }
        if self.vflip {
            out = flip(&out, true)?;
        }
        if self.hflip {
            out = flip(&out, false)?;
        }
        Ok(out)
    }
}

fn chw<T: Float>(t: &Tensor<T>) -> Result<(usize, usize, usize)> {
    match *t.dims() {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(Error::dim("augment", format!("expected C×H×W, got {:?}", t.shape()))),
    }
}

fn flip<T: Float>(t: &Tensor<T>, vertical: bool) -> Result<Tensor<T>> {
    let (c, h, w) = chw(t)?;
    let src = t.data();
    let mut out = Vec::with_capacity(src.len());
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let (sy, sx) = if vertical { (h - 1 - y, x) } else { (y, w - 1 - x) };
                out.push(src[(ch * h + sy) * w + sx]);
            }
        }
    }
    Tensor::from_shape(t.shape().clone(), out)
}

/// Counter-clockwise quarter turn of a square `C×S×S` tensor.
fn rot90<T: Float>(t: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = chw(t)?;
    if h != w {
        return Err(Error::Config(format!("rotation needs a square image, got {h}×{w}")));
    }
    let src = t.data();
    let mut out = Vec::with_capacity(src.len());
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out.push(src[(ch * h + x) * w + (w - 1 - y)]);
            }
        }
    }
    Tensor::from_shape(t.shape().clone(), out)
}

/// Random flips and right-angle rotation applied identically to image and mask.
/// Returns the augmented sample and the draw that produced it.
pub fn augment<T: Float>(sample: &Sample<T>, rng: &mut Rng) -> Result<(Sample<T>, Augmentation)> {
    if sample.height() != sample.width() {
        return Err(Error::Config(format!(
            "rotation augmentation needs square samples, got {}×{}",
            sample.height(),
            sample.width()
        )));
    }
    let aug = Augmentation::draw(rng, true);
    let out = Sample { image: aug.apply(&sample.image)?, mask: aug.apply(&sample.mask)?, id: sample.id };
    Ok((out, aug))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Tensor<f64> {
        Tensor::new([1, h, w], (0..h * w).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn quarter_turn_layout() {
        // [[0,1],[2,3]] turned counter-clockwise is [[1,3],[0,2]]
        let r = rot90(&ramp(2, 2)).unwrap();
        assert_eq!(r.data(), &[1.0, 3.0, 0.0, 2.0]);
        let four = (0..4).try_fold(ramp(3, 3), |t, _| rot90(&t)).unwrap();
        assert_eq!(four, ramp(3, 3));
    }

    #[test]
    fn flips_on_rectangles() {
        let t = ramp(2, 3);
        assert_eq!(flip(&t, false).unwrap().data(), &[2.0, 1.0, 0.0, 5.0, 4.0, 3.0]);
        assert_eq!(flip(&t, true).unwrap().data(), &[3.0, 4.0, 5.0, 0.0, 1.0, 2.0]);
        assert!(rot90(&t).is_err());
    }

    #[test]
    fn every_draw_inverts() {
        let t = ramp(4, 4);
        for bits in 0..16u8 {
            let a = Augmentation { hflip: bits & 1 != 0, vflip: bits & 2 != 0, quarter_turns: bits >> 2 };
            assert_eq!(a.invert(&a.apply(&t).unwrap()).unwrap(), t);
        }
    }
}
