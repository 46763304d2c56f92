//! Counter-based per-pixel random streams. Each draw is a pure function of
//! its key, so output does not depend on generation order or thread count.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    // SplitMix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, v: u64) -> u64 {
    mix(h.wrapping_add(GOLDEN) ^ v)
}

/// Uniform in `(0, 1]` from the top 53 bits.
#[inline]
fn unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Random streams for one capture `(seed, position, temperature)`.
#[derive(Debug, Clone, Copy)]
pub struct PixelNoise {
    capture: u64,
}

const NOISE_STREAM: u64 = 1;
const SPECKLE_STREAM: u64 = 2;

impl PixelNoise {
    pub fn new(seed: u64, position: f64, temp: f64) -> Self {
        let h = absorb(mix(seed), position.to_bits());
        PixelNoise {
            capture: absorb(h, temp.to_bits()),
        }
    }

    /// Standard normal draw for `(frame, pixel)` via Box-Muller.
    #[inline]
    pub fn gaussian(&self, frame: u64, pixel: u64) -> f64 {
        let h = absorb(absorb(absorb(self.capture, NOISE_STREAM), frame), pixel);
        let u1 = unit(mix(h ^ 1));
        let u2 = unit(mix(h ^ 2));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform draw deciding whether `pixel` is a dropout. Independent of the
    /// frame so holes persist across the frames of one capture.
    #[inline]
    pub fn speckle(&self, pixel: u64) -> f64 {
        unit(absorb(absorb(self.capture, SPECKLE_STREAM), pixel))
    }
}
