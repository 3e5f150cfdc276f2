use half::f16;

/// Largest finite half-precision value.
pub const F16_MAX: f32 = 65504.0;

/// Round-to-nearest-even conversion to IEEE-754 binary16 bits, saturating at
/// ±65504 instead of overflowing to infinity.
pub fn f32_to_f16_bits(v: f32) -> u16 {
    f16::from_f32(v.clamp(-F16_MAX, F16_MAX)).to_bits()
}

pub fn f16_bits_to_f32(bits: u16) -> f32 {
    f16::from_bits(bits).to_f32()
}

/// Half-precision payload for a flat index: exactly two bytes per value.
pub fn cast_f16(values: &[f32]) -> Vec<u16> {
    values.iter().map(|&v| f32_to_f16_bits(v)).collect()
}
