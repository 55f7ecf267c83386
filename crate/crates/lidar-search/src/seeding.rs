//! Deterministic seed derivation for independent RNG streams.

/// splitmix64 finalizer; decorrelates nearby seeds.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a base seed with a stream index into an independent seed.
pub fn mix(base: u64, stream: u64) -> u64 {
    splitmix(base ^ splitmix(stream))
}

/// Three-way combination for (seed, outer, inner) stream layouts.
pub fn mix3(base: u64, outer: u64, inner: u64) -> u64 {
    mix(mix(base, outer), inner)
}
