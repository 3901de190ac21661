//! Unscrambled Sobol points in Gray-code order, using the Joe-Kuo
//! direction numbers for the first four dimensions.

pub const MAX_DIM: usize = 4;
const BITS: usize = 32;

/// `(s, a, m)` per dimension: polynomial degree, packed inner coefficients,
/// and initial direction integers. Dimension 0 is the van der Corput
/// sequence.
const PRIMITIVES: [(usize, u32, &[u32]); MAX_DIM] = [
    (0, 0, &[]),
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
];

/// Direction numbers `v[k]` scaled to 32 bits for one dimension.
pub fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    let (s, a, m) = PRIMITIVES[dim];
    if s == 0 {
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (BITS - 1 - k);
        }
        return v;
    }
    for k in 0..s {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                x ^= v[k - j];
            }
        }
        v[k] = x;
    }
    v
}

/// The `index`-th Sobol point (`index >= 1`; index 0 would be the origin).
pub fn sobol_point(index: u32, dim: usize) -> Vec<f64> {
    assert!(index >= 1, "Sobol indices start at 1");
    assert!(dim <= MAX_DIM, "at most {MAX_DIM} dimensions are supported");
    let gray = index ^ (index >> 1);
    (0..dim)
        .map(|d| {
            let v = direction_numbers(d);
            let x = (0..BITS)
                .filter(|&k| (gray >> k) & 1 == 1)
                .fold(0u32, |acc, k| acc ^ v[k]);
            x as f64 / 4_294_967_296.0
        })
        .collect()
}
