//! Hilbert curve index in 1 to 3 dimensions (Skilling's transpose method).

/// Position of `coords` along the Hilbert curve filling `[0, 2^bits)^d`.
pub fn hilbert_index(coords: &[u32], bits: u32) -> u64 {
    let d = coords.len();
    if d == 1 || bits == 0 {
        return coords.first().copied().unwrap_or(0) as u64;
    }
    let mut x = [0u32; 3];
    x[..d].copy_from_slice(coords);
    let x = &mut x[..d];
    let m = 1u32 << (bits - 1);
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..d {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }
    for i in 1..d {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    let mut q = m;
    while q > 1 {
        if x[d - 1] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in x.iter_mut() {
        *v ^= t;
    }
    let mut h = 0u64;
    for b in (0..bits).rev() {
        for v in x.iter() {
            h = (h << 1) | ((v >> b) & 1) as u64;
        }
    }
    h
}

/// Bits needed to cover `0..n`.
pub fn bits_for(n: usize) -> u32 {
    let mut b = 0;
    while (1usize << b) < n {
        b += 1;
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk(d: usize, bits: u32) -> Vec<Vec<u32>> {
        let side = 1u32 << bits;
        let total = (side as usize).pow(d as u32);
        let mut cells: Vec<(u64, Vec<u32>)> = (0..total)
            .map(|mut i| {
                let mut c = vec![0u32; d];
                for a in (0..d).rev() {
                    c[a] = (i % side as usize) as u32;
                    i /= side as usize;
                }
                (hilbert_index(&c, bits), c)
            })
            .collect();
        cells.sort();
        for (k, (h, _)) in cells.iter().enumerate() {
            assert_eq!(*h, k as u64, "index is a bijection");
        }
        cells.into_iter().map(|(_, c)| c).collect()
    }

    #[test]
    fn consecutive_cells_are_adjacent() {
        for (d, bits) in [(2, 1), (2, 4), (3, 3)] {
            let order = walk(d, bits);
            for w in order.windows(2) {
                let l1: i64 = w[0].iter().zip(&w[1]).map(|(a, b)| (*a as i64 - *b as i64).abs()).sum();
                assert_eq!(l1, 1, "{:?} -> {:?}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn starts_at_origin() {
        assert_eq!(hilbert_index(&[0, 0], 5), 0);
        assert_eq!(hilbert_index(&[0, 0, 0], 5), 0);
        assert_eq!(hilbert_index(&[7], 3), 7);
    }
}
