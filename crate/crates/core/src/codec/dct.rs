//! Orthonormal 8x8 type-II DCT.

use std::sync::OnceLock;

pub const N: usize = 8;

pub type Block = [f64; N * N];

fn basis() -> &'static [[f64; N]; N] {
    static BASIS: OnceLock<[[f64; N]; N]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; N]; N];
        for (k, row) in m.iter_mut().enumerate() {
            let scale = if k == 0 { (1.0 / N as f64).sqrt() } else { (2.0 / N as f64).sqrt() };
            for (n, v) in row.iter_mut().enumerate() {
                *v = scale * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * N) as f64).cos();
            }
        }
        m
    })
}

/// `C * X * C^T`
pub fn forward(block: &Block) -> Block {
    let c = basis();
    let mut tmp = [0.0; N * N];
    for r in 0..N {
        for k in 0..N {
            tmp[r * N + k] = (0..N).map(|n| c[k][n] * block[r * N + n]).sum();
        }
    }
    let mut out = [0.0; N * N];
    for k in 0..N {
        for col in 0..N {
            out[k * N + col] = (0..N).map(|r| c[k][r] * tmp[r * N + col]).sum();
        }
    }
    out
}

/// `C^T * Y * C`
pub fn inverse(coefs: &Block) -> Block {
    let c = basis();
    let mut tmp = [0.0; N * N];
    for k in 0..N {
        for n in 0..N {
            tmp[k * N + n] = (0..N).map(|j| coefs[k * N + j] * c[j][n]).sum();
        }
    }
    let mut out = [0.0; N * N];
    for r in 0..N {
        for n in 0..N {
            out[r * N + n] = (0..N).map(|k| c[k][r] * tmp[k * N + n]).sum();
        }
    }
    out
}

/// Zigzag scan order as raster indices.
pub fn zigzag() -> &'static [usize; N * N] {
    static ORDER: OnceLock<[usize; N * N]> = OnceLock::new();
    ORDER.get_or_init(|| {
        let mut order = [0; N * N];
        let mut i = 0;
        for s in 0..(2 * N - 1) {
            let range: Vec<usize> = (0..=s).filter(|&r| r < N && s - r < N).collect();
            let rows: Vec<usize> = if s % 2 == 0 { range.into_iter().rev().collect() } else { range };
            for r in rows {
                order[i] = r * N + (s - r);
                i += 1;
            }
        }
        order
    })
}
