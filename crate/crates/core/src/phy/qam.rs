//! Gray-mapped 16-QAM with unit average energy and a max-log demapper.

use num_complex::Complex64;

const SCALE: f64 = 0.316_227_766_016_837_94; // 1/sqrt(10)

#[inline]
fn level(b0: u8, b1: u8) -> f64 {
    let mag = if b1 == 0 { 1.0 } else { 3.0 };
    (1.0 - 2.0 * b0 as f64) * mag * SCALE
}

/// Maps four bits; the first two drive I, the last two Q.
pub fn modulate(bits: &[u8]) -> Complex64 {
    Complex64::new(level(bits[0], bits[1]), level(bits[2], bits[3]))
}

fn pam_llrs(y: f64, n0: f64, out: &mut [f64]) {
    let pts = [(0u8, 0u8), (0, 1), (1, 0), (1, 1)];
    let mut best = [[f64::INFINITY; 2]; 2];
    for &(b0, b1) in &pts {
        let d = (y - level(b0, b1)).powi(2);
        best[0][b0 as usize] = best[0][b0 as usize].min(d);
        best[1][b1 as usize] = best[1][b1 as usize].min(d);
    }
    out[0] = (best[0][1] - best[0][0]) / n0;
    out[1] = (best[1][1] - best[1][0]) / n0;
}

/// Max-log LLRs for the four bits of `y` given complex noise variance `n0`.
pub fn demodulate(y: Complex64, n0: f64, out: &mut [f64]) {
    pam_llrs(y.re, n0, &mut out[0..2]);
    pam_llrs(y.im, n0, &mut out[2..4]);
}
