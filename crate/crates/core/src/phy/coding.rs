//! Rate-1/2, constraint-length-7 convolutional code (generators 133, 171
//! octal) with a soft-input Viterbi decoder.
//!
//! LLR convention: positive favours bit 0. A zero LLR is an erasure.

const K: u32 = 7;
const MEMORY: usize = (K - 1) as usize;
const STATES: usize = 1 << MEMORY;
const G0: u32 = 0o133;
const G1: u32 = 0o171;

/// Tail bits appended to terminate the trellis in state zero.
pub const TAIL: usize = MEMORY;

#[inline]
fn outputs(reg: u32) -> (u8, u8) {
    ((reg & G0).count_ones() as u8 & 1, (reg & G1).count_ones() as u8 & 1)
}

/// Number of coded bits for `info` information bits.
pub fn coded_len(info: usize) -> usize {
    2 * (info + TAIL)
}

/// Encodes and terminates `bits`.
pub fn encode(bits: &[u8]) -> Vec<u8> {
    let mut state = 0u32;
    let mut out = Vec::with_capacity(coded_len(bits.len()));
    for &b in bits.iter().chain(std::iter::repeat_n(&0u8, TAIL)) {
        let reg = ((b as u32 & 1) << MEMORY) | state;
        let (o0, o1) = outputs(reg);
        out.push(o0);
        out.push(o1);
        state = reg >> 1;
    }
    out
}

/// Maximum-likelihood decode of a terminated block.
pub fn viterbi(llrs: &[f64]) -> Vec<u8> {
    assert!(llrs.len().is_multiple_of(2) && llrs.len() >= 2 * TAIL);
    let steps = llrs.len() / 2;
    let mut metric = [f64::NEG_INFINITY; STATES];
    metric[0] = 0.0;
    let mut next = [0.0f64; STATES];
    let mut decisions: Vec<u64> = Vec::with_capacity(steps);
    // Branch outputs for each (next state, predecessor choice).
    let mut table = [[(0u8, 0u8); 2]; STATES];
    for (ns, row) in table.iter_mut().enumerate() {
        for (d, slot) in row.iter_mut().enumerate() {
            let prev = ((ns << 1) & (STATES - 1)) | d;
            let reg = (((ns >> (MEMORY - 1)) as u32) << MEMORY) | prev as u32;
            *slot = outputs(reg);
        }
    }
    for t in 0..steps {
        let (l0, l1) = (llrs[2 * t], llrs[2 * t + 1]);
        let bm = |o: (u8, u8)| {
            (if o.0 == 0 { l0 } else { -l0 }) + (if o.1 == 0 { l1 } else { -l1 })
        };
        let mut dec = 0u64;
        for ns in 0..STATES {
            let p0 = (ns << 1) & (STATES - 1);
            let m0 = metric[p0] + bm(table[ns][0]);
            let m1 = metric[p0 | 1] + bm(table[ns][1]);
            if m1 > m0 {
                next[ns] = m1;
                dec |= 1 << ns;
            } else {
                next[ns] = m0;
            }
        }
        metric = next;
        decisions.push(dec);
    }
    let mut bits = vec![0u8; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        bits[t] = (state >> (MEMORY - 1)) as u8;
        let d = ((decisions[t] >> state) & 1) as usize;
        state = ((state << 1) & (STATES - 1)) | d;
    }
    bits.truncate(steps - TAIL);
    bits
}
