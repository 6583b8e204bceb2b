//! Coded uplink data sharing subcarriers with discovery tones.
//!
//! Each block occupies `data_subcarriers` contiguous subcarriers at a
//! random position in the discovery band for `symbols` OFDM symbols.
//! Discovery tones that land on the block add Rayleigh interference; with
//! puncturing on, the receiver zeroes the LLRs of those resource elements.
//!
//! Every random draw for data, noise, interference and block position comes
//! from one stream per block that does not depend on the overlay or the
//! puncture flag, so runs that differ only in those are paired sample by
//! sample.

use num_complex::Complex64;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use super::{coding, qam, unmap_subcarrier, PhyConfig};
use crate::codec::{encode_tdid, CodecParams, ToneSets};
use crate::error::{Error, Result};
use crate::rng::{self, SimRng};
use crate::stats::Proportion;

pub type BlerEstimate = Proportion;

const INTERLEAVER_SEED: u64 = 0x5eed_1ea7;

#[derive(Debug, Clone, PartialEq)]
pub struct UplinkConfig {
    pub data_subcarriers: usize,
    pub symbols: usize,
    /// Index of the first simulated block; blocks are seeded by index.
    pub first_block: u64,
    pub blocks: u64,
    /// Received overlay tone power over noise power.
    pub overlay_inr_db: f64,
}

impl Default for UplinkConfig {
    fn default() -> Self {
        Self {
            data_subcarriers: 12,
            symbols: 11,
            first_block: 0,
            blocks: 2000,
            overlay_inr_db: 20.0,
        }
    }
}

impl UplinkConfig {
    pub fn resource_elements(&self) -> usize {
        self.data_subcarriers * self.symbols
    }

    pub fn info_bits(&self) -> usize {
        (2 * self.resource_elements()).saturating_sub(coding::TAIL)
    }
}

/// Discovery tones present during the data blocks.
#[derive(Debug, Clone, PartialEq)]
pub enum Overlay {
    None,
    /// The same tone sets in every block.
    Fixed(ToneSets),
    /// Fresh distinct random TDIDs per block, all at zero offset.
    RandomDevices { devices: usize, params: CodecParams },
}

impl Overlay {
    fn for_block(&self, seed: u64, block: u64) -> Result<Option<ToneSets>> {
        match self {
            Overlay::None => Ok(None),
            Overlay::Fixed(s) => Ok(Some(s.clone())),
            Overlay::RandomDevices { devices, params } => {
                let total = params.tdid_count();
                if *devices as u64 > total {
                    return Err(Error::Domain(format!(
                        "{devices} devices exceed {total} TDIDs"
                    )));
                }
                let mut r = rng::derive(seed, rng::tag("ul-overlay"), block);
                let picks = index::sample(&mut r, total as usize, *devices);
                let words = picks
                    .iter()
                    .map(|m| encode_tdid(m as u64, params))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Some(ToneSets::from_codewords(&words, params)))
            }
        }
    }
}

fn interleaver(len: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut SimRng::seed_from_u64(INTERLEAVER_SEED));
    perm
}

fn cn(rng: &mut SimRng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Block error rate of the coded uplink at per-subcarrier SNR `snr_db`.
pub fn uplink_punctured_link(
    snr_db: f64,
    overlay: &Overlay,
    puncture: bool,
    cfg: &PhyConfig,
    ul: &UplinkConfig,
    channels: u32,
    seed: u64,
) -> Result<BlerEstimate> {
    cfg.validate(channels)?;
    let info_len = ul.info_bits();
    if info_len == 0 || ul.blocks == 0 {
        return Err(Error::Config("uplink block carries no information".into()));
    }
    let band = (cfg.channel_stride * channels as usize + cfg.channel_offset).min(cfg.subcarriers);
    if ul.data_subcarriers > band {
        return Err(Error::Config("data block wider than the discovery band".into()));
    }
    if let Some(s) = overlay.for_block(seed, ul.first_block)? {
        if s.symbols() < ul.symbols || s.modulus() != channels {
            return Err(Error::Domain("overlay shape does not match the block".into()));
        }
    }

    let n0 = 10f64.powf(-snr_db / 10.0);
    let i_amp = (10f64.powf(ul.overlay_inr_db / 10.0) * n0).sqrt();
    let coded_len = 4 * ul.resource_elements();
    let perm = interleaver(coded_len);
    let mut est = Proportion::default();
    let mut info = vec![0u8; info_len];
    let mut tx_bits = vec![0u8; coded_len];
    let mut rx_llr = vec![0.0f64; coded_len];
    let mut llr = vec![0.0f64; coded_len];

    for b in ul.first_block..ul.first_block + ul.blocks {
        let mut r = rng::derive(seed, rng::tag("ul-data"), b);
        for x in info.iter_mut() {
            *x = r.random::<bool>() as u8;
        }
        let coded = coding::encode(&info);
        for (i, &p) in perm.iter().enumerate() {
            tx_bits[p] = coded[i];
        }
        let start = r.random_range(0..=band - ul.data_subcarriers);
        let tones = overlay.for_block(seed, b)?;
        for n in 0..ul.symbols {
            for w in 0..ul.data_subcarriers {
                let re = n * ul.data_subcarriers + w;
                let bits = &tx_bits[4 * re..4 * re + 4];
                let noise = cn(&mut r) * n0.sqrt();
                let interference = cn(&mut r) * i_amp;
                let hit = tones.as_ref().is_some_and(|t| {
                    unmap_subcarrier(start + w, channels, cfg).is_some_and(|c| t.contains(n, c))
                });
                let out = &mut rx_llr[4 * re..4 * re + 4];
                if hit && puncture {
                    out.fill(0.0);
                    continue;
                }
                let mut y = qam::modulate(bits) + noise;
                if hit {
                    y += interference;
                }
                qam::demodulate(y, n0, out);
            }
        }
        for (i, &p) in perm.iter().enumerate() {
            llr[i] = rx_llr[p];
        }
        est.add(coding::viterbi(&llr) != info);
    }
    Ok(est)
}

/// SNR where a BLER curve crosses `target`, interpolating log10 BLER
/// linearly in dB. `curve` must be sorted by SNR.
pub fn snr_at_bler(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    let lg = |x: f64| x.max(1e-6).log10();
    curve.windows(2).find_map(|w| {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        if b0 >= target && b1 <= target {
            if (lg(b0) - lg(b1)).abs() < 1e-12 {
                return Some(s0);
            }
            Some(s0 + (s1 - s0) * (lg(b0) - lg(target)) / (lg(b0) - lg(b1)))
        } else {
            None
        }
    })
}
