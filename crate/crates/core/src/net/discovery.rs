//! End-to-end tone discovery: encode, superpose, detect, decode, and track
//! neighbors frame by frame.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;

use super::baseline::DiscoveryTimes;
use super::topology::LocalDrop;
use super::{linear_to_db, sinr_to_rate};
use crate::codec::{decode_resolved, encode_tdid, CodecParams, Codeword};
use crate::error::{Error, Result};
use crate::mac::{lqi_quantize, NeighborList, TdidLedger, ADMIT_AFTER};
use crate::phy::{detect_tones, receive, LinkRealization, PhyConfig, TxSignal};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct ToneDiscoveryConfig {
    pub params: CodecParams,
    pub phy: PhyConfig,
    pub power_dbm: f64,
    /// Frames simulated before a pair is reported as censored.
    pub horizon_frames: u32,
    /// Per-pair frequency offsets are drawn uniformly in `[-max, max]`.
    pub max_offset: u32,
}

impl Default for ToneDiscoveryConfig {
    fn default() -> Self {
        Self {
            params: CodecParams::default(),
            phy: PhyConfig {
                rx_antennas: 2,
                ..PhyConfig::default()
            },
            power_dbm: 23.0,
            horizon_frames: 20,
            max_offset: 0,
        }
    }
}

impl ToneDiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        self.phy.validate(self.params.p())?;
        if self.max_offset > self.params.delta_window() {
            return Err(Error::Config("max_offset exceeds the decoder's delta window".into()));
        }
        if self.horizon_frames == 0 {
            return Err(Error::Config("horizon_frames must be >= 1".into()));
        }
        Ok(())
    }
}

fn offset(rng: &mut SimRng, max: u32) -> i32 {
    if max == 0 {
        0
    } else {
        rng.random_range(-(max as i32)..=max as i32)
    }
}

/// Runs the discovery pipeline on a drop and returns, for every neighbor
/// pair of `drop.audibility()`, the frame in which the listener completed
/// the admission run for it.
pub fn run_tone_discovery(drop: &LocalDrop, cfg: &ToneDiscoveryConfig, seed: u64) -> Result<DiscoveryTimes> {
    cfg.validate()?;
    let n = drop.devices();
    let params = &cfg.params;
    if n as u64 > params.tdid_count() {
        return Err(Error::Resource(format!("{n} devices exceed {} TDIDs", params.tdid_count())));
    }
    let aud = drop.audibility();

    // Distinct TDIDs through the ledger on a flat scan.
    let mut ledger = TdidLedger::new();
    let flat = vec![0.0; params.tdid_count() as usize];
    let mut acq = rng::derive(seed, rng::tag("tdid"), 0);
    let mut words: Vec<Codeword> = Vec::with_capacity(n);
    let mut owner: BTreeMap<u64, usize> = BTreeMap::new();
    for d in 0..n {
        let t = ledger.acquire(d, 0, &flat, crate::mac::DEFAULT_LOWEST_SET, &mut acq)?;
        owner.insert(t, d);
        words.push(encode_tdid(t, params)?);
    }

    let mut offs = rng::derive(seed, rng::tag("offsets"), 0);
    let deltas: Vec<i32> = (0..n * n).map(|_| offset(&mut offs, cfg.max_offset)).collect();
    let power_mw = 10f64.powf(cfg.power_dbm / 10.0);
    let antennas = cfg.phy.rx_antennas;
    let symbols = params.n();

    let mut lists = vec![NeighborList::new(); n];
    let mut streaks: Vec<BTreeMap<u64, u32>> = vec![BTreeMap::new(); n];
    let mut times = DiscoveryTimes {
        horizon: cfg.horizon_frames,
        times: (0..n).map(|i| vec![None; aud.heard_by(i).len()]).collect(),
    };
    let mut remaining = times.pairs();
    for frame in 1..=cfg.horizon_frames {
        if remaining == 0 {
            break;
        }
        let mut r = rng::derive(seed, rng::tag("frame"), frame as u64);
        for rx in 0..n {
            let links: Vec<LinkRealization> = (0..n)
                .filter(|&tx| tx != rx)
                .map(|tx| LinkRealization::rayleigh(drop.gain(rx, tx), deltas[rx * n + tx], symbols, antennas, &mut r))
                .collect();
            let signals: Vec<TxSignal<'_>> = (0..n)
                .filter(|&tx| tx != rx)
                .zip(&links)
                .map(|(tx, link)| TxSignal { codeword: &words[tx], power_mw, link })
                .collect();
            let grid = receive(&signals, params.p(), symbols, &cfg.phy, &mut r);
            let sets = detect_tones(&grid, &cfg.phy);
            let own = ledger.tdid_of(rx);
            let detections: Vec<(u64, u8)> = decode_resolved(&sets, params)?
                .tdids()
                .filter(|&t| Some(t) != own)
                .map(|t| {
                    let q = owner
                        .get(&t)
                        .map(|&tx| lqi_quantize(sinr_to_rate(drop.tone_snr(rx, tx))))
                        .unwrap_or(0);
                    (t, q)
                })
                .collect();
            lists[rx].update(&detections);
            // A pair counts as discovered once it has the detection run
            // needed for admission, even if a full list keeps it out.
            let run = &mut streaks[rx];
            run.retain(|t, _| detections.iter().any(|d| d.0 == *t));
            for &(t, _) in &detections {
                let k = run.entry(t).or_insert(0);
                *k += 1;
                if *k < ADMIT_AFTER {
                    continue;
                }
                let Some(&tx) = owner.get(&t) else { continue };
                if let Ok(idx) = aud.heard_by(rx).binary_search(&tx) {
                    if times.times[rx][idx].is_none() {
                        times.times[rx][idx] = Some(frame);
                        remaining -= 1;
                    }
                }
            }
        }
    }
    Ok(times)
}

/// Link-level discovery with many simultaneous transmitters at one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDiscoveryConfig {
    pub params: CodecParams,
    pub phy: PhyConfig,
    pub devices: usize,
    /// Mean received SNR per tone and antenna, dB.
    pub tone_snr_db: f64,
    pub max_offset: u32,
}

impl LinkDiscoveryConfig {
    /// Time-domain sample SNR equivalent of the per-tone SNR.
    pub fn sample_snr_db(&self) -> f64 {
        self.tone_snr_db - linear_to_db(self.phy.subcarriers as f64)
    }
}

/// Counts accumulated over discovery periods.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkOutcome {
    pub periods: u64,
    pub transmitted: u64,
    /// Transmitted TDIDs missing from the decoded set.
    pub erased: u64,
    pub decoded: u64,
    /// Decoded TDIDs nobody transmitted.
    pub false_decodes: u64,
}

impl LinkOutcome {
    pub fn erasure_rate(&self) -> f64 {
        self.erased as f64 / self.transmitted.max(1) as f64
    }

    pub fn error_rate(&self) -> f64 {
        self.false_decodes as f64 / self.decoded.max(1) as f64
    }

    pub fn merge(&mut self, o: &LinkOutcome) {
        self.periods += o.periods;
        self.transmitted += o.transmitted;
        self.erased += o.erased;
        self.decoded += o.decoded;
        self.false_decodes += o.false_decodes;
    }
}

/// Simulates periods `first..first + periods`. Period `k` draws its TDIDs,
/// offsets and fading from stream `k` only, so results for different SNRs
/// or antenna counts share everything but the scaling and extra antennas.
pub fn run_link_discovery(cfg: &LinkDiscoveryConfig, first: u64, periods: u64, seed: u64) -> Result<LinkOutcome> {
    cfg.phy.validate(cfg.params.p())?;
    let params = &cfg.params;
    if cfg.devices as u64 > params.tdid_count() || cfg.devices == 0 {
        return Err(Error::Config(format!("device count {} out of range", cfg.devices)));
    }
    if cfg.max_offset > params.delta_window() {
        return Err(Error::Config("max_offset exceeds the decoder's delta window".into()));
    }
    let nv = cfg.phy.noise_variance_mw();
    let gain = nv * 10f64.powf(cfg.tone_snr_db / 10.0);
    let symbols = params.n();
    let antennas = cfg.phy.rx_antennas;
    let mut out = LinkOutcome::default();
    for k in first..first + periods {
        let mut r = rng::derive(seed, rng::tag("link-period"), k);
        let picks: Vec<u64> = index::sample(&mut r, params.tdid_count() as usize, cfg.devices)
            .iter()
            .map(|m| m as u64)
            .collect();
        let words = picks
            .iter()
            .map(|&m| encode_tdid(m, params))
            .collect::<Result<Vec<_>>>()?;
        // Draw the widest fading so antenna subsets are nested.
        let links: Vec<LinkRealization> = picks
            .iter()
            .map(|_| {
                let d = offset(&mut r, cfg.max_offset);
                let full = LinkRealization::rayleigh(gain, d, symbols, 4.max(antennas), &mut r);
                full.first_antennas(antennas)
            })
            .collect();
        let signals: Vec<TxSignal<'_>> = words
            .iter()
            .zip(&links)
            .map(|(w, l)| TxSignal { codeword: w, power_mw: 1.0, link: l })
            .collect();
        let mut noise = rng::derive(seed, rng::tag("link-noise"), k);
        let grid = receive(&signals, params.p(), symbols, &cfg.phy, &mut noise);
        let sets = detect_tones(&grid, &cfg.phy);
        let decoded = decode_resolved(&sets, params)?;
        out.periods += 1;
        out.transmitted += picks.len() as u64;
        out.erased += picks.iter().filter(|&&m| !decoded.contains(m)).count() as u64;
        out.decoded += decoded.len() as u64;
        out.false_decodes += decoded.tdids().filter(|m| !picks.contains(m)).count() as u64;
    }
    Ok(out)
}
