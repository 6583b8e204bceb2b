//! Tone-level OFDM medium.
//!
//! Only the discovery subcarriers are represented: channel `c` sits on
//! subcarrier `stride * c + offset`. Frequency offsets are integer and in
//! channel units, so a shifted tone either lands on another discovery
//! channel or leaves the discovery band and is lost.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::codec::{Codeword, ToneSets};
use crate::error::{domain, Error, Result};
use crate::rng::{self, SimRng};

pub mod coding;
pub mod qam;
pub mod uplink;

pub use uplink::{uplink_punctured_link, BlerEstimate, Overlay, UplinkConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    /// Independent Rayleigh draw every discovery period.
    BlockRayleigh,
    /// Gauss-Markov evolution across periods with `rho = J0(2 pi f_d T)`.
    Ar1Rayleigh { doppler_hz: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhyConfig {
    pub subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub channel_stride: usize,
    pub channel_offset: usize,
    pub rx_antennas: usize,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Detection threshold over the median noise floor for one antenna.
    pub detection_gamma: f64,
    pub fading: Fading,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            subcarriers: 512,
            subcarrier_spacing_hz: 15_000.0,
            channel_stride: 2,
            channel_offset: 0,
            rx_antennas: 1,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 10.0,
            detection_gamma: 8.0,
            fading: Fading::BlockRayleigh,
        }
    }
}

impl PhyConfig {
    /// Checks the configuration against a field of `p` channels.
    pub fn validate(&self, p: u32) -> Result<()> {
        let last = self.channel_stride * (p as usize - 1) + self.channel_offset;
        if self.channel_stride == 0 || last >= self.subcarriers {
            return Err(Error::Config(format!(
                "{p} channels at stride {} offset {} do not fit in {} subcarriers",
                self.channel_stride, self.channel_offset, self.subcarriers
            )));
        }
        if self.rx_antennas == 0 {
            return Err(Error::Config("rx_antennas must be >= 1".into()));
        }
        if !(self.detection_gamma > 1.0) {
            return Err(Error::Config("detection_gamma must be > 1".into()));
        }
        if let Fading::Ar1Rayleigh { doppler_hz } = self.fading {
            if !(doppler_hz >= 0.0) {
                return Err(Error::Config("doppler must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Noise power per subcarrier in mW.
    pub fn noise_variance_mw(&self) -> f64 {
        let dbm = self.noise_psd_dbm_hz
            + 10.0 * self.subcarrier_spacing_hz.log10()
            + self.noise_figure_db;
        10f64.powf(dbm / 10.0)
    }

    /// Threshold multiplier on the median summed energy.
    ///
    /// For one antenna this is `detection_gamma`. With `A` antennas the
    /// summed noise energy is Erlang(A), and the multiplier is chosen so
    /// the per-channel false-alarm probability stays at `2^-gamma`, the
    /// single-antenna value.
    pub fn threshold_factor(&self) -> f64 {
        let a = self.rx_antennas.max(1) as u32;
        let pfa = (-self.detection_gamma * std::f64::consts::LN_2).exp();
        erlang_upper_quantile(a, pfa) / erlang_upper_quantile(a, 0.5)
    }

    /// AR(1) coefficient between consecutive periods of `period_s` seconds.
    pub fn ar1_rho(&self, period_s: f64) -> f64 {
        match self.fading {
            Fading::BlockRayleigh => 0.0,
            Fading::Ar1Rayleigh { doppler_hz } => {
                bessel_j0(2.0 * std::f64::consts::PI * doppler_hz * period_s)
            }
        }
    }
}

/// Survival function of Erlang(shape, 1).
pub fn erlang_sf(shape: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..shape {
        term *= x / k as f64;
        sum += term;
    }
    (-x).exp() * sum
}

/// `x` such that `erlang_sf(shape, x) = q`.
pub fn erlang_upper_quantile(shape: u32, q: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while erlang_sf(shape, hi) > q {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erlang_sf(shape, mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bessel function of the first kind, order zero (power series; fine for
/// the small arguments of pedestrian Doppler).
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    sum
}

/// Subcarrier carrying discovery channel `c`.
pub fn map_channel(c: u32, p: u32, cfg: &PhyConfig) -> Result<usize> {
    if c >= p {
        return domain(format!("channel {c} outside [0, {p})"));
    }
    let s = cfg.channel_stride * c as usize + cfg.channel_offset;
    if s >= cfg.subcarriers {
        return domain(format!("channel {c} maps past the band"));
    }
    Ok(s)
}

/// Inverse of [`map_channel`]; `None` for subcarriers that carry no channel.
pub fn unmap_subcarrier(s: usize, p: u32, cfg: &PhyConfig) -> Option<u32> {
    let rel = s.checked_sub(cfg.channel_offset)?;
    if rel % cfg.channel_stride != 0 {
        return None;
    }
    let c = (rel / cfg.channel_stride) as u32;
    (c < p).then_some(c)
}

fn complex_normal(rng: &mut SimRng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Channel state for one transmitter/receiver pair over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRealization {
    /// Mean path gain (linear).
    pub path_gain: f64,
    /// Integer frequency offset in channels.
    pub delta: i32,
    /// Unit mean-square small-scale gains, `[symbol][antenna]` row-major.
    gains: Vec<Complex64>,
    antennas: usize,
}

impl LinkRealization {
    pub fn rayleigh(
        path_gain: f64,
        delta: i32,
        symbols: usize,
        antennas: usize,
        rng: &mut SimRng,
    ) -> Self {
        let gains = (0..symbols * antennas)
            .map(|_| complex_normal(rng, 1.0))
            .collect();
        Self {
            path_gain,
            delta,
            gains,
            antennas,
        }
    }

    /// Same small-scale gain on every symbol and antenna.
    pub fn fixed(path_gain: f64, delta: i32, gain: Complex64, symbols: usize, antennas: usize) -> Self {
        Self {
            path_gain,
            delta,
            gains: vec![gain; symbols * antennas],
            antennas,
        }
    }

    pub fn gain(&self, symbol: usize, antenna: usize) -> Complex64 {
        self.gains[symbol * self.antennas + antenna]
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// The same realization seen by only the first `a` antennas.
    pub fn first_antennas(&self, a: usize) -> Self {
        assert!(a <= self.antennas);
        let symbols = self.gains.len() / self.antennas.max(1);
        let gains = (0..symbols)
            .flat_map(|n| (0..a).map(move |k| (n, k)))
            .map(|(n, k)| self.gain(n, k))
            .collect();
        Self {
            path_gain: self.path_gain,
            delta: self.delta,
            gains,
            antennas: a,
        }
    }

    /// One AR(1) step: `h <- rho h + sqrt(1 - rho^2) w`.
    pub fn evolve(&mut self, rho: f64, rng: &mut SimRng) {
        let innov = (1.0 - rho * rho).max(0.0).sqrt();
        for h in &mut self.gains {
            *h = *h * rho + complex_normal(rng, 1.0) * innov;
        }
    }

    /// Next-period state under `fading`.
    pub fn advance(&mut self, cfg: &PhyConfig, period_s: f64, rng: &mut SimRng) {
        let rho = cfg.ar1_rho(period_s);
        self.evolve(rho, rng);
    }
}

/// Received samples on the discovery channels, `[symbol][antenna][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RxGrid {
    symbols: usize,
    antennas: usize,
    channels: usize,
    samples: Vec<Complex64>,
}

impl RxGrid {
    pub fn zeros(symbols: usize, antennas: usize, channels: usize) -> Self {
        Self {
            symbols,
            antennas,
            channels,
            samples: vec![Complex64::new(0.0, 0.0); symbols * antennas * channels],
        }
    }

    #[inline]
    fn idx(&self, symbol: usize, antenna: usize, channel: usize) -> usize {
        (symbol * self.antennas + antenna) * self.channels + channel
    }

    pub fn sample(&self, symbol: usize, antenna: usize, channel: usize) -> Complex64 {
        self.samples[self.idx(symbol, antenna, channel)]
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Energy on `channel` summed over antennas.
    pub fn energy(&self, symbol: usize, channel: usize) -> f64 {
        (0..self.antennas)
            .map(|a| self.sample(symbol, a, channel).norm_sqr())
            .sum()
    }

    /// Elementwise `self + other - base`.
    pub fn combine(&self, other: &RxGrid, base: &RxGrid) -> RxGrid {
        let mut out = self.clone();
        for ((o, a), b) in out.samples.iter_mut().zip(&other.samples).zip(&base.samples) {
            *o = *o + *a - *b;
        }
        out
    }

    pub fn max_abs_diff(&self, other: &RxGrid) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// One transmitter as seen by one receiver.
#[derive(Debug, Clone, Copy)]
pub struct TxSignal<'a> {
    pub codeword: &'a Codeword,
    pub power_mw: f64,
    pub link: &'a LinkRealization,
}

/// Superposes signals on fresh noise at a single receiver.
///
/// The noise is drawn first and always consumes the same number of
/// samples, so grids for different transmitter sets under the same `rng`
/// state differ only by the tone contributions.
pub fn receive(
    signals: &[TxSignal<'_>],
    channels: u32,
    symbols: usize,
    cfg: &PhyConfig,
    rng: &mut SimRng,
) -> RxGrid {
    let antennas = cfg.rx_antennas;
    let mut grid = RxGrid::zeros(symbols, antennas, channels as usize);
    let nv = cfg.noise_variance_mw();
    if nv > 0.0 {
        for s in &mut grid.samples {
            *s = complex_normal(rng, nv);
        }
    }
    for sig in signals {
        let amp = (sig.power_mw * sig.link.path_gain).sqrt();
        for (n, &c) in sig.codeword.tones().iter().enumerate().take(symbols) {
            let shifted = c as i64 + sig.link.delta as i64;
            if shifted < 0 || shifted >= channels as i64 {
                continue;
            }
            for a in 0..antennas {
                let i = grid.idx(n, a, shifted as usize);
                grid.samples[i] += sig.link.gain(n, a) * amp;
            }
        }
    }
    grid
}

/// Generates the received grid at each receiver.
///
/// `links` is keyed by `(tx, rx)`; transmitters without a link to a
/// receiver are not heard there. Noise at receiver `rx` comes from stream
/// `rx` of `seed`.
pub fn transmit(
    assignments: &BTreeMap<usize, Codeword>,
    links: &BTreeMap<(usize, usize), LinkRealization>,
    receivers: &[usize],
    power_mw: f64,
    channels: u32,
    cfg: &PhyConfig,
    seed: u64,
) -> BTreeMap<usize, RxGrid> {
    let symbols = assignments.values().map(Codeword::len).max().unwrap_or(0);
    receivers
        .iter()
        .map(|&rx| {
            let signals: Vec<TxSignal<'_>> = assignments
                .iter()
                .filter_map(|(&tx, cw)| {
                    links.get(&(tx, rx)).map(|link| TxSignal {
                        codeword: cw,
                        power_mw,
                        link,
                    })
                })
                .collect();
            let mut r = rng::derive(seed, rng::tag("rx-noise"), rx as u64);
            (rx, receive(&signals, channels, symbols, cfg, &mut r))
        })
        .collect()
}

/// Energy detector over the discovery channels.
///
/// Per symbol, the noise floor is the median summed energy across all
/// channels; channels above `threshold_factor() * floor` are reported.
pub fn detect_tones(rx: &RxGrid, cfg: &PhyConfig) -> ToneSets {
    let factor = cfg.threshold_factor();
    detect_with_factor(rx, factor)
}

pub(crate) fn detect_with_factor(rx: &RxGrid, factor: f64) -> ToneSets {
    let p = rx.channels as u32;
    let mut out = ToneSets::empty(rx.symbols, p);
    let mut energies = vec![0.0; rx.channels];
    let mut scratch = vec![0.0; rx.channels];
    for n in 0..rx.symbols {
        for (c, e) in energies.iter_mut().enumerate() {
            *e = rx.energy(n, c);
        }
        scratch.copy_from_slice(&energies);
        let mid = scratch.len() / 2;
        let (_, median, _) = scratch.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
        let threshold = factor * *median;
        for (c, &e) in energies.iter().enumerate() {
            if e > threshold {
                out.insert(n, c as u32).expect("channel in range");
            }
        }
    }
    out
}
