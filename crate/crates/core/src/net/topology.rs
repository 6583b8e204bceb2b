//! Device drops and long-term link budgets.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{cost231_hata, db_to_linear, linear_to_db, noise_dbm, sinr_to_rate, Audibility};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    /// 1, 7 or 19 hexagonal cells.
    pub cells: usize,
    pub site_distance_m: f64,
    pub devices_per_cell: usize,
    pub bs_height_m: f64,
    pub device_height_m: f64,
    pub bs_power_dbm: f64,
    pub device_power_dbm: f64,
    pub carrier_mhz: f64,
    pub metro_correction_db: f64,
    pub noise_psd_dbm_hz: f64,
    pub bs_noise_figure_db: f64,
    pub device_noise_figure_db: f64,
    /// Bandwidth of one uplink or device-to-device data allocation.
    pub uplink_bandwidth_hz: f64,
    pub downlink_bandwidth_hz: f64,
    /// Rise over thermal from co-channel uplink traffic.
    pub interference_over_thermal_db: f64,
    pub tone_bandwidth_hz: f64,
    /// Mean tone SNR above which a device counts as a neighbor.
    pub neighbor_snr_db: f64,
    /// Closest allowed device distance to a base station.
    pub min_bs_distance_m: f64,
    /// Log-normal shadowing standard deviation on device-to-base-station links.
    pub bs_shadowing_db: f64,
    /// Log-normal shadowing standard deviation on device-to-device links.
    pub d2d_shadowing_db: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            cells: 7,
            site_distance_m: 1000.0,
            devices_per_cell: 25,
            bs_height_m: 30.0,
            device_height_m: 1.5,
            bs_power_dbm: 43.0,
            device_power_dbm: 23.0,
            carrier_mhz: 2000.0,
            metro_correction_db: 3.0,
            noise_psd_dbm_hz: -174.0,
            bs_noise_figure_db: 6.0,
            device_noise_figure_db: 10.0,
            uplink_bandwidth_hz: 360e3,
            downlink_bandwidth_hz: 5e6,
            interference_over_thermal_db: 3.0,
            tone_bandwidth_hz: 15e3,
            neighbor_snr_db: 10.0,
            min_bs_distance_m: 35.0,
            bs_shadowing_db: 8.0,
            d2d_shadowing_db: 8.0,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        if ![1, 7, 19].contains(&self.cells) {
            return Err(Error::Config(format!("cells must be 1, 7 or 19, got {}", self.cells)));
        }
        if !(self.site_distance_m > 0.0) || self.devices_per_cell == 0 {
            return Err(Error::Config("empty topology".into()));
        }
        if !(self.bs_shadowing_db >= 0.0 && self.d2d_shadowing_db >= 0.0) {
            return Err(Error::Config("shadowing must be non-negative".into()));
        }
        if !(self.min_bs_distance_m < self.site_distance_m / 2.0) {
            return Err(Error::Config("min_bs_distance_m exceeds the cell".into()));
        }
        Ok(())
    }

    /// Device-to-device path gain (both ends at device height).
    pub fn d2d_gain(&self, d_m: f64) -> f64 {
        db_to_linear(-cost231_hata(
            d_m / 1000.0,
            self.carrier_mhz,
            self.device_height_m,
            self.device_height_m,
            self.metro_correction_db,
        ))
    }

    pub fn bs_gain(&self, d_m: f64) -> f64 {
        db_to_linear(-cost231_hata(
            d_m / 1000.0,
            self.carrier_mhz,
            self.bs_height_m,
            self.device_height_m,
            self.metro_correction_db,
        ))
    }

    fn tone_noise_mw(&self) -> f64 {
        db_to_linear(noise_dbm(self.noise_psd_dbm_hz, self.tone_bandwidth_hz, self.device_noise_figure_db))
    }

    /// Mean SNR of a discovery tone over `gain`.
    pub fn tone_snr(&self, gain: f64) -> f64 {
        db_to_linear(self.device_power_dbm) * gain / self.tone_noise_mw()
    }

    fn ul_noise_mw(&self, nf_db: f64) -> f64 {
        db_to_linear(
            noise_dbm(self.noise_psd_dbm_hz, self.uplink_bandwidth_hz, nf_db) + self.interference_over_thermal_db,
        )
    }

    /// Device-to-device data rate over `gain`; zero below the neighbor floor.
    pub fn d2d_rate(&self, gain: f64) -> f64 {
        if linear_to_db(self.tone_snr(gain)) < self.neighbor_snr_db {
            return 0.0;
        }
        sinr_to_rate(db_to_linear(self.device_power_dbm) * gain / self.ul_noise_mw(self.device_noise_figure_db))
    }

    /// Uplink rate to a base station over `gain`.
    pub fn ul_rate(&self, gain: f64) -> f64 {
        sinr_to_rate(db_to_linear(self.device_power_dbm) * gain / self.ul_noise_mw(self.bs_noise_figure_db))
    }
}

/// Hexagonal layout with devices dropped uniformly in each cell.
#[derive(Debug, Clone)]
pub struct Topology {
    pub cfg: TopologyConfig,
    pub sites: Vec<(f64, f64)>,
    pub positions: Vec<(f64, f64)>,
    /// Cell each device was dropped in.
    pub home: Vec<usize>,
    /// Strongest long-term base station for each device.
    pub serving: Vec<usize>,
    /// Shadowing in dB, `[device][cell]`.
    bs_shadow: Vec<f64>,
    /// Symmetric device-to-device shadowing in dB, `[a][b]`.
    d2d_shadow: Vec<f64>,
}

fn hex_sites(cells: usize, isd: f64) -> Vec<(f64, f64)> {
    let mut sites = vec![(0.0, 0.0)];
    // Axial coordinates of rings 1 and 2.
    let dirs = [(1i32, 0i32), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];
    let rings = match cells {
        1 => 0,
        7 => 1,
        _ => 2,
    };
    for ring in 1..=rings {
        let (mut q, mut r) = (dirs[4].0 * ring, dirs[4].1 * ring);
        for dir in dirs {
            for _ in 0..ring {
                let x = isd * (q as f64 + r as f64 / 2.0);
                let y = isd * (r as f64 * 3f64.sqrt() / 2.0);
                sites.push((x, y));
                q += dir.0;
                r += dir.1;
            }
        }
    }
    sites
}

fn in_hex(dx: f64, dy: f64, isd: f64) -> bool {
    let half = isd / 2.0;
    (0..3).all(|k| {
        let a = std::f64::consts::PI / 3.0 * k as f64;
        (dx * a.cos() + dy * a.sin()).abs() <= half
    })
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

impl Topology {
    pub fn drop(cfg: &TopologyConfig, rng: &mut SimRng) -> Result<Self> {
        cfg.validate()?;
        let isd = cfg.site_distance_m;
        let sites = hex_sites(cfg.cells, isd);
        let r_out = isd / 3f64.sqrt();
        let mut positions = Vec::new();
        let mut home = Vec::new();
        for (c, &(sx, sy)) in sites.iter().enumerate() {
            let mut placed = 0;
            while placed < cfg.devices_per_cell {
                let dx = rng.random_range(-r_out..r_out);
                let dy = rng.random_range(-r_out..r_out);
                if !in_hex(dx, dy, isd) || dx.hypot(dy) < cfg.min_bs_distance_m {
                    continue;
                }
                positions.push((sx + dx, sy + dy));
                home.push(c);
                placed += 1;
            }
        }
        let n = positions.len();
        let cells = sites.len();
        let bs_shadow: Vec<f64> = (0..n * cells)
            .map(|_| cfg.bs_shadowing_db * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut d2d_shadow = vec![0.0; n * n];
        for a in 0..n {
            for b in a + 1..n {
                let x = cfg.d2d_shadowing_db * rng.sample::<f64, _>(StandardNormal);
                d2d_shadow[a * n + b] = x;
                d2d_shadow[b * n + a] = x;
            }
        }
        let mut topo = Self {
            cfg: cfg.clone(),
            sites,
            positions,
            home,
            serving: Vec::new(),
            bs_shadow,
            d2d_shadow,
        };
        topo.serving = (0..n)
            .map(|d| {
                (0..cells)
                    .max_by(|&a, &b| topo.bs_gain(d, a).total_cmp(&topo.bs_gain(d, b)).then(b.cmp(&a)))
                    .unwrap()
            })
            .collect();
        Ok(topo)
    }

    pub fn devices(&self) -> usize {
        self.positions.len()
    }

    /// Devices dropped in the centre cell.
    pub fn centre_devices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.devices()).filter(|&d| self.home[d] == 0)
    }

    pub fn bs_gain(&self, device: usize, cell: usize) -> f64 {
        let shadow = self.bs_shadow[device * self.sites.len() + cell];
        self.cfg.bs_gain(dist(self.positions[device], self.sites[cell])) * db_to_linear(shadow)
    }

    pub fn d2d_gain(&self, a: usize, b: usize) -> f64 {
        let shadow = self.d2d_shadow[a * self.devices() + b];
        self.cfg.d2d_gain(dist(self.positions[a], self.positions[b])) * db_to_linear(shadow)
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        dist(self.positions[a], self.positions[b])
    }

    /// Uplink rate from a device to its serving base station.
    pub fn ul_rate(&self, device: usize) -> f64 {
        self.cfg.ul_rate(self.bs_gain(device, self.serving[device]))
    }

    /// Full-load downlink rate at a device.
    pub fn dl_rate(&self, device: usize) -> f64 {
        let p = db_to_linear(self.cfg.bs_power_dbm);
        let own = self.serving[device];
        let signal = p * self.bs_gain(device, own);
        let interference: f64 = (0..self.sites.len())
            .filter(|&c| c != own)
            .map(|c| p * self.bs_gain(device, c))
            .sum();
        let noise = db_to_linear(noise_dbm(
            self.cfg.noise_psd_dbm_hz,
            self.cfg.downlink_bandwidth_hz,
            self.cfg.device_noise_figure_db,
        ));
        sinr_to_rate(signal / (noise + interference))
    }

    /// Discovery tone strength in dBm of `tx` at `rx`.
    pub fn tone_strength_dbm(&self, rx: usize, tx: usize) -> f64 {
        self.cfg.device_power_dbm + linear_to_db(self.d2d_gain(rx, tx))
    }

    /// Strength in dBm of a device's tone at its serving base station.
    pub fn tone_strength_at_bs_dbm(&self, device: usize) -> f64 {
        self.cfg.device_power_dbm + linear_to_db(self.bs_gain(device, self.serving[device]))
    }

    pub fn pair_table(&self) -> PairTable {
        let n = self.devices();
        let mut gain = vec![0.0; n * n];
        let mut rate = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    let g = self.d2d_gain(j, k);
                    gain[j * n + k] = g;
                    rate[j * n + k] = self.cfg.d2d_rate(g);
                }
            }
        }
        PairTable {
            n,
            gain,
            rate,
            power_dbm: self.cfg.device_power_dbm,
        }
    }
}

/// Per ordered device pair `(j, k)`: path gain and the rate from `k` to `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    n: usize,
    gain: Vec<f64>,
    rate: Vec<f64>,
    power_dbm: f64,
}

impl PairTable {
    pub fn from_rates(n: usize, rates: &[f64]) -> Result<Self> {
        if rates.len() != n * n || rates.iter().any(|&r| !(r >= 0.0)) {
            return Err(Error::Domain("rate table must be n*n non-negative values".into()));
        }
        Ok(Self {
            n,
            gain: vec![0.0; n * n],
            rate: rates.to_vec(),
            power_dbm: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn gain(&self, j: usize, k: usize) -> f64 {
        self.gain[j * self.n + k]
    }

    /// Rate supported from `k` to `j`.
    pub fn rate(&self, j: usize, k: usize) -> f64 {
        self.rate[j * self.n + k]
    }

    pub fn strength_dbm(&self, j: usize, k: usize) -> f64 {
        self.power_dbm + linear_to_db(self.gain(j, k))
    }

    /// Devices `j` hears above the neighbor floor.
    pub fn neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&k| k != j && self.rate(j, k) > 0.0)
    }

    /// Devices that hear `k` above the neighbor floor.
    pub fn neighbors_from(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| j != k && self.rate(j, k) > 0.0)
    }
}

/// Devices dropped in a disc, for discovery experiments. Gains follow
/// distance only; shadowing is not applied.
#[derive(Debug, Clone)]
pub struct LocalDrop {
    pub positions: Vec<(f64, f64)>,
    /// Symmetric device-to-device path gains, row-major.
    gain: Vec<f64>,
    tone_snr: Vec<f64>,
    neighbor_snr_db: f64,
}

impl LocalDrop {
    pub fn disc(devices: usize, radius_m: f64, cfg: &TopologyConfig, rng: &mut SimRng) -> Self {
        let positions: Vec<(f64, f64)> = (0..devices)
            .map(|_| {
                let r = radius_m * rng.random::<f64>().sqrt();
                let a = rng.random::<f64>() * std::f64::consts::TAU;
                (r * a.cos(), r * a.sin())
            })
            .collect();
        let n = devices;
        let mut gain = vec![0.0; n * n];
        let mut tone_snr = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    let g = cfg.d2d_gain(dist(positions[a], positions[b]));
                    gain[a * n + b] = g;
                    tone_snr[a * n + b] = cfg.tone_snr(g);
                }
            }
        }
        Self {
            positions,
            gain,
            tone_snr,
            neighbor_snr_db: cfg.neighbor_snr_db,
        }
    }

    pub fn devices(&self) -> usize {
        self.positions.len()
    }

    pub fn gain(&self, a: usize, b: usize) -> f64 {
        self.gain[a * self.devices() + b]
    }

    pub fn tone_snr(&self, rx: usize, tx: usize) -> f64 {
        self.tone_snr[rx * self.devices() + tx]
    }

    pub fn audibility(&self) -> Audibility {
        let floor = db_to_linear(self.neighbor_snr_db);
        Audibility::from_fn(self.devices(), |rx, tx| self.tone_snr(rx, tx) >= floor)
    }
}
