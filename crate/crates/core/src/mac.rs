//! Discovery scheduling, distributed TDID acquisition, silent periods and
//! the neighbor list.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::codec::{encode_tdid, CodecParams};
use crate::error::{domain, Error, Result};
use crate::phy::{detect_tones, PhyConfig, RxGrid};
use crate::rng::mix64;

/// Consecutive detections needed before a neighbor is admitted.
pub const ADMIT_AFTER: u32 = 4;
/// Consecutive misses after which an admitted neighbor is dropped.
pub const DROP_AFTER: u32 = 4;
pub const MAX_NEIGHBORS: usize = 32;
/// Top of the LQI scale in bit/s/Hz.
pub const LQI_RATE_MAX: f64 = 6.0;
pub const DEFAULT_SCAN_WINDOW: usize = 4;
pub const DEFAULT_LOWEST_SET: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoverySchedule {
    pub frame_length_subframes: usize,
    pub discovery_subframe_index: usize,
    pub symbols_per_subframe: usize,
    pub discovery_symbols: Vec<usize>,
}

impl Default for DiscoverySchedule {
    fn default() -> Self {
        Self {
            frame_length_subframes: 10,
            discovery_subframe_index: 0,
            symbols_per_subframe: 14,
            discovery_symbols: (3..14).collect(),
        }
    }
}

impl DiscoverySchedule {
    /// The first three symbols carry base-station control and are off limits.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.discovery_symbols.len() != n {
            return Err(Error::Config(format!(
                "{} discovery symbols for codeword length {n}",
                self.discovery_symbols.len()
            )));
        }
        if self.discovery_subframe_index >= self.frame_length_subframes {
            return Err(Error::Config("discovery subframe outside the frame".into()));
        }
        let distinct: BTreeSet<_> = self.discovery_symbols.iter().collect();
        if distinct.len() != n
            || self
                .discovery_symbols
                .iter()
                .any(|&s| s < 3 || s >= self.symbols_per_subframe)
        {
            return Err(Error::Config("discovery symbols must be distinct and in 3..symbols_per_subframe".into()));
        }
        Ok(())
    }
}

/// Mean received energy on each TDID's codeword tones over the given
/// periods.
pub fn tdid_energy_scan(grids: &[RxGrid], params: &CodecParams) -> Result<Vec<f64>> {
    if grids.is_empty() {
        return domain("energy scan needs at least one period");
    }
    (0..params.tdid_count())
        .map(|m| {
            let cw = encode_tdid(m, params)?;
            let total: f64 = grids
                .iter()
                .flat_map(|g| {
                    cw.tones()
                        .iter()
                        .enumerate()
                        .map(move |(n, &c)| g.energy(n, c as usize))
                })
                .sum();
            Ok(total / grids.len() as f64)
        })
        .collect()
}

/// Picks uniformly among the `lowest` least-energetic entries of `scan`
/// (ties by index).
pub fn acquire_tdid(scan: &[f64], lowest: usize, rng: &mut impl Rng) -> Result<u64> {
    if lowest == 0 || lowest > scan.len() {
        return domain(format!("lowest set size {lowest} not in 1..={}", scan.len()));
    }
    let mut order: Vec<usize> = (0..scan.len()).collect();
    order.sort_by(|&a, &b| scan[a].total_cmp(&scan[b]).then(a.cmp(&b)));
    Ok(order[rng.random_range(0..lowest)] as u64)
}

/// Whether `cell_id`'s discovery slot is silent in `frame`.
pub fn silent_pattern(cell_id: u64, frame: u64, duty: f64) -> bool {
    if duty <= 0.0 {
        return false;
    }
    if duty >= 1.0 {
        return true;
    }
    let h = mix64(mix64(cell_id) ^ frame);
    ((h >> 11) as f64 / (1u64 << 53) as f64) < duty
}

/// Whether a device listening in its own silent period hears its TDID in
/// use elsewhere: at least `theta` of its codeword tones pass the same
/// energy detector used for discovery.
pub fn reacquisition_needed(silent: &RxGrid, tdid: u64, params: &CodecParams, phy: &PhyConfig) -> Result<bool> {
    let cw = encode_tdid(tdid, params)?;
    let sets = detect_tones(silent, phy);
    let hot = cw.tones().iter().enumerate().filter(|&(n, &c)| sets.contains(n, c)).count();
    Ok(hot >= params.theta())
}

/// Three-bit link quality from a spectral efficiency.
pub fn lqi_quantize(rate_bps_hz: f64) -> u8 {
    let level = (8.0 * rate_bps_hz.max(0.0) / LQI_RATE_MAX).floor();
    level.min(7.0) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborEntry {
    pub tdid: u64,
    pub consecutive_hits: u32,
    pub consecutive_misses: u32,
    pub lqi: u8,
    pub admitted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NeighborEvent {
    Add(u64),
    Drop(u64),
    LqiChange(u64, u8),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NeighborList {
    entries: BTreeMap<u64, NeighborEntry>,
}

impl NeighborList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, tdid: u64) -> Option<&NeighborEntry> {
        self.entries.get(&tdid)
    }

    pub fn admitted(&self) -> impl Iterator<Item = &NeighborEntry> {
        self.entries.values().filter(|e| e.admitted)
    }

    pub fn admitted_count(&self) -> usize {
        self.admitted().count()
    }

    pub fn is_admitted(&self, tdid: u64) -> bool {
        self.entries.get(&tdid).is_some_and(|e| e.admitted)
    }

    /// Applies one period of detections `(tdid, lqi)` and returns the
    /// changes to report.
    pub fn update(&mut self, detections: &[(u64, u8)]) -> Vec<NeighborEvent> {
        let seen: BTreeMap<u64, u8> = detections.iter().map(|&(t, q)| (t, q.min(7))).collect();
        let mut events = Vec::new();

        let mut gone = Vec::new();
        for (t, e) in self.entries.iter_mut() {
            if seen.contains_key(t) {
                continue;
            }
            e.consecutive_hits = 0;
            e.consecutive_misses += 1;
            if !e.admitted {
                gone.push(*t);
            } else if e.consecutive_misses >= DROP_AFTER {
                gone.push(*t);
                events.push(NeighborEvent::Drop(*t));
            }
        }
        for t in gone {
            self.entries.remove(&t);
        }

        let mut ready = Vec::new();
        for (&t, &q) in &seen {
            let e = self.entries.entry(t).or_insert(NeighborEntry {
                tdid: t,
                consecutive_hits: 0,
                consecutive_misses: 0,
                lqi: q,
                admitted: false,
            });
            e.consecutive_hits = e.consecutive_hits.saturating_add(1);
            e.consecutive_misses = 0;
            if e.admitted {
                if e.lqi != q {
                    e.lqi = q;
                    events.push(NeighborEvent::LqiChange(t, q));
                }
                continue;
            }
            e.lqi = q;
            if e.consecutive_hits >= ADMIT_AFTER {
                ready.push((q, t));
            }
        }

        // Strongest candidates first so a weak newcomer is not admitted only
        // to be evicted by a stronger one in the same period.
        ready.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (q, t) in ready {
            if self.admitted_count() < MAX_NEIGHBORS {
                self.entries.get_mut(&t).unwrap().admitted = true;
                events.push(NeighborEvent::Add(t));
                continue;
            }
            let weakest = self
                .admitted()
                .min_by(|a, b| a.lqi.cmp(&b.lqi).then(a.tdid.cmp(&b.tdid)))
                .map(|e| (e.tdid, e.lqi));
            if let Some((w, wq)) = weakest {
                if q > wq {
                    self.entries.remove(&w);
                    self.entries.get_mut(&t).unwrap().admitted = true;
                    events.push(NeighborEvent::Drop(w));
                    events.push(NeighborEvent::Add(t));
                }
            }
        }
        events
    }
}

/// Rebuilds the admitted set from an event stream.
pub fn replay(events: &[NeighborEvent]) -> BTreeSet<u64> {
    let mut set = BTreeSet::new();
    for ev in events {
        match *ev {
            NeighborEvent::Add(t) => {
                set.insert(t);
            }
            NeighborEvent::Drop(t) => {
                set.remove(&t);
            }
            NeighborEvent::LqiChange(..) => {}
        }
    }
    set
}

/// The network's record of TDID registrations.
#[derive(Debug, Clone, Default)]
pub struct TdidLedger {
    device: BTreeMap<usize, (u64, u64)>,
    cell: BTreeMap<u64, BTreeMap<u64, usize>>,
}

impl TdidLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tdid_of(&self, device: usize) -> Option<u64> {
        self.device.get(&device).map(|&(_, t)| t)
    }

    pub fn registered(&self, cell: u64) -> impl Iterator<Item = (u64, usize)> + '_ {
        self.cell
            .get(&cell)
            .into_iter()
            .flat_map(|m| m.iter().map(|(&t, &d)| (t, d)))
    }

    /// Registers `tdid` for `device` in `cell`. Returns `false` (and changes
    /// nothing) when another device in the cell already holds it.
    pub fn register(&mut self, device: usize, cell: u64, tdid: u64) -> bool {
        if let Some(&holder) = self.cell.get(&cell).and_then(|m| m.get(&tdid)) {
            return holder == device;
        }
        self.release(device);
        self.cell.entry(cell).or_default().insert(tdid, device);
        self.device.insert(device, (cell, tdid));
        true
    }

    pub fn release(&mut self, device: usize) {
        if let Some((c, t)) = self.device.remove(&device) {
            if let Some(m) = self.cell.get_mut(&c) {
                m.remove(&t);
            }
        }
    }

    /// Acquires against `scan`, reacquiring until the ledger accepts.
    pub fn acquire(
        &mut self,
        device: usize,
        cell: u64,
        scan: &[f64],
        lowest: usize,
        rng: &mut impl Rng,
    ) -> Result<u64> {
        let mut scan = scan.to_vec();
        for _ in 0..scan.len() {
            let t = acquire_tdid(&scan, lowest.min(scan.len()), rng)?;
            if self.register(device, cell, t) {
                return Ok(t);
            }
            scan[t as usize] = f64::INFINITY;
        }
        Err(Error::Resource(format!("no free TDID in cell {cell}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive, SimRng};
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn default_schedule_is_valid() {
        let s = DiscoverySchedule::default();
        assert!(s.validate(11).is_ok());
        assert_eq!(s.discovery_symbols.first(), Some(&3));
        assert!(s.validate(10).is_err());
        let bad = DiscoverySchedule { discovery_symbols: (2..13).collect(), ..s };
        assert!(bad.validate(11).is_err());
    }

    #[test]
    fn acquire_strict_minimum() {
        let mut scan = vec![5.0; 199];
        scan[42] = 0.1;
        let mut r = SimRng::seed_from_u64(0);
        assert_eq!(acquire_tdid(&scan, 1, &mut r).unwrap(), 42);
        assert!(acquire_tdid(&scan, 200, &mut r).is_err());
        assert!(acquire_tdid(&scan, 0, &mut r).is_err());
    }

    #[test]
    fn acquire_uniform_over_lowest_set() {
        let scan = vec![1.0; 199];
        let trials = 10_000;
        let mut counts = [0u32; 4];
        for i in 0..trials {
            let mut r = derive(11, 0, i);
            let c = acquire_tdid(&scan, 4, &mut r).unwrap();
            counts[c as usize] += 1;
        }
        let expect = trials as f64 / 4.0;
        let sd = (trials as f64 * 0.25 * 0.75).sqrt();
        let mut chi2 = 0.0;
        for &c in &counts {
            assert!((c as f64 - expect).abs() < 3.0 * sd, "{counts:?}");
            chi2 += (c as f64 - expect).powi(2) / expect;
        }
        // 3 degrees of freedom, 99.9% point.
        assert!(chi2 < 16.27);
    }

    #[test]
    fn lowest_set_reduces_simultaneous_collisions() {
        let mut scan = vec![3.0; 199];
        for (i, s) in scan.iter_mut().take(6).enumerate() {
            *s = i as f64 * 0.01;
        }
        let trials = 4000;
        let rate = |l: usize| {
            let mut hits = 0;
            for i in 0..trials {
                let mut a = derive(5, 1, i);
                let mut b = derive(5, 2, i);
                hits += (acquire_tdid(&scan, l, &mut a).unwrap() == acquire_tdid(&scan, l, &mut b).unwrap()) as u32;
            }
            hits as f64 / trials as f64
        };
        assert_eq!(rate(1), 1.0);
        let r4 = rate(4);
        assert!((r4 - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / trials as f64).sqrt(), "{r4}");
    }

    #[test]
    fn silent_pattern_duty() {
        assert!((0..1000).all(|f| !silent_pattern(3, f, 0.0)));
        assert!((0..1000).all(|f| silent_pattern(3, f, 1.0)));
        let frames = 100_000;
        let silent = (0..frames).filter(|&f| silent_pattern(7, f, 0.1)).count();
        assert!((silent as f64 / frames as f64 - 0.1).abs() < 0.005);
        assert_eq!(silent_pattern(7, 12, 0.3), silent_pattern(7, 12, 0.3));
        let differ = (0..1000).filter(|&f| silent_pattern(1, f, 0.5) != silent_pattern(2, f, 0.5)).count();
        assert!(differ > 300);
    }

    #[test]
    fn lqi_levels() {
        assert_eq!(lqi_quantize(0.0), 0);
        assert_eq!(lqi_quantize(6.0), 7);
        assert_eq!(lqi_quantize(100.0), 7);
        assert_eq!(lqi_quantize(2.25), 3);
        assert_eq!(lqi_quantize(0.749), 0);
        assert_eq!(lqi_quantize(0.75), 1);
    }

    #[test]
    fn admitted_on_fourth_period() {
        let mut nl = NeighborList::new();
        for _ in 0..3 {
            assert!(nl.update(&[(9, 5)]).is_empty());
            assert!(!nl.is_admitted(9));
        }
        assert_eq!(nl.update(&[(9, 5)]), vec![NeighborEvent::Add(9)]);
        assert!(nl.is_admitted(9));
        assert!(nl.update(&[(9, 5)]).is_empty());
        assert_eq!(nl.update(&[(9, 6)]), vec![NeighborEvent::LqiChange(9, 6)]);
    }

    #[test]
    fn interrupted_run_resets() {
        let mut nl = NeighborList::new();
        for _ in 0..3 {
            nl.update(&[(9, 5)]);
        }
        assert!(nl.update(&[]).is_empty());
        assert!(nl.get(9).is_none());
        for _ in 0..3 {
            assert!(nl.update(&[(9, 5)]).is_empty());
        }
        assert_eq!(nl.update(&[(9, 5)]), vec![NeighborEvent::Add(9)]);
    }

    #[test]
    fn drop_after_four_misses() {
        let mut nl = NeighborList::new();
        for _ in 0..4 {
            nl.update(&[(1, 2)]);
        }
        for _ in 0..3 {
            assert!(nl.update(&[]).is_empty());
            assert!(nl.is_admitted(1));
        }
        assert_eq!(nl.update(&[]), vec![NeighborEvent::Drop(1)]);
        assert_eq!(nl.admitted_count(), 0);
    }

    #[test]
    fn full_list_evicts_weakest() {
        let mut nl = NeighborList::new();
        let all: Vec<(u64, u8)> = (0..32).map(|t| (t, if t == 5 || t == 9 { 1 } else { 4 })).collect();
        for _ in 0..4 {
            nl.update(&all);
        }
        assert_eq!(nl.admitted_count(), 32);
        let mut with_new = all.clone();
        with_new.push((100, 7));
        for _ in 0..3 {
            nl.update(&with_new);
        }
        let ev = nl.update(&with_new);
        assert_eq!(ev, vec![NeighborEvent::Drop(5), NeighborEvent::Add(100)]);
        assert_eq!(nl.admitted_count(), 32);
        // A newcomer no better than the weakest waits.
        let mut weak = with_new.clone();
        weak.retain(|&(t, _)| t != 5);
        weak.push((200, 1));
        for _ in 0..6 {
            let ev = nl.update(&weak);
            assert!(!ev.contains(&NeighborEvent::Add(200)));
        }
    }

    proptest! {
        #[test]
        fn event_stream_is_a_pure_delta(
            periods in proptest::collection::vec(
                proptest::collection::vec((0u64..48, 0u8..8), 0..40), 1..40)
        ) {
            let mut nl = NeighborList::new();
            let mut log = Vec::new();
            let mut streak: BTreeMap<u64, u32> = BTreeMap::new();
            let mut best: BTreeMap<u64, u32> = BTreeMap::new();
            for det in &periods {
                log.extend(nl.update(det));
                let seen: BTreeSet<u64> = det.iter().map(|d| d.0).collect();
                for t in 0..48 {
                    let s = streak.entry(t).or_default();
                    *s = if seen.contains(&t) { *s + 1 } else { 0 };
                    let b = best.entry(t).or_default();
                    *b = (*b).max(*s);
                }
                prop_assert!(nl.admitted_count() <= MAX_NEIGHBORS);
                let admitted: BTreeSet<u64> = nl.admitted().map(|e| e.tdid).collect();
                prop_assert_eq!(&replay(&log), &admitted);
                for t in &admitted {
                    prop_assert!(best[t] >= ADMIT_AFTER);
                }
            }
        }
    }

    #[test]
    fn admission_requires_four_in_a_row() {
        // Alternating detections never admit.
        let mut nl = NeighborList::new();
        for i in 0..20 {
            let det = if i % 4 == 3 { vec![] } else { vec![(7, 3)] };
            assert!(nl.update(&det).is_empty());
        }
    }

    #[test]
    fn ledger_rejects_duplicates_and_reacquires() {
        let mut ledger = TdidLedger::new();
        let scan = vec![0.0; 199];
        let mut held = BTreeSet::new();
        for d in 0..150 {
            let mut r = derive(3, 0, d as u64);
            let t = ledger.acquire(d, 0, &scan, 4, &mut r).unwrap();
            assert!(t < 199);
            assert!(held.insert(t), "duplicate {t}");
        }
        assert_eq!(ledger.registered(0).count(), 150);
        assert!(!ledger.register(999, 0, ledger.tdid_of(0).unwrap()));
        assert!(ledger.register(999, 1, ledger.tdid_of(0).unwrap()));
        ledger.release(0);
        assert!(ledger.tdid_of(0).is_none());
    }

    #[test]
    fn ledger_exhaustion_is_an_error() {
        let params = CodecParams::new(7, 3, 1).unwrap();
        let mut ledger = TdidLedger::new();
        let scan = vec![0.0; params.tdid_count() as usize];
        let mut r = SimRng::seed_from_u64(1);
        for d in 0..7 {
            ledger.acquire(d, 0, &scan, 4, &mut r).unwrap();
        }
        assert!(matches!(ledger.acquire(7, 0, &scan, 4, &mut r), Err(Error::Resource(_))));
    }

    #[test]
    fn scan_sees_occupied_tdid() {
        use crate::phy::{receive, LinkRealization, PhyConfig, TxSignal};
        use num_complex::Complex64;
        let params = CodecParams::default();
        let cfg = PhyConfig::default();
        let cw = encode_tdid(17, &params).unwrap();
        let link = LinkRealization::fixed(cfg.noise_variance_mw() * 100.0, 0, Complex64::new(1.0, 0.0), 11, 1);
        let mut r = SimRng::seed_from_u64(2);
        let grids: Vec<RxGrid> = (0..DEFAULT_SCAN_WINDOW)
            .map(|_| receive(&[TxSignal { codeword: &cw, power_mw: 1.0, link: &link }], 199, 11, &cfg, &mut r))
            .collect();
        let scan = tdid_energy_scan(&grids, &params).unwrap();
        let busiest = (0..scan.len()).max_by(|&a, &b| scan[a].total_cmp(&scan[b])).unwrap();
        assert_eq!(busiest, 17);
        let mut r = SimRng::seed_from_u64(3);
        for _ in 0..50 {
            assert_ne!(acquire_tdid(&scan, DEFAULT_LOWEST_SET, &mut r).unwrap(), 17);
        }
    }

    #[test]
    fn silence_exposes_a_shared_tdid() {
        use crate::phy::{receive, LinkRealization, TxSignal};
        use num_complex::Complex64;
        let params = CodecParams::default();
        let cfg = PhyConfig::default();
        let cw = encode_tdid(42, &params).unwrap();
        let link = LinkRealization::fixed(cfg.noise_variance_mw() * 100.0, 0, Complex64::new(1.0, 0.0), 11, 1);
        let mut r = SimRng::seed_from_u64(4);
        let busy = receive(&[TxSignal { codeword: &cw, power_mw: 1.0, link: &link }], 199, 11, &cfg, &mut r);
        assert!(reacquisition_needed(&busy, 42, &params, &cfg).unwrap());
        assert!(!reacquisition_needed(&busy, 43, &params, &cfg).unwrap());
        let quiet = receive(&[], 199, 11, &cfg, &mut r);
        assert!(!reacquisition_needed(&quiet, 42, &params, &cfg).unwrap());
    }
}
