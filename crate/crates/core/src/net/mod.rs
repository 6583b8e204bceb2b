//! Network layer: path loss, rate abstraction, discovery baselines, the
//! tone discovery pipeline, mode and relay selection, and resource
//! allocation.

pub mod baseline;
pub mod discovery;
pub mod rates;
pub mod topology;

use std::collections::{BTreeMap, BTreeSet};

pub use baseline::{
    p_discovery, p_discovery_opt, run_baseline_discovery, run_csma_beacon, slotted_discovery,
    Audibility, DiscoveryTimes,
};
pub use discovery::{run_link_discovery, run_tone_discovery, LinkDiscoveryConfig, LinkOutcome, ToneDiscoveryConfig};
pub use topology::{LocalDrop, PairTable, Topology, TopologyConfig};

/// Spectral efficiency cap in bit/s/Hz.
pub const RATE_CAP: f64 = 6.0;
/// Fraction of Shannon capacity achieved by the modem abstraction.
pub const RATE_EFFICIENCY: f64 = 0.75;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Thermal noise power in dBm over `bandwidth_hz` with a noise figure.
pub fn noise_dbm(psd_dbm_hz: f64, bandwidth_hz: f64, nf_db: f64) -> f64 {
    psd_dbm_hz + 10.0 * bandwidth_hz.log10() + nf_db
}

/// COST231-Hata median path loss in dB. Distances are clamped to
/// [0.02, 20] km.
pub fn cost231_hata(d_km: f64, f_mhz: f64, h_b: f64, h_m: f64, metro_correction_db: f64) -> f64 {
    let d = d_km.clamp(0.02, 20.0);
    let lf = f_mhz.log10();
    let lhb = h_b.log10();
    let a_hm = (1.1 * lf - 0.7) * h_m - (1.56 * lf - 0.8);
    46.3 + 33.9 * lf - 13.82 * lhb - a_hm + (44.9 - 6.55 * lhb) * d.log10() + metro_correction_db
}

/// Attenuated, capped Shannon rate.
pub fn sinr_to_rate(sinr_linear: f64) -> f64 {
    (RATE_EFFICIENCY * (1.0 + sinr_linear.max(0.0)).log2()).min(RATE_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    P2p,
    Cellular,
}

/// P2P when the target is heard at least `margin_db` above the base station.
pub fn select_mode(strength_target_dbm: f64, strength_bs_dbm: f64, margin_db: f64) -> Mode {
    if strength_target_dbm >= strength_bs_dbm + margin_db {
        Mode::P2p
    } else {
        Mode::Cellular
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Route {
    Direct { rate: f64 },
    Relay { relay: usize, rate: f64 },
}

impl Route {
    pub fn rate(&self) -> f64 {
        match *self {
            Route::Direct { rate } | Route::Relay { rate, .. } => rate,
        }
    }
}

/// Max-min two-hop selection. `candidates` yields `(relay, eta_rs, eta_tr)`;
/// a relay is used only when its half-duplex rate strictly beats `direct`.
/// Ties between relays go to the lowest id.
pub fn select_relay(direct: f64, candidates: impl IntoIterator<Item = (usize, f64, f64)>) -> Route {
    let mut best: Option<(usize, f64)> = None;
    for (r, rs, tr) in candidates {
        let rate = 0.5 * rs.min(tr);
        let better = match best {
            None => true,
            Some((br, bv)) => rate > bv || (rate == bv && r < br),
        };
        if better {
            best = Some((r, rate));
        }
    }
    match best {
        Some((relay, rate)) if rate > direct => Route::Relay { relay, rate },
        _ => Route::Direct { rate: direct },
    }
}

/// [`select_relay`] between two devices of a pair table.
pub fn select_relay_in(table: &PairTable, s: usize, t: usize, candidates: &[usize]) -> Route {
    let direct = table.rate(t, s);
    select_relay(
        direct,
        candidates
            .iter()
            .filter(|&&r| r != s && r != t)
            .map(|&r| (r, table.rate(r, s), table.rate(t, r))),
    )
}

/// Assigns a resource index to each directed pair `(tx, rx)` so that
/// conflicting pairs never share one.
///
/// Pairs `(a, b)` and `(c, d)` conflict when they share a device or when a
/// transmitter of one is on the neighbor list of the other's receiver, or
/// vice versa. Greedy colouring in order of descending degree, ties by
/// pair index.
pub fn allocate_resources(pairs: &[(usize, usize)], neighbors: &BTreeMap<usize, BTreeSet<usize>>) -> Vec<usize> {
    let hears = |x: usize, y: usize| neighbors.get(&x).is_some_and(|s| s.contains(&y));
    let conflict = |p: (usize, usize), q: (usize, usize)| {
        let (a, b) = p;
        let (c, d) = q;
        a == c || a == d || b == c || b == d || hears(b, c) || hears(c, b) || hears(a, d) || hears(d, a)
    };
    let n = pairs.len();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && conflict(pairs[i], pairs[j])).collect())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| adj[b].len().cmp(&adj[a].len()).then(a.cmp(&b)));
    let mut colour = vec![usize::MAX; n];
    for &i in &order {
        let used: BTreeSet<usize> = adj[i].iter().map(|&j| colour[j]).collect();
        colour[i] = (0..).find(|c| !used.contains(c)).unwrap();
    }
    colour
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hata_examples() {
        let pl1 = cost231_hata(1.0, 2000.0, 30.0, 1.5, 3.0);
        let pl025 = cost231_hata(0.25, 2000.0, 30.0, 1.5, 3.0);
        assert!((pl1 - 140.744).abs() < 1e-3, "{pl1}");
        assert!((pl025 - 119.536).abs() < 1e-3, "{pl025}");
        let slope = pl1 - cost231_hata(0.1, 2000.0, 30.0, 1.5, 3.0);
        assert!((slope - (44.9 - 6.55 * 30f64.log10())).abs() < 1e-9);
        assert!((slope - 35.2).abs() < 0.05);
        assert_eq!(cost231_hata(0.001, 2000.0, 30.0, 1.5, 3.0), cost231_hata(0.02, 2000.0, 30.0, 1.5, 3.0));
    }

    #[test]
    fn rate_examples() {
        assert_eq!(sinr_to_rate(0.0), 0.0);
        assert!((sinr_to_rate(1.0) - 0.75).abs() < 1e-12);
        assert_eq!(sinr_to_rate(1e6), 6.0);
    }

    #[test]
    fn noise_power() {
        assert!((noise_dbm(-174.0, 15_000.0, 10.0) - (-122.239)).abs() < 1e-3);
    }

    #[test]
    fn mode_examples() {
        assert_eq!(select_mode(-60.0, -80.0, 0.0), Mode::P2p);
        assert_eq!(select_mode(-90.0, -70.0, 0.0), Mode::Cellular);
        assert_eq!(select_mode(-75.0, -75.0, 0.0), Mode::P2p);
        assert_eq!(select_mode(-75.0, -75.0, 1.0), Mode::Cellular);
    }

    proptest! {
        #[test]
        fn mode_is_shift_invariant(a in -150.0f64..-30.0, b in -150.0f64..-30.0, c in -40.0f64..40.0, m in 0.0f64..6.0) {
            // Exact ties can round either way after the shift; stay off them.
            prop_assume!((a - b - m).abs() > 1e-9);
            prop_assert_eq!(select_mode(a, b, m), select_mode(a + c, b + c, m));
        }

        #[test]
        fn relay_only_when_strictly_better(
            direct in 0.0f64..6.0,
            cands in proptest::collection::vec((0.0f64..6.0, 0.0f64..6.0), 0..8)
        ) {
            let route = select_relay(direct, cands.iter().enumerate().map(|(i, &(a, b))| (i, a, b)));
            match route {
                Route::Relay { relay, rate } => {
                    prop_assert!(rate > direct);
                    let (a, b) = cands[relay];
                    prop_assert_eq!(rate, 0.5 * a.min(b));
                }
                Route::Direct { rate } => {
                    prop_assert_eq!(rate, direct);
                    for &(a, b) in &cands {
                        prop_assert!(0.5 * a.min(b) <= direct);
                    }
                }
            }
        }
    }

    #[test]
    fn relay_examples() {
        assert_eq!(select_relay(1.0, [(7, 4.0, 4.0)]), Route::Relay { relay: 7, rate: 2.0 });
        assert_eq!(select_relay(3.0, [(7, 4.0, 4.0)]), Route::Direct { rate: 3.0 });
        assert_eq!(select_relay(2.0, [(1, 2.0, 2.0), (2, 2.0, 2.0)]), Route::Direct { rate: 2.0 });
        assert_eq!(select_relay(1.0, []), Route::Direct { rate: 1.0 });
        // Equal relays: lowest id wins.
        assert_eq!(select_relay(0.5, [(9, 4.0, 4.0), (3, 4.0, 4.0)]), Route::Relay { relay: 3, rate: 2.0 });
    }

    fn nbrs(edges: &[(usize, usize)]) -> BTreeMap<usize, BTreeSet<usize>> {
        let mut m: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for &(a, b) in edges {
            m.entry(a).or_default().insert(b);
            m.entry(b).or_default().insert(a);
        }
        m
    }

    #[test]
    fn allocation_examples() {
        // A->B and C->D all within earshot.
        let all = nbrs(&[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let c = allocate_resources(&[(0, 1), (2, 3)], &all);
        assert_ne!(c[0], c[1]);
        // Disjoint neighborhoods reuse the resource.
        let apart = nbrs(&[(0, 1), (2, 3)]);
        assert_eq!(allocate_resources(&[(0, 1), (2, 3)], &apart), vec![0, 0]);
        // Shared receiver.
        let c = allocate_resources(&[(0, 1), (2, 1)], &BTreeMap::new());
        assert_ne!(c[0], c[1]);
    }

    proptest! {
        #[test]
        fn colouring_is_valid(
            edges in proptest::collection::vec((0usize..12, 0usize..12), 0..40),
            pairs in proptest::collection::vec((0usize..12, 0usize..12), 1..10)
        ) {
            let pairs: Vec<(usize, usize)> = pairs.into_iter().filter(|(a, b)| a != b).collect();
            let nb = nbrs(&edges.into_iter().filter(|(a, b)| a != b).collect::<Vec<_>>());
            let colour = allocate_resources(&pairs, &nb);
            let hears = |x: usize, y: usize| nb.get(&x).is_some_and(|s| s.contains(&y));
            for i in 0..pairs.len() {
                for j in i + 1..pairs.len() {
                    let ((a, b), (c, d)) = (pairs[i], pairs[j]);
                    let conflict = a == c || a == d || b == c || b == d
                        || hears(b, c) || hears(c, b) || hears(a, d) || hears(d, a);
                    if conflict {
                        prop_assert_ne!(colour[i], colour[j]);
                    }
                }
            }
        }
    }
}
