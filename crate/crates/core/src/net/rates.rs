//! Per-device rates for one drop: cellular versus mode selection, and
//! direct uplink versus two-hop relaying.

use rand::Rng;

use super::topology::{PairTable, Topology};
use super::{select_mode, select_relay, Mode, Route};
use crate::rng::SimRng;

/// Rates for the centre-cell sources of one drop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OneHopRates {
    pub cellular: Vec<f64>,
    pub with_mode_selection: Vec<f64>,
    pub p2p_chosen: usize,
}

/// Each centre-cell source sends to a target picked uniformly among devices
/// within `group_radius_m` (the nearest device if none). Cellular traffic is
/// limited by the weaker of the source uplink and the target downlink.
pub fn one_hop_rates(topo: &Topology, table: &PairTable, group_radius_m: f64, margin_db: f64, rng: &mut SimRng) -> OneHopRates {
    let mut out = OneHopRates::default();
    let n = topo.devices();
    for s in topo.centre_devices() {
        let close: Vec<usize> = (0..n)
            .filter(|&t| t != s && topo.distance(s, t) <= group_radius_m)
            .collect();
        let t = if close.is_empty() {
            (0..n)
                .filter(|&t| t != s)
                .min_by(|&a, &b| topo.distance(s, a).total_cmp(&topo.distance(s, b)))
                .expect("at least two devices")
        } else {
            close[rng.random_range(0..close.len())]
        };
        let cellular = topo.ul_rate(s).min(topo.dl_rate(t));
        let direct = table.rate(t, s);
        let mode = select_mode(topo.tone_strength_dbm(s, t), topo.tone_strength_at_bs_dbm(s), margin_db);
        // The target must be on the neighbor list for a direct link.
        let chosen = if mode == Mode::P2p && direct > 0.0 {
            out.p2p_chosen += 1;
            direct
        } else {
            cellular
        };
        out.cellular.push(cellular);
        out.with_mode_selection.push(chosen);
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TwoHopRates {
    pub direct: Vec<f64>,
    pub relayed: Vec<f64>,
    pub relays_used: usize,
}

/// Uplink from each centre-cell device to its base station, directly or
/// through the best neighbor.
pub fn two_hop_rates(topo: &Topology, table: &PairTable) -> TwoHopRates {
    let mut out = TwoHopRates::default();
    for s in topo.centre_devices() {
        let bs = topo.serving[s];
        let direct = topo.ul_rate(s);
        let route = select_relay(
            direct,
            table
                .neighbors_from(s)
                .map(|r| (r, table.rate(r, s), topo.cfg.ul_rate(topo.bs_gain(r, bs)))),
        );
        if matches!(route, Route::Relay { .. }) {
            out.relays_used += 1;
        }
        out.direct.push(direct);
        out.relayed.push(route.rate());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::TopologyConfig;
    use crate::rng;
    use crate::stats::quantile;

    #[test]
    fn relaying_never_lowers_a_rate() {
        let cfg = TopologyConfig::default();
        for d in 0..5 {
            let mut r = rng::derive(1, 0, d);
            let topo = Topology::drop(&cfg, &mut r).unwrap();
            let table = topo.pair_table();
            let two = two_hop_rates(&topo, &table);
            assert_eq!(two.direct.len(), 25);
            for (a, b) in two.direct.iter().zip(&two.relayed) {
                assert!(b >= a);
            }
            assert!(quantile(&two.relayed, 0.05) >= quantile(&two.direct, 0.05));
        }
    }

    #[test]
    fn mode_selection_uses_p2p_for_close_targets() {
        let cfg = TopologyConfig::default();
        let mut used = 0;
        for d in 0..5 {
            let mut r = rng::derive(2, 0, d);
            let topo = Topology::drop(&cfg, &mut r).unwrap();
            let table = topo.pair_table();
            let one = one_hop_rates(&topo, &table, 250.0, 0.0, &mut r);
            assert_eq!(one.cellular.len(), 25);
            used += one.p2p_chosen;
            for (c, m) in one.cellular.iter().zip(&one.with_mode_selection) {
                assert!(*c >= 0.0 && *m >= 0.0 && *m <= 6.0);
            }
        }
        assert!(used > 0);
    }
}
