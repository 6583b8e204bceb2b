//! Reference discovery schemes: random-access transmit/listen and
//! 802.11-style beacons with random backoff.

use rand::Rng;

use crate::error::{domain, Result};
use crate::rng::{self, SimRng};
use crate::stats::{Proportion, Summary};

/// Probability that one device discovers a given neighbor among `g`
/// devices within `t` periods when everyone transmits with probability `p`.
pub fn p_discovery(p: f64, g: u32, t: u32) -> f64 {
    let q = p * (1.0 - p).powi(g as i32 - 1);
    1.0 - (1.0 - q).powi(t as i32)
}

/// [`p_discovery`] at the optimal `p = 1/g`.
pub fn p_discovery_opt(g: u32, t: u32) -> f64 {
    p_discovery(1.0 / g.max(1) as f64, g, t)
}

/// Who can hear whom: `heard_by(i)` lists the devices audible at `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Audibility {
    heard: Vec<Vec<usize>>,
}

impl Audibility {
    pub fn complete(n: usize) -> Self {
        Self {
            heard: (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect(),
        }
    }

    /// `audible(rx, tx)` decides each ordered pair.
    pub fn from_fn(n: usize, audible: impl Fn(usize, usize) -> bool) -> Self {
        Self {
            heard: (0..n)
                .map(|i| (0..n).filter(|&j| j != i && audible(i, j)).collect())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.heard.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heard.is_empty()
    }

    pub fn heard_by(&self, i: usize) -> &[usize] {
        &self.heard[i]
    }

    pub fn hears(&self, rx: usize, tx: usize) -> bool {
        self.heard[rx].binary_search(&tx).is_ok()
    }

    pub fn pair_count(&self) -> usize {
        self.heard.iter().map(Vec::len).sum()
    }
}

/// First-discovery period (1-based) of every ordered neighbor pair, aligned
/// with [`Audibility::heard_by`]; `None` if not discovered within the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoveryTimes {
    pub horizon: u32,
    pub times: Vec<Vec<Option<u32>>>,
}

impl DiscoveryTimes {
    fn new(aud: &Audibility, horizon: u32) -> Self {
        Self {
            horizon,
            times: (0..aud.len()).map(|i| vec![None; aud.heard_by(i).len()]).collect(),
        }
    }

    pub fn pairs(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    pub fn censored(&self) -> usize {
        self.times.iter().flatten().filter(|t| t.is_none()).count()
    }

    pub fn all_found(&self) -> bool {
        self.censored() == 0
    }

    /// Mean over pairs, counting censored pairs at the horizon. Zero when
    /// there are no pairs.
    pub fn mean(&self) -> f64 {
        let s: Summary = self
            .times
            .iter()
            .flatten()
            .map(|t| t.unwrap_or(self.horizon) as f64)
            .collect();
        if s.count() == 0 {
            0.0
        } else {
            s.mean()
        }
    }

    fn mark(&mut self, rx: usize, idx: usize, period: u32) -> bool {
        let slot = &mut self.times[rx][idx];
        if slot.is_none() {
            *slot = Some(period);
            return true;
        }
        false
    }
}

/// Random-access discovery on an arbitrary audibility graph.
///
/// Each period every device draws exactly one uniform and transmits when it
/// falls below its probability, so runs with different probabilities share
/// random numbers. A listener hears `j` when it is silent, `j` transmits and
/// no other audible device does.
pub fn slotted_discovery(aud: &Audibility, probs: &[f64], horizon: u32, rng: &mut SimRng) -> DiscoveryTimes {
    let n = aud.len();
    let mut out = DiscoveryTimes::new(aud, horizon);
    let mut remaining = out.pairs();
    let mut tx = vec![false; n];
    for period in 1..=horizon {
        if remaining == 0 {
            break;
        }
        for (d, flag) in tx.iter_mut().enumerate() {
            *flag = rng.random::<f64>() < probs[d];
        }
        for i in 0..n {
            if tx[i] {
                continue;
            }
            let mut talker = None;
            let mut count = 0;
            for (idx, &j) in aud.heard_by(i).iter().enumerate() {
                if tx[j] {
                    count += 1;
                    talker = Some(idx);
                }
            }
            if count == 1 && out.mark(i, talker.unwrap(), period) {
                remaining -= 1;
            }
        }
    }
    out
}

/// Empirical probability that device 0 discovers device 1 among `g` devices
/// within `t` periods.
pub fn run_baseline_discovery(p: f64, g: u32, t: u32, trials: u64, seed: u64) -> Result<Proportion> {
    if !(0.0..=1.0).contains(&p) || g < 1 || trials == 0 {
        return domain(format!("invalid baseline parameters p={p} g={g} trials={trials}"));
    }
    let mut est = Proportion::default();
    if g == 1 {
        // No neighbor to find.
        est.merge(Proportion::new(0, trials));
        return Ok(est);
    }
    let aud = Audibility::complete(g as usize);
    let probs = vec![p; g as usize];
    for trial in 0..trials {
        let mut r = rng::derive(seed, rng::tag("baseline"), trial);
        let times = slotted_discovery(&aud, &probs, t, &mut r);
        // heard_by(0) starts with device 1.
        est.add(times.times[0][0].is_some());
    }
    Ok(est)
}

/// 802.11-style beacon contention on an audibility graph.
///
/// Each period every device draws a backoff uniform in `[0, 2 cw)` slots and
/// beacons when its timer expires unless it already heard a beacon in an
/// earlier slot. Simultaneous audible beacons collide at a listener.
pub fn run_csma_beacon(aud: &Audibility, cw: u32, horizon: u32, rng: &mut SimRng) -> Result<DiscoveryTimes> {
    if cw == 0 {
        return domain("contention window must be >= 1");
    }
    let n = aud.len();
    let mut out = DiscoveryTimes::new(aud, horizon);
    let mut remaining = out.pairs();
    let mut backoff = vec![0u32; n];
    let mut slot_of: Vec<Option<u32>> = vec![None; n];
    let mut order: Vec<usize> = (0..n).collect();
    for period in 1..=horizon {
        if remaining == 0 {
            break;
        }
        for b in backoff.iter_mut() {
            *b = rng.random_range(0..2 * cw);
        }
        order.sort_by_key(|&d| (backoff[d], d));
        slot_of.fill(None);
        for &d in &order {
            let b = backoff[d];
            let deferred = aud
                .heard_by(d)
                .iter()
                .any(|&k| slot_of[k].is_some_and(|s| s < b));
            if !deferred {
                slot_of[d] = Some(b);
            }
        }
        for i in 0..n {
            let heard = aud.heard_by(i);
            for (idx, &j) in heard.iter().enumerate() {
                let Some(s) = slot_of[j] else { continue };
                if slot_of[i] == Some(s) {
                    continue;
                }
                let collided = heard.iter().any(|&k| k != j && slot_of[k] == Some(s));
                if !collided && out.mark(i, idx, period) {
                    remaining -= 1;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn analytic_examples() {
        assert_eq!(p_discovery(0.3, 4, 0), 0.0);
        assert!((p_discovery(0.5, 2, 1) - 0.25).abs() < 1e-15);
        assert!((p_discovery(1.0 / 3.0, 3, 2) - 200.0 / 729.0).abs() < 1e-12);
        assert_eq!(p_discovery_opt(1, 1), 1.0);
        assert!((p_discovery_opt(2, 1) - 0.25).abs() < 1e-15);
        let mut prev = 0.0;
        for t in 1..200 {
            let v = p_discovery_opt(2, t);
            assert!(v >= prev && v <= 1.0);
            prev = v;
        }
        assert!(prev > 0.999);
    }

    #[test]
    fn optimum_is_one_over_g() {
        for g in 2..12u32 {
            let best = p_discovery_opt(g, 5);
            for k in 1..100 {
                assert!(p_discovery(k as f64 / 100.0, g, 5) <= best + 1e-12);
            }
        }
    }

    #[test]
    fn always_transmitting_pair_never_listens() {
        let est = run_baseline_discovery(1.0, 2, 10, 100, 0).unwrap();
        assert_eq!(est.estimate(), 0.0);
    }

    #[test]
    fn monte_carlo_matches_analytic() {
        for &(p, g, t) in &[(0.5, 2, 1), (0.2, 5, 5), (0.1, 10, 20)] {
            let est = run_baseline_discovery(p, g, t, 20_000, 7).unwrap();
            let exact = p_discovery(p, g, t);
            let sd = (exact * (1.0 - exact) / 20_000.0).sqrt();
            assert!((est.estimate() - exact).abs() < 3.0 * sd, "{p} {g} {t}: {} vs {exact}", est.estimate());
        }
    }

    #[test]
    fn baseline_rejects_bad_input() {
        assert!(run_baseline_discovery(1.5, 2, 1, 10, 0).is_err());
        assert!(run_baseline_discovery(0.5, 0, 1, 10, 0).is_err());
    }

    #[test]
    fn csma_two_devices_alternate() {
        let aud = Audibility::complete(2);
        let mut s = Summary::default();
        for trial in 0..4000 {
            let mut r = rng::derive(1, 0, trial);
            let t = run_csma_beacon(&aud, 1024, 200, &mut r).unwrap();
            s.push(t.mean());
        }
        // One direction in period 1, the other geometric(1/2) later.
        assert!((s.mean() - 2.0).abs() < 0.05, "{}", s.mean());
    }

    #[test]
    fn csma_single_device_is_vacuous() {
        let aud = Audibility::complete(1);
        let mut r = SimRng::seed_from_u64(0);
        let t = run_csma_beacon(&aud, 8, 10, &mut r).unwrap();
        assert_eq!(t.pairs(), 0);
        assert_eq!(t.mean(), 0.0);
        assert!(run_csma_beacon(&aud, 0, 10, &mut r).is_err());
    }

    #[test]
    fn csma_hidden_devices_collide() {
        // 0 and 2 cannot hear each other; 1 hears both.
        let aud = Audibility::from_fn(3, |a, b| a.abs_diff(b) == 1);
        let mut r = SimRng::seed_from_u64(3);
        let t = run_csma_beacon(&aud, 1, 1000, &mut r).unwrap();
        assert!(t.all_found());
        // With cw = 1 hidden transmitters share a slot half the time, so the
        // middle device needs more than one period on average for each.
        let mut total = Summary::default();
        for trial in 0..2000 {
            let mut r = rng::derive(4, 0, trial);
            let t = run_csma_beacon(&aud, 1, 1000, &mut r).unwrap();
            total.push(t.times[1][0].unwrap() as f64);
        }
        assert!(total.mean() > 1.5);
    }

    #[test]
    fn larger_window_is_faster() {
        let aud = Audibility::complete(20);
        let mean = |cw: u32| {
            let mut s = Summary::default();
            for trial in 0..200 {
                let mut r = rng::derive(9, 0, trial);
                s.push(run_csma_beacon(&aud, cw, 2000, &mut r).unwrap().mean());
            }
            s.mean()
        };
        let (a, b) = (mean(4), mean(64));
        assert!(a > b, "{a} {b}");
    }
}
