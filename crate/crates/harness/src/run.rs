//! Experiment drivers. Each sweep point is simulated in trial batches
//! addressed by index, so extending a run or changing the batch size never
//! changes the numbers a given trial produces.

use rand::Rng;
use tonedisc::net::rates::{one_hop_rates, two_hop_rates};
use tonedisc::net::{
    run_csma_beacon, run_link_discovery, run_tone_discovery, slotted_discovery, LinkDiscoveryConfig, LinkOutcome,
    LocalDrop, ToneDiscoveryConfig, Topology,
};
use tonedisc::phy::uplink::{uplink_punctured_link, Overlay, UplinkConfig};
use tonedisc::rng::{self, mix64};
use tonedisc::stats::{quantile, PairedTest, Proportion, Summary, Z95, Z95_ONE_SIDED};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::oracle;
use crate::output::ResultRow;

/// Rows of a run plus the number of failed oracle checks (always zero for
/// figure experiments).
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub failed_checks: usize,
}

/// Trial budget of one sweep point.
#[derive(Debug, Clone, Copy)]
struct Plan {
    trials: u64,
    max_trials: u64,
    ci_target: f64,
}

impl Plan {
    /// Runs `batch(state, first, count)` for `trials` trials, then keeps
    /// doubling while `ci(state)` exceeds a positive target and the cap
    /// allows. Returns the number of trials run.
    fn execute<S>(
        &self,
        state: &mut S,
        mut batch: impl FnMut(&mut S, u64, u64) -> Result<()>,
        ci: impl Fn(&S) -> f64,
    ) -> Result<u64> {
        let mut done = 0;
        let mut next = self.trials;
        loop {
            batch(state, done, next)?;
            done += next;
            if self.ci_target <= 0.0 || done >= self.max_trials || ci(state) <= self.ci_target {
                return Ok(done);
            }
            next = done.min(self.max_trials - done);
        }
    }
}

struct Rows<'a> {
    cfg: &'a ExperimentConfig,
    label: String,
    out: Vec<ResultRow>,
}

impl<'a> Rows<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Self {
            cfg,
            label: cfg.label(),
            out: Vec::new(),
        }
    }

    fn push(&mut self, sweep_value: f64, metric: impl Into<String>, value: f64, trials: u64, ci: f64) {
        self.out.push(ResultRow {
            experiment: self.label.clone(),
            sweep_name: self.cfg.sweep().name.clone(),
            sweep_value,
            seed: self.cfg.experiment.seed,
            metric: metric.into(),
            value,
            trials,
            ci,
        });
    }
}

/// Validates and runs an experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let plan = Plan {
        trials: cfg.experiment.trials,
        max_trials: cfg.experiment.max_trials,
        ci_target: cfg.experiment.ci_target,
    };
    let mut rows = Rows::new(cfg);
    let mut failed_checks = 0;
    match cfg.kind() {
        ExperimentKind::Fig9 => fig9(cfg, plan, &mut rows)?,
        ExperimentKind::Fig11 => fig11(cfg, plan, &mut rows)?,
        ExperimentKind::Fig12 => fig12(cfg, plan, &mut rows)?,
        ExperimentKind::Fig13 => fig13(cfg, plan, &mut rows)?,
        ExperimentKind::Fig14 => fig14(cfg, plan, &mut rows)?,
        ExperimentKind::Oracle => {
            let checks = oracle::run_checks(cfg.experiment.seed, cfg.experiment.trials)?;
            for (i, c) in checks.iter().enumerate() {
                rows.push(i as f64, c.name.clone(), if c.passed { 1.0 } else { 0.0 }, c.trials, 0.0);
            }
            failed_checks = checks.iter().filter(|c| !c.passed).count();
        }
    }
    Ok(RunOutput {
        rows: rows.out,
        failed_checks,
    })
}

fn binomial_ci(hits: u64, trials: u64) -> f64 {
    Proportion::new(hits, trials).ci95()
}

fn fig9(cfg: &ExperimentConfig, plan: Plan, rows: &mut Rows) -> Result<()> {
    let params = cfg.codec.params()?;
    let seed = cfg.experiment.seed;
    for &snr in &cfg.sweep().values {
        let mut sample_snr = None;
        for &a in &cfg.fig9.antennas {
            let mut phy = cfg.phy.config();
            phy.rx_antennas = a;
            let link = LinkDiscoveryConfig {
                params: params.clone(),
                phy,
                devices: cfg.fig9.devices,
                tone_snr_db: snr,
                max_offset: cfg.fig9.max_offset,
            };
            // The sweep axis is per-tone SNR; report the sample SNR alongside.
            if sample_snr.replace(link.sample_snr_db()).is_none() {
                rows.push(snr, "sample_snr_db", link.sample_snr_db(), 0, 0.0);
            }
            let mut acc = LinkOutcome::default();
            let periods = plan.execute(
                &mut acc,
                |acc, first, count| {
                    acc.merge(&run_link_discovery(&link, first, count, seed)?);
                    Ok(())
                },
                |acc| binomial_ci(acc.erased, acc.transmitted),
            )?;
            rows.push(
                snr,
                format!("erasure_rate:antennas={a}"),
                acc.erasure_rate(),
                periods,
                binomial_ci(acc.erased, acc.transmitted),
            );
            rows.push(
                snr,
                format!("error_rate:antennas={a}"),
                acc.error_rate(),
                periods,
                binomial_ci(acc.false_decodes, acc.decoded),
            );
        }
    }
    Ok(())
}

const FIG11_SERIES: [(&str, bool, bool); 3] = [
    ("bler:no_overlay", false, true),
    ("bler:overlay_punctured", true, true),
    ("bler:overlay_unpunctured", true, false),
];

fn fig11(cfg: &ExperimentConfig, plan: Plan, rows: &mut Rows) -> Result<()> {
    let params = cfg.codec.params()?;
    let phy = cfg.phy.config();
    let f = &cfg.fig11;
    let overlay = Overlay::RandomDevices {
        devices: f.devices,
        params: params.clone(),
    };
    let seed = cfg.experiment.seed;
    for &snr in &cfg.sweep().values {
        let mut acc = [Proportion::default(); 3];
        let blocks = plan.execute(
            &mut acc,
            |acc, first, count| {
                let ul = UplinkConfig {
                    data_subcarriers: f.data_subcarriers,
                    symbols: f.symbols,
                    first_block: first,
                    blocks: count,
                    overlay_inr_db: f.overlay_inr_db,
                };
                for (slot, &(_, with_overlay, puncture)) in acc.iter_mut().zip(&FIG11_SERIES) {
                    let ov = if with_overlay { &overlay } else { &Overlay::None };
                    slot.merge(uplink_punctured_link(snr, ov, puncture, &phy, &ul, params.p(), seed)?);
                }
                Ok(())
            },
            |acc| acc.iter().map(Proportion::ci95).fold(0.0, f64::max),
        )?;
        for (est, &(metric, _, _)) in acc.iter().zip(&FIG11_SERIES) {
            rows.push(snr, metric, est.estimate(), blocks, est.ci95());
        }
    }
    Ok(())
}

/// Per-drop mean discovery times of the slotted and CSMA baselines.
#[derive(Default)]
struct ContentionTimes {
    baseline: Vec<f64>,
    csma: Vec<Vec<f64>>,
}

fn fig12(cfg: &ExperimentConfig, plan: Plan, rows: &mut Rows) -> Result<()> {
    let params = cfg.codec.params()?;
    let topo = cfg.topology.config();
    let f = &cfg.fig12;
    let seed = cfg.experiment.seed;
    let cws = &f.contention_windows;
    let tone_cfg = ToneDiscoveryConfig {
        params: params.clone(),
        phy: {
            let mut phy = cfg.phy.config();
            phy.rx_antennas = f.tone_rx_antennas;
            phy
        },
        power_dbm: topo.device_power_dbm,
        horizon_frames: f.tone_horizon,
        max_offset: f.tone_max_offset,
    };
    tone_cfg.validate()?;

    for &density in &cfg.sweep().values {
        let n = density as usize;
        let key = mix64(n as u64);
        // The same drops feed every scheme.
        let drop_at = |d: u64| {
            let mut r = rng::derive(seed, rng::tag("fig12-drop") ^ key, d);
            LocalDrop::disc(n, f.radius_m, &topo, &mut r)
        };

        let mut acc = ContentionTimes {
            baseline: Vec::new(),
            csma: vec![Vec::new(); cws.len()],
        };
        let drops = plan.execute(
            &mut acc,
            |acc, first, count| {
                for d in first..first + count {
                    let aud = drop_at(d).audibility();
                    if aud.pair_count() == 0 {
                        continue;
                    }
                    let probs: Vec<f64> = (0..n).map(|i| 1.0 / (aud.heard_by(i).len() + 1) as f64).collect();
                    let mut r = rng::derive(seed, rng::tag("fig12-baseline") ^ key, d);
                    acc.baseline.push(slotted_discovery(&aud, &probs, f.horizon, &mut r).mean());
                    for (slot, &cw) in acc.csma.iter_mut().zip(cws) {
                        // Common random numbers across windows.
                        let mut r = rng::derive(seed, rng::tag("fig12-csma") ^ key, d);
                        slot.push(run_csma_beacon(&aud, cw, f.horizon, &mut r)?.mean());
                    }
                }
                Ok(())
            },
            |acc| {
                std::iter::once(&acc.baseline)
                    .chain(&acc.csma)
                    .map(|v| v.iter().copied().collect::<Summary>().ci95())
                    .fold(0.0, f64::max)
            },
        )?;

        let mut tone = Summary::default();
        for d in 0..f.tone_trials {
            let drop = drop_at(d);
            if drop.audibility().pair_count() == 0 {
                continue;
            }
            let run_seed = rng::derive(seed, rng::tag("fig12-tone") ^ key, d).random::<u64>();
            tone.push(run_tone_discovery(&drop, &tone_cfg, run_seed)?.mean());
        }

        rows.push(density, "discovery_time:tone", tone.mean(), f.tone_trials, tone.ci95());
        let s: Summary = acc.baseline.iter().copied().collect();
        rows.push(density, "discovery_time:baseline", s.mean(), drops, s.ci95());
        for (times, cw) in acc.csma.iter().zip(cws) {
            let s: Summary = times.iter().copied().collect();
            rows.push(density, format!("discovery_time:csma_cw{cw}"), s.mean(), drops, s.ci95());
        }
        for i in 1..cws.len() {
            // Positive when the larger window is faster.
            let t = PairedTest::from_pairs(&acc.csma[i - 1], &acc.csma[i]);
            rows.push(
                density,
                format!("csma_speedup_lb:cw{}_vs_cw{}", cws[i], cws[i - 1]),
                t.lower_bound,
                drops,
                Z95_ONE_SIDED * t.std_err,
            );
        }
    }
    Ok(())
}

/// Pooled per-device rates and per-drop statistics for two policies.
#[derive(Default)]
struct RateSamples {
    base: Vec<f64>,
    alt: Vec<f64>,
    base_stat: Vec<f64>,
    alt_stat: Vec<f64>,
    chosen: usize,
}

impl RateSamples {
    fn add(&mut self, base: Vec<f64>, alt: Vec<f64>, chosen: usize, q: f64) {
        self.base_stat.push(quantile(&base, q));
        self.alt_stat.push(quantile(&alt, q));
        self.base.extend(base);
        self.alt.extend(alt);
        self.chosen += chosen;
    }

    fn gain_ci(&self) -> f64 {
        let t = PairedTest::from_pairs(&self.alt_stat, &self.base_stat);
        Z95 * t.std_err
    }

    fn emit(&self, rows: &mut Rows, sweep: f64, drops: u64, names: (&str, &str), chosen_metric: &str, gain_metric: &str) {
        for (q, tag) in [(0.05, "p05"), (0.5, "p50"), (0.95, "p95")] {
            for (pool, name) in [(&self.base, names.0), (&self.alt, names.1)] {
                rows.push(sweep, format!("rate_{tag}:{name}"), quantile(pool, q), drops, per_drop_quantile_ci(pool, drops, q));
            }
        }
        rows.push(
            sweep,
            chosen_metric,
            self.chosen as f64 / self.base.len().max(1) as f64,
            drops,
            0.0,
        );
        let t = PairedTest::from_pairs(&self.alt_stat, &self.base_stat);
        rows.push(sweep, gain_metric, t.lower_bound, drops, Z95_ONE_SIDED * t.std_err);
    }
}

/// CI of a pooled quantile from its spread across equally sized drops.
fn per_drop_quantile_ci(pool: &[f64], drops: u64, q: f64) -> f64 {
    if drops == 0 || pool.is_empty() {
        return 0.0;
    }
    let per = pool.len() / drops as usize;
    if per == 0 {
        return 0.0;
    }
    let s: Summary = pool.chunks(per).map(|c| quantile(c, q)).collect();
    s.ci95()
}

fn fig13(cfg: &ExperimentConfig, plan: Plan, rows: &mut Rows) -> Result<()> {
    let topo_cfg = cfg.topology.config();
    let seed = cfg.experiment.seed;
    for &v in &cfg.sweep().values {
        let (radius, margin) = match cfg.sweep().name.as_str() {
            "group_radius_m" => (v, cfg.fig13.margin_db),
            _ => (cfg.fig13.group_radius_m, v),
        };
        let mut acc = RateSamples::default();
        let drops = plan.execute(
            &mut acc,
            |acc, first, count| {
                for d in first..first + count {
                    let mut r = rng::derive(seed, rng::tag("fig13-drop"), d);
                    let topo = Topology::drop(&topo_cfg, &mut r)?;
                    let table = topo.pair_table();
                    let one = one_hop_rates(&topo, &table, radius, margin, &mut r);
                    acc.add(one.cellular, one.with_mode_selection, one.p2p_chosen, 0.5);
                }
                Ok(())
            },
            RateSamples::gain_ci,
        )?;
        acc.emit(rows, v, drops, ("cellular", "mode_selection"), "p2p_fraction", "median_gain_lb");
    }
    Ok(())
}

fn fig14(cfg: &ExperimentConfig, plan: Plan, rows: &mut Rows) -> Result<()> {
    let seed = cfg.experiment.seed;
    for &v in &cfg.sweep().values {
        let mut topo_cfg = cfg.topology.config();
        topo_cfg.neighbor_snr_db = v;
        let mut acc = RateSamples::default();
        let drops = plan.execute(
            &mut acc,
            |acc, first, count| {
                for d in first..first + count {
                    let mut r = rng::derive(seed, rng::tag("fig14-drop"), d);
                    let topo = Topology::drop(&topo_cfg, &mut r)?;
                    let two = two_hop_rates(&topo, &topo.pair_table());
                    acc.add(two.direct, two.relayed, two.relays_used, 0.05);
                }
                Ok(())
            },
            RateSamples::gain_ci,
        )?;
        acc.emit(rows, v, drops, ("direct", "relayed"), "relay_fraction", "p05_gain_lb");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: ExperimentKind, trials: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_kind(kind);
        c.set_trials(trials);
        c
    }

    #[test]
    fn plan_extends_until_target_or_cap() {
        let plan = Plan {
            trials: 10,
            max_trials: 100,
            ci_target: 0.5,
        };
        let mut seen = Vec::new();
        let n = plan
            .execute(&mut seen, |s, first, count| {
                s.push((first, count));
                Ok(())
            }, |s| 1.0 / s.len() as f64)
            .unwrap();
        assert_eq!(seen, vec![(0, 10), (10, 10)]);
        assert_eq!(n, 20);

        let fixed = Plan { ci_target: 0.0, ..plan };
        let mut calls = 0;
        assert_eq!(fixed.execute(&mut calls, |c, _, _| { *c += 1; Ok(()) }, |_| 1.0).unwrap(), 10);
        assert_eq!(calls, 1);

        let capped = Plan { ci_target: 1e-9, ..plan };
        let mut seen = Vec::new();
        let n = capped
            .execute(&mut seen, |s, first, count| {
                s.push((first, count));
                Ok(())
            }, |_| 1.0)
            .unwrap();
        assert_eq!(seen, vec![(0, 10), (10, 10), (20, 20), (40, 40), (80, 20)]);
        assert_eq!(n, 100);
    }

    #[test]
    fn extension_matches_a_single_long_run() {
        let mut a = quick(ExperimentKind::Fig9, 40);
        a.sweep = Some(crate::config::SweepSection { name: "snr_db".into(), values: vec![3.0] });
        a.fig9.antennas = vec![1];
        let mut b = a.clone();
        b.set_trials(10);
        b.experiment.max_trials = 40;
        b.experiment.ci_target = 1e-9;
        let ra = run(&a).unwrap().rows;
        let rb = run(&b).unwrap().rows;
        for (x, y) in ra.iter().zip(&rb) {
            assert_eq!((x.value, x.trials), (y.value, y.trials));
        }
    }

    #[test]
    fn fig9_rows() {
        let mut c = quick(ExperimentKind::Fig9, 20);
        c.sweep = Some(crate::config::SweepSection { name: "snr_db".into(), values: vec![0.0, 20.0] });
        let rows = run(&c).unwrap().rows;
        assert_eq!(rows.len(), 2 * (1 + 3 * 2));
        let get = |snr: f64, m: &str| rows.iter().find(|r| r.sweep_value == snr && r.metric == m).unwrap().value;
        assert!((get(0.0, "sample_snr_db") + 27.09).abs() < 0.01);
        assert!(get(20.0, "erasure_rate:antennas=4") < get(0.0, "erasure_rate:antennas=4"));
        assert!(rows.iter().all(|r| r.experiment.starts_with("fig9@")));
        assert!(rows.iter().filter(|r| r.metric != "sample_snr_db").all(|r| r.trials == 20));
    }

    #[test]
    fn fig12_rows() {
        let mut c = quick(ExperimentKind::Fig12, 4);
        c.sweep = Some(crate::config::SweepSection { name: "devices".into(), values: vec![5.0] });
        c.fig12.tone_trials = 1;
        let rows = run(&c).unwrap().rows;
        let metrics: Vec<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
        assert_eq!(
            metrics,
            [
                "discovery_time:tone",
                "discovery_time:baseline",
                "discovery_time:csma_cw8",
                "discovery_time:csma_cw32",
                "discovery_time:csma_cw128",
                "csma_speedup_lb:cw32_vs_cw8",
                "csma_speedup_lb:cw128_vs_cw32",
            ]
        );
        assert!((rows[0].value - 4.0).abs() < 0.5);
    }

    #[test]
    fn rate_experiments_emit_quantiles() {
        for kind in [ExperimentKind::Fig13, ExperimentKind::Fig14] {
            let rows = run(&quick(kind, 3)).unwrap().rows;
            assert_eq!(rows.len(), 8);
            for r in &rows[..6] {
                assert!(r.value >= 0.0 && r.value <= 6.0, "{r:?}");
            }
        }
    }
}
