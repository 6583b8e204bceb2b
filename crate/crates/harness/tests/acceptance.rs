//! Acceptance suite: one PASS/FAIL line per criterion. Figure criteria are
//! evaluated from the CSV rows the harness emits for the shipped configs.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use tonedisc::phy::uplink::snr_at_bler;
use tonedisc::stats::{Z95, Z95_ONE_SIDED};
use tonedisc_harness::oracle::{self, Check};
use tonedisc_harness::output::{from_csv, to_csv};
use tonedisc_harness::{run, ExperimentConfig, ResultRow};

const SEED: u64 = 1;
const TRIALS: u64 = 10_000;

struct Verdict {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn from_checks(name: &'static str, checks: &[Check], extra: Option<(bool, String)>) -> Verdict {
    let mut passed = checks.iter().all(|c| c.passed);
    let mut detail: Vec<String> = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    if let Some((ok, note)) = extra {
        passed &= ok;
        detail.push(note);
    }
    Verdict {
        name,
        passed,
        detail: detail.join(" | "),
    }
}

/// Runs a shipped config and reads its rows back through the CSV layer.
fn rows_for(name: &str) -> Vec<ResultRow> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"));
    let cfg = ExperimentConfig::load(&path).expect("shipped config loads");
    let out = run(&cfg).expect("experiment runs");
    from_csv(&to_csv(&out.rows).unwrap()).unwrap()
}

struct Table(Vec<ResultRow>);

impl Table {
    fn sweep(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.0.iter().map(|r| r.sweep_value).collect();
        v.dedup();
        v
    }

    fn row(&self, x: f64, metric: &str) -> &ResultRow {
        self.0
            .iter()
            .find(|r| r.sweep_value == x && r.metric == metric)
            .unwrap_or_else(|| panic!("missing {metric} at {x}"))
    }

    fn value(&self, x: f64, metric: &str) -> f64 {
        self.row(x, metric).value
    }

    fn series(&self, metric: &str) -> Vec<(f64, f64)> {
        self.sweep().into_iter().map(|x| (x, self.value(x, metric))).collect()
    }
}

fn codec_algebra() -> Verdict {
    let t = Instant::now();
    let checks = [
        oracle::primitive_roots(),
        oracle::gft_inverse(),
        oracle::codec_algebra(SEED, TRIALS).unwrap(),
    ];
    let secs = t.elapsed().as_secs_f64();
    from_checks("codec algebra", &checks, Some((secs < 60.0, format!("runtime {secs:.1} s < 60 s"))))
}

fn baseline() -> Verdict {
    let t = Instant::now();
    let checks = [oracle::baseline_grid(SEED).unwrap(), oracle::baseline_optimum(SEED).unwrap()];
    let secs = t.elapsed().as_secs_f64();
    from_checks("analytic baseline", &checks, Some((secs < 60.0, format!("runtime {secs:.1} s < 60 s"))))
}

fn fig9() -> Verdict {
    let t = Table(rows_for("fig9"));
    let snrs = t.sweep();
    let antennas = [1, 2, 4];
    let erasure = |a: usize, s: f64| t.value(s, &format!("erasure_rate:antennas={a}"));
    let mut problems = Vec::new();
    let mut min_periods = u64::MAX;
    for &a in &antennas {
        for w in snrs.windows(2) {
            if erasure(a, w[1]) >= erasure(a, w[0]) {
                problems.push(format!("A={a} not decreasing {}->{} dB", w[0], w[1]));
            }
        }
        let mut reached = false;
        for &s in &snrs {
            min_periods = min_periods.min(t.row(s, &format!("erasure_rate:antennas={a}")).trials);
            reached |= erasure(a, s) < 0.1;
            let err = t.value(s, &format!("error_rate:antennas={a}"));
            if reached && err >= 0.01 {
                problems.push(format!("A={a} error {err:.4} at {s} dB"));
            }
        }
    }
    for &s in &snrs {
        for w in antennas.windows(2) {
            if erasure(w[1], s) >= erasure(w[0], s) {
                problems.push(format!("{s} dB: A={} not below A={}", w[1], w[0]));
            }
        }
    }
    if min_periods < 10_000 {
        problems.push(format!("only {min_periods} periods per point"));
    }
    let worst_err = t
        .0
        .iter()
        .filter(|r| r.metric.starts_with("error_rate"))
        .map(|r| r.value)
        .fold(0.0, f64::max);
    let at = |s: f64| format!("{s} dB: {:.4}/{:.4}/{:.4}", erasure(1, s), erasure(2, s), erasure(4, s));
    Verdict {
        name: "Fig. 9 direction",
        passed: problems.is_empty(),
        detail: format!(
            "erasure A=1/2/4 at {}; {}; max error rate {worst_err:.5}; {min_periods} periods; issues {problems:?}",
            at(snrs[0]),
            at(snrs[snrs.len() - 1])
        ),
    }
}

fn fig11() -> Verdict {
    let t = Table(rows_for("fig11"));
    let clean = snr_at_bler(&t.series("bler:no_overlay"), 0.1);
    let punctured = snr_at_bler(&t.series("bler:overlay_punctured"), 0.1);
    let penalty = match (clean, punctured) {
        (Some(a), Some(b)) => b - a,
        _ => f64::INFINITY,
    };
    let violations: Vec<f64> = t
        .sweep()
        .into_iter()
        .filter(|&s| t.value(s, "bler:overlay_punctured") > t.value(s, "bler:overlay_unpunctured"))
        .collect();
    Verdict {
        name: "Fig. 11 direction",
        passed: penalty < 1.0 && violations.is_empty(),
        detail: format!(
            "10% BLER at {:.2} dB clean, {:.2} dB overlaid+punctured, penalty {penalty:.2} dB; puncture-on above puncture-off at {violations:?}",
            clean.unwrap_or(f64::NAN),
            punctured.unwrap_or(f64::NAN)
        ),
    }
}

/// One-sided 95% test that `hi` exceeds `lo` for independent estimates.
fn increases(lo: &ResultRow, hi: &ResultRow) -> bool {
    let se = ((lo.ci / Z95).powi(2) + (hi.ci / Z95).powi(2)).sqrt();
    hi.value - lo.value - Z95_ONE_SIDED * se > 0.0
}

fn fig12() -> Verdict {
    let t = Table(rows_for("fig12"));
    let dens = t.sweep();
    let mut problems = Vec::new();
    let tone: Vec<f64> = dens.iter().map(|&d| t.value(d, "discovery_time:tone")).collect();
    let (lo, hi) = tone.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    if hi / lo >= 1.1 {
        problems.push(format!("tone varies {lo:.3}..{hi:.3}"));
    }
    if tone.iter().any(|&x| (x - 4.0).abs() > 0.4) {
        problems.push("tone time not near 4 frames".into());
    }
    let schemes = ["baseline", "csma_cw8", "csma_cw32", "csma_cw128"];
    for s in schemes {
        let m = format!("discovery_time:{s}");
        for w in dens.windows(2) {
            if !increases(t.row(w[0], &m), t.row(w[1], &m)) {
                problems.push(format!("{s} not increasing {}->{}", w[0], w[1]));
            }
        }
    }
    let mut min_lb = f64::MAX;
    for &d in &dens {
        for m in ["csma_speedup_lb:cw32_vs_cw8", "csma_speedup_lb:cw128_vs_cw32"] {
            let lb = t.value(d, m);
            min_lb = min_lb.min(lb);
            if lb <= 0.0 {
                problems.push(format!("{m} at {d}: {lb:.3}"));
            }
        }
    }
    let last = dens[dens.len() - 1];
    Verdict {
        name: "Fig. 12 direction",
        passed: problems.is_empty(),
        detail: format!(
            "tone {:?}; at {last} devices baseline {:.1}, csma cw8/32/128 {:.1}/{:.1}/{:.1}; min CW speedup bound {min_lb:.3}; issues {problems:?}",
            tone.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>(),
            t.value(last, "discovery_time:baseline"),
            t.value(last, "discovery_time:csma_cw8"),
            t.value(last, "discovery_time:csma_cw32"),
            t.value(last, "discovery_time:csma_cw128"),
        ),
    }
}

fn fig13_14() -> Verdict {
    let t13 = Table(rows_for("fig13"));
    let t14 = Table(rows_for("fig14"));
    let x13 = t13.sweep()[0];
    let x14 = t14.sweep()[0];
    let median = t13.row(x13, "median_gain_lb");
    let p05 = t14.row(x14, "p05_gain_lb");
    let drops = median.trials.min(p05.trials);
    Verdict {
        name: "Figs. 13-14 direction",
        passed: median.value >= 0.0 && p05.value >= 0.0 && drops >= 100,
        detail: format!(
            "median {:.3} -> {:.3} b/s/Hz (lower bound of gain {:.3}); p5 {:.3} -> {:.3} b/s/Hz (lower bound {:.3}); {drops} drops",
            t13.value(x13, "rate_p50:cellular"),
            t13.value(x13, "rate_p50:mode_selection"),
            median.value,
            t14.value(x14, "rate_p05:direct"),
            t14.value(x14, "rate_p05:relayed"),
            p05.value
        ),
    }
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("codec", codec_algebra),
        ("census", || from_checks("ambiguity census", &[oracle::ambiguity(SEED).unwrap()], None)),
        ("offset", || {
            from_checks("offset recovery", &[oracle::offset_recovery(SEED, TRIALS).unwrap()], None)
        }),
        ("bound", || {
            from_checks("error/erasure bound", &[oracle::error_erasure(SEED, TRIALS).unwrap()], None)
        }),
        ("baseline", baseline),
        ("fig9", fig9),
        ("fig11", fig11),
        ("fig12", fig12),
        ("fig13-14", fig13_14),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (key, f) in criteria {
        if filter.as_deref().is_some_and(|k| !key.contains(k)) {
            continue;
        }
        let t = Instant::now();
        let v = f();
        failed += !v.passed as usize;
        println!(
            "{} {} ({:.1} s): {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            t.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
