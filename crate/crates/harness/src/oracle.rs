//! Invariant suite: codec algebra, ambiguity census, offset recovery, the
//! error/erasure bound and the analytic random-access baseline, each checked
//! against an independent computation.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use tonedisc::codec::{
    ambiguity_census, capability_ok, classify, decode_ml, encode_tdid, min_distance, tdid_to_symbols,
    Classification, CodecParams, Codeword, ToneSets,
};
use tonedisc::galois::{find_primitive_root, is_prime, GftPair, PrimeField};
use tonedisc::net::{p_discovery, run_baseline_discovery};
use tonedisc::rng::{self, SimRng};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Randomized trials behind the verdict, zero for exhaustive checks.
    pub trials: u64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, trials: u64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            trials,
            detail,
        }
    }
}

/// Runs every check. `trials` sizes the sampled ones.
pub fn run_checks(seed: u64, trials: u64) -> Result<Vec<Check>> {
    Ok(vec![
        primitive_roots(),
        gft_inverse(),
        codec_algebra(seed, trials)?,
        ambiguity(seed)?,
        offset_recovery(seed, trials)?,
        error_erasure(seed, trials)?,
        baseline_grid(seed)?,
        baseline_optimum(seed)?,
    ])
}

/// Order of `a` mod `p` by repeated multiplication.
fn brute_order(a: u64, p: u64) -> u64 {
    let mut x = a % p;
    let mut k = 1;
    while x != 1 {
        x = x * a % p;
        k += 1;
    }
    k
}

pub fn primitive_roots() -> Check {
    let mut bad = Vec::new();
    let mut count = 0;
    for p in (3..1000u32).filter(|&p| is_prime(p)) {
        count += 1;
        let want = (2..p as u64).find(|&a| brute_order(a, p as u64) == p as u64 - 1);
        let got = find_primitive_root(p).ok().map(u64::from);
        if got != want {
            bad.push(p);
        }
    }
    Check::new(
        "primitive_roots",
        bad.is_empty(),
        0,
        format!("{count} primes below 1000, mismatches {bad:?}"),
    )
}

pub fn gft_inverse() -> Check {
    let mut bad = Vec::new();
    let mut pairs = 0;
    for p in (3..200u32).filter(|&p| is_prime(p)) {
        let field = PrimeField::new(p).expect("prime");
        for n in (1..=32usize).filter(|n| (p as usize - 1).is_multiple_of(*n)) {
            pairs += 1;
            let g = GftPair::new(field, n).expect("n divides p - 1");
            let pm = p as u64;
            let ok = (0..n).all(|r| {
                (0..n).all(|c| {
                    let s = (0..n).fold(0u64, |acc, j| (acc + g.z(r, j) as u64 * g.z_inv(j, c) as u64) % pm);
                    s == (r == c) as u64
                })
            });
            if !ok {
                bad.push((p, n));
            }
        }
    }
    Check::new(
        "gft_inverse",
        bad.is_empty(),
        0,
        format!("{pairs} (p, n) pairs, failures {bad:?}"),
    )
}

/// Minimum distance, round trip and zero-pattern validity.
pub fn codec_algebra(seed: u64, trials: u64) -> Result<Check> {
    let mut notes = Vec::new();
    let mut ok = true;
    for (i, &(p, n, k)) in [(23u32, 11usize, 1usize), (23, 11, 2), (67, 11, 1), (199, 11, 1)].iter().enumerate() {
        let params = CodecParams::new(p, n, k)?;
        let d = min_distance(&params)?;
        let book: Vec<Codeword> = (0..params.tdid_count()).map(|m| encode_tdid(m, &params)).collect::<tonedisc::Result<_>>()?;
        let round_trip = book.iter().enumerate().all(|(m, c)| {
            matches!(classify(c, &params), Classification::Valid(msg) if msg.tdid == m as u64)
        });
        let words: BTreeSet<&[u32]> = book.iter().map(Codeword::tones).collect();
        let mut r = rng::derive(seed, rng::tag("oracle-noncodeword"), i as u64);
        let mut rejected = 0u64;
        let mut sampled = 0u64;
        while sampled < trials {
            let tones: Vec<u32> = (0..n).map(|_| r.random_range(0..p)).collect();
            if words.contains(tones.as_slice()) {
                continue;
            }
            sampled += 1;
            let c = Codeword::from_tones(tones, &params)?;
            rejected += !matches!(classify(&c, &params), Classification::Valid(_)) as u64;
        }
        let good = d == n - k + 1 && round_trip && rejected == sampled;
        ok &= good;
        notes.push(format!(
            "({p},{n},{k}) dmin={d} round_trip={round_trip} rejected={rejected}/{sampled}"
        ));
    }
    Ok(Check::new("codec_algebra", ok, trials, notes.join("; ")))
}

/// Counts valid mixtures of `G` codewords; must be exactly `G`.
pub fn ambiguity(seed: u64) -> Result<Check> {
    let mut ok = true;
    let mut notes = Vec::new();

    let mut run = |p: u32, n: usize, g: usize, sets: Vec<Vec<u64>>| -> Result<()> {
        let params = CodecParams::new(p, n, 1)?;
        let mut worst = None;
        for set in &sets {
            let words: Vec<Codeword> = set.iter().map(|&m| encode_tdid(m, &params)).collect::<tonedisc::Result<_>>()?;
            let (valid, total) = ambiguity_census(&words, &params)?;
            if valid != g as u64 || total != (g as u64).pow(n as u32) {
                ok = false;
                worst = Some((set.clone(), valid, total));
            }
        }
        notes.push(format!(
            "G={g} N={n} p={p}: {} sets, {}",
            sets.len(),
            match worst {
                None => format!("all exactly {g} of {}", (g as u64).pow(n as u32)),
                Some((s, v, t)) => format!("set {s:?} gave {v} of {t}"),
            }
        ));
        Ok(())
    };

    // Exhaustive over all pairs at p = 23, sampled pairs at p = 199.
    let all_pairs = |p: u64| -> Vec<Vec<u64>> { (0..p).flat_map(|a| (a + 1..p).map(move |b| vec![a, b])).collect() };
    run(23, 11, 2, all_pairs(23))?;
    let mut r = rng::derive(seed, rng::tag("oracle-census"), 0);
    let sampled: Vec<Vec<u64>> = (0..50)
        .map(|_| index::sample(&mut r, 199, 2).iter().map(|m| m as u64).collect())
        .collect();
    run(199, 11, 2, sampled)?;
    let triples: Vec<Vec<u64>> = (0..11u64)
        .flat_map(|a| (a + 1..11).flat_map(move |b| (b + 1..11).map(move |c| vec![a, b, c])))
        .collect();
    run(11, 5, 3, triples)?;
    run(29, 7, 2, all_pairs(29))?;
    Ok(Check::new("ambiguity_census", ok, 0, notes.join("; ")))
}

/// Every shifted codeword with `0 < |delta| <= 2` is recovered exactly.
pub fn offset_recovery(seed: u64, trials: u64) -> Result<Check> {
    let params = CodecParams::default();
    let mut r = rng::derive(seed, rng::tag("oracle-offset"), 0);
    let mut failures = 0u64;
    let mut false_valid = 0u64;
    for _ in 0..trials {
        let m = r.random_range(0..params.tdid_count());
        let delta = [-2i64, -1, 1, 2][r.random_range(0..4)];
        let shifted = encode_tdid(m, &params)?.shifted(delta, params.field());
        match classify(&shifted, &params) {
            Classification::Shifted { msg, delta: d } if d == delta && msg == tdid_to_symbols(m, &params)? => {}
            Classification::Valid(_) => {
                false_valid += 1;
                failures += 1;
            }
            _ => failures += 1,
        }
    }
    Ok(Check::new(
        "offset_recovery",
        failures == 0,
        trials,
        format!("{failures} failures ({false_valid} classified Valid) in {trials} shifted codewords"),
    ))
}

/// Corrupts `eps` symbols with a wrong tone and erases `nu` others.
fn corrupt(word: &Codeword, eps: usize, nu: usize, p: u32, r: &mut SimRng) -> Result<ToneSets> {
    let n = word.len();
    let picks = index::sample(r, n, eps + nu).into_vec();
    let mut sets: Vec<BTreeSet<u32>> = word.tones().iter().map(|&t| BTreeSet::from([t])).collect();
    for (i, &pos) in picks.iter().enumerate() {
        sets[pos].clear();
        if i < eps {
            let truth = word.tones()[pos];
            let wrong = (truth + r.random_range(1..p)) % p;
            sets[pos].insert(wrong);
        }
    }
    Ok(ToneSets::from_sets(&sets, p)?)
}

/// Result of decoding corrupted codewords at one weight `2*eps + nu`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WeightOutcome {
    pub weight: usize,
    pub trials: u64,
    pub failures: u64,
}

/// Random corruption trials for the default `(11, 1)` code. Inside the
/// bound the `(eps, nu)` pair is drawn uniformly from those allowed; each
/// weight above the bound gets `trials / 10` trials.
pub fn error_erasure_sweep(seed: u64, trials: u64) -> Result<(WeightOutcome, Vec<WeightOutcome>)> {
    let params = CodecParams::default();
    let (n, k, p) = (params.n(), params.k(), params.p());
    let inside: Vec<(usize, usize)> = (0..=n)
        .flat_map(|e| (0..=n - e).map(move |v| (e, v)))
        .filter(|&(e, v)| capability_ok(n, k, e, v))
        .collect();
    let decode_ok = |m: u64, sets: &ToneSets| -> Result<bool> {
        Ok(decode_ml(sets, &params)?.is_some_and(|e| e.tdid == m && e.delta == 0))
    };

    let mut r = rng::derive(seed, rng::tag("oracle-erasure"), 0);
    let mut within = WeightOutcome { weight: n - k, ..Default::default() };
    for _ in 0..trials {
        let m = r.random_range(0..params.tdid_count());
        let (e, v) = inside[r.random_range(0..inside.len())];
        let sets = corrupt(&encode_tdid(m, &params)?, e, v, p, &mut r)?;
        within.trials += 1;
        within.failures += !decode_ok(m, &sets)? as u64;
    }

    let mut beyond = Vec::new();
    for w in n - k + 1..=2 * n {
        let combos: Vec<(usize, usize)> = (0..=n)
            .flat_map(|e| (0..=n - e).map(move |v| (e, v)))
            .filter(|&(e, v)| 2 * e + v == w)
            .collect();
        if combos.is_empty() {
            continue;
        }
        let mut r = rng::derive(seed, rng::tag("oracle-erasure"), w as u64);
        let mut out = WeightOutcome { weight: w, ..Default::default() };
        for _ in 0..(trials / 10).max(1) {
            let m = r.random_range(0..params.tdid_count());
            let (e, v) = combos[r.random_range(0..combos.len())];
            let sets = corrupt(&encode_tdid(m, &params)?, e, v, p, &mut r)?;
            out.trials += 1;
            out.failures += !decode_ok(m, &sets)? as u64;
        }
        beyond.push(out);
    }
    Ok((within, beyond))
}

pub fn error_erasure(seed: u64, trials: u64) -> Result<Check> {
    let (within, beyond) = error_erasure_sweep(seed, trials)?;
    let onset = beyond.iter().find(|o| o.failures > 0).map(|o| o.weight);
    let passed = within.failures == 0 && onset.is_none_or(|w| w > within.weight);
    let rates: Vec<String> = beyond
        .iter()
        .take(4)
        .map(|o| format!("{}:{}/{}", o.weight, o.failures, o.trials))
        .collect();
    Ok(Check::new(
        "error_erasure_bound",
        passed,
        within.trials,
        format!(
            "2e+v<={}: {} failures in {} trials; onset at 2e+v={}; beyond [{}]",
            within.weight,
            within.failures,
            within.trials,
            onset.map_or("none".into(), |w| w.to_string()),
            rates.join(" ")
        ),
    ))
}

pub const BASELINE_TRIALS: u64 = 20_000;

/// Monte Carlo versus closed form on a 3x3x3 grid of `(p, G, t)`.
pub fn baseline_grid(seed: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    let mut points = 0;
    for &p in &[0.1, 0.3, 0.5] {
        for &g in &[2u32, 5, 10] {
            for &t in &[1u32, 5, 20] {
                points += 1;
                let est = run_baseline_discovery(p, g, t, BASELINE_TRIALS, seed)?.estimate();
                let exact = p_discovery(p, g, t);
                let sd = (exact * (1.0 - exact) / BASELINE_TRIALS as f64).sqrt();
                let z = if sd > 0.0 { (est - exact).abs() / sd } else if est == exact { 0.0 } else { f64::INFINITY };
                worst = worst.max(z);
                if z > 3.0 {
                    bad.push(format!("(p={p},G={g},t={t}) {est:.4} vs {exact:.4}"));
                }
            }
        }
    }
    Ok(Check::new(
        "baseline_grid",
        bad.is_empty(),
        BASELINE_TRIALS * points,
        format!("{points} points, worst |z| = {worst:.2}; outside 3 sigma: {bad:?}"),
    ))
}

/// The empirical best transmit probability sits within one grid step of
/// `1/G`.
pub fn baseline_optimum(seed: u64) -> Result<Check> {
    let step = 0.05;
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 * step).collect();
    let mut notes = Vec::new();
    let mut ok = true;
    for &(g, t) in &[(4u32, 10u32), (5, 5), (10, 10)] {
        let mut best = (0.0, -1.0);
        for &p in &grid {
            // Same seed for every p: common random numbers.
            let est = run_baseline_discovery(p, g, t, BASELINE_TRIALS, seed)?.estimate();
            if est > best.1 {
                best = (p, est);
            }
        }
        let target = 1.0 / g as f64;
        let good = (best.0 - target).abs() <= step + 1e-9;
        ok &= good;
        notes.push(format!("G={g} t={t}: argmax p={:.2} (1/G={target:.2})", best.0));
    }
    Ok(Check::new("baseline_optimum", ok, BASELINE_TRIALS * 30, notes.join("; ")))
}
