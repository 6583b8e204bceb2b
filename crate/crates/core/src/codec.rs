//! TDID codec: message expansion, tone-index encoding, classification of
//! received sequences, and lookup decoding of superposed signals.
//!
//! A message of `K` base-`p` digits `u` is placed in transform positions
//! `1..=K` with a zero in position 0 and zeros in the tail; the forward
//! transform gives the `N` tone indices. Because the inverse transform of
//! the all-ones vector is `e0`, a uniform shift by `delta` shows up as
//! `delta` in inverse position 0 and nowhere else.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{domain, Error, Result};
use crate::galois::{Element, GftPair, PrimeField};

/// Enumeration guard for [`ambiguity_census`].
pub const CENSUS_LIMIT: u64 = 10_000_000;
/// Enumeration guard for [`min_distance`].
pub const CODEBOOK_LIMIT: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecParams {
    gft: GftPair,
    k: usize,
    theta: usize,
    delta_window: u32,
}

impl CodecParams {
    /// `(N, K)` code over GF(p) with the default threshold `ceil((N+1)/2)`
    /// and offset window of 2.
    pub fn new(p: u32, n: usize, k: usize) -> Result<Self> {
        let gft = GftPair::new(PrimeField::new(p)?, n)?;
        Self::from_gft(gft, k, (n + 1).div_ceil(2), 2)
    }

    pub fn from_gft(gft: GftPair, k: usize, theta: usize, delta_window: u32) -> Result<Self> {
        let n = gft.len();
        if k == 0 || k > n {
            return domain(format!("need 1 <= K <= N, got K={k}, N={n}"));
        }
        if theta == 0 || theta > n {
            return domain(format!("need 1 <= theta <= N, got theta={theta}, N={n}"));
        }
        let p = gft.field().modulus() as u64;
        if p.checked_pow(k as u32).is_none() {
            return domain(format!("p^K too large for p={p}, K={k}"));
        }
        if delta_window as u64 * 2 >= p {
            return domain(format!("offset window {delta_window} must be < p/2"));
        }
        Ok(Self {
            gft,
            k,
            theta,
            delta_window,
        })
    }

    pub fn with_theta(self, theta: usize) -> Result<Self> {
        Self::from_gft(self.gft, self.k, theta, self.delta_window)
    }

    pub fn with_delta_window(self, delta_window: u32) -> Result<Self> {
        Self::from_gft(self.gft, self.k, self.theta, delta_window)
    }

    pub fn gft(&self) -> &GftPair {
        &self.gft
    }

    pub fn field(&self) -> &PrimeField {
        self.gft.field()
    }

    pub fn p(&self) -> u32 {
        self.field().modulus()
    }

    pub fn n(&self) -> usize {
        self.gft.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> usize {
        self.theta
    }

    pub fn delta_window(&self) -> u32 {
        self.delta_window
    }

    /// Number of distinct TDIDs, `p^K`.
    pub fn tdid_count(&self) -> u64 {
        (self.p() as u64).pow(self.k as u32)
    }

    /// Offsets searched by the decoder in tie-break order:
    /// `0, -1, +1, -2, +2, ...`.
    pub fn delta_order(&self) -> impl Iterator<Item = i32> {
        let w = self.delta_window as i32;
        std::iter::once(0).chain((1..=w).flat_map(|d| [-d, d]))
    }
}

impl Default for CodecParams {
    /// `(11, 1)` over GF(199).
    fn default() -> Self {
        Self::new(199, 11, 1).expect("default codec parameters are valid")
    }
}

/// A TDID and its base-`p` digits, least significant first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Message {
    pub tdid: u64,
    pub symbols: Vec<Element>,
}

/// Base-`base` expansion of `m` into `k` digits, least significant first.
pub fn digits_in_base(m: u64, base: u64, k: usize) -> Result<Vec<u64>> {
    let span = base.checked_pow(k as u32);
    if base < 2 || span.is_some_and(|s| m >= s) {
        return domain(format!("{m} not representable with {k} base-{base} digits"));
    }
    let mut rest = m;
    Ok((0..k)
        .map(|_| {
            let d = rest % base;
            rest /= base;
            d
        })
        .collect())
}

pub fn tdid_to_symbols(m: u64, params: &CodecParams) -> Result<Message> {
    let symbols = digits_in_base(m, params.p() as u64, params.k)?
        .into_iter()
        .map(|d| d as Element)
        .collect();
    Ok(Message { tdid: m, symbols })
}

pub fn symbols_to_tdid(symbols: &[Element], params: &CodecParams) -> Result<u64> {
    if symbols.len() != params.k || symbols.iter().any(|&u| u >= params.p()) {
        return domain("symbols must be K digits in [0, p)");
    }
    let p = params.p() as u64;
    Ok(symbols.iter().rev().fold(0u64, |acc, &u| acc * p + u as u64))
}

/// The `N` tone indices of one discovery signal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Codeword(Vec<Element>);

impl Codeword {
    /// Wraps raw tone indices; they must already be reduced mod p.
    pub fn from_tones(tones: Vec<Element>, params: &CodecParams) -> Result<Self> {
        if tones.len() != params.n() {
            return domain(format!("expected {} tones, got {}", params.n(), tones.len()));
        }
        if let Some(&t) = tones.iter().find(|&&t| t >= params.p()) {
            return domain(format!("tone {t} outside [0, {})", params.p()));
        }
        Ok(Self(tones))
    }

    pub fn tones(&self) -> &[Element] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Adds `delta` to every tone modulo p.
    pub fn shifted(&self, delta: i64, field: &PrimeField) -> Codeword {
        let d = field.reduce(delta);
        Codeword(self.0.iter().map(|&t| field.add(t, d)).collect())
    }

    pub fn hamming(&self, other: &Codeword) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// `tones[n] = sum_k u_k * beta^(n*k)` for `n = 0..N`.
pub fn encode(msg: &Message, params: &CodecParams) -> Codeword {
    let f = params.field();
    let n = params.n();
    let beta = params.gft.beta();
    let tones = (0..n)
        .map(|row| {
            msg.symbols.iter().enumerate().fold(0, |acc, (i, &u)| {
                let e = (row * (i + 1)) % n;
                f.add(acc, f.mul(u % params.p(), f.pow(beta, e as u64)))
            })
        })
        .collect();
    Codeword(tones)
}

pub fn encode_tdid(m: u64, params: &CodecParams) -> Result<Codeword> {
    Ok(encode(&tdid_to_symbols(m, params)?, params))
}

/// Verdict on a received tone sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    Valid(Message),
    /// A valid codeword displaced by a uniform offset of `delta` channels.
    Shifted { msg: Message, delta: i64 },
    Invalid,
}

/// Reads the message out of an inverse transform if the zero pattern holds.
fn message_from_inverse(w: &[Element], params: &CodecParams) -> Option<Message> {
    let n = params.n();
    let k = params.k;
    // Positions 1..=K carry the message; with K = N position 0 does too.
    let zero_ok = if k < n {
        w[0] == 0 && w[k + 1..].iter().all(|&x| x == 0)
    } else {
        true
    };
    if !zero_ok {
        return None;
    }
    let symbols: Vec<Element> = (1..=k).map(|i| w[i % n]).collect();
    let tdid = symbols_to_tdid(&symbols, params).ok()?;
    Some(Message { tdid, symbols })
}

pub fn classify(c: &Codeword, params: &CodecParams) -> Classification {
    let w = params.gft.inverse(c.tones());
    if let Some(msg) = message_from_inverse(&w, params) {
        return Classification::Valid(msg);
    }
    if params.k < params.n() && w[0] != 0 {
        let delta = params.field().signed(w[0]);
        if delta.unsigned_abs() <= params.delta_window as u64 {
            let back = c.shifted(-delta, params.field());
            let w2 = params.gft.inverse(back.tones());
            if let Some(msg) = message_from_inverse(&w2, params) {
                return Classification::Shifted { msg, delta };
            }
        }
    }
    Classification::Invalid
}

/// Per-symbol sets of detected channel indices in `[0, p)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToneSets {
    p: u32,
    present: Vec<Vec<bool>>,
}

impl ToneSets {
    pub fn empty(n: usize, p: u32) -> Self {
        Self {
            p,
            present: vec![vec![false; p as usize]; n],
        }
    }

    pub fn from_sets(sets: &[BTreeSet<Element>], p: u32) -> Result<Self> {
        let mut out = Self::empty(sets.len(), p);
        for (n, s) in sets.iter().enumerate() {
            for &t in s {
                out.insert(n, t)?;
            }
        }
        Ok(out)
    }

    /// Union of the tones of several codewords.
    pub fn from_codewords<'a>(
        words: impl IntoIterator<Item = &'a Codeword>,
        params: &CodecParams,
    ) -> Self {
        let mut out = Self::empty(params.n(), params.p());
        for w in words {
            for (n, &t) in w.tones().iter().enumerate() {
                out.present[n][t as usize] = true;
            }
        }
        out
    }

    pub fn symbols(&self) -> usize {
        self.present.len()
    }

    pub fn modulus(&self) -> u32 {
        self.p
    }

    pub fn insert(&mut self, symbol: usize, tone: Element) -> Result<()> {
        if tone >= self.p || symbol >= self.present.len() {
            return domain(format!("tone ({symbol}, {tone}) outside grid"));
        }
        self.present[symbol][tone as usize] = true;
        Ok(())
    }

    pub fn remove(&mut self, symbol: usize, tone: Element) -> bool {
        match self.present.get_mut(symbol).and_then(|s| s.get_mut(tone as usize)) {
            Some(slot) => std::mem::replace(slot, false),
            None => false,
        }
    }

    #[inline]
    pub fn contains(&self, symbol: usize, tone: Element) -> bool {
        self.present
            .get(symbol)
            .and_then(|s| s.get(tone as usize))
            .copied()
            .unwrap_or(false)
    }

    pub fn tones(&self, symbol: usize) -> impl Iterator<Item = Element> + '_ {
        self.present[symbol]
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(t, _)| t as Element)
    }

    pub fn count(&self, symbol: usize) -> usize {
        self.present[symbol].iter().filter(|&&on| on).count()
    }

    pub fn total(&self) -> usize {
        (0..self.symbols()).map(|n| self.count(n)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn to_sets(&self) -> Vec<BTreeSet<Element>> {
        (0..self.symbols()).map(|n| self.tones(n).collect()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecodeEntry {
    pub tdid: u64,
    pub match_count: usize,
    pub delta: i32,
}

/// Decoded signals, ascending by TDID.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeResult {
    pub entries: Vec<DecodeEntry>,
}

impl DecodeResult {
    pub fn tdids(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|e| e.tdid)
    }

    pub fn contains(&self, tdid: u64) -> bool {
        self.entries.binary_search_by_key(&tdid, |e| e.tdid).is_ok()
    }

    pub fn get(&self, tdid: u64) -> Option<&DecodeEntry> {
        self.entries
            .binary_search_by_key(&tdid, |e| e.tdid)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `true` when `a` ranks before `b` among offsets with equal match count.
fn delta_preferred(a: i32, b: i32) -> bool {
    (a.unsigned_abs(), a > 0) < (b.unsigned_abs(), b > 0)
}

fn count_matches(word: &Codeword, delta: i32, sets: &ToneSets, f: &PrimeField) -> usize {
    let d = f.reduce(delta as i64);
    word.tones()
        .iter()
        .enumerate()
        .filter(|&(n, &t)| sets.contains(n, f.add(t, d)))
        .count()
}

/// Best offset for one candidate by direct match counting.
fn score_candidate(tdid: u64, sets: &ToneSets, params: &CodecParams) -> Result<DecodeEntry> {
    let word = encode_tdid(tdid, params)?;
    let mut best = DecodeEntry {
        tdid,
        match_count: 0,
        delta: 0,
    };
    for delta in params.delta_order() {
        let m = count_matches(&word, delta, sets, params.field());
        if m > best.match_count {
            best.match_count = m;
            best.delta = delta;
        }
    }
    Ok(best)
}

/// Best offset for every TDID by vote accumulation; `K = 1` only.
///
/// For `K = 1` the tone at symbol `n` is `u * beta^n + delta`, so every
/// detected tone votes for exactly one `u` per offset. The counts are
/// identical to direct match counting.
fn score_all_votes(sets: &ToneSets, params: &CodecParams) -> Vec<DecodeEntry> {
    let f = params.field();
    let p = params.p() as usize;
    let deltas: Vec<i32> = params.delta_order().collect();
    let beta_inv = f.inv(params.gft.beta()).expect("beta is non-zero");
    let mut votes = vec![0u16; p * deltas.len()];
    let mut scale = 1; // beta^-n
    for n in 0..params.n() {
        for t in sets.tones(n) {
            for (di, &d) in deltas.iter().enumerate() {
                let u = f.mul(f.sub(t, f.reduce(d as i64)), scale);
                votes[u as usize * deltas.len() + di] += 1;
            }
        }
        scale = f.mul(scale, beta_inv);
    }
    (0..p)
        .map(|u| {
            let row = &votes[u * deltas.len()..(u + 1) * deltas.len()];
            let (di, &m) = row
                .iter()
                .enumerate()
                .fold((0, &0u16), |best, cur| if cur.1 > best.1 { cur } else { best });
            DecodeEntry {
                tdid: u as u64,
                match_count: m as usize,
                delta: if m == 0 { 0 } else { deltas[di] },
            }
        })
        .collect()
}

/// Best `(match_count, delta)` for each candidate, ascending by TDID.
fn score(
    sets: &ToneSets,
    params: &CodecParams,
    candidates: Option<&[u64]>,
) -> Result<Vec<DecodeEntry>> {
    if sets.symbols() != params.n() || sets.modulus() != params.p() {
        return domain("tone sets do not match codec dimensions");
    }
    match candidates {
        None if params.k == 1 => Ok(score_all_votes(sets, params)),
        None => (0..params.tdid_count())
            .map(|m| score_candidate(m, sets, params))
            .collect(),
        Some(list) => {
            let uniq: BTreeSet<u64> = list.iter().copied().collect();
            uniq.into_iter()
                .map(|m| score_candidate(m, sets, params))
                .collect()
        }
    }
}

/// Lookup decoding of superposed signals.
///
/// Every candidate TDID (all `p^K` when `candidates` is `None`) is scored at
/// each offset in the window; TDIDs whose best score reaches `theta` are
/// reported with that offset. Candidates outside the code are an error.
pub fn decode_multi(
    sets: &ToneSets,
    params: &CodecParams,
    candidates: Option<&[u64]>,
) -> Result<DecodeResult> {
    let entries = score(sets, params, candidates)?
        .into_iter()
        .filter(|e| e.match_count >= params.theta && e.match_count > 0)
        .collect();
    Ok(DecodeResult { entries })
}

/// The single most likely `(tdid, delta)`: highest match count, then
/// smallest `|delta|` (negative first), then lowest TDID. `None` when no
/// tone matches anything.
pub fn decode_ml(sets: &ToneSets, params: &CodecParams) -> Result<Option<DecodeEntry>> {
    let best = score(sets, params, None)?
        .into_iter()
        .filter(|e| e.match_count > 0)
        .min_by(|a, b| {
            b.match_count
                .cmp(&a.match_count)
                .then_with(|| (a.delta.unsigned_abs(), a.delta > 0).cmp(&(b.delta.unsigned_abs(), b.delta > 0)))
                .then_with(|| a.tdid.cmp(&b.tdid))
        });
    Ok(best)
}

/// `(symbol, tone)` positions of `sets` that an entry accounts for.
pub fn matched_positions(
    entry: &DecodeEntry,
    sets: &ToneSets,
    params: &CodecParams,
) -> Result<Vec<(usize, Element)>> {
    let word = encode_tdid(entry.tdid, params)?;
    let f = params.field();
    let d = f.reduce(entry.delta as i64);
    Ok(word
        .tones()
        .iter()
        .enumerate()
        .map(|(n, &t)| (n, f.add(t, d)))
        .filter(|&(n, t)| sets.contains(n, t))
        .collect())
}

/// Drops entries explained by stronger ones.
///
/// Entries are visited strongest first; an entry survives only if at least
/// `theta` of its matched tones are not already claimed by a survivor. This
/// removes phantom `(tdid, delta)` hypotheses assembled from single tones of
/// many real signals at a non-zero offset.
pub fn resolve_overlaps(
    result: &DecodeResult,
    sets: &ToneSets,
    params: &CodecParams,
) -> Result<DecodeResult> {
    resolve_overlaps_min(result, sets, params, params.theta)
}

/// [`resolve_overlaps`] with an explicit novelty requirement.
pub fn resolve_overlaps_min(
    result: &DecodeResult,
    sets: &ToneSets,
    params: &CodecParams,
    min_novel: usize,
) -> Result<DecodeResult> {
    let mut order: Vec<&DecodeEntry> = result.entries.iter().collect();
    order.sort_by(|a, b| {
        b.match_count
            .cmp(&a.match_count)
            .then_with(|| {
                if delta_preferred(a.delta, b.delta) {
                    std::cmp::Ordering::Less
                } else if delta_preferred(b.delta, a.delta) {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .then_with(|| a.tdid.cmp(&b.tdid))
    });
    let mut claimed = ToneSets::empty(params.n(), params.p());
    let mut kept = Vec::new();
    for e in order {
        let pos = matched_positions(e, sets, params)?;
        let novel = pos.iter().filter(|&&(n, t)| !claimed.contains(n, t)).count();
        if novel >= min_novel {
            for (n, t) in pos {
                claimed.insert(n, t)?;
            }
            kept.push(*e);
        }
    }
    kept.sort_by_key(|e| e.tdid);
    Ok(DecodeResult { entries: kept })
}

/// `decode_multi` followed by [`resolve_overlaps`].
pub fn decode_resolved(sets: &ToneSets, params: &CodecParams) -> Result<DecodeResult> {
    let raw = decode_multi(sets, params, None)?;
    resolve_overlaps(&raw, sets, params)
}

/// Error/erasure capability of an MDS `(n, k)` code: `2*eps + nu <= n - k`.
pub fn capability_ok(n: usize, k: usize, eps: usize, nu: usize) -> bool {
    n.checked_sub(k).is_some_and(|r| 2 * eps + nu <= r)
}

/// Counts how many of the `G^N` per-symbol tone selections from `codewords`
/// classify as valid. Returns `(valid, G^N)`.
pub fn ambiguity_census(codewords: &[Codeword], params: &CodecParams) -> Result<(u64, u64)> {
    let g = codewords.len();
    let n = params.n();
    if g == 0 {
        return domain("census needs at least one codeword");
    }
    let total = (g as u64)
        .checked_pow(n as u32)
        .filter(|&t| t <= CENSUS_LIMIT)
        .ok_or_else(|| Error::Resource(format!("{g}^{n} exceeds census limit {CENSUS_LIMIT}")))?;
    let distinct: BTreeSet<&Codeword> = codewords.iter().collect();
    if distinct.len() != g {
        return domain("census codewords must be distinct");
    }
    for c in codewords {
        if c.len() != n || !matches!(classify(c, params), Classification::Valid(_)) {
            return domain(format!("census input {c} is not a valid codeword"));
        }
    }

    let mut choice = vec![0usize; n];
    let mut tones = vec![0; n];
    let mut valid = 0u64;
    for _ in 0..total {
        for (i, &c) in choice.iter().enumerate() {
            tones[i] = codewords[c].tones()[i];
        }
        if matches!(
            classify(&Codeword(tones.clone()), params),
            Classification::Valid(_)
        ) {
            valid += 1;
        }
        // odometer
        for digit in choice.iter_mut() {
            *digit += 1;
            if *digit < g {
                break;
            }
            *digit = 0;
        }
    }
    Ok((valid, total))
}

/// Exhaustive minimum pairwise Hamming distance of the code.
pub fn min_distance(params: &CodecParams) -> Result<usize> {
    let count = params.tdid_count();
    if count > CODEBOOK_LIMIT {
        return Err(Error::Resource(format!(
            "codebook of {count} words exceeds limit {CODEBOOK_LIMIT}"
        )));
    }
    let book: Vec<Codeword> = (0..count)
        .map(|m| encode_tdid(m, params))
        .collect::<Result<_>>()?;
    let mut best = params.n();
    for (i, a) in book.iter().enumerate() {
        for b in &book[i + 1..] {
            best = best.min(a.hamming(b));
        }
    }
    Ok(best)
}
