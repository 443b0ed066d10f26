//! Modular-addition instances: bag-of-tokens encoding, labels, sampling,
//! exhaustive enumeration and JSONL dataset files.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Default ceiling on the number of bags [`enumerate_domain`] will build.
pub const DEFAULT_DOMAIN_CAP: u128 = 10_000_000;

/// Modulus `p` and sequence length `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub p: usize,
    pub m: usize,
}

impl TaskSpec {
    pub fn new(p: usize, m: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidArgument(format!("modulus p = {p} must be at least 2")));
        }
        if m < 2 {
            return Err(Error::InvalidArgument(format!("length m = {m} must be at least 2")));
        }
        Ok(Self { p, m })
    }

    /// `|𝒳_m| = C(m + p − 1, p − 1)`; saturates at `u128::MAX`.
    pub fn domain_size(&self) -> u128 {
        binomial(self.m + self.p - 1, self.p - 1)
    }
}

/// Token count vector with `Σ counts = m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BagVector {
    counts: Vec<u32>,
}

impl BagVector {
    pub fn from_counts(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn p(&self) -> usize {
        self.counts.len()
    }

    /// `‖x‖₁`.
    pub fn length(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    /// `(token, count)` pairs with nonzero count.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (k, f64::from(c)))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| f64::from(c)).collect()
    }

    pub fn squared_l2(&self) -> f64 {
        self.counts.iter().map(|&c| f64::from(c) * f64::from(c)).sum()
    }

    /// `α · e_token` for a single repeated token.
    pub fn ray(p: usize, token: usize, count: u32) -> Self {
        let mut counts = vec![0; p];
        counts[token] = count;
        Self { counts }
    }

    /// Probability of this bag under i.i.d. uniform tokens:
    /// `m! / (Π_k c_k!) · p^{−m}`.
    pub fn multinomial_probability(&self) -> f64 {
        let m = self.length();
        let p = self.p() as f64;
        let ln = ln_factorial(m) - self.counts.iter().map(|&c| ln_factorial(c as usize)).sum::<f64>()
            - m as f64 * p.ln();
        ln.exp()
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Encode a token sequence as its bag-of-tokens count vector.
pub fn encode(seq: &[usize], spec: TaskSpec) -> Result<BagVector> {
    if seq.len() != spec.m {
        return Err(Error::WrongLength { got: seq.len(), expected: spec.m });
    }
    let mut counts = vec![0u32; spec.p];
    for &t in seq {
        if t >= spec.p {
            return Err(Error::TokenOutOfRange { token: t, p: spec.p });
        }
        counts[t] += 1;
    }
    Ok(BagVector { counts })
}

/// `(Σ_k k · counts[k]) mod p`.
pub fn label_of(x: &BagVector, spec: TaskSpec) -> usize {
    label_mod(x, spec.p)
}

pub(crate) fn label_mod(x: &BagVector, p: usize) -> usize {
    x.counts
        .iter()
        .enumerate()
        .fold(0usize, |acc, (k, &c)| (acc + (k % p) * (c as usize % p)) % p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Provenance {
    Sampled { seed: u64, stream_id: u64, n: usize },
    Exhaustive,
    Derived { note: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    pub spec: TaskSpec,
    pub items: Vec<(BagVector, usize)>,
    pub provenance: Provenance,
    /// Raw token sequences, kept for sampled sets.
    pub sequences: Option<Vec<Vec<usize>>>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items whose label does not match [`label_of`]; empty for well-formed sets.
    pub fn mislabeled(&self) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, (x, y))| label_of(x, self.spec) != *y || x.length() != self.spec.m)
            .map(|(i, _)| i)
            .collect()
    }

    /// A new set with the selected items, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet {
            spec: self.spec,
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
            provenance: Provenance::Derived { note: format!("subset of {} items", indices.len()) },
            sequences: self
                .sequences
                .as_ref()
                .map(|s| indices.iter().map(|&i| s[i].clone()).collect()),
        }
    }

    /// Writes a header record followed by one `{counts, label}` record per item.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = DatasetHeader {
            format: DATASET_FORMAT.to_string(),
            spec: self.spec,
            provenance: self.provenance.clone(),
            n: self.items.len(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for (x, y) in &self.items {
            serde_json::to_writer(&mut w, &DatasetRecord { counts: x.counts.clone(), label: *y })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads a file written by [`LabeledSet::write_jsonl`], validating every label.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header_line = lines.next().ok_or_else(|| Error::Format("empty dataset file".into()))??;
        let header: DatasetHeader = serde_json::from_str(&header_line)?;
        if header.format != DATASET_FORMAT {
            return Err(Error::Format(format!("unsupported dataset format {}", header.format)));
        }
        let spec = TaskSpec::new(header.spec.p, header.spec.m)?;
        let mut items = Vec::with_capacity(header.n);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DatasetRecord = serde_json::from_str(&line)?;
            let x = BagVector::from_counts(rec.counts);
            if x.p() != spec.p || x.length() != spec.m {
                return Err(Error::Format(format!("record {} is not a bag of {spec:?}", items.len())));
            }
            if label_of(&x, spec) != rec.label {
                return Err(Error::Format(format!("record {} carries a wrong label", items.len())));
            }
            items.push((x, rec.label));
        }
        if items.len() != header.n {
            return Err(Error::Format(format!("header announces {} items, found {}", header.n, items.len())));
        }
        Ok(LabeledSet { spec, items, provenance: header.provenance, sequences: None })
    }
}

pub const DATASET_FORMAT: &str = "modadd.dataset.v1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetHeader {
    format: String,
    spec: TaskSpec,
    provenance: Provenance,
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetRecord {
    counts: Vec<u32>,
    label: usize,
}

/// `n` i.i.d. sequences with uniform tokens, encoded and labeled.
///
/// Draws are sequential, so the first `k` items of a size-`n` set equal the
/// size-`k` set drawn from the same stream.
pub fn sample_set(spec: TaskSpec, n: usize, rng: &mut RngStream) -> Result<LabeledSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let (seed, stream_id) = (rng.seed(), rng.stream_id());
    let mut items = Vec::with_capacity(n);
    let mut sequences = Vec::with_capacity(n);
    for _ in 0..n {
        let seq: Vec<usize> = (0..spec.m).map(|_| rng.below(spec.p)).collect();
        let x = encode(&seq, spec)?;
        let y = label_of(&x, spec);
        items.push((x, y));
        sequences.push(seq);
    }
    Ok(LabeledSet {
        spec,
        items,
        provenance: Provenance::Sampled { seed, stream_id, n },
        sequences: Some(sequences),
    })
}

/// Every bag of `𝒳_m` once, in lexicographic order of the count vectors.
pub fn enumerate_domain(spec: TaskSpec) -> Result<LabeledSet> {
    enumerate_domain_capped(spec, DEFAULT_DOMAIN_CAP)
}

pub fn enumerate_domain_capped(spec: TaskSpec, cap: u128) -> Result<LabeledSet> {
    let required = spec.domain_size();
    if required > cap {
        return Err(Error::CapExceeded { required, cap });
    }
    let mut items = Vec::with_capacity(required as usize);
    let mut counts = vec![0u32; spec.p];
    fill_lex(&mut counts, 0, spec.m as u32, &mut |c| {
        let x = BagVector::from_counts(c.to_vec());
        let y = label_of(&x, spec);
        items.push((x, y));
    });
    debug_assert_eq!(items.len() as u128, required);
    Ok(LabeledSet { spec, items, provenance: Provenance::Exhaustive, sequences: None })
}

fn fill_lex(counts: &mut [u32], pos: usize, remaining: u32, emit: &mut impl FnMut(&[u32])) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        emit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[pos] = c;
        fill_lex(counts, pos + 1, remaining - c, emit);
    }
    counts[pos] = 0;
}

/// Exact law of the label under i.i.d. uniform tokens, by `m`-fold cyclic
/// convolution of the uniform residue distribution.
pub fn exact_label_distribution(spec: TaskSpec) -> Vec<f64> {
    let p = spec.p;
    // Integer counts of sequences per residue: start with one token.
    let mut counts: Vec<u128> = vec![1; p];
    let mut total: u128 = p as u128;
    let mut exact = true;
    let mut probs: Vec<f64> = vec![1.0 / p as f64; p];
    for _ in 1..spec.m {
        if exact {
            let mut next = vec![0u128; p];
            let mut overflow = false;
            for (a, &ca) in counts.iter().enumerate() {
                for b in 0..p {
                    match next[(a + b) % p].checked_add(ca) {
                        Some(v) => next[(a + b) % p] = v,
                        None => overflow = true,
                    }
                }
            }
            match (overflow, total.checked_mul(p as u128)) {
                (false, Some(t)) => {
                    counts = next;
                    total = t;
                    continue;
                }
                _ => {
                    exact = false;
                    probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
                }
            }
        }
        let mut next = vec![0.0; p];
        for (a, &pa) in probs.iter().enumerate() {
            for b in 0..p {
                next[(a + b) % p] += pa / p as f64;
            }
        }
        probs = next;
    }
    if exact {
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    } else {
        probs
    }
}

/// `C(n, k)` in `u128`, saturating on overflow.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc · (n − i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}
