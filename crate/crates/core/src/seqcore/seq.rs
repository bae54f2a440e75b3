use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Inclusive integer range `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteInterval {
    lo: i64,
    hi: i64,
}

impl DiscreteInterval {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(invalid!("empty interval [{lo}, {hi}]"));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: i64) -> bool {
        self.lo <= n && n <= self.hi
    }

    /// Whether `n` lies strictly between the endpoints.
    pub fn contains_strictly(&self, n: i64) -> bool {
        self.lo < n && n < self.hi
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

/// A finite real sequence living on `[offset, offset + len - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq {
    offset: i64,
    values: Vec<f64>,
}

impl Seq {
    /// Fails on an empty or non-finite sequence.
    pub fn new(offset: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid!("sequence must have at least one entry"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid!("entry {} is not finite", offset + i as i64));
        }
        Ok(Self { offset, values })
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The carrier interval.
    pub fn interval(&self) -> DiscreteInterval {
        DiscreteInterval {
            lo: self.offset,
            hi: self.offset + self.values.len() as i64 - 1,
        }
    }

    /// Value at absolute index `n`, zero outside the carrier.
    pub fn get(&self, n: i64) -> f64 {
        let i = n - self.offset;
        if i < 0 {
            return 0.0;
        }
        self.values.get(i as usize).copied().unwrap_or(0.0)
    }

    /// `(index, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.offset + i as i64, v))
    }

    /// Indices with strictly positive value, as an interval hull. `None` if no entry is positive.
    pub fn positive_hull(&self) -> Option<DiscreteInterval> {
        let first = self.values.iter().position(|&v| v > 0.0)?;
        let last = self.values.iter().rposition(|&v| v > 0.0)?;
        Some(DiscreteInterval {
            lo: self.offset + first as i64,
            hi: self.offset + last as i64,
        })
    }

    /// Restriction to a sub-interval of the carrier.
    pub fn restrict(&self, to: DiscreteInterval) -> Result<Seq> {
        let carrier = self.interval();
        if !carrier.contains(to.lo) || !carrier.contains(to.hi) {
            return Err(invalid!(
                "[{}, {}] is not inside the carrier [{}, {}]",
                to.lo,
                to.hi,
                carrier.lo,
                carrier.hi
            ));
        }
        let a = (to.lo - self.offset) as usize;
        let b = (to.hi - self.offset) as usize;
        Ok(Seq {
            offset: to.lo,
            values: self.values[a..=b].to_vec(),
        })
    }

    /// Zero-extends onto a larger carrier.
    pub fn extend_to(&self, carrier: DiscreteInterval) -> Result<Seq> {
        let own = self.interval();
        if !carrier.contains(own.lo) || !carrier.contains(own.hi) {
            return Err(invalid!("carrier does not cover the sequence"));
        }
        let values = carrier.iter().map(|n| self.get(n)).collect();
        Ok(Seq {
            offset: carrier.lo,
            values,
        })
    }

    /// Same carrier, values in reverse order.
    pub fn reversed(&self) -> Seq {
        let mut values = self.values.clone();
        values.reverse();
        Seq {
            offset: self.offset,
            values,
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Seq> {
        Seq::new(self.offset, self.values.iter().map(|v| v * c).collect())
    }

    /// Entrywise `self + Σ coeffs[j]·dirs[j]`; all sequences must share the carrier.
    pub fn perturbed(&self, dirs: &[Seq], coeffs: &[f64]) -> Result<Seq> {
        if dirs.len() != coeffs.len() {
            return Err(invalid!("{} directions but {} coefficients", dirs.len(), coeffs.len()));
        }
        let mut values = self.values.clone();
        for (d, &c) in dirs.iter().zip(coeffs) {
            if d.interval() != self.interval() {
                return Err(invalid!("direction carrier differs from base carrier"));
            }
            for (v, &dv) in values.iter_mut().zip(&d.values) {
                *v += c * dv;
            }
        }
        Seq::new(self.offset, values)
    }

    /// `⟨self, other⟩` over a shared carrier.
    pub fn dot(&self, other: &Seq) -> Result<f64> {
        if self.interval() != other.interval() {
            return Err(invalid!("inner product needs a shared carrier"));
        }
        Ok(super::numeric::compensated_sum(
            self.values.iter().zip(&other.values).map(|(a, b)| a * b),
        ))
    }
}

/// Shortest round-trip text for a float, as used in CSV output
/// (`inf`, `-inf`, `NaN` for non-finite values).
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite floats serialize")
    } else {
        x.to_string()
    }
}

/// How a sequence file should be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeqKind {
    Pmf,
    #[default]
    Weights,
}

/// On-disk form of a sequence:
/// `{"offset": <int>, "values": [<float>...], "kind": "pmf" | "weights"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeqFile {
    pub offset: i64,
    pub values: Vec<f64>,
    #[serde(default)]
    pub kind: SeqKind,
}

impl SeqFile {
    pub fn from_seq(seq: &Seq, kind: SeqKind) -> Self {
        Self {
            offset: seq.offset,
            values: seq.values.clone(),
            kind,
        }
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_seq(&self) -> Result<Seq> {
        Seq::new(self.offset, self.values.clone())
    }
}
