//! Masking-augmented TAPT streams: every position is masked independently
//! with probability `p`, re-drawn for each epoch.

use serde::{Deserialize, Serialize};

use crate::corpus::{PackedSequence, MASK_TOKEN};
use crate::error::{Error, Result};
use crate::rng::{hash_str, splitmix64, Rng};

pub const DEFAULT_MASK_PROB: f64 = 0.15;
pub const DEFAULT_EPOCHS: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskedSequence {
    pub seq_id: String,
    pub epoch: u32,
    pub tokens: Vec<String>,
    pub masked_positions: Vec<usize>,
    pub originals: Vec<String>,
}

impl MaskedSequence {
    /// Puts the original tokens back.
    pub fn unmask(&self) -> Vec<String> {
        let mut out = self.tokens.clone();
        for (&pos, orig) in self.masked_positions.iter().zip(&self.originals) {
            out[pos] = orig.clone();
        }
        out
    }

    /// Checks the structural invariants of a (possibly parsed) record.
    pub fn validate(&self) -> Result<()> {
        if self.masked_positions.len() != self.originals.len() {
            return Err(Error::InvalidParam(format!(
                "{}: {} positions but {} originals",
                self.seq_id,
                self.masked_positions.len(),
                self.originals.len()
            )));
        }
        if self.masked_positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam(format!(
                "{}: masked positions not strictly increasing",
                self.seq_id
            )));
        }
        if self.masked_positions.last().is_some_and(|&p| p >= self.tokens.len()) {
            return Err(Error::InvalidParam(format!("{}: position out of bounds", self.seq_id)));
        }
        let mut next = self.masked_positions.iter().peekable();
        for (i, t) in self.tokens.iter().enumerate() {
            let masked = next.peek() == Some(&&i);
            if masked {
                next.next();
            }
            if masked != (t == MASK_TOKEN) {
                return Err(Error::InvalidParam(format!(
                    "{}: sentinel mismatch at position {i}",
                    self.seq_id
                )));
            }
        }
        Ok(())
    }
}

fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParam(format!("mask probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Stream for one (sequence, epoch): `splitmix64(seed ^ hash(seq_id) ^ epoch)`.
pub fn mask_rng(base_seed: u64, seq_id: &str, epoch: u32) -> Rng {
    Rng::new(splitmix64(base_seed ^ hash_str(seq_id) ^ u64::from(epoch)))
}

pub fn mask_sequence(seq: &PackedSequence, p: f64, epoch: u32, base_seed: u64) -> Result<MaskedSequence> {
    check_prob(p)?;
    let mut rng = mask_rng(base_seed, &seq.seq_id, epoch);
    let mut tokens = Vec::with_capacity(seq.tokens.len());
    let mut masked_positions = Vec::new();
    let mut originals = Vec::new();
    for (i, tok) in seq.tokens.iter().enumerate() {
        if rng.next_f64() < p {
            masked_positions.push(i);
            originals.push(tok.clone());
            tokens.push(MASK_TOKEN.to_string());
        } else {
            tokens.push(tok.clone());
        }
    }
    Ok(MaskedSequence {
        seq_id: seq.seq_id.clone(),
        epoch,
        tokens,
        masked_positions,
        originals,
    })
}

/// Epoch-major stream of `epochs * corpus.len()` masked sequences.
pub struct EpochStream<'a> {
    corpus: &'a [PackedSequence],
    epochs: u32,
    p: f64,
    seed: u64,
    epoch: u32,
    pos: usize,
}

impl Iterator for EpochStream<'_> {
    type Item = MaskedSequence;

    fn next(&mut self) -> Option<MaskedSequence> {
        if self.corpus.is_empty() {
            return None;
        }
        if self.pos == self.corpus.len() {
            self.pos = 0;
            self.epoch += 1;
        }
        if self.epoch >= self.epochs {
            return None;
        }
        let seq = &self.corpus[self.pos];
        self.pos += 1;
        Some(mask_sequence(seq, self.p, self.epoch, self.seed).expect("probability validated"))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let done = self.epoch as usize * self.corpus.len() + self.pos;
        let total = self.epochs as usize * self.corpus.len();
        let left = total.saturating_sub(done);
        (left, Some(left))
    }
}

impl ExactSizeIterator for EpochStream<'_> {}

pub fn augment_epochs(corpus: &[PackedSequence], epochs: u32, p: f64, base_seed: u64) -> Result<EpochStream<'_>> {
    check_prob(p)?;
    if epochs == 0 {
        return Err(Error::InvalidParam("epochs must be >= 1".into()));
    }
    Ok(EpochStream {
        corpus,
        epochs,
        p,
        seed: base_seed,
        epoch: 0,
        pos: 0,
    })
}
