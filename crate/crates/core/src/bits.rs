//! Fixed-size bit array with lock-free, lossless concurrent set.

use std::sync::atomic::{AtomicU64, Ordering};

pub struct AtomicBits {
    words: Vec<AtomicU64>,
    len: u64,
}

impl AtomicBits {
    pub fn new(len: u64) -> Self {
        let n_words = len.div_ceil(64) as usize;
        let mut words = Vec::with_capacity(n_words);
        words.resize_with(n_words, || AtomicU64::new(0));
        Self { words, len }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Sets bit `i`; returns true if it was previously clear. A 0 -> 1
    /// transition is reported to exactly one caller.
    #[inline]
    pub fn set(&self, i: u64) -> bool {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        let prev = self.words[(i / 64) as usize].fetch_or(mask, Ordering::Relaxed);
        prev & mask == 0
    }

    #[inline]
    pub fn get(&self, i: u64) -> bool {
        debug_assert!(i < self.len);
        self.words[(i / 64) as usize].load(Ordering::Relaxed) & (1u64 << (i % 64)) != 0
    }

    pub fn count_ones(&self) -> u64 {
        self.words
            .iter()
            .map(|w| w.load(Ordering::Relaxed).count_ones() as u64)
            .sum()
    }

    /// Calls `f` with the index of every set bit in `[start, start + len)`.
    pub fn for_each_set_in(&self, start: u64, len: u64, mut f: impl FnMut(u64)) {
        let end = start + len;
        debug_assert!(end <= self.len);
        let mut i = start;
        while i < end {
            let word_idx = i / 64;
            let bit = i % 64;
            let mut w = self.words[word_idx as usize].load(Ordering::Relaxed) >> bit;
            let span = (64 - bit).min(end - i);
            if span < 64 {
                w &= (1u64 << span) - 1;
            }
            while w != 0 {
                let tz = w.trailing_zeros() as u64;
                f(i + tz);
                w &= w - 1;
            }
            i += span;
        }
    }

    pub fn count_ones_in(&self, start: u64, len: u64) -> u64 {
        let mut n = 0;
        self.for_each_set_in(start, len, |_| n += 1);
        n
    }

    /// Packed bytes, bit `i` at byte `i / 8`, bit position `i % 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n_bytes = self.len.div_ceil(8) as usize;
        let mut out = Vec::with_capacity(self.words.len() * 8);
        for w in &self.words {
            out.extend_from_slice(&w.load(Ordering::Relaxed).to_le_bytes());
        }
        out.truncate(n_bytes);
        out
    }

    /// Inverse of [`AtomicBits::to_bytes`]. Padding bits past `len` must be
    /// zero.
    pub fn from_bytes(bytes: &[u8], len: u64) -> Option<Self> {
        if bytes.len() as u64 != len.div_ceil(8) {
            return None;
        }
        if !len.is_multiple_of(8) {
            let last = bytes[bytes.len() - 1];
            if last >> (len % 8) != 0 {
                return None;
            }
        }
        let words = bytes
            .chunks(8)
            .map(|c| {
                let mut buf = [0u8; 8];
                buf[..c.len()].copy_from_slice(c);
                AtomicU64::new(u64::from_le_bytes(buf))
            })
            .collect();
        Some(Self { words, len })
    }
}

impl Clone for AtomicBits {
    fn clone(&self) -> Self {
        Self {
            words: self
                .words
                .iter()
                .map(|w| AtomicU64::new(w.load(Ordering::Relaxed)))
                .collect(),
            len: self.len,
        }
    }
}

impl PartialEq for AtomicBits {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a.load(Ordering::Relaxed) == b.load(Ordering::Relaxed))
    }
}

impl std::fmt::Debug for AtomicBits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AtomicBits {{ len: {}, ones: {} }}", self.len, self.count_ones())
    }
}
