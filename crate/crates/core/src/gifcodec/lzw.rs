//! Variable-width LZW as used by GIF: LSB-first bit packing, codes grow
//! from `min_code_size + 1` up to 12 bits, a clear code is emitted when
//! the dictionary fills.

use alloc::vec;
use alloc::vec::Vec;

const MAX_BITS: u32 = 12;
const MAX_CODES: u16 = 1 << MAX_BITS;
// Prime comfortably above 4096 entries.
const HASH_SIZE: usize = 5003;
const EMPTY: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LzwError {
    /// Code stream ended without an end-of-information code.
    Truncated,
    /// A code referenced a dictionary entry that does not exist yet.
    InvalidCode(u16),
    /// Decoded data ran past the caller's limit.
    TooLong,
}

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    fn write(&mut self, code: u16, bits: u32) {
        self.acc |= (code as u32) << self.nbits;
        self.nbits += bits;
        while self.nbits >= 8 {
            self.out.push(self.acc as u8);
            self.acc >>= 8;
            self.nbits -= 8;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            self.out.push(self.acc as u8);
        }
        self.out
    }
}

/// Open-addressed `(prefix, byte) -> code` map.
struct Dictionary {
    keys: Vec<u32>,
    codes: Vec<u16>,
}

impl Dictionary {
    fn new() -> Self {
        Self { keys: vec![EMPTY; HASH_SIZE], codes: vec![0; HASH_SIZE] }
    }

    fn clear(&mut self) {
        self.keys.fill(EMPTY);
    }

    #[inline]
    fn slot(&self, key: u32) -> (usize, bool) {
        let mut i = ((key as usize) ^ ((key as usize) >> 7).wrapping_mul(31)) % HASH_SIZE;
        loop {
            match self.keys[i] {
                EMPTY => return (i, false),
                k if k == key => return (i, true),
                _ => i = if i + 1 == HASH_SIZE { 0 } else { i + 1 },
            }
        }
    }

    #[inline]
    fn get(&self, prefix: u16, byte: u8) -> Option<u16> {
        let (i, found) = self.slot(((prefix as u32) << 8) | byte as u32);
        found.then(|| self.codes[i])
    }

    #[inline]
    fn insert(&mut self, prefix: u16, byte: u8, code: u16) {
        let key = ((prefix as u32) << 8) | byte as u32;
        let (i, _) = self.slot(key);
        self.keys[i] = key;
        self.codes[i] = code;
    }
}

/// Compresses `data` (every value `< 1 << min_code_size`).
pub fn encode(data: &[u8], min_code_size: u8) -> Vec<u8> {
    let min = min_code_size as u32;
    let clear = 1u16 << min;
    let eoi = clear + 1;
    let mut size = min + 1;
    let mut next = eoi + 1;
    let mut w = BitWriter { out: Vec::with_capacity(data.len() / 2 + 16), acc: 0, nbits: 0 };
    let mut dict = Dictionary::new();

    w.write(clear, size);
    let Some((&first, rest)) = data.split_first() else {
        w.write(eoi, size);
        return w.finish();
    };
    let mut prefix = first as u16;
    for &k in rest {
        if let Some(code) = dict.get(prefix, k) {
            prefix = code;
            continue;
        }
        w.write(prefix, size);
        if next == MAX_CODES {
            w.write(clear, size);
            dict.clear();
            size = min + 1;
            next = eoi + 1;
        } else {
            dict.insert(prefix, k, next);
            next += 1;
            // The decoder adds this entry one code later, so it widens
            // when our `next` passes the power of two.
            if next > (1 << size) && size < MAX_BITS {
                size += 1;
            }
        }
        prefix = k as u16;
    }
    w.write(prefix, size);
    // Mirror the entry the decoder adds after reading that last code.
    if next < MAX_CODES {
        next += 1;
        if next > (1 << size) && size < MAX_BITS {
            size += 1;
        }
    }
    w.write(eoi, size);
    w.finish()
}

/// Decompresses a code stream, producing at most `limit` bytes.
pub fn decode(data: &[u8], min_code_size: u8, limit: usize) -> Result<Vec<u8>, LzwError> {
    let min = min_code_size as u32;
    let clear = 1u16 << min;
    let eoi = clear + 1;
    let mut prefix = [0u16; MAX_CODES as usize];
    let mut suffix = [0u8; MAX_CODES as usize];
    let mut first = [0u8; MAX_CODES as usize];
    let mut len = [0u16; MAX_CODES as usize];
    for c in 0..clear {
        suffix[c as usize] = c as u8;
        first[c as usize] = c as u8;
        len[c as usize] = 1;
    }

    let mut size = min + 1;
    let mut next = eoi + 1;
    let mut prev: Option<u16> = None;
    let mut out: Vec<u8> = Vec::with_capacity(limit.min(1 << 20));
    let (mut acc, mut nbits, mut pos) = (0u32, 0u32, 0usize);

    loop {
        while nbits < size {
            let byte = *data.get(pos).ok_or(LzwError::Truncated)?;
            acc |= (byte as u32) << nbits;
            nbits += 8;
            pos += 1;
        }
        let code = (acc & ((1 << size) - 1)) as u16;
        acc >>= size;
        nbits -= size;

        if code == clear {
            size = min + 1;
            next = eoi + 1;
            prev = None;
            continue;
        }
        if code == eoi {
            return Ok(out);
        }
        let Some(p) = prev else {
            if code > clear {
                return Err(LzwError::InvalidCode(code));
            }
            if out.len() >= limit {
                return Err(LzwError::TooLong);
            }
            out.push(code as u8);
            prev = Some(code);
            continue;
        };

        let head = if code < next {
            first[code as usize]
        } else if code == next && next < MAX_CODES {
            first[p as usize]
        } else {
            return Err(LzwError::InvalidCode(code));
        };
        let (string_code, tail) = if code < next { (code, None) } else { (p, Some(head)) };
        let n = len[string_code as usize] as usize;
        let total = n + tail.is_some() as usize;
        if out.len() + total > limit {
            return Err(LzwError::TooLong);
        }
        let start = out.len();
        out.resize(start + n, 0);
        let mut c = string_code;
        for slot in out[start..].iter_mut().rev() {
            *slot = suffix[c as usize];
            c = prefix[c as usize];
        }
        if let Some(t) = tail {
            out.push(t);
        }

        if next < MAX_CODES {
            let i = next as usize;
            prefix[i] = p;
            suffix[i] = head;
            first[i] = first[p as usize];
            len[i] = len[p as usize] + 1;
            next += 1;
            if next == (1 << size) && size < MAX_BITS {
                size += 1;
            }
        }
        prev = Some(code);
    }
}
