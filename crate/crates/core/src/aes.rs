//! AES-128 block cipher, written out transform by transform.
//!
//! The state is the usual 4x4 byte matrix stored column-major: input byte
//! `i` lands in row `i % 4`, column `i / 4`. With that layout a [`State`]
//! and a 16-byte block share the same byte order, so converting between the
//! two is a copy.
//!
//! The S-box and its inverse are derived at compile time from the field
//! definition (multiplicative inverse in GF(2⁸) followed by the affine map)
//! rather than pasted in as constants.

use std::fmt;

use crate::error::{Error, Result};

pub const BLOCK_LEN: usize = 16;
pub const KEY_LEN: usize = 16;
/// Nr for a 128-bit key.
pub const ROUNDS: usize = 10;

pub type Block = [u8; BLOCK_LEN];

/// Multiplication in GF(2⁸) modulo x⁸ + x⁴ + x³ + x + 1.
const fn gf_mul(mut a: u8, mut b: u8) -> u8 {
    let mut product = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            product ^= a;
        }
        a = xtime(a);
        b >>= 1;
    }
    product
}

/// Multiply by x, i.e. {02}.
#[inline(always)]
const fn xtime(a: u8) -> u8 {
    (a << 1) ^ (((a >> 7) & 1) * 0x1b)
}

/// a⁻¹ = a²⁵⁴ since the multiplicative group has order 255; 0 maps to 0.
const fn gf_inv(a: u8) -> u8 {
    let mut result = 1u8;
    let mut base = a;
    let mut exp = 254u32;
    while exp != 0 {
        if exp & 1 != 0 {
            result = gf_mul(result, base);
        }
        base = gf_mul(base, base);
        exp >>= 1;
    }
    result
}

const fn build_sbox() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let b = gf_inv(i as u8);
        table[i] =
            b ^ b.rotate_left(1) ^ b.rotate_left(2) ^ b.rotate_left(3) ^ b.rotate_left(4) ^ 0x63;
        i += 1;
    }
    table
}

const fn invert_table(table: &[u8; 256]) -> [u8; 256] {
    let mut inv = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        inv[table[i] as usize] = i as u8;
        i += 1;
    }
    inv
}

pub const SBOX: [u8; 256] = build_sbox();
pub const INV_SBOX: [u8; 256] = invert_table(&SBOX);

/// A 128-bit cipher key.
#[derive(Clone, PartialEq, Eq)]
pub struct Key128([u8; KEY_LEN]);

impl Key128 {
    pub const fn new(bytes: [u8; KEY_LEN]) -> Self {
        Key128(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let bytes: [u8; KEY_LEN] = bytes.try_into().map_err(|_| {
            Error::invalid(format!(
                "key must be exactly {KEY_LEN} bytes, got {}",
                bytes.len()
            ))
        })?;
        Ok(Key128(bytes))
    }

    /// Parses 32 hex digits.
    pub fn from_hex(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.len() != 2 * KEY_LEN {
            return Err(Error::invalid(format!(
                "hex key must be {} hex digits, got {}",
                2 * KEY_LEN,
                text.len()
            )));
        }
        let bytes = hex::decode(text).map_err(|e| Error::invalid(format!("bad hex key: {e}")))?;
        Self::from_slice(&bytes)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for Key128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Key128(..)")
    }
}

/// The eleven round keys derived from a [`Key128`]. Entry 0 is the key itself.
#[derive(Clone, PartialEq, Eq)]
pub struct RoundKeySchedule {
    round_keys: [[u8; BLOCK_LEN]; ROUNDS + 1],
}

impl RoundKeySchedule {
    pub fn new(key: &Key128) -> Self {
        expand_key(key)
    }

    pub fn round_key(&self, round: usize) -> &[u8; BLOCK_LEN] {
        &self.round_keys[round]
    }

    pub fn round_keys(&self) -> &[[u8; BLOCK_LEN]; ROUNDS + 1] {
        &self.round_keys
    }
}

impl fmt::Debug for RoundKeySchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RoundKeySchedule(..)")
    }
}

fn sub_word(word: [u8; 4]) -> [u8; 4] {
    word.map(|b| SBOX[b as usize])
}

/// Rijndael key schedule for Nk = 4: 44 words, with RotWord, SubWord and the
/// round constant folded into every fourth word.
pub fn expand_key(key: &Key128) -> RoundKeySchedule {
    const NK: usize = KEY_LEN / 4;
    let mut words = [[0u8; 4]; 4 * (ROUNDS + 1)];
    for (i, word) in words.iter_mut().take(NK).enumerate() {
        word.copy_from_slice(&key.0[4 * i..4 * i + 4]);
    }

    let mut rcon = 0x01u8;
    for i in NK..words.len() {
        let mut temp = words[i - 1];
        if i % NK == 0 {
            temp.rotate_left(1);
            temp = sub_word(temp);
            temp[0] ^= rcon;
            rcon = xtime(rcon);
        }
        for j in 0..4 {
            words[i][j] = words[i - NK][j] ^ temp[j];
        }
    }

    let mut round_keys = [[0u8; BLOCK_LEN]; ROUNDS + 1];
    for (round, rk) in round_keys.iter_mut().enumerate() {
        for c in 0..4 {
            rk[4 * c..4 * c + 4].copy_from_slice(&words[4 * round + c]);
        }
    }
    RoundKeySchedule { round_keys }
}

/// Mixes one column by {03}x³ + {01}x² + {01}x + {02}.
#[inline(always)]
pub fn mix_column(col: [u8; 4]) -> [u8; 4] {
    let [a0, a1, a2, a3] = col;
    let all = a0 ^ a1 ^ a2 ^ a3;
    // 2a ^ 3b ^ c ^ d == a ^ all ^ 2(a ^ b)
    [
        a0 ^ all ^ xtime(a0 ^ a1),
        a1 ^ all ^ xtime(a1 ^ a2),
        a2 ^ all ^ xtime(a2 ^ a3),
        a3 ^ all ^ xtime(a3 ^ a0),
    ]
}

/// Inverse of [`mix_column`]: {0b}x³ + {0d}x² + {09}x + {0e}.
#[inline(always)]
pub fn inv_mix_column(col: [u8; 4]) -> [u8; 4] {
    let [a0, a1, a2, a3] = col;
    [
        gf_mul(a0, 0x0e) ^ gf_mul(a1, 0x0b) ^ gf_mul(a2, 0x0d) ^ gf_mul(a3, 0x09),
        gf_mul(a0, 0x09) ^ gf_mul(a1, 0x0e) ^ gf_mul(a2, 0x0b) ^ gf_mul(a3, 0x0d),
        gf_mul(a0, 0x0d) ^ gf_mul(a1, 0x09) ^ gf_mul(a2, 0x0e) ^ gf_mul(a3, 0x0b),
        gf_mul(a0, 0x0b) ^ gf_mul(a1, 0x0d) ^ gf_mul(a2, 0x09) ^ gf_mul(a3, 0x0e),
    ]
}

/// The 4x4 byte matrix the round transforms act on, stored column-major.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct State([u8; BLOCK_LEN]);

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "State({})", hex::encode(self.0))
    }
}

impl State {
    pub fn from_block(block: &Block) -> Self {
        State(*block)
    }

    pub fn to_block(self) -> Block {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.0[row + 4 * col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.0[row + 4 * col] = value;
    }

    pub fn row(&self, row: usize) -> [u8; 4] {
        [0, 1, 2, 3].map(|c| self.get(row, c))
    }

    pub fn column(&self, col: usize) -> [u8; 4] {
        self.0[4 * col..4 * col + 4].try_into().unwrap()
    }

    fn set_column(&mut self, col: usize, value: [u8; 4]) {
        self.0[4 * col..4 * col + 4].copy_from_slice(&value);
    }

    #[inline]
    pub fn sub_bytes(&mut self) {
        for b in &mut self.0 {
            *b = SBOX[*b as usize];
        }
    }

    #[inline]
    pub fn inv_sub_bytes(&mut self) {
        for b in &mut self.0 {
            *b = INV_SBOX[*b as usize];
        }
    }

    /// Row r rotates left by r.
    #[inline]
    pub fn shift_rows(&mut self) {
        let s = self.0;
        for c in 0..4 {
            for r in 1..4 {
                self.0[r + 4 * c] = s[r + 4 * ((c + r) % 4)];
            }
        }
    }

    #[inline]
    pub fn inv_shift_rows(&mut self) {
        let s = self.0;
        for c in 0..4 {
            for r in 1..4 {
                self.0[r + 4 * ((c + r) % 4)] = s[r + 4 * c];
            }
        }
    }

    #[inline]
    pub fn mix_columns(&mut self) {
        for c in 0..4 {
            let col = mix_column(self.column(c));
            self.set_column(c, col);
        }
    }

    #[inline]
    pub fn inv_mix_columns(&mut self) {
        for c in 0..4 {
            let col = inv_mix_column(self.column(c));
            self.set_column(c, col);
        }
    }

    #[inline]
    pub fn add_round_key(&mut self, round_key: &[u8; BLOCK_LEN]) {
        for (b, k) in self.0.iter_mut().zip(round_key) {
            *b ^= k;
        }
    }
}

pub fn encrypt_block(block: &Block, ks: &RoundKeySchedule) -> Block {
    let mut state = State::from_block(block);
    state.add_round_key(ks.round_key(0));
    for round in 1..ROUNDS {
        state.sub_bytes();
        state.shift_rows();
        state.mix_columns();
        state.add_round_key(ks.round_key(round));
    }
    state.sub_bytes();
    state.shift_rows();
    state.add_round_key(ks.round_key(ROUNDS));
    state.to_block()
}

pub fn decrypt_block(block: &Block, ks: &RoundKeySchedule) -> Block {
    let mut state = State::from_block(block);
    state.add_round_key(ks.round_key(ROUNDS));
    state.inv_shift_rows();
    state.inv_sub_bytes();
    for round in (1..ROUNDS).rev() {
        state.add_round_key(ks.round_key(round));
        state.inv_mix_columns();
        state.inv_shift_rows();
        state.inv_sub_bytes();
    }
    state.add_round_key(ks.round_key(0));
    state.to_block()
}

/// Encrypts every 16-byte block of `buf` independently (ECB).
///
/// Panics if `buf.len()` is not a multiple of [`BLOCK_LEN`].
pub fn ecb_encrypt_in_place(buf: &mut [u8], ks: &RoundKeySchedule) {
    assert_eq!(buf.len() % BLOCK_LEN, 0, "ECB buffer must be block-aligned");
    for chunk in buf.chunks_exact_mut(BLOCK_LEN) {
        let block: &mut Block = chunk.try_into().unwrap();
        *block = encrypt_block(block, ks);
    }
}

/// Panics if `buf.len()` is not a multiple of [`BLOCK_LEN`].
pub fn ecb_decrypt_in_place(buf: &mut [u8], ks: &RoundKeySchedule) {
    assert_eq!(buf.len() % BLOCK_LEN, 0, "ECB buffer must be block-aligned");
    for chunk in buf.chunks_exact_mut(BLOCK_LEN) {
        let block: &mut Block = chunk.try_into().unwrap();
        *block = decrypt_block(block, ks);
    }
}
