//! Timed-release encryption: a time server periodically publishes `s·H1(T)`
//! for each time label `T`; a ciphertext addressed to `(aG, asG)` and `T`
//! opens only with the recipient secret `a` and that time-bound key.
//!
//! ```text
//! ENC:  U = rG,  K = e(r·asG, H1(T)),  V = M xor H2(K)
//! DEC:  K' = e(U, s·H1(T))^a = K
//! ```
//!
//! There is no ciphertext integrity. Whatever authenticates the plaintext
//! must live inside it.

use rand::RngCore;

use crate::groups::{kdf_from_gt, mask_trailing_bits, BackendId, GroupError, PairingSuite};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreError {
    #[error("time label is empty")]
    EmptyLabel,
    #[error("message is empty")]
    EmptyMessage,
    #[error("recipient public key fails e(aG, sG) = e(G, asG)")]
    InconsistentRecipientKey,
    #[error("time-bound key is for `{key}` but ciphertext is for `{ciphertext}`")]
    TimeLabelMismatch { key: String, ciphertext: String },
    #[error("time-bound key fails public verification")]
    InvalidTimeBoundKey,
    #[error("secret scalar must be non-zero")]
    ZeroSecret,
    #[error("plaintext length {bits} bits does not match {bytes} bytes")]
    BadBitLength { bits: usize, bytes: usize },
    #[error("malformed ciphertext: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Release-time label. The simulation clock issues `epoch:<tick>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeLabel(String);

impl TimeLabel {
    pub fn new(label: impl Into<String>) -> Result<Self, TreError> {
        let label = label.into();
        if label.is_empty() {
            return Err(TreError::EmptyLabel);
        }
        Ok(TimeLabel(label))
    }

    pub fn epoch(tick: u64) -> Self {
        TimeLabel(format!("epoch:{tick}"))
    }

    /// The tick of an `epoch:<tick>` label.
    pub fn tick(&self) -> Option<u64> {
        self.0.strip_prefix("epoch:")?.parse().ok()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl std::fmt::Display for TimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A message of an exact bit length, stored MSB-first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plaintext {
    bytes: Vec<u8>,
    bits: usize,
}

impl Plaintext {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let bits = bytes.len() * 8;
        Plaintext { bytes, bits }
    }

    /// `bytes` must be exactly `ceil(bits / 8)` long; padding bits are cleared.
    pub fn from_bits(mut bytes: Vec<u8>, bits: usize) -> Result<Self, TreError> {
        if bytes.len() != bits.div_ceil(8) {
            return Err(TreError::BadBitLength { bits, bytes: bytes.len() });
        }
        mask_trailing_bits(&mut bytes, bits);
        Ok(Plaintext { bytes, bits })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeServerPublic<S: PairingSuite> {
    pub g: S::G1,
    pub s_g: S::G1,
    /// `s` times the G2 generator, needed to check recipient keys on an
    /// asymmetric pairing. Equal to `s_g` on the mock backend.
    pub s_g2: S::G2,
}

#[derive(Debug, Clone)]
pub struct TimeServerKeys<S: PairingSuite> {
    secret: S::Scalar,
    pub public: TimeServerPublic<S>,
}

impl<S: PairingSuite> TimeServerKeys<S> {
    pub fn from_secret(suite: &S, s: S::Scalar) -> Result<Self, TreError> {
        if suite.scalar_is_zero(&s) {
            return Err(TreError::ZeroSecret);
        }
        let g = suite.g1_generator();
        let public = TimeServerPublic {
            g,
            s_g: suite.g1_mul(&s, &g),
            s_g2: suite.g2_mul(&s, &suite.g2_generator()),
        };
        Ok(TimeServerKeys { secret: s, public })
    }

    pub fn secret(&self) -> &S::Scalar {
        &self.secret
    }
}

/// Recipient public key `(aG, asG)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrePublicKey<S: PairingSuite> {
    pub a_g: S::G1,
    pub as_g: S::G1,
}

impl<S: PairingSuite> TrePublicKey<S> {
    /// `e(aG, sG) = e(G, asG)`, evaluated with `sG` taken from G2.
    pub fn is_consistent(&self, suite: &S, ts: &TimeServerPublic<S>) -> bool {
        suite.pairing(&self.a_g, &ts.s_g2) == suite.pairing(&self.as_g, &suite.g2_generator())
    }
}

#[derive(Debug, Clone)]
pub struct TreKeyPair<S: PairingSuite> {
    secret: S::Scalar,
    pub public: TrePublicKey<S>,
}

impl<S: PairingSuite> TreKeyPair<S> {
    pub fn from_secret(suite: &S, ts: &TimeServerPublic<S>, a: S::Scalar) -> Result<Self, TreError> {
        if suite.scalar_is_zero(&a) {
            return Err(TreError::ZeroSecret);
        }
        let public = TrePublicKey { a_g: suite.g1_mul(&a, &ts.g), as_g: suite.g1_mul(&a, &ts.s_g) };
        Ok(TreKeyPair { secret: a, public })
    }

    pub fn secret(&self) -> &S::Scalar {
        &self.secret
    }
}

/// `s·H1(T)`, publicly checkable against the time server key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeBoundKey<S: PairingSuite> {
    pub label: TimeLabel,
    pub key: S::G2,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreCiphertext<S: PairingSuite> {
    pub u: S::G1,
    pub v: Vec<u8>,
    pub label: TimeLabel,
    pub msg_len_bits: u32,
}

pub fn ts_gen<S: PairingSuite, R: RngCore + ?Sized>(suite: &S, rng: &mut R) -> TimeServerKeys<S> {
    let s = suite.random_nonzero_scalar(rng);
    TimeServerKeys::from_secret(suite, s).expect("random scalar is non-zero")
}

pub fn user_gen<S: PairingSuite, R: RngCore + ?Sized>(
    suite: &S,
    ts: &TimeServerPublic<S>,
    rng: &mut R,
) -> TreKeyPair<S> {
    let a = suite.random_nonzero_scalar(rng);
    TreKeyPair::from_secret(suite, ts, a).expect("random scalar is non-zero")
}

pub fn ts_broadcast<S: PairingSuite>(
    suite: &S,
    keys: &TimeServerKeys<S>,
    label: &TimeLabel,
) -> Result<TimeBoundKey<S>, TreError> {
    let h = suite.hash_to_g2(label.as_bytes())?;
    Ok(TimeBoundKey { label: label.clone(), key: suite.g2_mul(&keys.secret, &h) })
}

/// `e(sG, H1(T)) = e(G, s·H1(T))`.
pub fn verify_time_key<S: PairingSuite>(suite: &S, ts: &TimeServerPublic<S>, tbk: &TimeBoundKey<S>) -> bool {
    let Ok(h) = suite.hash_to_g2(tbk.label.as_bytes()) else {
        return false;
    };
    suite.pairing(&ts.s_g, &h) == suite.pairing(&ts.g, &tbk.key)
}

pub fn tre_encrypt<S: PairingSuite, R: RngCore + ?Sized>(
    suite: &S,
    ts: &TimeServerPublic<S>,
    recipient: &TrePublicKey<S>,
    label: &TimeLabel,
    msg: &Plaintext,
    rng: &mut R,
) -> Result<TreCiphertext<S>, TreError> {
    let r = suite.random_nonzero_scalar(rng);
    tre_encrypt_with_nonce(suite, ts, recipient, label, msg, &r)
}

/// Encryption with a caller-chosen ephemeral `r`. Reusing `r` across
/// messages leaks their XOR; production callers go through [`tre_encrypt`].
pub fn tre_encrypt_with_nonce<S: PairingSuite>(
    suite: &S,
    ts: &TimeServerPublic<S>,
    recipient: &TrePublicKey<S>,
    label: &TimeLabel,
    msg: &Plaintext,
    r: &S::Scalar,
) -> Result<TreCiphertext<S>, TreError> {
    if msg.bits == 0 {
        return Err(TreError::EmptyMessage);
    }
    if suite.scalar_is_zero(r) {
        return Err(TreError::ZeroSecret);
    }
    if !recipient.is_consistent(suite, ts) {
        return Err(TreError::InconsistentRecipientKey);
    }
    let h = suite.hash_to_g2(label.as_bytes())?;
    let u = suite.g1_mul(r, &ts.g);
    let k = suite.pairing(&suite.g1_mul(r, &recipient.as_g), &h);
    let mut v = kdf_from_gt(suite, &k, msg.bits);
    xor_in_place(&mut v, &msg.bytes);
    Ok(TreCiphertext { u, v, label: label.clone(), msg_len_bits: msg.bits as u32 })
}

pub fn tre_decrypt<S: PairingSuite>(
    suite: &S,
    ts: &TimeServerPublic<S>,
    ct: &TreCiphertext<S>,
    a: &S::Scalar,
    tbk: &TimeBoundKey<S>,
) -> Result<Plaintext, TreError> {
    if tbk.label != ct.label {
        return Err(TreError::TimeLabelMismatch {
            key: tbk.label.to_string(),
            ciphertext: ct.label.to_string(),
        });
    }
    if !verify_time_key(suite, ts, tbk) {
        return Err(TreError::InvalidTimeBoundKey);
    }
    Ok(decrypt_with_key(suite, ct, a, &tbk.key))
}

/// The bare decryption equation with no label or key checks. A wrong key
/// or secret yields unrelated bits, never an error.
pub fn decrypt_with_key<S: PairingSuite>(suite: &S, ct: &TreCiphertext<S>, a: &S::Scalar, key: &S::G2) -> Plaintext {
    let k = suite.gt_pow(&suite.pairing(&ct.u, key), a);
    let bits = ct.msg_len_bits as usize;
    let mut out = kdf_from_gt(suite, &k, bits);
    xor_in_place(&mut out, &ct.v);
    mask_trailing_bits(&mut out, bits);
    Plaintext { bytes: out, bits }
}

fn xor_in_place(dst: &mut [u8], src: &[u8]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

impl<S: PairingSuite> TreCiphertext<S> {
    /// `backend id (1) ‖ T length (2) ‖ T ‖ msg_len_bits (4) ‖ U ‖ V`, big-endian.
    pub fn to_bytes(&self, suite: &S) -> Vec<u8> {
        let label = self.label.as_bytes();
        let mut out = Vec::with_capacity(7 + label.len() + suite.g1_encoding_len() + self.v.len());
        out.push(suite.backend_id().to_byte());
        out.extend_from_slice(&(label.len() as u16).to_be_bytes());
        out.extend_from_slice(label);
        out.extend_from_slice(&self.msg_len_bits.to_be_bytes());
        out.extend_from_slice(&suite.g1_encode(&self.u));
        out.extend_from_slice(&self.v);
        out
    }

    pub fn from_bytes(suite: &S, bytes: &[u8]) -> Result<Self, TreError> {
        let mut rest = bytes;
        let tag = take(&mut rest, 1)?[0];
        if BackendId::from_byte(tag) != Some(suite.backend_id()) {
            return Err(TreError::Malformed("backend id"));
        }
        let label_len = u16::from_be_bytes(take(&mut rest, 2)?.try_into().unwrap()) as usize;
        let label = std::str::from_utf8(take(&mut rest, label_len)?).map_err(|_| TreError::Malformed("label utf-8"))?;
        let label = TimeLabel::new(label)?;
        let msg_len_bits = u32::from_be_bytes(take(&mut rest, 4)?.try_into().unwrap());
        if msg_len_bits == 0 {
            return Err(TreError::EmptyMessage);
        }
        let u = suite.g1_decode(take(&mut rest, suite.g1_encoding_len())?)?;
        if u == suite.g1_identity() {
            return Err(TreError::Malformed("U is the identity"));
        }
        let v = rest.to_vec();
        if v.len() != (msg_len_bits as usize).div_ceil(8) {
            return Err(TreError::Malformed("V length"));
        }
        Ok(TreCiphertext { u, v, label, msg_len_bits })
    }
}

fn take<'a>(rest: &mut &'a [u8], n: usize) -> Result<&'a [u8], TreError> {
    if rest.len() < n {
        return Err(TreError::Malformed("truncated"));
    }
    let (head, tail) = rest.split_at(n);
    *rest = tail;
    Ok(head)
}
