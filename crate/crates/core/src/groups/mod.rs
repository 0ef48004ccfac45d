//! Prime-order groups, the bilinear map and the hash functions built on them.
//!
//! Two backends implement [`PairingSuite`]:
//!
//! * [`Bls12Suite`]: BLS12-381 through arkworks. Keys, ciphertext headers and
//!   blind-signature points live in G1; time labels hash into G2.
//! * [`MockSuite`]: `G1 = G2 = Gt = (Z_q, +)` with `e(x, y) = x·y mod q`.
//!   Perfectly bilinear and completely insecure. Every equation downstream
//!   can be checked by hand or by brute force on it.
//!
//! The pairing on BLS12-381 is asymmetric, so [`PairingSuite::pairing`] takes
//! its second argument from G2. On the mock backend both source groups are
//! the same set and the distinction is only in the types.

mod bls;
mod mock;

pub use bls::Bls12Suite;
pub use mock::{MockElem, MockSuite};

use std::fmt::Debug;

use num_bigint::BigUint;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha3::digest::{ExtendableOutput, Update, XofReader};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroupError {
    #[error("mock group order {0} is not prime")]
    NonPrimeOrder(u64),
    #[error("mock group order {0} is below the minimum of 11")]
    OrderTooSmall(u64),
    #[error("unsupported backend `{0}`")]
    UnsupportedBackend(String),
    #[error("invalid group element encoding")]
    InvalidEncoding,
    #[error("hash-to-group label is empty")]
    EmptyLabel,
    #[error("point at infinity has no x-coordinate")]
    IdentityPoint,
    #[error("hash to curve failed: {0}")]
    HashToCurve(String),
}

/// Wire tag for a backend. Carried in ciphertexts and ledger genesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendId {
    Production,
    Mock,
}

impl BackendId {
    pub fn to_byte(self) -> u8 {
        match self {
            BackendId::Production => 0x01,
            BackendId::Mock => 0x02,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(BackendId::Production),
            0x02 => Some(BackendId::Mock),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BackendId::Production => "production",
            BackendId::Mock => "mock",
        }
    }
}

impl std::str::FromStr for BackendId {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "production" => Ok(BackendId::Production),
            "mock" => Ok(BackendId::Mock),
            other => Err(GroupError::UnsupportedBackend(other.to_string())),
        }
    }
}

impl std::fmt::Display for BackendId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Serializable description of a suite, enough to rebuild it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteDescriptor {
    pub backend: BackendId,
    /// Curve name for production, `None` for mock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<String>,
    /// Group order in decimal.
    pub order: String,
}

/// The `params` of the time server: group order, generators, pairing and the
/// hash functions into the groups.
///
/// All operations are pure; values are immutable and `Send + Sync`.
pub trait PairingSuite: Copy + Clone + PartialEq + Debug + Send + Sync + 'static {
    type Scalar: Copy + Clone + PartialEq + Eq + Debug + Send + Sync;
    type G1: Copy + Clone + PartialEq + Eq + Debug + Send + Sync;
    type G2: Copy + Clone + PartialEq + Eq + Debug + Send + Sync;
    type Gt: Copy + Clone + PartialEq + Eq + Debug + Send + Sync;

    fn backend_id(&self) -> BackendId;
    fn descriptor(&self) -> SuiteDescriptor;
    /// Prime order q shared by G1, G2 and Gt.
    fn order(&self) -> BigUint;
    fn security_bits(&self) -> u32;

    fn scalar_from_biguint(&self, v: &BigUint) -> Self::Scalar;
    fn scalar_to_biguint(&self, s: &Self::Scalar) -> BigUint;
    fn scalar_add(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_sub(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_mul(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_inv(&self, a: &Self::Scalar) -> Option<Self::Scalar>;
    fn scalar_is_zero(&self, a: &Self::Scalar) -> bool;
    /// Uniform in `[1, q-1]`.
    fn random_nonzero_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Self::Scalar;

    fn g1_generator(&self) -> Self::G1;
    fn g1_identity(&self) -> Self::G1;
    fn g1_add(&self, p: &Self::G1, q: &Self::G1) -> Self::G1;
    fn g1_mul(&self, a: &Self::Scalar, p: &Self::G1) -> Self::G1;
    fn g1_encoding_len(&self) -> usize;
    fn g1_encode(&self, p: &Self::G1) -> Vec<u8>;
    fn g1_decode(&self, bytes: &[u8]) -> Result<Self::G1, GroupError>;

    fn g2_generator(&self) -> Self::G2;
    fn g2_identity(&self) -> Self::G2;
    fn g2_add(&self, p: &Self::G2, q: &Self::G2) -> Self::G2;
    fn g2_mul(&self, a: &Self::Scalar, p: &Self::G2) -> Self::G2;
    fn g2_encoding_len(&self) -> usize;
    fn g2_encode(&self, p: &Self::G2) -> Vec<u8>;
    fn g2_decode(&self, bytes: &[u8]) -> Result<Self::G2, GroupError>;

    fn pairing(&self, p: &Self::G1, q: &Self::G2) -> Self::Gt;
    fn gt_identity(&self) -> Self::Gt;
    /// `k` raised to `a` in multiplicative notation.
    fn gt_pow(&self, k: &Self::Gt, a: &Self::Scalar) -> Self::Gt;
    fn gt_encode(&self, k: &Self::Gt) -> Vec<u8>;
    fn gt_decode(&self, bytes: &[u8]) -> Result<Self::Gt, GroupError>;

    /// Deterministic hash onto G1 minus the identity.
    fn hash_to_g1(&self, label: &[u8]) -> Result<Self::G1, GroupError>;
    /// H1 of the timed-release scheme: time labels onto G2 minus the identity.
    fn hash_to_g2(&self, label: &[u8]) -> Result<Self::G2, GroupError>;

    /// Canonical x-coordinate of a non-identity G1 element.
    fn encode_x(&self, p: &Self::G1) -> Result<BigUint, GroupError>;

    /// Fixed scalar width in bytes: `ceil(bits(q) / 8)`.
    fn scalar_len(&self) -> usize {
        (self.order().bits() as usize).div_ceil(8)
    }

    fn scalar_from_u64(&self, v: u64) -> Self::Scalar {
        self.scalar_from_biguint(&BigUint::from(v))
    }

    fn scalar_zero(&self) -> Self::Scalar {
        self.scalar_from_u64(0)
    }

    fn scalar_encode(&self, s: &Self::Scalar) -> Vec<u8> {
        to_fixed_be(&self.scalar_to_biguint(s), self.scalar_len())
    }

    /// Rejects wrong widths and non-canonical values `>= q`.
    fn scalar_decode(&self, bytes: &[u8]) -> Result<Self::Scalar, GroupError> {
        if bytes.len() != self.scalar_len() {
            return Err(GroupError::InvalidEncoding);
        }
        let v = BigUint::from_bytes_be(bytes);
        if v >= self.order() {
            return Err(GroupError::InvalidEncoding);
        }
        Ok(self.scalar_from_biguint(&v))
    }

    fn scalar_neg(&self, a: &Self::Scalar) -> Self::Scalar {
        self.scalar_sub(&self.scalar_zero(), a)
    }
}

/// H2: expands the canonical encoding of `k` to exactly `out_len_bits` bits
/// with SHAKE256. Bits are taken most-significant first; unused low bits of
/// the final byte are zero.
pub fn kdf_from_gt<S: PairingSuite>(suite: &S, k: &S::Gt, out_len_bits: usize) -> Vec<u8> {
    let mut hasher = sha3::Shake256::default();
    hasher.update(&suite.gt_encode(k));
    let mut reader = hasher.finalize_xof();
    let mut out = vec![0u8; out_len_bits.div_ceil(8)];
    reader.read(&mut out);
    mask_trailing_bits(&mut out, out_len_bits);
    out
}

/// Clears the bits past `bit_len` in the last byte.
pub(crate) fn mask_trailing_bits(bytes: &mut [u8], bit_len: usize) {
    let rem = bit_len % 8;
    if rem != 0 {
        if let Some(last) = bytes.last_mut() {
            *last &= 0xffu8 << (8 - rem);
        }
    }
}

/// Big-endian encoding left-padded to `width` bytes. Panics if `v` does not fit.
pub fn to_fixed_be(v: &BigUint, width: usize) -> Vec<u8> {
    let raw = if v.bits() == 0 { Vec::new() } else { v.to_bytes_be() };
    assert!(raw.len() <= width, "value wider than {width} bytes");
    let mut out = vec![0u8; width - raw.len()];
    out.extend_from_slice(&raw);
    out
}

/// A suite selected at runtime. Generic code is monomorphized per arm.
#[derive(Debug, Clone)]
pub enum AnySuite {
    Production(Bls12Suite),
    Mock(MockSuite),
}

impl AnySuite {
    pub fn init(backend: BackendId, mock_order: Option<u64>) -> Result<Self, GroupError> {
        match (backend, mock_order) {
            (BackendId::Production, None) => Ok(AnySuite::Production(Bls12Suite::new())),
            (BackendId::Production, Some(_)) => Err(GroupError::UnsupportedBackend(
                "production backend takes no mock order".into(),
            )),
            (BackendId::Mock, Some(q)) => Ok(AnySuite::Mock(MockSuite::new(q)?)),
            (BackendId::Mock, None) => Err(GroupError::UnsupportedBackend(
                "mock backend requires an order".into(),
            )),
        }
    }

    pub fn from_descriptor(d: &SuiteDescriptor) -> Result<Self, GroupError> {
        match d.backend {
            BackendId::Production => {
                let suite = Bls12Suite::new();
                if d.curve.as_deref() != Some(bls::CURVE_NAME) || d.order != suite.order().to_string() {
                    return Err(GroupError::UnsupportedBackend(format!("{:?}", d.curve)));
                }
                Ok(AnySuite::Production(suite))
            }
            BackendId::Mock => {
                let q: u64 = d
                    .order
                    .parse()
                    .map_err(|_| GroupError::UnsupportedBackend(format!("mock order {}", d.order)))?;
                Ok(AnySuite::Mock(MockSuite::new(q)?))
            }
        }
    }

    pub fn descriptor(&self) -> SuiteDescriptor {
        match self {
            AnySuite::Production(s) => s.descriptor(),
            AnySuite::Mock(s) => s.descriptor(),
        }
    }
}
