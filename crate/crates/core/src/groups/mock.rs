use num_bigint::BigUint;
use rand::{Rng, RngCore};
use sha2::{Digest, Sha256};

use super::{BackendId, GroupError, PairingSuite, SuiteDescriptor};

/// Element of the mock group `(Z_q, +)`. G1, G2 and Gt all use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MockElem(pub u64);

/// Insecure test backend over `Z_q` with `e(x, y) = x·y mod q` and generator 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockSuite {
    q: u64,
}

const ENCODING_LEN: usize = 8;

impl MockSuite {
    pub const MIN_ORDER: u64 = 11;

    pub fn new(q: u64) -> Result<Self, GroupError> {
        if q < Self::MIN_ORDER {
            if !num_prime::nt_funcs::is_prime64(q) {
                return Err(GroupError::NonPrimeOrder(q));
            }
            return Err(GroupError::OrderTooSmall(q));
        }
        if !num_prime::nt_funcs::is_prime64(q) {
            return Err(GroupError::NonPrimeOrder(q));
        }
        Ok(MockSuite { q })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn elem(&self, v: u64) -> MockElem {
        MockElem(v % self.q)
    }

    fn add(&self, a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % self.q as u128) as u64
    }

    fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.q - b % self.q)
    }

    fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    fn encode(&self, e: &MockElem) -> Vec<u8> {
        e.0.to_be_bytes().to_vec()
    }

    fn decode(&self, bytes: &[u8]) -> Result<MockElem, GroupError> {
        let arr: [u8; ENCODING_LEN] = bytes.try_into().map_err(|_| GroupError::InvalidEncoding)?;
        let v = u64::from_be_bytes(arr);
        if v >= self.q {
            return Err(GroupError::InvalidEncoding);
        }
        Ok(MockElem(v))
    }

    /// `1 + (SHA-256(label) mod (q - 1))`, as the multiple of G = 1.
    fn hash(&self, label: &[u8]) -> Result<MockElem, GroupError> {
        if label.is_empty() {
            return Err(GroupError::EmptyLabel);
        }
        let digest = BigUint::from_bytes_be(&Sha256::digest(label));
        let reduced = digest % BigUint::from(self.q - 1);
        let v = reduced.to_u64_digits().first().copied().unwrap_or(0);
        Ok(MockElem(1 + v))
    }
}

impl PairingSuite for MockSuite {
    type Scalar = u64;
    type G1 = MockElem;
    type G2 = MockElem;
    type Gt = MockElem;

    fn backend_id(&self) -> BackendId {
        BackendId::Mock
    }

    fn descriptor(&self) -> SuiteDescriptor {
        SuiteDescriptor { backend: BackendId::Mock, curve: None, order: self.q.to_string() }
    }

    fn order(&self) -> BigUint {
        BigUint::from(self.q)
    }

    fn security_bits(&self) -> u32 {
        0
    }

    fn scalar_from_biguint(&self, v: &BigUint) -> u64 {
        let r = v % BigUint::from(self.q);
        r.to_u64_digits().first().copied().unwrap_or(0)
    }

    fn scalar_to_biguint(&self, s: &u64) -> BigUint {
        BigUint::from(*s)
    }

    fn scalar_add(&self, a: &u64, b: &u64) -> u64 {
        self.add(*a, *b)
    }

    fn scalar_sub(&self, a: &u64, b: &u64) -> u64 {
        self.sub(*a, *b)
    }

    fn scalar_mul(&self, a: &u64, b: &u64) -> u64 {
        self.mul(*a, *b)
    }

    fn scalar_inv(&self, a: &u64) -> Option<u64> {
        if a % self.q == 0 {
            None
        } else {
            Some(self.pow(*a, self.q - 2))
        }
    }

    fn scalar_is_zero(&self, a: &u64) -> bool {
        a % self.q == 0
    }

    fn random_nonzero_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(1..self.q)
    }

    fn g1_generator(&self) -> MockElem {
        MockElem(1)
    }

    fn g1_identity(&self) -> MockElem {
        MockElem(0)
    }

    fn g1_add(&self, p: &MockElem, q: &MockElem) -> MockElem {
        MockElem(self.add(p.0, q.0))
    }

    fn g1_mul(&self, a: &u64, p: &MockElem) -> MockElem {
        MockElem(self.mul(*a, p.0))
    }

    fn g1_encoding_len(&self) -> usize {
        ENCODING_LEN
    }

    fn g1_encode(&self, p: &MockElem) -> Vec<u8> {
        self.encode(p)
    }

    fn g1_decode(&self, bytes: &[u8]) -> Result<MockElem, GroupError> {
        self.decode(bytes)
    }

    fn g2_generator(&self) -> MockElem {
        MockElem(1)
    }

    fn g2_identity(&self) -> MockElem {
        MockElem(0)
    }

    fn g2_add(&self, p: &MockElem, q: &MockElem) -> MockElem {
        MockElem(self.add(p.0, q.0))
    }

    fn g2_mul(&self, a: &u64, p: &MockElem) -> MockElem {
        MockElem(self.mul(*a, p.0))
    }

    fn g2_encoding_len(&self) -> usize {
        ENCODING_LEN
    }

    fn g2_encode(&self, p: &MockElem) -> Vec<u8> {
        self.encode(p)
    }

    fn g2_decode(&self, bytes: &[u8]) -> Result<MockElem, GroupError> {
        self.decode(bytes)
    }

    fn pairing(&self, p: &MockElem, q: &MockElem) -> MockElem {
        MockElem(self.mul(p.0, q.0))
    }

    fn gt_identity(&self) -> MockElem {
        MockElem(0)
    }

    fn gt_pow(&self, k: &MockElem, a: &u64) -> MockElem {
        MockElem(self.mul(k.0, *a))
    }

    fn gt_encode(&self, k: &MockElem) -> Vec<u8> {
        self.encode(k)
    }

    fn gt_decode(&self, bytes: &[u8]) -> Result<MockElem, GroupError> {
        self.decode(bytes)
    }

    fn hash_to_g1(&self, label: &[u8]) -> Result<MockElem, GroupError> {
        self.hash(label)
    }

    fn hash_to_g2(&self, label: &[u8]) -> Result<MockElem, GroupError> {
        self.hash(label)
    }

    fn encode_x(&self, p: &MockElem) -> Result<BigUint, GroupError> {
        if p.0 == 0 {
            return Err(GroupError::IdentityPoint);
        }
        Ok(BigUint::from(p.0))
    }
}
