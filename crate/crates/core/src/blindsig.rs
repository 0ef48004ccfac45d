//! Schnorr-style blind signatures on an elliptic-curve group.
//!
//! Signer: `k`, `Y = kG`, then `s' = k - c'·d`.
//! User:   `A = αY + γG + δQ`, `t = x(A) mod n`, `c = H(m ‖ t)`,
//!         `c' = α⁻¹(c - δ)`, and finally `s = α·s' + γ`.
//! Verify: `c == H(m ‖ x(cQ + sG) mod n)`.
//!
//! Honest runs satisfy `cQ + sG = A`, which is what makes verification work
//! and what hides the link between `(c', s')` and `(c, s)`.

use std::sync::atomic::{AtomicBool, Ordering};

use num_bigint::BigUint;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha1::Sha1;
use sha2::{Digest, Sha256};

use crate::groups::{to_fixed_be, GroupError, PairingSuite};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlindSigError {
    #[error("blinding factor alpha must be invertible")]
    ZeroAlpha,
    #[error("blinded commitment point is the identity; retry with fresh factors")]
    IdentityPoint,
    #[error("signer session already produced a signature")]
    SessionReused,
    #[error("secret key must be non-zero")]
    ZeroSecret,
    #[error("malformed signature encoding")]
    Malformed,
}

/// The hash `H_sig` used for challenges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigHash {
    #[default]
    Sha256,
    /// Broken for collisions; kept for comparison runs.
    Sha1,
    /// `(int(m) + t) mod n`. Insecure; gives hand-checkable vectors on the mock group.
    MockAdditive,
}

impl SigHash {
    /// `H(m ‖ t) mod n`, with `t` written as a fixed-width big-endian scalar.
    pub fn challenge<S: PairingSuite>(&self, suite: &S, m: &[u8], t: &BigUint) -> S::Scalar {
        let t_bytes = to_fixed_be(&(t % suite.order()), suite.scalar_len());
        match self {
            SigHash::Sha256 => {
                let d = Sha256::new().chain_update(m).chain_update(&t_bytes).finalize();
                suite.scalar_from_biguint(&BigUint::from_bytes_be(&d))
            }
            SigHash::Sha1 => {
                let d = Sha1::new().chain_update(m).chain_update(&t_bytes).finalize();
                suite.scalar_from_biguint(&BigUint::from_bytes_be(&d))
            }
            SigHash::MockAdditive => suite.scalar_from_biguint(&(BigUint::from_bytes_be(m) + t)),
        }
    }
}

impl std::str::FromStr for SigHash {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sha256" => Ok(SigHash::Sha256),
            "sha1" => Ok(SigHash::Sha1),
            "mock-additive" => Ok(SigHash::MockAdditive),
            other => Err(format!("unknown signature hash `{other}`")),
        }
    }
}

/// Message signed for a bid: the amount as 8-byte big-endian.
pub fn bid_message(bid: u64) -> [u8; 8] {
    bid.to_be_bytes()
}

#[derive(Debug, Clone)]
pub struct SignerKey<S: PairingSuite> {
    secret: S::Scalar,
    pub public: S::G1,
}

impl<S: PairingSuite> SignerKey<S> {
    pub fn from_secret(suite: &S, d: S::Scalar) -> Result<Self, BlindSigError> {
        if suite.scalar_is_zero(&d) {
            return Err(BlindSigError::ZeroSecret);
        }
        Ok(SignerKey { secret: d, public: suite.g1_mul(&d, &suite.g1_generator()) })
    }

    pub fn generate<R: RngCore + ?Sized>(suite: &S, rng: &mut R) -> Self {
        let d = suite.random_nonzero_scalar(rng);
        SignerKey { secret: d, public: suite.g1_mul(&d, &suite.g1_generator()) }
    }

    pub fn secret(&self) -> &S::Scalar {
        &self.secret
    }
}

/// One signing session. `k` signs at most once; consumption is atomic, so a
/// session shared across threads still yields a single signature.
#[derive(Debug)]
pub struct SignerSession<S: PairingSuite> {
    k: S::Scalar,
    /// `Y = kG`, announced to the user.
    pub y: S::G1,
    consumed: AtomicBool,
}

impl<S: PairingSuite> SignerSession<S> {
    pub fn with_nonce(suite: &S, k: S::Scalar) -> Result<Self, BlindSigError> {
        if suite.scalar_is_zero(&k) {
            return Err(BlindSigError::ZeroSecret);
        }
        Ok(SignerSession { k, y: suite.g1_mul(&k, &suite.g1_generator()), consumed: AtomicBool::new(false) })
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed.load(Ordering::SeqCst)
    }
}

pub fn session_init<S: PairingSuite, R: RngCore + ?Sized>(suite: &S, rng: &mut R) -> SignerSession<S> {
    let k = suite.random_nonzero_scalar(rng);
    SignerSession::with_nonce(suite, k).expect("random scalar is non-zero")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlindingFactors<S: PairingSuite> {
    alpha: S::Scalar,
    pub gamma: S::Scalar,
    pub delta: S::Scalar,
}

impl<S: PairingSuite> BlindingFactors<S> {
    pub fn new(suite: &S, alpha: S::Scalar, gamma: S::Scalar, delta: S::Scalar) -> Result<Self, BlindSigError> {
        if suite.scalar_is_zero(&alpha) {
            return Err(BlindSigError::ZeroAlpha);
        }
        Ok(BlindingFactors { alpha, gamma, delta })
    }

    /// All three factors drawn from `[1, n-1]`.
    pub fn random<R: RngCore + ?Sized>(suite: &S, rng: &mut R) -> Self {
        BlindingFactors {
            alpha: suite.random_nonzero_scalar(rng),
            gamma: suite.random_nonzero_scalar(rng),
            delta: suite.random_nonzero_scalar(rng),
        }
    }

    pub fn alpha(&self) -> &S::Scalar {
        &self.alpha
    }
}

/// What the user keeps after blinding. Only `c_prime` goes to the signer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlindRequest<S: PairingSuite> {
    pub c: S::Scalar,
    pub c_prime: S::Scalar,
    pub t: BigUint,
    pub a_point: S::G1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlindSignature<S: PairingSuite> {
    pub c: S::Scalar,
    pub s: S::Scalar,
}

impl<S: PairingSuite> BlindSignature<S> {
    /// Two big-endian scalars of `ceil(bits(n) / 8)` bytes each.
    pub fn to_bytes(&self, suite: &S) -> Vec<u8> {
        let mut out = suite.scalar_encode(&self.c);
        out.extend(suite.scalar_encode(&self.s));
        out
    }

    pub fn from_bytes(suite: &S, bytes: &[u8]) -> Result<Self, BlindSigError> {
        let w = suite.scalar_len();
        if bytes.len() != 2 * w {
            return Err(BlindSigError::Malformed);
        }
        let c = suite.scalar_decode(&bytes[..w]).map_err(|_| BlindSigError::Malformed)?;
        let s = suite.scalar_decode(&bytes[w..]).map_err(|_| BlindSigError::Malformed)?;
        Ok(BlindSignature { c, s })
    }
}

fn x_mod_n<S: PairingSuite>(suite: &S, p: &S::G1) -> Result<BigUint, GroupError> {
    Ok(suite.encode_x(p)? % suite.order())
}

pub fn blind<S: PairingSuite>(
    suite: &S,
    hash: SigHash,
    m: &[u8],
    y: &S::G1,
    q: &S::G1,
    factors: &BlindingFactors<S>,
) -> Result<BlindRequest<S>, BlindSigError> {
    let g = suite.g1_generator();
    let a_point = suite.g1_add(
        &suite.g1_add(&suite.g1_mul(&factors.alpha, y), &suite.g1_mul(&factors.gamma, &g)),
        &suite.g1_mul(&factors.delta, q),
    );
    let t = x_mod_n(suite, &a_point).map_err(|_| BlindSigError::IdentityPoint)?;
    let c = hash.challenge(suite, m, &t);
    let alpha_inv = suite.scalar_inv(&factors.alpha).ok_or(BlindSigError::ZeroAlpha)?;
    let c_prime = suite.scalar_mul(&alpha_inv, &suite.scalar_sub(&c, &factors.delta));
    Ok(BlindRequest { c, c_prime, t, a_point })
}

pub fn sign<S: PairingSuite>(
    suite: &S,
    key: &SignerKey<S>,
    session: &SignerSession<S>,
    c_prime: &S::Scalar,
) -> Result<S::Scalar, BlindSigError> {
    if session.consumed.swap(true, Ordering::SeqCst) {
        return Err(BlindSigError::SessionReused);
    }
    Ok(suite.scalar_sub(&session.k, &suite.scalar_mul(c_prime, &key.secret)))
}

pub fn unblind<S: PairingSuite>(suite: &S, s_prime: &S::Scalar, factors: &BlindingFactors<S>) -> S::Scalar {
    suite.scalar_add(&suite.scalar_mul(&factors.alpha, s_prime), &factors.gamma)
}

pub fn verify<S: PairingSuite>(suite: &S, hash: SigHash, m: &[u8], sig: &BlindSignature<S>, q: &S::G1) -> bool {
    let r = suite.g1_add(&suite.g1_mul(&sig.c, q), &suite.g1_mul(&sig.s, &suite.g1_generator()));
    match x_mod_n(suite, &r) {
        Ok(t) => hash.challenge(suite, m, &t) == sig.c,
        Err(_) => false,
    }
}

/// Ordinary (unblinded) Schnorr signature with the same verification
/// equation, for certificate issuance.
pub fn sign_plain<S: PairingSuite, R: RngCore + ?Sized>(
    suite: &S,
    hash: SigHash,
    key: &SignerKey<S>,
    m: &[u8],
    rng: &mut R,
) -> BlindSignature<S> {
    loop {
        let k = suite.random_nonzero_scalar(rng);
        let a_point = suite.g1_mul(&k, &suite.g1_generator());
        let Ok(t) = x_mod_n(suite, &a_point) else { continue };
        let c = hash.challenge(suite, m, &t);
        let s = suite.scalar_sub(&k, &suite.scalar_mul(&c, &key.secret));
        return BlindSignature { c, s };
    }
}
