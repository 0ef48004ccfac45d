//! The certificate authority: vets bidder identities, issues per-auction
//! certificates and provisions the contract key pairs.

use std::collections::BTreeMap;
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::blindsig::{self, BlindSignature, SigHash, SignerKey};
use crate::groups::PairingSuite;
use crate::tre::{TimeServerPublic, TreKeyPair, TrePublicKey};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuthorityError {
    #[error("identity `{0}` is not eligible for this auction")]
    NotEligible(String),
    #[error("registration closed at tick {closed_at}, now {now}")]
    PhaseClosed { closed_at: u64, now: u64 },
    #[error("identity `{0}` already registered for this auction")]
    DuplicateRegistration(String),
    #[error("contract keys already provisioned")]
    AlreadyProvisioned,
    #[error("malformed certificate")]
    MalformedCertificate,
}

/// 16-byte auction identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AuctionId(pub [u8; 16]);

impl AuctionId {
    /// First 16 bytes of SHA-256 over the auction name.
    pub fn from_name(name: &str) -> Self {
        let d = Sha256::digest(name.as_bytes());
        let mut id = [0u8; 16];
        id.copy_from_slice(&d[..16]);
        AuctionId(id)
    }
}

impl fmt::Debug for AuctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AuctionId({})", hex::encode(self.0))
    }
}

impl fmt::Display for AuctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl Serialize for AuctionId {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for AuctionId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 16] = bytes.try_into().map_err(|_| serde::de::Error::custom("auction id must be 16 bytes"))?;
        Ok(AuctionId(arr))
    }
}

/// A bidder's real identity and registration key pair `(x, y = xG)`.
#[derive(Debug, Clone)]
pub struct BidderIdentity<S: PairingSuite> {
    pub id: String,
    secret: S::Scalar,
    pub public: S::G1,
}

impl<S: PairingSuite> BidderIdentity<S> {
    pub fn generate<R: RngCore + ?Sized>(suite: &S, id: impl Into<String>, rng: &mut R) -> Self {
        let x = suite.random_nonzero_scalar(rng);
        BidderIdentity { id: id.into(), secret: x, public: suite.g1_mul(&x, &suite.g1_generator()) }
    }

    pub fn secret(&self) -> &S::Scalar {
        &self.secret
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate<S: PairingSuite> {
    pub serial: u32,
    pub bidder_pub: S::G1,
    pub auction_id: AuctionId,
    pub ca_signature: BlindSignature<S>,
}

impl<S: PairingSuite> Certificate<S> {
    /// The signed part: `serial ‖ bidder_pub ‖ auction_id`.
    pub fn body_bytes(suite: &S, serial: u32, bidder_pub: &S::G1, auction_id: &AuctionId) -> Vec<u8> {
        let mut out = serial.to_be_bytes().to_vec();
        out.extend(suite.g1_encode(bidder_pub));
        out.extend_from_slice(&auction_id.0);
        out
    }

    /// `serial (4) ‖ bidder_pub ‖ auction_id (16) ‖ signature`.
    pub fn to_bytes(&self, suite: &S) -> Vec<u8> {
        let mut out = Self::body_bytes(suite, self.serial, &self.bidder_pub, &self.auction_id);
        out.extend(self.ca_signature.to_bytes(suite));
        out
    }

    pub fn from_bytes(suite: &S, bytes: &[u8]) -> Result<Self, AuthorityError> {
        let g1 = suite.g1_encoding_len();
        let expected = 4 + g1 + 16 + 2 * suite.scalar_len();
        if bytes.len() != expected {
            return Err(AuthorityError::MalformedCertificate);
        }
        let serial = u32::from_be_bytes(bytes[..4].try_into().unwrap());
        let bidder_pub = suite.g1_decode(&bytes[4..4 + g1]).map_err(|_| AuthorityError::MalformedCertificate)?;
        let auction_id = AuctionId(bytes[4 + g1..20 + g1].try_into().unwrap());
        let ca_signature =
            BlindSignature::from_bytes(suite, &bytes[20 + g1..]).map_err(|_| AuthorityError::MalformedCertificate)?;
        Ok(Certificate { serial, bidder_pub, auction_id, ca_signature })
    }
}

/// What verifiers need to check certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaPublic<S: PairingSuite> {
    pub key: S::G1,
    pub auction_id: AuctionId,
    pub hash: SigHash,
}

pub fn verify_cert<S: PairingSuite>(suite: &S, cert: &Certificate<S>, ca: &CaPublic<S>) -> bool {
    if cert.auction_id != ca.auction_id {
        return false;
    }
    let body = Certificate::body_bytes(suite, cert.serial, &cert.bidder_pub, &cert.auction_id);
    blindsig::verify(suite, ca.hash, &body, &cert.ca_signature, &ca.key)
}

/// Contract-1 encryption pair `(X1, Y1)`. Provisioned and held, never used
/// in any protocol equation.
#[derive(Debug, Clone)]
pub struct EncKeyPair<S: PairingSuite> {
    secret: S::Scalar,
    pub public: S::G1,
}

impl<S: PairingSuite> EncKeyPair<S> {
    pub fn secret(&self) -> &S::Scalar {
        &self.secret
    }
}

/// Secrets handed to the auctioneer off-ledger.
#[derive(Debug, Clone)]
pub struct ContractKeys<S: PairingSuite> {
    pub contract1_enc: EncKeyPair<S>,
    pub contract1_sig: SignerKey<S>,
    pub contract2_tre: TreKeyPair<S>,
}

/// The public halves, published in the auction announcement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContractPublics<S: PairingSuite> {
    pub contract1_enc: S::G1,
    pub contract1_sig: S::G1,
    pub contract2_tre: TrePublicKey<S>,
}

impl<S: PairingSuite> ContractKeys<S> {
    pub fn publics(&self) -> ContractPublics<S> {
        ContractPublics {
            contract1_enc: self.contract1_enc.public,
            contract1_sig: self.contract1_sig.public,
            contract2_tre: self.contract2_tre.public,
        }
    }
}

pub type Eligibility = Box<dyn Fn(&str) -> bool + Send + Sync>;

pub fn allow_all() -> Eligibility {
    Box::new(|_| true)
}

pub fn allow_list<I: IntoIterator<Item = String>>(ids: I) -> Eligibility {
    let ids: std::collections::BTreeSet<String> = ids.into_iter().collect();
    Box::new(move |id| ids.contains(id))
}

/// Issuance log entry. Public material only; the ID mapping stays in the registry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issued {
    pub serial: u32,
    pub bidder_pub: Vec<u8>,
}

/// Single-writer registry; `&mut self` serializes registrations.
pub struct CertificateAuthority<S: PairingSuite> {
    suite: S,
    hash: SigHash,
    key: SignerKey<S>,
    auction_id: AuctionId,
    registration_end: u64,
    eligibility: Eligibility,
    registry: BTreeMap<String, u32>,
    issued: Vec<Issued>,
    next_serial: u32,
    provisioned: bool,
}

impl<S: PairingSuite> fmt::Debug for CertificateAuthority<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CertificateAuthority")
            .field("auction_id", &self.auction_id)
            .field("registration_end", &self.registration_end)
            .field("registered", &self.registry.len())
            .field("provisioned", &self.provisioned)
            .finish()
    }
}

impl<S: PairingSuite> CertificateAuthority<S> {
    pub fn new<R: RngCore + ?Sized>(
        suite: S,
        hash: SigHash,
        auction_id: AuctionId,
        registration_end: u64,
        eligibility: Eligibility,
        rng: &mut R,
    ) -> Self {
        let key = SignerKey::generate(&suite, rng);
        CertificateAuthority {
            suite,
            hash,
            key,
            auction_id,
            registration_end,
            eligibility,
            registry: BTreeMap::new(),
            issued: Vec::new(),
            next_serial: 1,
            provisioned: false,
        }
    }

    pub fn public(&self) -> CaPublic<S> {
        CaPublic { key: self.key.public, auction_id: self.auction_id, hash: self.hash }
    }

    pub fn issued(&self) -> &[Issued] {
        &self.issued
    }

    /// Private lookup; never published.
    pub fn serial_of(&self, id: &str) -> Option<u32> {
        self.registry.get(id).copied()
    }

    pub fn ca_register<R: RngCore + ?Sized>(
        &mut self,
        now: u64,
        id: &str,
        bidder_pub: &S::G1,
        rng: &mut R,
    ) -> Result<Certificate<S>, AuthorityError> {
        if now > self.registration_end {
            return Err(AuthorityError::PhaseClosed { closed_at: self.registration_end, now });
        }
        if !(self.eligibility)(id) {
            return Err(AuthorityError::NotEligible(id.to_string()));
        }
        if self.registry.contains_key(id) {
            return Err(AuthorityError::DuplicateRegistration(id.to_string()));
        }
        let serial = self.next_serial;
        self.next_serial += 1;
        let body = Certificate::body_bytes(&self.suite, serial, bidder_pub, &self.auction_id);
        let ca_signature = blindsig::sign_plain(&self.suite, self.hash, &self.key, &body, rng);
        self.registry.insert(id.to_string(), serial);
        self.issued.push(Issued { serial, bidder_pub: self.suite.g1_encode(bidder_pub) });
        Ok(Certificate { serial, bidder_pub: *bidder_pub, auction_id: self.auction_id, ca_signature })
    }

    pub fn ca_provision_contracts<R: RngCore + ?Sized>(
        &mut self,
        ts: &TimeServerPublic<S>,
        rng: &mut R,
    ) -> Result<ContractKeys<S>, AuthorityError> {
        if self.provisioned {
            return Err(AuthorityError::AlreadyProvisioned);
        }
        self.provisioned = true;
        let s = &self.suite;
        let x1 = s.random_nonzero_scalar(rng);
        Ok(ContractKeys {
            contract1_enc: EncKeyPair { secret: x1, public: s.g1_mul(&x1, &s.g1_generator()) },
            contract1_sig: SignerKey::generate(s, rng),
            contract2_tre: crate::tre::user_gen(s, ts, rng),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blindsig::{bid_message, session_init, BlindingFactors};
    use crate::groups::MockSuite;
    use crate::tre::TimeServerKeys;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (MockSuite, CertificateAuthority<MockSuite>, ChaCha20Rng) {
        let suite = MockSuite::new((1 << 61) - 1).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let ca = CertificateAuthority::new(
            suite,
            SigHash::Sha256,
            AuctionId::from_name("a-1"),
            3,
            allow_list(["supplier-7".to_string(), "supplier-8".to_string()]),
            &mut rng,
        );
        (suite, ca, rng)
    }

    #[test]
    fn register_issues_verifying_certificates() {
        let (s, mut ca, mut rng) = setup();
        let bidder = BidderIdentity::generate(&s, "supplier-7", &mut rng);
        let cert = ca.ca_register(1, &bidder.id, &bidder.public, &mut rng).unwrap();
        assert_eq!(cert.serial, 1);
        assert!(verify_cert(&s, &cert, &ca.public()));
        assert_eq!(ca.serial_of("supplier-7"), Some(1));
        assert_eq!(ca.issued().len(), 1);
    }

    #[test]
    fn register_error_paths() {
        let (s, mut ca, mut rng) = setup();
        let b = BidderIdentity::generate(&s, "supplier-7", &mut rng);
        ca.ca_register(1, &b.id, &b.public, &mut rng).unwrap();
        assert_eq!(
            ca.ca_register(2, &b.id, &b.public, &mut rng),
            Err(AuthorityError::DuplicateRegistration("supplier-7".into()))
        );
        assert_eq!(
            ca.ca_register(2, "mallory", &b.public, &mut rng),
            Err(AuthorityError::NotEligible("mallory".into()))
        );
        let late = BidderIdentity::generate(&s, "supplier-8", &mut rng);
        assert_eq!(
            ca.ca_register(4, &late.id, &late.public, &mut rng),
            Err(AuthorityError::PhaseClosed { closed_at: 3, now: 4 })
        );
    }

    #[test]
    fn tampered_or_foreign_certificates_fail() {
        let (s, mut ca, mut rng) = setup();
        let b = BidderIdentity::generate(&s, "supplier-7", &mut rng);
        let cert = ca.ca_register(1, &b.id, &b.public, &mut rng).unwrap();

        let mut bytes = cert.to_bytes(&s);
        bytes[3] ^= 0x01;
        let flipped = Certificate::from_bytes(&s, &bytes).unwrap();
        assert_eq!(flipped.serial, 0);
        assert!(!verify_cert(&s, &flipped, &ca.public()));

        let mut foreign = ca.public();
        foreign.auction_id = AuctionId::from_name("a-2");
        assert!(!verify_cert(&s, &cert, &foreign));
        let mut moved = cert.clone();
        moved.auction_id = AuctionId::from_name("a-2");
        assert!(!verify_cert(&s, &moved, &foreign));
    }

    #[test]
    fn certificate_wire_format() {
        let (s, mut ca, mut rng) = setup();
        let b = BidderIdentity::generate(&s, "supplier-7", &mut rng);
        let cert = ca.ca_register(1, &b.id, &b.public, &mut rng).unwrap();
        let bytes = cert.to_bytes(&s);
        assert_eq!(bytes.len(), 4 + 8 + 16 + 16);
        assert_eq!(&bytes[..4], &1u32.to_be_bytes());
        assert_eq!(&bytes[12..28], &AuctionId::from_name("a-1").0);
        assert_eq!(Certificate::from_bytes(&s, &bytes).unwrap(), cert);
        assert!(Certificate::<MockSuite>::from_bytes(&s, &bytes[1..]).is_err());
    }

    #[test]
    fn provisioning_once_with_consistent_keys() {
        let (s, mut ca, mut rng) = setup();
        let ts = TimeServerKeys::from_secret(&s, 7).unwrap();
        let keys = ca.ca_provision_contracts(&ts.public, &mut rng).unwrap();
        assert!(matches!(ca.ca_provision_contracts(&ts.public, &mut rng), Err(AuthorityError::AlreadyProvisioned)));
        assert!(keys.contract2_tre.public.is_consistent(&s, &ts.public));
        assert_eq!(s.g1_mul(keys.contract1_enc.secret(), &s.g1_generator()), keys.publics().contract1_enc);

        let session = session_init(&s, &mut rng);
        let m = bid_message(33);
        let f = BlindingFactors::random(&s, &mut rng);
        let q = keys.publics().contract1_sig;
        let req = blindsig::blind(&s, SigHash::Sha256, &m, &session.y, &q, &f).unwrap();
        let sp = blindsig::sign(&s, &keys.contract1_sig, &session, &req.c_prime).unwrap();
        let sig = BlindSignature { c: req.c, s: blindsig::unblind(&s, &sp, &f) };
        assert!(blindsig::verify(&s, SigHash::Sha256, &m, &sig, &q));
    }

    #[test]
    fn auction_id_serde_is_hex() {
        let id = AuctionId::from_name("x");
        let json = serde_json::to_string(&id).unwrap();
        assert_eq!(json.len(), 34);
        assert_eq!(serde_json::from_str::<AuctionId>(&json).unwrap(), id);
        assert!(serde_json::from_str::<AuctionId>("\"abcd\"").is_err());
    }
}
