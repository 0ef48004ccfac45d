use ark_bls12_381::{Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{AffineRepr, CurveGroup, Group};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_ff::{BigInteger, Field, PrimeField, UniformRand, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use num_bigint::BigUint;
use rand::RngCore;
use sha2::Sha256;

use super::{BackendId, GroupError, PairingSuite, SuiteDescriptor};

pub(crate) const CURVE_NAME: &str = "bls12-381";

const G1_DST: &[u8] = b"SEALEDBID-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_";
const G2_DST: &[u8] = b"SEALEDBID-V01-CS01-with-BLS12381G2_XMD:SHA-256_SSWU_RO_";

type G1Hasher = MapToCurveBasedHasher<G1Projective, DefaultFieldHasher<Sha256, 128>, WBMap<ark_bls12_381::g1::Config>>;
type G2Hasher = MapToCurveBasedHasher<G2Projective, DefaultFieldHasher<Sha256, 128>, WBMap<ark_bls12_381::g2::Config>>;

pub type Gt = PairingOutput<Bls12_381>;

/// BLS12-381 via arkworks. Elements use compressed encodings:
/// 48 bytes (G1), 96 bytes (G2), 576 bytes (Gt).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bls12Suite;

impl Bls12Suite {
    pub fn new() -> Self {
        Bls12Suite
    }
}

fn ser<T: CanonicalSerialize>(v: &T) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.compressed_size());
    v.serialize_compressed(&mut out).expect("writing to a Vec cannot fail");
    out
}

fn de<T: CanonicalDeserialize>(bytes: &[u8], len: usize) -> Result<T, GroupError> {
    if bytes.len() != len {
        return Err(GroupError::InvalidEncoding);
    }
    T::deserialize_compressed(bytes).map_err(|_| GroupError::InvalidEncoding)
}

impl PairingSuite for Bls12Suite {
    type Scalar = Fr;
    type G1 = G1Projective;
    type G2 = G2Projective;
    type Gt = Gt;

    fn backend_id(&self) -> BackendId {
        BackendId::Production
    }

    fn descriptor(&self) -> SuiteDescriptor {
        SuiteDescriptor {
            backend: BackendId::Production,
            curve: Some(CURVE_NAME.to_string()),
            order: self.order().to_string(),
        }
    }

    fn order(&self) -> BigUint {
        BigUint::from_bytes_be(&Fr::MODULUS.to_bytes_be())
    }

    fn security_bits(&self) -> u32 {
        128
    }

    fn scalar_from_biguint(&self, v: &BigUint) -> Fr {
        Fr::from_be_bytes_mod_order(&v.to_bytes_be())
    }

    fn scalar_to_biguint(&self, s: &Fr) -> BigUint {
        BigUint::from_bytes_be(&s.into_bigint().to_bytes_be())
    }

    fn scalar_add(&self, a: &Fr, b: &Fr) -> Fr {
        *a + b
    }

    fn scalar_sub(&self, a: &Fr, b: &Fr) -> Fr {
        *a - b
    }

    fn scalar_mul(&self, a: &Fr, b: &Fr) -> Fr {
        *a * b
    }

    fn scalar_inv(&self, a: &Fr) -> Option<Fr> {
        a.inverse()
    }

    fn scalar_is_zero(&self, a: &Fr) -> bool {
        a.is_zero()
    }

    fn random_nonzero_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Fr {
        let mut rng = RngAdapter(rng);
        loop {
            let s = Fr::rand(&mut rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    fn g1_generator(&self) -> G1Projective {
        G1Projective::generator()
    }

    fn g1_identity(&self) -> G1Projective {
        G1Projective::zero()
    }

    fn g1_add(&self, p: &G1Projective, q: &G1Projective) -> G1Projective {
        *p + q
    }

    fn g1_mul(&self, a: &Fr, p: &G1Projective) -> G1Projective {
        *p * a
    }

    fn g1_encoding_len(&self) -> usize {
        48
    }

    fn g1_encode(&self, p: &G1Projective) -> Vec<u8> {
        ser(&p.into_affine())
    }

    fn g1_decode(&self, bytes: &[u8]) -> Result<G1Projective, GroupError> {
        de::<G1Affine>(bytes, 48).map(Into::into)
    }

    fn g2_generator(&self) -> G2Projective {
        G2Projective::generator()
    }

    fn g2_identity(&self) -> G2Projective {
        G2Projective::zero()
    }

    fn g2_add(&self, p: &G2Projective, q: &G2Projective) -> G2Projective {
        *p + q
    }

    fn g2_mul(&self, a: &Fr, p: &G2Projective) -> G2Projective {
        *p * a
    }

    fn g2_encoding_len(&self) -> usize {
        96
    }

    fn g2_encode(&self, p: &G2Projective) -> Vec<u8> {
        ser(&p.into_affine())
    }

    fn g2_decode(&self, bytes: &[u8]) -> Result<G2Projective, GroupError> {
        de::<G2Affine>(bytes, 96).map(Into::into)
    }

    fn pairing(&self, p: &G1Projective, q: &G2Projective) -> Gt {
        Bls12_381::pairing(p.into_affine(), q.into_affine())
    }

    fn gt_identity(&self) -> Gt {
        Gt::zero()
    }

    fn gt_pow(&self, k: &Gt, a: &Fr) -> Gt {
        *k * a
    }

    fn gt_encode(&self, k: &Gt) -> Vec<u8> {
        ser(k)
    }

    fn gt_decode(&self, bytes: &[u8]) -> Result<Gt, GroupError> {
        de::<Gt>(bytes, 576)
    }

    fn hash_to_g1(&self, label: &[u8]) -> Result<G1Projective, GroupError> {
        if label.is_empty() {
            return Err(GroupError::EmptyLabel);
        }
        let hasher = G1Hasher::new(G1_DST).map_err(|e| GroupError::HashToCurve(e.to_string()))?;
        let p = hasher.hash(label).map_err(|e| GroupError::HashToCurve(e.to_string()))?;
        if p.is_zero() {
            return Err(GroupError::HashToCurve("hashed to identity".into()));
        }
        Ok(p.into())
    }

    fn hash_to_g2(&self, label: &[u8]) -> Result<G2Projective, GroupError> {
        if label.is_empty() {
            return Err(GroupError::EmptyLabel);
        }
        let hasher = G2Hasher::new(G2_DST).map_err(|e| GroupError::HashToCurve(e.to_string()))?;
        let p = hasher.hash(label).map_err(|e| GroupError::HashToCurve(e.to_string()))?;
        if p.is_zero() {
            return Err(GroupError::HashToCurve("hashed to identity".into()));
        }
        Ok(p.into())
    }

    fn encode_x(&self, p: &G1Projective) -> Result<BigUint, GroupError> {
        let affine = p.into_affine();
        let (x, _) = affine.xy().ok_or(GroupError::IdentityPoint)?;
        Ok(BigUint::from_bytes_be(&x.into_bigint().to_bytes_be()))
    }
}

/// Lets a `?Sized` RNG satisfy arkworks' `Rng` bound.
struct RngAdapter<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}
