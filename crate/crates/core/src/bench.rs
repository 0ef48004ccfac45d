//! Timing harness for the bidder- and auctioneer-side algorithms.

use std::fmt::Write as _;
use std::time::Instant;

use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::blindsig::{self, BlindSignature, BlindingFactors, SigHash, SignerKey, SignerSession};
use crate::groups::{BackendId, PairingSuite};
use crate::tre::{self, Plaintext, TimeLabel};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("bidder counts must be non-empty and positive")]
    BadBidderCounts,
    #[error("refusing to time the mock backend; its numbers mean nothing (pass the mock override to do it anyway)")]
    MockRefused,
    #[error("benchmark setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub trials: u32,
    pub bidder_counts: Vec<u32>,
    /// Repetitions of each sweep point.
    pub sweep_trials: u32,
    pub data_bits: usize,
    /// Width of the raw random numbers behind every nonce and blinding
    /// factor before reduction mod n.
    pub random_bits: usize,
    pub sig_hash: SigHash,
    pub seed: u64,
    pub allow_mock: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            trials: 500,
            bidder_counts: vec![10, 50, 100],
            sweep_trials: 3,
            data_bits: 100,
            random_bits: 400,
            sig_hash: SigHash::Sha256,
            seed: 0,
            allow_mock: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmStats {
    pub name: String,
    pub trials: u32,
    pub mean_us: f64,
    pub stddev_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub bidders: u32,
    pub trials: u32,
    pub mean_us: f64,
    pub stddev_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub backend: BackendId,
    pub trials: u32,
    pub data_bits: usize,
    pub random_bits: usize,
    pub algorithms: Vec<AlgorithmStats>,
    /// Auctioneer work for `n` bidders: sign, decrypt and verify each bid.
    pub sweep: Vec<SweepPoint>,
    pub sweep_monotone: bool,
}

pub const CSV_HEADER: &str = "kind,name,bidders,trials,mean_us,stddev_us";

impl BenchReport {
    /// Columns: `kind` (`algorithm` or `sweep`), `name`, `bidders` (empty
    /// for algorithms), `trials`, `mean_us`, `stddev_us`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for a in &self.algorithms {
            writeln!(out, "algorithm,{},,{},{},{}", a.name, a.trials, a.mean_us, a.stddev_us).unwrap();
        }
        for p in &self.sweep {
            writeln!(out, "sweep,auctioneer,{},{},{},{}", p.bidders, p.trials, p.mean_us, p.stddev_us).unwrap();
        }
        out
    }
}

/// Mean and population standard deviation.
pub fn mean_stddev(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn micros(f: impl FnOnce()) -> f64 {
    let start = Instant::now();
    f();
    start.elapsed().as_secs_f64() * 1e6
}

struct Fixture<S: PairingSuite> {
    suite: S,
    cfg: BenchConfig,
    rng: ChaCha20Rng,
    ts: tre::TimeServerKeys<S>,
    recipient: tre::TreKeyPair<S>,
    signer: SignerKey<S>,
    label: TimeLabel,
    tbk: tre::TimeBoundKey<S>,
}

impl<S: PairingSuite> Fixture<S> {
    fn new(suite: S, cfg: &BenchConfig) -> Result<Self, BenchError> {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let ts = tre::ts_gen(&suite, &mut rng);
        let recipient = tre::user_gen(&suite, &ts.public, &mut rng);
        let signer = SignerKey::generate(&suite, &mut rng);
        let label = TimeLabel::epoch(1);
        let tbk = tre::ts_broadcast(&suite, &ts, &label).map_err(|e| BenchError::Setup(e.to_string()))?;
        Ok(Fixture { suite, cfg: cfg.clone(), rng, ts, recipient, signer, label, tbk })
    }

    /// A `random_bits`-wide random number reduced mod n, never zero.
    fn wide_scalar(&mut self) -> S::Scalar {
        loop {
            let mut buf = vec![0u8; self.cfg.random_bits.div_ceil(8)];
            self.rng.fill_bytes(&mut buf);
            let x = self.suite.scalar_from_biguint(&BigUint::from_bytes_be(&buf));
            if !self.suite.scalar_is_zero(&x) {
                return x;
            }
        }
    }

    fn data(&mut self) -> Plaintext {
        let mut buf = vec![0u8; self.cfg.data_bits.div_ceil(8)];
        self.rng.fill_bytes(&mut buf);
        Plaintext::from_bits(buf, self.cfg.data_bits).expect("length matches bit count")
    }

    fn factors(&mut self) -> BlindingFactors<S> {
        let (a, g, d) = (self.wide_scalar(), self.wide_scalar(), self.wide_scalar());
        BlindingFactors::new(&self.suite, a, g, d).expect("alpha is non-zero")
    }

    fn session(&mut self) -> SignerSession<S> {
        let k = self.wide_scalar();
        SignerSession::with_nonce(&self.suite, k).expect("nonce is non-zero")
    }

    /// One bidder's signed, encrypted data: what the auctioneer later handles.
    fn bidder_input(&mut self) -> (Vec<u8>, S::Scalar, tre::TreCiphertext<S>, BlindSignature<S>) {
        let s = self.suite;
        let m = self.data();
        let factors = self.factors();
        let probe = self.session();
        let req = blindsig::blind(&s, self.cfg.sig_hash, m.as_bytes(), &probe.y, &self.signer.public, &factors)
            .expect("blinding with non-zero alpha");
        let r = self.wide_scalar();
        let ct = tre::tre_encrypt_with_nonce(&s, &self.ts.public, &self.recipient.public, &self.label, &m, &r)
            .expect("consistent recipient key");
        let sp = blindsig::sign(&s, &self.signer, &probe, &req.c_prime).expect("fresh session");
        let sig = BlindSignature { c: req.c, s: blindsig::unblind(&s, &sp, &factors) };
        (m.into_bytes(), req.c_prime, ct, sig)
    }
}

fn stats(name: &str, samples: &[f64]) -> AlgorithmStats {
    let (mean_us, stddev_us) = mean_stddev(samples);
    AlgorithmStats { name: name.into(), trials: samples.len() as u32, mean_us, stddev_us }
}

pub fn run_bench<S: PairingSuite>(suite: &S, cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    if cfg.trials == 0 || cfg.sweep_trials == 0 {
        return Err(BenchError::NoTrials);
    }
    if cfg.bidder_counts.is_empty() || cfg.bidder_counts.contains(&0) {
        return Err(BenchError::BadBidderCounts);
    }
    if suite.backend_id() == BackendId::Mock && !cfg.allow_mock {
        return Err(BenchError::MockRefused);
    }
    let s = *suite;
    let hash = cfg.sig_hash;
    let mut fx = Fixture::new(s, cfg)?;
    let q = fx.signer.public;
    let mut samples: [Vec<f64>; 5] = Default::default();
    for _ in 0..cfg.trials {
        let m = fx.data();
        let factors = fx.factors();
        let session = fx.session();
        let r = fx.wide_scalar();

        let mut req = None;
        samples[0].push(micros(|| {
            req = Some(blindsig::blind(&s, hash, m.as_bytes(), &session.y, &q, &factors).expect("blinding"));
        }));
        let req = req.expect("blind ran");

        let mut ct = None;
        samples[1].push(micros(|| {
            ct = Some(tre::tre_encrypt_with_nonce(&s, &fx.ts.public, &fx.recipient.public, &fx.label, &m, &r).expect("encrypt"));
        }));
        let ct = ct.expect("encrypt ran");

        let mut sp = None;
        samples[2].push(micros(|| {
            sp = Some(blindsig::sign(&s, &fx.signer, &session, &req.c_prime).expect("fresh session"));
        }));
        let sig = BlindSignature { c: req.c, s: blindsig::unblind(&s, &sp.expect("sign ran"), &factors) };

        let mut ok = false;
        samples[3].push(micros(|| ok = blindsig::verify(&s, hash, m.as_bytes(), &sig, &q)));
        if !ok {
            return Err(BenchError::Setup("benchmark signature failed to verify".into()));
        }

        let mut opened = None;
        samples[4].push(micros(|| {
            opened = Some(tre::tre_decrypt(&s, &fx.ts.public, &ct, fx.recipient.secret(), &fx.tbk).expect("decrypt"));
        }));
        if opened.as_ref() != Some(&m) {
            return Err(BenchError::Setup("benchmark decryption mismatch".into()));
        }
    }
    let algorithms = ["UBlind", "UENC", "ASIG", "AVRY", "ADEC"]
        .iter()
        .zip(&samples)
        .map(|(name, xs)| stats(name, xs))
        .collect();

    let mut sweep = Vec::new();
    for &n in &cfg.bidder_counts {
        let inputs: Vec<_> = (0..n).map(|_| fx.bidder_input()).collect();
        let mut times = Vec::with_capacity(cfg.sweep_trials as usize);
        for _ in 0..cfg.sweep_trials {
            let sessions: Vec<_> = (0..n).map(|_| fx.session()).collect();
            times.push(micros(|| {
                for ((data, c_prime, ct, sig), session) in inputs.iter().zip(&sessions) {
                    let _ = blindsig::sign(&s, &fx.signer, session, c_prime);
                    let pt = tre::tre_decrypt(&s, &fx.ts.public, ct, fx.recipient.secret(), &fx.tbk).ok();
                    let ok = blindsig::verify(&s, hash, data, sig, &q);
                    std::hint::black_box((pt, ok));
                }
            }));
        }
        let (mean_us, stddev_us) = mean_stddev(&times);
        sweep.push(SweepPoint { bidders: n, trials: cfg.sweep_trials, mean_us, stddev_us });
    }
    let mut by_count = sweep.clone();
    by_count.sort_by_key(|p| p.bidders);
    let sweep_monotone = by_count.windows(2).all(|w| w[0].mean_us <= w[1].mean_us);

    Ok(BenchReport {
        backend: s.backend_id(),
        trials: cfg.trials,
        data_bits: cfg.data_bits,
        random_bits: cfg.random_bits,
        algorithms,
        sweep,
        sweep_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::MockSuite;

    fn mock_cfg(trials: u32) -> BenchConfig {
        BenchConfig { trials, sweep_trials: 1, bidder_counts: vec![1, 2], allow_mock: true, ..Default::default() }
    }

    #[test]
    fn mean_stddev_known_values() {
        assert_eq!(mean_stddev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]), (5.0, 2.0));
        assert_eq!(mean_stddev(&[3.5]), (3.5, 0.0));
    }

    #[test]
    fn mock_is_refused_by_default() {
        let s = MockSuite::new(1_000_003).unwrap();
        let cfg = BenchConfig { allow_mock: false, ..mock_cfg(1) };
        assert!(matches!(run_bench(&s, &cfg), Err(BenchError::MockRefused)));
    }

    #[test]
    fn rejects_empty_configs() {
        let s = MockSuite::new(1_000_003).unwrap();
        assert!(matches!(run_bench(&s, &mock_cfg(0)), Err(BenchError::NoTrials)));
        let cfg = BenchConfig { bidder_counts: vec![], ..mock_cfg(1) };
        assert!(matches!(run_bench(&s, &cfg), Err(BenchError::BadBidderCounts)));
    }

    #[test]
    fn single_trial_has_zero_spread() {
        let s = MockSuite::new((1 << 61) - 1).unwrap();
        let r = run_bench(&s, &mock_cfg(1)).unwrap();
        assert_eq!(r.algorithms.len(), 5);
        assert!(r.algorithms.iter().all(|a| a.trials == 1 && a.stddev_us == 0.0));
    }

    #[test]
    fn csv_matches_json() {
        let s = MockSuite::new((1 << 61) - 1).unwrap();
        let r = run_bench(&s, &mock_cfg(4)).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 7);
        for (row, a) in rows.iter().zip(&r.algorithms) {
            assert_eq!(row[1], a.name);
            assert_eq!(row[4].parse::<f64>().unwrap(), a.mean_us);
            assert_eq!(row[5].parse::<f64>().unwrap(), a.stddev_us);
        }
        for (row, p) in rows[5..].iter().zip(&r.sweep) {
            assert_eq!(row[2].parse::<u32>().unwrap(), p.bidders);
            assert_eq!(row[4].parse::<f64>().unwrap(), p.mean_us);
        }
        let back: BenchReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
