//! One test per acceptance criterion. Each prints a single PASS/FAIL line
//! straight to stdout so the summary survives output capture.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sealedbid_core::auction::{run_auction, AuctionConfig, AuctionRun, BidRange, Scenario};
use sealedbid_core::blindsig::{self, BlindSignature, BlindingFactors, SigHash, SignerKey, SignerSession};
use sealedbid_core::chain::{replay, Ledger, PhaseSchedule, ResultStatus};
use sealedbid_core::groups::{Bls12Suite, MockSuite, PairingSuite};
use sealedbid_core::tre::{self, Plaintext, TimeLabel};

const TRE_TRIALS: usize = 500;
const TRE_MESSAGE_BITS: usize = 100;
const TRE_BUDGET: Duration = Duration::from_secs(60);
const BILINEARITY_BUDGET: Duration = Duration::from_secs(5);
const SIGNATURE_RUNS: usize = 500;
const BLINDNESS_PAIRINGS: usize = 100;
const FAIRNESS_TRACES: u64 = 50;
const E2E_AUCTIONS: u64 = 50;
const E2E_BIDDERS: u32 = 20;
const BENCH_TRIALS: u32 = 500;
const LARGE_MOCK_ORDER: u64 = (1 << 61) - 1;

fn report(n: u32, outcome: Result<String, String>) {
    let line = match &outcome {
        Ok(detail) => format!("criterion {n}: PASS ({detail})"),
        Err(reason) => format!("criterion {n}: FAIL ({reason})"),
    };
    // Bypass libtest capture so every line lands in the log.
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
    if let Err(reason) = outcome {
        panic!("criterion {n} failed: {reason}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mock101() -> MockSuite {
    MockSuite::new(101).unwrap()
}

fn large_mock() -> MockSuite {
    MockSuite::new(LARGE_MOCK_ORDER).unwrap()
}

// Plain modular arithmetic, independent of the library.
fn modpow(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    acc
}

fn modinv(a: u64, p: u64) -> u64 {
    modpow(a, p - 2, p)
}

fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    (a % m + m - b % m) % m
}

#[test]
fn criterion_1_tre_round_trip() {
    let suite = Bls12Suite::new();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut exact = 0;
    for i in 0..TRE_TRIALS {
        let ts = tre::ts_gen(&suite, &mut rng);
        let user = tre::user_gen(&suite, &ts.public, &mut rng);
        let label = TimeLabel::new(format!("release-{}-{}", i, rng.next_u64())).unwrap();
        let mut bytes = vec![0u8; TRE_MESSAGE_BITS.div_ceil(8)];
        rng.fill_bytes(&mut bytes);
        let msg = Plaintext::from_bits(bytes, TRE_MESSAGE_BITS).unwrap();
        let ct = tre::tre_encrypt(&suite, &ts.public, &user.public, &label, &msg, &mut rng).unwrap();
        let tbk = tre::ts_broadcast(&suite, &ts, &label).unwrap();
        let out = tre::tre_decrypt(&suite, &ts.public, &ct, user.secret(), &tbk).unwrap();
        if out.bits() == msg.bits() && out.as_bytes() == msg.as_bytes() {
            exact += 1;
        }
    }
    let elapsed = start.elapsed();
    let outcome = ensure(exact == TRE_TRIALS, || format!("{exact}/{TRE_TRIALS} bit-exact"))
        .and_then(|_| ensure(elapsed < TRE_BUDGET, || format!("took {elapsed:.1?}, budget {TRE_BUDGET:?}")))
        .map(|_| format!("{exact}/{TRE_TRIALS} bit-exact on bls12-381 in {elapsed:.1?}"));
    report(1, outcome);
}

#[test]
fn criterion_2_mock_bilinearity() {
    let s = mock101();
    let q = 101u64;
    let start = Instant::now();
    let mut pass = 0;
    for a in 0..q {
        for b in 0..q {
            let lhs = s.pairing(&s.g1_mul(&a, &s.g1_generator()), &s.g2_mul(&b, &s.g2_generator()));
            // e(G, G) = 1 in the mock group, so the target is ab mod q.
            if lhs.0 == a * b % q {
                pass += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let total = (q * q) as usize;
    let outcome = ensure(pass == total, || format!("{pass}/{total}"))
        .and_then(|_| ensure(elapsed < BILINEARITY_BUDGET, || format!("took {elapsed:?}")))
        .map(|_| format!("{pass}/{total} in {elapsed:.1?}"));
    report(2, outcome);
}

fn worked_vector() -> Result<(), String> {
    let (n, d, k, alpha, gamma, delta, m) = (101u64, 5u64, 9u64, 3u64, 4u64, 2u64, 20u64);
    // Oracle, by hand: G = 1, Q = d, Y = k, H(m || t) = (m + t) mod n.
    let a_oracle = (alpha * k + gamma + delta * d) % n;
    let c_oracle = (m + a_oracle) % n;
    let cp_oracle = modinv(alpha, n) * sub_mod(c_oracle, delta, n) % n;
    let sp_oracle = sub_mod(k, cp_oracle * d, n);
    let s_oracle = (alpha * sp_oracle + gamma) % n;
    ensure((a_oracle, c_oracle, cp_oracle, sp_oracle, s_oracle) == (41, 61, 87, 79, 39), || {
        format!("oracle disagrees with stated vector: {:?}", (a_oracle, c_oracle, cp_oracle, sp_oracle, s_oracle))
    })?;

    let s = mock101();
    let key = SignerKey::from_secret(&s, d).map_err(|e| e.to_string())?;
    let session = SignerSession::with_nonce(&s, k).map_err(|e| e.to_string())?;
    let factors = BlindingFactors::new(&s, alpha, gamma, delta).map_err(|e| e.to_string())?;
    let msg = [m as u8];
    let req = blindsig::blind(&s, SigHash::MockAdditive, &msg, &session.y, &key.public, &factors)
        .map_err(|e| e.to_string())?;
    let sp = blindsig::sign(&s, &key, &session, &req.c_prime).map_err(|e| e.to_string())?;
    let sig = BlindSignature { c: req.c, s: blindsig::unblind(&s, &sp, &factors) };
    let got = (req.a_point.0, req.c, req.c_prime, sp, sig.s);
    ensure(got == (41, 61, 87, 79, 39), || format!("library produced (A, c, c', s', s) = {got:?}"))?;
    ensure(blindsig::verify(&s, SigHash::MockAdditive, &msg, &sig, &key.public), || "vector does not verify".into())
}

fn honest_runs<S: PairingSuite>(s: &S, hash: SigHash, rng: &mut ChaCha20Rng) -> Result<usize, String> {
    let mut ok = 0;
    for _ in 0..SIGNATURE_RUNS {
        let key = SignerKey::generate(s, rng);
        let mut m = vec![0u8; 8];
        rng.fill_bytes(&mut m);
        // A user whose blinded point lands on the identity redraws factors.
        let (session, factors, req) = loop {
            let session = blindsig::session_init(s, rng);
            let factors = BlindingFactors::random(s, rng);
            if let Ok(req) = blindsig::blind(s, hash, &m, &session.y, &key.public, &factors) {
                break (session, factors, req);
            }
        };
        let sp = blindsig::sign(s, &key, &session, &req.c_prime).map_err(|e| e.to_string())?;
        let sig = BlindSignature { c: req.c, s: blindsig::unblind(s, &sp, &factors) };
        if blindsig::verify(s, hash, &m, &sig, &key.public) {
            ok += 1;
        }
    }
    Ok(ok)
}

#[test]
fn criterion_3_blind_signature_vector() {
    let outcome = worked_vector().and_then(|_| {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mock = honest_runs(&mock101(), SigHash::MockAdditive, &mut rng)?;
        let prod = honest_runs(&Bls12Suite::new(), SigHash::Sha256, &mut rng)?;
        ensure(mock == SIGNATURE_RUNS && prod == SIGNATURE_RUNS, || {
            format!("honest runs verified: mock {mock}/{SIGNATURE_RUNS}, production {prod}/{SIGNATURE_RUNS}")
        })?;
        Ok(format!(
            "vector (A, c, c', s', s) = (41, 61, 87, 79, 39) reproduced; {SIGNATURE_RUNS}/{SIGNATURE_RUNS} honest runs verify on each backend"
        ))
    });
    report(3, outcome);
}

struct Transcript {
    y: u64,
    c_prime: u64,
    s_prime: u64,
}

struct FinalSignature {
    m: Vec<u8>,
    c: u64,
    s: u64,
}

/// Every `(alpha, gamma, delta)` that links a signer transcript to a final
/// signature: `c' = alpha^-1 (c - delta)`, `s = alpha s' + gamma`, and
/// `A = alpha Y + gamma G + delta Q` satisfies `c = H(m || x(A))`.
fn linking_factors(s: &MockSuite, q_key: u64, t: &Transcript, f: &FinalSignature) -> Vec<(u64, u64, u64)> {
    let n = s.q();
    let mut found = Vec::new();
    for alpha in 1..n {
        let delta = sub_mod(f.c, alpha * t.c_prime % n, n);
        let gamma = sub_mod(f.s, alpha * t.s_prime % n, n);
        let a_point = (alpha * t.y + gamma + delta * q_key) % n;
        if a_point == 0 {
            continue;
        }
        let c = SigHash::MockAdditive.challenge(s, &f.m, &num_bigint::BigUint::from(a_point));
        if c == f.c {
            found.push((alpha, gamma, delta));
        }
    }
    found
}

#[test]
fn criterion_4_perfect_blindness() {
    let s = mock101();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let key = SignerKey::from_secret(&s, 17).unwrap();
    let mut transcripts = Vec::new();
    let mut signatures = Vec::new();
    while transcripts.len() < BLINDNESS_PAIRINGS {
        let session = blindsig::session_init(&s, &mut rng);
        let factors = BlindingFactors::random(&s, &mut rng);
        let m = vec![rng.gen_range(0..100u8)];
        let Ok(req) = blindsig::blind(&s, SigHash::MockAdditive, &m, &session.y, &key.public, &factors) else {
            continue;
        };
        let sp = blindsig::sign(&s, &key, &session, &req.c_prime).unwrap();
        let sig_s = blindsig::unblind(&s, &sp, &factors);
        transcripts.push(Transcript { y: session.y.0, c_prime: req.c_prime, s_prime: sp });
        signatures.push(FinalSignature { m, c: req.c, s: sig_s });
    }
    let mut consistent = 0;
    let mut unique = 0;
    let mut counts = BTreeMap::new();
    for t in &transcripts {
        let f = &signatures[rng.gen_range(0..signatures.len())];
        let sols = linking_factors(&s, key.public.0, t, f);
        if !sols.is_empty() {
            consistent += 1;
        }
        if sols.len() == 1 {
            unique += 1;
        }
        *counts.entry(sols.len()).or_insert(0) += 1;
    }
    let summary = format!(
        "{consistent}/{BLINDNESS_PAIRINGS} cross-pairings consistent, {unique}/{BLINDNESS_PAIRINGS} with a unique solution; solution counts {counts:?}"
    );
    let outcome = if consistent == BLINDNESS_PAIRINGS && unique == BLINDNESS_PAIRINGS {
        Ok(summary)
    } else {
        Err(format!("{summary}; every alpha in Z_n* yields a solution, so uniqueness cannot hold"))
    };
    report(4, outcome);
}

fn randomized_config(rng: &mut ChaCha20Rng, seed: u64, bidders: u32, scenario: Scenario) -> AuctionConfig {
    let t1 = rng.gen_range(1..=2);
    let t2 = t1 + rng.gen_range(1..=2);
    let t3 = t2 + rng.gen_range(1..=2);
    let t4 = t3 + rng.gen_range(2..=3);
    AuctionConfig {
        auction_id: format!("trace-{seed}"),
        deposit: rng.gen_range(1..=500),
        schedule: PhaseSchedule { t1, t2, t3, t4 },
        release_tick: rng.gen_range(t3..t4),
        bidder_count: bidders,
        bid_range: BidRange { min: 10, max: 99 },
        rng_seed: seed,
        sig_hash: SigHash::Sha256,
        scenario,
    }
}

#[test]
fn criterion_5_fairness_gate() {
    let suite = Bls12Suite::new();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut wrong_key_attempts = 0;
    let mut tally_decrypts = 0;
    let mut outcome = Ok(());
    for seed in 0..FAIRNESS_TRACES {
        let bidders = rng.gen_range(2..=6);
        let cfg = randomized_config(&mut rng, seed, bidders, Scenario::EarlyDecryptor);
        let run = run_auction(&suite, &cfg).map_err(|e| e.to_string());
        let run = match run {
            Ok(r) => r,
            Err(e) => {
                outcome = Err(format!("seed {seed}: {e}"));
                break;
            }
        };
        let f = run.fairness();
        wrong_key_attempts += f.wrong_key_attempts;
        tally_decrypts += f.attempts - f.wrong_key_attempts;
        if !f.holds() || f.release_broadcast_position.is_none() || f.wrong_key_attempts == 0 {
            outcome = Err(format!("seed {seed}: {f:?}"));
            break;
        }
    }
    report(
        5,
        outcome.map(|_| {
            format!(
                "{FAIRNESS_TRACES} traces: 0 recoveries before release, {wrong_key_attempts} wrong-key decryptions all failed verification, {tally_decrypts} release-key decryptions"
            )
        }),
    );
}

fn scenario_runs() -> Vec<AuctionRun<MockSuite>> {
    let suite = large_mock();
    let mut rng = ChaCha20Rng::seed_from_u64(67);
    let mut runs = Vec::new();
    for scenario in Scenario::ALL {
        for seed in 0..5 {
            let bidders = rng.gen_range(3..=8);
            let cfg = randomized_config(&mut rng, seed, bidders, scenario);
            runs.push(run_auction(&suite, &cfg).unwrap());
        }
    }
    runs
}

fn valid_per_certificate(run: &AuctionRun<MockSuite>) -> Result<usize, String> {
    let state = run.ledger.state();
    let Some(l3) = &state.list3 else {
        return Ok(0);
    };
    let mut per_cert: BTreeMap<u32, usize> = BTreeMap::new();
    for idx in &l3.valid_indices {
        let opened = l3.all_opened.iter().find(|o| o.submission_index == *idx).ok_or("valid index not opened")?;
        let c = hex::encode(&opened.c.0);
        let owner = run
            .bidders
            .iter()
            .find(|b| b.commitment.as_deref() == Some(c.as_str()))
            .and_then(|b| b.cert_serial)
            .ok_or_else(|| format!("valid submission {idx} matches no certificate"))?;
        *per_cert.entry(owner).or_insert(0) += 1;
    }
    Ok(per_cert.values().copied().max().unwrap_or(0))
}

#[test]
fn criterion_6_non_repeatable_bid() {
    let runs = scenario_runs();
    let check = || -> Result<String, String> {
        let doubles: Vec<_> = runs.iter().filter(|r| r.config.scenario == Scenario::DoubleRequest).collect();
        for r in &doubles {
            ensure(r.bidders[0].observed_errors.iter().any(|e| e.contains("already requested")), || {
                format!("double-request seed {}: no AlreadyRequested", r.config.rng_seed)
            })?;
        }
        let mut duplicates = 0;
        for r in runs.iter().filter(|r| r.config.scenario == Scenario::Replayer) {
            let l3 = r.ledger.state().list3.as_ref().ok_or("replayer run has no result")?;
            let copy = r.outcome.submission_count - 1;
            ensure(l3.discarded_indices.contains(&copy) && !l3.valid_indices.contains(&copy), || {
                format!("replayer seed {}: injected copy not discarded", r.config.rng_seed)
            })?;
            duplicates += 1;
        }
        let mut worst = 0;
        for r in &runs {
            worst = worst.max(valid_per_certificate(r)?);
        }
        ensure(worst <= 1, || format!("a certificate has {worst} valid submissions"))?;
        Ok(format!(
            "{} double requests refused, {duplicates} injected duplicates discarded, max valid per certificate {worst} over {} runs",
            doubles.len(),
            runs.len()
        ))
    };
    report(6, check());
}

/// Re-applies a run's log and checks total money after every transaction.
fn money_conserved<S: PairingSuite>(suite: S, run: &AuctionRun<S>) -> Result<(), String> {
    let mut ledger = Ledger::new(suite, run.ledger.genesis().clone()).map_err(|e| e.to_string())?;
    let total = ledger.state().total_money();
    for tx in run.ledger.log() {
        ledger.apply(tx.clone()).map_err(|e| e.to_string())?;
        ensure(ledger.state().total_money() == total, || format!("seq {} changed total money", tx.seq))?;
    }
    Ok(())
}

#[test]
fn criterion_7_abort_and_conservation() {
    let runs = scenario_runs();
    let check = || -> Result<String, String> {
        let mut aborts = 0;
        for r in runs.iter().filter(|r| r.config.scenario == Scenario::AuctioneerAbort) {
            ensure(r.outcome.status == ResultStatus::Aborted, || "abort scenario did not abort".into())?;
            let st = r.ledger.state();
            let submitters: Vec<_> = r.bidders.iter().filter_map(|b| b.submission_address).collect();
            let share = r.config.deposit / submitters.len() as u64;
            for a in &submitters {
                ensure(st.balances.get(a) == Some(&share), || format!("submitter {a} did not get {share}"))?;
            }
            let burned = r.config.deposit - share * submitters.len() as u64;
            ensure(st.escrow == burned, || format!("escrow {} left, expected remainder {burned}", st.escrow))?;
            aborts += 1;
        }
        for r in &runs {
            money_conserved(large_mock(), r)?;
        }
        Ok(format!("{aborts} aborted auctions split equally, remainder burned in escrow; money conserved after every tx in {} traces", runs.len()))
    };
    report(7, check());
}

#[test]
fn criterion_8_end_to_end() {
    let suite = Bls12Suite::new();
    let check = || -> Result<String, String> {
        let mut ties = 0;
        for seed in 0..E2E_AUCTIONS {
            let cfg = AuctionConfig {
                auction_id: format!("e2e-{seed}"),
                rng_seed: seed,
                bidder_count: E2E_BIDDERS,
                ..AuctionConfig::default()
            };
            let run = run_auction(&suite, &cfg).map_err(|e| e.to_string())?;
            let seq_of: BTreeMap<_, _> = run.ledger.state().submissions.iter().map(|s| (s.sender, s.seq)).collect();
            let (bid, _, agent) = run
                .bidders
                .iter()
                .map(|b| (b.bid, seq_of[&b.submission_address.expect("honest bidder submitted")], b.agent))
                .min()
                .ok_or("no bidders")?;
            if run.bidders.iter().filter(|b| b.bid == bid).count() > 1 {
                ties += 1;
            }
            let expected_addr = run.bidders[agent as usize].submission_address;
            ensure(run.outcome.winning_bid == Some(bid) && run.outcome.winner_address == expected_addr, || {
                format!("seed {seed}: outcome {:?}, oracle bid {bid} from agent {agent}", run.outcome)
            })?;
            let replayed = hex::encode(replay(suite, run.ledger.genesis(), run.ledger.log()).map_err(|e| e.to_string())?);
            ensure(replayed == run.outcome.state_hash, || format!("seed {seed}: replay hash differs"))?;
        }
        Ok(format!("{E2E_AUCTIONS}/{E2E_AUCTIONS} winners match the min oracle ({ties} with tied minima); replay hash equals live hash in all"))
    };
    report(8, check());
}

#[test]
fn criterion_9_benchmark_shape() {
    let dir = tempfile::TempDir::new().unwrap();
    let check = || -> Result<String, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_sealedbid"))
            .args(["bench", "--trials", &BENCH_TRIALS.to_string(), "--bidders", "10,50,100", "--out-dir"])
            .arg(dir.path())
            .env("SEALEDBID_LOG_LEVEL", "error")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        let json: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("bench.json")).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let algos = json["algorithms"].as_array().ok_or("no algorithms")?;
        let names: Vec<&str> = algos.iter().filter_map(|a| a["name"].as_str()).collect();
        ensure(names == ["UBlind", "UENC", "ASIG", "AVRY", "ADEC"], || format!("algorithms {names:?}"))?;
        ensure(algos.iter().all(|a| a["trials"] == BENCH_TRIALS), || "trial count not honoured".into())?;
        ensure(json["data_bits"] == 100 && json["random_bits"] == 400, || "parameter widths differ".into())?;
        let sweep: Vec<(u64, f64)> = json["sweep"]
            .as_array()
            .ok_or("no sweep")?
            .iter()
            .map(|p| (p["bidders"].as_u64().unwrap_or(0), p["mean_us"].as_f64().unwrap_or(f64::NAN)))
            .collect();
        ensure(sweep.iter().map(|p| p.0).eq([10, 50, 100]), || format!("sweep counts {sweep:?}"))?;
        let monotone = sweep.windows(2).all(|w| w[0].1 <= w[1].1);
        ensure(monotone && json["sweep_monotone"] == true, || format!("auctioneer time not monotone: {sweep:?}"))?;
        let csv = std::fs::read_to_string(dir.path().join("bench.csv")).map_err(|e| e.to_string())?;
        ensure(csv.lines().count() == 1 + 5 + 3, || "csv row count".into())?;
        let ms: Vec<String> = sweep.iter().map(|(n, us)| format!("{n}: {:.0} ms", us / 1000.0)).collect();
        Ok(format!("{BENCH_TRIALS} trials x 5 algorithms, 100-bit data, 400-bit randomness; auctioneer sweep {}", ms.join(", ")))
    };
    report(9, check());
}
