//! Acceptance gate. Runs criteria 1 to 11 in order, prints one PASS/FAIL
//! line per criterion and fails if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use helene_core::fortuna::{combinations, Fortuna, FortunaError, Generator};
use helene_core::harness::bench::{self, OracleReport};
use helene_core::harness::scenario::e2e;
use helene_core::harness::{campaign, seeded_fortuna, seeded_rng, ScenarioConfig};
use helene_core::labsim::{classify, AntibodyDistribution};
use helene_core::nist::{min_pass_proportion, NistParams};
use helene_core::oracle::{corrupt, quorum, FaultMode, OracleCall, RequestStatus};
use helene_core::sealing::{self, keypair_from_seed, sign_report, unseal, verify_report, SealError};
use helene_core::sim::{SimConfig, Simulation};
use helene_core::storage::ContentId;
use helene_core::types::Diagnostic;
use rand::Rng;

const BATCH_WALL_LIMIT: Duration = Duration::from_secs(5);
const CONSENSUS_WALL_LIMIT: Duration = Duration::from_secs(10);
const E2E_WALL_LIMIT: Duration = Duration::from_secs(10);
const FORTUNA_SEED: &[u8] = b"helene fixed campaign seed 0001";
// From tests/oracles/fortuna_ref.py in the core crate (OpenSSL AES-256).
const FORTUNA_FIRST_64: &str = "41fd590581936f48dd5958fb7d6b83d2a50404284b01077f3835cc3744dcef1d\
                                7be246e0a584e3d08032ab3641204900836abeb94e68fdc7a53aa7e1762a17be";
const NIST_SEQUENCES: usize = 50;
const NIST_BITS: usize = 1_000_000;
const NIST_FLOOR: f64 = 0.94;
const NIST_MEDIAN_FLOOR: f64 = 0.98;
const SEALING_PAIRS: usize = 1000;
const CHI_SQUARE_DRAWS: usize = 100_000;
const CHI_SQUARE_SIGMAS: f64 = 4.0;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1_batch() -> Outcome {
    let t = Instant::now();
    let r = bench::batch(bench::BATCH_LEGS).map_err(|e| e.to_string())?;
    let (s, b) = (r.row("sequential"), r.row("batch"));
    check(b.virtual_ms < s.virtual_ms, "batch not faster")?;
    check(s.transactions == 100 && b.transactions == 1, "transaction counts")?;
    check(t.elapsed() < BATCH_WALL_LIMIT, format!("took {:?}", t.elapsed()))?;
    Ok(format!(
        "batch {} ms vs sequential {} ms, balance maps equal, {:.2?}",
        b.virtual_ms,
        s.virtual_ms,
        t.elapsed()
    ))
}

fn c2_consensus() -> Outcome {
    let t = Instant::now();
    let mut cases = 0;
    for n in [1usize, 2, 3, 5] {
        for mask in 0u32..(1 << n) {
            let faults: Vec<FaultMode> = (0..n)
                .map(|i| if mask & (1 << i) != 0 { FaultMode::WrongValue } else { FaultMode::Honest })
                .collect();
            let wrong = mask.count_ones() as usize;
            let mut sim = Simulation::new(&SimConfig {
                node_faults: faults,
                ..SimConfig::default()
            })
            .map_err(|e| e.to_string())?;
            let client = sim.actor("client").map_err(|e| e.to_string())?.id;
            let payload = vec![n as u8; 2048];
            let honest = ContentId::of(&payload).to_string();
            let r = sim
                .transact(
                    client,
                    OracleCall::TriggerAdd {
                        ciphertext: B64.encode(&payload),
                        retriever: client,
                    },
                    5_000,
                )
                .map_err(|e| e.to_string())?;
            let id = r.id().ok_or("no id")?;
            sim.run_until(120_000, |s| {
                s.platform().oracle.request(id).is_ok_and(|r| r.status != RequestStatus::Pending)
            })
            .map_err(|e| e.to_string())?;
            let req = sim.platform().oracle.request(id).map_err(|e| e.to_string())?;
            let q = quorum(n);
            if n - wrong >= q {
                check(
                    req.finalized_value.as_deref() == Some(honest.as_str()),
                    format!("n={n} mask={mask:b}: honest majority did not win"),
                )?;
            } else if wrong >= q {
                check(
                    req.finalized_value == Some(corrupt(&honest)),
                    format!("n={n} mask={mask:b}: corrupt majority not reflected"),
                )?;
            } else {
                // Neither side reaches quorum: the N=2 split.
                check(req.status == RequestStatus::Failed, format!("n={n} mask={mask:b}: split finalized"))?;
            }
            cases += 1;
        }
    }
    check(t.elapsed() < CONSENSUS_WALL_LIMIT, format!("took {:?}", t.elapsed()))?;
    Ok(format!("{cases}/46 placements, {:.2?}", t.elapsed()))
}

fn oracle_report() -> Result<OracleReport, String> {
    bench::oracle(
        &bench::ORACLE_NODE_COUNTS,
        &bench::ORACLE_PAYLOAD_SIZES,
        bench::ORACLE_REQUESTS,
        1,
    )
    .map_err(|e| e.to_string())
}

fn means(r: &OracleReport, size: usize) -> Vec<f64> {
    bench::ORACLE_NODE_COUNTS
        .iter()
        .map(|&n| r.row(n, size).expect("row").mean_ms)
        .collect()
}

fn c3_node_scaling(r: &OracleReport) -> Outcome {
    let mut detail = Vec::new();
    for size in bench::ORACLE_PAYLOAD_SIZES {
        let m = means(r, size);
        check(m.windows(2).all(|w| w[1] > w[0]), format!("{size} B means {m:?}"))?;
        detail.push(format!(
            "{size} B: {}",
            m.iter().map(|v| format!("{v:.0}")).collect::<Vec<_>>().join(" < ")
        ));
    }
    Ok(format!("{} requests per point; {}", bench::ORACLE_REQUESTS, detail.join("; ")))
}

fn c4_size_scaling(r: &OracleReport) -> Outcome {
    let (small, large) = (bench::ORACLE_PAYLOAD_SIZES[0], bench::ORACLE_PAYLOAD_SIZES[1]);
    for n in bench::ORACLE_NODE_COUNTS {
        let (a, b) = (r.row(n, small).unwrap().mean_ms, r.row(n, large).unwrap().mean_ms);
        check(b > a, format!("N={n}: {b} <= {a}"))?;
    }
    Ok("24 KB mean above 12 KB mean at N = 1, 2, 3, 5".into())
}

fn c5_fortuna() -> Outcome {
    let mut f = Fortuna::from_seed(FORTUNA_SEED).map_err(|e| e.to_string())?;
    let first = hex::encode(f.random_data(64).map_err(|e| e.to_string())?);
    check(first == FORTUNA_FIRST_64, format!("stream {first}"))?;
    check(
        Fortuna::new().random_data(1) == Err(FortunaError::NotSeeded)
            && Generator::new().pseudo_random_data(1) == Err(FortunaError::NotSeeded)
            && Fortuna::new().random_password() == Err(FortunaError::NotSeeded),
        "unseeded output allowed",
    )?;
    let mut a = Fortuna::from_seed(FORTUNA_SEED).map_err(|e| e.to_string())?;
    let mut two = a.random_data(32).map_err(|e| e.to_string())?;
    two.extend(a.random_data(32).map_err(|e| e.to_string())?);
    let one = Fortuna::from_seed(FORTUNA_SEED)
        .map_err(|e| e.to_string())?
        .random_data(64)
        .map_err(|e| e.to_string())?;
    check(two[..32] == one[..32] && two[32..] != one[32..], "no rekey between requests")?;
    Ok("64-byte reference stream, unseeded refusal, rekey between requests".into())
}

fn c6_nist() -> Outcome {
    let t = Instant::now();
    let bound = min_pass_proportion(0.01, NIST_SEQUENCES);
    check((bound - 0.9478).abs() < 1e-4, format!("bound {bound}"))?;
    let camp = campaign::run(campaign::DEFAULT_SEED, NIST_SEQUENCES, NIST_BITS, &NistParams::default())
        .map_err(|e| e.to_string())?;
    let last = camp.last();
    let report = &last.report;
    for r in report.rows.iter().filter(|r| r.evaluations > 0) {
        check(
            r.proportion >= r.threshold && r.proportion >= NIST_FLOOR,
            format!("{} at {:.4}", r.test.name(), r.proportion),
        )?;
    }
    let median = report.median_proportion();
    check(median >= NIST_MEDIAN_FLOOR, format!("median {median:.4}"))?;
    let worst = report
        .rows
        .iter()
        .filter(|r| r.evaluations > 0)
        .map(|r| r.proportion)
        .fold(1.0, f64::min);
    Ok(format!(
        "seed {} ({} run{}), min proportion {worst:.4}, median {median:.4}, {:.1?}",
        last.seed,
        camp.runs.len(),
        if camp.runs.len() > 1 { "s" } else { "" },
        t.elapsed()
    ))
}

/// Decimal schoolbook multiplication on digit strings.
fn dec_mul(a: &str, b: &str) -> String {
    let (a, b): (Vec<u32>, Vec<u32>) = (
        a.bytes().rev().map(|c| (c - b'0') as u32).collect(),
        b.bytes().rev().map(|c| (c - b'0') as u32).collect(),
    );
    let mut out = vec![0u32; a.len() + b.len()];
    for (i, &x) in a.iter().enumerate() {
        let mut carry = 0;
        for (j, &y) in b.iter().enumerate() {
            let v = out[i + j] + x * y + carry;
            out[i + j] = v % 10;
            carry = v / 10;
        }
        let mut k = i + b.len();
        while carry > 0 {
            let v = out[k] + carry;
            out[k] = v % 10;
            carry = v / 10;
            k += 1;
        }
    }
    while out.len() > 1 && *out.last().unwrap() == 0 {
        out.pop();
    }
    out.iter().rev().map(|d| char::from(b'0' + *d as u8)).collect()
}

fn c7_combinations() -> Outcome {
    let expected = format!("33232930569601{}", "0".repeat(16));
    let mut pow = "1".to_string();
    for _ in 0..16 {
        pow = dec_mul(&pow, "70");
    }
    check(pow == expected, "oracle disagrees with the expected value")?;
    let c16 = combinations(70, 16).to_string();
    check(c16 == expected, format!("combinations(70,16) = {c16}"))?;
    let c32 = combinations(70, 32).to_string();
    check(c32 == dec_mul(&expected, &expected), format!("combinations(70,32) = {c32}"))?;
    Ok(format!("70^16 = {c16}, 70^32 = {c32}"))
}

fn c8_sealing() -> Outcome {
    let key = keypair_from_seed(b"acceptance lab");
    let vk = key.verifying_key();
    let mut fortuna = seeded_fortuna(8, "acceptance/sealing");
    let mut rng = seeded_rng(8, "acceptance/reports");
    let pairs: Vec<(String, Vec<u8>)> = (0..SEALING_PAIRS)
        .map(|i| {
            let password = fortuna.random_password().unwrap();
            let gmfi: u64 = rng.gen_range(0..8000);
            let report = sealing::canonicalize([
                ("antibody_gmfi", gmfi.to_string()),
                ("diagnostic", classify(gmfi).to_string()),
                ("lab_id", "lab-acceptance".to_string()),
                ("test_id", format!("T-{i:06}")),
                ("timestamp_ms", rng.gen::<u32>().to_string()),
            ])
            .unwrap();
            (password, report)
        })
        .collect();
    let envelopes: Vec<Vec<u8>> = pairs
        .iter()
        .map(|(pw, report)| sealing::seal(pw, report, &sign_report(&key, report), &mut fortuna).unwrap())
        .collect();

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = SEALING_PAIRS.div_ceil(workers);
    let (ok, rejected) = std::thread::scope(|s| {
        let handles: Vec<_> = (0..SEALING_PAIRS)
            .step_by(chunk)
            .map(|start| {
                let (pairs, envelopes, vk) = (&pairs, &envelopes, &vk);
                s.spawn(move || {
                    let (mut ok, mut rejected) = (0, 0);
                    for i in start..(start + chunk).min(SEALING_PAIRS) {
                        let (pw, report) = &pairs[i];
                        if let Ok(u) = unseal(pw, &envelopes[i]) {
                            if &u.report == report && verify_report(vk, &u.report, &u.signature) {
                                ok += 1;
                            }
                        }
                        let wrong = &pairs[(i + 1) % SEALING_PAIRS].0;
                        if wrong != pw && unseal(wrong, &envelopes[i]) == Err(SealError::Authentication) {
                            rejected += 1;
                        }
                    }
                    (ok, rejected)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap())
            .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    });
    check(ok == SEALING_PAIRS, format!("{ok} round trips"))?;
    check(rejected == SEALING_PAIRS, format!("{rejected} rejections"))?;
    Ok(format!("{ok}/{SEALING_PAIRS} round trips verified, {rejected}/{SEALING_PAIRS} wrong passwords rejected"))
}

fn c9_e2e() -> Outcome {
    let t = Instant::now();
    let mut cfg = ScenarioConfig::default();
    cfg.patients.truncate(1);
    let run = e2e(&cfg);
    run.outcome.as_ref().map_err(|e| e.to_string())?;
    for step in ["1 ", "2 ", "3 ", "4 ", "5 ", "6 ", "7/upload", "7/retrieve", "7/unseal", "7/verify"] {
        check(
            run.transcript.iter().any(|l| l.contains(&format!("step {step}"))),
            format!("step {step} missing from transcript"),
        )?;
    }
    let expect = |cfg: ScenarioConfig, step: &str| -> Result<(), String> {
        match e2e(&cfg).outcome {
            Err(f) if f.step == step => Ok(()),
            Err(f) => Err(format!("expected failure at {step}, got {f}")),
            Ok(_) => Err(format!("expected failure at {step}, run passed")),
        }
    };
    let mut silent = cfg.clone();
    silent.oracle.faults = vec![FaultMode::Silent; 3];
    expect(silent, "7/upload")?;
    let mut pw = cfg.clone();
    pw.inject.wrong_password = true;
    expect(pw, "7/unseal")?;
    let mut thief = cfg.clone();
    thief.inject.unauthorized_retriever = true;
    expect(thief, "7/retrieve")?;
    check(t.elapsed() < E2E_WALL_LIMIT, format!("took {:?}", t.elapsed()))?;
    Ok(format!(
        "happy path verified; silent oracle, wrong password and unauthorized retriever stop at 7/upload, 7/unseal, 7/retrieve; {:.2?}",
        t.elapsed()
    ))
}

fn c10_classification() -> Outcome {
    let cases = [
        (0, Diagnostic::Negative),
        (50, Diagnostic::Negative),
        (100, Diagnostic::Negative),
        (101, Diagnostic::Inconclusive),
        (150, Diagnostic::Inconclusive),
        (200, Diagnostic::Inconclusive),
        (201, Diagnostic::Positive),
        (250, Diagnostic::Positive),
    ];
    for (v, d) in cases {
        check(classify(v) == d, format!("classify({v}) = {}", classify(v)))?;
    }
    let dist = AntibodyDistribution::bundled();
    let mut rng = seeded_rng(10, "acceptance/chi-square");
    let mut hits = vec![0u64; dist.bins()];
    for _ in 0..CHI_SQUARE_DRAWS {
        let v = dist.sample(&mut rng);
        hits[dist.bin_of(v).ok_or("sample outside support")?] += 1;
    }
    let chi2: f64 = hits
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let e = CHI_SQUARE_DRAWS as f64 * dist.probability(i);
            (h as f64 - e).powi(2) / e
        })
        .sum();
    let df = (dist.bins() - 1) as f64;
    let z = (chi2 - df) / (2.0 * df).sqrt();
    check(z.abs() <= CHI_SQUARE_SIGMAS, format!("chi2 {chi2:.2} is {z:.2} sigma from {df}"))?;
    Ok(format!("thresholds exact; chi2 = {chi2:.2} on {df} df ({z:+.2} sigma)"))
}

fn helene(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_helene"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    // Exit 1 is a completed run whose own check failed; the output must
    // still be reproducible.
    match out.status.code() {
        Some(c @ (0 | 1)) => {
            let mut bytes = vec![c as u8];
            bytes.extend(out.stdout);
            Ok(bytes)
        }
        _ => Err(format!("helene {args:?}: {}", String::from_utf8_lossy(&out.stderr))),
    }
}

fn c11_determinism() -> Outcome {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let file = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let config = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/default.toml")
        .to_string_lossy()
        .into_owned();
    let commands: Vec<(Vec<String>, Option<String>)> = vec![
        (vec!["scenario".into(), "e2e".into(), "--config".into(), config.clone(), "--seed".into(), "7".into()], None),
        (vec!["scenario".into(), "incentive".into(), "--seed".into(), "7".into()], None),
        (vec!["bench".into(), "batch".into(), "--out".into(), file("batch.csv")], Some(file("batch.csv"))),
        (
            vec!["bench".into(), "oracle".into(), "--requests".into(), "30".into(), "--out".into(), file("oracle.csv")],
            Some(file("oracle.csv")),
        ),
        (
            vec![
                "nist".into(),
                "--sequences".into(),
                "5".into(),
                "--bits".into(),
                "100000".into(),
                "--out".into(),
                file("nist.csv"),
                "--markdown".into(),
                file("nist.md"),
            ],
            Some(file("nist.csv")),
        ),
        (
            vec!["fortuna".into(), "gen".into(), "--bytes".into(), "4096".into(), "--seed-hex".into(), "00ff".into()],
            None,
        ),
        (vec!["fortuna".into(), "password".into(), "--seed-hex".into(), "01".into()], None),
    ];
    for (args, artifact) in &commands {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let mut bytes = helene(&args)?;
            if let Some(p) = artifact {
                bytes.extend(std::fs::read(p).map_err(|e| e.to_string())?);
                std::fs::remove_file(p).map_err(|e| e.to_string())?;
            }
            outputs.push(bytes);
        }
        check(!outputs[0].is_empty() && outputs[0] == outputs[1], format!("helene {} differs", args.join(" ")))?;
    }
    Ok(format!("{} commands byte-identical across two runs", commands.len()))
}

#[test]
fn acceptance() {
    let oracle = oracle_report();
    let criteria: Vec<Criterion> = vec![
        ("batch transfer", Box::new(c1_batch)),
        ("oracle consensus safety", Box::new(c2_consensus)),
        ("oracle node scaling", Box::new(|| c3_node_scaling(oracle.as_ref().map_err(Clone::clone)?))),
        ("payload size scaling", Box::new(|| c4_size_scaling(oracle.as_ref().map_err(Clone::clone)?))),
        ("fortuna conformance", Box::new(c5_fortuna)),
        ("nist campaign", Box::new(c6_nist)),
        ("password space", Box::new(c7_combinations)),
        ("sealing round trip", Box::new(c8_sealing)),
        ("end-to-end scenario", Box::new(c9_e2e)),
        ("classification", Box::new(c10_classification)),
        ("determinism", Box::new(c11_determinism)),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        match run() {
            Ok(detail) => println!("criterion {n:>2} PASS {name}: {detail}"),
            Err(why) => {
                println!("criterion {n:>2} FAIL {name}: {why}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
