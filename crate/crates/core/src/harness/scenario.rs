//! Scripted runs through the marketplace. Each run keeps a transcript with
//! one line per action; a failing check stops the run and names the step.

use std::fmt;

use crate::labsim::{classify, TestReport};
use crate::ledger::{AccountId, TxHash};
use crate::marketplace::{AuctionId, AuctionState, MarketCall, OfferId, Preferences};
use crate::oracle::{OracleCall, OracleRequest, RequestId, RequestKind, RequestStatus};
use crate::sealing::{self, envelope_from_base64, envelope_to_base64, unseal, verify_report};

use super::world::World;
use super::{HarnessError, ScenarioConfig};

/// What the patient asks for when creating an auction.
pub const REQUEST_PREFS: Preferences = Preferences {
    accuracy_pct: 90,
    delivery_days: 7,
    price: 100,
};

/// Bidding window, in blocks.
pub const BIDDING_BLOCKS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepFailure {
    pub step: String,
    pub reason: String,
}

impl fmt::Display for StepFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {} failed: {}", self.step, self.reason)
    }
}

impl std::error::Error for StepFailure {}

#[derive(Debug, Default, Clone)]
pub struct Transcript {
    pub lines: Vec<String>,
}

impl Transcript {
    fn log(&mut self, now: u64, who: &str, step: &str, msg: impl fmt::Display) {
        self.lines.push(format!("[t={now}] {who}step {step}: {msg}"));
    }
}

pub struct ScenarioRun<T> {
    pub transcript: Vec<String>,
    pub outcome: Result<T, StepFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct E2eResult {
    pub patient: AccountId,
    pub auction_id: AuctionId,
    pub lab: AccountId,
    pub price: u64,
    pub add_request: RequestId,
    pub cat_request: RequestId,
    pub report: TestReport,
    pub report_bytes: Vec<u8>,
    pub signature: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncentiveResult {
    pub e2e: Vec<E2eResult>,
    pub offer_id: OfferId,
    pub paid: usize,
    pub settle_tx: Option<TxHash>,
    pub company_delta: i128,
    /// Reports the company unsealed and verified.
    pub reports_read: usize,
}

fn fail(step: &str, reason: impl fmt::Display) -> StepFailure {
    StepFailure {
        step: step.to_string(),
        reason: reason.to_string(),
    }
}

trait At<T> {
    fn at(self, step: &str) -> Result<T, StepFailure>;
}

impl<T, E: fmt::Display> At<T> for Result<T, E> {
    fn at(self, step: &str) -> Result<T, StepFailure> {
        self.map_err(|e| fail(step, e))
    }
}

fn setup(cfg: &ScenarioConfig, log: &mut Transcript) -> Result<World, StepFailure> {
    let w = World::new(cfg).at("0 setup")?;
    log.log(
        w.now(),
        "",
        "0 setup",
        format_args!(
            "{} patients, {} labs, {} companies, {} oracle nodes",
            w.patients().len(),
            w.labs().len(),
            w.companies().len(),
            w.platform().oracle.nodes().len()
        ),
    );
    Ok(w)
}

/// Full test-ordering flow for the first patient.
pub fn e2e(cfg: &ScenarioConfig) -> ScenarioRun<E2eResult> {
    let mut log = Transcript::default();
    let outcome = setup(cfg, &mut log).and_then(|mut w| run_e2e(&mut w, cfg, 0, &mut log));
    ScenarioRun {
        transcript: log.lines,
        outcome,
    }
}

fn add_request_for(w: &World, lab: AccountId, auction: AuctionId) -> Option<&OracleRequest> {
    let b64 = w.lab(lab)?.offeror.report(auction)?.envelope_base64();
    w.platform()
        .oracle
        .requests()
        .values()
        .find(|r| r.kind == RequestKind::Add && r.requester == lab && r.ciphertext.as_deref() == Some(b64.as_str()))
}

fn wait_resolved(w: &mut World, id: RequestId, max_ms: u64) -> Result<RequestStatus, HarnessError> {
    w.run_until(max_ms, |w| {
        w.platform().oracle.request(id).is_ok_and(|r| r.status != RequestStatus::Pending)
    })?;
    Ok(w.platform().oracle.request(id).expect("exists").status)
}

fn auction_state(w: &World, id: AuctionId) -> AuctionState {
    w.platform().market.auction(id).expect("exists").state
}

/// Runs steps 1 to 7 for patient `idx` inside an existing world.
pub fn run_e2e(w: &mut World, cfg: &ScenarioConfig, idx: usize, log: &mut Transcript) -> Result<E2eResult, StepFailure> {
    let block = cfg.block_interval_ms;
    let tx_wait = 10 * block;
    let who = if cfg.patients.len() > 1 {
        format!("{} ", cfg.patients[idx].name)
    } else {
        String::new()
    };
    let patient = w.patients()[idx].actor.id;
    let test_type = cfg.patients[idx].test_type;

    let step = "1 create_auction";
    let expiry = w.now() + BIDDING_BLOCKS * block;
    let r = w
        .transact(
            patient,
            MarketCall::CreateAuction {
                test_type,
                prefs: REQUEST_PREFS,
                expiry,
            },
            tx_wait,
        )
        .at(step)?;
    let auction_id = r.id().ok_or_else(|| fail(step, "no auction id returned"))?;
    log.log(
        w.now(),
        &who,
        step,
        format_args!("auction {auction_id} for {test_type}, max price {}, expires t={expiry}", REQUEST_PREFS.price),
    );

    let step = "2 bidding";
    let eligible = w
        .labs()
        .iter()
        .filter(|l| l.offeror.policy().test_types.contains(&test_type))
        .count();
    if eligible == 0 {
        return Err(fail(step, format_args!("no lab offers {test_type} tests")));
    }
    let all_in = |w: &World| w.platform().market.auction(auction_id).is_ok_and(|a| a.bids.len() >= eligible);
    match w.run_until(expiry - w.now() - 1, all_in) {
        Ok(_) | Err(HarnessError::Sim(crate::sim::SimError::Timeout(_))) => {}
        Err(e) => return Err(fail(step, e)),
    }
    let bids = w.platform().market.auction(auction_id).expect("exists").bids.clone();
    if bids.is_empty() {
        return Err(fail(step, "no bids before expiry"));
    }
    for b in &bids {
        let name = w.lab(b.lab).map_or("?", |l| l.name.as_str());
        log.log(
            w.now(),
            &who,
            step,
            format_args!(
                "{name} bids {} tokens, {} days, {}% accuracy",
                b.terms.price, b.terms.delivery_days, b.terms.accuracy_pct
            ),
        );
    }

    let step = "3 select_bid";
    let (index, winner) = bids
        .iter()
        .enumerate()
        .min_by_key(|(i, b)| (b.terms.price, *i))
        .map(|(i, b)| (i as u32, *b))
        .expect("non-empty");
    w.transact(patient, MarketCall::SelectBid { auction_id, index }, tx_wait)
        .at(step)?;
    let lab_name = w.lab(winner.lab).map_or("?", |l| l.name.as_str()).to_string();
    log.log(
        w.now(),
        &who,
        step,
        format_args!("picked {lab_name} at {} tokens", winner.terms.price),
    );

    let step = "4 confirm";
    w.run_until(tx_wait, |w| auction_state(w, auction_id).at_least(AuctionState::Confirmed))
        .at(step)?;
    log.log(w.now(), &who, step, format_args!("{lab_name} confirmed the request"));

    let step = "5 pay";
    let (p0, l0) = (w.balance(&patient), w.balance(&winner.lab));
    w.transact(patient, MarketCall::Pay { auction_id }, tx_wait).at(step)?;
    let (p1, l1) = (w.balance(&patient), w.balance(&winner.lab));
    let price = winner.terms.price;
    if p0.checked_sub(price) != Some(p1) || l0 + price != l1 {
        return Err(fail(
            step,
            format_args!("balances moved {p0}->{p1} and {l0}->{l1}, expected a transfer of {price}"),
        ));
    }
    log.log(
        w.now(),
        &who,
        step,
        format_args!("patient balance {p0} -> {p1}, {lab_name} balance {l0} -> {l1}"),
    );

    let step = "6 sample";
    w.run_until(tx_wait, |w| auction_state(w, auction_id).at_least(AuctionState::KitSent))
        .at(step)?;
    log.log(w.now(), &who, step, "kit sent");
    w.run_until(tx_wait, |w| auction_state(w, auction_id).at_least(AuctionState::SampleReceived))
        .at(step)?;
    log.log(w.now(), &who, step, "sample received");

    let step = "7/upload";
    let upload_wait = cfg.oracle.deadline_ms + 2 * tx_wait;
    w.run_until(upload_wait, |w| {
        auction_state(w, auction_id) == AuctionState::ResultUploaded
            || add_request_for(w, winner.lab, auction_id).is_some_and(|r| r.status == RequestStatus::Failed)
    })
    .at(step)?;
    if let Some(r) = add_request_for(w, winner.lab, auction_id).filter(|r| r.status == RequestStatus::Failed) {
        return Err(fail(
            step,
            format_args!(
                "Oracle_Failed: add request {} got {} of {} answers needed by t={}",
                r.id,
                r.acks.len(),
                w.platform().oracle.quorum(),
                r.deadline
            ),
        ));
    }
    let add_request = w
        .platform()
        .market
        .auction(auction_id)
        .expect("exists")
        .result_request_id
        .expect("set with ResultUploaded");
    let cid = w.platform().oracle.request(add_request).at(step)?.finalized_value.clone();
    log.log(
        w.now(),
        &who,
        step,
        format_args!("sealed report stored as {}, request {add_request}", cid.unwrap_or_default()),
    );

    let step = "7/retrieve";
    let retriever = if cfg.inject.unauthorized_retriever {
        w.actor("helene/intruder").at(step)?.id
    } else {
        patient
    };
    let cat_request = w
        .transact(retriever, OracleCall::TriggerCat { add_request }, tx_wait)
        .at(step)?
        .id()
        .ok_or_else(|| fail(step, "no request id returned"))?;
    let status = wait_resolved(w, cat_request, upload_wait).at(step)?;
    if status != RequestStatus::Finalized {
        return Err(fail(step, format_args!("Oracle_Failed: cat request {cat_request}")));
    }
    let ciphertext = w
        .platform()
        .oracle
        .get_values(retriever, cat_request)
        .at(step)?
        .to_string();
    log.log(
        w.now(),
        &who,
        step,
        format_args!("request {cat_request} returned {} base64 chars", ciphertext.len()),
    );

    let step = "7/unseal";
    let produced = w
        .lab(winner.lab)
        .and_then(|l| l.offeror.report(auction_id))
        .ok_or_else(|| fail(step, "lab kept no report"))?;
    let password = if cfg.inject.wrong_password {
        w.patient_mut(idx).fortuna.random_password().at(step)?
    } else {
        produced.password.clone()
    };
    let envelope = envelope_from_base64(&ciphertext).at(step)?;
    let opened = unseal(&password, &envelope).at(step)?;
    log.log(
        w.now(),
        &who,
        step,
        format_args!("{} report bytes, {} signature bytes", opened.report.len(), opened.signature.len()),
    );

    let step = "7/verify";
    let lab_key = w.lab(winner.lab).expect("winner is a lab").offeror.verifying_key();
    if !verify_report(&lab_key, &opened.report, &opened.signature) {
        return Err(fail(step, "signature does not verify under the lab key"));
    }
    let report = TestReport::from_canonical(&opened.report).at(step)?;
    if report.lab_id != winner.lab {
        return Err(fail(step, "report names a different lab"));
    }
    if report.diagnostic != classify(report.antibody_gmfi) {
        return Err(fail(step, "diagnostic does not match the measured value"));
    }
    log.log(
        w.now(),
        &who,
        step,
        format_args!(
            "{}: antibody_gmfi {} -> {}, signature ok",
            report.test_id, report.antibody_gmfi, report.diagnostic
        ),
    );

    let step = "7/close";
    w.transact(patient, MarketCall::CloseAuction { auction_id }, tx_wait)
        .at(step)?;
    log.log(w.now(), &who, step, format_args!("auction {auction_id} closed"));

    Ok(E2eResult {
        patient,
        auction_id,
        lab: winner.lab,
        price,
        add_request,
        cat_request,
        report,
        report_bytes: opened.report,
        signature: opened.signature,
    })
}

/// Every patient completes a test, then the first company buys access to
/// the results through a data offer.
pub fn incentive(cfg: &ScenarioConfig) -> ScenarioRun<IncentiveResult> {
    let mut log = Transcript::default();
    let outcome = setup(cfg, &mut log).and_then(|mut w| run_incentive(&mut w, cfg, &mut log));
    ScenarioRun {
        transcript: log.lines,
        outcome,
    }
}

fn run_incentive(w: &mut World, cfg: &ScenarioConfig, log: &mut Transcript) -> Result<IncentiveResult, StepFailure> {
    let tx_wait = 10 * cfg.block_interval_ms;
    let mut results = Vec::new();
    for i in 0..w.patients().len() {
        results.push(run_e2e(w, cfg, i, log)?);
    }

    let step = "8 post_offer";
    if w.companies().is_empty() {
        return Err(fail(step, "no company configured"));
    }
    let company = w.companies()[0].actor.id;
    let company_name = w.companies()[0].name.clone();
    let inc = &cfg.incentive;
    let offer_id = w
        .transact(
            company,
            MarketCall::PostDataOffer {
                test_type: inc.test_type,
                diagnostic: inc.diagnostic,
                reward_per_patient: inc.reward_per_patient,
            },
            tx_wait,
        )
        .at(step)?
        .id()
        .ok_or_else(|| fail(step, "no offer id returned"))?;
    let wanted = inc.diagnostic.map_or("any".to_string(), |d| d.to_string());
    log.log(
        w.now(),
        "",
        step,
        format_args!(
            "{company_name} offers {} tokens per {} result ({wanted}), offer {offer_id}",
            inc.reward_per_patient, inc.test_type
        ),
    );

    let step = "9 settle_empty";
    let c0 = w.balance(&company);
    let r = w
        .transact(company, MarketCall::SettleOffer { offer_id }, tx_wait)
        .at(step)?;
    if r.id() != Some(0) || w.balance(&company) != c0 {
        return Err(fail(step, "settling with no acceptances moved funds"));
    }
    log.log(w.now(), "", step, "nobody accepted yet, settlement pays nobody");

    let step = "10 accept";
    let mut accepted = Vec::new();
    for (i, res) in results.iter().enumerate() {
        let name = cfg.patients[i].name.clone();
        let declared = res.report.diagnostic;
        if cfg.patients[i].test_type != inc.test_type || inc.diagnostic.is_some_and(|d| d != declared) {
            log.log(w.now(), "", step, format_args!("{name} does not qualify"));
            continue;
        }
        w.transact(res.patient, MarketCall::AcceptOffer { offer_id, declared }, tx_wait)
            .at(step)?;
        log.log(w.now(), "", step, format_args!("{name} accepts, declaring {declared}"));
        accepted.push(i);
    }

    let step = "11 grant_before_settle";
    if let Some(&first) = accepted.first() {
        let h = w
            .submit(
                results[first].patient,
                MarketCall::GrantAccess {
                    offer_id,
                    ciphertext: "early".into(),
                },
            )
            .at(step)?;
        let r = w.wait_receipt(&h, tx_wait).at(step)?;
        match r.status {
            Err(e) if e.contains("has not been paid") => {
                log.log(w.now(), "", step, format_args!("rejected: {e}"));
            }
            Err(e) => return Err(fail(step, format_args!("rejected for the wrong reason: {e}"))),
            Ok(_) => return Err(fail(step, "grant accepted before payment")),
        }
    }

    let step = "12 settle";
    let before: Vec<u64> = results.iter().map(|r| w.balance(&r.patient)).collect();
    let c0 = w.balance(&company);
    let r = w
        .transact(company, MarketCall::SettleOffer { offer_id }, tx_wait)
        .at(step)?;
    let paid = r.id().unwrap_or(0) as usize;
    let reward = inc.reward_per_patient;
    let c1 = w.balance(&company);
    let expected_cost = reward * accepted.len() as u64;
    if paid != accepted.len() || c0.checked_sub(expected_cost) != Some(c1) {
        return Err(fail(
            step,
            format_args!("paid {paid} patients, company {c0} -> {c1}; expected {} and -{expected_cost}", accepted.len()),
        ));
    }
    for (i, res) in results.iter().enumerate() {
        let gain = if accepted.contains(&i) { reward } else { 0 };
        if w.balance(&res.patient) != before[i] + gain {
            return Err(fail(step, format_args!("{} balance off", cfg.patients[i].name)));
        }
    }
    let settle_tx = (paid > 0).then_some(r.tx_hash);
    let offer = w.platform().market.offer(offer_id).at(step)?;
    if offer.settlements.values().any(|tx| Some(*tx) != settle_tx) {
        return Err(fail(step, "payments spread over several transactions"));
    }
    log.log(
        w.now(),
        "",
        step,
        format_args!("one batch transfer paid {paid} x {reward}; {company_name} {c0} -> {c1}"),
    );

    let step = "13 grant";
    let mut grants = Vec::new();
    for &i in &accepted {
        let res = &results[i];
        let member = w.patient_mut(i);
        let password = member.fortuna.random_password().at(step)?;
        let envelope = sealing::seal(&password, &res.report_bytes, &res.signature, &mut member.fortuna).at(step)?;
        let h = w
            .submit(
                res.patient,
                MarketCall::GrantAccess {
                    offer_id,
                    ciphertext: envelope_to_base64(&envelope),
                },
            )
            .at(step)?;
        grants.push((i, h, password));
    }
    let mut requests = Vec::new();
    for (i, h, password) in grants {
        let r = w.wait_receipt(&h, tx_wait).at(step)?;
        let req = match r.status {
            Ok(_) => r.id().ok_or_else(|| fail(step, "no request id returned"))?,
            Err(e) => return Err(fail(step, e)),
        };
        log.log(
            w.now(),
            "",
            step,
            format_args!("{} re-sealed the report for {company_name}, request {req}", cfg.patients[i].name),
        );
        requests.push((i, req, password));
    }

    let step = "14 company_read";
    let wait = cfg.oracle.deadline_ms + 2 * tx_wait;
    let mut reports_read = 0;
    for (i, add, password) in requests {
        if wait_resolved(w, add, wait).at(step)? != RequestStatus::Finalized {
            return Err(fail(step, format_args!("Oracle_Failed: grant request {add}")));
        }
        let cat = w
            .transact(company, OracleCall::TriggerCat { add_request: add }, tx_wait)
            .at(step)?
            .id()
            .ok_or_else(|| fail(step, "no request id returned"))?;
        if wait_resolved(w, cat, wait).at(step)? != RequestStatus::Finalized {
            return Err(fail(step, format_args!("Oracle_Failed: cat request {cat}")));
        }
        let text = w.platform().oracle.get_values(company, cat).at(step)?.to_string();
        let opened = unseal(&password, &envelope_from_base64(&text).at(step)?).at(step)?;
        let report = TestReport::from_canonical(&opened.report).at(step)?;
        let lab = w
            .lab(report.lab_id)
            .ok_or_else(|| fail(step, "report names an unknown lab"))?;
        if !verify_report(&lab.offeror.verifying_key(), &opened.report, &opened.signature) {
            return Err(fail(step, "signature does not verify"));
        }
        if report != results[i].report {
            return Err(fail(step, "report differs from the one the patient received"));
        }
        let declared = w.platform().market.offer(offer_id).at(step)?.acceptances[&results[i].patient];
        if report.diagnostic != declared {
            return Err(fail(step, "declared diagnostic does not match the signed report"));
        }
        log.log(
            w.now(),
            "",
            step,
            format_args!(
                "{}: {} from {} verified",
                cfg.patients[i].name, report.diagnostic, lab.name
            ),
        );
        reports_read += 1;
    }

    Ok(IncentiveResult {
        e2e: results,
        offer_id,
        paid,
        settle_tx,
        company_delta: c1 as i128 - c0 as i128,
        reports_read,
    })
}
