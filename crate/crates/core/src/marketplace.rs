//! Test-request auctions and incentivized data offers.
//!
//! Auction lifecycle:
//!
//! ```text
//! Created -> Bidding -> Selected -> Confirmed -> Paid -> KitSent
//!         -> SampleReceived -> ResultUploaded -> Closed
//! Created | Bidding            -> Expired   (at or after expiry)
//! Created | Bidding | Selected -> Cancelled (by the patient)
//! ```
//!
//! Payment is a direct patient to lab token transfer and offer settlement
//! is a single batch transfer, both executed against the [`Token`] passed
//! in by the hosting runtime. Results and data grants are oracle add
//! requests. Like the token, every operation validates before mutating.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{AccountId, CodecError, Decoder, Encoder, ExecCtx, Output, TxHash};
use crate::oracle::{OracleContract, OracleError, RequestId, RequestKind, RequestStatus};
use crate::token::{Token, TokenError};
use crate::types::{Diagnostic, TestType};

pub const TOPIC_AUCTION_CREATED: &str = "AuctionCreated";
pub const TOPIC_BID_PLACED: &str = "BidPlaced";
pub const TOPIC_BID_SELECTED: &str = "BidSelected";
pub const TOPIC_REQUEST_CONFIRMED: &str = "RequestConfirmed";
pub const TOPIC_PAID: &str = "Paid";
pub const TOPIC_KIT_SENT: &str = "KitSent";
pub const TOPIC_SAMPLE_RECEIVED: &str = "SampleReceived";
pub const TOPIC_RESULT_AVAILABLE: &str = "ResultAvailable";
pub const TOPIC_AUCTION_CLOSED: &str = "AuctionClosed";
pub const TOPIC_AUCTION_EXPIRED: &str = "AuctionExpired";
pub const TOPIC_AUCTION_CANCELLED: &str = "AuctionCancelled";
pub const TOPIC_OFFER_POSTED: &str = "OfferPosted";
pub const TOPIC_OFFER_ACCEPTED: &str = "OfferAccepted";
pub const TOPIC_OFFER_SETTLED: &str = "OfferSettled";
pub const TOPIC_ACCESS_GRANTED: &str = "AccessGranted";

pub type AuctionId = u64;
pub type OfferId = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MarketError {
    #[error("expiry {expiry} is not after now {now}")]
    ExpiryNotInFuture { expiry: u64, now: u64 },
    #[error("no auction {0}")]
    UnknownAuction(AuctionId),
    #[error("no offer {0}")]
    UnknownOffer(OfferId),
    #[error("auction {id} is {state:?}, expected {expected}")]
    WrongState { id: AuctionId, state: AuctionState, expected: &'static str },
    #[error("auction {0} is past its expiry")]
    Expired(AuctionId),
    #[error("auction {id} expires at {expiry}")]
    NotYetExpired { id: AuctionId, expiry: u64 },
    #[error("accuracy {0}% is outside 0..=100")]
    BadAccuracy(u8),
    #[error("delivery_days must be at least 1")]
    BadDeliveryDays,
    #[error("{0} is not the auction patient")]
    NotPatient(AccountId),
    #[error("{0} is not the winning lab")]
    NotWinner(AccountId),
    #[error("bid index {0} out of range")]
    BadBidIndex(u32),
    #[error("{0} is not the offer company")]
    NotCompany(AccountId),
    #[error("{0} has no completed result of the requested type")]
    NotQualified(AccountId),
    #[error("declared diagnostic {declared} does not match the offer")]
    DiagnosticMismatch { declared: Diagnostic },
    #[error("{0} has not been paid for this offer")]
    NotSettled(AccountId),
    #[error("{0} already granted access")]
    AlreadyGranted(AccountId),
    #[error("oracle request {0} is not a finalized add")]
    ResultNotFinalized(RequestId),
    #[error("oracle request retriever {0} is not the patient")]
    RetrieverMismatch(AccountId),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("reward total overflows")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AuctionState {
    Created,
    Bidding,
    Selected,
    Confirmed,
    Paid,
    KitSent,
    SampleReceived,
    ResultUploaded,
    Closed,
    Expired,
    Cancelled,
}

impl AuctionState {
    /// Position on the main path; `None` for the side states.
    pub fn rank(self) -> Option<u8> {
        match self {
            AuctionState::Expired | AuctionState::Cancelled => None,
            s => Some(s as u8),
        }
    }

    pub fn at_least(self, other: AuctionState) -> bool {
        matches!((self.rank(), other.rank()), (Some(a), Some(b)) if a >= b)
    }

    pub fn is_edge(from: AuctionState, to: AuctionState) -> bool {
        use AuctionState::*;
        match (from, to) {
            (Created | Bidding, Expired) => true,
            (Created | Bidding | Selected, Cancelled) => true,
            (Closed | Expired | Cancelled, _) => false,
            (a, b) => b.rank() == a.rank().map(|r| r + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preferences {
    pub accuracy_pct: u8,
    pub delivery_days: u32,
    pub price: u64,
}

impl Preferences {
    fn validate(&self) -> Result<(), MarketError> {
        if self.accuracy_pct > 100 {
            return Err(MarketError::BadAccuracy(self.accuracy_pct));
        }
        if self.delivery_days == 0 {
            return Err(MarketError::BadDeliveryDays);
        }
        Ok(())
    }

    fn encode(&self, e: Encoder) -> Encoder {
        e.u8(self.accuracy_pct).u32(self.delivery_days).u64(self.price)
    }

    fn decode(d: &mut Decoder) -> Result<Self, CodecError> {
        Ok(Preferences {
            accuracy_pct: d.u8()?,
            delivery_days: d.u32()?,
            price: d.u64()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub lab: AccountId,
    pub terms: Preferences,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Auction {
    pub id: AuctionId,
    pub patient: AccountId,
    pub expiry: u64,
    pub test_type: TestType,
    pub prefs: Preferences,
    pub state: AuctionState,
    pub bids: Vec<Bid>,
    pub winner: Option<Bid>,
    pub payment_tx: Option<TxHash>,
    pub result_request_id: Option<RequestId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataOffer {
    pub id: OfferId,
    pub company: AccountId,
    pub test_type: TestType,
    /// `None` accepts any diagnostic.
    pub diagnostic: Option<Diagnostic>,
    pub reward_per_patient: u64,
    pub acceptances: BTreeMap<AccountId, Diagnostic>,
    pub settlements: BTreeMap<AccountId, TxHash>,
    pub grants: BTreeMap<AccountId, RequestId>,
}

impl DataOffer {
    pub fn unsettled(&self) -> Vec<AccountId> {
        self.acceptances
            .keys()
            .filter(|p| !self.settlements.contains_key(p))
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MarketCall {
    CreateAuction { test_type: TestType, prefs: Preferences, expiry: u64 },
    PlaceBid { auction_id: AuctionId, terms: Preferences },
    SelectBid { auction_id: AuctionId, index: u32 },
    ConfirmRequest { auction_id: AuctionId },
    Pay { auction_id: AuctionId },
    MarkKitSent { auction_id: AuctionId },
    MarkSampleReceived { auction_id: AuctionId },
    AttachResult { auction_id: AuctionId, request_id: RequestId },
    CloseAuction { auction_id: AuctionId },
    Cancel { auction_id: AuctionId },
    Expire { auction_id: AuctionId },
    PostDataOffer { test_type: TestType, diagnostic: Option<Diagnostic>, reward_per_patient: u64 },
    AcceptOffer { offer_id: OfferId, declared: Diagnostic },
    SettleOffer { offer_id: OfferId },
    GrantAccess { offer_id: OfferId, ciphertext: String },
}

const ANY_DIAGNOSTIC: u8 = 0xff;

fn test_type(d: &mut Decoder) -> Result<TestType, CodecError> {
    TestType::from_code(d.u8()?).ok_or(CodecError::InvalidValue("test type"))
}

fn diagnostic(d: &mut Decoder) -> Result<Diagnostic, CodecError> {
    Diagnostic::from_code(d.u8()?).ok_or(CodecError::InvalidValue("diagnostic"))
}

impl MarketCall {
    pub fn encode(&self) -> (&'static str, Vec<u8>) {
        let e = Encoder::new();
        match self {
            MarketCall::CreateAuction { test_type, prefs, expiry } => (
                "create_auction",
                prefs.encode(e.u8(test_type.code())).u64(*expiry).finish(),
            ),
            MarketCall::PlaceBid { auction_id, terms } => ("place_bid", terms.encode(e.u64(*auction_id)).finish()),
            MarketCall::SelectBid { auction_id, index } => ("select_bid", e.u64(*auction_id).u32(*index).finish()),
            MarketCall::ConfirmRequest { auction_id } => ("confirm_request", e.u64(*auction_id).finish()),
            MarketCall::Pay { auction_id } => ("pay", e.u64(*auction_id).finish()),
            MarketCall::MarkKitSent { auction_id } => ("mark_kit_sent", e.u64(*auction_id).finish()),
            MarketCall::MarkSampleReceived { auction_id } => ("mark_sample_received", e.u64(*auction_id).finish()),
            MarketCall::AttachResult { auction_id, request_id } => {
                ("attach_result", e.u64(*auction_id).u64(*request_id).finish())
            }
            MarketCall::CloseAuction { auction_id } => ("close_auction", e.u64(*auction_id).finish()),
            MarketCall::Cancel { auction_id } => ("cancel", e.u64(*auction_id).finish()),
            MarketCall::Expire { auction_id } => ("expire", e.u64(*auction_id).finish()),
            MarketCall::PostDataOffer {
                test_type,
                diagnostic,
                reward_per_patient,
            } => (
                "post_data_offer",
                e.u8(test_type.code())
                    .u8(diagnostic.map_or(ANY_DIAGNOSTIC, Diagnostic::code))
                    .u64(*reward_per_patient)
                    .finish(),
            ),
            MarketCall::AcceptOffer { offer_id, declared } => {
                ("accept_offer", e.u64(*offer_id).u8(declared.code()).finish())
            }
            MarketCall::SettleOffer { offer_id } => ("settle_offer", e.u64(*offer_id).finish()),
            MarketCall::GrantAccess { offer_id, ciphertext } => {
                ("grant_access", e.u64(*offer_id).str(ciphertext).finish())
            }
        }
    }

    pub fn decode(op: &str, args: &[u8]) -> Result<Self, CodecError> {
        let mut d = Decoder::new(args);
        let call = match op {
            "create_auction" => MarketCall::CreateAuction {
                test_type: test_type(&mut d)?,
                prefs: Preferences::decode(&mut d)?,
                expiry: d.u64()?,
            },
            "place_bid" => MarketCall::PlaceBid {
                auction_id: d.u64()?,
                terms: Preferences::decode(&mut d)?,
            },
            "select_bid" => MarketCall::SelectBid {
                auction_id: d.u64()?,
                index: d.u32()?,
            },
            "confirm_request" => MarketCall::ConfirmRequest { auction_id: d.u64()? },
            "pay" => MarketCall::Pay { auction_id: d.u64()? },
            "mark_kit_sent" => MarketCall::MarkKitSent { auction_id: d.u64()? },
            "mark_sample_received" => MarketCall::MarkSampleReceived { auction_id: d.u64()? },
            "attach_result" => MarketCall::AttachResult {
                auction_id: d.u64()?,
                request_id: d.u64()?,
            },
            "close_auction" => MarketCall::CloseAuction { auction_id: d.u64()? },
            "cancel" => MarketCall::Cancel { auction_id: d.u64()? },
            "expire" => MarketCall::Expire { auction_id: d.u64()? },
            "post_data_offer" => MarketCall::PostDataOffer {
                test_type: test_type(&mut d)?,
                diagnostic: match d.u8()? {
                    ANY_DIAGNOSTIC => None,
                    c => Some(Diagnostic::from_code(c).ok_or(CodecError::InvalidValue("diagnostic"))?),
                },
                reward_per_patient: d.u64()?,
            },
            "accept_offer" => MarketCall::AcceptOffer {
                offer_id: d.u64()?,
                declared: diagnostic(&mut d)?,
            },
            "settle_offer" => MarketCall::SettleOffer { offer_id: d.u64()? },
            "grant_access" => MarketCall::GrantAccess {
                offer_id: d.u64()?,
                ciphertext: d.str()?.to_string(),
            },
            other => return Err(CodecError::UnknownOperation(other.to_string())),
        };
        d.finish()?;
        Ok(call)
    }
}

#[derive(Default)]
pub struct Marketplace {
    auctions: BTreeMap<AuctionId, Auction>,
    offers: BTreeMap<OfferId, DataOffer>,
}

impl Marketplace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn auction(&self, id: AuctionId) -> Result<&Auction, MarketError> {
        self.auctions.get(&id).ok_or(MarketError::UnknownAuction(id))
    }

    pub fn auctions(&self) -> &BTreeMap<AuctionId, Auction> {
        &self.auctions
    }

    pub fn offer(&self, id: OfferId) -> Result<&DataOffer, MarketError> {
        self.offers.get(&id).ok_or(MarketError::UnknownOffer(id))
    }

    pub fn offers(&self) -> &BTreeMap<OfferId, DataOffer> {
        &self.offers
    }

    /// Auctions still accepting bids at `now`.
    pub fn open_auctions(&self, now: u64) -> impl Iterator<Item = &Auction> {
        self.auctions
            .values()
            .filter(move |a| a.state == AuctionState::Bidding && now < a.expiry)
    }

    pub fn execute(
        &mut self,
        ctx: &mut ExecCtx,
        token: &mut Token,
        oracle: &mut OracleContract,
        call: MarketCall,
    ) -> Result<Output, MarketError> {
        let none = |_| Output::None;
        match call {
            MarketCall::CreateAuction { test_type, prefs, expiry } => {
                self.create_auction(ctx, test_type, prefs, expiry).map(Output::Id)
            }
            MarketCall::PlaceBid { auction_id, terms } => self.place_bid(ctx, auction_id, terms).map(none),
            MarketCall::SelectBid { auction_id, index } => self.select_bid(ctx, auction_id, index).map(none),
            MarketCall::ConfirmRequest { auction_id } => self.confirm_request(ctx, auction_id).map(none),
            MarketCall::Pay { auction_id } => self.pay(ctx, token, auction_id).map(none),
            MarketCall::MarkKitSent { auction_id } => self.mark_kit_sent(ctx, auction_id).map(none),
            MarketCall::MarkSampleReceived { auction_id } => self.mark_sample_received(ctx, auction_id).map(none),
            MarketCall::AttachResult { auction_id, request_id } => {
                self.attach_result(ctx, oracle, auction_id, request_id).map(none)
            }
            MarketCall::CloseAuction { auction_id } => self.close_auction(ctx, auction_id).map(none),
            MarketCall::Cancel { auction_id } => self.cancel(ctx, auction_id).map(none),
            MarketCall::Expire { auction_id } => self.expire(ctx, auction_id).map(none),
            MarketCall::PostDataOffer {
                test_type,
                diagnostic,
                reward_per_patient,
            } => Ok(Output::Id(self.post_data_offer(ctx, test_type, diagnostic, reward_per_patient))),
            MarketCall::AcceptOffer { offer_id, declared } => self.accept_offer(ctx, offer_id, declared).map(none),
            MarketCall::SettleOffer { offer_id } => self.settle_offer(ctx, token, offer_id).map(|n| Output::Id(n as u64)),
            MarketCall::GrantAccess { offer_id, ciphertext } => {
                self.grant_access(ctx, oracle, offer_id, ciphertext).map(Output::Id)
            }
        }
    }

    fn get_in(&self, id: AuctionId, expected: AuctionState, name: &'static str) -> Result<&Auction, MarketError> {
        let a = self.auction(id)?;
        if a.state != expected {
            return Err(MarketError::WrongState {
                id,
                state: a.state,
                expected: name,
            });
        }
        Ok(a)
    }

    fn set_state(&mut self, id: AuctionId, to: AuctionState) -> &mut Auction {
        let a = self.auctions.get_mut(&id).expect("checked by caller");
        debug_assert!(AuctionState::is_edge(a.state, to), "{:?} -> {:?}", a.state, to);
        a.state = to;
        a
    }

    fn require_winner(&self, ctx: &ExecCtx, id: AuctionId, expected: AuctionState, name: &'static str) -> Result<(), MarketError> {
        let a = self.get_in(id, expected, name)?;
        match a.winner {
            Some(w) if w.lab == ctx.sender => Ok(()),
            _ => Err(MarketError::NotWinner(ctx.sender)),
        }
    }

    pub fn create_auction(
        &mut self,
        ctx: &mut ExecCtx,
        test_type: TestType,
        prefs: Preferences,
        expiry: u64,
    ) -> Result<AuctionId, MarketError> {
        if expiry <= ctx.now_ms {
            return Err(MarketError::ExpiryNotInFuture { expiry, now: ctx.now_ms });
        }
        prefs.validate()?;
        let id = self.auctions.len() as AuctionId;
        self.auctions.insert(
            id,
            Auction {
                id,
                patient: ctx.sender,
                expiry,
                test_type,
                prefs,
                state: AuctionState::Created,
                bids: Vec::new(),
                winner: None,
                payment_tx: None,
                result_request_id: None,
            },
        );
        // Creation opens bidding immediately.
        self.set_state(id, AuctionState::Bidding);
        ctx.emit(
            TOPIC_AUCTION_CREATED,
            Encoder::new()
                .u64(id)
                .account(&ctx.sender)
                .u8(test_type.code())
                .u64(expiry)
                .finish(),
        );
        Ok(id)
    }

    /// Repeat bids from one lab are kept as separate entries.
    pub fn place_bid(&mut self, ctx: &mut ExecCtx, id: AuctionId, terms: Preferences) -> Result<(), MarketError> {
        let a = self.get_in(id, AuctionState::Bidding, "Bidding")?;
        if ctx.now_ms >= a.expiry {
            return Err(MarketError::Expired(id));
        }
        terms.validate()?;
        let a = self.auctions.get_mut(&id).expect("checked");
        a.bids.push(Bid { lab: ctx.sender, terms });
        let index = (a.bids.len() - 1) as u32;
        ctx.emit(
            TOPIC_BID_PLACED,
            Encoder::new().u64(id).u32(index).account(&ctx.sender).u64(terms.price).finish(),
        );
        Ok(())
    }

    /// Allowed while bidding, also after expiry as long as nobody has
    /// expired the auction yet.
    pub fn select_bid(&mut self, ctx: &mut ExecCtx, id: AuctionId, index: u32) -> Result<(), MarketError> {
        let a = self.get_in(id, AuctionState::Bidding, "Bidding")?;
        if a.patient != ctx.sender {
            return Err(MarketError::NotPatient(ctx.sender));
        }
        let bid = *a.bids.get(index as usize).ok_or(MarketError::BadBidIndex(index))?;
        self.set_state(id, AuctionState::Selected).winner = Some(bid);
        ctx.emit(
            TOPIC_BID_SELECTED,
            Encoder::new().u64(id).u32(index).account(&bid.lab).finish(),
        );
        Ok(())
    }

    pub fn confirm_request(&mut self, ctx: &mut ExecCtx, id: AuctionId) -> Result<(), MarketError> {
        self.require_winner(ctx, id, AuctionState::Selected, "Selected")?;
        let patient = self.set_state(id, AuctionState::Confirmed).patient;
        ctx.emit(TOPIC_REQUEST_CONFIRMED, Encoder::new().u64(id).account(&patient).finish());
        Ok(())
    }

    pub fn pay(&mut self, ctx: &mut ExecCtx, token: &mut Token, id: AuctionId) -> Result<(), MarketError> {
        let a = self.get_in(id, AuctionState::Confirmed, "Confirmed")?;
        if a.patient != ctx.sender {
            return Err(MarketError::NotPatient(ctx.sender));
        }
        let winner = a.winner.expect("winner set from Selected on");
        token.transfer(ctx, a.patient, winner.lab, winner.terms.price)?;
        let tx = ctx.tx_hash;
        let a = self.set_state(id, AuctionState::Paid);
        a.payment_tx = Some(tx);
        let patient = a.patient;
        ctx.emit(
            TOPIC_PAID,
            Encoder::new()
                .u64(id)
                .account(&patient)
                .account(&winner.lab)
                .u64(winner.terms.price)
                .finish(),
        );
        Ok(())
    }

    pub fn mark_kit_sent(&mut self, ctx: &mut ExecCtx, id: AuctionId) -> Result<(), MarketError> {
        self.require_winner(ctx, id, AuctionState::Paid, "Paid")?;
        self.set_state(id, AuctionState::KitSent);
        ctx.emit(TOPIC_KIT_SENT, Encoder::new().u64(id).finish());
        Ok(())
    }

    pub fn mark_sample_received(&mut self, ctx: &mut ExecCtx, id: AuctionId) -> Result<(), MarketError> {
        self.require_winner(ctx, id, AuctionState::KitSent, "KitSent")?;
        self.set_state(id, AuctionState::SampleReceived);
        ctx.emit(TOPIC_SAMPLE_RECEIVED, Encoder::new().u64(id).finish());
        Ok(())
    }

    pub fn attach_result(
        &mut self,
        ctx: &mut ExecCtx,
        oracle: &OracleContract,
        id: AuctionId,
        request_id: RequestId,
    ) -> Result<(), MarketError> {
        self.require_winner(ctx, id, AuctionState::SampleReceived, "SampleReceived")?;
        let patient = self.auctions[&id].patient;
        let req = oracle.request(request_id)?;
        if req.kind != RequestKind::Add || req.status != RequestStatus::Finalized {
            return Err(MarketError::ResultNotFinalized(request_id));
        }
        if req.authorized_retriever != patient {
            return Err(MarketError::RetrieverMismatch(req.authorized_retriever));
        }
        self.set_state(id, AuctionState::ResultUploaded).result_request_id = Some(request_id);
        ctx.emit(
            TOPIC_RESULT_AVAILABLE,
            Encoder::new().u64(id).account(&patient).u64(request_id).finish(),
        );
        Ok(())
    }

    /// Patient acknowledges the result.
    pub fn close_auction(&mut self, ctx: &mut ExecCtx, id: AuctionId) -> Result<(), MarketError> {
        let a = self.get_in(id, AuctionState::ResultUploaded, "ResultUploaded")?;
        if a.patient != ctx.sender {
            return Err(MarketError::NotPatient(ctx.sender));
        }
        self.set_state(id, AuctionState::Closed);
        ctx.emit(TOPIC_AUCTION_CLOSED, Encoder::new().u64(id).finish());
        Ok(())
    }

    pub fn cancel(&mut self, ctx: &mut ExecCtx, id: AuctionId) -> Result<(), MarketError> {
        let a = self.auction(id)?;
        if a.patient != ctx.sender {
            return Err(MarketError::NotPatient(ctx.sender));
        }
        if !AuctionState::is_edge(a.state, AuctionState::Cancelled) {
            return Err(MarketError::WrongState {
                id,
                state: a.state,
                expected: "Created, Bidding or Selected",
            });
        }
        self.set_state(id, AuctionState::Cancelled);
        ctx.emit(TOPIC_AUCTION_CANCELLED, Encoder::new().u64(id).finish());
        Ok(())
    }

    /// Anyone may expire an auction that never got past bidding.
    pub fn expire(&mut self, ctx: &mut ExecCtx, id: AuctionId) -> Result<(), MarketError> {
        let a = self.auction(id)?;
        if !AuctionState::is_edge(a.state, AuctionState::Expired) {
            return Err(MarketError::WrongState {
                id,
                state: a.state,
                expected: "Created or Bidding",
            });
        }
        if ctx.now_ms < a.expiry {
            return Err(MarketError::NotYetExpired { id, expiry: a.expiry });
        }
        self.set_state(id, AuctionState::Expired);
        ctx.emit(TOPIC_AUCTION_EXPIRED, Encoder::new().u64(id).finish());
        Ok(())
    }

    pub fn post_data_offer(
        &mut self,
        ctx: &mut ExecCtx,
        test_type: TestType,
        diagnostic: Option<Diagnostic>,
        reward_per_patient: u64,
    ) -> OfferId {
        let id = self.offers.len() as OfferId;
        self.offers.insert(
            id,
            DataOffer {
                id,
                company: ctx.sender,
                test_type,
                diagnostic,
                reward_per_patient,
                acceptances: BTreeMap::new(),
                settlements: BTreeMap::new(),
                grants: BTreeMap::new(),
            },
        );
        ctx.emit(
            TOPIC_OFFER_POSTED,
            Encoder::new()
                .u64(id)
                .account(&ctx.sender)
                .u8(test_type.code())
                .u8(diagnostic.map_or(ANY_DIAGNOSTIC, Diagnostic::code))
                .u64(reward_per_patient)
                .finish(),
        );
        id
    }

    /// The diagnostic is declared by the patient; the company checks it
    /// against the signed report it later receives. Re-accepting is a no-op.
    pub fn accept_offer(&mut self, ctx: &mut ExecCtx, offer_id: OfferId, declared: Diagnostic) -> Result<(), MarketError> {
        let offer = self.offer(offer_id)?;
        let patient = ctx.sender;
        if offer.acceptances.contains_key(&patient) {
            return Ok(());
        }
        let qualifies = self.auctions.values().any(|a| {
            a.patient == patient && a.test_type == offer.test_type && a.state.at_least(AuctionState::ResultUploaded)
        });
        if !qualifies {
            return Err(MarketError::NotQualified(patient));
        }
        if offer.diagnostic.is_some_and(|d| d != declared) {
            return Err(MarketError::DiagnosticMismatch { declared });
        }
        self.offers
            .get_mut(&offer_id)
            .expect("checked")
            .acceptances
            .insert(patient, declared);
        ctx.emit(TOPIC_OFFER_ACCEPTED, Encoder::new().u64(offer_id).account(&patient).finish());
        Ok(())
    }

    /// Pays every accepted but unpaid patient in one batch transfer and
    /// returns how many were paid. With nobody to pay it does nothing.
    pub fn settle_offer(&mut self, ctx: &mut ExecCtx, token: &mut Token, offer_id: OfferId) -> Result<usize, MarketError> {
        let offer = self.offer(offer_id)?;
        if offer.company != ctx.sender {
            return Err(MarketError::NotCompany(ctx.sender));
        }
        let payees = offer.unsettled();
        if payees.is_empty() {
            return Ok(0);
        }
        let reward = offer.reward_per_patient;
        reward.checked_mul(payees.len() as u64).ok_or(MarketError::Overflow)?;
        let legs: Vec<(AccountId, u64)> = payees.iter().map(|p| (*p, reward)).collect();
        token.transfer_batch(ctx, offer.company, &legs)?;
        let tx = ctx.tx_hash;
        let offer = self.offers.get_mut(&offer_id).expect("checked");
        for p in &payees {
            offer.settlements.insert(*p, tx);
        }
        ctx.emit(
            TOPIC_OFFER_SETTLED,
            Encoder::new()
                .u64(offer_id)
                .u32(payees.len() as u32)
                .u64(reward * payees.len() as u64)
                .finish(),
        );
        Ok(payees.len())
    }

    /// The patient re-seals their report off-chain under a password shared
    /// with the company and publishes it through a new oracle add request
    /// readable only by the company.
    pub fn grant_access(
        &mut self,
        ctx: &mut ExecCtx,
        oracle: &mut OracleContract,
        offer_id: OfferId,
        ciphertext: String,
    ) -> Result<RequestId, MarketError> {
        let offer = self.offer(offer_id)?;
        let patient = ctx.sender;
        if !offer.settlements.contains_key(&patient) {
            return Err(MarketError::NotSettled(patient));
        }
        if offer.grants.contains_key(&patient) {
            return Err(MarketError::AlreadyGranted(patient));
        }
        let company = offer.company;
        let request_id = oracle.trigger_add(ctx, ciphertext, company)?;
        self.offers
            .get_mut(&offer_id)
            .expect("checked")
            .grants
            .insert(patient, request_id);
        ctx.emit(
            TOPIC_ACCESS_GRANTED,
            Encoder::new().u64(offer_id).account(&patient).u64(request_id).finish(),
        );
        Ok(request_id)
    }
}
