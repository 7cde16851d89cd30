//! Platform token: balances with batch transfers, controller forced
//! transfers, mint/burn, role delegation by the deployer, treasury
//! acquisition and a document registry. Partitions and holder-approved
//! operators are intentionally absent.
//!
//! Every operation validates fully before touching state, so a returned
//! error always means nothing changed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{AccountId, CodecError, Decoder, Encoder, ExecCtx, Output};

pub const TOPIC_TRANSFER: &str = "Transfer";
pub const TOPIC_BATCH_TRANSFER: &str = "BatchTransfer";
pub const TOPIC_CONTROLLER_TRANSFER: &str = "ControllerTransfer";
pub const TOPIC_MINT: &str = "Mint";
pub const TOPIC_BURN: &str = "Burn";
pub const TOPIC_DOCUMENT_SET: &str = "DocumentSet";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenError {
    #[error("token already initialized")]
    AlreadyInitialized,
    #[error("token not initialized")]
    NotInitialized,
    #[error("caller {caller} is not the holder {from}")]
    NotHolder { caller: AccountId, from: AccountId },
    #[error("insufficient balance: {account} holds {balance}, needs {needed}")]
    InsufficientBalance {
        account: AccountId,
        balance: u64,
        needed: u128,
    },
    #[error("{0} is not a controller")]
    NotController(AccountId),
    #[error("{0} is not a minter")]
    NotMinter(AccountId),
    #[error("{0} is not the deployer")]
    NotDeployer(AccountId),
    #[error("{0} may not set documents")]
    NotDocumentAuthority(AccountId),
    #[error("batch has no recipients")]
    EmptyBatch,
    #[error("balance or supply overflow")]
    Overflow,
    #[error("no document named {0:?}")]
    UnknownDocument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Controller,
    Minter,
}

impl Role {
    fn code(self) -> u8 {
        match self {
            Role::Controller => 0,
            Role::Minter => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self, CodecError> {
        match c {
            0 => Ok(Role::Controller),
            1 => Ok(Role::Minter),
            _ => Err(CodecError::InvalidValue("role")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub name: String,
    pub uri: String,
    pub content_hash: [u8; 32],
    pub set_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Token {
    deployer: Option<AccountId>,
    balances: BTreeMap<AccountId, u64>,
    total_supply: u64,
    controllers: BTreeSet<AccountId>,
    minters: BTreeSet<AccountId>,
    documents: BTreeMap<String, DocumentRecord>,
}

/// Encoded contract calls. The caller is always the transaction sender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenCall {
    Initialize { initial_supply: u64 },
    Transfer { from: AccountId, to: AccountId, amount: u64 },
    TransferBatch { from: AccountId, legs: Vec<(AccountId, u64)> },
    ControllerTransfer { from: AccountId, to: AccountId, amount: u64 },
    Mint { to: AccountId, amount: u64 },
    Burn { from: AccountId, amount: u64 },
    GrantPrivilege { account: AccountId, role: Role },
    RevokePrivilege { account: AccountId, role: Role },
    Acquire { amount: u64 },
    SetDocument { name: String, uri: String, content_hash: [u8; 32] },
}

impl TokenCall {
    pub fn encode(&self) -> (&'static str, Vec<u8>) {
        let e = Encoder::new();
        match self {
            TokenCall::Initialize { initial_supply } => ("initialize", e.u64(*initial_supply).finish()),
            TokenCall::Transfer { from, to, amount } => {
                ("transfer", e.account(from).account(to).u64(*amount).finish())
            }
            TokenCall::TransferBatch { from, legs } => {
                let mut e = e.account(from).u32(legs.len() as u32);
                for (to, amount) in legs {
                    e = e.account(to).u64(*amount);
                }
                ("transfer_batch", e.finish())
            }
            TokenCall::ControllerTransfer { from, to, amount } => (
                "controller_transfer",
                e.account(from).account(to).u64(*amount).finish(),
            ),
            TokenCall::Mint { to, amount } => ("mint", e.account(to).u64(*amount).finish()),
            TokenCall::Burn { from, amount } => ("burn", e.account(from).u64(*amount).finish()),
            TokenCall::GrantPrivilege { account, role } => {
                ("grant_privilege", e.account(account).u8(role.code()).finish())
            }
            TokenCall::RevokePrivilege { account, role } => {
                ("revoke_privilege", e.account(account).u8(role.code()).finish())
            }
            TokenCall::Acquire { amount } => ("acquire", e.u64(*amount).finish()),
            TokenCall::SetDocument {
                name,
                uri,
                content_hash,
            } => ("set_document", e.str(name).str(uri).hash(content_hash).finish()),
        }
    }

    pub fn decode(op: &str, args: &[u8]) -> Result<Self, CodecError> {
        let mut d = Decoder::new(args);
        let call = match op {
            "initialize" => TokenCall::Initialize {
                initial_supply: d.u64()?,
            },
            "transfer" => TokenCall::Transfer {
                from: d.account()?,
                to: d.account()?,
                amount: d.u64()?,
            },
            "transfer_batch" => {
                let from = d.account()?;
                let n = d.u32()? as usize;
                let mut legs = Vec::with_capacity(n.min(4096));
                for _ in 0..n {
                    legs.push((d.account()?, d.u64()?));
                }
                TokenCall::TransferBatch { from, legs }
            }
            "controller_transfer" => TokenCall::ControllerTransfer {
                from: d.account()?,
                to: d.account()?,
                amount: d.u64()?,
            },
            "mint" => TokenCall::Mint {
                to: d.account()?,
                amount: d.u64()?,
            },
            "burn" => TokenCall::Burn {
                from: d.account()?,
                amount: d.u64()?,
            },
            "grant_privilege" => TokenCall::GrantPrivilege {
                account: d.account()?,
                role: Role::from_code(d.u8()?)?,
            },
            "revoke_privilege" => TokenCall::RevokePrivilege {
                account: d.account()?,
                role: Role::from_code(d.u8()?)?,
            },
            "acquire" => TokenCall::Acquire { amount: d.u64()? },
            "set_document" => TokenCall::SetDocument {
                name: d.str()?.to_string(),
                uri: d.str()?.to_string(),
                content_hash: d.hash()?,
            },
            other => return Err(CodecError::UnknownOperation(other.to_string())),
        };
        d.finish()?;
        Ok(call)
    }
}

impl Token {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn deployer(&self) -> Option<AccountId> {
        self.deployer
    }

    pub fn balance_of(&self, account: &AccountId) -> u64 {
        self.balances.get(account).copied().unwrap_or(0)
    }

    pub fn balances(&self) -> &BTreeMap<AccountId, u64> {
        &self.balances
    }

    pub fn total_supply(&self) -> u64 {
        self.total_supply
    }

    pub fn is_controller(&self, account: &AccountId) -> bool {
        self.controllers.contains(account)
    }

    pub fn is_minter(&self, account: &AccountId) -> bool {
        self.minters.contains(account)
    }

    pub fn document(&self, name: &str) -> Result<&DocumentRecord, TokenError> {
        self.documents
            .get(name)
            .ok_or_else(|| TokenError::UnknownDocument(name.to_string()))
    }

    pub fn execute(&mut self, ctx: &mut ExecCtx, call: TokenCall) -> Result<Output, TokenError> {
        match call {
            TokenCall::Initialize { initial_supply } => self.initialize(ctx, initial_supply),
            TokenCall::Transfer { from, to, amount } => self.transfer(ctx, from, to, amount),
            TokenCall::TransferBatch { from, legs } => self.transfer_batch(ctx, from, &legs),
            TokenCall::ControllerTransfer { from, to, amount } => {
                self.controller_transfer(ctx, from, to, amount)
            }
            TokenCall::Mint { to, amount } => self.mint(ctx, to, amount),
            TokenCall::Burn { from, amount } => self.burn(ctx, from, amount),
            TokenCall::GrantPrivilege { account, role } => self.grant_privilege(ctx, account, role),
            TokenCall::RevokePrivilege { account, role } => self.revoke_privilege(ctx, account, role),
            TokenCall::Acquire { amount } => self.acquire(ctx, amount),
            TokenCall::SetDocument {
                name,
                uri,
                content_hash,
            } => self.set_document(ctx, name, uri, content_hash),
        }
        .map(|_| Output::None)
    }

    fn require_init(&self) -> Result<AccountId, TokenError> {
        self.deployer.ok_or(TokenError::NotInitialized)
    }

    /// The caller becomes deployer: treasury holder, first minter and
    /// first controller.
    pub fn initialize(&mut self, ctx: &mut ExecCtx, initial_supply: u64) -> Result<(), TokenError> {
        if self.deployer.is_some() {
            return Err(TokenError::AlreadyInitialized);
        }
        let d = ctx.sender;
        self.deployer = Some(d);
        self.total_supply = initial_supply;
        if initial_supply > 0 {
            self.balances.insert(d, initial_supply);
        }
        self.minters.insert(d);
        self.controllers.insert(d);
        ctx.emit(TOPIC_MINT, mint_payload(&d, &d, initial_supply));
        Ok(())
    }

    /// Checks that `moves` (debits then credits) can all be applied, then
    /// applies them. Supply is untouched.
    fn move_funds(&mut self, from: AccountId, legs: &[(AccountId, u64)]) -> Result<(), TokenError> {
        let needed: u128 = legs.iter().map(|&(_, a)| a as u128).sum();
        let balance = self.balance_of(&from);
        if needed > balance as u128 {
            return Err(TokenError::InsufficientBalance {
                account: from,
                balance,
                needed,
            });
        }
        let mut after: BTreeMap<AccountId, u128> = BTreeMap::new();
        after.insert(from, (balance as u128) - needed);
        for &(to, amount) in legs {
            let cur = *after.entry(to).or_insert(self.balance_of(&to) as u128);
            after.insert(to, cur + amount as u128);
        }
        if after.values().any(|&v| v > u64::MAX as u128) {
            return Err(TokenError::Overflow);
        }
        for (acct, v) in after {
            if v == 0 {
                self.balances.remove(&acct);
            } else {
                self.balances.insert(acct, v as u64);
            }
        }
        Ok(())
    }

    pub fn transfer(
        &mut self,
        ctx: &mut ExecCtx,
        from: AccountId,
        to: AccountId,
        amount: u64,
    ) -> Result<(), TokenError> {
        self.require_init()?;
        if ctx.sender != from {
            return Err(TokenError::NotHolder {
                caller: ctx.sender,
                from,
            });
        }
        self.move_funds(from, &[(to, amount)])?;
        ctx.emit(TOPIC_TRANSFER, transfer_payload(&from, &to, amount));
        Ok(())
    }

    /// All legs or none; one `BatchTransfer` event.
    pub fn transfer_batch(
        &mut self,
        ctx: &mut ExecCtx,
        from: AccountId,
        legs: &[(AccountId, u64)],
    ) -> Result<(), TokenError> {
        self.require_init()?;
        if ctx.sender != from {
            return Err(TokenError::NotHolder {
                caller: ctx.sender,
                from,
            });
        }
        if legs.is_empty() {
            return Err(TokenError::EmptyBatch);
        }
        self.move_funds(from, legs)?;
        let (_, payload) = TokenCall::TransferBatch {
            from,
            legs: legs.to_vec(),
        }
        .encode();
        ctx.emit(TOPIC_BATCH_TRANSFER, payload);
        Ok(())
    }

    pub fn controller_transfer(
        &mut self,
        ctx: &mut ExecCtx,
        from: AccountId,
        to: AccountId,
        amount: u64,
    ) -> Result<(), TokenError> {
        self.require_init()?;
        if !self.is_controller(&ctx.sender) {
            return Err(TokenError::NotController(ctx.sender));
        }
        self.move_funds(from, &[(to, amount)])?;
        ctx.emit(
            TOPIC_CONTROLLER_TRANSFER,
            Encoder::new()
                .account(&ctx.sender)
                .account(&from)
                .account(&to)
                .u64(amount)
                .finish(),
        );
        Ok(())
    }

    pub fn mint(&mut self, ctx: &mut ExecCtx, to: AccountId, amount: u64) -> Result<(), TokenError> {
        self.require_init()?;
        if !self.is_minter(&ctx.sender) {
            return Err(TokenError::NotMinter(ctx.sender));
        }
        let supply = self.total_supply.checked_add(amount).ok_or(TokenError::Overflow)?;
        let bal = self.balance_of(&to).checked_add(amount).ok_or(TokenError::Overflow)?;
        self.total_supply = supply;
        if bal > 0 {
            self.balances.insert(to, bal);
        }
        ctx.emit(TOPIC_MINT, mint_payload(&ctx.sender, &to, amount));
        Ok(())
    }

    pub fn burn(&mut self, ctx: &mut ExecCtx, from: AccountId, amount: u64) -> Result<(), TokenError> {
        self.require_init()?;
        if !self.is_minter(&ctx.sender) {
            return Err(TokenError::NotMinter(ctx.sender));
        }
        let balance = self.balance_of(&from);
        if amount > balance {
            return Err(TokenError::InsufficientBalance {
                account: from,
                balance,
                needed: amount as u128,
            });
        }
        self.total_supply -= amount;
        if balance == amount {
            self.balances.remove(&from);
        } else {
            self.balances.insert(from, balance - amount);
        }
        ctx.emit(TOPIC_BURN, mint_payload(&ctx.sender, &from, amount));
        Ok(())
    }

    fn require_deployer(&self, caller: AccountId) -> Result<(), TokenError> {
        if self.require_init()? != caller {
            return Err(TokenError::NotDeployer(caller));
        }
        Ok(())
    }

    fn role_set(&mut self, role: Role) -> &mut BTreeSet<AccountId> {
        match role {
            Role::Controller => &mut self.controllers,
            Role::Minter => &mut self.minters,
        }
    }

    pub fn grant_privilege(
        &mut self,
        ctx: &mut ExecCtx,
        account: AccountId,
        role: Role,
    ) -> Result<(), TokenError> {
        self.require_deployer(ctx.sender)?;
        self.role_set(role).insert(account);
        Ok(())
    }

    pub fn revoke_privilege(
        &mut self,
        ctx: &mut ExecCtx,
        account: AccountId,
        role: Role,
    ) -> Result<(), TokenError> {
        self.require_deployer(ctx.sender)?;
        self.role_set(role).remove(&account);
        Ok(())
    }

    /// Free transfer from the deployer treasury to the caller.
    pub fn acquire(&mut self, ctx: &mut ExecCtx, amount: u64) -> Result<(), TokenError> {
        let treasury = self.require_init()?;
        self.move_funds(treasury, &[(ctx.sender, amount)])?;
        ctx.emit(TOPIC_TRANSFER, transfer_payload(&treasury, &ctx.sender, amount));
        Ok(())
    }

    pub fn set_document(
        &mut self,
        ctx: &mut ExecCtx,
        name: String,
        uri: String,
        content_hash: [u8; 32],
    ) -> Result<(), TokenError> {
        let deployer = self.require_init()?;
        if ctx.sender != deployer && !self.is_controller(&ctx.sender) {
            return Err(TokenError::NotDocumentAuthority(ctx.sender));
        }
        let (_, payload) = TokenCall::SetDocument {
            name: name.clone(),
            uri: uri.clone(),
            content_hash,
        }
        .encode();
        ctx.emit(TOPIC_DOCUMENT_SET, Encoder::new().bytes(&payload).u64(ctx.now_ms).finish());
        self.documents.insert(
            name.clone(),
            DocumentRecord {
                name,
                uri,
                content_hash,
                set_at: ctx.now_ms,
            },
        );
        Ok(())
    }
}

fn transfer_payload(from: &AccountId, to: &AccountId, amount: u64) -> Vec<u8> {
    Encoder::new().account(from).account(to).u64(amount).finish()
}

fn mint_payload(by: &AccountId, account: &AccountId, amount: u64) -> Vec<u8> {
    Encoder::new().account(by).account(account).u64(amount).finish()
}
