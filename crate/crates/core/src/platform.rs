//! The contract set hosted on the ledger: token, marketplace and oracle.

use crate::ledger::{ExecCtx, Output, Runtime};
use crate::marketplace::{MarketCall, Marketplace};
use crate::oracle::{OracleCall, OracleContract};
use crate::token::{Token, TokenCall};

pub const TARGET_TOKEN: &str = "token";
pub const TARGET_MARKET: &str = "market";
pub const TARGET_ORACLE: &str = "oracle";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlatformCall {
    Token(TokenCall),
    Market(MarketCall),
    Oracle(OracleCall),
}

impl PlatformCall {
    /// `(target, operation, args)`.
    pub fn encode(&self) -> (&'static str, &'static str, Vec<u8>) {
        match self {
            PlatformCall::Token(c) => {
                let (op, args) = c.encode();
                (TARGET_TOKEN, op, args)
            }
            PlatformCall::Market(c) => {
                let (op, args) = c.encode();
                (TARGET_MARKET, op, args)
            }
            PlatformCall::Oracle(c) => {
                let (op, args) = c.encode();
                (TARGET_ORACLE, op, args)
            }
        }
    }
}

impl From<TokenCall> for PlatformCall {
    fn from(c: TokenCall) -> Self {
        PlatformCall::Token(c)
    }
}

impl From<MarketCall> for PlatformCall {
    fn from(c: MarketCall) -> Self {
        PlatformCall::Market(c)
    }
}

impl From<OracleCall> for PlatformCall {
    fn from(c: OracleCall) -> Self {
        PlatformCall::Oracle(c)
    }
}

pub struct Platform {
    pub token: Token,
    pub market: Marketplace,
    pub oracle: OracleContract,
}

impl Platform {
    pub fn new(oracle: OracleContract) -> Self {
        Platform {
            token: Token::new(),
            market: Marketplace::new(),
            oracle,
        }
    }
}

impl Runtime for Platform {
    fn has_contract(&self, target: &str) -> bool {
        matches!(target, TARGET_TOKEN | TARGET_MARKET | TARGET_ORACLE)
    }

    fn execute(&mut self, ctx: &mut ExecCtx, target: &str, operation: &str, args: &[u8]) -> Result<Output, String> {
        match target {
            TARGET_TOKEN => {
                let call = TokenCall::decode(operation, args).map_err(|e| e.to_string())?;
                self.token.execute(ctx, call).map_err(|e| e.to_string())
            }
            TARGET_MARKET => {
                let call = MarketCall::decode(operation, args).map_err(|e| e.to_string())?;
                self.market
                    .execute(ctx, &mut self.token, &mut self.oracle, call)
                    .map_err(|e| e.to_string())
            }
            TARGET_ORACLE => {
                let call = OracleCall::decode(operation, args).map_err(|e| e.to_string())?;
                self.oracle.execute(ctx, call).map_err(|e| e.to_string())
            }
            other => Err(format!("unknown target {other}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{AccountId, Ledger};
    use crate::sealing::keypair_from_seed;

    #[test]
    fn dispatches_by_target() {
        let key = keypair_from_seed(b"admin");
        let admin = AccountId::from_public_key_bytes(key.verifying_key().as_bytes());
        let mut ledger = Ledger::new(Platform::new(OracleContract::new(admin, 30_000)));
        ledger.create_account(key.verifying_key().as_bytes()).unwrap();
        let calls: Vec<PlatformCall> = vec![
            TokenCall::Initialize { initial_supply: 10 }.into(),
            MarketCall::SettleOffer { offer_id: 0 }.into(),
            OracleCall::ExpireRequest { request_id: 0 }.into(),
        ];
        let hashes: Vec<_> = calls
            .iter()
            .map(|c| {
                let (t, op, args) = c.encode();
                ledger.submit(admin, t, op, args).unwrap()
            })
            .collect();
        assert!(ledger.submit(admin, "nope", "x", vec![]).is_err());
        ledger.advance(1000);
        assert!(ledger.receipt(&hashes[0]).unwrap().is_success());
        assert_eq!(ledger.runtime().token.total_supply(), 10);
        assert!(ledger.receipt(&hashes[1]).unwrap().status.as_ref().unwrap_err().contains("no offer"));
        assert!(ledger.receipt(&hashes[2]).unwrap().status.is_err());
    }
}
