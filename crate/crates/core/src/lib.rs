pub mod auth;
pub mod fortuna;
pub mod harness;
pub mod labsim;
pub mod ledger;
pub mod marketplace;
pub mod nist;
pub mod oracle;
pub mod platform;
pub mod sealing;
pub mod sim;
pub mod storage;
pub mod token;
pub mod types;
