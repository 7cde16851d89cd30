//! A simulation populated with the configured patients, labs and
//! companies. Labs run as automated offerors that react to each new block.

use std::sync::Arc;

use crate::fortuna::Fortuna;
use crate::labsim::{AntibodyDistribution, Offeror};
use crate::ledger::{AccountId, Receipt, TxHash};
use crate::platform::{Platform, PlatformCall};
use crate::sim::{Actor, SimError, Simulation};
use crate::token::TokenCall;

use super::{seeded_fortuna, seeded_rng, HarnessError, ScenarioConfig};

pub struct Member {
    pub name: String,
    pub actor: Actor,
    /// Off-chain randomness for passwords and envelope nonces.
    pub fortuna: Fortuna,
}

pub struct Lab {
    pub name: String,
    pub offeror: Offeror,
}

pub struct World {
    sim: Simulation,
    patients: Vec<Member>,
    companies: Vec<Member>,
    labs: Vec<Lab>,
    blocks_seen: usize,
}

impl World {
    /// Sets up the platform and funds every patient and company from the
    /// admin account.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let dist = Arc::new(cfg.load_distribution()?);
        let mut sim = Simulation::new(&cfg.sim_config())?;
        let member = |sim: &mut Simulation, role: &str, name: &str| -> Result<Member, HarnessError> {
            Ok(Member {
                name: name.to_string(),
                actor: sim.actor(&format!("helene/{role}/{name}"))?,
                fortuna: seeded_fortuna(cfg.seed, &format!("{role}/{name}/fortuna")),
            })
        };
        let patients = cfg
            .patients
            .iter()
            .map(|p| member(&mut sim, "patient", &p.name))
            .collect::<Result<Vec<_>, _>>()?;
        let companies = cfg
            .companies
            .iter()
            .map(|c| member(&mut sim, "company", &c.name))
            .collect::<Result<Vec<_>, _>>()?;
        let labs = cfg
            .labs
            .iter()
            .map(|l| lab(&mut sim, cfg.seed, &l.name, &l.policy, &dist))
            .collect::<Result<Vec<_>, _>>()?;

        let admin = sim.admin().id;
        let funding: Vec<(AccountId, u64)> = patients
            .iter()
            .zip(&cfg.patients)
            .map(|(m, p)| (m.actor.id, p.tokens))
            .chain(companies.iter().zip(&cfg.companies).map(|(m, c)| (m.actor.id, c.tokens)))
            .filter(|(_, amount)| *amount > 0)
            .collect();
        let mut hashes = Vec::new();
        for (to, amount) in funding {
            hashes.push(sim.submit(admin, TokenCall::Transfer { from: admin, to, amount })?);
        }
        for h in hashes {
            let r = sim.wait_receipt(&h, 10 * cfg.block_interval_ms)?;
            if let Err(e) = r.status {
                return Err(SimError::Setup(format!("funding: {e}")).into());
            }
        }
        let blocks_seen = sim.ledger().blocks().len();
        Ok(World {
            sim,
            patients,
            companies,
            labs,
            blocks_seen,
        })
    }

    pub fn sim(&self) -> &Simulation {
        &self.sim
    }

    pub fn platform(&self) -> &Platform {
        self.sim.platform()
    }

    pub fn now(&self) -> u64 {
        self.sim.now()
    }

    pub fn patients(&self) -> &[Member] {
        &self.patients
    }

    pub fn patient_mut(&mut self, i: usize) -> &mut Member {
        &mut self.patients[i]
    }

    pub fn companies(&self) -> &[Member] {
        &self.companies
    }

    pub fn company_mut(&mut self, i: usize) -> &mut Member {
        &mut self.companies[i]
    }

    pub fn labs(&self) -> &[Lab] {
        &self.labs
    }

    pub fn lab(&self, account: AccountId) -> Option<&Lab> {
        self.labs.iter().find(|l| l.offeror.id() == account)
    }

    /// Registers an extra account outside the configured roster.
    pub fn actor(&mut self, label: &str) -> Result<Actor, HarnessError> {
        Ok(self.sim.actor(label)?)
    }

    pub fn balance(&self, account: &AccountId) -> u64 {
        self.platform().token.balance_of(account)
    }

    pub fn submit(&mut self, sender: AccountId, call: impl Into<PlatformCall>) -> Result<TxHash, HarnessError> {
        Ok(self.sim.submit(sender, call)?)
    }

    /// One simulation step; after a new block every lab gets to act.
    pub fn step(&mut self) -> Result<u64, HarnessError> {
        let t = self.sim.step()?;
        if self.sim.ledger().blocks().len() != self.blocks_seen {
            self.blocks_seen = self.sim.ledger().blocks().len();
            for i in 0..self.labs.len() {
                let calls = self.labs[i].offeror.step(self.sim.platform(), t)?;
                let id = self.labs[i].offeror.id();
                for call in calls {
                    self.sim.submit(id, call)?;
                }
            }
        }
        Ok(t)
    }

    pub fn run_until(&mut self, max_ms: u64, mut done: impl FnMut(&World) -> bool) -> Result<u64, HarnessError> {
        let limit = self.now() + max_ms;
        while !done(self) {
            let next_block = self.sim.ledger().next_block_time();
            if next_block > limit && self.sim.storage().next_delivery().is_none_or(|d| d > limit) {
                return Err(SimError::Timeout(limit).into());
            }
            self.step()?;
        }
        Ok(self.now())
    }

    pub fn wait_receipt(&mut self, hash: &TxHash, max_ms: u64) -> Result<Receipt, HarnessError> {
        self.run_until(max_ms, |w| w.sim.receipt(hash).is_some())?;
        Ok(self.sim.receipt(hash).expect("just checked").clone())
    }

    /// Submits and waits for inclusion; a failed call becomes an error.
    pub fn transact(&mut self, sender: AccountId, call: impl Into<PlatformCall>, max_ms: u64) -> Result<Receipt, HarnessError> {
        let h = self.submit(sender, call)?;
        let r = self.wait_receipt(&h, max_ms)?;
        match &r.status {
            Ok(_) => Ok(r),
            Err(e) => Err(SimError::TxFailed(e.clone()).into()),
        }
    }
}

fn lab(
    sim: &mut Simulation,
    seed: u64,
    name: &str,
    policy: &crate::labsim::OfferorPolicy,
    dist: &Arc<AntibodyDistribution>,
) -> Result<Lab, HarnessError> {
    let actor = sim.actor(&format!("helene/lab/{name}"))?;
    let offeror = Offeror::new(
        actor.key,
        policy.clone(),
        Arc::clone(dist),
        seeded_rng(seed, &format!("lab/{name}/rng")),
        seeded_fortuna(seed, &format!("lab/{name}/fortuna")),
    )?;
    Ok(Lab {
        name: name.to_string(),
        offeror,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn funds_members() {
        let cfg = ScenarioConfig::default();
        let w = World::new(&cfg).unwrap();
        assert_eq!(w.patients().len(), 3);
        assert_eq!(w.labs().len(), 2);
        for p in w.patients() {
            assert_eq!(w.balance(&p.actor.id), 200);
        }
        assert_eq!(w.balance(&w.companies()[0].actor.id), 100);
        let admin = w.sim().admin().id;
        assert_eq!(w.balance(&admin), 1_000_000 - 700);
    }
}
