use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use super::saturate::{Analysis, Prepared};
use super::{degeneralize_gbdpn, Bdpn, EngineError, Target};
use crate::caret::Formula;
use crate::dpn::{Dpn, GlobalConfig, LocalConfig};
use crate::product::{build_product, Gbdpn, Label, ProdControl, ProductError, Sizes};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Product(#[from] ProductError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("configuration refers to unknown process {0}")]
    Config(usize),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CheckOptions {
    /// Analyse the network with a bottom marker so stacks never run empty.
    pub stutter: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigWitness {
    pub config: String,
    #[serde(skip)]
    pub local: LocalConfig,
    /// Initial atom with an accepting run, if any.
    pub atom_index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GoodEntry {
    pub config: String,
    #[serde(skip)]
    pub local: LocalConfig,
    pub atom_index: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub sat: bool,
    pub per_config: Vec<ConfigWitness>,
    pub good_dclics: Vec<GoodEntry>,
    pub sizes: Vec<Sizes>,
}

/// Product network, its degeneralization and prepared saturation data.
pub struct Engine {
    pub dpn: Dpn,
    pub product: Gbdpn,
    pub bdpn: Bdpn,
    ks: Vec<usize>,
    prepared: Vec<Prepared>,
}

impl Engine {
    pub fn new(dpn: &Dpn, formulas: &[Formula]) -> Result<Self, CheckError> {
        let core: Vec<Formula> = formulas.iter().map(Formula::desugar).collect();
        let product = build_product(dpn, &core)?;
        let (bdpn, ks) = degeneralize_gbdpn(&product)?;
        let prepared = bdpn.members.iter().map(Prepared::new).collect();
        Ok(Engine {
            dpn: dpn.clone(),
            product,
            bdpn,
            ks,
            prepared,
        })
    }

    /// Degeneralized control of a product control at counter index 0.
    pub fn bcontrol(&self, process: usize, prod_control: usize) -> usize {
        prod_control * self.ks[process]
    }

    pub fn spawn_targets(&self) -> BTreeSet<Target> {
        self.bdpn
            .members
            .iter()
            .flat_map(|m| m.rules.iter().filter_map(|r| r.spawn.clone()))
            .collect()
    }

    /// Per-process analysis; `None` treats every spawn as harmless.
    pub fn analyze(&self, allowed: Option<&BTreeSet<Target>>) -> Vec<Analysis> {
        self.prepared
            .iter()
            .map(|p| p.analyze(&p.enabled(allowed)))
            .collect()
    }

    fn accepts_target(an: &[Analysis], t: &Target) -> bool {
        an[t.process].accepts(t.control, &t.word)
    }

    /// Greatest set of spawn targets each of which has an accepting run that
    /// only spawns targets in the set.
    pub fn good_targets(&self) -> BTreeSet<Target> {
        let mut good = self.spawn_targets();
        loop {
            let an = self.analyze(Some(&good));
            let next: BTreeSet<Target> = good
                .iter()
                .filter(|t| Self::accepts_target(&an, t))
                .cloned()
                .collect();
            log::debug!("good set {} -> {}", good.len(), next.len());
            if next.len() == good.len() {
                return good;
            }
            good = next;
        }
    }

    /// Same fixpoint, removing one target at a time in random order.
    pub fn good_targets_sequential(&self, rng: &mut impl Rng) -> BTreeSet<Target> {
        let mut good = self.spawn_targets();
        'outer: loop {
            let mut order: Vec<Target> = good.iter().cloned().collect();
            order.shuffle(rng);
            for t in order {
                let an = self.prepared[t.process]
                    .analyze(&self.prepared[t.process].enabled(Some(&good)));
                if !an.accepts(t.control, &t.word) {
                    good.remove(&t);
                    continue 'outer;
                }
            }
            return good;
        }
    }

    /// First initial atom of `c` whose product configuration is accepted.
    pub fn witness(&self, an: &[Analysis], c: &LocalConfig) -> Option<usize> {
        let m = &self.product.members[c.process];
        let stack: Vec<usize> = c.stack.iter().map(|&g| g as usize).collect();
        m.initial_controls(&self.dpn, c.control)
            .into_iter()
            .find(|&(_, id)| an[c.process].accepts(self.bcontrol(c.process, id), &stack))
            .map(|(a, _)| a)
    }

    /// The DPN configuration and atom behind a degeneralized spawn target.
    pub fn target_config(&self, t: &Target) -> (LocalConfig, ProdControl) {
        let pc = self.product.members[t.process].controls[t.control / self.ks[t.process]];
        debug_assert_eq!(pc.label, Label::Unexit);
        let local = LocalConfig {
            process: t.process,
            control: pc.base,
            stack: t.word.iter().map(|&g| g as u32).collect(),
        };
        (local, pc)
    }

    pub fn sizes(&self) -> Vec<Sizes> {
        self.product
            .members
            .iter()
            .map(|m| m.sizes(&self.dpn))
            .collect()
    }
}

/// Decide whether every local configuration of `g` satisfies its process formula.
pub fn check(
    dpn: &Dpn,
    formulas: &[Formula],
    g: &GlobalConfig,
    opts: CheckOptions,
) -> Result<Verdict, CheckError> {
    if let Some(c) = g.iter().find(|c| c.process >= dpn.processes.len()) {
        return Err(CheckError::Config(c.process));
    }
    let stuttered = opts.stutter.then(|| dpn.with_stutter());
    let model = stuttered.as_ref().map_or(dpn, |s| &s.dpn);
    let engine = Engine::new(model, formulas)?;
    let good = engine.good_targets();
    let an = engine.analyze(Some(&good));
    let per_config: Vec<ConfigWitness> = g
        .distinct()
        .map(|orig| {
            let c = stuttered
                .as_ref()
                .map_or_else(|| orig.clone(), |s| s.lift(orig));
            ConfigWitness {
                config: dpn.show(orig),
                local: orig.clone(),
                atom_index: engine.witness(&an, &c),
            }
        })
        .collect();
    let markers = stuttered.as_ref().map(|s| s.markers.clone());
    let unlift = |mut c: LocalConfig| {
        if let Some(m) = &markers {
            if c.stack.last() == Some(&m[c.process]) {
                c.stack.pop();
            }
        }
        c
    };
    let good_dclics = good
        .iter()
        .map(|t| {
            let (local, pc) = engine.target_config(t);
            let local = unlift(local);
            GoodEntry {
                config: dpn.show(&local),
                local,
                atom_index: pc.atom,
            }
        })
        .collect();
    Ok(Verdict {
        sat: per_config.iter().all(|w| w.atom_index.is_some()),
        per_config,
        good_dclics,
        sizes: engine.sizes(),
    })
}
