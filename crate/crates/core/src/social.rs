//! Society profiles and the sanction / tell / emote / hint channels.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disease::Symptom;
use crate::learning::{assemble_reward, RewardContribution, RewardWeights, StepOutcome};
use crate::norm::{ConditionSet, InfoConsequent, InfoType, NormativeInfo, Party};
use crate::world::AgentId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CommKind {
    Sanction,
    Tell,
    Emote,
    Hint,
    None,
}

impl CommKind {
    pub const ALL: [CommKind; 5] = [
        CommKind::Sanction,
        CommKind::Tell,
        CommKind::Emote,
        CommKind::Hint,
        CommKind::None,
    ];
    const ACTIVE: [CommKind; 4] = [
        CommKind::Sanction,
        CommKind::Tell,
        CommKind::Emote,
        CommKind::Hint,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Society {
    Primitive,
    Penalty,
    Tell,
    Emote,
    Nest,
}

impl Society {
    pub const ALL: [Society; 5] = [
        Society::Primitive,
        Society::Penalty,
        Society::Tell,
        Society::Emote,
        Society::Nest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Society::Primitive => "primitive",
            Society::Penalty => "penalty",
            Society::Tell => "tell",
            Society::Emote => "emote",
            Society::Nest => "nest",
        }
    }
}

impl fmt::Display for Society {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown society `{0}` (expected primitive, penalty, tell, emote, or nest)")]
pub struct UnknownSociety(pub String);

impl FromStr for Society {
    type Err = UnknownSociety;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Society::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownSociety(s.to_string()))
    }
}

/// Probability of each communication kind, indexed by [`CommKind::index`].
pub type Mixture = [f64; 5];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SocietyProfile {
    pub society: Society,
    pub mixture: Mixture,
    /// wI: weight on immediate rewards. The part up to 1 scales sanctions;
    /// the excess is the strength of emotional (guilt/pleasure) channels.
    pub w_immediate: f64,
    /// wP: weight on potential rewards.
    pub w_potential: f64,
    /// Certainty applied to Φ when shaping.
    pub kappa: f64,
    /// Chance an observer reacts to a violation seen as Mild.
    pub mild_gate: f64,
    /// Chance an observer reacts to a violation seen as Critical.
    pub critical_gate: f64,
    /// Chance an observer reacts to a witnessed satisfaction.
    pub approval_gate: f64,
}

impl SocietyProfile {
    pub fn preset(society: Society) -> SocietyProfile {
        let (mixture, w_immediate, w_potential) = match society {
            Society::Primitive => ([0.0, 0.0, 0.0, 0.0, 1.0], 0.0, 0.0),
            Society::Penalty => ([0.38, 0.0, 0.0, 0.0, 0.62], 1.0, 0.0),
            Society::Tell => ([0.20, 0.18, 0.0, 0.0, 0.62], 1.0, 0.5),
            Society::Emote => ([0.20, 0.0, 0.18, 0.0, 0.62], 1.5, 0.0),
            Society::Nest => ([0.20, 0.0, 0.0, 0.18, 0.62], 1.5, 0.3),
        };
        SocietyProfile {
            society,
            mixture,
            w_immediate,
            w_potential,
            kappa: w_potential,
            mild_gate: 0.5,
            critical_gate: 0.8,
            approval_gate: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.mixture.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err("mixture entries must lie in [0,1]".into());
        }
        let sum: f64 = self.mixture.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("mixture sums to {sum}, not 1"));
        }
        for (name, v) in [
            ("kappa", self.kappa),
            ("mild_gate", self.mild_gate),
            ("critical_gate", self.critical_gate),
            ("approval_gate", self.approval_gate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} {v} not in [0,1]"));
            }
        }
        if self.w_immediate < 0.0 || self.w_potential < 0.0 {
            return Err("weights must be non-negative".into());
        }
        Ok(())
    }

    pub fn has_active_channels(&self) -> bool {
        CommKind::ACTIVE
            .iter()
            .any(|k| self.mixture[k.index()] > 0.0)
    }

    pub fn reward_weights(&self) -> RewardWeights {
        RewardWeights {
            sanction: self.w_immediate.min(1.0),
            emotion: (self.w_immediate - 1.0).max(0.0),
        }
    }
}

/// Whether an observer reacts to a perceived violation: only symptomatic
/// agents seen in public draw a reaction.
pub fn gate_by_severity<R: Rng + ?Sized>(
    rng: &mut R,
    perceived: Symptom,
    in_public: bool,
    profile: &SocietyProfile,
) -> bool {
    let p = match (perceived, in_public) {
        (Symptom::Mild, true) => profile.mild_gate,
        (Symptom::Critical, true) => profile.critical_gate,
        _ => return false,
    };
    rng.random::<f64>() < p
}

/// Gate for approving reactions to a witnessed satisfaction.
pub fn gate_approval<R: Rng + ?Sized>(rng: &mut R, profile: &SocietyProfile) -> bool {
    rng.random::<f64>() < profile.approval_gate
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CommError {
    #[error("society has no active communication channels")]
    NoActiveChannels,
}

/// Which kind of reaction, drawn from the mixture renormalized over the
/// active kinds.
pub fn select_comm_kind<R: Rng + ?Sized>(
    rng: &mut R,
    profile: &SocietyProfile,
) -> Result<CommKind, CommError> {
    let total: f64 = CommKind::ACTIVE
        .iter()
        .map(|k| profile.mixture[k.index()])
        .sum();
    if total <= 0.0 {
        return Err(CommError::NoActiveChannels);
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = CommKind::Sanction;
    for k in CommKind::ACTIVE {
        let p = profile.mixture[k.index()];
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if u < acc {
            return Ok(k);
        }
    }
    Ok(last)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Valence {
    Approve,
    Disapprove,
}

impl Valence {
    pub fn sign(self) -> i32 {
        match self {
            Valence::Approve => 1,
            Valence::Disapprove => -1,
        }
    }

    pub fn flip(self) -> Valence {
        match self {
            Valence::Approve => Valence::Disapprove,
            Valence::Disapprove => Valence::Approve,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommEvent {
    pub sender: AgentId,
    pub receiver: AgentId,
    pub kind: CommKind,
    pub valence: Valence,
    /// Present for tells and hints.
    pub info: Option<NormativeInfo>,
    pub witnesses: Vec<AgentId>,
}

impl CommEvent {
    /// Signed sanction magnitude; zero for other kinds.
    pub fn magnitude(&self) -> i32 {
        if self.kind == CommKind::Sanction {
            self.valence.sign()
        } else {
            0
        }
    }
}

/// Build the event for a reaction. `matched` is the set of conditions the
/// observer saw hold (e.g. `{obs_health=CRITICAL, loc=CAFE}`). Returns `None`
/// for [`CommKind::None`].
pub fn build_event(
    kind: CommKind,
    valence: Valence,
    sender: AgentId,
    receiver: AgentId,
    matched: ConditionSet,
) -> Option<CommEvent> {
    let info_type = match kind {
        CommKind::None => return None,
        CommKind::Tell => Some(InfoType::Message),
        CommKind::Hint => Some(InfoType::Hint),
        CommKind::Sanction | CommKind::Emote => None,
    };
    let info = info_type.map(|info_type| NormativeInfo {
        sender: Party::Agent(sender),
        receiver: Party::Agent(receiver),
        info_type,
        antecedent: matched,
        consequent: match valence {
            Valence::Approve => InfoConsequent::Reward,
            Valence::Disapprove => InfoConsequent::Punishment,
        },
    });
    Some(CommEvent {
        sender,
        receiver,
        kind,
        valence,
        info,
        witnesses: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Audience {
    Actor,
    Witness,
}

/// What one communication means to one recipient.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Interpretation {
    pub sanction: i32,
    pub emotion: i32,
    pub witnessed: i32,
    pub quarantine: bool,
    /// Normative information to fold into Φ.
    pub potential: Option<NormativeInfo>,
}

impl Interpretation {
    /// The immediate reward this communication alone would produce.
    pub fn contribution(&self, weights: &RewardWeights) -> RewardContribution {
        assemble_reward(
            &StepOutcome {
                sanction: self.sanction,
                emotion: self.emotion,
                witnessed: self.witnessed,
                ..StepOutcome::default()
            },
            weights,
        )
    }
}

pub fn interpret(event: &CommEvent, audience: Audience) -> Interpretation {
    let sign = event.valence.sign();
    let mut out = Interpretation::default();
    if event.kind == CommKind::None {
        return out;
    }
    match audience {
        Audience::Actor => match event.kind {
            CommKind::Sanction => {
                out.sanction = sign;
                out.quarantine = event.valence == Valence::Disapprove;
            }
            CommKind::Emote => out.emotion = sign,
            CommKind::Tell => out.potential = event.info.clone(),
            CommKind::Hint => {
                out.emotion = sign;
                out.potential = event.info.clone();
            }
            CommKind::None => {}
        },
        Audience::Witness => {
            out.witnessed = sign;
            out.potential = event.info.clone();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::{Attribute, Condition, Value};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn critical_cafe() -> ConditionSet {
        ConditionSet::new([
            Condition::new(Attribute::ObsHealth, [Value::Critical]).unwrap(),
            Condition::new(Attribute::Loc, [Value::Cafe]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn presets_match_table() {
        for s in Society::ALL {
            let p = SocietyProfile::preset(s);
            p.validate().unwrap();
        }
        let nest = SocietyProfile::preset(Society::Nest);
        assert_eq!(nest.mixture, [0.20, 0.0, 0.0, 0.18, 0.62]);
        assert_eq!((nest.w_immediate, nest.w_potential), (1.5, 0.3));
        assert_eq!(SocietyProfile::preset(Society::Tell).kappa, 0.5);
        assert!(!SocietyProfile::preset(Society::Primitive).has_active_channels());
    }

    #[test]
    fn society_names_parse() {
        assert_eq!("NEST".parse::<Society>().unwrap(), Society::Nest);
        assert!("anarchy".parse::<Society>().is_err());
    }

    #[test]
    fn gate_never_opens_for_healthy_or_private() {
        let p = SocietyProfile::preset(Society::Penalty);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(!gate_by_severity(&mut rng, Symptom::Healthy, true, &p));
            assert!(!gate_by_severity(&mut rng, Symptom::Critical, false, &p));
        }
    }

    #[test]
    fn penalty_always_sanctions() {
        let p = SocietyProfile::preset(Society::Penalty);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            assert_eq!(select_comm_kind(&mut rng, &p).unwrap(), CommKind::Sanction);
        }
    }

    #[test]
    fn primitive_has_no_channels() {
        let p = SocietyProfile::preset(Society::Primitive);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            select_comm_kind(&mut rng, &p),
            Err(CommError::NoActiveChannels)
        );
    }

    #[test]
    fn tell_event_carries_message() {
        let e = build_event(CommKind::Tell, Valence::Disapprove, 1, 2, critical_cafe()).unwrap();
        let info = e.info.unwrap();
        assert_eq!(info.info_type, InfoType::Message);
        assert_eq!(info.consequent, InfoConsequent::Punishment);
        assert_eq!(
            info.antecedent.to_string(),
            "{obs_health=CRITICAL, loc=CAFE}"
        );
        assert!(build_event(CommKind::None, Valence::Disapprove, 1, 2, critical_cafe()).is_none());
    }

    #[test]
    fn sanction_magnitude_and_quarantine() {
        let e = build_event(
            CommKind::Sanction,
            Valence::Disapprove,
            1,
            2,
            critical_cafe(),
        )
        .unwrap();
        assert_eq!(e.magnitude(), -1);
        let i = interpret(&e, Audience::Actor);
        assert!(i.quarantine);
        let w = SocietyProfile::preset(Society::Penalty).reward_weights();
        assert_eq!(i.contribution(&w).total(), -1.0);
        let witness = interpret(&e, Audience::Witness);
        assert!(!witness.quarantine);
        assert_eq!(witness.contribution(&w).extrinsic, -0.5);
    }

    #[test]
    fn hint_in_nest() {
        let e = build_event(CommKind::Hint, Valence::Disapprove, 1, 2, critical_cafe()).unwrap();
        let i = interpret(&e, Audience::Actor);
        let w = SocietyProfile::preset(Society::Nest).reward_weights();
        assert_eq!(i.contribution(&w).intrinsic, -0.5);
        assert_eq!(i.potential.unwrap().consequent, InfoConsequent::Punishment);
        let approve = build_event(CommKind::Hint, Valence::Approve, 1, 2, critical_cafe()).unwrap();
        assert_eq!(approve.info.unwrap().consequent, InfoConsequent::Reward);
    }

    #[test]
    fn none_event_is_inert() {
        let e = CommEvent {
            sender: 0,
            receiver: 1,
            kind: CommKind::None,
            valence: Valence::Disapprove,
            info: None,
            witnesses: vec![],
        };
        assert_eq!(interpret(&e, Audience::Actor), Interpretation::default());
    }

    #[test]
    fn flipping_valence_negates_immediate_terms() {
        let w = SocietyProfile::preset(Society::Nest).reward_weights();
        for kind in [
            CommKind::Sanction,
            CommKind::Tell,
            CommKind::Emote,
            CommKind::Hint,
        ] {
            for v in [Valence::Approve, Valence::Disapprove] {
                let a = build_event(kind, v, 1, 2, critical_cafe()).unwrap();
                let b = build_event(kind, v.flip(), 1, 2, critical_cafe()).unwrap();
                for audience in [Audience::Actor, Audience::Witness] {
                    let ra = interpret(&a, audience).contribution(&w);
                    let rb = interpret(&b, audience).contribution(&w);
                    assert_eq!(ra.total(), -rb.total());
                }
                if let (Some(ia), Some(ib)) = (&a.info, &b.info) {
                    assert_ne!(ia.consequent, ib.consequent);
                    assert_eq!(ia.antecedent, ib.antecedent);
                }
            }
        }
    }
}
