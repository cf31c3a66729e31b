//! Shared tabular Q-learning with ε-greedy selection and shaping rewards
//! derived from communicated normative information.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disease::{HealthState, Symptom};
use crate::norm::{Attribute, InfoConsequent, NormativeInfo, Value};
use crate::world::{ActionKind, GoalKind, Site};

/// Reward magnitudes for each reward-function component.
pub mod rewards {
    pub const DECEASED: f64 = -2.0;
    pub const SANCTION: f64 = 1.0;
    pub const GOAL: f64 = 1.0;
    pub const NORM_SELF: f64 = 0.5;
    pub const NORM_OTHER: f64 = 0.5;
}

/// What an agent knows about itself when choosing an action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey {
    pub symptom: Symptom,
    pub vaccinated: bool,
    pub quarantined: bool,
    pub goal: GoalKind,
    pub site: Site,
}

impl StateKey {
    pub const COUNT: usize = 3 * 2 * 2 * 4 * 4;

    pub fn index(&self) -> usize {
        let mut i = self.symptom.index();
        i = i * 2 + self.vaccinated as usize;
        i = i * 2 + self.quarantined as usize;
        i = i * 4 + self.goal.index();
        i * 4 + self.site.index()
    }

    pub fn from_index(mut i: usize) -> StateKey {
        assert!(i < Self::COUNT, "state index {i} out of range");
        let site = Site::ALL[i % 4];
        i /= 4;
        let goal = GoalKind::ALL[i % 4];
        i /= 4;
        let quarantined = i % 2 == 1;
        i /= 2;
        let vaccinated = i % 2 == 1;
        i /= 2;
        StateKey {
            symptom: Symptom::ALL[i],
            vaccinated,
            quarantined,
            goal,
            site,
        }
    }

    pub fn all() -> impl Iterator<Item = StateKey> {
        (0..Self::COUNT).map(StateKey::from_index)
    }
}

fn slot(s: &StateKey, a: ActionKind) -> usize {
    s.index() * ActionKind::ALL.len() + a.index()
}

const SLOTS: usize = StateKey::COUNT * 4;

/// Q(s, a), shared by every agent in a run.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    values: Vec<f64>,
}

impl Default for QTable {
    fn default() -> Self {
        QTable {
            values: vec![0.0; SLOTS],
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl QTable {
    pub fn new() -> Self {
        QTable::default()
    }

    pub fn get(&self, s: &StateKey, a: ActionKind) -> f64 {
        self.values[slot(s, a)]
    }

    pub fn set(&mut self, s: &StateKey, a: ActionKind, value: f64) {
        assert!(value.is_finite(), "Q value must be finite, got {value}");
        self.values[slot(s, a)] = value;
    }

    pub fn row(&self, s: &StateKey) -> [f64; 4] {
        let base = slot(s, ActionKind::StayHome);
        self.values[base..base + 4].try_into().unwrap()
    }

    pub fn max(&self, s: &StateKey) -> f64 {
        self.row(s).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Whitespace-separated table with a header line, one row per
    /// state-action pair.
    pub fn to_text(&self) -> String {
        let mut out = String::from("symptom vaccinated quarantined goal location action value\n");
        for s in StateKey::all() {
            for a in ActionKind::ALL {
                let symptom = match s.symptom {
                    Symptom::Healthy => "healthy",
                    Symptom::Mild => "mild",
                    Symptom::Critical => "critical",
                };
                writeln!(
                    out,
                    "{symptom} {} {} {} {} {} {}",
                    s.vaccinated,
                    s.quarantined,
                    s.goal,
                    s.site.name(),
                    a,
                    self.get(&s, a)
                )
                .unwrap();
            }
        }
        out
    }

    /// Inverse of [`QTable::to_text`]. Pairs not listed read as 0.
    pub fn from_text(text: &str) -> Result<QTable, TableError> {
        let mut q = QTable::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            let line_no = n + 1;
            let err = |message: &str| TableError::Parse {
                line: line_no,
                message: message.to_string(),
            };
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let [symptom, vacc, quar, goal, site, action, value] = f[..] else {
                return Err(err("expected 7 fields"));
            };
            let symptom = match symptom {
                "healthy" => Symptom::Healthy,
                "mild" => Symptom::Mild,
                "critical" => Symptom::Critical,
                _ => return Err(err("bad symptom")),
            };
            let s = StateKey {
                symptom,
                vaccinated: vacc.parse().map_err(|_| err("bad vaccinated flag"))?,
                quarantined: quar.parse().map_err(|_| err("bad quarantined flag"))?,
                goal: GoalKind::from_name(goal).ok_or_else(|| err("bad goal"))?,
                site: Site::ALL
                    .into_iter()
                    .find(|x| x.name() == site)
                    .ok_or_else(|| err("bad location"))?,
            };
            let a = ActionKind::from_name(action).ok_or_else(|| err("bad action"))?;
            let v: f64 = value.parse().map_err(|_| err("bad value"))?;
            if !v.is_finite() {
                return Err(err("value must be finite"));
            }
            q.set(&s, a, v);
        }
        Ok(q)
    }
}

/// Φ(s, a): anticipated sanction value communicated by others.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialTable {
    values: Vec<f64>,
}

impl Default for PotentialTable {
    fn default() -> Self {
        PotentialTable {
            values: vec![0.0; SLOTS],
        }
    }
}

impl PotentialTable {
    pub fn new() -> Self {
        PotentialTable::default()
    }

    pub fn get(&self, s: &StateKey, a: ActionKind) -> f64 {
        self.values[slot(s, a)]
    }

    pub fn set(&mut self, s: &StateKey, a: ActionKind, value: f64) {
        assert!(
            (-1.0..=1.0).contains(&value),
            "potential {value} outside [-1, 1]"
        );
        self.values[slot(s, a)] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub kappa_hint: f64,
    pub kappa_tell: f64,
    pub epsilon: f64,
    pub training_steps: u64,
    /// Add the shaping reward and bias greedy choices by Φ.
    pub shaping: bool,
    /// Write communicated information into Φ.
    pub potential_updates: bool,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            learning_rate: 0.001,
            discount: 0.9,
            kappa_hint: 0.3,
            kappa_tell: 0.5,
            epsilon: 0.1,
            training_steps: 100_000,
            shaping: true,
            potential_updates: true,
        }
    }
}

impl LearnParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(format!("learning_rate {} not in (0,1]", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(format!("discount {} not in [0,1)", self.discount));
        }
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("kappa_hint", self.kappa_hint),
            ("kappa_tell", self.kappa_tell),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} {v} not in [0,1]"));
            }
        }
        Ok(())
    }
}

/// One temporal-difference step toward `r + γ max Q(s', ·)`. A `None` next
/// state is terminal. Returns the new Q(s, a).
pub fn q_update(
    q: &mut QTable,
    s: &StateKey,
    a: ActionKind,
    reward: f64,
    s_next: Option<&StateKey>,
    learning_rate: f64,
    discount: f64,
) -> f64 {
    let future = s_next.map_or(0.0, |n| q.max(n));
    let old = q.get(s, a);
    let new = old + learning_rate * (reward + discount * future - old);
    q.set(s, a, new);
    new
}

/// F = γ·Φ(s', a')·κ − Φ(s, a).
pub fn shaping_reward(
    phi: &PotentialTable,
    s: &StateKey,
    a: ActionKind,
    s_next: &StateKey,
    a_next: ActionKind,
    discount: f64,
    kappa: f64,
) -> f64 {
    discount * phi.get(s_next, a_next) * kappa - phi.get(s, a)
}

fn antecedent_matches(info: &NormativeInfo, s: &StateKey, a: ActionKind) -> bool {
    info.antecedent.iter().all(|c| match c.attribute() {
        Attribute::ObsHealth => c.allows(s.symptom.value()),
        // Own symptoms narrow actual health down to the consistent states.
        Attribute::ActualHealth => HealthState::ALL
            .into_iter()
            .filter(|h| h.is_alive() && h.symptom() == s.symptom)
            .any(|h| c.allows(h.value())),
        Attribute::Loc => c.allows(a.destination().value()),
        Attribute::Vaccinated => c.allows(Value::from_bool(s.vaccinated)),
    })
}

/// Write ±1 into every Φ entry whose state and destination match the
/// information's antecedent. Returns how many entries matched.
pub fn update_potential(phi: &mut PotentialTable, info: &NormativeInfo) -> usize {
    let value = match info.consequent {
        InfoConsequent::Punishment => -1.0,
        InfoConsequent::Reward => 1.0,
    };
    let mut matched = 0;
    for s in StateKey::all() {
        for a in ActionKind::ALL {
            if antecedent_matches(info, &s, a) {
                phi.set(&s, a, value);
                matched += 1;
            }
        }
    }
    matched
}

/// Per-action scores used for greedy choice: Q, plus Φ when advice is on.
fn scores(q: &QTable, advice: Option<&PotentialTable>, s: &StateKey) -> [f64; 4] {
    let mut row = q.row(s);
    if let Some(phi) = advice {
        for a in ActionKind::ALL {
            row[a.index()] += phi.get(s, a);
        }
    }
    row
}

/// Greedy action with ties going to the lowest action index.
pub fn greedy_action(q: &QTable, advice: Option<&PotentialTable>, s: &StateKey) -> ActionKind {
    let row = scores(q, advice, s);
    let mut best = 0;
    for i in 1..row.len() {
        if row[i] > row[best] {
            best = i;
        }
    }
    ActionKind::from_index(best)
}

/// ε-greedy over the given scores; greedy ties are broken uniformly.
pub fn select_action_advised<R: Rng + ?Sized>(
    q: &QTable,
    advice: Option<&PotentialTable>,
    s: &StateKey,
    epsilon: f64,
    rng: &mut R,
) -> ActionKind {
    if rng.random::<f64>() < epsilon {
        return ActionKind::from_index(rng.random_range(0..4));
    }
    let row = scores(q, advice, s);
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best: Vec<usize> = (0..4).filter(|&i| row[i] == max).collect();
    let pick = if best.len() == 1 {
        best[0]
    } else {
        best[rng.random_range(0..best.len())]
    };
    ActionKind::from_index(pick)
}

/// ε-greedy over Q alone.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    s: &StateKey,
    epsilon: f64,
    rng: &mut R,
) -> ActionKind {
    select_action_advised(q, None, s, epsilon, rng)
}

/// Itemized reward for one agent-step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardContribution {
    pub extrinsic: f64,
    pub intrinsic: f64,
    pub shaping: f64,
}

impl RewardContribution {
    pub fn total(&self) -> f64 {
        self.extrinsic + self.intrinsic + self.shaping
    }
}

/// Everything that happened to one agent in one step that bears on its
/// reward. Signed counts are positive for approval or satisfaction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepOutcome {
    pub died: bool,
    pub sanction: i32,
    /// `None` when the agent did not act this step.
    pub goal: Option<bool>,
    pub self_norm: i32,
    pub emotion: i32,
    pub witnessed: i32,
    pub shaping: f64,
}

/// Channel weights a society applies to [`StepOutcome`] terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardWeights {
    /// Scale on a received sanction.
    pub sanction: f64,
    /// Scale on self-directed guilt/pleasure and on received emotes/hints;
    /// zero turns both off.
    pub emotion: f64,
}

fn sign(count: i32) -> f64 {
    count.signum() as f64
}

/// Each channel contributes at most once per step, with the sign of its net
/// count.
pub fn assemble_reward(o: &StepOutcome, w: &RewardWeights) -> RewardContribution {
    let mut extrinsic = 0.0;
    if o.died {
        extrinsic += rewards::DECEASED;
    }
    extrinsic += rewards::SANCTION * w.sanction * sign(o.sanction);
    extrinsic += rewards::NORM_OTHER * sign(o.witnessed);

    let mut intrinsic = match o.goal {
        Some(true) => rewards::GOAL,
        Some(false) => -rewards::GOAL,
        None => 0.0,
    };
    if w.emotion > 0.0 {
        intrinsic += rewards::NORM_SELF * sign(o.self_norm);
        intrinsic += w.emotion * sign(o.emotion);
    }
    RewardContribution {
        extrinsic,
        intrinsic,
        shaping: o.shaping,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::parse_normative_info;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn key(symptom: Symptom, site: Site) -> StateKey {
        StateKey {
            symptom,
            vaccinated: false,
            quarantined: false,
            goal: GoalKind::Shop,
            site,
        }
    }

    #[test]
    fn state_index_is_a_bijection() {
        let mut seen = [false; StateKey::COUNT];
        for (i, s) in StateKey::all().enumerate() {
            assert_eq!(s.index(), i);
            assert!(!seen[i]);
            seen[i] = true;
        }
        assert_eq!(StateKey::COUNT, 192);
    }

    #[test]
    fn first_update_from_zero() {
        let mut q = QTable::new();
        let s = key(Symptom::Healthy, Site::Home);
        let v = q_update(&mut q, &s, ActionKind::VisitCafe, 1.0, Some(&s), 0.001, 0.9);
        assert!((v - 0.001).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_is_inert() {
        let mut q = QTable::new();
        let s = key(Symptom::Mild, Site::Cafe);
        q.set(&s, ActionKind::VisitCafe, 0.25);
        let v = q_update(&mut q, &s, ActionKind::VisitCafe, 7.0, Some(&s), 0.0, 0.9);
        assert_eq!(v, 0.25);
    }

    #[test]
    fn shaping_examples() {
        let mut phi = PotentialTable::new();
        let s = key(Symptom::Mild, Site::Home);
        let n = key(Symptom::Mild, Site::Cafe);
        phi.set(&n, ActionKind::VisitCafe, -1.0);
        let f = shaping_reward(
            &phi,
            &s,
            ActionKind::StayHome,
            &n,
            ActionKind::VisitCafe,
            0.9,
            0.3,
        );
        assert!((f + 0.27).abs() < 1e-12);
        phi.set(&s, ActionKind::StayHome, -1.0);
        let f = shaping_reward(
            &phi,
            &s,
            ActionKind::StayHome,
            &n,
            ActionKind::VisitCafe,
            0.9,
            0.5,
        );
        assert!((f - 0.55).abs() < 1e-12);
        let zero = PotentialTable::new();
        assert_eq!(
            shaping_reward(
                &zero,
                &s,
                ActionKind::StayHome,
                &n,
                ActionKind::VisitCafe,
                0.9,
                0.5
            ),
            0.0
        );
    }

    const MESSAGE: &str = "sender = {Observer_Agent}, receiver = {Actor_Agent}, \
        info type = {MESSAGE}, antecedent = {obs_health=CRITICAL,loc=CAFE}, \
        consequent = {PUNISHMENT}";

    #[test]
    fn message_marks_critical_cafe_visits() {
        let info = parse_normative_info(MESSAGE).unwrap();
        let mut phi = PotentialTable::new();
        let n = update_potential(&mut phi, &info);
        // Every state with Critical symptoms: 2 × 2 × 4 × 4 = 64, one action each.
        assert_eq!(n, 64);
        for s in StateKey::all() {
            for a in ActionKind::ALL {
                let expected = if s.symptom == Symptom::Critical && a == ActionKind::VisitCafe {
                    -1.0
                } else {
                    0.0
                };
                assert_eq!(phi.get(&s, a), expected);
            }
        }
        let reward = parse_normative_info(&MESSAGE.replace("PUNISHMENT", "REWARD")).unwrap();
        update_potential(&mut phi, &reward);
        assert_eq!(
            phi.get(&key(Symptom::Critical, Site::Park), ActionKind::VisitCafe),
            1.0
        );
    }

    #[test]
    fn unreachable_antecedent_leaves_phi_alone() {
        let info =
            parse_normative_info(&MESSAGE.replace("obs_health=CRITICAL", "actual_health=DECEASED"))
                .unwrap();
        let mut phi = PotentialTable::new();
        assert_eq!(update_potential(&mut phi, &info), 0);
        assert!(phi.is_zero());
    }

    #[test]
    fn actual_health_matches_asymptomatic_through_healthy_symptoms() {
        let info = parse_normative_info(
            &MESSAGE.replace("obs_health=CRITICAL", "actual_health=ASYMPTOMATIC"),
        )
        .unwrap();
        let mut phi = PotentialTable::new();
        update_potential(&mut phi, &info);
        assert_eq!(
            phi.get(&key(Symptom::Healthy, Site::Home), ActionKind::VisitCafe),
            -1.0
        );
        assert_eq!(
            phi.get(&key(Symptom::Mild, Site::Home), ActionKind::VisitCafe),
            0.0
        );
    }

    #[test]
    fn strict_argmax_and_full_exploration() {
        let mut q = QTable::new();
        let s = key(Symptom::Healthy, Site::Home);
        q.set(&s, ActionKind::VisitCafe, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(select_action(&q, &s, 0.0, &mut rng), ActionKind::VisitCafe);
        }
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[select_action(&q, &s, 1.0, &mut rng).index()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 40_000.0 - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn advice_biases_greedy_choice() {
        let q = QTable::new();
        let mut phi = PotentialTable::new();
        let s = key(Symptom::Mild, Site::Home);
        for a in [
            ActionKind::VisitPark,
            ActionKind::VisitCafe,
            ActionKind::VisitClinic,
        ] {
            phi.set(&s, a, -1.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(
                select_action_advised(&q, Some(&phi), &s, 0.0, &mut rng),
                ActionKind::StayHome
            );
        }
        assert_eq!(greedy_action(&q, Some(&phi), &s), ActionKind::StayHome);
        assert_eq!(greedy_action(&q, None, &s), ActionKind::StayHome);
    }

    #[test]
    fn reward_examples() {
        let w = RewardWeights {
            sanction: 1.0,
            emotion: 0.0,
        };
        let died = assemble_reward(
            &StepOutcome {
                died: true,
                ..Default::default()
            },
            &w,
        );
        assert_eq!(died.extrinsic, -2.0);
        let goal = assemble_reward(
            &StepOutcome {
                goal: Some(true),
                ..Default::default()
            },
            &w,
        );
        assert_eq!(goal.total(), 1.0);
        assert_eq!(
            assemble_reward(&StepOutcome::default(), &w),
            RewardContribution::default()
        );
    }

    #[test]
    fn self_norm_terms_need_emotional_channel() {
        let outcome = StepOutcome {
            self_norm: -1,
            emotion: -2,
            sanction: -3,
            witnessed: 4,
            ..Default::default()
        };
        let flat = assemble_reward(
            &outcome,
            &RewardWeights {
                sanction: 1.0,
                emotion: 0.0,
            },
        );
        assert_eq!(flat.intrinsic, 0.0);
        assert_eq!(flat.extrinsic, -1.0 + 0.5);
        let emotional = assemble_reward(
            &outcome,
            &RewardWeights {
                sanction: 1.0,
                emotion: 0.5,
            },
        );
        assert_eq!(emotional.intrinsic, -1.0);
    }

    #[test]
    fn qtable_text_round_trip() {
        let mut q = QTable::new();
        q.set(
            &key(Symptom::Mild, Site::Cafe),
            ActionKind::StayHome,
            -0.123456789,
        );
        q.set(
            &key(Symptom::Critical, Site::Park),
            ActionKind::VisitClinic,
            3.5e-7,
        );
        let text = q.to_text();
        assert_eq!(text.lines().count(), 1 + 768);
        assert_eq!(QTable::from_text(&text).unwrap(), q);
        assert!(QTable::from_text("header\nmild true\n").is_err());
    }
}
