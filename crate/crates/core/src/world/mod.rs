//! The pandemic environment and its per-step loop.
//!
//! A step runs in a fixed phase order: act, move, contact, communicate,
//! progress disease, learn, record metrics.

mod agent;

pub use agent::{assign_goal, goal_satisfied, ActionKind, Agent, AgentId, GoalKind, Place, Site};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disease::{self, DiseaseParams, HealthState, ObservationModel, Symptom};
use crate::learning::{
    assemble_reward, greedy_action, q_update, select_action_advised, shaping_reward,
    update_potential, LearnParams, PotentialTable, QTable, RewardContribution, StateKey,
    StepOutcome,
};
use crate::metrics::{compute_metrics, MetricsRow};
use crate::norm::{Attribute, Norm, NormOutcome, Role, View};
use crate::rng::Streams;
use crate::social::{
    build_event, gate_approval, gate_by_severity, interpret, select_comm_kind, Audience, CommEvent,
    SocietyProfile, Valence,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub population: u32,
    pub initial_infected_fraction: f64,
    pub episode_steps: u64,
    pub quarantine_duration: u32,
    /// Chance that two co-located agents interact in a step.
    pub p_interact: f64,
    /// Replace the per-step goal draw with a single goal.
    pub fixed_goal: Option<GoalKind>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            population: 100,
            initial_infected_fraction: 0.30,
            episode_steps: 2000,
            quarantine_duration: 3,
            p_interact: 1.0,
            fixed_goal: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("invalid world config: {0}")]
    Config(String),
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.population < 2 {
            return Err(WorldError::Config(format!(
                "population must be at least 2, got {}",
                self.population
            )));
        }
        if !(0.0..=1.0).contains(&self.initial_infected_fraction) {
            return Err(WorldError::Config(format!(
                "initial_infected_fraction {} not in [0,1]",
                self.initial_infected_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.p_interact) {
            return Err(WorldError::Config(format!(
                "p_interact {} not in [0,1]",
                self.p_interact
            )));
        }
        Ok(())
    }

    pub fn initial_infected(&self) -> u32 {
        (self.population as f64 * self.initial_infected_fraction).round() as u32
    }
}

/// Disease, perception, and the norms agents hold.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub disease: DiseaseParams,
    pub observation: ObservationModel,
    pub norms: Vec<Norm>,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            disease: DiseaseParams::default(),
            observation: ObservationModel::default(),
            norms: vec![Norm::public_space_prohibition()],
        }
    }
}

/// The shared tables every agent in a run reads and writes.
#[derive(Clone, Debug)]
pub struct Learner {
    pub q: QTable,
    pub phi: PotentialTable,
    pub params: LearnParams,
}

impl Learner {
    pub fn new(params: LearnParams) -> Self {
        Learner {
            q: QTable::new(),
            phi: PotentialTable::new(),
            params,
        }
    }

    fn advice(&self) -> Option<&PotentialTable> {
        self.params.shaping.then_some(&self.phi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("episode finished")]
pub struct EpisodeDone;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActionRecord {
    pub agent: AgentId,
    pub action: ActionKind,
    pub forced: bool,
}

/// Everything that happened in one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub actions: Vec<ActionRecord>,
    pub contacts: Vec<(AgentId, AgentId)>,
    pub infections: Vec<AgentId>,
    pub communications: Vec<CommEvent>,
    pub deaths: Vec<AgentId>,
    pub rewards: Vec<(AgentId, RewardContribution)>,
    /// Agents under quarantine found in a public place right after movement.
    pub quarantined_in_public: usize,
    pub metrics: MetricsRow,
}

#[derive(Clone, Debug)]
pub struct World {
    config: WorldConfig,
    env: Environment,
    agents: Vec<Agent>,
    step: u64,
    cumulative_infections: u64,
    last_goal: (u32, u32),
}

/// Role test for a norm party. `Healthy_Agent` is an agent that shows no
/// symptoms to itself; other labels admit any living agent and leave the
/// discrimination to the norm's conditions.
pub fn role_admits(role: &Role, agent: &Agent) -> bool {
    match role.as_str() {
        "Healthy_Agent" => agent.health.symptom() == Symptom::Healthy,
        _ => agent.is_alive(),
    }
}

fn state_key(agent: &Agent) -> StateKey {
    StateKey {
        symptom: agent.health.symptom(),
        vaccinated: agent.vaccinated,
        quarantined: agent.quarantined(),
        goal: agent.goal,
        site: agent.location.site(),
    }
}

fn self_view(agent: &Agent, health: HealthState) -> View {
    View::new()
        .with(Attribute::ObsHealth, health.symptom().value())
        .with(Attribute::ActualHealth, health.value())
        .with(Attribute::Loc, agent.location.site().value())
        .with(
            Attribute::Vaccinated,
            crate::norm::Value::from_bool(agent.vaccinated),
        )
}

impl World {
    pub fn new<R: Rng + ?Sized>(
        config: &WorldConfig,
        env: Environment,
        init: &mut R,
        goals: &mut R,
    ) -> Result<World, WorldError> {
        config.validate()?;
        let n = config.population as usize;
        let infected = config.initial_infected() as usize;
        let mut health = vec![HealthState::Healthy; n];
        for i in sample(init, n, infected) {
            health[i] = HealthState::Asymptomatic;
        }
        let agents = health
            .into_iter()
            .enumerate()
            .map(|(i, h)| {
                Agent::new(
                    i as AgentId,
                    h,
                    assign_goal(goals, false, config.fixed_goal),
                )
            })
            .collect();
        Ok(World {
            config: config.clone(),
            env,
            agents,
            step: 0,
            cumulative_infections: 0,
            last_goal: (0, 0),
        })
    }

    /// Initialize from the run's streams.
    pub fn from_streams(
        config: &WorldConfig,
        env: Environment,
        streams: &mut Streams,
    ) -> Result<World, WorldError> {
        let Streams { init, goals, .. } = streams;
        World::new(config, env, init, goals)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    /// Direct access for setting up scenarios.
    pub fn agents_mut(&mut self) -> &mut [Agent] {
        &mut self.agents
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.episode_steps
    }

    pub fn cumulative_infections(&self) -> u64 {
        self.cumulative_infections
    }

    /// (goals satisfied, agents that acted) in the last step.
    pub fn last_goal_counts(&self) -> (u32, u32) {
        self.last_goal
    }

    pub fn population(&self) -> u32 {
        self.config.population
    }

    /// Unordered pairs of living agents sharing a public place, each kept
    /// with probability `p_interact`.
    pub fn contacts<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(AgentId, AgentId)> {
        let p = self.config.p_interact;
        let mut pairs = Vec::new();
        for site in Site::PUBLIC {
            let here: Vec<AgentId> = self
                .agents
                .iter()
                .filter(|a| a.is_alive() && a.location.site() == site)
                .map(|a| a.id)
                .collect();
            for (i, &a) in here.iter().enumerate() {
                for &b in &here[i + 1..] {
                    if p >= 1.0 || rng.random::<f64>() < p {
                        pairs.push((a, b));
                    }
                }
            }
        }
        pairs
    }

    fn witnesses(&self, place: Place, sender: AgentId, receiver: AgentId) -> Vec<AgentId> {
        self.agents
            .iter()
            .filter(|a| a.is_alive() && a.location == place && a.id != sender && a.id != receiver)
            .map(|a| a.id)
            .collect()
    }

    /// Advance one step.
    pub fn step(
        &mut self,
        learner: &mut Learner,
        society: &SocietyProfile,
        streams: &mut Streams,
    ) -> Result<StepReport, EpisodeDone> {
        if self.is_finished() {
            return Err(EpisodeDone);
        }
        let n = self.agents.len();
        let params = learner.params;

        // Act.
        let mut decisions: Vec<Option<(StateKey, ActionKind, HealthState)>> = vec![None; n];
        let mut actions = Vec::new();
        for agent in self.agents.iter_mut().filter(|a| a.is_alive()) {
            let s = state_key(agent);
            let forced = agent.quarantined();
            let action = if forced {
                agent.quarantine_remaining -= 1;
                ActionKind::StayHome
            } else {
                select_action_advised(
                    &learner.q,
                    learner.advice(),
                    &s,
                    params.epsilon,
                    &mut streams.exploration,
                )
            };
            decisions[agent.id as usize] = Some((s, action, agent.health));
            actions.push(ActionRecord {
                agent: agent.id,
                action,
                forced,
            });
        }

        // Move.
        let mut goal_met = vec![false; n];
        for rec in &actions {
            let agent = &mut self.agents[rec.agent as usize];
            agent.location = rec.action.place(agent.id);
            if rec.action == ActionKind::VisitClinic {
                agent.vaccinated = true;
            }
            if goal_satisfied(agent.goal, rec.action) {
                goal_met[rec.agent as usize] = true;
                agent.goals_satisfied += 1;
            }
        }
        let quarantined_in_public = self
            .agents
            .iter()
            .filter(|a| a.is_alive() && a.quarantined() && a.location.is_public())
            .count();

        // Contact: perception both ways, then infection.
        let contacts = self.contacts(&mut streams.contacts);
        let infectious: Vec<bool> = self
            .agents
            .iter()
            .map(|a| a.health.is_infectious())
            .collect();
        let mut perceived = Vec::with_capacity(contacts.len());
        let mut infections = Vec::new();
        for &(a, b) in &contacts {
            let (ai, bi) = (a as usize, b as usize);
            let a_sees_b = disease::observe_health(
                &mut streams.observation,
                self.agents[bi].health,
                &self.env.observation,
            )
            .expect("contacts are between living agents");
            let b_sees_a = disease::observe_health(
                &mut streams.observation,
                self.agents[ai].health,
                &self.env.observation,
            )
            .expect("contacts are between living agents");
            perceived.push((a_sees_b, b_sees_a));
            for (target, source) in [(ai, bi), (bi, ai)] {
                if self.agents[target].health == HealthState::Healthy
                    && infectious[source]
                    && disease::try_infect(
                        &mut streams.disease,
                        self.agents[target].vaccinated,
                        &self.env.disease,
                    )
                {
                    self.agents[target].health = HealthState::Asymptomatic;
                    self.agents[target].infections_caught += 1;
                    self.cumulative_infections += 1;
                    infections.push(target as AgentId);
                }
            }
        }

        // Communicate.
        let mut outcomes = vec![StepOutcome::default(); n];
        let mut communications = Vec::new();
        if society.has_active_channels() {
            for (&(a, b), &(a_sees_b, b_sees_a)) in contacts.iter().zip(&perceived) {
                for (observer, actor, seen) in [(a, b, a_sees_b), (b, a, b_sees_a)] {
                    if let Some(event) =
                        self.react(observer, actor, seen, society, &mut streams.communication)
                    {
                        communications.push(event);
                    }
                }
            }
            for event in &communications {
                self.deliver(event, &mut outcomes, learner);
            }
        }

        // Progress disease.
        let mut deaths = Vec::new();
        for agent in self.agents.iter_mut().filter(|a| a.is_alive()) {
            let at_home = agent.at_home();
            agent.health = disease::progress(
                &mut streams.disease,
                agent.health,
                agent.vaccinated,
                at_home,
                &self.env.disease,
            )
            .expect("only living agents progress");
            if !agent.is_alive() {
                deaths.push(agent.id);
                outcomes[agent.id as usize].died = true;
            }
        }

        // Learn.
        let weights = society.reward_weights();
        let mut rewards = Vec::with_capacity(actions.len());
        for i in 0..n {
            let Some((s, a, acted_health)) = decisions[i] else {
                continue;
            };
            let mut outcome = outcomes[i];
            outcome.goal = Some(goal_met[i]);
            if weights.emotion > 0.0 {
                let view = self_view(&self.agents[i], acted_health);
                outcome.self_norm = self
                    .env
                    .norms
                    .iter()
                    .filter_map(|norm| match norm.evaluate(&view) {
                        Ok(NormOutcome::Satisfied) => Some(1),
                        Ok(NormOutcome::Violated) => Some(-1),
                        _ => None,
                    })
                    .sum();
            }
            let agent = &mut self.agents[i];
            let next = if agent.is_alive() {
                agent.goal =
                    assign_goal(&mut streams.goals, agent.vaccinated, self.config.fixed_goal);
                Some(state_key(agent))
            } else {
                None
            };
            if params.shaping {
                outcome.shaping = match &next {
                    Some(sn) => {
                        let an = greedy_action(&learner.q, learner.advice(), sn);
                        shaping_reward(&learner.phi, &s, a, sn, an, params.discount, society.kappa)
                    }
                    None => -learner.phi.get(&s, a),
                };
            }
            let reward = assemble_reward(&outcome, &weights);
            q_update(
                &mut learner.q,
                &s,
                a,
                reward.total(),
                next.as_ref(),
                params.learning_rate,
                params.discount,
            );
            rewards.push((i as AgentId, reward));
        }

        let met = goal_met.iter().filter(|m| **m).count() as u32;
        self.last_goal = (met, actions.len() as u32);
        self.step += 1;
        let metrics = compute_metrics(self, self.step - 1);
        Ok(StepReport {
            step: self.step - 1,
            actions,
            contacts,
            infections,
            communications,
            deaths,
            rewards,
            quarantined_in_public,
            metrics,
        })
    }

    /// How `observer` reacts to what it saw `actor` doing, if at all. At most
    /// one communication per observer-actor pair.
    fn react<R: Rng + ?Sized>(
        &self,
        observer: AgentId,
        actor: AgentId,
        seen: Symptom,
        society: &SocietyProfile,
        rng: &mut R,
    ) -> Option<CommEvent> {
        let obs = &self.agents[observer as usize];
        let act = &self.agents[actor as usize];
        let view = View::new()
            .with(Attribute::ObsHealth, seen.value())
            .with(Attribute::Loc, act.location.site().value())
            .with(
                Attribute::Vaccinated,
                crate::norm::Value::from_bool(act.vaccinated),
            );
        for norm in &self.env.norms {
            if !role_admits(&norm.object, obs) || !role_admits(&norm.subject, act) {
                continue;
            }
            // Norms over attributes an observer cannot see are skipped.
            let Ok(outcome) = norm.evaluate(&view) else {
                continue;
            };
            let (valence, open) = match outcome {
                NormOutcome::Inactive => continue,
                NormOutcome::Violated => (
                    Valence::Disapprove,
                    gate_by_severity(rng, seen, act.location.is_public(), society),
                ),
                NormOutcome::Satisfied => (Valence::Approve, gate_approval(rng, society)),
            };
            if !open {
                continue;
            }
            let kind = select_comm_kind(rng, society).ok()?;
            let matched = norm.matched_conditions(&view).expect("evaluated above");
            let mut event = build_event(kind, valence, observer, actor, matched)?;
            event.witnesses = self.witnesses(act.location, observer, actor);
            return Some(event);
        }
        None
    }

    fn deliver(&mut self, event: &CommEvent, outcomes: &mut [StepOutcome], learner: &mut Learner) {
        let actor = interpret(event, Audience::Actor);
        let r = event.receiver as usize;
        outcomes[r].sanction += actor.sanction;
        outcomes[r].emotion += actor.emotion;
        if actor.quarantine {
            self.agents[r].quarantine_remaining = self.config.quarantine_duration;
        }
        for &w in &event.witnesses {
            let seen = interpret(event, Audience::Witness);
            outcomes[w as usize].witnessed += seen.witnessed;
        }
        // Φ is shared, so the actor's and every witness's update coincide.
        if learner.params.potential_updates {
            if let Some(info) = &actor.potential {
                update_potential(&mut learner.phi, info);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::social::Society;

    fn world(config: WorldConfig, seed: u64) -> (World, Streams) {
        let mut streams = Streams::new(seed);
        let w = World::from_streams(&config, Environment::default(), &mut streams).unwrap();
        (w, streams)
    }

    #[test]
    fn default_initialization() {
        let (w, _) = world(WorldConfig::default(), 1);
        assert_eq!(w.agents().len(), 100);
        let asym = w
            .agents()
            .iter()
            .filter(|a| a.health == HealthState::Asymptomatic)
            .count();
        assert_eq!(asym, 30);
        assert!(w.agents().iter().all(|a| !a.vaccinated && a.at_home()));
    }

    #[test]
    fn small_and_zero_fractions() {
        let (w, _) = world(
            WorldConfig {
                population: 10,
                ..WorldConfig::default()
            },
            2,
        );
        assert_eq!(
            w.agents()
                .iter()
                .filter(|a| a.health.is_infectious())
                .count(),
            3
        );
        let (w, _) = world(
            WorldConfig {
                initial_infected_fraction: 0.0,
                ..WorldConfig::default()
            },
            2,
        );
        assert!(w.agents().iter().all(|a| a.health == HealthState::Healthy));
    }

    #[test]
    fn config_errors() {
        let mut streams = Streams::new(0);
        for bad in [
            WorldConfig {
                population: 1,
                ..WorldConfig::default()
            },
            WorldConfig {
                initial_infected_fraction: 1.5,
                ..WorldConfig::default()
            },
        ] {
            assert!(World::from_streams(&bad, Environment::default(), &mut streams).is_err());
        }
    }

    #[test]
    fn cafe_of_three_gives_three_pairs() {
        let (mut w, mut s) = world(WorldConfig::default(), 3);
        for a in w.agents_mut() {
            a.location = Place::Home(a.id);
        }
        for id in [4, 9, 17] {
            w.agents_mut()[id].location = Place::Cafe;
        }
        assert_eq!(w.contacts(&mut s.contacts), vec![(4, 9), (4, 17), (9, 17)]);
        for id in [4, 9, 17] {
            w.agents_mut()[id].location = Place::Home(id as AgentId);
        }
        assert!(w.contacts(&mut s.contacts).is_empty());
    }

    #[test]
    fn quarantine_forces_home_and_counts_down() {
        let (mut w, mut s) = world(WorldConfig::default(), 4);
        w.agents_mut()[0].quarantine_remaining = 2;
        let mut learner = Learner::new(LearnParams {
            epsilon: 1.0,
            ..LearnParams::default()
        });
        let report = w
            .step(
                &mut learner,
                &SocietyProfile::preset(Society::Penalty),
                &mut s,
            )
            .unwrap();
        let rec = report.actions.iter().find(|r| r.agent == 0).unwrap();
        assert!(rec.forced);
        assert_eq!(rec.action, ActionKind::StayHome);
        assert!(w.agents()[0].at_home());
        assert_eq!(w.agents()[0].quarantine_remaining, 1);
        assert_eq!(report.quarantined_in_public, 0);
    }

    #[test]
    fn deceased_agents_are_absent() {
        let (mut w, mut s) = world(WorldConfig::default(), 5);
        w.agents_mut()[3].health = HealthState::Deceased;
        let mut learner = Learner::new(LearnParams::default());
        let report = w
            .step(&mut learner, &SocietyProfile::preset(Society::Nest), &mut s)
            .unwrap();
        assert!(report.actions.iter().all(|r| r.agent != 3));
        assert!(report.contacts.iter().all(|&(a, b)| a != 3 && b != 3));
        assert!(report
            .communications
            .iter()
            .all(|e| e.sender != 3 && e.receiver != 3 && !e.witnesses.contains(&3)));
    }

    #[test]
    fn lone_survivor_still_reports() {
        let (mut w, mut s) = world(
            WorldConfig {
                population: 5,
                ..WorldConfig::default()
            },
            6,
        );
        for a in w.agents_mut().iter_mut().skip(1) {
            a.health = HealthState::Deceased;
        }
        let mut learner = Learner::new(LearnParams::default());
        let report = w
            .step(&mut learner, &SocietyProfile::preset(Society::Nest), &mut s)
            .unwrap();
        assert!(report.contacts.is_empty());
        assert!(report.communications.is_empty());
        assert_eq!(report.metrics.step, 0);
    }

    #[test]
    fn finished_world_signals_done() {
        let (mut w, mut s) = world(
            WorldConfig {
                episode_steps: 2,
                ..WorldConfig::default()
            },
            7,
        );
        let mut learner = Learner::new(LearnParams::default());
        let p = SocietyProfile::preset(Society::Primitive);
        assert!(w.step(&mut learner, &p, &mut s).is_ok());
        assert!(w.step(&mut learner, &p, &mut s).is_ok());
        assert_eq!(w.step(&mut learner, &p, &mut s), Err(EpisodeDone));
    }

    #[test]
    fn primitive_society_is_silent() {
        let (mut w, mut s) = world(WorldConfig::default(), 8);
        let mut learner = Learner::new(LearnParams::default());
        let p = SocietyProfile::preset(Society::Primitive);
        for _ in 0..50 {
            let r = w.step(&mut learner, &p, &mut s).unwrap();
            assert!(r.communications.is_empty());
        }
        assert!(learner.phi.is_zero());
    }

    #[test]
    fn healthy_observers_only() {
        let (mut w, mut s) = world(WorldConfig::default(), 9);
        let mut learner = Learner::new(LearnParams::default());
        let p = SocietyProfile::preset(Society::Nest);
        for _ in 0..30 {
            let health: Vec<_> = w.agents().iter().map(|a| a.health).collect();
            let r = w.step(&mut learner, &p, &mut s).unwrap();
            for e in &r.communications {
                // Health at communication time: infections this step can only
                // turn Healthy into Asymptomatic, which still shows no symptoms.
                assert_eq!(health[e.sender as usize].symptom(), Symptom::Healthy);
                assert_ne!(e.sender, e.receiver);
            }
        }
    }
}
