//! Health-state machine, vaccination/home-rest modifiers, and the noisy
//! observation channel.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::norm::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HealthState {
    Healthy,
    Asymptomatic,
    Mild,
    Critical,
    Deceased,
}

impl HealthState {
    pub const ALL: [HealthState; 5] = [
        HealthState::Healthy,
        HealthState::Asymptomatic,
        HealthState::Mild,
        HealthState::Critical,
        HealthState::Deceased,
    ];

    pub fn is_infectious(self) -> bool {
        matches!(
            self,
            HealthState::Asymptomatic | HealthState::Mild | HealthState::Critical
        )
    }

    pub fn is_alive(self) -> bool {
        self != HealthState::Deceased
    }

    /// What the agent itself can tell from its symptoms. Asymptomatic
    /// infection shows nothing.
    pub fn symptom(self) -> Symptom {
        match self {
            HealthState::Healthy | HealthState::Asymptomatic => Symptom::Healthy,
            HealthState::Mild => Symptom::Mild,
            HealthState::Critical | HealthState::Deceased => Symptom::Critical,
        }
    }

    pub fn value(self) -> Value {
        match self {
            HealthState::Healthy => Value::Healthy,
            HealthState::Asymptomatic => Value::Asymptomatic,
            HealthState::Mild => Value::Mild,
            HealthState::Critical => Value::Critical,
            HealthState::Deceased => Value::Deceased,
        }
    }
}

/// Perceivable health: what an observer can believe about someone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symptom {
    Healthy,
    Mild,
    Critical,
}

impl Symptom {
    pub const ALL: [Symptom; 3] = [Symptom::Healthy, Symptom::Mild, Symptom::Critical];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn value(self) -> Value {
        match self {
            Symptom::Healthy => Value::Healthy,
            Symptom::Mild => Value::Mild,
            Symptom::Critical => Value::Critical,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum DiseaseError {
    #[error("operation is undefined for a deceased agent")]
    DeceasedInput,
}

/// Per-edge base probabilities, indexed by the source state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeProbs {
    pub asymptomatic: f64,
    pub mild: f64,
    pub critical: f64,
}

impl EdgeProbs {
    fn get(&self, state: HealthState) -> f64 {
        match state {
            HealthState::Asymptomatic => self.asymptomatic,
            HealthState::Mild => self.mild,
            HealthState::Critical => self.critical,
            HealthState::Healthy | HealthState::Deceased => 0.0,
        }
    }

    fn iter(&self) -> [(HealthState, f64); 3] {
        [
            (HealthState::Asymptomatic, self.asymptomatic),
            (HealthState::Mild, self.mild),
            (HealthState::Critical, self.critical),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiseaseParams {
    pub infection_prob: f64,
    /// α applied to vaccinated agents; unvaccinated agents use 1.
    pub vaccine_multiplier: f64,
    /// β applied to agents at home; agents elsewhere use 1.
    pub home_divisor: f64,
    /// Asymptomatic→Mild, Mild→Critical, Critical→Deceased.
    pub progress: EdgeProbs,
    /// Back to Healthy from each infected state.
    pub recover: EdgeProbs,
}

impl Default for DiseaseParams {
    fn default() -> Self {
        DiseaseParams {
            infection_prob: 0.8,
            vaccine_multiplier: 0.5,
            home_divisor: 2.0,
            progress: EdgeProbs {
                asymptomatic: 0.1,
                mild: 0.01,
                critical: 0.01,
            },
            recover: EdgeProbs {
                asymptomatic: 0.1,
                mild: 0.05,
                critical: 0.01,
            },
        }
    }
}

/// Effective one-step distribution out of an infected state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub progress: f64,
    pub recover: f64,
    pub stay: f64,
}

fn is_prob(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl DiseaseParams {
    pub fn validate(&self) -> Result<(), String> {
        if !is_prob(self.infection_prob) {
            return Err(format!(
                "infection_prob {} not in [0,1]",
                self.infection_prob
            ));
        }
        if !(self.vaccine_multiplier > 0.0 && self.vaccine_multiplier <= 1.0) {
            return Err(format!(
                "vaccine_multiplier {} not in (0,1]",
                self.vaccine_multiplier
            ));
        }
        if !(self.home_divisor >= 1.0 && self.home_divisor.is_finite()) {
            return Err(format!("home_divisor {} must be >= 1", self.home_divisor));
        }
        for ((state, p), (_, r)) in self.progress.iter().into_iter().zip(self.recover.iter()) {
            if !is_prob(p) || !is_prob(r) {
                return Err(format!("{state:?} edge probabilities must lie in [0,1]"));
            }
            // Worst case for the stay mass is unvaccinated, checked both at
            // home and away.
            for at_home in [false, true] {
                let t = self.transition_unchecked(state, false, at_home);
                if t.stay < 0.0 {
                    return Err(format!(
                        "{state:?}: progress {} + recover {} exceeds 1 (at_home={at_home})",
                        t.progress, t.recover
                    ));
                }
            }
        }
        Ok(())
    }

    fn alpha(&self, vaccinated: bool) -> f64 {
        if vaccinated {
            self.vaccine_multiplier
        } else {
            1.0
        }
    }

    fn beta(&self, at_home: bool) -> f64 {
        if at_home {
            self.home_divisor
        } else {
            1.0
        }
    }

    fn transition_unchecked(
        &self,
        state: HealthState,
        vaccinated: bool,
        at_home: bool,
    ) -> Transition {
        let progress = self.progress.get(state) * self.alpha(vaccinated) / self.beta(at_home);
        let recover = self.recover.get(state) * self.beta(at_home);
        Transition {
            progress,
            recover,
            stay: 1.0 - progress - recover,
        }
    }

    /// Effective probabilities for one step out of `state`.
    pub fn transition(
        &self,
        state: HealthState,
        vaccinated: bool,
        at_home: bool,
    ) -> Result<Transition, DiseaseError> {
        if state == HealthState::Deceased {
            return Err(DiseaseError::DeceasedInput);
        }
        Ok(self.transition_unchecked(state, vaccinated, at_home))
    }

    pub fn infection_probability(&self, vaccinated: bool) -> f64 {
        self.infection_prob * self.alpha(vaccinated)
    }
}

/// One infection attempt on a healthy agent after contact with an infectious
/// one.
pub fn try_infect<R: Rng + ?Sized>(
    rng: &mut R,
    target_vaccinated: bool,
    params: &DiseaseParams,
) -> bool {
    rng.random::<f64>() < params.infection_probability(target_vaccinated)
}

fn next_state(state: HealthState) -> HealthState {
    match state {
        HealthState::Asymptomatic => HealthState::Mild,
        HealthState::Mild => HealthState::Critical,
        HealthState::Critical => HealthState::Deceased,
        other => other,
    }
}

/// One step of disease progression. Progression takes the low end of a
/// single uniform draw and recovery the band above it.
pub fn progress<R: Rng + ?Sized>(
    rng: &mut R,
    state: HealthState,
    vaccinated: bool,
    at_home: bool,
    params: &DiseaseParams,
) -> Result<HealthState, DiseaseError> {
    let t = params.transition(state, vaccinated, at_home)?;
    if state == HealthState::Healthy {
        return Ok(state);
    }
    let u = rng.random::<f64>();
    Ok(if u < t.progress {
        next_state(state)
    } else if u < t.progress + t.recover {
        HealthState::Healthy
    } else {
        state
    })
}

/// Rows of P(perceived | actual) over (Healthy, Mild, Critical).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationModel {
    pub healthy: [f64; 3],
    pub asymptomatic: [f64; 3],
    pub mild: [f64; 3],
    pub critical: [f64; 3],
}

impl Default for ObservationModel {
    fn default() -> Self {
        ObservationModel {
            healthy: [0.8, 0.1, 0.1],
            asymptomatic: [0.5, 0.5, 0.0],
            mild: [0.3, 0.6, 0.1],
            critical: [0.1, 0.3, 0.6],
        }
    }
}

impl ObservationModel {
    pub fn row(&self, actual: HealthState) -> Result<[f64; 3], DiseaseError> {
        match actual {
            HealthState::Healthy => Ok(self.healthy),
            HealthState::Asymptomatic => Ok(self.asymptomatic),
            HealthState::Mild => Ok(self.mild),
            HealthState::Critical => Ok(self.critical),
            HealthState::Deceased => Err(DiseaseError::DeceasedInput),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, row) in [
            ("healthy", self.healthy),
            ("asymptomatic", self.asymptomatic),
            ("mild", self.mild),
            ("critical", self.critical),
        ] {
            if row.iter().any(|p| !is_prob(*p)) {
                return Err(format!("observation row {name} has an entry outside [0,1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(format!("observation row {name} sums to {sum}, not 1"));
            }
        }
        Ok(())
    }
}

/// Sample how an observer perceives an agent whose true state is `actual`.
pub fn observe_health<R: Rng + ?Sized>(
    rng: &mut R,
    actual: HealthState,
    model: &ObservationModel,
) -> Result<Symptom, DiseaseError> {
    let row = model.row(actual)?;
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (symptom, p) in Symptom::ALL.into_iter().zip(row) {
        acc += p;
        if u < acc {
            return Ok(symptom);
        }
    }
    // Rounding left a sliver above the last cumulative bound; take the last
    // category with positive mass.
    Ok(Symptom::ALL
        .into_iter()
        .zip(row)
        .rev()
        .find(|(_, p)| *p > 0.0)
        .map(|(s, _)| s)
        .unwrap_or(Symptom::Healthy))
}
