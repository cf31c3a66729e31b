use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::disease::HealthState;
use crate::norm::Value;

pub type AgentId = u32;

/// Kind of place, with every home collapsed to `Home`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Home,
    Park,
    Cafe,
    Clinic,
}

impl Site {
    pub const ALL: [Site; 4] = [Site::Home, Site::Park, Site::Cafe, Site::Clinic];
    pub const PUBLIC: [Site; 3] = [Site::Park, Site::Cafe, Site::Clinic];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_public(self) -> bool {
        self != Site::Home
    }

    pub fn value(self) -> Value {
        match self {
            Site::Home => Value::Home,
            Site::Park => Value::Park,
            Site::Cafe => Value::Cafe,
            Site::Clinic => Value::Clinic,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Site::Home => "home",
            Site::Park => "park",
            Site::Cafe => "cafe",
            Site::Clinic => "clinic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Place {
    Home(AgentId),
    Park,
    Cafe,
    Clinic,
}

impl Place {
    pub fn site(self) -> Site {
        match self {
            Place::Home(_) => Site::Home,
            Place::Park => Site::Park,
            Place::Cafe => Site::Cafe,
            Place::Clinic => Site::Clinic,
        }
    }

    pub fn is_public(self) -> bool {
        self.site().is_public()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    Rest,
    Hike,
    Shop,
    BeVaccinated,
}

impl GoalKind {
    pub const ALL: [GoalKind; 4] = [
        GoalKind::Rest,
        GoalKind::Hike,
        GoalKind::Shop,
        GoalKind::BeVaccinated,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            GoalKind::Rest => "rest",
            GoalKind::Hike => "hike",
            GoalKind::Shop => "shop",
            GoalKind::BeVaccinated => "be_vaccinated",
        }
    }

    pub fn from_name(name: &str) -> Option<GoalKind> {
        GoalKind::ALL.into_iter().find(|g| g.name() == name)
    }
}

impl fmt::Display for GoalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    StayHome,
    VisitPark,
    VisitCafe,
    VisitClinic,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] = [
        ActionKind::StayHome,
        ActionKind::VisitPark,
        ActionKind::VisitCafe,
        ActionKind::VisitClinic,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> ActionKind {
        ActionKind::ALL[i]
    }

    pub fn destination(self) -> Site {
        match self {
            ActionKind::StayHome => Site::Home,
            ActionKind::VisitPark => Site::Park,
            ActionKind::VisitCafe => Site::Cafe,
            ActionKind::VisitClinic => Site::Clinic,
        }
    }

    pub fn place(self, owner: AgentId) -> Place {
        match self {
            ActionKind::StayHome => Place::Home(owner),
            ActionKind::VisitPark => Place::Park,
            ActionKind::VisitCafe => Place::Cafe,
            ActionKind::VisitClinic => Place::Clinic,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::StayHome => "stay_home",
            ActionKind::VisitPark => "visit_park",
            ActionKind::VisitCafe => "visit_cafe",
            ActionKind::VisitClinic => "visit_clinic",
        }
    }

    pub fn from_name(name: &str) -> Option<ActionKind> {
        ActionKind::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// rest↔stay_home, hike↔visit_park, shop↔visit_cafe, be_vaccinated↔visit_clinic.
pub fn goal_satisfied(goal: GoalKind, action: ActionKind) -> bool {
    matches!(
        (goal, action),
        (GoalKind::Rest, ActionKind::StayHome)
            | (GoalKind::Hike, ActionKind::VisitPark)
            | (GoalKind::Shop, ActionKind::VisitCafe)
            | (GoalKind::BeVaccinated, ActionKind::VisitClinic)
    )
}

/// Uniform over the goals still open to the agent; vaccinated agents never
/// draw `be_vaccinated`. A fixed goal overrides the draw.
pub fn assign_goal<R: Rng + ?Sized>(
    rng: &mut R,
    vaccinated: bool,
    fixed: Option<GoalKind>,
) -> GoalKind {
    if let Some(goal) = fixed {
        return goal;
    }
    let open = if vaccinated { 3 } else { 4 };
    GoalKind::ALL[rng.random_range(0..open)]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub id: AgentId,
    pub health: HealthState,
    pub vaccinated: bool,
    pub location: Place,
    pub goal: GoalKind,
    pub quarantine_remaining: u32,
    pub infections_caught: u32,
    pub goals_satisfied: u32,
}

impl Agent {
    pub fn new(id: AgentId, health: HealthState, goal: GoalKind) -> Self {
        Agent {
            id,
            health,
            vaccinated: false,
            location: Place::Home(id),
            goal,
            quarantine_remaining: 0,
            infections_caught: 0,
            goals_satisfied: 0,
        }
    }

    pub fn is_alive(&self) -> bool {
        self.health.is_alive()
    }

    pub fn at_home(&self) -> bool {
        self.location == Place::Home(self.id)
    }

    pub fn quarantined(&self) -> bool {
        self.quarantine_remaining > 0
    }
}
