//! Norms, normative information, and their per-step evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

mod listing;

pub use listing::{parse_norm, parse_norm_file, parse_normative_info, ListingError};

/// Deontic type of a norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormType {
    Commitment,
    Prohibition,
}

impl NormType {
    pub fn name(self) -> &'static str {
        match self {
            NormType::Commitment => "Commitment",
            NormType::Prohibition => "Prohibition",
        }
    }
}

/// Attributes a condition may constrain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    /// Health as perceived by an observer.
    ObsHealth,
    ActualHealth,
    Loc,
    Vaccinated,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [
        Attribute::ObsHealth,
        Attribute::ActualHealth,
        Attribute::Loc,
        Attribute::Vaccinated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::ObsHealth => "obs_health",
            Attribute::ActualHealth => "actual_health",
            Attribute::Loc => "loc",
            Attribute::Vaccinated => "vaccinated",
        }
    }

    /// Attribute names are matched case-insensitively.
    pub fn from_name(name: &str) -> Option<Attribute> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(name))
    }

    pub fn domain(self) -> &'static [Value] {
        use Value::*;
        match self {
            Attribute::ObsHealth => &[Healthy, Mild, Critical],
            Attribute::ActualHealth => &[Healthy, Asymptomatic, Mild, Critical, Deceased],
            Attribute::Loc => &[Home, Park, Cafe, Clinic],
            Attribute::Vaccinated => &[True, False],
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every value that can appear on the right-hand side of a condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Healthy,
    Asymptomatic,
    Mild,
    Critical,
    Deceased,
    Home,
    Park,
    Cafe,
    Clinic,
    True,
    False,
}

impl Value {
    const ALL: [Value; 11] = [
        Value::Healthy,
        Value::Asymptomatic,
        Value::Mild,
        Value::Critical,
        Value::Deceased,
        Value::Home,
        Value::Park,
        Value::Cafe,
        Value::Clinic,
        Value::True,
        Value::False,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Value::Healthy => "HEALTHY",
            Value::Asymptomatic => "ASYMPTOMATIC",
            Value::Mild => "MILD",
            Value::Critical => "CRITICAL",
            Value::Deceased => "DECEASED",
            Value::Home => "HOME",
            Value::Park => "PARK",
            Value::Cafe => "CAFE",
            Value::Clinic => "CLINIC",
            Value::True => "TRUE",
            Value::False => "FALSE",
        }
    }

    /// Values are exact-case.
    pub fn from_name(name: &str) -> Option<Value> {
        Value::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn from_bool(b: bool) -> Value {
        if b {
            Value::True
        } else {
            Value::False
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConditionError {
    #[error("condition on {0} allows no values")]
    Empty(Attribute),
    #[error("{value} is not a value of {attribute}")]
    OutOfDomain { attribute: Attribute, value: Value },
    #[error("attribute {0} appears twice in one condition set")]
    DuplicateAttribute(Attribute),
    #[error("condition set is empty")]
    EmptySet,
}

/// `attribute ∈ allowed_values`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Condition {
    attribute: Attribute,
    values: BTreeSet<Value>,
}

impl Condition {
    pub fn new(
        attribute: Attribute,
        values: impl IntoIterator<Item = Value>,
    ) -> Result<Self, ConditionError> {
        let values: BTreeSet<Value> = values.into_iter().collect();
        if values.is_empty() {
            return Err(ConditionError::Empty(attribute));
        }
        if let Some(&value) = values.iter().find(|v| !attribute.domain().contains(v)) {
            return Err(ConditionError::OutOfDomain { attribute, value });
        }
        Ok(Condition { attribute, values })
    }

    pub fn attribute(&self) -> Attribute {
        self.attribute
    }

    pub fn values(&self) -> &BTreeSet<Value> {
        &self.values
    }

    pub fn allows(&self, value: Value) -> bool {
        self.values.contains(&value)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}=", self.attribute)?;
        if self.values.len() == 1 {
            return write!(f, "{}", self.values.iter().next().unwrap());
        }
        f.write_str("[")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}

/// A non-empty conjunction of conditions, at most one per attribute.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConditionSet(BTreeMap<Attribute, Condition>);

impl ConditionSet {
    pub fn new(conditions: impl IntoIterator<Item = Condition>) -> Result<Self, ConditionError> {
        let mut map = BTreeMap::new();
        for c in conditions {
            let attribute = c.attribute;
            if map.insert(attribute, c).is_some() {
                return Err(ConditionError::DuplicateAttribute(attribute));
            }
        }
        if map.is_empty() {
            return Err(ConditionError::EmptySet);
        }
        Ok(ConditionSet(map))
    }

    pub fn get(&self, attribute: Attribute) -> Option<&Condition> {
        self.0.get(&attribute)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Condition> {
        self.0.values()
    }

    pub fn attributes(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.0.keys().copied()
    }

    /// Whether every condition holds under `view`.
    pub fn holds(&self, view: &View) -> Result<bool, EvalError> {
        let mut all = true;
        for c in self.iter() {
            let value = view.require(c.attribute)?;
            all &= c.allows(value);
        }
        Ok(all)
    }
}

impl fmt::Display for ConditionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, c) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("}")
    }
}

/// A role label such as `Infected_Agent`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Role(String);

impl Role {
    pub fn new(label: impl Into<String>) -> Self {
        Role(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Norm {
    pub norm_type: NormType,
    pub subject: Role,
    pub object: Role,
    pub antecedent: ConditionSet,
    pub consequent: ConditionSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormOutcome {
    Inactive,
    Satisfied,
    Violated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("view has no value for {0}")]
    MissingAttribute(Attribute),
}

/// An assignment of attribute values for one agent, as seen by whoever is
/// evaluating.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct View {
    values: [Option<Value>; 4],
}

impl View {
    pub fn new() -> Self {
        View::default()
    }

    pub fn with(mut self, attribute: Attribute, value: Value) -> Self {
        self.set(attribute, value);
        self
    }

    pub fn set(&mut self, attribute: Attribute, value: Value) {
        self.values[attribute.index()] = Some(value);
    }

    pub fn get(&self, attribute: Attribute) -> Option<Value> {
        self.values[attribute.index()]
    }

    fn require(&self, attribute: Attribute) -> Result<Value, EvalError> {
        self.get(attribute)
            .ok_or(EvalError::MissingAttribute(attribute))
    }
}

impl Norm {
    /// The prohibition on symptomatic agents in public places.
    pub fn public_space_prohibition() -> Norm {
        parse_norm(listing::DEFAULT_PROHIBITION).expect("built-in prohibition parses")
    }

    /// The self-isolation commitment used for emergence detection.
    pub fn self_isolation_commitment() -> Norm {
        parse_norm(listing::DEFAULT_COMMITMENT).expect("built-in commitment parses")
    }

    /// Attributes referenced anywhere in the norm.
    pub fn attributes(&self) -> BTreeSet<Attribute> {
        self.antecedent
            .attributes()
            .chain(self.consequent.attributes())
            .collect()
    }

    /// Evaluate the norm for a single step.
    ///
    /// A prohibition counts as satisfied on any step where its antecedent
    /// holds and its consequent does not.
    pub fn evaluate(&self, view: &View) -> Result<NormOutcome, EvalError> {
        for a in self.attributes() {
            view.require(a)?;
        }
        if !self.antecedent.holds(view)? {
            return Ok(NormOutcome::Inactive);
        }
        let consequent = self.consequent.holds(view)?;
        Ok(match (self.norm_type, consequent) {
            (NormType::Prohibition, true) | (NormType::Commitment, false) => NormOutcome::Violated,
            (NormType::Prohibition, false) | (NormType::Commitment, true) => NormOutcome::Satisfied,
        })
    }

    /// Singleton conditions pinning each referenced attribute to its value in
    /// `view`, in the norm's attribute order.
    pub fn matched_conditions(&self, view: &View) -> Result<ConditionSet, EvalError> {
        let mut conditions = Vec::new();
        for a in self.attributes() {
            let v = view.require(a)?;
            conditions.push(Condition::new(a, [v]).expect("view values are in domain"));
        }
        Ok(ConditionSet::new(conditions).expect("norm references at least one attribute"))
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "norm type   = {{{}}},", self.norm_type.name())?;
        writeln!(f, "subject     = {{{}}},", self.subject)?;
        writeln!(f, "object      = {{{}}},", self.object)?;
        writeln!(f, "antecedent  = {},", self.antecedent)?;
        write!(f, "consequent  = {}", self.consequent)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InfoType {
    Message,
    Hint,
}

impl InfoType {
    pub fn name(self) -> &'static str {
        match self {
            InfoType::Message => "MESSAGE",
            InfoType::Hint => "HINT",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InfoConsequent {
    Punishment,
    Reward,
}

impl InfoConsequent {
    pub fn name(self) -> &'static str {
        match self {
            InfoConsequent::Punishment => "PUNISHMENT",
            InfoConsequent::Reward => "REWARD",
        }
    }

    /// Potential value implied by the consequent.
    pub fn potential(self) -> f64 {
        match self {
            InfoConsequent::Punishment => -1.0,
            InfoConsequent::Reward => 1.0,
        }
    }
}

/// Sender or receiver of normative information: a concrete agent at run
/// time, or a role label in a written listing.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Party {
    Agent(u32),
    Label(String),
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Agent(id) => write!(f, "{id}"),
            Party::Label(l) => f.write_str(l),
        }
    }
}

/// A conditional: when `antecedent` holds, `consequent` will follow.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NormativeInfo {
    pub sender: Party,
    pub receiver: Party,
    pub info_type: InfoType,
    pub antecedent: ConditionSet,
    pub consequent: InfoConsequent,
}

impl fmt::Display for NormativeInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sender     = {{{}}},", self.sender)?;
        writeln!(f, "receiver   = {{{}}},", self.receiver)?;
        writeln!(f, "info type  = {{{}}},", self.info_type.name())?;
        writeln!(f, "antecedent = {},", self.antecedent)?;
        write!(f, "consequent = {{{}}}", self.consequent.name())
    }
}
