//! Flat state vector for n groups.
//!
//! Layout is compartment-major: index `c * n + i` holds compartment `c` of group `i`,
//! so the vector reads S_1..S_n, E_1..E_n, Ia_1..Ia_n, Is_1..Is_n, Ih_1..Ih_n, R_1..R_n.

use serde::{Deserialize, Serialize};

use crate::model::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compartment {
    S,
    E,
    Ia,
    Is,
    Ih,
    R,
}

impl Compartment {
    pub const ALL: [Compartment; 6] = [
        Compartment::S,
        Compartment::E,
        Compartment::Ia,
        Compartment::Is,
        Compartment::Ih,
        Compartment::R,
    ];

    pub fn offset(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Compartment::S => "S",
            Compartment::E => "E",
            Compartment::Ia => "Ia",
            Compartment::Is => "Is",
            Compartment::Ih => "Ih",
            Compartment::R => "R",
        }
    }

    pub fn is_infected(self) -> bool {
        matches!(self, Compartment::E | Compartment::Ia | Compartment::Is | Compartment::Ih)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    groups: usize,
    y: Vec<f64>,
}

impl SystemState {
    pub fn zeros(groups: usize) -> Self {
        Self { t: 0.0, groups, y: vec![0.0; 6 * groups] }
    }

    pub fn from_vec(groups: usize, t: f64, y: Vec<f64>) -> Result<Self, ModelError> {
        if groups == 0 || y.len() != 6 * groups {
            return Err(ModelError::Dimension { expected: 6 * groups, got: y.len() });
        }
        Ok(Self { t, groups, y })
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.y
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.y
    }

    pub fn index(&self, c: Compartment, group: usize) -> usize {
        index(self.groups, c, group)
    }

    pub fn get(&self, c: Compartment, group: usize) -> f64 {
        self.y[self.index(c, group)]
    }

    pub fn set(&mut self, c: Compartment, group: usize, v: f64) {
        let i = self.index(c, group);
        self.y[i] = v;
    }

    pub fn class(&self, c: Compartment) -> &[f64] {
        let o = c.offset() * self.groups;
        &self.y[o..o + self.groups]
    }

    pub fn class_total(&self, c: Compartment) -> f64 {
        self.class(c).iter().sum()
    }

    pub fn group_total(&self, group: usize) -> f64 {
        Compartment::ALL.iter().map(|&c| self.get(c, group)).sum()
    }

    pub fn total(&self) -> f64 {
        self.y.iter().sum()
    }

    /// E + Ia + Is + Ih over all groups.
    pub fn infected_total(&self) -> f64 {
        Compartment::ALL
            .iter()
            .filter(|c| c.is_infected())
            .map(|&c| self.class_total(c))
            .sum()
    }

    /// Sums every class over groups into a single-group state.
    pub fn aggregate(&self) -> SystemState {
        let y = Compartment::ALL.iter().map(|&c| self.class_total(c)).collect();
        SystemState { t: self.t, groups: 1, y }
    }
}

pub(crate) fn index(groups: usize, c: Compartment, group: usize) -> usize {
    debug_assert!(group < groups);
    c.offset() * groups + group
}

/// How the simulation is seeded at the epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialConditions {
    pub population: f64,
    /// Infected persons placed in `seed_compartment` of the last (most risk-tolerant) group.
    pub seed_cases: f64,
    pub seed_compartment: Compartment,
    /// Share of susceptibles starting in group 1; the rest start in the last group.
    pub k: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self {
            population: crate::params::NYC_POPULATION,
            seed_cases: 10_000.0,
            seed_compartment: Compartment::Is,
            k: 0.0,
        }
    }
}

impl InitialConditions {
    pub fn build(&self, groups: usize) -> Result<SystemState, ModelError> {
        if !(0.0..=1.0).contains(&self.k) {
            return Err(ModelError::InvalidParams(format!("k = {} outside [0, 1]", self.k)));
        }
        if !(self.population > 0.0) || self.seed_cases < 0.0 || self.seed_cases > self.population {
            return Err(ModelError::InvalidParams(format!(
                "population {} and seed {} inconsistent",
                self.population, self.seed_cases
            )));
        }
        let mut st = SystemState::zeros(groups);
        let last = groups - 1;
        let s = self.population - self.seed_cases;
        if groups == 1 {
            st.set(Compartment::S, 0, s);
        } else {
            st.set(Compartment::S, 0, self.k * s);
            st.set(Compartment::S, last, (1.0 - self.k) * s);
        }
        st.set(self.seed_compartment, last, self.seed_cases);
        Ok(st)
    }
}
