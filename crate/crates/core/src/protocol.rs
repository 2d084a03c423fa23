//! Node-level quantities and the event-trigger predicates.
//!
//! Everything here is exact integer arithmetic. A ratio `y / z` is carried as
//! the pair itself and compared by cross-multiplication; no float is formed.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Transferable mass: `y` is the value numerator, `z` counts how many unit
/// masses have merged into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Mass {
    pub y: i64,
    pub z: u64,
}

impl Mass {
    pub const ZERO: Mass = Mass { y: 0, z: 0 };

    pub const fn new(y: i64, z: u64) -> Self {
        Mass { y, z }
    }

    /// The mass every node starts with.
    pub const fn unit(value: i64) -> Self {
        Mass { y: value, z: 1 }
    }

    pub fn is_zero(&self) -> bool {
        self.z == 0
    }

    pub fn checked_add(self, other: Mass) -> Result<Mass> {
        Ok(Mass {
            y: self
                .y
                .checked_add(other.y)
                .ok_or(Error::Overflow("mass merge"))?,
            z: self
                .z
                .checked_add(other.z)
                .ok_or(Error::Overflow("mass merge"))?,
        })
    }

    /// Order on `(z, y)`, the order used to rank masses and states.
    pub fn lex_cmp(&self, other: &Mass) -> Ordering {
        (self.z, self.y).cmp(&(other.z, other.y))
    }

    pub fn cmp_state(&self, state: &StatePair) -> Ordering {
        (self.z, self.y).cmp(&(state.z, state.y))
    }
}

impl fmt::Display for Mass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.y, self.z)
    }
}

/// A node's estimate `y / z` of the average. `z` is at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StatePair {
    y: i64,
    z: u64,
}

impl StatePair {
    /// Panics if `z == 0`.
    pub fn new(y: i64, z: u64) -> Self {
        assert!(z >= 1, "state denominator must be at least 1");
        StatePair { y, z }
    }

    pub fn initial(value: i64) -> Self {
        StatePair { y: value, z: 1 }
    }

    /// The state a node adopts from a mass; `None` for a zero mass.
    pub fn from_mass(mass: Mass) -> Option<Self> {
        (mass.z >= 1).then_some(StatePair {
            y: mass.y,
            z: mass.z,
        })
    }

    pub fn y(&self) -> i64 {
        self.y
    }

    pub fn z(&self) -> u64 {
        self.z
    }

    pub fn lex_cmp(&self, other: &StatePair) -> Ordering {
        (self.z, self.y).cmp(&(other.z, other.y))
    }

    /// Exact comparison of the ratios `y / z`.
    pub fn ratio_cmp(&self, other: &StatePair) -> Ordering {
        (self.y as i128 * other.z as i128).cmp(&(other.y as i128 * self.z as i128))
    }

    pub fn as_f64(&self) -> f64 {
        self.y as f64 / self.z as f64
    }
}

impl fmt::Display for StatePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}", self.y, self.z)
    }
}

/// Per-node protocol variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeState {
    pub mass: Mass,
    pub state: StatePair,
    /// Index into the node's priority order of the next unicast recipient.
    pub rr_pointer: usize,
}

impl NodeState {
    pub fn initial(value: i64) -> Self {
        NodeState {
            mass: Mass::unit(value),
            state: StatePair::initial(value),
            rr_pointer: 0,
        }
    }
}

/// The target average kept as `total / count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Average {
    pub total: i64,
    pub count: usize,
}

impl Average {
    pub fn as_f64(&self) -> f64 {
        self.total as f64 / self.count as f64
    }
}

impl fmt::Display for Average {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}", self.total, self.count)
    }
}

pub fn exact_average(initial_values: &[i64]) -> Result<Average> {
    if initial_values.len() < 2 {
        return Err(Error::TooFewNodes(initial_values.len()));
    }
    let total = initial_values
        .iter()
        .try_fold(0i64, |acc, v| acc.checked_add(*v))
        .ok_or(Error::Overflow("initial value sum"))?;
    Ok(Average {
        total,
        count: initial_values.len(),
    })
}

/// Componentwise sum of the held mass and everything received this round.
pub fn merge_masses<'a, I>(own: Mass, incoming: I) -> Result<Mass>
where
    I: IntoIterator<Item = &'a Mass>,
{
    incoming
        .into_iter()
        .try_fold(own, |acc, m| acc.checked_add(*m))
}

/// Randomized protocol: adopt the mass as state when `z >= z^s`.
///
/// There is deliberately no tie-break on `y` here.
pub fn randomized_trigger(mass: &Mass, state: &StatePair) -> bool {
    mass.z >= state.z
}

/// Deterministic protocol: `z > z^s`, or `z == z^s` and `y >= y^s`.
pub fn event_trigger(mass: &Mass, state: &StatePair) -> bool {
    mass.cmp_state(state) != Ordering::Less
}

/// State-propagation rule of the minimum-mass protocol.
///
/// If some received state beats `own` in `(z^s, y^s)` order, returns the
/// largest `z^s` seen and, among states with that `z^s`, the largest `y^s`.
/// `own` takes part in both maxima, so the result is never below it.
pub fn dominant_received_state(own: &StatePair, received: &[StatePair]) -> Option<StatePair> {
    if !received.iter().any(|s| s.lex_cmp(own) == Ordering::Greater) {
        return None;
    }
    received
        .iter()
        .chain(std::iter::once(own))
        .copied()
        .max_by(|a, b| a.lex_cmp(b))
}

/// Minimum-mass protocol: forward a nonzero mass that ranks below the state.
pub fn forward_trigger(mass: &Mass, state: &StatePair) -> bool {
    mass.z > 0 && mass.cmp_state(state) == Ordering::Less
}

/// Minimum-mass protocol: adopt a mass that ranks strictly above the state.
pub fn adopt_trigger(mass: &Mass, state: &StatePair) -> bool {
    mass.cmp_state(state) == Ordering::Greater
}

/// `y^s / z^s == total / count`, decided by cross-multiplication.
pub fn state_equals_average(state: &StatePair, avg: &Average) -> bool {
    state.y as i128 * avg.count as i128 == state.z as i128 * avg.total as i128
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(y: i64, z: u64) -> StatePair {
        StatePair::new(y, z)
    }

    fn m(y: i64, z: u64) -> Mass {
        Mass::new(y, z)
    }

    #[test]
    fn averages_of_examples() {
        assert_eq!(
            exact_average(&[9, 3, 9, 3]).unwrap(),
            Average {
                total: 24,
                count: 4
            }
        );
        assert_eq!(
            exact_average(&[2, 4, 7, 9]).unwrap(),
            Average {
                total: 22,
                count: 4
            }
        );
        assert_eq!(
            exact_average(&[0, 0, 0]).unwrap(),
            Average { total: 0, count: 3 }
        );
        assert_eq!(exact_average(&[5]), Err(Error::TooFewNodes(1)));
        assert!(matches!(
            exact_average(&[i64::MAX, 1]),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn merging() {
        assert_eq!(merge_masses(m(3, 1), &[m(9, 1)]).unwrap(), m(12, 2));
        assert_eq!(merge_masses(m(-4, 2), &[]).unwrap(), m(-4, 2));
        assert_eq!(
            merge_masses(Mass::ZERO, &[m(2, 1), m(4, 1)]).unwrap(),
            m(6, 2)
        );
        assert!(merge_masses(m(i64::MAX, 1), &[m(1, 1)]).is_err());
    }

    #[test]
    fn randomized_trigger_cases() {
        assert!(randomized_trigger(&m(12, 2), &s(9, 1)));
        assert!(!randomized_trigger(&Mass::ZERO, &s(9, 1)));
        assert!(randomized_trigger(&m(5, 1), &s(9, 1)));
    }

    #[test]
    fn event_trigger_cases() {
        assert!(!event_trigger(&m(3, 1), &s(9, 1)));
        assert!(event_trigger(&m(12, 2), &s(9, 1)));
        assert!(event_trigger(&m(9, 1), &s(9, 1)));
        assert!(!event_trigger(&Mass::ZERO, &s(-9, 1)));
    }

    #[test]
    fn dominant_state_cases() {
        assert_eq!(
            dominant_received_state(&s(2, 1), &[s(4, 1), s(7, 1)]),
            Some(s(7, 1))
        );
        assert_eq!(dominant_received_state(&s(11, 2), &[s(9, 1)]), None);
        assert_eq!(dominant_received_state(&s(5, 1), &[s(5, 1)]), None);
        assert_eq!(dominant_received_state(&s(5, 1), &[]), None);
        assert_eq!(
            dominant_received_state(&s(5, 1), &[s(1, 2), s(30, 1), s(3, 2)]),
            Some(s(3, 2))
        );
    }

    #[test]
    fn forward_trigger_cases() {
        assert!(forward_trigger(&m(4, 1), &s(7, 1)));
        assert!(!forward_trigger(&m(11, 2), &s(11, 2)));
        assert!(!forward_trigger(&Mass::ZERO, &s(9, 1)));
        assert!(forward_trigger(&m(30, 1), &s(1, 2)));
    }

    #[test]
    fn adopt_trigger_cases() {
        assert!(adopt_trigger(&m(11, 2), &s(9, 1)));
        assert!(!adopt_trigger(&m(11, 2), &s(11, 2)));
        assert!(!adopt_trigger(&Mass::ZERO, &s(-100, 1)));
    }

    #[test]
    fn average_equality_cases() {
        let avg22 = Average {
            total: 22,
            count: 4,
        };
        let avg24 = Average {
            total: 24,
            count: 4,
        };
        assert!(state_equals_average(&s(11, 2), &avg22));
        assert!(state_equals_average(&s(12, 2), &avg24));
        assert!(!state_equals_average(&s(9, 1), &avg24));
        assert!(state_equals_average(
            &s(-3, 1),
            &Average {
                total: -6,
                count: 2
            }
        ));
    }

    fn mass_strategy() -> impl Strategy<Value = Mass> {
        (-1000i64..1000, 0u64..20).prop_map(|(y, z)| Mass::new(if z == 0 { 0 } else { y }, z))
    }

    fn state_strategy() -> impl Strategy<Value = StatePair> {
        (-1000i64..1000, 1u64..20).prop_map(|(y, z)| StatePair::new(y, z))
    }

    proptest! {
        #[test]
        fn event_trigger_is_monotone(a in mass_strategy(), b in mass_strategy(), st in state_strategy()) {
            let (lo, hi) = if a.lex_cmp(&b) == Ordering::Greater { (b, a) } else { (a, b) };
            if event_trigger(&lo, &st) {
                prop_assert!(event_trigger(&hi, &st));
            }
        }

        #[test]
        fn forward_and_adopt_are_exclusive(mass in mass_strategy(), st in state_strategy()) {
            let fwd = forward_trigger(&mass, &st);
            let adopt = adopt_trigger(&mass, &st);
            prop_assert!(!(fwd && adopt));
            let neither = !fwd && !adopt;
            let expected = mass.z == 0 || (mass.z == st.z() && mass.y == st.y());
            prop_assert_eq!(neither, expected);
        }

        #[test]
        fn dominant_state_never_downgrades(
            own in state_strategy(),
            received in prop::collection::vec(state_strategy(), 0..6),
        ) {
            if let Some(next) = dominant_received_state(&own, &received) {
                prop_assert_eq!(next.lex_cmp(&own), Ordering::Greater);
                for r in &received {
                    prop_assert_ne!(r.lex_cmp(&next), Ordering::Greater);
                }
            }
        }

        #[test]
        fn average_check_is_scale_invariant(
            y in -500i64..500, z in 1u64..30, total in -500i64..500, count in 2usize..30, alpha in 1u64..50,
        ) {
            let avg = Average { total, count };
            let base = state_equals_average(&StatePair::new(y, z), &avg);
            let scaled = state_equals_average(&StatePair::new(y * alpha as i64, z * alpha), &avg);
            prop_assert_eq!(base, scaled);
        }

        #[test]
        fn merge_is_order_independent(own in mass_strategy(), mut incoming in prop::collection::vec(mass_strategy(), 0..8)) {
            let forward = merge_masses(own, &incoming).unwrap();
            incoming.reverse();
            prop_assert_eq!(merge_masses(own, &incoming).unwrap(), forward);
            let (left, right) = incoming.split_at(incoming.len() / 2);
            let partial = merge_masses(own, left).unwrap();
            prop_assert_eq!(merge_masses(partial, right).unwrap(), forward);
        }
    }
}
