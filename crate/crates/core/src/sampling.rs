//! Annotation sampling plans and the deepen/stop rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PILOT_SIZE: usize = 50;
pub const PILOT_TOP: usize = 5;
pub const PILOT_DEPTH: f64 = 0.9;
pub const TRIAGE_TOP: usize = 20;
pub const TRIAGE_STEP: usize = 6;
pub const TRIAGE_INTERVALS: usize = 30;
pub const TRIAGE_WINDOW: usize = 200;
pub const EXHAUSTIVE_CAP: usize = 200;
pub const DEFAULT_DEEPEN_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pilot,
    Triage,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Top,
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub rank: usize,
    pub reason: Reason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub query_id: String,
    pub stage: Stage,
    pub pool_size: usize,
    pub entries: Vec<PlanEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SamplingPlan {
    pub fn ranks(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.rank).collect()
    }
}

fn top(range: std::ops::RangeInclusive<usize>) -> impl Iterator<Item = PlanEntry> {
    range.map(|rank| PlanEntry {
        rank,
        reason: Reason::Top,
    })
}

/// The top five ranks plus 45 evenly spaced ranks reaching to 90% of the
/// pool. Rounded positions that collide move up to the next free rank.
pub fn pilot_plan(query_id: &str, pool_size: usize) -> SamplingPlan {
    let mut plan = SamplingPlan {
        query_id: query_id.to_owned(),
        stage: Stage::Pilot,
        pool_size,
        entries: Vec::new(),
        warnings: Vec::new(),
    };
    if pool_size < PILOT_SIZE {
        plan.entries = top(1..=pool_size).collect();
        plan.warnings.push(format!(
            "pool of {pool_size} is smaller than the {PILOT_SIZE}-hit pilot; covering every rank"
        ));
        return plan;
    }
    plan.entries.extend(top(1..=PILOT_TOP));
    let intervals = PILOT_SIZE - PILOT_TOP;
    let span = PILOT_DEPTH * pool_size as f64 - PILOT_TOP as f64;
    let mut last = PILOT_TOP;
    for i in 1..=intervals {
        let pos = (PILOT_TOP as f64 + i as f64 * span / intervals as f64).round() as usize;
        let rank = pos.max(last + 1);
        plan.entries.push(PlanEntry {
            rank,
            reason: Reason::Interval,
        });
        last = rank;
    }
    plan
}

/// Ranks 1-20 plus every sixth rank from 21 to 195.
pub fn triage_plan(query_id: &str, pool_size: usize) -> Result<SamplingPlan> {
    if pool_size < TRIAGE_WINDOW {
        return Err(Error::PoolTooSmall {
            pool: pool_size,
            required: TRIAGE_WINDOW,
        });
    }
    let entries = top(1..=TRIAGE_TOP)
        .chain((0..TRIAGE_INTERVALS).map(|j| PlanEntry {
            rank: TRIAGE_TOP + 1 + j * TRIAGE_STEP,
            reason: Reason::Interval,
        }))
        .collect();
    Ok(SamplingPlan {
        query_id: query_id.to_owned(),
        stage: Stage::Triage,
        pool_size,
        entries,
        warnings: Vec::new(),
    })
}

pub fn exhaustive_plan(query_id: &str, pool_size: usize) -> SamplingPlan {
    SamplingPlan {
        query_id: query_id.to_owned(),
        stage: Stage::Exhaustive,
        pool_size,
        entries: top(1..=pool_size.min(EXHAUSTIVE_CAP)).collect(),
        warnings: Vec::new(),
    }
}

pub fn plan_for(stage: Stage, query_id: &str, pool_size: usize) -> Result<SamplingPlan> {
    match stage {
        Stage::Pilot => Ok(pilot_plan(query_id, pool_size)),
        Stage::Triage => triage_plan(query_id, pool_size),
        Stage::Exhaustive => Ok(exhaustive_plan(query_id, pool_size)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Deepen,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepeningDecision {
    pub query_id: String,
    /// `None` when every annotation was Don't Know (or there were none).
    pub significant_density: Option<f64>,
    pub threshold: f64,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Density of significant labels among decided annotations, and whether it
/// clears `threshold`. Don't Know annotations are left out of the
/// denominator.
pub fn decide_deepening(
    query_id: &str,
    significant: usize,
    total: usize,
    dont_know: usize,
    threshold: f64,
) -> DeepeningDecision {
    let decided = total.saturating_sub(dont_know);
    if decided == 0 {
        return DeepeningDecision {
            query_id: query_id.to_owned(),
            significant_density: None,
            threshold,
            decision: Decision::Stop,
            warning: Some("no decided annotations; density undefined".into()),
        };
    }
    let density = significant as f64 / decided as f64;
    DeepeningDecision {
        query_id: query_id.to_owned(),
        significant_density: Some(density),
        threshold,
        decision: if density >= threshold {
            Decision::Deepen
        } else {
            Decision::Stop
        },
        warning: None,
    }
}
