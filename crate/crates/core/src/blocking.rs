//! Blocking plans: where the 2D block grid is cut.
//!
//! A plan is a strictly increasing list of split positions `P0 = 0 < P1 <
//! ... < Pp = n`; block `i` covers rows and columns `[P(i), P(i+1))`. Three
//! producers live here:
//!
//! * [`regular_plan`] cuts every `block_size` rows.
//! * [`irregular_plan`] walks the sampled percentage curve window by window.
//!   A window whose curve increase reaches the threshold is dense and ends a
//!   block; sparse windows are merged until `max_num` of them have been
//!   skipped, at which point a cut is forced so blocks stay bounded.
//! * [`pangulu_size_select`] picks one fixed size from the candidate list
//!   `{200, 300, 500, 1000, 2000, 5000}` with a small lookup rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{sample_to_index, PercentCurve, DEFAULT_SAMPLE_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Regular,
    Irregular,
}

/// How the irregular walk advances between comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// `i` advances by `step`; windows do not overlap.
    #[default]
    Disjoint,
    /// `i` advances by one sample; consecutive windows overlap.
    Overlapping,
}

/// Dense-window threshold on the curve increase over one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// `step / sample_points`: the increase an evenly banded matrix would show.
    Linear,
    Fixed(f64),
}

impl std::str::FromStr for Threshold {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("linear") {
            return Ok(Threshold::Linear);
        }
        s.parse::<f64>()
            .map(Threshold::Fixed)
            .map_err(|_| format!("threshold must be a number or 'linear', got '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrregularParams {
    pub sample_points: usize,
    pub step: usize,
    pub max_num: usize,
    pub threshold: Threshold,
    pub window: WindowMode,
}

impl Default for IrregularParams {
    fn default() -> Self {
        IrregularParams {
            sample_points: DEFAULT_SAMPLE_POINTS,
            step: 2,
            max_num: 3,
            threshold: Threshold::Linear,
            window: WindowMode::Disjoint,
        }
    }
}

/// Parameters recorded alongside a plan's positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanParams {
    Irregular {
        sample_points: usize,
        step: usize,
        max_num: usize,
        threshold: f64,
        window: WindowMode,
    },
    Regular {
        block_size: usize,
    },
    Explicit {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockingPlan {
    n: usize,
    strategy: Strategy,
    params: PlanParams,
    positions: Vec<usize>,
}

impl BlockingPlan {
    /// A plan with hand-picked split positions.
    pub fn from_positions(n: usize, positions: Vec<usize>) -> Result<Self> {
        let plan = BlockingPlan {
            n,
            strategy: Strategy::Irregular,
            params: PlanParams::Explicit {},
            positions,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.positions;
        if p.len() < 2 || p[0] != 0 || *p.last().unwrap() != self.n {
            return Err(Error::BadParams(format!(
                "positions must run from 0 to {} with at least one block",
                self.n
            )));
        }
        if p.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadParams("positions must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn params(&self) -> &PlanParams {
        &self.params
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn num_blocks(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn span(&self, block: usize) -> usize {
        self.positions[block + 1] - self.positions[block]
    }

    pub fn spans(&self) -> impl Iterator<Item = usize> + '_ {
        self.positions.windows(2).map(|w| w[1] - w[0])
    }

    pub fn min_span(&self) -> usize {
        self.spans().min().unwrap_or(0)
    }

    pub fn max_span(&self) -> usize {
        self.spans().max().unwrap_or(0)
    }

    /// Block containing matrix index `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.positions.partition_point(|&p| p <= i) - 1
    }

    /// Block id for every matrix index.
    pub fn block_map(&self) -> Vec<usize> {
        let mut map = Vec::with_capacity(self.n);
        for (b, w) in self.positions.windows(2).enumerate() {
            map.extend(std::iter::repeat_n(b, w[1] - w[0]));
        }
        map
    }
}

pub fn regular_plan(n: usize, block_size: usize) -> Result<BlockingPlan> {
    if block_size == 0 || block_size > n {
        return Err(Error::BadParams(format!(
            "block size must be in 1..={n}, got {block_size}"
        )));
    }
    let mut positions: Vec<usize> = (0..n).step_by(block_size).collect();
    positions.push(n);
    Ok(BlockingPlan {
        n,
        strategy: Strategy::Regular,
        params: PlanParams::Regular { block_size },
        positions,
    })
}

/// Increases that fall short of the threshold by less than this count as
/// reaching it, so exact ties survive floating-point rounding.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub fn irregular_plan(curve: &PercentCurve, params: &IrregularParams) -> Result<BlockingPlan> {
    let n = curve.n();
    let sp = curve.sample_points();
    let IrregularParams {
        mut step, max_num, window, ..
    } = *params;
    if sp == 0 {
        return Err(Error::DegenerateCurve("no sample points".into()));
    }
    // A one-sample curve (order 1) has a single window.
    if sp == 1 {
        step = step.min(1);
    }
    if step == 0 || step > sp {
        return Err(Error::BadParams(format!("step must be in 1..={sp}, got {step}")));
    }
    if max_num == 0 {
        return Err(Error::BadParams("max_num must be at least 1".into()));
    }
    let threshold = match params.threshold {
        Threshold::Linear => step as f64 / sp as f64,
        Threshold::Fixed(t) => t,
    };
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::BadParams(format!("threshold must be in (0, 1], got {threshold}")));
    }

    let pct = curve.pct();
    let advance = match window {
        WindowMode::Disjoint => step,
        WindowMode::Overlapping => 1,
    };
    let mut positions = vec![0usize];
    let mut skipped = 0usize;
    let mut i = 0usize;
    while i < sp {
        let end = (i + step).min(sp);
        let dense = pct[end] - pct[i] >= threshold - TIE_TOLERANCE;
        if dense || skipped >= max_num {
            let pos = sample_to_index(end, n, sp);
            if pos > *positions.last().unwrap() && pos <= n {
                positions.push(pos);
            }
            skipped = 0;
        } else {
            skipped += 1;
        }
        i += advance;
    }
    if *positions.last().unwrap() != n {
        positions.push(n);
    }
    let plan = BlockingPlan {
        n,
        strategy: Strategy::Irregular,
        params: PlanParams::Irregular {
            sample_points: sp,
            step,
            max_num,
            threshold,
            window,
        },
        positions,
    };
    plan.validate()?;
    Ok(plan)
}

/// Candidate fixed block sizes for the regular baseline.
pub const PANGULU_SIZES: [usize; 6] = [200, 300, 500, 1000, 2000, 5000];

/// Deterministic stand-in for a learned block-size selector.
///
/// Target size is `2 * sqrt(n)`, halved when the filled density
/// `nnz_filled / n^2` is at least `1e-2`; the smallest candidate at or above
/// the target wins, and 5000 is used when none is. The result can exceed `n`;
/// [`pangulu_plan`] clamps it.
pub fn pangulu_size_select(n: usize, nnz_filled: usize) -> usize {
    let n_f = n.max(1) as f64;
    let density = nnz_filled as f64 / (n_f * n_f);
    let mut target = 2.0 * n_f.sqrt();
    if density >= 1e-2 {
        target *= 0.5;
    }
    PANGULU_SIZES
        .iter()
        .copied()
        .find(|&s| s as f64 >= target)
        .unwrap_or(*PANGULU_SIZES.last().unwrap())
}

/// Regular plan using [`pangulu_size_select`], clamped to a single block when
/// the selected size exceeds `n`.
pub fn pangulu_plan(n: usize, nnz_filled: usize) -> Result<BlockingPlan> {
    regular_plan(n, pangulu_size_select(n, nnz_filled).min(n))
}
