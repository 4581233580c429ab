//! Training-time mixing: global augmentation, trigger draws, LaserMix then
//! PolarMix, and a record of every resolved random choice for replay.
//!
//! Each random stage reads its own ChaCha8 stream derived from the sample
//! seed, so e.g. the LaserMix plan for a seed does not depend on whether
//! global augmentation or PolarMix ran.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{apply_augmentation, PointCloud, RigidAugmentation};
use crate::lasermix::{self, LaserMixPlan};
use crate::polarmix::{self, PolarMixPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Lasermix,
    Polarmix,
    Both,
}

impl Strategy {
    pub fn uses_lasermix(self) -> bool {
        matches!(self, Strategy::Lasermix | Strategy::Both)
    }

    pub fn uses_polarmix(self) -> bool {
        matches!(self, Strategy::Polarmix | Strategy::Both)
    }
}

/// Independent random streams per stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Triggers = 0,
    LaserMix = 1,
    PolarMix = 2,
    GlobalAugment = 3,
    Partner = 4,
    TtaViews = 5,
}

pub fn stage_rng(seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng
}

/// Per-sample seed for position `index` of a dataset run (SplitMix64).
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trigger outcomes for one sample. Both uniforms are always drawn.
pub fn draw_triggers(seed: u64, strategy: Strategy, p1: f64, p2: f64) -> (bool, bool) {
    let mut rng = stage_rng(seed, Stage::Triggers);
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (
        strategy.uses_lasermix() && u1 < p1,
        strategy.uses_polarmix() && u2 < p2,
    )
}

/// Everything needed to reproduce one mixed sample without an RNG.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixRecord {
    pub seed: u64,
    pub strategy: Strategy,
    pub p1: f64,
    pub p2: f64,
    pub lasermix_triggered: bool,
    pub polarmix_triggered: bool,
    /// Global augmentation per input (primary, LaserMix partner, PolarMix
    /// partner), applied to each scan before mixing.
    pub global_augmentation: Option<[RigidAugmentation; 3]>,
    pub lasermix: Option<LaserMixPlan>,
    pub polarmix: Option<PolarMixPlan>,
}

/// The scans taking part in one mix.
#[derive(Clone, Copy)]
pub struct MixSources<'a> {
    pub primary: &'a PointCloud,
    pub lasermix_partner: &'a PointCloud,
    pub polarmix_partner: &'a PointCloud,
}

impl<'a> MixSources<'a> {
    pub fn pair(a: &'a PointCloud, b: &'a PointCloud) -> Self {
        Self {
            primary: a,
            lasermix_partner: b,
            polarmix_partner: b,
        }
    }
}

/// Draws all randomness for one sample and applies it.
pub fn mix_sample(
    sources: MixSources<'_>,
    strategy: Strategy,
    config: &RunConfig,
    seed: u64,
) -> Result<(PointCloud, MixRecord)> {
    config.validate()?;
    let (fire_l, fire_p) = draw_triggers(seed, strategy, config.p1, config.p2);

    let global_augmentation = config.augment.enabled.then(|| {
        let mut rng = stage_rng(seed, Stage::GlobalAugment);
        let r = &config.augment.ranges;
        [r.sample(&mut rng), r.sample(&mut rng), r.sample(&mut rng)]
    });
    let (primary, lpartner, ppartner) = augmented(sources, global_augmentation.as_ref())?;

    let mut current = primary;
    let mut lplan = None;
    if fire_l {
        let plan = lasermix::make_plan(
            &current,
            &lpartner,
            &config.lasermix,
            &mut stage_rng(seed, Stage::LaserMix),
        )?;
        current = lasermix::laser_mix(&current, &lpartner, &plan)?.0;
        lplan = Some(plan);
    }
    let mut pplan = None;
    if fire_p {
        let plan = polarmix::sample_plan(&config.polarmix, &mut stage_rng(seed, Stage::PolarMix))?;
        current = polarmix::polar_mix(&current, &ppartner, &plan)?;
        pplan = Some(plan);
    }

    let record = MixRecord {
        seed,
        strategy,
        p1: config.p1,
        p2: config.p2,
        lasermix_triggered: fire_l,
        polarmix_triggered: fire_p,
        global_augmentation,
        lasermix: lplan,
        polarmix: pplan,
    };
    Ok((current, record))
}

fn augmented(
    sources: MixSources<'_>,
    augs: Option<&[RigidAugmentation; 3]>,
) -> Result<(PointCloud, PointCloud, PointCloud)> {
    Ok(match augs {
        Some([a, l, p]) => (
            apply_augmentation(sources.primary, a)?,
            apply_augmentation(sources.lasermix_partner, l)?,
            apply_augmentation(sources.polarmix_partner, p)?,
        ),
        None => (
            sources.primary.clone(),
            sources.lasermix_partner.clone(),
            sources.polarmix_partner.clone(),
        ),
    })
}

/// Re-applies a recorded mix.
pub fn replay(sources: MixSources<'_>, record: &MixRecord) -> Result<PointCloud> {
    if record.lasermix_triggered != record.lasermix.is_some()
        || record.polarmix_triggered != record.polarmix.is_some()
    {
        return Err(Error::InvalidArgument(
            "mix record triggers and plans disagree".into(),
        ));
    }
    let (mut current, lpartner, ppartner) =
        augmented(sources, record.global_augmentation.as_ref())?;
    if let Some(plan) = &record.lasermix {
        current = lasermix::laser_mix(&current, &lpartner, plan)?.0;
    }
    if let Some(plan) = &record.polarmix {
        current = polarmix::polar_mix(&current, &ppartner, plan)?;
    }
    Ok(current)
}

/// Partner indices (LaserMix, PolarMix) for dataset position `index`,
/// uniform over the other `len - 1` entries.
pub fn draw_partners(seed: u64, index: usize, len: usize) -> Result<(usize, usize)> {
    if len < 2 {
        return Err(Error::DegenerateInput(
            "mixing needs at least two scans in the manifest".into(),
        ));
    }
    let mut rng = stage_rng(seed, Stage::Partner);
    let mut draw = || {
        let j = rng.random_range(0..len - 1);
        if j >= index {
            j + 1
        } else {
            j
        }
    };
    Ok((draw(), draw()))
}
