//! Seeded quota sampling, proportional interleaving and GUI duplication.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::MixtureError;

/// Independent stream for `(seed, label)`.
pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Uniform sample of `quota` items without replacement, in random order.
pub fn sample_domain<T: Clone>(items: &[T], quota: usize, seed: u64, label: &str) -> Result<Vec<T>, MixtureError> {
    if quota > items.len() {
        return Err(MixtureError::InsufficientData {
            domain: label.to_string(),
            available: items.len(),
            quota,
        });
    }
    let mut rng = rng_for(seed, &format!("sample/{label}"));
    Ok(index::sample(&mut rng, items.len(), quota)
        .into_iter()
        .map(|i| items[i].clone())
        .collect())
}

pub fn shuffled<T: Clone>(items: &[T], seed: u64, label: &str) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(&mut rng_for(seed, &format!("shuffle/{label}")));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterleaveMode {
    /// Every prefix of length k holds floor(k*g/(m+g)) GUI items.
    #[default]
    Proportional,
    /// Both streams concatenated and shuffled together.
    GlobalShuffle,
}

/// Which stream each position of a merged sequence draws from (`true` = GUI).
pub fn interleave_pattern(m: usize, g: usize) -> Vec<bool> {
    let n = (m + g) as u128;
    let mut placed = 0u128;
    (1..=n)
        .map(|k| {
            let due = k * g as u128 / n;
            let gui = due > placed;
            placed += u128::from(gui);
            gui
        })
        .collect()
}

/// Shuffles both streams by seed and merges them.
pub fn interleave<T: Clone>(mid: &[T], gui: &[T], seed: u64, mode: InterleaveMode) -> Vec<T> {
    let mid = shuffled(mid, seed, "interleave/mid");
    let gui = shuffled(gui, seed, "interleave/gui");
    match mode {
        InterleaveMode::Proportional => {
            let (mut mi, mut gi) = (mid.into_iter(), gui.into_iter());
            interleave_pattern(mi.len(), gi.len())
                .into_iter()
                .map(|is_gui| if is_gui { gi.next() } else { mi.next() }.expect("pattern matches stream lengths"))
                .collect()
        }
        InterleaveMode::GlobalShuffle => {
            let mut all: Vec<T> = mid.into_iter().chain(gui).collect();
            all.shuffle(&mut rng_for(seed, "interleave/global"));
            all
        }
    }
}

/// How many GUI samples a mid-training volume calls for and how the pool
/// covers them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuplicationPlan {
    pub required: u64,
    pub pool: u64,
    /// Complete shuffled passes over the pool.
    pub full_passes: u64,
    /// Items drawn from one further shuffle.
    pub remainder: u64,
    pub factor: f64,
}

/// `required = round(target_mid * gui / mid)` for `ratio = (mid, gui)`.
pub fn scale_with_duplication(target_mid: u64, gui_pool_size: u64, ratio: (u64, u64)) -> DuplicationPlan {
    let (rm, rg) = ratio;
    assert!(rm > 0 && rg > 0, "ratio components must be positive");
    let num = u128::from(target_mid) * u128::from(rg);
    let required = ((2 * num + u128::from(rm)) / (2 * u128::from(rm))) as u64;
    let (full_passes, remainder) = match gui_pool_size {
        0 => (0, 0),
        p => (required / p, required % p),
    };
    DuplicationPlan {
        required,
        pool: gui_pool_size,
        full_passes,
        remainder,
        factor: if gui_pool_size == 0 {
            0.0
        } else {
            required as f64 / gui_pool_size as f64
        },
    }
}

/// Materializes a plan over `pool`: `(item, pass)` pairs, pass numbers
/// counting from 0.
pub fn realize_plan<T: Clone>(pool: &[T], plan: &DuplicationPlan, seed: u64) -> Vec<(T, u64)> {
    let mut out = Vec::with_capacity(plan.required as usize);
    for pass in 0..plan.full_passes {
        out.extend(
            shuffled(pool, seed, &format!("dup/{pass}"))
                .into_iter()
                .map(|x| (x, pass)),
        );
    }
    let last = plan.full_passes;
    out.extend(
        shuffled(pool, seed, &format!("dup/{last}"))
            .into_iter()
            .take(plan.remainder as usize)
            .map(|x| (x, last)),
    );
    out
}

/// `round(total * proportion)`.
pub fn effective_volume(total_samples: u64, mid_proportion: f64) -> u64 {
    assert!((0.0..=1.0).contains(&mid_proportion), "proportion must be in [0, 1]");
    (total_samples as f64 * mid_proportion).round() as u64
}
