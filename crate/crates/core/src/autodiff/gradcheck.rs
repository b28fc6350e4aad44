use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Largest number of parameter entries compared by [`grad_check`].
pub const MAX_CHECKED_ENTRIES: usize = 200;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Largest `|num - ana|` over the checked entries, before any flooring.
    pub max_abs_error: f64,
    /// Slope below which differences cannot resolve a gradient; see [`fd_resolution`].
    pub resolution: f64,
    pub entries_checked: usize,
    /// Entries whose numeric and analytic values were both below `resolution`.
    pub entries_below_resolution: usize,
}

/// Compares backward gradients with central differences.
///
/// `forward` records a scalar loss on the tape given one leaf per entry of
/// `params`. Up to [`MAX_CHECKED_ENTRIES`] entries are sampled (seeded) across
/// all parameters; the relative error of each is
/// `|num - ana| / max(|num| + |ana|, 1e-8)`.
///
/// A central difference cannot resolve slopes below the rounding noise of the
/// loss itself, roughly `ε·|L| / eps`. Entries whose numeric and analytic
/// values are *both* below [`fd_resolution`] are indistinguishable from zero;
/// they are counted in `entries_below_resolution` and excluded from the
/// maximum, so a structurally zero gradient is not failed over a one-ulp wobble
/// in the loss. Every other entry contributes its plain relative error.
pub fn grad_check<F>(params: &[Matrix], forward: F, eps: f64, seed: u64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Matrix]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let loss = forward(&mut tape, &vars)?;
        Ok(tape.value(loss).get(0, 0))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = forward(&mut tape, &vars)?;
    let resolution = fd_resolution(tape.value(loss).get(0, 0), eps);
    let grads = tape.backward(loss)?;
    let analytic: Vec<Matrix> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| grads.get_or_zeros(v, p.shape()))
        .collect();

    let total: usize = params.iter().map(Matrix::len).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = if total <= MAX_CHECKED_ENTRIES {
        (0..total).collect()
    } else {
        let mut v = sample(&mut rng, total, MAX_CHECKED_ENTRIES).into_vec();
        v.sort_unstable();
        v
    };

    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    let mut worst_abs = 0.0f64;
    let mut below = 0;
    for flat in &picks {
        let (mut p, mut k) = (0, *flat);
        while k >= params[p].len() {
            k -= params[p].len();
            p += 1;
        }
        let orig = work[p].as_slice()[k];
        work[p].as_mut_slice()[k] = orig + eps;
        let plus = eval(&work)?;
        work[p].as_mut_slice()[k] = orig - eps;
        let minus = eval(&work)?;
        work[p].as_mut_slice()[k] = orig;

        let num = (plus - minus) / (2.0 * eps);
        let ana = analytic[p].as_slice()[k];
        let diff = (num - ana).abs();
        worst_abs = worst_abs.max(diff);
        if num.abs() <= resolution && ana.abs() <= resolution {
            below += 1;
            continue;
        }
        let rel = diff / (num.abs() + ana.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(GradCheckReport {
        max_rel_error: worst,
        max_abs_error: worst_abs,
        resolution,
        entries_checked: picks.len(),
        entries_below_resolution: below,
    })
}

/// Smallest slope a central difference of step `eps` can distinguish from zero
/// at loss value `loss`: a few ulps of the loss divided by the step.
pub fn fd_resolution(loss: f64, eps: f64) -> f64 {
    4.0 * f64::EPSILON * loss.abs().max(1.0) / eps
}

/// Rejects configurations whose forward pass is not deterministic.
pub fn require_deterministic(dropout: f64) -> Result<()> {
    if dropout > 0.0 {
        Err(Error::Nondeterministic)
    } else {
        Ok(())
    }
}
