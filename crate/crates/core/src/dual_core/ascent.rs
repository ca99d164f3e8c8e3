//! Derivative-free ascent of `I` over dual pairs.

use super::transforms::{functional_i, max_violation, u_star, v_star, TransformParams};
use super::{ConstraintPhi, DiscreteDomainPair, ObjectiveF, PotentialPair};
use crate::error::{Error, Result};
use crate::roots::bisect_increasing;

/// Longest single move reached by step doubling.
const MAX_EXPANSION: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AscentParams {
    pub step0: f64,
    pub step_min: f64,
    /// Relative improvement a move must achieve to be accepted.
    pub ftol: f64,
    pub max_iters: usize,
    /// Lower bound on `u` (the set `K_{C0}`); moves that break it are rejected.
    pub u_floor: Option<f64>,
    /// Target `min u` for the final shift along the normalization family.
    pub c0: Option<f64>,
    /// Shift every trial pair to `min u = c0` before comparing `I`, i.e.
    /// maximize on the normalization slice instead of over all of `K`.
    pub pin: bool,
    /// Subset moves are tried when `|V|` is at most this.
    pub subset_limit: usize,
    /// Re-check feasibility of every accepted iterate.
    pub audit: bool,
    pub transform: TransformParams,
}

impl Default for AscentParams {
    fn default() -> Self {
        Self {
            step0: 0.1,
            step_min: 1e-8,
            ftol: 1e-13,
            max_iters: 20_000,
            u_floor: None,
            c0: None,
            pin: false,
            subset_limit: 6,
            audit: false,
            transform: TransformParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AscentResult {
    pub pair: PotentialPair,
    /// `I` after each accepted move, starting with the initial dual pair.
    pub trace: Vec<f64>,
    /// Value of `I` at the returned (shifted) pair.
    pub value: f64,
    pub sweeps: usize,
    /// Largest constraint value seen over accepted iterates (audit only).
    pub worst_violation: f64,
    /// Shift applied to reach `min u = c0`.
    pub shift: f64,
}

/// Replace `(u, v)` by the dual pair built from `u + τ`.
pub fn shift_potentials<P: ConstraintPhi + ?Sized>(
    pair: &PotentialPair,
    tau: f64,
    phi: &P,
    domains: &DiscreteDomainPair,
    params: &TransformParams,
) -> Result<PotentialPair> {
    let shifted: Vec<f64> = pair.u.iter().map(|u| u + tau).collect();
    let v = v_star(&shifted, phi, domains, params)?;
    let u = u_star(&v, phi, domains, params)?;
    Ok(PotentialPair { u, v })
}

/// Shift along the normalization family so that `min u = c0`.
pub fn pin_min_u<P: ConstraintPhi + ?Sized>(
    pair: &PotentialPair,
    c0: f64,
    phi: &P,
    domains: &DiscreteDomainPair,
    params: &TransformParams,
) -> Result<(f64, PotentialPair)> {
    let tol = 1e-12 * (1.0 + c0.abs());
    let mut guess = c0 - min_of(&pair.u);
    // min u grows with slope close to one in τ, so a few corrections
    // usually land within tolerance; bisection is the fallback
    for _ in 0..6 {
        let cand = shift_potentials(pair, guess, phi, domains, params)?;
        let miss = min_of(&cand.u) - c0;
        if miss.abs() <= tol {
            return Ok((guess, cand));
        }
        guess -= miss;
    }
    let span = 1.0 + guess.abs();
    let gap =
        |tau: f64| shift_potentials(pair, tau, phi, domains, params).map(|p| min_of(&p.u) - c0).unwrap_or(f64::NAN);
    let b = bisect_increasing(gap, guess - 4.0 * span, guess + 4.0 * span, 1e-14)?;
    Ok((b.lo, shift_potentials(pair, b.lo, phi, domains, params)?))
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Coordinate ascent of `I` over dual pairs.
///
/// Starts from the dual pair generated by `initial.u`, perturbs one `v_j`
/// (or, for small `|V|`, a subset of them) by `±step`, re-transforms, and
/// keeps the move when `I` improves; a kept coordinate move is repeated
/// with doubling length while it keeps improving. The step halves when no
/// move helps.
pub fn maximize_dual<F, P>(
    initial: &PotentialPair,
    obj: &F,
    phi: &P,
    domains: &DiscreteDomainPair,
    params: &AscentParams,
) -> Result<AscentResult>
where
    F: ObjectiveF + ?Sized,
    P: ConstraintPhi + ?Sized,
{
    let tp = &params.transform;
    let v0 = v_star(&initial.u, phi, domains, tp)?;
    let u0 = u_star(&v0, phi, domains, tp)?;
    let v0 = v_star(&u0, phi, domains, tp)?;
    let mut pair = PotentialPair { u: u0, v: v0 };
    let pin = match (params.pin, params.c0) {
        (true, Some(c0)) => Some(c0),
        (true, None) => return Err(Error::InvalidParameter("pinned ascent needs c0".into())),
        _ => None,
    };
    if let Some(c0) = pin {
        pair = pin_min_u(&pair, c0, phi, domains, tp)?.1;
    }
    let mut value = functional_i(&pair, obj, domains);
    let mut trace = vec![value];
    let mut worst = if params.audit { max_violation(&pair, phi, domains) } else { f64::NEG_INFINITY };
    let nv = domains.len_v();

    let try_move =
        |pair: &PotentialPair, delta: &dyn Fn(usize) -> f64, value: f64| -> Result<Option<(PotentialPair, f64)>> {
            let v: Vec<f64> = pair.v.iter().enumerate().map(|(j, v)| v + delta(j)).collect();
            let u = u_star(&v, phi, domains, tp)?;
            if let Some(floor) = params.u_floor {
                if min_of(&u) < floor {
                    return Ok(None);
                }
            }
            let v = v_star(&u, phi, domains, tp)?;
            let mut cand = PotentialPair { u, v };
            if let Some(c0) = pin {
                cand = pin_min_u(&cand, c0, phi, domains, tp)?.1;
            }
            let iv = functional_i(&cand, obj, domains);
            Ok((iv > value + params.ftol * (1.0 + value.abs())).then_some((cand, iv)))
        };

    let mut step = params.step0;
    let mut sweeps = 0;
    while step >= params.step_min {
        sweeps += 1;
        if sweeps > params.max_iters {
            return Err(Error::ConvergenceFailure {
                iterations: sweeps,
                reason: format!("coordinate ascent still improving at step {step:e}; last I = {value}"),
            });
        }
        let mut improved = false;
        for j in 0..nv {
            for sign in [1.0, -1.0] {
                // a successful direction is retried with doubled steps
                let mut len = step;
                loop {
                    let delta = |k: usize| if k == j { sign * len } else { 0.0 };
                    let Ok(Some((cand, iv))) = try_move(&pair, &delta, value) else { break };
                    pair = cand;
                    value = iv;
                    trace.push(value);
                    if params.audit {
                        worst = worst.max(max_violation(&pair, phi, domains));
                    }
                    improved = true;
                    len *= 2.0;
                    if len > MAX_EXPANSION {
                        break;
                    }
                }
            }
        }
        if !improved && nv <= params.subset_limit && nv > 1 {
            'subsets: for mask in 1u32..(1u32 << nv) {
                if mask.count_ones() < 2 {
                    continue;
                }
                for sign in [1.0, -1.0] {
                    let mut len = step;
                    loop {
                        let delta = |k: usize| if mask & (1 << k) != 0 { sign * len } else { 0.0 };
                        let Ok(Some((cand, iv))) = try_move(&pair, &delta, value) else { break };
                        pair = cand;
                        value = iv;
                        trace.push(value);
                        if params.audit {
                            worst = worst.max(max_violation(&pair, phi, domains));
                        }
                        improved = true;
                        len *= 2.0;
                        if len > MAX_EXPANSION {
                            break;
                        }
                    }
                    if improved {
                        break 'subsets;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let mut shift = 0.0;
    if let Some(c0) = params.c0 {
        let (tau, shifted) = pin_min_u(&pair, c0, phi, domains, tp)?;
        shift = tau;
        pair = shifted;
    }
    let value = functional_i(&pair, obj, domains);
    Ok(AscentResult { pair, trace, value, sweeps, worst_violation: worst, shift })
}
