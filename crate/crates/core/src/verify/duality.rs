//! Dual-pair invariants on seeded reflector instances and exact checks on
//! small optimal transport instances.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{random_problem, Bound, Check, Size, SuiteReport};
use crate::dual_core::{
    maximize_dual, optimal_map, u_star, v_star, AscentParams, ConstraintPhi, Cost, DiscreteDomainPair, OtConstraint,
    OtObjective, PotentialPair, SquaredDistance, TransformParams,
};
use crate::error::Result;
use crate::grid::ChartGrid;
use crate::reflector::ReflectorConstraint;
use crate::solver::{solve, SolverParams};

/// Minimum of `Σ_i c[i][σ(i)]` over all permutations `σ`.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    fn rec(c: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == c.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..c.len() {
            if !used[j] {
                used[j] = true;
                rec(c, row + 1, used, acc + c[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

/// Nodes with a grid neighbour assigned differently by any of `maps`.
pub fn cell_boundary_nodes(grid: &ChartGrid, maps: &[&[usize]]) -> Vec<bool> {
    (0..grid.len())
        .map(|i| {
            (0..grid.dim()).any(|a| {
                [-1i64, 1].iter().filter_map(|&s| grid.neighbor(i, a, s)).any(|k| maps.iter().any(|m| m[k] != m[i]))
            })
        })
        .collect()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |w, (x, y)| w.max((x - y).abs()))
}

/// Largest `b_k - a_k`, zero when `a >= b` everywhere.
fn max_excess(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |w, (x, y)| w.max(y - x))
}

/// Dual pair generated from `v`: `u = u*(v)`, then `v = v*(u)`, `u = u*(v)`.
fn dual_pair_from<P: ConstraintPhi + ?Sized>(
    v: &[f64],
    phi: &P,
    d: &DiscreteDomainPair,
    tp: &TransformParams,
) -> Result<PotentialPair> {
    let u = u_star(v, phi, d, tp)?;
    let v = v_star(&u, phi, d, tp)?;
    let u = u_star(&v, phi, d, tp)?;
    Ok(PotentialPair { u, v })
}

pub(super) fn dual_suite(rng: &mut ChaCha8Rng, size: Size) -> Result<SuiteReport> {
    let instances = size.pick(4, 20, 40);
    let cells = size.pick(16, 32, 32);
    let phi = ReflectorConstraint::ambient();
    let tp = TransformParams::default();
    let params = SolverParams { max_outer: 200, ..SolverParams::default() };

    let (mut order, mut dominance, mut idem, mut contact) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut shift_moved, mut shift_off, mut nodes) = (0usize, 0usize, 0usize);
    for _ in 0..instances {
        let n_t = rng.gen_range(2..=8);
        let problem = random_problem(cells, n_t, rng.gen_range(-20.0..-5.0), rng.gen_range(1.0..4.0), rng.gen())?;
        let d = problem.domains();
        nodes += d.len_u();
        let out = solve(&problem, &params)?;
        let v0: Vec<f64> = out.reflector.eta.iter().map(|e| e.ln()).collect();
        let pair = dual_pair_from(&v0, &phi, &d, &tp)?;
        let (u, v) = (&pair.u, &pair.v);

        // both transforms reverse order
        let u_up: Vec<f64> = u.iter().map(|x| x + rng.gen_range(0.0..0.1)).collect();
        order = order.max(max_excess(v, &v_star(&u_up, &phi, &d, &tp)?));
        let v_up: Vec<f64> = v.iter().map(|x| x + rng.gen_range(0.0..0.1)).collect();
        order = order.max(max_excess(u, &u_star(&v_up, &phi, &d, &tp)?));

        // a transform dominates every feasible partner
        let u_low: Vec<f64> = u.iter().map(|x| x - rng.gen_range(0.0..0.1)).collect();
        let v_low: Vec<f64> = v.iter().map(|x| x - rng.gen_range(0.0..0.1)).collect();
        dominance = dominance.max(max_excess(&v_star(&u_low, &phi, &d, &tp)?, &v_low));
        dominance = dominance.max(max_excess(&u_star(&v_low, &phi, &d, &tp)?, &u_low));

        idem = idem.max(max_gap(&v_star(&u_star(v, &phi, &d, &tp)?, &phi, &d, &tp)?, v));
        idem = idem.max(max_gap(&u_star(&v_star(u, &phi, &d, &tp)?, &phi, &d, &tp)?, u));

        // every point of either side touches the other
        let mut col = vec![f64::NEG_INFINITY; d.len_v()];
        for (i, x) in d.u_points.iter().enumerate() {
            let mut row = f64::NEG_INFINITY;
            for (j, y) in d.v_points.iter().enumerate() {
                let val = phi.value(x, y, u[i], v[j]);
                row = row.max(val);
                col[j] = col[j].max(val);
            }
            contact = contact.max(row.abs());
        }
        contact = col.iter().fold(contact, |w, c| w.max(c.abs()));

        // maximizers for two normalizations assign alike off cell boundaries
        let map = optimal_map(&pair, &phi, &d, 1e-8)?;
        let other = solve(&problem, &SolverParams { c0: Some(2.0 * problem.c0()), ..params.clone() })?;
        let ov: Vec<f64> = other.reflector.eta.iter().map(|e| e.ln()).collect();
        let map2 = optimal_map(&dual_pair_from(&ov, &phi, &d, &tp)?, &phi, &d, 1e-8)?;
        let boundary = cell_boundary_nodes(problem.grid(), &[&map, &map2]);
        for i in 0..map.len() {
            if map[i] != map2[i] {
                shift_moved += 1;
                if !boundary[i] {
                    shift_off += 1;
                }
            }
        }
    }

    let mut checks = vec![
        Check::new("dual", "transforms_reverse_order", order, Bound::AtMost(1e-10), instances),
        Check::new("dual", "transform_dominates_feasible_partner", dominance, Bound::AtMost(1e-10), instances),
        Check::new("dual", "double_transform_idempotent", idem, Bound::AtMost(1e-10), instances),
        Check::new("dual", "dual_pair_contact", contact, Bound::AtMost(1e-8), instances),
        Check::new(
            "dual",
            "normalization_shift_moves_only_boundary_nodes",
            shift_off as f64,
            Bound::AtMost(0.0),
            instances,
        ),
    ];
    let tables = vec![format!(
        "dual: normalization shift changed {shift_moved} of {nodes} contacts, {shift_off} off cell boundaries"
    )];

    let per_size = size.pick(2, 5, 20);
    let mut shift_ot = 0usize;
    for n in [3usize, 4] {
        let mut worst = 0.0f64;
        for _ in 0..per_size {
            let pts = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
                (0..n).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect()
            };
            let (xs, ys) = (pts(rng), pts(rng));
            let cost = SquaredDistance { k: 1.0 };
            let c: Vec<Vec<f64>> = xs.iter().map(|x| ys.iter().map(|y| cost.value(x, y)).collect()).collect();
            let d = DiscreteDomainPair::new(xs, vec![1.0; n], ys, vec![1.0; n])?;
            let phi = OtConstraint { cost };
            let obj = OtObjective { u_measure: n as f64, v_measure: n as f64 };
            let start = PotentialPair { u: vec![0.0; n], v: vec![0.0; n] };
            let r = maximize_dual(&start, &obj, &phi, &d, &AscentParams::default())?;
            worst = worst.max((r.value - brute_force_assignment(&c)).abs());

            let k = rng.gen_range(-2.0..2.0);
            let shifted = PotentialPair {
                u: r.pair.u.iter().map(|x| x + k).collect(),
                v: r.pair.v.iter().map(|x| x - k).collect(),
            };
            // the contact chosen before the shift must still be a maximizer;
            // exact ties may be broken differently after rounding
            let map = optimal_map(&r.pair, &phi, &d, 1e-8)?;
            for (i, x) in d.u_points.iter().enumerate() {
                let vals: Vec<f64> =
                    d.v_points.iter().enumerate().map(|(j, y)| phi.value(x, y, shifted.u[i], shifted.v[j])).collect();
                let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if vals[map[i]] < top - 1e-12 {
                    shift_ot += 1;
                }
            }
        }
        checks.push(Check::new(
            "dual",
            format!("ot_value_matches_assignment_{n}x{n}"),
            worst,
            Bound::AtMost(1e-9),
            per_size,
        ));
    }
    checks.push(Check::new("dual", "ot_map_invariant_under_shift", shift_ot as f64, Bound::AtMost(0.0), 2 * per_size));
    Ok(SuiteReport { checks, tables })
}
