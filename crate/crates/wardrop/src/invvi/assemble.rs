//! Builds the compact recovery program from snapshots.

use nalgebra::{DMatrix, DVector};

use super::{CompactQp, InvViError, RowTag, Snapshot, YBlock};
use crate::latency::{rkhs_norm_matrix, KernelConfig};

/// Assembles the compact QP for the given snapshots.
///
/// Row groups, in emission order:
/// 1. potential feasibility, one row per (snapshot, OD pair, observed link):
///    `(N' y^w)_a - t_a0 f(x_a/m_a) <= 0`;
/// 2. gap bound per snapshot:
///    `sum_a t_a0 x_a f(x_a/m_a) - sum_w (d^w)' y^w - eps_k <= 0`;
/// 3. monotonicity between consecutive entries of the ratio ranking taken
///    over all (snapshot, link) measurements — consecutive pairs suffice
///    because the order relation is transitive, and tied ratios produce a
///    zero row emitted once;
/// 4. slack nonnegativity per snapshot;
/// 5. coefficient nonnegativity per coefficient.
///
/// The substitution `f(0) = 1` eliminates the leading coefficient: its
/// contribution moves into the constant column `h`.
pub fn assemble_qp(snapshots: &[Snapshot], cfg: &KernelConfig) -> Result<CompactQp, InvViError> {
    if snapshots.is_empty() {
        return Err(InvViError::EmptySnapshot);
    }
    let n_beta = cfg.degree;
    let n_eps = snapshots.len();

    // Potential-block layout.
    let mut y_blocks = Vec::new();
    let mut n_y = 0;
    for (k, snap) in snapshots.iter().enumerate() {
        for (w, pair) in snap.demands.pairs().iter().enumerate() {
            let origin_node = snap.network.node_index(pair.origin)?;
            y_blocks.push(YBlock {
                snapshot: k,
                od: w,
                offset: n_y,
                len: snap.network.num_nodes(),
                origin_node,
            });
            n_y += snap.network.num_nodes();
        }
    }

    // Ratio ranking across all measurements.
    let mut measurements: Vec<(usize, usize, f64)> = Vec::new();
    for (k, snap) in snapshots.iter().enumerate() {
        for (i, &pos) in snap.observed_links.iter().enumerate() {
            measurements.push((k, pos, snap.ratio(i)));
        }
    }
    measurements.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let n_dual_rows: usize = snapshots
        .iter()
        .map(|s| s.demands.len() * s.observed_links.len())
        .sum();
    let n_mono = measurements.len().saturating_sub(1);
    let n_rows = n_dual_rows + n_eps + n_mono + n_eps + n_beta;

    let mut a_mat = DMatrix::zeros(n_rows, n_y);
    let mut b_mat = DMatrix::zeros(n_rows, n_beta);
    let mut c_mat = DMatrix::zeros(n_rows, n_eps);
    let mut h_vec = DVector::zeros(n_rows);
    let mut tags = Vec::with_capacity(n_rows);
    let mut row = 0;

    let block_offset = |k: usize, w: usize| -> usize {
        y_blocks
            .iter()
            .find(|b| b.snapshot == k && b.od == w)
            .map(|b| b.offset)
            .expect("block exists")
    };

    // Powers of each measured ratio, shared by the row groups.
    let powers = |ratio: f64| -> Vec<f64> {
        let mut p = Vec::with_capacity(n_beta);
        let mut acc = 1.0;
        for _ in 0..n_beta {
            acc *= ratio;
            p.push(acc);
        }
        p
    };

    // 1. Potential feasibility.
    for (k, snap) in snapshots.iter().enumerate() {
        let incidence = snap.network.incidence();
        for (w, _) in snap.demands.pairs().iter().enumerate() {
            let offset = block_offset(k, w);
            for (i, &pos) in snap.observed_links.iter().enumerate() {
                let link = snap.network.link(pos);
                let r_pow = powers(snap.ratio(i));
                for v in 0..snap.network.num_nodes() {
                    let coeff = incidence[(v, pos)];
                    if coeff != 0.0 {
                        a_mat[(row, offset + v)] = coeff;
                    }
                }
                for i_beta in 0..n_beta {
                    b_mat[(row, i_beta)] = -link.free_flow_time * r_pow[i_beta];
                }
                h_vec[row] = -link.free_flow_time;
                tags.push(RowTag::DualFeasibility { snapshot: k, od: w, link: link.id });
                row += 1;
            }
        }
    }

    // 2. Gap bound.
    for (k, snap) in snapshots.iter().enumerate() {
        for (i, &pos) in snap.observed_links.iter().enumerate() {
            let link = snap.network.link(pos);
            let x = snap.flows[i];
            let r_pow = powers(snap.ratio(i));
            for i_beta in 0..n_beta {
                b_mat[(row, i_beta)] += link.free_flow_time * x * r_pow[i_beta];
            }
            h_vec[row] += link.free_flow_time * x;
        }
        for (w, pair) in snap.demands.pairs().iter().enumerate() {
            let offset = block_offset(k, w);
            let d = snap.demands.values()[w];
            let origin = snap.network.node_index(pair.origin)?;
            let destination = snap.network.node_index(pair.destination)?;
            // -(d^w)' y^w with d^w holding -d at the origin, +d at the
            // destination.
            a_mat[(row, offset + destination)] -= d;
            a_mat[(row, offset + origin)] += d;
        }
        c_mat[(row, k)] = -1.0;
        tags.push(RowTag::Gap { snapshot: k });
        row += 1;
    }

    // 3. Monotonicity over consecutive ranked ratios.
    for pair in measurements.windows(2) {
        let (k_lo, pos_lo, r_lo) = pair[0];
        let (k_hi, pos_hi, r_hi) = pair[1];
        let p_lo = powers(r_lo);
        let p_hi = powers(r_hi);
        for i_beta in 0..n_beta {
            b_mat[(row, i_beta)] = p_lo[i_beta] - p_hi[i_beta];
        }
        tags.push(RowTag::Monotonicity {
            lo: (k_lo, snapshots[k_lo].network.link(pos_lo).id),
            hi: (k_hi, snapshots[k_hi].network.link(pos_hi).id),
        });
        row += 1;
    }

    // 4. Slack nonnegativity.
    for k in 0..n_eps {
        c_mat[(row, k)] = -1.0;
        tags.push(RowTag::EpsNonneg { snapshot: k });
        row += 1;
    }

    // 5. Coefficient nonnegativity.
    for i_beta in 0..n_beta {
        b_mat[(row, i_beta)] = -1.0;
        tags.push(RowTag::BetaNonneg { coefficient: i_beta + 1 });
        row += 1;
    }

    debug_assert_eq!(row, n_rows);
    Ok(CompactQp {
        n_beta,
        n_eps,
        h_mat: rkhs_norm_matrix(cfg),
        a_mat,
        b_mat,
        c_mat,
        h_vec,
        tags,
        y_blocks,
    })
}
