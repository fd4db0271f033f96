//! DC susceptance assembly and Kron elimination of non-generator buses.
//!
//! The full network satisfies [ΔP_G; ΔP_L] = B·[Δδ_G; Δδ_L] with B the
//! branch-susceptance Laplacian (1/x per branch). Solving the load rows for
//! Δδ_L collapses the system onto generator buses:
//!
//!   ΔP_G = B_r·Δδ_G + B_L·ΔP_L,
//!   B_r = B_GG − B_GL·B_LL⁻¹·B_LG,   B_L = B_GL·B_LL⁻¹.
//!
//! B_LL is solved by the sparse factorization in [`crate::sparse`]; the
//! explicit inverse is never formed.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::case::NetworkCase;
use crate::sparse::{SparseError, SparseMatrix};

/// Branch-susceptance Laplacian partitioned by generator/load buses,
/// generator block first. Off-diagonals are −Σ1/x, diagonals +Σ1/x.
#[derive(Clone, Debug)]
pub struct SusceptancePartition {
    pub b_gg: DMatrix<f64>,
    pub b_gl: DMatrix<f64>,
    pub b_lg: DMatrix<f64>,
    /// Load-load block kept sparse; this is the block that gets factorized.
    pub b_ll: SparseMatrix,
    /// Generator bus ids, case order (assembly and output ordering).
    pub gen_index: Vec<usize>,
    /// Non-generator bus ids, bus-list order.
    pub load_index: Vec<usize>,
}

/// Generator-only equivalent after eliminating load buses.
#[derive(Clone, Debug)]
pub struct ReducedNetwork {
    /// n×n generator coupling matrix; symmetric with zero row/column sums.
    pub b_r: DMatrix<f64>,
    /// n×m map from load-bus injection changes to generator power changes;
    /// every column sums to −1 on a connected network.
    pub b_l: DMatrix<f64>,
    pub gen_index: Vec<usize>,
    pub load_index: Vec<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReductionError {
    #[error("load-bus block is singular (load buses islanded from all generators): {0}")]
    IslandedLoads(SparseError),
    #[error("case has no generators")]
    NoGenerators,
}

/// Builds the partitioned susceptance Laplacian of a validated case,
/// generator buses first in case order.
pub fn build_susceptance(case: &NetworkCase) -> SusceptancePartition {
    let gen_index = case.gen_buses();
    let load_index = case.load_buses();
    let n = gen_index.len();
    let m = load_index.len();

    // Position of each bus in the reordered (generator-first) system.
    let mut pos = alloc::collections::BTreeMap::new();
    for (i, &b) in gen_index.iter().enumerate() {
        pos.insert(b, i);
    }
    for (j, &b) in load_index.iter().enumerate() {
        pos.insert(b, n + j);
    }

    let mut b_gg = DMatrix::zeros(n, n);
    let mut b_gl = DMatrix::zeros(n, m);
    let mut b_lg = DMatrix::zeros(m, n);
    let mut b_ll = SparseMatrix::zeros(m);

    let mut stamp = |i: usize, j: usize, v: f64| {
        match (i < n, j < n) {
            (true, true) => b_gg[(i, j)] += v,
            (true, false) => b_gl[(i, j - n)] += v,
            (false, true) => b_lg[(i - n, j)] += v,
            (false, false) => b_ll.add(i - n, j - n, v).expect("indices in range"),
        }
    };

    for br in case.branches.iter().filter(|b| b.in_service) {
        let y = 1.0 / br.x;
        let (i, j) = (pos[&br.from], pos[&br.to]);
        stamp(i, i, y);
        stamp(j, j, y);
        stamp(i, j, -y);
        stamp(j, i, -y);
    }

    SusceptancePartition { b_gg, b_gl, b_lg, b_ll, gen_index, load_index }
}

/// Kron-eliminates the load partition. Fails when some load bus has no path
/// to a generator (singular B_LL).
pub fn kron_reduce(p: &SusceptancePartition) -> Result<ReducedNetwork, ReductionError> {
    if p.gen_index.is_empty() {
        return Err(ReductionError::NoGenerators);
    }
    if p.load_index.is_empty() {
        return Ok(ReducedNetwork {
            b_r: p.b_gg.clone(),
            b_l: DMatrix::zeros(p.gen_index.len(), 0),
            gen_index: p.gen_index.clone(),
            load_index: p.load_index.clone(),
        });
    }

    let lu = p.b_ll.factorize().map_err(ReductionError::IslandedLoads)?;
    // X = B_LL⁻¹·B_LG, so B_r = B_GG − B_GL·X and, by symmetry of B_LL,
    // B_L = B_GL·B_LL⁻¹ = Xᵀ.
    let x = lu.solve_dense(&p.b_lg);
    let b_r = &p.b_gg - &p.b_gl * &x;
    let b_l = x.transpose();
    Ok(ReducedNetwork {
        b_r,
        b_l,
        gen_index: p.gen_index.clone(),
        load_index: p.load_index.clone(),
    })
}

/// The (n−1)×n relative-angle map: identity block with a trailing −1 column.
/// Multiplying an angle vector by it yields angles relative to device n.
pub fn relative_incidence(n: usize) -> Result<DMatrix<f64>, ReductionError> {
    if n < 2 {
        return Err(ReductionError::NoGenerators);
    }
    let mut m = DMatrix::zeros(n - 1, n);
    for i in 0..n - 1 {
        m[(i, i)] = 1.0;
        m[(i, n - 1)] = -1.0;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{Branch, Bus, BusKind, Generator, Load, NetworkCase};
    use crate::device::DeviceParams;
    use approx::assert_abs_diff_eq;

    fn chain3() -> NetworkCase {
        // 1 -- 2 -- 3, x = 0.1 both, generators at 1 and 3, load at 2.
        NetworkCase {
            name: "chain3".into(),
            base_mva: 100.0,
            f0: 60.0,
            buses: alloc::vec![
                Bus { id: 1, kind: BusKind::Generator, base_kv: 230.0 },
                Bus { id: 2, kind: BusKind::Load, base_kv: 230.0 },
                Bus { id: 3, kind: BusKind::Generator, base_kv: 230.0 },
            ],
            branches: alloc::vec![
                Branch { from: 1, to: 2, x: 0.1, in_service: true },
                Branch { from: 2, to: 3, x: 0.1, in_service: true },
            ],
            generators: alloc::vec![
                Generator {
                    bus: 1,
                    s_rated_mva: 100.0,
                    dispatch_mw: 50.0,
                    v_setpoint: 1.0,
                    device: DeviceParams::generic_sg(100.0),
                },
                Generator {
                    bus: 3,
                    s_rated_mva: 100.0,
                    dispatch_mw: 50.0,
                    v_setpoint: 1.0,
                    device: DeviceParams::generic_sg(100.0),
                },
            ],
            loads: alloc::vec![Load { bus: 2, p_mw: 100.0, q_mvar: 0.0 }],
        }
    }

    #[test]
    fn chain_susceptance_matches_hand_assembly() {
        let p = build_susceptance(&chain3().validated().unwrap());
        // Reordered (1, 3, 2): full matrix [[10,0,-10],[0,10,-10],[-10,-10,20]].
        assert_eq!(p.gen_index, alloc::vec![1, 3]);
        assert_eq!(p.load_index, alloc::vec![2]);
        assert_eq!(p.b_gg, DMatrix::from_row_slice(2, 2, &[10.0, 0.0, 0.0, 10.0]));
        assert_eq!(p.b_gl, DMatrix::from_row_slice(2, 1, &[-10.0, -10.0]));
        assert_eq!(p.b_lg, DMatrix::from_row_slice(1, 2, &[-10.0, -10.0]));
        assert_eq!(p.b_ll.to_dense()[(0, 0)], 20.0);
    }

    #[test]
    fn parallel_branches_add() {
        let mut c = chain3();
        c.branches.push(Branch { from: 1, to: 2, x: 0.1, in_service: true });
        let p = build_susceptance(&c.validated().unwrap());
        assert_eq!(p.b_gl[(0, 0)], -20.0);
    }

    #[test]
    fn chain_kron_reduction_hand_values() {
        let p = build_susceptance(&chain3().validated().unwrap());
        let r = kron_reduce(&p).unwrap();
        assert_abs_diff_eq!(r.b_r[(0, 0)], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.b_r[(0, 1)], -5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.b_r[(1, 1)], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.b_l[(0, 0)], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.b_l[(1, 0)], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn no_load_buses_is_identity_reduction() {
        let mut c = chain3();
        // Single branch between two generator buses.
        c.buses.remove(1);
        c.branches = alloc::vec![Branch { from: 1, to: 3, x: 0.2, in_service: true }];
        c.loads.clear();
        let p = build_susceptance(&c.validated().unwrap());
        let r = kron_reduce(&p).unwrap();
        assert_eq!(r.b_r, DMatrix::from_row_slice(2, 2, &[5.0, -5.0, -5.0, 5.0]));
        assert_eq!(r.b_l.ncols(), 0);
    }

    #[test]
    fn relative_incidence_examples() {
        let m3 = relative_incidence(3).unwrap();
        assert_eq!(m3, DMatrix::from_row_slice(2, 3, &[1.0, 0.0, -1.0, 0.0, 1.0, -1.0]));
        let m2 = relative_incidence(2).unwrap();
        assert_eq!(m2, DMatrix::from_row_slice(1, 2, &[1.0, -1.0]));
        assert!(relative_incidence(1).is_err());
        // Equal angles map to zero relative angles.
        let equal = nalgebra::DVector::from_element(3, 0.7);
        assert_eq!((m3 * equal).amax(), 0.0);
    }
}
