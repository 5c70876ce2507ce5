//! Substructuring: element grouping, interface bookkeeping, compatibility and
//! localization operators, and primal assembly.
//!
//! The global displacement vector uses the model's free-DoF numbering, so a
//! DoF on an interface node appears once globally and once in every
//! substructure that touches the node.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;
use serde::{Deserialize, Serialize};

use crate::fe::{Domain, DomainElement, Model, DOFS_PER_NODE};
use crate::linalg::{csc_from_triplets, submatrix};
use crate::{Error, Result};

/// Boolean localization operator stored as an index map: row `k` of the
/// matrix has a single unit entry in column `map[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub map: Vec<usize>,
    pub n_global: usize,
}

impl Localization {
    pub fn new(map: Vec<usize>, n_global: usize) -> Result<Self> {
        if let Some(&bad) = map.iter().find(|&&g| g >= n_global) {
            return Err(Error::DimensionMismatch {
                context: "localization index",
                expected: n_global,
                found: bad,
            });
        }
        Ok(Self { map, n_global })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
            n_global: n,
        }
    }

    pub fn n_local(&self) -> usize {
        self.map.len()
    }

    /// `L x`.
    pub fn extract(&self, global: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.map.len(), self.map.iter().map(|&g| global[g]))
    }

    /// `out += Lᵀ x`.
    pub fn scatter_add(&self, local: &DVector<f64>, out: &mut DVector<f64>) {
        for (k, &g) in self.map.iter().enumerate() {
            out[g] += local[k];
        }
    }

    pub fn matrix(&self) -> CscMatrix<f64> {
        csc_from_triplets(
            self.map.len(),
            self.n_global,
            self.map.iter().enumerate().map(|(k, &g)| (k, g, 1.0)),
        )
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.map.len(), self.n_global);
        for (k, &g) in self.map.iter().enumerate() {
            l[(k, g)] = 1.0;
        }
        l
    }
}

/// `Σ Lᵀ A L` over sparse local operators.
pub fn primal_assemble(ops: &[&CscMatrix<f64>], locs: &[&Localization]) -> Result<CscMatrix<f64>> {
    let n = check_conformity(ops.iter().map(|a| (a.nrows(), a.ncols())), locs)?;
    let trip = ops.iter().zip(locs).flat_map(|(a, l)| {
        a.triplet_iter()
            .map(move |(i, j, &v)| (l.map[i], l.map[j], v))
    });
    Ok(csc_from_triplets(n, n, trip))
}

/// `Σ Lᵀ A L` over dense local operators.
pub fn primal_assemble_dense(ops: &[&DMatrix<f64>], locs: &[&Localization]) -> Result<DMatrix<f64>> {
    let n = check_conformity(ops.iter().map(|a| (a.nrows(), a.ncols())), locs)?;
    let mut out = DMatrix::zeros(n, n);
    for (a, l) in ops.iter().zip(locs) {
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                out[(l.map[i], l.map[j])] += a[(i, j)];
            }
        }
    }
    Ok(out)
}

fn check_conformity(
    shapes: impl Iterator<Item = (usize, usize)>,
    locs: &[&Localization],
) -> Result<usize> {
    let shapes: Vec<_> = shapes.collect();
    if shapes.len() != locs.len() {
        return Err(Error::DimensionMismatch {
            context: "primal assembly operator count",
            expected: locs.len(),
            found: shapes.len(),
        });
    }
    let n = locs.first().map_or(0, |l| l.n_global);
    for ((r, c), l) in shapes.iter().zip(locs) {
        if *r != l.n_local() || *c != l.n_local() {
            return Err(Error::DimensionMismatch {
                context: "primal assembly operator shape",
                expected: l.n_local(),
                found: if *r != l.n_local() { *r } else { *c },
            });
        }
        if l.n_global != n {
            return Err(Error::DimensionMismatch {
                context: "primal assembly global size",
                expected: n,
                found: l.n_global,
            });
        }
    }
    Ok(n)
}

/// Interface between substructures, given by a node set.
#[derive(Debug, Clone, PartialEq)]
pub struct Interface {
    pub nodes: Vec<usize>,
    /// Free DoFs of the interface nodes, node-major.
    pub dofs: Vec<usize>,
    /// Substructures touching this interface, ascending.
    pub substructures: Vec<usize>,
}

/// Which partition block of a substructure operator to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    InternalInternal,
    InternalInterface,
    InterfaceInternal,
    InterfaceInterface,
}

#[derive(Debug, Clone)]
pub struct Substructure {
    pub elements: Vec<usize>,
    /// Global DoFs ordered internal first, then interface grouped by
    /// interface. Doubles as the localization map.
    pub localization: Localization,
    pub n_internal: usize,
    /// Interfaces touched, with the local index range of their DoFs.
    pub interfaces: Vec<(usize, std::ops::Range<usize>)>,
    pub domain: Domain,
    pub mass: CscMatrix<f64>,
    pub stiffness: CscMatrix<f64>,
    pub damping: CscMatrix<f64>,
}

impl Substructure {
    pub fn n(&self) -> usize {
        self.localization.n_local()
    }

    pub fn n_internal(&self) -> usize {
        self.n_internal
    }

    pub fn n_interface(&self) -> usize {
        self.n() - self.n_internal
    }

    pub fn internal_dofs(&self) -> &[usize] {
        &self.localization.map[..self.n_internal]
    }

    pub fn interface_dofs(&self) -> &[usize] {
        &self.localization.map[self.n_internal..]
    }

    fn ranges(&self, block: Block) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let u = 0..self.n_internal;
        let q = self.n_internal..self.n();
        match block {
            Block::InternalInternal => (u.clone(), u),
            Block::InternalInterface => (u, q),
            Block::InterfaceInternal => (q, u),
            Block::InterfaceInterface => (q.clone(), q),
        }
    }

    pub fn block(&self, op: &CscMatrix<f64>, block: Block) -> CscMatrix<f64> {
        let (r, c) = self.ranges(block);
        submatrix(op, &r.collect::<Vec<_>>(), &c.collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub n_global: usize,
    pub substructures: Vec<Substructure>,
    pub interfaces: Vec<Interface>,
    /// Signed Boolean compatibility matrices, one per substructure, all with
    /// the same number of rows.
    pub compatibility: Vec<CscMatrix<f64>>,
}

/// Splits the model into substructures separated by the given interface node
/// sets. Substructures are the connected components of the element graph once
/// interface nodes are removed, numbered by their lowest element index.
pub fn partition_model(model: &Model, interface_nodes: &[Vec<usize>]) -> Result<Partition> {
    let n_nodes = model.n_nodes();
    let mut interface_of = vec![None; n_nodes];
    for (k, set) in interface_nodes.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::InvalidInterface(format!("interface {k} has no nodes")));
        }
        for &node in set {
            if node >= n_nodes {
                return Err(Error::InvalidInterface(format!(
                    "interface {k} references missing node {node}"
                )));
            }
            if let Some(other) = interface_of[node] {
                return Err(Error::InvalidInterface(format!(
                    "node {node} belongs to interfaces {other} and {k}"
                )));
            }
            interface_of[node] = Some(k);
        }
    }

    // union-find over elements joined through non-interface nodes
    let n_el = model.n_elements();
    let mut parent: Vec<usize> = (0..n_el).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut first_element_at = vec![None; n_nodes];
    for (e, nodes) in model.connectivity().iter().enumerate() {
        if nodes.iter().all(|&n| interface_of[n].is_some()) {
            return Err(Error::InvalidPartition(format!(
                "element {e} has only interface nodes and belongs to no substructure"
            )));
        }
        for &node in nodes {
            if interface_of[node].is_some() {
                continue;
            }
            match first_element_at[node] {
                None => first_element_at[node] = Some(e),
                Some(f) => {
                    let (a, b) = (root(&mut parent, f), root(&mut parent, e));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut component_of_root = vec![usize::MAX; n_el];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for e in 0..n_el {
        let r = root(&mut parent, e);
        if component_of_root[r] == usize::MAX {
            component_of_root[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[component_of_root[r]].push(e);
    }

    let free_dofs_of = |node: usize| -> Vec<usize> {
        (0..DOFS_PER_NODE)
            .filter_map(|k| model.free_index(node * DOFS_PER_NODE + k))
            .collect()
    };

    let mut interfaces: Vec<Interface> = interface_nodes
        .iter()
        .enumerate()
        .map(|(k, nodes)| {
            let dofs: Vec<usize> = nodes.iter().flat_map(|&n| free_dofs_of(n)).collect();
            if dofs.is_empty() {
                Err(Error::InvalidInterface(format!("interface {k} has no free DoFs")))
            } else {
                Ok(Interface {
                    nodes: nodes.clone(),
                    dofs,
                    substructures: Vec::new(),
                })
            }
        })
        .collect::<Result<_>>()?;

    let mut substructures = Vec::with_capacity(groups.len());
    let mut internal_owner = vec![usize::MAX; model.n_free()];
    for (s, elements) in groups.into_iter().enumerate() {
        let mut internal = BTreeSet::new();
        let mut touched = BTreeSet::new();
        let mut touched_nodes = BTreeSet::new();
        for &e in &elements {
            for &node in &model.connectivity()[e] {
                match interface_of[node] {
                    Some(k) => {
                        touched.insert(k);
                        touched_nodes.insert(node);
                    }
                    None => internal.extend(free_dofs_of(node)),
                }
            }
        }
        for &d in &internal {
            if internal_owner[d] != usize::MAX {
                return Err(Error::InvalidPartition(format!(
                    "DoF {d} is internal to substructures {} and {s}",
                    internal_owner[d]
                )));
            }
            internal_owner[d] = s;
        }
        let mut map: Vec<usize> = internal.into_iter().collect();
        let n_internal = map.len();
        let mut ranges = Vec::new();
        for &k in &touched {
            let iface = &mut interfaces[k];
            if let Some(&missing) = iface.nodes.iter().find(|n| !touched_nodes.contains(n)) {
                return Err(Error::InvalidInterface(format!(
                    "substructure {s} touches interface {k} but not its node {missing}"
                )));
            }
            iface.substructures.push(s);
            let start = map.len();
            map.extend(&iface.dofs);
            ranges.push((k, start..map.len()));
        }
        let mut local_of = vec![None; model.n_free()];
        for (k, &g) in map.iter().enumerate() {
            local_of[g] = Some(k);
        }
        let domain = Domain {
            n: map.len(),
            elements: elements
                .iter()
                .map(|&e| DomainElement {
                    element: e,
                    dofs: model
                        .element_global_dofs(e)
                        .map(|g| model.free_index(g).and_then(|i| local_of[i])),
                })
                .collect(),
        };
        let mass = domain.mass(model);
        let stiffness = domain.stiffness(model);
        let damping = domain.damping(model);
        substructures.push(Substructure {
            elements,
            localization: Localization::new(map, model.n_free())?,
            n_internal,
            interfaces: ranges,
            domain,
            mass,
            stiffness,
            damping,
        });
    }
    for (k, iface) in interfaces.iter().enumerate() {
        if iface.substructures.len() < 2 {
            log::warn!("interface {k} touches a single substructure");
        }
    }

    let compatibility = compatibility_matrices(&substructures, &interfaces);
    Ok(Partition {
        n_global: model.n_free(),
        substructures,
        interfaces,
        compatibility,
    })
}

/// One constraint row per shared DoF and consecutive pair of sharing
/// substructures: `+1` on the lower-index substructure, `-1` on the next.
fn compatibility_matrices(subs: &[Substructure], interfaces: &[Interface]) -> Vec<CscMatrix<f64>> {
    let mut trips: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); subs.len()];
    let mut row = 0;
    for (k, iface) in interfaces.iter().enumerate() {
        for (d, _) in iface.dofs.iter().enumerate() {
            for pair in iface.substructures.windows(2) {
                for (&s, sign) in pair.iter().zip([1.0, -1.0]) {
                    let range = &subs[s]
                        .interfaces
                        .iter()
                        .find(|(kk, _)| *kk == k)
                        .expect("interface registered on substructure")
                        .1;
                    trips[s].push((row, range.start + d, sign));
                }
                row += 1;
            }
        }
    }
    trips
        .into_iter()
        .zip(subs)
        .map(|(t, s)| csc_from_triplets(row, s.n(), t))
        .collect()
}

impl Partition {
    pub fn localizations(&self) -> Vec<&Localization> {
        self.substructures.iter().map(|s| &s.localization).collect()
    }

    /// Splits a global load so that each shared DoF is carried by the
    /// lowest-index substructure containing it; `Σ Lᵀ f⁽ˢ⁾ = f`.
    pub fn split_load(&self, f: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut owned = vec![false; self.n_global];
        self.substructures
            .iter()
            .map(|s| {
                DVector::from_iterator(
                    s.n(),
                    s.localization.map.iter().map(|&g| {
                        if owned[g] {
                            0.0
                        } else {
                            owned[g] = true;
                            f[g]
                        }
                    }),
                )
            })
            .collect()
    }

    /// Max-norm of `Σ B⁽ˢ⁾ L⁽ˢ⁾`.
    pub fn compatibility_residual(&self) -> f64 {
        let rows = self.compatibility.first().map_or(0, |b| b.nrows());
        let mut sum = DMatrix::zeros(rows, self.n_global);
        for (b, s) in self.compatibility.iter().zip(&self.substructures) {
            for (r, c, &v) in b.triplet_iter() {
                sum[(r, s.localization.map[c])] += v;
            }
        }
        sum.amax()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::{assemble_global, BeamGeometry, Material, Rayleigh};
    use crate::linalg::to_dense;

    fn beam(elements: usize) -> Model {
        Model::clamped_beam(
            &BeamGeometry {
                length: 0.1,
                width: 5e-3,
                thickness: 0.5e-3,
                elements,
                rise: 0.0,
            },
            Material::new(210e9, 7800.0, 0.33).unwrap(),
            Rayleigh {
                alpha: 24.85,
                beta: 3.15e-6,
            },
        )
        .unwrap()
    }

    #[test]
    fn beam_cut_in_two() {
        let m = beam(20);
        let cut = m.node_near(0.06);
        let p = partition_model(&m, &[vec![cut]]).unwrap();
        assert_eq!(p.substructures.len(), 2);
        assert_eq!(p.interfaces[0].dofs.len(), 3);
        assert_eq!(p.substructures[0].n_interface(), 3);
        assert_eq!(p.substructures[0].elements, (0..12).collect::<Vec<_>>());
        assert_eq!(p.compatibility_residual(), 0.0);
        assert_eq!(p.compatibility[0].nrows(), 3);
    }

    #[test]
    fn single_substructure_is_identity() {
        let m = beam(5);
        let p = partition_model(&m, &[]).unwrap();
        assert_eq!(p.substructures.len(), 1);
        assert_eq!(p.substructures[0].localization, Localization::identity(m.n_free()));
        assert_eq!(p.compatibility[0].nrows(), 0);
    }

    #[test]
    fn primal_assembly_matches_monolithic() {
        let m = beam(20);
        let p = partition_model(&m, &[vec![5], vec![12]]).unwrap();
        assert_eq!(p.substructures.len(), 3);
        let ops = assemble_global(&m);
        let locs = p.localizations();
        let k: Vec<_> = p.substructures.iter().map(|s| &s.stiffness).collect();
        let mass: Vec<_> = p.substructures.iter().map(|s| &s.mass).collect();
        let ka = to_dense(&primal_assemble(&k, &locs).unwrap());
        let ma = to_dense(&primal_assemble(&mass, &locs).unwrap());
        assert_eq!(ka, to_dense(&ops.stiffness));
        assert_eq!(ma, to_dense(&ops.mass));
    }

    #[test]
    fn shared_springs_double() {
        let l = Localization::new(vec![0], 1).unwrap();
        let a = csc_from_triplets(1, 1, [(0, 0, 2.0)]);
        let k = primal_assemble(&[&a, &a], &[&l, &l]).unwrap();
        assert_eq!(to_dense(&k)[(0, 0)], 4.0);
    }

    #[test]
    fn load_split_recombines() {
        let m = beam(10);
        let p = partition_model(&m, &[vec![4]]).unwrap();
        let f = m.pressure_load(1.0);
        let parts = p.split_load(&f);
        let mut sum = DVector::zeros(p.n_global);
        for (s, fs) in p.substructures.iter().zip(&parts) {
            s.localization.scatter_add(fs, &mut sum);
        }
        assert_eq!(sum, f);
    }

    #[test]
    fn invalid_partitions() {
        let m = beam(10);
        assert!(partition_model(&m, &[vec![3], vec![3]]).is_err());
        assert!(partition_model(&m, &[vec![3, 4]]).is_err());
        assert!(partition_model(&m, &[vec![99]]).is_err());
        assert!(partition_model(&m, &[vec![]]).is_err());
        // clamped end node has no free DoFs
        assert!(partition_model(&m, &[vec![0]]).is_err());
    }

    #[test]
    fn extracted_vectors_agree_on_interfaces() {
        let m = beam(10);
        let p = partition_model(&m, &[vec![6]]).unwrap();
        let x = DVector::from_fn(p.n_global, |i, _| i as f64 * 0.1);
        let a = p.substructures[0].localization.extract(&x);
        let b = p.substructures[1].localization.extract(&x);
        let s0 = &p.substructures[0];
        let s1 = &p.substructures[1];
        for k in 0..3 {
            assert_eq!(a[s0.n_internal + k], b[s1.n_internal + k]);
        }
    }
}
