//! Reduced-order models: Galerkin projection of substructures on the
//! manifold tangent space, truncated at cubic order, and primal assembly.
//!
//! The reduced elastic force is `K ξ + K2:(ξ⊗ξ) + K3⋮(ξ⊗ξ⊗ξ)`. Projection is
//! done element by element so that no global nonlinear tensor is formed.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{
    interface_bases, reduction_basis, EigenOptions, InterfaceReduction, ReductionBasis,
};
use crate::fe::Model;
use crate::linalg::{generalized_eigen_dense, spmm};
use crate::manifold::{build_manifold, pair_count, pair_index, pairs, Manifold, ManifoldOptions, QuadraticBlocks};
use crate::partition::{partition_model, Localization, Partition, Substructure};
use crate::tensor::{Tensor3, Tensor4};
use crate::{Error, Result};

/// Reduced operators of one substructure together with the displacement
/// map they were projected on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstructureRom {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub k2: Tensor3,
    pub k3: Tensor4,
    /// Linear part of the substructure displacement map (`n⁽ˢ⁾ × m⁽ˢ⁾`).
    pub linear: DMatrix<f64>,
    /// Packed quadratic part (`n⁽ˢ⁾ × m⁽ˢ⁾(m⁽ˢ⁾+1)/2`).
    pub quadratic: DMatrix<f64>,
    pub n_phi: usize,
    pub n_chi: usize,
}

impl SubstructureRom {
    pub fn m(&self) -> usize {
        self.n_phi + self.n_chi
    }

    pub fn force(&self, xi: &DVector<f64>) -> DVector<f64> {
        polynomial_force(&self.stiffness, &self.k2, &self.k3, xi)
    }
}

fn polynomial_force(k: &DMatrix<f64>, k2: &Tensor3, k3: &Tensor4, xi: &DVector<f64>) -> DVector<f64> {
    let x = xi.as_slice();
    k * xi + k2.contract2(x, x) + k3.contract3(x, x, x)
}

fn linear_operators(sub: &Substructure, v: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let sym = |a: DMatrix<f64>| (&a + a.transpose()) * 0.5;
    let vt = v.transpose();
    (
        sym(&vt * spmm(&sub.mass, v)),
        sym(&vt * spmm(&sub.damping, v)),
        sym(&vt * spmm(&sub.stiffness, v)),
    )
}

/// Element-level projection of the nonlinear tensors on the manifold:
///
/// ```text
/// K2_r[a,b,c]   = Σ_e L_ia K2_ijk L_jb L_kc
/// K3_r[a,b,c,d] = Σ_e L_ia K2_ijk L_jb Q_kcd + L_ia K2_ijk Q_jbc L_kd
///                     + L_ia L_jb L_kc L_ld K3_ijkl
/// ```
///
/// followed by full symmetrization of both tensors.
pub fn project_substructure(model: &Model, sub: &Substructure, manifold: &Manifold) -> Result<SubstructureRom> {
    if manifold.n() != sub.n() {
        return Err(Error::DimensionMismatch {
            context: "manifold rows vs substructure DoFs",
            expected: sub.n(),
            found: manifold.n(),
        });
    }
    let m = manifold.m();
    let (mass, damping, stiffness) = linear_operators(sub, &manifold.linear);
    let mut k2 = Tensor3::cube(m);
    let mut k3 = Tensor4::cube(m);
    let q_full = manifold.quadratic_tensor();

    for de in &sub.domain.elements {
        let t = model.element_tensors(de.element);
        let le = DMatrix::from_fn(6, m, |r, a| de.dofs[r].map_or(0.0, |i| manifold.linear[(i, a)]));
        let qe = |r: usize, a: usize, b: usize| de.dofs[r].map_or(0.0, |i| q_full.get(i, a, b));
        let has_q = de.dofs.iter().flatten().any(|&i| i < manifold.n_internal);

        // g[a][j][k] = Σ_i L_ia K2_ijk
        let mut g = vec![[[0.0; 6]; 6]; m];
        for (a, ga) in g.iter_mut().enumerate() {
            for i in 0..6 {
                let l = le[(i, a)];
                if l == 0.0 {
                    continue;
                }
                for j in 0..6 {
                    for k in 0..6 {
                        ga[j][k] += l * t.k2.get(i, j, k);
                    }
                }
            }
        }
        // h[a][b][k] = Σ_j g[a][j][k] L_jb
        let mut h = vec![vec![[0.0; 6]; m]; m];
        for a in 0..m {
            for b in 0..m {
                for j in 0..6 {
                    let l = le[(j, b)];
                    if l == 0.0 {
                        continue;
                    }
                    for k in 0..6 {
                        h[a][b][k] += g[a][j][k] * l;
                    }
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let v: f64 = (0..6).map(|k| h[a][b][k] * le[(k, c)]).sum();
                    k2.add(a, b, c, v);
                }
            }
        }
        if has_q {
            let q: Vec<Vec<Vec<f64>>> = (0..6)
                .map(|r| (0..m).map(|a| (0..m).map(|b| qe(r, a, b)).collect()).collect())
                .collect();
            for a in 0..m {
                for b in 0..m {
                    for c in 0..m {
                        for d in 0..m {
                            // L K2 L Q and L K2 Q L; g is symmetric in its
                            // last two indices so h doubles as Σ g L
                            let mut v = 0.0;
                            for k in 0..6 {
                                v += h[a][b][k] * q[k][c][d] + h[a][d][k] * q[k][b][c];
                            }
                            k3.add(a, b, c, d, v);
                        }
                    }
                }
            }
        }
        // pure cubic term
        let mut p1 = vec![[[[0.0; 6]; 6]; 6]; m];
        for (a, pa) in p1.iter_mut().enumerate() {
            for i in 0..6 {
                let l = le[(i, a)];
                if l == 0.0 {
                    continue;
                }
                for j in 0..6 {
                    for k in 0..6 {
                        for ll in 0..6 {
                            pa[j][k][ll] += l * t.k3.get(i, j, k, ll);
                        }
                    }
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                let mut p2 = [[0.0; 6]; 6];
                for j in 0..6 {
                    let l = le[(j, b)];
                    if l == 0.0 {
                        continue;
                    }
                    for k in 0..6 {
                        for ll in 0..6 {
                            p2[k][ll] += l * p1[a][j][k][ll];
                        }
                    }
                }
                for c in 0..m {
                    let mut p3 = [0.0; 6];
                    for k in 0..6 {
                        let l = le[(k, c)];
                        if l == 0.0 {
                            continue;
                        }
                        for ll in 0..6 {
                            p3[ll] += l * p2[k][ll];
                        }
                    }
                    for d in 0..m {
                        let v: f64 = (0..6).map(|ll| p3[ll] * le[(ll, d)]).sum();
                        k3.add(a, b, c, d, v);
                    }
                }
            }
        }
    }

    Ok(SubstructureRom {
        mass,
        damping,
        stiffness,
        k2: k2.symmetrized(),
        k3: k3.symmetrized(),
        linear: manifold.linear.clone(),
        quadratic: manifold.quadratic.clone(),
        n_phi: manifold.n_phi,
        n_chi: manifold.n_chi,
    })
}

/// Projection on a manifold whose quadratic part is not the condensed one,
/// e.g. after [`Manifold::with_blocks`]. The quartic part of the reduced
/// potential then needs `2 QᵀKQ + 2 Lᵀ K2 L Q` on top of the terms kept by
/// [`project_substructure`], which rely on `K Q` cancelling `K2:LL`. For the
/// condensed manifold the extra terms vanish.
pub fn project_substructure_galerkin(
    model: &Model,
    sub: &Substructure,
    manifold: &Manifold,
) -> Result<SubstructureRom> {
    let mut rom = project_substructure(model, sub, manifold)?;
    let pure = project_substructure(model, sub, &manifold.with_blocks(QuadraticBlocks::NONE))?;
    let m = manifold.m();
    let g = manifold.quadratic.transpose() * spmm(&sub.stiffness, &manifold.quadratic);
    let mut qkq = Tensor4::cube(m);
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    qkq.set(a, b, c, d, 2.0 * g[(pair_index(m, a, b), pair_index(m, c, d))]);
                }
            }
        }
    }
    // rom.k3 = sym(2 K2:LLQ + K3:LLLL), pure.k3 = sym(K3:LLLL)
    rom.k3.scale(2.0);
    rom.k3.axpy(-1.0, &pure.k3);
    rom.k3.axpy(1.0, &qkq.symmetrized());
    Ok(rom)
}

/// Linear Craig-Bampton model on the basis `[Φ, SΨ; 0, Ψ]`.
pub fn classic_cb(sub: &Substructure, basis: &ReductionBasis) -> SubstructureRom {
    let (n_u, n_q) = (sub.n_internal(), sub.n_interface());
    let (n_phi, n_chi) = (basis.phi.ncols(), basis.psi.ncols());
    let m = n_phi + n_chi;
    let mut v = DMatrix::zeros(sub.n(), m);
    v.view_mut((0, 0), (n_u, n_phi)).copy_from(&basis.phi);
    v.view_mut((0, n_phi), (n_u, n_chi))
        .copy_from(&(&basis.static_modes * &basis.psi));
    v.view_mut((n_u, n_phi), (n_q, n_chi)).copy_from(&basis.psi);
    let (mass, damping, stiffness) = linear_operators(sub, &v);
    SubstructureRom {
        mass,
        damping,
        stiffness,
        k2: Tensor3::cube(m),
        k3: Tensor4::cube(m),
        linear: v,
        quadratic: DMatrix::zeros(sub.n(), pair_count(m)),
        n_phi,
        n_chi,
    }
}

/// Assembled reduced model over `ξ = [η⁽¹⁾, …, η⁽ᴺ⁾, χ⁽ᴵ¹⁾, …]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub k2: Tensor3,
    pub k3: Tensor4,
    /// `K2 + K2_132`.
    pub k2t: Tensor3,
    /// `K3 + K3_1324 + K3_1243`.
    pub k3t: Tensor4,
    /// Linear map from `ξ` to the full free-DoF vector; its transpose maps
    /// nodal loads to reduced loads.
    pub load_map: DMatrix<f64>,
    /// Packed quadratic map from `ξ` to the full free-DoF vector.
    pub quadratic_map: DMatrix<f64>,
    /// Reduced localization of every substructure.
    pub localizations: Vec<Localization>,
    /// `(n_φ, n_χ)` of every substructure.
    pub dims: Vec<(usize, usize)>,
}

/// Localizes substructure ROMs on every axis and sums them.
pub fn assemble_rom(partition: &Partition, subs: &[SubstructureRom], interface_dims: &[usize]) -> Result<ReducedModel> {
    if subs.len() != partition.substructures.len() || interface_dims.len() != partition.interfaces.len() {
        return Err(Error::DimensionMismatch {
            context: "substructure ROM count",
            expected: partition.substructures.len(),
            found: subs.len(),
        });
    }
    let n_eta: usize = subs.iter().map(|s| s.n_phi).sum();
    let mut chi_offset = Vec::with_capacity(interface_dims.len());
    let mut m = n_eta;
    for &d in interface_dims {
        chi_offset.push(m);
        m += d;
    }
    let mut localizations = Vec::with_capacity(subs.len());
    let mut eta_offset = 0;
    for (sub, rom) in partition.substructures.iter().zip(subs) {
        let mut map: Vec<usize> = (eta_offset..eta_offset + rom.n_phi).collect();
        eta_offset += rom.n_phi;
        for (k, _) in &sub.interfaces {
            map.extend(chi_offset[*k]..chi_offset[*k] + interface_dims[*k]);
        }
        if map.len() != rom.m() {
            return Err(Error::DimensionMismatch {
                context: "substructure reduced coordinates",
                expected: rom.m(),
                found: map.len(),
            });
        }
        localizations.push(Localization::new(map, m)?);
    }

    let mut mass = DMatrix::zeros(m, m);
    let mut damping = DMatrix::zeros(m, m);
    let mut stiffness = DMatrix::zeros(m, m);
    let mut k2 = Tensor3::cube(m);
    let mut k3 = Tensor4::cube(m);
    let n_full = partition.n_global;
    let mut load_map = DMatrix::zeros(n_full, m);
    let mut quadratic_map = DMatrix::zeros(n_full, pair_count(m));
    for ((sub, rom), loc) in partition.substructures.iter().zip(subs).zip(&localizations) {
        let g = &loc.map;
        let ms = rom.m();
        for a in 0..ms {
            for b in 0..ms {
                mass[(g[a], g[b])] += rom.mass[(a, b)];
                damping[(g[a], g[b])] += rom.damping[(a, b)];
                stiffness[(g[a], g[b])] += rom.stiffness[(a, b)];
                for c in 0..ms {
                    k2.add(g[a], g[b], g[c], rom.k2.get(a, b, c));
                    for d in 0..ms {
                        k3.add(g[a], g[b], g[c], g[d], rom.k3.get(a, b, c, d));
                    }
                }
            }
        }
        // interface rows coincide between substructures, so overwriting is
        // consistent
        for (r, &dof) in sub.localization.map.iter().enumerate() {
            for a in 0..ms {
                load_map[(dof, g[a])] = rom.linear[(r, a)];
            }
            for (p, (a, b)) in pairs(ms).into_iter().enumerate() {
                quadratic_map[(dof, pair_index(m, g[a], g[b]))] = rom.quadratic[(r, p)];
            }
        }
    }
    let k2t = {
        let mut t = k2.clone();
        t.axpy(1.0, &k2.permute_132());
        t
    };
    let k3t = {
        let mut t = k3.clone();
        t.axpy(1.0, &k3.permuted([0, 2, 1, 3]));
        t.axpy(1.0, &k3.permuted([0, 1, 3, 2]));
        t
    };
    Ok(ReducedModel {
        mass,
        damping,
        stiffness,
        k2,
        k3,
        k2t,
        k3t,
        load_map,
        quadratic_map,
        localizations,
        dims: subs.iter().map(|s| (s.n_phi, s.n_chi)).collect(),
    })
}

/// Reduced energies at a state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Energies {
    pub kinetic: f64,
    pub potential: f64,
    /// Rate of Rayleigh dissipation `ξ̇ᵀ D ξ̇`.
    pub dissipation_rate: f64,
    pub total: f64,
}

impl ReducedModel {
    pub fn m(&self) -> usize {
        self.mass.nrows()
    }

    pub fn force(&self, xi: &DVector<f64>) -> DVector<f64> {
        polynomial_force(&self.stiffness, &self.k2, &self.k3, xi)
    }

    /// `K + K2t·ξ + K3t:(ξ⊗ξ)`.
    pub fn jacobian(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let x = xi.as_slice();
        &self.stiffness + self.k2t.contract_last(x) + self.k3t.contract_last2(x, x)
    }

    pub fn potential(&self, xi: &DVector<f64>) -> f64 {
        let x = xi.as_slice();
        0.5 * xi.dot(&(&self.stiffness * xi))
            + xi.dot(&self.k2.contract2(x, x)) / 3.0
            + xi.dot(&self.k3.contract3(x, x, x)) / 4.0
    }

    pub fn energies(&self, xi: &DVector<f64>, xi_dot: &DVector<f64>) -> Energies {
        let kinetic = 0.5 * xi_dot.dot(&(&self.mass * xi_dot));
        let potential = self.potential(xi);
        Energies {
            kinetic,
            potential,
            dissipation_rate: xi_dot.dot(&(&self.damping * xi_dot)),
            total: kinetic + potential,
        }
    }

    /// `f_r = Tᵀ f` for a full-model nodal load.
    pub fn reduce_load(&self, f: &DVector<f64>) -> DVector<f64> {
        self.load_map.tr_mul(f)
    }

    /// Full free-DoF displacement `T ξ + Q̃:(ξ⊗ξ)`.
    pub fn reconstruct(&self, xi: &DVector<f64>) -> DVector<f64> {
        let m = self.m();
        let mut w = DVector::zeros(pair_count(m));
        for (p, (a, b)) in pairs(m).into_iter().enumerate() {
            w[p] = if a == b { xi[a] * xi[a] } else { 2.0 * xi[a] * xi[b] };
        }
        &self.load_map * xi + &self.quadratic_map * w
    }

    /// Derivative of [`ReducedModel::reconstruct`] with respect to `ξ`.
    pub fn reconstruct_tangent(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let m = self.m();
        let mut t = self.load_map.clone();
        for a in 0..m {
            let mut col = t.column_mut(a);
            for b in 0..m {
                if xi[b] != 0.0 {
                    let p = pair_index(m, a.min(b), a.max(b));
                    col.axpy(2.0 * xi[b], &self.quadratic_map.column(p), 1.0);
                }
            }
        }
        t
    }

    /// Natural frequencies of the linearized ROM [Hz], ascending.
    pub fn frequencies_hz(&self) -> Result<Vec<f64>> {
        let (vals, _) = generalized_eigen_dense(&self.stiffness, &self.mass)?;
        Ok(vals
            .iter()
            .map(|v| v.max(0.0).sqrt() / (2.0 * std::f64::consts::PI))
            .collect())
    }

    /// Copy without nonlinear terms.
    pub fn linearized(&self) -> Self {
        let mut out = self.clone();
        for t in [&mut out.k2, &mut out.k2t] {
            t.scale(0.0);
        }
        for t in [&mut out.k3, &mut out.k3t] {
            t.scale(0.0);
        }
        out.quadratic_map.fill(0.0);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rom: Self = serde_json::from_str(s)?;
        let m = rom.m();
        let ok = rom.stiffness.shape() == (m, m)
            && rom.damping.shape() == (m, m)
            && rom.k2.dims() == [m; 3]
            && rom.k3.dims() == [m; 4]
            && rom.k2t.dims() == [m; 3]
            && rom.k3t.dims() == [m; 4]
            && rom.load_map.ncols() == m
            && rom.quadratic_map.ncols() == pair_count(m);
        if !ok {
            return Err(Error::Format("reduced model operators have inconsistent sizes".into()));
        }
        Ok(rom)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Fixed-interface modes kept per substructure.
    pub modes_per_substructure: usize,
    pub interface: InterfaceReduction,
    pub eigen: EigenOptions,
    pub manifold: ManifoldOptions,
    pub keep: QuadraticBlocks,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            modes_per_substructure: 1,
            interface: InterfaceReduction::VirtualNode,
            eigen: EigenOptions::default(),
            manifold: ManifoldOptions::default(),
            keep: QuadraticBlocks::ALL,
        }
    }
}

/// Everything produced while reducing a model.
pub struct Reduction {
    pub partition: Partition,
    pub interface_bases: Vec<DMatrix<f64>>,
    pub bases: Vec<ReductionBasis>,
    pub manifolds: Vec<Manifold>,
    /// Nonlinear ROM on the quadratic manifold.
    pub nlcb: ReducedModel,
    /// Linear Craig-Bampton ROM.
    pub cb: ReducedModel,
}

/// Partition, reduce every substructure and assemble both the nonlinear
/// manifold ROM and the linear Craig-Bampton ROM.
pub fn reduce(model: &Model, interface_nodes: &[Vec<usize>], opts: &BuildOptions) -> Result<Reduction> {
    let partition = partition_model(model, interface_nodes)?;
    let ibases = interface_bases(model, &partition, opts.interface)?;
    let mut bases = Vec::new();
    let mut manifolds = Vec::new();
    let mut nl_subs = Vec::new();
    let mut cb_subs = Vec::new();
    for sub in &partition.substructures {
        let (basis, chol) = reduction_basis(sub, opts.modes_per_substructure, &ibases, &opts.eigen)?;
        let manifold = build_manifold(model, sub, &basis, &chol, &opts.manifold)?.with_blocks(opts.keep);
        nl_subs.push(if opts.keep == QuadraticBlocks::ALL {
            project_substructure(model, sub, &manifold)?
        } else {
            project_substructure_galerkin(model, sub, &manifold)?
        });
        cb_subs.push(classic_cb(sub, &basis));
        bases.push(basis);
        manifolds.push(manifold);
    }
    let dims: Vec<usize> = ibases.iter().map(|b| b.ncols()).collect();
    let nlcb = assemble_rom(&partition, &nl_subs, &dims)?;
    let cb = assemble_rom(&partition, &cb_subs, &dims)?;
    Ok(Reduction {
        partition,
        interface_bases: ibases,
        bases,
        manifolds,
        nlcb,
        cb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::{BeamGeometry, Material, Rayleigh};

    fn beam(elements: usize, rise: f64) -> Model {
        Model::clamped_beam(
            &BeamGeometry {
                length: 0.1,
                width: 5e-3,
                thickness: 0.5e-3,
                elements,
                rise,
            },
            Material::new(210e9, 7800.0, 0.33).unwrap(),
            Rayleigh {
                alpha: 58.46,
                beta: 1.58e-6,
            },
        )
        .unwrap()
    }

    fn reduction(elements: usize, rise: f64, modes: usize) -> (Model, Reduction) {
        let model = beam(elements, rise);
        let cut = model.node_near(0.06);
        let opts = BuildOptions {
            modes_per_substructure: modes,
            ..Default::default()
        };
        let r = reduce(&model, &[vec![cut]], &opts).unwrap();
        (model, r)
    }

    fn xi_sample(m: usize, scale: f64) -> DVector<f64> {
        DVector::from_fn(m, |i, _| scale * ((i as f64 * 1.7 + 0.3).sin()))
    }

    #[test]
    fn dimensions_of_flat_and_curved_roms() {
        let (_, r) = reduction(20, 0.0, 1);
        assert_eq!(r.nlcb.m(), 5);
        let (_, r) = reduction(20, 5e-3, 4);
        assert_eq!(r.nlcb.m(), 11);
    }

    #[test]
    fn zero_state_and_jacobian_identity() {
        let (_, r) = reduction(20, 5e-3, 2);
        let rom = &r.nlcb;
        let z = DVector::zeros(rom.m());
        assert_eq!(rom.force(&z).amax(), 0.0);
        assert_eq!(rom.jacobian(&z), rom.stiffness);
        let e = rom.energies(&z, &z);
        assert_eq!(e, Energies::default());
    }

    #[test]
    fn jacobian_and_potential_are_consistent() {
        let (_, r) = reduction(20, 5e-3, 2);
        let rom = &r.nlcb;
        let xi = xi_sample(rom.m(), 1e-3);
        let jac = rom.jacobian(&xi);
        let f = rom.force(&xi);
        let h = 1e-7;
        for a in 0..rom.m() {
            let mut e = DVector::zeros(rom.m());
            e[a] = h;
            let col = (rom.force(&(&xi + &e)) - rom.force(&(&xi - &e))) / (2.0 * h);
            let err = (&col - jac.column(a)).norm() / jac.column(a).norm();
            assert!(err <= 1e-7, "column {a}: {err}");
            let dv = (rom.potential(&(&xi + &e)) - rom.potential(&(&xi - &e))) / (2.0 * h);
            assert!((dv - f[a]).abs() <= 1e-6 * f.amax());
        }
    }

    #[test]
    fn linear_part_matches_classic_cb_spectrum() {
        let (_, r) = reduction(30, 5e-3, 3);
        let a = r.nlcb.frequencies_hz().unwrap();
        let b = r.cb.frequencies_hz().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-8 * y);
        }
    }

    #[test]
    fn reduced_stiffness_is_positive_definite() {
        let (_, r) = reduction(20, 0.0, 1);
        assert!(r.nlcb.stiffness.clone().cholesky().is_some());
        assert!(r.nlcb.mass.clone().cholesky().is_some());
    }

    #[test]
    fn assembled_force_is_sum_of_substructure_forces() {
        let model = beam(16, 5e-3);
        let p = partition_model(&model, &[vec![6], vec![11]]).unwrap();
        let ib = interface_bases(&model, &p, InterfaceReduction::VirtualNode).unwrap();
        let mut subs = Vec::new();
        for sub in &p.substructures {
            let (basis, chol) = reduction_basis(sub, 2, &ib, &EigenOptions::default()).unwrap();
            let man = build_manifold(&model, sub, &basis, &chol, &ManifoldOptions::default()).unwrap();
            subs.push(project_substructure(&model, sub, &man).unwrap());
        }
        let rom = assemble_rom(&p, &subs, &[3, 3]).unwrap();
        assert_eq!(rom.m(), 12);
        let xi = xi_sample(rom.m(), 0.2);
        let mut sum = DVector::zeros(rom.m());
        for (s, loc) in subs.iter().zip(&rom.localizations) {
            loc.scatter_add(&s.force(&loc.extract(&xi)), &mut sum);
        }
        let f = rom.force(&xi);
        assert!((sum - &f).amax() <= 1e-12 * f.amax());
    }

    #[test]
    fn json_round_trip() {
        let (_, r) = reduction(10, 5e-3, 1);
        let s = r.nlcb.to_json().unwrap();
        assert_eq!(ReducedModel::from_json(&s).unwrap(), r.nlcb);
        assert!(ReducedModel::from_json("{}").is_err());
    }

    #[test]
    fn reconstruction_and_load_map() {
        let (model, r) = reduction(20, 0.0, 1);
        let rom = &r.nlcb;
        let xi = xi_sample(rom.m(), 1e-3);
        let d = rom.reconstruct(&xi);
        // substructure displacement maps agree with the global reconstruction
        for (sub, (man, loc)) in r.partition.substructures.iter().zip(r.manifolds.iter().zip(&rom.localizations)) {
            let ds = man.displacement(&loc.extract(&xi));
            let dg = sub.localization.extract(&d);
            assert!((ds - dg).amax() <= 1e-14 * d.amax());
        }
        let f = model.pressure_load(1.0);
        let fr = rom.reduce_load(&f);
        assert!((&fr - rom.load_map.transpose() * &f).amax() <= 1e-14 * fr.amax());
    }

    fn quartic_potential(rom: &SubstructureRom, xi: &DVector<f64>) -> f64 {
        let x = xi.as_slice();
        0.5 * xi.dot(&(&rom.stiffness * xi))
            + xi.dot(&rom.k2.contract2(x, x)) / 3.0
            + xi.dot(&rom.k3.contract3(x, x, x)) / 4.0
    }

    /// Log2 ratio of the potential error between amplitudes 2ε and ε.
    fn potential_error_order(model: &Model, sub: &Substructure, man: &Manifold, rom: &SubstructureRom) -> f64 {
        let dir = xi_sample(man.m(), 1.0);
        let dir = &dir * (0.5e-3 / (&man.linear * &dir).amax());
        let err = |eps: f64| {
            let xi = &dir * eps;
            let exact = sub.domain.strain_energy(model, &man.displacement(&xi)).unwrap();
            (exact - quartic_potential(rom, &xi)).abs()
        };
        (err(0.2) / err(0.1)).log2()
    }

    #[test]
    fn galerkin_projection_matches_condensed_formula_on_condensed_manifold() {
        let (model, r) = reduction(24, 5e-3, 2);
        for (sub, man) in r.partition.substructures.iter().zip(&r.manifolds) {
            let a = project_substructure(&model, sub, man).unwrap();
            let b = project_substructure_galerkin(&model, sub, man).unwrap();
            let mut diff = b.k3.clone();
            diff.axpy(-1.0, &a.k3);
            assert!(diff.amax() <= 1e-8 * a.k3.amax(), "{} vs {}", diff.amax(), a.k3.amax());
        }
    }

    #[test]
    fn ablated_manifold_needs_galerkin_projection() {
        let (model, r) = reduction(24, 5e-3, 2);
        let keep = QuadraticBlocks {
            cross: false,
            ..QuadraticBlocks::ALL
        };
        let sub = &r.partition.substructures[0];
        let man = r.manifolds[0].with_blocks(keep);
        let galerkin = project_substructure_galerkin(&model, sub, &man).unwrap();
        let plain = project_substructure(&model, sub, &man).unwrap();
        let p_galerkin = potential_error_order(&model, sub, &man, &galerkin);
        let p_plain = potential_error_order(&model, sub, &man, &plain);
        assert!(p_galerkin >= 4.8, "galerkin order {p_galerkin}");
        assert!(p_plain <= 4.2, "condensed formula order {p_plain}");
        let condensed = project_substructure(&model, sub, &r.manifolds[0]).unwrap();
        assert!(potential_error_order(&model, sub, &r.manifolds[0], &condensed) >= 4.8);
    }
}
