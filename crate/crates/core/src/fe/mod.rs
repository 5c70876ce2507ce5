//! Finite-element model of planar beams with von Kármán kinematics.

mod assembly;
mod element;

pub use assembly::{assemble_global, Domain, DomainElement, GlobalOperators};
pub use element::{element_operators, BeamElement, ElementGeometry, ElementTensors, ELEMENT_DOFS};

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DOFS_PER_NODE: usize = 3;

/// Nodal degree of freedom: axial `u`, transverse `w`, rotation `θ = -dw/dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodalDof {
    U,
    W,
    Theta,
}

impl NodalDof {
    pub fn offset(self) -> usize {
        match self {
            NodalDof::U => 0,
            NodalDof::W => 1,
            NodalDof::Theta => 2,
        }
    }

    pub fn from_offset(k: usize) -> Option<Self> {
        match k {
            0 => Some(NodalDof::U),
            1 => Some(NodalDof::W),
            2 => Some(NodalDof::Theta),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub youngs_modulus: f64,
    pub density: f64,
    /// Kept for completeness; the beam kernel does not use it.
    pub poisson: f64,
}

impl Material {
    pub fn new(youngs_modulus: f64, density: f64, poisson: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0 && youngs_modulus.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "Young's modulus must be positive, got {youngs_modulus}"
            )));
        }
        if !(density > 0.0 && density.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "density must be positive, got {density}"
            )));
        }
        if !(0.0..0.5).contains(&poisson) {
            return Err(Error::InvalidModel(format!(
                "Poisson ratio must lie in [0, 0.5), got {poisson}"
            )));
        }
        Ok(Self {
            youngs_modulus,
            density,
            poisson,
        })
    }
}

/// Rectangular cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub width: f64,
    pub thickness: f64,
}

impl Section {
    pub fn new(width: f64, thickness: f64) -> Result<Self> {
        if !(width > 0.0 && thickness > 0.0 && width.is_finite() && thickness.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "section dimensions must be positive, got {width} x {thickness}"
            )));
        }
        Ok(Self { width, thickness })
    }

    pub fn area(&self) -> f64 {
        self.width * self.thickness
    }

    pub fn second_moment(&self) -> f64 {
        self.width * self.thickness.powi(3) / 12.0
    }
}

/// Rayleigh damping `D = alpha M + beta K`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rayleigh {
    pub alpha: f64,
    pub beta: f64,
}

/// Straight or shallow circular-arc beam clamped at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub elements: usize,
    /// Midspan rise of the arc; zero for a flat beam.
    pub rise: f64,
}

#[derive(Debug, Clone)]
pub struct Model {
    nodes: Vec<(f64, f64)>,
    connectivity: Vec<[usize; 2]>,
    section: Section,
    material: Material,
    rayleigh: Rayleigh,
    fixed: BTreeSet<usize>,
    free_dofs: Vec<usize>,
    free_index: Vec<Option<usize>>,
    kernels: Vec<BeamElement>,
    tensors: Vec<ElementTensors>,
    linear: bool,
}

impl Model {
    pub fn new(
        nodes: Vec<(f64, f64)>,
        connectivity: Vec<[usize; 2]>,
        section: Section,
        material: Material,
        fixed_dofs: impl IntoIterator<Item = usize>,
        rayleigh: Rayleigh,
    ) -> Result<Self> {
        let n_dofs = nodes.len() * DOFS_PER_NODE;
        if nodes.is_empty() || connectivity.is_empty() {
            return Err(Error::InvalidModel("model needs nodes and elements".into()));
        }
        if nodes.iter().any(|(x, z)| !x.is_finite() || !z.is_finite()) {
            return Err(Error::InvalidModel("non-finite nodal coordinates".into()));
        }
        let fixed: BTreeSet<usize> = fixed_dofs.into_iter().collect();
        if let Some(&bad) = fixed.iter().find(|&&d| d >= n_dofs) {
            return Err(Error::InvalidModel(format!(
                "fixed DoF {bad} outside range 0..{n_dofs}"
            )));
        }
        let mut kernels = Vec::with_capacity(connectivity.len());
        for (e, &[a, b]) in connectivity.iter().enumerate() {
            if a >= nodes.len() || b >= nodes.len() || a == b {
                return Err(Error::InvalidElement {
                    element: e,
                    reason: format!("invalid node pair ({a}, {b})"),
                });
            }
            let geom = ElementGeometry {
                start: nodes[a],
                end: nodes[b],
            };
            let kernel = BeamElement::new(&geom, &section, &material).map_err(|err| match err {
                Error::InvalidElement { reason, .. } => Error::InvalidElement { element: e, reason },
                other => other,
            })?;
            kernels.push(kernel);
        }
        let mut free_index = vec![None; n_dofs];
        let mut free_dofs = Vec::with_capacity(n_dofs - fixed.len());
        for dof in 0..n_dofs {
            if !fixed.contains(&dof) {
                free_index[dof] = Some(free_dofs.len());
                free_dofs.push(dof);
            }
        }
        let tensors = kernels.iter().map(BeamElement::tensors).collect();
        Ok(Self {
            nodes,
            connectivity,
            section,
            material,
            rayleigh,
            fixed,
            free_dofs,
            free_index,
            kernels,
            tensors,
            linear: false,
        })
    }

    /// Uniform mesh of a beam clamped at both ends. With a nonzero rise the
    /// nodes follow a circular arc through both supports.
    pub fn clamped_beam(geom: &BeamGeometry, material: Material, rayleigh: Rayleigh) -> Result<Self> {
        if geom.elements == 0 {
            return Err(Error::InvalidModel("beam needs at least one element".into()));
        }
        if !(geom.length > 0.0 && geom.length.is_finite()) || !geom.rise.is_finite() {
            return Err(Error::InvalidModel("invalid beam length or rise".into()));
        }
        let section = Section::new(geom.width, geom.thickness)?;
        let l = geom.length;
        let elevation = |x: f64| -> f64 {
            if geom.rise == 0.0 {
                return 0.0;
            }
            let h = geom.rise;
            let r = (l * l / 4.0 + h * h) / (2.0 * h);
            let dx = x - l / 2.0;
            r.signum() * ((r * r - dx * dx).max(0.0).sqrt()) - (r - h)
        };
        let n = geom.elements;
        let nodes: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let x = l * i as f64 / n as f64;
                (x, elevation(x))
            })
            .collect();
        let connectivity = (0..n).map(|e| [e, e + 1]).collect();
        let last = n * DOFS_PER_NODE;
        let fixed = (0..DOFS_PER_NODE).chain(last..last + DOFS_PER_NODE);
        Self::new(nodes, connectivity, section, material, fixed, rayleigh)
    }

    /// Copy of the model with all geometric nonlinearity removed.
    pub fn linearized(&self) -> Self {
        let mut out = self.clone();
        out.linear = true;
        for t in &mut out.tensors {
            t.k2.scale(0.0);
            t.k3.scale(0.0);
        }
        out
    }

    pub fn is_linear(&self) -> bool {
        self.linear
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn connectivity(&self) -> &[[usize; 2]] {
        &self.connectivity
    }

    pub fn section(&self) -> &Section {
        &self.section
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn rayleigh(&self) -> Rayleigh {
        self.rayleigh
    }

    pub fn fixed_dofs(&self) -> &BTreeSet<usize> {
        &self.fixed
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.connectivity.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Global (unconstrained) DoF numbers of the free DoFs, ascending.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Free-DoF index of a global DoF, `None` when it is fixed.
    pub fn free_index(&self, global_dof: usize) -> Option<usize> {
        self.free_index.get(global_dof).copied().flatten()
    }

    pub fn dof(&self, node: usize, dof: NodalDof) -> Option<usize> {
        self.free_index(node * DOFS_PER_NODE + dof.offset())
    }

    pub fn element_kernel(&self, e: usize) -> &BeamElement {
        &self.kernels[e]
    }

    pub fn element_tensors(&self, e: usize) -> &ElementTensors {
        &self.tensors[e]
    }

    /// Global (unconstrained) DoF numbers of element `e`.
    pub fn element_global_dofs(&self, e: usize) -> [usize; ELEMENT_DOFS] {
        let [a, b] = self.connectivity[e];
        let mut out = [0; ELEMENT_DOFS];
        for k in 0..DOFS_PER_NODE {
            out[k] = a * DOFS_PER_NODE + k;
            out[DOFS_PER_NODE + k] = b * DOFS_PER_NODE + k;
        }
        out
    }

    /// Node closest to abscissa `x`.
    pub fn node_near(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, &(xi, _)) in self.nodes.iter().enumerate() {
            if (xi - x).abs() < (self.nodes[best].0 - x).abs() {
                best = i;
            }
        }
        best
    }

    /// Domain spanning the whole model with free-DoF numbering.
    pub fn full_domain(&self) -> Domain {
        let elements = (0..self.n_elements())
            .map(|e| DomainElement {
                element: e,
                dofs: self.element_global_dofs(e).map(|g| self.free_index(g)),
            })
            .collect();
        Domain {
            n: self.n_free(),
            elements,
        }
    }

    /// Consistent nodal load of a uniform pressure `p` [Pa] acting in `+z`
    /// over the section width.
    pub fn pressure_load(&self, p: f64) -> DVector<f64> {
        let mut f = DVector::zeros(self.n_free());
        for e in 0..self.n_elements() {
            let fe = self.kernels[e].line_load(p * self.section.width);
            for (k, g) in self.element_global_dofs(e).into_iter().enumerate() {
                if let Some(i) = self.free_index(g) {
                    f[i] += fe[k];
                }
            }
        }
        f
    }

    /// Unit-magnitude nodal load vector scaled by `value`.
    pub fn nodal_load(&self, node: usize, dof: NodalDof, value: f64) -> Result<DVector<f64>> {
        if node >= self.n_nodes() {
            return Err(Error::InvalidModel(format!("load node {node} does not exist")));
        }
        let i = self.dof(node, dof).ok_or_else(|| {
            Error::InvalidModel(format!("load applied to fixed DoF {dof:?} of node {node}"))
        })?;
        let mut f = DVector::zeros(self.n_free());
        f[i] = value;
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn flat_geometry(elements: usize) -> BeamGeometry {
        BeamGeometry {
            length: 0.1,
            width: 5e-3,
            thickness: 0.5e-3,
            elements,
            rise: 0.0,
        }
    }

    #[test]
    fn material_validation() {
        assert!(Material::new(210e9, 7800.0, 0.33).is_ok());
        assert!(Material::new(-1.0, 7800.0, 0.33).is_err());
        assert!(Material::new(210e9, 0.0, 0.33).is_err());
        assert!(Material::new(210e9, 7800.0, 0.5).is_err());
    }

    #[test]
    fn model_validation() {
        let sec = Section::new(1.0, 1.0).unwrap();
        let mat = Material::new(1.0, 1.0, 0.0).unwrap();
        let nodes = vec![(0.0, 0.0), (1.0, 0.0)];
        assert!(Model::new(nodes.clone(), vec![[0, 0]], sec, mat, [], Rayleigh::default()).is_err());
        assert!(Model::new(nodes.clone(), vec![[0, 2]], sec, mat, [], Rayleigh::default()).is_err());
        assert!(Model::new(nodes.clone(), vec![[0, 1]], sec, mat, [6], Rayleigh::default()).is_err());
        let m = Model::new(nodes, vec![[0, 1]], sec, mat, [0, 1, 2], Rayleigh::default()).unwrap();
        assert_eq!(m.n_free(), 3);
        assert_eq!(m.dof(1, NodalDof::W), Some(1));
        assert_eq!(m.dof(0, NodalDof::W), None);
    }

    #[test]
    fn arc_passes_through_supports_with_requested_rise() {
        let mut g = flat_geometry(20);
        g.rise = 5e-3;
        let m = Model::clamped_beam(&g, Material::new(210e9, 7800.0, 0.33).unwrap(), Rayleigh::default())
            .unwrap();
        let nodes = m.nodes();
        assert!(nodes[0].1.abs() < 1e-15);
        assert!(nodes[20].1.abs() < 1e-15);
        assert!((nodes[10].1 - 5e-3).abs() < 1e-15);
        assert_eq!(m.n_free(), 3 * 21 - 6);
    }

    #[test]
    fn pressure_resultant_equals_total_load() {
        let m = Model::clamped_beam(
            &flat_geometry(10),
            Material::new(210e9, 7800.0, 0.33).unwrap(),
            Rayleigh::default(),
        )
        .unwrap();
        let f = m.pressure_load(1000.0);
        let total: f64 = (0..m.n_nodes())
            .filter_map(|n| m.dof(n, NodalDof::W))
            .map(|i| f[i])
            .sum();
        // the clamped end nodes carry 1/20 of the load each
        let expected = 1000.0 * 5e-3 * 0.1 * (1.0 - 1.0 / 10.0);
        assert!((total - expected).abs() < 1e-12);
    }
}
