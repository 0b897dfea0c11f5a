use cdfem::mesh::ConformingMesh;

/// Nodal values on a conforming mesh, `components` per node, node-major.
/// Nodes outside the solved region hold zeros.
#[derive(Clone, Debug)]
pub struct DofField<'m> {
    pub mesh: &'m ConformingMesh<f64>,
    pub components: usize,
    pub values: Vec<f64>,
}

impl<'m> DofField<'m> {
    pub fn zeros(mesh: &'m ConformingMesh<f64>, components: usize) -> Self {
        Self { mesh, components, values: vec![0.0; mesh.nodes.len() * components] }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &'m ConformingMesh<f64>, components: usize, f: impl Fn(usize) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(mesh, components);
        for n in 0..mesh.nodes.len() {
            let v = f(n);
            out.values[n * components..(n + 1) * components].copy_from_slice(&v[..components]);
        }
        out
    }

    pub fn node(&self, n: usize) -> &[f64] {
        &self.values[n * self.components..(n + 1) * self.components]
    }
}
