//! Legacy ASCII VTK snapshots of designs and solution fields.

use std::io::Write;

use crate::assembly::DofMap;
use crate::mesh::{ElementKind, MeshGrid};
use crate::regularize::heaviside;

const VTK_QUADRATIC_QUAD: u8 = 23;
const VTK_BIQUADRATIC_QUAD: u8 = 28;

/// Fields written to one snapshot. Only `mesh` and `z` are required.
pub struct Snapshot<'a> {
    pub mesh: &'a MeshGrid,
    pub title: &'a str,
    /// Element volume fractions (cell data).
    pub z: &'a [f64],
    /// Nodal filtered field on the bilinear grid.
    pub zeta_nodes: Option<&'a [f64]>,
    /// `(β, η)` used to write the projected field `zeta_bar`.
    pub projection: Option<(f64, f64)>,
    /// Converged state and its dof layout.
    pub state: Option<(&'a DofMap, &'a [f64])>,
}

impl Snapshot<'_> {
    /// Bilinear field evaluated at every quadratic node.
    fn nodal_zeta(&self, zeta: &[f64]) -> Vec<f64> {
        let m = self.mesh;
        let w = m.nx + 1;
        (0..m.num_nodes())
            .map(|n| {
                let (i, j) = m.node_lattice(n);
                let is = if i % 2 == 0 { vec![i / 2] } else { vec![i / 2, i / 2 + 1] };
                let js = if j % 2 == 0 { vec![j / 2] } else { vec![j / 2, j / 2 + 1] };
                let mut s = 0.0;
                for &a in &is {
                    for &b in &js {
                        s += zeta[a + b * w];
                    }
                }
                s / (is.len() * js.len()) as f64
            })
            .collect()
    }

    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        let m = self.mesh;
        let nn = m.num_nodes();
        let ne = m.num_elements();
        let npe = m.kind.nodes_per_element();
        let cell_type = match m.kind {
            ElementKind::Serendipity8 => VTK_QUADRATIC_QUAD,
            ElementKind::Lagrange9 => VTK_BIQUADRATIC_QUAD,
        };
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{}", self.title.replace('\n', " "))?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {nn} double")?;
        for c in &m.coords {
            writeln!(w, "{:e} {:e} 0", c[0], c[1])?;
        }
        writeln!(w, "CELLS {ne} {}", ne * (npe + 1))?;
        for e in 0..ne {
            let ids: Vec<String> = m.element_nodes(e).iter().map(|n| n.to_string()).collect();
            writeln!(w, "{npe} {}", ids.join(" "))?;
        }
        writeln!(w, "CELL_TYPES {ne}")?;
        for _ in 0..ne {
            writeln!(w, "{cell_type}")?;
        }

        writeln!(w, "CELL_DATA {ne}")?;
        scalars(&mut w, "z", self.z.iter().copied())?;

        writeln!(w, "POINT_DATA {nn}")?;
        if let Some(zeta) = self.zeta_nodes {
            let nodal = self.nodal_zeta(zeta);
            scalars(&mut w, "zeta", nodal.iter().copied())?;
            if let Some((beta, eta)) = self.projection {
                scalars(&mut w, "zeta_bar", nodal.iter().map(|&v| heaviside(v, beta, eta).0))?;
            }
        }
        if let Some((dofs, state)) = self.state {
            scalars(&mut w, "theta", (0..nn).map(|n| state[dofs.theta(n)]))?;
            let u: Vec<[f64; 2]> = (0..nn).map(|n| [state[dofs.u(n, 0)], state[dofs.u(n, 1)]]).collect();
            scalars(&mut w, "u_magnitude", u.iter().map(|v| v[0].hypot(v[1])))?;
            writeln!(w, "VECTORS displacement double")?;
            for v in &u {
                writeln!(w, "{:e} {:e} 0", v[0], v[1])?;
            }
            writeln!(w, "VECTORS deformed_position double")?;
            for (c, v) in m.coords.iter().zip(&u) {
                writeln!(w, "{:e} {:e} 0", c[0] + v[0], c[1] + v[1])?;
            }
        }
        Ok(())
    }
}

fn scalars(w: &mut impl Write, name: &str, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}
