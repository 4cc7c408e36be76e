//! Saving and reloading optimized designs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::MeshGrid;
use crate::regularize::DesignField;

/// A design together with the grid it lives on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
    /// Projection sharpness the design was last evaluated at.
    pub beta: f64,
    /// Volume fraction per element, row by row from the bottom left.
    pub z: Vec<f64>,
    /// Indices of elements excluded from the optimization.
    #[serde(default)]
    pub frozen: Vec<usize>,
}

impl DesignFile {
    pub fn new(mesh: &MeshGrid, design: &DesignField, beta: f64) -> Self {
        Self {
            nx: mesh.nx,
            ny: mesh.ny,
            width: mesh.width,
            height: mesh.height,
            beta,
            z: design.z.clone(),
            frozen: (0..design.frozen.len()).filter(|&e| design.frozen[e]).collect(),
        }
    }

    pub fn design(&self) -> Result<DesignField> {
        if self.z.len() != self.nx * self.ny {
            return Err(Error::invalid(format!(
                "design has {} values for a {}x{} grid",
                self.z.len(),
                self.nx,
                self.ny
            )));
        }
        let mut frozen = vec![false; self.z.len()];
        for &e in &self.frozen {
            *frozen
                .get_mut(e)
                .ok_or_else(|| Error::invalid(format!("frozen element {e} out of range")))? = true;
        }
        let d = DesignField { z: self.z.clone(), frozen };
        d.validate()?;
        Ok(d)
    }

    /// Checks that the design was saved for a grid matching `mesh`.
    pub fn check_mesh(&self, mesh: &MeshGrid) -> Result<()> {
        let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if self.nx != mesh.nx || self.ny != mesh.ny || !same(self.width, mesh.width) || !same(self.height, mesh.height) {
            return Err(Error::invalid(format!(
                "design grid {}x{} ({} x {} m) does not match the problem grid {}x{} ({} x {} m)",
                self.nx, self.ny, self.width, self.height, mesh.nx, mesh.ny, mesh.width, mesh.height
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("design serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("design file: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;

    #[test]
    fn round_trip() {
        let mesh = build_structured_mesh(3, 2, 3e-3, 2e-3, &[]).unwrap();
        let mut d = DesignField::uniform(6, 0.3);
        d.z[4] = 1.0;
        d.frozen[4] = true;
        d.z[1] = 0.123456789012345;
        let f = DesignFile::new(&mesh, &d, 8.0);
        let back = DesignFile::from_toml(&f.to_toml()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.design().unwrap(), d);
        back.check_mesh(&mesh).unwrap();
        let other = build_structured_mesh(3, 3, 3e-3, 2e-3, &[]).unwrap();
        assert!(back.check_mesh(&other).is_err());
    }

    #[test]
    fn rejects_inconsistent_files() {
        let bad = "nx = 2\nny = 1\nwidth = 1.0\nheight = 1.0\nbeta = 1.0\nz = [0.5]\n";
        assert!(DesignFile::from_toml(bad).unwrap().design().is_err());
        let bad = "nx = 1\nny = 1\nwidth = 1.0\nheight = 1.0\nbeta = 1.0\nz = [0.5]\nfrozen = [3]\n";
        assert!(DesignFile::from_toml(bad).unwrap().design().is_err());
        assert!(DesignFile::from_toml("nx = 1\nextra = 2\n").is_err());
    }
}
