//! Structured quadrilateral meshes, finite-element spaces and boundary tags.

pub mod quadrature;
pub mod shape;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use quadrature::{quadrature, QuadratureKind, QuadratureRule};
pub use shape::{facet_shape, reference_shape, BasisKind, ReferenceShape, REFERENCE_NODES};

/// Element used for the displacement and temperature fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    #[default]
    Serendipity8,
    Lagrange9,
}

impl ElementKind {
    pub fn basis(self) -> BasisKind {
        match self {
            ElementKind::Serendipity8 => BasisKind::Serendipity8,
            ElementKind::Lagrange9 => BasisKind::Lagrange9,
        }
    }

    pub fn nodes_per_element(self) -> usize {
        self.basis().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    /// Local node indices of the edge, ordered by increasing coordinate.
    fn local_nodes(self) -> [usize; 3] {
        match self {
            Side::Bottom => [0, 4, 1],
            Side::Right => [1, 5, 2],
            Side::Top => [3, 6, 2],
            Side::Left => [0, 7, 3],
        }
    }

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

/// Coordinate predicate selecting boundary facets on one side of the box.
///
/// A facet matches when its midpoint lies on `side` and its coordinate
/// along that side falls inside `[from, to]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagRule {
    pub name: String,
    pub side: Side,
    pub from: f64,
    pub to: f64,
}

impl TagRule {
    pub fn whole_side(name: &str, side: Side) -> Self {
        Self {
            name: name.to_string(),
            side,
            from: f64::NEG_INFINITY,
            to: f64::INFINITY,
        }
    }

    pub fn segment(name: &str, side: Side, from: f64, to: f64) -> Self {
        Self {
            name: name.to_string(),
            side,
            from,
            to,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Facet {
    pub element: usize,
    pub side: Side,
    /// Global quadratic node ids ordered by increasing coordinate.
    pub nodes: [usize; 3],
    pub length: f64,
    /// Index into `MeshGrid::tag_names`; `None` is the insulated,
    /// traction-free default.
    pub tag: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct MeshGrid {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
    pub kind: ElementKind,
    /// Coordinates of the displacement/temperature nodes.
    pub coords: Vec<[f64; 2]>,
    /// Quadratic connectivity, `kind.nodes_per_element()` ids per element.
    pub connectivity: Vec<usize>,
    pub tag_names: Vec<String>,
    pub facets: Vec<Facet>,
    /// Lattice index (i, j) on the (2nx+1) x (2ny+1) grid of every node.
    lattice: Vec<(usize, usize)>,
    lattice_to_node: Vec<usize>,
}

const NO_NODE: usize = usize::MAX;

pub fn build_structured_mesh(
    nx: usize,
    ny: usize,
    width: f64,
    height: f64,
    tags: &[TagRule],
) -> Result<MeshGrid> {
    build_structured_mesh_with(nx, ny, width, height, tags, ElementKind::Serendipity8)
}

pub fn build_structured_mesh_with(
    nx: usize,
    ny: usize,
    width: f64,
    height: f64,
    tags: &[TagRule],
    kind: ElementKind,
) -> Result<MeshGrid> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!("element counts must be positive, got {nx}x{ny}")));
    }
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(Error::invalid(format!("extents must be positive, got {width}x{height}")));
    }
    let (li, lj) = (2 * nx + 1, 2 * ny + 1);
    let (hx, hy) = (width / nx as f64, height / ny as f64);
    let keep = |i: usize, j: usize| kind == ElementKind::Lagrange9 || i % 2 == 0 || j % 2 == 0;

    let mut lattice_to_node = vec![NO_NODE; li * lj];
    let mut coords = Vec::new();
    let mut lattice = Vec::new();
    for j in 0..lj {
        for i in 0..li {
            if keep(i, j) {
                lattice_to_node[i + j * li] = coords.len();
                coords.push([0.5 * hx * i as f64, 0.5 * hy * j as f64]);
                lattice.push((i, j));
            }
        }
    }

    let npe = kind.nodes_per_element();
    let mut connectivity = Vec::with_capacity(nx * ny * npe);
    for ey in 0..ny {
        for ex in 0..nx {
            for node in &REFERENCE_NODES[..npe] {
                let i = (2 * ex as i64 + 1 + node[0] as i64) as usize;
                let j = (2 * ey as i64 + 1 + node[1] as i64) as usize;
                connectivity.push(lattice_to_node[i + j * li]);
            }
        }
    }

    let mut mesh = MeshGrid {
        nx,
        ny,
        width,
        height,
        kind,
        coords,
        connectivity,
        tag_names: Vec::new(),
        facets: Vec::new(),
        lattice,
        lattice_to_node,
    };

    let mut tag_names: Vec<String> = Vec::new();
    for rule in tags {
        if !tag_names.contains(&rule.name) {
            tag_names.push(rule.name.clone());
        }
    }
    let mut facets = Vec::new();
    let boundary = [
        (Side::Bottom, (0..nx).map(|ex| ex).collect::<Vec<_>>()),
        (Side::Right, (0..ny).map(|ey| nx - 1 + ey * nx).collect()),
        (Side::Top, (0..nx).map(|ex| ex + (ny - 1) * nx).collect()),
        (Side::Left, (0..ny).map(|ey| ey * nx).collect()),
    ];
    for (side, elements) in boundary {
        for e in elements {
            let local = side.local_nodes();
            let nodes = local.map(|l| mesh.element_nodes(e)[l]);
            let mid = mesh.coords[nodes[1]];
            let (along, length) = match side {
                Side::Bottom | Side::Top => (mid[0], hx),
                Side::Left | Side::Right => (mid[1], hy),
            };
            let tag = tags
                .iter()
                .find(|r| r.side == side && along >= r.from && along <= r.to)
                .map(|r| tag_names.iter().position(|n| *n == r.name).unwrap());
            facets.push(Facet {
                element: e,
                side,
                nodes,
                length,
                tag,
            });
        }
    }
    mesh.tag_names = tag_names;
    mesh.facets = facets;
    Ok(mesh)
}

impl MeshGrid {
    pub fn num_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_bilinear_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn element_size(&self) -> (f64, f64) {
        (self.width / self.nx as f64, self.height / self.ny as f64)
    }

    pub fn element_area(&self) -> f64 {
        let (hx, hy) = self.element_size();
        hx * hy
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn element_nodes(&self, e: usize) -> &[usize] {
        let npe = self.kind.nodes_per_element();
        &self.connectivity[e * npe..(e + 1) * npe]
    }

    /// Element indices (column, row) in the structured grid.
    pub fn element_ij(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    pub fn element_center(&self, e: usize) -> [f64; 2] {
        let (ex, ey) = self.element_ij(e);
        let (hx, hy) = self.element_size();
        [(ex as f64 + 0.5) * hx, (ey as f64 + 0.5) * hy]
    }

    /// Maps a reference point of element `e` to physical coordinates.
    pub fn map_point(&self, e: usize, xi: f64, eta: f64) -> [f64; 2] {
        let c = self.element_center(e);
        let (hx, hy) = self.element_size();
        [c[0] + 0.5 * hx * xi, c[1] + 0.5 * hy * eta]
    }

    /// Bilinear (Q1) node ids of element `e`, corners counter-clockwise.
    pub fn bilinear_nodes(&self, e: usize) -> [usize; 4] {
        let (ex, ey) = self.element_ij(e);
        let w = self.nx + 1;
        [
            ex + ey * w,
            ex + 1 + ey * w,
            ex + 1 + (ey + 1) * w,
            ex + (ey + 1) * w,
        ]
    }

    pub fn bilinear_coords(&self, n: usize) -> [f64; 2] {
        let w = self.nx + 1;
        let (hx, hy) = self.element_size();
        [(n % w) as f64 * hx, (n / w) as f64 * hy]
    }

    /// Quadratic node at lattice position (i, j), if present.
    pub fn node_at_lattice(&self, i: usize, j: usize) -> Option<usize> {
        let li = 2 * self.nx + 1;
        if i >= li || j >= 2 * self.ny + 1 {
            return None;
        }
        match self.lattice_to_node[i + j * li] {
            NO_NODE => None,
            n => Some(n),
        }
    }

    pub fn node_lattice(&self, n: usize) -> (usize, usize) {
        self.lattice[n]
    }

    pub fn tag_index(&self, name: &str) -> Result<usize> {
        self.tag_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownTag(name.to_string()))
    }

    pub fn facets_with_tag(&self, name: &str) -> Result<impl Iterator<Item = &Facet>> {
        let t = self.tag_index(name)?;
        Ok(self.facets.iter().filter(move |f| f.tag == Some(t)))
    }

    pub fn tag_length(&self, name: &str) -> Result<f64> {
        Ok(self.facets_with_tag(name)?.map(|f| f.length).sum())
    }

    /// Nodes on the horizontal lattice line closest to `y`, ordered by x.
    pub fn nodes_on_horizontal_line(&self, y: f64) -> Vec<usize> {
        let (_, hy) = self.element_size();
        let j = ((y / (0.5 * hy)).round().max(0.0) as usize).min(2 * self.ny);
        (0..=2 * self.nx).filter_map(|i| self.node_at_lattice(i, j)).collect()
    }
}

/// Discretisation of a field over the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    VectorQuadratic,
    ScalarQuadratic,
    ScalarBilinear,
    ScalarConstant,
}

#[derive(Debug, Clone, Copy)]
pub struct FESpace {
    pub kind: SpaceKind,
    pub basis: BasisKind,
    pub components: usize,
    pub num_dofs: usize,
}

impl FESpace {
    pub fn new(mesh: &MeshGrid, kind: SpaceKind) -> Self {
        let (basis, components, nodes) = match kind {
            SpaceKind::VectorQuadratic => (mesh.kind.basis(), 2, mesh.num_nodes()),
            SpaceKind::ScalarQuadratic => (mesh.kind.basis(), 1, mesh.num_nodes()),
            SpaceKind::ScalarBilinear => (BasisKind::Bilinear, 1, mesh.num_bilinear_nodes()),
            SpaceKind::ScalarConstant => (BasisKind::Constant, 1, mesh.num_elements()),
        };
        Self {
            kind,
            basis,
            components,
            num_dofs: nodes * components,
        }
    }

    /// Global scalar node ids of the basis functions on element `e`.
    pub fn element_nodes(&self, mesh: &MeshGrid, e: usize) -> Vec<usize> {
        match self.basis {
            BasisKind::Constant => vec![e],
            BasisKind::Bilinear => mesh.bilinear_nodes(e).to_vec(),
            _ => mesh.element_nodes(e).to_vec(),
        }
    }
}

/// Basis functions with physical derivatives at one point.
#[derive(Debug, Clone)]
pub struct ShapeValues {
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
    /// Symmetric second derivatives `[[xx, xy], [xy, yy]]`.
    pub hessians: Vec<[[f64; 2]; 2]>,
}

/// Evaluates the basis of `space` on element `e` at a reference point.
///
/// Cells are axis-aligned rectangles, so the geometric map is affine and
/// contributes no second-order terms.
pub fn shape_eval(mesh: &MeshGrid, space: &FESpace, e: usize, point: [f64; 2]) -> Result<ShapeValues> {
    if e >= mesh.num_elements() {
        return Err(Error::invalid(format!("element {e} out of range")));
    }
    if point[0].abs() > 1.0 + 1e-12 || point[1].abs() > 1.0 + 1e-12 {
        return Err(Error::invalid(format!("reference point {point:?} outside the cell")));
    }
    let (hx, hy) = mesh.element_size();
    let (sx, sy) = (2.0 / hx, 2.0 / hy);
    let r = reference_shape(space.basis, point[0], point[1]);
    Ok(ShapeValues {
        gradients: r.grads.iter().map(|g| [g[0] * sx, g[1] * sy]).collect(),
        hessians: r
            .hessians
            .iter()
            .map(|h| [[h[0] * sx * sx, h[1] * sx * sy], [h[1] * sx * sy, h[2] * sy * sy]])
            .collect(),
        values: r.values,
    })
}

/// Basis data at the cell quadrature points, shared by every element of a
/// uniform structured grid.
#[derive(Debug, Clone)]
pub struct ElementBasis {
    pub num_points: usize,
    pub num_basis: usize,
    /// Quadrature weight times the Jacobian determinant.
    pub weights: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub gradients: Vec<Vec<[f64; 2]>>,
    pub hessians: Vec<Vec<[[f64; 2]; 2]>>,
    /// Bilinear basis values (for the filtered design field).
    pub bilinear: Vec<[f64; 4]>,
    pub points: Vec<[f64; 2]>,
}

impl ElementBasis {
    pub fn new(mesh: &MeshGrid, rule: &QuadratureRule) -> Self {
        let space = FESpace::new(mesh, SpaceKind::ScalarQuadratic);
        let q1 = FESpace::new(mesh, SpaceKind::ScalarBilinear);
        let det = 0.25 * mesh.element_area();
        let mut out = ElementBasis {
            num_points: rule.len(),
            num_basis: space.basis.len(),
            weights: rule.weights.iter().map(|w| w * det).collect(),
            values: Vec::new(),
            gradients: Vec::new(),
            hessians: Vec::new(),
            bilinear: Vec::new(),
            points: rule.points.clone(),
        };
        for p in &rule.points {
            let s = shape_eval(mesh, &space, 0, *p).expect("quadrature point inside cell");
            let b = shape_eval(mesh, &q1, 0, *p).expect("quadrature point inside cell");
            out.values.push(s.values);
            out.gradients.push(s.gradients);
            out.hessians.push(s.hessians);
            out.bilinear.push([b.values[0], b.values[1], b.values[2], b.values[3]]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enumerate_serendipity_nodes(nx: usize, ny: usize) -> usize {
        // brute force: collect distinct node positions of all elements
        let mut set = std::collections::BTreeSet::new();
        for ey in 0..ny {
            for ex in 0..nx {
                for node in &REFERENCE_NODES[..8] {
                    let i = 2 * ex as i64 + 1 + node[0] as i64;
                    let j = 2 * ey as i64 + 1 + node[1] as i64;
                    set.insert((i, j));
                }
            }
        }
        set.len()
    }

    #[test]
    fn single_element_counts() {
        let m = build_structured_mesh(1, 1, 1.0, 1.0, &[]).unwrap();
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.num_nodes(), 8);
        assert_eq!(m.num_bilinear_nodes(), 4);
    }

    #[test]
    fn two_elements_share_an_edge() {
        let m = build_structured_mesh(2, 1, 2.0, 1.0, &[]).unwrap();
        assert_eq!(enumerate_serendipity_nodes(2, 1), 13);
        assert_eq!(m.num_nodes(), 13);
    }

    #[test]
    fn serendipity_node_count_formula() {
        for (nx, ny) in [(3, 2), (5, 7), (12, 4)] {
            let m = build_structured_mesh(nx, ny, 1.0, 1.0, &[]).unwrap();
            let formula = (2 * nx + 1) * (2 * ny + 1) - nx * ny;
            assert_eq!(m.num_nodes(), formula);
            assert_eq!(m.num_nodes(), enumerate_serendipity_nodes(nx, ny));
        }
    }

    #[test]
    fn rod_mesh() {
        let m = build_structured_mesh(120, 20, 0.06, 0.01, &[]).unwrap();
        assert_eq!(m.num_elements(), 2400);
        let (hx, hy) = m.element_size();
        assert!((hx - 5e-4).abs() < 1e-15 && (hy - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn invalid_extents_rejected() {
        assert!(build_structured_mesh(0, 1, 1.0, 1.0, &[]).is_err());
        assert!(build_structured_mesh(1, 1, -1.0, 1.0, &[]).is_err());
        assert!(build_structured_mesh(1, 1, 1.0, 0.0, &[]).is_err());
    }

    #[test]
    fn facets_are_tagged_by_predicate() {
        let tags = [
            TagRule::whole_side("left", Side::Left),
            TagRule::segment("anode", Side::Top, 0.0, 0.5),
        ];
        let m = build_structured_mesh(4, 2, 1.0, 0.5, &tags).unwrap();
        assert_eq!(m.facets.len(), 2 * (4 + 2));
        assert_eq!(m.facets_with_tag("left").unwrap().count(), 2);
        assert_eq!(m.facets_with_tag("anode").unwrap().count(), 2);
        assert!((m.tag_length("anode").unwrap() - 0.5).abs() < 1e-15);
        assert!(m.facets_with_tag("cathode").is_err());
        // untagged facets default to None
        assert_eq!(m.facets.iter().filter(|f| f.tag.is_none()).count(), 12 - 4);
    }

    #[test]
    fn element_nodes_match_reference_positions() {
        let m = build_structured_mesh(3, 2, 3.0, 1.0, &[]).unwrap();
        for e in 0..m.num_elements() {
            for (k, &n) in m.element_nodes(e).iter().enumerate() {
                let r = REFERENCE_NODES[k];
                let x = m.map_point(e, r[0], r[1]);
                assert!((x[0] - m.coords[n][0]).abs() < 1e-14);
                assert!((x[1] - m.coords[n][1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn partition_of_unity_at_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for kind in [ElementKind::Serendipity8, ElementKind::Lagrange9] {
            let m = build_structured_mesh_with(3, 2, 1.5, 0.7, &[], kind).unwrap();
            for sk in [SpaceKind::ScalarQuadratic, SpaceKind::ScalarBilinear, SpaceKind::ScalarConstant] {
                let space = FESpace::new(&m, sk);
                for _ in 0..100 {
                    let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    let s = shape_eval(&m, &space, 1, p).unwrap();
                    let sum: f64 = s.values.iter().sum();
                    let gx: f64 = s.gradients.iter().map(|g| g[0]).sum();
                    let gy: f64 = s.gradients.iter().map(|g| g[1]).sum();
                    assert!((sum - 1.0).abs() <= 1e-12);
                    assert!(gx.abs() <= 1e-12 && gy.abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn linear_field_reproduced_at_quadrature_points() {
        let m = build_structured_mesh(3, 2, 1.5, 0.8, &[]).unwrap();
        let field = |x: [f64; 2]| 0.3 + 2.0 * x[0] - 1.5 * x[1];
        let rule = quadrature(QuadratureKind::GaussLobatto3x3);
        for sk in [SpaceKind::ScalarQuadratic, SpaceKind::ScalarBilinear] {
            let space = FESpace::new(&m, sk);
            for e in 0..m.num_elements() {
                let nodes = space.element_nodes(&m, e);
                for p in &rule.points {
                    let s = shape_eval(&m, &space, e, *p).unwrap();
                    let coords = |n: usize| match sk {
                        SpaceKind::ScalarBilinear => m.bilinear_coords(n),
                        _ => m.coords[n],
                    };
                    let v: f64 = nodes.iter().zip(&s.values).map(|(&n, w)| w * field(coords(n))).sum();
                    let g0: f64 = nodes.iter().zip(&s.gradients).map(|(&n, g)| g[0] * field(coords(n))).sum();
                    let exact = field(m.map_point(e, p[0], p[1]));
                    assert!((v - exact).abs() < 1e-12);
                    assert!((g0 - 2.0).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn jacobian_positive() {
        let m = build_structured_mesh(4, 3, 2.0, 1.0, &[]).unwrap();
        let basis = ElementBasis::new(&m, &quadrature(QuadratureKind::GaussLobatto3x3));
        assert!(basis.weights.iter().all(|w| *w > 0.0));
        let total: f64 = basis.weights.iter().sum::<f64>() * m.num_elements() as f64;
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hessian_of_quadratic_field() {
        let m = build_structured_mesh(2, 2, 1.0, 1.0, &[]).unwrap();
        let space = FESpace::new(&m, SpaceKind::ScalarQuadratic);
        let s = shape_eval(&m, &space, 3, [0.2, -0.4]).unwrap();
        let nodes = space.element_nodes(&m, 3);
        let mut hxx = 0.0;
        let mut hxy = 0.0;
        for (k, &n) in nodes.iter().enumerate() {
            let x = m.coords[n];
            hxx += s.hessians[k][0][0] * x[0] * x[0];
            hxy += s.hessians[k][0][1] * x[0] * x[1];
        }
        assert!((hxx - 2.0).abs() < 1e-10);
        assert!((hxy - 1.0).abs() < 1e-10);
    }
}
