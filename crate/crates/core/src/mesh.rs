//! Quadratic quadrilateral meshes: rectangles for verification problems and
//! the upper half of a Compact Tension specimen.

use std::collections::{BTreeMap, HashMap};

use crate::element::{self, NODES};
use crate::error::{Error, Result};

pub const SYMMETRY: &str = "SYMMETRY";
pub const PIN: &str = "PIN";
pub const OUTER: &str = "OUTER";
pub const NOTCH_FACES: &str = "NOTCH_FACES";
pub const LEFT: &str = "LEFT";
pub const RIGHT: &str = "RIGHT";
pub const BOTTOM: &str = "BOTTOM";
pub const TOP: &str = "TOP";

const COORD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; NODES]>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    /// Characteristic size (longest corner-to-corner edge) per element [mm].
    pub elem_size: Vec<f64>,
    /// Elements belonging to the refined crack-path band.
    pub band: Vec<bool>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Nodes of a named set; empty when the set does not exist.
    pub fn node_set(&self, name: &str) -> &[usize] {
        self.node_sets.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn require_set(&self, name: &str) -> Result<&[usize]> {
        self.node_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::config(format!("mesh has no node set {name}")))
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; NODES] {
        let mut xy = [[0.0; 2]; NODES];
        for (k, &n) in self.elements[e].iter().enumerate() {
            xy[k] = self.nodes[n];
        }
        xy
    }

    /// Area of one element by Gauss quadrature.
    pub fn element_area(&self, e: usize) -> f64 {
        let xy = self.element_coords(e);
        element::quadrature_rule()
            .iter()
            .map(|q| jacobian_det(&xy, q.xi, q.eta) * q.weight)
            .sum()
    }

    pub fn area(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_area(e)).sum()
    }

    /// Checks that every element has a positive Jacobian at its Gauss points.
    pub fn check_jacobians(&self) -> Result<()> {
        for e in 0..self.n_elements() {
            let xy = self.element_coords(e);
            for q in element::quadrature_rule() {
                let det = jacobian_det(&xy, q.xi, q.eta);
                if !(det > 0.0) {
                    return Err(Error::Assembly {
                        element: e,
                        reason: format!("non-positive Jacobian {det:e}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn max_band_size(&self) -> Option<f64> {
        self.elem_size
            .iter()
            .zip(&self.band)
            .filter(|(_, &b)| b)
            .map(|(&h, _)| h)
            .reduce(f64::max)
    }

    /// Node closest to a point.
    pub fn nearest_node(&self, p: [f64; 2]) -> usize {
        let d2 = |n: &[f64; 2]| (n[0] - p[0]).powi(2) + (n[1] - p[1]).powi(2);
        (0..self.n_nodes())
            .min_by(|&a, &b| d2(&self.nodes[a]).total_cmp(&d2(&self.nodes[b])))
            .expect("mesh has nodes")
    }

    pub fn nodes_within(&self, p: [f64; 2], radius: f64) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| {
                let [x, y] = self.nodes[n];
                (x - p[0]).powi(2) + (y - p[1]).powi(2) <= radius * radius
            })
            .collect()
    }

    /// Uniform nx × ny rectangle with sets LEFT, RIGHT, BOTTOM and TOP.
    pub fn rectangle(origin: [f64; 2], lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Mesh> {
        if !(lx > 0.0 && ly > 0.0) || nx == 0 || ny == 0 {
            return Err(Error::config(format!(
                "invalid rectangle {lx} x {ly} with {nx} x {ny} elements"
            )));
        }
        let xs: Vec<f64> = (0..=nx).map(|i| origin[0] + lx * i as f64 / nx as f64).collect();
        let ys: Vec<f64> = (0..=ny).map(|j| origin[1] + ly * j as f64 / ny as f64).collect();
        let mut b = MeshBuilder::default();
        for j in 0..ny {
            for i in 0..nx {
                b.quad([
                    [xs[i], ys[j]],
                    [xs[i + 1], ys[j]],
                    [xs[i + 1], ys[j + 1]],
                    [xs[i], ys[j + 1]],
                ]);
            }
        }
        let mut mesh = b.finish();
        let (x1, y1) = (origin[0] + lx, origin[1] + ly);
        mesh.add_set_where(LEFT, |p| (p[0] - origin[0]).abs() < COORD_TOL);
        mesh.add_set_where(RIGHT, |p| (p[0] - x1).abs() < COORD_TOL);
        mesh.add_set_where(BOTTOM, |p| (p[1] - origin[1]).abs() < COORD_TOL);
        mesh.add_set_where(TOP, |p| (p[1] - y1).abs() < COORD_TOL);
        Ok(mesh)
    }

    fn add_set_where(&mut self, name: &str, pred: impl Fn(&[f64; 2]) -> bool) {
        let ids: Vec<usize> = (0..self.n_nodes()).filter(|&n| pred(&self.nodes[n])).collect();
        self.node_sets.insert(name.to_string(), ids);
    }
}

pub(crate) fn jacobian(xy: &[[f64; 2]; NODES], xi: f64, eta: f64) -> [[f64; 2]; 2] {
    let d = element::shape_derivs(xi, eta);
    let mut j = [[0.0; 2]; 2];
    for k in 0..NODES {
        j[0][0] += d[k][0] * xy[k][0];
        j[0][1] += d[k][0] * xy[k][1];
        j[1][0] += d[k][1] * xy[k][0];
        j[1][1] += d[k][1] * xy[k][1];
    }
    j
}

fn jacobian_det(xy: &[[f64; 2]; NODES], xi: f64, eta: f64) -> f64 {
    let j = jacobian(xy, xi, eta);
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

#[derive(Default)]
struct MeshBuilder {
    nodes: Vec<[f64; 2]>,
    index: HashMap<(i64, i64), usize>,
    elements: Vec<[usize; NODES]>,
}

impl MeshBuilder {
    fn node(&mut self, p: [f64; 2]) -> usize {
        let key = ((p[0] / COORD_TOL).round() as i64, (p[1] / COORD_TOL).round() as i64);
        let next = self.nodes.len();
        *self.index.entry(key).or_insert_with(|| {
            self.nodes.push(p);
            next
        })
    }

    /// Adds a straight-sided quad from counter-clockwise corners.
    fn quad(&mut self, c: [[f64; 2]; 4]) {
        let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let pts = [
            c[0],
            c[1],
            c[2],
            c[3],
            mid(c[0], c[1]),
            mid(c[1], c[2]),
            mid(c[2], c[3]),
            mid(c[3], c[0]),
        ];
        let mut conn = [0usize; NODES];
        for (k, p) in pts.into_iter().enumerate() {
            conn[k] = self.node(p);
        }
        self.elements.push(conn);
    }

    fn finish(self) -> Mesh {
        let elem_size = self
            .elements
            .iter()
            .map(|conn| {
                (0..4)
                    .map(|k| {
                        let a = self.nodes[conn[k]];
                        let b = self.nodes[conn[(k + 1) % 4]];
                        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let n = self.elements.len();
        Mesh {
            nodes: self.nodes,
            elements: self.elements,
            node_sets: BTreeMap::new(),
            elem_size,
            band: vec![false; n],
        }
    }
}

/// Planar dimensions of the Compact Tension specimen, with the load line at
/// x = 0 and the crack plane at y = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtGeometry {
    /// Effective width, load line to back face [mm].
    pub w: f64,
    /// Thickness [mm].
    pub b: f64,
    /// Initial crack length measured from the load line [mm].
    pub a0: f64,
    /// Pin centre [mm].
    pub pin: [f64; 2],
    /// Distance from the front face to the load line [mm].
    pub front_offset: f64,
    /// Half height of the specimen [mm].
    pub half_height: f64,
    /// Half width of the machined notch; zero gives a slit [mm].
    pub notch_half_width: f64,
    /// Half height of the refined crack-path band [mm].
    pub band_half_height: f64,
    /// Length of the refined band ahead of the notch; `None` covers the whole ligament.
    pub refine_length: Option<f64>,
    /// Growth ratio of element widths away from the band.
    pub grading: f64,
}

impl CtGeometry {
    /// Standard 1T specimen (W = 50.8 mm, B = 25.4 mm, a0/W = 0.2). The band
    /// half height is set from the length scale by [`CtGeometry::with_band_for`].
    pub fn standard_1t() -> Self {
        let w = 50.8;
        CtGeometry {
            w,
            b: 25.4,
            a0: 0.2 * w,
            pin: [0.0, 0.275 * w],
            front_offset: 0.25 * w,
            half_height: 0.6 * w,
            notch_half_width: 0.0,
            band_half_height: 0.135,
            refine_length: None,
            grading: 1.3,
        }
    }

    /// Sets the band half height to ℓ/2.
    pub fn with_band_for(mut self, ell: f64) -> Self {
        self.band_half_height = 0.5 * ell;
        self
    }

    pub fn refined_length(&self) -> f64 {
        self.refine_length.unwrap_or(self.w - self.a0)
    }

    pub fn x_front(&self) -> f64 {
        -self.front_offset
    }

    /// Analytic area of the half specimen.
    pub fn half_area(&self) -> f64 {
        (self.w + self.front_offset) * self.half_height - (self.a0 + self.front_offset) * self.notch_half_width
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if !(self.w > 0.0 && self.b > 0.0) {
            return bad(format!("W = {} and B = {} must be positive", self.w, self.b));
        }
        if !(self.a0 > 0.0 && self.a0 < self.w) {
            return bad(format!("a0 = {} must lie in (0, W = {})", self.a0, self.w));
        }
        if !(self.front_offset > 0.0 && self.half_height > 0.0) {
            return bad("front offset and half height must be positive".into());
        }
        let [px, py] = self.pin;
        if !(px > -self.front_offset && px < self.w && py > 0.0 && py < self.half_height) {
            return bad(format!("pin ({px}, {py}) is outside the specimen"));
        }
        if !(self.band_half_height > 0.0) {
            return bad(format!(
                "refinement band half height {} must be positive",
                self.band_half_height
            ));
        }
        if self.band_half_height >= self.half_height {
            return bad("refinement band exceeds the specimen height".into());
        }
        let l = self.refined_length();
        if !(l > 0.0) || self.a0 + l > self.w + COORD_TOL {
            return bad(format!("refined length {l} must lie in (0, W - a0]"));
        }
        if self.notch_half_width < 0.0 || self.notch_half_width > self.band_half_height {
            return bad(format!(
                "notch half width {} must lie in [0, band half height]",
                self.notch_half_width
            ));
        }
        if !(self.grading >= 1.0) {
            return bad(format!("grading ratio {} must be >= 1", self.grading));
        }
        Ok(())
    }

    pub fn a_over_w(&self, a: f64) -> f64 {
        a / self.w
    }
}

/// Cell sizes over `length`, starting at `h0` and growing by `ratio` up to
/// `hmax`. The first cell keeps `h0`; the others are rescaled to fit exactly.
/// Sizes are ordered from the fine end.
fn graded_sizes(length: f64, h0: f64, ratio: f64, hmax: f64) -> Vec<f64> {
    if length <= COORD_TOL {
        return Vec::new();
    }
    if length <= 1.5 * h0 {
        return vec![length];
    }
    let mut sizes = Vec::new();
    let mut total = 0.0;
    let mut h = h0;
    while total < length - 1e-12 {
        sizes.push(h);
        total += h;
        h = (h * ratio).min(hmax);
    }
    // Drop the overshooting last cell when stretching the others is milder
    // than compressing them.
    if sizes.len() > 2 {
        let last = sizes[sizes.len() - 1];
        let shrink = (total - h0) / (length - h0);
        let stretch = (length - h0) / (total - last - h0);
        if stretch < shrink {
            sizes.pop();
            total -= last;
        }
    }
    let scale = (length - h0) / (total - h0);
    sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| if i == 0 { s } else { s * scale })
        .collect()
}

/// Generates the upper half of the CT specimen with 8-node quads.
///
/// The bottom rows form a uniform band of elements no larger than ℓ/6 along
/// the crack path. Above the band, rows grow in height and 3:1 transition
/// rows merge narrow columns so that elements stay close to square.
pub fn generate_ct_half_mesh(geom: &CtGeometry, ell: f64) -> Result<Mesh> {
    geom.validate()?;
    if !(ell > 0.0) {
        return Err(Error::config(format!("length scale {ell} must be positive")));
    }
    let target = ell / 6.0;
    let l_ref = geom.refined_length();
    let n_fine = (l_ref / target - 1e-9).ceil().max(1.0) as usize;
    let h_fine = l_ref / n_fine as f64;

    let n_band = (geom.band_half_height / target - 1e-9).ceil().max(1.0) as usize;
    let h_band = geom.band_half_height / n_band as f64;
    if h_band < 0.2 * h_fine {
        return Err(Error::config(format!(
            "refinement band half height {} is too thin for elements of size {h_fine}",
            geom.band_half_height
        )));
    }
    let notch_rows = (geom.notch_half_width / h_band).round() as usize;

    // Column breaks along the crack plane, with a break on the load line.
    let hmax = geom.w / 12.0;
    let x_front = geom.x_front();
    let x_pin = geom.pin[0];
    let mut xs: Vec<f64> = vec![geom.a0];
    let mut last = h_fine;
    for (x_end, len) in [(x_pin, geom.a0 - x_pin), (x_front, x_pin - x_front)] {
        let mut x = *xs.last().unwrap();
        let sizes = graded_sizes(len, (last * geom.grading).min(hmax), geom.grading, hmax);
        for s in &sizes {
            x -= s;
            xs.push(x);
        }
        *xs.last_mut().unwrap() = x_end;
        last = sizes.last().copied().unwrap_or(last);
    }
    xs.reverse();
    for i in 1..=n_fine {
        xs.push(geom.a0 + l_ref * i as f64 / n_fine as f64);
    }
    let right = graded_sizes(
        geom.w - (geom.a0 + l_ref),
        (h_fine * geom.grading).min(hmax),
        geom.grading,
        hmax,
    );
    let mut x = geom.a0 + l_ref;
    for s in &right {
        x += s;
        xs.push(x);
    }
    *xs.last_mut().unwrap() = geom.w;

    // Row breaks above the band, with a break through the pin centre.
    let mut ys = Vec::new();
    let mut h_last = h_band;
    for (y_end, y_start) in [(geom.pin[1], geom.band_half_height), (geom.half_height, geom.pin[1])] {
        let mut y = y_start;
        let sizes = graded_sizes(y_end - y_start, (2.0 * h_last).min(hmax), 2.0, hmax);
        for s in &sizes {
            y += s;
            ys.push(y);
        }
        *ys.last_mut().unwrap() = y_end;
        h_last = sizes.last().copied().unwrap_or(h_last);
    }

    let mut b = MeshBuilder::default();
    let mut band_flags = Vec::new();
    let band_x1 = geom.a0 + l_ref;

    // Uniform band rows.
    let mut y = 0.0;
    for row in 0..n_band {
        let y1 = geom.band_half_height * (row + 1) as f64 / n_band as f64;
        for i in 0..xs.len() - 1 {
            if row < notch_rows && xs[i + 1] <= geom.a0 + COORD_TOL {
                continue;
            }
            b.quad([[xs[i], y], [xs[i + 1], y], [xs[i + 1], y1], [xs[i], y1]]);
            band_flags.push(xs[i] >= geom.a0 - COORD_TOL && xs[i + 1] <= band_x1 + COORD_TOL);
        }
        y = y1;
    }

    // Graded rows with 3:1 transitions. The load-line break is never merged.
    let mut cols = xs.clone();
    for &y1 in &ys {
        let h_next = y1 - y;
        let mut next_cols = vec![cols[0]];
        let mut i = 0;
        while i < cols.len() - 1 {
            let can_merge = i + 3 < cols.len()
                && cols[i + 3] - cols[i] <= 1.5 * h_next + COORD_TOL
                && (cols[i + 1] - x_pin).abs() > COORD_TOL
                && (cols[i + 2] - x_pin).abs() > COORD_TOL;
            if can_merge {
                let (x0, x1, x2, x3) = (cols[i], cols[i + 1], cols[i + 2], cols[i + 3]);
                let ym = y + 0.4 * h_next;
                b.quad([[x0, y], [x1, y], [x1, ym], [x0, y1]]);
                b.quad([[x1, y], [x2, y], [x2, ym], [x1, ym]]);
                b.quad([[x2, y], [x3, y], [x3, y1], [x2, ym]]);
                b.quad([[x1, ym], [x2, ym], [x3, y1], [x0, y1]]);
                band_flags.extend([false; 4]);
                next_cols.push(x3);
                i += 3;
            } else {
                b.quad([[cols[i], y], [cols[i + 1], y], [cols[i + 1], y1], [cols[i], y1]]);
                band_flags.push(false);
                next_cols.push(cols[i + 1]);
                i += 1;
            }
        }
        cols = next_cols;
        y = y1;
    }

    let mut mesh = b.finish();
    mesh.band = band_flags;

    let a0 = geom.a0;
    let hn = notch_rows as f64 * h_band;
    let w = geom.w;
    let top = geom.half_height;
    mesh.add_set_where(SYMMETRY, |p| p[1].abs() < COORD_TOL && p[0] >= a0 - COORD_TOL);
    if notch_rows == 0 {
        mesh.add_set_where(NOTCH_FACES, |p| p[1].abs() < COORD_TOL && p[0] <= a0 + COORD_TOL);
    } else {
        mesh.add_set_where(NOTCH_FACES, |p| {
            ((p[1] - hn).abs() < COORD_TOL && p[0] <= a0 + COORD_TOL)
                || ((p[0] - a0).abs() < COORD_TOL && p[1] <= hn + COORD_TOL)
        });
    }
    mesh.add_set_where(OUTER, |p| {
        (p[0] - x_front).abs() < COORD_TOL || (p[0] - w).abs() < COORD_TOL || (p[1] - top).abs() < COORD_TOL
    });
    let pin = mesh.nearest_node(geom.pin);
    mesh.node_sets.insert(PIN.to_string(), vec![pin]);

    if let Some(hb) = mesh.max_band_size() {
        if hb > target * (1.0 + 1e-9) {
            return Err(Error::config(format!(
                "band element size {hb} exceeds ell/6 = {target}"
            )));
        }
    }
    mesh.check_jacobians()?;
    Ok(mesh)
}
