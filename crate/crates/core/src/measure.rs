//! Compactly supported positive measures in the plane, discretised as weighted
//! atoms. Every atom carries the size of the geometric piece it stands for;
//! the kernel assembler needs that scale to average the logarithmic
//! singularity over the atom's own panel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::exact_sum;

/// Radius of the disc carrying the radial test density.
pub const RADIAL_SUPPORT: f64 = 0.5;
/// Innermost graded radial node of [`radial_density`].
pub const RADIAL_INNER: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("density is negative ({value}) at ({x}, {y})")]
    NegativeDensity { x: f64, y: f64, value: f64 },
    #[error("measure has no generator descriptor and cannot be refined")]
    NotRefinable,
    #[error("measure has no atoms with positive weight")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelKind {
    /// Piece of arc; the scale is its length.
    Curve,
    /// Planar cell; the scale is the radius of the disc inscribed in it.
    Area,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: Point,
    pub weight: f64,
    /// Panel size. `None` marks a bare point mass, which the assembler rejects.
    pub scale: Option<f64>,
    pub kind: PanelKind,
}

impl Atom {
    pub fn panel(position: Point, weight: f64, scale: f64, kind: PanelKind) -> Self {
        Atom { position, weight, scale: Some(scale), kind }
    }

    /// A point mass with no panel extent.
    pub fn point(position: Point, weight: f64) -> Self {
        Atom { position, weight, scale: None, kind: PanelKind::Area }
    }

    pub fn is_valid(&self) -> bool {
        self.weight > 0.0
            && self.weight.is_finite()
            && self.position.x.is_finite()
            && self.position.y.is_finite()
            && self.scale.map_or(true, |s| s > 0.0 && s.is_finite())
    }
}

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Rect { x_min, x_max, y_min, y_max }
    }

    /// Square of half-width `radius` centred at the origin.
    pub fn centered(radius: f64) -> Self {
        Rect::new(-radius, radius, -radius, radius)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    fn validate(&self) -> Result<(), MeasureError> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.width() <= 0.0 || self.height() <= 0.0 {
            return Err(MeasureError::DegenerateGeometry(format!(
                "rectangle {self:?} has no interior"
            )));
        }
        Ok(())
    }
}

/// Densities that can be named in a descriptor, so that grid measures stay
/// refinable and reproducible from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityField {
    Constant { value: f64 },
    /// `amplitude · exp(-|x - center|² / (2 sigma²))`
    Gaussian { amplitude: f64, sigma: f64, center: [f64; 2] },
    /// `value` inside `region`, zero outside.
    Indicator { value: f64, region: Rect },
}

impl DensityField {
    pub fn eval(&self, p: Point) -> f64 {
        match self {
            DensityField::Constant { value } => *value,
            DensityField::Gaussian { amplitude, sigma, center } => {
                let dx = p.x - center[0];
                let dy = p.y - center[1];
                amplitude * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            }
            DensityField::Indicator { value, region } => {
                if region.contains(p) {
                    *value
                } else {
                    0.0
                }
            }
        }
    }
}

/// Generator descriptor: the only persisted form of a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureDescriptor {
    Circle {
        r: f64,
        n: usize,
    },
    Segment {
        a: [f64; 2],
        b: [f64; 2],
        n: usize,
    },
    Polyline {
        vertices: Vec<[f64; 2]>,
        n_per_unit: f64,
    },
    RadialDensity {
        gamma: f64,
        n_r: usize,
        n_theta: usize,
    },
    GridDensity {
        density: DensityField,
        #[serde(rename = "box")]
        region: Rect,
        n_x: usize,
        n_y: usize,
    },
    /// Concatenation of several measures (e.g. crossing curves).
    Union {
        parts: Vec<MeasureDescriptor>,
    },
}

impl MeasureDescriptor {
    pub fn build(&self) -> Result<AtomicMeasure, MeasureError> {
        match self {
            MeasureDescriptor::Circle { r, n } => circle(*r, *n),
            MeasureDescriptor::Segment { a, b, n } => segment((*a).into(), (*b).into(), *n),
            MeasureDescriptor::Polyline { vertices, n_per_unit } => {
                let pts: Vec<Point> = vertices.iter().map(|&v| v.into()).collect();
                polyline(&pts, *n_per_unit)
            }
            MeasureDescriptor::RadialDensity { gamma, n_r, n_theta } => {
                radial_density(*gamma, *n_r, *n_theta)
            }
            MeasureDescriptor::GridDensity { density, region, n_x, n_y } => {
                grid_density(density, *region, *n_x, *n_y)
            }
            MeasureDescriptor::Union { parts } => {
                let mut iter = parts.iter();
                let first = iter
                    .next()
                    .ok_or_else(|| MeasureError::Parameter("union needs at least one part".into()))?
                    .build()?;
                iter.try_fold(first, |acc, d| Ok(acc.concat(&d.build()?)))
            }
        }
    }

    /// The same geometry at doubled resolution.
    pub fn refined(&self) -> MeasureDescriptor {
        match self.clone() {
            MeasureDescriptor::Circle { r, n } => MeasureDescriptor::Circle { r, n: 2 * n },
            MeasureDescriptor::Segment { a, b, n } => MeasureDescriptor::Segment { a, b, n: 2 * n },
            MeasureDescriptor::Polyline { vertices, n_per_unit } => {
                MeasureDescriptor::Polyline { vertices, n_per_unit: 2.0 * n_per_unit }
            }
            MeasureDescriptor::RadialDensity { gamma, n_r, n_theta } => {
                MeasureDescriptor::RadialDensity { gamma, n_r: 2 * n_r, n_theta: 2 * n_theta }
            }
            MeasureDescriptor::GridDensity { density, region, n_x, n_y } => {
                MeasureDescriptor::GridDensity { density, region, n_x: 2 * n_x, n_y: 2 * n_y }
            }
            MeasureDescriptor::Union { parts } => MeasureDescriptor::Union {
                parts: parts.iter().map(MeasureDescriptor::refined).collect(),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeasureDescriptor::Circle { r, n } => format!("circle(r={r}, n={n})"),
            MeasureDescriptor::Segment { a, b, n } => format!("segment({a:?}, {b:?}, n={n})"),
            MeasureDescriptor::Polyline { vertices, n_per_unit } => {
                format!("polyline({} vertices, {n_per_unit}/unit)", vertices.len())
            }
            MeasureDescriptor::RadialDensity { gamma, n_r, n_theta } => {
                format!("radial_density(gamma={gamma}, n_r={n_r}, n_theta={n_theta})")
            }
            MeasureDescriptor::GridDensity { n_x, n_y, .. } => format!("grid_density({n_x}x{n_y})"),
            MeasureDescriptor::Union { parts } => format!("union of {}", parts.len()),
        }
    }
}

/// A finite positive measure represented by atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
    label: String,
    total_mass: f64,
    descriptor: Option<MeasureDescriptor>,
}

impl AtomicMeasure {
    /// Hand-assembled measure; it cannot be refined.
    pub fn from_atoms(atoms: Vec<Atom>, label: impl Into<String>) -> Result<Self, MeasureError> {
        Self::with_descriptor(atoms, label.into(), None)
    }

    fn with_descriptor(
        atoms: Vec<Atom>,
        label: String,
        descriptor: Option<MeasureDescriptor>,
    ) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        if let Some(bad) = atoms.iter().find(|a| !a.is_valid()) {
            return Err(MeasureError::Parameter(format!("invalid atom {bad:?}")));
        }
        let total_mass = exact_sum(atoms.iter().map(|a| a.weight));
        if !total_mass.is_finite() {
            return Err(MeasureError::Parameter("total mass is not finite".into()));
        }
        Ok(AtomicMeasure { atoms, label, total_mass, descriptor })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// μ(ℝ²), summed exactly and rounded once.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn descriptor(&self) -> Option<&MeasureDescriptor> {
        self.descriptor.as_ref()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.atoms.iter().map(|a| a.position).collect()
    }

    /// Largest distance from the origin to an atom.
    pub fn max_radius(&self) -> f64 {
        self.atoms.iter().map(|a| a.position.norm()).fold(0.0, f64::max)
    }

    /// Axis-aligned bounding box of the atom positions.
    pub fn bounding_box(&self) -> Rect {
        let mut r = Rect::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for a in &self.atoms {
            r.x_min = r.x_min.min(a.position.x);
            r.x_max = r.x_max.max(a.position.x);
            r.y_min = r.y_min.min(a.position.y);
            r.y_max = r.y_max.max(a.position.y);
        }
        r
    }

    pub fn diameter(&self) -> f64 {
        let b = self.bounding_box();
        b.width().hypot(b.height())
    }

    /// Union of two measures. The descriptor survives when both sides have one.
    pub fn concat(&self, other: &AtomicMeasure) -> AtomicMeasure {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let descriptor = match (&self.descriptor, &other.descriptor) {
            (Some(a), Some(b)) => {
                let mut parts = match a {
                    MeasureDescriptor::Union { parts } => parts.clone(),
                    d => vec![d.clone()],
                };
                match b {
                    MeasureDescriptor::Union { parts: more } => parts.extend(more.iter().cloned()),
                    d => parts.push(d.clone()),
                }
                Some(MeasureDescriptor::Union { parts })
            }
            _ => None,
        };
        let total_mass = exact_sum(atoms.iter().map(|a| a.weight));
        AtomicMeasure {
            atoms,
            label: format!("{} + {}", self.label, other.label),
            total_mass,
            descriptor,
        }
    }
}

/// `n` equally spaced unit-density arc panels on the circle of radius `r`.
pub fn circle(r: f64, n: usize) -> Result<AtomicMeasure, MeasureError> {
    if !(r > 0.0 && r.is_finite()) || n < 3 {
        return Err(MeasureError::Parameter(format!("circle needs r > 0 and n >= 3, got r={r}, n={n}")));
    }
    let h = 2.0 * PI * r / n as f64;
    let atoms = (0..n)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / n as f64;
            let (s, c) = theta.sin_cos();
            Atom::panel(Point::new(r * c, r * s), h, h, PanelKind::Curve)
        })
        .collect();
    let d = MeasureDescriptor::Circle { r, n };
    AtomicMeasure::with_descriptor(atoms, d.label(), Some(d))
}

/// Midpoint-rule arc panels on the segment from `a` to `b`.
pub fn segment(a: Point, b: Point, n: usize) -> Result<AtomicMeasure, MeasureError> {
    let atoms = segment_atoms(a, b, n)?;
    let d = MeasureDescriptor::Segment { a: [a.x, a.y], b: [b.x, b.y], n };
    AtomicMeasure::with_descriptor(atoms, d.label(), Some(d))
}

fn segment_atoms(a: Point, b: Point, n: usize) -> Result<Vec<Atom>, MeasureError> {
    let len = a.dist(b);
    if !(len > 0.0) || !len.is_finite() {
        return Err(MeasureError::DegenerateGeometry(format!(
            "segment endpoints {a:?} and {b:?} coincide"
        )));
    }
    if n == 0 {
        return Err(MeasureError::Parameter("segment needs n >= 1".into()));
    }
    let h = len / n as f64;
    Ok((0..n)
        .map(|j| {
            let t = (j as f64 + 0.5) / n as f64;
            Atom::panel(a.lerp(b, t), h, h, PanelKind::Curve)
        })
        .collect())
}

/// Concatenated segment discretisations with `⌈length · n_per_unit⌉` panels
/// per edge.
pub fn polyline(vertices: &[Point], n_per_unit: f64) -> Result<AtomicMeasure, MeasureError> {
    if vertices.len() < 2 {
        return Err(MeasureError::Parameter("polyline needs at least two vertices".into()));
    }
    if !(n_per_unit > 0.0 && n_per_unit.is_finite()) {
        return Err(MeasureError::Parameter(format!("n_per_unit must be positive, got {n_per_unit}")));
    }
    let mut atoms = Vec::new();
    for pair in vertices.windows(2) {
        let len = pair[0].dist(pair[1]);
        if !(len > 0.0) {
            return Err(MeasureError::DegenerateGeometry(format!(
                "repeated consecutive vertex {:?}",
                pair[0]
            )));
        }
        let n = ((len * n_per_unit).ceil() as usize).max(1);
        atoms.extend(segment_atoms(pair[0], pair[1], n)?);
    }
    let d = MeasureDescriptor::Polyline {
        vertices: vertices.iter().map(|p| [p.x, p.y]).collect(),
        n_per_unit,
    };
    AtomicMeasure::with_descriptor(atoms, d.label(), Some(d))
}

/// Mass of the radial density `1/(r² |ln r|^γ)` on the disc of radius `rho ≤ 1/2`.
pub fn radial_mass_within(gamma: f64, rho: f64) -> f64 {
    2.0 * PI / ((gamma - 1.0) * (-rho.ln()).powf(gamma - 1.0))
}

/// Atoms for the density `V(r) = 1/(r² |ln r|^γ)` on the disc `r ≤ 1/2`,
/// over annular sectors graded geometrically in r from 1/2 down to
/// [`RADIAL_INNER`], each carrying its exact mass. The disc inside the innermost node is one central atom
/// carrying its exact mass.
pub fn radial_density(gamma: f64, n_r: usize, n_theta: usize) -> Result<AtomicMeasure, MeasureError> {
    if !(gamma > 2.0) || !gamma.is_finite() {
        return Err(MeasureError::Parameter(format!(
            "radial density needs gamma > 2 (mass and Kato bound diverge otherwise), got {gamma}"
        )));
    }
    if n_r < 2 || n_theta < 1 {
        return Err(MeasureError::Parameter("radial density needs n_r >= 2 and n_theta >= 1".into()));
    }
    let ratio = (RADIAL_INNER / RADIAL_SUPPORT).powf(1.0 / (n_r - 1) as f64);
    let nodes: Vec<f64> = (0..n_r)
        .map(|i| if i + 1 == n_r { RADIAL_INNER } else { RADIAL_SUPPORT * ratio.powi(i as i32) })
        .collect();
    let dtheta = 2.0 * PI / n_theta as f64;
    // mass of the disc of radius r, per radian
    let cumulative = |r: f64| radial_mass_within(gamma, r) / (2.0 * PI);
    let mut atoms = Vec::with_capacity((n_r - 1) * n_theta + 1);
    for pair in nodes.windows(2) {
        let (outer, inner) = (pair[0], pair[1]);
        let rc = (outer * inner).sqrt();
        let dr = outer - inner;
        let weight = (cumulative(outer) - cumulative(inner)) * dtheta;
        let scale = 0.5 * dr.min(rc * dtheta);
        for j in 0..n_theta {
            let theta = (j as f64 + 0.5) * dtheta;
            let (s, c) = theta.sin_cos();
            atoms.push(Atom::panel(Point::new(rc * c, rc * s), weight, scale, PanelKind::Area));
        }
    }
    atoms.push(Atom::panel(
        Point::ORIGIN,
        radial_mass_within(gamma, RADIAL_INNER),
        RADIAL_INNER,
        PanelKind::Area,
    ));
    let d = MeasureDescriptor::RadialDensity { gamma, n_r, n_theta };
    AtomicMeasure::with_descriptor(atoms, d.label(), Some(d))
}

/// Midpoint-rule cells of a named density on a rectangle; empty cells are
/// dropped.
pub fn grid_density(
    density: &DensityField,
    region: Rect,
    n_x: usize,
    n_y: usize,
) -> Result<AtomicMeasure, MeasureError> {
    let atoms = grid_atoms(|p| density.eval(p), region, n_x, n_y)?;
    let d = MeasureDescriptor::GridDensity { density: density.clone(), region, n_x, n_y };
    AtomicMeasure::with_descriptor(atoms, d.label(), Some(d))
}

/// Like [`grid_density`] for an arbitrary closure. The result has no
/// descriptor and so cannot be refined.
pub fn grid_density_with<F: Fn(Point) -> f64>(
    density: F,
    region: Rect,
    n_x: usize,
    n_y: usize,
) -> Result<AtomicMeasure, MeasureError> {
    let atoms = grid_atoms(density, region, n_x, n_y)?;
    AtomicMeasure::with_descriptor(atoms, format!("grid_density({n_x}x{n_y})"), None)
}

fn grid_atoms<F: Fn(Point) -> f64>(
    density: F,
    region: Rect,
    n_x: usize,
    n_y: usize,
) -> Result<Vec<Atom>, MeasureError> {
    region.validate()?;
    if n_x == 0 || n_y == 0 {
        return Err(MeasureError::Parameter("grid density needs n_x, n_y >= 1".into()));
    }
    let dx = region.width() / n_x as f64;
    let dy = region.height() / n_y as f64;
    let area = dx * dy;
    let scale = 0.5 * dx.min(dy);
    let mut atoms = Vec::new();
    for iy in 0..n_y {
        for ix in 0..n_x {
            let p = Point::new(
                region.x_min + (ix as f64 + 0.5) * dx,
                region.y_min + (iy as f64 + 0.5) * dy,
            );
            let value = density(p);
            if value < 0.0 || value.is_nan() {
                return Err(MeasureError::NegativeDensity { x: p.x, y: p.y, value });
            }
            if value > 0.0 {
                atoms.push(Atom::panel(p, value * area, scale, PanelKind::Area));
            }
        }
    }
    Ok(atoms)
}

/// Rebuilds a constructor-made measure at doubled resolution.
pub fn refine(m: &AtomicMeasure) -> Result<AtomicMeasure, MeasureError> {
    m.descriptor().ok_or(MeasureError::NotRefinable)?.refined().build()
}

/// Panel-averaged `-ln|x - y|` over the atom's own piece.
pub(crate) fn self_log_average(scale: f64, kind: PanelKind) -> f64 {
    match kind {
        // (1/h) ∫_{-h/2}^{h/2} -ln|s| ds
        PanelKind::Curve => 1.0 - (0.5 * scale).ln(),
        // (1/(π a²)) ∫_{|y|<a} -ln|y| dy
        PanelKind::Area => 0.5 - scale.ln(),
    }
}

/// Panel average of `|ln|s||` restricted to the part of the panel within
/// `eps` of its centre, i.e. `(1/|panel|) ∫_{panel ∩ D_ε} |ln|y|| dy`.
fn self_abs_log_within(scale: f64, kind: PanelKind, eps: f64) -> f64 {
    match kind {
        PanelKind::Curve => {
            // ∫_0^t |ln s| ds
            let g = |t: f64| if t <= 1.0 { t - t * t.ln() } else { 2.0 + t * t.ln() - t };
            2.0 * g(eps.min(0.5 * scale)) / scale
        }
        PanelKind::Area => {
            // ∫_0^t r |ln r| dr
            let f = |t: f64| {
                let q = 0.5 * t * t;
                if t <= 1.0 { 0.5 * q - q * t.ln() } else { 0.5 + q * t.ln() - 0.5 * q }
            };
            2.0 * f(eps.min(scale)) / (scale * scale)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KatoRow {
    pub eps: f64,
    pub sup_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KatoReport {
    pub rows: Vec<KatoRow>,
}

impl KatoReport {
    /// True when the estimates fail to shrink over the ε sweep, i.e. the
    /// logarithm is not being averaged away near some atom. The sweep must
    /// resolve scales above the atom spacing for the test to be meaningful.
    pub fn flags_non_kato(&self) -> bool {
        let (Some(first), Some(last)) = (self.rows.first(), self.rows.last()) else {
            return false;
        };
        !last.sup_estimate.is_finite() || last.sup_estimate >= first.sup_estimate
    }
}

/// Estimates `sup_x ∫_{D_ε(x)} |ln|x - y|| dμ(y)` over atom positions x for
/// each ε. An atom's own panel contributes the part of it inside the disc;
/// bare point atoms contribute `+∞`.
pub fn kato_diagnostic(m: &AtomicMeasure, eps_list: &[f64]) -> Result<KatoReport, MeasureError> {
    if eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(MeasureError::Parameter("eps values must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(MeasureError::Parameter("eps values must be strictly decreasing".into()));
    }
    let atoms = m.atoms();
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let sup = atoms
                .iter()
                .enumerate()
                .map(|(i, xi)| {
                    atoms
                        .iter()
                        .enumerate()
                        .filter_map(|(j, yj)| {
                            if i == j {
                                return Some(match yj.scale {
                                    Some(s) => yj.weight * self_abs_log_within(s, yj.kind, eps),
                                    None => f64::INFINITY,
                                });
                            }
                            let rho = xi.position.dist(yj.position);
                            if rho >= eps {
                                None
                            } else if rho == 0.0 {
                                Some(match yj.scale {
                                    Some(s) => yj.weight * self_abs_log_within(s, yj.kind, eps),
                                    None => f64::INFINITY,
                                })
                            } else {
                                Some(yj.weight * rho.ln().abs())
                            }
                        })
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            KatoRow { eps, sup_estimate: sup }
        })
        .collect();
    Ok(KatoReport { rows })
}
