//! Deformable gauze engine: a grid mass-spring system integrated with damped
//! Verlet steps plus iterative distance-constraint relaxation.
//!
//! Each step does three phases:
//!
//! 1. accumulate per-vertex acceleration
//!    `a = sum_uncut tau*(|p'-p| - rest)*unit(p'-p)*(1-delta) + gravity`
//!    and integrate every unpinned vertex with
//!    `p_new = p + alpha*(p - p_prev) + a*dt^2`;
//! 2. run `constraint_iterations` rounds of positional relaxation toward each
//!    uncut constraint's rest length (corrections are accumulated from all
//!    constraints in a round and then applied at once, so the result is
//!    independent of constraint order and the engine is exactly equivariant
//!    under mesh mirroring); pinned endpoints absorb no correction;
//! 3. restore pinned vertices to their pin targets.
//!
//! Vertices are indexed row-major (`vertex = row * cols + col`); material
//! coordinates are the flat rest positions in millimeters and never change,
//! which is what lets cut events be scored in the cloth's own frame however
//! the world-space mesh has deformed.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{Vector2, Vector3};

/// Velocity retention per step.
pub const DEFAULT_ALPHA: f64 = 0.99;
/// Spring damping factor.
pub const DEFAULT_DELTA: f64 = 0.008;
/// Spring stiffness.
pub const DEFAULT_TAU: f64 = 1.0;
/// Default mesh is 25x25 (625 vertices).
pub const DEFAULT_ROWS: usize = 25;
pub const DEFAULT_COLS: usize = 25;
/// 4-inch (101.6 mm) gauze across 24 inter-vertex gaps.
pub const DEFAULT_SPACING_MM: f64 = 101.6 / 24.0;
/// Default gravity, mm/step^2. Chosen to keep a corner-pinned default mesh
/// taut (peak constraint stretch a few percent of spacing) while still
/// producing visible sag dynamics.
pub const DEFAULT_GRAVITY_MM: Vector3<f64> = Vector3::new(0.0, 0.0, -0.001);
/// Relaxation rounds per step.
pub const DEFAULT_CONSTRAINT_ITERATIONS: usize = 3;

/// Engine parameters. `dt` is measured in steps; the damping/stiffness
/// constants are per-step quantities, so the defaults assume `dt = 1`.
#[derive(Clone, Debug)]
pub struct ClothParams {
    /// Velocity retention in (0, 1].
    pub alpha: f64,
    /// Spring damping in [0, 1).
    pub delta: f64,
    /// Spring stiffness, > 0.
    pub tau: f64,
    /// Acceleration applied to every unpinned vertex, mm/step^2.
    pub gravity_mm: Vector3<f64>,
    /// Timestep in steps, > 0.
    pub dt: f64,
    /// Relaxation rounds per step, >= 1.
    pub constraint_iterations: usize,
    /// Also create diagonal (shear) constraints. The structural
    /// 4-neighborhood is always present.
    pub shear_diagonals: bool,
}

impl Default for ClothParams {
    fn default() -> Self {
        ClothParams {
            alpha: DEFAULT_ALPHA,
            delta: DEFAULT_DELTA,
            tau: DEFAULT_TAU,
            gravity_mm: DEFAULT_GRAVITY_MM,
            dt: 1.0,
            constraint_iterations: DEFAULT_CONSTRAINT_ITERATIONS,
            shear_diagonals: false,
        }
    }
}

/// A distance constraint between two vertices. `cut` constraints exert no
/// force and are never relaxed; cutting is monotone (constraints never knit
/// back together).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpringConstraint {
    pub a: u32,
    pub b: u32,
    pub rest_length_mm: f64,
    pub cut: bool,
}

/// Which vertices of a fresh mesh start pinned.
#[derive(Clone, Debug, PartialEq)]
pub enum PinLayout {
    None,
    /// The four grid corners (the clips of the physical rig).
    Corners,
    /// Every vertex on the boundary rows/columns.
    Border,
    /// All vertices (a rigid sheet).
    All,
    /// Explicit vertex ids.
    Vertices(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClothError {
    /// A parameter failed validation.
    InvalidParam { name: &'static str, value: f64 },
    /// Mesh dimensions must be at least 2x2.
    MeshTooSmall { rows: usize, cols: usize },
    /// Vertex id out of range.
    VertexOutOfRange { vertex: usize, count: usize },
}

impl fmt::Display for ClothError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClothError::InvalidParam { name, value } => {
                write!(f, "invalid cloth parameter {name} = {value}")
            }
            ClothError::MeshTooSmall { rows, cols } => {
                write!(f, "mesh must be at least 2x2, got {rows}x{cols}")
            }
            ClothError::VertexOutOfRange { vertex, count } => {
                write!(f, "vertex {vertex} out of range (mesh has {count})")
            }
        }
    }
}

impl std::error::Error for ClothError {}

/// Hot-loop copy of an uncut constraint. Relaxation weights are resolved at
/// cache-rebuild time (0/1 when one endpoint is pinned, 0.5/0.5 otherwise);
/// constraints with both endpoints pinned are excluded entirely since they
/// can affect nothing.
#[derive(Clone, Copy, Debug)]
struct ActiveSpring {
    a: u32,
    b: u32,
    rest: f64,
    wa: f64,
    wb: f64,
}

/// Full simulation state. Positions are stored as structure-of-arrays so the
/// integration and relaxation passes vectorize; all public accessors speak
/// `Vector3`/`Vector2`.
#[derive(Clone, Debug)]
pub struct ClothState {
    params: ClothParams,
    rows: usize,
    cols: usize,
    spacing_mm: f64,

    // World positions (mm) and previous positions.
    px: Vec<f64>,
    py: Vec<f64>,
    pz: Vec<f64>,
    qx: Vec<f64>,
    qy: Vec<f64>,
    qz: Vec<f64>,

    // Material (rest-frame) coordinates, mm; immutable after construction.
    mat_x: Vec<f64>,
    mat_y: Vec<f64>,

    constraints: Vec<SpringConstraint>,
    pinned: Vec<bool>,
    pin_x: Vec<f64>,
    pin_y: Vec<f64>,
    pin_z: Vec<f64>,

    // Caches rebuilt whenever constraints or pins change.
    active: Vec<ActiveSpring>,
    inv_degree: Vec<f64>,
    cache_dirty: bool,

    // Scratch buffers reused across steps (accelerations / corrections).
    sx: Vec<f64>,
    sy: Vec<f64>,
    sz: Vec<f64>,

    step_count: u64,
}

impl ClothState {
    /// Build a flat mesh at z = 0 with the requested pin layout.
    ///
    /// Structural constraints connect each vertex to its right and down
    /// neighbors (a 3x3 mesh has 12); `shear_diagonals` adds both diagonals
    /// of every cell.
    pub fn new_mesh(
        rows: usize,
        cols: usize,
        spacing_mm: f64,
        pins: &PinLayout,
        params: ClothParams,
    ) -> Result<Self, ClothError> {
        if rows < 2 || cols < 2 {
            return Err(ClothError::MeshTooSmall { rows, cols });
        }
        if !(spacing_mm > 0.0) || !spacing_mm.is_finite() {
            return Err(ClothError::InvalidParam { name: "spacing_mm", value: spacing_mm });
        }
        validate_params(&params)?;

        let n = rows * cols;
        let mut mat_x = Vec::with_capacity(n);
        let mut mat_y = Vec::with_capacity(n);
        for r in 0..rows {
            for c in 0..cols {
                mat_x.push(c as f64 * spacing_mm);
                mat_y.push(r as f64 * spacing_mm);
            }
        }

        let idx = |r: usize, c: usize| (r * cols + c) as u32;
        let mut constraints = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    constraints.push(SpringConstraint {
                        a: idx(r, c),
                        b: idx(r, c + 1),
                        rest_length_mm: spacing_mm,
                        cut: false,
                    });
                }
                if r + 1 < rows {
                    constraints.push(SpringConstraint {
                        a: idx(r, c),
                        b: idx(r + 1, c),
                        rest_length_mm: spacing_mm,
                        cut: false,
                    });
                }
                if params.shear_diagonals && r + 1 < rows && c + 1 < cols {
                    let diag = spacing_mm * std::f64::consts::SQRT_2;
                    constraints.push(SpringConstraint {
                        a: idx(r, c),
                        b: idx(r + 1, c + 1),
                        rest_length_mm: diag,
                        cut: false,
                    });
                    constraints.push(SpringConstraint {
                        a: idx(r, c + 1),
                        b: idx(r + 1, c),
                        rest_length_mm: diag,
                        cut: false,
                    });
                }
            }
        }

        let mut state = ClothState {
            params,
            rows,
            cols,
            spacing_mm,
            px: mat_x.clone(),
            py: mat_y.clone(),
            pz: vec![0.0; n],
            qx: mat_x.clone(),
            qy: mat_y.clone(),
            qz: vec![0.0; n],
            mat_x,
            mat_y,
            constraints,
            pinned: vec![false; n],
            pin_x: vec![0.0; n],
            pin_y: vec![0.0; n],
            pin_z: vec![0.0; n],
            active: Vec::new(),
            inv_degree: vec![0.0; n],
            cache_dirty: true,
            sx: vec![0.0; n],
            sy: vec![0.0; n],
            sz: vec![0.0; n],
            step_count: 0,
        };

        let pin_list: Vec<usize> = match pins {
            PinLayout::None => vec![],
            PinLayout::Corners => vec![
                0,
                cols - 1,
                (rows - 1) * cols,
                rows * cols - 1,
            ],
            PinLayout::Border => (0..n)
                .filter(|&v| {
                    let (r, c) = (v / cols, v % cols);
                    r == 0 || c == 0 || r == rows - 1 || c == cols - 1
                })
                .collect(),
            PinLayout::All => (0..n).collect(),
            PinLayout::Vertices(list) => list.clone(),
        };
        for v in pin_list {
            let at = state.position(v);
            state.set_pin(v, at)?;
        }
        Ok(state)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn vertex_count(&self) -> usize {
        self.px.len()
    }

    pub fn spacing_mm(&self) -> f64 {
        self.spacing_mm
    }

    /// Side length of the (square only if rows == cols) material rectangle
    /// along x, in mm.
    pub fn width_mm(&self) -> f64 {
        (self.cols - 1) as f64 * self.spacing_mm
    }

    pub fn height_mm(&self) -> f64 {
        (self.rows - 1) as f64 * self.spacing_mm
    }

    pub fn params(&self) -> &ClothParams {
        &self.params
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn position(&self, v: usize) -> Vector3<f64> {
        Vector3::new(self.px[v], self.py[v], self.pz[v])
    }

    pub fn prev_position(&self, v: usize) -> Vector3<f64> {
        Vector3::new(self.qx[v], self.qy[v], self.qz[v])
    }

    /// Material (rest-frame) coordinate of a vertex, mm.
    pub fn material(&self, v: usize) -> Vector2<f64> {
        Vector2::new(self.mat_x[v], self.mat_y[v])
    }

    pub fn is_pinned(&self, v: usize) -> bool {
        self.pinned[v]
    }

    pub fn constraints(&self) -> &[SpringConstraint] {
        &self.constraints
    }

    pub fn active_constraint_count(&self) -> usize {
        self.constraints.iter().filter(|c| !c.cut).count()
    }

    /// Number of cut constraints incident to a vertex.
    pub fn cut_degree(&self, v: usize) -> usize {
        let v = v as u32;
        self.constraints
            .iter()
            .filter(|c| c.cut && (c.a == v || c.b == v))
            .count()
    }

    /// Whether the vertex still has at least one uncut incident constraint.
    pub fn has_uncut_constraint(&self, v: usize) -> bool {
        let v = v as u32;
        self.constraints
            .iter()
            .any(|c| !c.cut && (c.a == v || c.b == v))
    }

    fn check_vertex(&self, v: usize) -> Result<(), ClothError> {
        if v >= self.vertex_count() {
            Err(ClothError::VertexOutOfRange { vertex: v, count: self.vertex_count() })
        } else {
            Ok(())
        }
    }

    /// Pin a vertex to a world-space target. The vertex snaps to the target
    /// at the end of the next step (and immediately for queries via the pin
    /// table). Re-pinning an already pinned vertex moves its target.
    pub fn set_pin(&mut self, v: usize, target_mm: Vector3<f64>) -> Result<(), ClothError> {
        self.check_vertex(v)?;
        self.pinned[v] = true;
        self.pin_x[v] = target_mm.x;
        self.pin_y[v] = target_mm.y;
        self.pin_z[v] = target_mm.z;
        // Snap now so queries between steps see the pin where it was put.
        self.px[v] = target_mm.x;
        self.py[v] = target_mm.y;
        self.pz[v] = target_mm.z;
        self.qx[v] = target_mm.x;
        self.qy[v] = target_mm.y;
        self.qz[v] = target_mm.z;
        self.cache_dirty = true;
        Ok(())
    }

    /// Release a pin. The vertex keeps its current position and resumes
    /// integration with zero velocity.
    pub fn clear_pin(&mut self, v: usize) -> Result<(), ClothError> {
        self.check_vertex(v)?;
        self.pinned[v] = false;
        self.qx[v] = self.px[v];
        self.qy[v] = self.py[v];
        self.qz[v] = self.pz[v];
        self.cache_dirty = true;
        Ok(())
    }

    /// Translate an existing pin target by `delta_mm`.
    pub fn move_pin(&mut self, v: usize, delta_mm: Vector3<f64>) -> Result<(), ClothError> {
        self.check_vertex(v)?;
        if !self.pinned[v] {
            return Err(ClothError::VertexOutOfRange { vertex: v, count: self.vertex_count() });
        }
        let target = Vector3::new(
            self.pin_x[v] + delta_mm.x,
            self.pin_y[v] + delta_mm.y,
            self.pin_z[v] + delta_mm.z,
        );
        self.set_pin(v, target)
    }

    pub fn pin_target(&self, v: usize) -> Option<Vector3<f64>> {
        self.pinned[v].then(|| Vector3::new(self.pin_x[v], self.pin_y[v], self.pin_z[v]))
    }

    /// Mark a constraint (by index into `constraints()`) as cut.
    pub fn sever_constraint(&mut self, index: usize) {
        if !self.constraints[index].cut {
            self.constraints[index].cut = true;
            self.cache_dirty = true;
        }
    }

    /// Mark every constraint incident to `v` as cut; returns how many were
    /// newly severed.
    pub fn sever_vertex(&mut self, v: usize) -> usize {
        let vid = v as u32;
        let mut newly = 0;
        for c in &mut self.constraints {
            if !c.cut && (c.a == vid || c.b == vid) {
                c.cut = true;
                newly += 1;
            }
        }
        if newly > 0 {
            self.cache_dirty = true;
        }
        newly
    }

    /// Vertex nearest to a world point (3-D distance; ties go to the lowest
    /// id because strict comparison keeps the first minimum).
    pub fn nearest_vertex(&self, world_mm: &Vector3<f64>) -> usize {
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for v in 0..self.vertex_count() {
            let dx = self.px[v] - world_mm.x;
            let dy = self.py[v] - world_mm.y;
            let dz = self.pz[v] - world_mm.z;
            let d2 = dx * dx + dy * dy + dz * dz;
            if d2 < best_d2 {
                best_d2 = d2;
                best = v;
            }
        }
        best
    }

    /// Vertex nearest to a world (x, y), ignoring z.
    pub fn nearest_vertex_xy(&self, x_mm: f64, y_mm: f64) -> usize {
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for v in 0..self.vertex_count() {
            let dx = self.px[v] - x_mm;
            let dy = self.py[v] - y_mm;
            let d2 = dx * dx + dy * dy;
            if d2 < best_d2 {
                best_d2 = d2;
                best = v;
            }
        }
        best
    }

    /// All vertices within `radius_mm` of a world point (3-D distance),
    /// ascending by id.
    pub fn vertices_within(&self, world_mm: &Vector3<f64>, radius_mm: f64) -> Vec<usize> {
        let r2 = radius_mm * radius_mm;
        let mut out = Vec::new();
        for v in 0..self.vertex_count() {
            let dx = self.px[v] - world_mm.x;
            let dy = self.py[v] - world_mm.y;
            let dz = self.pz[v] - world_mm.z;
            if dx * dx + dy * dy + dz * dz <= r2 {
                out.push(v);
            }
        }
        out
    }

    /// Kinetic energy sum over unpinned vertices, `|p - p_prev|^2 / (2 dt^2)`
    /// per vertex (unit mass).
    pub fn kinetic_energy(&self) -> f64 {
        let inv_2dt2 = 1.0 / (2.0 * self.params.dt * self.params.dt);
        let mut acc = 0.0;
        for v in 0..self.vertex_count() {
            if self.pinned[v] {
                continue;
            }
            let dx = self.px[v] - self.qx[v];
            let dy = self.py[v] - self.qy[v];
            let dz = self.pz[v] - self.qz[v];
            acc += dx * dx + dy * dy + dz * dz;
        }
        acc * inv_2dt2
    }

    fn rebuild_caches(&mut self) {
        let n = self.vertex_count();
        self.active.clear();
        let mut degree = vec![0u32; n];
        for c in &self.constraints {
            if c.cut {
                continue;
            }
            let (a, b) = (c.a as usize, c.b as usize);
            assert!(a < n && b < n, "constraint endpoint out of range");
            let a_pinned = self.pinned[a];
            let b_pinned = self.pinned[b];
            if a_pinned && b_pinned {
                continue;
            }
            let (wa, wb) = if a_pinned {
                (0.0, 1.0)
            } else if b_pinned {
                (1.0, 0.0)
            } else {
                (0.5, 0.5)
            };
            self.active.push(ActiveSpring { a: c.a, b: c.b, rest: c.rest_length_mm, wa, wb });
            degree[a] += 1;
            degree[b] += 1;
        }
        for (v, &d) in degree.iter().enumerate() {
            self.inv_degree[v] = if d > 0 && !self.pinned[v] { 1.0 / f64::from(d) } else { 0.0 };
        }
        // Scratch must be clean before the fused zeroing discipline starts.
        self.sx.iter_mut().for_each(|v| *v = 0.0);
        self.sy.iter_mut().for_each(|v| *v = 0.0);
        self.sz.iter_mut().for_each(|v| *v = 0.0);
        self.cache_dirty = false;
    }

    /// Advance the simulation one step.
    pub fn step(&mut self) {
        if self.cache_dirty {
            self.rebuild_caches();
        }
        let n = self.vertex_count();
        let dt2 = self.params.dt * self.params.dt;
        let alpha = self.params.alpha;
        // Fold stiffness damping and dt^2 into one spring coefficient.
        let k_spring = self.params.tau * (1.0 - self.params.delta) * dt2;
        let gx = self.params.gravity_mm.x * dt2;
        let gy = self.params.gravity_mm.y * dt2;
        let gz = self.params.gravity_mm.z * dt2;
        let iterations = self.params.constraint_iterations;

        // Local slices keep the hot loops free of repeated field loads.
        let px = &mut self.px[..];
        let py = &mut self.py[..];
        let pz = &mut self.pz[..];
        let qx = &mut self.qx[..];
        let qy = &mut self.qy[..];
        let qz = &mut self.qz[..];
        let sx = &mut self.sx[..];
        let sy = &mut self.sy[..];
        let sz = &mut self.sz[..];
        let pinned = &self.pinned[..];
        let inv_degree = &self.inv_degree[..];
        let active = &self.active[..];

        // Scratch arrays are zero on entry (rebuild_caches zeroes them; each
        // pass below re-zeroes what it consumed).
        //
        // SAFETY for all `get_unchecked` below: every ActiveSpring endpoint
        // was bounds-asserted against the vertex count in rebuild_caches, and
        // the per-vertex passes iterate 0..n over same-length arrays.

        // Phase 1a: spring accelerations * dt^2 into scratch.
        unsafe {
            for s in active {
                let (a, b) = (s.a as usize, s.b as usize);
                let dx = *px.get_unchecked(b) - *px.get_unchecked(a);
                let dy = *py.get_unchecked(b) - *py.get_unchecked(a);
                let dz = *pz.get_unchecked(b) - *pz.get_unchecked(a);
                let len = (dx * dx + dy * dy + dz * dz).sqrt();
                if len < 1e-12 {
                    continue;
                }
                let coef = k_spring * (len - s.rest) / len;
                let fx = coef * dx;
                let fy = coef * dy;
                let fz = coef * dz;
                *sx.get_unchecked_mut(a) += fx;
                *sy.get_unchecked_mut(a) += fy;
                *sz.get_unchecked_mut(a) += fz;
                *sx.get_unchecked_mut(b) -= fx;
                *sy.get_unchecked_mut(b) -= fy;
                *sz.get_unchecked_mut(b) -= fz;
            }
        }

        // Phase 1b: damped Verlet integration of unpinned vertices; consumes
        // and re-zeroes the scratch accumulators.
        for v in 0..n {
            if !pinned[v] {
                let nx = px[v] + alpha * (px[v] - qx[v]) + sx[v] + gx;
                let ny = py[v] + alpha * (py[v] - qy[v]) + sy[v] + gy;
                let nz = pz[v] + alpha * (pz[v] - qz[v]) + sz[v] + gz;
                qx[v] = px[v];
                qy[v] = py[v];
                qz[v] = pz[v];
                px[v] = nx;
                py[v] = ny;
                pz[v] = nz;
            }
            sx[v] = 0.0;
            sy[v] = 0.0;
            sz[v] = 0.0;
        }

        // Phase 2: relaxation rounds (accumulate, then apply+re-zero).
        for _ in 0..iterations {
            unsafe {
                for s in active {
                    let (a, b) = (s.a as usize, s.b as usize);
                    let dx = *px.get_unchecked(b) - *px.get_unchecked(a);
                    let dy = *py.get_unchecked(b) - *py.get_unchecked(a);
                    let dz = *pz.get_unchecked(b) - *pz.get_unchecked(a);
                    let len = (dx * dx + dy * dy + dz * dz).sqrt();
                    if len < 1e-12 {
                        continue;
                    }
                    let err = (len - s.rest) / len;
                    let cx = err * dx;
                    let cy = err * dy;
                    let cz = err * dz;
                    *sx.get_unchecked_mut(a) += s.wa * cx;
                    *sy.get_unchecked_mut(a) += s.wa * cy;
                    *sz.get_unchecked_mut(a) += s.wa * cz;
                    *sx.get_unchecked_mut(b) -= s.wb * cx;
                    *sy.get_unchecked_mut(b) -= s.wb * cy;
                    *sz.get_unchecked_mut(b) -= s.wb * cz;
                }
            }
            for v in 0..n {
                let inv = inv_degree[v];
                px[v] += sx[v] * inv;
                py[v] += sy[v] * inv;
                pz[v] += sz[v] * inv;
                sx[v] = 0.0;
                sy[v] = 0.0;
                sz[v] = 0.0;
            }
        }

        // Phase 3: restore pins.
        for v in 0..n {
            if pinned[v] {
                px[v] = self.pin_x[v];
                py[v] = self.pin_y[v];
                pz[v] = self.pin_z[v];
                qx[v] = self.pin_x[v];
                qy[v] = self.pin_y[v];
                qz[v] = self.pin_z[v];
            }
        }

        self.step_count += 1;
    }

    /// Advance `steps` steps.
    pub fn run(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Write a per-vertex snapshot CSV:
    /// `vertex,row,col,x_mm,y_mm,z_mm,pinned,cut_degree`.
    pub fn write_snapshot_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "vertex,row,col,x_mm,y_mm,z_mm,pinned,cut_degree")?;
        let mut cut_deg = vec![0usize; self.vertex_count()];
        for c in &self.constraints {
            if c.cut {
                cut_deg[c.a as usize] += 1;
                cut_deg[c.b as usize] += 1;
            }
        }
        for v in 0..self.vertex_count() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                v,
                v / self.cols,
                v % self.cols,
                self.px[v],
                self.py[v],
                self.pz[v],
                u8::from(self.pinned[v]),
                cut_deg[v]
            )?;
        }
        Ok(())
    }

    /// Render a top-down orthographic grayscale frame: uncut constraints are
    /// drawn as lines whose brightness encodes depth (higher = brighter),
    /// pinned vertices as bright dots. Returns `resolution * resolution`
    /// bytes, row 0 at the top (image y runs opposite to world y).
    pub fn render_topdown(&self, resolution: usize) -> Vec<u8> {
        let res = resolution.max(1);
        let mut img = vec![0u8; res * res];
        let margin = 0.1 * self.width_mm().max(self.height_mm());
        let x0 = -margin;
        let y0 = -margin;
        let span_x = self.width_mm() + 2.0 * margin;
        let span_y = self.height_mm() + 2.0 * margin;
        let (zmin, zmax) = self
            .pz
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| (lo.min(z), hi.max(z)));
        let zspan = (zmax - zmin).max(1e-9);

        let to_px = |x: f64, y: f64| -> (f64, f64) {
            (
                (x - x0) / span_x * (res - 1).max(1) as f64,
                (1.0 - (y - y0) / span_y) * (res - 1).max(1) as f64,
            )
        };
        let mut put = |xf: f64, yf: f64, val: u8| {
            let (xi, yi) = (xf.round() as i64, yf.round() as i64);
            if xi >= 0 && yi >= 0 && (xi as usize) < res && (yi as usize) < res {
                let p = &mut img[yi as usize * res + xi as usize];
                *p = (*p).max(val);
            }
        };

        for c in &self.constraints {
            if c.cut {
                continue;
            }
            let (a, b) = (c.a as usize, c.b as usize);
            let (ax, ay) = to_px(self.px[a], self.py[a]);
            let (bx, by) = to_px(self.px[b], self.py[b]);
            let steps = (ax - bx).abs().max((ay - by).abs()).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                let z = self.pz[a] + (self.pz[b] - self.pz[a]) * t;
                let shade = 64.0 + 160.0 * (z - zmin) / zspan;
                put(ax + (bx - ax) * t, ay + (by - ay) * t, shade as u8);
            }
        }
        for v in 0..self.vertex_count() {
            if self.pinned[v] {
                let (x, y) = to_px(self.px[v], self.py[v]);
                put(x, y, 255);
            }
        }
        img
    }

    /// Write a binary PGM (P5) frame produced by [`render_topdown`].
    pub fn write_topdown_pgm<W: Write>(&self, w: &mut W, resolution: usize) -> io::Result<()> {
        let res = resolution.max(1);
        let img = self.render_topdown(res);
        write!(w, "P5\n{res} {res}\n255\n")?;
        w.write_all(&img)
    }
}

fn validate_params(p: &ClothParams) -> Result<(), ClothError> {
    if !(p.alpha > 0.0 && p.alpha <= 1.0) {
        return Err(ClothError::InvalidParam { name: "alpha", value: p.alpha });
    }
    if !(p.delta >= 0.0 && p.delta < 1.0) {
        return Err(ClothError::InvalidParam { name: "delta", value: p.delta });
    }
    if !(p.tau > 0.0) || !p.tau.is_finite() {
        return Err(ClothError::InvalidParam { name: "tau", value: p.tau });
    }
    if !(p.dt > 0.0) || !p.dt.is_finite() {
        return Err(ClothError::InvalidParam { name: "dt", value: p.dt });
    }
    if p.constraint_iterations < 1 {
        return Err(ClothError::InvalidParam {
            name: "constraint_iterations",
            value: p.constraint_iterations as f64,
        });
    }
    if !p.gravity_mm.iter().all(|g| g.is_finite()) {
        return Err(ClothError::InvalidParam { name: "gravity_mm", value: f64::NAN });
    }
    Ok(())
}
