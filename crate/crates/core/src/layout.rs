//! Non-overlapping placement of portrait discs.
//!
//! A short damped force simulation spreads the discs out, then Jacobi
//! projection resolves whatever overlap is left. Viewport coordinates are
//! centred on the origin.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PortraitGeometry;

/// Accepted shortfall in pair separation.
pub const OVERLAP_EPS: f64 = 1e-6;
/// Maximum share of the viewport the discs may cover.
pub const MAX_DENSITY: f64 = 0.7;
/// Body count above which pair search switches to a uniform grid.
pub const GRID_THRESHOLD: usize = 64;

const DAMPING: f64 = 0.9;
const STIFFNESS: f64 = 0.5;
const CENTERING: f64 = 0.002;
const PROJECTION_GAP: f64 = 1e-4;
const MAX_FORCE_ITERS: usize = 30;
/// Overlap depth, relative to the smallest radius, below which the
/// simulation hands over to projection.
const SETTLED_DEPTH: f64 = 0.05;
/// Largest seeded tilt of a projection push, in radians; breaks jams of
/// collinear discs against a wall.
const MAX_TILT: f64 = 0.1;
/// Fresh starts tried before reporting non-convergence.
const MAX_ATTEMPTS: usize = 4;
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("no body with code `{0}`")]
    NotFound(String),
    #[error("body `{code}` has invalid radius {radius}")]
    InvalidBody { code: String, radius: f64 },
    #[error("viewport {width}x{height} is invalid")]
    InvalidViewport { width: f64, height: f64 },
    #[error("discs do not fit the viewport; zoom out by at least {required_scale:.3}")]
    Overcrowded { required_scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutBody {
    pub code: String,
    /// Current position; `None` seeds the body on the spiral.
    pub position: Option<[f64; 2]>,
    pub radius: f64,
    pub pinned: bool,
    pub pin_position: Option<[f64; 2]>,
}

impl LayoutBody {
    pub fn new(code: impl Into<String>, radius: f64) -> Self {
        Self {
            code: code.into(),
            position: None,
            radius,
            pinned: false,
            pin_position: None,
        }
    }

    pub fn at(mut self, x: f64, y: f64) -> Self {
        self.position = Some([x, y]);
        self
    }

    /// Collision disc enclosing the crown and its tallest bar.
    pub fn for_portrait(portrait: &PortraitGeometry) -> Self {
        Self::new(portrait.code.clone(), portrait.outer_radius())
    }
}

/// One placed disc as served to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedBody {
    pub code: String,
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub pinned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    pub bodies: Vec<PlacedBody>,
    pub converged: bool,
    /// Steps taken, summed over restarts.
    pub iterations: usize,
}

impl LayoutResult {
    /// Feeds the result back as the start of the next run, keeping pins.
    pub fn into_bodies(self, previous: &[LayoutBody]) -> Vec<LayoutBody> {
        self.bodies
            .into_iter()
            .zip(previous)
            .map(|(placed, prev)| LayoutBody {
                position: Some([placed.x, placed.y]),
                ..prev.clone()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSearch {
    /// Grid above [`GRID_THRESHOLD`] bodies, all pairs otherwise.
    #[default]
    Auto,
    Naive,
    Grid,
}

pub fn pin(bodies: &mut [LayoutBody], code: &str, position: [f64; 2]) -> Result<(), LayoutError> {
    let body = find(bodies, code)?;
    body.pinned = true;
    body.pin_position = Some(position);
    body.position = Some(position);
    Ok(())
}

pub fn unpin(bodies: &mut [LayoutBody], code: &str) -> Result<(), LayoutError> {
    let body = find(bodies, code)?;
    body.pinned = false;
    body.pin_position = None;
    Ok(())
}

fn find<'a>(bodies: &'a mut [LayoutBody], code: &str) -> Result<&'a mut LayoutBody, LayoutError> {
    bodies
        .iter_mut()
        .find(|b| b.code == code)
        .ok_or_else(|| LayoutError::NotFound(code.to_string()))
}

pub fn run_layout(
    bodies: &[LayoutBody],
    viewport: [f64; 2],
    seed: u64,
    max_iter: usize,
) -> Result<LayoutResult, LayoutError> {
    run_layout_with(bodies, viewport, seed, max_iter, PairSearch::Auto)
}

pub fn run_layout_with(
    bodies: &[LayoutBody],
    viewport: [f64; 2],
    seed: u64,
    max_iter: usize,
    search: PairSearch,
) -> Result<LayoutResult, LayoutError> {
    let [w, h] = viewport;
    if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
        return Err(LayoutError::InvalidViewport { width: w, height: h });
    }
    for b in bodies {
        if !(b.radius.is_finite() && b.radius > 0.0) {
            return Err(LayoutError::InvalidBody {
                code: b.code.clone(),
                radius: b.radius,
            });
        }
    }
    let area: f64 = bodies.iter().map(|b| PI * b.radius * b.radius).sum();
    let widest = bodies.iter().map(|b| 2.0 * b.radius).fold(0.0, f64::max);
    let required_scale = (area / (MAX_DENSITY * w * h)).sqrt().max(widest / w.min(h));
    if required_scale > 1.0 {
        return Err(LayoutError::Overcrowded { required_scale });
    }

    let mut iterations = 0;
    let mut attempt = 0;
    let (sim, converged) = loop {
        // later attempts drop starting positions and turn the spiral
        let attempt_seed = seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut sim = Sim::new(bodies, viewport, attempt_seed, search, attempt > 0);
        let (converged, used) = sim.settle(max_iter);
        iterations += used;
        attempt += 1;
        if converged || attempt == MAX_ATTEMPTS {
            break (sim, converged);
        }
    };

    Ok(LayoutResult {
        bodies: bodies
            .iter()
            .zip(&sim.pos)
            .map(|(b, p)| PlacedBody {
                code: b.code.clone(),
                x: p[0],
                y: p[1],
                r: b.radius,
                pinned: b.pinned,
            })
            .collect(),
        converged,
        iterations,
    })
}

struct Contact {
    i: usize,
    j: usize,
    /// Unit vector from i to j.
    dir: [f64; 2],
    /// r_i + r_j - distance.
    depth: f64,
}

struct Sim {
    pos: Vec<[f64; 2]>,
    vel: Vec<[f64; 2]>,
    radius: Vec<f64>,
    fixed: Vec<bool>,
    half: [f64; 2],
    seed: u64,
    grid: bool,
}

impl Sim {
    fn new(bodies: &[LayoutBody], viewport: [f64; 2], seed: u64, search: PairSearch, fresh: bool) -> Self {
        let n = bodies.len();
        let half = [viewport[0] / 2.0, viewport[1] / 2.0];
        let spiral_r = (half[0].min(half[1]) * 0.9).min((bodies.iter().map(|b| b.radius * b.radius).sum::<f64>() / 0.3).sqrt());
        let rotation = ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..2.0 * PI);
        let mut sim = Self {
            pos: Vec::with_capacity(n),
            vel: vec![[0.0; 2]; n],
            radius: bodies.iter().map(|b| b.radius).collect(),
            fixed: Vec::with_capacity(n),
            half,
            seed,
            grid: match search {
                PairSearch::Auto => n > GRID_THRESHOLD,
                PairSearch::Naive => false,
                PairSearch::Grid => true,
            },
        };
        for (k, b) in bodies.iter().enumerate() {
            let pinned = b.pinned && b.pin_position.is_some();
            let p = if let (true, Some(pin)) = (pinned, b.pin_position) {
                pin
            } else if let (false, Some(p)) = (fresh, b.position) {
                p
            } else {
                let t = k as f64 * GOLDEN_ANGLE + rotation;
                let rho = spiral_r * ((k as f64 + 0.5) / n as f64).sqrt();
                [rho * t.cos(), rho * t.sin()]
            };
            sim.fixed.push(pinned);
            sim.pos.push(if pinned { p } else { sim.clamp(p, b.radius) });
        }
        sim
    }

    /// Runs force steps then projection until nothing overlaps or the
    /// budget runs out. Returns whether it converged and the steps taken.
    fn settle(&mut self, max_iter: usize) -> (bool, usize) {
        let force_iters = (max_iter / 4).min(MAX_FORCE_ITERS);
        let settled = SETTLED_DEPTH * self.radius.iter().copied().fold(f64::INFINITY, f64::min);
        let mut forcing = true;
        for iterations in 0..=max_iter {
            let contacts = self.contacts();
            if contacts.iter().all(|c| c.depth <= OVERLAP_EPS) {
                return (true, iterations);
            }
            if iterations == max_iter {
                break;
            }
            forcing = forcing && iterations < force_iters && contacts.iter().any(|c| c.depth > settled);
            if forcing {
                self.force_step(&contacts);
            } else {
                self.project(&contacts);
            }
        }
        (false, max_iter)
    }

    fn clamp(&self, p: [f64; 2], r: f64) -> [f64; 2] {
        let bx = (self.half[0] - r).max(0.0);
        let by = (self.half[1] - r).max(0.0);
        [p[0].clamp(-bx, bx), p[1].clamp(-by, by)]
    }

    /// Overlapping pairs ordered by (i, j).
    fn contacts(&self) -> Vec<Contact> {
        if self.grid {
            return self.grid_pairs().into_iter().filter_map(|(i, j)| self.contact(i, j)).collect();
        }
        let n = self.pos.len();
        (0..n)
            .flat_map(|i| (i + 1..n).filter_map(move |j| self.contact(i, j)))
            .collect()
    }

    fn grid_pairs(&self) -> Vec<(usize, usize)> {
        use std::collections::HashMap;
        let cell = 2.0 * self.radius.iter().copied().fold(0.0, f64::max);
        let key = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, &p) in self.pos.iter().enumerate() {
            cells.entry(key(p)).or_default().push(i);
        }
        let mut pairs = Vec::new();
        for (i, &p) in self.pos.iter().enumerate() {
            let (cx, cy) = key(p);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(members) = cells.get(&(cx + dx, cy + dy)) {
                        pairs.extend(members.iter().filter(|&&j| j > i).map(|&j| (i, j)));
                    }
                }
            }
        }
        pairs.sort_unstable();
        pairs
    }

    fn contact(&self, i: usize, j: usize) -> Option<Contact> {
        let dx = self.pos[j][0] - self.pos[i][0];
        let dy = self.pos[j][1] - self.pos[i][1];
        let d = dx.hypot(dy);
        let depth = self.radius[i] + self.radius[j] - d;
        if depth <= 0.0 {
            return None;
        }
        let dir = if d > 1e-12 {
            [dx / d, dy / d]
        } else {
            let a = jitter_angle(self.seed, i, j);
            [a.cos(), a.sin()]
        };
        Some(Contact { i, j, dir, depth })
    }

    fn force_step(&mut self, contacts: &[Contact]) {
        let n = self.pos.len();
        let mut force = vec![[0.0; 2]; n];
        for c in contacts {
            let f = STIFFNESS * c.depth;
            force[c.i][0] -= f * c.dir[0];
            force[c.i][1] -= f * c.dir[1];
            force[c.j][0] += f * c.dir[0];
            force[c.j][1] += f * c.dir[1];
        }
        let centering = if n > 1 { CENTERING } else { 0.0 };
        for k in 0..n {
            if self.fixed[k] {
                continue;
            }
            for a in 0..2 {
                self.vel[k][a] = (self.vel[k][a] + force[k][a] - centering * self.pos[k][a]) * DAMPING;
            }
            let p = [self.pos[k][0] + self.vel[k][0], self.pos[k][1] + self.vel[k][1]];
            self.pos[k] = self.clamp(p, self.radius[k]);
        }
    }

    fn project(&mut self, contacts: &[Contact]) {
        let mut shift = vec![[0.0; 2]; self.pos.len()];
        for c in contacts {
            let push = c.depth + PROJECTION_GAP;
            let tilt = (jitter_angle(self.seed.wrapping_add(1), c.i, c.j) / PI - 1.0) * MAX_TILT;
            let (sin, cos) = tilt.sin_cos();
            let dir = [c.dir[0] * cos - c.dir[1] * sin, c.dir[0] * sin + c.dir[1] * cos];
            let (wi, wj) = match (self.fixed[c.i], self.fixed[c.j]) {
                (true, true) => continue,
                (true, false) => (0.0, 1.0),
                (false, true) => (1.0, 0.0),
                (false, false) => (0.5, 0.5),
            };
            shift[c.i][0] -= wi * push * dir[0];
            shift[c.i][1] -= wi * push * dir[1];
            shift[c.j][0] += wj * push * dir[0];
            shift[c.j][1] += wj * push * dir[1];
        }
        for (k, s) in shift.into_iter().enumerate() {
            if !self.fixed[k] {
                let p = [self.pos[k][0] + s[0], self.pos[k][1] + s[1]];
                self.pos[k] = self.clamp(p, self.radius[k]);
            }
        }
    }
}

/// Separation direction for coincident centres.
fn jitter_angle(seed: u64, i: usize, j: usize) -> f64 {
    let mut z = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).rotate_left(32);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 * PI
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &PlacedBody, b: &PlacedBody) -> f64 {
        (a.x - b.x).hypot(a.y - b.y)
    }

    #[test]
    fn coincident_pair_separates() {
        let bodies = vec![LayoutBody::new("a", 50.0).at(0.0, 0.0), LayoutBody::new("b", 50.0).at(0.0, 0.0)];
        let out = run_layout(&bodies, [1000.0, 1000.0], 7, 500).unwrap();
        assert!(out.converged);
        assert!(dist(&out.bodies[0], &out.bodies[1]) >= 100.0 - OVERLAP_EPS);
    }

    #[test]
    fn single_body_stays_put() {
        let bodies = vec![LayoutBody::new("a", 30.0).at(12.5, -40.0)];
        let out = run_layout(&bodies, [400.0, 400.0], 1, 100).unwrap();
        assert_eq!((out.bodies[0].x, out.bodies[0].y), (12.5, -40.0));
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn pins_are_exact_and_unpin_frees() {
        let mut bodies: Vec<_> = (0..20).map(|i| LayoutBody::new(format!("c{i}"), 20.0)).collect();
        pin(&mut bodies, "c3", [0.1, 0.2]).unwrap();
        let out = run_layout(&bodies, [600.0, 600.0], 3, 2000).unwrap();
        assert!(out.converged);
        assert_eq!((out.bodies[3].x, out.bodies[3].y), (0.1, 0.2));
        assert!(out.bodies[3].pinned);

        unpin(&mut bodies, "c3").unwrap();
        let mut crowd = bodies.clone();
        crowd[4].position = Some([0.1, 0.2]);
        let out = run_layout(&crowd, [600.0, 600.0], 3, 2000).unwrap();
        assert!(!out.bodies[3].pinned);
        assert_ne!((out.bodies[3].x, out.bodies[3].y), (0.1, 0.2));
        assert_eq!(pin(&mut bodies, "nope", [0.0, 0.0]), Err(LayoutError::NotFound("nope".into())));
        assert_eq!(unpin(&mut bodies, "nope"), Err(LayoutError::NotFound("nope".into())));
    }

    #[test]
    fn conflicting_pins_are_flagged() {
        let mut bodies = vec![LayoutBody::new("a", 40.0), LayoutBody::new("b", 40.0), LayoutBody::new("c", 10.0)];
        pin(&mut bodies, "a", [0.0, 0.0]).unwrap();
        pin(&mut bodies, "b", [30.0, 0.0]).unwrap();
        let out = run_layout(&bodies, [500.0, 500.0], 0, 200).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, MAX_ATTEMPTS * 200);
        assert_eq!((out.bodies[1].x, out.bodies[1].y), (30.0, 0.0));
    }

    #[test]
    fn overcrowding_reports_scale() {
        let bodies: Vec<_> = (0..10).map(|i| LayoutBody::new(format!("{i}"), 10.0)).collect();
        let area = 10.0 * PI * 100.0;
        match run_layout(&bodies, [50.0, 50.0], 0, 10) {
            Err(LayoutError::Overcrowded { required_scale }) => {
                assert!((required_scale - (area / (0.7 * 2500.0)).sqrt()).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
        let wide = vec![LayoutBody::new("w", 60.0)];
        assert!(matches!(run_layout(&wide, [100.0, 1000.0], 0, 10), Err(LayoutError::Overcrowded { .. })));
        let bad = vec![LayoutBody::new("z", 0.0)];
        assert!(matches!(run_layout(&bad, [100.0, 100.0], 0, 10), Err(LayoutError::InvalidBody { .. })));
    }

    #[test]
    fn grid_search_matches_naive_bitwise() {
        let bodies: Vec<_> = (0..128).map(|i| LayoutBody::new(format!("{i}"), 10.0 + (i % 7) as f64 * 3.0)).collect();
        let a = run_layout_with(&bodies, [1200.0, 900.0], 42, 3000, PairSearch::Naive).unwrap();
        let b = run_layout_with(&bodies, [1200.0, 900.0], 42, 3000, PairSearch::Grid).unwrap();
        assert!(a.converged);
        assert_eq!(a, b);
        let c = run_layout(&bodies, [1200.0, 900.0], 42, 3000).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn bodies_stay_inside_viewport() {
        let bodies: Vec<_> = (0..40).map(|i| LayoutBody::new(format!("{i}"), 25.0).at(900.0, -900.0)).collect();
        let out = run_layout(&bodies, [600.0, 500.0], 9, 4000).unwrap();
        assert!(out.converged);
        for b in &out.bodies {
            assert!(b.x.abs() <= 300.0 - b.r && b.y.abs() <= 250.0 - b.r);
        }
    }
}
